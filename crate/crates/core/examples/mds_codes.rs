//! Systematic MDS codes: encoding, erasure recovery and error correction.
//!
//! ```bash
//! cargo run --example mds_codes
//! ```

use std::collections::BTreeMap;

use zigzag_nec::{make_mds, Result};

fn main() -> Result<()> {
    let code = make_mds(3, 7, 11, 0)?;
    println!("[{}, {}] code over GF(11), distance {}", code.length(), code.dim(), code.min_distance());
    println!("every 3 columns independent: {}", code.verify_mds());

    let message = vec![4, 0, 9];
    let word = code.encode(&message)?;
    println!("message {message:?} -> codeword {word:?}");

    // Any three surviving coordinates recover the message.
    let known: BTreeMap<usize, u32> = [(1, word[1]), (4, word[4]), (6, word[6])].into_iter().collect();
    println!("from positions 1, 4, 6: {:?}", code.erasure_decode(&known)?);

    // Two corrupted coordinates are within the correction radius.
    let mut received = word.clone();
    received[0] = (received[0] + 3) % 11;
    received[5] = (received[5] + 7) % 11;
    let decoded = code.error_decode(&received, 2)?;
    println!("corrected errors at {:?}: {:?}", decoded.error_positions, decoded.message);

    // Puncturing keeps the MDS property.
    let short = code.puncture(5)?;
    println!("punctured to length {}: MDS {}", short.length(), short.verify_mds());
    Ok(())
}
