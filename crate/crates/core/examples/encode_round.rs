//! Key generation, one encoded round, and the portable key blob.
//!
//! ```bash
//! cargo run --example encode_round
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use zigzag_nec::codec::{CodecKeys, MessageBlock};
use zigzag_nec::harness::digest;
use zigzag_nec::{NetworkParams, Result};

fn main() -> Result<()> {
    let p = NetworkParams::p0();
    let keys = CodecKeys::generate(&p, 11)?;
    println!("{p}: {} message symbols per round", keys.message_len());
    for (r, row) in keys.layout().iter().enumerate() {
        println!(
            "  row {r}: {} plain, {} feedback-checked, {} parity ({:?})",
            row.plain,
            row.feedback,
            row.parity,
            keys.row_case(r)
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let msg = MessageBlock::random(&keys, &mut rng);
    let word = keys.encode(&msg)?;
    println!("message {:?}", msg.flatten());
    for i in 0..p.n {
        println!("  u{} carries {:?}", i + 1, word.upstream(i));
    }
    for j in 0..p.m {
        println!("  d{} carries {:?}", j + 1, word.downstream(j));
    }
    for r in 0..keys.layout().len() {
        let received = word.upstream_block();
        println!("  row {r} feedback {:?}", keys.feedback_symbols(r, received.row(r))?);
    }

    let blob = keys.to_blob();
    let restored = CodecKeys::from_blob(&blob)?;
    println!("key blob: {} bytes, digest {:016x}", blob.len(), digest(&blob.iter().map(|&b| b as u32).collect::<Vec<_>>()));
    println!("restored keys encode identically: {}", restored.encode(&msg)? == word);
    Ok(())
}
