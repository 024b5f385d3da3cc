//! How the relays react when an upstream link is corrupted.
//!
//! Node A checks every row of what it received and reports on the
//! feedback link; node B compares those reports against the source data
//! and asks for the claim block when something disagrees.
//!
//! ```bash
//! cargo run --example signaling_demo
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use zigzag_nec::codec::{CodecKeys, MessageBlock};
use zigzag_nec::signaling::{NodeAState, NodeBState};
use zigzag_nec::{NetworkParams, Result};

fn main() -> Result<()> {
    let p = NetworkParams::p0();
    let keys = CodecKeys::generate(&p, 3)?;
    let f = keys.field();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut relay_a = NodeAState::new(&keys);
    let mut relay_b = NodeBState::new(&keys);

    for round in 0..3 {
        let msg = MessageBlock::random(&keys, &mut rng);
        let mut received = keys.encode(&msg)?.upstream_block();
        if round == 1 {
            // corrupt the top symbol of the second upstream link
            received.set(0, 1, f.add(received.get(0, 1), 17));
        }
        let feedback = relay_a.observe(&keys, &received)?;
        let action = relay_b.verify(&keys, &feedback, &msg)?;
        println!(
            "round {round}: feedback {:<24} symbols {}  B: {}",
            feedback.describe(),
            feedback.symbol_count(),
            action.label()
        );
    }
    for (r, row) in relay_a.rows.iter().enumerate() {
        println!("row {r}: A localized positions {:?}", row.identified);
    }
    println!("CS signals {}, claims {}", relay_a.cs_sent, relay_b.claims_sent);
    Ok(())
}
