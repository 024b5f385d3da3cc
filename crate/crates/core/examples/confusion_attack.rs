//! The converse construction: with more codewords than the cut bound
//! allows, two messages become indistinguishable at the sink.
//!
//! ```bash
//! cargo run --example confusion_attack
//! ```

use zigzag_nec::harness::attack_demo;
use zigzag_nec::Result;

fn main() -> Result<()> {
    let demo = attack_demo("tiny")?;
    let pair = &demo.pair;
    println!("{}", demo.params);
    println!("cut bound {} symbols, codebook of {} messages", pair.bound, demo.codebook.len());
    println!("message #{}: {:?}", pair.x, demo.codebook[pair.x]);
    println!("message #{}: {:?}", pair.x_prime, demo.codebook[pair.x_prime]);
    println!("errors while sending the first:  {:?}", pair.errors_z1);
    println!("errors while sending the second: {:?}", pair.errors_z2);
    println!("sink sees upstream {:?}, downstream {:?}", pair.observation.upstream, pair.observation.downstream);
    let (one, two) = demo.digests();
    println!("replayed observation digests {one:016x} / {two:016x}");
    println!("indistinguishable: {}", demo.branch_one == demo.branch_two);
    Ok(())
}
