//! Capacity bounds for the two reference networks and the four-node cut.
//!
//! ```bash
//! cargo run --example bounds_report
//! ```

use zigzag_nec::bounds::{four_node_cut, identification_margin, cut_bound, min_cut_bound, BoundReport};
use zigzag_nec::{NetworkParams, Result};

fn main() -> Result<()> {
    for p in [NetworkParams::p0(), NetworkParams::p1()] {
        let r = BoundReport::compute(&p);
        println!("{p}");
        println!("  category {}  tight {}", r.category.number(), r.tight);
        println!("  UB = {}", r.ub);
        for (name, v) in r.sb.as_pairs() {
            println!("  {name} = {v}");
        }
        println!("  identification margin after two links: {}", identification_margin(&p, 2));

        // The upper bound is the cut bound with z upstream and z downstream links removed.
        let cut = four_node_cut(&p);
        let z1: Vec<String> = (0..p.z).map(|i| format!("u{}", i + 1)).collect();
        let z2: Vec<String> = (0..p.z).map(|j| format!("d{}", j + 1)).collect();
        let z1: Vec<&str> = z1.iter().map(String::as_str).collect();
        let z2: Vec<&str> = z2.iter().map(String::as_str).collect();
        let bound = cut_bound(&cut, &z1, &z2, p.z)?;
        println!("  cut bound with {z1:?} / {z2:?}: {} (feedback kept: {:?}, refined {})", bound.m, bound.w1, bound.refined_m);
        if cut.forward_links.len() <= 12 {
            let (m, a, b) = min_cut_bound(&cut, p.z)?;
            println!("  smallest cut bound {m} at {a:?} / {b:?}");
        }
    }
    Ok(())
}
