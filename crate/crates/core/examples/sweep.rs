//! Bound sweep over the default parameter grid.
//!
//! ```bash
//! cargo run --example sweep
//! ```

use std::collections::BTreeMap;

use zigzag_nec::bounds::GridSpec;
use zigzag_nec::harness::sweep;

fn main() {
    let reports = sweep(&GridSpec::default());
    let tight: Vec<_> = reports.iter().filter(|r| r.tight).collect();
    println!("{} tuples, {} meet the tight conditions", reports.len(), tight.len());

    let mut per_category: BTreeMap<u8, usize> = BTreeMap::new();
    for r in &tight {
        *per_category.entry(r.category.number()).or_default() += 1;
    }
    for (cat, count) in per_category {
        println!("  category {cat}: {count}");
    }

    let worst = tight.iter().map(|r| r.sb.min_sb123() - r.ub).min().unwrap_or_default();
    println!("smallest gap between UB and the best earlier bound: {worst}");
    let margin = tight.iter().map(|r| r.margin_after_two).min().unwrap_or_default();
    println!("smallest identification margin after two links: {margin}");
}
