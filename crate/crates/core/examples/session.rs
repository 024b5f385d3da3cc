//! Multi-round sessions against each adversary strategy, with the
//! per-round transcript written as CSV.
//!
//! ```bash
//! cargo run --example session            # summary per strategy
//! cargo run --example session -- hide    # CSV transcript for one strategy
//! ```

use std::io;

use zigzag_nec::adversary::Strategy;
use zigzag_nec::harness::{run_session, write_transcripts, SessionConfig};
use zigzag_nec::{NetworkParams, Result};

fn main() -> Result<()> {
    let params = NetworkParams::p0();
    if let Some(name) = std::env::args().nth(1) {
        let cfg = SessionConfig { params, rounds: 6, strategy: name.parse()?, seed: 2 };
        let report = run_session(&cfg)?;
        return write_transcripts(io::stdout().lock(), &report.transcripts);
    }

    let strategies = ["none", "single-first", "hide", "r-only", "feedback-tamper", "feedback-tamper:force", "random:4"];
    for name in strategies {
        let strategy: Strategy = name.parse()?;
        let cfg = SessionConfig { params, rounds: 6, strategy, seed: 9 };
        let report = run_session(&cfg)?;
        let events = report.transcripts.iter().filter(|t| t.is_event()).count();
        let owned: Vec<String> = report.owned.iter().map(ToString::to_string).collect();
        let found: Vec<String> = report.identified.iter().map(ToString::to_string).collect();
        println!(
            "{name:<22} owned [{:<6}] identified [{:<6}] events {events}  {}",
            owned.join(" "),
            found.join(" "),
            report.verdict
        );
    }
    Ok(())
}
