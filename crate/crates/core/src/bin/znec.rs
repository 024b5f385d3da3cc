use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use zigzag_nec::adversary::Strategy;
use zigzag_nec::bounds::{BoundReport, GridSpec, NetworkParams};
use zigzag_nec::codec::CodecKeys;
use zigzag_nec::harness::{
    attack_demo, run_session_with_keys, sweep, write_bounds, write_transcripts, ConfigFile, SessionConfig,
};
use zigzag_nec::{Error, Result};

#[derive(Parser)]
#[command(name = "znec", version, about = "Zig-zag network error correction toolkit")]
struct Cli {
    /// key=value settings file; command-line flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Upper bound, Singleton-style bounds and tightness for one network
    Bounds {
        #[command(flatten)]
        net: NetArgs,
        /// Emit a CSV row instead of a summary
        #[arg(long)]
        csv: bool,
    },
    /// Bounds for every tuple of a parameter grid
    Sweep {
        #[arg(long)]
        a_max: Option<usize>,
        #[arg(long)]
        c_max: Option<usize>,
        #[arg(long)]
        b_max: Option<usize>,
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(long)]
        m_max: Option<usize>,
        #[arg(long)]
        z_max: Option<usize>,
        /// Only keep tuples meeting the tight conditions
        #[arg(long)]
        tight_only: bool,
        /// Emit CSV instead of a summary
        #[arg(long)]
        csv: bool,
    },
    /// Run a multi-round session against an adversary strategy
    Simulate {
        #[command(flatten)]
        net: NetArgs,
        #[arg(long)]
        rounds: Option<usize>,
        /// NAME[:ARGS], e.g. single-first:u1, hide, r-only:0:1, feedback-tamper:force, random:3
        #[arg(long)]
        strategy: Option<String>,
        /// Defaults to ZNEC_SEED, then 0
        #[arg(long)]
        seed: Option<u64>,
        /// Write per-round transcripts as CSV to stdout
        #[arg(long)]
        csv: bool,
        /// Write the generated key blob to this file
        #[arg(long)]
        keys_out: Option<PathBuf>,
        /// Load keys from a blob instead of generating them
        #[arg(long)]
        keys_in: Option<PathBuf>,
    },
    /// Replay the converse construction on a tiny preset network
    AttackDemo {
        #[arg(long)]
        tiny_preset: Option<String>,
    },
}

#[derive(Args)]
struct NetArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    a: Option<usize>,
    #[arg(long)]
    b: Option<usize>,
    #[arg(long)]
    c: Option<usize>,
    #[arg(long)]
    z: Option<usize>,
    #[arg(long)]
    q: Option<u32>,
}

impl NetArgs {
    fn resolve(self, cfg: &ConfigFile) -> Result<NetworkParams> {
        let need = |key: &str, flag: Option<usize>| -> Result<usize> {
            cfg.pick(key, flag)?.ok_or_else(|| Error::Config(format!("missing --{key}")))
        };
        let q = cfg.pick("q", self.q)?.unwrap_or(257);
        NetworkParams::new(
            need("n", self.n)?,
            need("m", self.m)?,
            need("a", self.a)?,
            need("b", self.b)?,
            need("c", self.c)?,
            need("z", self.z)?,
            q,
        )
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let cfg = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let stdout = io::stdout();
    match cli.command {
        Command::Bounds { net, csv } => {
            let report = BoundReport::compute(&net.resolve(&cfg)?);
            if csv {
                write_bounds(stdout.lock(), &[report])?;
            } else {
                print_report(&report);
            }
        }
        Command::Sweep { a_max, c_max, b_max, n_max, m_max, z_max, tight_only, csv } => {
            let d = GridSpec::default();
            let grid = GridSpec {
                a_max: cfg.pick("a-max", a_max)?.unwrap_or(d.a_max),
                c_max: cfg.pick("c-max", c_max)?.unwrap_or(d.c_max),
                b_max: cfg.pick("b-max", b_max)?.unwrap_or(d.b_max),
                n_max: cfg.pick("n-max", n_max)?.unwrap_or(d.n_max),
                m_max: cfg.pick("m-max", m_max)?.unwrap_or(d.m_max),
                z_max: cfg.pick("z-max", z_max)?.unwrap_or(d.z_max),
            };
            let mut reports = sweep(&grid);
            if tight_only || cfg.pick("tight-only", None::<bool>)?.unwrap_or(false) {
                reports.retain(|r| r.tight);
            }
            if csv {
                write_bounds(stdout.lock(), &reports)?;
            } else {
                let tight: Vec<_> = reports.iter().filter(|r| r.tight).collect();
                let ordered = tight.iter().filter(|r| r.ub < r.sb.min_sb123()).count();
                println!("tuples     {}", reports.len());
                println!("tight      {}", tight.len());
                println!("UB < SB1-3 {ordered} of {}", tight.len());
            }
        }
        Command::Simulate { net, rounds, strategy, seed, csv, keys_out, keys_in } => {
            let keys = match keys_in {
                Some(path) => {
                    let blob = std::fs::read(&path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                    CodecKeys::from_blob(&blob)?
                }
                None => {
                    let params = net.resolve(&cfg)?;
                    let key_seed = cfg.seed(seed, 0)?;
                    CodecKeys::generate(&params, key_seed)?
                }
            };
            let strategy: Strategy = cfg.pick("strategy", strategy)?.unwrap_or_else(|| "none".into()).parse()?;
            let session = SessionConfig {
                params: *keys.params(),
                rounds: cfg.pick("rounds", rounds)?.unwrap_or(3),
                strategy,
                seed: cfg.seed(seed, 0)?,
            };
            if let Some(path) = keys_out {
                let mut f = File::create(&path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                f.write_all(&keys.to_blob()).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            }
            let report = run_session_with_keys(&session, &keys)?;
            if csv {
                write_transcripts(stdout.lock(), &report.transcripts)?;
            } else {
                println!("{}  strategy={}  seed={}", session.params, session.strategy, session.seed);
                for t in &report.transcripts {
                    println!(
                        "round {:>3}  attacked={:<12} cs={} b={:<22} mode={:<16} identified={} correct={}",
                        t.round, t.attacked, t.cs, t.b_action, t.mode, t.identified, t.correct
                    );
                }
                let owned: Vec<String> = report.owned.iter().map(ToString::to_string).collect();
                let found: Vec<String> = report.identified.iter().map(ToString::to_string).collect();
                println!("owned [{}] identified [{}]", owned.join(" "), found.join(" "));
                println!("verdict {}", report.verdict);
            }
            if !report.verdict.is_correct() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::AttackDemo { tiny_preset } => {
            let preset: String = cfg.pick("tiny-preset", tiny_preset)?.unwrap_or_else(|| "tiny".into());
            let demo = attack_demo(&preset)?;
            let (d1, d2) = demo.digests();
            println!("preset     {preset} ({})", demo.params);
            println!("codebook   {} messages, cut bound M = {}", demo.codebook.len(), demo.pair.bound);
            println!("pair       #{} {:?} vs #{} {:?}", demo.pair.x, demo.codebook[demo.pair.x], demo.pair.x_prime, demo.codebook[demo.pair.x_prime]);
            println!("branch one {d1:016x}");
            println!("branch two {d2:016x}");
            println!("identical  {}", demo.branch_one == demo.branch_two);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn print_report(r: &BoundReport) {
    println!("{}", r.params);
    println!("category   {}", r.category.number());
    println!("UB         {}", r.ub);
    for (name, v) in r.sb.as_pairs() {
        println!("{name:<10} {v}");
    }
    println!("tight      {}", r.tight);
    println!("margin(2)  {}", r.margin_after_two);
}
