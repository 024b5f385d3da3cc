//! Multi-round sessions, bound sweeps, and the file formats around them.

use std::collections::{BTreeMap, BTreeSet};
use std::hash::Hasher;
use std::io::Write;
use std::path::Path;

use fnv::FnvHasher;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::adversary::{Adversary, AdversaryView, Strategy};
use crate::bounds::{confusion_attack, tiny_preset, BoundReport, ConfusionPair, CutObservation, GridSpec, LinkId, NetworkParams};
use crate::codec::{CodecKeys, MessageBlock};
use crate::error::{Error, Result};
use crate::galois::SymbolMatrix;
use crate::signaling::{NodeAState, NodeBState, RowSignal};
use crate::sink::{Sink, SinkView};

/// Environment variable consulted for the seed when neither a flag nor the config sets one.
pub const SEED_ENV: &str = "ZNEC_SEED";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionConfig {
    pub params: NetworkParams,
    pub rounds: usize,
    pub strategy: Strategy,
    pub seed: u64,
}

/// One row of the session CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoundTranscript {
    pub round: usize,
    pub attacked: String,
    pub feedback: String,
    pub feedback_symbols: usize,
    pub cs: usize,
    pub b_action: String,
    pub claim: bool,
    pub view_digest: String,
    pub mode: String,
    pub hypotheses: usize,
    pub newly_identified: String,
    pub identified: usize,
    pub correct: bool,
}

impl RoundTranscript {
    /// A round with a CS signal or a claim.
    pub fn is_event(&self) -> bool {
        self.cs > 0 || self.claim
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    AllCorrect,
    Failure { round: usize, reason: String },
}

impl Verdict {
    pub fn is_correct(&self) -> bool {
        *self == Verdict::AllCorrect
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::AllCorrect => f.write_str("ALL_CORRECT"),
            Verdict::Failure { round, reason } => write!(f, "FAILURE({round}): {reason}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SessionReport {
    pub transcripts: Vec<RoundTranscript>,
    pub verdict: Verdict,
    pub owned: BTreeSet<LinkId>,
    pub identified: BTreeSet<LinkId>,
}

/// 64-bit FNV-1a over the little-endian bytes of `symbols`.
pub fn digest(symbols: &[u32]) -> u64 {
    let mut h = FnvHasher::default();
    for s in symbols {
        h.write(&s.to_le_bytes());
    }
    h.finish()
}

fn view_digest(view: &SinkView) -> u64 {
    let mut all: Vec<u32> = view.upstream.data().to_vec();
    all.extend_from_slice(view.downstream.data());
    for row in &view.feedback_echo.rows {
        if let RowSignal::Values { payload, .. } = row {
            all.extend_from_slice(payload);
        }
    }
    if let Some(w) = &view.claim {
        all.extend_from_slice(w.data());
    }
    digest(&all)
}

fn join_links<'a>(links: impl IntoIterator<Item = &'a LinkId>) -> String {
    links.into_iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

/// One adversarial session, advanced a round at a time.
pub struct Session<'k> {
    keys: &'k CodecKeys,
    relay_a: NodeAState,
    relay_b: NodeBState,
    sink: Sink,
    adversary: Adversary,
    rng: ChaCha8Rng,
    round: usize,
}

impl<'k> Session<'k> {
    pub fn new(keys: &'k CodecKeys, strategy: Strategy, seed: u64) -> Result<Self> {
        Ok(Self {
            keys,
            relay_a: NodeAState::new(keys),
            relay_b: NodeBState::new(keys),
            sink: Sink::new(keys),
            adversary: Adversary::new(strategy, keys, seed)?,
            rng: ChaCha8Rng::seed_from_u64(seed),
            round: 0,
        })
    }

    pub fn owned(&self) -> &BTreeSet<LinkId> {
        self.adversary.owned()
    }

    pub fn identified(&self) -> &BTreeSet<LinkId> {
        self.sink.identified()
    }

    /// Runs one round; `Err` only for harness-level faults, decode failures are in the transcript.
    pub fn step(&mut self) -> Result<(RoundTranscript, Option<String>)> {
        let keys = self.keys;
        let p = *keys.params();
        let f = keys.field();
        let msg = MessageBlock::random(keys, &mut self.rng);
        let cw = keys.encode(&msg)?;
        let action = self.adversary.next_action(&AdversaryView { round: self.round, keys, relay_a: &self.relay_a });
        action.validate(&p, self.adversary.owned())?;

        let mut upstream = cw.upstream_block();
        let mut downstream = cw.downstream_block();
        for (link, e) in &action.errors {
            match *link {
                LinkId::Upstream(i) => add_column(&mut upstream, i, e),
                LinkId::Downstream(j) => add_column(&mut downstream, j, e),
                LinkId::Feedback => {}
            }
        }
        let echo = self.relay_a.observe(keys, &upstream)?;
        let mut received = echo.clone();
        if let Some(e) = action.errors.get(&LinkId::Feedback) {
            received.apply_errors(f, e);
        }
        let b_action = self.relay_b.verify(keys, &received, &msg)?;
        let claim = if b_action.send_claim {
            let mut w = keys.claim_matrix(&msg)?;
            for (&j, e) in &action.claim_errors {
                add_column(&mut w, j, e);
            }
            Some(w)
        } else {
            None
        };
        let view = SinkView { upstream, downstream, feedback_echo: echo, claim };
        let outcome = self.sink.decode(keys, &view);

        let mut failure = match &outcome.message {
            Ok(m) if *m == msg => None,
            Ok(_) => Some("decoded message differs from the transmitted one".to_string()),
            Err(e) => Some(e.to_string()),
        };
        if let Some(l) = self.sink.identified().iter().find(|l| !self.adversary.owned().contains(l)) {
            failure = Some(format!("honest link {l} identified"));
        }
        let attacked: Vec<&LinkId> =
            action.errors.iter().filter(|(_, e)| e.iter().any(|&v| v != 0)).map(|(l, _)| l).collect();
        let t = RoundTranscript {
            round: self.round,
            attacked: join_links(attacked),
            feedback: view.feedback_echo.describe(),
            feedback_symbols: view.feedback_echo.symbol_count(),
            cs: view.feedback_echo.cs_count(),
            b_action: b_action.label().to_string(),
            claim: view.claim.is_some(),
            view_digest: format!("{:016x}", view_digest(&view)),
            mode: outcome.mode.to_string(),
            hypotheses: outcome.hypotheses,
            newly_identified: join_links(&outcome.newly_identified),
            identified: self.sink.identified().len(),
            correct: failure.is_none(),
        };
        self.round += 1;
        Ok((t, failure))
    }
}

fn add_column(m: &mut SymbolMatrix, col: usize, e: &[u32]) {
    let f = m.field();
    for (r, &v) in e.iter().enumerate().take(m.rows()) {
        m.set(r, col, f.add(m.get(r, col), v));
    }
}

/// Runs a session with keys drawn from the config seed.
pub fn run_session(cfg: &SessionConfig) -> Result<SessionReport> {
    let keys = CodecKeys::generate(&cfg.params, cfg.seed)?;
    run_session_with_keys(cfg, &keys)
}

/// Runs a session on existing keys; the first failing round ends it.
pub fn run_session_with_keys(cfg: &SessionConfig, keys: &CodecKeys) -> Result<SessionReport> {
    if keys.params() != &cfg.params {
        return Err(Error::Config("keys were generated for different parameters".into()));
    }
    let mut session = Session::new(keys, cfg.strategy.clone(), cfg.seed)?;
    let mut transcripts = Vec::with_capacity(cfg.rounds);
    let mut verdict = Verdict::AllCorrect;
    for _ in 0..cfg.rounds {
        let (t, failure) = session.step()?;
        let round = t.round;
        transcripts.push(t);
        if let Some(reason) = failure {
            verdict = Verdict::Failure { round, reason };
            break;
        }
    }
    Ok(SessionReport {
        transcripts,
        verdict,
        owned: session.owned().clone(),
        identified: session.identified().clone(),
    })
}

pub fn write_transcripts<W: Write>(out: W, rows: &[RoundTranscript]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Config(format!("csv: {e}")))?;
    }
    w.flush().map_err(|e| Error::Config(format!("csv: {e}")))
}

/// Flat CSV row of a bound report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BoundRow {
    pub n: usize,
    pub m: usize,
    pub a: usize,
    pub b: usize,
    pub c: usize,
    pub z: usize,
    pub category: u8,
    pub ub: i64,
    pub sb1: i64,
    pub sb2: i64,
    pub sb3: i64,
    pub sb4: i64,
    pub tight: bool,
    pub margin_at_2: i64,
}

impl From<&BoundReport> for BoundRow {
    fn from(r: &BoundReport) -> Self {
        let p = &r.params;
        Self {
            n: p.n,
            m: p.m,
            a: p.a,
            b: p.b,
            c: p.c,
            z: p.z,
            category: r.category.number(),
            ub: r.ub,
            sb1: r.sb.sb1,
            sb2: r.sb.sb2,
            sb3: r.sb.sb3,
            sb4: r.sb.sb4,
            tight: r.tight,
            margin_at_2: r.margin_after_two,
        }
    }
}

pub fn sweep(grid: &GridSpec) -> Vec<BoundReport> {
    grid.tuples(257).iter().map(BoundReport::compute).collect()
}

pub fn write_bounds<W: Write>(out: W, reports: &[BoundReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(BoundRow::from(r)).map_err(|e| Error::Config(format!("csv: {e}")))?;
    }
    w.flush().map_err(|e| Error::Config(format!("csv: {e}")))
}

/// Result of running the confusion construction on a named tiny preset.
#[derive(Debug, Clone)]
pub struct AttackDemo {
    pub params: NetworkParams,
    pub codebook: Vec<Vec<u32>>,
    pub pair: ConfusionPair,
    pub branch_one: CutObservation,
    pub branch_two: CutObservation,
}

impl AttackDemo {
    pub fn digests(&self) -> (u64, u64) {
        let flat = |o: &CutObservation| digest(&[o.upstream.concat(), o.downstream.concat()].concat());
        (flat(&self.branch_one), flat(&self.branch_two))
    }
}

pub fn attack_demo(preset: &str) -> Result<AttackDemo> {
    let (model, z1, z2) = tiny_preset(preset)?;
    let params = *crate::bounds::FourNodeLinks::params(&model);
    let cut = crate::bounds::four_node_cut(&params);
    let names1: Vec<String> = z1.iter().map(ToString::to_string).collect();
    let names2: Vec<String> = z2.iter().map(ToString::to_string).collect();
    let r1: Vec<&str> = names1.iter().map(String::as_str).collect();
    let r2: Vec<&str> = names2.iter().map(String::as_str).collect();
    let bound = crate::bounds::cut_bound(&cut, &r1, &r2, params.z)?;
    let size = (params.q as usize).pow(bound.m as u32) + 1;
    let codebook = model.codebook(size);
    let pair = confusion_attack(&model, &codebook, &z1, &z2)?;
    let (branch_one, branch_two) = crate::adversary::confusion_replay(&model, &codebook, &pair)?;
    Ok(AttackDemo { params, codebook, pair, branch_one, branch_two })
}

/// `key = value` settings; blank lines and `#` comments are skipped.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", k + 1)))?;
            values.insert(key.trim().replace('_', "-"), value.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// The flag value if given, else the file's value, else `None`.
    pub fn pick<T: std::str::FromStr>(&self, key: &str, flag: Option<T>) -> Result<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|_| Error::Config(format!("bad value {v:?} for {key}"))))
            .transpose()
    }

    /// Seed precedence: flag, then config file, then `ZNEC_SEED`, then `fallback`.
    pub fn seed(&self, flag: Option<u64>, fallback: u64) -> Result<u64> {
        if let Some(s) = self.pick("seed", flag)? {
            return Ok(s);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => v.trim().parse().map_err(|_| Error::Config(format!("{SEED_ENV}={v:?} is not a number"))),
            Err(_) => Ok(fallback),
        }
    }
}
