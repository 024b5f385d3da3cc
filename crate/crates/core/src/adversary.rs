//! Attack strategies. The adversary owns a fixed set of at most `z` links
//! for a whole session and chooses additive errors on them each round.
//! It knows the keys and the relays' public state.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bounds::{evaluate_links, CutObservation, ConfusionPair, FourNodeLinks, LinkId, NetworkParams};
use crate::codec::CodecKeys;
use crate::error::{Error, Result};
use crate::galois::{Field, SymbolMatrix};
use crate::signaling::NodeAState;

/// Errors for one round.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AdversaryAction {
    pub round: usize,
    /// Per owned link, one error symbol per unit of capacity.
    pub errors: BTreeMap<LinkId, Vec<u32>>,
    /// Per owned downstream link, errors on the claim column it carries
    /// (`a − c` symbols), used only when a claim is sent.
    pub claim_errors: BTreeMap<usize, Vec<u32>>,
}

impl AdversaryAction {
    pub fn is_empty(&self) -> bool {
        self.errors.values().chain(self.claim_errors.values()).flatten().all(|&v| v == 0)
    }

    /// Every touched link is owned, within capacity and in the field.
    pub fn validate(&self, p: &NetworkParams, owned: &BTreeSet<LinkId>) -> Result<()> {
        if owned.len() > p.z {
            return Err(Error::InternalConsistency(format!("{} owned links exceed z = {}", owned.len(), p.z)));
        }
        for (link, e) in &self.errors {
            if !owned.contains(link) {
                return Err(Error::InternalConsistency(format!("error on unowned link {link}")));
            }
            if e.len() > p.capacity(*link) || e.iter().any(|&v| v >= p.q) {
                return Err(Error::InternalConsistency(format!("error vector on {link} exceeds capacity")));
            }
        }
        for (j, e) in &self.claim_errors {
            if !owned.contains(&LinkId::Downstream(*j)) || e.len() > p.a - p.c || e.iter().any(|&v| v >= p.q) {
                return Err(Error::InternalConsistency(format!("bad claim error on d{}", j + 1)));
            }
        }
        Ok(())
    }
}

/// Strategy selection. Fields left empty are drawn from the session seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Strategy {
    None,
    /// One link; round `t` carries `schedule[t] · base`.
    SingleFirst { link: Option<LinkId>, base: Vec<u32>, schedule: Vec<u32>, claim: Vec<u32> },
    /// Attack `first`, then try to slip errors past both relays on the whole owned set.
    Hide { first: Option<LinkId>, then: Vec<LinkId> },
    /// Only one parity coordinate of one row.
    ROnly { row: Option<usize>, position: Option<usize> },
    /// Owns the feedback link and up to `z − 1` upstream links; errors that
    /// node A cannot see are cancelled on the feedback so node B stays quiet.
    FeedbackTamper { upstream: Vec<LinkId>, force_claim: bool },
    Random { seed: u64 },
    Scripted { owned: BTreeSet<LinkId>, actions: Vec<AdversaryAction> },
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::None => "none",
            Strategy::SingleFirst { .. } => "single-first",
            Strategy::Hide { .. } => "hide",
            Strategy::ROnly { .. } => "r-only",
            Strategy::FeedbackTamper { .. } => "feedback-tamper",
            Strategy::Random { .. } => "random",
            Strategy::Scripted { .. } => "scripted",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn parse_links(s: &str) -> Result<Vec<LinkId>> {
    s.split(',').filter(|t| !t.is_empty()).map(str::parse).collect()
}

fn parse_symbols(s: &str) -> Result<Vec<u32>> {
    s.split(',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| Error::Config(format!("bad symbol {t:?}"))))
        .collect()
}

impl FromStr for Strategy {
    type Err = Error;

    /// `NAME[:ARG[:ARG]]`, e.g. `single-first:u1:1,0,2`, `hide:u1:d2`,
    /// `r-only:1:2`, `feedback-tamper:u2:force`, `random:7`.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        let name = parts.next().unwrap_or_default();
        let args: Vec<&str> = parts.collect();
        let arg = |i: usize| args.get(i).copied().filter(|a| !a.is_empty());
        let num = |i: usize| -> Result<Option<usize>> {
            arg(i).map(|a| a.parse().map_err(|_| Error::Config(format!("bad number {a:?}")))).transpose()
        };
        match name {
            "none" => Ok(Strategy::None),
            "single-first" => Ok(Strategy::SingleFirst {
                link: arg(0).map(str::parse).transpose()?,
                schedule: arg(1).map(parse_symbols).transpose()?.unwrap_or_default(),
                base: arg(2).map(parse_symbols).transpose()?.unwrap_or_default(),
                claim: vec![],
            }),
            "hide" => Ok(Strategy::Hide {
                first: arg(0).map(str::parse).transpose()?,
                then: arg(1).map(parse_links).transpose()?.unwrap_or_default(),
            }),
            "r-only" => Ok(Strategy::ROnly { row: num(0)?, position: num(1)? }),
            "feedback-tamper" => Ok(Strategy::FeedbackTamper {
                upstream: arg(0).filter(|a| *a != "force").map(parse_links).transpose()?.unwrap_or_default(),
                force_claim: args.contains(&"force"),
            }),
            "random" => Ok(Strategy::Random { seed: num(0)?.unwrap_or(0) as u64 }),
            other => Err(Error::Config(format!(
                "unknown strategy {other:?} (none, single-first, hide, r-only, feedback-tamper, random)"
            ))),
        }
    }
}

/// The public state the adversary may consult before choosing errors.
#[derive(Debug, Clone, Copy)]
pub struct AdversaryView<'a> {
    pub round: usize,
    pub keys: &'a CodecKeys,
    pub relay_a: &'a NodeAState,
}

/// A strategy bound to its owned link set.
#[derive(Debug, Clone)]
pub struct Adversary {
    strategy: Strategy,
    owned: BTreeSet<LinkId>,
    rng: ChaCha8Rng,
}

fn random_vec<R: Rng>(f: Field, len: usize, rng: &mut R) -> Vec<u32> {
    (0..len).map(|_| f.random(rng)).collect()
}

fn random_nonzero_vec<R: Rng>(f: Field, len: usize, rng: &mut R) -> Vec<u32> {
    loop {
        let v = random_vec(f, len, rng);
        if v.iter().any(|&x| x != 0) || len == 0 {
            return v;
        }
    }
}

impl Adversary {
    /// Resolves unspecified strategy fields from `seed` and fixes the owned set.
    pub fn new(strategy: Strategy, keys: &CodecKeys, seed: u64) -> Result<Self> {
        let p = *keys.params();
        let f = keys.field();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_adda);
        let forward: Vec<LinkId> = p.links().into_iter().filter(|l| *l != LinkId::Feedback).collect();
        let upstream: Vec<LinkId> = (0..p.n).map(LinkId::Upstream).collect();
        let (strategy, owned): (Strategy, BTreeSet<LinkId>) = match strategy {
            Strategy::None => (Strategy::None, BTreeSet::new()),
            Strategy::SingleFirst { link, base, schedule, claim } => {
                let links = p.links();
                let link = link.unwrap_or_else(|| *links.choose(&mut rng).expect("links"));
                let base = if base.is_empty() { random_nonzero_vec(f, p.capacity(link), &mut rng) } else { base };
                let schedule = if schedule.is_empty() { vec![1, 0, 0] } else { schedule };
                (Strategy::SingleFirst { link: Some(link), base, schedule, claim }, [link].into())
            }
            Strategy::Hide { first, then } => {
                let first = first.unwrap_or_else(|| *upstream.choose(&mut rng).expect("n ≥ 1"));
                let then = if then.is_empty() {
                    let rest: Vec<LinkId> = forward.iter().copied().filter(|l| *l != first).collect();
                    rest.choose_multiple(&mut rng, p.z - 1).copied().collect()
                } else {
                    then
                };
                let owned: BTreeSet<LinkId> = std::iter::once(first).chain(then.iter().copied()).collect();
                (Strategy::Hide { first: Some(first), then }, owned)
            }
            Strategy::ROnly { row, position } => {
                let rows_with_parity: Vec<usize> =
                    (0..keys.layout().len()).filter(|&r| keys.layout()[r].parity > 0).collect();
                let row = match row {
                    Some(r) => r,
                    None => *rows_with_parity
                        .choose(&mut rng)
                        .ok_or_else(|| Error::Config("no row carries parity symbols".into()))?,
                };
                let plan = keys.layout().get(row).ok_or_else(|| Error::Config(format!("no row {row}")))?;
                let position = position.unwrap_or_else(|| rng.gen_range(plan.dim()..p.n));
                if position >= p.n {
                    return Err(Error::Config(format!("position {position} out of range")));
                }
                (Strategy::ROnly { row: Some(row), position: Some(position) }, [LinkId::Upstream(position)].into())
            }
            Strategy::FeedbackTamper { upstream: ups, force_claim } => {
                let ups = if ups.is_empty() {
                    upstream.choose_multiple(&mut rng, p.z - 1).copied().collect()
                } else {
                    ups
                };
                let mut owned: BTreeSet<LinkId> = ups.iter().copied().collect();
                owned.insert(LinkId::Feedback);
                let ups = owned.iter().copied().filter(|l| l.is_upstream()).collect();
                (Strategy::FeedbackTamper { upstream: ups, force_claim }, owned)
            }
            Strategy::Random { seed: s } => {
                let mut r = ChaCha8Rng::seed_from_u64(s);
                let owned = p.links().choose_multiple(&mut r, p.z).copied().collect();
                rng = r;
                (Strategy::Random { seed: s }, owned)
            }
            Strategy::Scripted { owned, actions } => (Strategy::Scripted { owned: owned.clone(), actions }, owned),
        };
        if owned.len() > p.z {
            return Err(Error::Config(format!("strategy owns {} links, budget is z = {}", owned.len(), p.z)));
        }
        if let Some(l) = owned.iter().find(|l| !p.links().contains(l)) {
            return Err(Error::Config(format!("link {l} does not exist")));
        }
        Ok(Self { strategy, owned, rng })
    }

    pub fn owned(&self) -> &BTreeSet<LinkId> {
        &self.owned
    }

    pub fn strategy(&self) -> &Strategy {
        &self.strategy
    }

    pub fn next_action(&mut self, view: &AdversaryView<'_>) -> AdversaryAction {
        let keys = view.keys;
        let p = *keys.params();
        let f = keys.field();
        let round = view.round;
        let mut action = AdversaryAction { round, ..Default::default() };
        match &self.strategy {
            Strategy::None => {}
            Strategy::SingleFirst { link, base, schedule, claim } => {
                let link = link.expect("resolved");
                let s = schedule[round % schedule.len()];
                action.errors.insert(link, base.iter().map(|&v| f.mul(v, s)).collect());
                if let LinkId::Downstream(j) = link {
                    if !claim.is_empty() {
                        action.claim_errors.insert(j, claim.iter().map(|&v| f.mul(v, s)).collect());
                    }
                }
            }
            Strategy::ROnly { row, position } => {
                let mut e = vec![0; p.a];
                e[row.expect("resolved")] = f.random_nonzero(&mut self.rng);
                action.errors.insert(LinkId::Upstream(position.expect("resolved")), e);
            }
            Strategy::Hide { first, .. } => {
                let first = first.expect("resolved");
                if round == 0 {
                    action.errors.insert(first, random_nonzero_vec(f, p.capacity(first), &mut self.rng));
                } else {
                    let ups: Vec<usize> = self
                        .owned
                        .iter()
                        .filter_map(|l| if let LinkId::Upstream(i) = l { Some(*i) } else { None })
                        .collect();
                    let top = silent_upstream_errors(view, &ups, true, &mut self.rng);
                    for (k, &i) in ups.iter().enumerate() {
                        let mut e = top[k].clone();
                        e.extend(random_vec(f, p.c, &mut self.rng));
                        action.errors.insert(LinkId::Upstream(i), e);
                    }
                }
                for &l in self.owned.iter().filter(|l| !l.is_upstream()) {
                    action.errors.insert(l, random_vec(f, p.capacity(l), &mut self.rng));
                    if let LinkId::Downstream(j) = l {
                        action.claim_errors.insert(j, random_vec(f, p.a - p.c, &mut self.rng));
                    }
                }
            }
            Strategy::FeedbackTamper { upstream, force_claim } => {
                let ups: Vec<usize> =
                    upstream.iter().filter_map(|l| if let LinkId::Upstream(i) = l { Some(*i) } else { None }).collect();
                let top = silent_upstream_errors(view, &ups, false, &mut self.rng);
                // error of each row as an n-vector, to cancel what B would see
                let mut fb = Vec::new();
                for r in 0..keys.layout().len() {
                    let mut row_err = vec![0; p.n];
                    for (k, &i) in ups.iter().enumerate() {
                        row_err[i] = top[k][r];
                    }
                    let phi = keys.feedback_functional(r, view.relay_a.quiet_kind(r), &view.relay_a.rows[r].identified);
                    let seen = phi.mul_vec(&row_err).expect("length n");
                    fb.extend(seen.into_iter().map(|v| f.neg(v)));
                }
                fb.resize(p.b, 0);
                if *force_claim {
                    for v in &mut fb {
                        *v = f.add(*v, f.random_nonzero(&mut self.rng));
                    }
                }
                for (k, &i) in ups.iter().enumerate() {
                    let mut e = top[k].clone();
                    e.extend(random_vec(f, p.c, &mut self.rng));
                    action.errors.insert(LinkId::Upstream(i), e);
                }
                action.errors.insert(LinkId::Feedback, fb);
            }
            Strategy::Random { .. } => {
                for &l in &self.owned {
                    if self.rng.gen_bool(0.5) {
                        action.errors.insert(l, random_vec(f, p.capacity(l), &mut self.rng));
                    }
                    if let LinkId::Downstream(j) = l {
                        if self.rng.gen_bool(0.5) {
                            action.claim_errors.insert(j, random_vec(f, p.a - p.c, &mut self.rng));
                        }
                    }
                }
            }
            Strategy::Scripted { actions, .. } => {
                if let Some(a) = actions.get(round) {
                    action = a.clone();
                    action.round = round;
                }
            }
        }
        action
    }
}

/// Per owned upstream link (in `ups` order), `a − c` top-row errors chosen
/// in the null space of node A's checks on those positions (and of node B's,
/// when `hide_from_b`). Falls back to random errors when no such space exists.
fn silent_upstream_errors<R: Rng>(view: &AdversaryView<'_>, ups: &[usize], hide_from_b: bool, rng: &mut R) -> Vec<Vec<u32>> {
    let keys = view.keys;
    let f = keys.field();
    let rows = keys.layout().len();
    let mut out = vec![vec![0; rows]; ups.len()];
    for r in 0..rows {
        let mut checks = view.relay_a.check_operator(keys, r);
        if hide_from_b {
            let phi =
                keys.feedback_functional(r, view.relay_a.quiet_kind(r), &view.relay_a.rows[r].identified);
            let mut data = checks.data().to_vec();
            data.extend_from_slice(phi.data());
            checks = SymbolMatrix::from_vec(f, checks.rows() + phi.rows(), checks.cols(), data).expect("shape");
        }
        let basis = checks.select_columns(ups).null_space();
        let e: Vec<u32> = if basis.rows() == 0 {
            if hide_from_b {
                random_vec(f, ups.len(), rng)
            } else {
                vec![0; ups.len()]
            }
        } else {
            let coeffs = random_vec(f, basis.rows(), rng);
            basis.left_mul_vec(&coeffs).expect("length")
        };
        for (k, v) in e.into_iter().enumerate() {
            out[k][r] = v;
        }
    }
    out
}

/// Value schedules (per-round multipliers) for the exhaustive single-link suite.
pub const SCHEDULES: [[u32; 3]; 10] = [
    [1, 0, 0],
    [1, 1, 1],
    [0, 1, 0],
    [1, 2, 3],
    [0, 0, 1],
    [2, 0, 4],
    [1, 1, 0],
    [0, 1, 1],
    [3, 3, 3],
    [1, 4, 1],
];

/// Enumerates every (owned link × error vector × schedule) single-link strategy.
#[derive(Debug, Clone)]
pub struct ExhaustiveCursor {
    params: NetworkParams,
    links: Vec<LinkId>,
    schedules: Vec<Vec<u32>>,
    link: usize,
    vector: u64,
    schedule: usize,
    claim_errors: bool,
}

impl ExhaustiveCursor {
    /// With `claim_errors`, downstream links also corrupt their claim column by the same first symbol.
    pub fn new(params: NetworkParams, schedules: &[Vec<u32>], claim_errors: bool) -> Self {
        Self { params, links: params.links(), schedules: schedules.to_vec(), link: 0, vector: 0, schedule: 0, claim_errors }
    }

    fn vectors(&self, link: LinkId) -> u64 {
        (self.params.q as u64).pow(self.params.capacity(link) as u32)
    }

    /// Total number of strategies the cursor yields.
    pub fn total(&self) -> u64 {
        self.links.iter().map(|&l| self.vectors(l)).sum::<u64>() * self.schedules.len() as u64
    }
}

impl Iterator for ExhaustiveCursor {
    type Item = (LinkId, Strategy);

    fn next(&mut self) -> Option<Self::Item> {
        if self.schedules.is_empty() {
            return None;
        }
        let link = *self.links.get(self.link)?;
        let q = self.params.q as u64;
        let mut k = self.vector;
        let base: Vec<u32> = (0..self.params.capacity(link))
            .map(|_| {
                let d = (k % q) as u32;
                k /= q;
                d
            })
            .collect();
        let claim = if self.claim_errors && matches!(link, LinkId::Downstream(_)) {
            vec![base[0]; self.params.a - self.params.c]
        } else {
            vec![]
        };
        let strategy = Strategy::SingleFirst {
            link: Some(link),
            base,
            schedule: self.schedules[self.schedule].clone(),
            claim,
        };
        self.schedule += 1;
        if self.schedule == self.schedules.len() {
            self.schedule = 0;
            self.vector += 1;
            if self.vector == self.vectors(link) {
                self.vector = 0;
                self.link += 1;
            }
        }
        Some((link, strategy))
    }
}

/// Runs both branches of a confusion pair through the link model and
/// checks that the sink side sees the same values.
pub fn confusion_replay<L: FourNodeLinks + ?Sized>(
    model: &L,
    codebook: &[Vec<u32>],
    pair: &ConfusionPair,
) -> Result<(CutObservation, CutObservation)> {
    let first = evaluate_links(model, &codebook[pair.x], &pair.errors_z1).observation;
    let second = evaluate_links(model, &codebook[pair.x_prime], &pair.errors_z2).observation;
    if first != second {
        return Err(Error::InternalConsistency("replayed branches differ at the sink".into()));
    }
    Ok((first, second))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{confusion_attack, tiny_preset};

    fn keys() -> CodecKeys {
        CodecKeys::generate(&NetworkParams::p0(), 1).unwrap()
    }

    #[test]
    fn none_is_empty() {
        let keys = keys();
        let a = NodeAState::new(&keys);
        let mut adv = Adversary::new(Strategy::None, &keys, 0).unwrap();
        for round in 0..3 {
            assert!(adv.next_action(&AdversaryView { round, keys: &keys, relay_a: &a }).is_empty());
        }
    }

    #[test]
    fn single_first_touches_one_link() {
        let keys = keys();
        let a = NodeAState::new(&keys);
        let s = Strategy::SingleFirst { link: Some(LinkId::Upstream(0)), base: vec![3, 0, 0, 1], schedule: vec![1, 0], claim: vec![] };
        let mut adv = Adversary::new(s, &keys, 0).unwrap();
        let act = adv.next_action(&AdversaryView { round: 0, keys: &keys, relay_a: &a });
        assert_eq!(act.errors.len(), 1);
        assert_eq!(act.errors[&LinkId::Upstream(0)], vec![3, 0, 0, 1]);
        act.validate(keys.params(), adv.owned()).unwrap();
        assert!(adv.next_action(&AdversaryView { round: 1, keys: &keys, relay_a: &a }).is_empty());
    }

    #[test]
    fn exhaustive_cardinality() {
        let p = NetworkParams { n: 2, m: 2, a: 3, b: 1, c: 1, z: 1, q: 3 };
        let schedules = vec![vec![1, 0], vec![1, 1]];
        let cursor = ExhaustiveCursor::new(p, &schedules, false);
        let expected = (27 + 27 + 3 + 3 + 3) * 2;
        assert_eq!(cursor.total(), expected);
        assert_eq!(cursor.count() as u64, expected);
    }

    #[test]
    fn parse_strategies() {
        assert_eq!("none".parse::<Strategy>().unwrap(), Strategy::None);
        assert_eq!("random:9".parse::<Strategy>().unwrap(), Strategy::Random { seed: 9 });
        let s: Strategy = "feedback-tamper:u2:force".parse().unwrap();
        assert_eq!(s, Strategy::FeedbackTamper { upstream: vec![LinkId::Upstream(1)], force_claim: true });
        assert!("teleport".parse::<Strategy>().is_err());
    }

    #[test]
    fn random_is_reproducible_and_within_budget() {
        let keys = keys();
        let a = NodeAState::new(&keys);
        let run = || {
            let mut adv = Adversary::new(Strategy::Random { seed: 4 }, &keys, 0).unwrap();
            (0..5).map(|round| adv.next_action(&AdversaryView { round, keys: &keys, relay_a: &a })).collect::<Vec<_>>()
        };
        let first = run();
        assert_eq!(first, run());
        let adv = Adversary::new(Strategy::Random { seed: 4 }, &keys, 0).unwrap();
        for act in &first {
            act.validate(keys.params(), adv.owned()).unwrap();
        }
    }

    #[test]
    fn replay_of_tiny_confusion() {
        let (model, z1, z2) = tiny_preset("tiny").unwrap();
        let book = model.codebook(17);
        let pair = confusion_attack(&model, &book, &z1, &z2).unwrap();
        let (a, b) = confusion_replay(&model, &book, &pair).unwrap();
        assert_eq!(a, b);
    }
}
