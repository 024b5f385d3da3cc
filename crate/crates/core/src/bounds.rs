//! Capacity bounds for the four-node zig-zag family and the two-codeword
//! confusion argument on an explicit cut.
//!
//! The family: source `s`, relays `A` and `B`, sink `u`; `n` links `s→A` of
//! capacity `a`, `m` links `B→u` of capacity `c`, one feedback link `A→B`
//! of capacity `b`, and unbounded reliable links `s→B` and `A→u`. The
//! adversary controls at most `z` links.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::galois::Field;
use crate::mds::combinations;

/// The parameters of one zig-zag instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct NetworkParams {
    /// Upstream links `s→A`.
    pub n: usize,
    /// Downstream links `B→u`.
    pub m: usize,
    /// Capacity of each upstream link.
    pub a: usize,
    /// Capacity of the feedback link `A→B`.
    pub b: usize,
    /// Capacity of each downstream link.
    pub c: usize,
    /// Adversarial link budget.
    pub z: usize,
    /// Field order.
    pub q: u32,
}

impl NetworkParams {
    pub fn new(n: usize, m: usize, a: usize, b: usize, c: usize, z: usize, q: u32) -> Result<Self> {
        let p = Self { n, m, a, b, c, z, q };
        p.validate()?;
        Ok(p)
    }

    /// `(n=3, m=4, a=4, c=2, b=2, z=2)` over GF(257).
    pub fn p0() -> Self {
        Self { n: 3, m: 4, a: 4, b: 2, c: 2, z: 2, q: 257 }
    }

    /// `(n=4, m=6, a=3, c=2, b=1, z=3)` over GF(257).
    pub fn p1() -> Self {
        Self { n: 4, m: 6, a: 3, b: 1, c: 2, z: 3, q: 257 }
    }

    /// Smallest single-adversary instance used by the exhaustive suite.
    pub fn z1_micro() -> Self {
        Self { n: 2, m: 2, a: 3, b: 1, c: 1, z: 1, q: 5 }
    }

    pub fn with_q(mut self, q: u32) -> Self {
        self.q = q;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if self.z == 0 || self.c == 0 || self.b == 0 {
            return bad(format!("z, c, b must be positive (z={}, c={}, b={})", self.z, self.c, self.b));
        }
        if self.a <= self.c || self.a <= self.b {
            return bad(format!("need a > c and a > b (a={}, b={}, c={})", self.a, self.b, self.c));
        }
        if self.n < self.z || self.m < self.z {
            return bad(format!("need n >= z and m >= z (n={}, m={}, z={})", self.n, self.m, self.z));
        }
        Field::new(self.q)?;
        Ok(())
    }

    pub fn field(&self) -> Field {
        Field::new(self.q).expect("validated field order")
    }

    pub fn links(&self) -> Vec<LinkId> {
        let mut v: Vec<LinkId> = (0..self.n).map(LinkId::Upstream).collect();
        v.extend((0..self.m).map(LinkId::Downstream));
        v.push(LinkId::Feedback);
        v
    }

    pub fn capacity(&self, link: LinkId) -> usize {
        match link {
            LinkId::Upstream(_) => self.a,
            LinkId::Downstream(_) => self.c,
            LinkId::Feedback => self.b,
        }
    }
}

impl fmt::Display for NetworkParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n={} m={} a={} b={} c={} z={} q={}",
            self.n, self.m, self.a, self.b, self.c, self.z, self.q
        )
    }
}

/// A link of the four-node network. Orders upstream before downstream
/// before feedback, by index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LinkId {
    Upstream(usize),
    Downstream(usize),
    Feedback,
}

impl LinkId {
    pub fn is_upstream(self) -> bool {
        matches!(self, LinkId::Upstream(_))
    }
}

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinkId::Upstream(i) => write!(f, "u{}", i + 1),
            LinkId::Downstream(j) => write!(f, "d{}", j + 1),
            LinkId::Feedback => write!(f, "fb"),
        }
    }
}

impl std::str::FromStr for LinkId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad link id {s:?}; expected u<i>, d<j> or fb"));
        if s == "fb" {
            return Ok(LinkId::Feedback);
        }
        let (kind, idx) = s.split_at(1);
        let idx: usize = idx.parse().map_err(|_| bad())?;
        if idx == 0 {
            return Err(bad());
        }
        match kind {
            "u" => Ok(LinkId::Upstream(idx - 1)),
            "d" => Ok(LinkId::Downstream(idx - 1)),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Category {
    One,
    Two,
    Three,
    Four,
}

impl Category {
    pub fn number(self) -> u8 {
        match self {
            Category::One => 1,
            Category::Two => 2,
            Category::Three => 3,
            Category::Four => 4,
        }
    }
}

fn i(v: usize) -> i64 {
    v as i64
}

/// `(n − z)a + (m − z)c + b`.
pub fn upper_bound(p: &NetworkParams) -> i64 {
    (i(p.n) - i(p.z)) * i(p.a) + (i(p.m) - i(p.z)) * i(p.c) + i(p.b)
}

pub fn classify(p: &NetworkParams) -> Category {
    let wide_up = i(p.n) >= 2 * (i(p.z) - 1);
    let wide_down = p.m >= 2 * p.z;
    match (wide_up, wide_down) {
        (true, true) => Category::One,
        (false, true) => Category::Two,
        (true, false) => Category::Three,
        (false, false) => Category::Four,
    }
}

/// The cut-set style bounds for the instance's category; `sb4` equals the upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SingletonBounds {
    pub sb1: i64,
    pub sb2: i64,
    pub sb3: i64,
    pub sb4: i64,
}

impl SingletonBounds {
    pub fn min_sb123(&self) -> i64 {
        self.sb1.min(self.sb2).min(self.sb3)
    }

    pub fn as_pairs(&self) -> [(&'static str, i64); 4] {
        [("SB1", self.sb1), ("SB2", self.sb2), ("SB3", self.sb3), ("SB4", self.sb4)]
    }
}

pub fn singleton_bounds(p: &NetworkParams) -> SingletonBounds {
    let (n, m, a, c, z) = (i(p.n), i(p.m), i(p.a), i(p.c), i(p.z));
    let cat = classify(p);
    let sb1 = match cat {
        Category::One | Category::Two => n * a + (m - 2 * z) * c,
        Category::Three | Category::Four => (n - (2 * z - m)) * a,
    };
    let sb2 = match cat {
        Category::One | Category::Three => (n - 2 * (z - 1)) * a + m * c,
        Category::Two | Category::Four => (m - (2 * (z - 1) - n)) * c,
    };
    let sb3 = (n - z + 1) * a + (m - z) * c;
    SingletonBounds { sb1, sb2, sb3, sb4: upper_bound(p) }
}

/// The category's inequality for the upper bound to be the strict minimum.
pub fn tight_condition(p: &NetworkParams) -> bool {
    let (n, m, a, b, c, z) = (i(p.n), i(p.m), i(p.a), i(p.b), i(p.c), i(p.z));
    let limit = match classify(p) {
        Category::One => (z * (a - c)).min(z * c - (z - 2) * a),
        Category::Two => (z * (a - c)).min((n - z + 2) * c - (n - z) * a),
        Category::Three => (z * c - (z - 2) * a).min((m - z) * (a - c)),
        Category::Four => ((n - z + 2) * c - (n - z) * a).min((m - z) * (a - c)),
    };
    b < limit
}

/// Remaining-network Singleton bound minus the upper bound after `x`
/// upstream links have been identified.
///
/// Uses the split `n > 2(z−1)` vs `n ≤ 2(z−1)`; for the narrow side the
/// remaining network is limited by the downstream links while `x ≤ 2z − n`.
pub fn identification_margin(p: &NetworkParams, x: usize) -> i64 {
    let (n, a, b, c, z, x) = (i(p.n), i(p.a), i(p.b), i(p.c), i(p.z), i(x));
    let wide = a * x - z * (a - c) - b;
    if n > 2 * (z - 1) || x > 2 * z - n {
        wide
    } else {
        x * c - (n - z) * (a - c) - b
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BoundReport {
    pub params: NetworkParams,
    pub ub: i64,
    pub sb: SingletonBounds,
    pub category: Category,
    pub tight: bool,
    pub margin_after_two: i64,
}

impl BoundReport {
    pub fn compute(p: &NetworkParams) -> Self {
        Self {
            params: *p,
            ub: upper_bound(p),
            sb: singleton_bounds(p),
            category: classify(p),
            tight: tight_condition(p),
            margin_after_two: identification_margin(p, 2),
        }
    }
}

/// Ranges for a bound sweep; every dimension starts at its smallest valid value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub a_max: usize,
    pub c_max: usize,
    pub b_max: usize,
    pub n_max: usize,
    pub m_max: usize,
    pub z_max: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { a_max: 8, c_max: 7, b_max: 7, n_max: 6, m_max: 8, z_max: 3 }
    }
}

impl GridSpec {
    /// All valid tuples `c < a`, `1 ≤ b < a`, `z ≤ n`, `z ≤ m` in the ranges.
    pub fn tuples(&self, q: u32) -> Vec<NetworkParams> {
        let mut out = Vec::new();
        for a in 2..=self.a_max {
            for c in 1..a.min(self.c_max + 1) {
                for b in 1..a.min(self.b_max + 1) {
                    for z in 1..=self.z_max {
                        for n in z..=self.n_max {
                            for m in z..=self.m_max {
                                out.push(NetworkParams { n, m, a, b, c, z, q });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// An explicit cut `Q` with its feedback links `Qᴿ`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CutSpec {
    pub forward_links: Vec<(String, usize)>,
    pub feedback_links: Vec<(String, usize)>,
    /// `(forward, feedback)`: the feedback link is directly downstream of the forward link.
    pub downstream_of: Vec<(String, String)>,
    /// `(feedback, forward)`: the feedback link is directly upstream of the forward link.
    pub upstream_of: Vec<(String, String)>,
}

/// Cut bound for one choice of `Z1`, `Z2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CutBound {
    /// Capacity of the surviving forward links plus `w1` and `w2`.
    pub m: usize,
    pub w1: BTreeSet<String>,
    pub w2: BTreeSet<String>,
    /// The tighter variant: when one side has no bridging feedback, the other
    /// side only counts feedback reaching forward links outside both sets.
    pub refined_m: usize,
}

impl CutSpec {
    pub fn validate(&self) -> Result<()> {
        let fwd: BTreeSet<&str> = self.forward_links.iter().map(|(l, _)| l.as_str()).collect();
        let fb: BTreeSet<&str> = self.feedback_links.iter().map(|(l, _)| l.as_str()).collect();
        if fwd.len() != self.forward_links.len() || fb.len() != self.feedback_links.len() {
            return Err(Error::InvalidParams("duplicate link id in cut".into()));
        }
        if fwd.intersection(&fb).next().is_some() {
            return Err(Error::InvalidParams("link both forward and feedback".into()));
        }
        for (l, f) in &self.downstream_of {
            if !fwd.contains(l.as_str()) || !fb.contains(f.as_str()) {
                return Err(Error::InvalidParams(format!("unknown link in relation ({l}, {f})")));
            }
        }
        for (f, l) in &self.upstream_of {
            if !fwd.contains(l.as_str()) || !fb.contains(f.as_str()) {
                return Err(Error::InvalidParams(format!("unknown link in relation ({f}, {l})")));
            }
        }
        Ok(())
    }

    fn capacity(&self, id: &str) -> usize {
        self.forward_links
            .iter()
            .chain(&self.feedback_links)
            .find(|(l, _)| l == id)
            .map_or(0, |(_, c)| *c)
    }

    fn is_downstream_of(&self, fwd: &str, fb: &str) -> bool {
        self.downstream_of.iter().any(|(l, f)| l == fwd && f == fb)
    }

    fn is_upstream_of(&self, fb: &str, fwd: &str) -> bool {
        self.upstream_of.iter().any(|(f, l)| f == fb && l == fwd)
    }

    /// Feedback links directly downstream of a link in `from` and upstream of a link in `to`.
    fn bridging(&self, from: &BTreeSet<String>, to: &BTreeSet<String>) -> BTreeSet<String> {
        self.feedback_links
            .iter()
            .map(|(f, _)| f)
            .filter(|f| from.iter().any(|l| self.is_downstream_of(l, f)))
            .filter(|f| to.iter().any(|l| self.is_upstream_of(f, l)))
            .cloned()
            .collect()
    }
}

/// The four-node cut `Q = cut({s, B}, {A, u})` for an instance.
pub fn four_node_cut(p: &NetworkParams) -> CutSpec {
    let ups: Vec<String> = (0..p.n).map(|i| LinkId::Upstream(i).to_string()).collect();
    let downs: Vec<String> = (0..p.m).map(|j| LinkId::Downstream(j).to_string()).collect();
    let fb = LinkId::Feedback.to_string();
    CutSpec {
        forward_links: ups
            .iter()
            .map(|l| (l.clone(), p.a))
            .chain(downs.iter().map(|l| (l.clone(), p.c)))
            .collect(),
        feedback_links: vec![(fb.clone(), p.b)],
        downstream_of: ups.iter().map(|l| (l.clone(), fb.clone())).collect(),
        upstream_of: downs.iter().map(|l| (fb.clone(), l.clone())).collect(),
    }
}

/// Bound `M` for an explicit cut and disjoint forward sets `Z1`, `Z2`.
pub fn cut_bound(cut: &CutSpec, z1: &[&str], z2: &[&str], z: usize) -> Result<CutBound> {
    cut.validate()?;
    let bad = |msg: String| Err(Error::InvalidCutSelection(msg));
    let forward: BTreeSet<String> = cut.forward_links.iter().map(|(l, _)| l.clone()).collect();
    let z1: BTreeSet<String> = z1.iter().map(|s| s.to_string()).collect();
    let z2: BTreeSet<String> = z2.iter().map(|s| s.to_string()).collect();
    if z1.len() > z || z2.len() > z {
        return bad(format!("|Z1| = {}, |Z2| = {} exceed z = {z}", z1.len(), z2.len()));
    }
    if let Some(l) = z1.iter().chain(&z2).find(|l| !forward.contains(*l)) {
        return bad(format!("{l} is not a forward link of the cut"));
    }
    if z1.intersection(&z2).next().is_some() {
        return bad("Z1 and Z2 intersect".into());
    }
    let rest: BTreeSet<String> = forward.difference(&z1).filter(|l| !z2.contains(*l)).cloned().collect();
    let not_z1: BTreeSet<String> = forward.difference(&z1).cloned().collect();
    let not_z2: BTreeSet<String> = forward.difference(&z2).cloned().collect();
    let w1 = cut.bridging(&z1, &not_z1);
    let w2 = cut.bridging(&z2, &not_z2);
    for f in &w1 {
        if let Some(l) = z2.iter().find(|l| cut.is_downstream_of(l, f)) {
            return bad(format!("{l} in Z2 is directly upstream of {f} in W1"));
        }
    }
    for f in &w2 {
        if let Some(l) = z1.iter().find(|l| cut.is_downstream_of(l, f)) {
            return bad(format!("{l} in Z1 is directly upstream of {f} in W2"));
        }
    }
    let total = |w1: &BTreeSet<String>, w2: &BTreeSet<String>| -> usize {
        rest.iter().chain(w1).chain(w2.difference(w1)).map(|l| cut.capacity(l)).sum()
    };
    let m = total(&w1, &w2);
    let refined_m = if w2.is_empty() {
        total(&cut.bridging(&z1, &rest), &w2)
    } else if w1.is_empty() {
        total(&w1, &cut.bridging(&z2, &rest))
    } else {
        m
    };
    Ok(CutBound { m, w1, w2, refined_m })
}

/// Minimum valid `M` over all disjoint `Z1`, `Z2` of size at most `z`.
pub fn min_cut_bound(cut: &CutSpec, z: usize) -> Result<(usize, Vec<String>, Vec<String>)> {
    let k = cut.forward_links.len();
    if k > 12 {
        return Err(Error::InvalidParams(format!("{k} forward links; exhaustive search limited to 12")));
    }
    let ids: Vec<&str> = cut.forward_links.iter().map(|(l, _)| l.as_str()).collect();
    let mut best: Option<(usize, Vec<String>, Vec<String>)> = None;
    for s1 in 0..=z.min(k) {
        for c1 in combinations(k, s1) {
            let left: Vec<usize> = (0..k).filter(|x| !c1.contains(x)).collect();
            for s2 in 0..=z.min(left.len()) {
                for c2 in combinations(left.len(), s2) {
                    let z1: Vec<&str> = c1.iter().map(|&x| ids[x]).collect();
                    let z2: Vec<&str> = c2.iter().map(|&x| ids[left[x]]).collect();
                    if let Ok(bound) = cut_bound(cut, &z1, &z2, z) {
                        if best.as_ref().map_or(true, |(m, _, _)| bound.m < *m) {
                            best = Some((
                                bound.m,
                                z1.iter().map(|s| s.to_string()).collect(),
                                z2.iter().map(|s| s.to_string()).collect(),
                            ));
                        }
                    }
                }
            }
        }
    }
    best.ok_or_else(|| Error::InvalidCutSelection("no valid Z1/Z2 pair".into()))
}

/// Deterministic link behaviour of a four-node network code.
///
/// Upstream link values depend on the message only; the feedback link
/// value is computed by `A` from what it received upstream; downstream
/// values are computed by `B` from the message and the feedback it received.
pub trait FourNodeLinks {
    fn params(&self) -> &NetworkParams;
    /// `n` vectors of `a` symbols.
    fn upstream(&self, message: &[u32]) -> Vec<Vec<u32>>;
    /// `b` symbols.
    fn feedback(&self, upstream_received: &[Vec<u32>]) -> Vec<u32>;
    /// `m` vectors of `c` symbols.
    fn downstream(&self, message: &[u32], feedback_received: &[u32]) -> Vec<Vec<u32>>;
}

/// Additive errors per link.
pub type LinkErrors = std::collections::BTreeMap<LinkId, Vec<u32>>;

/// Everything on the sink side of the four-node cut in one use of the network.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CutObservation {
    pub upstream: Vec<Vec<u32>>,
    pub downstream: Vec<Vec<u32>>,
}

/// Link values of one evaluation, including the feedback link.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkTrace {
    pub observation: CutObservation,
    pub feedback_sent: Vec<u32>,
    pub feedback_received: Vec<u32>,
}

fn add_errors(f: Field, values: &mut [u32], err: Option<&Vec<u32>>) {
    if let Some(e) = err {
        for (v, d) in values.iter_mut().zip(e) {
            *v = f.add(*v, *d);
        }
    }
}

/// Runs the links once with additive errors.
pub fn evaluate_links<L: FourNodeLinks + ?Sized>(model: &L, message: &[u32], errors: &LinkErrors) -> LinkTrace {
    let f = model.params().field();
    let mut upstream = model.upstream(message);
    for (i, vals) in upstream.iter_mut().enumerate() {
        add_errors(f, vals, errors.get(&LinkId::Upstream(i)));
    }
    let feedback_sent = model.feedback(&upstream);
    let mut feedback_received = feedback_sent.clone();
    add_errors(f, &mut feedback_received, errors.get(&LinkId::Feedback));
    let mut downstream = model.downstream(message, &feedback_received);
    for (j, vals) in downstream.iter_mut().enumerate() {
        add_errors(f, vals, errors.get(&LinkId::Downstream(j)));
    }
    LinkTrace { observation: CutObservation { upstream, downstream }, feedback_sent, feedback_received }
}

/// Output of the two-branch confusion construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionPair {
    pub x: usize,
    pub x_prime: usize,
    /// Applied while `x` is sent.
    pub errors_z1: LinkErrors,
    /// Applied while `x′` is sent.
    pub errors_z2: LinkErrors,
    pub observation: CutObservation,
    pub bound: usize,
}

fn link_name(l: LinkId) -> String {
    l.to_string()
}

/// Errors on `links` that make a run carrying `sent` output `target`'s error-free values there.
fn steer<L: FourNodeLinks + ?Sized>(model: &L, sent: &[u32], target: &LinkTrace, links: &[LinkId]) -> LinkErrors {
    let f = model.params().field();
    let mut errors = LinkErrors::new();
    // upstream first: downstream values depend on the feedback they induce
    for &l in links.iter().filter(|l| l.is_upstream()) {
        if let LinkId::Upstream(i) = l {
            let base = model.upstream(sent);
            let e = base[i].iter().zip(&target.observation.upstream[i]).map(|(s, t)| f.sub(*t, *s)).collect();
            errors.insert(l, e);
        }
    }
    let partial = evaluate_links(model, sent, &errors);
    for &l in links {
        if let LinkId::Downstream(j) = l {
            let e = partial.observation.downstream[j]
                .iter()
                .zip(&target.observation.downstream[j])
                .map(|(s, t)| f.sub(*t, *s))
                .collect();
            errors.insert(l, e);
        }
    }
    errors
}

/// Finds two codewords the sink cannot tell apart when the adversary
/// controls `Z1` under one and `Z2` under the other.
pub fn confusion_attack<L: FourNodeLinks + ?Sized>(
    model: &L,
    codebook: &[Vec<u32>],
    z1: &[LinkId],
    z2: &[LinkId],
) -> Result<ConfusionPair> {
    let p = *model.params();
    if z1.iter().chain(z2).any(|l| *l == LinkId::Feedback) {
        return Err(Error::InvalidCutSelection("Z1 and Z2 must be forward links".into()));
    }
    let cut = four_node_cut(&p);
    let n1: Vec<String> = z1.iter().map(|l| link_name(*l)).collect();
    let n2: Vec<String> = z2.iter().map(|l| link_name(*l)).collect();
    let r1: Vec<&str> = n1.iter().map(String::as_str).collect();
    let r2: Vec<&str> = n2.iter().map(String::as_str).collect();
    let bound = cut_bound(&cut, &r1, &r2, p.z)?;
    let threshold = (p.q as u128).checked_pow(bound.m as u32);
    if threshold.map_or(true, |t| codebook.len() as u128 <= t) {
        return Err(Error::AttackPrecondition(format!(
            "codebook of size {} does not exceed q^M = {}^{}",
            codebook.len(),
            p.q,
            bound.m
        )));
    }
    let traces: Vec<LinkTrace> = codebook.iter().map(|x| evaluate_links(model, x, &LinkErrors::new())).collect();
    let use_feedback = bound.w1.contains("fb") || bound.w2.contains("fb");
    let key = |t: &LinkTrace| -> Vec<u32> {
        let mut k = Vec::new();
        for i in 0..p.n {
            if !z1.contains(&LinkId::Upstream(i)) && !z2.contains(&LinkId::Upstream(i)) {
                k.extend(&t.observation.upstream[i]);
            }
        }
        for j in 0..p.m {
            if !z1.contains(&LinkId::Downstream(j)) && !z2.contains(&LinkId::Downstream(j)) {
                k.extend(&t.observation.downstream[j]);
            }
        }
        if use_feedback {
            k.extend(&t.feedback_sent);
        }
        k
    };
    let mut seen: HashMap<Vec<u32>, usize> = HashMap::new();
    let mut pair = None;
    for (idx, t) in traces.iter().enumerate() {
        if let Some(&first) = seen.get(&key(t)) {
            pair = Some((first, idx));
            break;
        }
        seen.insert(key(t), idx);
    }
    let (x, x_prime) = pair.ok_or_else(|| {
        Error::InternalConsistency("pigeonhole failed: no agreeing codeword pair".into())
    })?;

    // Branch 1: x sent, Z1 made to look like x′.
    let errors_z1 = steer(model, &codebook[x], &traces[x_prime], z1);
    // Branch 2: x′ sent, Z2 made to look like x.
    let errors_z2 = steer(model, &codebook[x_prime], &traces[x], z2);

    let seen1 = evaluate_links(model, &codebook[x], &errors_z1).observation;
    let seen2 = evaluate_links(model, &codebook[x_prime], &errors_z2).observation;
    if seen1 != seen2 {
        return Err(Error::InternalConsistency("confusion branches produce different observations".into()));
    }
    Ok(ConfusionPair { x, x_prime, errors_z1, errors_z2, observation: seen1, bound: bound.m })
}

/// A random linear four-node code: each link carries fixed linear
/// combinations of the message (and, downstream, of the received feedback).
#[derive(Debug, Clone)]
pub struct LinearFourNode {
    params: NetworkParams,
    message_len: usize,
    up: Vec<Vec<u32>>,
    fb: Vec<Vec<u32>>,
    down_msg: Vec<Vec<u32>>,
    down_fb: Vec<Vec<u32>>,
}

impl LinearFourNode {
    pub fn random(params: NetworkParams, message_len: usize, seed: u64) -> Self {
        use rand::SeedableRng;
        let f = params.field();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut mat = |rows: usize, cols: usize| -> Vec<Vec<u32>> {
            (0..rows).map(|_| (0..cols).map(|_| f.random(&mut rng)).collect()).collect()
        };
        let up = mat(params.n * params.a, message_len);
        let fb = mat(params.b, params.n * params.a);
        let down_msg = mat(params.m * params.c, message_len);
        let down_fb = mat(params.m * params.c, params.b);
        Self { params, message_len, up, fb, down_msg, down_fb }
    }

    pub fn message_len(&self) -> usize {
        self.message_len
    }

    /// The first `count` messages in counting order over GF(q).
    pub fn codebook(&self, count: usize) -> Vec<Vec<u32>> {
        let q = self.params.q;
        (0..count)
            .map(|mut k| {
                (0..self.message_len)
                    .map(|_| {
                        let d = (k % q as usize) as u32;
                        k /= q as usize;
                        d
                    })
                    .collect()
            })
            .collect()
    }
}

impl FourNodeLinks for LinearFourNode {
    fn params(&self) -> &NetworkParams {
        &self.params
    }

    fn upstream(&self, message: &[u32]) -> Vec<Vec<u32>> {
        let f = self.params.field();
        let flat: Vec<u32> = self.up.iter().map(|r| f.dot(r, message)).collect();
        flat.chunks(self.params.a).map(<[u32]>::to_vec).collect()
    }

    fn feedback(&self, upstream_received: &[Vec<u32>]) -> Vec<u32> {
        let f = self.params.field();
        let flat: Vec<u32> = upstream_received.concat();
        self.fb.iter().map(|r| f.dot(r, &flat)).collect()
    }

    fn downstream(&self, message: &[u32], feedback_received: &[u32]) -> Vec<Vec<u32>> {
        let f = self.params.field();
        let flat: Vec<u32> = self
            .down_msg
            .iter()
            .zip(&self.down_fb)
            .map(|(rm, rf)| f.add(f.dot(rm, message), f.dot(rf, feedback_received)))
            .collect();
        flat.chunks(self.params.c).map(<[u32]>::to_vec).collect()
    }
}

/// Named tiny instances for the confusion demo.
pub fn tiny_preset(name: &str) -> Result<(LinearFourNode, Vec<LinkId>, Vec<LinkId>)> {
    match name {
        "tiny" => {
            let p = NetworkParams { n: 2, m: 2, a: 2, b: 1, c: 1, z: 1, q: 2 };
            Ok((LinearFourNode::random(p, 5, 7), vec![LinkId::Upstream(0)], vec![LinkId::Downstream(0)]))
        }
        "tiny-q3" => {
            let p = NetworkParams { n: 2, m: 2, a: 2, b: 1, c: 1, z: 1, q: 3 };
            Ok((LinearFourNode::random(p, 4, 11), vec![LinkId::Upstream(1)], vec![LinkId::Downstream(1)]))
        }
        other => Err(Error::Config(format!("unknown tiny preset {other:?} (known: tiny, tiny-q3)"))),
    }
}
