//! Row layout, codeword assembly and the per-row checks computed by the relays.
//!
//! A codeword is an `a × (n+m)` matrix. Its top `a−c` rows each carry one
//! systematic row code over the `n` upstream columns and zeros downstream;
//! its bottom `c` rows carry the systematic block `Y` followed by `2z`
//! columns of generic combinations of every message symbol.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bounds::{tight_condition, upper_bound, LinkId, NetworkParams};
use crate::error::{Error, Result};
use crate::galois::{Echelon, Field, SymbolMatrix};
use crate::mds::{combinations, make_mds, MdsCode};

/// How a row is protected, fixed by its redundancy count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowCase {
    /// `z` parity symbols, nothing fed back.
    FullParity,
    /// Between two and `z − 1` parity symbols plus fed-back combinations.
    SplitParity,
    /// No parity symbols; node A forwards check symbols of a wider code.
    FeedbackOnly,
    /// A single parity symbol.
    SingleParity,
}

impl RowCase {
    pub fn number(self) -> u8 {
        match self {
            RowCase::FullParity => 1,
            RowCase::SplitParity => 2,
            RowCase::FeedbackOnly => 3,
            RowCase::SingleParity => 4,
        }
    }
}

impl fmt::Display for RowCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "case{}", self.number())
    }
}

/// Symbol counts of one top row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowPlan {
    /// Messages checked only through parity.
    pub plain: usize,
    /// Messages also checked through the feedback link.
    pub feedback: usize,
    /// Parity symbols on the upstream links.
    pub parity: usize,
}

impl RowPlan {
    pub fn dim(&self) -> usize {
        self.plain + self.feedback
    }

    pub fn case(&self, z: usize) -> RowCase {
        match self.parity {
            p if p == z => RowCase::FullParity,
            0 => RowCase::FeedbackOnly,
            1 => RowCase::SingleParity,
            _ => RowCase::SplitParity,
        }
    }
}

fn rows_from(p: &NetworkParams, feedback: &[usize]) -> Vec<RowPlan> {
    let plain = p.n - p.z;
    feedback
        .iter()
        .map(|&f| RowPlan { plain, feedback: f, parity: p.z - f })
        .collect()
}

/// Splits the `b` feedback symbols over the `a − c` top rows.
///
/// The default spreads them evenly. When that leaves a row with exactly
/// one parity symbol and `z ≥ 2`, the rows are rearranged so that at most
/// one such row remains, and only where its decoding is covered.
pub fn plan_layout(p: &NetworkParams) -> Result<Vec<RowPlan>> {
    p.validate()?;
    if !tight_condition(p) {
        return Err(Error::UnsupportedParams(format!("{p}: rate condition for this category fails")));
    }
    let rows = p.a - p.c;
    let (z, b) = (p.z, p.b);
    let base = b / rows;
    let mut fb: Vec<usize> = (0..rows).map(|r| base + usize::from(r < b % rows)).collect();
    if z >= 2 && fb.iter().any(|&k| k == z - 1) {
        fb = vec![0; rows];
        let slack = z * rows - b;
        if z == 2 {
            if b % 2 == 0 {
                fb[..b / 2].fill(2);
            } else if b + 1 < 2 * rows {
                fb[..(b - 1) / 2].fill(2);
                fb[(b - 1) / 2] = 1;
            } else {
                return Err(Error::UnsupportedParams(format!(
                    "{p}: z = 2 with b = 2(a−c) − 1 has no covered feedback arrangement"
                )));
            }
        } else if slack % z == 0 {
            fb[..b / z].fill(z);
        } else {
            let (t, phi) = (slack / z, slack % z);
            if t == 0 {
                fb[..rows - 1].fill(z);
                fb[rows - 1] = z - phi;
            } else {
                let full = rows - t - 1;
                fb[..full].fill(z);
                fb[full] = z - phi - 1;
                fb[full + 1] = 1;
            }
        }
    }
    debug_assert_eq!(fb.iter().sum::<usize>(), b);
    Ok(rows_from(p, &fb))
}

/// The message symbols of one codeword.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageBlock {
    /// One vector per top row, of length `plain + feedback`.
    pub x: Vec<Vec<u32>>,
    /// `c × (n + m − 2z)`.
    pub y: SymbolMatrix,
}

impl MessageBlock {
    pub fn random<R: Rng + ?Sized>(keys: &CodecKeys, rng: &mut R) -> Self {
        let f = keys.field();
        let flat: Vec<u32> = (0..keys.message_len()).map(|_| f.random(rng)).collect();
        Self::from_flat(keys, &flat).expect("length matches")
    }

    pub fn zero(keys: &CodecKeys) -> Self {
        Self::from_flat(keys, &vec![0; keys.message_len()]).expect("length matches")
    }

    /// Top rows in order, then `Y` row-major.
    pub fn flatten(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self.x.concat();
        v.extend_from_slice(self.y.data());
        v
    }

    pub fn from_flat(keys: &CodecKeys, flat: &[u32]) -> Result<Self> {
        if flat.len() != keys.message_len() {
            return Err(Error::DimensionMismatch(format!(
                "{} message symbols, expected {}",
                flat.len(),
                keys.message_len()
            )));
        }
        let mut x = Vec::new();
        let mut at = 0;
        for row in &keys.layout {
            x.push(flat[at..at + row.dim()].to_vec());
            at += row.dim();
        }
        let p = &keys.params;
        let y = SymbolMatrix::from_vec(keys.field(), p.c, p.n + p.m - 2 * p.z, flat[at..].to_vec())?;
        Ok(Self { x, y })
    }
}

/// An encoded `a × (n+m)` matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Codeword {
    pub matrix: SymbolMatrix,
    n: usize,
    c: usize,
}

impl Codeword {
    /// Symbols on upstream link `i`.
    pub fn upstream(&self, i: usize) -> Vec<u32> {
        self.matrix.column(i)
    }

    /// Symbols on downstream link `j`: the bottom `c` entries of its column.
    pub fn downstream(&self, j: usize) -> Vec<u32> {
        let col = self.matrix.column(self.n + j);
        col[col.len() - self.c..].to_vec()
    }

    /// `a × n` block of upstream columns.
    pub fn upstream_block(&self) -> SymbolMatrix {
        self.matrix.select_columns(&(0..self.n).collect::<Vec<_>>())
    }

    /// `c × m` block of what the downstream links carry.
    pub fn downstream_block(&self) -> SymbolMatrix {
        let rows: Vec<usize> = (self.matrix.rows() - self.c..self.matrix.rows()).collect();
        let cols: Vec<usize> = (self.n..self.matrix.cols()).collect();
        self.matrix.select_rows(&rows).select_columns(&cols)
    }
}

/// Which linear combination node A reports for a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeedbackKind {
    /// `v̂ⱼ + Σᵢ θᵢⱼ x̂ᵢ`.
    Set,
    /// As `Set`, with the columns of identified positions dropped.
    Prime,
    /// Check symbols of the wider `(n+z, n)` code.
    Case3,
    /// `v̂ⱼ − Σᵢ θᵢⱼ x̂ᵢ`, sent by single-parity rows before any detection.
    Parity,
    /// `v̂` itself.
    RawV,
}

impl FeedbackKind {
    pub fn label(self) -> &'static str {
        match self {
            FeedbackKind::Set => "F_SET",
            FeedbackKind::Prime => "F_PRIME",
            FeedbackKind::Case3 => "F_CASE3",
            FeedbackKind::Parity => "F_PARITY",
            FeedbackKind::RawV => "RAW_V",
        }
    }
}

/// Key material shared by the source, both relays and the sink.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodecKeys {
    params: NetworkParams,
    layout: Vec<RowPlan>,
    /// Per top row, length `n + m`; the first `n` coordinates form the row code.
    claim_codes: Vec<MdsCode>,
    row_codes: Vec<MdsCode>,
    /// `plain × z` mixing coefficients of the fed-back combinations.
    mixing: SymbolMatrix,
    /// `(n + z, n)` code whose checks feedback-only rows report.
    wide: MdsCode,
    /// `2zc × UB` coefficients of the bottom-right block, row-major by entry.
    combos: SymbolMatrix,
    wire: WireMap,
}

/// Every transmitted symbol as a linear functional of the flat message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WireMap {
    /// Per upstream link, `a × UB`.
    pub upstream: Vec<SymbolMatrix>,
    /// Per downstream link, `c × UB`.
    pub downstream: Vec<SymbolMatrix>,
    /// Per downstream link, `(a − c) × UB` for the claim column it would carry.
    pub claim: Vec<SymbolMatrix>,
    /// Per top row, `n × UB` for its upstream coordinates.
    pub rows: Vec<SymbolMatrix>,
}

const KEY_ATTEMPTS: u64 = 64;

impl CodecKeys {
    /// Draws verified keys deterministically from `seed`.
    pub fn generate(params: &NetworkParams, seed: u64) -> Result<Self> {
        let layout = plan_layout(params)?;
        let p = *params;
        let needed = (p.n + p.m).max(p.n + p.z);
        if (p.q as usize) <= needed {
            return Err(Error::FieldTooSmall { q: p.q, needed });
        }
        let mut last = None;
        for attempt in 0..KEY_ATTEMPTS {
            let keys = Self::draw(&p, &layout, seed.wrapping_add(attempt.wrapping_mul(0x9e37_79b9_7f4a_7c15)))?;
            match keys.verify() {
                Ok(()) => return Ok(keys),
                Err(e) => last = Some(e),
            }
        }
        Err(last.unwrap_or_else(|| Error::InternalConsistency("key generation failed".into())))
    }

    fn draw(p: &NetworkParams, layout: &[RowPlan], seed: u64) -> Result<Self> {
        let f = p.field();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut claim_codes = Vec::new();
        let mut row_codes = Vec::new();
        for row in layout {
            let code = make_mds(row.dim(), p.n + p.m, p.q, rng.gen())?;
            row_codes.push(code.puncture(p.n)?);
            claim_codes.push(code);
        }
        let plain = p.n - p.z;
        let mut mixing = SymbolMatrix::zeros(f, plain, p.z);
        for i in 0..plain {
            for j in 0..p.z {
                mixing.set(i, j, f.random_nonzero(&mut rng));
            }
        }
        let wide = make_mds(p.n, p.n + p.z, p.q, rng.gen())?;
        let ub = upper_bound(p) as usize;
        let mut combos = SymbolMatrix::random(f, 2 * p.z * p.c, ub, &mut rng);
        // bottom rows: Y part of each row's L symbols is an MDS parity of that row alone
        let ycols = p.n + p.m - 2 * p.z;
        let y_start = ub - p.c * ycols;
        let bottom = make_mds(ycols, ycols + 2 * p.z, p.q, rng.gen())?;
        for r in 0..p.c {
            for k in 0..2 * p.z {
                for rr in 0..p.c {
                    for j in 0..ycols {
                        let v = if rr == r { bottom.eta(j, k) } else { 0 };
                        combos.set(r * 2 * p.z + k, y_start + rr * ycols + j, v);
                    }
                }
            }
        }
        let mut keys = Self {
            params: *p,
            layout: layout.to_vec(),
            claim_codes,
            row_codes,
            mixing,
            wide,
            combos,
            wire: WireMap { upstream: vec![], downstream: vec![], claim: vec![], rows: vec![] },
        };
        keys.wire = keys.build_wire_map()?;
        Ok(keys)
    }

    /// Checks the two properties decoding relies on.
    ///
    /// Per row, the relays' combined checks see every error pattern on at
    /// most `z` upstream positions. Globally, removing any `z` links leaves
    /// the message determined by what remains.
    pub fn verify(&self) -> Result<()> {
        let p = &self.params;
        for (r, row) in self.layout.iter().enumerate() {
            let kinds: &[FeedbackKind] = match row.case(p.z) {
                RowCase::FullParity => &[FeedbackKind::Set],
                RowCase::SplitParity => &[FeedbackKind::Set],
                RowCase::FeedbackOnly => &[FeedbackKind::Case3],
                RowCase::SingleParity => &[FeedbackKind::Parity],
            };
            for &kind in kinds {
                let mut rows = self.row_check(r).data().to_vec();
                rows.extend_from_slice(self.feedback_functional(r, kind, &[]).data());
                let combined = SymbolMatrix::from_vec(self.field(), p.z, p.n, rows)?;
                let t = p.z.min(p.n);
                if let Some(cols) = combinations(p.n, t).find(|c| combined.select_columns(c).rank() < t) {
                    return Err(Error::InternalConsistency(format!(
                        "row {r}: relay checks blind on positions {cols:?}"
                    )));
                }
            }
        }
        let links = p.links();
        let ub = self.message_len();
        for removed in combinations(links.len(), p.z) {
            let removed: Vec<LinkId> = removed.iter().map(|&k| links[k]).collect();
            let mut ech = Echelon::new(self.field(), ub);
            for (row_fn, _) in self.link_functionals(&removed, !removed.contains(&LinkId::Feedback)) {
                let _ = ech.insert(&row_fn, 0);
                if ech.is_full_rank() {
                    break;
                }
            }
            if !ech.is_full_rank() {
                return Err(Error::InternalConsistency(format!(
                    "message not determined with links {removed:?} removed"
                )));
            }
        }
        self.verify_y_pairs()
    }

    /// With two disjoint hypotheses of z forward links each, the symbols
    /// outside both must still pin down every bottom-block unknown.
    fn verify_y_pairs(&self) -> Result<()> {
        let p = &self.params;
        let ub = self.message_len();
        let y_len = p.c * (p.n + p.m - 2 * p.z);
        let y_start = ub - y_len;
        let forward: Vec<LinkId> = p.links().into_iter().filter(|l| *l != LinkId::Feedback).collect();
        let t = (2 * p.z).min(forward.len());
        for removed in combinations(forward.len(), t) {
            let removed: Vec<LinkId> = removed.iter().map(|&k| forward[k]).collect();
            let mut ech = Echelon::new(self.field(), y_len);
            for (row_fn, _) in self.link_functionals(&removed, false) {
                let _ = ech.insert(&row_fn[y_start..], 0);
                if ech.is_full_rank() {
                    break;
                }
            }
            if !ech.is_full_rank() {
                return Err(Error::InternalConsistency(format!(
                    "bottom block not determined with links {removed:?} removed"
                )));
            }
        }
        Ok(())
    }

    /// Coefficient rows (with their owner) for every symbol outside `removed`.
    fn link_functionals(&self, removed: &[LinkId], with_feedback: bool) -> Vec<(Vec<u32>, LinkId)> {
        let p = &self.params;
        let mut out = Vec::new();
        for i in 0..p.n {
            if !removed.contains(&LinkId::Upstream(i)) {
                for r in 0..p.a {
                    out.push((self.wire.upstream[i].row(r).to_vec(), LinkId::Upstream(i)));
                }
            }
        }
        for j in 0..p.m {
            if !removed.contains(&LinkId::Downstream(j)) {
                for r in 0..p.c {
                    out.push((self.wire.downstream[j].row(r).to_vec(), LinkId::Downstream(j)));
                }
            }
        }
        if with_feedback {
            for (r, row) in self.layout.iter().enumerate() {
                let kind = match row.case(p.z) {
                    RowCase::FeedbackOnly => FeedbackKind::Case3,
                    RowCase::SingleParity => FeedbackKind::Parity,
                    _ => FeedbackKind::Set,
                };
                let phi = self.feedback_functional(r, kind, &[]);
                let eqs = phi.mul(&self.wire.rows[r]).expect("shapes agree");
                for k in 0..eqs.rows() {
                    out.push((eqs.row(k).to_vec(), LinkId::Feedback));
                }
            }
        }
        out
    }

    fn build_wire_map(&self) -> Result<WireMap> {
        let p = &self.params;
        let f = self.field();
        let ub = self.message_len();
        let mut upstream = vec![SymbolMatrix::zeros(f, p.a, ub); p.n];
        let mut downstream = vec![SymbolMatrix::zeros(f, p.c, ub); p.m];
        let mut claim = vec![SymbolMatrix::zeros(f, p.a - p.c, ub); p.m];
        let mut rows = vec![SymbolMatrix::zeros(f, p.n, ub); p.a - p.c];
        for k in 0..ub {
            let mut unit = vec![0; ub];
            unit[k] = 1;
            let msg = MessageBlock::from_flat(self, &unit)?;
            let cw = self.encode_unchecked(&msg)?;
            let w = self.claim_matrix(&msg)?;
            for i in 0..p.n {
                for (r, v) in cw.upstream(i).into_iter().enumerate() {
                    upstream[i].set(r, k, v);
                }
            }
            for j in 0..p.m {
                for (r, v) in cw.downstream(j).into_iter().enumerate() {
                    downstream[j].set(r, k, v);
                }
                for r in 0..p.a - p.c {
                    claim[j].set(r, k, w.get(r, j));
                }
            }
            for (r, row) in rows.iter_mut().enumerate() {
                for i in 0..p.n {
                    row.set(i, k, cw.matrix.get(r, i));
                }
            }
        }
        Ok(WireMap { upstream, downstream, claim, rows })
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    pub fn field(&self) -> Field {
        self.params.field()
    }

    pub fn layout(&self) -> &[RowPlan] {
        &self.layout
    }

    pub fn row_case(&self, row: usize) -> RowCase {
        self.layout[row].case(self.params.z)
    }

    pub fn row_code(&self, row: usize) -> &MdsCode {
        &self.row_codes[row]
    }

    pub fn claim_code(&self, row: usize) -> &MdsCode {
        &self.claim_codes[row]
    }

    pub fn wide_code(&self) -> &MdsCode {
        &self.wide
    }

    pub fn mixing(&self) -> &SymbolMatrix {
        &self.mixing
    }

    pub fn combos(&self) -> &SymbolMatrix {
        &self.combos
    }

    pub fn wire(&self) -> &WireMap {
        &self.wire
    }

    /// Number of message symbols per codeword.
    pub fn message_len(&self) -> usize {
        upper_bound(&self.params) as usize
    }

    /// Parity checks of a row's upstream code, `parity × n`.
    pub fn row_check(&self, row: usize) -> SymbolMatrix {
        self.row_codes[row].check_matrix()
    }

    /// The functional node A applies to a received row for `kind`, `len × n`.
    pub fn feedback_functional(&self, row: usize, kind: FeedbackKind, identified: &[usize]) -> SymbolMatrix {
        let p = &self.params;
        let f = self.field();
        let plan = self.layout[row];
        match kind {
            FeedbackKind::Case3 => {
                // checks of the wide code on the n received coordinates
                self.wide.parity().transpose()
            }
            FeedbackKind::RawV => {
                let mut phi = SymbolMatrix::zeros(f, plan.feedback, p.n);
                for j in 0..plan.feedback {
                    phi.set(j, plan.plain + j, 1);
                }
                phi
            }
            FeedbackKind::Set | FeedbackKind::Prime | FeedbackKind::Parity => {
                let mut phi = SymbolMatrix::zeros(f, plan.feedback, p.n);
                for j in 0..plan.feedback {
                    for i in 0..plan.plain {
                        let t = self.mixing.get(i, j);
                        phi.set(j, i, if kind == FeedbackKind::Parity { f.neg(t) } else { t });
                    }
                    phi.set(j, plan.plain + j, 1);
                }
                if kind == FeedbackKind::Prime {
                    for &pos in identified {
                        for j in 0..plan.feedback {
                            phi.set(j, pos, 0);
                        }
                    }
                }
                phi
            }
        }
    }

    pub fn encode(&self, msg: &MessageBlock) -> Result<Codeword> {
        let p = &self.params;
        if msg.x.len() != self.layout.len()
            || msg.x.iter().zip(&self.layout).any(|(x, r)| x.len() != r.dim())
            || msg.y.rows() != p.c
            || msg.y.cols() != p.n + p.m - 2 * p.z
        {
            return Err(Error::DimensionMismatch("message block does not match the row layout".into()));
        }
        self.encode_unchecked(msg)
    }

    fn encode_unchecked(&self, msg: &MessageBlock) -> Result<Codeword> {
        let p = &self.params;
        let f = self.field();
        let mut m = SymbolMatrix::zeros(f, p.a, p.n + p.m);
        for (r, x) in msg.x.iter().enumerate() {
            for (i, v) in self.row_codes[r].encode(x)?.into_iter().enumerate() {
                m.set(r, i, v);
            }
        }
        let top = p.a - p.c;
        let ycols = p.n + p.m - 2 * p.z;
        for r in 0..p.c {
            for k in 0..ycols {
                m.set(top + r, k, msg.y.get(r, k));
            }
        }
        let mixed = self.combos.mul_vec(&msg.flatten())?;
        for r in 0..p.c {
            for k in 0..2 * p.z {
                m.set(top + r, ycols + k, mixed[r * 2 * p.z + k]);
            }
        }
        Ok(Codeword { matrix: m, n: p.n, c: p.c })
    }

    /// `(a − c) × m` block extending each top row to its full claim codeword.
    pub fn claim_matrix(&self, msg: &MessageBlock) -> Result<SymbolMatrix> {
        let p = &self.params;
        let mut w = SymbolMatrix::zeros(self.field(), p.a - p.c, p.m);
        for (r, x) in msg.x.iter().enumerate() {
            let full = self.claim_codes[r].encode(x)?;
            for j in 0..p.m {
                w.set(r, j, full[p.n + j]);
            }
        }
        Ok(w)
    }

    /// Parity residuals of a received row: zero exactly when it satisfies the row code's checks.
    pub fn compute_delta(&self, row: usize, received: &[u32]) -> Result<Vec<u32>> {
        self.row_check(row).mul_vec(received)
    }

    /// The single-parity-style fed-back values `v̂ⱼ − Σᵢ θᵢⱼ x̂ᵢ`.
    pub fn feedback_symbols(&self, row: usize, received: &[u32]) -> Result<Vec<u32>> {
        self.feedback_functional(row, FeedbackKind::Parity, &[]).mul_vec(received)
    }

    /// Serializes to the `ZNEC1` blob.
    pub fn to_blob(&self) -> Vec<u8> {
        let p = &self.params;
        let mut out = b"ZNEC1".to_vec();
        let put = |out: &mut Vec<u8>, v: u32| out.extend_from_slice(&v.to_le_bytes());
        put(&mut out, p.q);
        for v in [p.n, p.m, p.a, p.b, p.c, p.z] {
            put(&mut out, v as u32);
        }
        let mut mats: Vec<&SymbolMatrix> = self.claim_codes.iter().map(MdsCode::parity).collect();
        mats.push(&self.mixing);
        mats.push(self.wide.parity());
        mats.push(&self.combos);
        put(&mut out, mats.len() as u32);
        for mtx in mats {
            put(&mut out, mtx.rows() as u32);
            put(&mut out, mtx.cols() as u32);
            for &v in mtx.data() {
                put(&mut out, v);
            }
        }
        out
    }

    pub fn from_blob(blob: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::KeyFormat(m.to_string());
        let body = blob.strip_prefix(b"ZNEC1").ok_or_else(|| bad("missing ZNEC1 magic"))?;
        let mut words = body.chunks(4).map(|c| {
            <[u8; 4]>::try_from(c).map(u32::from_le_bytes).map_err(|_| bad("truncated word"))
        });
        let mut next = || words.next().unwrap_or_else(|| Err(bad("unexpected end of blob")));
        let q = next()?;
        let mut dims = [0usize; 6];
        for d in &mut dims {
            *d = next()? as usize;
        }
        let [n, m, a, b, c, z] = dims;
        let params = NetworkParams::new(n, m, a, b, c, z, q).map_err(|e| bad(&e.to_string()))?;
        let layout = plan_layout(&params).map_err(|e| bad(&e.to_string()))?;
        let f = params.field();
        let count = next()? as usize;
        if count != layout.len() + 3 {
            return Err(bad("wrong matrix count"));
        }
        let mut mats = Vec::with_capacity(count);
        for _ in 0..count {
            let rows = next()? as usize;
            let cols = next()? as usize;
            let data = (0..rows * cols)
                .map(|_| next().and_then(|v| if v < q { Ok(v) } else { Err(bad("symbol out of field")) }))
                .collect::<Result<Vec<u32>>>()?;
            mats.push(SymbolMatrix::from_vec(f, rows, cols, data).map_err(|e| bad(&e.to_string()))?);
        }
        if next().is_ok() {
            return Err(bad("trailing bytes"));
        }
        let combos = mats.pop().expect("count checked");
        let wide = MdsCode::from_parity(mats.pop().expect("count checked"));
        let mixing = mats.pop().expect("count checked");
        let ub = upper_bound(&params) as usize;
        let shape_ok = mats.iter().zip(&layout).all(|(e, r)| e.rows() == r.dim() && e.cols() == n + m - r.dim())
            && mixing.rows() == n - z
            && mixing.cols() == z
            && wide.length() == n + z
            && wide.dim() == n
            && combos.rows() == 2 * z * c
            && combos.cols() == ub;
        if !shape_ok {
            return Err(bad("matrix shapes do not match the parameters"));
        }
        let claim_codes: Vec<MdsCode> = mats.into_iter().map(MdsCode::from_parity).collect();
        let row_codes = claim_codes.iter().map(|code| code.puncture(n)).collect::<Result<Vec<_>>>()?;
        let mut keys = Self {
            params,
            layout,
            claim_codes,
            row_codes,
            mixing,
            wide,
            combos,
            wire: WireMap { upstream: vec![], downstream: vec![], claim: vec![], rows: vec![] },
        };
        keys.wire = keys.build_wire_map()?;
        Ok(keys)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fb_of(p: &NetworkParams) -> Vec<usize> {
        plan_layout(p).unwrap().iter().map(|r| r.feedback).collect()
    }

    #[test]
    fn reference_layouts() {
        assert_eq!(fb_of(&NetworkParams::p0()), vec![2, 0]);
        let p1 = plan_layout(&NetworkParams::p1()).unwrap();
        assert_eq!(p1, vec![RowPlan { plain: 1, feedback: 1, parity: 2 }]);
        assert_eq!(p1[0].case(3), RowCase::SplitParity);
        let z1 = plan_layout(&NetworkParams::z1_micro()).unwrap();
        assert_eq!(z1.iter().map(|r| r.case(1)).collect::<Vec<_>>(), vec![RowCase::FeedbackOnly, RowCase::FullParity]);
    }

    #[test]
    fn layout_rejects_loose_tuple() {
        let p = NetworkParams { n: 3, m: 4, a: 5, b: 4, c: 2, z: 2, q: 257 };
        assert!(matches!(plan_layout(&p), Err(Error::UnsupportedParams(_))));
    }

    #[test]
    fn z2_odd_feedback_rearrangement() {
        // a − c = 3, b = 3: one row with a single parity symbol remains
        let p = NetworkParams { n: 3, m: 5, a: 5, b: 3, c: 2, z: 2, q: 257 };
        if tight_condition(&p) {
            assert_eq!(fb_of(&p), vec![2, 1, 0]);
        }
    }

    #[test]
    fn p0_dimensions_and_systematic_rows() {
        let keys = CodecKeys::generate(&NetworkParams::p0(), 1).unwrap();
        assert_eq!(keys.message_len(), 10);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let msg = MessageBlock::random(&keys, &mut rng);
        let cw = keys.encode(&msg).unwrap();
        assert_eq!((cw.matrix.rows(), cw.matrix.cols()), (4, 7));
        for (r, x) in msg.x.iter().enumerate() {
            assert_eq!(&cw.matrix.row(r)[..x.len()], &x[..]);
            assert!(cw.matrix.row(r)[3..].iter().all(|&v| v == 0));
        }
        assert_eq!(cw.matrix.get(2, 0), msg.y.get(0, 0));
        let zero = keys.encode(&MessageBlock::zero(&keys)).unwrap();
        assert!(zero.matrix.is_zero());
    }

    #[test]
    fn delta_zero_on_clean_rows_and_local_on_parity_errors() {
        let keys = CodecKeys::generate(&NetworkParams::p0(), 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let msg = MessageBlock::random(&keys, &mut rng);
        let cw = keys.encode(&msg).unwrap();
        let row = cw.matrix.row(1)[..3].to_vec();
        assert_eq!(keys.compute_delta(1, &row).unwrap(), vec![0, 0]);
        let mut bad = row.clone();
        bad[2] = keys.field().add(bad[2], 5);
        assert_eq!(keys.compute_delta(1, &bad).unwrap(), vec![0, 5]);
        let mut bad = row;
        bad[0] = keys.field().add(bad[0], 1);
        assert!(keys.compute_delta(1, &bad).unwrap().iter().all(|&d| d != 0));
    }

    #[test]
    fn claim_extends_rows() {
        let keys = CodecKeys::generate(&NetworkParams::p0(), 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let msg = MessageBlock::random(&keys, &mut rng);
        let cw = keys.encode(&msg).unwrap();
        let w = keys.claim_matrix(&msg).unwrap();
        assert_eq!((w.rows(), w.cols()), (2, 4));
        let full = keys.claim_code(1).encode(&msg.x[1]).unwrap();
        assert_eq!(&full[..3], &cw.matrix.row(1)[..3]);
        assert_eq!(&full[3..], w.row(1));
        assert!(keys.claim_matrix(&MessageBlock::zero(&keys)).unwrap().is_zero());
    }

    #[test]
    fn blob_round_trip_and_rejects_garbage() {
        let keys = CodecKeys::generate(&NetworkParams::p1(), 9).unwrap();
        let blob = keys.to_blob();
        assert_eq!(&blob[..5], b"ZNEC1");
        assert_eq!(CodecKeys::from_blob(&blob).unwrap(), keys);
        assert!(matches!(CodecKeys::from_blob(b"ZNEC0"), Err(Error::KeyFormat(_))));
        assert!(CodecKeys::from_blob(&blob[..blob.len() - 2]).is_err());
        let mut extra = blob.clone();
        extra.extend_from_slice(&[0, 0, 0, 0]);
        assert!(CodecKeys::from_blob(&extra).is_err());
    }

    #[test]
    fn field_too_small_for_claim_code() {
        let p = NetworkParams::p0().with_q(7);
        assert!(matches!(CodecKeys::generate(&p, 0), Err(Error::FieldTooSmall { .. })));
    }
}
