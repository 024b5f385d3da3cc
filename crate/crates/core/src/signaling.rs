//! Relay logic: node A checks what it received upstream and reports over
//! the feedback link; node B, which knows the message, verifies the report
//! and decides whether to send the claim block downstream.

use std::collections::BTreeSet;

use crate::bounds::{LinkId, NetworkParams};
use crate::codec::{CodecKeys, FeedbackKind, MessageBlock, RowCase};
use crate::error::{Error, Result};
use crate::galois::{Field, SymbolMatrix};

/// What node A reports for one row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowSignal {
    Values { kind: FeedbackKind, payload: Vec<u32> },
    /// Claim-sending signal, optionally naming the upstream position A localized.
    Cs { located: Option<usize> },
}

/// One round of feedback, row by row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeedbackMessage {
    pub rows: Vec<RowSignal>,
}

impl FeedbackMessage {
    /// Payload symbols carried; CS markers are counted separately as overhead.
    pub fn symbol_count(&self) -> usize {
        self.rows
            .iter()
            .map(|r| match r {
                RowSignal::Values { payload, .. } => payload.len(),
                RowSignal::Cs { .. } => 0,
            })
            .sum()
    }

    pub fn cs_count(&self) -> usize {
        self.rows.iter().filter(|r| matches!(r, RowSignal::Cs { .. })).count()
    }

    /// Adds `errors` to the payload symbols in row order. Signal kinds are untouched.
    pub fn apply_errors(&mut self, field: Field, errors: &[u32]) {
        let mut it = errors.iter();
        for row in &mut self.rows {
            if let RowSignal::Values { payload, .. } = row {
                for v in payload.iter_mut() {
                    match it.next() {
                        Some(&e) => *v = field.add(*v, e),
                        None => return,
                    }
                }
            }
        }
    }

    /// Short per-row tags, e.g. `F_SET:1|CS@0`.
    pub fn describe(&self) -> String {
        self.rows
            .iter()
            .map(|r| match r {
                RowSignal::Values { kind, payload } => format!("{}:{}", kind.label(), payload.len()),
                RowSignal::Cs { located: Some(l) } => format!("CS@{l}"),
                RowSignal::Cs { located: None } => "CS".to_string(),
            })
            .collect::<Vec<_>>()
            .join("|")
    }
}

/// `N · (K v)` where `N` annihilates the columns of `K` at `positions`.
pub fn residual(check: &SymbolMatrix, positions: &[usize], v: &[u32]) -> Vec<u32> {
    let syndrome = check.mul_vec(v).expect("row length matches");
    if positions.is_empty() {
        return syndrome;
    }
    let n = check.select_columns(positions).left_null_space();
    n.mul_vec(&syndrome).expect("shapes agree")
}

/// The single position `l ∉ known` whose column, together with `known`,
/// explains `syndrome`, if exactly one does.
pub fn locate_single(check: &SymbolMatrix, known: &[usize], syndrome: &[u32]) -> Option<usize> {
    let f = check.field();
    let mut found = None;
    for l in (0..check.cols()).filter(|l| !known.contains(l)) {
        let mut cols = known.to_vec();
        cols.push(l);
        let mut aug = check.select_columns(&cols);
        let base = aug.rank();
        let mut rows = Vec::with_capacity(aug.rows() * (aug.cols() + 1));
        for r in 0..aug.rows() {
            rows.extend_from_slice(aug.row(r));
            rows.push(syndrome[r]);
        }
        aug = SymbolMatrix::from_vec(f, check.rows(), cols.len() + 1, rows).expect("shape");
        if aug.rank() == base {
            if found.is_some() {
                return None;
            }
            found = Some(l);
        }
    }
    found
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeARow {
    pub case: RowCase,
    /// Upstream positions believed erroneous; only grows.
    pub identified: Vec<usize>,
    pub detected: bool,
    pub last_delta: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeAState {
    pub rows: Vec<NodeARow>,
    pub cs_sent: usize,
    /// Whether single-parity rows switch to forwarding raw v̂ after their
    /// first detection; otherwise they stay on the claim path.
    pub forwards_raw_v: bool,
}

/// Raw v̂ forwarding is only used with z > 2 and m ≥ 2z; smaller tuples
/// leave the sink unable to separate some pairs of hypotheses.
pub fn forwards_raw_v(p: &crate::NetworkParams) -> bool {
    p.z > 2 && p.m >= 2 * p.z
}

impl NodeAState {
    pub fn new(keys: &CodecKeys) -> Self {
        let rows = (0..keys.layout().len())
            .map(|r| NodeARow { case: keys.row_case(r), identified: vec![], detected: false, last_delta: vec![] })
            .collect();
        Self { rows, cs_sent: 0, forwards_raw_v: forwards_raw_v(keys.params()) }
    }

    /// The kind node A sends for `row` when its checks pass this round.
    pub fn quiet_kind(&self, row: usize) -> FeedbackKind {
        let state = &self.rows[row];
        match state.case {
            RowCase::FeedbackOnly => FeedbackKind::Case3,
            RowCase::SingleParity if state.detected && self.forwards_raw_v => FeedbackKind::RawV,
            RowCase::SingleParity => FeedbackKind::Parity,
            _ if state.identified.is_empty() => FeedbackKind::Set,
            _ => FeedbackKind::Prime,
        }
    }

    /// The checks node A currently applies to `row`: an error passes
    /// silently exactly when it lies in their null space.
    pub fn check_operator(&self, keys: &CodecKeys, row: usize) -> SymbolMatrix {
        let state = &self.rows[row];
        let check = keys.row_check(row);
        let n = keys.params().n;
        match state.case {
            RowCase::FeedbackOnly => SymbolMatrix::zeros(keys.field(), 0, n),
            RowCase::SingleParity if state.detected && self.forwards_raw_v => SymbolMatrix::zeros(keys.field(), 0, n),
            RowCase::SingleParity => check,
            _ if state.identified.is_empty() => check,
            _ => {
                let null = check.select_columns(&state.identified).left_null_space();
                null.mul(&check).expect("shapes agree")
            }
        }
    }

    /// Checks the received `a × n` upstream block and builds this round's feedback.
    pub fn observe(&mut self, keys: &CodecKeys, received: &SymbolMatrix) -> Result<FeedbackMessage> {
        let p = keys.params();
        if received.rows() != p.a || received.cols() != p.n {
            return Err(Error::DimensionMismatch(format!(
                "upstream block {}×{}, expected {}×{}",
                received.rows(),
                received.cols(),
                p.a,
                p.n
            )));
        }
        let mut out = Vec::with_capacity(self.rows.len());
        for (r, state) in self.rows.iter_mut().enumerate() {
            let row = received.row(r);
            let check = keys.row_check(r);
            state.last_delta = check.mul_vec(row)?;
            let values = |kind: FeedbackKind, identified: &[usize]| -> Result<RowSignal> {
                let payload = keys.feedback_functional(r, kind, identified).mul_vec(row)?;
                Ok(RowSignal::Values { kind, payload })
            };
            let signal = match state.case {
                RowCase::FeedbackOnly => values(FeedbackKind::Case3, &[])?,
                RowCase::SingleParity if state.detected && self.forwards_raw_v => values(FeedbackKind::RawV, &[])?,
                RowCase::SingleParity => {
                    if state.last_delta.iter().any(|&d| d != 0) {
                        // one redundancy symbol cannot localize anything
                        state.detected = true;
                        RowSignal::Cs { located: None }
                    } else {
                        values(FeedbackKind::Parity, &[])?
                    }
                }
                RowCase::FullParity | RowCase::SplitParity => {
                    let res = residual(&check, &state.identified, row);
                    if res.iter().any(|&d| d != 0) {
                        state.detected = true;
                        let located = locate_single(&check, &state.identified, &state.last_delta);
                        if let Some(l) = located {
                            state.identified.push(l);
                        }
                        RowSignal::Cs { located }
                    } else if state.identified.is_empty() {
                        values(FeedbackKind::Set, &[])?
                    } else {
                        values(FeedbackKind::Prime, &state.identified)?
                    }
                }
            };
            if matches!(signal, RowSignal::Cs { .. }) {
                self.cs_sent += 1;
            }
            out.push(signal);
        }
        Ok(FeedbackMessage { rows: out })
    }
}

/// Convenience wrapper over [`NodeAState::observe`].
pub fn node_a_observe(state: &mut NodeAState, keys: &CodecKeys, received: &SymbolMatrix) -> Result<FeedbackMessage> {
    state.observe(keys, received)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeBRow {
    /// Positions A reported through CS.
    pub reported: Vec<usize>,
    /// Positions B localized itself from feedback-only rows.
    pub located: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeBState {
    pub rows: Vec<NodeBRow>,
    pub claims_sent: usize,
}

/// Node B's decision for one round.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BAction {
    pub send_claim: bool,
    /// A mismatch B could not attribute to a single position.
    pub unlocalized: bool,
    /// `(row, position)` pairs newly localized.
    pub recorded: Vec<(usize, usize)>,
}

impl BAction {
    pub fn label(&self) -> &'static str {
        match (self.send_claim, self.recorded.is_empty()) {
            (false, _) => "NONE",
            (true, true) => "SEND_CLAIM",
            (true, false) => "RECORD_IDENTIFICATION",
        }
    }
}

impl NodeBState {
    pub fn new(keys: &CodecKeys) -> Self {
        let rows = (0..keys.layout().len()).map(|_| NodeBRow { reported: vec![], located: vec![] }).collect();
        Self { rows, claims_sent: 0 }
    }

    /// Checks the received feedback against the true message.
    pub fn verify(&mut self, keys: &CodecKeys, feedback: &FeedbackMessage, truth: &MessageBlock) -> Result<BAction> {
        let f = keys.field();
        let mut action = BAction::default();
        for (r, signal) in feedback.rows.iter().enumerate() {
            let state = &mut self.rows[r];
            match signal {
                RowSignal::Cs { located } => {
                    action.send_claim = true;
                    if let Some(l) = located {
                        if !state.reported.contains(l) {
                            state.reported.push(*l);
                        }
                    }
                }
                RowSignal::Values { kind, payload } => {
                    let phi = keys.feedback_functional(r, *kind, &state.reported);
                    let expected = phi.mul_vec(&keys.row_code(r).encode(&truth.x[r])?)?;
                    if expected.len() != payload.len() {
                        action.send_claim = true;
                        action.unlocalized = true;
                        continue;
                    }
                    let omega: Vec<u32> = payload.iter().zip(&expected).map(|(p, e)| f.sub(*p, *e)).collect();
                    if omega.iter().all(|&w| w == 0) {
                        continue;
                    }
                    action.send_claim = true;
                    if *kind == FeedbackKind::Case3 {
                        match locate_single(&phi, &[], &omega) {
                            Some(l) => {
                                if !state.located.contains(&l) {
                                    state.located.push(l);
                                }
                                action.recorded.push((r, l));
                            }
                            None => action.unlocalized = true,
                        }
                    } else {
                        action.unlocalized = true;
                    }
                }
            }
        }
        if action.send_claim {
            self.claims_sent += 1;
        }
        Ok(action)
    }
}

/// Convenience wrapper over [`NodeBState::verify`].
pub fn node_b_verify(
    state: &mut NodeBState,
    keys: &CodecKeys,
    feedback: &FeedbackMessage,
    truth: &MessageBlock,
) -> Result<BAction> {
    state.verify(keys, feedback, truth)
}

/// Whether the sink has left the silent regime: two upstream links
/// identified, or a claim block delivered.
pub fn detection_complete(p: &NetworkParams, identified: &BTreeSet<LinkId>, claims_delivered: usize) -> bool {
    let upstream = identified.iter().filter(|l| l.is_upstream()).count();
    (upstream >= 2 && p.z >= 2) || claims_delivered > 0
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(p: NetworkParams) -> (CodecKeys, MessageBlock, SymbolMatrix) {
        let keys = CodecKeys::generate(&p, 11).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let msg = MessageBlock::random(&keys, &mut rng);
        let up = keys.encode(&msg).unwrap().upstream_block();
        (keys, msg, up)
    }

    #[test]
    fn clean_round_is_silent() {
        for p in [NetworkParams::p0(), NetworkParams::p1()] {
            let (keys, msg, up) = setup(p);
            let mut a = NodeAState::new(&keys);
            let mut b = NodeBState::new(&keys);
            let fb = a.observe(&keys, &up).unwrap();
            assert_eq!(fb.cs_count(), 0);
            assert_eq!(fb.symbol_count(), p.b);
            let act = b.verify(&keys, &fb, &msg).unwrap();
            assert!(!act.send_claim);
        }
    }

    #[test]
    fn full_parity_row_parity_error_raises_cs() {
        let (keys, _, mut up) = setup(NetworkParams::p0());
        // row 1 of P0 has two parity symbols at positions 1, 2
        let f = keys.field();
        up.set(1, 2, f.add(up.get(1, 2), 3));
        let mut a = NodeAState::new(&keys);
        let fb = a.observe(&keys, &up).unwrap();
        assert_eq!(fb.rows[1], RowSignal::Cs { located: Some(2) });
        let delta = &a.rows[1].last_delta;
        assert_eq!(delta.iter().filter(|&&d| d != 0).count(), 1);
    }

    #[test]
    fn feedback_only_row_error_localized_by_b() {
        let (keys, msg, mut up) = setup(NetworkParams::p0());
        let f = keys.field();
        up.set(0, 1, f.add(up.get(0, 1), 7));
        let mut a = NodeAState::new(&keys);
        let mut b = NodeBState::new(&keys);
        let fb = a.observe(&keys, &up).unwrap();
        assert_eq!(fb.cs_count(), 0);
        let act = b.verify(&keys, &fb, &msg).unwrap();
        assert!(act.send_claim);
        assert_eq!(act.recorded, vec![(0, 1)]);
        assert_eq!(act.label(), "RECORD_IDENTIFICATION");
    }

    #[test]
    fn tampered_payload_is_caught() {
        let (keys, msg, up) = setup(NetworkParams::p1());
        let mut a = NodeAState::new(&keys);
        let mut b = NodeBState::new(&keys);
        let mut fb = a.observe(&keys, &up).unwrap();
        fb.apply_errors(keys.field(), &[1]);
        assert!(b.verify(&keys, &fb, &msg).unwrap().send_claim);
    }

    #[test]
    fn split_row_identification_then_prime() {
        let (keys, msg, up) = setup(NetworkParams::p1());
        let f = keys.field();
        let mut a = NodeAState::new(&keys);
        let mut b = NodeBState::new(&keys);
        let mut bad = up.clone();
        bad.set(0, 0, f.add(bad.get(0, 0), 4));
        let fb = a.observe(&keys, &bad).unwrap();
        assert_eq!(fb.rows[0], RowSignal::Cs { located: Some(0) });
        assert!(b.verify(&keys, &fb, &msg).unwrap().send_claim);
        // same position attacked again: cancelled, F_PRIME sent and accepted
        let mut again = up.clone();
        again.set(0, 0, f.add(again.get(0, 0), 9));
        let fb = a.observe(&keys, &again).unwrap();
        assert!(matches!(fb.rows[0], RowSignal::Values { kind: FeedbackKind::Prime, .. }));
        assert!(!b.verify(&keys, &fb, &msg).unwrap().send_claim);
        // a new position cannot hide
        let mut other = up;
        other.set(0, 3, f.add(other.get(0, 3), 1));
        assert_eq!(a.observe(&keys, &other).unwrap().cs_count(), 1);
    }

    #[test]
    fn detection_complete_rules() {
        let p = NetworkParams::p0();
        assert!(!detection_complete(&p, &BTreeSet::new(), 0));
        let two: BTreeSet<LinkId> = [LinkId::Upstream(0), LinkId::Upstream(2)].into_iter().collect();
        assert!(detection_complete(&p, &two, 0));
        assert!(detection_complete(&p, &BTreeSet::new(), 1));
    }

    #[test]
    fn residual_cancels_identified_column() {
        let keys = CodecKeys::generate(&NetworkParams::p0(), 3).unwrap();
        let check = keys.row_check(1);
        let mut v = vec![0; 3];
        v[0] = 5;
        assert!(residual(&check, &[0], &v).iter().all(|&x| x == 0));
        assert!(residual(&check, &[], &v).iter().any(|&x| x != 0));
    }
}
