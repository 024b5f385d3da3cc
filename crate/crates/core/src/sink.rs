//! Sink-side decoding.
//!
//! Every symbol the sink sees is a known linear functional of the message.
//! Decoding removes a hypothesized set of bad links, solves what remains,
//! and accepts only when every consistent, fully determined hypothesis
//! yields the same message. Links whose observations disagree with the
//! re-encoded message are identified and dropped from later rounds.

use std::collections::BTreeSet;
use std::fmt;

use crate::bounds::LinkId;
use crate::codec::{CodecKeys, MessageBlock, RowCase};
use crate::error::{Error, Result};
use crate::galois::{Echelon, SymbolMatrix};
use crate::mds::combinations;
use crate::signaling::{FeedbackMessage, NodeAState, RowSignal};

/// Everything that reaches the sink in one round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SinkView {
    /// `a × n`: the upstream block as node A received it, relayed reliably.
    pub upstream: SymbolMatrix,
    /// `c × m`: what arrived on the downstream links.
    pub downstream: SymbolMatrix,
    /// What node A sent on the feedback link.
    pub feedback_echo: FeedbackMessage,
    /// `(a − c) × m` claim block as received, when node B sent one.
    pub claim: Option<SymbolMatrix>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DecodeMode {
    Z1Path,
    NoSignalSubset,
    ClaimMds,
    Post2Identified,
    SingleParityHold,
}

impl fmt::Display for DecodeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecodeMode::Z1Path => "Z1_PATH",
            DecodeMode::NoSignalSubset => "NO_SIGNAL_SUBSET",
            DecodeMode::ClaimMds => "CLAIM_MDS",
            DecodeMode::Post2Identified => "POST_2_IDENTIFIED",
            DecodeMode::SingleParityHold => "SINGLE_PARITY_HOLD",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeOutcome {
    pub message: Result<MessageBlock>,
    pub newly_identified: BTreeSet<LinkId>,
    pub mode: DecodeMode,
    /// Removal sets solved this round; zero when the full system sufficed.
    pub hypotheses: usize,
}

/// Result of solving with one set of links removed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HypothesisOutcome {
    Consistent(MessageBlock),
    Inconsistent,
    Underdetermined,
}

#[derive(Debug, Clone)]
struct Equation {
    coeffs: Vec<u32>,
    rhs: u32,
    /// `None` for pinned values that belong to no link.
    link: Option<LinkId>,
}

/// Decoder state carried across rounds.
#[derive(Debug, Clone)]
pub struct Sink {
    identified: BTreeSet<LinkId>,
    relay_a: NodeAState,
}

impl Sink {
    pub fn new(keys: &CodecKeys) -> Self {
        Self { identified: BTreeSet::new(), relay_a: NodeAState::new(keys) }
    }

    /// Links localized as adversarial so far; never shrinks.
    pub fn identified(&self) -> &BTreeSet<LinkId> {
        &self.identified
    }

    fn check_view(keys: &CodecKeys, view: &SinkView) -> Result<()> {
        let p = keys.params();
        let ok = view.upstream.rows() == p.a
            && view.upstream.cols() == p.n
            && view.downstream.rows() == p.c
            && view.downstream.cols() == p.m
            && view.feedback_echo.rows.len() == keys.layout().len()
            && view.claim.as_ref().map_or(true, |w| w.rows() == p.a - p.c && w.cols() == p.m);
        if ok {
            Ok(())
        } else {
            Err(Error::DimensionMismatch("sink view does not match the parameters".into()))
        }
    }

    fn equations(&self, keys: &CodecKeys, view: &SinkView, pins: &[(usize, u32)]) -> Vec<Equation> {
        let p = keys.params();
        let wire = keys.wire();
        let mut eqs = Vec::new();
        for i in 0..p.n {
            for r in 0..p.a {
                eqs.push(Equation {
                    coeffs: wire.upstream[i].row(r).to_vec(),
                    rhs: view.upstream.get(r, i),
                    link: Some(LinkId::Upstream(i)),
                });
            }
        }
        for j in 0..p.m {
            for r in 0..p.c {
                eqs.push(Equation {
                    coeffs: wire.downstream[j].row(r).to_vec(),
                    rhs: view.downstream.get(r, j),
                    link: Some(LinkId::Downstream(j)),
                });
            }
        }
        match &view.claim {
            Some(w) => {
                for j in 0..p.m {
                    for r in 0..p.a - p.c {
                        eqs.push(Equation {
                            coeffs: wire.claim[j].row(r).to_vec(),
                            rhs: w.get(r, j),
                            link: Some(LinkId::Downstream(j)),
                        });
                    }
                }
            }
            None => {
                // B stayed silent: if the feedback link was honest, A's report matched the truth.
                for (r, signal) in view.feedback_echo.rows.iter().enumerate() {
                    if let RowSignal::Values { kind, payload } = signal {
                        let phi = keys.feedback_functional(r, *kind, &self.relay_a.rows[r].identified);
                        let fns = phi.mul(&wire.rows[r]).expect("shapes agree");
                        for (k, &v) in payload.iter().enumerate() {
                            eqs.push(Equation { coeffs: fns.row(k).to_vec(), rhs: v, link: Some(LinkId::Feedback) });
                        }
                    }
                }
            }
        }
        let ub = keys.message_len();
        for &(idx, v) in pins {
            let mut coeffs = vec![0; ub];
            coeffs[idx] = 1;
            eqs.push(Equation { coeffs, rhs: v, link: None });
        }
        eqs
    }

    fn solve(keys: &CodecKeys, eqs: &[Equation], removed: &BTreeSet<LinkId>) -> HypothesisOutcome {
        let mut ech = Echelon::new(keys.field(), keys.message_len());
        for eq in eqs {
            if eq.link.map_or(false, |l| removed.contains(&l)) {
                continue;
            }
            if ech.insert(&eq.coeffs, eq.rhs).is_err() {
                return HypothesisOutcome::Inconsistent;
            }
        }
        match ech.solution() {
            Some(flat) => HypothesisOutcome::Consistent(MessageBlock::from_flat(keys, &flat).expect("length")),
            None => HypothesisOutcome::Underdetermined,
        }
    }

    /// Solves with `assumed_bad` (and every identified link) removed, using the relay mirror's current state.
    pub fn consistency_decode(&self, keys: &CodecKeys, view: &SinkView, assumed_bad: &[LinkId]) -> Result<HypothesisOutcome> {
        Self::check_view(keys, view)?;
        let mut removed = self.identified.clone();
        removed.extend(assumed_bad.iter().copied());
        Ok(Self::solve(keys, &self.equations(keys, view, &[]), &removed))
    }

    fn pick_mode(&self, keys: &CodecKeys, view: &SinkView) -> DecodeMode {
        let p = keys.params();
        let upstream_known = self.identified.iter().filter(|l| l.is_upstream()).count();
        let has_single = (0..keys.layout().len()).any(|r| keys.row_case(r) == RowCase::SingleParity);
        if self.identified.len() >= 2 {
            DecodeMode::Post2Identified
        } else if view.claim.is_some() {
            DecodeMode::ClaimMds
        } else if p.z == 1 {
            DecodeMode::Z1Path
        } else if has_single && upstream_known == 1 {
            DecodeMode::SingleParityHold
        } else {
            DecodeMode::NoSignalSubset
        }
    }

    fn pristine(&self, view: &SinkView) -> bool {
        self.identified.is_empty()
            && view.claim.is_none()
            && view.feedback_echo.cs_count() == 0
            && self.relay_a.rows.iter().all(|r| !r.detected && r.identified.is_empty())
    }

    /// Decodes one round and updates the identified set.
    pub fn decode(&mut self, keys: &CodecKeys, view: &SinkView) -> DecodeOutcome {
        let mode = self.pick_mode(keys, view);
        let fail = |e: Error| DecodeOutcome { message: Err(e), newly_identified: BTreeSet::new(), mode, hypotheses: 0 };
        if let Err(e) = Self::check_view(keys, view) {
            return fail(e);
        }
        match self.relay_a.observe(keys, &view.upstream) {
            Ok(echo) if echo == view.feedback_echo => {}
            Ok(_) => return fail(Error::InternalConsistency("feedback echo differs from relay replay".into())),
            Err(e) => return fail(e),
        }
        let p = *keys.params();
        let mut pins = Vec::new();
        if mode == DecodeMode::ClaimMds {
            if let Some(w) = &view.claim {
                pins = claim_pins(keys, &view.upstream, w, p.z);
            }
        }
        let (mut result, mut hypotheses) = self.sweep(keys, view, mode, &pins);
        if result.is_err() && !pins.is_empty() {
            let (r, h) = self.sweep(keys, view, mode, &[]);
            result = r;
            hypotheses += h;
        }
        let message = match result {
            Ok(m) => m,
            Err(e) => return DecodeOutcome { message: Err(e), newly_identified: BTreeSet::new(), mode, hypotheses },
        };
        let newly = match self.identify(keys, view, &message) {
            Ok(n) => n,
            Err(e) => return DecodeOutcome { message: Err(e), newly_identified: BTreeSet::new(), mode, hypotheses },
        };
        self.identified.extend(newly.iter().copied());
        if self.identified.len() > p.z {
            return DecodeOutcome {
                message: Err(Error::InternalConsistency(format!(
                    "{} links identified with z = {}",
                    self.identified.len(),
                    p.z
                ))),
                newly_identified: newly,
                mode,
                hypotheses,
            };
        }
        DecodeOutcome { message: Ok(message), newly_identified: newly, mode, hypotheses }
    }

    fn sweep(&self, keys: &CodecKeys, view: &SinkView, mode: DecodeMode, pins: &[(usize, u32)]) -> (Result<MessageBlock>, usize) {
        let p = keys.params();
        let eqs = self.equations(keys, view, pins);
        if self.pristine(view) {
            if let HypothesisOutcome::Consistent(m) = Self::solve(keys, &eqs, &self.identified) {
                return (Ok(m), 0);
            }
        }
        let candidates: Vec<LinkId> = p.links().into_iter().filter(|l| !self.identified.contains(l)).collect();
        let size = p.z.saturating_sub(self.identified.len()).min(candidates.len());
        let mut sets: Vec<Vec<LinkId>> = combinations(candidates.len(), size)
            .map(|c| c.iter().map(|&k| candidates[k]).collect())
            .collect();
        if mode == DecodeMode::SingleParityHold {
            // upstream-only removals first, then mixed, then downstream-only
            sets.sort_by_key(|s| s.iter().filter(|l| !l.is_upstream()).count());
        }
        let mut found: Option<MessageBlock> = None;
        let mut tried = 0;
        for set in &sets {
            let mut removed = self.identified.clone();
            removed.extend(set.iter().copied());
            tried += 1;
            if let HypothesisOutcome::Consistent(m) = Self::solve(keys, &eqs, &removed) {
                match &found {
                    None => found = Some(m),
                    Some(prev) if *prev == m => {}
                    Some(_) => {
                        return (
                            Err(Error::DecodeFailure(format!("ambiguous: removal {set:?} yields a different message"))),
                            tried,
                        )
                    }
                }
            }
        }
        (found.ok_or_else(|| Error::DecodeFailure("no consistent removal set".into())), tried)
    }

    fn identify(&self, keys: &CodecKeys, view: &SinkView, message: &MessageBlock) -> Result<BTreeSet<LinkId>> {
        let p = keys.params();
        let f = keys.field();
        let cw = keys.encode(message)?;
        let mut out = BTreeSet::new();
        for i in (0..p.n).filter(|&i| !self.identified.contains(&LinkId::Upstream(i))) {
            if cw.upstream(i) != view.upstream.column(i) {
                out.insert(LinkId::Upstream(i));
            }
        }
        let w = keys.claim_matrix(message)?;
        for j in (0..p.m).filter(|&j| !self.identified.contains(&LinkId::Downstream(j))) {
            let claim_bad = view.claim.as_ref().map_or(false, |got| got.column(j) != w.column(j));
            if cw.downstream(j) != view.downstream.column(j) || claim_bad {
                out.insert(LinkId::Downstream(j));
            }
        }
        if !self.identified.contains(&LinkId::Feedback) {
            // what B would have decided had the feedback arrived as sent
            let mut expect_claim = false;
            for (r, signal) in view.feedback_echo.rows.iter().enumerate() {
                match signal {
                    RowSignal::Cs { .. } => expect_claim = true,
                    RowSignal::Values { kind, payload } => {
                        let phi = keys.feedback_functional(r, *kind, &self.relay_a.rows[r].identified);
                        let x = keys.row_code(r).encode(&message.x[r])?;
                        let expected = phi.mul_vec(&x)?;
                        if expected.iter().zip(payload).any(|(e, v)| f.sub(*v, *e) != 0) {
                            expect_claim = true;
                        }
                    }
                }
            }
            if expect_claim != view.claim.is_some() {
                out.insert(LinkId::Feedback);
            }
        }
        Ok(out)
    }
}

/// Decodes each top row from `(X̂ | Ŵ)` when its claim code corrects `t` errors.
pub fn decode_with_claim(keys: &CodecKeys, upstream: &SymbolMatrix, claim: &SymbolMatrix, t: usize) -> Result<Vec<Vec<u32>>> {
    (0..keys.layout().len())
        .map(|r| {
            let code = keys.claim_code(r);
            let mut received = upstream.row(r).to_vec();
            received.extend_from_slice(claim.row(r));
            Ok(code.error_decode(&received, t)?.message)
        })
        .collect()
}

/// Message values fixed by row-wise claim decoding, as `(flat index, value)`.
fn claim_pins(keys: &CodecKeys, upstream: &SymbolMatrix, claim: &SymbolMatrix, t: usize) -> Vec<(usize, u32)> {
    let mut pins = Vec::new();
    let mut offset = 0;
    for r in 0..keys.layout().len() {
        let code = keys.claim_code(r);
        if code.min_distance() > 2 * t {
            let mut received = upstream.row(r).to_vec();
            received.extend_from_slice(claim.row(r));
            if let Ok(dec) = code.error_decode(&received, t) {
                pins.extend(dec.message.iter().enumerate().map(|(k, &v)| (offset + k, v)));
            }
        }
        offset += code.dim();
    }
    pins
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::NetworkParams;
    use crate::signaling::{NodeAState, NodeBState};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn view_for(keys: &CodecKeys, msg: &MessageBlock, up_err: &[(usize, usize, u32)], down_err: &[(usize, usize, u32)]) -> SinkView {
        let f = keys.field();
        let cw = keys.encode(msg).unwrap();
        let mut up = cw.upstream_block();
        for &(r, i, e) in up_err {
            up.set(r, i, f.add(up.get(r, i), e));
        }
        let mut down = cw.downstream_block();
        for &(r, j, e) in down_err {
            down.set(r, j, f.add(down.get(r, j), e));
        }
        let mut a = NodeAState::new(keys);
        let mut b = NodeBState::new(keys);
        let echo = a.observe(keys, &up).unwrap();
        let act = b.verify(keys, &echo, msg).unwrap();
        let claim = act.send_claim.then(|| keys.claim_matrix(msg).unwrap());
        SinkView { upstream: up, downstream: down, feedback_echo: echo, claim }
    }

    fn setup(p: NetworkParams) -> (CodecKeys, MessageBlock) {
        let keys = CodecKeys::generate(&p, 21).unwrap();
        let msg = MessageBlock::random(&keys, &mut ChaCha8Rng::seed_from_u64(22));
        (keys, msg)
    }

    #[test]
    fn clean_view_decodes_without_search() {
        let (keys, msg) = setup(NetworkParams::p0());
        let mut sink = Sink::new(&keys);
        let out = sink.decode(&keys, &view_for(&keys, &msg, &[], &[]));
        assert_eq!(out.message.unwrap(), msg);
        assert_eq!(out.hypotheses, 0);
        assert!(out.newly_identified.is_empty());
    }

    #[test]
    fn downstream_errors_are_removed_and_identified() {
        let (keys, msg) = setup(NetworkParams::p0());
        let mut sink = Sink::new(&keys);
        let view = view_for(&keys, &msg, &[], &[(0, 1, 5), (1, 3, 2)]);
        let out = sink.decode(&keys, &view);
        assert_eq!(out.message.unwrap(), msg);
        let expect: BTreeSet<LinkId> = [LinkId::Downstream(1), LinkId::Downstream(3)].into_iter().collect();
        assert_eq!(out.newly_identified, expect);
    }

    #[test]
    fn claim_path_with_upstream_error() {
        let (keys, msg) = setup(NetworkParams::p0());
        let mut sink = Sink::new(&keys);
        let view = view_for(&keys, &msg, &[(0, 2, 1), (1, 2, 4)], &[]);
        assert!(view.claim.is_some());
        let out = sink.decode(&keys, &view);
        assert_eq!(out.mode, DecodeMode::ClaimMds);
        assert_eq!(out.message.unwrap(), msg);
        assert!(out.newly_identified.contains(&LinkId::Upstream(2)));
    }

    #[test]
    fn consistency_decode_needs_the_bad_link_removed() {
        let (keys, msg) = setup(NetworkParams::p0());
        let sink = Sink::new(&keys);
        let view = view_for(&keys, &msg, &[], &[(0, 0, 3)]);
        assert_eq!(
            sink.consistency_decode(&keys, &view, &[LinkId::Downstream(0), LinkId::Upstream(1)]).unwrap(),
            HypothesisOutcome::Consistent(msg.clone())
        );
        assert_eq!(sink.consistency_decode(&keys, &view, &[]).unwrap(), HypothesisOutcome::Inconsistent);
        let clean = view_for(&keys, &msg, &[], &[]);
        assert_eq!(sink.consistency_decode(&keys, &clean, &[]).unwrap(), HypothesisOutcome::Consistent(msg));
    }

    #[test]
    fn claim_rows_correct_z_errors_and_fail_beyond() {
        let (keys, msg) = setup(NetworkParams::p0());
        let f = keys.field();
        let up = keys.encode(&msg).unwrap().upstream_block();
        let mut w = keys.claim_matrix(&msg).unwrap();
        assert_eq!(decode_with_claim(&keys, &up, &w, 2).unwrap(), msg.x);
        w.set(1, 0, f.add(w.get(1, 0), 1));
        w.set(1, 3, f.add(w.get(1, 3), 1));
        assert_eq!(decode_with_claim(&keys, &up, &w, 2).unwrap(), msg.x);
        // row 0 has dimension 3 and length 7: radius 2
        for j in 0..3 {
            w.set(0, j, f.add(w.get(0, j), 1 + j as u32));
        }
        assert!(decode_with_claim(&keys, &up, &w, 2).map_or(true, |x| x != msg.x));
    }
}
