//! Systematic MDS codes over GF(q).
//!
//! Codes are built as `[I | P]` where `P` is a Cauchy matrix on distinct
//! field points, which makes every square submatrix of `P` nonsingular and
//! the code MDS for any `q > length`. The seed only permutes which points
//! are used.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::galois::{Echelon, Field, SymbolMatrix};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MdsCode {
    length: usize,
    dim: usize,
    generator: SymbolMatrix,
    parity: SymbolMatrix,
}

/// Successful bounded-distance decode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorDecoded {
    pub message: Vec<u32>,
    pub error_positions: Vec<usize>,
}

/// Iterates all `k`-subsets of `0..n` in lexicographic order.
pub(crate) fn combinations(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    let mut state: Option<Vec<usize>> = if k <= n { Some((0..k).collect()) } else { None };
    std::iter::from_fn(move || {
        let cur = state.clone()?;
        // advance
        let mut next = cur.clone();
        let mut i = k;
        let mut advanced = false;
        while i > 0 {
            i -= 1;
            if next[i] < n - k + i {
                next[i] += 1;
                for j in i + 1..k {
                    next[j] = next[j - 1] + 1;
                }
                advanced = true;
                break;
            }
        }
        state = if advanced { Some(next) } else { None };
        Some(cur)
    })
}

pub(crate) fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

impl MdsCode {
    /// Builds a systematic code from an explicit parity block.
    pub fn from_parity(parity: SymbolMatrix) -> Self {
        let field = parity.field();
        let dim = parity.rows();
        let length = dim + parity.cols();
        let mut generator = SymbolMatrix::zeros(field, dim, length);
        for i in 0..dim {
            generator.set(i, i, 1);
            for j in 0..parity.cols() {
                generator.set(i, dim + j, parity.get(i, j));
            }
        }
        Self { length, dim, generator, parity }
    }

    pub fn field(&self) -> Field {
        self.generator.field()
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn generator(&self) -> &SymbolMatrix {
        &self.generator
    }

    /// The `E` block: `dim × (length − dim)`.
    pub fn parity(&self) -> &SymbolMatrix {
        &self.parity
    }

    pub fn min_distance(&self) -> usize {
        self.length - self.dim + 1
    }

    /// Parity coefficient `η` for message `i` and redundancy symbol `j`.
    pub fn eta(&self, i: usize, j: usize) -> u32 {
        self.parity.get(i, j)
    }

    /// The code restricted to its first `len` coordinates.
    pub fn puncture(&self, len: usize) -> Result<Self> {
        if len < self.dim || len > self.length {
            return Err(Error::DimensionMismatch(format!(
                "cannot puncture a ({}, {}) code to length {len}",
                self.length, self.dim
            )));
        }
        let cols: Vec<usize> = (0..len - self.dim).collect();
        Ok(Self::from_parity(self.parity.select_columns(&cols)))
    }

    /// Parity-check matrix `[-Eᵀ | I]`, `(length − dim) × length`.
    pub fn check_matrix(&self) -> SymbolMatrix {
        let f = self.field();
        let r = self.length - self.dim;
        let mut h = SymbolMatrix::zeros(f, r, self.length);
        for j in 0..r {
            for i in 0..self.dim {
                h.set(j, i, f.neg(self.parity.get(i, j)));
            }
            h.set(j, self.dim + j, 1);
        }
        h
    }

    /// Exhaustively checks that every `dim`-subset of generator columns has rank `dim`.
    pub fn verify_mds(&self) -> bool {
        combinations(self.length, self.dim)
            .all(|cols| self.generator.select_columns(&cols).rank() == self.dim)
    }

    pub fn encode(&self, message: &[u32]) -> Result<Vec<u32>> {
        if message.len() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "message of length {} for dimension {}",
                message.len(),
                self.dim
            )));
        }
        self.generator.left_mul_vec(message)
    }

    pub fn erasure_decode(&self, known: &BTreeMap<usize, u32>) -> Result<Vec<u32>> {
        if known.len() < self.dim {
            return Err(Error::InsufficientData { have: known.len(), need: self.dim });
        }
        let mut ech = Echelon::new(self.field(), self.dim);
        for (&pos, &val) in known {
            if pos >= self.length {
                return Err(Error::DimensionMismatch(format!("coordinate {pos} out of range")));
            }
            ech.insert(&self.generator.column(pos), val)?;
        }
        ech.solution()
            .ok_or_else(|| Error::InternalConsistency("MDS erasure system rank deficient".into()))
    }

    /// Bounded-distance decode by exhaustive search over error supports.
    pub fn error_decode(&self, received: &[u32], t: usize) -> Result<ErrorDecoded> {
        if received.len() != self.length {
            return Err(Error::DimensionMismatch(format!(
                "received {} symbols for length {}",
                received.len(),
                self.length
            )));
        }
        if 2 * t >= self.min_distance() {
            return Err(Error::InvalidParams(format!(
                "t = {t} exceeds unique decoding radius of a ({}, {}) code",
                self.length, self.dim
            )));
        }
        for weight in 0..=t {
            for support in combinations(self.length, weight) {
                let known: BTreeMap<usize, u32> = (0..self.length)
                    .filter(|p| !support.contains(p))
                    .map(|p| (p, received[p]))
                    .collect();
                if let Ok(message) = self.erasure_decode(&known) {
                    let cw = self.encode(&message)?;
                    let error_positions =
                        (0..self.length).filter(|&p| cw[p] != received[p]).collect();
                    return Ok(ErrorDecoded { message, error_positions });
                }
            }
        }
        Err(Error::DecodeFailure(format!("no codeword within distance {t}")))
    }
}

/// Cauchy-based systematic MDS code of the given shape.
pub fn make_mds(dim: usize, length: usize, q: u32, seed: u64) -> Result<MdsCode> {
    let field = Field::new(q)?;
    if dim > length {
        return Err(Error::InvalidParams(format!("dim {dim} > length {length}")));
    }
    let redundancy = length - dim;
    if (q as usize) < length {
        if dim == 1 || redundancy <= 1 {
            // repetition and single-parity codes are MDS at any length
            return Ok(MdsCode::from_parity(SymbolMatrix::from_vec(field, dim, redundancy, vec![1; dim * redundancy])?));
        }
        return Err(Error::FieldTooSmall { q, needed: length });
    }
    let mut points: Vec<u32> = (0..q).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    points.shuffle(&mut rng);
    let (xs, rest) = points.split_at(dim);
    let ys = &rest[..redundancy];
    let mut parity = SymbolMatrix::zeros(field, dim, redundancy);
    for (i, &x) in xs.iter().enumerate() {
        for (j, &y) in ys.iter().enumerate() {
            parity.set(i, j, field.inv(field.sub(x, y))?);
        }
    }
    let code = MdsCode::from_parity(parity);
    if binomial(length, dim) <= 4096 && !code.verify_mds() {
        return Err(Error::InternalConsistency("Cauchy construction is not MDS".into()));
    }
    Ok(code)
}

pub fn mds_encode(code: &MdsCode, message: &[u32]) -> Result<Vec<u32>> {
    code.encode(message)
}

pub fn mds_erasure_decode(code: &MdsCode, known: &BTreeMap<usize, u32>) -> Result<Vec<u32>> {
    code.erasure_decode(known)
}

pub fn mds_error_decode(code: &MdsCode, received: &[u32], t: usize) -> Result<ErrorDecoded> {
    code.error_decode(received, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det2(f: Field, m: &SymbolMatrix) -> u32 {
        f.sub(f.mul(m.get(0, 0), m.get(1, 1)), f.mul(m.get(0, 1), m.get(1, 0)))
    }

    #[test]
    fn combinations_enumerate_binomial_many() {
        assert_eq!(combinations(7, 3).count(), 35);
        assert_eq!(combinations(4, 0).count(), 1);
        assert_eq!(combinations(3, 4).count(), 0);
        assert_eq!(binomial(7, 3), 35);
        let all: Vec<_> = combinations(4, 2).collect();
        assert_eq!(all[0], vec![0, 1]);
        assert_eq!(all[5], vec![2, 3]);
    }

    #[test]
    fn two_three_code_minors_nonsingular() {
        let code = make_mds(2, 3, 7, 0).unwrap();
        let f = code.field();
        for cols in combinations(3, 2) {
            assert_ne!(det2(f, &code.generator().select_columns(&cols)), 0, "{cols:?}");
        }
    }

    #[test]
    fn square_code_is_identity() {
        let code = make_mds(4, 4, 5, 3).unwrap();
        assert_eq!(*code.generator(), SymbolMatrix::identity(code.field(), 4));
        assert_eq!(code.encode(&[1, 2, 3, 4]).unwrap(), vec![1, 2, 3, 4]);
    }

    #[test]
    fn three_seven_code_every_subset_full_rank() {
        let code = make_mds(3, 7, 11, 1).unwrap();
        let mut checked = 0;
        for cols in combinations(7, 3) {
            assert_eq!(code.generator().select_columns(&cols).rank(), 3);
            checked += 1;
        }
        assert_eq!(checked, 35);
    }

    #[test]
    fn field_too_small() {
        assert_eq!(make_mds(2, 8, 7, 0), Err(Error::FieldTooSmall { q: 7, needed: 8 }));
    }

    #[test]
    fn encode_is_systematic() {
        let code = make_mds(2, 3, 7, 4).unwrap();
        assert_eq!(code.encode(&[0, 0]).unwrap(), vec![0, 0, 0]);
        assert_eq!(code.encode(&[1, 0]).unwrap(), vec![1, 0, code.eta(0, 0)]);
        assert!(code.encode(&[1]).is_err());
    }

    #[test]
    fn erasure_decode_paths() {
        let code = make_mds(3, 7, 11, 2).unwrap();
        let msg = vec![4, 9, 1];
        let cw = code.encode(&msg).unwrap();
        for cols in combinations(7, 3) {
            let known = cols.iter().map(|&c| (c, cw[c])).collect();
            assert_eq!(code.erasure_decode(&known).unwrap(), msg);
        }
        let mut known: BTreeMap<usize, u32> = [0, 1, 2, 3].iter().map(|&c| (c, cw[c])).collect();
        *known.get_mut(&1).unwrap() = (cw[1] + 1) % 11;
        assert_eq!(code.erasure_decode(&known), Err(Error::Inconsistent));
        let short: BTreeMap<usize, u32> = [(0, cw[0])].into_iter().collect();
        assert!(matches!(code.erasure_decode(&short), Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn error_decode_two_errors_and_overflow() {
        let code = make_mds(3, 7, 11, 2).unwrap();
        let msg = vec![4, 9, 1];
        let cw = code.encode(&msg).unwrap();
        assert_eq!(code.error_decode(&cw, 2).unwrap().message, msg);
        let mut rx = cw.clone();
        rx[0] = (rx[0] + 3) % 11;
        rx[5] = (rx[5] + 7) % 11;
        let out = code.error_decode(&rx, 2).unwrap();
        assert_eq!(out.message, msg);
        assert_eq!(out.error_positions, vec![0, 5]);
        assert!(code.error_decode(&cw, 3).is_err());
    }

    #[test]
    fn error_decode_reports_failure_beyond_radius() {
        // Move the codeword of one message to distance 3 from it and 4 from another:
        // pick a weight-5 codeword difference and apply 3 of its nonzero coordinates.
        let code = make_mds(3, 7, 11, 2).unwrap();
        let f = code.field();
        let msg = vec![1, 2, 3];
        let cw = code.encode(&msg).unwrap();
        // A codeword that vanishes on coordinates 0 and 1: message (0, 0, s).
        let delta = code.encode(&[0, 0, 1]).unwrap();
        assert_eq!(delta.iter().filter(|&&v| v != 0).count(), 5);
        let nz: Vec<usize> = (0..7).filter(|&p| delta[p] != 0).collect();
        let mut rx = cw.clone();
        for &p in &nz[..3] {
            rx[p] = f.add(rx[p], delta[p]);
        }
        // rx is at distance 3 from cw and distance 2 from cw + delta.
        let out = code.error_decode(&rx, 2).unwrap();
        assert_ne!(out.message, msg);
        // Three errors in a pattern that lands at distance >= 3 from every codeword.
        let mut found_failure = false;
        for a in 1..11 {
            let mut rx = cw.clone();
            rx[0] = f.add(rx[0], a);
            rx[1] = f.add(rx[1], 1);
            rx[2] = f.add(rx[2], 1);
            if code.error_decode(&rx, 2).is_err() {
                found_failure = true;
                break;
            }
        }
        assert!(found_failure);
    }
}
