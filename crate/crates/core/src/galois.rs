//! Prime-field arithmetic and dense linear algebra over GF(q).
//!
//! Symbols are stored as raw `u32` residues inside a [`SymbolMatrix`] that
//! carries its [`Field`]; [`FieldElement`] is the checked, self-describing
//! scalar used at API boundaries. Elimination always picks the first row
//! (in stored order) holding a nonzero entry in the leftmost unreduced
//! column, so results are bit-identical across runs.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};

/// A prime field GF(q).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Field {
    q: u32,
}

fn is_prime(q: u32) -> bool {
    if q < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= q as u64 {
        if q as u64 % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

impl Field {
    pub fn new(q: u32) -> Result<Self> {
        if !is_prime(q) || q > (1 << 31) {
            return Err(Error::NotPrime(q));
        }
        Ok(Self { q })
    }

    #[inline]
    pub fn order(self) -> u32 {
        self.q
    }

    #[inline]
    pub fn reduce(self, v: u64) -> u32 {
        (v % self.q as u64) as u32
    }

    #[inline]
    pub fn add(self, x: u32, y: u32) -> u32 {
        let s = x as u64 + y as u64;
        if s >= self.q as u64 {
            (s - self.q as u64) as u32
        } else {
            s as u32
        }
    }

    #[inline]
    pub fn sub(self, x: u32, y: u32) -> u32 {
        if x >= y {
            x - y
        } else {
            (x as u64 + self.q as u64 - y as u64) as u32
        }
    }

    #[inline]
    pub fn neg(self, x: u32) -> u32 {
        if x == 0 {
            0
        } else {
            self.q - x
        }
    }

    #[inline]
    pub fn mul(self, x: u32, y: u32) -> u32 {
        ((x as u64 * y as u64) % self.q as u64) as u32
    }

    pub fn pow(self, mut base: u32, mut exp: u64) -> u32 {
        let mut acc = 1 % self.q;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse via Fermat's little theorem.
    pub fn inv(self, x: u32) -> Result<u32> {
        if x % self.q == 0 {
            return Err(Error::DivisionByZero);
        }
        Ok(self.pow(x, self.q as u64 - 2))
    }

    pub fn div(self, x: u32, y: u32) -> Result<u32> {
        Ok(self.mul(x, self.inv(y)?))
    }

    pub fn element(self, v: u64) -> FieldElement {
        FieldElement { value: self.reduce(v), q: self.q }
    }

    pub fn random<R: Rng + ?Sized>(self, rng: &mut R) -> u32 {
        rng.gen_range(0..self.q)
    }

    pub fn random_nonzero<R: Rng + ?Sized>(self, rng: &mut R) -> u32 {
        rng.gen_range(1..self.q)
    }

    /// Dot product of two residue slices.
    pub fn dot(self, x: &[u32], y: &[u32]) -> u32 {
        let q = self.q as u64;
        let mut acc = 0u64;
        for (a, b) in x.iter().zip(y) {
            acc = (acc + *a as u64 * *b as u64) % q;
        }
        acc as u32
    }

    /// `dst -= factor * src`, elementwise.
    #[inline]
    pub fn axpy_sub(self, dst: &mut [u32], factor: u32, src: &[u32]) {
        if factor == 0 {
            return;
        }
        let q = self.q as u64;
        let neg = (q - factor as u64) % q;
        for (d, s) in dst.iter_mut().zip(src) {
            *d = ((*d as u64 + neg * *s as u64) % q) as u32;
        }
    }

    pub fn scale(self, v: &mut [u32], factor: u32) {
        for x in v.iter_mut() {
            *x = self.mul(*x, factor);
        }
    }
}

/// A checked element of GF(q).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldElement {
    value: u32,
    q: u32,
}

impl FieldElement {
    pub fn new(value: u64, q: u32) -> Result<Self> {
        Ok(Field::new(q)?.element(value))
    }

    pub fn value(self) -> u32 {
        self.value
    }

    pub fn modulus(self) -> u32 {
        self.q
    }

    pub fn field(self) -> Field {
        Field { q: self.q }
    }

    pub fn is_zero(self) -> bool {
        self.value == 0
    }

    fn same_field(self, other: Self) -> Result<Field> {
        if self.q != other.q {
            return Err(Error::ModulusMismatch(self.q, other.q));
        }
        Ok(self.field())
    }

    pub fn add(self, other: Self) -> Result<Self> {
        let f = self.same_field(other)?;
        Ok(Self { value: f.add(self.value, other.value), q: self.q })
    }

    pub fn sub(self, other: Self) -> Result<Self> {
        let f = self.same_field(other)?;
        Ok(Self { value: f.sub(self.value, other.value), q: self.q })
    }

    pub fn mul(self, other: Self) -> Result<Self> {
        let f = self.same_field(other)?;
        Ok(Self { value: f.mul(self.value, other.value), q: self.q })
    }

    pub fn neg(self) -> Self {
        Self { value: self.field().neg(self.value), q: self.q }
    }

    pub fn inv(self) -> Result<Self> {
        Ok(Self { value: self.field().inv(self.value)?, q: self.q })
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (mod {})", self.value, self.q)
    }
}

/// Sum of two elements sharing a modulus.
pub fn field_add(x: FieldElement, y: FieldElement) -> Result<FieldElement> {
    x.add(y)
}

/// Multiplicative inverse; fails on zero.
pub fn field_inv(x: FieldElement) -> Result<FieldElement> {
    x.inv()
}

/// Dense row-major matrix over one prime field.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SymbolMatrix {
    field: Field,
    rows: usize,
    cols: usize,
    data: Vec<u32>,
}

impl fmt::Debug for SymbolMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "SymbolMatrix {}x{} over GF({})", self.rows, self.cols, self.field.q)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        Ok(())
    }
}

impl SymbolMatrix {
    pub fn zeros(field: Field, rows: usize, cols: usize) -> Self {
        Self { field, rows, cols, data: vec![0; rows * cols] }
    }

    pub fn identity(field: Field, n: usize) -> Self {
        let mut m = Self::zeros(field, n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    pub fn from_rows(field: Field, rows: &[Vec<u32>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch("ragged rows".into()));
            }
            data.extend(r.iter().map(|&v| field.reduce(v as u64)));
        }
        Ok(Self { field, rows: rows.len(), cols, data })
    }

    pub fn from_vec(field: Field, rows: usize, cols: usize, data: Vec<u32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for {rows}x{cols}",
                data.len()
            )));
        }
        let data = data.into_iter().map(|v| field.reduce(v as u64)).collect();
        Ok(Self { field, rows, cols, data })
    }

    pub fn random<R: Rng + ?Sized>(field: Field, rows: usize, cols: usize, rng: &mut R) -> Self {
        let data = (0..rows * cols).map(|_| field.random(rng)).collect();
        Self { field, rows, cols, data }
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[u32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u32 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: u32) {
        self.data[r * self.cols + c] = self.field.reduce(v as u64);
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [u32] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<u32> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.field, self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.get(r, c);
            }
        }
        t
    }

    /// Sub-matrix made of the given columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut out = Self::zeros(self.field, self.rows, cols.len());
        for r in 0..self.rows {
            for (j, &c) in cols.iter().enumerate() {
                out.data[r * cols.len() + j] = self.get(r, c);
            }
        }
        out
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Self { field: self.field, rows: rows.len(), cols: self.cols, data }
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.field != other.field {
            return Err(Error::ModulusMismatch(self.field.q, other.field.q));
        }
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let f = self.field;
        let q = f.q as u64;
        let mut out = Self::zeros(f, self.rows, other.cols);
        for r in 0..self.rows {
            let mut acc = vec![0u64; other.cols];
            for k in 0..self.cols {
                let a = self.get(r, k) as u64;
                if a == 0 {
                    continue;
                }
                for (c, slot) in acc.iter_mut().enumerate() {
                    *slot = (*slot + a * other.get(k, c) as u64) % q;
                }
            }
            for (c, v) in acc.into_iter().enumerate() {
                out.data[r * other.cols + c] = v as u32;
            }
        }
        Ok(out)
    }

    /// Row vector times matrix: `v · self`.
    pub fn left_mul_vec(&self, v: &[u32]) -> Result<Vec<u32>> {
        if v.len() != self.rows {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} times {}x{}",
                v.len(),
                self.rows,
                self.cols
            )));
        }
        let q = self.field.q as u64;
        let mut acc = vec![0u64; self.cols];
        for (r, &x) in v.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (c, slot) in acc.iter_mut().enumerate() {
                *slot = (*slot + x as u64 * self.get(r, c) as u64) % q;
            }
        }
        Ok(acc.into_iter().map(|x| x as u32).collect())
    }

    /// Matrix times column vector: `self · v`.
    pub fn mul_vec(&self, v: &[u32]) -> Result<Vec<u32>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows).map(|r| self.field.dot(self.row(r), v)).collect())
    }

    /// Reduced row-echelon form; returns the pivot columns.
    fn rref_in_place(&mut self) -> Vec<usize> {
        let f = self.field;
        let mut pivots = Vec::new();
        let mut top = 0;
        for col in 0..self.cols {
            if top == self.rows {
                break;
            }
            let Some(p) = (top..self.rows).find(|&r| self.get(r, col) != 0) else {
                continue;
            };
            if p != top {
                for c in 0..self.cols {
                    self.data.swap(p * self.cols + c, top * self.cols + c);
                }
            }
            let inv = f.inv(self.get(top, col)).expect("nonzero pivot");
            f.scale(self.row_mut(top), inv);
            let pivot_row = self.row(top).to_vec();
            for r in 0..self.rows {
                if r != top {
                    let factor = self.get(r, col);
                    f.axpy_sub(self.row_mut(r), factor, &pivot_row);
                }
            }
            pivots.push(col);
            top += 1;
        }
        pivots
    }

    pub fn rank(&self) -> usize {
        let mut m = self.clone();
        m.rref_in_place().len()
    }

    pub fn inverse(&self) -> Result<Self> {
        if self.rows != self.cols {
            return Err(Error::DimensionMismatch("inverse of a non-square matrix".into()));
        }
        let n = self.rows;
        let mut aug = Self::zeros(self.field, n, 2 * n);
        for r in 0..n {
            aug.row_mut(r)[..n].copy_from_slice(self.row(r));
            aug.set(r, n + r, 1);
        }
        let pivots = aug.rref_in_place();
        if pivots.len() < n || pivots[n - 1] >= n {
            return Err(Error::DivisionByZero);
        }
        let cols: Vec<usize> = (n..2 * n).collect();
        Ok(aug.select_columns(&cols))
    }

    /// Basis (as rows) of the left null space: all `y` with `y · self = 0`.
    pub fn left_null_space(&self) -> Self {
        let t = self.transpose();
        t.null_space()
    }

    /// Basis (as rows) of the right null space: all `x` with `self · x = 0`.
    pub fn null_space(&self) -> Self {
        let mut m = self.clone();
        let pivots = m.rref_in_place();
        let f = self.field;
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        let mut basis = Self::zeros(f, free.len(), self.cols);
        for (i, &fc) in free.iter().enumerate() {
            basis.set(i, fc, 1);
            for (r, &pc) in pivots.iter().enumerate() {
                basis.set(i, pc, f.neg(m.get(r, fc)));
            }
        }
        basis
    }
}

/// Result of solving a linear system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveOutcome {
    Unique(Vec<u32>),
    Inconsistent,
    Underdetermined,
}

/// Solve `A · x = b`.
pub fn mat_solve(a: &SymbolMatrix, b: &[u32]) -> Result<SolveOutcome> {
    if a.rows() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} equations, {} right-hand sides",
            a.rows(),
            b.len()
        )));
    }
    let mut ech = Echelon::new(a.field(), a.cols());
    for (r, &rhs) in b.iter().enumerate() {
        if ech.insert(a.row(r), rhs).is_err() {
            return Ok(SolveOutcome::Inconsistent);
        }
    }
    Ok(match ech.solution() {
        Some(x) => SolveOutcome::Unique(x),
        None => SolveOutcome::Underdetermined,
    })
}

pub fn mat_rank(m: &SymbolMatrix) -> usize {
    m.rank()
}

/// Incrementally built echelon system with early inconsistency detection.
///
/// Each stored row has a pivot column that is zero in every row stored
/// before it. New rows are reduced against stored rows in insertion order.
#[derive(Debug, Clone)]
pub struct Echelon {
    field: Field,
    unknowns: usize,
    // (pivot column, normalized coefficients, rhs)
    rows: Vec<(usize, Vec<u32>, u32)>,
}

impl Echelon {
    pub fn new(field: Field, unknowns: usize) -> Self {
        Self { field, unknowns, rows: Vec::with_capacity(unknowns) }
    }

    pub fn unknowns(&self) -> usize {
        self.unknowns
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn is_full_rank(&self) -> bool {
        self.rows.len() == self.unknowns
    }

    /// Adds one equation. `Err(Inconsistent)` when it contradicts the rows so far.
    /// Returns whether the rank grew.
    pub fn insert(&mut self, coeffs: &[u32], rhs: u32) -> Result<bool> {
        debug_assert_eq!(coeffs.len(), self.unknowns);
        let f = self.field;
        let mut row = coeffs.to_vec();
        let mut rhs = rhs;
        for (pc, prow, prhs) in &self.rows {
            let factor = row[*pc];
            if factor != 0 {
                f.axpy_sub(&mut row, factor, prow);
                rhs = f.sub(rhs, f.mul(factor, *prhs));
            }
        }
        match row.iter().position(|&v| v != 0) {
            None if rhs == 0 => Ok(false),
            None => Err(Error::Inconsistent),
            Some(pc) => {
                let inv = f.inv(row[pc])?;
                f.scale(&mut row, inv);
                rhs = f.mul(rhs, inv);
                self.rows.push((pc, row, rhs));
                Ok(true)
            }
        }
    }

    /// The unique solution, when the system has full column rank.
    pub fn solution(&self) -> Option<Vec<u32>> {
        if !self.is_full_rank() {
            return None;
        }
        let f = self.field;
        let mut x = vec![0u32; self.unknowns];
        for (pc, row, rhs) in self.rows.iter().rev() {
            let mut v = *rhs;
            for (c, &coef) in row.iter().enumerate() {
                if c != *pc && coef != 0 {
                    v = f.sub(v, f.mul(coef, x[c]));
                }
            }
            x[*pc] = v;
        }
        Some(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gf(q: u32) -> Field {
        Field::new(q).unwrap()
    }

    #[test]
    fn small_modulus_addition() {
        let f = gf(7);
        assert_eq!(field_add(f.element(3), f.element(5)).unwrap().value(), 1);
        assert_eq!(field_add(f.element(0), f.element(4)).unwrap().value(), 4);
        assert_eq!(field_add(f.element(2), f.element(5)).unwrap().value(), 0);
    }

    #[test]
    fn modulus_mismatch_rejected() {
        let x = gf(7).element(1);
        let y = gf(11).element(1);
        assert_eq!(field_add(x, y), Err(Error::ModulusMismatch(7, 11)));
    }

    #[test]
    fn inverse_by_exhaustive_search() {
        let f = gf(7);
        let found = (1..7).find(|&y| (3 * y) % 7 == 1).unwrap();
        assert_eq!(found, 5);
        assert_eq!(field_inv(f.element(3)).unwrap().value(), 5);
        assert_eq!(field_inv(f.element(1)).unwrap().value(), 1);
        assert_eq!(field_inv(f.element(6)).unwrap().value(), 6);
        assert_eq!(field_inv(f.element(0)), Err(Error::DivisionByZero));
    }

    #[test]
    fn rejects_composite_order() {
        assert_eq!(Field::new(9), Err(Error::NotPrime(9)));
        assert_eq!(Field::new(1), Err(Error::NotPrime(1)));
    }

    #[test]
    fn rank_of_identity_zero_and_vandermonde() {
        let f = gf(11);
        assert_eq!(mat_rank(&SymbolMatrix::identity(f, 3)), 3);
        assert_eq!(mat_rank(&SymbolMatrix::zeros(f, 3, 4)), 0);
        // Rows (1, t, t^2) on points 2, 5, 7.
        let v = SymbolMatrix::from_rows(f, &[vec![1, 1, 1], vec![2, 5, 7]]).unwrap();
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let minor = v.select_columns(&[i, j]);
            let det = f.sub(f.mul(minor.get(0, 0), minor.get(1, 1)), f.mul(minor.get(0, 1), minor.get(1, 0)));
            assert_ne!(det, 0);
        }
        assert_eq!(mat_rank(&v), 2);
    }

    #[test]
    fn solve_identity_and_contradiction() {
        let f = gf(13);
        let id = SymbolMatrix::identity(f, 3);
        assert_eq!(mat_solve(&id, &[4, 5, 6]).unwrap(), SolveOutcome::Unique(vec![4, 5, 6]));
        let dup = SymbolMatrix::from_rows(f, &[vec![1, 2], vec![1, 2], vec![0, 1]]).unwrap();
        assert_eq!(mat_solve(&dup, &[3, 4, 1]).unwrap(), SolveOutcome::Inconsistent);
        let under = SymbolMatrix::from_rows(f, &[vec![1, 2]]).unwrap();
        assert_eq!(mat_solve(&under, &[3]).unwrap(), SolveOutcome::Underdetermined);
        assert!(mat_solve(&id, &[1, 2]).is_err());
    }

    #[test]
    fn solve_recovers_known_vector() {
        let f = gf(257);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = loop {
            let a = SymbolMatrix::random(f, 5, 5, &mut rng);
            if a.rank() == 5 {
                break a;
            }
        };
        let x0: Vec<u32> = (0..5).map(|_| f.random(&mut rng)).collect();
        let b = a.mul_vec(&x0).unwrap();
        assert_eq!(mat_solve(&a, &b).unwrap(), SolveOutcome::Unique(x0));
    }

    #[test]
    fn inverse_and_null_space() {
        let f = gf(31);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = loop {
            let a = SymbolMatrix::random(f, 4, 4, &mut rng);
            if a.rank() == 4 {
                break a;
            }
        };
        let inv = a.inverse().unwrap();
        assert_eq!(a.mul(&inv).unwrap(), SymbolMatrix::identity(f, 4));

        let m = SymbolMatrix::from_rows(f, &[vec![1, 2, 3], vec![2, 4, 6]]).unwrap();
        let ns = m.null_space();
        assert_eq!(ns.rows(), 2);
        for r in 0..ns.rows() {
            assert!(m.mul_vec(ns.row(r)).unwrap().iter().all(|&v| v == 0));
        }
        let lns = m.left_null_space();
        assert_eq!(lns.rows(), 1);
        let y = lns.row(0);
        assert!(m.left_mul_vec(y).unwrap().iter().all(|&v| v == 0));
    }
}
