//! Finite-dimensional C*-algebras `⊕ M_{n_i}(C)` and linearly constrained
//! subalgebras of them.
//!
//! A subalgebra is described by a list of homogeneous linear equations on the
//! matrix entries. The complex spanning set is obtained from the reduced row
//! echelon form of the constraint system, so an unconstrained summand yields
//! its matrix units and a constraint tying two entries together yields one
//! element carrying both.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{ComplexMatrix, ONE, ZERO};

const PIVOT_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("an algebra needs at least one summand")]
    NoSummands,
    #[error("summand {index} has size 0")]
    ZeroSize { index: usize },
    #[error("constraint {constraint} references entry ({summand}, {row}, {col}) outside the algebra")]
    BadConstraintIndex {
        constraint: usize,
        summand: usize,
        row: usize,
        col: usize,
    },
    #[error("constrained subspace is not closed under {0}")]
    NotClosed(&'static str),
    #[error("constraints leave only the zero subspace")]
    Trivial,
    #[error("element has {got} blocks, algebra has {expected} summands")]
    BlockCount { expected: usize, got: usize },
    #[error("block {index} has shape {got:?}, expected {expected}x{expected}")]
    BlockShape {
        index: usize,
        expected: usize,
        got: (usize, usize),
    },
    #[error("element violates subalgebra constraint {constraint} (residual {residual:.3e})")]
    ConstraintViolated { constraint: usize, residual: f64 },
    #[error("element is not unitary (defect {0:.3e})")]
    NotUnitary(f64),
    #[error("algebras have different summand structure: {left:?} vs {right:?}")]
    Incompatible { left: Vec<usize>, right: Vec<usize> },
}

/// One term `coeff · a_{summand}[row, col]` of a linear constraint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintTerm {
    pub summand: usize,
    pub row: usize,
    pub col: usize,
    pub coeff: Complex64,
}

/// Homogeneous linear equation `Σ coeff · entry = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub terms: Vec<ConstraintTerm>,
}

impl LinearConstraint {
    /// `a_{summand}[row, col] = 0`.
    pub fn vanishing(summand: usize, row: usize, col: usize) -> Self {
        Self {
            terms: vec![ConstraintTerm {
                summand,
                row,
                col,
                coeff: ONE,
            }],
        }
    }

    /// `a_{s1}[r1, c1] = a_{s2}[r2, c2]`.
    pub fn tie(first: (usize, usize, usize), second: (usize, usize, usize)) -> Self {
        Self {
            terms: vec![
                ConstraintTerm {
                    summand: first.0,
                    row: first.1,
                    col: first.2,
                    coeff: ONE,
                },
                ConstraintTerm {
                    summand: second.0,
                    row: second.1,
                    col: second.2,
                    coeff: -ONE,
                },
            ],
        }
    }

    /// All off-diagonal entries of one summand vanish.
    pub fn diagonal(summand: usize, size: usize) -> Vec<Self> {
        let mut out = Vec::new();
        for r in 0..size {
            for c in 0..size {
                if r != c {
                    out.push(Self::vanishing(summand, r, c));
                }
            }
        }
        out
    }

    fn evaluate(&self, el: &AlgebraElement) -> Complex64 {
        self.terms
            .iter()
            .map(|t| t.coeff * el.blocks[t.summand][(t.row, t.col)])
            .sum()
    }
}

/// Element of `⊕ M_{n_i}(C)`: one square block per summand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgebraElement {
    pub blocks: Vec<ComplexMatrix>,
}

impl AlgebraElement {
    pub fn new(blocks: Vec<ComplexMatrix>) -> Self {
        Self { blocks }
    }

    pub fn one(sizes: &[usize]) -> Self {
        Self::new(sizes.iter().map(|&n| ComplexMatrix::identity(n)).collect())
    }

    pub fn zero(sizes: &[usize]) -> Self {
        Self::new(sizes.iter().map(|&n| ComplexMatrix::zeros(n, n)).collect())
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(ComplexMatrix::rows).collect()
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a * b)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a - b)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::new(self.blocks.iter().map(|b| b.scale(s)).collect())
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self::new(self.blocks.iter().map(|b| b.scale_real(s)).collect())
    }

    /// The involution `a ↦ a*`, blockwise adjoint.
    pub fn star(&self) -> Self {
        Self::new(self.blocks.iter().map(ComplexMatrix::adjoint).collect())
    }

    pub fn frob_norm(&self) -> f64 {
        self.blocks
            .iter()
            .map(ComplexMatrix::frob_norm_sqr)
            .sum::<f64>()
            .sqrt()
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.sub(other).frob_norm()
    }

    /// `‖u u* − 1‖ + ‖u* u − 1‖`.
    pub fn unitarity_defect(&self) -> f64 {
        let one = Self::one(&self.sizes());
        let s = self.star();
        self.mul(&s).distance(&one) + s.mul(self).distance(&one)
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_defect() <= tol
    }

    fn zip(&self, other: &Self, f: impl Fn(&ComplexMatrix, &ComplexMatrix) -> ComplexMatrix) -> Self {
        assert_eq!(self.blocks.len(), other.blocks.len(), "summand count mismatch");
        Self::new(
            self.blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| f(a, b))
                .collect(),
        )
    }
}

/// Description of `⊕ M_{n_i}(C)` together with optional linear constraints
/// cutting out a *-subalgebra.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraSpec {
    summands: Vec<usize>,
    constraints: Vec<LinearConstraint>,
    basis: Vec<AlgebraElement>,
}

impl AlgebraSpec {
    /// Unconstrained direct sum of full matrix algebras.
    pub fn full(summands: &[usize]) -> Result<Self, AlgebraError> {
        Self::new(summands.to_vec(), Vec::new())
    }

    pub fn new(summands: Vec<usize>, constraints: Vec<LinearConstraint>) -> Result<Self, AlgebraError> {
        if summands.is_empty() {
            return Err(AlgebraError::NoSummands);
        }
        if let Some(index) = summands.iter().position(|&n| n == 0) {
            return Err(AlgebraError::ZeroSize { index });
        }
        for (k, con) in constraints.iter().enumerate() {
            for t in &con.terms {
                let ok = t.summand < summands.len() && t.row < summands[t.summand] && t.col < summands[t.summand];
                if !ok {
                    return Err(AlgebraError::BadConstraintIndex {
                        constraint: k,
                        summand: t.summand,
                        row: t.row,
                        col: t.col,
                    });
                }
            }
        }
        let basis = solve_basis(&summands, &constraints);
        if basis.is_empty() {
            return Err(AlgebraError::Trivial);
        }
        let spec = Self {
            summands,
            constraints,
            basis,
        };
        spec.check_closure()?;
        Ok(spec)
    }

    fn check_closure(&self) -> Result<(), AlgebraError> {
        let tol = 1e-9;
        for a in &self.basis {
            if self.constraint_residual(&a.star()).0 > tol {
                return Err(AlgebraError::NotClosed("adjoint"));
            }
            for b in &self.basis {
                if self.constraint_residual(&a.mul(b)).0 > tol {
                    return Err(AlgebraError::NotClosed("product"));
                }
            }
        }
        Ok(())
    }

    pub fn summands(&self) -> &[usize] {
        &self.summands
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    pub fn is_constrained(&self) -> bool {
        !self.constraints.is_empty()
    }

    /// Complex dimension of the (sub)algebra.
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Complex spanning set (a basis) of the algebra.
    pub fn spanning_set(&self) -> &[AlgebraElement] {
        &self.basis
    }

    pub fn one(&self) -> AlgebraElement {
        AlgebraElement::one(&self.summands)
    }

    pub fn zero(&self) -> AlgebraElement {
        AlgebraElement::zero(&self.summands)
    }

    /// Same summand structure, ignoring constraints.
    pub fn compatible_with(&self, other: &Self) -> bool {
        self.summands == other.summands
    }

    /// Largest relative constraint residual and the index of the worst one.
    fn constraint_residual(&self, el: &AlgebraElement) -> (f64, usize) {
        let scale = 1f64.max(el.frob_norm());
        self.constraints
            .iter()
            .enumerate()
            .map(|(k, con)| (con.evaluate(el).norm() / scale, k))
            .fold((0.0, 0), |acc, x| if x.0 > acc.0 { x } else { acc })
    }

    pub fn check_shape(&self, el: &AlgebraElement) -> Result<(), AlgebraError> {
        if el.blocks.len() != self.summands.len() {
            return Err(AlgebraError::BlockCount {
                expected: self.summands.len(),
                got: el.blocks.len(),
            });
        }
        for (index, (b, &n)) in el.blocks.iter().zip(&self.summands).enumerate() {
            if b.shape() != (n, n) {
                return Err(AlgebraError::BlockShape {
                    index,
                    expected: n,
                    got: b.shape(),
                });
            }
        }
        Ok(())
    }

    /// Shape check plus constraint check at relative tolerance `tol`.
    pub fn check_element(&self, el: &AlgebraElement, tol: f64) -> Result<(), AlgebraError> {
        self.check_shape(el)?;
        let (residual, constraint) = self.constraint_residual(el);
        if residual > tol {
            return Err(AlgebraError::ConstraintViolated { constraint, residual });
        }
        Ok(())
    }

    pub fn contains(&self, el: &AlgebraElement, tol: f64) -> bool {
        self.check_element(el, tol).is_ok()
    }

    /// Whether every element of `self` lies in `other`.
    pub fn is_subalgebra_of(&self, other: &Self, tol: f64) -> bool {
        self.compatible_with(other) && self.basis.iter().all(|b| other.contains(b, tol))
    }

    /// Random element `Σ c_k e_k` with `c_k` uniform in the unit square.
    pub fn random_element(&self, rng: &mut impl Rng) -> AlgebraElement {
        let mut acc = self.zero();
        for b in &self.basis {
            let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            acc = acc.add(&b.scale(z));
        }
        acc
    }

    /// Random self-adjoint element.
    pub fn random_hermitian(&self, rng: &mut impl Rng) -> AlgebraElement {
        let x = self.random_element(rng);
        x.add(&x.star()).scale_real(0.5)
    }

    /// Random unitary via the Cayley transform `(1 − K)(1 + K)⁻¹` of a random
    /// anti-self-adjoint `K`; stays inside the subalgebra.
    pub fn random_unitary(&self, rng: &mut impl Rng) -> AlgebraElement {
        let h = self.random_hermitian(rng);
        let k = h.scale(Complex64::new(0.0, 1.0));
        let one = self.one();
        let num = one.sub(&k);
        let den = one.add(&k);
        let blocks = num
            .blocks
            .iter()
            .zip(&den.blocks)
            .map(|(n, d)| n * &d.inverse().expect("1 + K is invertible for anti-self-adjoint K"))
            .collect();
        AlgebraElement::new(blocks)
    }

    /// A real basis of the anti-self-adjoint elements (the Lie algebra of the
    /// unitary group), orthonormal for the real part of the Frobenius inner
    /// product.
    pub fn anti_hermitian_basis(&self) -> Vec<AlgebraElement> {
        let i = Complex64::new(0.0, 1.0);
        let mut candidates = Vec::with_capacity(2 * self.basis.len());
        for b in &self.basis {
            for s in [ONE, i] {
                let x = b.scale(s);
                candidates.push(x.sub(&x.star()).scale_real(0.5));
            }
        }
        let mut out: Vec<AlgebraElement> = Vec::new();
        for mut v in candidates {
            for _ in 0..2 {
                for q in &out {
                    let proj = real_inner(q, &v);
                    v = v.sub(&q.scale_real(proj));
                }
            }
            let n = v.frob_norm();
            if n > 1e-10 {
                out.push(v.scale_real(1.0 / n));
            }
        }
        out
    }
}

fn real_inner(a: &AlgebraElement, b: &AlgebraElement) -> f64 {
    a.blocks
        .iter()
        .zip(&b.blocks)
        .map(|(x, y)| {
            x.as_slice()
                .iter()
                .zip(y.as_slice())
                .map(|(p, q)| (p.conj() * q).re)
                .sum::<f64>()
        })
        .sum()
}

/// Nullspace basis of the constraint system, one vector per free variable of
/// the reduced row echelon form.
fn solve_basis(summands: &[usize], constraints: &[LinearConstraint]) -> Vec<AlgebraElement> {
    let offsets: Vec<usize> = summands
        .iter()
        .scan(0, |acc, &n| {
            let o = *acc;
            *acc += n * n;
            Some(o)
        })
        .collect();
    let nvars: usize = summands.iter().map(|n| n * n).sum();
    let var = |s: usize, r: usize, c: usize| offsets[s] + r * summands[s] + c;

    let mut rows: Vec<Vec<Complex64>> = constraints
        .iter()
        .map(|con| {
            let mut row = vec![ZERO; nvars];
            for t in &con.terms {
                row[var(t.summand, t.row, t.col)] += t.coeff;
            }
            row
        })
        .collect();

    let mut pivots: Vec<(usize, usize)> = Vec::new();
    let mut next = 0;
    for col in 0..nvars {
        if next >= rows.len() {
            break;
        }
        let best = (next..rows.len()).max_by(|&a, &b| rows[a][col].norm().total_cmp(&rows[b][col].norm()));
        let Some(best) = best else { break };
        if rows[best][col].norm() <= PIVOT_EPS {
            continue;
        }
        rows.swap(next, best);
        let p = rows[next][col];
        for x in rows[next].iter_mut() {
            *x /= p;
        }
        let pivot_row = rows[next].clone();
        for (k, row) in rows.iter_mut().enumerate() {
            if k != next {
                let f = row[col];
                if f != ZERO {
                    for (x, &y) in row.iter_mut().zip(&pivot_row) {
                        *x -= f * y;
                    }
                }
            }
        }
        pivots.push((next, col));
        next += 1;
    }

    let pivot_cols: Vec<usize> = pivots.iter().map(|&(_, c)| c).collect();
    let mut basis = Vec::new();
    for free in (0..nvars).filter(|c| !pivot_cols.contains(c)) {
        let mut x = vec![ZERO; nvars];
        x[free] = ONE;
        for &(r, pc) in &pivots {
            x[pc] = -rows[r][free];
        }
        let blocks = summands
            .iter()
            .enumerate()
            .map(|(s, &n)| ComplexMatrix::from_fn(n, n, |r, c| clean(x[var(s, r, c)])))
            .collect();
        basis.push(AlgebraElement::new(blocks));
    }
    basis
}

fn clean(z: Complex64) -> Complex64 {
    let snap = |x: f64| if x.abs() < 1e-15 { 0.0 } else { x };
    Complex64::new(snap(z.re), snap(z.im))
}
