//! Universal one-forms, generalized inner fluctuations and the semigroup
//! `Pert(A)` of normalized self-adjoint elements of `A ⊗ A^op`.

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::algebra::{AlgebraElement, AlgebraError, AlgebraSpec};
use crate::matrix::{ComplexMatrix, MatrixError, DEFAULT_TOL};
use crate::triple::{FiniteSpectralTriple, TripleError};

pub type Pair = (AlgebraElement, AlgebraElement);
pub type OperatorPair = (ComplexMatrix, ComplexMatrix);

/// Contributions below this size are dropped by [`PertElement::compact`].
pub const COMPACT_TOL: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PertError {
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Triple(#[from] TripleError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("perturbation has no pairs")]
    Empty,
    #[error("pair {index}: {source}")]
    BadPair { index: usize, source: AlgebraError },
    #[error("Σ a_j b_j differs from 1 by {0:.3e}")]
    NotNormalized(f64),
    #[error("perturbation is not self-adjoint (defect {0:.3e})")]
    NotSelfAdjoint(f64),
    #[error("represented one-form is not self-adjoint (defect {0:.3e})")]
    OneFormNotSelfAdjoint(f64),
    #[error("element is not unitary (defect {0:.3e})")]
    NotUnitary(f64),
    #[error("summand sizes differ: {0:?} vs {1:?}")]
    Incompatible(Vec<usize>, Vec<usize>),
}

/// `ω = Σ a_j δ(b_j)`. Different pair lists can represent the same form, so
/// forms are only compared through their representations.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct UniversalOneForm {
    pub pairs: Vec<Pair>,
}

impl UniversalOneForm {
    pub fn new(pairs: Vec<Pair>) -> Self {
        Self { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// `Σ a_j b_j`, or `None` for the empty form.
    pub fn contraction(&self) -> Option<AlgebraElement> {
        let mut it = self.pairs.iter().map(|(a, b)| a.mul(b));
        let first = it.next()?;
        Some(it.fold(first, |acc, x| acc.add(&x)))
    }

    /// `ω*` via `(a δb)* = b* δ(a*) − δ(b* a*)`.
    pub fn star(&self) -> Self {
        let mut pairs = Vec::with_capacity(2 * self.pairs.len());
        for (a, b) in &self.pairs {
            let (bs, as_) = (b.star(), a.star());
            let prod = bs.mul(&as_);
            let minus_one = AlgebraElement::one(&a.sizes()).scale_real(-1.0);
            pairs.push((bs, as_));
            pairs.push((minus_one, prod));
        }
        Self { pairs }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            pairs: self.pairs.iter().map(|(a, b)| (a.scale(s), b.clone())).collect(),
        }
    }

    pub fn concat(&self, other: &Self) -> Self {
        let mut pairs = self.pairs.clone();
        pairs.extend(other.pairs.iter().cloned());
        Self { pairs }
    }

    /// `½(ω + ω*)`.
    pub fn self_adjoint_part(&self) -> Self {
        self.concat(&self.star()).scale(Complex64::new(0.5, 0.0))
    }

    /// `x·ω`.
    pub fn left_mul(&self, x: &AlgebraElement) -> Self {
        Self {
            pairs: self.pairs.iter().map(|(a, b)| (x.mul(a), b.clone())).collect(),
        }
    }

    /// `ω·y`, using `a δ(b) y = a δ(b y) − a b δ(y)`.
    pub fn right_mul(&self, y: &AlgebraElement) -> Self {
        let mut pairs = Vec::with_capacity(2 * self.pairs.len());
        for (a, b) in &self.pairs {
            pairs.push((a.clone(), b.mul(y)));
            pairs.push((a.mul(b).scale_real(-1.0), y.clone()));
        }
        Self { pairs }
    }

    /// `γ_u(ω) = u ω u* + u δ(u*)`, as the pair list
    /// `(u(1 − Σ a_j b_j), u*) ∪ (u a_j, b_j u*)`.
    pub fn gauge(&self, u: &AlgebraElement) -> Self {
        let us = u.star();
        let one = AlgebraElement::one(&u.sizes());
        let rest = match self.contraction() {
            Some(s) => one.sub(&s),
            None => one,
        };
        let mut pairs = vec![(u.mul(&rest), us.clone())];
        pairs.extend(self.pairs.iter().map(|(a, b)| (u.mul(a), b.mul(&us))));
        Self { pairs }
    }

    /// Pair list with `Σ a_j b_j = 1` representing the same form: prepends
    /// `(1 − Σ a_j b_j, 1)`, which contributes nothing since `δ(1) = 0`.
    pub fn normalized_pairs(&self, sizes: &[usize]) -> Vec<Pair> {
        let one = AlgebraElement::one(sizes);
        let rest = match self.contraction() {
            Some(s) => one.sub(&s),
            None => one.clone(),
        };
        let mut pairs = vec![(rest, one)];
        pairs.extend(self.pairs.iter().cloned());
        pairs
    }

    fn represented_pairs(&self, t: &FiniteSpectralTriple) -> Result<Vec<OperatorPair>, PertError> {
        self.pairs
            .iter()
            .map(|(a, b)| Ok((t.represent(a)?, t.represent(b)?)))
            .collect()
    }
}

/// `Σ a [T, b]`.
pub fn one_form_operator(pairs: &[OperatorPair], t: &ComplexMatrix) -> ComplexMatrix {
    let n = t.rows();
    let mut acc = ComplexMatrix::zeros(n, n);
    for (a, b) in pairs {
        acc += &(a * &t.commutator_unchecked(b));
    }
    acc
}

/// The terms of `D' = D + A₁ + ε Â₁ + A₂`.
#[derive(Clone, Debug, PartialEq)]
pub struct FluctuationTerms {
    pub a1: ComplexMatrix,
    pub a1_tilde: ComplexMatrix,
    pub a2: ComplexMatrix,
    pub d_prime: ComplexMatrix,
}

/// Generic fluctuation for operator pairs on any space with a conjugation
/// `hat` and sign `eps`.
pub(crate) fn fluctuation_terms_ops(
    d: &ComplexMatrix,
    pairs: &[OperatorPair],
    hat: impl Fn(&ComplexMatrix) -> ComplexMatrix,
    eps: f64,
) -> FluctuationTerms {
    let a1 = one_form_operator(pairs, d);
    let hat_pairs: Vec<OperatorPair> = pairs.iter().map(|(a, b)| (hat(a), hat(b))).collect();
    let a1_tilde = hat(&a1).scale_real(eps);
    let a2 = one_form_operator(&hat_pairs, &a1);
    let d_prime = &(&(d + &a1) + &a1_tilde) + &a2;
    FluctuationTerms {
        a1,
        a1_tilde,
        a2,
        d_prime,
    }
}

/// `A₁ = Σ π(a_j)[D, π(b_j)]`.
pub fn a1(t: &FiniteSpectralTriple, w: &UniversalOneForm) -> Result<ComplexMatrix, PertError> {
    Ok(one_form_operator(&w.represented_pairs(t)?, t.d()))
}

/// `A₂ = Σ â_j [A₁, b̂_j]`.
pub fn a2(t: &FiniteSpectralTriple, w: &UniversalOneForm) -> Result<ComplexMatrix, PertError> {
    Ok(fluctuation_terms(t, w)?.a2)
}

/// All terms of the fluctuation, without the self-adjointness check.
pub fn fluctuation_terms(t: &FiniteSpectralTriple, w: &UniversalOneForm) -> Result<FluctuationTerms, PertError> {
    let pairs = w.represented_pairs(t)?;
    Ok(fluctuation_terms_ops(t.d(), &pairs, |x| t.hat(x), t.eps_d()))
}

/// `D' = D + A₁ + ε J A₁ J⁻¹ + A₂`. Fails unless `A₁` is self-adjoint.
pub fn fluctuate(t: &FiniteSpectralTriple, w: &UniversalOneForm) -> Result<ComplexMatrix, PertError> {
    let terms = fluctuation_terms(t, w)?;
    let defect = terms.a1.hermiticity_defect();
    if defect > 1e-9 * terms.a1.frob_norm().max(t.d().frob_norm()).max(1.0) {
        return Err(PertError::OneFormNotSelfAdjoint(defect));
    }
    Ok(terms.d_prime)
}

/// Element `Σ a_j ⊗ b_j^op` of `Pert(A)`. Validated on construction; equality
/// is meant to be tested through [`PertElement::canonical_form`].
#[derive(Clone, Debug, PartialEq)]
pub struct PertElement {
    pairs: Vec<Pair>,
    sizes: Vec<usize>,
}

impl PertElement {
    /// Validates block shapes and subalgebra membership against `spec`,
    /// normalization and self-adjointness, all at tolerance `tol`.
    pub fn new(spec: &AlgebraSpec, pairs: Vec<Pair>, tol: f64) -> Result<Self, PertError> {
        if pairs.is_empty() {
            return Err(PertError::Empty);
        }
        for (index, (a, b)) in pairs.iter().enumerate() {
            for el in [a, b] {
                spec.check_element(el, tol)
                    .map_err(|source| PertError::BadPair { index, source })?;
            }
        }
        let p = Self {
            pairs,
            sizes: spec.summands().to_vec(),
        };
        let n = p.normalization_defect();
        if n > tol {
            return Err(PertError::NotNormalized(n));
        }
        let s = p.self_adjointness_defect();
        if s > tol * p.canonical_form().frob_norm().max(1.0) {
            return Err(PertError::NotSelfAdjoint(s));
        }
        Ok(p)
    }

    /// `1 ⊗ 1^op`.
    pub fn unit(spec: &AlgebraSpec) -> Self {
        Self {
            pairs: vec![(spec.one(), spec.one())],
            sizes: spec.summands().to_vec(),
        }
    }

    /// `u ⊗ (u*)^op`.
    pub fn from_unitary(spec: &AlgebraSpec, u: &AlgebraElement, tol: f64) -> Result<Self, PertError> {
        spec.check_element(u, tol)?;
        let defect = u.unitarity_defect();
        if defect > tol {
            return Err(PertError::NotUnitary(defect));
        }
        Ok(Self {
            pairs: vec![(u.clone(), u.star())],
            sizes: spec.summands().to_vec(),
        })
    }

    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Block diagonal over summand pairs `(i, k)` with blocks
    /// `Σ_j a_j,i ⊗ b_j,kᵗ`; the transpose turns the opposite product into an
    /// ordinary one, so this is an injective algebra homomorphism.
    pub fn canonical_form(&self) -> ComplexMatrix {
        canonical_form_of(&self.sizes, &self.pairs)
    }

    /// `‖Σ a_j b_j − 1‖_F`.
    pub fn normalization_defect(&self) -> f64 {
        let s = self.eta().contraction().expect("pert elements are nonempty");
        s.distance(&AlgebraElement::one(&self.sizes))
    }

    /// Distance between the canonical forms of `p` and of `(b_j*, a_j*)`.
    pub fn self_adjointness_defect(&self) -> f64 {
        (&self.canonical_form() - &self.swapped_starred().canonical_form()).frob_norm()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        self.normalization_defect() <= tol
    }

    pub fn is_self_adjoint(&self, tol: f64) -> bool {
        self.self_adjointness_defect() <= tol * self.canonical_form().frob_norm().max(1.0)
    }

    /// The antilinear automorphism `x ⊗ y^op ↦ y* ⊗ (x*)^op`.
    pub fn swapped_starred(&self) -> Self {
        Self {
            pairs: self.pairs.iter().map(|(a, b)| (b.star(), a.star())).collect(),
            sizes: self.sizes.clone(),
        }
    }

    /// `self · other = Σ x_s a_i ⊗ (b_i y_s)^op` where `self = Σ x_s ⊗ y_s^op`.
    pub fn mul(&self, other: &Self) -> Result<Self, PertError> {
        self.check_compatible(other)?;
        let mut pairs = Vec::with_capacity(self.pairs.len() * other.pairs.len());
        for (x, y) in &self.pairs {
            for (a, b) in &other.pairs {
                pairs.push((x.mul(a), b.mul(y)));
            }
        }
        Ok(Self {
            pairs,
            sizes: self.sizes.clone(),
        })
    }

    /// `α·p + (1 − α)·q`.
    pub fn affine_combine(&self, other: &Self, alpha: f64) -> Result<Self, PertError> {
        self.check_compatible(other)?;
        let mut pairs: Vec<Pair> = self.pairs.iter().map(|(a, b)| (a.scale_real(alpha), b.clone())).collect();
        pairs.extend(other.pairs.iter().map(|(a, b)| (a.scale_real(1.0 - alpha), b.clone())));
        Ok(Self {
            pairs,
            sizes: self.sizes.clone(),
        })
    }

    /// `η(Σ a_j ⊗ b_j^op) = Σ a_j δ(b_j)`.
    pub fn eta(&self) -> UniversalOneForm {
        UniversalOneForm::new(self.pairs.clone())
    }

    /// `from_unitary(u) · p`.
    pub fn gauge_transform(&self, spec: &AlgebraSpec, u: &AlgebraElement, tol: f64) -> Result<Self, PertError> {
        Self::from_unitary(spec, u, tol)?.mul(self)
    }

    /// Drops pairs with `‖a‖·‖b‖ ≤ COMPACT_TOL`, keeping at least one pair.
    pub fn compact(&self) -> Self {
        let mut pairs: Vec<Pair> = self
            .pairs
            .iter()
            .filter(|(a, b)| a.frob_norm() * b.frob_norm() > COMPACT_TOL)
            .cloned()
            .collect();
        if pairs.is_empty() {
            pairs.push(self.pairs[0].clone());
        }
        Self {
            pairs,
            sizes: self.sizes.clone(),
        }
    }

    /// Smallest singular value of the canonical form relative to the largest.
    pub fn conditioning(&self) -> f64 {
        let s = self.canonical_form().singular_values();
        match (s.first(), s.last()) {
            (Some(&hi), Some(&lo)) if hi > 0.0 => lo / hi,
            _ => 0.0,
        }
    }

    /// Whether `candidate` is a two-sided inverse of `self` inside `Pert(A)`:
    /// both products equal the unit and the candidate is itself normalized
    /// and self-adjoint.
    pub fn is_inverse(&self, candidate: &Self, tol: f64) -> Result<bool, PertError> {
        let unit = ComplexMatrix::identity(self.canonical_form().rows());
        let left = self.mul(candidate)?.canonical_form();
        let right = candidate.mul(self)?.canonical_form();
        Ok(left.approx_eq(&unit, tol)?
            && right.approx_eq(&unit, tol)?
            && candidate.is_normalized(tol)
            && candidate.is_self_adjoint(tol))
    }

    fn check_compatible(&self, other: &Self) -> Result<(), PertError> {
        if self.sizes != other.sizes {
            return Err(PertError::Incompatible(self.sizes.clone(), other.sizes.clone()));
        }
        Ok(())
    }
}

fn canonical_form_of(sizes: &[usize], pairs: &[Pair]) -> ComplexMatrix {
    let mut blocks = Vec::with_capacity(sizes.len() * sizes.len());
    for (i, &ni) in sizes.iter().enumerate() {
        for (k, &nk) in sizes.iter().enumerate() {
            let mut acc = ComplexMatrix::zeros(ni * nk, ni * nk);
            for (a, b) in pairs {
                acc += &a.blocks[i].kron(&b.blocks[k].transpose());
            }
            blocks.push(acc);
        }
    }
    ComplexMatrix::direct_sum(&blocks)
}

/// A perturbation of `A ⊗ Â` given by operator pairs on `H`.
#[derive(Clone, Debug, PartialEq)]
pub struct RepresentedPert {
    pub pairs: Vec<OperatorPair>,
}

impl RepresentedPert {
    /// `T ↦ Σ a T b`.
    pub fn apply(&self, t: &ComplexMatrix) -> ComplexMatrix {
        let n = t.rows();
        let mut acc = ComplexMatrix::zeros(n, n);
        for (a, b) in &self.pairs {
            acc += &(&(a * t) * b);
        }
        acc
    }

    /// `Σ a ⊗ bᵗ`, the matrix of [`RepresentedPert::apply`] on row-major
    /// vectorized operators.
    pub fn canonical_form(&self) -> ComplexMatrix {
        let n = self.pairs[0].0.rows();
        let mut acc = ComplexMatrix::zeros(n * n, n * n);
        for (a, b) in &self.pairs {
            acc += &a.kron(&b.transpose());
        }
        acc
    }

    /// Same product rule as [`PertElement::mul`].
    pub fn mul(&self, other: &Self) -> Self {
        let mut pairs = Vec::with_capacity(self.pairs.len() * other.pairs.len());
        for (x, y) in &self.pairs {
            for (a, b) in &other.pairs {
                pairs.push((x * a, b * y));
            }
        }
        Self { pairs }
    }

    /// `‖Σ a b − 1‖_F`.
    pub fn normalization_defect(&self) -> f64 {
        let n = self.pairs[0].0.rows();
        let mut acc = ComplexMatrix::identity(n).scale_real(-1.0);
        for (a, b) in &self.pairs {
            acc += &(a * b);
        }
        acc.frob_norm()
    }

    /// `D + Σ a [D, b]`.
    pub fn fluctuate(&self, d: &ComplexMatrix) -> ComplexMatrix {
        d + &one_form_operator(&self.pairs, d)
    }
}

/// `μ(p) = p ⊗ p̂`: pairs `(π(a_i) π̂(a_j), π(b_i) π̂(b_j))`, index-major in `i`.
pub fn mu(p: &PertElement, t: &FiniteSpectralTriple) -> Result<RepresentedPert, PertError> {
    t.algebra().check_shape(&p.pairs[0].0)?;
    let reps: Vec<OperatorPair> = p
        .pairs
        .iter()
        .map(|(a, b)| (t.represent_unchecked(a), t.represent_unchecked(b)))
        .collect();
    let hats: Vec<OperatorPair> = reps.iter().map(|(a, b)| (t.hat(a), t.hat(b))).collect();
    let mut pairs = Vec::with_capacity(reps.len() * reps.len());
    for (ai, bi) in &reps {
        for (aj, bj) in &hats {
            pairs.push((ai * aj, bi * bj));
        }
    }
    Ok(RepresentedPert { pairs })
}

/// `D + Σ_{i,j} a_i â_j [D, b_i b̂_j]`.
pub fn fluctuate_combined(t: &FiniteSpectralTriple, p: &PertElement) -> Result<ComplexMatrix, PertError> {
    fluctuate_combined_on(t, t.d(), p)
}

/// The combined formula with an arbitrary operator in place of `D`.
pub fn fluctuate_combined_on(
    t: &FiniteSpectralTriple,
    base: &ComplexMatrix,
    p: &PertElement,
) -> Result<ComplexMatrix, PertError> {
    Ok(mu(p, t)?.fluctuate(base))
}

/// `‖(D_p)_q − D_{q·p}‖_F`, where `D_p` is the combined fluctuation by `p`.
pub fn check_transitivity(t: &FiniteSpectralTriple, p: &PertElement, q: &PertElement) -> Result<f64, PertError> {
    let dp = fluctuate_combined(t, p)?;
    let iterated = fluctuate_combined_on(t, &dp, q)?;
    let direct = fluctuate_combined(t, &q.mul(p)?)?;
    Ok((&iterated - &direct).frob_norm())
}

/// `U = π(u) π̂(u)`.
pub fn gauge_unitary(t: &FiniteSpectralTriple, u: &AlgebraElement) -> Result<ComplexMatrix, PertError> {
    let pu = t.represent(u)?;
    Ok(&pu * &t.hat(&pu))
}

/// Random one-form with `k` pairs drawn from `spec`, made self-adjoint.
pub fn random_self_adjoint_one_form(spec: &AlgebraSpec, rng: &mut impl Rng, k: usize) -> UniversalOneForm {
    let pairs = (0..k)
        .map(|_| (spec.random_element(rng), spec.random_element(rng)))
        .collect();
    UniversalOneForm::new(pairs).self_adjoint_part()
}

/// Random normalized self-adjoint element of `Pert(A)` built from `k` random
/// pairs: the symmetrization `½(a ⊗ b + b* ⊗ a*)` plus the correction
/// `½(c ⊗ 1 + 1 ⊗ c)` with `c = 1 − ½(S + S*)`, `S = Σ a_j b_j`.
pub fn random_pert(spec: &AlgebraSpec, rng: &mut impl Rng, k: usize) -> PertElement {
    let half = 0.5;
    let one = spec.one();
    let mut pairs = Vec::with_capacity(2 * k + 2);
    let mut s = spec.zero();
    for _ in 0..k {
        let a = spec.random_element(rng);
        let b = spec.random_element(rng);
        s = s.add(&a.mul(&b));
        pairs.push((b.star().scale_real(half), a.star()));
        pairs.push((a.scale_real(half), b));
    }
    let c = one.sub(&s.add(&s.star()).scale_real(half));
    pairs.push((c.scale_real(half), one.clone()));
    pairs.push((one.scale_real(half), c));
    PertElement {
        pairs,
        sizes: spec.summands().to_vec(),
    }
}

/// Worst relative residuals of the semigroup identities over random samples.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SemigroupReport {
    pub samples: usize,
    /// `‖U D(η(p)) U* − D(η(γ_u p))‖ / ‖D(η(p))‖`
    pub gauge_covariance: f64,
    /// `‖(D_p)_q − D_{q·p}‖ / ‖D_{q·p}‖`
    pub transitivity: f64,
    /// `‖μ(q·p) − μ(q)μ(p)‖` on canonical forms, relative.
    pub multiplicativity: f64,
    /// `‖D_p − D(η(p))‖ / ‖D_p‖`
    pub combined_vs_eta: f64,
}

impl SemigroupReport {
    pub fn max_residual(&self) -> f64 {
        self.gauge_covariance
            .max(self.transitivity)
            .max(self.multiplicativity)
            .max(self.combined_vs_eta)
    }
}

fn rel_gap(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    (a - b).frob_norm() / a.frob_norm().max(b.frob_norm()).max(1.0)
}

/// Draws `samples` triples `(p, q, u)` from `spec` (`k` pairs each) and
/// evaluates every identity on them.
pub fn semigroup_report(
    t: &FiniteSpectralTriple,
    spec: &AlgebraSpec,
    rng: &mut impl Rng,
    samples: usize,
    k: usize,
) -> Result<SemigroupReport, PertError> {
    let mut r = SemigroupReport {
        samples,
        gauge_covariance: 0.0,
        transitivity: 0.0,
        multiplicativity: 0.0,
        combined_vs_eta: 0.0,
    };
    for _ in 0..samples {
        let p = random_pert(spec, rng, k);
        let q = random_pert(spec, rng, k);
        let u = spec.random_unitary(rng);

        let big_u = gauge_unitary(t, &u)?;
        let d = fluctuate(t, &p.eta())?;
        let moved = &(&big_u * &d) * &big_u.adjoint();
        let gp = p.gauge_transform(spec, &u, DEFAULT_TOL)?;
        r.gauge_covariance = r.gauge_covariance.max(rel_gap(&moved, &fluctuate(t, &gp.eta())?));

        let qp = q.mul(&p)?;
        let direct = fluctuate_combined(t, &qp)?;
        let iterated = fluctuate_combined_on(t, &fluctuate_combined(t, &p)?, &q)?;
        r.transitivity = r.transitivity.max(rel_gap(&iterated, &direct));

        let prod = mu(&q, t)?.mul(&mu(&p, t)?);
        r.multiplicativity = r
            .multiplicativity
            .max(rel_gap(&mu(&qp, t)?.canonical_form(), &prod.canonical_form()));

        r.combined_vs_eta = r
            .combined_vs_eta
            .max(rel_gap(&fluctuate_combined(t, &p)?, &d));
    }
    Ok(r)
}
