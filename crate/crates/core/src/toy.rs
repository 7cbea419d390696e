//! The `U(1)×U(2)` model: `A = M₂(C) ⊕ M₂(C)` on an 8-dimensional `H`.
//!
//! Basis order of `H` (0-based): the unprimed sector `(α, I)` at
//! `2α + I`, then the primed sector `(α', I')` at `4 + 2α' + I'`.
//! The first summand acts on `α` in the unprimed sector, the second on `I'`
//! in the primed sector. `J` swaps the two sectors and conjugates.
//! This is the only place where index notation is turned into positions.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{AlgebraElement, AlgebraError, AlgebraSpec, LinearConstraint};
use crate::matrix::{AntilinearOp, ComplexMatrix, ONE, ZERO};
use crate::perturbation::UniversalOneForm;
use crate::triple::{FiniteSpectralTriple, KoSigns, RepBlock};

pub const DIM_H: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ToyError {
    #[error("one-form entry {index} is not in the even subalgebra: {source}")]
    NotEven { index: usize, source: AlgebraError },
}

/// Couplings of the unfluctuated Dirac operator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyParams {
    pub k_x: Complex64,
    pub k_y: Complex64,
}

impl ToyParams {
    pub fn new(k_x: Complex64, k_y: Complex64) -> Self {
        Self { k_x, k_y }
    }

    pub fn unit() -> Self {
        Self::new(ONE, ONE)
    }
}

/// Total scalar fields: `x = 1 + φ` and `v = (1 + σ₁, σ₂)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldPoint {
    pub x: Complex64,
    pub v1: Complex64,
    pub v2: Complex64,
}

impl FieldPoint {
    pub fn new(x: Complex64, v1: Complex64, v2: Complex64) -> Self {
        Self { x, v1, v2 }
    }

    /// The point with no fluctuation, where `D'(A) = D`.
    pub fn unfluctuated() -> Self {
        Self::new(ONE, ONE, ZERO)
    }

    /// From real coordinates `(x, s₁, s₂)`, i.e. `X = x`, `v = (1 + s₁, s₂)`.
    pub fn from_real_coords(c: [f64; 3]) -> Self {
        Self::new(
            Complex64::new(c[0], 0.0),
            Complex64::new(1.0 + c[1], 0.0),
            Complex64::new(c[2], 0.0),
        )
    }

    /// `|v|² = |v₁|² + |v₂|²`.
    pub fn v_norm_sqr(&self) -> f64 {
        self.v1.norm_sqr() + self.v2.norm_sqr()
    }

    /// `φ = x − 1`.
    pub fn phi(&self) -> Complex64 {
        self.x - ONE
    }

    /// `(σ₁, σ₂) = (v₁ − 1, v₂)`.
    pub fn sigma(&self) -> (Complex64, Complex64) {
        (self.v1 - ONE, self.v2)
    }
}

pub(crate) fn unprimed(alpha: usize, i: usize) -> usize {
    2 * alpha + i
}

pub(crate) fn primed(alpha: usize, i: usize) -> usize {
    4 + 2 * alpha + i
}

/// `M₂(C) ⊕ M₂(C)` without constraints.
pub fn full_algebra() -> AlgebraSpec {
    AlgebraSpec::full(&[2, 2]).expect("static algebra")
}

/// `A_ev = C_R ⊕ C_L ⊕ M₂(C)`: the first summand is diagonal.
pub fn a_ev() -> AlgebraSpec {
    AlgebraSpec::new(vec![2, 2], LinearConstraint::diagonal(0, 2)).expect("static algebra")
}

/// `A_F`: elements `(λ_R, λ_L, diag(λ_R, μ))`.
pub fn a_f() -> AlgebraSpec {
    let mut cons = LinearConstraint::diagonal(0, 2);
    cons.extend(LinearConstraint::diagonal(1, 2));
    cons.push(LinearConstraint::tie((0, 0, 0), (1, 0, 0)));
    AlgebraSpec::new(vec![2, 2], cons).expect("static algebra")
}

/// `(λ_R, λ_L, m) ∈ A_ev`.
pub fn ev_element(lambda_r: Complex64, lambda_l: Complex64, m: ComplexMatrix) -> AlgebraElement {
    AlgebraElement::new(vec![ComplexMatrix::diag(&[lambda_r, lambda_l]), m])
}

/// `(λ_R, λ_L, m)` components of an element of `A_ev`.
pub fn ev_components(a: &AlgebraElement) -> (Complex64, Complex64, &ComplexMatrix) {
    (a.blocks[0][(0, 0)], a.blocks[0][(1, 1)], &a.blocks[1])
}

pub fn j_matrix() -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(DIM_H, DIM_H);
    for a in 0..2 {
        for i in 0..2 {
            m[(unprimed(a, i), primed(a, i))] = ONE;
            m[(primed(a, i), unprimed(a, i))] = ONE;
        }
    }
    m
}

pub fn gamma() -> ComplexMatrix {
    let g = [1.0, 1.0, -1.0, -1.0, -1.0, -1.0, 1.0, 1.0];
    ComplexMatrix::diag(&g.map(|s| Complex64::new(s, 0.0)))
}

pub fn dirac(p: &ToyParams) -> ComplexMatrix {
    closed_dirac(p, &FieldPoint::unfluctuated())
}

/// `D'(A)` in terms of the total fields: `k_x·x` between `α = 1` and `α = 2`
/// (identity in `I`), its conjugate in the primed sector, and the rank-one
/// block `k_y·v·vᵗ` from the unprimed `α = 1` states to the primed `α' = 1`
/// states, plus adjoints.
pub fn closed_dirac(p: &ToyParams, f: &FieldPoint) -> ComplexMatrix {
    let mut d = ComplexMatrix::zeros(DIM_H, DIM_H);
    let kx = p.k_x * f.x;
    for i in 0..2 {
        d[(unprimed(0, i), unprimed(1, i))] = kx;
        d[(unprimed(1, i), unprimed(0, i))] = kx.conj();
        d[(primed(0, i), primed(1, i))] = kx.conj();
        d[(primed(1, i), primed(0, i))] = kx;
    }
    let v = [f.v1, f.v2];
    for ip in 0..2 {
        for j in 0..2 {
            let y = p.k_y * v[ip] * v[j];
            d[(primed(0, ip), unprimed(0, j))] = y;
            d[(unprimed(0, j), primed(0, ip))] = y.conj();
        }
    }
    d
}

/// The 2×2 block of `D'` from unprimed `(α=1, J)` to primed `(α'=1, I')`.
pub fn y_block(d: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix::from_fn(2, 2, |ip, j| d[(primed(0, ip), unprimed(0, j))])
}

/// The toy triple with acting algebra `A_ev` and KO signs `(+1, +1, −1)`.
pub fn build_toy(p: &ToyParams) -> FiniteSpectralTriple {
    FiniteSpectralTriple::new(
        a_ev(),
        DIM_H,
        vec![RepBlock::plain(0, 1, 2, 0), RepBlock::plain(1, 2, 1, 4)],
        dirac(p),
        AntilinearOp::new(j_matrix()).expect("J matrix is a permutation"),
        gamma(),
        KoSigns::new(1, 1, -1).expect("static signs"),
    )
    .expect("toy triple satisfies the construction axioms")
}

/// `π°(λ_R, λ_L, m)` from its block formula: `1 ⊗ mᵗ` on the unprimed
/// sector and `diag(λ_R, λ_L) ⊗ 1` on the primed sector. Defined on all of
/// `M₂ ⊕ M₂` with the first block in place of the diagonal.
pub fn opposite_block_formula(a: &AlgebraElement) -> ComplexMatrix {
    let id2 = ComplexMatrix::identity(2);
    let unprimed_part = id2.kron(&a.blocks[1].transpose());
    let primed_part = a.blocks[0].transpose().kron(&id2);
    ComplexMatrix::direct_sum(&[unprimed_part, primed_part])
}

/// Reads off `(x, v)` from a one-form over `A_ev`:
/// `φ = Σ λ'_R(λ_L − λ_R)`, `σ_I = Σ (m'_{I1} λ_R − (m'm)_{I1})`.
pub fn extract_fields(w: &UniversalOneForm) -> Result<FieldPoint, ToyError> {
    let ev = a_ev();
    let mut phi = ZERO;
    let mut sigma = [ZERO; 2];
    for (index, (a, b)) in w.pairs.iter().enumerate() {
        for el in [a, b] {
            ev.check_element(el, 1e-9)
                .map_err(|source| ToyError::NotEven { index, source })?;
        }
        let (lr_a, _, m_a) = ev_components(a);
        let (lr_b, ll_b, m_b) = ev_components(b);
        phi += lr_a * (ll_b - lr_b);
        let mm = m_a * m_b;
        for (i, s) in sigma.iter_mut().enumerate() {
            *s += m_a[(i, 0)] * lr_b - mm[(i, 0)];
        }
    }
    Ok(FieldPoint::new(ONE + phi, ONE + sigma[0], sigma[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::c;
    use crate::triple::{check_first_order, check_ko_signs, check_zeroth_order};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn toy_axioms() {
        let t = build_toy(&ToyParams::unit());
        let ko = check_ko_signs(&t, 1e-12);
        assert!(ko.passed, "{ko:?}");
        assert!(check_zeroth_order(&t, None, 1e-12).unwrap().passed);
        assert!(check_zeroth_order(&t, Some(&full_algebra()), 1e-12).unwrap().passed);
        let fo = check_first_order(&t, None, 1e-12).unwrap();
        assert!(!fo.passed && fo.max_defect > 0.1);
        assert!(check_first_order(&t, Some(&a_f()), 1e-12).unwrap().passed);
    }

    #[test]
    fn first_order_restored_without_y_coupling() {
        let t = build_toy(&ToyParams::new(c(0.7, 0.2), ZERO));
        assert!(check_first_order(&t, None, 1e-12).unwrap().passed);
    }

    #[test]
    fn first_order_defect_is_linear_in_k_y() {
        let kx = c(0.4, -1.1);
        let ky = c(0.3, 0.5);
        let d1 = check_first_order(&build_toy(&ToyParams::new(kx, ky)), None, 0.0).unwrap();
        let d2 = check_first_order(&build_toy(&ToyParams::new(kx, ky * 2.0)), None, 0.0).unwrap();
        assert!((d2.max_defect - 2.0 * d1.max_defect).abs() < 1e-12);
    }

    #[test]
    fn first_order_rejects_foreign_subalgebra() {
        let t = build_toy(&ToyParams::unit());
        assert!(check_first_order(&t, Some(&full_algebra()), 1e-12).is_err());
    }

    #[test]
    fn larger_even_candidates_fail_first_order() {
        let t = build_toy(&ToyParams::unit());
        let mut untied = LinearConstraint::diagonal(0, 2);
        untied.extend(LinearConstraint::diagonal(1, 2));
        let diagonal = AlgebraSpec::new(vec![2, 2], untied).unwrap();
        for cand in [diagonal, a_ev()] {
            assert!(a_f().is_subalgebra_of(&cand, 1e-12));
            assert!(cand.dim() > a_f().dim());
            assert!(check_first_order(&t, Some(&cand), 1e-12).unwrap().max_defect > 0.1);
        }
    }

    #[test]
    fn element_outside_a_f_has_defect() {
        // λ_R = 1, m₁₁ = 0 violates the tie between λ_R and m₁₁.
        let t = build_toy(&ToyParams::unit());
        let a = ev_element(ONE, ONE, ComplexMatrix::zeros(2, 2));
        let da = t.d().commutator(&t.represent(&a).unwrap()).unwrap();
        let defect = da.commutator(&t.represent_opposite(&a).unwrap()).unwrap();
        assert!(defect.frob_norm() > 0.5);
        let b = ev_element(ONE, ONE, ComplexMatrix::diag(&[ONE, c(0.3, 0.2)]));
        let db = t.d().commutator(&t.represent(&b).unwrap()).unwrap();
        let ok = db.commutator(&t.represent_opposite(&b).unwrap()).unwrap();
        assert!(ok.frob_norm() < 1e-14);
    }

    #[test]
    fn represent_examples() {
        let t = build_toy(&ToyParams::unit());
        let r = t.represent(&ev_element(ONE, ZERO, ComplexMatrix::zeros(2, 2))).unwrap();
        let mut expected = ComplexMatrix::zeros(DIM_H, DIM_H);
        expected[(unprimed(0, 0), unprimed(0, 0))] = ONE;
        expected[(unprimed(0, 1), unprimed(0, 1))] = ONE;
        assert_eq!(r, expected);

        let m = ComplexMatrix::from_rows(&[vec![c(1.0, 2.0), c(3.0, 0.0)], vec![c(0.0, -1.0), c(0.5, 0.5)]]).unwrap();
        let a = ev_element(ZERO, ZERO, m.clone());
        let opp = t.represent_opposite(&a).unwrap();
        let unprimed_block = opp.block(0, 0, 4, 4);
        assert!(unprimed_block
            .approx_eq(&ComplexMatrix::identity(2).kron(&m.transpose()), 1e-15)
            .unwrap());
        assert_eq!(opp.block(4, 4, 4, 4).frob_norm(), 0.0);
    }

    #[test]
    fn hat_matches_opposite_block_formula() {
        let t = build_toy(&ToyParams::unit());
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let full = full_algebra();
        for _ in 0..10 {
            let a = full.random_element(&mut rng);
            let hat = t.j().conjugate(&t.represent(&a).unwrap()).unwrap();
            assert!(hat.approx_eq(&opposite_block_formula(&a.star()), 1e-14).unwrap());
        }
    }

    #[test]
    fn represent_is_star_homomorphism() {
        let t = build_toy(&ToyParams::unit());
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let full = full_algebra();
        for _ in 0..20 {
            let a = full.random_element(&mut rng);
            let b = full.random_element(&mut rng);
            let pa = t.represent(&a).unwrap();
            let pb = t.represent(&b).unwrap();
            assert!(t.represent(&a.mul(&b)).unwrap().approx_eq(&(&pa * &pb), 1e-12).unwrap());
            assert!(t.represent(&a.star()).unwrap().approx_eq(&pa.adjoint(), 1e-12).unwrap());
            let comm = pa.commutator(&t.represent_opposite(&b).unwrap()).unwrap();
            assert!(comm.frob_norm() < 1e-12);
        }
    }

    #[test]
    fn spanning_sets() {
        assert_eq!(full_algebra().spanning_set().len(), 8);
        assert_eq!(a_ev().spanning_set().len(), 6);
        assert_eq!(a_f().spanning_set().len(), 3);
    }

    #[test]
    fn closed_dirac_examples() {
        let p = ToyParams::new(c(0.8, 0.3), c(-0.4, 1.2));
        assert_eq!(closed_dirac(&p, &FieldPoint::unfluctuated()), dirac(&p));
        let d0 = closed_dirac(&p, &FieldPoint::new(ONE, ZERO, ZERO));
        assert_eq!(y_block(&d0).frob_norm(), 0.0);
        let f = FieldPoint::new(c(0.3, 0.1), c(0.2, 0.9), c(-1.1, 0.4));
        let d = closed_dirac(&p, &f);
        assert!(d.hermiticity_defect() < 1e-15);
        // Bilinear vvᵗ, not vv†: the off-diagonal entries are equal, not conjugate.
        let y = y_block(&d);
        assert!((y[(0, 1)] - y[(1, 0)]).norm() < 1e-15);
        assert!((y[(0, 1)] - p.k_y * f.v1 * f.v2).norm() < 1e-15);
        assert!((y[(0, 1)] - p.k_y * f.v1 * f.v2.conj()).norm() > 1e-3);
    }

    #[test]
    fn extract_fields_examples() {
        let one = a_ev().one();
        let w = UniversalOneForm::new(vec![(one.clone(), one.clone()), (one.clone(), one)]);
        assert_eq!(extract_fields(&w).unwrap(), FieldPoint::unfluctuated());

        let a = ev_element(ONE, ZERO, ComplexMatrix::zeros(2, 2));
        let b = ev_element(ZERO, ONE, ComplexMatrix::zeros(2, 2));
        let f = extract_fields(&UniversalOneForm::new(vec![(a, b)])).unwrap();
        assert_eq!(f, FieldPoint::new(c(2.0, 0.0), ONE, ZERO));

        let a = ev_element(ZERO, ZERO, ComplexMatrix::identity(2));
        let b = ev_element(ONE, ZERO, ComplexMatrix::diag(&[ONE, ZERO]));
        let f = extract_fields(&UniversalOneForm::new(vec![(a, b)])).unwrap();
        assert_eq!(f, FieldPoint::unfluctuated());

        let bad = full_algebra().spanning_set()[1].clone();
        let w = UniversalOneForm::new(vec![(bad.clone(), bad)]);
        assert!(matches!(extract_fields(&w), Err(ToyError::NotEven { index: 0, .. })));
    }
}
