//! Spectral-action potential of the toy model, its critical points and the
//! unbroken symmetry at a vacuum.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{AlgebraElement, AlgebraError, AlgebraSpec};
use crate::matrix::{ComplexMatrix, ONE, ZERO};
use crate::optimize::{
    classify, grad_hess, minimize, sub_eigenvalues, Classification, Mat3, MinimizeOptions, MinimizeOutcome, Objective,
    OptimizeError, Point, FD_STEP,
};
use crate::perturbation::{gauge_unitary, PertError};
use crate::toy::{a_ev, build_toy, closed_dirac, ev_components, FieldPoint, ToyParams};
use crate::triple::{FiniteSpectralTriple, TripleError};

/// Relative size of singular values treated as zero by the stabilizer map.
pub const STABILIZER_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ActionError {
    #[error("{name} must be positive and finite, got {value}")]
    InvalidParam { name: &'static str, value: f64 },
    #[error("tr D'² has imaginary part {0:.3e}")]
    ImaginaryTrace(f64),
    #[error("D_vev is not self-adjoint (defect {0:.3e})")]
    NotSelfAdjoint(f64),
    #[error("element is not unitary (defect {0:.3e})")]
    NotUnitary(f64),
    #[error("D_vev has shape {got:?}, expected {dim}x{dim}")]
    Shape { dim: usize, got: (usize, usize) },
    #[error(transparent)]
    Triple(#[from] TripleError),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Pert(#[from] PertError),
}

/// Spectral-action weights `f₂`, `f₀` and cutoff `Λ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionParams {
    pub f2: f64,
    pub f0: f64,
    pub lambda: f64,
}

impl ActionParams {
    pub fn new(f2: f64, f0: f64, lambda: f64) -> Result<Self, ActionError> {
        for (name, value) in [("f2", f2), ("f0", f0), ("lambda", lambda)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ActionError::InvalidParam { name, value });
            }
        }
        Ok(Self { f2, f0, lambda })
    }

    pub fn unit() -> Self {
        Self::new(1.0, 1.0, 1.0).expect("positive")
    }

    fn alpha(&self) -> f64 {
        self.f2 * self.lambda * self.lambda / (PI * PI)
    }

    fn beta(&self) -> f64 {
        self.f0 / (4.0 * PI * PI)
    }
}

/// `−(f₂Λ²/2π²) tr D² + (f₀/8π²) tr D⁴`, with `tr D⁴ = ‖D²‖²_F`.
pub fn potential_of_dirac(ap: &ActionParams, d: &ComplexMatrix) -> Result<f64, ActionError> {
    let d2 = d * d;
    let tr2 = d2.trace();
    if tr2.im.abs() > 1e-12 * tr2.re.abs().max(1.0) {
        return Err(ActionError::ImaginaryTrace(tr2.im));
    }
    let tr4 = d2.frob_norm_sqr();
    Ok(-ap.alpha() / 2.0 * tr2.re + ap.beta() / 2.0 * tr4)
}

/// The potential from traces of the fluctuated Dirac operator.
pub fn v_trace(p: &ToyParams, ap: &ActionParams, f: &FieldPoint) -> Result<f64, ActionError> {
    potential_of_dirac(ap, &closed_dirac(p, f))
}

/// The potential as a polynomial in `c = |k_x|²|X|²` and `b = |k_y|²|v|⁴`:
/// `−(f₂Λ²/π²)(4c + b) + (f₀/4π²)(2c + b)²`.
pub fn v_closed(p: &ToyParams, ap: &ActionParams, f: &FieldPoint) -> f64 {
    let c = p.k_x.norm_sqr() * f.x.norm_sqr();
    let b = p.k_y.norm_sqr() * f.v_norm_sqr().powi(2);
    -ap.alpha() * (4.0 * c + b) + ap.beta() * (4.0 * c * c + 4.0 * c * b + b * b)
}

/// `w = √(2f₂Λ²/(f₀|k_y|²))`, the value of `|v|²` at the minimum of the
/// `X = 0` slice.
pub fn w(p: &ToyParams, ap: &ActionParams) -> f64 {
    (2.0 * ap.f2 * ap.lambda * ap.lambda / (ap.f0 * p.k_y.norm_sqr())).sqrt()
}

/// `|X|² = f₂Λ²/(f₀|k_x|²)`, the minimum of the remaining potential in `X`.
pub fn x_vev_sqr(p: &ToyParams, ap: &ActionParams) -> f64 {
    ap.f2 * ap.lambda * ap.lambda / (ap.f0 * p.k_x.norm_sqr())
}

/// `−(2f₂Λ²|k_x|²/π²)|X|² + (f₀|k_x|⁴/π²)|X|⁴`.
pub fn remaining_x_potential(p: &ToyParams, ap: &ActionParams, x: Complex64) -> f64 {
    let k2 = p.k_x.norm_sqr();
    let x2 = x.norm_sqr();
    -2.0 * ap.alpha() * k2 * x2 + 4.0 * ap.beta() * k2 * k2 * x2 * x2
}

/// `(X, v) = (0, (√w, 0))`.
pub fn sigma_vev(p: &ToyParams, ap: &ActionParams) -> FieldPoint {
    FieldPoint::new(ZERO, Complex64::new(w(p, ap).sqrt(), 0.0), ZERO)
}

/// `(X, v) = (√(f₂Λ²/f₀|k_x|²), (√w, 0))`.
pub fn full_vev(p: &ToyParams, ap: &ActionParams) -> FieldPoint {
    FieldPoint::new(Complex64::new(x_vev_sqr(p, ap).sqrt(), 0.0), sigma_vev(p, ap).v1, ZERO)
}

/// Real coordinates `(x, s₁, s₂)` of the critical point `(0, −1 + √w, 0)`.
pub fn sigma_critical_coords(p: &ToyParams, ap: &ActionParams) -> Point {
    [0.0, w(p, ap).sqrt() - 1.0, 0.0]
}

/// `(f₀|k_y|⁴/π²)·diag(−2w², 8w³, 0)`.
pub fn reference_hessian_diagonal(p: &ToyParams, ap: &ActionParams) -> [f64; 3] {
    let w = w(p, ap);
    let s = ap.f0 * p.k_y.norm_sqr().powi(2) / (PI * PI);
    [-2.0 * w * w * s, 8.0 * w.powi(3) * s, 0.0]
}

/// The closed-form potential on real coordinates, with exact derivatives.
#[derive(Clone, Copy, Debug)]
pub struct ClosedPotential {
    pub params: ToyParams,
    pub action: ActionParams,
}

impl ClosedPotential {
    pub fn new(params: ToyParams, action: ActionParams) -> Self {
        Self { params, action }
    }

    /// `V` and its first and second derivatives in `c = x²` and `r = |v|²`.
    fn partials(&self, x: &Point) -> (f64, f64, f64, f64, f64, f64, f64) {
        let kx2 = self.params.k_x.norm_sqr();
        let ky2 = self.params.k_y.norm_sqr();
        let (al, be) = (self.action.alpha(), self.action.beta());
        let c = x[0] * x[0];
        let r = (1.0 + x[1]).powi(2) + x[2] * x[2];
        let v_c = -4.0 * al * kx2 + be * (8.0 * kx2 * kx2 * c + 4.0 * kx2 * ky2 * r * r);
        let v_r = -2.0 * al * ky2 * r + be * (8.0 * kx2 * ky2 * c * r + 4.0 * ky2 * ky2 * r.powi(3));
        let v_cc = 8.0 * be * kx2 * kx2;
        let v_rr = -2.0 * al * ky2 + be * (8.0 * kx2 * ky2 * c + 12.0 * ky2 * ky2 * r * r);
        let v_cr = 8.0 * be * kx2 * ky2 * r;
        (c, r, v_c, v_r, v_cc, v_rr, v_cr)
    }
}

impl Objective for ClosedPotential {
    fn value(&self, x: &Point) -> f64 {
        v_closed(&self.params, &self.action, &FieldPoint::from_real_coords(*x))
    }

    fn gradient(&self, x: &Point) -> Point {
        let (_, _, v_c, v_r, ..) = self.partials(x);
        [2.0 * x[0] * v_c, 2.0 * (1.0 + x[1]) * v_r, 2.0 * x[2] * v_r]
    }

    fn hessian(&self, x: &Point) -> Mat3 {
        let (_, _, v_c, v_r, v_cc, v_rr, v_cr) = self.partials(x);
        let dc = [2.0 * x[0], 0.0, 0.0];
        let dr = [0.0, 2.0 * (1.0 + x[1]), 2.0 * x[2]];
        let mut h = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                h[i][j] = v_cc * dc[i] * dc[j] + v_rr * dr[i] * dr[j] + v_cr * (dc[i] * dr[j] + dr[i] * dc[j]);
            }
        }
        h[0][0] += 2.0 * v_c;
        h[1][1] += 2.0 * v_r;
        h[2][2] += 2.0 * v_r;
        h
    }
}

/// The trace form of the potential; derivatives by finite differences.
#[derive(Clone, Copy, Debug)]
pub struct TracePotential {
    pub params: ToyParams,
    pub action: ActionParams,
}

impl TracePotential {
    fn hessian_with_step(&self, x: &Point, step: f64) -> Mat3 {
        grad_hess(|y| self.value(y), x, step).1
    }
}

impl Objective for TracePotential {
    fn value(&self, x: &Point) -> f64 {
        v_trace(&self.params, &self.action, &FieldPoint::from_real_coords(*x))
            .expect("closed_dirac is self-adjoint, so tr D'² is real")
    }
}

/// Multi-start minimization of the closed potential, with the stabilizer
/// dimension attached to every critical point.
pub fn minimize_toy(p: &ToyParams, ap: &ActionParams, opts: &MinimizeOptions) -> Result<MinimizeOutcome, ActionError> {
    let mut out = minimize(&ClosedPotential::new(*p, *ap), opts)?;
    let t = build_toy(p);
    let ev = a_ev();
    for cp in &mut out.points {
        let d = closed_dirac(p, &FieldPoint::from_real_coords(cp.coords));
        cp.stabilizer_dim = Some(stabilizer(&t, &d, &ev)?.dim);
    }
    Ok(out)
}

/// Finite-difference Hessian at the σ-vacuum against
/// `(f₀|k_y|⁴/π²)·diag(−2w², 8w³, 0)`.
#[derive(Clone, Debug, Serialize)]
pub struct HessianReport {
    pub point: Point,
    pub step: f64,
    pub gradient: Point,
    pub hessian: Mat3,
    pub analytic_hessian: Mat3,
    pub reference_diagonal: [f64; 3],
    /// `|H_ii − ref_i| / |ref_i|` for nonzero reference entries, else `|H_ii|`.
    pub diagonal_errors: [f64; 3],
    /// `−4f₂Λ²|k_x|²/π²`, the φφ entry obtained by differentiating `V`.
    pub derived_phi_entry: f64,
    /// Relative gap between the derived φφ entry and the reference one; zero
    /// exactly when `|k_x| = |k_y|`.
    pub phi_entry_discrepancy: f64,
    pub eigenvalues: Vec<f64>,
    pub classification: Classification,
    pub slice_eigenvalues: Vec<f64>,
    pub slice_classification: Classification,
    /// Eigenvalues of the 6×6 Hessian over real and imaginary parts of
    /// `(X, v₁, v₂)`.
    pub complex_eigenvalues: Vec<f64>,
}

pub fn hessian_report(p: &ToyParams, ap: &ActionParams, step: f64) -> HessianReport {
    let point = sigma_critical_coords(p, ap);
    let trace = TracePotential {
        params: *p,
        action: *ap,
    };
    let hessian = trace.hessian_with_step(&point, step);
    let gradient = trace.gradient(&point);
    let analytic_hessian = ClosedPotential::new(*p, *ap).hessian(&point);
    let reference_diagonal = reference_hessian_diagonal(p, ap);
    let diagonal_errors: [f64; 3] = std::array::from_fn(|i| {
        let r = reference_diagonal[i];
        if r == 0.0 {
            hessian[i][i].abs()
        } else {
            (hessian[i][i] - r).abs() / r.abs()
        }
    });
    let derived_phi_entry = -4.0 * ap.alpha() * p.k_x.norm_sqr();
    let phi_entry_discrepancy = (derived_phi_entry - reference_diagonal[0]).abs() / reference_diagonal[0].abs();
    let eigenvalues = sub_eigenvalues(&hessian, &[0, 1, 2]);
    let slice_eigenvalues = sub_eigenvalues(&hessian, &[1, 2]);
    let complex_eigenvalues = complex_hessian_eigenvalues(p, ap, &FieldPoint::from_real_coords(point), step);
    HessianReport {
        point,
        step,
        gradient,
        hessian,
        analytic_hessian,
        reference_diagonal,
        diagonal_errors,
        derived_phi_entry,
        phi_entry_discrepancy,
        classification: classify(&eigenvalues),
        eigenvalues,
        slice_classification: classify(&slice_eigenvalues),
        slice_eigenvalues,
        complex_eigenvalues,
    }
}

/// Eigenvalues of the finite-difference Hessian of `v_trace` in
/// `(Re X, Im X, Re v₁, Im v₁, Re v₂, Im v₂)`.
pub fn complex_hessian_eigenvalues(p: &ToyParams, ap: &ActionParams, f: &FieldPoint, step: f64) -> Vec<f64> {
    let x0 = [f.x.re, f.x.im, f.v1.re, f.v1.im, f.v2.re, f.v2.im];
    let (_, h) = grad_hess(
        |y: &[f64; 6]| {
            let g = FieldPoint::new(
                Complex64::new(y[0], y[1]),
                Complex64::new(y[2], y[3]),
                Complex64::new(y[4], y[5]),
            );
            v_trace(p, ap, &g).expect("self-adjoint")
        },
        &x0,
        step,
    );
    let m = DMatrix::from_fn(6, 6, |r, c| h[r][c]);
    let mut v: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Default step for [`hessian_report`].
pub const HESSIAN_STEP: f64 = FD_STEP;

#[derive(Clone, Debug, Serialize)]
pub struct StabilizerReport {
    pub dim: usize,
    pub lie_dim: usize,
    pub singular_values: Vec<f64>,
}

/// Real nullspace of `X ↦ [π(X) + π̂(X), D_vev]` over the anti-self-adjoint
/// elements of `algebra`.
pub fn stabilizer(
    t: &FiniteSpectralTriple,
    d_vev: &ComplexMatrix,
    algebra: &AlgebraSpec,
) -> Result<StabilizerReport, ActionError> {
    let n = t.dim_h();
    if d_vev.shape() != (n, n) {
        return Err(ActionError::Shape {
            dim: n,
            got: d_vev.shape(),
        });
    }
    let herm = d_vev.hermiticity_defect();
    if herm > 1e-9 * d_vev.frob_norm().max(1.0) {
        return Err(ActionError::NotSelfAdjoint(herm));
    }
    let basis = algebra.anti_hermitian_basis();
    let mut columns = Vec::with_capacity(basis.len());
    for x in &basis {
        let px = t.represent(x)?;
        let gen = &px + &t.hat(&px);
        let comm = gen.commutator_unchecked(d_vev);
        let col: Vec<f64> = comm.as_slice().iter().flat_map(|z| [z.re, z.im]).collect();
        columns.push(col);
    }
    let rows = 2 * n * n;
    let m = DMatrix::from_fn(rows, basis.len(), |r, c| columns[c][r]);
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let top = sv.first().copied().unwrap_or(0.0);
    let rank = sv.iter().filter(|&&s| s > STABILIZER_TOL * top).count();
    Ok(StabilizerReport {
        dim: basis.len() - rank,
        lie_dim: basis.len(),
        singular_values: sv,
    })
}

pub fn stabilizer_dim(t: &FiniteSpectralTriple, d_vev: &ComplexMatrix, algebra: &AlgebraSpec) -> Result<usize, ActionError> {
    Ok(stabilizer(t, d_vev, algebra)?.dim)
}

/// How a vacuum moves under `U = π(u) π̂(u)`.
#[derive(Clone, Debug, Serialize)]
pub struct VevTransform {
    /// `‖U D U* − D‖`.
    pub moved: f64,
    /// The same distance predicted from the transformed fields
    /// `X ↦ u_R ū_L X`, `v ↦ ū_R m v`.
    pub predicted: f64,
    /// `‖U D U* − D(X', v')‖`.
    pub formula_residual: f64,
}

/// Fields after the gauge transformation by `u = (u_R, u_L, m) ∈ A_ev`.
pub fn transformed_fields(f: &FieldPoint, u: &AlgebraElement) -> FieldPoint {
    let (ur, ul, m) = ev_components(u);
    let x = ur * ul.conj() * f.x;
    let v1 = ur.conj() * (m[(0, 0)] * f.v1 + m[(0, 1)] * f.v2);
    let v2 = ur.conj() * (m[(1, 0)] * f.v1 + m[(1, 1)] * f.v2);
    FieldPoint::new(x, v1, v2)
}

pub fn vev_transform_check(p: &ToyParams, f: &FieldPoint, u: &AlgebraElement) -> Result<VevTransform, ActionError> {
    let ev = a_ev();
    ev.check_element(u, 1e-9)?;
    let defect = u.unitarity_defect();
    if defect > 1e-9 {
        return Err(ActionError::NotUnitary(defect));
    }
    let t = build_toy(p);
    let d = closed_dirac(p, f);
    let big_u = gauge_unitary(&t, u)?;
    let moved_d = &(&big_u * &d) * &big_u.adjoint();
    let closed = closed_dirac(p, &transformed_fields(f, u));
    Ok(VevTransform {
        moved: (&moved_d - &d).frob_norm(),
        predicted: (&closed - &d).frob_norm(),
        formula_residual: (&moved_d - &closed).frob_norm(),
    })
}

/// `(λ_R, λ_L, diag(λ_R, μ))`-type unitaries leave `D` at the σ-vacuum fixed.
pub fn stabilizer_unitary(phase_r: f64, phase_l: f64, phase_mu: f64) -> AlgebraElement {
    let ur = Complex64::from_polar(1.0, phase_r);
    crate::toy::ev_element(
        ur,
        Complex64::from_polar(1.0, phase_l),
        ComplexMatrix::diag(&[ur, Complex64::from_polar(1.0, phase_mu)]),
    )
}

/// `(1, 1, R(θ))` with `R(θ)` the real rotation by `θ`.
pub fn rotation_unitary(theta: f64) -> AlgebraElement {
    let (s, c) = theta.sin_cos();
    let m = ComplexMatrix::from_real(2, 2, &[c, -s, s, c]).expect("2x2");
    crate::toy::ev_element(ONE, ONE, m)
}

/// Axis ranges and number of points per axis for a potential scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub c1: [f64; 2],
    pub c2: [f64; 2],
    pub resolution: usize,
}

impl Grid {
    pub fn axis(range: [f64; 2], n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| range[0] + (range[1] - range[0]) * i as f64 / (n - 1) as f64)
            .collect()
    }

    pub fn step(&self) -> (f64, f64) {
        let d = (self.resolution - 1) as f64;
        ((self.c1[1] - self.c1[0]) / d, (self.c2[1] - self.c2[0]) / d)
    }

    fn cells(&self, mut f: impl FnMut(f64, f64) -> f64) -> Vec<[f64; 3]> {
        let a = Self::axis(self.c1, self.resolution);
        let b = Self::axis(self.c2, self.resolution);
        let mut out = Vec::with_capacity(a.len() * b.len());
        for &x in &a {
            for &y in &b {
                out.push([x, y, f(x, y)]);
            }
        }
        out
    }
}

/// `V(X = 0, σ₁, σ₂)` on real `σ`.
pub fn scan_sigma(p: &ToyParams, ap: &ActionParams, grid: &Grid) -> Vec<[f64; 3]> {
    grid.cells(|s1, s2| v_closed(p, ap, &FieldPoint::from_real_coords([0.0, s1, s2])))
}

/// `V(X, σ₁ = −1 + √w, σ₂ = 0)` over `(Re X, Im X)`.
pub fn scan_x(p: &ToyParams, ap: &ActionParams, grid: &Grid) -> Vec<[f64; 3]> {
    let v1 = sigma_vev(p, ap).v1;
    grid.cells(|re, im| v_closed(p, ap, &FieldPoint::new(Complex64::new(re, im), v1, ZERO)))
}
