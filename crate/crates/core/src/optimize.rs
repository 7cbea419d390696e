//! Finite differences, multi-start minimization and critical-point
//! classification for functions of three real coordinates.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

pub type Point = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

/// Base finite-difference step for second derivatives, scaled by
/// `max(1, |x_i|)` per coordinate.
pub const FD_STEP: f64 = 1e-4;
/// Base step for first derivatives.
pub const FD_GRAD_STEP: f64 = 1e-6;
/// Eigenvalues below this fraction of the Hessian scale count as zero.
pub const DEGENERACY_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizeError {
    #[error("at least one start is required")]
    NoStarts,
    #[error("all coordinates are fixed")]
    NothingFree,
}

/// A smooth function of three real coordinates. Derivatives default to
/// central finite differences.
pub trait Objective {
    fn value(&self, x: &Point) -> f64;

    fn gradient(&self, x: &Point) -> Point {
        grad_hess(|y| self.value(y), x, FD_GRAD_STEP).0
    }

    fn hessian(&self, x: &Point) -> Mat3 {
        grad_hess(|y| self.value(y), x, FD_STEP).1
    }
}

impl<F: Fn(&Point) -> f64> Objective for F {
    fn value(&self, x: &Point) -> f64 {
        self(x)
    }
}

/// Central differences with `h_i = step·max(1, |x_i|)`: three-point second
/// derivatives on the diagonal and the four-point stencil off it.
pub fn grad_hess<const N: usize>(
    f: impl Fn(&[f64; N]) -> f64,
    x: &[f64; N],
    step: f64,
) -> ([f64; N], [[f64; N]; N]) {
    let h: [f64; N] = std::array::from_fn(|i| step * x[i].abs().max(1.0));
    let shifted = |moves: &[(usize, f64)]| {
        let mut y = *x;
        for &(i, s) in moves {
            y[i] += s * h[i];
        }
        f(&y)
    };
    let f0 = f(x);
    let mut g = [0.0; N];
    let mut hess = [[0.0; N]; N];
    for i in 0..N {
        let fp = shifted(&[(i, 1.0)]);
        let fm = shifted(&[(i, -1.0)]);
        g[i] = (fp - fm) / (2.0 * h[i]);
        hess[i][i] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in 0..i {
            let v = (shifted(&[(i, 1.0), (j, 1.0)]) - shifted(&[(i, 1.0), (j, -1.0)]) - shifted(&[(i, -1.0), (j, 1.0)])
                + shifted(&[(i, -1.0), (j, -1.0)]))
                / (4.0 * h[i] * h[j]);
            hess[i][j] = v;
            hess[j][i] = v;
        }
    }
    (g, hess)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Min,
    Max,
    Saddle,
    Degenerate,
}

/// Sign pattern of `eigs`; `|λ| ≤ DEGENERACY_TOL·max(1, max|λ|)` is zero.
pub fn classify(eigs: &[f64]) -> Classification {
    let scale = eigs.iter().fold(1.0f64, |m, e| m.max(e.abs()));
    let thr = DEGENERACY_TOL * scale;
    let pos = eigs.iter().any(|&e| e > thr);
    let neg = eigs.iter().any(|&e| e < -thr);
    let zero = eigs.iter().any(|&e| e.abs() <= thr);
    match (pos, neg, zero) {
        (true, true, _) => Classification::Saddle,
        (_, _, true) => Classification::Degenerate,
        (true, false, false) => Classification::Min,
        _ => Classification::Max,
    }
}

/// Eigenvalues (ascending) of the symmetric submatrix on `idx`.
pub fn sub_eigenvalues(h: &Mat3, idx: &[usize]) -> Vec<f64> {
    let m = DMatrix::from_fn(idx.len(), idx.len(), |r, c| h[idx[r]][idx[c]]);
    let mut v: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

#[derive(Clone, Debug, Serialize)]
pub struct CriticalPoint {
    pub coords: Point,
    pub value: f64,
    pub gradient_norm: f64,
    pub hessian: Mat3,
    /// Eigenvalues on the free coordinates.
    pub eigenvalues: Vec<f64>,
    pub classification: Classification,
    pub full_eigenvalues: Vec<f64>,
    pub full_classification: Classification,
    pub stabilizer_dim: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StartFailure {
    pub start: usize,
    pub coords: Point,
    pub gradient_norm: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct MinimizeOutcome {
    pub points: Vec<CriticalPoint>,
    pub failures: Vec<StartFailure>,
}

#[derive(Clone, Debug)]
pub struct MinimizeOptions {
    pub starts: usize,
    pub seed: u64,
    pub fixed: [Option<f64>; 3],
    /// Starts are uniform in `[lo, hi]³`.
    pub start_box: (f64, f64),
    pub max_iter: usize,
    pub merge_radius: f64,
    pub grad_tol: f64,
    /// Gradient norm at which descent hands over to Newton steps.
    pub newton_switch: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            starts: 32,
            seed: 0,
            fixed: [None; 3],
            start_box: (-2.0, 2.0),
            max_iter: 100_000,
            merge_radius: 1e-5,
            grad_tol: 1e-10,
            newton_switch: 1e-4,
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn free_gradient(obj: &impl Objective, x: &Point, free: &[usize]) -> Point {
    let g = obj.gradient(x);
    let mut out = [0.0; 3];
    for &i in free {
        out[i] = g[i];
    }
    out
}

fn axpy(x: &Point, t: f64, p: &Point) -> Point {
    std::array::from_fn(|i| x[i] + t * p[i])
}

struct RunResult {
    x: Point,
    grad_norm: f64,
    iterations: usize,
}

fn descend(obj: &impl Objective, mut x: Point, free: &[usize], opts: &MinimizeOptions) -> RunResult {
    let mut f = obj.value(&x);
    let mut g = free_gradient(obj, &x, free);
    let mut t_prev: f64 = 1e-2;
    let mut it = 0;
    while it < opts.max_iter && norm(&g) >= opts.newton_switch {
        it += 1;
        let gg = norm(&g).powi(2);
        let mut t = (2.0 * t_prev).min(1.0);
        let mut accepted = false;
        while t > 1e-20 {
            let y = axpy(&x, -t, &g);
            let fy = obj.value(&y);
            if fy <= f - 1e-4 * t * gg {
                x = y;
                f = fy;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        t_prev = t;
        g = free_gradient(obj, &x, free);
    }
    while it < opts.max_iter {
        it += 1;
        let gn = norm(&g);
        if gn == 0.0 {
            break;
        }
        let h = obj.hessian(&x);
        let k = free.len();
        let hm = DMatrix::from_fn(k, k, |r, c| h[free[r]][free[c]]);
        let gv = DVector::from_fn(k, |r, _| g[free[r]]);
        let eig = SymmetricEigen::new(hm);
        let lmax = eig.eigenvalues.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        let floor = 1e-12 * lmax.max(1.0);
        let mut p = [0.0; 3];
        for (j, lam) in eig.eigenvalues.iter().enumerate() {
            let v = eig.eigenvectors.column(j);
            let coef = v.dot(&gv) / lam.abs().max(floor);
            for r in 0..k {
                p[free[r]] -= coef * v[r];
            }
        }
        let slope: f64 = (0..3).map(|i| g[i] * p[i]).sum();
        let mut t = 1.0;
        let mut next = None;
        while t > 1e-12 {
            let y = axpy(&x, t, &p);
            let fy = obj.value(&y);
            if fy <= f + 1e-4 * t * slope {
                next = Some((y, fy, free_gradient(obj, &y, free)));
                break;
            }
            if fy <= f + 1e-13 * f.abs().max(1.0) {
                let gy = free_gradient(obj, &y, free);
                if norm(&gy) < gn {
                    next = Some((y, fy, gy));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((y, fy, gy)) = next else { break };
        let step = t * norm(&p);
        x = y;
        f = fy;
        g = gy;
        if step <= 1e-13 * (1.0 + norm(&x)) {
            break;
        }
    }
    RunResult {
        x,
        grad_norm: norm(&g),
        iterations: it,
    }
}

/// Builds the critical-point record at `x`, using the objective's Hessian.
pub fn critical_point(obj: &impl Objective, x: Point, free: &[usize]) -> CriticalPoint {
    let h = obj.hessian(&x);
    let eigenvalues = sub_eigenvalues(&h, free);
    let full_eigenvalues = sub_eigenvalues(&h, &[0, 1, 2]);
    CriticalPoint {
        coords: x,
        value: obj.value(&x),
        gradient_norm: norm(&free_gradient(obj, &x, free)),
        hessian: h,
        classification: classify(&eigenvalues),
        full_classification: classify(&full_eigenvalues),
        eigenvalues,
        full_eigenvalues,
        stabilizer_dim: None,
    }
}

/// Multi-start local minimization: Armijo gradient descent until the
/// gradient is small, then damped Newton steps with eigenvalue-floored
/// Hessians. Start `i` draws from its own stream seeded with `seed + i`.
/// Converged points closer than the merge radius are merged; results are
/// sorted by value, then coordinates.
pub fn minimize(obj: &impl Objective, opts: &MinimizeOptions) -> Result<MinimizeOutcome, OptimizeError> {
    if opts.starts == 0 {
        return Err(OptimizeError::NoStarts);
    }
    let free: Vec<usize> = (0..3).filter(|&i| opts.fixed[i].is_none()).collect();
    if free.is_empty() {
        return Err(OptimizeError::NothingFree);
    }
    let mut points: Vec<CriticalPoint> = Vec::new();
    let mut failures = Vec::new();
    for start in 0..opts.starts {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(start as u64));
        let x0: Point = std::array::from_fn(|i| match opts.fixed[i] {
            Some(v) => v,
            None => rng.gen_range(opts.start_box.0..=opts.start_box.1),
        });
        let run = descend(obj, x0, &free, opts);
        let value = obj.value(&run.x);
        let converged = run.grad_norm < opts.grad_tol * value.abs().max(1.0);
        if !converged {
            failures.push(StartFailure {
                start,
                coords: run.x,
                gradient_norm: run.grad_norm,
                iterations: run.iterations,
            });
            continue;
        }
        let near = points
            .iter()
            .position(|p| norm(&std::array::from_fn::<f64, 3, _>(|i| p.coords[i] - run.x[i])) < opts.merge_radius);
        match near {
            Some(k) if points[k].gradient_norm <= run.grad_norm => {}
            Some(k) => points[k] = critical_point(obj, run.x, &free),
            None => points.push(critical_point(obj, run.x, &free)),
        }
    }
    points.sort_by(|a, b| {
        a.value
            .total_cmp(&b.value)
            .then_with(|| a.coords.iter().zip(&b.coords).fold(std::cmp::Ordering::Equal, |o, (x, y)| o.then(x.total_cmp(y))))
    });
    Ok(MinimizeOutcome { points, failures })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grad_hess_quadratic() {
        let f = |x: &Point| x[0] * x[0] + 3.0 * x[1] * x[1] + 0.5 * x[0] * x[2];
        let (g, h) = grad_hess(f, &[1.0, -2.0, 0.5], FD_STEP);
        let eg = [2.0 + 0.25, -12.0, 0.5];
        let eh = [[2.0, 0.0, 0.5], [0.0, 6.0, 0.0], [0.5, 0.0, 0.0]];
        for i in 0..3 {
            assert!((g[i] - eg[i]).abs() < 1e-8);
            for j in 0..3 {
                assert!((h[i][j] - eh[i][j]).abs() < 1e-5, "{i}{j}: {}", h[i][j]);
                assert_eq!(h[i][j], h[j][i]);
            }
        }
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify(&[1.0, 2.0]), Classification::Min);
        assert_eq!(classify(&[-1.0, -2.0]), Classification::Max);
        assert_eq!(classify(&[-1.0, 2.0, 0.0]), Classification::Saddle);
        assert_eq!(classify(&[1e-9, 2.0]), Classification::Degenerate);
    }

    #[test]
    fn finds_both_wells() {
        let f = |x: &Point| (x[0] * x[0] - 1.0).powi(2) + x[1] * x[1] + 2.0 * x[2] * x[2];
        let opts = MinimizeOptions {
            starts: 8,
            ..Default::default()
        };
        let out = minimize(&f, &opts).unwrap();
        assert!(out.failures.is_empty());
        assert_eq!(out.points.len(), 2);
        assert!((out.points[0].coords[0] + 1.0).abs() < 1e-8);
        assert!((out.points[1].coords[0] - 1.0).abs() < 1e-8);
        assert!(out.points.iter().all(|p| p.classification == Classification::Min));
    }

    #[test]
    fn fixed_coordinates_stay_fixed() {
        let f = |x: &Point| (x[0] - 0.3).powi(2) + (x[1] + x[2]).powi(2) + x[2] * x[2];
        let opts = MinimizeOptions {
            starts: 3,
            fixed: [None, None, Some(0.5)],
            ..Default::default()
        };
        let out = minimize(&f, &opts).unwrap();
        assert_eq!(out.points.len(), 1);
        let p = &out.points[0];
        assert_eq!(p.coords[2], 0.5);
        assert!((p.coords[1] + 0.5).abs() < 1e-8);
        assert_eq!(p.eigenvalues.len(), 2);
    }

    #[test]
    fn deterministic_and_validated() {
        let f = |x: &Point| x[0].powi(4) - x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        let opts = MinimizeOptions {
            starts: 5,
            seed: 9,
            ..Default::default()
        };
        let a = minimize(&f, &opts).unwrap();
        let b = minimize(&f, &opts).unwrap();
        assert_eq!(a.points.len(), b.points.len());
        for (p, q) in a.points.iter().zip(&b.points) {
            assert_eq!(p.coords, q.coords);
        }
        let none = MinimizeOptions {
            starts: 0,
            ..Default::default()
        };
        assert_eq!(minimize(&f, &none).unwrap_err(), OptimizeError::NoStarts);
        let all = MinimizeOptions {
            fixed: [Some(0.0); 3],
            ..Default::default()
        };
        assert_eq!(minimize(&f, &all).unwrap_err(), OptimizeError::NothingFree);
    }
}
