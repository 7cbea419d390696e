//! Twisting a finite triple by a projective module `E = e Aⁿ`.
//!
//! `Mₙ(A)` for `A = ⊕ M_{n_s}` is stored as the algebra `⊕ M_{n·n_s}`, with
//! entry `(i, j)` of summand `s` at rows `i·n_s..`, columns `j·n_s..`.
//! `Mₙ(H)` is flattened as `(i·n + j)·dim_H + h`.

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::algebra::{AlgebraElement, AlgebraSpec};
use crate::matrix::{AntilinearOp, ComplexMatrix};
use crate::perturbation::{one_form_operator, OperatorPair, UniversalOneForm};
use crate::triple::FiniteSpectralTriple;

/// Spectral gap below which a random idempotent is resampled.
pub const MIN_SPECTRAL_GAP: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MoritaError {
    #[error("module rank must be at least 1")]
    ZeroRank,
    #[error("idempotent has summand sizes {got:?}, expected {expected:?}")]
    Shape { expected: Vec<usize>, got: Vec<usize> },
    #[error("e is not idempotent (defect {0:.3e})")]
    NotIdempotent(f64),
    #[error("e is not self-adjoint (defect {0:.3e})")]
    NotSelfAdjoint(f64),
    #[error("connection form is not compressed by e (defect {0:.3e})")]
    NotCompressed(f64),
    #[error("connection form is not self-adjoint (defect {0:.3e})")]
    ConnectionNotSelfAdjoint(f64),
    #[error("expected {expected} connection entries, got {got}")]
    GridSize { expected: usize, got: usize },
}

/// Summand sizes of `Mₙ(A)`.
pub fn matrix_sizes(n: usize, sizes: &[usize]) -> Vec<usize> {
    sizes.iter().map(|s| n * s).collect()
}

/// Entry `(i, j)` of `x ∈ Mₙ(A)`.
pub fn grid_entry(x: &AlgebraElement, n: usize, i: usize, j: usize) -> AlgebraElement {
    AlgebraElement::new(
        x.blocks
            .iter()
            .map(|b| {
                let s = b.rows() / n;
                b.block(i * s, j * s, s, s)
            })
            .collect(),
    )
}

/// Assembles `x ∈ Mₙ(A)` from its entries.
pub fn from_grid(n: usize, sizes: &[usize], mut entry: impl FnMut(usize, usize) -> AlgebraElement) -> AlgebraElement {
    let mut blocks: Vec<ComplexMatrix> = sizes.iter().map(|&s| ComplexMatrix::zeros(n * s, n * s)).collect();
    for i in 0..n {
        for j in 0..n {
            let a = entry(i, j);
            for (blk, (&s, part)) in blocks.iter_mut().zip(sizes.iter().zip(&a.blocks)) {
                blk.set_block(i * s, j * s, part);
            }
        }
    }
    AlgebraElement::new(blocks)
}

/// `a·E_ij`.
pub fn elementary(n: usize, sizes: &[usize], i: usize, j: usize, a: &AlgebraElement) -> AlgebraElement {
    from_grid(n, sizes, |r, c| {
        if (r, c) == (i, j) {
            a.clone()
        } else {
            AlgebraElement::zero(sizes)
        }
    })
}

/// The one-form over `Mₙ(A)` whose `(i, k)` entry is `grid[i·n + k]`:
/// each pair `(a, b)` becomes `(a E_ik, b E_kk)`.
pub fn connection_from_entries(
    n: usize,
    sizes: &[usize],
    grid: &[UniversalOneForm],
) -> Result<UniversalOneForm, MoritaError> {
    if grid.len() != n * n {
        return Err(MoritaError::GridSize {
            expected: n * n,
            got: grid.len(),
        });
    }
    let mut pairs = Vec::new();
    for i in 0..n {
        for k in 0..n {
            for (a, b) in &grid[i * n + k].pairs {
                pairs.push((elementary(n, sizes, i, k, a), elementary(n, sizes, k, k, b)));
            }
        }
    }
    Ok(UniversalOneForm::new(pairs))
}

/// `e·ω·e`.
pub fn compress(e: &AlgebraElement, w: &UniversalOneForm) -> UniversalOneForm {
    w.left_mul(e).right_mul(e)
}

/// An idempotent `e ∈ Mₙ(A)` with an optional perturbation `eAe` of the
/// Grassmannian connection, given as a one-form over `Mₙ(A)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MoritaData {
    n: usize,
    e: AlgebraElement,
    conn_form: Option<UniversalOneForm>,
}

impl MoritaData {
    pub fn new(
        t: &FiniteSpectralTriple,
        n: usize,
        e: AlgebraElement,
        conn_form: Option<UniversalOneForm>,
        tol: f64,
    ) -> Result<Self, MoritaError> {
        if n == 0 {
            return Err(MoritaError::ZeroRank);
        }
        let expected = matrix_sizes(n, t.algebra().summands());
        if e.sizes() != expected {
            return Err(MoritaError::Shape {
                expected,
                got: e.sizes(),
            });
        }
        let idem = e.mul(&e).distance(&e);
        if idem > tol * e.frob_norm().max(1.0) {
            return Err(MoritaError::NotIdempotent(idem));
        }
        let sa = e.star().distance(&e);
        if sa > tol * e.frob_norm().max(1.0) {
            return Err(MoritaError::NotSelfAdjoint(sa));
        }
        let data = Self { n, e, conn_form };
        if let Some(w) = &data.conn_form {
            for (a, b) in &w.pairs {
                for x in [a, b] {
                    if x.sizes() != data.e.sizes() {
                        return Err(MoritaError::Shape {
                            expected: data.e.sizes(),
                            got: x.sizes(),
                        });
                    }
                }
            }
            let ms = MoritaSpace::new(t, n);
            let omega = ms.one_form(w, &ms.d_tilde);
            let p = ms.left(&data.e);
            let scale = omega.frob_norm().max(1.0);
            let compressed = &(&p * &omega) * &p;
            let defect = (&compressed - &omega).frob_norm();
            if defect > tol * scale {
                return Err(MoritaError::NotCompressed(defect));
            }
            let herm = omega.hermiticity_defect();
            if herm > tol * scale {
                return Err(MoritaError::ConnectionNotSelfAdjoint(herm));
            }
        }
        Ok(data)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn e(&self) -> &AlgebraElement {
        &self.e
    }

    pub fn conn_form(&self) -> Option<&UniversalOneForm> {
        self.conn_form.as_ref()
    }

    pub fn entry(&self, i: usize, j: usize) -> AlgebraElement {
        grid_entry(&self.e, self.n, i, j)
    }
}

/// Operators on `Mₙ(H)` built from a triple.
pub struct MoritaSpace<'a> {
    t: &'a FiniteSpectralTriple,
    n: usize,
    d_tilde: ComplexMatrix,
    j: AntilinearOp,
}

impl<'a> MoritaSpace<'a> {
    pub fn new(t: &'a FiniteSpectralTriple, n: usize) -> Self {
        let d_tilde = ComplexMatrix::identity(n * n).kron(t.d());
        let j = induced_j(t, n);
        Self { t, n, d_tilde, j }
    }

    pub fn dim(&self) -> usize {
        self.n * self.n * self.t.dim_h()
    }

    /// `D̃ = 1 ⊗ D`.
    pub fn d_tilde(&self) -> &ComplexMatrix {
        &self.d_tilde
    }

    pub fn j(&self) -> &AntilinearOp {
        &self.j
    }

    /// `π(x) ξ_ij = Σ_k π(x_ik) ξ_kj`.
    pub fn left(&self, x: &AlgebraElement) -> ComplexMatrix {
        let (n, d) = (self.n, self.t.dim_h());
        let mut out = ComplexMatrix::zeros(self.dim(), self.dim());
        for i in 0..n {
            for k in 0..n {
                let blk = self.t.represent_unchecked(&grid_entry(x, n, i, k));
                if blk.max_abs() == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.set_block((i * n + j) * d, (k * n + j) * d, &blk);
                }
            }
        }
        out
    }

    /// `π̂(x) ξ_ij = Σ_k x̂_jk ξ_ik`, equal to `J' π(x) J'⁻¹`.
    pub fn right(&self, x: &AlgebraElement) -> ComplexMatrix {
        let (n, d) = (self.n, self.t.dim_h());
        let mut out = ComplexMatrix::zeros(self.dim(), self.dim());
        for j in 0..n {
            for k in 0..n {
                let blk = self.t.hat(&self.t.represent_unchecked(&grid_entry(x, n, j, k)));
                if blk.max_abs() == 0.0 {
                    continue;
                }
                for i in 0..n {
                    out.set_block((i * n + j) * d, (i * n + k) * d, &blk);
                }
            }
        }
        out
    }

    fn left_pairs(&self, w: &UniversalOneForm) -> Vec<OperatorPair> {
        w.pairs.iter().map(|(a, b)| (self.left(a), self.left(b))).collect()
    }

    /// `Σ π(a)[T, π(b)]`.
    pub fn one_form(&self, w: &UniversalOneForm, t: &ComplexMatrix) -> ComplexMatrix {
        one_form_operator(&self.left_pairs(w), t)
    }

    /// `Σ π̂(a)[T, π̂(b)]`.
    pub fn one_form_hat(&self, w: &UniversalOneForm, t: &ComplexMatrix) -> ComplexMatrix {
        let pairs: Vec<OperatorPair> = self
            .left_pairs(w)
            .into_iter()
            .map(|(a, b)| (self.j.hat(&a), self.j.hat(&b)))
            .collect();
        one_form_operator(&pairs, t)
    }
}

/// `J' ξ_ij = J(ξ_ji)`.
pub fn induced_j(t: &FiniteSpectralTriple, n: usize) -> AntilinearOp {
    let d = t.dim_h();
    let m = t.j().matrix();
    let mut out = ComplexMatrix::zeros(n * n * d, n * n * d);
    for i in 0..n {
        for j in 0..n {
            out.set_block((i * n + j) * d, (j * n + i) * d, m);
        }
    }
    AntilinearOp::new(out).expect("block permutation of an invertible matrix")
}

pub fn induced_real_structure(m: &MoritaData, t: &FiniteSpectralTriple) -> AntilinearOp {
    induced_j(t, m.n)
}

/// `(1 ⊗_∇ D) ⊗_∇̄ 1`: first twist by `E`, then by `Ē`, each compression
/// followed by the connection terms.
pub fn twisted_dirac_left(t: &FiniteSpectralTriple, m: &MoritaData) -> ComplexMatrix {
    let ms = MoritaSpace::new(t, m.n);
    let p = ms.left(&m.e);
    let ph = ms.right(&m.e);
    let q = &ph * &p;
    let mut inner = ms.d_tilde.clone();
    if let Some(w) = &m.conn_form {
        let omega = ms.one_form(w, &ms.d_tilde);
        inner += &omega;
        inner += &ms.one_form_hat(w, &ms.d_tilde);
        inner += &ms.one_form_hat(w, &omega);
    }
    &(&q * &inner) * &q.adjoint()
}

/// `1 ⊗_∇ (D ⊗_∇̄ 1)`: the opposite order of the two twists.
pub fn twisted_dirac_right(t: &FiniteSpectralTriple, m: &MoritaData) -> ComplexMatrix {
    let ms = MoritaSpace::new(t, m.n);
    let p = ms.left(&m.e);
    let ph = ms.right(&m.e);
    let q = &p * &ph;
    let mut inner = ms.d_tilde.clone();
    if let Some(w) = &m.conn_form {
        let omega_hat = ms.one_form_hat(w, &ms.d_tilde);
        inner += &omega_hat;
        inner += &ms.one_form(w, &ms.d_tilde);
        inner += &ms.one_form(w, &omega_hat);
    }
    &(&q * &inner) * &q.adjoint()
}

/// `max_{i,l} ‖Σ_{j,k} π(e_ij)[D, π(e_jk)]π(e_kl)‖`, which vanishes because
/// `e δ(e) e = 0`.
pub fn check_idempotent_identity(t: &FiniteSpectralTriple, m: &MoritaData) -> f64 {
    let n = m.n;
    let reps: Vec<ComplexMatrix> = (0..n * n)
        .map(|k| t.represent_unchecked(&m.entry(k / n, k % n)))
        .collect();
    let e = |i: usize, j: usize| &reps[i * n + j];
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for l in 0..n {
            let mut acc = ComplexMatrix::zeros(t.dim_h(), t.dim_h());
            for j in 0..n {
                for k in 0..n {
                    acc += &(&(e(i, j) * &t.d().commutator_unchecked(e(j, k))) * e(k, l));
                }
            }
            worst = worst.max(acc.frob_norm());
        }
    }
    worst
}

/// Numerical summary of the twisted triple.
#[derive(Clone, Debug, Serialize)]
pub struct MoritaReport {
    pub n: usize,
    pub rank: usize,
    pub scale: f64,
    pub assoc_residual: f64,
    pub idempotent_residual: f64,
    pub corner_self_adjointness: f64,
    pub leakage: f64,
    pub zeroth_order_defect: f64,
    pub measured_eps_j: i8,
    pub j_square_residual: f64,
    pub measured_eps_d: i8,
    pub j_d_residual: f64,
}

/// Sign `s` minimizing `‖x − s·y‖` and the residual.
fn measured_sign(x: &ComplexMatrix, y: &ComplexMatrix) -> (i8, f64) {
    let plus = (x - y).frob_norm();
    let minus = (x + y).frob_norm();
    if plus <= minus {
        (1, plus)
    } else {
        (-1, minus)
    }
}

/// Runs every check on one module. `samples` random pairs of `Mₙ(A)` are used
/// for the zeroth-order condition of the induced triple.
pub fn morita_report(
    t: &FiniteSpectralTriple,
    m: &MoritaData,
    rng: &mut impl Rng,
    samples: usize,
) -> MoritaReport {
    let ms = MoritaSpace::new(t, m.n);
    let left = twisted_dirac_left(t, m);
    let right = twisted_dirac_right(t, m);
    let q = &ms.left(&m.e) * &ms.right(&m.e);
    let rank = q.trace().re.round().max(0.0) as usize;
    let scale = left.frob_norm().max(1.0);
    let id = ComplexMatrix::identity(ms.dim());
    let leakage = (&(&(&id - &q) * &ms.d_tilde) * &q).frob_norm();

    let big = AlgebraSpec::full(&matrix_sizes(m.n, t.algebra().summands())).expect("nonempty sizes");
    let mut zeroth: f64 = 0.0;
    for _ in 0..samples {
        let x = m.e.mul(&random_matrix_element(t.algebra(), m.n, rng)).mul(&m.e);
        let y = m.e.mul(&random_matrix_element(t.algebra(), m.n, rng)).mul(&m.e);
        debug_assert!(big.check_shape(&x).is_ok());
        let lx = ms.left(&x);
        let ry = ms.j.hat(&ms.left(&y).adjoint());
        zeroth = zeroth.max(lx.commutator_unchecked(&ry).frob_norm());
    }

    let j2 = ms.j.compose(&ms.j).expect("same dimension");
    let (measured_eps_j, j_square_residual) = measured_sign(&(&(&q * &j2) * &q), &q);
    let (measured_eps_d, j_d_residual) = measured_sign(&ms.j.hat(&left), &left);

    MoritaReport {
        n: m.n,
        rank,
        scale,
        assoc_residual: (&left - &right).frob_norm(),
        idempotent_residual: check_idempotent_identity(t, m),
        corner_self_adjointness: left.hermiticity_defect(),
        leakage,
        zeroth_order_defect: zeroth,
        measured_eps_j,
        j_square_residual,
        measured_eps_d,
        j_d_residual,
    }
}

/// Random element of `Mₙ(A)` with entries drawn from `spec`.
pub fn random_matrix_element(spec: &AlgebraSpec, n: usize, rng: &mut impl Rng) -> AlgebraElement {
    from_grid(n, spec.summands(), |_, _| spec.random_element(rng))
}

/// Spectral projection `χ(h > 0)` of a random self-adjoint `h ∈ Mₙ(A)`,
/// resampled while some eigenvalue lies within [`MIN_SPECTRAL_GAP`] of 0.
pub fn random_idempotent(spec: &AlgebraSpec, n: usize, rng: &mut impl Rng) -> AlgebraElement {
    loop {
        let x = random_matrix_element(spec, n, rng);
        let h = x.add(&x.star()).scale_real(0.5);
        let mut blocks = Vec::with_capacity(h.blocks.len());
        let mut ok = true;
        for b in &h.blocks {
            let (vals, vecs) = b.hermitian_eigh();
            if vals.iter().any(|v| v.abs() < MIN_SPECTRAL_GAP) {
                ok = false;
                break;
            }
            let mut p = ComplexMatrix::zeros(b.rows(), b.cols());
            for (k, &v) in vals.iter().enumerate() {
                if v > 0.0 {
                    let col = vecs.block(0, k, b.rows(), 1);
                    p += &(&col * &col.adjoint());
                }
            }
            blocks.push((&p + &p.adjoint()).scale_real(0.5));
        }
        if ok {
            return AlgebraElement::new(blocks);
        }
    }
}

/// Random self-adjoint one-form over `Mₙ(A)` with `k` pairs, compressed by `e`.
pub fn random_connection(
    spec: &AlgebraSpec,
    n: usize,
    e: &AlgebraElement,
    rng: &mut impl Rng,
    k: usize,
) -> UniversalOneForm {
    let pairs = (0..k)
        .map(|_| (random_matrix_element(spec, n, rng), random_matrix_element(spec, n, rng)))
        .collect();
    compress(e, &UniversalOneForm::new(pairs).self_adjoint_part())
}
