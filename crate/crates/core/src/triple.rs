//! Finite real spectral triples `(A, H, D; J, γ)` and their axiom checks.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{AlgebraElement, AlgebraError, AlgebraSpec};
use crate::matrix::{AntilinearOp, ComplexMatrix, MatrixError};

/// Relative tolerance used when validating a triple at construction.
pub const VALIDATION_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TripleError {
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("{name} has shape {got:?}, expected {dim}x{dim}")]
    OperatorShape {
        name: &'static str,
        dim: usize,
        got: (usize, usize),
    },
    #[error("representation block {index}: {reason}")]
    BadRepBlock { index: usize, reason: String },
    #[error("representation blocks do not tile H: {0}")]
    Tiling(String),
    #[error("D is not self-adjoint (defect {0:.3e})")]
    DiracNotSelfAdjoint(f64),
    #[error("grading is not a self-adjoint involution (defect {0:.3e})")]
    BadGrading(f64),
    #[error("grading does not anticommute with D (defect {0:.3e})")]
    GradingDirac(f64),
    #[error("grading does not commute with the algebra (defect {0:.3e})")]
    GradingAlgebra(f64),
    #[error("J² ≠ eps_J (defect {0:.3e})")]
    JSquare(f64),
    #[error("sign must be +1 or -1, got {0}")]
    BadSign(i8),
    #[error("subalgebra is not contained in the algebra of the triple")]
    NotContained,
}

/// How a summand block acts inside one tile of `H`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RepMode {
    Plain,
    Transpose,
    Conjugate,
    ConjugateTranspose,
}

impl RepMode {
    fn apply(self, m: &ComplexMatrix) -> ComplexMatrix {
        match self {
            RepMode::Plain => m.clone(),
            RepMode::Transpose => m.transpose(),
            RepMode::Conjugate => m.conj(),
            RepMode::ConjugateTranspose => m.adjoint(),
        }
    }
}

/// One tile of the representation: on `H[offset .. offset + L·n·R]` the
/// summand acts as `1_L ⊗ mode(a_i) ⊗ 1_R`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepBlock {
    pub summand_index: usize,
    pub left_mult_dim: usize,
    pub right_mult_dim: usize,
    pub mode: RepMode,
    pub offset: usize,
}

impl RepBlock {
    pub fn plain(summand_index: usize, left_mult_dim: usize, right_mult_dim: usize, offset: usize) -> Self {
        Self {
            summand_index,
            left_mult_dim,
            right_mult_dim,
            mode: RepMode::Plain,
            offset,
        }
    }

    fn len(&self, summands: &[usize]) -> usize {
        self.left_mult_dim * summands[self.summand_index] * self.right_mult_dim
    }
}

/// KO-dimension signs: `J² = eps_j`, `JD = eps_d·DJ`, `Jγ = eps_gamma·γJ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KoSigns {
    pub eps_j: i8,
    pub eps_d: i8,
    pub eps_gamma: i8,
}

impl KoSigns {
    pub fn new(eps_j: i8, eps_d: i8, eps_gamma: i8) -> Result<Self, TripleError> {
        for s in [eps_j, eps_d, eps_gamma] {
            if s != 1 && s != -1 {
                return Err(TripleError::BadSign(s));
            }
        }
        Ok(Self {
            eps_j,
            eps_d,
            eps_gamma,
        })
    }
}

#[derive(Clone, Debug)]
pub struct FiniteSpectralTriple {
    algebra: AlgebraSpec,
    dim_h: usize,
    rep: Vec<RepBlock>,
    d: ComplexMatrix,
    j: AntilinearOp,
    gamma: ComplexMatrix,
    signs: KoSigns,
}

impl FiniteSpectralTriple {
    /// Validates shapes, the tiling of `H`, self-adjointness of `D`, the
    /// grading axioms and `J² = eps_J`. The remaining KO signs and the
    /// order conditions are reported by the `check_*` functions instead of
    /// being enforced, since a model may declare them wrongly on purpose.
    pub fn new(
        algebra: AlgebraSpec,
        dim_h: usize,
        rep: Vec<RepBlock>,
        d: ComplexMatrix,
        j: AntilinearOp,
        gamma: ComplexMatrix,
        signs: KoSigns,
    ) -> Result<Self, TripleError> {
        KoSigns::new(signs.eps_j, signs.eps_d, signs.eps_gamma)?;
        for (name, m) in [("D", &d), ("J", j.matrix()), ("gamma", &gamma)] {
            if m.shape() != (dim_h, dim_h) {
                return Err(TripleError::OperatorShape {
                    name,
                    dim: dim_h,
                    got: m.shape(),
                });
            }
        }
        check_tiling(algebra.summands(), dim_h, &rep)?;
        let t = Self {
            algebra,
            dim_h,
            rep,
            d,
            j,
            gamma,
            signs,
        };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<(), TripleError> {
        let tol = VALIDATION_TOL;
        let scale_d = 1f64.max(self.d.frob_norm());
        let herm = self.d.hermiticity_defect();
        if herm > tol * scale_d {
            return Err(TripleError::DiracNotSelfAdjoint(herm));
        }
        let id = ComplexMatrix::identity(self.dim_h);
        let scale_g = 1f64.max(self.gamma.frob_norm());
        let g_def = (&(&self.gamma * &self.gamma) - &id).frob_norm() + self.gamma.hermiticity_defect();
        if g_def > tol * scale_g {
            return Err(TripleError::BadGrading(g_def));
        }
        let anti = (&(&self.gamma * &self.d) + &(&self.d * &self.gamma)).frob_norm();
        if anti > tol * scale_d {
            return Err(TripleError::GradingDirac(anti));
        }
        for a in self.algebra.spanning_set() {
            let pa = self.represent_unchecked(a);
            let def = self.gamma.commutator_unchecked(&pa).frob_norm();
            if def > tol * 1f64.max(pa.frob_norm()) {
                return Err(TripleError::GradingAlgebra(def));
            }
        }
        let jj = self.j.compose(&self.j)? - &id.scale_real(f64::from(self.signs.eps_j));
        if jj.frob_norm() > tol * (self.dim_h as f64).sqrt() {
            return Err(TripleError::JSquare(jj.frob_norm()));
        }
        Ok(())
    }

    pub fn algebra(&self) -> &AlgebraSpec {
        &self.algebra
    }

    pub fn dim_h(&self) -> usize {
        self.dim_h
    }

    pub fn rep_blocks(&self) -> &[RepBlock] {
        &self.rep
    }

    pub fn d(&self) -> &ComplexMatrix {
        &self.d
    }

    pub fn j(&self) -> &AntilinearOp {
        &self.j
    }

    pub fn gamma(&self) -> &ComplexMatrix {
        &self.gamma
    }

    pub fn signs(&self) -> KoSigns {
        self.signs
    }

    pub fn eps_d(&self) -> f64 {
        f64::from(self.signs.eps_d)
    }

    /// Same triple with `D` replaced; used to fluctuate an already
    /// fluctuated operator.
    pub fn with_dirac(&self, d: ComplexMatrix) -> Result<Self, TripleError> {
        Self::new(
            self.algebra.clone(),
            self.dim_h,
            self.rep.clone(),
            d,
            self.j.clone(),
            self.gamma.clone(),
            self.signs,
        )
    }

    /// Same triple with the acting algebra replaced by a compatible one.
    pub fn with_algebra(&self, algebra: AlgebraSpec) -> Result<Self, TripleError> {
        if !algebra.compatible_with(&self.algebra) {
            return Err(AlgebraError::Incompatible {
                left: self.algebra.summands().to_vec(),
                right: algebra.summands().to_vec(),
            }
            .into());
        }
        Self::new(
            algebra,
            self.dim_h,
            self.rep.clone(),
            self.d.clone(),
            self.j.clone(),
            self.gamma.clone(),
            self.signs,
        )
    }

    /// `T̂ = J T J⁻¹`.
    pub fn hat(&self, t: &ComplexMatrix) -> ComplexMatrix {
        self.j.hat(t)
    }

    /// `π(a)`. The representation is defined on the ambient `⊕ M_{n_i}`, so
    /// only the block shapes are checked here.
    pub fn represent(&self, a: &AlgebraElement) -> Result<ComplexMatrix, TripleError> {
        self.algebra.check_shape(a)?;
        Ok(self.represent_unchecked(a))
    }

    pub(crate) fn represent_unchecked(&self, a: &AlgebraElement) -> ComplexMatrix {
        let sizes = self.algebra.summands();
        let mut out = ComplexMatrix::zeros(self.dim_h, self.dim_h);
        for blk in &self.rep {
            let n = sizes[blk.summand_index];
            let m = blk.mode.apply(&a.blocks[blk.summand_index]);
            let r = blk.right_mult_dim;
            for l in 0..blk.left_mult_dim {
                for i in 0..n {
                    for j in 0..n {
                        let z = m[(i, j)];
                        if z.re == 0.0 && z.im == 0.0 {
                            continue;
                        }
                        for k in 0..r {
                            let row = blk.offset + (l * n + i) * r + k;
                            let col = blk.offset + (l * n + j) * r + k;
                            out[(row, col)] = z;
                        }
                    }
                }
            }
        }
        out
    }

    /// `π°(a) = J π(a)* J⁻¹`.
    pub fn represent_opposite(&self, a: &AlgebraElement) -> Result<ComplexMatrix, TripleError> {
        Ok(self.hat(&self.represent(a)?.adjoint()))
    }
}

fn check_tiling(summands: &[usize], dim_h: usize, rep: &[RepBlock]) -> Result<(), TripleError> {
    for (index, b) in rep.iter().enumerate() {
        if b.summand_index >= summands.len() {
            return Err(TripleError::BadRepBlock {
                index,
                reason: format!("summand index {} out of range", b.summand_index),
            });
        }
        if b.left_mult_dim == 0 || b.right_mult_dim == 0 {
            return Err(TripleError::BadRepBlock {
                index,
                reason: "multiplicities must be positive".into(),
            });
        }
    }
    let mut spans: Vec<(usize, usize)> = rep.iter().map(|b| (b.offset, b.offset + b.len(summands))).collect();
    spans.sort_unstable();
    let mut cursor = 0;
    for (start, end) in spans {
        if start != cursor {
            return Err(TripleError::Tiling(if start < cursor {
                format!("overlap at position {start}")
            } else {
                format!("gap between {cursor} and {start}")
            }));
        }
        cursor = end;
    }
    if cursor != dim_h {
        return Err(TripleError::Tiling(format!("blocks cover {cursor} of {dim_h} dimensions")));
    }
    Ok(())
}

/// Outcome of a bilinear axiom check over pairs of spanning elements.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub max_defect: f64,
    /// Indices into the spanning set of the worst pair; lowest index wins ties.
    pub worst_pair: Option<(usize, usize)>,
    pub tol: f64,
    pub passed: bool,
}

fn pairwise_report(n: usize, tol: f64, mut defect: impl FnMut(usize, usize) -> f64) -> AxiomReport {
    let mut max_defect = 0.0;
    let mut worst_pair = None;
    for i in 0..n {
        for k in 0..n {
            let d = defect(i, k);
            if d > max_defect {
                max_defect = d;
                worst_pair = Some((i, k));
            }
        }
    }
    AxiomReport {
        max_defect,
        worst_pair,
        tol,
        passed: max_defect <= tol,
    }
}

/// `max ‖[π(a), π°(b)]‖_F` over spanning pairs of `over` (default: the
/// triple's algebra). `over` only needs the same summand structure, since
/// the representation is defined on the ambient algebra.
pub fn check_zeroth_order(
    t: &FiniteSpectralTriple,
    over: Option<&AlgebraSpec>,
    tol: f64,
) -> Result<AxiomReport, TripleError> {
    let spec = over.unwrap_or(&t.algebra);
    if !spec.compatible_with(&t.algebra) {
        return Err(AlgebraError::Incompatible {
            left: t.algebra.summands().to_vec(),
            right: spec.summands().to_vec(),
        }
        .into());
    }
    let elems = spec.spanning_set();
    let left: Vec<ComplexMatrix> = elems.iter().map(|a| t.represent_unchecked(a)).collect();
    let right: Vec<ComplexMatrix> = elems
        .iter()
        .map(|a| t.hat(&t.represent_unchecked(a).adjoint()))
        .collect();
    Ok(pairwise_report(elems.len(), tol, |i, k| {
        left[i].commutator_unchecked(&right[k]).frob_norm()
    }))
}

/// `max ‖[[D, π(a)], π°(b)]‖_F` over spanning pairs of `sub` (default: the
/// triple's algebra), which must be contained in the triple's algebra.
pub fn check_first_order(
    t: &FiniteSpectralTriple,
    sub: Option<&AlgebraSpec>,
    tol: f64,
) -> Result<AxiomReport, TripleError> {
    let spec = sub.unwrap_or(&t.algebra);
    if !spec.is_subalgebra_of(&t.algebra, VALIDATION_TOL) {
        return Err(TripleError::NotContained);
    }
    let elems = spec.spanning_set();
    let left: Vec<ComplexMatrix> = elems
        .iter()
        .map(|a| t.d.commutator_unchecked(&t.represent_unchecked(a)))
        .collect();
    let right: Vec<ComplexMatrix> = elems
        .iter()
        .map(|a| t.hat(&t.represent_unchecked(a).adjoint()))
        .collect();
    Ok(pairwise_report(elems.len(), tol, |i, k| {
        left[i].commutator_unchecked(&right[k]).frob_norm()
    }))
}

/// Residuals of the declared KO signs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KoReport {
    pub declared: KoSigns,
    /// `‖J² − eps_J‖`
    pub j_squared: f64,
    /// `‖JD − eps_D·DJ‖`
    pub j_d: f64,
    /// `‖Jγ − eps_gamma·γJ‖`
    pub j_gamma: f64,
    pub tol: f64,
    pub passed: bool,
}

pub fn check_ko_signs(t: &FiniteSpectralTriple, tol: f64) -> KoReport {
    let m = t.j.matrix();
    let s = t.signs;
    let id = ComplexMatrix::identity(t.dim_h);
    let j_squared = (&(m * &m.conj()) - &id.scale_real(f64::from(s.eps_j))).frob_norm();
    // Matrix parts of the antilinear maps JT (= m·conj(T)) and TJ (= T·m).
    let j_d = (&(m * &t.d.conj()) - &(&t.d * m).scale_real(f64::from(s.eps_d))).frob_norm();
    let j_gamma = (&(m * &t.gamma.conj()) - &(&t.gamma * m).scale_real(f64::from(s.eps_gamma))).frob_norm();
    let passed = j_squared <= tol && j_d <= tol && j_gamma <= tol;
    KoReport {
        declared: s,
        j_squared,
        j_d,
        j_gamma,
        tol,
        passed,
    }
}

/// Complex spanning set of an algebra description.
pub fn spanning_set(spec: &AlgebraSpec) -> Vec<AlgebraElement> {
    spec.spanning_set().to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{ONE, ZERO};

    /// `C²` with the diagonal algebra `C ⊕ C`, `J` = complex conjugation.
    fn commutative_triple(d: ComplexMatrix) -> FiniteSpectralTriple {
        FiniteSpectralTriple::new(
            AlgebraSpec::full(&[1, 1]).unwrap(),
            2,
            vec![RepBlock::plain(0, 1, 1, 0), RepBlock::plain(1, 1, 1, 1)],
            d,
            AntilinearOp::conjugation(2),
            ComplexMatrix::diag(&[ONE, -ONE]),
            KoSigns::new(1, 1, 1).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn commutative_triple_checks() {
        let d = ComplexMatrix::from_real(2, 2, &[0.0, 2.0, 2.0, 0.0]).unwrap();
        let t = commutative_triple(d);
        let z = check_zeroth_order(&t, None, 1e-12).unwrap();
        assert!(z.passed && z.max_defect == 0.0 && z.worst_pair.is_none());
        // The two-point space with J = conjugation fails the first-order
        // condition as soon as D ≠ 0.
        let fo = check_first_order(&t, None, 1e-12).unwrap();
        assert!(!fo.passed && (fo.max_defect - 2.0 * 2f64.sqrt()).abs() < 1e-12, "{fo:?}");
        let ko = check_ko_signs(&t, 1e-12);
        assert!(ko.passed, "{ko:?}");
    }

    #[test]
    fn unit_represents_identity() {
        let t = commutative_triple(ComplexMatrix::zeros(2, 2));
        let one = t.algebra().one();
        assert_eq!(t.represent(&one).unwrap(), ComplexMatrix::identity(2));
        assert_eq!(t.represent_opposite(&one).unwrap(), ComplexMatrix::identity(2));
    }

    #[test]
    fn construction_rejects_broken_data() {
        let alg = AlgebraSpec::full(&[1, 1]).unwrap();
        let rep = vec![RepBlock::plain(0, 1, 1, 0), RepBlock::plain(1, 1, 1, 1)];
        let gamma = ComplexMatrix::diag(&[ONE, -ONE]);
        let signs = KoSigns::new(1, 1, 1).unwrap();
        let j = AntilinearOp::conjugation(2);

        let not_sa = ComplexMatrix::from_rows(&[vec![ZERO, ONE], vec![ZERO, ZERO]]).unwrap();
        let err = FiniteSpectralTriple::new(alg.clone(), 2, rep.clone(), not_sa, j.clone(), gamma.clone(), signs);
        assert!(matches!(err, Err(TripleError::DiracNotSelfAdjoint(_))));

        let diag_d = ComplexMatrix::diag(&[ONE, ONE]);
        let err = FiniteSpectralTriple::new(alg.clone(), 2, rep.clone(), diag_d, j.clone(), gamma.clone(), signs);
        assert!(matches!(err, Err(TripleError::GradingDirac(_))));

        let gap = vec![RepBlock::plain(0, 1, 1, 0), RepBlock::plain(1, 1, 1, 2)];
        let err = FiniteSpectralTriple::new(
            alg.clone(),
            3,
            gap,
            ComplexMatrix::zeros(3, 3),
            AntilinearOp::conjugation(3),
            ComplexMatrix::identity(3),
            signs,
        );
        assert!(matches!(err, Err(TripleError::Tiling(_))));

        let bad_j = AntilinearOp::new(ComplexMatrix::from_rows(&[vec![ZERO, ONE], vec![-ONE, ZERO]]).unwrap()).unwrap();
        let err = FiniteSpectralTriple::new(alg, 2, rep, ComplexMatrix::zeros(2, 2), bad_j, gamma, signs);
        assert!(matches!(err, Err(TripleError::JSquare(_))));

        assert!(matches!(KoSigns::new(1, 0, 1), Err(TripleError::BadSign(0))));
    }

    #[test]
    fn plain_conjugation_with_real_symmetric_d_passes_ko_check() {
        let d = ComplexMatrix::from_real(2, 2, &[0.0, 1.5, 1.5, 0.0]).unwrap();
        let t = FiniteSpectralTriple::new(
            AlgebraSpec::full(&[1, 1]).unwrap(),
            2,
            vec![RepBlock::plain(0, 1, 1, 0), RepBlock::plain(1, 1, 1, 1)],
            d,
            AntilinearOp::conjugation(2),
            ComplexMatrix::identity(2).scale_real(1.0),
            KoSigns::new(1, 1, 1).unwrap(),
        );
        // γ = I cannot anticommute with a nonzero D; use D = 0 for that case.
        assert!(t.is_err());
        let t = FiniteSpectralTriple::new(
            AlgebraSpec::full(&[1, 1]).unwrap(),
            2,
            vec![RepBlock::plain(0, 1, 1, 0), RepBlock::plain(1, 1, 1, 1)],
            ComplexMatrix::zeros(2, 2),
            AntilinearOp::conjugation(2),
            ComplexMatrix::identity(2),
            KoSigns::new(1, 1, 1).unwrap(),
        )
        .unwrap();
        assert!(check_ko_signs(&t, 1e-12).passed);
    }
}
