//! File formats: model JSON, run configuration, perturbation JSON and CSV grids.
//!
//! Complex numbers are `[re, im]` pairs and matrices are row-major nested
//! arrays of them.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{ActionError, ActionParams, Grid};
use crate::algebra::{AlgebraElement, AlgebraSpec, LinearConstraint};
use crate::matrix::{AntilinearOp, ComplexMatrix, MatrixError};
use crate::optimize::FD_STEP;
use crate::perturbation::{Pair, PertElement, PertError};
use crate::toy::{a_f, build_toy, ToyParams};
use crate::triple::{FiniteSpectralTriple, KoSigns, RepBlock, TripleError};

pub type MatrixRows = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("field `{field}`: {message}")]
    Field { field: String, message: String },
    #[error(transparent)]
    Write(#[from] std::io::Error),
}

impl IoError {
    fn field(field: impl Into<String>, message: impl ToString) -> Self {
        Self::Field {
            field: field.into(),
            message: message.to_string(),
        }
    }
}

pub fn matrix_to_rows(m: &ComplexMatrix) -> MatrixRows {
    (0..m.rows())
        .map(|r| m.row(r).iter().map(|z| [z.re, z.im]).collect())
        .collect()
}

pub fn matrix_from_rows(rows: &MatrixRows, field: &str) -> Result<ComplexMatrix, IoError> {
    let rows: Vec<Vec<Complex64>> = rows
        .iter()
        .map(|r| r.iter().map(|&[re, im]| Complex64::new(re, im)).collect())
        .collect();
    ComplexMatrix::from_rows(&rows).map_err(|e| IoError::field(field, e))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraSection {
    pub summands: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constraints: Vec<LinearConstraint>,
}

impl AlgebraSection {
    pub fn from_spec(spec: &AlgebraSpec) -> Self {
        Self {
            summands: spec.summands().to_vec(),
            constraints: spec.constraints().to_vec(),
        }
    }

    pub fn to_spec(&self, field: &str) -> Result<AlgebraSpec, IoError> {
        AlgebraSpec::new(self.summands.clone(), self.constraints.clone()).map_err(|e| IoError::field(field, e))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JSection {
    pub matrix: MatrixRows,
    #[serde(default = "antilinear")]
    pub note: String,
}

fn antilinear() -> String {
    "antilinear".into()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KoSection {
    #[serde(rename = "eps_J")]
    pub eps_j: i8,
    #[serde(rename = "eps_D")]
    pub eps_d: i8,
    pub eps_gamma: i8,
}

/// Outcomes a model declares for `check`. Absent entries are not checked.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectations {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeroth_order: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_order: Option<bool>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub first_order_subalgebras: BTreeMap<String, bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ko_signs: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub algebra: AlgebraSection,
    #[serde(rename = "dim_H")]
    pub dim_h: usize,
    pub rep_blocks: Vec<RepBlock>,
    #[serde(rename = "D")]
    pub d: MatrixRows,
    #[serde(rename = "J")]
    pub j: JSection,
    pub gamma: MatrixRows,
    pub ko_signs: KoSection,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub subalgebras: BTreeMap<String, AlgebraSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Expectations>,
    /// Present when the file describes the toy model; enables field reports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub toy_params: Option<ToyParams>,
}

fn triple_error_field(e: &TripleError) -> &'static str {
    match e {
        TripleError::Algebra(_) => "algebra",
        TripleError::OperatorShape { name, .. } => match *name {
            "D" => "D",
            "J" => "J.matrix",
            _ => "gamma",
        },
        TripleError::BadRepBlock { .. } | TripleError::Tiling(_) => "rep_blocks",
        TripleError::DiracNotSelfAdjoint(_) => "D",
        TripleError::GradingDirac(_) | TripleError::GradingAlgebra(_) | TripleError::BadGrading(_) => "gamma",
        TripleError::JSquare(_) => "J.matrix",
        TripleError::BadSign(_) => "ko_signs",
        _ => "model",
    }
}

impl ModelFile {
    pub fn from_triple(t: &FiniteSpectralTriple) -> Self {
        let s = t.signs();
        Self {
            algebra: AlgebraSection::from_spec(t.algebra()),
            dim_h: t.dim_h(),
            rep_blocks: t.rep_blocks().to_vec(),
            d: matrix_to_rows(t.d()),
            j: JSection {
                matrix: matrix_to_rows(t.j().matrix()),
                note: antilinear(),
            },
            gamma: matrix_to_rows(t.gamma()),
            ko_signs: KoSection {
                eps_j: s.eps_j,
                eps_d: s.eps_d,
                eps_gamma: s.eps_gamma,
            },
            subalgebras: BTreeMap::new(),
            expect: None,
            toy_params: None,
        }
    }

    /// The toy model with `A_F` as named subalgebra and the expected outcome
    /// of every check: first order over `A_ev` holds only when `k_y = 0`.
    pub fn toy(p: &ToyParams) -> Self {
        let mut m = Self::from_triple(&build_toy(p));
        m.subalgebras.insert("A_F".into(), AlgebraSection::from_spec(&a_f()));
        m.expect = Some(Expectations {
            zeroth_order: Some(true),
            first_order: Some(p.k_y == Complex64::new(0.0, 0.0)),
            first_order_subalgebras: BTreeMap::from([("A_F".into(), true)]),
            ko_signs: Some(true),
        });
        m.toy_params = Some(*p);
        m
    }

    pub fn to_triple(&self) -> Result<FiniteSpectralTriple, IoError> {
        if self.j.note != "antilinear" {
            return Err(IoError::field("J.note", format!("expected \"antilinear\", got {:?}", self.j.note)));
        }
        let algebra = self.algebra.to_spec("algebra")?;
        let d = matrix_from_rows(&self.d, "D")?;
        let j = AntilinearOp::new(matrix_from_rows(&self.j.matrix, "J.matrix")?)
            .map_err(|e: MatrixError| IoError::field("J.matrix", e))?;
        let gamma = matrix_from_rows(&self.gamma, "gamma")?;
        let k = self.ko_signs;
        let signs = KoSigns::new(k.eps_j, k.eps_d, k.eps_gamma).map_err(|e| IoError::field("ko_signs", e))?;
        FiniteSpectralTriple::new(algebra, self.dim_h, self.rep_blocks.clone(), d, j, gamma, signs)
            .map_err(|e| IoError::field(triple_error_field(&e), e))
    }

    pub fn subalgebra_specs(&self) -> Result<BTreeMap<String, AlgebraSpec>, IoError> {
        self.subalgebras
            .iter()
            .map(|(name, s)| Ok((name.clone(), s.to_spec(&format!("subalgebras.{name}"))?)))
            .collect()
    }
}

fn parse_json<T: DeserializeOwned>(text: &str, path: &str) -> Result<T, IoError> {
    serde_json::from_str(text).map_err(|e| IoError::Parse {
        path: path.into(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

fn read(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.display().to_string(),
        source,
    })
}

pub fn parse_model(text: &str, path: &str) -> Result<ModelFile, IoError> {
    parse_json(text, path)
}

pub fn load_model(path: &Path) -> Result<ModelFile, IoError> {
    parse_model(&read(path)?, &path.display().to_string())
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub k_x: Complex64,
    pub k_y: Complex64,
    pub f2: f64,
    pub f0: f64,
    pub lambda: f64,
    pub tol: f64,
    pub seed: u64,
    pub starts: usize,
    pub hessian_step: f64,
    /// `(σ₁, σ₂)` at `X = 0`.
    pub sigma_grid: Grid,
    /// `(Re X, Im X)` at the σ-vacuum.
    pub x_grid: Grid,
    pub samples: usize,
    pub morita_max_n: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            k_x: Complex64::new(1.0, 0.0),
            k_y: Complex64::new(1.0, 0.0),
            f2: 1.0,
            f0: 1.0,
            lambda: 1.0,
            tol: 1e-9,
            seed: 0,
            starts: 32,
            hessian_step: FD_STEP,
            sigma_grid: Grid {
                c1: [-2.5, 0.5],
                c2: [-1.5, 1.5],
                resolution: 301,
            },
            x_grid: Grid {
                c1: [-2.0, 2.0],
                c2: [-2.0, 2.0],
                resolution: 301,
            },
            samples: 20,
            morita_max_n: 3,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), IoError> {
        self.action_params()?;
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(IoError::field(name, format!("must be positive and finite, got {v}")))
            }
        };
        positive("tol", self.tol)?;
        positive("hessian_step", self.hessian_step)?;
        for (name, z) in [("k_x", self.k_x), ("k_y", self.k_y)] {
            if !(z.re.is_finite() && z.im.is_finite()) {
                return Err(IoError::field(name, "must be finite"));
            }
        }
        for (name, g) in [("sigma_grid", &self.sigma_grid), ("x_grid", &self.x_grid)] {
            if g.resolution < 2 {
                return Err(IoError::field(
                    format!("{name}.resolution"),
                    format!("must be at least 2, got {}", g.resolution),
                ));
            }
            for (axis, r) in [("c1", g.c1), ("c2", g.c2)] {
                if !(r[0].is_finite() && r[1].is_finite() && r[0] < r[1]) {
                    return Err(IoError::field(format!("{name}.{axis}"), format!("bad range {r:?}")));
                }
            }
        }
        if self.starts == 0 {
            return Err(IoError::field("starts", "must be at least 1"));
        }
        if self.morita_max_n == 0 {
            return Err(IoError::field("morita_max_n", "must be at least 1"));
        }
        Ok(())
    }

    pub fn toy_params(&self) -> ToyParams {
        ToyParams::new(self.k_x, self.k_y)
    }

    pub fn action_params(&self) -> Result<ActionParams, IoError> {
        ActionParams::new(self.f2, self.f0, self.lambda).map_err(|e| match e {
            ActionError::InvalidParam { name, .. } => IoError::field(name, e),
            other => IoError::field("config", other),
        })
    }
}

pub fn parse_config(text: &str, path: &str) -> Result<RunConfig, IoError> {
    let c: RunConfig = parse_json(text, path)?;
    c.validate()?;
    Ok(c)
}

pub fn load_config(path: &Path) -> Result<RunConfig, IoError> {
    parse_config(&read(path)?, &path.display().to_string())
}

/// `[[a_blocks, b_blocks], ...]`, one entry per pair `a ⊗ b`.
pub type PertFile = Vec<[Vec<MatrixRows>; 2]>;

fn element_to_blocks(a: &AlgebraElement) -> Vec<MatrixRows> {
    a.blocks.iter().map(matrix_to_rows).collect()
}

fn element_from_blocks(blocks: &[MatrixRows], field: &str) -> Result<AlgebraElement, IoError> {
    let blocks = blocks
        .iter()
        .enumerate()
        .map(|(s, b)| matrix_from_rows(b, &format!("{field}[{s}]")))
        .collect::<Result<_, _>>()?;
    Ok(AlgebraElement::new(blocks))
}

pub fn pert_to_file(p: &PertElement) -> PertFile {
    p.pairs()
        .iter()
        .map(|(a, b)| [element_to_blocks(a), element_to_blocks(b)])
        .collect()
}

pub fn pert_from_file(file: &PertFile, spec: &AlgebraSpec, tol: f64) -> Result<PertElement, IoError> {
    let pairs: Vec<Pair> = file
        .iter()
        .enumerate()
        .map(|(k, [a, b])| {
            Ok((
                element_from_blocks(a, &format!("[{k}][0]"))?,
                element_from_blocks(b, &format!("[{k}][1]"))?,
            ))
        })
        .collect::<Result<_, IoError>>()?;
    PertElement::new(spec, pairs, tol).map_err(|e: PertError| IoError::field("perturbation", e))
}

pub fn load_pert(path: &Path, spec: &AlgebraSpec, tol: f64) -> Result<PertElement, IoError> {
    let file: PertFile = parse_json(&read(path)?, &path.display().to_string())?;
    pert_from_file(&file, spec, tol)
}

/// Grid rows as CSV with header `coord1,coord2,V`.
pub fn write_csv(out: &mut impl Write, rows: &[[f64; 3]]) -> std::io::Result<()> {
    let mut s = String::with_capacity(rows.len() * 40 + 16);
    s.push_str("coord1,coord2,V\n");
    for r in rows {
        s.push_str(&format!("{:?},{:?},{:?}\n", r[0], r[1], r[2]));
    }
    out.write_all(s.as_bytes())
}

/// Reads a CSV produced by [`write_csv`].
pub fn read_csv(text: &str) -> Result<Vec<[f64; 3]>, IoError> {
    let mut lines = text.lines();
    if lines.next() != Some("coord1,coord2,V") {
        return Err(IoError::field("csv", "missing header"));
    }
    lines
        .enumerate()
        .map(|(i, l)| {
            let v: Vec<f64> = l
                .split(',')
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|e| IoError::field(format!("csv line {}", i + 2), e))?;
            <[f64; 3]>::try_from(v).map_err(|v| IoError::field(format!("csv line {}", i + 2), format!("{} columns", v.len())))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::c;
    use crate::perturbation::random_pert;
    use crate::toy::a_ev;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn toy_model_round_trip_is_bitwise() {
        let p = ToyParams::new(c(0.3, -1.7), c(1.0 / 3.0, 0.1));
        let m = ModelFile::toy(&p);
        let text = to_json(&m);
        let back = parse_model(&text, "toy.json").unwrap();
        assert_eq!(back, m);
        let t = back.to_triple().unwrap();
        let orig = build_toy(&p);
        assert_eq!(t.d(), orig.d());
        assert_eq!(t.j().matrix(), orig.j().matrix());
        assert_eq!(t.gamma(), orig.gamma());
        assert_eq!(ModelFile::from_triple(&t).d, m.d);
        assert!(text.contains("\"dim_H\"") && text.contains("\"eps_J\"") && text.contains("\"plain\""));
    }

    #[test]
    fn malformed_json_reports_position() {
        match parse_model("{\n  \"algebra\": {\"summands\": [2, 2]},\n  \"dim_H\": ,\n}", "bad.json") {
            Err(IoError::Parse { line, column, path, .. }) => {
                assert_eq!(path, "bad.json");
                assert_eq!(line, 3);
                assert!(column > 0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn field_diagnostics() {
        let base = ModelFile::toy(&ToyParams::unit());
        let field_of = |m: &ModelFile| match m.to_triple() {
            Err(IoError::Field { field, .. }) => field,
            other => panic!("{other:?}"),
        };
        let mut m = base.clone();
        m.d[0][1] = [5.0, 0.0];
        assert_eq!(field_of(&m), "D");
        let mut m = base.clone();
        m.gamma[0][0] = [2.0, 0.0];
        assert_eq!(field_of(&m), "gamma");
        let mut m = base.clone();
        m.ko_signs.eps_j = 3;
        assert_eq!(field_of(&m), "ko_signs");
        let mut m = base.clone();
        m.rep_blocks.pop();
        assert_eq!(field_of(&m), "rep_blocks");
        let mut m = base.clone();
        m.j.matrix.pop();
        assert_eq!(field_of(&m), "J.matrix");
        let mut m = base.clone();
        m.d[2].pop();
        assert_eq!(field_of(&m), "D");
        let mut m = base.clone();
        m.algebra.summands = vec![2, 0];
        assert_eq!(field_of(&m), "algebra");
        let mut m = base;
        m.j.note = "linear".into();
        assert_eq!(field_of(&m), "J.note");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(&to_json(&ModelFile::toy(&ToyParams::unit()))).unwrap();
        v["Dirac"] = serde_json::json!(1);
        assert!(matches!(parse_model(&v.to_string(), "x"), Err(IoError::Parse { .. })));
    }

    #[test]
    fn config_defaults_and_validation() {
        let c = parse_config("{}", "c.json").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.tol, 1e-9);
        let c = parse_config("{\"k_y\": [0.5, 0.25], \"seed\": 7}", "c.json").unwrap();
        assert_eq!(c.k_y, Complex64::new(0.5, 0.25));
        assert_eq!(c.seed, 7);
        for bad in [
            "{\"f0\": -1}",
            "{\"lambda\": 0}",
            "{\"tol\": 0}",
            "{\"sigma_grid\": {\"c1\": [0, 1], \"c2\": [0, 1], \"resolution\": 1}}",
            "{\"x_grid\": {\"c1\": [1, 0], \"c2\": [0, 1], \"resolution\": 5}}",
        ] {
            assert!(matches!(parse_config(bad, "c.json"), Err(IoError::Field { .. })), "{bad}");
        }
        assert!(matches!(parse_config("{\"k_z\": 1}", "c.json"), Err(IoError::Parse { .. })));
    }

    #[test]
    fn pert_round_trip() {
        let spec = a_ev();
        let p = random_pert(&spec, &mut ChaCha8Rng::seed_from_u64(3), 3);
        let text = serde_json::to_string(&pert_to_file(&p)).unwrap();
        let file: PertFile = serde_json::from_str(&text).unwrap();
        let back = pert_from_file(&file, &spec, 1e-9).unwrap();
        assert_eq!(back.pairs(), p.pairs());
        let unit = serde_json::to_string(&pert_to_file(&PertElement::unit(&spec))).unwrap();
        assert!(unit.starts_with("[[[[[[1.0,0.0],[0.0,0.0]],[[0.0,0.0],[1.0,0.0]]],"), "{unit}");
    }

    #[test]
    fn pert_file_rejects_non_normalized() {
        let spec = a_ev();
        let one = spec.one();
        let file = vec![[element_to_blocks(&one.scale_real(2.0)), element_to_blocks(&one)]];
        assert!(matches!(
            pert_from_file(&file, &spec, 1e-9),
            Err(IoError::Field { field, .. }) if field == "perturbation"
        ));
    }

    #[test]
    fn csv_format() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[[0.5, -1.0, 1e-20], [1.0, 2.0, -3.25]]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "coord1,coord2,V\n0.5,-1.0,1e-20\n1.0,2.0,-3.25\n");
        assert_eq!(read_csv(&s).unwrap(), vec![[0.5, -1.0, 1e-20], [1.0, 2.0, -3.25]]);
        let mut empty = Vec::new();
        write_csv(&mut empty, &[]).unwrap();
        assert_eq!(empty, b"coord1,coord2,V\n");
    }
}
