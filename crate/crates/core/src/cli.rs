//! Command-line front end.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::action::{
    full_vev, hessian_report, minimize_toy, scan_sigma, scan_x, sigma_vev, stabilizer, ActionError, StabilizerReport,
};
use crate::io::{load_config, load_model, load_pert, matrix_to_rows, to_json, write_csv, IoError, MatrixRows, ModelFile, RunConfig};
use crate::matrix::ComplexMatrix;
use crate::morita::{morita_report, random_connection, random_idempotent, MoritaData, MoritaError, MoritaReport};
use crate::optimize::MinimizeOptions;
use crate::perturbation::{fluctuate, semigroup_report, PertElement, PertError};
use crate::toy::{a_ev, build_toy, closed_dirac, extract_fields, FieldPoint, ToyError};
use crate::triple::{check_first_order, check_ko_signs, check_zeroth_order, AxiomReport, KoReport, TripleError};

#[derive(Debug, Parser)]
#[command(name = "innerfluc", version, about = "Inner fluctuations of finite real spectral triples")]
pub struct Cli {
    /// Model JSON; defaults to the built-in toy model with couplings from the config.
    #[arg(long, global = true, env = "INNERFLUC_MODEL")]
    pub model: Option<PathBuf>,
    /// Run configuration JSON.
    #[arg(long, global = true, env = "INNERFLUC_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, env = "INNERFLUC_SEED")]
    pub seed: Option<u64>,
    #[arg(long, global = true, env = "INNERFLUC_TOL")]
    pub tol: Option<f64>,
    /// Output file; stdout when absent.
    #[arg(long, global = true, env = "INNERFLUC_OUT")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Slice {
    /// `V(X = 0, σ₁, σ₂)`
    Sigma,
    /// `V(X, σ₁ = −1 + √w, σ₂ = 0)` over `(Re X, Im X)`
    X,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Order conditions and KO signs of a model.
    Check,
    /// Fluctuated Dirac operator for a perturbation (default: the unit).
    Fluctuate {
        #[arg(long)]
        pert: Option<PathBuf>,
    },
    /// CSV grid of the toy potential.
    PotentialScan {
        #[arg(long, value_enum, default_value_t = Slice::Sigma)]
        slice: Slice,
    },
    /// Multi-start minimization of the toy potential.
    Minimize {
        /// Keep X = 0 fixed.
        #[arg(long)]
        fix_x: bool,
    },
    /// Finite-difference Hessian at the σ-vacuum.
    Hessian,
    /// Unbroken symmetry at D = 0, the σ-vacuum and the full vacuum.
    Stabilizer,
    /// Associativity of inner fluctuations with Morita equivalence.
    MoritaCheck {
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Semigroup identities of perturbations on random samples.
    SemigroupVerify {
        #[arg(long, default_value_t = 50)]
        samples: usize,
    },
    /// Write the built-in toy model as JSON.
    ExportToy,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Triple(#[from] TripleError),
    #[error(transparent)]
    Pert(#[from] PertError),
    #[error(transparent)]
    Action(#[from] ActionError),
    #[error(transparent)]
    Morita(#[from] MoritaError),
    #[error(transparent)]
    Toy(#[from] ToyError),
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Serialize)]
pub struct CheckReport {
    pub zeroth_order: AxiomReport,
    pub first_order_full: AxiomReport,
    pub first_order_subalgebras: BTreeMap<String, AxiomReport>,
    pub ko_signs: KoReport,
    pub unmet_expectations: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct FieldReport {
    pub x: [f64; 2],
    pub v: [[f64; 2]; 2],
    /// `‖D' − D(X, v)‖_F`
    pub reconstruction_residual: f64,
}

#[derive(Debug, Serialize)]
pub struct FluctuateReport {
    pub d_prime: MatrixRows,
    pub self_adjointness_residual: f64,
    pub eigenvalues: Vec<f64>,
    pub fields: Option<FieldReport>,
}

#[derive(Debug, Serialize)]
pub struct StabilizerEntry {
    pub fields: FieldPoint,
    pub report: StabilizerReport,
}

#[derive(Debug, Serialize)]
pub struct MoritaSummary {
    pub tol: f64,
    pub max_assoc_relative: f64,
    pub max_idempotent_residual: f64,
    pub passed: bool,
    pub reports: Vec<MoritaReport>,
}

/// A command's output and whether its expectations held.
struct Output {
    text: String,
    ok: bool,
}

impl Output {
    fn json<T: Serialize>(value: &T, ok: bool) -> Self {
        Self { text: to_json(value), ok }
    }
}

fn check(model: &ModelFile, tol: f64) -> Result<Output, CliError> {
    let t = model.to_triple()?;
    let subs = model.subalgebra_specs()?;
    let zeroth_order = check_zeroth_order(&t, None, tol)?;
    let first_order_full = check_first_order(&t, None, tol)?;
    let mut first_order_subalgebras = BTreeMap::new();
    for (name, spec) in &subs {
        first_order_subalgebras.insert(name.clone(), check_first_order(&t, Some(spec), tol)?);
    }
    let ko_signs = check_ko_signs(&t, tol);
    let mut unmet = Vec::new();
    if let Some(e) = &model.expect {
        let mut want = |name: String, expected: Option<bool>, got: bool| {
            if expected.is_some_and(|x| x != got) {
                unmet.push(name);
            }
        };
        want("zeroth_order".into(), e.zeroth_order, zeroth_order.passed);
        want("first_order".into(), e.first_order, first_order_full.passed);
        want("ko_signs".into(), e.ko_signs, ko_signs.passed);
        for (name, &expected) in &e.first_order_subalgebras {
            match first_order_subalgebras.get(name) {
                Some(r) => want(format!("first_order_subalgebras.{name}"), Some(expected), r.passed),
                None => {
                    return Err(CliError::Usage(format!(
                        "expectation refers to unknown subalgebra `{name}`"
                    )))
                }
            }
        }
    }
    let ok = unmet.is_empty();
    Ok(Output::json(
        &CheckReport {
            zeroth_order,
            first_order_full,
            first_order_subalgebras,
            ko_signs,
            unmet_expectations: unmet,
        },
        ok,
    ))
}

fn fluctuate_cmd(model: &ModelFile, pert: Option<&PathBuf>, tol: f64) -> Result<Output, CliError> {
    let t = model.to_triple()?;
    let p = match pert {
        Some(path) => load_pert(path, t.algebra(), tol)?,
        None => PertElement::unit(t.algebra()),
    };
    let w = p.eta();
    let d = fluctuate(&t, &w)?;
    let fields = match model.toy_params {
        Some(tp) => {
            let f = extract_fields(&w)?;
            Some(FieldReport {
                x: [f.x.re, f.x.im],
                v: [[f.v1.re, f.v1.im], [f.v2.re, f.v2.im]],
                reconstruction_residual: (&d - &closed_dirac(&tp, &f)).frob_norm(),
            })
        }
        None => None,
    };
    Ok(Output::json(
        &FluctuateReport {
            d_prime: matrix_to_rows(&d),
            self_adjointness_residual: d.hermiticity_defect(),
            eigenvalues: d.hermitian_eigenvalues(),
            fields,
        },
        true,
    ))
}

fn morita_cmd(model: &ModelFile, cfg: &RunConfig, samples: usize) -> Result<Output, CliError> {
    let t = model.to_triple()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut reports = Vec::new();
    for k in 0..samples {
        let n = 1 + k % cfg.morita_max_n;
        let e = random_idempotent(t.algebra(), n, &mut rng);
        let conn = (k % 2 == 1).then(|| random_connection(t.algebra(), n, &e, &mut rng, 2));
        let m = MoritaData::new(&t, n, e, conn, cfg.tol)?;
        reports.push(morita_report(&t, &m, &mut rng, 4));
    }
    let max_assoc_relative = reports
        .iter()
        .map(|r| r.assoc_residual / r.scale)
        .fold(0.0, f64::max);
    let max_idempotent_residual = reports.iter().map(|r| r.idempotent_residual).fold(0.0, f64::max);
    let passed = max_assoc_relative <= cfg.tol && max_idempotent_residual <= cfg.tol;
    Ok(Output::json(
        &MoritaSummary {
            tol: cfg.tol,
            max_assoc_relative,
            max_idempotent_residual,
            passed,
            reports,
        },
        passed,
    ))
}

fn stabilizer_cmd(cfg: &RunConfig) -> Result<Output, CliError> {
    let (p, ap) = (cfg.toy_params(), cfg.action_params()?);
    let t = build_toy(&p);
    let ev = a_ev();
    let zero = FieldPoint::new(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
    let mut out = BTreeMap::new();
    for (name, f) in [("zero", zero), ("sigma_vev", sigma_vev(&p, &ap)), ("full_vev", full_vev(&p, &ap))] {
        let d = if name == "zero" {
            ComplexMatrix::zeros(t.dim_h(), t.dim_h())
        } else {
            closed_dirac(&p, &f)
        };
        out.insert(
            name,
            StabilizerEntry {
                fields: f,
                report: stabilizer(&t, &d, &ev)?,
            },
        );
    }
    Ok(Output::json(&out, true))
}

fn dispatch(cli: &Cli) -> Result<Output, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(tol) = cli.tol {
        cfg.tol = tol;
    }
    cfg.validate()?;
    let model = || -> Result<ModelFile, CliError> {
        match &cli.model {
            Some(path) => Ok(load_model(path)?),
            None => Ok(ModelFile::toy(&cfg.toy_params())),
        }
    };
    let toy_only = |name: &str| -> Result<(), CliError> {
        if cli.model.is_some() {
            return Err(CliError::Usage(format!(
                "`{name}` works on the built-in toy model; set couplings with --config"
            )));
        }
        Ok(())
    };
    match &cli.command {
        Command::Check => check(&model()?, cfg.tol),
        Command::Fluctuate { pert } => fluctuate_cmd(&model()?, pert.as_ref(), cfg.tol),
        Command::PotentialScan { slice } => {
            toy_only("potential-scan")?;
            let (p, ap) = (cfg.toy_params(), cfg.action_params()?);
            let rows = match slice {
                Slice::Sigma => scan_sigma(&p, &ap, &cfg.sigma_grid),
                Slice::X => scan_x(&p, &ap, &cfg.x_grid),
            };
            let mut buf = Vec::new();
            write_csv(&mut buf, &rows).map_err(IoError::from)?;
            Ok(Output {
                text: String::from_utf8(buf).expect("ascii"),
                ok: true,
            })
        }
        Command::Minimize { fix_x } => {
            toy_only("minimize")?;
            let opts = MinimizeOptions {
                starts: cfg.starts,
                seed: cfg.seed,
                fixed: [fix_x.then_some(0.0), None, None],
                ..MinimizeOptions::default()
            };
            let out = minimize_toy(&cfg.toy_params(), &cfg.action_params()?, &opts)?;
            Ok(Output::json(&out, true))
        }
        Command::Hessian => {
            toy_only("hessian")?;
            let r = hessian_report(&cfg.toy_params(), &cfg.action_params()?, cfg.hessian_step);
            Ok(Output::json(&r, true))
        }
        Command::Stabilizer => {
            toy_only("stabilizer")?;
            stabilizer_cmd(&cfg)
        }
        Command::MoritaCheck { samples } => morita_cmd(&model()?, &cfg, samples.unwrap_or(cfg.samples)),
        Command::SemigroupVerify { samples } => {
            let t = model()?.to_triple()?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let r = semigroup_report(&t, t.algebra(), &mut rng, *samples, 2)?;
            let ok = r.max_residual() <= cfg.tol;
            Ok(Output::json(&r, ok))
        }
        Command::ExportToy => {
            toy_only("export-toy")?;
            Ok(Output::json(&ModelFile::toy(&cfg.toy_params()), true))
        }
    }
}

/// Exit codes: 0 success, 1 an expectation failed, 2 invalid input.
pub fn run(cli: &Cli) -> ExitCode {
    match dispatch(cli) {
        Ok(out) => {
            let written = match &cli.out {
                Some(path) => std::fs::write(path, &out.text),
                None => std::io::stdout().lock().write_all(out.text.as_bytes()),
            };
            if let Err(e) = written {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            if out.ok {
                ExitCode::SUCCESS
            } else {
                eprintln!("expectation failed");
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

pub fn main() -> ExitCode {
    run(&Cli::parse())
}
