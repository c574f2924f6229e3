//! `ppi`: batch front end for the ppi-core toolkit.
//!
//! Every command prints one JSON report on stdout (and to `--json-out` when
//! given). Exit status is 0 when the command succeeds, 1 when a mathematical
//! check fails, and 2 for usage, I/O and parse errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use ppi_core::beurling::{factor_invariant_jk, verify_factorization};
use ppi_core::lattice::{
    chain_subspace, enumerate_admissible_chains, is_hyperinvariant, is_invariant, is_reducing,
    FINITE_SUPPORT_CONVENTION,
};
use ppi_core::numkit::{Matrix, MatrixJson, Subspace, SubspaceJson, Tol};
use ppi_core::pisom::{hw_decompose, is_partial_isometry, is_power_partial_isometry};
use ppi_core::selftest::{run_criterion_at, Scale, CRITERIA, DEFAULT_DEGREE, MIN_DEGREE};
use ppi_core::Error;

/// Largest accepted matrix side.
const MAX_DIM: usize = 2000;

const SCHEMA: u32 = 1;

#[derive(Parser, Debug)]
#[command(name = "ppi", version, about = "Power partial isometries: checks, decompositions and subspace lattices")]
struct Cli {
    /// Relative singular-value cutoff for numerical rank.
    #[arg(long, global = true, env = "PPI_TOL_RANK", default_value_t = 1e-10)]
    tol_rank: f64,

    /// Absolute bound on residuals.
    #[arg(long, global = true, env = "PPI_TOL_RESIDUAL", default_value_t = 1e-8)]
    tol_residual: f64,

    /// Seed for randomized commands.
    #[arg(long, global = true, env = "PPI_SEED", default_value_t = 42)]
    seed: u64,

    /// Truncation degree of Hardy-space computations.
    #[arg(long, global = true, env = "PPI_DEGREE", default_value_t = DEFAULT_DEGREE)]
    degree: usize,

    /// Also write the report to this file.
    #[arg(long, global = true, env = "PPI_JSON_OUT")]
    json_out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Partial-isometry criteria and power test for a square matrix.
    Analyze {
        /// Matrix JSON file.
        matrix: PathBuf,
    },
    /// Canonical decomposition into a unitary part and truncated shifts.
    Decompose {
        matrix: PathBuf,
        /// Include the conjugating unitary in the report.
        #[arg(long)]
        with_conjugator: bool,
    },
    /// Invariance, reducing or hyperinvariance test of a subspace.
    CheckSubspace {
        matrix: PathBuf,
        /// Subspace JSON file.
        subspace: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Invariant)]
        mode: Mode,
    },
    /// Inner factorization of a subspace of C^e ⊗ C^k invariant under J_k.
    Factorize {
        subspace: PathBuf,
        #[arg(long)]
        coeff_dim: usize,
        #[arg(long)]
        k: usize,
    },
    /// Admissible chains of a sum of truncated shifts.
    Lattice {
        /// Parts as `k:m,k:m` (index and multiplicity) or a JSON list `[[k, m], ...]`.
        parts: String,
    },
    /// Seeded acceptance suite.
    Selftest {
        #[arg(long, value_enum, default_value_t = ScaleArg::Desk)]
        scale: ScaleArg,
        /// Run only this criterion.
        #[arg(long)]
        criterion: Option<u32>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Invariant,
    Reducing,
    Hyperinvariant,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScaleArg {
    Smoke,
    Desk,
}

/// Failure of a command: usage problems map to exit 2, the rest to 1.
enum Failure {
    Usage(String),
    Math(Report, String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn is_usage(e: &Error) -> bool {
    matches!(
        e,
        Error::NonFinite
            | Error::DimMismatch { .. }
            | Error::NotSquare { .. }
            | Error::BadTolerance(_)
            | Error::ShapeMismatch(_)
            | Error::Parse(_)
            | Error::BadSpec(_)
            | Error::BadDegree { .. }
    )
}

/// Versioned report; maps are ordered so output is byte-stable.
struct Report {
    command: &'static str,
    seed: u64,
    inputs: Map<String, Value>,
    verdicts: Map<String, Value>,
    residuals: Map<String, Value>,
    details: Map<String, Value>,
    error: Option<String>,
}

impl Report {
    fn new(command: &'static str, ctx: &Context) -> Self {
        let mut inputs = Map::new();
        inputs.insert("tol_rank".into(), json!(ctx.tol.rank_rel));
        inputs.insert("tol_residual".into(), json!(ctx.tol.residual_abs));
        Report {
            command,
            seed: ctx.seed,
            inputs,
            verdicts: Map::new(),
            residuals: Map::new(),
            details: Map::new(),
            error: None,
        }
    }

    fn input(&mut self, key: &str, v: Value) {
        self.inputs.insert(key.into(), v);
    }

    fn verdict(&mut self, key: &str, v: bool) {
        self.verdicts.insert(key.into(), json!(v));
    }

    fn residual(&mut self, key: &str, v: f64) {
        self.residuals.insert(key.into(), json!(v));
    }

    fn detail(&mut self, key: &str, v: Value) {
        self.details.insert(key.into(), v);
    }

    /// Turns a core error into either a usage failure or a failed report.
    fn fail(mut self, e: Error) -> Failure {
        if is_usage(&e) {
            return Failure::Usage(e.to_string());
        }
        let msg = e.to_string();
        self.error = Some(msg.clone());
        Failure::Math(self, msg)
    }

    fn to_json(&self) -> Value {
        let mut out = Map::new();
        out.insert("schema".into(), json!(SCHEMA));
        out.insert("command".into(), json!(self.command));
        out.insert("seed".into(), json!(self.seed));
        out.insert("inputs".into(), Value::Object(self.inputs.clone()));
        out.insert("verdicts".into(), Value::Object(self.verdicts.clone()));
        out.insert("residuals".into(), Value::Object(self.residuals.clone()));
        out.insert("details".into(), Value::Object(self.details.clone()));
        if let Some(e) = &self.error {
            out.insert("error".into(), json!(e));
        }
        Value::Object(out)
    }
}

struct Context {
    tol: Tol,
    seed: u64,
    degree: usize,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("cannot parse {}: {e}", path.display())))
}

fn guard(rows: usize, cols: usize, what: &str) -> Result<(), Failure> {
    if rows > MAX_DIM || cols > MAX_DIM {
        return Err(Failure::Usage(format!(
            "{what} is {rows}x{cols}; inputs above {MAX_DIM}x{MAX_DIM} are rejected"
        )));
    }
    Ok(())
}

fn read_matrix(path: &Path) -> Result<Matrix, Failure> {
    let m: MatrixJson = read_json(path)?;
    guard(m.rows, m.cols, "matrix")?;
    Ok(m.to_matrix()?)
}

fn read_subspace(path: &Path, tol: Tol) -> Result<Subspace, Failure> {
    let s: SubspaceJson = read_json(path)?;
    guard(s.ambient_dim, s.basis.cols, "subspace basis")?;
    Ok(s.to_subspace(tol)?)
}

fn path_value(p: &Path) -> Value {
    json!(p.display().to_string())
}

fn analyze(ctx: &Context, path: &Path) -> Result<Report, Failure> {
    let t = read_matrix(path)?;
    let mut rep = Report::new("analyze", ctx);
    rep.input("matrix", path_value(path));
    rep.input("dim", json!(t.nrows()));
    let pi = match is_partial_isometry(&t, ctx.tol) {
        Ok(pi) => pi,
        Err(e) => return Err(rep.fail(e)),
    };
    let power = match is_power_partial_isometry(&t, ctx.tol) {
        Ok(p) => p,
        Err(e) => return Err(rep.fail(e)),
    };
    rep.verdict("is_pi", pi.is_pi);
    rep.verdict("is_ppi", power.is_ppi);
    rep.verdict("criteria_agree", pi.verdicts_agree());
    for (name, r) in pi.residuals.named() {
        rep.residual(name, r);
    }
    rep.detail("first_fail", json!(power.first_fail));
    rep.detail("power_residuals", json!(power.residuals));
    Ok(rep)
}

fn decompose(ctx: &Context, path: &Path, with_conjugator: bool) -> Result<Report, Failure> {
    let t = read_matrix(path)?;
    let mut rep = Report::new("decompose", ctx);
    rep.input("matrix", path_value(path));
    rep.input("dim", json!(t.nrows()));
    match hw_decompose(&t, ctx.tol) {
        Ok(dec) => {
            rep.verdict("is_ppi", true);
            rep.residual("reassembly", dec.residual);
            let js = serde_json::to_value(dec.to_json(with_conjugator)).expect("serializable");
            rep.detail("decomposition", js);
            Ok(rep)
        }
        Err(e) => {
            rep.verdict("is_ppi", false);
            Err(rep.fail(e))
        }
    }
}

fn check_subspace(ctx: &Context, mpath: &Path, spath: &Path, mode: Mode) -> Result<Report, Failure> {
    let t = read_matrix(mpath)?;
    let m = read_subspace(spath, ctx.tol)?;
    let mut rep = Report::new("check-subspace", ctx);
    rep.input("matrix", path_value(mpath));
    rep.input("subspace", path_value(spath));
    rep.input("dim", json!(t.nrows()));
    rep.input("subspace_dim", json!(m.dim()));
    let outcome = match mode {
        Mode::Invariant => {
            rep.input("mode", json!("invariant"));
            is_invariant(&m, &t, ctx.tol).map(|r| {
                rep.residual("invariance", r.residual);
                ("invariant", r.invariant)
            })
        }
        Mode::Reducing => {
            rep.input("mode", json!("reducing"));
            is_reducing(&m, &t, ctx.tol).map(|r| {
                rep.residual("invariance", r.residual);
                rep.residual("adjoint_invariance", r.adjoint_residual);
                ("reducing", r.reducing)
            })
        }
        Mode::Hyperinvariant => {
            rep.input("mode", json!("hyperinvariant"));
            is_hyperinvariant(&m, &t, ctx.tol).map(|r| {
                rep.residual("worst_commutant", r.worst_residual);
                rep.detail("commutant_basis_size", json!(r.basis_size));
                if !r.hyperinvariant {
                    rep.detail("witness_index", json!(r.witness_index));
                    let w = r.witness.as_ref().map(MatrixJson::from_matrix);
                    rep.detail("witness", serde_json::to_value(w).expect("serializable"));
                }
                ("hyperinvariant", r.hyperinvariant)
            })
        }
    };
    match outcome {
        Ok((name, ok)) => {
            rep.verdict(name, ok);
            if ok {
                Ok(rep)
            } else {
                Err(Failure::Math(rep, format!("subspace is not {name}")))
            }
        }
        Err(e) => Err(rep.fail(e)),
    }
}

fn factorize(ctx: &Context, path: &Path, coeff_dim: usize, k: usize) -> Result<Report, Failure> {
    let m = read_subspace(path, ctx.tol)?;
    let mut rep = Report::new("factorize", ctx);
    rep.input("subspace", path_value(path));
    rep.input("coeff_dim", json!(coeff_dim));
    rep.input("k", json!(k));
    let f = match factor_invariant_jk(&m, coeff_dim, k, ctx.tol) {
        Ok(f) => f,
        Err(e) => return Err(rep.fail(e)),
    };
    let res = verify_factorization(&f, &m, ctx.tol);
    let passed = res.passed(ctx.tol);
    rep.verdict("passed", passed);
    rep.verdict("phi_analytic", res.phi_analytic);
    rep.residual("theta_inner", res.theta_inner);
    rep.residual("phi_inner", res.phi_inner);
    rep.residual("product", res.product);
    rep.residual("reconstruction_gap", res.gap);
    rep.residual("reconstruction_invariance", res.reconstruction_invariance);
    let js = serde_json::to_value(f.to_json(Some(res))).expect("serializable");
    rep.detail("factorization", js);
    if passed {
        Ok(rep)
    } else {
        Err(Failure::Math(rep, "factorization failed verification".into()))
    }
}

fn parse_parts(text: &str) -> Result<Vec<(usize, usize)>, Failure> {
    let text = text.trim();
    if text.starts_with('[') {
        return serde_json::from_str(text).map_err(|e| Failure::Usage(format!("cannot parse parts: {e}")));
    }
    text.split(',')
        .map(|item| {
            let (k, m) = item
                .split_once(':')
                .ok_or_else(|| Failure::Usage(format!("part `{item}` is not of the form k:m")))?;
            let num = |s: &str| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| Failure::Usage(format!("`{s}` in part `{item}` is not a nonnegative integer")))
            };
            Ok((num(k)?, num(m)?))
        })
        .collect()
}

fn lattice(ctx: &Context, text: &str) -> Result<Report, Failure> {
    let mut parts = parse_parts(text)?;
    parts.sort_unstable();
    let mut rep = Report::new("lattice", ctx);
    rep.input("parts", json!(parts));
    let chains = enumerate_admissible_chains(&parts)?;
    // Parts with multiplicity zero carry no kernel order.
    let present: Vec<(usize, usize)> = parts.iter().copied().filter(|&(_, m)| m > 0).collect();
    rep.detail("chain_parts", json!(present));
    let listed: Vec<Value> = chains
        .iter()
        .map(|c| {
            json!({
                "values": c.values,
                "dim": chain_subspace(c).dim(),
            })
        })
        .collect();
    rep.detail("chains", Value::Array(listed));
    rep.detail("count", json!(chains.len()));
    rep.detail("convention", json!(FINITE_SUPPORT_CONVENTION));
    Ok(rep)
}

fn selftest(ctx: &Context, scale: ScaleArg, criterion: Option<u32>) -> Result<Report, Failure> {
    let (scale, scale_name) = match scale {
        ScaleArg::Smoke => (Scale::Smoke, "smoke"),
        ScaleArg::Desk => (Scale::Desk, "desk"),
    };
    if ctx.degree < MIN_DEGREE {
        return Err(Failure::Usage(format!("selftest needs --degree of at least {MIN_DEGREE}")));
    }
    let ids: Vec<u32> = match criterion {
        Some(id) if CRITERIA.iter().any(|&(c, _)| c == id) => vec![id],
        Some(id) => return Err(Failure::Usage(format!("unknown criterion {id}; valid ids are 1 to {}", CRITERIA.len()))),
        None => CRITERIA.iter().map(|&(id, _)| id).collect(),
    };
    let mut rep = Report::new("selftest", ctx);
    rep.input("scale", json!(scale_name));
    rep.input("degree", json!(ctx.degree));
    let mut all = true;
    let mut rows = Vec::new();
    for id in ids {
        let out = run_criterion_at(id, ctx.seed, scale, ctx.degree).expect("known criterion");
        eprintln!("{out}");
        all &= out.passed;
        rep.verdict(&format!("c{:02}_{}", out.id, out.name), out.passed);
        rows.push(json!({
            "id": out.id,
            "name": out.name,
            "passed": out.passed,
            "samples": out.samples,
            "worst_residual": out.worst_residual,
            "failures": out.failures,
        }));
    }
    rep.verdict("passed", all);
    rep.detail("criteria", Value::Array(rows));
    if all {
        Ok(rep)
    } else {
        Err(Failure::Math(rep, "some criteria failed".into()))
    }
}

fn emit(rep: &Report, json_out: Option<&Path>) -> Result<(), String> {
    let text = serde_json::to_string_pretty(&rep.to_json()).expect("serializable") + "\n";
    print!("{text}");
    if let Some(p) = json_out {
        std::fs::write(p, &text).map_err(|e| format!("cannot write {}: {e}", p.display()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> ExitCode {
    let tol = match Tol::new(cli.tol_rank, cli.tol_residual) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let ctx = Context {
        tol,
        seed: cli.seed,
        degree: cli.degree,
    };
    let result = match &cli.command {
        Command::Analyze { matrix } => analyze(&ctx, matrix),
        Command::Decompose { matrix, with_conjugator } => decompose(&ctx, matrix, *with_conjugator),
        Command::CheckSubspace { matrix, subspace, mode } => check_subspace(&ctx, matrix, subspace, *mode),
        Command::Factorize { subspace, coeff_dim, k } => factorize(&ctx, subspace, *coeff_dim, *k),
        Command::Lattice { parts } => lattice(&ctx, parts),
        Command::Selftest { scale, criterion } => selftest(&ctx, *scale, *criterion),
    };
    let (rep, code) = match result {
        Ok(rep) => (rep, 0),
        Err(Failure::Math(rep, msg)) => {
            eprintln!("check failed: {msg}");
            (rep, 1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    if let Err(msg) = emit(&rep, cli.json_out.as_deref()) {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    ExitCode::from(code)
}

fn main() -> ExitCode {
    run(Cli::parse())
}
