//! `noether`: derive, check, solve, vary and invert scalar variational problems.
//!
//! Exit codes: 0 success, 1 negative verdict or failed check, 2 usage or
//! input error, 3 numeric failure.

mod report;
mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use noether_core::expr::{parse, ZeroTest, DEFAULT_SEED};
use noether_core::fields::{plateau_check, Grid, PlateauVerdict};
use noether_core::inverse_problem::{fit, verify_solution, LagrangianAnsatz, TensorTarget};
use noether_core::lagrangian::{check_condition_h, check_identity, energy_momentum, euler_lagrange, noether, HMode, Lagrangian};
use noether_core::pde_solver::{solve, DirichletProblem, NewtonParams};
use noether_core::variations::{
    compare_inner_variations, make_bump, AnalyticField, Support, VariationDirection, DEFAULT_T_STEP,
};
use noether_core::Error;

use report::{Format, Report};
use verify::Scenario;

#[derive(Parser, Debug)]
#[command(name = "noether", version, about = "Euler-Lagrange and Noether equations for scalar Lagrangians")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone, Serialize)]
struct Common {
    /// Seed for every randomized probe.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,

    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
struct LagrangianArg {
    /// Lagrangian file, or an inline expression in x, u, z.
    #[arg(long)]
    lagrangian: String,

    /// Dimension for an inline expression.
    #[arg(long, default_value_t = 2)]
    dim: usize,
}

impl LagrangianArg {
    fn load(&self) -> Result<Lagrangian, Failure> {
        let path = Path::new(&self.lagrangian);
        if path.is_file() {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
            Ok(Lagrangian::parse(&text)?)
        } else {
            Ok(Lagrangian::new(self.dim, parse(&self.lagrangian)?)?)
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the Euler-Lagrange operator, energy-momentum tensor and Noether system.
    Derive(#[command(flatten)] LagrangianArg),
    /// Check condition (H).
    CheckH {
        #[command(flatten)]
        lagrangian: LagrangianArg,
        /// `trace` (summed over i) or `per_index`.
        #[arg(long, default_value = "trace")]
        mode: String,
    },
    /// Solve the Euler-Lagrange equation with Dirichlet data.
    Solve(SolveArgs),
    /// Run a built-in verification suite.
    Verify {
        #[arg(value_enum)]
        scenario: Scenario,
    },
    /// Compare the closed-form and directly differentiated inner variations.
    Innervar(InnervarArgs),
    /// Recover a Lagrangian from an energy-momentum tensor.
    Invert(InvertArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
struct SolveArgs {
    #[command(flatten)]
    lagrangian: LagrangianArg,
    /// `N1xN2` nodes, optionally `@a1,b1,a2,b2` (default unit square).
    #[arg(long, default_value = "65x65")]
    grid: String,
    /// Boundary values g(x1, x2).
    #[arg(long)]
    bc: String,
    #[arg(long, default_value_t = NewtonParams::default().tol)]
    tol: f64,
    #[arg(long = "max-iter", default_value_t = NewtonParams::default().max_iter)]
    max_iter: usize,
    /// Node radius of the plateau probe (threshold is the grid spacing).
    #[arg(long, default_value_t = 3)]
    plateau_radius: usize,
    /// Write the solution in the field file format.
    #[arg(long)]
    field: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
struct InnervarArgs {
    #[command(flatten)]
    lagrangian: LagrangianArg,
    /// The field u(x1, x2).
    #[arg(long)]
    u: String,
    /// Support rectangle `a1,b1,a2,b2`.
    #[arg(long, default_value = "0.25,0.75,0.25,0.75")]
    support: String,
    /// Bump amplitudes `a,b` (ignored when --h is given).
    #[arg(long, default_value = "0.5,1")]
    amplitude: String,
    /// Explicit direction `h1;h2` vanishing with its gradient on the support edge.
    #[arg(long)]
    h: Option<String>,
    /// Domain and quadrature nodes: `NxN[@a1,b1,a2,b2]`.
    #[arg(long, default_value = "129x129")]
    grid: String,
    #[arg(long = "t-step", default_value_t = DEFAULT_T_STEP)]
    t_step: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
struct InvertArgs {
    /// Tensor target file.
    #[arg(long)]
    target: PathBuf,
    /// Comma-separated basis expressions (default |z|², z_i z_j, u, u², u³, 1).
    #[arg(long)]
    basis: Option<String>,
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

/// A failed run: exit code and message.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: String) -> Self {
        Self { code: 2, message }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NonConvergence { .. }
            | Error::SingularJacobian { .. }
            | Error::RankDeficient { .. }
            | Error::UnableToDecide { .. }
            | Error::Domain(_)
            | Error::DomainAtNode { .. } => 3,
            _ => 2,
        };
        Self { code, message: e.to_string() }
    }
}

fn parse_list(text: &str, n: usize, what: &str) -> Result<Vec<f64>, Failure> {
    let v: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::usage(format!("{what}: expected {n} comma-separated numbers, got '{text}'")))?;
    if v.len() != n {
        return Err(Failure::usage(format!("{what}: expected {n} numbers, got {}", v.len())));
    }
    Ok(v)
}

fn parse_grid(text: &str) -> Result<Grid, Failure> {
    let (nodes, extent) = match text.split_once('@') {
        Some((n, e)) => (n, Some(e)),
        None => (text, None),
    };
    let counts: Vec<usize> = nodes
        .split('x')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::usage(format!("grid: expected N1xN2, got '{nodes}'")))?;
    let (n1, n2) = match counts.as_slice() {
        [n] => (*n, *n),
        [a, b] => (*a, *b),
        _ => return Err(Failure::usage(format!("grid: expected N1xN2, got '{nodes}'"))),
    };
    let e = match extent {
        Some(e) => parse_list(e, 4, "grid extent")?,
        None => vec![0.0, 1.0, 0.0, 1.0],
    };
    Ok(Grid::new(n1, n2, (e[0], e[1]), (e[2], e[3]))?)
}

struct Outcome {
    text: String,
    code: u8,
}

/// Resolved configuration: the global options merged with each part's fields.
fn config(common: &Common, parts: &[serde_json::Value]) -> serde_json::Value {
    let mut map = serde_json::Map::new();
    for part in std::iter::once(&serde_json::to_value(common).expect("config serializes")).chain(parts) {
        if let serde_json::Value::Object(m) = part {
            map.extend(m.clone());
        }
    }
    serde_json::Value::Object(map)
}

fn json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("config serializes")
}

fn emit<R: Serialize>(
    common: &Common,
    command: &'static str,
    parts: &[serde_json::Value],
    ok: bool,
    result: R,
) -> Outcome {
    let status = if ok { "pass" } else { "fail" };
    let report = Report::new(command, config(common, parts), status, result);
    Outcome { text: report.render(common.format), code: if ok { 0 } else { 1 } }
}

fn zero_test(common: &Common) -> ZeroTest {
    ZeroTest::default().with_seed(common.seed)
}

fn zero_test_config(t: &ZeroTest) -> serde_json::Value {
    serde_json::json!({
        "zero_test": { "samples": t.samples, "tol": t.tol, "range": [t.range.0, t.range.1], "max_redraws": t.max_redraws }
    })
}

#[derive(Serialize)]
struct DeriveResult {
    lagrangian: String,
    params: std::collections::BTreeMap<String, f64>,
    euler_lagrange: String,
    energy_momentum: Vec<Vec<String>>,
    noether: Vec<String>,
    identity: noether_core::lagrangian::IdentityReport,
}

fn cmd_derive(common: &Common, arg: &LagrangianArg) -> Result<Outcome, Failure> {
    let l = arg.load()?;
    let t = energy_momentum(&l);
    let test = zero_test(common);
    let identity = check_identity(&l, &test)?;
    let ok = identity.holds;
    let result = DeriveResult {
        lagrangian: l.body().to_string(),
        params: l.params().clone(),
        euler_lagrange: euler_lagrange(&l).residual.to_string(),
        energy_momentum: t.rows().map(|r| r.iter().map(ToString::to_string).collect()).collect(),
        noether: noether(&l).components.iter().map(ToString::to_string).collect(),
        identity,
    };
    Ok(emit(common, "derive", &[json(arg), zero_test_config(&test)], ok, result))
}

fn cmd_check_h(common: &Common, arg: &LagrangianArg, mode: &str) -> Result<Outcome, Failure> {
    let l = arg.load()?;
    let mode: HMode = mode.parse()?;
    let test = zero_test(common);
    let r = check_condition_h(&l, mode, &test)?;
    let ok = r.satisfied;
    Ok(emit(common, "check-h", &[json(arg), serde_json::json!({ "mode": mode }), zero_test_config(&test)], ok, r))
}

#[derive(Serialize)]
struct SolveResult {
    solve: noether_core::pde_solver::SolveReport,
    newton: NewtonParams,
    el_residual: f64,
    noether_residual: f64,
    identity_defect: f64,
    plateau: PlateauVerdict,
    field_file: Option<String>,
}

fn cmd_solve(common: &Common, args: &SolveArgs) -> Result<Outcome, Failure> {
    let l = args.lagrangian.load()?;
    let grid = parse_grid(&args.grid)?;
    let newton = NewtonParams { tol: args.tol, max_iter: args.max_iter, ..NewtonParams::default() };
    let problem = DirichletProblem::new(l, grid, parse(&args.bc)?)?.with_newton(newton)?;
    let r = solve(&problem)?;
    if args.plateau_radius == 0 {
        return Err(Failure::usage("plateau radius must be at least 1".into()));
    }
    let plateau = plateau_check(&r.solution, grid.h(), args.plateau_radius);
    if let Some(path) = &args.field {
        std::fs::write(path, r.solution.to_text())
            .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))?;
    }
    let result = SolveResult {
        el_residual: r.residuals.el_norm(),
        noether_residual: r.residuals.noether_norm(),
        identity_defect: r.residuals.defect_norm(),
        plateau,
        newton,
        field_file: args.field.as_ref().map(|p| p.display().to_string()),
        solve: r,
    };
    Ok(emit(common, "solve", &[json(args), serde_json::json!({ "grid": grid })], true, result))
}

#[derive(Serialize)]
struct VerifyConfig {
    scenario: Scenario,
    ladder: [usize; 3],
}

fn cmd_verify(common: &Common, scenario: Scenario) -> Result<Outcome, Failure> {
    let test = zero_test(common);
    let r = verify::run(scenario, &test)?;
    let parts = [json(&VerifyConfig { scenario, ladder: verify::LADDER }), zero_test_config(&test)];
    Ok(emit(common, "verify", &parts, r.passed(), r))
}

fn cmd_innervar(common: &Common, args: &InnervarArgs) -> Result<Outcome, Failure> {
    let l = args.lagrangian.load()?;
    let grid = parse_grid(&args.grid)?;
    if grid.n1 != grid.n2 {
        return Err(Failure::usage("innervar quadrature needs a square node count".into()));
    }
    let s = parse_list(&args.support, 4, "support")?;
    let support = Support::new(s[0], s[1], s[2], s[3])?;
    let h = match &args.h {
        Some(text) => {
            let parts: Vec<&str> = text.split(';').collect();
            if parts.len() != 2 {
                return Err(Failure::usage(format!("h: expected `h1;h2`, got '{text}'")));
            }
            VariationDirection::new([parse(parts[0])?, parse(parts[1])?], support, &grid, &l.param_binding())?
        }
        None => {
            let a = parse_list(&args.amplitude, 2, "amplitude")?;
            make_bump(support, [a[0], a[1]], &grid)?
        }
    };
    let u = AnalyticField::new(parse(&args.u)?)?;
    let r = compare_inner_variations(&l, &u, &h, grid.n1, args.t_step)?;
    Ok(emit(common, "innervar", &[json(args), serde_json::json!({ "grid": grid, "support": support })], true, r))
}

#[derive(Serialize)]
struct InvertResult {
    basis: Vec<String>,
    fit: noether_core::inverse_problem::FitResult,
    recovered: String,
    verification: Option<noether_core::inverse_problem::VerificationReport>,
}

fn cmd_invert(common: &Common, args: &InvertArgs) -> Result<Outcome, Failure> {
    let text = std::fs::read_to_string(&args.target)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", args.target.display())))?;
    let target = TensorTarget::parse(&text)?;
    let ansatz = match &args.basis {
        Some(b) => LagrangianAnsatz::parse_basis(target.dim(), b)?,
        None => LagrangianAnsatz::default_basis(target.dim()),
    };
    let r = fit(&ansatz, &target, args.samples, args.tol, common.seed)?;
    let recovered = ansatz.instantiate(&r.values())?;
    let test = ZeroTest { tol: args.tol, ..zero_test(common) };
    let verification = if r.feasible {
        Some(verify_solution(&recovered, &target, &test)?)
    } else {
        None
    };
    let ok = r.feasible && verification.as_ref().is_some_and(|v| v.holds);
    let result = InvertResult {
        basis: ansatz.basis().iter().map(ToString::to_string).collect(),
        recovered: recovered.body().to_string(),
        fit: r,
        verification,
    };
    Ok(emit(common, "invert", &[json(args), zero_test_config(&test)], ok, result))
}

fn run(cli: &Cli) -> Result<Outcome, Failure> {
    let common = &cli.common;
    match &cli.command {
        Command::Derive(arg) => cmd_derive(common, arg),
        Command::CheckH { lagrangian, mode } => cmd_check_h(common, lagrangian, mode),
        Command::Solve(args) => cmd_solve(common, args),
        Command::Verify { scenario } => cmd_verify(common, *scenario),
        Command::Innervar(args) => cmd_innervar(common, args),
        Command::Invert(args) => cmd_invert(common, args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            if let Some(path) = &cli.common.out {
                if let Err(e) = std::fs::write(path, &outcome.text) {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    return ExitCode::from(2);
                }
            } else {
                print!("{}", outcome.text);
            }
            ExitCode::from(outcome.code)
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
