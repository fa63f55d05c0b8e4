// `!(x > 0.0)` is deliberate: it rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use sinkgeo::figures::{self, format_f64, Table};
use sinkgeo::geodesics::{beta_distance, bridge_marginal};
use sinkgeo::io::{SpaceFile, WeightsFile};
use sinkgeo::tensor::{contraction_bound, self_transport};
use sinkgeo::validation::{run_suite, Suite};
use sinkgeo::{
    divergence, ds_bounds, solve_geodesic, solve_potentials, Error, GeodesicOptions, GroundSpace, Init, Measure,
    SolverOptions, TangentVector,
};

const EXIT_VALIDATION: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_PARSE: u8 = 4;
const EXIT_SOLVER: u8 = 5;

#[derive(Parser)]
#[command(
    name = "sinkgeo",
    version,
    about = "Sinkhorn divergence geometry on discrete measures"
)]
struct Cli {
    /// Suppress progress messages on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    /// Report errors and progress as JSON lines on stderr.
    #[arg(long, global = true)]
    json: bool,
    /// Worker threads for grid computations (0 = all cores).
    #[arg(long, global = true, env = "SINKGEO_THREADS", default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Entropic OT, Sinkhorn divergence, metric tensor or distance bounds.
    Compute(ComputeArgs),
    /// Minimizes the chain of divergences between two measures.
    Geodesic(GeodesicArgs),
    /// Density of the Schrödinger bridge marginal on a 1-D grid, as CSV.
    Bridge(BridgeArgs),
    /// Writes the CSV tables behind the standard plots.
    Figures(FiguresArgs),
    /// Runs a self-check suite and prints a JSON report.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Quantity {
    Ot,
    Sdiv,
    Tensor,
    Bounds,
}

#[derive(Args)]
struct SolverArgs {
    /// Overrides the epsilon of the space file.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
}

impl SolverArgs {
    fn options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }
}

#[derive(Args)]
struct ComputeArgs {
    quantity: Quantity,
    #[arg(long)]
    space: PathBuf,
    #[arg(long)]
    mu: PathBuf,
    #[arg(long)]
    nu: Option<PathBuf>,
    #[arg(long)]
    tangent: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct GeodesicArgs {
    #[arg(long)]
    space: PathBuf,
    #[arg(long)]
    mu0: PathBuf,
    #[arg(long)]
    mu1: PathBuf,
    #[arg(long, default_value_t = 16)]
    steps: usize,
    #[arg(long, value_enum, default_value = "linear")]
    init: InitArg,
    #[arg(long = "descent-iter", default_value_t = 5000)]
    descent_iter: usize,
    #[arg(long, default_value_t = 1e-9)]
    rel_tol: f64,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Linear,
    ArcBeta,
    Displacement,
}

#[derive(Args)]
struct BridgeArgs {
    /// Space file; without it the bridge runs from delta_0 to delta_0 on the line.
    #[arg(long, requires_all = ["mu0", "mu1"])]
    space: Option<PathBuf>,
    #[arg(long)]
    mu0: Option<PathBuf>,
    #[arg(long)]
    mu1: Option<PathBuf>,
    #[arg(long)]
    t: f64,
    /// Grid `start:end:count`.
    #[arg(long, allow_hyphen_values = true)]
    grid: String,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Figure {
    Gaussians,
    Triangle,
    Nonconvexity,
    Twopoint,
}

#[derive(Args)]
struct FiguresArgs {
    figure: Figure,
    /// One or more regularization values.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    eps: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
    /// Grid resolution along each axis.
    #[arg(long)]
    samples: Option<usize>,
    /// Upper end of the radius axis, in units of sqrt(eps).
    #[arg(long)]
    max: Option<f64>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, default_value = "all")]
    suite: String,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Also write the JSON report to this file.
    #[arg(long)]
    report: Option<PathBuf>,
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, kind) = match e {
            Error::Parse(_)
            | Error::NonSymmetricCost { .. }
            | Error::NegativeCost { .. }
            | Error::NonPositiveEpsilon(_)
            | Error::EmptySpace
            | Error::DimensionMismatch { .. }
            | Error::InvalidMeasure(_)
            | Error::UnbalancedTangent(_)
            | Error::SupportViolation(_)
            | Error::NotSqEuclidean
            | Error::InvalidArgument(_) => (EXIT_PARSE, "parse"),
            _ => (EXIT_SOLVER, "solver"),
        };
        Failure {
            code,
            kind,
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &FsPath, e: std::io::Error) -> Failure {
    Failure {
        code: EXIT_IO,
        kind: "io",
        message: format!("{}: {e}", path.display()),
    }
}

fn parse_failure(message: String) -> Failure {
    Failure {
        code: EXIT_PARSE,
        kind: "parse",
        message,
    }
}

struct Log {
    quiet: bool,
    json: bool,
}

impl Log {
    fn info(&self, msg: &str) {
        if self.quiet {
            return;
        }
        if self.json {
            eprintln!("{}", json!({"level": "info", "message": msg}));
        } else {
            eprintln!("{msg}");
        }
    }

    fn error(&self, f: &Failure) {
        if self.json {
            eprintln!(
                "{}",
                json!({"level": "error", "kind": f.kind, "exit": f.code, "message": f.message})
            );
        } else {
            eprintln!("error ({}): {}", f.kind, f.message);
        }
    }
}

/// Serializes JSON with every float printed to 17 significant digits.
fn render(v: &Value) -> String {
    match v {
        Value::Number(n) if n.is_f64() => format_f64(n.as_f64().unwrap_or(f64::NAN)),
        Value::Array(items) => format!("[{}]", items.iter().map(render).collect::<Vec<_>>().join(",")),
        Value::Object(map) => format!(
            "{{{}}}",
            map.iter()
                .map(|(k, v)| format!("{}:{}", Value::String(k.clone()), render(v)))
                .collect::<Vec<_>>()
                .join(",")
        ),
        other => other.to_string(),
    }
}

fn read(path: &FsPath) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| io_failure(path, e))
}

fn write(path: &FsPath, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| io_failure(path, e))
}

fn load_space(path: &FsPath, eps: Option<f64>) -> Result<Arc<GroundSpace>, Failure> {
    let file: SpaceFile =
        serde_json::from_str(&read(path)?).map_err(|e| parse_failure(format!("{}: {e}", path.display())))?;
    let space = file.build()?;
    Ok(match eps {
        Some(e) => space.with_epsilon(e)?,
        None => space,
    })
}

fn load_weights(path: &FsPath) -> Result<WeightsFile, Failure> {
    serde_json::from_str(&read(path)?).map_err(|e| parse_failure(format!("{}: {e}", path.display())))
}

fn load_measure(path: &FsPath, space: &Arc<GroundSpace>) -> Result<Measure, Failure> {
    Ok(load_weights(path)?.measure(space.clone())?)
}

fn load_tangent(path: &FsPath, space: &Arc<GroundSpace>) -> Result<TangentVector, Failure> {
    Ok(load_weights(path)?.tangent(space.clone())?)
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a PathBuf, Failure> {
    p.as_ref()
        .ok_or_else(|| parse_failure(format!("--{flag} is required here")))
}

fn compute(a: &ComputeArgs) -> Result<Value, Failure> {
    let space = load_space(&a.space, a.solver.eps)?;
    let mu = load_measure(&a.mu, &space)?;
    let opts = a.solver.options();
    Ok(match a.quantity {
        Quantity::Ot => {
            let nu = load_measure(required(&a.nu, "nu")?, &space)?;
            let pot = solve_potentials(&mu, &nu, &opts)?;
            json!({"value": pot.dual_value(&mu, &nu), "iterations": pot.iterations, "residual": pot.residual})
        }
        Quantity::Sdiv => {
            let nu = load_measure(required(&a.nu, "nu")?, &space)?;
            let d = divergence(&mu, &nu, &opts)?;
            json!({"value": d.value, "iterations": d.iterations(), "residual": d.residual()})
        }
        Quantity::Tensor => {
            let b = load_tangent(required(&a.tangent, "tangent")?, &space)?;
            let st = self_transport(&mu, &opts)?;
            let g = st.metric_tensor(&b)?;
            let g_tilde = st.tilde_metric_tensor(&st.beta_dot_from_mu_dot(&b)?)?;
            json!({
                "g": g,
                "g_tilde": g_tilde,
                "lambda2": st.lambda2(),
                "q_bound": contraction_bound(&space),
            })
        }
        Quantity::Bounds => {
            let nu = load_measure(required(&a.nu, "nu")?, &space)?;
            let (lower, upper) = ds_bounds(&mu, &nu, &opts)?;
            json!({"lower": lower, "upper": upper, "beta_distance": beta_distance(&mu, &nu, &opts)?})
        }
    })
}

fn geodesic(a: &GeodesicArgs, log: &Log) -> Result<Value, Failure> {
    let space = load_space(&a.space, a.solver.eps)?;
    let mu0 = load_measure(&a.mu0, &space)?;
    let mu1 = load_measure(&a.mu1, &space)?;
    let opts = GeodesicOptions {
        steps: a.steps,
        init: match a.init {
            InitArg::Linear => Init::Linear,
            InitArg::ArcBeta => Init::ArcBeta,
            InitArg::Displacement => Init::Displacement,
        },
        max_iter: a.descent_iter,
        rel_tol: a.rel_tol,
        sinkhorn: a.solver.options(),
        ..GeodesicOptions::default()
    };
    log.info(&format!("geodesic: {} points, N = {}", space.len(), a.steps));
    let r = solve_geodesic(&mu0, &mu1, &opts)?;
    let weights: Vec<Vec<f64>> = r
        .path
        .steps()
        .iter()
        .map(|m| m.weights().iter().copied().collect())
        .collect();
    let summary = json!({
        "chain_value": r.chain_value,
        "energy": r.energy,
        "ds_estimate": r.ds_estimate,
        "lower_bound": r.lower_bound,
        "upper_bound": r.upper_bound,
        "iterations": r.iterations,
        "converged": r.converged,
        "discrepancy": r.discrepancy,
    });
    let mut full = summary.clone();
    full["times"] = json!(r.path.times());
    full["weights"] = json!(weights);
    full["history"] = json!(r.history);
    write(&a.out, &(render(&full) + "\n"))?;
    if r.discrepancy {
        log.info("warning: path energy and chain value differ by more than 5%");
    }
    Ok(summary)
}

fn parse_grid(s: &str) -> Result<Vec<f64>, Failure> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || parse_failure(format!("grid '{s}' is not start:end:count"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].parse().map_err(|_| bad())?;
    let b: f64 = parts[1].parse().map_err(|_| bad())?;
    let n: usize = parts[2].parse().map_err(|_| bad())?;
    if n < 2 {
        return Err(bad());
    }
    Ok((0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect())
}

fn bridge(a: &BridgeArgs) -> Result<String, Failure> {
    let (mu0, mu1) = match &a.space {
        Some(path) => {
            let space = load_space(path, a.solver.eps)?;
            (
                load_measure(required(&a.mu0, "mu0")?, &space)?,
                load_measure(required(&a.mu1, "mu1")?, &space)?,
            )
        }
        None => {
            let space = GroundSpace::line(&[0.0], a.solver.eps.unwrap_or(1.0))?;
            (Measure::dirac(space.clone(), 0)?, Measure::dirac(space, 0)?)
        }
    };
    if mu0.space().dim() != 1 {
        return Err(parse_failure("bridge grids are one-dimensional".into()));
    }
    let xs = parse_grid(&a.grid)?;
    let query: Vec<Vec<f64>> = xs.iter().map(|x| vec![*x]).collect();
    let density = bridge_marginal(&mu0, &mu1, a.t, &query, &a.solver.options())?;
    let mut out = format!(
        "# bridge t={} eps={}\nx,density\n",
        format_f64(a.t),
        format_f64(mu0.space().epsilon())
    );
    for (x, d) in xs.iter().zip(density) {
        out.push_str(&format!("{},{}\n", format_f64(*x), format_f64(d)));
    }
    Ok(out)
}

fn figure_tables(a: &FiguresArgs) -> Result<Vec<(String, Table)>, Failure> {
    if a.eps.is_empty() || a.eps.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::NonPositiveEpsilon(a.eps.iter().copied().find(|e| !(*e > 0.0)).unwrap_or(0.0)).into());
    }
    let suffix = |name: &str, eps: f64| {
        if a.eps.len() > 1 {
            format!("{name}_eps{eps}.csv")
        } else {
            format!("{name}.csv")
        }
    };
    let mut out = Vec::new();
    match a.figure {
        Figure::Gaussians => {
            let pairs = [(0.1, 2.0), (2.0, 0.1), (0.5, 4.0)];
            for &eps in &a.eps {
                out.push((
                    suffix("gaussians", eps),
                    figures::gaussians(eps, &pairs, a.samples.unwrap_or(41))?,
                ));
            }
        }
        Figure::Triangle => {
            for &eps in &a.eps {
                let max = a.max.unwrap_or(2.0);
                out.push((
                    suffix("triangle_heatmap", eps),
                    figures::triangle_heatmap(eps, max, a.samples.unwrap_or(41)),
                ));
                out.push((
                    suffix("triangle_lineplot", eps),
                    figures::triangle_lineplot(eps, &[1.0, 2.0, 3.0], a.samples.unwrap_or(101)),
                ));
            }
        }
        Figure::Nonconvexity => {
            out.push((
                "nonconvexity_mass.csv".into(),
                figures::nonconvexity_mass(&a.eps, 1.0, a.samples.unwrap_or(49))?,
            ));
            for &eps in &a.eps {
                out.push((
                    suffix("nonconvexity_radius", eps),
                    figures::nonconvexity_radius(eps, a.max.unwrap_or(3.0), a.samples.unwrap_or(201)),
                ));
            }
        }
        Figure::Twopoint => {
            for &eps in &a.eps {
                out.push((
                    suffix("twopoint", eps),
                    figures::two_point(eps, &[0.1, 0.5, 1.0, 2.0], a.samples.unwrap_or(49))?,
                ));
            }
        }
    }
    Ok(out)
}

fn run(cli: &Cli, log: &Log) -> Result<u8, Failure> {
    match &cli.command {
        Command::Compute(a) => println!("{}", render(&compute(a)?)),
        Command::Geodesic(a) => println!("{}", render(&geodesic(a, log)?)),
        Command::Bridge(a) => {
            let csv = bridge(a)?;
            match &a.out {
                Some(p) => write(p, &csv)?,
                None => print!("{csv}"),
            }
        }
        Command::Figures(a) => {
            fs::create_dir_all(&a.out).map_err(|e| io_failure(&a.out, e))?;
            for (name, table) in figure_tables(a)? {
                let path = a.out.join(&name);
                write(&path, &table.to_csv())?;
                log.info(&format!("wrote {} ({} rows)", path.display(), table.rows.len()));
            }
        }
        Command::Validate(a) => {
            let suite: Suite = a.suite.parse()?;
            let report = run_suite(suite, a.seed);
            for c in &report.checks {
                let status = if c.passed { "PASS" } else { "FAIL" };
                log.info(&format!("{status} {}: {}", c.name, c.detail));
            }
            let text = render(&serde_json::to_value(&report).map_err(|e| parse_failure(e.to_string()))?);
            if let Some(p) = &a.report {
                write(p, &(text.clone() + "\n"))?;
            }
            println!("{text}");
            if !report.passed {
                return Ok(EXIT_VALIDATION);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_PARSE } else { 0 });
        }
    };
    let log = Log {
        quiet: cli.quiet,
        json: cli.json,
    };
    if cli.threads > 0 {
        // Only fails if a pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    match run(&cli, &log) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            log.error(&f);
            ExitCode::from(f.code)
        }
    }
}
