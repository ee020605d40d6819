//! Command-line surface of the Hamilton-Jacobi laboratory.
//!
//! Four subcommands bind the library: `front` samples a generalized
//! wavefront to CSV, `solve` runs one of the solvers on a grid,
//! `counterexample` reproduces the scenarios where the variational and
//! viscosity solutions part ways, and `check` runs a built-in property
//! suite over the operator axioms and the frozen oracles.
//!
//! Exit codes are scriptable: 0 on success, 2 when the configuration is
//! invalid (unknown names, malformed grids, missing parameters), 3 when a
//! computation fails (the message names the library error, for instance
//! `HorizonExceeded`).  All floating-point output carries 17 significant
//! digits, files are written atomically with checksum sidecars, and
//! identical configurations produce byte-identical artifacts.  The
//! environment variable `HJ_FRONT_THREADS` caps the worker threads.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hjlab::error::HjError;
use hjlab::experiments::{
    residual_formula, run_counterexample_1d, run_counterexample_saddle, run_smoothing_argument,
    saddle_test_slopes, CounterexampleReport,
};
use hjlab::grid::{Axis, Rect, SolutionGrid};
use hjlab::hamiltonian::{
    check_entropy_condition, check_lax_condition, cubic_wave, find_entropy_pair, half_square,
    mirror, saddle, HamiltonianSpec, IntegrableHamiltonian,
};
use hjlab::initial_data::{
    localized_kink, min_of_quadratics, neg_abs, InitialSpec, PiecewiseInitialCondition,
};
use hjlab::io::{self, fmt_f64};
use hjlab::variational::{
    check_local_estimate, check_operator_axioms, saddle_closed_form, saddle_family,
    variational_solve, AxiomSamples, SolverFn,
};
use hjlab::viscosity::{lax_oleinik, subsolution_residual, viscosity_solve, GridScheme};
use hjlab::wavefront::{build_front_1d, build_front_cloud, Front};

#[derive(Parser)]
#[command(
    name = "hjlab",
    version,
    about = "Wavefronts, variational solutions, and viscosity solutions of \
             evolutionary Hamilton-Jacobi equations with integrable Hamiltonians"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a generalized wavefront and dump it as CSV plus metadata.
    Front(FrontArgs),
    /// Run one solver and dump the solution grid plus metadata.
    Solve(SolveArgs),
    /// Reproduce a counterexample scenario and emit its report.
    Counterexample(CounterexampleArgs),
    /// Run the built-in property suite and report pass/fail per property.
    Check,
}

/// Configuration failures exit with 2, computational failures with 3.
enum Failure {
    Config(String),
    Compute(String),
}

type CliResult<T> = Result<T, Failure>;

fn config_err<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(Failure::Config(msg.into()))
}

/// Names the library error variant in the message, so scripts can react to
/// `HorizonExceeded` or `EmptyViolationInterval` without parsing prose.
fn error_name(e: &HjError) -> &'static str {
    match e {
        HjError::InvalidInput(_) => "InvalidInput",
        HjError::EmptyBox(_) => "EmptyBox",
        HjError::HorizonExceeded { .. } => "HorizonExceeded",
        HjError::NoConvergence(_) => "NoConvergence",
        HjError::DegenerateParam(_) => "DegenerateParam",
        HjError::Unsupported(_) => "Unsupported",
        HjError::EmptyFiber(_) => "EmptyFiber",
        HjError::ResolutionTooCoarse(_) => "ResolutionTooCoarse",
        HjError::SectionOverflow(_) => "SectionOverflow",
        HjError::EntropyPairNotFound(_) => "EntropyPairNotFound",
        HjError::CflViolation(_) => "CflViolation",
        HjError::UnstableDetected(_) => "UnstableDetected",
        HjError::NotConvex(_) => "NotConvex",
        HjError::DomainViolation(_) => "DomainViolation",
        HjError::EmptyViolationInterval(_) => "EmptyViolationInterval",
        HjError::ShockSolverFailed(_) => "ShockSolverFailed",
        HjError::NormalizationFailed(_) => "NormalizationFailed",
        HjError::WitnessGapNonpositive(_) => "WitnessGapNonpositive",
        HjError::AxisMismatch(_) => "AxisMismatch",
        HjError::Io(_) => "Io",
        HjError::Json(_) => "Json",
        HjError::CsvParse { .. } => "CsvParse",
    }
}

fn compute(e: HjError) -> Failure {
    Failure::Compute(format!("{}: {e}", error_name(&e)))
}

fn config(e: HjError) -> Failure {
    Failure::Config(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = apply_thread_cap().and_then(|()| match cli.command {
        Command::Front(args) => cmd_front(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Counterexample(args) => cmd_counterexample(args),
        Command::Check => cmd_check(),
    });
    match run {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Compute(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn apply_thread_cap() -> CliResult<()> {
    match std::env::var("HJ_FRONT_THREADS") {
        Err(std::env::VarError::NotPresent) => Ok(()),
        Err(std::env::VarError::NotUnicode(_)) => {
            config_err("HJ_FRONT_THREADS is set but not valid unicode")
        }
        Ok(v) => {
            let n: usize = v.trim().parse().map_err(|_| {
                Failure::Config(format!("HJ_FRONT_THREADS must be a positive integer, got {v:?}"))
            })?;
            if n == 0 {
                return config_err("HJ_FRONT_THREADS must be at least 1");
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Failure::Config(format!("cannot configure the thread pool: {e}")))
        }
    }
}

/// Shared catalog knobs for `--h` and `--u0` names that take parameters.
#[derive(Args)]
struct DataParams {
    /// Collar width of the blended catalog data.
    #[arg(long, default_value_t = 0.25, allow_hyphen_values = true)]
    width: f64,
    /// Lower scale of min_of_quadratics (also the lower envelope bound).
    #[arg(long, allow_hyphen_values = true)]
    a: Option<f64>,
    /// Upper scale of min_of_quadratics (also the upper envelope bound).
    #[arg(long, allow_hyphen_values = true)]
    b: Option<f64>,
    /// Space dimension for catalog families that support several.
    #[arg(long)]
    dim: Option<usize>,
}

/// Resolves `--h`: a catalog name, a JSON spec file, or inline JSON.
fn load_hamiltonian(arg: &str, params: &DataParams) -> CliResult<IntegrableHamiltonian> {
    if arg.trim_start().starts_with('{') {
        let spec: HamiltonianSpec = serde_json::from_str(arg)
            .map_err(|e| Failure::Config(format!("inline Hamiltonian spec: {e}")))?;
        return IntegrableHamiltonian::from_spec(&spec).map_err(config);
    }
    if arg.ends_with(".json") || arg.contains('/') {
        let text = std::fs::read_to_string(arg).map_err(|e| {
            Failure::Config(format!("cannot read Hamiltonian spec {arg:?}: {e}"))
        })?;
        let spec: HamiltonianSpec = serde_json::from_str(&text)
            .map_err(|e| Failure::Config(format!("Hamiltonian spec {arg:?}: {e}")))?;
        return IntegrableHamiltonian::from_spec(&spec).map_err(config);
    }
    match arg {
        "cubic_wave" => Ok(cubic_wave()),
        "saddle" => Ok(saddle()),
        "half_square" => half_square(params.dim.unwrap_or(1)).map_err(config),
        other => config_err(format!(
            "unknown Hamiltonian {other:?}: expected cubic_wave, saddle, half_square, \
             a .json spec path, or inline JSON"
        )),
    }
}

/// Resolves `--u0`: a catalog name, a JSON spec file, or inline JSON.
fn load_initial(arg: &str, params: &DataParams) -> CliResult<PiecewiseInitialCondition> {
    if arg.trim_start().starts_with('{') {
        let spec: InitialSpec = serde_json::from_str(arg)
            .map_err(|e| Failure::Config(format!("inline initial-data spec: {e}")))?;
        return PiecewiseInitialCondition::from_spec(&spec).map_err(config);
    }
    if arg.ends_with(".json") || arg.contains('/') {
        let text = std::fs::read_to_string(arg).map_err(|e| {
            Failure::Config(format!("cannot read initial-data spec {arg:?}: {e}"))
        })?;
        let spec: InitialSpec = serde_json::from_str(&text)
            .map_err(|e| Failure::Config(format!("initial-data spec {arg:?}: {e}")))?;
        return PiecewiseInitialCondition::from_spec(&spec).map_err(config);
    }
    match arg {
        "abs_kink" => Ok(neg_abs()),
        "abs_kink_quad" => localized_kink(params.width).map_err(config),
        "min_of_quadratics" => {
            let (Some(a), Some(b)) = (params.a, params.b) else {
                return config_err("min_of_quadratics needs --a and --b");
            };
            min_of_quadratics(a, b, params.width).map_err(config)
        }
        other => config_err(format!(
            "unknown initial condition {other:?}: expected abs_kink, abs_kink_quad, \
             min_of_quadratics, a .json spec path, or inline JSON"
        )),
    }
}

fn describe_hamiltonian(h: &IntegrableHamiltonian, arg: &str) -> serde_json::Value {
    match h.spec() {
        Some(spec) => serde_json::to_value(spec).unwrap_or_else(|_| arg.into()),
        None => arg.into(),
    }
}

fn describe_initial(u0: &PiecewiseInitialCondition, arg: &str) -> serde_json::Value {
    match u0.spec() {
        Some(spec) => serde_json::to_value(spec).unwrap_or_else(|_| arg.into()),
        None => arg.into(),
    }
}

/// Parses one `LO:HI:N` grid flag into a uniform axis.
fn parse_axis(s: &str) -> CliResult<Axis> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, n] = parts[..] else {
        return config_err(format!("grid {s:?} must have the form LO:HI:N"));
    };
    let lo: f64 = lo
        .trim()
        .parse()
        .map_err(|_| Failure::Config(format!("grid {s:?}: cannot parse LO")))?;
    let hi: f64 = hi
        .trim()
        .parse()
        .map_err(|_| Failure::Config(format!("grid {s:?}: cannot parse HI")))?;
    let n: usize = n
        .trim()
        .parse()
        .map_err(|_| Failure::Config(format!("grid {s:?}: cannot parse the node count N")))?;
    if !lo.is_finite() || !hi.is_finite() || !(lo < hi) {
        return config_err(format!("grid {s:?} needs finite LO < HI"));
    }
    if n < 2 {
        return config_err(format!("grid {s:?} needs at least 2 nodes"));
    }
    Axis::span(lo, hi, n).map_err(config)
}

fn parse_axes(specs: &[String]) -> CliResult<Vec<Axis>> {
    specs.iter().map(|s| parse_axis(s)).collect()
}

fn require_time(t: f64, allow_zero: bool) -> CliResult<()> {
    let ok = t.is_finite() && if allow_zero { t >= 0.0 } else { t > 0.0 };
    if ok {
        Ok(())
    } else {
        config_err(format!(
            "time must be {} and finite, got {t}",
            if allow_zero { ">= 0" } else { "> 0" }
        ))
    }
}

#[derive(Args)]
struct FrontArgs {
    /// Hamiltonian: catalog name (cubic_wave, saddle, half_square), a JSON
    /// spec path, or inline JSON.
    #[arg(long = "h", value_name = "SPEC")]
    hamiltonian: String,
    /// Initial condition: catalog name (abs_kink, abs_kink_quad,
    /// min_of_quadratics), a JSON spec path, or inline JSON.
    #[arg(long = "u0", value_name = "SPEC")]
    initial: String,
    /// Front time, t >= 0.
    #[arg(long, allow_hyphen_values = true)]
    t: f64,
    /// Window per axis as LO:HI:N.  Default: the span between the
    /// breakpoints flanking the data's kinks (d = 1) or the data domain
    /// (d = 2); N feeds the d = 2 piece sampling.
    #[arg(long = "grid", value_name = "LO:HI:N", allow_hyphen_values = true)]
    grid: Vec<String>,
    /// Samples per branch in the CSV (d = 1) or per fan point (d = 2).
    #[arg(long, default_value_t = 65)]
    samples: usize,
    /// Output directory for front.csv and front_meta.json.
    #[arg(long, default_value = "hjlab-out")]
    out: PathBuf,
    #[command(flatten)]
    params: DataParams,
}

/// Window between the breakpoints flanking the outermost kinks: the region
/// where the fan structure lives.  Kink-free data keeps its whole domain.
fn default_window_1d(u0: &PiecewiseInitialCondition) -> (f64, f64) {
    let dom = u0.domain();
    let (mut lo, mut hi) = (dom.lo(0), dom.hi(0));
    let kinks = u0.kinks_1d().unwrap_or_default();
    if let (Some(&kmin), Some(&kmax)) = (kinks.first(), kinks.last()) {
        if let Some(bks) = u0.breakpoints() {
            for &bk in bks {
                if bk < kmin - 1e-12 && bk > lo {
                    lo = bk;
                }
                if bk > kmax + 1e-12 && bk < hi {
                    hi = bk;
                    break;
                }
            }
        }
    }
    (lo, hi)
}

fn cmd_front(args: FrontArgs) -> CliResult<()> {
    require_time(args.t, true)?;
    let h = load_hamiltonian(&args.hamiltonian, &args.params)?;
    let u0 = load_initial(&args.initial, &args.params)?;
    if h.dim() != u0.dim() {
        return config_err(format!(
            "Hamiltonian dimension {} does not match data dimension {}",
            h.dim(),
            u0.dim()
        ));
    }
    let axes = parse_axes(&args.grid)?;
    if args.samples < 2 {
        return config_err("--samples must be at least 2");
    }

    let front: Front;
    let window: serde_json::Value;
    if u0.dim() == 1 {
        let span = match axes.len() {
            0 => default_window_1d(&u0),
            1 => (axes[0].lo, axes[0].hi()),
            n => return config_err(format!("a 1D front takes at most one --grid, got {n}")),
        };
        window = serde_json::json!([span.0, span.1]);
        front = build_front_1d(&h, &u0, args.t, span).map_err(compute)?;
    } else {
        let rect = match axes.len() {
            0 => u0.domain().clone(),
            2 => Rect::new(vec![(axes[0].lo, axes[0].hi()), (axes[1].lo, axes[1].hi())])
                .map_err(config)?,
            n => return config_err(format!("a 2D front needs zero or two --grid, got {n}")),
        };
        window = serde_json::json!([[rect.lo(0), rect.hi(0)], [rect.lo(1), rect.hi(1)]]);
        let n_piece = axes.first().map(|a| a.n).unwrap_or(65);
        front = build_front_cloud(&h, &u0, args.t, &rect, n_piece, args.samples).map_err(compute)?;
    }

    let csv_path = args.out.join("front.csv");
    io::write_front_csv(&csv_path, &front, args.samples).map_err(compute)?;
    let branches: Vec<serde_json::Value> = front
        .branches()
        .iter()
        .map(|b| {
            let (plo, phi) = b.range();
            serde_json::json!({
                "source": b.source().label(),
                "param_lo": plo,
                "param_hi": phi,
            })
        })
        .collect();
    let meta = serde_json::json!({
        "command": "front",
        "t": args.t,
        "dim": front.dim(),
        "hamiltonian": describe_hamiltonian(&h, &args.hamiltonian),
        "initial": describe_initial(&u0, &args.initial),
        "window": window,
        "samples": args.samples,
        "branches": branches,
        "cloud_points": front.cloud().len(),
        "artifact": "front.csv",
    });
    let meta_path = args.out.join("front_meta.json");
    io::write_json(&meta_path, &meta).map_err(compute)?;

    println!(
        "front: dim {}, t {}, {} branches, {} cloud points",
        front.dim(),
        fmt_f64(args.t),
        front.branches().len(),
        front.cloud().len()
    );
    for b in front.branches() {
        let (plo, phi) = b.range();
        println!("  branch {}: params [{}, {}]", b.source().label(), fmt_f64(plo), fmt_f64(phi));
    }
    println!("wrote {}", csv_path.display());
    println!("wrote {}", meta_path.display());
    Ok(())
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Solver {
    Variational,
    Viscosity,
    #[value(alias = "lax_oleinik")]
    LaxOleinik,
    Envelope,
}

impl Solver {
    fn label(self) -> &'static str {
        match self {
            Solver::Variational => "variational",
            Solver::Viscosity => "viscosity",
            Solver::LaxOleinik => "lax_oleinik",
            Solver::Envelope => "envelope",
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Which solution operator to evaluate.
    #[arg(long, value_enum)]
    solver: Solver,
    /// Hamiltonian (required except for the envelope solver, which always
    /// uses the saddle).
    #[arg(long = "h", value_name = "SPEC")]
    hamiltonian: Option<String>,
    /// Initial condition (the envelope solver derives its data from the
    /// family instead).
    #[arg(long = "u0", value_name = "SPEC")]
    initial: Option<String>,
    /// Solution time, t > 0.
    #[arg(long, allow_hyphen_values = true)]
    t: f64,
    /// Output grid per axis as LO:HI:N.
    #[arg(long = "grid", value_name = "LO:HI:N", required = true, allow_hyphen_values = true)]
    grid: Vec<String>,
    /// Output directory for solution.csv and solution_meta.json.
    #[arg(long, default_value = "hjlab-out")]
    out: PathBuf,
    #[command(flatten)]
    params: DataParams,
}

fn cmd_solve(args: SolveArgs) -> CliResult<()> {
    require_time(args.t, false)?;
    let axes = parse_axes(&args.grid)?;
    let mut scheme_meta = None;

    let (grid, h_echo, u0_echo): (SolutionGrid, serde_json::Value, serde_json::Value) =
        if args.solver == Solver::Envelope {
            let (Some(a), Some(b)) = (args.params.a, args.params.b) else {
                return config_err("the envelope solver needs --a and --b");
            };
            if args.initial.is_some() {
                return config_err(
                    "the envelope solver derives its data from the saddle family; drop --u0",
                );
            }
            let h = match &args.hamiltonian {
                None => saddle(),
                Some(spec) => {
                    let h = load_hamiltonian(spec, &args.params)?;
                    if h.spec().map(|s| s.family.as_str()) != Some("saddle") {
                        return config_err(
                            "the envelope solver is defined for the saddle Hamiltonian",
                        );
                    }
                    h
                }
            };
            if axes.len() != 2 {
                return config_err(format!(
                    "the envelope solver needs two --grid axes, got {}",
                    axes.len()
                ));
            }
            let (family, u0) = saddle_family(a, b, args.params.width).map_err(config)?;
            let grid = hjlab::variational::envelope_solve(&h, &family, args.t, &axes)
                .map_err(compute)?;
            let u0_echo = describe_initial(&u0, "saddle family envelope");
            (grid, describe_hamiltonian(&h, "saddle"), u0_echo)
        } else {
            let Some(h_arg) = &args.hamiltonian else {
                return config_err("this solver needs --h");
            };
            let Some(u0_arg) = &args.initial else {
                return config_err("this solver needs --u0");
            };
            let h = load_hamiltonian(h_arg, &args.params)?;
            let u0 = load_initial(u0_arg, &args.params)?;
            if h.dim() != u0.dim() || axes.len() != u0.dim() {
                return config_err(format!(
                    "dimensions disagree: Hamiltonian {}, data {}, {} grid axes",
                    h.dim(),
                    u0.dim(),
                    axes.len()
                ));
            }
            let grid = match args.solver {
                Solver::Variational => {
                    variational_solve(&h, &u0, args.t, &axes).map_err(compute)?
                }
                Solver::Viscosity => {
                    let scheme = GridScheme::for_problem(&h, &u0, args.t, &axes).map_err(compute)?;
                    scheme_meta = Some(scheme.metadata(args.t));
                    viscosity_solve(&h, &u0, args.t, &scheme).map_err(compute)?
                }
                Solver::LaxOleinik => {
                    lax_oleinik(&h, &u0, args.t, &axes[0]).map_err(compute)?
                }
                Solver::Envelope => unreachable!("handled above"),
            };
            (grid, describe_hamiltonian(&h, h_arg), describe_initial(&u0, u0_arg))
        };

    let csv_path = args.out.join("solution.csv");
    io::write_grid_csv(&csv_path, &grid).map_err(compute)?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in &grid.values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let meta = serde_json::json!({
        "command": "solve",
        "solver": args.solver.label(),
        "t": args.t,
        "hamiltonian": h_echo,
        "initial": u0_echo,
        "axes": grid.axes,
        "provenance": grid.provenance.label(),
        "scheme": scheme_meta,
        "value_range": [lo, hi],
        "artifact": "solution.csv",
    });
    let meta_path = args.out.join("solution_meta.json");
    io::write_json(&meta_path, &meta).map_err(compute)?;

    println!(
        "solve: {} at t {}, {} nodes, values in [{}, {}]",
        args.solver.label(),
        fmt_f64(args.t),
        grid.values.len(),
        fmt_f64(lo),
        fmt_f64(hi)
    );
    println!("wrote {}", csv_path.display());
    println!("wrote {}", meta_path.display());
    Ok(())
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Scenario {
    /// Wave-type Hamiltonian in d = 1 with a kinked datum.
    Dim1,
    /// Saddle Hamiltonian in d = 2 with a min-of-quadratics datum.
    Saddle,
    /// Mollified replay of the saddle scenario.
    Smoothing,
}

#[derive(Args)]
struct CounterexampleArgs {
    #[arg(value_enum)]
    scenario: Scenario,
    /// Hamiltonian for the dim1 scenario (wave-type or any 1D Hamiltonian
    /// that is neither convex nor concave).
    #[arg(long = "h", value_name = "SPEC")]
    hamiltonian: Option<String>,
    /// Times for the dim1 scenario.
    #[arg(long = "t-list", value_delimiter = ',', value_name = "T,T,...", allow_hyphen_values = true)]
    t_list: Vec<f64>,
    /// Time for the saddle and smoothing scenarios.
    #[arg(long, allow_hyphen_values = true)]
    t: Option<f64>,
    /// Lower scale of the saddle datum.
    #[arg(long, allow_hyphen_values = true)]
    a: Option<f64>,
    /// Upper scale of the saddle datum.
    #[arg(long, allow_hyphen_values = true)]
    b: Option<f64>,
    /// Report grid per axis as LO:HI:N (one axis for dim1, two for saddle).
    #[arg(long = "grid", value_name = "LO:HI:N", allow_hyphen_values = true)]
    grid: Vec<String>,
    /// Existing saddle report JSON to replay under smoothing (default:
    /// run the saddle scenario first with the parameters above).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Mollification widths for the smoothing scenario.
    #[arg(long = "eps-list", value_delimiter = ',', value_name = "E,E,...", allow_hyphen_values = true)]
    eps_list: Vec<f64>,
    /// Output directory for reports and grid artifacts.
    #[arg(long, default_value = "hjlab-out")]
    out: PathBuf,
    /// Collar width of the scenario data.
    #[arg(long, default_value_t = 0.25, allow_hyphen_values = true)]
    width: f64,
}

fn print_report(report: &CounterexampleReport) {
    println!(
        "{} t {}: lax margin {}, entropy margin {}",
        report.scenario,
        fmt_f64(report.t),
        fmt_f64(report.margins.lax),
        fmt_f64(report.margins.entropy)
    );
    println!(
        "  sup|R-V| {}, min(R-V) {}, witness gap {} at q = [{}]",
        fmt_f64(report.gaps.sup_abs_gap),
        fmt_f64(report.gaps.min_signed_gap),
        fmt_f64(report.witness.gap),
        report.witness.q.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(", ")
    );
    for path in &report.artifacts {
        println!("  artifact {}", path.display());
    }
}

fn saddle_defaults(args: &CounterexampleArgs) -> CliResult<(f64, f64, f64, Vec<Axis>)> {
    let a = args.a.unwrap_or(0.75);
    let b = args.b.unwrap_or(1.0);
    let t = args.t.unwrap_or(0.1);
    require_time(t, false)?;
    let axes = match args.grid.len() {
        0 => vec![
            Axis::span(-0.35, -0.05, 76).map_err(config)?,
            Axis::span(-0.12, 0.06, 46).map_err(config)?,
        ],
        2 => parse_axes(&args.grid)?,
        n => return config_err(format!("the saddle scenario needs two --grid axes, got {n}")),
    };
    Ok((a, b, t, axes))
}

fn cmd_counterexample(args: CounterexampleArgs) -> CliResult<()> {
    match args.scenario {
        Scenario::Dim1 => {
            let Some(h_arg) = &args.hamiltonian else {
                return config_err("the dim1 scenario needs --h");
            };
            let data_params = DataParams { width: args.width, a: None, b: None, dim: None };
            let h = load_hamiltonian(h_arg, &data_params)?;
            let t_list =
                if args.t_list.is_empty() { vec![0.1, 0.05, 0.025] } else { args.t_list.clone() };
            for &t in &t_list {
                require_time(t, false)?;
            }
            let axis = match args.grid.len() {
                0 => Axis::span(-0.4, 0.25, 651).map_err(config)?,
                1 => parse_axis(&args.grid[0])?,
                n => return config_err(format!("the dim1 scenario takes one --grid, got {n}")),
            };
            let reports =
                run_counterexample_1d(&h, &t_list, &axis, Some(&args.out)).map_err(compute)?;
            for report in &reports {
                report.validate().map_err(compute)?;
                print_report(report);
                println!(
                    "  report {}",
                    args.out.join(format!("dim1_t{}_report.json", report.t)).display()
                );
            }
            Ok(())
        }
        Scenario::Saddle => {
            let (a, b, t, axes) = saddle_defaults(&args)?;
            let report =
                run_counterexample_saddle(a, b, t, &axes, Some(&args.out)).map_err(compute)?;
            report.validate().map_err(compute)?;
            print_report(&report);
            println!(
                "  report {}",
                args.out.join(format!("saddle_t{}_report.json", report.t)).display()
            );
            Ok(())
        }
        Scenario::Smoothing => {
            let source = match &args.report {
                Some(path) => {
                    if args.a.is_some() || args.b.is_some() || args.t.is_some() {
                        return config_err(
                            "pass either --report or saddle parameters, not both",
                        );
                    }
                    io::read_json::<CounterexampleReport>(path).map_err(|e| {
                        Failure::Config(format!("cannot read report {path:?}: {e}"))
                    })?
                }
                None => {
                    let (a, b, t, axes) = saddle_defaults(&args)?;
                    run_counterexample_saddle(a, b, t, &axes, None).map_err(compute)?
                }
            };
            let eps_list = if args.eps_list.is_empty() {
                vec![0.025, 0.00625, 0.0015625]
            } else {
                args.eps_list.clone()
            };
            for &eps in &eps_list {
                if !(eps > 0.0) || !eps.is_finite() {
                    return config_err(format!("mollification widths must be > 0, got {eps}"));
                }
            }
            let table =
                run_smoothing_argument(&saddle(), &source, &eps_list).map_err(compute)?;
            let path = args.out.join("smoothing.json");
            io::write_json(&path, &table).map_err(compute)?;
            println!(
                "smoothing: alpha {} at witness q = [{}]",
                fmt_f64(table.alpha),
                table.witness_q.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(", ")
            );
            for row in &table.rows {
                println!(
                    "  eps {}: sup|u_e-u_L| {}, front dist {}, sup|Vu_e-Vu_L| {}, witness gap {}, \
                     predicted bound {}",
                    fmt_f64(row.eps),
                    fmt_f64(row.sup_u_diff),
                    fmt_f64(row.front_dist),
                    fmt_f64(row.sup_v_diff),
                    fmt_f64(row.witness_gap),
                    fmt_f64(row.predicted_lower_bound)
                );
            }
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}

struct CheckOutcome {
    failures: usize,
    total: usize,
}

impl CheckOutcome {
    fn record(&mut self, name: &str, pass: bool, detail: String) {
        self.total += 1;
        if pass {
            println!("PASS {name} ({detail})");
        } else {
            self.failures += 1;
            println!("FAIL {name} ({detail})");
        }
    }
}

/// Deterministic fixtures for the operator-axiom checks: a kinked datum
/// and its shifts and tilts.
fn axiom_fixtures(t: f64, axes: Vec<Axis>) -> CliResult<AxiomSamples> {
    let kink = localized_kink(0.25).map_err(config)?;
    Ok(AxiomSamples {
        monotone_pairs: vec![
            (kink.clone(), kink.offset(0.25)),
            (kink.tilted(&[-0.2], 0.0), kink.tilted(&[-0.2], 0.4)),
        ],
        shift_cases: vec![(kink.clone(), 0.7), (kink.tilted(&[0.3], -0.2), -1.1)],
        contraction_pairs: vec![
            (kink.clone(), kink.offset(0.4)),
            (kink.clone(), kink.tilted(&[0.15], 0.05)),
        ],
        t,
        axes,
    })
}

fn cmd_check() -> CliResult<()> {
    let mut out = CheckOutcome { failures: 0, total: 0 };

    // Variational operator axioms at the tight tolerance, membership
    // included: the minimal section must stay on the wavefront.
    {
        let axes = vec![Axis::span(-0.5, 0.5, 201).map_err(config)?];
        let samples = axiom_fixtures(0.05, axes)?;
        let solver: SolverFn<'_> = &variational_solve;
        let report = check_operator_axioms(solver, &cubic_wave(), &samples).map_err(compute)?;
        out.record(
            "variational operator axioms",
            report.passes(),
            format!(
                "monotonicity {}, additivity {}, contraction excess {}, membership {}",
                fmt_f64(report.monotonicity_worst),
                fmt_f64(report.additivity_worst),
                fmt_f64(report.contraction_excess),
                fmt_f64(report.membership_worst)
            ),
        );
    }

    // Viscosity operator axioms at the scheme tolerance.  Membership is a
    // variational notion, so only the three operator clauses are scored.
    {
        let axes = vec![Axis::span(-0.5, 0.5, 201).map_err(config)?];
        let samples = axiom_fixtures(0.05, axes)?;
        let solver: SolverFn<'_> = &|h, u, t, axes| {
            let scheme = GridScheme::for_problem(h, u, t, axes)?;
            viscosity_solve(h, u, t, &scheme)
        };
        let h = half_square(1).map_err(config)?;
        let report = check_operator_axioms(solver, &h, &samples).map_err(compute)?;
        let tol = 5e-3;
        let pass = report.monotonicity_worst <= tol
            && report.additivity_worst <= tol
            && report.contraction_excess <= tol;
        out.record(
            "viscosity operator axioms",
            pass,
            format!(
                "monotonicity {}, additivity {}, contraction excess {}",
                fmt_f64(report.monotonicity_worst),
                fmt_f64(report.additivity_worst),
                fmt_f64(report.contraction_excess)
            ),
        );
    }

    // Local comparison estimate between two Hamiltonians.
    {
        let h1 = cubic_wave();
        let h2 = mirror(&h1).map_err(compute)?;
        let u0 = localized_kink(0.25).map_err(config)?;
        let axes = vec![Axis::span(-0.3, 0.3, 121).map_err(config)?];
        let margin = check_local_estimate(&h1, &h2, &u0, 0.02, &axes).map_err(compute)?;
        out.record(
            "local comparison estimate",
            margin >= -1e-6,
            format!("margin {}", fmt_f64(margin)),
        );
    }

    // Entropy pair search on the wave Hamiltonian, plus the Lax condition
    // on the model pair (-1, 1), whose margins (8, 0) are exact in FP.
    // The searched pair's own right Lax margin is a chord tangency, zero
    // only up to the pair-construction tolerance.
    {
        let h = cubic_wave();
        let pair = find_entropy_pair(&h, (-3.0, 3.0), 4097).map_err(compute)?;
        let entropy = check_entropy_condition(&h, pair.p1, pair.p2, 1001).map_err(compute)?;
        let lax = check_lax_condition(&h, -1.0, 1.0).map_err(compute)?;
        let pass = !pair.reflected
            && entropy.holds
            && lax.holds
            && (lax.left_margin - 8.0).abs() <= 1e-12
            && lax.right_margin.abs() <= 1e-12;
        out.record(
            "entropy pair and Lax condition",
            pass,
            format!(
                "pair ({}, {}), entropy margin {}, model-pair Lax margins ({}, {})",
                fmt_f64(pair.p1),
                fmt_f64(pair.p2),
                fmt_f64(entropy.margin),
                fmt_f64(lax.left_margin),
                fmt_f64(lax.right_margin)
            ),
        );
    }

    // Frozen subsolution residual of the saddle scenario.
    {
        let h = saddle();
        let (a, b, t, q1) = (0.75, 1.0, 0.1, -0.16);
        let residual = subsolution_residual(&h, &saddle_test_slopes(a, b, t, q1));
        let formula = residual_formula(a, b, t, q1);
        let pass = (residual - formula).abs() <= 1e-12 && (formula - 4.6875e-4).abs() <= 1e-12;
        out.record(
            "saddle subsolution residual",
            pass,
            format!("residual {}, formula {}", fmt_f64(residual), fmt_f64(formula)),
        );
    }

    // Closed form against the variational solver on the saddle strip.
    {
        let h = saddle();
        let (a, b, t) = (0.75, 1.0, 0.1);
        let u0 = min_of_quadratics(a, b, 0.25).map_err(config)?;
        let axes = vec![
            Axis::span(-0.8, -0.2, 31).map_err(config)?,
            Axis::span(-0.3, 0.3, 31).map_err(config)?,
        ];
        let grid = variational_solve(&h, &u0, t, &axes).map_err(compute)?;
        let mut worst = 0.0f64;
        for (i, q1) in axes[0].coords().enumerate() {
            for (j, q2) in axes[1].coords().enumerate() {
                let exact = saddle_closed_form(a, b, t, q1, q2).map_err(compute)?;
                worst = worst.max((grid.values[i * axes[1].n + j] - exact).abs());
            }
        }
        out.record(
            "saddle closed form vs variational",
            worst <= 1e-6,
            format!("sup difference {}", fmt_f64(worst)),
        );
    }

    if out.failures == 0 {
        println!("all {} checks passed", out.total);
        Ok(())
    } else {
        Err(Failure::Compute(format!(
            "check failed: {} of {} properties violated",
            out.failures, out.total
        )))
    }
}
