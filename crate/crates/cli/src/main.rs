//! `qestim`: command-line front end.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qestim::bounds::{auto_bound, boundary_csv, boundary_curve, BoundResult, Method, WeightMatrix};
use qestim::geometry::{info_geometry_with, InfoGeometry};
use qestim::io::{emit_json, parse_weight, BoundReport, GeometryReport, MeasurementReport, OracleReport, QmleReport, Report};
use qestim::measurements::optimal_measurement_frame;
use qestim::models::spec::ModelSpec;
use qestim::models::{tangent_frame, ParametricModel, TangentFrame};
use qestim::oracle::{oracle_frame, verify_bound, SearchConfig};
use qestim::selftest::{gating_ok, run_all, run_criterion, SelftestOptions};
use qestim::simulate::{simulate_gqmle, time_energy_report, MeasurementPolicy, QmleConfig};
use qestim::{QestimError, Result};

#[derive(Parser, Debug)]
#[command(name = "qestim", version, about = "Attainable Cramér–Rao bounds and optimal measurements for quantum-state models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// SLD metric, J̃, β-spectrum and flags at a point.
    Geometry(ModelArgs),
    /// Attainable bound with automatic method selection.
    Bound(BoundArgs),
    /// Boundary of the covariance region for one β, as CSV.
    Boundary(BoundaryArgs),
    /// Optimal projective measurement and its estimates.
    Measurement(WeightedArgs),
    /// Stochastic search over measurements.
    Oracle(OracleArgs),
    /// Monte-Carlo run of the adaptive maximum-likelihood scheme.
    SimulateQmle(QmleArgs),
    /// Time-energy test power for a `time_evolution` spec.
    TimeEnergy(TimeEnergyArgs),
    /// Runs the acceptance checks.
    Selftest(SelftestArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct Common {
    /// Write output here instead of stdout.
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Model-spec JSON file.
    #[arg(long, short)]
    model: PathBuf,
    /// Overrides the spec's θ, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    theta: Option<Vec<f64>>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct WeightedArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// `identity`, `js` or a path to a weight file.
    #[arg(long, short, default_value = "identity")]
    weight: String,
}

#[derive(Args, Debug)]
struct SeedArg {
    /// Seed; falls back to QESTIM_SEED, then 0.
    #[arg(long, env = "QESTIM_SEED")]
    seed: Option<u64>,
}

impl SeedArg {
    fn get(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

#[derive(Args, Debug)]
struct BoundArgs {
    #[command(flatten)]
    inner: WeightedArgs,
    #[command(flatten)]
    seed: SeedArg,
    /// Also run the oracle and check the closed form against it.
    #[arg(long)]
    verify: bool,
    /// Oracle restarts for intervals and `--verify`.
    #[arg(long, default_value_t = 64)]
    restarts: usize,
}

#[derive(Args, Debug)]
struct BoundaryArgs {
    #[arg(long, allow_hyphen_values = true)]
    beta: f64,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    /// Half-width of the sampled x range; defaults to the curve's own range.
    #[arg(long)]
    x_range: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[command(flatten)]
    inner: WeightedArgs,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long, default_value_t = 64)]
    restarts: usize,
    #[arg(long, default_value_t = 2000)]
    steps: usize,
    /// Search dimension for pure models (default 2m + 1).
    #[arg(long)]
    dilate: Option<usize>,
    /// Suppress the progress log on stderr.
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Policy {
    Adaptive,
    Fixed,
}

#[derive(Args, Debug)]
struct QmleArgs {
    #[command(flatten)]
    inner: WeightedArgs,
    #[command(flatten)]
    seed: SeedArg,
    /// Samples per trial.
    #[arg(long, short = 'n', default_value_t = 2000)]
    samples: usize,
    #[arg(long, default_value_t = 500)]
    trials: usize,
    #[arg(long, value_enum, default_value = "adaptive")]
    policy: Policy,
    #[arg(long, default_value_t = 1)]
    reoptimize_every: usize,
    /// Starting estimate, comma separated; defaults to the true θ.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    start: Option<Vec<f64>>,
    /// Extra recorded steps, comma separated.
    #[arg(long, value_delimiter = ',')]
    checkpoints: Vec<usize>,
    /// Also write the per-trial CSV here.
    #[arg(long)]
    trials_csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TimeEnergyArgs {
    #[arg(long, short)]
    model: PathBuf,
    /// Reference time; defaults to the spec's θ.
    #[arg(long, allow_hyphen_values = true)]
    t0: Option<f64>,
    #[arg(long)]
    dt: f64,
    /// Number of copies.
    #[arg(long, short = 'n', default_value_t = 1)]
    copies: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct SelftestArgs {
    /// Run a single criterion.
    #[arg(long)]
    criterion: Option<u8>,
    /// Skip the exploratory qMLE check.
    #[arg(long)]
    quick: bool,
    #[arg(long)]
    qmle_trials: Option<usize>,
    #[command(flatten)]
    seed: SeedArg,
    #[command(flatten)]
    common: Common,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Geometry(a) => cmd_geometry(a),
        Command::Bound(a) => cmd_bound(a),
        Command::Boundary(a) => cmd_boundary(a),
        Command::Measurement(a) => cmd_measurement(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::SimulateQmle(a) => cmd_qmle(a),
        Command::TimeEnergy(a) => cmd_time_energy(a),
        Command::Selftest(a) => cmd_selftest(a),
    }
}

struct Loaded {
    kind: String,
    model: ParametricModel,
    theta: Vec<f64>,
    frame: TangentFrame,
    geom: InfoGeometry,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| QestimError::validation(format!("{}: {e}", path.display())))
}

/// Prefixes parse and validation messages with the file they came from.
fn in_file(path: &Path, e: QestimError) -> QestimError {
    match e {
        QestimError::Parse(m) => QestimError::Parse(format!("{}: {m}", path.display())),
        QestimError::Validation(m) => QestimError::Validation(format!("{}: {m}", path.display())),
        other => other,
    }
}

fn load(a: &ModelArgs) -> Result<Loaded> {
    let text = read(&a.model)?;
    let spec = ModelSpec::from_json(&text).map_err(|e| in_file(&a.model, e))?;
    let (model, mut theta) = spec.build().map_err(|e| in_file(&a.model, e))?;
    if let Some(t) = &a.theta {
        if t.len() != model.n_params() {
            return Err(QestimError::validation(format!("--theta: expected {} components, got {}", model.n_params(), t.len())));
        }
        if t.iter().any(|x| !x.is_finite()) {
            return Err(QestimError::validation("--theta: non-finite component"));
        }
        theta = t.clone();
    }
    let frame = tangent_frame(&model, &theta)?;
    let geom = info_geometry_with(&frame, &model.tol)?;
    Ok(Loaded { kind: spec.kind, model, theta, frame, geom })
}

fn weight(spec: &str, l: &Loaded) -> Result<WeightMatrix> {
    let g = match spec {
        "identity" => WeightMatrix::identity(l.geom.m()),
        "js" => WeightMatrix::new(l.geom.js.clone())?,
        path => parse_weight(&read(Path::new(path))?).map_err(|e| in_file(Path::new(path), e))?,
    };
    if g.dim() != l.geom.m() {
        return Err(QestimError::validation(format!("weight is {}x{} but the model has {} parameters", g.dim(), g.dim(), l.geom.m())));
    }
    Ok(g)
}

fn emit(common: &Common, body: &str) -> Result<()> {
    match &common.out {
        Some(p) => fs::write(p, body)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(body.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

fn emit_report<R: Report>(common: &Common, r: &R, what: &str) -> Result<()> {
    let body = match common.format.unwrap_or(Format::Text) {
        Format::Text => {
            r.validate()?;
            r.to_text()
        }
        Format::Json => emit_json(r)? + "\n",
        Format::Csv => return Err(QestimError::validation(format!("csv output is not available for {what}"))),
    };
    emit(common, &body)
}

fn cmd_geometry(a: ModelArgs) -> Result<ExitCode> {
    let l = load(&a)?;
    let r = GeometryReport::new(&l.kind, &l.theta, &l.geom)?;
    emit_report(&a.common, &r, "geometry")?;
    Ok(ExitCode::SUCCESS)
}

fn search_config(seed: u64, restarts: usize, steps: usize, dilate: Option<usize>) -> Result<SearchConfig> {
    let cfg = SearchConfig { restarts, local_steps: steps, seed, dilate_dim: dilate, ..Default::default() };
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_bound(a: BoundArgs) -> Result<ExitCode> {
    let l = load(&a.inner.model)?;
    let g = weight(&a.inner.weight, &l)?;
    let mut b: BoundResult = auto_bound(&l.geom, &g)?;
    if b.method == Method::Interval || a.verify {
        let cfg = search_config(a.seed.get(), a.restarts, SearchConfig::default().local_steps, None)?;
        let o = oracle_frame(&l.frame, &g, &cfg, None, &l.model.tol)?;
        if b.method == Method::Interval {
            if o.best_value < b.cr_value * (1.0 - 1e-9) {
                return Err(QestimError::internal(format!("oracle value {} lies below the SLD floor {}", o.best_value, b.cr_value)));
            }
            b.upper = o.best_value.is_finite().then_some(o.best_value);
        } else {
            let v = verify_bound(&b, &o)?;
            let note = format!("oracle {} ({} restarts), relative gap {:.3e}", v.oracle_best, a.restarts, v.relative_gap);
            b.note = Some(match b.note.take() {
                Some(n) => format!("{n}; {note}"),
                None => note,
            });
        }
    }
    let r = BoundReport::new(&l.kind, &l.theta, &l.geom, &g, &b)?;
    emit_report(&a.inner.model.common, &r, "bound")?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_boundary(a: BoundaryArgs) -> Result<ExitCode> {
    if a.samples < 2 {
        return Err(QestimError::validation("--samples must be at least 2"));
    }
    let pts = boundary_curve(a.beta, a.samples, a.x_range)?;
    let body = match a.common.format.unwrap_or(Format::Csv) {
        Format::Csv | Format::Text => boundary_csv(&pts),
        Format::Json => serde_json::to_string_pretty(&pts).map_err(QestimError::from)? + "\n",
    };
    emit(&a.common, &body)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_measurement(a: WeightedArgs) -> Result<ExitCode> {
    let l = load(&a.model)?;
    let g = weight(&a.weight, &l)?;
    let plan = optimal_measurement_frame(&l.frame, &g, &l.model.tol)?;
    let r = MeasurementReport::new(&l.kind, &plan);
    emit_report(&a.model.common, &r, "measurement")?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_oracle(a: OracleArgs) -> Result<ExitCode> {
    let l = load(&a.inner.model)?;
    let g = weight(&a.inner.weight, &l)?;
    let cfg = search_config(a.seed.get(), a.restarts, a.steps, a.dilate)?;
    let o = oracle_frame(&l.frame, &g, &cfg, None, &l.model.tol)?;
    if !a.quiet {
        for (k, best) in &o.trace {
            eprintln!("restart {k:>4}  best {}", qestim::io::sig9(*best));
        }
    }
    let closed = auto_bound(&l.geom, &g)?;
    let verify = if closed.method == Method::Interval { None } else { Some(verify_bound(&closed, &o)?) };
    let r = OracleReport::new(&l.kind, &l.theta, &cfg, &o, verify.as_ref());
    emit_report(&a.inner.model.common, &r, "oracle")?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_qmle(a: QmleArgs) -> Result<ExitCode> {
    let l = load(&a.inner.model)?;
    let g = weight(&a.inner.weight, &l)?;
    let cfg = QmleConfig {
        n_samples: a.samples,
        trials: a.trials,
        seed: a.seed.get(),
        reoptimize_every: a.reoptimize_every,
        policy: match a.policy {
            Policy::Adaptive => MeasurementPolicy::Adaptive,
            Policy::Fixed => MeasurementPolicy::FixedAtTruth,
        },
        initial_estimate: a.start.clone(),
        checkpoints: a.checkpoints.clone(),
        ..Default::default()
    };
    let run = simulate_gqmle(&l.model, &l.theta, &g, &cfg)?;
    if let Some(p) = &a.trials_csv {
        fs::write(p, run.trials_csv())?;
    }
    let common = &a.inner.model.common;
    if common.format == Some(Format::Csv) {
        emit(common, &run.trials_csv())?;
    } else {
        let cr = auto_bound(&l.geom, &g)?.cr_value;
        emit_report(common, &QmleReport::new(&l.kind, &run, cr), "simulate-qmle")?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_time_energy(a: TimeEnergyArgs) -> Result<ExitCode> {
    let text = read(&a.model)?;
    let spec = ModelSpec::from_json(&text).map_err(|e| in_file(&a.model, e))?;
    let (h, psi0, hbar) = spec.time_evolution_parts().map_err(|e| in_file(&a.model, e))?;
    let t0 = a.t0.or_else(|| spec.theta.as_ref().and_then(|t| t.first().copied())).unwrap_or(0.0);
    let r = time_energy_report(&h, &psi0, t0, a.dt, a.copies, hbar)?;
    emit_report(&a.common, &r, "time-energy")?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_selftest(a: SelftestArgs) -> Result<ExitCode> {
    let mut opts = SelftestOptions { seed: a.seed.seed.unwrap_or(SelftestOptions::default().seed), ..Default::default() };
    opts.include_exploratory = !a.quick;
    if let Some(t) = a.qmle_trials {
        opts.qmle_trials = t;
    }
    let outcomes = match a.criterion {
        Some(id) => vec![run_criterion(id, &opts)?],
        None => run_all(&opts),
    };
    let body = match a.common.format.unwrap_or(Format::Text) {
        Format::Text => {
            let mut s: String = outcomes.iter().map(|o| o.line() + "\n").collect();
            for o in &outcomes {
                if let (false, Some(why)) = (o.passed, o.documented_deviation()) {
                    s.push_str(&format!("note {}: {why}\n", o.id));
                }
            }
            s
        }
        Format::Json => serde_json::to_string_pretty(&outcomes).map_err(QestimError::from)? + "\n",
        Format::Csv => return Err(QestimError::validation("csv output is not available for selftest")),
    };
    emit(&a.common, &body)?;
    Ok(if gating_ok(&outcomes) { ExitCode::SUCCESS } else { ExitCode::from(3) })
}
