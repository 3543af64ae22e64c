use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context as _;
use blocksolve::algorithm::{AlgoParams, AlgorithmRegistry, ScheduleChoice};
use blocksolve::engine::{Regime, SolverConfig};
use blocksolve::generate::{gen_classo, gen_ncqp, random_classo_data, NcqpSpec};
use blocksolve::harness::{run_algorithm, run_experiment, Control, ExperimentConfig, RunOptions};
use blocksolve::io::{load_problem, save_problem};
use blocksolve::problem::ConstrainedProblem;
use blocksolve::stochastic::StepSchedule;
use blocksolve::validate::{derive_params, derive_stochastic_params, validate_config, validate_stochastic, ValidationReport};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "blocksolve",
    version,
    about = "Randomized primal-dual block coordinate solvers for linearly constrained convex programs",
    after_help = "Exit codes: 0 success, 1 validation failure, 2 runtime error.\n\
                  All randomness derives from --seed (separate sampling, noise and generator streams).\n\
                  BLOCKSOLVE_WORKERS, when set, overrides --workers."
)]
struct Cli {
    /// Print errors and reports as JSON
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a random test problem to a JSON file
    #[command(subcommand)]
    Generate(GenerateCmd),
    /// Run an algorithm on a problem and record a trace
    Solve(SolveArgs),
    /// Check a parameter file against the convergence conditions
    Validate(ValidateArgs),
    /// Write validator-derived parameters for a problem
    Derive(DeriveArgs),
    /// Run a batch experiment (problems x algorithms x seeds)
    Bench(BenchArgs),
}

#[derive(Subcommand, Debug)]
enum GenerateCmd {
    /// Nonnegativity-constrained QP: min 1/2 x'Qx + c'x  s.t.  Ax = b, x >= 0
    Ncqp {
        /// Number of linear constraints
        #[arg(long)]
        m: usize,
        /// Number of variables
        #[arg(long)]
        n: usize,
        /// Number of x blocks (near-equal sizes)
        #[arg(long)]
        blocks: usize,
        /// Rank deficit of Q = HH'
        #[arg(long, default_value_t = 0)]
        rank_deficit: usize,
        /// Generator seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output problem file
        #[arg(long)]
        out: PathBuf,
    },
    /// Constrained lasso in slack form: min 1/2|Ax-b|^2 + tau|x|_1  s.t.  Cx + y = d, y >= 0
    Classo {
        /// Number of observations (rows of A)
        #[arg(long)]
        obs: usize,
        /// Number of unknowns
        #[arg(long)]
        dim: usize,
        /// Number of inequality constraints (rows of C)
        #[arg(long)]
        cons: usize,
        /// l1 weight
        #[arg(long, default_value_t = 0.1)]
        tau: f64,
        /// Number of x blocks
        #[arg(long)]
        blocks: usize,
        /// Generator seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output problem file
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum AlgoArg {
    Rpdbu,
    Rpdbus,
    Lalm,
    Ladmm,
    Pjadmm,
}

impl AlgoArg {
    fn name(self) -> &'static str {
        match self {
            AlgoArg::Rpdbu => "rpdbu",
            AlgoArg::Rpdbus => "rpdbus",
            AlgoArg::Lalm => "lalm",
            AlgoArg::Ladmm => "ladmm",
            AlgoArg::Pjadmm => "pjadmm",
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum RegimeArg {
    NoY,
    SingleY,
    MultiXy,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::NoY => Regime::NoY,
            RegimeArg::SingleY => Regime::SingleY,
            RegimeArg::MultiXy => Regime::MultiXY,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ScheduleArg {
    Sqrtk,
    Fixed,
}

impl From<ScheduleArg> for ScheduleChoice {
    fn from(s: ScheduleArg) -> Self {
        match s {
            ScheduleArg::Sqrtk => ScheduleChoice::SqrtK,
            ScheduleArg::Fixed => ScheduleChoice::Fixed,
        }
    }
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Problem file (JSON)
    #[arg(long)]
    problem: PathBuf,
    /// Algorithm from the registry
    #[arg(long, value_enum, default_value_t = AlgoArg::Rpdbu)]
    algo: AlgoArg,
    /// Regime; inferred from the number of y blocks when omitted
    #[arg(long, value_enum)]
    regime: Option<RegimeArg>,
    /// x blocks sampled per iteration
    #[arg(long, default_value_t = 1)]
    n_sample: usize,
    /// y blocks sampled per iteration (default: M in single-y, nM/N in multi-xy)
    #[arg(long)]
    m_sample: Option<usize>,
    /// Penalty on the x side
    #[arg(long, default_value_t = 1.0)]
    rho_x: f64,
    /// Initial step size of the stochastic schedule
    #[arg(long, default_value_t = 1.0)]
    alpha0: f64,
    /// Step-size schedule for rpdbus
    #[arg(long, value_enum, default_value_t = ScheduleArg::Sqrtk)]
    schedule: ScheduleArg,
    /// Standard deviation of the gradient noise (rpdbus)
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    /// Multiplier damping for pjadmm
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Parameter file replacing the derived parameters
    #[arg(long)]
    config: Option<PathBuf>,
    /// Iterations to run
    #[arg(long)]
    iters: usize,
    /// Seed for the sampling and noise streams
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trace CSV output (stdout when omitted)
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Iterations between trace rows (default: N / n-sample)
    #[arg(long)]
    cadence: Option<usize>,
    /// Write 0 in the wall_s column so traces compare bitwise
    #[arg(long)]
    omit_wall_time: bool,
    /// Threads for block updates (default: available cores)
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// Problem file (JSON)
    #[arg(long)]
    problem: PathBuf,
    /// Parameter file (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Check the stochastic engine's conditions instead
    #[arg(long)]
    stochastic: bool,
    /// Schedule for --stochastic
    #[arg(long, value_enum, default_value_t = ScheduleArg::Sqrtk)]
    schedule: ScheduleArg,
    /// Initial step size for --stochastic
    #[arg(long, default_value_t = 1.0)]
    alpha0: f64,
    /// Horizon for the schedule conditions (default: maxIters from the file)
    #[arg(long)]
    t_max: Option<usize>,
}

#[derive(Args, Debug)]
struct DeriveArgs {
    /// Problem file (JSON)
    #[arg(long)]
    problem: PathBuf,
    /// Regime; inferred from the number of y blocks when omitted
    #[arg(long, value_enum)]
    regime: Option<RegimeArg>,
    /// x blocks sampled per iteration
    #[arg(long, default_value_t = 1)]
    n_sample: usize,
    /// y blocks sampled per iteration (default: M in single-y, nM/N in multi-xy)
    #[arg(long)]
    m_sample: Option<usize>,
    /// Penalty on the x side
    #[arg(long, default_value_t = 1.0)]
    rho_x: f64,
    /// Parameters for the stochastic engine
    #[arg(long)]
    stochastic: bool,
    /// maxIters written to the file
    #[arg(long, default_value_t = 0)]
    iters: usize,
    /// Seed written to the file
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output parameter file (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Experiment description (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Output directory for traces and summary.csv
    #[arg(long)]
    out: PathBuf,
}

/// An error with the exit code it maps to.
struct Failure {
    code: u8,
    kind: &'static str,
    error: anyhow::Error,
    report: Option<serde_json::Value>,
}

impl Failure {
    fn runtime(error: anyhow::Error) -> Self {
        Self {
            code: EXIT_RUNTIME,
            kind: "runtime",
            error,
            report: None,
        }
    }

    fn validation(error: anyhow::Error) -> Self {
        Self {
            code: EXIT_VALIDATION,
            kind: "validation",
            error,
            report: None,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::runtime(e)
    }
}

/// Parameter errors found before iterating count as validation failures.
fn classify(e: blocksolve::Error) -> Failure {
    match e {
        blocksolve::Error::InvalidParameter(_) | blocksolve::Error::DimensionMismatch { .. } => {
            Failure::validation(e.into())
        }
        other => Failure::runtime(other.into()),
    }
}

fn workers(flag: Option<usize>) -> Result<usize, Failure> {
    if let Ok(v) = std::env::var("BLOCKSOLVE_WORKERS") {
        return v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|w| *w >= 1)
            .ok_or_else(|| Failure::validation(anyhow::anyhow!("BLOCKSOLVE_WORKERS must be a positive integer, got `{v}`")));
    }
    Ok(flag.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())))
}

fn load(path: &Path) -> Result<ConstrainedProblem, Failure> {
    load_problem(path).map_err(|e| Failure::runtime(e.into()))
}

fn read_config(path: &Path) -> Result<SolverConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read parameter file {}", path.display()))?;
    serde_json::from_str(&text)
        .with_context(|| format!("invalid parameter file {}", path.display()))
        .map_err(Failure::runtime)
}

fn report_failure(report: &ValidationReport) -> Failure {
    let first = report
        .violations
        .first()
        .map(|v| format!("{}: {}", v.condition, v.message))
        .unwrap_or_default();
    Failure {
        code: EXIT_VALIDATION,
        kind: "validation",
        error: anyhow::anyhow!("parameters rejected ({} violation(s)); {first}", report.violations.len()),
        report: serde_json::to_value(report).ok(),
    }
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn generate(cmd: GenerateCmd, json_out: bool) -> Result<(), Failure> {
    let (problem, out) = match cmd {
        GenerateCmd::Ncqp {
            m,
            n,
            blocks,
            rank_deficit,
            seed,
            out,
        } => (
            gen_ncqp(NcqpSpec {
                m,
                n,
                blocks,
                rank_deficit,
                seed,
            })
            .map_err(classify)?,
            out,
        ),
        GenerateCmd::Classo {
            obs,
            dim,
            cons,
            tau,
            blocks,
            seed,
            out,
        } => (
            gen_classo(&random_classo_data(obs, dim, cons, seed), tau, blocks).map_err(classify)?,
            out,
        ),
    };
    save_problem(&problem, &out).map_err(|e| Failure::runtime(e.into()))?;
    if json_out {
        print_json(&json!({
            "out": out.display().to_string(),
            "xBlocks": problem.num_x_blocks(),
            "yBlocks": problem.num_y_blocks(),
            "rows": problem.row_dim(),
        }));
    }
    Ok(())
}

fn solve(args: SolveArgs, json_out: bool) -> Result<(), Failure> {
    let problem = load(&args.problem)?;
    let registry = AlgorithmRegistry::standard();
    let workers = workers(args.workers)?;
    let override_cfg = args.config.as_deref().map(read_config).transpose()?;
    let params = AlgoParams {
        regime: args.regime.map(Regime::from),
        n: Some(args.n_sample),
        m: args.m_sample,
        rho_x: Some(args.rho_x),
        seed: Some(args.seed),
        iters: Some(args.iters),
        workers: Some(workers),
        schedule: Some(args.schedule.into()),
        alpha0: Some(args.alpha0),
        sigma: Some(args.sigma),
        gamma: Some(args.gamma),
        config: override_cfg,
    };

    let mut algo = registry.build(args.algo.name(), &problem, &params).map_err(classify)?;

    // theory checks before iterating
    match args.algo {
        AlgoArg::Rpdbu => {
            let rep = validate_config(&problem, algo.config()).map_err(classify)?;
            if !rep.ok {
                return Err(report_failure(&rep));
            }
        }
        AlgoArg::Rpdbus => {
            let schedule = match args.schedule {
                ScheduleArg::Sqrtk => StepSchedule::sqrt_k(args.alpha0),
                ScheduleArg::Fixed => StepSchedule::fixed_horizon(args.iters, args.alpha0),
            }
            .map_err(classify)?;
            let (rep, _) =
                validate_stochastic(&problem, algo.config(), &schedule, args.iters.max(1)).map_err(classify)?;
            if !rep.ok {
                return Err(report_failure(&rep));
            }
        }
        AlgoArg::Lalm | AlgoArg::Ladmm | AlgoArg::Pjadmm => {}
    }

    let opts = RunOptions {
        iters: args.iters,
        cadence: args.cadence,
        record_wall_time: !args.omit_wall_time,
    };
    let out = run_algorithm(algo.as_mut(), &problem, &opts, &mut |_| Control::Continue);
    match &args.trace {
        Some(path) => out.trace.save(path).map_err(|e| Failure::runtime(e.into()))?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(out.trace.to_csv().as_bytes())
                .context("writing trace")?;
        }
    }
    if let Some(e) = out.error {
        return Err(Failure::runtime(anyhow::Error::from(e).context(format!(
            "run stopped after {} trace rows",
            out.trace.rows.len()
        ))));
    }
    if out.audit.violations > 0 {
        eprintln!(
            "warning: residual audit flagged {} of {} checks (max drift {:e})",
            out.audit.violations, out.audit.checks, out.audit.max_drift
        );
    }
    if args.trace.is_some() {
        let last = out.trace.last().copied();
        if json_out {
            print_json(&json!({
                "algo": args.algo.name(),
                "iters": algo.iteration(),
                "workers": workers,
                "rows": out.trace.rows.len(),
                "final": last,
                "audit": out.audit,
            }));
        } else if let Some(r) = last {
            println!(
                "{}: k = {}, workers = {}, obj_erg = {:.10e}, feas_erg = {:.3e}, rows = {}",
                args.algo.name(),
                r.k,
                workers,
                r.obj_erg,
                r.feas_erg,
                out.trace.rows.len()
            );
        }
    }
    Ok(())
}

fn validate(args: ValidateArgs, json_out: bool) -> Result<(), Failure> {
    let problem = load(&args.problem)?;
    let cfg = read_config(&args.config)?;
    let (report, schedule) = if args.stochastic {
        let t_max = args.t_max.unwrap_or(cfg.max_iters).max(1);
        let schedule = match args.schedule {
            ScheduleArg::Sqrtk => StepSchedule::sqrt_k(args.alpha0),
            ScheduleArg::Fixed => StepSchedule::fixed_horizon(t_max, args.alpha0),
        }
        .map_err(classify)?;
        validate_stochastic(&problem, &cfg, &schedule, t_max).map_err(classify)?
    } else {
        (validate_config(&problem, &cfg).map_err(classify)?, None)
    };
    if json_out {
        print_json(&json!({ "report": report, "schedule": schedule }));
    } else {
        println!("regime: {}", report.regime.name());
        println!("ok: {}", report.ok);
        for v in &report.violations {
            println!("violation {}: {} (lhs {:e}, rhs {:e})", v.condition, v.message, v.lhs, v.rhs);
        }
        for w in &report.warnings {
            println!("warning: {w}");
        }
        if let Some(s) = &report.suggested {
            println!(
                "suggested: {}",
                serde_json::to_string(s).expect("serializable")
            );
        }
    }
    if report.ok {
        Ok(())
    } else {
        let mut f = report_failure(&report);
        // the report is already on stdout
        f.report = None;
        Err(f)
    }
}

fn derive(args: DeriveArgs) -> Result<(), Failure> {
    let problem = load(&args.problem)?;
    let mut cfg = if args.stochastic {
        derive_stochastic_params(&problem, args.n_sample, args.rho_x).map_err(classify)?
    } else {
        let regime = args.regime.map(Regime::from).unwrap_or_else(|| Regime::infer(&problem));
        let m = match (args.m_sample, regime) {
            (Some(m), _) => m,
            (None, Regime::NoY) => 0,
            (None, Regime::SingleY) => problem.num_y_blocks(),
            (None, Regime::MultiXY) => {
                let (big_n, big_m) = (problem.num_x_blocks(), problem.num_y_blocks());
                if !(args.n_sample * big_m).is_multiple_of(big_n) {
                    return Err(Failure::validation(anyhow::anyhow!(
                        "cannot infer m-sample: n·M/N is not an integer; pass --m-sample"
                    )));
                }
                args.n_sample * big_m / big_n
            }
        };
        derive_params(&problem, regime, args.n_sample, m, args.rho_x).map_err(classify)?
    };
    cfg.max_iters = args.iters;
    cfg.seed = args.seed;
    let text = serde_json::to_string_pretty(&cfg).expect("serializable");
    match &args.out {
        Some(p) => std::fs::write(p, text + "\n").with_context(|| format!("cannot write {}", p.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn bench(args: BenchArgs, json_out: bool) -> Result<(), Failure> {
    let cfg = ExperimentConfig::load(&args.config).map_err(|e| Failure::runtime(e.into()))?;
    let base = args.config.parent().unwrap_or(Path::new("."));
    let summary = run_experiment(&cfg, &AlgorithmRegistry::standard(), base, &args.out)
        .map_err(|e| Failure::runtime(e.into()))?;
    if json_out {
        print_json(&serde_json::to_value(&summary).expect("serializable"));
    } else {
        for c in &summary.cells {
            println!(
                "{} {} seed={} {} rows={} {}",
                c.problem,
                c.algo,
                c.seed,
                if c.ok { "ok" } else { "error" },
                c.rows,
                c.message
            );
        }
    }
    let failed = summary.failures();
    if failed > 0 {
        return Err(Failure::runtime(anyhow::anyhow!(
            "{failed} of {} cells failed; see summary.csv",
            summary.cells.len()
        )));
    }
    Ok(())
}

fn emit(f: &Failure, json_out: bool) {
    if json_out {
        let mut v = json!({
            "error": {
                "kind": f.kind,
                "exitCode": f.code,
                "message": format!("{:#}", f.error),
            }
        });
        if let Some(r) = &f.report {
            v["error"]["report"] = r.clone();
        }
        eprintln!("{}", serde_json::to_string(&v).expect("serializable"));
    } else {
        eprintln!("error: {:#}", f.error);
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let json_requested = std::env::args().any(|a| a == "--json");
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            if json_requested {
                let f = Failure::runtime(anyhow::anyhow!("{}", e.to_string().trim()));
                emit(&Failure { kind: "usage", ..f }, true);
            } else {
                let _ = e.print();
            }
            return ExitCode::from(EXIT_RUNTIME);
        }
    };
    let json_out = cli.json;
    let result = match cli.command {
        Command::Generate(g) => generate(g, json_out),
        Command::Solve(a) => solve(a, json_out),
        Command::Validate(a) => validate(a, json_out),
        Command::Derive(a) => derive(a),
        Command::Bench(a) => bench(a, json_out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            emit(&f, json_out);
            ExitCode::from(f.code)
        }
    }
}
