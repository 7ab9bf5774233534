use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use swarm_sync::analysis::{sync_times, AnalysisError};
use swarm_sync::engine::{simulate, validate, EngineError, EscortPolicy, SimOptions, ValidateOptions};
use swarm_sync::format::{read_config, read_trace, report_json, write_config, write_trace, FormatError};
use swarm_sync::scenarios::{
    gen_five_drone_three_groups, gen_n_drone_worst, gen_phase2_sharp, gen_random, gen_three_drone_worst,
    gen_two_drone_worst, EstimateMode, RandomOptions, ScenarioError,
};
use swarm_sync::svg::{render, SvgOptions};
use swarm_sync::verify::{self, SimSuiteOptions, Suite, SuiteReport};
use swarm_sync::{Configuration, Rational, Scalar};

const EVENT_CAP_ENV: &str = "SWARM_SYNC_EVENT_CAP";

#[derive(Parser)]
#[command(name = "swarm-sync", version, about = "Exact simulator for drone perimeter synchronization")]
struct Cli {
    /// Who a drone escorts when its two neighbours pull it apart.
    #[arg(long, global = true, value_enum)]
    policy: Option<PolicyArg>,
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Output path; stdout when omitted.
    #[arg(short = 'o', long = "out", global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    EscortLeft,
    EscortRight,
}

impl From<PolicyArg> for EscortPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::EscortLeft => EscortPolicy::EscortLeft,
            PolicyArg::EscortRight => EscortPolicy::EscortRight,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioName {
    ThreeWorst,
    NWorst,
    FiveThreeGroups,
    Phase2Sharp,
    TwoWorst,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatesArg {
    Correct,
    Incorrect,
    Unconstrained,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Phase2,
    Combined,
    Lemmas,
    Algebra,
    AlgebraPlusOnes,
    LowerBounds,
}

#[derive(Subcommand)]
enum Command {
    /// Write a scenario configuration.
    Scenario {
        #[arg(value_enum)]
        name: ScenarioName,
        /// Count scale of the lower-bound constructions.
        #[arg(long = "N", default_value_t = 1_000_000)]
        big_n: u64,
        #[arg(long = "n", default_value_t = 5)]
        n: usize,
        #[arg(long, default_value = "1/1000")]
        eps: String,
        #[arg(long, value_enum, default_value = "correct")]
        estimates: EstimatesArg,
    },
    /// Simulate a configuration and write a JSON-lines trace.
    Run {
        config: PathBuf,
        #[arg(long, default_value = "6")]
        t_max: String,
        /// Also settable through SWARM_SYNC_EVENT_CAP.
        #[arg(long)]
        event_cap: Option<u64>,
    },
    /// Print phase-1 and synchronization times of a trace.
    Analyze { trace: PathBuf },
    /// Render a trace as a time-space diagram.
    Svg {
        trace: PathBuf,
        #[arg(long, default_value_t = 600)]
        width: u32,
        #[arg(long, default_value_t = 900)]
        height: u32,
        #[arg(long)]
        events: bool,
        #[arg(long)]
        no_grid: bool,
    },
    /// Run a verification suite.
    Verify {
        #[arg(value_enum)]
        suite: SuiteArg,
        #[arg(long, default_value_t = 8)]
        n_max: usize,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long = "N", default_value_t = 1_000_000)]
        big_n: u64,
        #[arg(long, default_value = "1/1000")]
        eps: String,
        #[arg(long, default_value = "6")]
        t_max: String,
        #[arg(long)]
        event_cap: Option<u64>,
    },
}

/// Failure with the process exit code it maps to.
struct Failure {
    code: u8,
    name: String,
    message: String,
}

impl Failure {
    fn new(code: u8, name: &str, message: impl ToString) -> Self {
        Self {
            code,
            name: name.to_string(),
            message: message.to_string(),
        }
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        Failure::new(if e.is_guard() { 3 } else { 2 }, e.name(), e)
    }
}

impl From<FormatError> for Failure {
    fn from(e: FormatError) -> Self {
        match e {
            FormatError::Engine(e) => e.into(),
            e => Failure::new(2, e.name(), e),
        }
    }
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        Failure::new(2, e.name(), e)
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        Failure::new(2, "ParamError", e)
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::new(1, "IOError", format!("{e:#}"))
    }
}

fn rational(flag: &str, s: &str) -> Result<Rational, Failure> {
    Rational::parse_exact(s).map_err(|e| Failure::new(2, "ParamError", format!("--{flag}: {e}")))
}

fn event_cap(flag: Option<u64>) -> Result<Option<u64>, Failure> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(EVENT_CAP_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::new(2, "ParamError", format!("{EVENT_CAP_ENV}={v:?} is not a count"))),
        Err(_) => Ok(None),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    Ok(fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?)
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .context("writing stdout")?,
    }
    Ok(())
}

fn scenario(
    cli: &Cli,
    name: ScenarioName,
    big_n: u64,
    n: usize,
    eps: &str,
    estimates: EstimatesArg,
) -> Result<(), Failure> {
    let cfg: Configuration = match name {
        ScenarioName::ThreeWorst => gen_three_drone_worst(big_n)?,
        ScenarioName::NWorst => gen_n_drone_worst(n, big_n)?,
        ScenarioName::FiveThreeGroups => gen_five_drone_three_groups(),
        ScenarioName::Phase2Sharp => gen_phase2_sharp(n, &rational("eps", eps)?)?,
        ScenarioName::TwoWorst => gen_two_drone_worst(&rational("eps", eps)?)?,
        ScenarioName::Random => {
            let mode = match estimates {
                EstimatesArg::Correct => EstimateMode::Correct,
                EstimatesArg::Incorrect => EstimateMode::Incorrect,
                EstimatesArg::Unconstrained => EstimateMode::Unconstrained,
            };
            gen_random(n, cli.seed, &RandomOptions { mode, ..Default::default() })?
        }
    };
    let policy = cli.policy.map(EscortPolicy::from).unwrap_or_default();
    emit(&cli.out, &write_config(&cfg, policy))?;
    let summary = format!(
        "{} drones, {} start groups, policy {}",
        cfg.n(),
        1 + cfg
            .drones
            .windows(2)
            .filter(|w| !(w[0].pos == w[1].pos && w[0].dir == w[1].dir))
            .count(),
        policy.as_str()
    );
    if cli.out.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(())
}

fn run(cli: &Cli, config: &Path, t_max: &str, cap: Option<u64>) -> Result<(), Failure> {
    let (cfg, file_policy) = read_config::<Rational>(&read(config)?)?;
    let policy = cli.policy.map(EscortPolicy::from).unwrap_or(file_policy);
    let cfg = validate(&cfg, &ValidateOptions::default())?;
    let opts = SimOptions {
        policy,
        event_cap: event_cap(cap)?,
    };
    let trace = simulate(&cfg, &rational("t-max", t_max)?, &opts)?;
    emit(&cli.out, &write_trace(&trace))
}

fn analyze(cli: &Cli, path: &Path) -> Result<(), Failure> {
    let trace = read_trace::<Rational>(&read(path)?)?;
    let report = sync_times(&trace)?;
    let mut text = serde_json::to_string_pretty(&report_json(&report)).expect("report serializes");
    text.push('\n');
    emit(&cli.out, &text)
}

fn svg(cli: &Cli, path: &Path, opts: SvgOptions) -> Result<(), Failure> {
    let trace = read_trace::<Rational>(&read(path)?)?;
    emit(&cli.out, &render(&trace, &opts))
}

/// Writes failing configurations and their traces under `dir`.
fn dump_failures(report: &SuiteReport, dir: &Path) -> anyhow::Result<Vec<String>> {
    let mut lines = Vec::new();
    for (k, f) in report.failures.iter().enumerate().take(20) {
        let Some(cfg) = &f.config else {
            lines.push(f.what.clone());
            continue;
        };
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let cfg_path = dir.join(format!("failure-{k}.json"));
        fs::write(&cfg_path, write_config(cfg, f.policy))?;
        let mut line = format!("{}\n  config: {}", f.what, cfg_path.display());
        if let Ok(trace) = verify::run_config(cfg, &f.t_max, f.policy, None) {
            let trace_path = dir.join(format!("failure-{k}.jsonl"));
            fs::write(&trace_path, write_trace(&trace))?;
            line.push_str(&format!("\n  trace: {}", trace_path.display()));
        }
        lines.push(line);
    }
    Ok(lines)
}

#[allow(clippy::too_many_arguments)]
fn verify_cmd(
    cli: &Cli,
    suite: SuiteArg,
    n_max: usize,
    trials: u64,
    big_n: u64,
    eps: &str,
    t_max: &str,
    cap: Option<u64>,
) -> Result<(), Failure> {
    let eps = rational("eps", eps)?;
    let opts = SimSuiteOptions {
        n_min: 1,
        n_max,
        trials,
        seed: cli.seed,
        t_max: rational("t-max", t_max)?,
        policy: cli.policy.map(EscortPolicy::from).unwrap_or_default(),
        event_cap: event_cap(cap)?,
    };
    let suite = match suite {
        SuiteArg::Phase2 => Suite::Phase2,
        SuiteArg::Combined => Suite::Combined,
        SuiteArg::Lemmas => Suite::Lemmas,
        SuiteArg::Algebra => Suite::Algebra,
        SuiteArg::AlgebraPlusOnes => Suite::AlgebraPlusOnes,
        SuiteArg::LowerBounds => Suite::LowerBounds,
    };
    let report = match suite {
        Suite::Phase2 => verify::verify_phase2(&opts, &eps),
        Suite::Combined => verify::verify_combined(&opts),
        Suite::Lemmas => verify::verify_lemmas(&opts, &eps),
        Suite::Algebra => verify::verify_algebra(trials, cli.seed),
        Suite::AlgebraPlusOnes => verify::verify_algebra_plus_ones(trials, cli.seed),
        Suite::LowerBounds => verify::verify_lower_bounds(big_n, &[3, 5, 10, 20]),
    };
    for c in &report.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!(
        "{} runs, {} guard trips, at most {} events per drone",
        report.runs, report.guard_trips, report.max_events_per_drone
    );
    for w in &report.witnesses {
        println!("witness {w}");
    }
    if let Some(dir) = &cli.out {
        if !report.witnesses.is_empty() {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let text = serde_json::to_string_pretty(&report.witnesses).expect("witnesses serialize");
            fs::write(dir.join("witnesses.json"), text + "\n").context("writing witnesses")?;
        }
    }
    if report.passed() {
        println!("{}: pass", suite.as_str());
        return Ok(());
    }
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("verify-failures"));
    for line in dump_failures(&report, &dir)? {
        println!("counterexample: {line}");
    }
    Err(Failure::new(
        4,
        "VerificationFailure",
        format!("{} failed ({} failing runs)", suite.as_str(), report.failures.len()),
    ))
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Scenario {
            name,
            big_n,
            n,
            eps,
            estimates,
        } => scenario(cli, *name, *big_n, *n, eps, *estimates),
        Command::Run {
            config,
            t_max,
            event_cap,
        } => run(cli, config, t_max, *event_cap),
        Command::Analyze { trace } => analyze(cli, trace),
        Command::Svg {
            trace,
            width,
            height,
            events,
            no_grid,
        } => svg(
            cli,
            trace,
            SvgOptions {
                width: *width,
                height: *height,
                gridlines: !no_grid,
                event_markers: *events,
            },
        ),
        Command::Verify {
            suite,
            n_max,
            trials,
            big_n,
            eps,
            t_max,
            event_cap,
        } => verify_cmd(cli, *suite, *n_max, *trials, *big_n, eps, t_max, *event_cap),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}: {}", f.name, f.message);
            ExitCode::from(f.code)
        }
    }
}
