//! `hmbo` command line: single runs, convergence studies, oracle series and
//! the self-verification suite.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hmbo::harness::{self, DtPolicy, ExperimentConfig};
use hmbo::oracles::mcf_series;
use hmbo::{hmcf_circle_radius, Error, FlowMode, Params, Reinit};

#[derive(Parser)]
#[command(name = "hmbo", version, about = "Threshold dynamics for (hyperbolic) mean curvature flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one flow on a single grid and write its radius log.
    Run(RunArgs),
    /// Run the shrinking-circle study over several grids and write the error table.
    Convergence(StudyArgs),
    /// Write a radius series from the exact or ODE circle oracle.
    Oracle(OracleArgs),
    /// Run the solver/oracle cross-check suite.
    Verify,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Mcf,
    Hmcf,
}

impl From<Mode> for FlowMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Mcf => FlowMode::Mcf,
            Mode::Hmcf => FlowMode::Hmcf,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ReinitArg {
    Exact,
    Constrained,
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    Cfl,
    Paper,
}

/// Flags shared by `run` and `convergence`; each overrides the config file.
#[derive(Args)]
struct Overrides {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    r0: Option<f64>,
    #[arg(long)]
    n_tau: Option<usize>,
    /// Comma separated grid sizes.
    #[arg(long, value_delimiter = ',')]
    grid_sizes: Option<Vec<usize>>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Initial normal speed (hmcf mode).
    #[arg(long)]
    v0: Option<f64>,
    #[arg(long, value_enum)]
    dt_policy: Option<Policy>,
    /// Shorthand for `--dt-policy paper`.
    #[arg(long)]
    paper_dt: bool,
    #[arg(long)]
    cfl_fraction: Option<f64>,
    #[arg(long)]
    max_steps: Option<usize>,
    /// Reinitialization scheme (default: exact for mcf, constrained for hmcf).
    #[arg(long, value_enum)]
    reinit: Option<ReinitArg>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Overrides,
    /// Grid size; defaults to the largest configured size.
    #[arg(long)]
    n: Option<usize>,
    /// Also write `interface_step{n}.csv` for every step.
    #[arg(long)]
    snapshots: bool,
}

#[derive(Args)]
struct StudyArgs {
    #[command(flatten)]
    common: Overrides,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, value_enum, default_value = "mcf")]
    mode: Mode,
    #[arg(long, default_value_t = 1.0)]
    r0: f64,
    /// Defaults to the mean curvature extinction time `r0^2 / (2 gamma)`.
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0.0)]
    rdot0: f64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Overrides {
    fn resolve(&self) -> hmbo::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(m) = self.mode {
            cfg.mode = m.into();
        }
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f.clone() { cfg.$f = v; })* };
        }
        set!(r0, n_tau, grid_sizes, gamma, v0, cfl_fraction);
        if self.alpha.is_some() {
            cfg.alpha = self.alpha;
        }
        if self.beta.is_some() {
            cfg.beta = self.beta;
        }
        if self.max_steps.is_some() {
            cfg.max_steps = self.max_steps;
        }
        if let Some(r) = self.reinit {
            cfg.reinit = Some(match r {
                ReinitArg::Exact => Reinit::Exact,
                ReinitArg::Constrained => Reinit::Constrained,
            });
        }
        if self.out_dir.is_some() {
            cfg.out_dir = self.out_dir.clone();
        }
        match self.dt_policy {
            Some(Policy::Cfl) => cfg.dt_policy = DtPolicy::Cfl,
            Some(Policy::Paper) => cfg.dt_policy = DtPolicy::Paper,
            None => {}
        }
        if self.paper_dt {
            cfg.dt_policy = DtPolicy::Paper;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn out_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn cmd_run(args: &RunArgs) -> hmbo::Result<()> {
    let mut cfg = args.common.resolve()?;
    cfg.snapshots |= args.snapshots;
    let n = args.n.unwrap_or_else(|| *cfg.grid_sizes.iter().max().expect("validated non-empty"));
    cfg.grid_sizes = vec![n];
    cfg.validate()?;
    let dir = out_dir(&cfg);
    fs::create_dir_all(&dir)?;
    let run = harness::run_single(&cfg, n)?;
    harness::write_run(&dir, &run)?;
    harness::write_config_echo(&dir, &cfg)?;
    println!(
        "N = {n}: {} steps, N_s tau = {:.6}, err = {:.6}{}",
        run.records.len(),
        run.extinction_time(),
        run.err,
        if run.went_extinct() { "" } else { " (no extinction)" }
    );
    Ok(())
}

fn cmd_convergence(args: &StudyArgs) -> hmbo::Result<bool> {
    let cfg = args.common.resolve()?;
    let dir = out_dir(&cfg);
    let report = harness::convergence_study(&cfg)?;
    harness::write_report(&dir, &cfg, &report)?;
    println!("{:>6} {:>10} {:>12}", "N", "N_s tau", "Err");
    for r in &report.rows {
        println!("{:>6} {:>10.6} {:>12.6}", r.n, r.ns_tau, r.err);
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for (n, e) in &report.failures {
        eprintln!("error: N = {n} failed: {e}");
    }
    Ok(report.failures.is_empty())
}

fn cmd_oracle(args: &OracleArgs) -> hmbo::Result<()> {
    let series = match args.mode {
        Mode::Mcf => {
            let t_end = args.t_end.unwrap_or(args.r0 * args.r0 / (2.0 * args.gamma));
            mcf_series(args.r0, args.gamma, t_end, args.dt)?
        }
        Mode::Hmcf => {
            let t_end = args
                .t_end
                .ok_or_else(|| Error::Config("--t-end is required in hmcf mode".into()))?;
            let p = Params { alpha: args.alpha, beta: args.beta, gamma: args.gamma };
            hmcf_circle_radius(&p, args.r0, args.rdot0, t_end, args.dt)?
        }
    };
    match &args.out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            let mut w = BufWriter::new(fs::File::create(path)?);
            series.write_csv(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            series.write_csv(stdout.lock())?;
        }
    }
    Ok(())
}

fn cmd_verify() -> hmbo::Result<bool> {
    let checks = hmbo::verify::quick_suite()?;
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(checks.iter().all(|c| c.passed))
}

fn init_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("HMCF_THREADS") else { return Ok(()) };
    let n: usize = raw.trim().parse().map_err(|_| format!("HMCF_THREADS must be an integer, got {raw:?}"))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if e.is_numerical() { 2 } else { 1 })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(1);
    }
    let outcome = match &cli.command {
        Command::Run(a) => cmd_run(a).map(|()| true),
        Command::Convergence(a) => cmd_convergence(a),
        Command::Oracle(a) => cmd_oracle(a).map(|()| true),
        Command::Verify => cmd_verify(),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => fail(&e),
    }
}
