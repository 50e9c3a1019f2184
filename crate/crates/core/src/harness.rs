//! Shrinking-circle experiments: configuration, the per-grid convergence
//! study, the time-integrated radius error and CSV/JSON reporting.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Grid2D, Point, ScalarField};
use crate::flow::{run_flow_with, FlowMode, HmboConfig, PhysicalParams, RunOptions, RunRecord};
use crate::interface::{average_radius, extract_zero_set, Reinit};
use crate::oracles::{exact_mcf_radius_with_tension, hmcf_circle_radius, RadiusSeries};
use crate::wave::cfl_max_dt;

/// Fixed substep used for literal reproduction runs.
pub const PAPER_DT: f64 = 2.22e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DtPolicy {
    /// `cfl_fraction` of the stability bound, rounded down so it divides `tau`.
    #[default]
    Cfl,
    /// The fixed substep [`PAPER_DT`] (capped by the CFL fraction).
    Paper,
}

/// Flat experiment description; every key has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: FlowMode,
    pub r0: f64,
    pub n_tau: usize,
    pub grid_sizes: Vec<usize>,
    pub bounds: [f64; 4],
    pub gamma: f64,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub dt_policy: DtPolicy,
    pub cfl_fraction: f64,
    /// Initial normal speed (hyperbolic mode only).
    pub v0: f64,
    /// Defaults to `2 n_tau`.
    pub max_steps: Option<usize>,
    pub out_dir: Option<PathBuf>,
    /// Reinitialization scheme; `None` picks the mode default.
    pub reinit: Option<Reinit>,
    /// Write `interface_step{n}.csv` files for single runs.
    pub snapshots: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: FlowMode::Mcf,
            r0: 1.0,
            n_tau: 150,
            grid_sizes: vec![16, 32, 64, 128, 256],
            bounds: [-2.0, 2.0, -2.0, 2.0],
            gamma: 1.0,
            alpha: None,
            beta: None,
            dt_policy: DtPolicy::Cfl,
            cfl_fraction: 0.5,
            v0: 0.0,
            max_steps: None,
            out_dir: None,
            reinit: None,
            snapshots: false,
        }
    }
}

/// Quantities derived from the configuration for one grid size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Derived {
    pub n: usize,
    pub dx: f64,
    pub dy: f64,
    pub tau: f64,
    pub c2: f64,
    pub dt: f64,
    pub max_steps: usize,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.r0 > 0.0) {
            return bad(format!("r0 must be positive, got {}", self.r0));
        }
        if self.n_tau == 0 {
            return bad("n_tau must be at least 1".into());
        }
        if self.grid_sizes.is_empty() {
            return bad("grid_sizes is empty".into());
        }
        if let Some(n) = self.grid_sizes.iter().find(|&&n| n < 8) {
            return bad(format!("grid size {n} is below the minimum of 8"));
        }
        if !(self.gamma > 0.0) {
            return bad(format!("gamma must be positive, got {}", self.gamma));
        }
        if !(self.cfl_fraction > 0.0 && self.cfl_fraction <= 1.0) {
            return bad(format!("cfl_fraction must lie in (0, 1], got {}", self.cfl_fraction));
        }
        if self.mode == FlowMode::Hmcf {
            let p = self.physical();
            if !(p.alpha > 0.0) || p.beta < 0.0 {
                return bad("hyperbolic mode needs alpha > 0 and beta >= 0".into());
            }
        }
        let [x0, x1, y0, y1] = self.bounds;
        if !(x1 > x0 && y1 > y0) {
            return bad(format!("degenerate bounds {:?}", self.bounds));
        }
        Ok(())
    }

    pub fn physical(&self) -> PhysicalParams<f64> {
        PhysicalParams {
            alpha: self.alpha.unwrap_or(1.0),
            beta: self.beta.unwrap_or(1.0),
            gamma: self.gamma,
        }
    }

    /// Extinction time of the exact mean curvature circle, `r0^2 / (2 gamma)`.
    pub fn extinction_time(&self) -> f64 {
        self.r0 * self.r0 / (2.0 * self.gamma)
    }

    /// `tau = t_e / n_tau`.
    pub fn tau(&self) -> f64 {
        self.extinction_time() / self.n_tau as f64
    }

    pub fn c2(&self) -> Result<f64> {
        match self.mode {
            FlowMode::Mcf => crate::flow::mcf_c2_for_gamma(self.gamma, self.tau()),
            FlowMode::Hmcf => Ok(crate::flow::map_params(&self.physical())?.c2),
        }
    }

    pub fn grid(&self, n: usize) -> Result<Grid2D<f64>> {
        Grid2D::new(n, n, self.bounds)
    }

    pub fn derived(&self, n: usize) -> Result<Derived> {
        let grid = self.grid(n)?;
        let tau = self.tau();
        let c2 = self.c2()?;
        let cap = self.cfl_fraction * cfl_max_dt(c2, &grid)?;
        let dt = match self.dt_policy {
            DtPolicy::Cfl => tau / (tau / cap).ceil(),
            DtPolicy::Paper => PAPER_DT.min(cap),
        };
        Ok(Derived {
            n,
            dx: grid.dx(),
            dy: grid.dy(),
            tau,
            c2,
            dt,
            max_steps: self.max_steps.unwrap_or(2 * self.n_tau),
        })
    }

    pub fn hmbo_config(&self, n: usize) -> Result<HmboConfig<f64>> {
        let d = self.derived(n)?;
        let grid = self.grid(n)?;
        let cfg = match self.mode {
            FlowMode::Mcf => HmboConfig::mcf(grid, self.gamma, d.tau, d.dt, d.max_steps)?,
            FlowMode::Hmcf => HmboConfig::hmcf(grid, &self.physical(), d.tau, d.dt, d.max_steps)?,
        };
        Ok(match self.reinit {
            Some(r) => cfg.with_reinit(r),
            None => cfg,
        })
    }

    /// Signed distance of the initial circle, `|x| - r0` (positive outside).
    pub fn initial_field(&self, n: usize) -> Result<ScalarField<f64>> {
        let r0 = self.r0;
        Ok(ScalarField::from_fn(&self.grid(n)?, move |p| p.norm() - r0))
    }

    /// Exact radius at `t`: the closed form in MCF mode, the RK4 oracle otherwise.
    pub fn reference_series(&self, steps: usize) -> Result<RadiusSeries<f64>> {
        let tau = self.tau();
        match self.mode {
            FlowMode::Mcf => {
                let times: Vec<f64> = (0..=steps).map(|i| i as f64 * tau).collect();
                let radii = times
                    .iter()
                    .map(|&t| exact_mcf_radius_with_tension(self.r0, self.gamma, t))
                    .collect();
                let te = self.extinction_time();
                Ok(RadiusSeries {
                    times,
                    radii,
                    rates: None,
                    extinction_time: (te <= steps as f64 * tau).then_some(te),
                })
            }
            FlowMode::Hmcf => {
                let t_end = steps as f64 * tau;
                let ode = hmcf_circle_radius(&self.physical(), self.r0, self.v0, t_end.max(tau), tau)?;
                let times: Vec<f64> = (0..=steps).map(|i| i as f64 * tau).collect();
                let radii = times.iter().map(|&t| ode.sample(t)).collect();
                Ok(RadiusSeries { times, radii, rates: None, extinction_time: ode.extinction_time })
            }
        }
    }
}

/// `sum_{i=0}^{n_s} |r(i tau) - r~(i tau)| tau`, where both series are sampled
/// at `i tau`.
pub fn error_integral(
    exact: &RadiusSeries<f64>,
    numeric: &RadiusSeries<f64>,
    tau: f64,
    n_s: usize,
) -> Result<f64> {
    for s in [exact, numeric] {
        if s.radii.len() < n_s + 1 {
            return Err(Error::LengthMismatch { expected: n_s + 1, found: s.radii.len() });
        }
    }
    Ok((0..=n_s).map(|i| (exact.radii[i] - numeric.radii[i]).abs() * tau).sum())
}

/// One finished flow on one grid.
#[derive(Debug, Clone)]
pub struct SingleRun {
    pub derived: Derived,
    pub records: Vec<RunRecord<f64>>,
    /// Average radius at `i tau`, `i = 0..=n_s`; zero at a numerical extinction.
    pub numeric: RadiusSeries<f64>,
    /// Steps until the radius disappears (or the last step taken).
    pub n_s: usize,
    pub err: f64,
}

impl SingleRun {
    pub fn extinction_time(&self) -> f64 {
        self.n_s as f64 * self.derived.tau
    }

    pub fn went_extinct(&self) -> bool {
        self.records.last().is_some_and(|r| r.extinct)
    }

    /// Writes the `step,t,avg_radius,extinct` log including the initial state.
    pub fn write_log<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "step,t,avg_radius,extinct")?;
        writeln!(w, "0,0,{},false", self.numeric.radii[0])?;
        for r in &self.records {
            writeln!(w, "{},{},{},{}", r.step, r.time, r.avg_radius.unwrap_or(0.0), r.extinct)?;
        }
        Ok(())
    }
}

/// Runs the circle flow on an `n x n` grid and measures the radius error.
pub fn run_single(cfg: &ExperimentConfig, n: usize) -> Result<SingleRun> {
    cfg.validate()?;
    let hmbo = cfg.hmbo_config(n)?;
    let derived = cfg.derived(n)?;
    let d0 = cfg.initial_field(n)?;
    let opts = RunOptions { center: Point::origin(), keep_snapshots: cfg.snapshots };
    let records = run_flow_with(&hmbo, &d0, cfg.v0, &opts)?;

    let r_init = average_radius(&extract_zero_set(&d0), opts.center)?;
    let mut times = vec![0.0];
    let mut radii = vec![r_init];
    for r in &records {
        times.push(r.time);
        radii.push(r.avg_radius.unwrap_or(0.0));
    }
    let n_s = records.len();
    let extinct = records.last().is_some_and(|r| r.extinct);
    let numeric = RadiusSeries {
        times,
        radii,
        rates: None,
        extinction_time: extinct.then_some(n_s as f64 * derived.tau),
    };
    let exact = cfg.reference_series(n_s)?;
    let err = error_integral(&exact, &numeric, derived.tau, n_s)?;
    Ok(SingleRun { derived, records, numeric, n_s, err })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorRow {
    pub n: usize,
    pub n_s: usize,
    pub ns_tau: f64,
    pub err: f64,
}

/// Convergence table, sorted by grid size.
#[derive(Debug, Clone, Default)]
pub struct ErrorReport {
    pub rows: Vec<ErrorRow>,
    pub runs: Vec<SingleRun>,
    /// Grid sizes whose run failed, with the error message.
    pub failures: Vec<(usize, String)>,
    /// Soft findings such as a non-monotone error column.
    pub warnings: Vec<String>,
}

impl ErrorReport {
    pub fn row(&self, n: usize) -> Option<&ErrorRow> {
        self.rows.iter().find(|r| r.n == n)
    }

    /// Writes `N,ns_tau,err`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "N,ns_tau,err")?;
        for r in &self.rows {
            writeln!(w, "{},{:.6},{:.9}", r.n, r.ns_tau, r.err)?;
        }
        Ok(())
    }
}

/// Runs every configured grid size (in parallel) and tabulates the error.
pub fn convergence_study(cfg: &ExperimentConfig) -> Result<ErrorReport> {
    cfg.validate()?;
    let mut sizes = cfg.grid_sizes.clone();
    sizes.sort_unstable();
    sizes.dedup();
    let results: Vec<(usize, Result<SingleRun>)> =
        sizes.par_iter().map(|&n| (n, run_single(cfg, n))).collect();

    let mut report = ErrorReport::default();
    for (n, res) in results {
        match res {
            Ok(run) => {
                report.rows.push(ErrorRow { n, n_s: run.n_s, ns_tau: run.extinction_time(), err: run.err });
                report.runs.push(run);
            }
            Err(e) => report.failures.push((n, e.to_string())),
        }
    }
    for w in report.rows.windows(2) {
        if w[1].err >= w[0].err {
            report.warnings.push(format!(
                "error does not decrease from N = {} ({:.6}) to N = {} ({:.6})",
                w[0].n, w[0].err, w[1].n, w[1].err
            ));
        }
    }
    Ok(report)
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

/// `config_echo.json`: the configuration plus the derived per-grid parameters.
pub fn write_config_echo(dir: &Path, cfg: &ExperimentConfig) -> Result<()> {
    let derived = cfg
        .grid_sizes
        .iter()
        .map(|&n| cfg.derived(n))
        .collect::<Result<Vec<_>>>()?;
    let echo = serde_json::json!({
        "config": cfg,
        "t_e": cfg.extinction_time(),
        "tau": cfg.tau(),
        "c2": cfg.c2()?,
        "derived": derived,
    });
    let mut w = create(&dir.join("config_echo.json"))?;
    serde_json::to_writer_pretty(&mut w, &echo)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Writes `run_{N}.csv` and, when recorded, `interface_step{n}.csv`.
pub fn write_run(dir: &Path, run: &SingleRun) -> Result<()> {
    let mut w = create(&dir.join(format!("run_{}.csv", run.derived.n)))?;
    run.write_log(&mut w)?;
    w.flush()?;
    for rec in &run.records {
        if let Some(curve) = &rec.snapshot {
            let mut w = create(&dir.join(format!("interface_step{}.csv", rec.step)))?;
            curve.write_csv(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

/// Writes `error_table.csv`, every `run_{N}.csv` and `config_echo.json`.
pub fn write_report(dir: &Path, cfg: &ExperimentConfig, report: &ErrorReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = create(&dir.join("error_table.csv"))?;
    report.write_csv(&mut w)?;
    w.flush()?;
    for run in &report.runs {
        write_run(dir, run)?;
    }
    write_config_echo(dir, cfg)
}
