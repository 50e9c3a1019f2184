//! Self-checks of the solver stack against the independent oracles.
//!
//! Each function measures one property and returns the raw numbers; the
//! caller decides on tolerances. [`quick_suite`] bundles cheap versions of all
//! of them with fixed thresholds.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::field::{Grid2D, Point, ScalarField};
use crate::flow::{hmbo_step, FlowState, HmboConfig};
use crate::interface::{average_radius, eikonal_check, extract_zero_set};
use crate::oracles::poisson_eval;
use crate::wave::{cfl_max_dt, wave_solve, wave_solve_logged, WaveParams};

/// The four moment identities, as `(v0, closed form)` for curvature-like
/// coefficient `kappa`, speed `c`, time `t` and point `x`.
pub fn moment_identity(which: usize, kappa: f64, c: f64, t: f64, x: Point<f64>) -> (f64, f64) {
    let (x1, x2) = (x.x, x.y);
    let ct2 = c * c * t * t;
    let closed = match which {
        0 => -t * x2,
        1 => -t * kappa * (ct2 / 6.0 + x1 * x1 / 2.0),
        2 => -(t * kappa / 6.0) * (ct2 * x1 + x1.powi(3)),
        _ => t * kappa * kappa * (ct2 * x2 / 6.0 + x1 * x1 * x2 / 2.0),
    };
    let v0 = poisson_eval(
        |_| 0.0,
        |_| [0.0, 0.0],
        |y: Point<f64>| match which {
            0 => y.y,
            1 => 0.5 * kappa * y.x * y.x,
            2 => kappa / 6.0 * y.x.powi(3),
            _ => -0.5 * kappa * kappa * y.x * y.x * y.y,
        },
        c,
        t,
        x,
        200,
    )
    .expect("valid quadrature arguments");
    (v0, closed)
}

/// Relative error `|a - b| / max(|b|, floor)`.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / b.abs().max(floor)
}

/// Smooth polynomial test data for the solver/formula comparison.
fn poly_u0(p: Point<f64>) -> f64 {
    0.5 + p.x.powi(3) - 2.0 * p.x * p.x * p.y * p.y + 0.3 * p.y
}

fn poly_grad_u0(p: Point<f64>) -> [f64; 2] {
    [3.0 * p.x * p.x - 4.0 * p.x * p.y * p.y, -4.0 * p.x * p.x * p.y + 0.3]
}

fn poly_v0(p: Point<f64>) -> f64 {
    1.0 + p.x * p.x + 3.0 * p.x * p.y + p.y.powi(4)
}

/// Solves the wave equation on `(-2, 2)^2` with `n` nodes per side up to
/// `tau` at `cfl_fraction` of the stability bound and returns
/// `(solver, poisson)` at `x`. The solver starts from `u_t(0) = velocity_sign v0`;
/// the formula always uses `u_t(0) = -v0`, so `-1` is the consistent choice.
pub fn solver_vs_poisson(
    n: usize,
    c: f64,
    tau: f64,
    cfl_fraction: f64,
    x: Point<f64>,
    velocity_sign: f64,
) -> Result<(f64, f64)> {
    let g = Grid2D::square(n, -2.0, 2.0)?;
    let c2 = c * c;
    let dt = cfl_fraction * cfl_max_dt(c2, &g)?;
    let u0 = ScalarField::from_fn(&g, poly_u0);
    let ut0 = ScalarField::from_fn(&g, |p| velocity_sign * poly_v0(p));
    let u = wave_solve(&u0, &ut0, &WaveParams::new(c2, dt, tau))?;
    let num = u.eval_bilinear(x)?;
    let exact = poisson_eval(poly_u0, poly_grad_u0, poly_v0, c, tau, x, 200)?;
    Ok((num, exact))
}

/// Neumann eigenmode `cos(pi (x + 2) / 4) cos(pi (y + 2) / 4)` on `(-2, 2)^2`.
fn standing_mode(p: Point<f64>) -> f64 {
    let k = PI / 4.0;
    (k * (p.x + 2.0)).cos() * (k * (p.y + 2.0)).cos()
}

#[derive(Debug, Clone, Copy)]
pub struct StandingMode {
    /// Max-norm error at `t = tau` on the coarse and the refined grid.
    pub coarse: f64,
    pub fine: f64,
    /// `coarse / fine`.
    pub ratio: f64,
    /// Largest relative energy change over the window on either grid.
    pub energy_drift: f64,
}

/// Standing-mode error at `tau` on `n` nodes and on `2n - 1` nodes (half the
/// spacing) with half the substep.
pub fn standing_mode_order(n: usize, c2: f64, tau: f64, cfl_fraction: f64) -> Result<StandingMode> {
    let omega = c2.sqrt() * 2f64.sqrt() * PI / 4.0;
    let coarse_grid = Grid2D::square(n, -2.0, 2.0)?;
    let steps = (tau / (cfl_fraction * cfl_max_dt(c2, &coarse_grid)?)).ceil();
    let run = |n: usize, dt: f64| -> Result<(f64, f64)> {
        let g = Grid2D::square(n, -2.0, 2.0)?;
        let u0 = ScalarField::from_fn(&g, standing_mode);
        let ut0 = ScalarField::zeros(&g);
        let mut energies = Vec::new();
        let u = wave_solve_logged(&u0, &ut0, &WaveParams::new(c2, dt, tau), |_, _, e| energies.push(e))?;
        let err = u.max_abs_diff(&u0.scaled((omega * tau).cos()))?;
        let e0 = energies[0];
        let drift = energies.iter().fold(0.0f64, |m, e| m.max(((e - e0) / e0).abs()));
        Ok((err, drift))
    };
    let dt = tau / steps;
    let (coarse, d1) = run(n, dt)?;
    let (fine, d2) = run(2 * n - 1, 0.5 * dt)?;
    Ok(StandingMode { coarse, fine, ratio: coarse / fine, energy_drift: d1.max(d2) })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EikonalRun {
    pub steps: usize,
    pub max_residual: f64,
    pub checked: usize,
    pub ridge_nodes: usize,
}

/// Runs `steps` steps of `cfg` from `d0` and scans every redistanced field.
pub fn eikonal_over_run(cfg: &HmboConfig<f64>, d0: &ScalarField<f64>, steps: usize) -> Result<EikonalRun> {
    let g = cfg.grid.clone();
    let mut state = FlowState::initial(cfg, d0, 0.0)?;
    let mut out = EikonalRun::default();
    for _ in 0..steps {
        let stepped = hmbo_step(state, cfg)?;
        state = stepped.state;
        let Some(curve) = stepped.curve else { break };
        let r = eikonal_check(&state.d_n, &curve, 3.0 * g.dx(), 2.0 * g.dx())?;
        out.steps += 1;
        out.max_residual = out.max_residual.max(r.max_residual);
        out.checked += r.checked;
        out.ridge_nodes += r.ridge_nodes;
    }
    Ok(out)
}

/// Mean over `radii` of `|(r~_0 - r~_1) / tau - gamma / r|` after one MCF step
/// on an `n x n` grid over `(-2, 2)^2`, where `r~` is the extracted mean radius.
pub fn one_step_mcf_error(n: usize, gamma: f64, tau: f64, radii: &[f64]) -> Result<f64> {
    let g = Grid2D::square(n, -2.0, 2.0)?;
    let c2 = 6.0 * gamma / tau;
    let dt = tau / (tau / (0.5 * cfl_max_dt(c2, &g)?)).ceil();
    let cfg = HmboConfig::mcf(g.clone(), gamma, tau, dt, 1)?;
    let mut total = 0.0;
    for &r in radii {
        let d0 = ScalarField::from_fn(&g, move |p| p.norm() - r);
        let r0 = average_radius(&extract_zero_set(&d0), Point::origin())?;
        let out = hmbo_step(FlowState::initial(&cfg, &d0, 0.0)?, &cfg)?;
        let curve = out.curve.ok_or(Error::EmptyInterface)?;
        let r1 = average_radius(&curve, Point::origin())?;
        total += ((r0 - r1) / tau - gamma / r).abs();
    }
    Ok(total / radii.len() as f64)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Outcome of one named check.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Check { name, passed, detail }
    }
}

/// Small, fast versions of all checks (a few seconds in release builds).
pub fn quick_suite() -> Result<Vec<Check>> {
    let mut checks = Vec::new();

    let mut worst = 0.0f64;
    for which in 0..4 {
        for &(x1, x2, t) in &[(0.05, -0.03, 0.02), (-0.08, 0.06, 0.07), (0.1, 0.0, 0.1)] {
            for &kappa in &[-2.0, 1.0] {
                for &c in &[1.0, 2f64.sqrt()] {
                    let (q, exact) = moment_identity(which, kappa, c, t, Point::new(x1, x2));
                    worst = worst.max(rel_err(q, exact, 1e-11));
                }
            }
        }
    }
    checks.push(Check::new("poisson moment identities", worst < 1e-6, format!("max rel err {worst:.3e}")));

    let x = Point::new(0.3, -0.2);
    let (num, exact) = solver_vs_poisson(129, 1.0, 0.1, 0.5, x, -1.0)?;
    let rel = rel_err(num, exact, 1e-12);
    checks.push(Check::new(
        "wave solver vs poisson formula",
        rel < 1e-2,
        format!("solver {num:.8} formula {exact:.8} rel {rel:.3e}"),
    ));

    let sm = standing_mode_order(33, 1.0, 0.5, 0.5)?;
    checks.push(Check::new(
        "standing mode second order",
        sm.ratio >= 3.5 && sm.energy_drift < 1e-3,
        format!("error ratio {:.3}, energy drift {:.2e}", sm.ratio, sm.energy_drift),
    ));

    let g = Grid2D::square(64, -2.0, 2.0)?;
    let tau: f64 = 1.0 / 300.0;
    let dt = tau / (tau / (0.5 * cfl_max_dt(6.0 / tau, &g)?)).ceil();
    let cfg = HmboConfig::mcf(g.clone(), 1.0, tau, dt, 20)?;
    let d0 = ScalarField::from_fn(&g, |p| p.norm() - 1.0);
    let e = eikonal_over_run(&cfg, &d0, 5)?;
    checks.push(Check::new(
        "eikonal residual of redistanced fields",
        e.max_residual < 0.05,
        format!("max residual {:.4} over {} steps ({} ridge nodes skipped)", e.max_residual, e.steps, e.ridge_nodes),
    ));
    Ok(checks)
}
