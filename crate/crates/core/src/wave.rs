//! Explicit leapfrog integration of `u_tt = c^2 Laplace(u)` with `du/dn = 0`.
//!
//! The first substep uses the Taylor starter
//! `u1 = u0 + dt ut0 + dt^2/2 c^2 Lu0`; later substeps use
//! `u[n+1] = 2 u[n] - u[n-1] + (c dt)^2 Lu[n]`. When the window is not a whole
//! number of substeps the last one is shortened so the solve ends exactly at `tau`.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{stencil_rows, Grid2D, ScalarField};
use crate::real::Real;

/// Wave speed squared, substep and window length for one solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveParams<T> {
    pub c2: T,
    pub dt: T,
    pub tau: T,
}

impl<T: Real> WaveParams<T> {
    pub fn new(c2: T, dt: T, tau: T) -> Self {
        WaveParams { c2, dt, tau }
    }

    /// `c dt sqrt(1/dx^2 + 1/dy^2)`; the scheme is stable for values up to 1.
    pub fn cfl_number(&self, grid: &Grid2D<T>) -> T {
        let (dx, dy) = (grid.dx(), grid.dy());
        self.c2.sqrt() * self.dt * (T::one() / (dx * dx) + T::one() / (dy * dy)).sqrt()
    }

    pub fn validate(&self, grid: &Grid2D<T>) -> Result<()> {
        if !(self.c2 > T::zero()) || !self.c2.is_finite() {
            return Err(Error::InvalidParameter(format!("c2 must be positive, got {}", self.c2)));
        }
        if !(self.dt > T::zero()) || !(self.tau > T::zero()) || !self.tau.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "dt and tau must be positive, got dt = {}, tau = {}",
                self.dt, self.tau
            )));
        }
        if self.dt > self.tau {
            return Err(Error::InvalidParameter(format!(
                "dt = {} exceeds the window tau = {}",
                self.dt, self.tau
            )));
        }
        let max_dt = cfl_max_dt(self.c2, grid)?;
        if self.dt > max_dt * (T::one() + T::lit(1e-12)) {
            return Err(Error::Cfl { dt: self.dt.as_f64(), max_dt: max_dt.as_f64() });
        }
        Ok(())
    }

    /// Number of full substeps and the length of the trailing partial one
    /// (zero when `tau` is a whole multiple of `dt`).
    pub fn substeps(&self) -> (usize, T) {
        let ratio = self.tau / self.dt;
        let nearest = ratio.round();
        if (ratio - nearest).abs() <= T::lit(1e-9) * nearest.max(T::one()) {
            (nearest.to_usize().unwrap_or(1).max(1), T::zero())
        } else {
            let full = ratio.floor();
            let rest = self.tau - full * self.dt;
            (full.to_usize().unwrap_or(0).max(1), rest)
        }
    }
}

/// Largest stable substep `1 / (c sqrt(1/dx^2 + 1/dy^2))`.
pub fn cfl_max_dt<T: Real>(c2: T, grid: &Grid2D<T>) -> Result<T> {
    if !(c2 > T::zero()) || !c2.is_finite() {
        return Err(Error::InvalidParameter(format!("c2 must be positive, got {c2}")));
    }
    let (dx, dy) = (grid.dx(), grid.dy());
    Ok(T::one() / (c2.sqrt() * (T::one() / (dx * dx) + T::one() / (dy * dy)).sqrt()))
}

/// Two-level leapfrog state.
#[derive(Debug, Clone)]
pub struct WaveSolver<T> {
    grid: Grid2D<T>,
    c2: T,
    dt: T,
    prev: Vec<T>,
    cur: Vec<T>,
    scratch: Vec<T>,
    time: T,
    substep: usize,
}

impl<T: Real> WaveSolver<T> {
    /// Takes the starter substep from `(u0, ut0)`.
    pub fn start(u0: &ScalarField<T>, ut0: &ScalarField<T>, params: &WaveParams<T>) -> Result<Self> {
        if !u0.same_grid(ut0) {
            return Err(Error::GridMismatch);
        }
        params.validate(u0.grid())?;
        u0.check_finite()?;
        ut0.check_finite()?;
        let grid = u0.grid().clone();
        let mut solver = WaveSolver {
            c2: params.c2,
            dt: params.dt,
            prev: u0.values().to_vec(),
            cur: vec![T::zero(); grid.len()],
            scratch: vec![T::zero(); grid.len()],
            time: T::zero(),
            substep: 0,
            grid,
        };
        solver.taylor_step(params.dt, ut0.values());
        solver.rotate(params.dt)?;
        Ok(solver)
    }

    // Writes `prev + h v + h^2/2 c^2 L(prev)` into scratch.
    fn taylor_step(&mut self, h: T, velocity: &[T]) {
        let coef = T::half() * h * h * self.c2;
        let base = &self.prev;
        stencil_rows(&self.grid, base, &mut self.scratch, |lap, k| {
            base[k] + h * velocity[k] + coef * lap
        });
    }

    // After `scratch` holds the new level: prev <- cur, cur <- scratch.
    fn rotate(&mut self, h: T) -> Result<()> {
        self.substep += 1;
        if !self.scratch.par_iter().all(|v| v.is_finite()) {
            return Err(Error::Blowup { substep: self.substep });
        }
        if self.substep == 1 {
            // Starter: prev already holds u0.
            std::mem::swap(&mut self.cur, &mut self.scratch);
        } else {
            std::mem::swap(&mut self.prev, &mut self.cur);
            std::mem::swap(&mut self.cur, &mut self.scratch);
        }
        self.time = self.time + h;
        Ok(())
    }

    /// One full leapfrog substep of length `dt`.
    pub fn step(&mut self) -> Result<()> {
        let coef = self.c2 * self.dt * self.dt;
        let two = T::two();
        let (prev, cur) = (&self.prev, &self.cur);
        stencil_rows(&self.grid, cur, &mut self.scratch, |lap, k| {
            two * cur[k] - prev[k] + coef * lap
        });
        self.rotate(self.dt)
    }

    /// Shortened final substep of length `h < dt`.
    ///
    /// The velocity at the current level is recovered to second order as
    /// `(u[n] - u[n-1]) / dt + dt/2 c^2 Lu[n]` and the Taylor starter is reused.
    pub fn partial_step(&mut self, h: T) -> Result<()> {
        let idt = T::one() / self.dt;
        let half_dt_c2 = T::half() * self.dt * self.c2;
        let coef = T::half() * h * h * self.c2;
        let (prev, cur) = (&self.prev, &self.cur);
        stencil_rows(&self.grid, cur, &mut self.scratch, |lap, k| {
            let v = (cur[k] - prev[k]) * idt + half_dt_c2 * lap;
            cur[k] + h * v + coef * lap
        });
        // The pair (cur, new) is no longer dt apart; the solve ends here.
        self.substep += 1;
        if !self.scratch.par_iter().all(|v| v.is_finite()) {
            return Err(Error::Blowup { substep: self.substep });
        }
        std::mem::swap(&mut self.prev, &mut self.cur);
        std::mem::swap(&mut self.cur, &mut self.scratch);
        self.time = self.time + h;
        Ok(())
    }

    /// Swaps the two levels so that further `step` calls integrate backwards in time.
    pub fn reverse(&mut self) {
        std::mem::swap(&mut self.prev, &mut self.cur);
    }

    pub fn time(&self) -> T {
        self.time
    }

    pub fn substep(&self) -> usize {
        self.substep
    }

    pub fn current(&self) -> ScalarField<T> {
        ScalarField::from_values_unchecked(self.grid.clone(), self.cur.clone())
    }

    pub fn previous(&self) -> ScalarField<T> {
        ScalarField::from_values_unchecked(self.grid.clone(), self.prev.clone())
    }

    pub fn into_current(self) -> ScalarField<T> {
        ScalarField::from_values_unchecked(self.grid, self.cur)
    }

    /// Energy of the current pair of levels.
    pub fn energy(&self) -> T {
        energy_of(&self.grid, &self.prev, &self.cur, self.c2, self.dt)
    }
}

/// Solves over `[0, tau]` and returns `u(tau)`.
pub fn wave_solve<T: Real>(
    u0: &ScalarField<T>,
    ut0: &ScalarField<T>,
    params: &WaveParams<T>,
) -> Result<ScalarField<T>> {
    wave_solve_logged(u0, ut0, params, |_, _, _| {})
}

/// As [`wave_solve`], calling `log(substep, t, energy)` after every full substep.
pub fn wave_solve_logged<T: Real>(
    u0: &ScalarField<T>,
    ut0: &ScalarField<T>,
    params: &WaveParams<T>,
    mut log: impl FnMut(usize, T, T),
) -> Result<ScalarField<T>> {
    let mut solver = WaveSolver::start(u0, ut0, params)?;
    let (full, rest) = params.substeps();
    log(solver.substep(), solver.time(), solver.energy());
    for _ in 1..full {
        solver.step()?;
        log(solver.substep(), solver.time(), solver.energy());
    }
    if rest > T::zero() {
        solver.partial_step(rest)?;
    }
    Ok(solver.into_current())
}

/// Discrete energy `1/2 sum[((u_cur - u_prev)/dt)^2 + c^2 |grad u_half|^2] dx dy`.
///
/// `u_half` is the average of the two levels; gradients are edge differences and
/// the sums use trapezoidal weights, which makes the potential term the quadratic
/// form of the Neumann Laplacian.
pub fn discrete_energy<T: Real>(
    u_prev: &ScalarField<T>,
    u_cur: &ScalarField<T>,
    params: &WaveParams<T>,
) -> Result<T> {
    if !u_prev.same_grid(u_cur) {
        return Err(Error::GridMismatch);
    }
    Ok(energy_of(u_cur.grid(), u_prev.values(), u_cur.values(), params.c2, params.dt))
}

fn energy_of<T: Real>(grid: &Grid2D<T>, prev: &[T], cur: &[T], c2: T, dt: T) -> T {
    let (nx, ny) = (grid.nx(), grid.ny());
    let (dx, dy) = (grid.dx(), grid.dy());
    let half = T::half();
    let edge_weight = |k: usize, n: usize| if k == 0 || k == n - 1 { half } else { T::one() };
    let total: T = (0..ny)
        .into_par_iter()
        .map(|j| {
            let wj = edge_weight(j, ny);
            let mut acc = T::zero();
            for i in 0..nx {
                let k = j * nx + i;
                let w = wj * edge_weight(i, nx);
                let v = (cur[k] - prev[k]) / dt;
                acc = acc + w * v * v;
                let uh = half * (cur[k] + prev[k]);
                if i + 1 < nx {
                    let g = (half * (cur[k + 1] + prev[k + 1]) - uh) / dx;
                    acc = acc + wj * c2 * g * g;
                }
                if j + 1 < ny {
                    let wi = edge_weight(i, nx);
                    let g = (half * (cur[k + nx] + prev[k + nx]) - uh) / dy;
                    acc = acc + wi * c2 * g * g;
                }
            }
            acc
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    half * total * dx * dy
}

/// Writes a `step,t,energy` log.
pub fn write_energy_log<T: Real, W: Write>(mut w: W, rows: &[(usize, T, T)]) -> std::io::Result<()> {
    writeln!(w, "step,t,energy")?;
    for (step, t, e) in rows {
        writeln!(w, "{step},{t},{e}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Point;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid2D<f64> {
        Grid2D::square(n, -2.0, 2.0).unwrap()
    }

    fn standing_mode(g: &Grid2D<f64>) -> ScalarField<f64> {
        let k = PI / 4.0;
        ScalarField::from_fn(g, |p| (k * (p.x + 2.0)).cos() * (k * (p.y + 2.0)).cos())
    }

    #[test]
    fn cfl_bound_values() {
        let g = make_unit_spacing();
        assert!((cfl_max_dt(1.0, &g).unwrap() - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        // c^2 = 6 / tau with tau = 1/300 on the 256-node grid.
        let g = grid(256);
        let dt = cfl_max_dt(1800.0, &g).unwrap();
        assert!((dt - 2.61e-4).abs() < 0.01e-4, "{dt}");
        assert!(2.22e-6 < dt);
        let c = 1800f64.sqrt();
        assert!((dt - g.dx() / (c * 2f64.sqrt())).abs() < 1e-15);
        assert!(cfl_max_dt(0.0, &g).is_err());
        assert!(cfl_max_dt(-1.0, &g).is_err());
    }

    fn make_unit_spacing() -> Grid2D<f64> {
        Grid2D::square(5, -2.0, 2.0).unwrap()
    }

    #[test]
    fn rejects_unstable_dt() {
        let g = grid(33);
        let max = cfl_max_dt(1.0, &g).unwrap();
        let u = ScalarField::zeros(&g);
        let p = WaveParams::new(1.0, 1.01 * max, 1.0);
        assert!(matches!(wave_solve(&u, &u, &p), Err(Error::Cfl { .. })));
        let p = WaveParams::new(1.0, 0.5, 0.1);
        assert!(wave_solve(&u, &u, &p).is_err());
    }

    #[test]
    fn constants_are_preserved() {
        let g = grid(17);
        let u0 = ScalarField::constant(&g, 3.25);
        let ut0 = ScalarField::zeros(&g);
        let dt = 0.5 * cfl_max_dt(2.0, &g).unwrap();
        let u = wave_solve(&u0, &ut0, &WaveParams::new(2.0, dt, 0.37)).unwrap();
        assert!(u.max_abs_diff(&u0).unwrap() < 1e-13);
    }

    #[test]
    fn substep_bookkeeping() {
        let p = WaveParams::new(1.0, 0.1, 1.0);
        assert_eq!(p.substeps(), (10, 0.0));
        let p = WaveParams::new(1.0, 0.3, 1.0);
        let (n, rest) = p.substeps();
        assert_eq!(n, 3);
        assert!((rest - 0.1f64).abs() < 1e-12);
    }

    #[test]
    fn partial_final_step_lands_on_tau() {
        // tau not a multiple of dt: compare against the analytic standing mode.
        let g = grid(65);
        let u0 = standing_mode(&g);
        let ut0 = ScalarField::zeros(&g);
        let c2 = 1.0;
        let dtmax = cfl_max_dt(c2, &g).unwrap();
        let tau = 0.5;
        let dt = 0.37 * dtmax;
        assert!(WaveParams::new(c2, dt, tau).substeps().1 > 0.0);
        let u = wave_solve(&u0, &ut0, &WaveParams::new(c2, dt, tau)).unwrap();
        let omega = 2f64.sqrt() * PI / 4.0;
        let exact = u0.scaled((omega * tau).cos());
        assert!(u.max_abs_diff(&exact).unwrap() < 2e-3);
    }

    #[test]
    fn standing_mode_and_energy() {
        let g = grid(65);
        let u0 = standing_mode(&g);
        let ut0 = ScalarField::zeros(&g);
        let c2 = 1.0;
        let dt = 0.5 * cfl_max_dt(c2, &g).unwrap();
        let steps = 40;
        let params = WaveParams::new(c2, dt, steps as f64 * dt);
        let mut log = Vec::new();
        let u = wave_solve_logged(&u0, &ut0, &params, |s, t, e| log.push((s, t, e))).unwrap();
        let omega = 2f64.sqrt() * PI / 4.0;
        let exact = u0.scaled((omega * params.tau).cos());
        assert!(u.max_abs_diff(&exact).unwrap() < 1e-3);
        assert_eq!(log.len(), steps);
        let e0 = log[0].2;
        for &(_, _, e) in &log {
            assert!(((e - e0) / e0).abs() < 1e-3);
        }
        let mut buf = Vec::new();
        write_energy_log(&mut buf, &log).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("step,t,energy\n1,"));
    }

    #[test]
    fn energy_examples() {
        let g = grid(17);
        let p = WaveParams::new(3.0, 0.01, 0.1);
        let c = ScalarField::constant(&g, 5.0);
        assert_eq!(discrete_energy(&c, &c, &p).unwrap(), 0.0);
        let a = standing_mode(&g);
        let b = a.scaled(0.9);
        let e1 = discrete_energy(&a, &b, &p).unwrap();
        let e2 = discrete_energy(&a.scaled(2.0), &b.scaled(2.0), &p).unwrap();
        assert!((e2 - 4.0 * e1).abs() <= 1e-12 * e2);
    }

    #[test]
    fn first_moment_of_linear_velocity() {
        // u0 = 0, ut0 = -y: u(t) = -t y exactly away from the boundary.
        let g = grid(129);
        let u0 = ScalarField::zeros(&g);
        let ut0 = ScalarField::from_fn(&g, |p| -p.y);
        let dt = 0.5 * cfl_max_dt(1.0, &g).unwrap();
        let tau = 40.0 * dt;
        let u = wave_solve(&u0, &ut0, &WaveParams::new(1.0, dt, tau)).unwrap();
        let x = Point::new(0.1, 0.3);
        let v = u.eval_bilinear(x).unwrap();
        assert!((v + tau * 0.3).abs() < 1e-12, "{v}");
    }

    #[test]
    fn sign_flip_is_exact() {
        let g = grid(33);
        let u0 = ScalarField::from_fn(&g, |p| p.norm() - 1.0);
        let ut0 = ScalarField::from_fn(&g, |p| (p.x * 2.0).sin());
        let dt = 0.5 * cfl_max_dt(4.0, &g).unwrap();
        let p = WaveParams::new(4.0, dt, 0.1);
        let a = wave_solve(&u0, &ut0, &p).unwrap();
        let b = wave_solve(&u0.scaled(-1.0), &ut0.scaled(-1.0), &p).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert_eq!(*x, -*y);
        }
    }

    #[test]
    fn linearity() {
        let g = grid(33);
        let u0 = ScalarField::from_fn(&g, |p| p.norm() - 1.0);
        let w0 = ScalarField::from_fn(&g, |p| p.x * p.y);
        let ut0 = ScalarField::from_fn(&g, |p| (p.x * 2.0).sin());
        let wt0 = ScalarField::from_fn(&g, |p| p.y.cos());
        let dt = 0.45 * cfl_max_dt(4.0, &g).unwrap();
        let p = WaveParams::new(4.0, dt, 0.3);
        let (a, b) = (1.7, -0.6);
        let lhs = wave_solve(&u0.lincomb(a, &w0, b).unwrap(), &ut0.lincomb(a, &wt0, b).unwrap(), &p).unwrap();
        let rhs = wave_solve(&u0, &ut0, &p).unwrap().lincomb(a, &wave_solve(&w0, &wt0, &p).unwrap(), b).unwrap();
        assert!(lhs.max_abs_diff(&rhs).unwrap() <= 1e-10 * lhs.max_abs());
    }

    #[test]
    fn leapfrog_is_time_reversible() {
        let g = grid(49);
        let u0 = ScalarField::from_fn(&g, |p| (-4.0 * p.norm().powi(2)).exp());
        let ut0 = ScalarField::zeros(&g);
        let dt = 0.5 * cfl_max_dt(1.0, &g).unwrap();
        let n = 60;
        let p = WaveParams::new(1.0, dt, n as f64 * dt);
        let mut s = WaveSolver::start(&u0, &ut0, &p).unwrap();
        for _ in 1..n {
            s.step().unwrap();
        }
        s.reverse();
        for _ in 1..n {
            s.step().unwrap();
        }
        // After reversing, `cur` walks back to u^0.
        assert!(s.current().max_abs_diff(&u0).unwrap() < dt * dt);
    }

    #[test]
    fn energy_ratio_bounded_at_high_cfl() {
        let g = grid(41);
        let u0 = standing_mode(&g);
        let ut0 = ScalarField::zeros(&g);
        let dt = 0.9 * cfl_max_dt(1.0, &g).unwrap();
        let p = WaveParams::new(1.0, dt, 200.0 * dt);
        let mut s = WaveSolver::start(&u0, &ut0, &p).unwrap();
        let e0 = s.energy();
        for _ in 1..200 {
            s.step().unwrap();
        }
        let ratio = s.energy() / e0;
        assert!((0.99..=1.01).contains(&ratio), "{ratio}");
    }

    #[test]
    fn blowup_is_reported() {
        let g = grid(9);
        let u0 = ScalarField::constant(&g, f64::MAX);
        let ut0 = ScalarField::constant(&g, f64::MAX);
        let dt = 0.5 * cfl_max_dt(1.0, &g).unwrap();
        let r = wave_solve(&u0, &ut0, &WaveParams::new(1.0, dt, 10.0 * dt));
        assert!(matches!(r, Err(Error::Blowup { substep: 1 })));
    }
}
