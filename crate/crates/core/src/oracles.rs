//! Ground truth that does not touch the grid machinery: the closed-form
//! shrinking circle, an RK4 integrator for the circle under damped hyperbolic
//! flow, and direct quadrature of the Poisson representation of the 2D wave
//! equation.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::Point;
use crate::flow::PhysicalParams;
use crate::real::Real;

/// Radius of a circle in time; the last sample is `(extinction_time, 0)` when
/// the circle vanishes inside the window.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiusSeries<T> {
    pub times: Vec<T>,
    pub radii: Vec<T>,
    /// `dr/dt` at each sample, when the generator knows it.
    pub rates: Option<Vec<T>>,
    pub extinction_time: Option<T>,
}

impl<T: Real> RadiusSeries<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Piecewise-linear value at `t`, zero at and after extinction.
    pub fn sample(&self, t: T) -> T {
        if let Some(te) = self.extinction_time {
            if t >= te {
                return T::zero();
            }
        }
        let n = self.times.len();
        if n == 0 {
            return T::zero();
        }
        if t <= self.times[0] {
            return self.radii[0];
        }
        let k = self.times.partition_point(|&s| s <= t);
        if k >= n {
            return self.radii[n - 1];
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = (t - t0) / (t1 - t0);
        self.radii[k - 1] + w * (self.radii[k] - self.radii[k - 1])
    }

    /// Writes `t,r` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,r")?;
        for (t, r) in self.times.iter().zip(&self.radii) {
            writeln!(w, "{t},{r}")?;
        }
        Ok(())
    }
}

/// `sqrt(max(0, r0^2 - 2t))`: the unit-tension circle under mean curvature flow.
pub fn exact_mcf_radius<T: Real>(r0: T, t: T) -> T {
    exact_mcf_radius_with_tension(r0, T::one(), t)
}

/// `sqrt(max(0, r0^2 - 2 gamma t))`.
pub fn exact_mcf_radius_with_tension<T: Real>(r0: T, gamma: T, t: T) -> T {
    (r0 * r0 - T::two() * gamma * t).max(T::zero()).sqrt()
}

/// Exact mean-curvature circle sampled every `dt` up to `t_end` (the final
/// sample sits exactly on `t_end`).
pub fn mcf_series<T: Real>(r0: T, gamma: T, t_end: T, dt: T) -> Result<RadiusSeries<T>> {
    if !(r0 > T::zero()) || !(gamma > T::zero()) || !(dt > T::zero()) || t_end < T::zero() {
        return Err(Error::InvalidParameter(
            "mcf series needs r0 > 0, gamma > 0, dt > 0, t_end >= 0".into(),
        ));
    }
    let te = r0 * r0 / (T::two() * gamma);
    let times = sample_times(t_end, dt);
    let radii: Vec<T> = times.iter().map(|&t| exact_mcf_radius_with_tension(r0, gamma, t)).collect();
    let rates = radii
        .iter()
        .map(|&r| if r > T::zero() { -gamma / r } else { T::zero() })
        .collect();
    Ok(RadiusSeries {
        times,
        radii,
        rates: Some(rates),
        extinction_time: (te <= t_end).then_some(te),
    })
}

fn sample_times<T: Real>(t_end: T, dt: T) -> Vec<T> {
    let mut times = Vec::new();
    let mut k = 0usize;
    loop {
        let t = T::from_count(k) * dt;
        if t >= t_end - dt * T::lit(1e-9) {
            times.push(t_end);
            break;
        }
        times.push(t);
        k += 1;
    }
    times
}

/// Right-hand side of `alpha r'' + beta r' = -gamma / r`.
#[inline]
fn circle_accel<T: Real>(p: &PhysicalParams<T>, r: T, v: T) -> T {
    (-p.beta * v - p.gamma / r) / p.alpha
}

struct Trajectory<T> {
    series: RadiusSeries<T>,
}

// RK4 with `substeps` internal steps per output interval.
fn integrate_circle<T: Real>(
    p: &PhysicalParams<T>,
    r0: T,
    rdot0: T,
    t_end: T,
    dt: T,
    substeps: usize,
) -> Trajectory<T> {
    let outputs = sample_times(t_end, dt);
    let mut times = vec![T::zero()];
    let mut radii = vec![r0];
    let mut rates = vec![rdot0];
    let (mut t, mut r, mut v) = (T::zero(), r0, rdot0);
    let six = T::lit(6.0);
    let mut extinct = None;

    'outer: for &target in &outputs[1..] {
        let h = (target - t) / T::from_count(substeps);
        for _ in 0..substeps {
            let k1r = v;
            let k1v = circle_accel(p, r, v);
            let r2 = r + T::half() * h * k1r;
            let v2 = v + T::half() * h * k1v;
            let k2v = circle_accel(p, r2, v2);
            let r3 = r + T::half() * h * v2;
            let v3 = v + T::half() * h * k2v;
            let k3v = circle_accel(p, r3, v3);
            let r4 = r + h * v3;
            let v4 = v + h * k3v;
            let k4v = circle_accel(p, r4, v4);
            let rn = r + h / six * (k1r + T::two() * v2 + T::two() * v3 + v4);
            let vn = v + h / six * (k1v + T::two() * k2v + T::two() * k3v + k4v);

            let stages_ok = r2 > T::zero() && r3 > T::zero() && r4 > T::zero();
            if !stages_ok || !rn.is_finite() || rn <= T::zero() {
                // Bracket [t, t + h]; fall back to a Taylor estimate when the
                // stages crossed the singularity.
                let r_end = if stages_ok && rn.is_finite() {
                    rn
                } else {
                    r + h * v + T::half() * h * h * k1v
                };
                let te = if r_end < T::zero() { t + h * r / (r - r_end) } else { t + h };
                extinct = Some(te);
                break 'outer;
            }
            t = t + h;
            r = rn;
            v = vn;
        }
        t = target;
        times.push(t);
        radii.push(r);
        rates.push(v);
    }
    if let Some(te) = extinct {
        times.push(te);
        radii.push(T::zero());
        rates.push(v);
    }
    Trajectory {
        series: RadiusSeries { times, radii, rates: Some(rates), extinction_time: extinct },
    }
}

/// Circle radius under `alpha r'' + beta r' = -gamma / r` (outward radius,
/// curvature `1/r`), integrated with classical RK4 and sampled every `dt`.
///
/// The internal step is halved until two successive refinements agree to
/// `1e-8` in the max norm or the step falls below `1e-7`.
pub fn hmcf_circle_radius<T: Real>(
    p: &PhysicalParams<T>,
    r0: T,
    rdot0: T,
    t_end: T,
    dt: T,
) -> Result<RadiusSeries<T>> {
    if !(p.alpha > T::zero()) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {}", p.alpha)));
    }
    if !(r0 > T::zero()) {
        return Err(Error::InvalidParameter(format!("r0 must be positive, got {r0}")));
    }
    if !(dt > T::zero()) || !(t_end >= T::zero()) {
        return Err(Error::InvalidParameter("need dt > 0 and t_end >= 0".into()));
    }
    let tol = T::lit(1e-8);
    let floor = T::lit(1e-7);
    let mut substeps = 1usize;
    let mut prev = integrate_circle(p, r0, rdot0, t_end, dt, substeps).series;
    loop {
        if dt / T::from_count(substeps) < floor {
            return Ok(prev);
        }
        substeps *= 2;
        let next = integrate_circle(p, r0, rdot0, t_end, dt, substeps).series;
        if series_gap(&prev, &next) < tol {
            return Ok(next);
        }
        prev = next;
    }
}

fn series_gap<T: Real>(a: &RadiusSeries<T>, b: &RadiusSeries<T>) -> T {
    let alive = |s: &RadiusSeries<T>| s.len() - usize::from(s.extinction_time.is_some());
    let n = alive(a).min(alive(b));
    let mut gap = (0..n).fold(T::zero(), |m, k| m.max((a.radii[k] - b.radii[k]).abs()));
    match (a.extinction_time, b.extinction_time) {
        (Some(x), Some(y)) => gap = gap.max((x - y).abs()),
        (None, None) => {}
        _ => gap = T::infinity(),
    }
    if alive(a) != alive(b) {
        gap = T::infinity();
    }
    gap
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            // P_n(x) and P_{n-1}(x) by the three-term recurrence.
            let (mut pm, mut pn) = (1.0, x);
            for k in 2..=n {
                let k = k as f64;
                let next = ((2.0 * k - 1.0) * x * pn - (k - 1.0) * pm) / k;
                pm = pn;
                pn = next;
            }
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let step = pn / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Kirchhoff-Poisson formula for the 2D wave equation with `u_t(0) = -v0`:
///
/// `u(t, x) = 1/(2 pi c t) \int_{B(x, ct)} (u0 + grad u0 . (y - x) - t v0) / sqrt(c^2 t^2 - |y - x|^2) dy`.
///
/// With `y = x + ct z`, `z = sin(phi) (cos theta, sin theta)` the kernel
/// singularity cancels and the integral becomes
/// `1/(2 pi) \int_0^{2 pi} \int_0^{pi/2} F sin(phi) dphi dtheta`,
/// evaluated with `n_quad` Gauss-Legendre nodes in `phi` and `n_quad`
/// periodic trapezoid nodes in `theta`.
pub fn poisson_eval<T, U, G, V>(
    u0: U,
    grad_u0: G,
    v0: V,
    c: T,
    t: T,
    x: Point<T>,
    n_quad: usize,
) -> Result<T>
where
    T: Real,
    U: Fn(Point<T>) -> T + Sync,
    G: Fn(Point<T>) -> [T; 2] + Sync,
    V: Fn(Point<T>) -> T + Sync,
{
    if !(t > T::zero()) {
        return Err(Error::InvalidParameter(format!("t must be positive, got {t}")));
    }
    if !(c > T::zero()) {
        return Err(Error::InvalidParameter(format!("c must be positive, got {c}")));
    }
    if n_quad == 0 {
        return Err(Error::InvalidParameter("n_quad must be positive".into()));
    }
    let (gx, gw) = gauss_legendre(n_quad);
    let quarter = std::f64::consts::FRAC_PI_4;
    // phi = pi/4 (1 + s), dphi = pi/4 ds.
    let phis: Vec<(T, T)> = gx
        .iter()
        .zip(&gw)
        .map(|(&s, &w)| {
            let phi = quarter * (1.0 + s);
            (T::lit(phi.sin()), T::lit(w * quarter))
        })
        .collect();
    let ct = c * t;
    let per_theta: Vec<T> = (0..n_quad)
        .into_par_iter()
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / n_quad as f64;
            let (ct_cos, ct_sin) = (T::lit(theta.cos()), T::lit(theta.sin()));
            phis.iter()
                .map(|&(sp, w)| {
                    let off = Point::new(ct * sp * ct_cos, ct * sp * ct_sin);
                    let y = Point::new(x.x + off.x, x.y + off.y);
                    let g = grad_u0(y);
                    let f = u0(y) + g[0] * off.x + g[1] * off.y - t * v0(y);
                    w * f * sp
                })
                .sum::<T>()
        })
        .collect();
    // 1/(2 pi) * (2 pi / n) * sum.
    Ok(per_theta.into_iter().sum::<T>() / T::from_count(n_quad))
}
