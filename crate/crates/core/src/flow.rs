//! The HMBO stepping loop.
//!
//! Each step builds wave initial data from the signed distance history, runs
//! the wave equation over one window `tau`, and rebuilds a signed distance
//! field from the zero set of the result.
//!
//! * Hyperbolic mode: `u0 = a (2 d_n - d_{n-1})`, `u_t(0) = -b d_n`, which
//!   approximates `alpha V' + beta V = -gamma kappa` with
//!   `alpha = a`, `beta = -b`, `gamma = a c^2 / 2`.
//! * Mean curvature mode: `u0 = 0`, `u_t(0) = d_n`, `c^2 = lambda / tau`,
//!   which approximates `V = -(lambda / 6) kappa`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Grid2D, Point, ScalarField};
use crate::interface::{
    average_radius, extract_zero_set, has_interface, reinitialize, signed_distance, InterfaceCurve, Reinit,
    SignConvention,
};
use crate::real::Real;
use crate::wave::{wave_solve, WaveParams};

/// Mass, damping and surface tension of `alpha x_tt + beta x_t = -gamma kappa nu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams<T> {
    pub alpha: T,
    pub beta: T,
    pub gamma: T,
}

/// Wave-equation coefficients `(a, b, c^2)` realising a [`PhysicalParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveCoefficients<T> {
    pub a: T,
    pub b: T,
    pub c2: T,
}

/// `a = alpha`, `b = -beta`, `c^2 = 2 gamma / alpha`.
pub fn map_params<T: Real>(p: &PhysicalParams<T>) -> Result<WaveCoefficients<T>> {
    if !(p.alpha > T::zero()) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {}", p.alpha)));
    }
    if p.beta < T::zero() || p.gamma < T::zero() {
        return Err(Error::InvalidParameter("beta and gamma must be non-negative".into()));
    }
    Ok(WaveCoefficients { a: p.alpha, b: -p.beta, c2: T::two() * p.gamma / p.alpha })
}

impl<T: Real> WaveCoefficients<T> {
    /// The interfacial law these coefficients produce.
    pub fn physical(&self) -> PhysicalParams<T> {
        PhysicalParams { alpha: self.a, beta: -self.b, gamma: self.a * self.c2 / T::two() }
    }
}

/// `c^2 = lambda / tau` with `lambda = 6 gamma`.
pub fn mcf_c2_for_gamma<T: Real>(gamma: T, tau: T) -> Result<T> {
    if !(gamma > T::zero()) || !(tau > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "gamma and tau must be positive, got gamma = {gamma}, tau = {tau}"
        )));
    }
    Ok(T::lit(6.0) * gamma / tau)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowMode {
    /// Damped hyperbolic mean curvature flow.
    Hmcf,
    /// Mean curvature flow.
    Mcf,
}

impl std::str::FromStr for FlowMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hmcf" => Ok(FlowMode::Hmcf),
            "mcf" => Ok(FlowMode::Mcf),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }
}

/// Everything one HMBO run needs.
#[derive(Debug, Clone)]
pub struct HmboConfig<T> {
    pub mode: FlowMode,
    pub a: T,
    pub b: T,
    pub c2: T,
    pub tau: T,
    pub dt: T,
    pub max_steps: usize,
    pub grid: Grid2D<T>,
    pub sign_convention: SignConvention,
    /// `Exact` for MCF, `Constrained` for HMCF: the two-level extrapolation
    /// `2 d_n - d_{n-1}` turns any per-step drift of the zero set under
    /// reinitialization into a spurious acceleration of order drift / tau^2.
    pub reinit: Reinit,
    /// Only meaningful in MCF mode, where `c2 = lambda / tau`.
    pub lambda: T,
}

impl<T: Real> HmboConfig<T> {
    /// Mean curvature flow with tension `gamma`.
    pub fn mcf(grid: Grid2D<T>, gamma: T, tau: T, dt: T, max_steps: usize) -> Result<Self> {
        let c2 = mcf_c2_for_gamma(gamma, tau)?;
        let cfg = HmboConfig {
            mode: FlowMode::Mcf,
            a: T::zero(),
            b: T::one(),
            c2,
            tau,
            dt,
            max_steps,
            grid,
            sign_convention: SignConvention::default(),
            reinit: Reinit::default(),
            lambda: T::lit(6.0) * gamma,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Damped hyperbolic flow for the given physical coefficients.
    pub fn hmcf(grid: Grid2D<T>, params: &PhysicalParams<T>, tau: T, dt: T, max_steps: usize) -> Result<Self> {
        let w = map_params(params)?;
        let cfg = HmboConfig {
            mode: FlowMode::Hmcf,
            a: w.a,
            b: w.b,
            c2: w.c2,
            tau,
            dt,
            max_steps,
            grid,
            sign_convention: SignConvention::default(),
            reinit: Reinit::Constrained,
            lambda: w.c2 * tau,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_sign_convention(mut self, conv: SignConvention) -> Self {
        self.sign_convention = conv;
        self
    }

    pub fn with_reinit(mut self, reinit: Reinit) -> Self {
        self.reinit = reinit;
        self
    }

    pub fn wave_params(&self) -> WaveParams<T> {
        WaveParams::new(self.c2, self.dt, self.tau)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > T::zero()) {
            return Err(Error::InvalidParameter(format!("tau must be positive, got {}", self.tau)));
        }
        if self.mode == FlowMode::Mcf {
            let expected = self.lambda / self.tau;
            if (self.c2 - expected).abs() > T::lit(1e-12) * expected.abs() {
                return Err(Error::InvalidParameter(format!(
                    "MCF mode requires c2 = lambda / tau = {expected}, got {}",
                    self.c2
                )));
            }
        }
        self.wave_params().validate(&self.grid)
    }
}

/// Signed distance history carried between steps.
#[derive(Debug, Clone)]
pub struct FlowState<T> {
    pub d_n: ScalarField<T>,
    /// Previous signed distance; absent in MCF mode.
    pub d_nm1: Option<ScalarField<T>>,
    pub step_index: usize,
    pub extinct: bool,
}

impl<T: Real> FlowState<T> {
    /// Initial state for `cfg.mode`, reoriented to `cfg.sign_convention`.
    pub fn initial(cfg: &HmboConfig<T>, d0: &ScalarField<T>, v0_normal: T) -> Result<Self> {
        if d0.grid() != &cfg.grid {
            return Err(Error::GridMismatch);
        }
        d0.check_finite()?;
        let flipped = SignConvention::of_field(d0) != cfg.sign_convention;
        let d0 = if flipped { d0.scaled(-T::one()) } else { d0.clone() };
        let d_nm1 = match cfg.mode {
            FlowMode::Mcf => None,
            FlowMode::Hmcf => {
                // Normal speed is measured towards increasing d; flipping d flips it too.
                let v = if flipped { -v0_normal } else { v0_normal };
                Some(init_history(&d0, v, cfg.tau)?)
            }
        };
        Ok(FlowState { d_n: d0, d_nm1, step_index: 0, extinct: false })
    }
}

/// Previous signed distance `d_{-1}` for a spatially constant normal speed:
/// the zero set of `d0 + v0_normal tau`, redistanced with the sign of `d0`.
pub fn init_history<T: Real>(d0: &ScalarField<T>, v0_normal: T, tau: T) -> Result<ScalarField<T>> {
    let conv = SignConvention::of_field(d0);
    if v0_normal == T::zero() {
        return Ok(d0.clone());
    }
    let shift = v0_normal * tau;
    let shifted = d0.map(|v| v + shift);
    if !has_interface(&shifted) {
        return Err(Error::InvalidParameter(format!(
            "offset level set {{d0 = {}}} is empty; initial speed too large",
            -shift
        )));
    }
    let curve = extract_zero_set(&shifted);
    signed_distance(&shifted, &curve, conv)
}

/// Result of one [`hmbo_step`].
#[derive(Debug, Clone)]
pub struct Stepped<T> {
    pub state: FlowState<T>,
    /// Zero set of `u(tau)`; `None` on extinction.
    pub curve: Option<InterfaceCurve<T>>,
}

/// Wave initial data `(u0, u_t(0))` for the current state.
pub fn wave_initial_data<T: Real>(
    state: &FlowState<T>,
    cfg: &HmboConfig<T>,
) -> Result<(ScalarField<T>, ScalarField<T>)> {
    match cfg.mode {
        FlowMode::Mcf => Ok((ScalarField::zeros(&cfg.grid), state.d_n.clone())),
        FlowMode::Hmcf => {
            let prev = state
                .d_nm1
                .as_ref()
                .ok_or_else(|| Error::Config("hyperbolic mode needs d_{n-1}".into()))?;
            let u0 = state.d_n.lincomb(T::two() * cfg.a, prev, -cfg.a)?;
            let ut0 = state.d_n.scaled(-cfg.b);
            Ok((u0, ut0))
        }
    }
}

/// One threshold-dynamics step. Extinction is a normal outcome: the returned
/// state is marked extinct and its fields are left untouched.
pub fn hmbo_step<T: Real>(state: FlowState<T>, cfg: &HmboConfig<T>) -> Result<Stepped<T>> {
    if state.extinct {
        return Ok(Stepped { state, curve: None });
    }
    let (u0, ut0) = wave_initial_data(&state, cfg)?;
    let u = wave_solve(&u0, &ut0, &cfg.wave_params())?;
    advance_from(state, &u, cfg)
}

/// Thresholding half of a step: redistance `u(tau)` and shift the history.
pub(crate) fn advance_from<T: Real>(
    mut state: FlowState<T>,
    u: &ScalarField<T>,
    cfg: &HmboConfig<T>,
) -> Result<Stepped<T>> {
    if !has_interface(u) {
        state.extinct = true;
        return Ok(Stepped { state, curve: None });
    }
    let curve = extract_zero_set(u);
    let d_new = reinitialize(u, &curve, cfg.sign_convention, cfg.reinit)?;
    let old = std::mem::replace(&mut state.d_n, d_new);
    if cfg.mode == FlowMode::Hmcf {
        state.d_nm1 = Some(old);
    }
    state.step_index += 1;
    Ok(Stepped { state, curve: Some(curve) })
}

/// One row of a run log.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord<T> {
    pub step: usize,
    pub time: T,
    pub avg_radius: Option<T>,
    pub extinct: bool,
    pub snapshot: Option<InterfaceCurve<T>>,
}

/// Extra knobs for [`run_flow_with`].
#[derive(Debug, Clone, Copy)]
pub struct RunOptions<T> {
    /// Point radii are measured from.
    pub center: Point<T>,
    pub keep_snapshots: bool,
}

impl<T: Real> Default for RunOptions<T> {
    fn default() -> Self {
        RunOptions { center: Point::origin(), keep_snapshots: false }
    }
}

/// Runs up to `cfg.max_steps` steps or until extinction. Records cover steps
/// `1..`; the record of the extinction step has no radius.
pub fn run_flow<T: Real>(cfg: &HmboConfig<T>, d0: &ScalarField<T>, v0_normal: T) -> Result<Vec<RunRecord<T>>> {
    run_flow_with(cfg, d0, v0_normal, &RunOptions::default())
}

pub fn run_flow_with<T: Real>(
    cfg: &HmboConfig<T>,
    d0: &ScalarField<T>,
    v0_normal: T,
    opts: &RunOptions<T>,
) -> Result<Vec<RunRecord<T>>> {
    cfg.validate()?;
    let mut records = Vec::new();
    if cfg.max_steps == 0 {
        return Ok(records);
    }
    let mut state = FlowState::initial(cfg, d0, v0_normal)?;
    for step in 1..=cfg.max_steps {
        let out = hmbo_step(state, cfg)?;
        state = out.state;
        let time = T::from_count(step) * cfg.tau;
        match out.curve {
            Some(curve) => {
                let r = average_radius(&curve, opts.center)?;
                records.push(RunRecord {
                    step,
                    time,
                    avg_radius: Some(r),
                    extinct: false,
                    snapshot: opts.keep_snapshots.then_some(curve),
                });
            }
            None => {
                records.push(RunRecord { step, time, avg_radius: None, extinct: true, snapshot: None });
                break;
            }
        }
    }
    Ok(records)
}
