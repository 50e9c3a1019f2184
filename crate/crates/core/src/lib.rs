//! Threshold dynamics for damped hyperbolic mean curvature flow and its
//! mean-curvature-flow limit.
//!
//! An interface is carried as a signed distance field on a uniform grid. Each
//! step solves the wave equation for a short window, extracts the zero level
//! set of the result with marching squares and redistances it. The crate ships
//! independent oracles (exact shrinking circle, RK4 circle trajectories and
//! Poisson-formula quadrature) and a convergence harness built on them.
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the scalar to `f64`, which is what the harness and CLI use.

pub mod error;
pub mod field;
pub mod flow;
pub mod harness;
pub mod interface;
pub mod oracles;
pub mod real;
pub mod verify;
pub mod wave;

pub use error::{Error, Result};
pub use field::{eval_bilinear, laplacian, make_grid, Grid2D, Point, ScalarField};
pub use flow::{
    hmbo_step, init_history, map_params, mcf_c2_for_gamma, run_flow, run_flow_with, FlowMode, FlowState,
    HmboConfig, PhysicalParams, RunOptions, RunRecord, WaveCoefficients,
};
pub use interface::{
    average_radius, extract_zero_set, has_interface, redistance, reinitialize, signed_distance, InterfaceCurve,
    Reinit, SignConvention,
};
pub use oracles::{exact_mcf_radius, hmcf_circle_radius, poisson_eval, RadiusSeries};
pub use real::Real;
pub use wave::{cfl_max_dt, discrete_energy, wave_solve, WaveParams, WaveSolver};

pub type Grid = Grid2D<f64>;
pub type Field = ScalarField<f64>;
pub type Field32 = ScalarField<f32>;
pub type Curve = InterfaceCurve<f64>;
pub type Config = HmboConfig<f64>;
pub type State = FlowState<f64>;
pub type Params = PhysicalParams<f64>;
pub type Series = RadiusSeries<f64>;
pub type Vec2 = Point<f64>;
