//! Complex geometrical optics probes with logarithmic phase.

mod amplitude;
mod dbar;
mod phase;
mod probe;
mod residual;

pub use amplitude::{build_amplitudes, AmplitudeOptions, AmplitudeSeed, Amplitudes, Expr, Jet, Monomial};
pub use dbar::{cell_kernel, solve_dbar, CauchyTransform, ZRect};
pub use phase::{
    cylindrical_coords, eval_phase, verify_eikonal, Cylindrical, EikonalReport, Frame, PhaseSpec,
    PhaseValues, EIKONAL_TOL, PSI_CLEARANCE,
};
pub use probe::{build_probe, build_probe_with, CgoAnsatz, ProbeEvaluator, ProbePoint, OVERFLOW_LIMIT};
pub use residual::{fit_power, wkb_residual, ResidualFit};
