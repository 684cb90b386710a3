//! Sensing-SINR maximization under user-SINR and per-antenna power
//! constraints via the concave-convex procedure.

mod ccp;
mod quadratic;
mod subproblem;

pub use ccp::{optimize_precoder, random_start, CcpState, CcpStatus};
pub use quadratic::{build_sensing_quadratic, LinearObjective, SensingQuadratic};
pub use subproblem::{solve_ccp_subproblem, KktResiduals, SubproblemLimits, SubproblemSolution};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::signals::SymbolFrame;

/// Affine under-estimator of the sensing SINR anchored at `w_prev`.
pub fn linearize_objective(
    quadratic: &SensingQuadratic,
    w_prev: &DMatrix<Complex64>,
    frame: &SymbolFrame,
    noise_power: f64,
) -> LinearObjective {
    quadratic.linearize(w_prev, frame, noise_power)
}
