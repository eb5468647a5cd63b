//! Time-independent cross-checks: Coulomb functions, Numerov integration,
//! phase shifts, widths from dδ/dE and S-matrix poles.

pub mod coulomb;
pub mod numerov;
pub mod phase;
pub mod smatrix;

pub use coulomb::{coulomb_functions, CoulombValues};
pub use numerov::{integrate_tise, phase_shift, phase_shift_absolute, phase_shift_general, phase_shift_unwrapped, PhaseOptions, RadialProblem, RadialSolution};
pub use phase::{resonance_from_phase, unwrap_phase, PhaseShiftCurve};
pub use smatrix::{find_pole, s_matrix, s_matrix_samples, SMatrixSample};
