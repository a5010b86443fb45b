//! Fixtures shared by the benchmarks.

use doseopt::{builtin_designs, ExactDesign, ModelId, SimSpec, Theta};

/// Rate parameters spanning flat to steep decay on `[0, 1]`.
pub const RATES: [f64; 3] = [0.1, 1.0, 3.0];

pub fn rat_design() -> ExactDesign {
    builtin_designs().remove("xi_mm").expect("builtin design")
}

pub fn simulation_spec(reps: usize, fit_model: ModelId) -> SimSpec {
    SimSpec::new(Theta::new(1.0, 0.08, 0.1, 1.0), 0.05, reps, 1, fit_model)
}
