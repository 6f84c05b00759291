//! Non-existence certificates and the truncated-data simulator.
//!
//! * [`params`]: admissible exponents `(β, γ)` and the certified constants.
//! * [`divergence`]: the divergent functionals along the ladder.
//! * [`reaction`]: exact flows of `u' = f(u)`.
//! * [`simulate`]: periodic spectral Strang splitting and the Duhamel residual.

pub mod divergence;
pub mod params;
pub mod reaction;
pub mod simulate;

pub use divergence::{
    ball_floor, divergence_functional, divergence_functional_with, divergence_series,
    functional_with_table, local_mass_divergence, DivergenceReport, FunctionalReport,
    FunctionalTerm, Integrand, LocalMassTerm, SelfSimilarTable,
};
pub use params::{admissible_params, CertifiedConstants, ExperimentParams};
pub use reaction::{Flow, Linear, OsgoodReaction, PowerLaw, Reaction, STATE_CEILING};
pub use simulate::{
    duhamel_residual, simulate, simulate_truncated, Diagnostic, Grid, LatticeSemigroup, Outcome,
    Residual, RunSpec, StepPlan, Trajectory,
};

/// Unweighted least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    #[test]
    fn slope_of_a_line() {
        let x = [0.0, 1.0, 2.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 0.5 * v).collect();
        assert!((super::fit_slope(&x, &y) + 0.5).abs() < 1e-15);
    }
}
