//! Error type shared across the simulator.

use thiserror::Error;

/// Errors produced by mesh construction, assembly, transport, and the driver.
#[derive(Debug, Error)]
pub enum SimError {
    /// A configuration value violates a precondition.
    #[error("configuration error: {0}")]
    Config(String),

    /// A point lies outside the closed simulation domain.
    #[error("point ({0}, {1}) m lies outside the domain")]
    OutOfDomain(f64, f64),

    /// A field handed to the assembly contains NaN.
    #[error("poisoned state: field `{0}` contains NaN")]
    PoisonedState(&'static str),

    /// The advective CFL condition is violated.
    #[error("CFL violation at {face}: |u| = {speed:.3e} m/s gives CFL {cfl:.3} > 1; reduce dt to at most {dt_max:.1} s")]
    CflViolation {
        face: String,
        speed: f64,
        cfl: f64,
        dt_max: f64,
    },

    /// A tracer went negative beyond round-off before clamping.
    #[error("internal consistency: {0}")]
    InternalConsistency(String),

    /// The nonlinear momentum solve did not converge.
    #[error("momentum solve failed at step {step}: residual {residual:.3e} after {iterations} iterations (tol {tolerance:.3e})")]
    SolverFailure {
        step: usize,
        iterations: usize,
        residual: f64,
        tolerance: f64,
    },

    /// Output I/O failure.
    #[error("i/o failure at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl SimError {
    pub fn config(msg: impl Into<String>) -> Self {
        SimError::Config(msg.into())
    }
}
