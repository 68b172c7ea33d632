use thiserror::Error;

/// Errors shared by all layers of the crate.
#[derive(Debug, Clone, Error)]
pub enum GlzError {
    /// A constructor or operation received an invalid parameter.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// The adaptive stepper could not make progress.
    #[error("step size underflow at u = {location}")]
    StepUnderflow { location: f64 },

    /// An argument lies outside the certified range of a series evaluation.
    #[error("argument outside certified range: {0}")]
    OutOfRange(String),

    /// A series did not converge within its term budget.
    #[error("series did not converge within {max_terms} terms")]
    NoConverge { max_terms: usize },

    /// No zero-transition coupling was found inside the search bracket.
    /// Carries the best point seen during the scan.
    #[error(
        "no zero-transition coupling in [{lo}, {hi}] for gap {gap}: \
         scanned minimum P = {best_p:.3e} at b = {best_b}"
    )]
    NoRoot {
        gap: f64,
        lo: f64,
        hi: f64,
        best_b: f64,
        best_p: f64,
    },
}

pub type Result<T> = std::result::Result<T, GlzError>;
