use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported dimension {0} (expected 2 or 3)")]
    UnsupportedDimension(usize),

    #[error("{model} is not defined in {dim}D")]
    UnsupportedModel { model: &'static str, dim: usize },

    #[error("h = {h:.6e} m lies outside the domain of {model} (requires h >= {h_min:.6e} m)")]
    OutsideDomain { model: &'static str, h: f64, h_min: f64 },

    #[error(
        "h = {h:.6e} m is below the critical mesh size h* = {h_star:.6e} m \
         (tau_D = {tau_d:.6e} s >= tau_micro = {tau_micro:.6e} s)"
    )]
    BelowCriticalMesh { h: f64, h_star: f64, tau_d: f64, tau_micro: f64 },

    #[error("no critical mesh size in (0, L): {0}")]
    NoCriticalMesh(String),

    #[error("linear solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("sample {sample} exceeded the step budget of {budget} events")]
    StepBudget { sample: u64, budget: u64 },

    #[error("at h = {h:.6e} m: {source}")]
    AtMesh {
        h: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    /// Whether the error comes from user input rather than a failed computation.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_)
            | Error::InvalidParameter(_)
            | Error::UnsupportedDimension(_)
            | Error::UnsupportedModel { .. } => true,
            Error::AtMesh { source, .. } => source.is_config(),
            _ => false,
        }
    }
}
