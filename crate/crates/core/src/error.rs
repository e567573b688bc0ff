use thiserror::Error;

use crate::dense::LinalgError;

/// Errors raised by system assembly, reduction and the projection solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Linalg(#[from] LinalgError),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty {0} region: no grid node inside")]
    EmptyRegion(&'static str),

    #[error("frequency hits spectrum: shifted matrix is singular")]
    FrequencyHitsSpectrum,

    #[error("insufficient rank: requested r = {requested}, attainable r = {attainable}")]
    InsufficientRank { requested: usize, attainable: usize },

    #[error("bases are not biorthogonal: |W'V - I|_F = {0:e}")]
    NotBiorthogonal(f64),

    #[error("serious breakdown at iteration {iteration}: |w'v| = {pivot:e}")]
    Breakdown { iteration: usize, pivot: f64 },

    #[error("loss of biorthogonality at iteration {iteration}: |W'V - I|_F = {deviation:e}")]
    LossOfBiorthogonality { iteration: usize, deviation: f64 },

    #[error("PG projected ARE ill-posed at r = {r}: {source}")]
    IllPosedReducedAre {
        r: usize,
        #[source]
        source: LinalgError,
    },

    #[error("reduced ARE failed at iteration {iteration}: {source}")]
    ReducedAreFailed {
        iteration: usize,
        #[source]
        source: LinalgError,
    },

    #[error("not converged: r_max reached with relative residual {residual:e}")]
    NotConverged { residual: f64 },

    #[error("unstable system: H2 norm undefined")]
    Unstable,

    #[error("zero reference gain")]
    ZeroReference,

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
