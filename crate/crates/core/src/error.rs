use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    /// Input data cannot support the requested operation (wrong shape,
    /// one-class outcome vector, empty dataset, non-finite values, ...).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// A metric is undefined for the given predictions (e.g. AUROC with a
    /// single-class outcome vector).
    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    /// An iterative fit ran out of iterations without meeting its tolerance.
    #[error("fit did not converge: {0}")]
    NonConvergence(String),

    /// The coefficient solver finished without satisfying its targets.
    #[error("solver failed: {context} (best objective {best_objective:.6e})")]
    SolverFailure { context: String, best_objective: f64 },

    /// Invalid configuration value or combination.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed external input (cache files, case-study CSV, ...); the
    /// message names the offending location.
    #[error("ingest error: {0}")]
    Ingest(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
