use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("integration quality: {quantity} drifted by {drift:.3e} (tolerance {tolerance:.1e}); reduce the time step")]
    IntegrationQuality {
        quantity: &'static str,
        drift: f64,
        tolerance: f64,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("dataset has too few samples: class {class} has {count}, need at least {needed}")]
    TooFewSamples {
        class: usize,
        count: usize,
        needed: usize,
    },

    #[error("checkpoint is missing feature standardization statistics")]
    MissingStats,

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
