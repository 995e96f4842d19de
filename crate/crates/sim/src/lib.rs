//! Simulation studies for `polyamix`: ground-truth densities, goodness-of-fit
//! statistics, the density-estimation, quantile-regression, conformal and
//! mixed-data experiments, and CSV output with a JSON metadata header.

pub mod output;
pub mod stats;
pub mod studies;
pub mod truth;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent reproducible stream `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] polyamix::Error),
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl SimError {
    /// Process exit code: 2 for bad input, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Model(_) | Self::Validation(_) | Self::Json(_) => 2,
            Self::Io(_) | Self::Csv(_) => 1,
        }
    }
}

pub type SimResult<T> = std::result::Result<T, SimError>;
