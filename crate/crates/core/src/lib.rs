//! Time-series imputation and prediction with a bidirectional recurrent
//! generative-adversarial model, classical baselines, and an evaluation
//! harness for masked-deletion protocols.

pub mod autodiff;
pub mod baselines;
pub mod corruption;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod model;
pub mod optim;
pub mod scalar;
pub mod seed;
pub mod synth;
pub mod tensorfile;
pub mod trainer;

pub use error::{Error, Result};
pub use scalar::{cast, Scalar};

/// Default scalar for the command-line tools and on-disk formats.
pub type Real = f64;

/// Dense array over the default scalar.
pub type RealArray = autodiff::Array<Real>;

/// Computation tape over the default scalar.
pub type RealTape = autodiff::Tape<Real>;

/// Dataset over the default scalar.
pub type RealDataset = dataset::Dataset<Real>;

/// Sample over the default scalar.
pub type RealSample = dataset::SeriesSample<Real>;

/// Trained-model checkpoint over the default scalar.
pub type RealCheckpoint = trainer::Checkpoint<Real>;
