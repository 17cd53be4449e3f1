//! Hyperdimensional-computing classification engine with exact operation
//! accounting.
//!
//! The pipeline has four stages: encode feature vectors into hypervectors
//! (random projection or random Fourier features), train class prototypes
//! by superposition, infer by cosine similarity against the prototypes, and
//! retrain with mistake-driven corrections. Every stage records its exact
//! multiply-add/addition/activation counts, an analytic cost model is
//! validated against those counts with zero tolerance, and a constrained
//! Bayesian search tunes `(kind, dimensionality, basis spread)` under
//! accuracy/latency/time/energy budgets.

pub mod complexity;
pub mod encoder;
pub mod error;
pub mod instrument;
pub mod io;
pub mod model;
pub mod rng;
pub mod synthdata;
pub mod tuner;
pub mod types;

pub use encoder::{build_basis, Basis, EncoderConfig, EncoderKind};
pub use error::{Error, Result};
pub use instrument::{
    measure_time, scoped_count, EnergyModel, MetricsRecord, OpCounter, Stage, StageOps,
};
pub use model::{fit, ClassMemory, FitResult, Prediction, RetrainStats};
pub use rng::{make_rng, Seed, StreamRng};
pub use synthdata::{gen_image_task, gen_signal_task, split, standardize, Dataset, Split};
pub use tuner::{Constraints, ParetoFront, SearchSpace, Theta, TrialRecord, TuneOutcome};
pub use types::{EncodedBatch, FeatureVector, HyperVector, ShapeMeta};
