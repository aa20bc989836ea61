//! Nearest-neighbors-of-neighbors (k-NNN) anomaly scoring over embedding
//! vectors, with plain k-NN, global and local eigen-normalized baselines,
//! correlation-driven feature partitioning, synthetic 2-D benchmarks and
//! AUROC evaluation.

pub mod data;
pub mod error;
pub mod eval;
pub mod index;
pub mod io;
pub mod linalg;
pub mod partition;
pub mod rng;
pub mod scoring;
pub mod synth;

pub use data::{FeatureMatrix, LabeledSet};
pub use error::{Error, Result};
pub use eval::{auroc, sweep, RocResult};
pub use index::{fit, knn_query, NeighborQueryResult, TrainedModel};
pub use io::{load_model, render_heatmap, save_model, HeatmapGrid, ModelFile};
pub use partition::{correlation_plan, identity_plan, PartitionPlan};
pub use scoring::{Method, ScoreConfig, ScoreReport};
pub use synth::{generate, make_benchmark, sample_negatives, BBox, Shape, SynthSpec};
