//! Batch-normalized MLP regressor from pulsation features to fSpO2.

pub mod cv;
pub mod gradcheck;
pub mod metrics;
pub mod model;
pub mod train;

pub use cv::{grouped_split, random_split, temporal_cv, Fold, TemporalCv};
pub use gradcheck::{gradcheck, nudge_from_kinks, GradCheck};
pub use metrics::{evaluate, Metrics};
pub use model::{Mlp, MlpConfig, Mode};
pub use train::{train, EarlyStopping, History, Regressor, Samples, Standardizer};
