//! Batch analyses over specimen collections: distance matrices, Mantel
//! tests, leave-one-out classification, landmark propagation, seriation
//! and heatmaps.

mod classify;
mod mantel;
mod matrix;
mod propagate;
mod seriate;

pub use classify::{loo_classify, Assignment, ClassificationReport};
pub use mantel::{mantel, MantelResult};
pub use matrix::{pair_distance, pairwise_matrix, DistanceMatrix, LabeledCollection, Metric, PairFailure, PairOutcome, PairRecord, PairwiseRun, Specimen};
pub use propagate::{propagate_along_path, propagate_landmarks, Propagation};
pub use seriate::{heatmap_export, read_pixmap, seriate};
