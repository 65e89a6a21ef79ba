//! Two-phase feature selection for KDD-99 style network connection records.
//!
//! The filter phase ([`entropy`]) scores every feature by information gain
//! against the five attack categories and ranks them. The wrapper phase
//! ([`wrapper`]) walks that ranking, growing a feature subset one candidate at
//! a time and keeping a candidate only when k-nearest-neighbor accuracy
//! ([`knn`]) strictly improves. [`report`] runs size sweeps and writes the
//! resulting tables; [`cli`] binds everything into one binary.

pub mod cli;
pub mod dataset;
pub mod entropy;
pub mod error;
pub mod knn;
pub mod report;
pub mod wrapper;

pub use dataset::{AttackCategory, CategoryDictionary, Dataset, FeatureKind, FeatureSchema};
pub use entropy::{DiscretizationSpec, GainTable};
pub use error::{Error, Result};
pub use knn::{EvaluationReport, FeatureSubset, KnnConfig};
pub use wrapper::{SelectionTrace, WrapperConfig};
