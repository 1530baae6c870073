//! Random forests whose trees are combined with per-instance attention
//! weights instead of a plain average.
//!
//! A forest is fitted once ([`forest::fit_forest`]); each instance is then
//! described by an [`forest::InstancePanel`] holding, for every tree, the
//! mean feature vector of the leaf it reaches and that leaf's output. The
//! models in [`model`] turn a panel into tree weights, trained either by a
//! small quadratic or linear program over the unit simplex or by gradient
//! descent.

pub mod attention;
pub mod data;
pub mod error;
pub mod experiment;
pub mod forest;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod solver;
pub mod tree;

pub use attention::{AttentionParams, SoftmaxSign};
pub use data::{Dataset, SplitPlan, Targets, Task};
pub use error::{Error, Result};
pub use forest::{fit_forest, Ensemble, Forest, ForestConfig, InstancePanel, Prediction};
pub use metrics::{EvalReport, F1Average};
pub use model::{AttentionModel, ModelKind, PanelSet, TrainOptions};
pub use tree::GrowthCondition;
