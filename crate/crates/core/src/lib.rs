//! Fairness-aware uplift decision trees.
//!
//! The pipeline: load a table with a binary label and a binary sensitive
//! attribute ([`data`]), grow a multiway tree whose splits maximize the
//! divergence between favored and deprived class distributions
//! ([`divergence`], [`tree`]), score each leaf's discrimination, relabel the
//! rows of discriminatory leaves ([`relabel`]), and measure the effect with
//! group fairness metrics ([`metrics`]) through a small evaluation harness
//! ([`eval`]).

pub mod data;
pub mod divergence;
pub mod error;
pub mod eval;
pub mod metrics;
pub mod relabel;
pub mod tree;

pub use data::{
    AttributeKind, AttributeSpec, BinStrategy, DataTable, DataWarning, DiscretizationRule,
    GroupCounts, LabelSpec, Schema, SensitiveSpec, MISSING,
};
pub use error::{DataError, DivergenceError, ErrorCategory, EvalError, MetricError, RelabelError, TreeError};
pub use tree::{Criterion, FairTree, InterpretabilityStats, SubgroupDescriptor, TreeConfig};
pub use relabel::{Action, RelabelPlan, RelabeledTable};
pub use metrics::{FairnessReport, GroupConfusion};
pub use eval::{LinearModel, SweepConfig, SweepResult, TrainConfig, Variant};
