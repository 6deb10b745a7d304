//! Multi-lead classifier that accepts any lead subset, plus the verdict table it produces.

mod dap;
mod model;
mod verdict;

pub use dap::{bin, dap_pool, DapSpec, Pooling};
pub use model::{
    classify, train_reduced_classifier, views_gradient, Adam, ConvBlockSpec, ReducedClassifier,
    ReducedClassifierSpec, TrainConfig, TrainReport, View, MODEL_VERSION,
};
pub use verdict::{build_verdict_table, VerdictRow, VerdictTable};
