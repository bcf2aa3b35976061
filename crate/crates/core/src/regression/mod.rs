//! Baseline `Q̂_l(x, a_{1:l})` for Cascade-DR, fitted slot by slot from the
//! last slot backward.

mod encoder;
mod qmodel;
mod ridge;
mod tree;

pub use encoder::FeatureEncoder;
pub use qmodel::{
    expected_q_under_policy, fit_q_model, predict_q, CrossFit, FittedLearner, LearnerConfig,
    QModel,
};
pub use ridge::RidgeModel;
pub use tree::{RegressionTree, TreeConfig};
