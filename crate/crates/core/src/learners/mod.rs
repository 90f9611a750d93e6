//! Weighted learners shared by the estimators: a ridge-logistic classifier,
//! an isotonic regressor and a least-squares line.

pub mod isotonic;
pub mod linear;
pub mod logistic;

pub use isotonic::{fit_monotone_map, fit_monotone_map_real, MonotoneMap};
pub use linear::{fit_line, LinearModel};
pub use logistic::{fit_prob_classifier, sigmoid, ClassifierConfig, LogisticObjective, ProbClassifier, PROB_FLOOR};
