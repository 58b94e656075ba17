//! Empirical checks of the mixup theory.
//!
//! [`bounds`] samples class-conditional neighborhoods and compares the
//! neighbor-averaged feature and label with their closed-form expectations
//! and Hoeffding-type tail bounds. [`regularizer`] checks that one residual
//! mixup step is one explicit descent step on a smoothness objective.

pub mod bounds;
pub mod regularizer;
pub mod synthetic;

pub use bounds::{verify_theorem1, verify_theorem2, BoundReport, MeanCheck, Quantity, TheoremReport};
pub use regularizer::{
    gradient_step, regularizer_gradient, regularizer_value, verify_theorem3, Regularizer, Theorem3Report,
};
pub use synthetic::{
    erdos_renyi, expected_mixed_feature, expected_mixed_label, generate_graph, generate_neighborhood, GraphSpec,
    Neighborhood, SyntheticSpec,
};
