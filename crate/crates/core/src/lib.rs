//! Effect-wise estimation and inference for smoothing spline ANOVA models on
//! tensor-product Sobolev spaces.
//!
//! The pipeline is: build a [`design::Dataset`] and [`design::ModelSpec`],
//! fit with [`solver`], decompose each effect's Gram matrix with
//! [`spectral`], then form intervals and Wald-type tests with [`inference`].
//! [`simulation`] reproduces the Monte-Carlo study of the method.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod design;
pub mod effect;
pub mod error;
pub mod inference;
pub mod kernels;
pub mod normal;
pub mod quadrature;
pub mod simulation;
pub mod solver;
pub mod spectral;

pub use design::{Dataset, LambdaPolicy, ModelSpec};
pub use effect::Effect;
pub use error::{Error, Result};
pub use solver::{FittedModel, GcvTrace, PenaltySystem};
