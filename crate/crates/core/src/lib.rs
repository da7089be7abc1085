// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blackbox;
pub mod data;
pub mod dual;
pub mod error;
pub mod example;
pub mod experiments;
pub mod geometry;
pub mod nam;
pub mod report;
pub mod rng;
pub mod simplex;
pub mod surrogate;
pub mod svg;

pub use error::{Error, Result};
pub use geometry::{HullProjection, PointSet, Polytope};
