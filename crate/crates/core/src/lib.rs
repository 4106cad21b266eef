//! Numerical geometry of rescaled Sasaki metrics on tensor bundles.
#![allow(clippy::needless_range_loop)]

pub mod base;
pub mod curvature;
pub mod error;
pub mod expr;
pub mod fields;
pub mod fiber;
pub mod frames;
pub mod geodesic;
pub mod jet;
pub mod metric_conn;
pub mod norden;
pub mod oracle;
pub mod sasaki;

pub use error::{Error, Result};
