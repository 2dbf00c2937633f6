//! Regional explanations of tabular regression models.
//!
//! ICE curves of every feature are clustered by slope; each cluster's
//! centroid (a "VINE curve") is annotated with a one-split predicate that
//! explains membership. The crate also scores explanation quality against a
//! random-partition baseline, Friedman's H-statistic and the Information
//! Ceiling, and exports everything as a JSON document for the UI.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix the common `f64` case.

pub mod clustering;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod explain;
pub mod export;
pub mod interaction;
pub mod model;
pub mod pdcurves;
pub mod pipeline;
pub mod scalar;

pub use error::{Result, VineError};
pub use scalar::Scalar;

pub type Dataset64 = dataset::Dataset<f64>;
pub type Dataset32 = dataset::Dataset<f32>;
pub type FeatureGrid64 = dataset::FeatureGrid<f64>;
pub type GbmModel64 = model::GbmModel<f64>;
pub type GbmModel32 = model::GbmModel<f32>;
pub type CurveSet64 = pdcurves::CurveSet<f64>;
pub type CurveSet32 = pdcurves::CurveSet<f32>;
pub type ClusterAssignment64 = clustering::ClusterAssignment<f64>;
pub type Predicate64 = explain::Predicate<f64>;
pub type HMatrix64 = interaction::HMatrix<f64>;
pub type Analysis64 = pipeline::Analysis<f64>;
pub type Analysis32 = pipeline::Analysis<f32>;
