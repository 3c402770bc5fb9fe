//! Metrics on the flat torus, their connections and curvature.

pub mod connection;
pub mod jets;
pub mod kahler;
pub mod metric;
pub mod structure;

pub use connection::{
    christoffel, complex_curvature, projected_connection, CurvatureEndomorphism, PointGeometry,
};
pub use metric::{build_metric, MetricField, SymmetricTensorField, TensorJet};
pub use structure::{ComplexStructure, Signature};
