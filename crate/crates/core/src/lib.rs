//! Discontinuous Galerkin discretisation of advection-diffusion-reaction
//! equations of nonnegative characteristic form on triangular meshes.
//!
//! The core is generic over the scalar type ([`Real`], implemented for
//! `f32` and `f64`); the aliases at the crate root fix `f64`.

pub mod assembly;
pub mod error;
pub mod harness;
pub mod mesh;
pub mod partition;
pub mod problem;
pub mod scalar;
pub mod solver;
pub mod space;
pub mod sparse;

pub use error::{Error, Result};
pub use scalar::{Point, Real, Tensor};

pub type Mesh = mesh::Mesh<f64>;
pub type ProblemData = problem::ProblemData<f64>;
pub type Partition = partition::Partition<f64>;
pub type DGSpace<'m> = space::DGSpace<'m, f64>;
