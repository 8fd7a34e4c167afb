//! Sub-Riemannian mean curvature flow on the roto-translation space R²×S¹
//! for image completion and contour enhancement.
//!
//! An image is lifted to a level-set function `u` and an intensity `v` on
//! R²×S¹ ([`lifting`]), `u` is evolved by a regularized horizontal curvature
//! flow ([`flow`]) while `v` follows the Laplace–Beltrami flow driven by `u`
//! ([`lb_flow`]), and the result is projected back to the image plane.
//! [`pipelines`] wires these stages into inpainting and enhancement.

pub mod config;
pub mod error;
pub mod flow;
pub mod grid;
pub mod io;
mod kernel;
pub mod lb_flow;
pub mod lifting;
pub mod pipelines;

pub use error::{Error, Result};
pub use flow::{Boundary, Diagnostics, FlowParams, MixedUpwind, Region3, TimeStep};
pub use grid::{Axis, Frame, GridSpec, ScalarField3, Scheme};
pub use lifting::{Image, Mask, OrientationField, Projection};
pub use pipelines::{Concentration, PipelineConfig, RunReport};
