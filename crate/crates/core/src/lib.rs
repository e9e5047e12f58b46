//! Numerical realization of the sectional-curvature formulas on the Teichmüller curve and
//! along Weil–Petersson geodesics, on a concrete genus-2 hyperbolic surface.

pub mod bochner;
pub mod cache;
pub mod config;
pub mod curvature;
pub mod disk;
pub mod error;
pub mod fuchsian;
pub mod helmholtz;
pub mod jets;
pub mod mesh;
pub mod qdiff;
pub mod report;
pub mod surface;
pub mod verify;

pub use error::{Error, Result};
