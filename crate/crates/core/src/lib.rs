//! Numerical laboratory for logarithmic potential theory and orthogonal
//! polynomials on compact sets.

pub mod chebyshev;
pub mod error;
pub mod measures;
pub mod orthopoly;
pub mod potential;
pub mod quad;
pub mod real;
pub mod sets;
pub mod szego;

pub use chebyshev::ChebyshevResult;
pub use error::{Error, Result};
pub use measures::{AtomList, DensitySpec, MeasureSpec};
pub use orthopoly::OrthoResult;
pub use potential::EquilibriumData;
pub use real::{MpReal, Real};
pub use sets::{CompactSetSpec, Interval};
pub use szego::{BoundReport, LimitReport};

/// Version string embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
