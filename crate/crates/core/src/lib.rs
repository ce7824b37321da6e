//! Birman-Schwinger analysis of Schrodinger operators with measure-valued potentials in R^3.
//!
//! Measures are discretized as weighted panel clouds ([`DiscreteMeasure`]); the operator
//! V R_0(lambda^2) becomes a dense matrix ([`BSMatrix`]) on the atoms.

pub mod error;
pub mod geom;
pub mod io;
pub mod measure;
pub mod num;
pub mod oracle;
pub mod propagator;
pub mod resolvent;
pub mod spectral;
pub mod wiener;

pub use error::{Error, Result};
pub use geom::Point;
pub use measure::{Atom, DimensionProfile, DiscreteMeasure, ProbeSpec};
pub use oracle::ShellSpec;
pub use propagator::{EvolutionConfig, EvolutionResult, GaussianComponent, SourceFunction};
pub use resolvent::{BSMatrix, DiagRule, SpectralParameter};
pub use spectral::{BoundStateList, SpectralScan};
pub use wiener::{CutoffPair, WienerParameters};
