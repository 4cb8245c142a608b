//! Level-set segmentation without re-initialization, regularized by a
//! molecular-beam-epitaxy (slope selection) energy and solved spectrally on
//! periodic grids.

pub mod energy;
pub mod error;
pub mod field;
pub mod fixture;
pub mod levelset;
pub mod model;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use field::{GaussianKernel, ScalarField2D, VectorField2D};
pub use levelset::{DiracKind, DiracSpec, InitMode, InitSpec, Polyline, Shape};
pub use model::{CurvatureForm, Fidelity, ModelSpec, Regularizer, Scheme};
pub use solver::{run, EnergyTrace, LevelSetState, SegmentationResult, Solver};
pub use spectral::{build_symbols, SpectralSymbols};
pub use fixture::{dice, generate, iou, Bias, FixtureKind, FixtureSpec};
