//! Metric depth from scaleless depth rasters via per-scene polynomial transforms.
//!
//! A scaleless depth map `z` (for example the output of a monocular depth
//! network) is mapped to metric depth with a polynomial
//! `d(z) = c0 + c1 u + ... + cN u^N`, `u = z / z_max`. The coefficients are
//! predicted per scene by a small attention network from a sparse 3D point
//! cloud (radar) and the scaleless raster itself, and trained with an
//! L1 + L2 loss plus a slope term that pulls the transform toward unit slope.
//!
//! Modules, bottom-up:
//!
//! - [`autodiff`]: a small reverse-mode differentiation graph over dense `f64` tensors.
//! - [`datamodel`]: depth rasters, point clouds, scene bundles and their file formats.
//! - [`synthgen`]: deterministic synthetic scenes with per-region monotone warps.
//! - [`polytransform`]: polynomial evaluation, slope and inflection points.
//! - [`baselines`]: median scaling, closed-form linear and polynomial least squares.
//! - [`network`]: the coefficient-prediction network and its checkpoint format.
//! - [`training`]: loss, Adam, training loop, degree sweep and ablations.
//! - [`eval`]: MAE/RMSE with distance caps and per-method reports.
//! - [`cli`]: the subcommand front end used by the `polydepth` binary.
//!
//! Runnable walkthroughs live in `examples/`.

pub mod autodiff;
pub mod baselines;
pub mod cli;
pub mod config;
pub mod datamodel;
pub mod error;
pub mod eval;
pub mod network;
pub mod polytransform;
pub mod synthgen;
pub mod training;

pub use datamodel::{DepthKind, DepthMap, Mask, PolyCoefficients, RadarCloud, SceneSample};
pub use error::{Error, Result};
