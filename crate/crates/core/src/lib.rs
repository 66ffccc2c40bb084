//! Blind hyperspectral-multispectral image fusion with graph Laplacian
//! regularization.
//!
//! Given a low-resolution hyperspectral cube `Y` and a high-resolution
//! multispectral cube `Z` of the same scene, [`fusion::bglrf`] jointly
//! estimates an unknown blur kernel `K` and the super-resolved cube `X` by
//! minimizing
//!
//! ```text
//! ||P C(K) X - Y||^2 + alpha Tr(X^T L(Z) X) + beta TV(K)   subject to K on the simplex
//! ```
//!
//! where `C(K)` is periodic convolution, `P` decimation and `L(Z)` the matting
//! Laplacian of the MSI pixel vectors.

pub mod admm;
pub mod cg;
pub mod cli;
pub mod cube;
pub mod error;
pub mod fusion;
pub mod interp;
pub mod io;
pub mod laplacian;
pub mod metrics;
pub mod simulate;
pub mod spatial;

pub use cube::{Cube, Image, Matrix};
pub use error::{Error, ErrorKind, Result};
pub use fusion::{bglrf, fuse, FusionConfig, FusionMode, FusionResult};
pub use spatial::{DownsampleSpec, Kernel};
