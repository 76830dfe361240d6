//! Downlink resource allocation for two adjacent OFDMA cells sharing a
//! fraction `alpha` of their subcarriers.
//!
//! The crate is layered bottom-up:
//!
//! * [`kernel`]: Rayleigh-fading expectations `E[ln(1+xZ)]`, `E[Z/(1+xZ)]`,
//!   the function `f`, its inverse and the derived `C` and `F`;
//! * [`system`]: path loss, noise, gain-to-noise ratios and scenarios;
//! * [`single_cell`]: water-filling of users sharing one band;
//! * [`pingpong`]: best-response iteration on the reused band;
//! * [`optimal`]: the optimal joint allocation and the simplified
//!   fixed-pivot allocator;
//! * [`asymptotic`]: the large-population limit, pivot distances and the
//!   choice of reuse factor;
//! * [`harness`]: Monte Carlo experiments and CSV output.
//!
//! The kernels, root finders and quadrature rules are generic over
//! [`Scalar`] (`f32` or `f64`); the allocation layers work in [`Real`].

pub mod asymptotic;
pub mod error;
pub mod harness;
pub mod kernel;
pub mod optimal;
pub mod pingpong;
pub mod quad;
pub mod roots;
pub mod scalar;
pub mod single_cell;
pub mod system;

pub use error::{Error, Result};
pub use kernel::{Kernel, KernelConfig, LevelPoint, Moments};
pub use scalar::Scalar;

/// Scalar type of the allocation layers.
pub type Real = f64;
pub type Kernel64 = Kernel<f64>;
pub type Kernel32 = Kernel<f32>;
