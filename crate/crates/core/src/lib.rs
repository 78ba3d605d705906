//! Numerical machinery for left-invariant integral functionals on Carnot groups.
//!
//! The crate is organised bottom-up:
//!
//! * [`group`]: group law, dilations, homogeneous norms and distances;
//! * [`domain`] and [`calculus`]: grid domains, scalar fields, horizontal gradients;
//! * [`mollify`]: mollifier families and the group-local convolution;
//! * [`functional`]: integral functionals and checkers for their structural properties;
//! * [`recovery`] and [`gamma`]: integrand recovery from probe functions, the
//!   uniqueness check and Gamma-limit experiments.

pub mod calculus;
pub mod domain;
pub mod error;
pub mod expr;
pub mod functional;
pub mod gamma;
pub mod group;
pub mod integrand;
pub mod laws;
pub mod mollify;
pub mod recovery;
pub mod sampling;

pub use calculus::{GradientMode, GridField, HorizontalVector, ScalarField};
pub use domain::GridDomain;
pub use error::{Error, Result};
pub use expr::Expr;
pub use group::{GroupPoint, GroupRef, GroupSpec, HomogeneousNorm, StratifiedGroup};
pub use mollify::{convolve, erode_domain, MollifierFamily};
