//! Generic numerical building blocks: adaptive quadrature, bracketed root
//! finding, golden-section minimization and an adaptive Runge–Kutta integrator.

pub mod minimize;
pub mod ode;
pub mod quad;
pub mod root;

pub use minimize::golden_section;
pub use ode::Dopri5;
pub use quad::{integrate, QuadConfig, QuadResult};
pub use root::{brent, RootConfig};
