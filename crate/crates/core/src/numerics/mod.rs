//! Small numerical building blocks shared by the physics modules.

pub mod block;
pub mod lsq;
pub mod optimize;
pub mod quadrature;

pub use block::{BlockTridiagonal, Mat2, Vec2};
pub use lsq::{levenberg_marquardt, LmOptions, LmReport};
pub use optimize::golden_section;
pub use quadrature::{gauss_legendre_5, integrate_gauss};
