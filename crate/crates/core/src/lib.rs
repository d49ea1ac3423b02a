//! Hardy's Z function, power-moment error terms of ζ on the critical line,
//! and modified Mellin/Laplace transforms of powers of Z.

pub mod checksum;
pub mod dd;
pub mod error;
pub mod fit;
pub mod identities;
pub mod moments;
pub mod quad;
pub mod real;
pub mod special;
pub mod store;
pub mod suite;
pub mod sum;
pub mod transforms;

pub use error::{Error, Result};
pub use real::{Real, EULER_GAMMA};
pub use special::{hardy_z, EvalConfig, Method};

pub type C64 = num_complex::Complex64;
pub type KahanSum = sum::Kahan<f64>;
pub type Poly = moments::MomentPolynomial<f64>;
