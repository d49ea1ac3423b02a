//! Special functions: log Γ, θ, χ, ζ, Hardy's Z and divisor functions.

pub mod chi;
pub mod config;
pub mod divisor;
pub mod gamma;
pub mod hardy;
pub mod rs;
pub mod theta;
pub mod zeta;

pub use chi::chi;
pub use config::{EvalConfig, Method};
pub use divisor::DivisorTable;
pub use gamma::{bernoulli_exact, log_gamma, log_gamma_real};
pub use hardy::{hardy_z, z_value, Fallback, ZValue};
pub use theta::theta;
pub use zeta::{zeta_oracle, ZetaValue};
