//! Verification studies.

pub mod baselines;
pub mod constrained;
pub mod experiments;
pub mod gp;
pub mod output;
pub mod spline_error;
pub mod stability;
pub mod studies;
pub mod theory;
