//! Gaussian-prior rater with an EP posterior.

pub mod ep;
pub mod quadrature;

pub use ep::{ep_fit, expected_logistic, gp_predict, tilted_moments, EpSite, GpParams, PosteriorTable, TiltedMoments};
pub use quadrature::{gauss_hermite, GaussHermite};
