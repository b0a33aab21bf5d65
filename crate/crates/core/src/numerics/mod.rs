//! Special functions, quadrature, numerical differentiation and random streams.

pub mod diff;
pub mod quadrature;
pub mod rng;
pub mod special;

pub use diff::{central_diff, central_second_diff, one_sided_diff, richardson, Extrapolated};
pub use quadrature::{integrate, QuadratureSpec};
pub use rng::{next_gaussian, run_indexed, RngStream};
pub use special::{erf, erfc, erfcx, std_normal_cdf, std_normal_pdf, std_normal_sf, GaussMass};
