//! Numerical laboratory for transportation-cost inequalities on path and
//! rough-path space: variation norms, Brownian Cameron-Martin geometry,
//! level-2 rough paths and their translations, SDE/RDE solution maps,
//! Wasserstein distances, Gaussian relative entropy and Monte Carlo tail
//! analysis.

pub mod assignment;
pub mod concentration;
pub mod error;
pub mod flows;
pub mod gaussian;
pub mod par;
pub mod paths;
pub mod rng;
pub mod roughlift;
pub mod transport;

pub use error::{LabError, Result};
pub use paths::{Interval, SampledPath, SobolevParams};
pub use rng::SeededRng;
pub use roughlift::RoughPath2;
