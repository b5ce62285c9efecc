pub mod bench;
pub mod convex;
pub mod dfc;
pub mod error;
pub mod estimators;
pub mod io;
pub mod linalg;
pub mod matcomp;
pub mod resampling;
pub mod rng;
pub mod sampling;
pub mod data;

pub use data::{Dataset, ObservedMatrix, WeightedSample};
pub use error::{Error, Result};
pub use rng::RngStream;
