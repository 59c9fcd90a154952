pub mod error;
pub mod experiments;
pub mod occupation;
pub mod paths;
pub mod quad;
pub mod regularize;
pub mod sampling;
pub mod specfun;
pub mod stats;

pub use error::{Error, Result};
pub use occupation::{Bins, CrossingCount, LinearPath, OccupationDensity};
pub use paths::{SamplePath, TimeGrid};
pub use regularize::{Kernel, RegularizedPath};
pub use sampling::{MixingVariable, RngStream};
pub use specfun::{EvalConfig, GreyParams};
pub use stats::{EmpiricalLaw, Ensemble, PowerVariationResult};
