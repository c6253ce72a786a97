//! Random polytope normed spaces: exact norm oracles, operator norms, Banach-Mazur distance
//! bounds and seeded Monte Carlo checks of their geometry.

pub mod bm;
pub mod error;
pub mod experiments;
pub mod estimators;
pub mod io;
pub mod linalg;
pub mod lp;
pub mod operators;
pub mod oracles;
pub mod polytope;
pub mod report;
pub mod rng;
pub mod sampling;

pub use error::{GlabError, Result};
pub use operators::LinearMap;
pub use polytope::{HPolytope, VPolytope};
pub use report::{BoundCheck, EstimateReport};
pub use rng::RngSeed;
pub use sampling::{DistributionSpec, Family, SampleSet};
