pub mod audit;
pub mod branching;
pub mod classical;
pub mod error;
pub mod forge;
pub mod hilbert;
pub mod instance;
pub mod preference;
pub mod problem;
pub mod sampling;

pub use error::{Error, Result};
