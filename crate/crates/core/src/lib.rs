pub mod error;
pub mod estimation;
pub mod experiment;
pub mod gamesolver;
pub mod metrics;
pub mod model;
pub mod polytope;
pub mod presets;
pub mod samplers;
pub mod stopping;

pub use error::{PexError, Result};
