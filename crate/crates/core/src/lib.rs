pub mod analysis;
pub mod closure;
pub mod error;
pub mod generators;
pub mod graph;
pub mod partition;
pub mod prediction;
pub mod sampler;
pub mod sbm;
pub mod special;
pub mod state;

pub use error::{Error, Result};
pub use graph::{global_clustering, Clustering, MultiGraph, SimpleGraph};
pub use partition::Partition;
