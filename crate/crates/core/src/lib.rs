pub mod adequacy;
pub mod error;
pub mod fleet;
pub mod gep;
pub mod hull;
pub mod milp;
pub mod pipeline;
pub mod sampler;
pub mod sweep;
pub mod wodt;
pub use error::{Error, Result};
