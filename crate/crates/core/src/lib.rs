pub mod error;
pub mod exec;
pub mod halfline;
pub mod harness;
pub mod kreiss;
pub mod linalg;
pub mod projector;
pub mod rates;
pub mod symbol;
pub mod symmetrizer;
pub mod transform;
pub mod wave;

pub use error::{Error, Result};
