//! Few-shot open-set keyword spotting.
//!
//! The pipeline has three stages: an embedding encoder trained offline on a
//! large labelled source corpus with a metric-learning objective, an
//! enrollment step that turns K user recordings per keyword into class
//! prototypes, and distance-based open-set scoring that can answer
//! "unknown".

pub mod container;
pub mod dataset;
pub mod encoder;
pub mod eval;
pub mod error;
pub mod frontend;
pub mod linalg;
pub mod openset;
pub mod synthetic;
pub mod trainer;

pub use error::{Error, Result};
