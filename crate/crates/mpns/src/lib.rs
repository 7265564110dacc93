//! Two-modality representation learning with necessity/sufficiency-style
//! auxiliary objectives, plus the synthetic benchmark used to study it.

pub mod diffcore;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod objectives;
pub mod seeds;
pub mod trainer;
pub mod synthgen;

pub use error::{Error, Result};
