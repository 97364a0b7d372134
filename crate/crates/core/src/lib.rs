//! Crowdsourced image-quality study processing, a multi-task quality and
//! distortion predictor, spatial maps, and guided-photography feedback.

pub mod analysis;
pub mod cleaning;
pub mod data;
pub mod error;
pub mod feedback;
pub mod maps;
pub mod predictor;
pub mod raster;
pub mod screening;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
