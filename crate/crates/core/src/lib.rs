//! Caption text extraction from video frame sequences.

pub mod binarize;
pub mod corpus;
pub mod detect;
pub mod enhance;
pub mod error;
pub mod glyphs;
pub mod pipeline;
pub mod pnm;
pub mod postprocess;
pub mod raster;
pub mod recognize;
pub mod synth;
pub mod track;

pub use error::{Error, Result};
