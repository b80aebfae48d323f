//! Command-line tool and file formats for quantum-assisted crack
//! segmentation, built on `qseg-core`.

pub mod cli;
pub mod config;
pub mod corpus;
pub mod error;
pub mod model_file;
pub mod output;
pub mod plot;
pub mod raster;
pub mod tabular;
