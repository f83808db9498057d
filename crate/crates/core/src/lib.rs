pub mod autodiff;
pub mod contact;
pub mod dataio;
pub mod error;
pub mod fixtures;
pub mod fsutil;
pub mod geometry;
pub mod mesh;
pub mod model;
pub mod simulate;
pub mod training;

pub use error::{Error, Result};
