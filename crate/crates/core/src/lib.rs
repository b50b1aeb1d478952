pub mod cli;
pub mod config;
pub mod eval;
pub mod layout;
pub mod model;
pub mod parallel;
pub mod raster;
pub mod synthgen;
pub mod tensor;
pub mod training;
