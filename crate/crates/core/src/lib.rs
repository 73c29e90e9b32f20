//! Scaled neural CDE engine.

pub mod dynamics;
pub mod interp;
pub mod series;
pub mod solver;
pub mod tensor;
pub mod metrics;
pub mod model;
pub mod train;
pub mod datagen;
pub mod io;
pub mod rng;
pub mod experiment;
