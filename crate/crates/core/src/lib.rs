pub mod action;
pub mod bench;
pub mod geometry;
pub mod models;
pub mod nn;
pub mod pipeline;
pub mod scoring;
pub mod spectral;
pub mod synth;
pub mod value;

pub use action::{Action, UnknownAction};
pub use value::Value;
