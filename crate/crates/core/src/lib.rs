//! Orbit, frame and large-scale channel parameter model for non-geostationary
//! satellite links, with a file-based estimation pipeline.
//!
//! Geometry types are generic over the scalar; the `*64` aliases fix it to
//! `f64`, which is what the pipeline uses.

pub mod analysis;
pub mod config;
pub mod constellation;
pub mod environment;
pub mod error;
pub mod frames;
pub mod io;
pub mod lsp;
pub mod orbit;
pub mod pipeline;
pub mod rng;
pub mod scalar;
pub mod scenario;

pub use error::{Error, Result};

pub type EarthConstants64 = orbit::EarthConstants<f64>;
pub type OrbitalElements64 = orbit::OrbitalElements<f64>;
pub type OrbitState64 = orbit::OrbitState<f64>;
pub type Propagator64 = orbit::Propagator<f64>;
pub type TerminalLocation64 = frames::TerminalLocation<f64>;
pub type MtFrameState64 = frames::MtFrameState<f64>;
pub type LspCoefficients64 = lsp::LspCoefficients<f64>;
