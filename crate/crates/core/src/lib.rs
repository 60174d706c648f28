//! Scene abstraction toolkit.
//!
//! Builds structured scene representations for word usages by prompting a
//! chat model, embeds selected profile components, and evaluates them on the
//! odd-scene-out task and in a blinded A/B preference study.

pub mod datasets;
pub mod dimension;
pub mod embedding;
pub mod evaluation;
pub mod generation;
pub mod scene;
mod text;
pub mod transport;

pub use dimension::Dimension;
