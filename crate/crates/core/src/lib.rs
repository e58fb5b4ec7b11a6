//! Conditional-GAN CT image synthesis from semantic segmentation maps.
//!
//! The pipeline trains a dual global-local generator against a dual
//! multi-resolution PatchGAN discriminator, with two learned cross-network
//! weights: a dynamic element-wise sum blending global and local generator
//! features, and a dynamic feature-matching weight balancing the two
//! discriminators' feature-matching losses. A procedural phantom-lung dataset
//! drives training, synthesis, evaluation, and the segmentation experiments
//! end to end without clinical data.

pub mod error;
pub mod tensor;
pub mod nn;

pub use error::{Error, Result};
