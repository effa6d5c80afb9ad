//! Nonlinear predictive vector quantization of waveforms.

pub mod analysis;
pub mod audio;
pub mod bits;
pub mod cli;
pub mod codec;
pub mod mlp;
pub mod pipeline;
pub mod scalar;
pub mod vq;
