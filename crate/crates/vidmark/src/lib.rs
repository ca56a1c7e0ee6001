//! Blind video watermarking in the 3D wavelet domain.
//!
//! The toolkit embeds a short binary message into the mid-frequency
//! spatio-temporal wavelet coefficients of a clip's luma channel, recovers it
//! from distorted copies without access to the original, and ships the
//! machinery needed to evaluate that loop end to end: a library of
//! shape-preserving distortions, quality metrics, a per-frame watermark
//! detector, and a batch evaluation harness with CSV/JSON reporting.
//!
//! Modules, bottom up:
//!
//! - [`clip`]: the `VideoClip` sample model and colorspace conversion.
//! - [`io`]: Y4M, frame-directory, and raw planar readers/writers.
//! - [`tile`]: fixed-length temporal segmentation.
//! - [`wavelet`]: separable 3-level 3D Haar analysis/synthesis.
//! - [`spread`]: key generation, spread-spectrum embed and blind extract.
//! - [`distortion`]: the attack library (plus the external codec bridge).
//! - [`metrics`]: PSNR, mean SSIM, temporal PSNR, bit accuracy.
//! - [`detector`]: sliding-window watermark detection and localization.
//! - [`synth`]: seeded synthetic clips used by tests and the bundled corpus.
//! - [`eval`]: the benchmark harness behind the CLI.

pub mod clip;
pub mod detector;
pub mod distortion;
pub mod error;
pub mod eval;
pub mod io;
pub mod metrics;
pub mod spread;
pub mod synth;
pub mod tile;
pub mod wavelet;

mod jpeg;

pub use clip::{Colorspace, VideoClip};
pub use error::{Error, Result};
