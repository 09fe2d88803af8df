//! Sparse-cue guided stereo matching.
//!
//! A small toolkit that takes extremely sparse but accurate disparity cues
//! (for example from LiDAR), grows each cue into an image-structure-aligned
//! effective area via cross-based search, and steers a classical cost-volume
//! stereo backbone toward the cues with distance-weighted Gaussian
//! multipliers. No training involved; the enhancement attaches to any
//! cost-volume pipeline.
//!
//! Modules map one-to-one onto pipeline stages:
//! - [`imgio`]: PGM/PPM/PNG images, PFM/KITTI-PNG/CSV disparities, cue sampling
//! - [`costvol`]: census and SAD cost volumes, SGM aggregation, WTA, subpixel
//! - [`expansion`]: cross-based sparsity expansion into a guidance field
//! - [`enhancement`]: Gaussian / distance-weighted multiplicative enhancement
//! - [`metrics`]: average pixel error and n-pixel error rates
//! - [`synth`]: synthetic rectified pairs with exact ground truth
//! - [`pipeline`]: configured runs, ablation matrix, density sweep, manifest

pub mod costvol;
pub mod enhancement;
pub mod error;
pub mod expansion;
pub mod imgio;
pub mod metrics;
pub mod pipeline;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
