//! Multiplicative feature enhancement of a SCORE-oriented cost volume from a
//! guidance field: plain Gaussian at cue pixels (GSM), uniform Gaussian over
//! the expanded area, or distance-weighted variants f and f^s.

use serde::{Deserialize, Serialize};

use crate::costvol::{CostVolume, Orientation};
use crate::error::{Error, Result};
use crate::expansion::GuidanceField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Identity; the un-guided baseline.
    None,
    /// Gaussian at cue pixels only (no expansion).
    Gsm,
    /// Same Gaussian over the whole expanded area, no distance weighting.
    Expansion,
    /// Distance-weighted: linear interpolation between the Gaussian and 1.
    F,
    /// Shifted distance-weighted: joint Gaussian in disparity and distance on
    /// a base height b.
    Fs,
    /// Diagnostic hard assignment: force the cue disparity to win outright at
    /// cue pixels.
    Hard,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EnhanceParams {
    pub variant: Variant,
    /// Gaussian height.
    pub h: f64,
    /// Gaussian width in disparity bins.
    pub w: f64,
    /// Distance sensitivity in pixels.
    pub v: f64,
    /// Base height (fs only).
    pub b: f64,
}

impl EnhanceParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) || !(self.w > 0.0) || !(self.v > 0.0) || !(self.b >= 0.0) {
            return Err(Error::Config(format!(
                "enhancement parameters out of range: h={} w={} v={} b={} (need h,w,v > 0, b >= 0)",
                self.h, self.w, self.v, self.b
            )));
        }
        Ok(())
    }
}

impl Default for EnhanceParams {
    fn default() -> Self {
        // fs defaults; see pipeline presets for the full table
        EnhanceParams {
            variant: Variant::Fs,
            h: 20.0,
            w: 1.0,
            v: 1.0,
            b: 0.1,
        }
    }
}

/// Gaussian enhancement profile: h * exp(-(d - d_i)^2 / (2 w^2)).
#[inline]
pub fn gauss_g(d: f64, d_i: f64, h: f64, w: f64) -> f64 {
    h * (-(d - d_i).powi(2) / (2.0 * w * w)).exp()
}

/// Distance-weighted multiplier f: convex combination of the Gaussian and
/// the identity multiplier 1, with mixing weight alpha = min(1, dist / v).
#[inline]
pub fn weight_f(d: f64, d_i: f64, dist: f64, params: &EnhanceParams) -> f64 {
    let alpha = (dist / params.v).min(1.0);
    (1.0 - alpha) * gauss_g(d, d_i, params.h, params.w) + alpha
}

/// Shifted distance-weighted multiplier f^s:
/// b + h * exp(-((d - d_i)^2 / (2 w^2) + dist^2 / (2 v^2))).
#[inline]
pub fn weight_fs(d: f64, d_i: f64, dist: f64, params: &EnhanceParams) -> f64 {
    let exponent =
        (d - d_i).powi(2) / (2.0 * params.w * params.w) + dist * dist / (2.0 * params.v * params.v);
    params.b + params.h * (-exponent).exp()
}

/// Multiplies the score volume by the configured guidance profile at every
/// non-empty guidance pixel. Empty pixels and the `none` variant leave
/// scores bit-identical.
pub fn apply_enhancement(
    vol: &CostVolume,
    field: &GuidanceField,
    params: &EnhanceParams,
) -> Result<CostVolume> {
    vol.require(Orientation::Score)?;
    params.validate()?;
    if vol.width != field.width || vol.height != field.height {
        return Err(Error::DimensionMismatch(format!(
            "volume {}x{} vs guidance field {}x{}",
            vol.width, vol.height, field.width, field.height
        )));
    }
    let mut out = vol.clone();
    if params.variant == Variant::None {
        return Ok(out);
    }
    let depth = vol.depth;
    for (slot, cell) in field.cells.iter().enumerate() {
        let Some(g) = cell else { continue };
        let px = &mut out.data[slot * depth..(slot + 1) * depth];
        match params.variant {
            Variant::None => unreachable!(),
            Variant::Gsm | Variant::Hard if g.dist != 0.0 => continue,
            Variant::Gsm | Variant::Expansion => {
                for (d, s) in px.iter_mut().enumerate() {
                    *s = (*s as f64 * gauss_g(d as f64, g.d_src as f64, params.h, params.w)) as f32;
                }
            }
            Variant::F => {
                for (d, s) in px.iter_mut().enumerate() {
                    *s = (*s as f64 * weight_f(d as f64, g.d_src as f64, g.dist as f64, params))
                        as f32;
                }
            }
            Variant::Fs => {
                for (d, s) in px.iter_mut().enumerate() {
                    *s = (*s as f64 * weight_fs(d as f64, g.d_src as f64, g.dist as f64, params))
                        as f32;
                }
            }
            Variant::Hard => {
                let bin = (g.d_src.round() as usize).min(depth - 1);
                let max = px.iter().copied().fold(f32::NEG_INFINITY, f32::max);
                px[bin] = max + 1.0;
            }
        }
    }
    Ok(out)
}
