//! Synthetic rectified stereo pairs with exact ground truth, so every test
//! and benchmark runs without external datasets.
//!
//! Scenes are stacks of fronto-parallel textured quads in painter order
//! (later layers are nearer and occlude earlier ones). The right view is
//! resampled at the nearest pixel so integer-disparity ground truth is exact.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{DisparityMap, Image, ImagePair};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Texture {
    /// Per-pixel hash noise; the workhorse texture for matchable surfaces.
    Random,
    Stripes { period: usize },
    Flat { value: u8 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Layer {
    /// Left-view rectangle, half-open: x in [x0, x1), y in [y0, y1).
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
    /// Disparity at x0; constant when slope_x is 0.
    pub d: f32,
    /// Linear disparity variation per pixel of x. Default 0.
    #[serde(default)]
    pub slope_x: f32,
    pub texture: Texture,
}

impl Layer {
    #[inline]
    fn contains(&self, x: i64, y: i64) -> bool {
        x >= self.x0 as i64 && x < self.x1 as i64 && y >= self.y0 as i64 && y < self.y1 as i64
    }

    #[inline]
    fn disparity_at(&self, x: f32) -> f32 {
        self.d + self.slope_x * (x - self.x0 as f32)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub d_max: usize,
    /// Painter order: layers[0] is the farthest and must cover the frame.
    pub layers: Vec<Layer>,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct RenderOutput {
    pub pair: ImagePair,
    pub gt: DisparityMap,
    /// 255 where the left-view pixel is occluded in the right view.
    pub occlusion: Image,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidArgument("scene dimensions must be >= 1".into()));
        }
        if self.d_max < 1 {
            return Err(Error::InvalidArgument("d_max must be >= 1".into()));
        }
        if self.layers.is_empty() {
            return Err(Error::InvalidArgument("scene needs at least one layer".into()));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::InvalidArgument("noise_sigma must be >= 0".into()));
        }
        let bg = &self.layers[0];
        if bg.x0 != 0 || bg.y0 != 0 || bg.x1 < self.width || bg.y1 < self.height {
            return Err(Error::InvalidArgument(
                "background layer must cover the full frame".into(),
            ));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.x1 <= layer.x0 || layer.y1 <= layer.y0 {
                return Err(Error::InvalidArgument(format!("layer {i} rectangle is empty")));
            }
            let d_lo = layer.disparity_at(layer.x0 as f32);
            let d_hi = layer.disparity_at(layer.x1 as f32 - 1.0);
            for d in [d_lo, d_hi] {
                if !d.is_finite() || d < 0.0 || d >= self.d_max as f32 {
                    return Err(Error::InvalidArgument(format!(
                        "layer {i} disparity {d} out of [0, {})",
                        self.d_max
                    )));
                }
            }
        }
        Ok(())
    }
}

/// splitmix64; fixed integer hash so textures are identical on every platform.
#[inline]
fn hash64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn texture_sample(texture: &Texture, x: i64, y: i64, layer_idx: usize, seed: u64) -> u8 {
    match texture {
        Texture::Random => {
            // mid-range values only: extreme centers collapse census windows
            // into near-constant bit patterns and cause spurious ties
            let key = hash64(seed ^ hash64(layer_idx as u64) ^ ((x as u64) << 24) ^ (y as u64));
            (96 + key % 64) as u8
        }
        Texture::Stripes { period } => {
            let p = (*period).max(1) as i64;
            if (x.div_euclid(p)) % 2 == 0 {
                40
            } else {
                220
            }
        }
        Texture::Flat { value } => *value,
    }
}

pub fn render(spec: &SceneSpec) -> Result<RenderOutput> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);

    // topmost layer per left pixel
    let top_layer = |x: i64, y: i64| -> Option<usize> {
        (0..spec.layers.len()).rev().find(|&i| spec.layers[i].contains(x, y))
    };
    // winning (layer, left-x) per right pixel, front to back; the background
    // layer is treated as extending d_max to the right so the view is hole-free
    let right_source = |xr: i64, y: i64| -> (usize, i64) {
        for i in (0..spec.layers.len()).rev() {
            let layer = &spec.layers[i];
            // solve xl - d(xl) = xr for the (possibly sloped) layer
            let xl = if layer.slope_x == 0.0 {
                xr as f32 + layer.d
            } else {
                (xr as f32 + layer.d - layer.slope_x * layer.x0 as f32) / (1.0 - layer.slope_x)
            };
            let xl = xl.round() as i64;
            let covered = if i == 0 {
                layer.contains(xl.min(layer.x1 as i64 - 1), y)
                    && xl < layer.x1 as i64 + spec.d_max as i64
            } else {
                layer.contains(xl, y)
            };
            if covered && top_layer(xl, y).map_or(i == 0, |t| t == i) {
                return (i, xl);
            }
        }
        (0, xr + spec.layers[0].d.round() as i64)
    };

    let mut left = vec![0u8; w * h];
    let mut right = vec![0u8; w * h];
    let mut gt = vec![0f32; w * h];
    let mut occ = vec![0u8; w * h];

    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let i = top_layer(x, y).expect("background covers the frame");
            let layer = &spec.layers[i];
            left[y as usize * w + x as usize] = texture_sample(&layer.texture, x, y, i, spec.seed);
            let d = layer.disparity_at(x as f32);
            gt[y as usize * w + x as usize] = d;

            let xr = x - d.round() as i64;
            let visible = xr >= 0 && {
                let (src_layer, src_xl) = right_source(xr, y);
                src_layer == i && src_xl == x
            };
            if !visible {
                occ[y as usize * w + x as usize] = 255;
            }
        }
        for xr in 0..w as i64 {
            let (i, xl) = right_source(xr, y);
            right[y as usize * w + xr as usize] =
                texture_sample(&spec.layers[i].texture, xl, y, i, spec.seed);
        }
    }

    if spec.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut apply = |buf: &mut [u8]| {
            for v in buf.iter_mut() {
                let n = gaussian(&mut rng) * spec.noise_sigma;
                *v = (*v as f64 + n).round().clamp(0.0, 255.0) as u8;
            }
        };
        apply(&mut left);
        apply(&mut right);
    }

    Ok(RenderOutput {
        pair: ImagePair::new(
            Image::new(w, h, 1, left)?,
            Image::new(w, h, 1, right)?,
        )?,
        gt: DisparityMap::from_values(w, h, gt)?,
        occlusion: Image::new(w, h, 1, occ)?,
    })
}

/// Box-Muller standard normal from the fixed PRNG.
fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Convenience builder for the two-layer scene used throughout the test
/// battery: random-texture background plus a nearer random-texture quad.
pub fn two_layer_scene(
    width: usize,
    height: usize,
    d_max: usize,
    d_back: f32,
    d_front: f32,
    noise_sigma: f64,
    seed: u64,
) -> SceneSpec {
    SceneSpec {
        width,
        height,
        d_max,
        layers: vec![
            Layer {
                x0: 0,
                y0: 0,
                x1: width,
                y1: height,
                d: d_back,
                slope_x: 0.0,
                texture: Texture::Random,
            },
            Layer {
                x0: width / 4,
                y0: height / 4,
                x1: width * 3 / 4,
                y1: height * 3 / 4,
                d: d_front,
                slope_x: 0.0,
                texture: Texture::Random,
            },
        ],
        noise_sigma,
        seed,
    }
}
