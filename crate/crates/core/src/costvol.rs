//! Matching cost volume construction, semi-global aggregation, and disparity
//! extraction. This is the classical backbone the guidance enhancement
//! attaches to.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::types::{DisparityMap, ImagePair};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Lower is better.
    Cost,
    /// Higher is better.
    Score,
}

impl Orientation {
    fn name(self) -> &'static str {
        match self {
            Orientation::Cost => "COST",
            Orientation::Score => "SCORE",
        }
    }
}

/// H x W x D tensor of matching costs or scores, row-major, disparity
/// innermost. All values are finite and nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct CostVolume {
    pub width: usize,
    pub height: usize,
    pub depth: usize,
    pub orientation: Orientation,
    pub data: Vec<f32>,
}

impl CostVolume {
    pub fn filled(
        width: usize,
        height: usize,
        depth: usize,
        orientation: Orientation,
        value: f32,
    ) -> Self {
        CostVolume {
            width,
            height,
            depth,
            orientation,
            data: vec![value; width * height * depth],
        }
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize, d: usize) -> usize {
        (y * self.width + x) * self.depth + d
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, d: usize) -> f32 {
        self.data[self.idx(x, y, d)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, d: usize, v: f32) {
        let i = self.idx(x, y, d);
        self.data[i] = v;
    }

    pub fn require(&self, orientation: Orientation) -> Result<()> {
        if self.orientation != orientation {
            return Err(Error::OrientationMismatch {
                expected: orientation.name(),
                actual: self.orientation.name(),
            });
        }
        Ok(())
    }
}

fn check_window(pair: &ImagePair, d_max: usize, window: usize) -> Result<()> {
    if d_max < 1 {
        return Err(Error::InvalidArgument("d_max must be >= 1".into()));
    }
    if window % 2 == 0 {
        return Err(Error::InvalidArgument(format!("window {window} must be odd")));
    }
    if window > pair.width().min(pair.height()) {
        return Err(Error::InvalidArgument(format!(
            "window {window} exceeds image extent {}x{}",
            pair.width(),
            pair.height()
        )));
    }
    Ok(())
}

fn grayscale(img: &crate::types::Image) -> Vec<u8> {
    let mut out = vec![0u8; img.width * img.height];
    for y in 0..img.height {
        for x in 0..img.width {
            out[y * img.width + x] = img.luma(x, y);
        }
    }
    out
}

/// Census bit-strings per pixel, packed into u64 words. Pixels whose window
/// leaves the image get no bits set; callers must consult the fits-range
/// themselves.
fn census_transform(gray: &[u8], width: usize, height: usize, window: usize) -> Vec<u64> {
    let half = window / 2;
    let bits = window * window - 1;
    let words = bits.div_ceil(64);
    let mut out = vec![0u64; width * height * words];
    out.par_chunks_mut(width * words)
        .enumerate()
        .for_each(|(y, row)| {
            if y < half || y >= height - half {
                return;
            }
            for x in half..width - half {
                let center = gray[y * width + x];
                let mut bit = 0usize;
                for dy in 0..window {
                    for dx in 0..window {
                        if dy == half && dx == half {
                            continue;
                        }
                        let ny = y + dy - half;
                        let nx = x + dx - half;
                        if gray[ny * width + nx] < center {
                            row[x * words + bit / 64] |= 1u64 << (bit % 64);
                        }
                        bit += 1;
                    }
                }
            }
        });
    out
}

/// Census-transform matching cost. Cost at (y, x, d) is the Hamming distance
/// between the left census window at (x, y) and the right window at (x-d, y);
/// wherever the disparity or the window support leaves the image the cost is
/// the maximum window*window - 1, keeping the volume finite and rectangular.
pub fn census_cost(pair: &ImagePair, d_max: usize, window: usize) -> Result<CostVolume> {
    check_window(pair, d_max, window)?;
    let (w, h) = (pair.width(), pair.height());
    let half = window / 2;
    let bits = window * window - 1;
    let words = bits.div_ceil(64);
    let max_cost = bits as f32;

    let left_gray = grayscale(&pair.left);
    let right_gray = grayscale(&pair.right);
    let left_census = census_transform(&left_gray, w, h, window);
    let right_census = census_transform(&right_gray, w, h, window);

    let mut vol = CostVolume::filled(w, h, d_max, Orientation::Cost, max_cost);
    vol.data
        .par_chunks_mut(w * d_max)
        .enumerate()
        .for_each(|(y, row)| {
            if y < half || y >= h - half {
                return;
            }
            for x in half..w - half {
                let lc = &left_census[(y * w + x) * words..(y * w + x) * words + words];
                for d in 0..d_max {
                    if x < d || x - d < half {
                        break; // larger d only moves further out of range
                    }
                    let rx = x - d;
                    let rc = &right_census[(y * w + rx) * words..(y * w + rx) * words + words];
                    let mut ham = 0u32;
                    for k in 0..words {
                        ham += (lc[k] ^ rc[k]).count_ones();
                    }
                    row[x * d_max + d] = ham as f32;
                }
            }
        });
    Ok(vol)
}

/// Sum-of-absolute-differences cost, averaged over channels, summed over the
/// window. Out-of-range support gets the maximum cost 255 * window^2.
pub fn sad_cost(pair: &ImagePair, d_max: usize, window: usize) -> Result<CostVolume> {
    check_window(pair, d_max, window)?;
    let (w, h) = (pair.width(), pair.height());
    let half = window / 2;
    let max_cost = 255.0 * (window * window) as f32;
    let left = &pair.left;
    let right = &pair.right;
    let channels = left.channels;

    let mut vol = CostVolume::filled(w, h, d_max, Orientation::Cost, max_cost);
    vol.data
        .par_chunks_mut(w * d_max)
        .enumerate()
        .for_each(|(y, row)| {
            if y < half || y >= h - half {
                return;
            }
            for x in half..w - half {
                for d in 0..d_max {
                    if x < d || x - d < half {
                        break;
                    }
                    let rx = x - d;
                    let mut sum = 0.0f32;
                    for dy in 0..window {
                        let ny = y + dy - half;
                        for dx in 0..window {
                            let lx = x + dx - half;
                            let rxx = rx + dx - half;
                            let mut px = 0.0f32;
                            for c in 0..channels {
                                px += left.sample(lx, ny, c).abs_diff(right.sample(rxx, ny, c))
                                    as f32;
                            }
                            sum += px / channels as f32;
                        }
                    }
                    row[x * d_max + d] = sum;
                }
            }
        });
    Ok(vol)
}

const PATH_DIRS_8: [(i64, i64); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (-1, -1),
    (1, -1),
    (-1, 1),
];

/// Semi-global aggregation: the scanline recurrence with penalty `p1` for
/// |Δd| = 1 and `p2` for larger jumps, per-path minimum subtracted, summed
/// over 4 or 8 path directions. Path sums are accumulated in a fixed order so
/// results do not depend on thread count.
pub fn sgm_aggregate(vol: &CostVolume, p1: f32, p2: f32, paths: usize) -> Result<CostVolume> {
    vol.require(Orientation::Cost)?;
    if !(p1 >= 0.0 && p1 <= p2) {
        return Err(Error::InvalidArgument(format!(
            "penalties must satisfy 0 <= p1 <= p2, got p1={p1} p2={p2}"
        )));
    }
    if paths != 1 && paths != 4 && paths != 8 {
        return Err(Error::InvalidArgument(format!("paths must be 4 or 8, got {paths}")));
    }
    let (w, h, depth) = (vol.width, vol.height, vol.depth);
    let mut out = CostVolume::filled(w, h, depth, Orientation::Cost, 0.0);
    let mut path_buf = vec![0f32; w * h * depth];

    for &(dx, dy) in PATH_DIRS_8.iter().take(paths) {
        aggregate_path(vol, dx, dy, p1, p2, &mut path_buf);
        for (acc, v) in out.data.iter_mut().zip(path_buf.iter()) {
            *acc += *v;
        }
    }
    Ok(out)
}

fn aggregate_path(vol: &CostVolume, dx: i64, dy: i64, p1: f32, p2: f32, out: &mut [f32]) {
    let (w, h, depth) = (vol.width, vol.height, vol.depth);
    let mut prev = vec![0f32; depth];
    // start pixels: those whose predecessor along (dx, dy) is out of bounds
    for sy in 0..h as i64 {
        for sx in 0..w as i64 {
            if vol.left_neighbor_in_bounds(sx, sy, dx, dy) {
                continue;
            }
            let (mut x, mut y) = (sx, sy);
            let mut first = true;
            while x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h {
                let base = ((y as usize) * w + x as usize) * depth;
                if first {
                    out[base..base + depth].copy_from_slice(&vol.data[base..base + depth]);
                    first = false;
                } else {
                    let prev_min = prev.iter().copied().fold(f32::INFINITY, f32::min);
                    for d in 0..depth {
                        let mut best = prev[d];
                        if d > 0 {
                            best = best.min(prev[d - 1] + p1);
                        }
                        if d + 1 < depth {
                            best = best.min(prev[d + 1] + p1);
                        }
                        best = best.min(prev_min + p2);
                        out[base + d] = vol.data[base + d] + best - prev_min;
                    }
                }
                prev.copy_from_slice(&out[base..base + depth]);
                x += dx;
                y += dy;
            }
        }
    }
}

impl CostVolume {
    fn left_neighbor_in_bounds(&self, x: i64, y: i64, dx: i64, dy: i64) -> bool {
        let (px, py) = (x - dx, y - dy);
        px >= 0 && py >= 0 && (px as usize) < self.width && (py as usize) < self.height
    }
}

/// Re-orients a COST volume into a SCORE volume: per pixel,
/// score(d) = max_d' cost(d') - cost(d). Argmax of the result equals argmin
/// of the input at every pixel.
pub fn to_score(vol: &CostVolume) -> Result<CostVolume> {
    vol.require(Orientation::Cost)?;
    Ok(flip_orientation(vol, Orientation::Score))
}

/// Shared max-minus re-orientation; used by `to_score` and by the pipeline to
/// hand an enhanced SCORE volume back to COST consumers.
pub(crate) fn flip_orientation(vol: &CostVolume, target: Orientation) -> CostVolume {
    let mut out = vol.clone();
    out.orientation = target;
    for px in out.data.chunks_mut(vol.depth) {
        let m = px.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        for v in px.iter_mut() {
            *v = m - *v;
        }
    }
    out
}

/// Winner-take-all extraction: per-pixel argmin (COST) or argmax (SCORE),
/// ties broken toward the smallest d. Output is valid at every pixel.
pub fn wta(vol: &CostVolume) -> DisparityMap {
    let mut map = DisparityMap::invalid(vol.width, vol.height);
    for (i, px) in vol.data.chunks(vol.depth).enumerate() {
        let mut best_d = 0usize;
        let mut best_v = px[0];
        for (d, &v) in px.iter().enumerate().skip(1) {
            let better = match vol.orientation {
                Orientation::Cost => v < best_v,
                Orientation::Score => v > best_v,
            };
            if better {
                best_d = d;
                best_v = v;
            }
        }
        map.data[i] = best_d as f32;
    }
    map
}

/// Parabolic sub-pixel interpolation around the WTA minimum. Boundary bins
/// and degenerate parabolas are left unchanged; the offset is confined to
/// (-0.5, 0.5).
pub fn subpixel_refine(vol: &CostVolume, map: &DisparityMap) -> Result<DisparityMap> {
    vol.require(Orientation::Cost)?;
    if map.width != vol.width || map.height != vol.height {
        return Err(Error::DimensionMismatch(format!(
            "map {}x{} vs volume {}x{}",
            map.width, map.height, vol.width, vol.height
        )));
    }
    let mut out = map.clone();
    for y in 0..vol.height {
        for x in 0..vol.width {
            let d = map.get(x, y);
            if !DisparityMap::is_valid(d) {
                continue;
            }
            let d = d.round() as usize;
            if d == 0 || d + 1 >= vol.depth {
                continue;
            }
            let cm = vol.get(x, y, d - 1);
            let c0 = vol.get(x, y, d);
            let cp = vol.get(x, y, d + 1);
            let denom = cm - 2.0 * c0 + cp;
            if denom > 0.0 {
                let offset = ((cm - cp) / (2.0 * denom)).clamp(-0.499_999, 0.499_999);
                out.set(x, y, d as f32 + offset);
            }
        }
    }
    Ok(out)
}
