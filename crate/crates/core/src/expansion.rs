//! Sparsity expansion: grow each sparse cue into an effective area of
//! similar-intensity neighbors (cross-based greedy arm search) and merge the
//! per-cue regions into a dense guidance field.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Image, SparseCueSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionShape {
    Cross,
    Square,
}

/// Anchor for the horizontal-arm intensity comparison. The vertical search
/// always compares against the cue pixel; the horizontal searches can anchor
/// either on their own vertical-arm pixel (default, locally coherent) or on
/// the original center.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HorizontalAnchor {
    ArmPixel,
    Center,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ExpansionParams {
    /// Intensity difference threshold tau.
    pub tau: u8,
    /// Arm length limit L in pixels beyond the anchor.
    pub arm_limit: usize,
    pub shape: RegionShape,
    pub anchor: HorizontalAnchor,
}

impl Default for ExpansionParams {
    fn default() -> Self {
        ExpansionParams {
            tau: 15,
            arm_limit: 30,
            shape: RegionShape::Cross,
            anchor: HorizontalAnchor::ArmPixel,
        }
    }
}

/// Per-pixel result of expansion: the governing cue's disparity, the
/// Euclidean distance to that cue, and the cue index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Guidance {
    pub d_src: f32,
    pub dist: f32,
    pub src: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuidanceField {
    pub width: usize,
    pub height: usize,
    pub cells: Vec<Option<Guidance>>,
}

impl GuidanceField {
    pub fn empty(width: usize, height: usize) -> Self {
        GuidanceField {
            width,
            height,
            cells: vec![None; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<Guidance> {
        self.cells[y * self.width + x]
    }

    pub fn occupancy(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }
}

fn check_cue_in_image(image: &Image, cue: (usize, usize)) -> Result<()> {
    if cue.0 >= image.width || cue.1 >= image.height {
        return Err(Error::InvalidArgument(format!(
            "cue ({}, {}) outside {}x{} image",
            cue.0, cue.1, image.width, image.height
        )));
    }
    Ok(())
}

/// Greedy cross search: extend vertically from the cue while the intensity
/// difference to the cue stays within tau and the arm is at most L long,
/// then extend horizontally from every vertical-arm pixel under the same
/// rule. Intensity difference for RGB is the per-channel maximum.
pub fn cross_region(
    image: &Image,
    cue: (usize, usize),
    params: &ExpansionParams,
) -> Result<Vec<(usize, usize)>> {
    check_cue_in_image(image, cue)?;
    let (cx, cy) = cue;
    let mut region = Vec::new();

    let mut vertical = vec![(cx, cy)];
    for dir in [-1i64, 1i64] {
        for step in 1..=params.arm_limit as i64 {
            let y = cy as i64 + dir * step;
            if !image.in_bounds(cx as i64, y) {
                break;
            }
            if image.max_abs_diff(cx, y as usize, cx, cy) > params.tau {
                break;
            }
            vertical.push((cx, y as usize));
        }
    }

    for &(vx, vy) in &vertical {
        region.push((vx, vy));
        let (ax, ay) = match params.anchor {
            HorizontalAnchor::ArmPixel => (vx, vy),
            HorizontalAnchor::Center => (cx, cy),
        };
        for dir in [-1i64, 1i64] {
            for step in 1..=params.arm_limit as i64 {
                let x = vx as i64 + dir * step;
                if !image.in_bounds(x, vy as i64) {
                    break;
                }
                if image.max_abs_diff(x as usize, vy, ax, ay) > params.tau {
                    break;
                }
                region.push((x as usize, vy));
            }
        }
    }
    Ok(region)
}

/// Baseline square region: all in-bounds pixels with Chebyshev distance at
/// most floor(L/2) from the cue.
pub fn square_region(
    image: &Image,
    cue: (usize, usize),
    params: &ExpansionParams,
) -> Result<Vec<(usize, usize)>> {
    check_cue_in_image(image, cue)?;
    let radius = (params.arm_limit / 2) as i64;
    let (cx, cy) = (cue.0 as i64, cue.1 as i64);
    let mut region = Vec::new();
    for y in cy - radius..=cy + radius {
        for x in cx - radius..=cx + radius {
            if image.in_bounds(x, y) {
                region.push((x as usize, y as usize));
            }
        }
    }
    Ok(region)
}

pub fn region(
    image: &Image,
    cue: (usize, usize),
    params: &ExpansionParams,
) -> Result<Vec<(usize, usize)>> {
    match params.shape {
        RegionShape::Cross => cross_region(image, cue, params),
        RegionShape::Square => square_region(image, cue, params),
    }
}

/// Expands every cue and merges the regions. At pixels claimed by several
/// cues the one at the smallest Euclidean distance wins; exact ties go to
/// the smallest cue index, so the output does not depend on processing
/// order or thread count.
pub fn expand(
    image: &Image,
    cues: &SparseCueSet,
    params: &ExpansionParams,
) -> Result<GuidanceField> {
    let regions: Vec<Vec<(usize, usize)>> = cues
        .cues
        .par_iter()
        .map(|cue| region(image, (cue.x, cue.y), params))
        .collect::<Result<_>>()?;

    let mut field = GuidanceField::empty(image.width, image.height);
    // squared integer distance per claimed pixel, for exact tie handling
    let mut best_d2 = vec![u64::MAX; image.width * image.height];
    for (idx, (cue, region)) in cues.cues.iter().zip(regions.iter()).enumerate() {
        for &(x, y) in region {
            let dx = x as i64 - cue.x as i64;
            let dy = y as i64 - cue.y as i64;
            let d2 = (dx * dx + dy * dy) as u64;
            let slot = y * image.width + x;
            if d2 < best_d2[slot] {
                best_d2[slot] = d2;
                field.cells[slot] = Some(Guidance {
                    d_src: cue.d,
                    dist: (d2 as f64).sqrt() as f32,
                    src: idx as u32,
                });
            }
        }
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Cue;

    fn params(tau: u8, arm_limit: usize) -> ExpansionParams {
        ExpansionParams {
            tau,
            arm_limit,
            ..ExpansionParams::default()
        }
    }

    fn sorted(mut v: Vec<(usize, usize)>) -> Vec<(usize, usize)> {
        v.sort_unstable();
        v.dedup();
        v
    }

    #[test]
    fn constant_image_full_cross_block() {
        let img = Image::filled(9, 9, 1, 50);
        let region = cross_region(&img, (4, 4), &params(0, 2)).unwrap();
        let region = sorted(region);
        assert_eq!(region.len(), 25);
        for y in 2..=6 {
            for x in 2..=6 {
                assert!(region.contains(&(x, y)));
            }
        }
    }

    #[test]
    fn zero_limit_is_center_only() {
        let img = Image::filled(5, 5, 1, 0);
        assert_eq!(cross_region(&img, (2, 2), &params(0, 0)).unwrap(), vec![(2, 2)]);
        assert_eq!(square_region(&img, (2, 2), &params(0, 0)).unwrap(), vec![(2, 2)]);
    }

    #[test]
    fn downward_arm_stops_at_intensity_edge() {
        // center value 5, chain below runs 6 then 10: |5 - 10| > 3 stops the arm
        let mut img = Image::filled(5, 7, 1, 5);
        img.data[3 * 5 + 2] = 6; // (2, 3)
        img.data[4 * 5 + 2] = 10; // (2, 4)
        let region = sorted(cross_region(&img, (2, 2), &params(3, 2)).unwrap());
        assert!(region.contains(&(2, 3)));
        assert!(!region.contains(&(2, 4)));
        // upward arm is unobstructed and reaches the limit
        assert!(region.contains(&(2, 0)));
    }

    #[test]
    fn rgb_difference_is_channel_max() {
        let mut img = Image::filled(3, 1, 3, 100);
        // neighbor differs by 10 in the blue channel only
        img.data[2 * 3 + 2] = 110;
        let small = cross_region(&img, (1, 0), &params(9, 1)).unwrap();
        assert!(!sorted(small).contains(&(2, 0)));
        let large = cross_region(&img, (1, 0), &params(10, 1)).unwrap();
        assert!(sorted(large).contains(&(2, 0)));
    }

    #[test]
    fn square_region_interior_and_corner() {
        let img = Image::filled(8, 8, 1, 0);
        let interior = square_region(&img, (4, 4), &params(0, 2)).unwrap();
        assert_eq!(interior.len(), 9);
        let corner = square_region(&img, (0, 0), &params(0, 4)).unwrap();
        assert_eq!(corner.len(), 9); // clipped quadrant of a 5x5
    }

    #[test]
    fn single_cue_field_matches_region() {
        let img = Image::filled(7, 7, 1, 0);
        let cues = SparseCueSet::new(vec![Cue { x: 3, y: 3, d: 2.0 }], 7, 7, 16).unwrap();
        let p = params(0, 1);
        let field = expand(&img, &cues, &p).unwrap();
        let region = sorted(cross_region(&img, (3, 3), &p).unwrap());
        assert_eq!(field.occupancy(), region.len());
        for &(x, y) in &region {
            let g = field.get(x, y).unwrap();
            assert_eq!(g.d_src, 2.0);
            let expected =
                (((x as f64 - 3.0).powi(2) + (y as f64 - 3.0).powi(2)) as f64).sqrt() as f32;
            assert_eq!(g.dist, expected);
        }
        assert_eq!(field.get(3, 3).unwrap().dist, 0.0);
    }

    #[test]
    fn overlap_nearest_cue_wins_with_index_tie_break() {
        let img = Image::filled(8, 1, 1, 0);
        let cues = SparseCueSet::new(
            vec![Cue { x: 0, y: 0, d: 5.0 }, Cue { x: 4, y: 0, d: 9.0 }],
            8,
            1,
            16,
        )
        .unwrap();
        let field = expand(&img, &cues, &params(0, 4)).unwrap();
        assert_eq!(field.get(1, 0).unwrap().d_src, 5.0); // dist 1 vs 3
        assert_eq!(field.get(3, 0).unwrap().d_src, 9.0); // dist 3 vs 1
        let tied = field.get(2, 0).unwrap();
        assert_eq!(tied.d_src, 5.0); // dist 2 both ways, index 0 wins
        assert_eq!(tied.src, 0);
    }

    #[test]
    fn disjoint_regions_merge_without_interaction() {
        let img = Image::filled(20, 5, 1, 0);
        let lone = SparseCueSet::new(vec![Cue { x: 2, y: 2, d: 1.0 }], 20, 5, 8).unwrap();
        let both = SparseCueSet::new(
            vec![Cue { x: 2, y: 2, d: 1.0 }, Cue { x: 17, y: 2, d: 4.0 }],
            20,
            5,
            8,
        )
        .unwrap();
        let p = params(0, 2);
        let f1 = expand(&img, &lone, &p).unwrap();
        let f2 = expand(&img, &both, &p).unwrap();
        for x in 0..10 {
            for y in 0..5 {
                assert_eq!(f1.get(x, y), f2.get(x, y));
            }
        }
    }

    #[test]
    fn monotone_in_tau_and_limit() {
        let mut img = Image::filled(11, 11, 1, 0);
        for (i, v) in img.data.iter_mut().enumerate() {
            *v = ((i * 37) % 40) as u8;
        }
        let base = sorted(cross_region(&img, (5, 5), &params(5, 3)).unwrap());
        let more_tau = sorted(cross_region(&img, (5, 5), &params(12, 3)).unwrap());
        let more_l = sorted(cross_region(&img, (5, 5), &params(5, 5)).unwrap());
        assert!(base.iter().all(|p| more_tau.contains(p)));
        assert!(base.iter().all(|p| more_l.contains(p)));
    }

    #[test]
    fn cue_outside_image_is_error() {
        let img = Image::filled(4, 4, 1, 0);
        assert!(cross_region(&img, (4, 0), &params(0, 1)).is_err());
    }
}
