// Randomized invariants, complementing the fixed-seed acceptance checks.

use std::collections::HashSet;

use proptest::prelude::*;

use guided_stereo::costvol::{to_score, wta, CostVolume, Orientation};
use guided_stereo::enhancement::{gauss_g, weight_f, weight_fs, EnhanceParams, Variant};
use guided_stereo::expansion::{cross_region, expand, ExpansionParams};
use guided_stereo::imgio::cues_from_disparity;
use guided_stereo::metrics::evaluate;
use guided_stereo::pipeline::RunConfig;
use guided_stereo::types::{Cue, DisparityMap, Image, SparseCueSet};

fn arb_image(side: usize) -> impl Strategy<Value = Image> {
    prop::collection::vec(any::<u8>(), side * side)
        .prop_map(move |data| Image::new(side, side, 1, data).unwrap())
}

fn params(tau: u8, arm_limit: usize) -> ExpansionParams {
    ExpansionParams { tau, arm_limit, ..ExpansionParams::default() }
}

proptest! {
    #[test]
    fn region_grows_with_tau(
        image in arb_image(16),
        cue in (0usize..16, 0usize..16),
        tau_lo in 0u8..128,
        extra in 0u8..127,
        l in 0usize..8,
    ) {
        let small: HashSet<_> =
            cross_region(&image, cue, &params(tau_lo, l)).unwrap().into_iter().collect();
        let big: HashSet<_> =
            cross_region(&image, cue, &params(tau_lo.saturating_add(extra), l)).unwrap().into_iter().collect();
        prop_assert!(small.is_subset(&big));
    }

    #[test]
    fn region_grows_with_arm_limit(
        image in arb_image(16),
        cue in (0usize..16, 0usize..16),
        tau in 0u8..64,
        l_lo in 0usize..8,
        extra in 0usize..8,
    ) {
        let small: HashSet<_> =
            cross_region(&image, cue, &params(tau, l_lo)).unwrap().into_iter().collect();
        let big: HashSet<_> =
            cross_region(&image, cue, &params(tau, l_lo + extra)).unwrap().into_iter().collect();
        prop_assert!(small.is_subset(&big));
    }

    #[test]
    fn region_stays_within_arm_limit_box(
        image in arb_image(16),
        cue in (0usize..16, 0usize..16),
        tau in 0u8..=255,
        l in 0usize..10,
    ) {
        for (x, y) in cross_region(&image, cue, &params(tau, l)).unwrap() {
            prop_assert!(x.abs_diff(cue.0) <= l && y.abs_diff(cue.1) <= l);
        }
    }

    #[test]
    fn expansion_is_cue_order_independent_on_disjoint_regions(
        image in arb_image(16),
        d0 in 0.0f32..32.0,
        d1 in 0.0f32..32.0,
    ) {
        // far corners with L=2 cannot interact
        let a = Cue { x: 2, y: 2, d: d0 };
        let b = Cue { x: 13, y: 13, d: d1 };
        let fwd = SparseCueSet::new(vec![a, b], 16, 16, 32).unwrap();
        let rev = SparseCueSet::new(vec![b, a], 16, 16, 32).unwrap();
        let p = params(8, 2);
        let f1 = expand(&image, &fwd, &p).unwrap();
        let f2 = expand(&image, &rev, &p).unwrap();
        for (c1, c2) in f1.cells.iter().zip(f2.cells.iter()) {
            prop_assert_eq!(c1.map(|g| (g.d_src, g.dist)), c2.map(|g| (g.d_src, g.dist)));
        }
    }

    #[test]
    fn weights_are_positive_and_peak_at_the_cue(
        d in 0.0f64..64.0,
        d_i in 0.0f64..64.0,
        dist in 0.0f64..60.0,
        h in 0.1f64..200.0,
        w in 0.1f64..4.0,
        v in 0.1f64..40.0,
        b in 0.01f64..2.0,
    ) {
        let p = EnhanceParams { variant: Variant::Fs, h, w, v, b };
        // positive up to f64 underflow
        let g = gauss_g(d, d_i, h, w);
        prop_assert!(g.is_finite() && g >= 0.0);
        let f = weight_f(d, d_i, dist, &p);
        prop_assert!(f.is_finite() && f >= 0.0);
        prop_assert!(weight_fs(d, d_i, dist, &p) >= b);
        prop_assert!(g <= gauss_g(d_i, d_i, h, w));
        prop_assert!(weight_fs(d, d_i, dist, &p) <= weight_fs(d_i, d_i, 0.0, &p));
    }

    #[test]
    fn error_rates_never_grow_with_threshold(
        values in prop::collection::vec((0.0f32..64.0, 0.0f32..64.0), 1..128),
    ) {
        let n = values.len();
        let gt = DisparityMap::from_values(n, 1, values.iter().map(|v| v.0).collect()).unwrap();
        let pred = DisparityMap::from_values(n, 1, values.iter().map(|v| v.1).collect()).unwrap();
        let report = evaluate(&pred, &gt, &[1, 2, 3, 5, 8, 13]).unwrap();
        let rates: Vec<f64> = report.err_rate.values().copied().collect();
        prop_assert!(rates.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(rates.iter().all(|r| (0.0..=1.0).contains(r)));
    }

    #[test]
    fn best_disparity_survives_orientation_flip(
        costs in prop::collection::vec(0.0f32..100.0, 5 * 4 * 6),
    ) {
        let mut vol = CostVolume::filled(5, 4, 6, Orientation::Cost, 0.0);
        vol.data = costs.iter().map(|v| v.floor()).collect();
        let direct = wta(&vol);
        let flipped = wta(&to_score(&vol).unwrap());
        prop_assert_eq!(direct.data, flipped.data);
    }

    #[test]
    fn cue_sampling_returns_valid_subset(
        values in prop::collection::vec(prop::option::weighted(0.8, 0.0f32..48.0), 64),
        rate in 0.05f64..1.0,
        seed in any::<u64>(),
    ) {
        let data: Vec<f32> = values
            .iter()
            .map(|v| v.unwrap_or(DisparityMap::INVALID))
            .collect();
        let map = DisparityMap { width: 8, height: 8, data };
        prop_assume!(map.valid_count() > 0);
        let cues = cues_from_disparity(&map, rate, seed).unwrap();
        let want = ((map.valid_count() as f64) * rate).round() as usize;
        prop_assert_eq!(cues.cues.len(), want.min(map.valid_count()));
        let mut seen = HashSet::new();
        for cue in &cues.cues {
            prop_assert!(seen.insert((cue.x, cue.y)));
            prop_assert_eq!(cue.d.to_bits(), map.get(cue.x, cue.y).to_bits());
        }
    }

    #[test]
    fn config_survives_a_text_round_trip(
        window in prop::sample::select(vec![3usize, 5, 7, 9]),
        d_max in 1usize..128,
        seed in 0u64..=i64::MAX as u64,
        subpixel in any::<bool>(),
        tau in any::<u8>(),
        arm_limit in 0usize..200,
    ) {
        let mut config = RunConfig { window, d_max, seed, subpixel, ..RunConfig::default() };
        config.expansion.tau = tau;
        config.expansion.arm_limit = arm_limit;
        let back = RunConfig::from_toml(&config.to_toml()).unwrap();
        prop_assert_eq!(back.to_toml(), config.to_toml());
    }
}
