//! Evaluation measures: average pixel error and n-pixel error rates over
//! valid ground-truth pixels.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::DisparityMap;

/// One evaluation result. `err_rate[n]` is the fraction of valid pixels whose
/// absolute error is not below n (error < n counts as correct), so rates are
/// non-increasing in n.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub avg_px: f64,
    pub err_rate: BTreeMap<u32, f64>,
    pub n_valid: usize,
}

pub fn evaluate(pred: &DisparityMap, gt: &DisparityMap, thresholds: &[u32]) -> Result<EvalReport> {
    if pred.width != gt.width || pred.height != gt.height {
        return Err(Error::DimensionMismatch(format!(
            "pred {}x{} vs gt {}x{}",
            pred.width, pred.height, gt.width, gt.height
        )));
    }
    let mut n_valid = 0usize;
    let mut abs_sum = 0f64;
    let mut wrong: BTreeMap<u32, usize> = thresholds.iter().map(|&n| (n, 0)).collect();
    for (i, (&p, &g)) in pred.data.iter().zip(gt.data.iter()).enumerate() {
        if !DisparityMap::is_valid(g) {
            continue;
        }
        if !DisparityMap::is_valid(p) {
            return Err(Error::InvalidArgument(format!(
                "prediction invalid at pixel {} where ground truth is valid",
                i
            )));
        }
        let err = (p as f64 - g as f64).abs();
        abs_sum += err;
        n_valid += 1;
        for (&n, count) in wrong.iter_mut() {
            if err >= n as f64 {
                *count += 1;
            }
        }
    }
    if n_valid == 0 {
        return Err(Error::InvalidArgument("ground truth has no valid pixels".into()));
    }
    Ok(EvalReport {
        avg_px: abs_sum / n_valid as f64,
        err_rate: wrong
            .into_iter()
            .map(|(n, c)| (n, c as f64 / n_valid as f64))
            .collect(),
        n_valid,
    })
}

impl EvalReport {
    /// Aligned human-readable table.
    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<10} {:>10}\n{:<10} {:>10.4}\n",
            "metric", "value", "avg_px", self.avg_px
        );
        for (n, rate) in &self.err_rate {
            s.push_str(&format!("{:<10} {:>10.4}\n", format!(">{n}px rate"), rate));
        }
        s.push_str(&format!("{:<10} {:>10}\n", "n_valid", self.n_valid));
        s
    }

    /// One CSV row matching header `avg_px,rate_2,rate_3,...,n_valid`.
    pub fn csv_row(&self) -> String {
        let mut fields = vec![format!("{}", self.avg_px)];
        fields.extend(self.err_rate.values().map(|r| format!("{r}")));
        fields.push(self.n_valid.to_string());
        fields.join(",")
    }

    pub fn csv_header(&self) -> String {
        let mut fields = vec!["avg_px".to_string()];
        fields.extend(self.err_rate.keys().map(|n| format!("rate_{n}")));
        fields.push("n_valid".to_string());
        fields.join(",")
    }
}

pub const DEFAULT_THRESHOLDS: [u32; 4] = [2, 3, 4, 5];

#[cfg(test)]
mod tests {
    use super::*;

    fn map_of(width: usize, values: &[f32]) -> DisparityMap {
        DisparityMap::from_values(width, values.len() / width, values.to_vec()).unwrap()
    }

    #[test]
    fn identical_maps_score_zero() {
        let gt = map_of(2, &[1.0, 2.0, 3.0, 4.0]);
        let rep = evaluate(&gt, &gt, &DEFAULT_THRESHOLDS).unwrap();
        assert_eq!(rep.avg_px, 0.0);
        assert!(rep.err_rate.values().all(|&r| r == 0.0));
        assert_eq!(rep.n_valid, 4);
    }

    #[test]
    fn hand_enumerated_errors() {
        // errors {0, 1, 2, 5} over 4 pixels
        let gt = map_of(4, &[10.0, 10.0, 10.0, 10.0]);
        let pred = map_of(4, &[10.0, 11.0, 12.0, 15.0]);
        let rep = evaluate(&pred, &gt, &DEFAULT_THRESHOLDS).unwrap();
        assert_eq!(rep.avg_px, 2.0);
        assert_eq!(rep.err_rate[&2], 0.5); // errors 2 and 5 are >= 2
        assert_eq!(rep.err_rate[&3], 0.25);
        assert_eq!(rep.err_rate[&5], 0.25);
    }

    #[test]
    fn exact_threshold_counts_as_wrong() {
        let gt = map_of(1, &[10.0]);
        let pred = map_of(1, &[13.0]);
        let rep = evaluate(&pred, &gt, &[3]).unwrap();
        assert_eq!(rep.err_rate[&3], 1.0);
    }

    #[test]
    fn only_valid_gt_pixels_count() {
        let inv = DisparityMap::INVALID;
        let gt = map_of(3, &[1.0, inv, inv, inv, 2.0, inv, inv, inv, 3.0]);
        let pred = map_of(3, &[2.0; 9]);
        let rep = evaluate(&pred, &gt, &DEFAULT_THRESHOLDS).unwrap();
        assert_eq!(rep.n_valid, 3);
        assert!((rep.avg_px - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_pred_at_valid_gt_is_error() {
        let gt = map_of(1, &[1.0]);
        let pred = map_of(1, &[DisparityMap::INVALID]);
        assert!(evaluate(&pred, &gt, &DEFAULT_THRESHOLDS).is_err());
    }

    #[test]
    fn no_valid_gt_is_error() {
        let gt = DisparityMap::invalid(2, 2);
        let pred = map_of(2, &[0.0; 4]);
        assert!(evaluate(&pred, &gt, &DEFAULT_THRESHOLDS).is_err());
    }

    #[test]
    fn rates_non_increasing_in_n() {
        let gt = map_of(4, &[0.0; 16]);
        let pred = map_of(4, &(0..16).map(|i| (i % 7) as f32).collect::<Vec<_>>());
        let rep = evaluate(&pred, &gt, &DEFAULT_THRESHOLDS).unwrap();
        let rates: Vec<f64> = rep.err_rate.values().copied().collect();
        assert!(rates.windows(2).all(|w| w[0] >= w[1]));
    }
}
