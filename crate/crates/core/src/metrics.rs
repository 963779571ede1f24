//! Success, normalized precision and generalized success robustness.
//!
//! The scalar summaries are exact areas under the continuous curves:
//! the success AUC over `[0, 1]` with the strict `iou > t` rule is the mean
//! overlap, and the normalized precision AUC over `[0, 0.5]` (divided by
//! 0.5) is the mean of `1 - min(d, 0.5) / 0.5`. The sampled curves are kept
//! for plotting. Robustness is averaged over its 51 sampled thresholds.

use serde::{Deserialize, Serialize};

use crate::dataset::Sequence;
use crate::error::{Error, Result};
use crate::geometry::{iou, norm_center_distance};
use crate::protocols::TrackRun;

pub const SUCCESS_POINTS: usize = 101;
pub const PRECISION_POINTS: usize = 51;
pub const ROBUSTNESS_POINTS: usize = 51;
/// Upper end of both the normalized-distance and the collapse-threshold range.
pub const HALF_RANGE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub thresholds: Vec<f64>,
    pub values: Vec<f64>,
}

impl Curve {
    fn sampled(thresholds: Vec<f64>, f: impl Fn(f64) -> f64) -> Self {
        let values = thresholds.iter().map(|&t| f(t)).collect();
        Self { thresholds, values }
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// `threshold,value` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,value\n");
        for (t, v) in self.thresholds.iter().zip(&self.values) {
            out.push_str(&format!("{t},{v}\n"));
        }
        out
    }
}

/// `k / 100` for `k` in `0..points`, computed exactly as `k as f64 / 100.0`.
pub fn percent_grid(points: usize) -> Vec<f64> {
    (0..points).map(|k| k as f64 / 100.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub ss: f64,
    pub nps: f64,
    pub gsr: f64,
}

impl Scores {
    pub const PERFECT: Scores = Scores {
        ss: 1.0,
        nps: 1.0,
        gsr: 1.0,
    };

    pub fn mean(&self) -> f64 {
        (self.ss + self.nps + self.gsr) / 3.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curves {
    pub success: Curve,
    pub precision: Curve,
    pub robustness: Curve,
}

/// Scores and curves for one comparison of predictions against ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub scores: Scores,
    pub curves: Curves,
    /// Number of frames that entered the comparison.
    pub frames: usize,
}

fn check_overlaps(series: &[f64]) -> Result<()> {
    if series.is_empty() {
        return Err(Error::EmptyInput("overlap series"));
    }
    if let Some(v) = series.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Invalid(format!("overlap {v} outside [0,1]")));
    }
    Ok(())
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Success curve (fraction of frames with `iou > t`) and success score.
pub fn success(series: &[f64]) -> Result<(Curve, f64)> {
    check_overlaps(series)?;
    let n = series.len() as f64;
    let curve = Curve::sampled(percent_grid(SUCCESS_POINTS), |t| {
        series.iter().filter(|&&v| v > t).count() as f64 / n
    });
    Ok((curve, mean(series)))
}

/// Normalized precision curve (fraction with `d < t`, `t` in `[0, 0.5]`) and score.
pub fn norm_precision(distances: &[f64]) -> Result<(Curve, f64)> {
    if distances.is_empty() {
        return Err(Error::EmptyInput("center distances"));
    }
    if let Some(d) = distances.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
        return Err(Error::Invalid(format!("center distance {d} is not a non-negative real")));
    }
    let n = distances.len() as f64;
    let curve = Curve::sampled(percent_grid(PRECISION_POINTS), |t| {
        distances.iter().filter(|&&d| d < t).count() as f64 / n
    });
    let score = distances
        .iter()
        .map(|d| 1.0 - d.min(HALF_RANGE) / HALF_RANGE)
        .sum::<f64>()
        / n;
    Ok((curve, score))
}

/// Fraction of the series survived before the first overlap `<= threshold`.
pub fn robust_extent(series: &[f64], threshold: f64) -> f64 {
    let survived = series
        .iter()
        .position(|&v| v <= threshold)
        .unwrap_or(series.len());
    survived as f64 / series.len() as f64
}

/// Generalized success robustness curve over collapse thresholds in
/// `[0, 0.5]` and its mean.
pub fn gsr(series: &[f64]) -> Result<(Curve, f64)> {
    check_overlaps(series)?;
    let curve = Curve::sampled(percent_grid(ROBUSTNESS_POINTS), |t| robust_extent(series, t));
    let score = curve.mean();
    Ok((curve, score))
}

/// Scores a sequence of `(prediction, ground truth)` pairs in frame order.
pub fn evaluate_pairs(
    pairs: &[(crate::geometry::BoundingBox, crate::geometry::BoundingBox)],
) -> Result<Evaluation> {
    let ious: Vec<f64> = pairs.iter().map(|(p, g)| iou(p, g)).collect();
    let distances: Vec<f64> = pairs.iter().map(|(p, g)| norm_center_distance(p, g)).collect();
    let (success_curve, ss) = success(&ious)?;
    let (precision_curve, nps) = norm_precision(&distances)?;
    let (robustness_curve, gsr_score) = gsr(&ious)?;
    Ok(Evaluation {
        scores: Scores {
            ss,
            nps,
            gsr: gsr_score,
        },
        curves: Curves {
            success: success_curve,
            precision: precision_curve,
            robustness: robustness_curve,
        },
        frames: pairs.len(),
    })
}

/// Scores a run against ground truth over the frames that follow its
/// initialization frame, in the order they were fed to the tracker,
/// skipping frames without a ground-truth box.
pub fn score_run(run: &TrackRun, seq: &Sequence) -> Result<Evaluation> {
    let pairs: Vec<_> = run
        .frames()
        .zip(&run.boxes)
        .skip(1)
        .filter_map(|(frame, pred)| seq.target(frame).map(|gt| (*pred, gt)))
        .collect();
    if pairs.is_empty() {
        return Err(Error::EmptyInput("no evaluation frame with ground truth"));
    }
    evaluate_pairs(&pairs)
}

/// `sum(w * v) / total`, offset by the first value so that constant inputs
/// (a single item included) come back unchanged.
pub(crate) fn weighted_average(pairs: impl Iterator<Item = (f64, f64)> + Clone, total: f64) -> f64 {
    let Some((base, _)) = pairs.clone().next() else {
        return 0.0;
    };
    base + pairs.map(|(v, w)| (v - base) * w).sum::<f64>() / total
}

fn weighted_curve(items: &[(&Curve, f64)], total: f64) -> Curve {
    let thresholds = items[0].0.thresholds.clone();
    let values = (0..thresholds.len())
        .map(|k| weighted_average(items.iter().map(|(c, w)| (c.values[k], *w)), total))
        .collect();
    Curve { thresholds, values }
}

/// Weighted mean of evaluations (scores and curves alike). Returns `None`
/// for an empty input or non-positive total weight.
pub fn weighted_mean(items: &[(&Evaluation, f64)]) -> Option<Evaluation> {
    let total: f64 = items.iter().map(|(_, w)| w).sum();
    if items.is_empty() || total <= 0.0 {
        return None;
    }
    let avg = |f: fn(&Scores) -> f64| weighted_average(items.iter().map(|(e, w)| (f(&e.scores), *w)), total);
    let pick = |f: fn(&Curves) -> &Curve| {
        let curves: Vec<(&Curve, f64)> = items.iter().map(|(e, w)| (f(&e.curves), *w)).collect();
        weighted_curve(&curves, total)
    };
    Some(Evaluation {
        scores: Scores {
            ss: avg(|s| s.ss),
            nps: avg(|s| s.nps),
            gsr: avg(|s| s.gsr),
        },
        curves: Curves {
            success: pick(|c| &c.success),
            precision: pick(|c| &c.precision),
            robustness: pick(|c| &c.robustness),
        },
        frames: items.iter().map(|(e, _)| e.frames).sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Midpoint-rule integral of the success curve on a fine grid.
    fn success_auc_grid(series: &[f64], points: usize) -> f64 {
        let h = 1.0 / points as f64;
        (0..points)
            .map(|j| {
                let t = (j as f64 + 0.5) * h;
                series.iter().filter(|&&v| v > t).count() as f64 / series.len() as f64
            })
            .sum::<f64>()
            * h
    }

    #[test]
    fn success_fixtures() {
        assert_eq!(success(&[1.0; 7]).unwrap().1, 1.0);
        assert_eq!(success(&[0.0; 7]).unwrap().1, 0.0);
        let series = [0.6, 0.4, 0.2, 0.0];
        let (curve, ss) = success(&series).unwrap();
        assert_abs_diff_eq!(ss, 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(success_auc_grid(&series, 100_001), 0.3, epsilon = 1e-5);
        assert_eq!(curve.len(), SUCCESS_POINTS);
        assert_eq!(curve.values[0], 0.75);
        assert_eq!(curve.values[100], 0.0);
    }

    #[test]
    fn precision_fixtures() {
        assert_eq!(norm_precision(&[0.0; 3]).unwrap().1, 1.0);
        assert_eq!(norm_precision(&[0.5, 0.7, 9.0]).unwrap().1, 0.0);
        let (curve, nps) = norm_precision(&[0.25; 4]).unwrap();
        assert_abs_diff_eq!(nps, 0.5, epsilon = 1e-15);
        assert_eq!(curve.len(), PRECISION_POINTS);
        assert_eq!(curve.values[25], 0.0);
        assert_eq!(curve.values[26], 1.0);
        // Dense right-endpoint integration of the plotted step curve.
        let m = 200_000;
        let grid: f64 = (1..=m)
            .map(|j| if 0.25 < 0.5 * j as f64 / m as f64 { 1.0 } else { 0.0 })
            .sum::<f64>()
            / m as f64;
        assert_abs_diff_eq!(grid, nps, epsilon = 1e-5);
    }

    #[test]
    fn gsr_fixtures() {
        assert_eq!(gsr(&[1.0; 5]).unwrap().1, 1.0);
        let collapse = [1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert_abs_diff_eq!(gsr(&collapse).unwrap().1, 0.2, epsilon = 1e-15);
        let (curve, g) = gsr(&[0.6, 0.4, 0.2, 0.0]).unwrap();
        assert_abs_diff_eq!(g, 27.75 / 51.0, epsilon = 1e-15);
        assert_eq!(curve.values[19], 0.75);
        assert_eq!(curve.values[20], 0.5);
        assert_eq!(curve.values[40], 0.25);
    }

    #[test]
    fn empty_inputs_are_errors() {
        assert!(matches!(success(&[]), Err(Error::EmptyInput(_))));
        assert!(matches!(norm_precision(&[]), Err(Error::EmptyInput(_))));
        assert!(matches!(gsr(&[]), Err(Error::EmptyInput(_))));
        assert!(success(&[1.5]).is_err());
        assert!(norm_precision(&[-0.1]).is_err());
    }

    #[test]
    fn weighted_mean_weights_scores_and_curves() {
        let a = evaluate_pairs(&[(bb(0.0), bb(0.0))]).unwrap();
        let b = evaluate_pairs(&[(bb(100.0), bb(0.0))]).unwrap();
        let m = weighted_mean(&[(&a, 180.0), (&b, 241.0)]).unwrap();
        assert_abs_diff_eq!(m.scores.ss, 180.0 / 421.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.curves.success.values[0], 180.0 / 421.0, epsilon = 1e-15);
        assert!(weighted_mean(&[]).is_none());
    }

    #[test]
    fn weighted_mean_keeps_constant_inputs() {
        let a = evaluate_pairs(&[(bb(0.3), bb(0.0)), (bb(7.1), bb(0.0))]).unwrap();
        for w in [1.0, 3.0, 241.0, 0.1] {
            assert_eq!(weighted_mean(&[(&a, w)]).unwrap(), a);
        }
        let weights = [60.0, 181.0, 97.0, 240.0, 133.0, 71.0, 202.0, 88.0, 150.0, 119.0];
        let items: Vec<_> = weights.iter().map(|&w| (&a, w)).collect();
        assert_eq!(weighted_mean(&items).unwrap().scores, a.scores);
    }

    fn bb(x: f64) -> crate::geometry::BoundingBox {
        crate::geometry::BoundingBox::new(x, 0.0, 10.0, 10.0).unwrap()
    }

    mod props {
        use super::*;
        use proptest::collection::vec;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn curve_sample_mean_tracks_ss(series in vec(0.0..=1.0f64, 1..200)) {
                let (curve, ss) = success(&series).unwrap();
                prop_assert!((curve.mean() - ss).abs() <= 0.01);
            }

            #[test]
            fn robustness_curve_is_monotone(series in vec(0.0..=1.0f64, 1..200)) {
                let (curve, g) = gsr(&series).unwrap();
                prop_assert!(curve.values.windows(2).all(|w| w[1] <= w[0]));
                prop_assert!((0.0..=1.0).contains(&g));
            }

            #[test]
            fn scores_are_scale_invariant(
                boxes in vec((0.0..500.0f64, 0.0..500.0f64, 1.0..100.0f64, 1.0..100.0f64, -20.0..20.0f64), 1..40),
                k in 0.1..10.0f64,
            ) {
                let pairs: Vec<_> = boxes.iter().map(|&(x, y, w, h, dx)| {
                    let gt = crate::geometry::BoundingBox::new(x, y, w, h).unwrap();
                    (gt.translated(dx, -dx), gt)
                }).collect();
                let scaled: Vec<_> = pairs.iter().map(|(p, g)| (p.scaled(k), g.scaled(k))).collect();
                let a = evaluate_pairs(&pairs).unwrap().scores;
                let b = evaluate_pairs(&scaled).unwrap().scores;
                prop_assert!((a.ss - b.ss).abs() < 1e-9);
                prop_assert!((a.nps - b.nps).abs() < 1e-9);
                prop_assert!((a.gsr - b.gsr).abs() < 1e-9);
            }
        }
    }
}
