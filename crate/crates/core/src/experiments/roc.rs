//! Detection quality of a sparse estimate against a ground-truth mask.

use nalgebra::DVector;

use crate::error::{invalid, CorpcaError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// Counts of a thresholded detection `|x̂_i| > θ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn at(scores: &[f64], mask: &[bool], threshold: f64) -> Self {
        let mut c = Confusion::default();
        for (s, &truth) in scores.iter().zip(mask) {
            match (s.abs() > threshold, truth) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        c
    }

    /// `2tp / (2tp + fp + fn)`; 1 when there is nothing to detect and
    /// nothing was detected.
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            1.0
        } else {
            2.0 * self.tp as f64 / denom as f64
        }
    }
}

/// ROC points for the given thresholds, sorted by threshold descending.
pub fn roc_eval(x_hat: &DVector<f64>, mask_true: &[bool], thresholds: &[f64]) -> Result<Vec<RocPoint>> {
    roc_eval_slice(x_hat.as_slice(), mask_true, thresholds)
}

/// [`roc_eval`] over a flat score slice, for pooling several frames.
pub fn roc_eval_slice(scores: &[f64], mask_true: &[bool], thresholds: &[f64]) -> Result<Vec<RocPoint>> {
    if scores.len() != mask_true.len() {
        return Err(invalid(format!(
            "score length {} does not match mask length {}",
            scores.len(),
            mask_true.len()
        )));
    }
    let positives = mask_true.iter().filter(|&&b| b).count();
    if positives == 0 {
        return Err(CorpcaError::Domain("true mask is empty, TPR is undefined".into()));
    }
    let negatives = mask_true.len() - positives;
    let mut sorted: Vec<f64> = thresholds.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    Ok(sorted
        .into_iter()
        .map(|threshold| {
            let c = Confusion::at(scores, mask_true, threshold);
            RocPoint {
                threshold,
                fpr: if negatives == 0 { 0.0 } else { c.fp as f64 / negatives as f64 },
                tpr: c.tp as f64 / positives as f64,
            }
        })
        .collect())
}

/// Trapezoidal area under ROC points (any order), closed at (0,0) and (1,1).
pub fn roc_auc(points: &[RocPoint]) -> f64 {
    let mut pts: Vec<(f64, f64)> = points.iter().map(|p| (p.fpr, p.tpr)).collect();
    pts.push((0.0, 0.0));
    pts.push((1.0, 1.0));
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum()
}

/// Up to `limit` candidate thresholds spread over the distinct magnitudes of
/// the scores (quantile spacing), always including 0.
pub fn candidate_thresholds(scores: &[f64], limit: usize) -> Vec<f64> {
    let mut mags: Vec<f64> = scores.iter().map(|s| s.abs()).collect();
    mags.sort_by(f64::total_cmp);
    mags.dedup();
    let mut out = vec![0.0];
    if mags.is_empty() || limit <= 1 {
        return out;
    }
    let picks = (limit - 1).min(mags.len());
    for k in 0..picks {
        let idx = if picks == 1 { 0 } else { k * (mags.len() - 1) / (picks - 1) };
        out.push(mags[idx]);
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// The single threshold maximising the mean per-frame F1 score, with that
/// mean.
pub fn oracle_f1(frames: &[DVector<f64>], masks: &[Vec<bool>], limit: usize) -> Result<(f64, f64)> {
    if frames.is_empty() || frames.len() != masks.len() {
        return Err(invalid("need one mask per frame and at least one frame"));
    }
    for (f, m) in frames.iter().zip(masks) {
        if f.len() != m.len() {
            return Err(invalid("frame and mask lengths differ"));
        }
    }
    let pooled: Vec<f64> = frames.iter().flat_map(|f| f.iter().cloned()).collect();
    let mut best = (0.0, f64::NEG_INFINITY);
    for theta in candidate_thresholds(&pooled, limit) {
        let mean = frames
            .iter()
            .zip(masks)
            .map(|(f, m)| Confusion::at(f.as_slice(), m, theta).f1())
            .sum::<f64>()
            / frames.len() as f64;
        if mean > best.1 {
            best = (theta, mean);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_recovery_corner() {
        let x = DVector::from_vec(vec![0.0, 2.0, 0.0, -1.5, 0.0]);
        let mask = [false, true, false, true, false];
        let pts = roc_eval(&x, &mask, &[0.5]).unwrap();
        assert_eq!((pts[0].fpr, pts[0].tpr), (0.0, 1.0));
    }

    #[test]
    fn zero_estimate_detects_nothing() {
        let x = DVector::zeros(4);
        let pts = roc_eval(&x, &[true, false, true, false], &[0.1, 1.0]).unwrap();
        assert!(pts.iter().all(|p| p.tpr == 0.0));
    }

    #[test]
    fn sorted_descending_and_empty_mask() {
        let x = DVector::from_vec(vec![0.3, 0.1]);
        let pts = roc_eval(&x, &[true, false], &[0.0, 0.2, 0.05]).unwrap();
        let th: Vec<f64> = pts.iter().map(|p| p.threshold).collect();
        assert_eq!(th, vec![0.2, 0.05, 0.0]);
        assert_eq!(roc_eval(&x, &[false, false], &[0.1]).unwrap_err().kind(), "domain");
    }

    #[test]
    fn f1_values() {
        let c = Confusion { tp: 3, fp: 1, fn_: 1, tn: 5 };
        assert!((c.f1() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn oracle_threshold_separates_clean_frames() {
        let frames = vec![DVector::from_vec(vec![0.0, 0.9, 0.01, 1.2]), DVector::from_vec(vec![0.8, 0.02, 0.0, 0.0])];
        let masks = vec![vec![false, true, false, true], vec![true, false, false, false]];
        let (theta, f1) = oracle_f1(&frames, &masks, 64).unwrap();
        assert_eq!(f1, 1.0);
        assert!(theta >= 0.02 && theta < 0.8);
    }
}
