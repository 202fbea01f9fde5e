//! Model performance measures: discrimination (AUROC), calibration
//! (intercept and slope of a logistic refit), threshold classification
//! counts, and net benefit for decision curves.

use crate::data::PredictionSet;
use crate::error::{Error, Result};
use crate::glm;

/// Concordance probability (area under the ROC curve) from raw scores via
/// the Mann-Whitney rank-sum with midranks for ties. O(n log n).
pub fn auroc_from_scores(scores: &[f64], y: &[u8]) -> Result<f64> {
    if scores.is_empty() || scores.len() != y.len() {
        return Err(Error::DegenerateInput(format!(
            "{} scores for {} outcomes",
            scores.len(),
            y.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::DegenerateInput("non-finite score".into()));
    }
    let n = scores.len();
    let n1: usize = y.iter().map(|&v| v as usize).sum();
    let n0 = n - n1;
    if n1 == 0 || n0 == 0 {
        return Err(Error::UndefinedMetric("AUROC needs both outcome classes".into()));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());

    let mut rank_sum_events = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && scores[idx[j]] == scores[idx[i]] {
            j += 1;
        }
        // ranks i+1 ..= j share the midrank
        let midrank = (i + 1 + j) as f64 / 2.0;
        for &k in &idx[i..j] {
            if y[k] == 1 {
                rank_sum_events += midrank;
            }
        }
        i = j;
    }
    let u = rank_sum_events - (n1 * (n1 + 1)) as f64 / 2.0;
    Ok(u / (n1 as f64 * n0 as f64))
}

pub fn auroc(ps: &PredictionSet) -> Result<f64> {
    auroc_from_scores(ps.probabilities(), ps.outcomes())
}

/// Calibration intercept: the intercept of a logistic refit with the linear
/// predictor as a fixed offset. Zero means calibrated-in-the-large.
pub fn calibration_intercept(ps: &PredictionSet) -> Result<f64> {
    glm::fit_offset_intercept(ps.linear_predictors(), ps.outcomes())
}

/// Calibration slope: the coefficient on the linear predictor in a
/// two-parameter logistic refit. One means the spread of the predictions is
/// right; below one they are too extreme.
pub fn calibration_slope(ps: &PredictionSet) -> Result<f64> {
    Ok(glm::fit_calibration(ps.linear_predictors(), ps.outcomes())?.slope)
}

/// Classification counts at a probability threshold. Predictions at or
/// above the threshold count as positive.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn n(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.n() as f64
    }

    pub fn sensitivity(&self) -> Option<f64> {
        let pos = self.tp + self.fn_;
        (pos > 0).then(|| self.tp as f64 / pos as f64)
    }

    pub fn specificity(&self) -> Option<f64> {
        let neg = self.tn + self.fp;
        (neg > 0).then(|| self.tn as f64 / neg as f64)
    }
}

pub fn confusion_at(ps: &PredictionSet, threshold: f64) -> Confusion {
    let mut c = Confusion { tp: 0, fp: 0, tn: 0, fn_: 0 };
    for (&p, &y) in ps.probabilities().iter().zip(ps.outcomes()) {
        match (p >= threshold, y == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    c
}

/// How false positives are traded against true positives in net benefit.
///
/// `ThresholdOdds` is the standard decision-curve weight t/(1−t);
/// `InverseComplement` uses 1/(1−t) instead, for comparison with sources
/// that state the formula that way.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum NetBenefitWeight {
    #[default]
    ThresholdOdds,
    InverseComplement,
}

impl NetBenefitWeight {
    fn factor(self, t: f64) -> f64 {
        match self {
            NetBenefitWeight::ThresholdOdds => t / (1.0 - t),
            NetBenefitWeight::InverseComplement => 1.0 / (1.0 - t),
        }
    }
}

/// Net benefit of treating at probability threshold `t`:
/// (TP − w(t)·FP) / N.
pub fn net_benefit(ps: &PredictionSet, t: f64, weight: NetBenefitWeight) -> Result<f64> {
    if !(0.0..1.0).contains(&t) {
        return Err(Error::DegenerateInput(format!("net benefit threshold {t} outside [0, 1)")));
    }
    let c = confusion_at(ps, t);
    Ok((c.tp as f64 - weight.factor(t) * c.fp as f64) / c.n() as f64)
}

/// Net benefit of the treat-everyone policy at threshold `t`.
pub fn net_benefit_treat_all(prevalence: f64, t: f64, weight: NetBenefitWeight) -> f64 {
    prevalence - (1.0 - prevalence) * weight.factor(t)
}

/// Decision-curve points: (threshold, model net benefit, treat-all net
/// benefit). Treat-none is identically zero.
pub fn decision_curve(
    ps: &PredictionSet,
    thresholds: &[f64],
    weight: NetBenefitWeight,
) -> Result<Vec<(f64, f64, f64)>> {
    let prevalence = ps.n_events() as f64 / ps.n() as f64;
    thresholds
        .iter()
        .map(|&t| {
            Ok((t, net_benefit(ps, t, weight)?, net_benefit_treat_all(prevalence, t, weight)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use rand::Rng;

    /// All-pairs AUROC oracle: P(score_event > score_nonevent) + ½ ties.
    fn auroc_brute(scores: &[f64], y: &[u8]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &yi) in y.iter().enumerate() {
            if yi != 1 {
                continue;
            }
            for (j, &yj) in y.iter().enumerate() {
                if yj != 0 {
                    continue;
                }
                den += 1.0;
                if scores[i] > scores[j] {
                    num += 1.0;
                } else if scores[i] == scores[j] {
                    num += 0.5;
                }
            }
        }
        num / den
    }

    #[test]
    fn auroc_hand_case() {
        let scores = [0.1, 0.4, 0.35, 0.8];
        let y = [0, 0, 1, 1];
        assert_eq!(auroc_from_scores(&scores, &y).unwrap(), 0.75);
    }

    #[test]
    fn auroc_extremes_and_ties() {
        assert_eq!(auroc_from_scores(&[1.0, 2.0], &[0, 1]).unwrap(), 1.0);
        assert_eq!(auroc_from_scores(&[2.0, 1.0], &[0, 1]).unwrap(), 0.0);
        assert_eq!(auroc_from_scores(&[0.2, 0.2], &[0, 1]).unwrap(), 0.5);
        // all-tied scores give exactly one half regardless of outcome mix
        assert_eq!(auroc_from_scores(&[3.0; 7], &[1, 0, 0, 1, 0, 1, 0]).unwrap(), 0.5);
    }

    #[test]
    fn auroc_matches_brute_force_with_ties() {
        let mut s = RngStream::derive(404, &[1]);
        for case in 0..50u64 {
            let n = 2 + (case as usize % 40);
            // coarse grid of score values forces plenty of ties
            let scores: Vec<f64> = (0..n).map(|_| (s.random_range(0..7) as f64) / 6.0).collect();
            let mut y: Vec<u8> = (0..n).map(|_| u8::from(s.random_range(0..2) == 1)).collect();
            y[0] = 1; // guarantee both classes
            y[n - 1] = 0;
            let fast = auroc_from_scores(&scores, &y).unwrap();
            let slow = auroc_brute(&scores, &y);
            assert!((fast - slow).abs() < 1e-12, "case {case}: {fast} vs {slow}");
        }
    }

    #[test]
    fn auroc_single_class_undefined() {
        assert!(matches!(auroc_from_scores(&[0.1, 0.2], &[1, 1]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn confusion_counts_and_threshold_inclusive() {
        let ps =
            PredictionSet::from_probabilities(vec![0.1, 0.5, 0.5, 0.9, 0.3], vec![0, 1, 0, 1, 1])
                .unwrap();
        let c = confusion_at(&ps, 0.5);
        // 0.5 counts as positive: predictions + are rows 1,2,3
        assert_eq!(c, Confusion { tp: 2, fp: 1, tn: 1, fn_: 1 });
        assert!((c.accuracy() - 0.6).abs() < 1e-15);
        assert!((c.sensitivity().unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((c.specificity().unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn net_benefit_hand_case() {
        // 10 rows, 3 TP and 2 FP at t = 0.2
        let probs = vec![0.9, 0.8, 0.7, 0.6, 0.5, 0.1, 0.1, 0.1, 0.1, 0.1];
        let y = vec![1, 1, 1, 0, 0, 0, 0, 0, 0, 1];
        let ps = PredictionSet::from_probabilities(probs, y).unwrap();
        let nb = net_benefit(&ps, 0.2, NetBenefitWeight::ThresholdOdds).unwrap();
        assert!((nb - (3.0 - 0.25 * 2.0) / 10.0).abs() < 1e-15);
        let nb_alt = net_benefit(&ps, 0.2, NetBenefitWeight::InverseComplement).unwrap();
        assert!((nb_alt - (3.0 - 1.25 * 2.0) / 10.0).abs() < 1e-15);
        let all = net_benefit_treat_all(0.4, 0.2, NetBenefitWeight::ThresholdOdds);
        assert!((all - (0.4 - 0.6 * 0.25)).abs() < 1e-15);
    }

    #[test]
    fn decision_curve_at_zero_threshold_is_prevalence() {
        let ps =
            PredictionSet::from_probabilities(vec![0.2, 0.6, 0.4, 0.8], vec![0, 1, 0, 1]).unwrap();
        let pts = decision_curve(&ps, &[0.0, 0.25], NetBenefitWeight::ThresholdOdds).unwrap();
        assert!((pts[0].1 - 0.5).abs() < 1e-15);
        assert!((pts[0].2 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn calibration_wrappers_reflect_shift() {
        // Build outcomes from a known logistic truth, then check that
        // shifting the linear predictor by -c moves the fitted intercept to
        // about +c while leaving the slope near 1.
        let mut s = RngStream::derive(71, &[3]);
        let n = 4000;
        let mut lp = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let z: f64 = s.random_range(-3.0..1.5);
            let u: f64 = s.random_range(0.0..1.0);
            lp.push(z);
            y.push(u8::from(u < crate::num::expit(z)));
        }
        let ps = PredictionSet::from_linear_predictors(lp.clone(), y.clone()).unwrap();
        let a0 = calibration_intercept(&ps).unwrap();
        let b0 = calibration_slope(&ps).unwrap();
        assert!(a0.abs() < 0.2, "intercept {a0}");
        assert!((b0 - 1.0).abs() < 0.12, "slope {b0}");

        let shifted = ps.shift(-1.5);
        let a1 = calibration_intercept(&shifted).unwrap();
        assert!((a1 - (a0 + 1.5)).abs() < 1e-6, "{a1} vs {}", a0 + 1.5);
    }
}
