//! Small numeric helpers shared across the crate: the logistic pair,
//! probability clamping, and type-7 sample quantiles.

/// Probabilities are kept inside [PROB_FLOOR, 1 - PROB_FLOOR] so that
/// logit() and log-likelihood terms stay finite.
pub const PROB_FLOOR: f64 = 1e-12;

#[inline]
pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}

/// Inverse logit. Written the branchless-stable way: exp() of a large
/// negative number underflows cleanly to 0, so both branches avoid overflow.
#[inline]
pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Log-odds of a probability. Callers are expected to clamp first when the
/// input can sit on the boundary.
#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Type-7 quantile (the R default): linear interpolation with
/// h = (n - 1) * q on the order statistics.
///
/// Returns None for an empty slice or a non-finite/out-of-range q.
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() || !(0.0..=1.0).contains(&q) {
        return None;
    }
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite value in quantile"));
    Some(quantile_sorted(&sorted, q))
}

/// Same as [`quantile`] but assumes `sorted` is already ascending.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    quantile(values, 0.5)
}

/// (25th, 75th) percentiles.
pub fn iqr(values: &[f64]) -> Option<(f64, f64)> {
    Some((quantile(values, 0.25)?, quantile(values, 0.75)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logit_expit_basics() {
        assert_eq!(expit(0.0), 0.5);
        assert_eq!(logit(0.5), 0.0);
        assert!((logit(0.01) - (-4.59512)).abs() < 1e-5);
        assert!((logit(0.1) - (-2.19722)).abs() < 1e-5);
        assert!((logit(0.3) - (-0.84730)).abs() < 1e-5);
    }

    #[test]
    fn expit_extremes_stay_finite() {
        assert_eq!(expit(1000.0), 1.0);
        assert_eq!(expit(-1000.0), 0.0);
        assert!(logit(clamp_prob(expit(-1000.0))).is_finite());
    }

    #[test]
    fn roundtrip() {
        for &x in &[-12.0, -5.0, -0.3, 0.0, 0.7, 12.0] {
            assert!((logit(expit(x)) - x).abs() < 1e-9, "x = {x}");
        }
        // deep in the tails 1-p eats precision; only relative accuracy holds
        for &x in &[-25.0, 25.0] {
            assert!((logit(expit(x)) - x).abs() < 1e-4 * x.abs(), "x = {x}");
        }
    }

    #[test]
    fn clamp_bounds() {
        assert_eq!(clamp_prob(0.0), 1e-12);
        assert_eq!(clamp_prob(1.0), 1.0 - 1e-12);
        assert_eq!(clamp_prob(0.25), 0.25);
    }

    #[test]
    fn quantile_three_points() {
        let v = [1.0, 2.0, 3.0];
        assert_eq!(median(&v), Some(2.0));
        assert_eq!(iqr(&v), Some((1.5, 2.5)));
    }

    #[test]
    fn quantile_matches_interpolation() {
        // type 7 on [10, 20, 30, 40]: q=0.5 -> h=1.5 -> 25
        let v = [40.0, 10.0, 30.0, 20.0];
        assert_eq!(quantile(&v, 0.5), Some(25.0));
        assert_eq!(quantile(&v, 0.0), Some(10.0));
        assert_eq!(quantile(&v, 1.0), Some(40.0));
        // h = 3 * 0.9 = 2.7 -> 30 + 0.7 * 10 = 37
        assert!((quantile(&v, 0.9).unwrap() - 37.0).abs() < 1e-12);
    }

    #[test]
    fn quantile_degenerate() {
        assert_eq!(quantile(&[], 0.5), None);
        assert_eq!(quantile(&[5.0], 0.75), Some(5.0));
        assert_eq!(quantile(&[1.0, 2.0], 2.0), None);
    }
}
