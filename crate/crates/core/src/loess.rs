//! Local linear regression with tricube weights, for smoothed calibration
//! curves. Plain single-pass fit (no robustness reweighting).

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct LoessConfig {
    /// Fraction of the data in each local neighbourhood.
    pub span: f64,
}

impl Default for LoessConfig {
    fn default() -> Self {
        LoessConfig { span: 0.75 }
    }
}

/// Evaluate the smoother at each point of `eval`.
///
/// For every evaluation point the `ceil(span·n)` nearest x-values form the
/// neighbourhood; a weighted least-squares line through them (tricube
/// weights in scaled distance) is read off at the point.
pub fn smooth(x: &[f64], y: &[f64], eval: &[f64], cfg: &LoessConfig) -> Result<Vec<f64>> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::DegenerateInput(format!(
            "{} x values for {} y values",
            x.len(),
            y.len()
        )));
    }
    if !(0.0 < cfg.span && cfg.span <= 1.0) {
        return Err(Error::Config(format!("loess span {} outside (0, 1]", cfg.span)));
    }
    if x.iter().chain(y).chain(eval).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput("non-finite input to loess".into()));
    }
    let n = x.len();
    let q = ((cfg.span * n as f64).ceil() as usize).clamp(2.min(n), n);

    // Sort once; neighbourhoods of sorted data are contiguous windows.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap());
    let xs: Vec<f64> = order.iter().map(|&i| x[i]).collect();
    let ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();

    let mut out = Vec::with_capacity(eval.len());
    for &e in eval {
        // Find the q-window minimising the maximum distance to e.
        let right0 = xs.partition_point(|&v| v < e);
        let mut lo = right0.saturating_sub(1).min(n.saturating_sub(1));
        let mut hi = lo; // inclusive window [lo, hi]
        while hi - lo + 1 < q {
            let extend_left = if lo == 0 {
                false
            } else if hi + 1 >= n {
                true
            } else {
                (e - xs[lo - 1]) <= (xs[hi + 1] - e)
            };
            if extend_left {
                lo -= 1;
            } else {
                hi += 1;
            }
        }
        let h = (e - xs[lo]).abs().max((xs[hi] - e).abs());

        // Weighted linear fit in centred coordinates; the intercept is the
        // fitted value at e.
        let (mut sw, mut swd, mut swdd, mut swy, mut swdy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in lo..=hi {
            let d = xs[i] - e;
            let w = if h > 0.0 {
                let u = (d.abs() / h).min(1.0);
                let t = 1.0 - u * u * u;
                t * t * t
            } else {
                1.0
            };
            sw += w;
            swd += w * d;
            swdd += w * d * d;
            swy += w * ys[i];
            swdy += w * d * ys[i];
        }
        let det = sw * swdd - swd * swd;
        let fitted = if det.abs() > 1e-12 * (sw * swdd).abs().max(f64::MIN_POSITIVE) {
            (swdd * swy - swd * swdy) / det
        } else {
            // Degenerate neighbourhood (all x equal): weighted mean.
            swy / sw
        };
        out.push(fitted);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_a_line_exactly() {
        let x: Vec<f64> = (0..200).map(|i| i as f64 / 10.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let eval = [0.0, 3.7, 11.25, 19.9];
        let fit = smooth(&x, &y, &eval, &LoessConfig::default()).unwrap();
        for (f, e) in fit.iter().zip(eval) {
            assert!((f - (2.0 * e + 1.0)).abs() < 1e-9, "at {e}: {f}");
        }
    }

    #[test]
    fn recovers_smooth_curve() {
        let n = 2000;
        let x: Vec<f64> = (0..n).map(|i| i as f64 / n as f64 * 6.0).collect();
        let y: Vec<f64> = x.iter().map(|v| (v / 2.0).sin()).collect();
        let eval: Vec<f64> = (1..=20).map(|i| i as f64 * 0.28).collect();
        let cfg = LoessConfig { span: 0.3 };
        let fit = smooth(&x, &y, &eval, &cfg).unwrap();
        for (f, e) in fit.iter().zip(&eval) {
            assert!((f - (e / 2.0).sin()).abs() < 0.03, "at {e}: {f}");
        }
    }

    #[test]
    fn constant_input_gives_constant_output() {
        let x: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let y = vec![4.25; 50];
        let fit = smooth(&x, &y, &[0.5, 25.0, 49.0], &LoessConfig::default()).unwrap();
        for f in fit {
            assert!((f - 4.25).abs() < 1e-10);
        }
    }

    #[test]
    fn all_x_identical_falls_back_to_mean() {
        let x = vec![1.0; 10];
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let fit = smooth(&x, &y, &[1.0], &LoessConfig { span: 1.0 }).unwrap();
        assert!((fit[0] - 4.5).abs() < 1e-12);
    }

    #[test]
    fn input_validation() {
        assert!(smooth(&[], &[], &[0.0], &LoessConfig::default()).is_err());
        assert!(smooth(&[1.0], &[1.0, 2.0], &[0.0], &LoessConfig::default()).is_err());
        assert!(smooth(&[1.0, f64::NAN], &[1.0, 2.0], &[0.0], &LoessConfig::default()).is_err());
        let bad_span = LoessConfig { span: 0.0 };
        assert!(smooth(&[1.0, 2.0], &[1.0, 2.0], &[0.0], &bad_span).is_err());
    }

    #[test]
    fn unsorted_input_is_handled() {
        let x = vec![5.0, 1.0, 3.0, 2.0, 4.0, 0.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 2.0).collect();
        let fit = smooth(&x, &y, &[2.5], &LoessConfig::default()).unwrap();
        assert!((fit[0] - 5.5).abs() < 1e-9);
    }
}
