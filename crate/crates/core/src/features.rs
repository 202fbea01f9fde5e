//! Feature construction: restricted cubic splines for flexible continuous
//! effects in the applied example.

use crate::error::{Error, Result};
use crate::num::quantile;

/// Restricted cubic spline with three knots: one basis column is the raw
/// value, the second is a cubic term constrained to be linear beyond the
/// outer knots. The nonlinear column uses the usual (t3−t1)² scaling so its
/// magnitude is comparable to the linear one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RcsBasis {
    pub knots: [f64; 3],
}

impl RcsBasis {
    pub fn with_knots(knots: [f64; 3]) -> Result<RcsBasis> {
        if !(knots[0] < knots[1] && knots[1] < knots[2]) {
            return Err(Error::DegenerateInput(format!(
                "spline knots must be strictly increasing, got {knots:?}"
            )));
        }
        Ok(RcsBasis { knots })
    }

    /// Knots at the 10th, 50th and 90th percentiles of the observed values.
    pub fn from_data(values: &[f64]) -> Result<RcsBasis> {
        let k = [quantile(values, 0.10), quantile(values, 0.50), quantile(values, 0.90)];
        match (k[0], k[1], k[2]) {
            (Some(a), Some(b), Some(c)) => RcsBasis::with_knots([a, b, c]),
            _ => Err(Error::DegenerateInput("no data for spline knots".into())),
        }
    }

    /// The two basis values (linear, restricted cubic) at `x`.
    pub fn expand(&self, x: f64) -> [f64; 2] {
        let [t1, t2, t3] = self.knots;
        let plus3 = |v: f64| if v > 0.0 { v * v * v } else { 0.0 };
        let num = plus3(x - t1) - plus3(x - t2) * (t3 - t1) / (t3 - t2)
            + plus3(x - t3) * (t2 - t1) / (t3 - t2);
        [x, num / ((t3 - t1) * (t3 - t1))]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn knots_from_percentiles() {
        let values: Vec<f64> = (0..101).map(|i| i as f64).collect();
        let b = RcsBasis::from_data(&values).unwrap();
        assert_eq!(b.knots, [10.0, 50.0, 90.0]);
    }

    #[test]
    fn equal_knots_rejected() {
        assert!(RcsBasis::with_knots([1.0, 1.0, 2.0]).is_err());
        let constantish = vec![3.0; 50];
        assert!(RcsBasis::from_data(&constantish).is_err());
    }

    #[test]
    fn zero_below_first_knot() {
        let b = RcsBasis::with_knots([0.0, 1.0, 3.0]).unwrap();
        for x in [-5.0, -0.1, 0.0] {
            assert_eq!(b.expand(x)[1], 0.0, "x = {x}");
            assert_eq!(b.expand(x)[0], x);
        }
    }

    #[test]
    fn linear_tails() {
        // second differences of the nonlinear term vanish outside the knots
        let b = RcsBasis::with_knots([-1.0, 0.5, 2.0]).unwrap();
        let h = 0.25;
        for x in [3.0f64, 5.0, 9.0] {
            let f = |v: f64| b.expand(v)[1];
            let second = f(x + h) - 2.0 * f(x) + f(x - h);
            assert!(second.abs() < 1e-9, "x = {x}: {second}");
        }
        // and do not vanish between the knots
        let f = |v: f64| b.expand(v)[1];
        let second = f(0.5 + h) - 2.0 * f(0.5) + f(0.5 - h);
        assert!(second.abs() > 1e-3);
    }

    #[test]
    fn continuous_at_knots() {
        let b = RcsBasis::with_knots([0.0, 1.0, 2.5]).unwrap();
        for t in b.knots {
            let eps = 1e-7;
            let lo = b.expand(t - eps)[1];
            let hi = b.expand(t + eps)[1];
            assert!((hi - lo).abs() < 1e-5, "jump at knot {t}");
        }
    }
}
