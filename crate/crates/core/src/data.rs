//! Core data containers: a small row-major matrix, labelled datasets, and
//! prediction sets that keep probabilities and linear predictors in sync.

use crate::error::{Error, Result};
use crate::num::{clamp_prob, expit, logit};

/// Dense row-major f64 matrix. Deliberately minimal: the fitting code only
/// needs row access, row selection and stacking.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Matrix {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
        if rows.is_empty() {
            return Err(Error::DegenerateInput("matrix with no rows".into()));
        }
        let cols = rows[0].len();
        if cols == 0 {
            return Err(Error::DegenerateInput("matrix with no columns".into()));
        }
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::DegenerateInput(format!(
                    "ragged matrix: row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix { rows: rows.len(), cols, data })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.cols, "row length mismatch");
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix { rows: idx.len(), cols: self.cols, data }
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// How a feature behaves under interpolation: continuous features may take
/// any value, ordinal ones snap back to a fixed ascending grid of levels.
#[derive(Clone, Debug, PartialEq)]
pub enum FeatureKind {
    Continuous,
    Ordinal { levels: Vec<f64> },
}

impl FeatureKind {
    /// Nearest level for ordinal features (ties resolve to the lower level);
    /// identity for continuous ones.
    pub fn snap(&self, v: f64) -> f64 {
        match self {
            FeatureKind::Continuous => v,
            FeatureKind::Ordinal { levels } => {
                let mut best = levels[0];
                let mut best_d = (v - levels[0]).abs();
                for &l in &levels[1..] {
                    let d = (v - l).abs();
                    if d < best_d {
                        best_d = d;
                        best = l;
                    }
                }
                best
            }
        }
    }
}

/// A labelled sample: feature matrix, binary outcomes, and per-column kinds.
#[derive(Clone, Debug)]
pub struct Dataset {
    x: Matrix,
    y: Vec<u8>,
    kinds: Vec<FeatureKind>,
}

impl Dataset {
    pub fn new(x: Matrix, y: Vec<u8>, kinds: Vec<FeatureKind>) -> Result<Dataset> {
        if x.rows() == 0 {
            return Err(Error::DegenerateInput("dataset with no rows".into()));
        }
        if y.len() != x.rows() {
            return Err(Error::DegenerateInput(format!(
                "outcome length {} does not match {} rows",
                y.len(),
                x.rows()
            )));
        }
        if kinds.len() != x.cols() {
            return Err(Error::DegenerateInput(format!(
                "{} feature kinds for {} columns",
                kinds.len(),
                x.cols()
            )));
        }
        if let Some(bad) = y.iter().position(|&v| v > 1) {
            return Err(Error::DegenerateInput(format!("outcome at row {bad} is not 0/1")));
        }
        if let Some(bad) = x.data().iter().position(|v| !v.is_finite()) {
            return Err(Error::DegenerateInput(format!(
                "non-finite feature value at row {}, column {}",
                bad / x.cols(),
                bad % x.cols()
            )));
        }
        for (j, k) in kinds.iter().enumerate() {
            if let FeatureKind::Ordinal { levels } = k {
                if levels.is_empty() {
                    return Err(Error::DegenerateInput(format!(
                        "ordinal feature {j} has no levels"
                    )));
                }
                if levels.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::DegenerateInput(format!(
                        "ordinal feature {j} levels not strictly ascending"
                    )));
                }
            }
        }
        Ok(Dataset { x, y, kinds })
    }

    /// All-continuous dataset; the common case in the simulation study.
    pub fn continuous(x: Matrix, y: Vec<u8>) -> Result<Dataset> {
        let kinds = vec![FeatureKind::Continuous; x.cols()];
        Dataset::new(x, y, kinds)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.x.rows()
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.x.cols()
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &[u8] {
        &self.y
    }

    pub fn kinds(&self) -> &[FeatureKind] {
        &self.kinds
    }

    pub fn n_events(&self) -> usize {
        self.y.iter().map(|&v| v as usize).sum()
    }

    pub fn event_fraction(&self) -> f64 {
        self.n_events() as f64 / self.n() as f64
    }

    /// Row indices of (events, non-events), each in ascending order.
    pub fn class_indices(&self) -> (Vec<usize>, Vec<usize>) {
        let mut ev = Vec::new();
        let mut ne = Vec::new();
        for (i, &v) in self.y.iter().enumerate() {
            if v == 1 {
                ev.push(i)
            } else {
                ne.push(i)
            }
        }
        (ev, ne)
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            kinds: self.kinds.clone(),
        }
    }
}

/// Predictions for a scored sample. Probabilities are clamped away from 0/1.
/// Linear predictors supplied by the caller are stored untouched — the
/// calibration refits treat them as the model's exact output, so shifting or
/// rescaling a score must not pick up conversion noise. Only
/// `from_probabilities` derives them, as the log-odds of the clamped
/// probability.
#[derive(Clone, Debug)]
pub struct PredictionSet {
    probabilities: Vec<f64>,
    linear_predictors: Vec<f64>,
    outcomes: Vec<u8>,
}

impl PredictionSet {
    pub fn from_probabilities(probabilities: Vec<f64>, outcomes: Vec<u8>) -> Result<PredictionSet> {
        if probabilities.is_empty() || probabilities.len() != outcomes.len() {
            return Err(Error::DegenerateInput(format!(
                "{} probabilities for {} outcomes",
                probabilities.len(),
                outcomes.len()
            )));
        }
        if let Some(bad) = outcomes.iter().position(|&v| v > 1) {
            return Err(Error::DegenerateInput(format!("outcome at row {bad} is not 0/1")));
        }
        if let Some(bad) = probabilities.iter().position(|v| !v.is_finite()) {
            return Err(Error::DegenerateInput(format!("non-finite probability at row {bad}")));
        }
        let probabilities: Vec<f64> = probabilities.into_iter().map(clamp_prob).collect();
        let linear_predictors = probabilities.iter().map(|&p| logit(p)).collect();
        Ok(PredictionSet { probabilities, linear_predictors, outcomes })
    }

    pub fn from_linear_predictors(lps: Vec<f64>, outcomes: Vec<u8>) -> Result<PredictionSet> {
        if lps.is_empty() || lps.len() != outcomes.len() {
            return Err(Error::DegenerateInput(format!(
                "{} linear predictors for {} outcomes",
                lps.len(),
                outcomes.len()
            )));
        }
        if let Some(bad) = outcomes.iter().position(|&v| v > 1) {
            return Err(Error::DegenerateInput(format!("outcome at row {bad} is not 0/1")));
        }
        if let Some(bad) = lps.iter().position(|v| !v.is_finite()) {
            return Err(Error::DegenerateInput(format!(
                "non-finite linear predictor at row {bad}"
            )));
        }
        let probabilities = lps.iter().map(|&z| clamp_prob(expit(z))).collect();
        Ok(PredictionSet { probabilities, linear_predictors: lps, outcomes })
    }

    pub fn n(&self) -> usize {
        self.outcomes.len()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn linear_predictors(&self) -> &[f64] {
        &self.linear_predictors
    }

    pub fn outcomes(&self) -> &[u8] {
        &self.outcomes
    }

    pub fn n_events(&self) -> usize {
        self.outcomes.iter().map(|&v| v as usize).sum()
    }

    /// Shift every linear predictor by `delta` (recalibration-in-the-large).
    pub fn shift(&self, delta: f64) -> PredictionSet {
        let lps: Vec<f64> = self.linear_predictors.iter().map(|z| z + delta).collect();
        PredictionSet::from_linear_predictors(lps, self.outcomes.clone())
            .expect("shift of a valid prediction set stays valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_validation() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let ds = Dataset::continuous(x.clone(), vec![0, 1]).unwrap();
        assert_eq!(ds.n(), 2);
        assert_eq!(ds.p(), 2);
        assert_eq!(ds.n_events(), 1);

        assert!(Dataset::continuous(x.clone(), vec![0]).is_err());
        assert!(Dataset::continuous(x.clone(), vec![0, 2]).is_err());
        let bad = Matrix::from_rows(&[vec![f64::NAN, 0.0]]).unwrap();
        assert!(Dataset::continuous(bad, vec![0]).is_err());
    }

    #[test]
    fn class_indices_and_subset() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let ds = Dataset::continuous(x, vec![1, 0, 1, 0]).unwrap();
        let (ev, ne) = ds.class_indices();
        assert_eq!(ev, vec![0, 2]);
        assert_eq!(ne, vec![1, 3]);
        let sub = ds.subset(&[2, 0]);
        assert_eq!(sub.x().row(0), &[2.0]);
        assert_eq!(sub.y(), &[1, 1]);
    }

    #[test]
    fn ordinal_snap() {
        let k = FeatureKind::Ordinal { levels: vec![0.0, 1.0, 2.0, 3.0, 4.0] };
        assert_eq!(k.snap(1.4), 1.0);
        assert_eq!(k.snap(1.6), 2.0);
        assert_eq!(k.snap(-3.0), 0.0);
        assert_eq!(k.snap(9.0), 4.0);
        // exact midpoint resolves to the lower level
        assert_eq!(k.snap(2.5), 2.0);
    }

    #[test]
    fn prediction_set_links_prob_and_lp() {
        let ps = PredictionSet::from_probabilities(vec![0.2, 0.5, 0.999], vec![0, 1, 1]).unwrap();
        for (p, z) in ps.probabilities().iter().zip(ps.linear_predictors()) {
            assert!((logit(*p) - z).abs() < 1e-10);
        }
    }

    #[test]
    fn prediction_set_clamps_extremes() {
        let ps =
            PredictionSet::from_linear_predictors(vec![-200.0, 0.0, 200.0], vec![0, 0, 1]).unwrap();
        assert!(ps.probabilities()[0] >= 1e-12);
        assert!(ps.probabilities()[2] <= 1.0 - 1e-12);
        // the supplied predictors are stored untouched
        assert_eq!(ps.linear_predictors(), &[-200.0, 0.0, 200.0]);
    }

    #[test]
    fn shift_moves_lp_by_constant() {
        let ps = PredictionSet::from_probabilities(vec![0.2, 0.7], vec![0, 1]).unwrap();
        let shifted = ps.shift(-1.5);
        for (a, b) in ps.linear_predictors().iter().zip(shifted.linear_predictors()) {
            assert!((b - (a - 1.5)).abs() < 1e-12);
        }
    }
}
