//! The applied pipeline: ingest a cohort from CSV, split it into training
//! and test parts, optionally rebalance the training part, expand continuous
//! predictors with restricted cubic splines, fit standard and ridge logistic
//! models, and evaluate them on the held-out part with bootstrap confidence
//! intervals, flexible calibration curves, and decision curves.

use crate::data::{Dataset, FeatureKind, Matrix, PredictionSet};
use crate::error::{Error, Result};
use crate::features::RcsBasis;
use crate::glm;
use crate::loess::{self, LoessConfig};
use crate::metrics::{self, NetBenefitWeight};
use crate::num::quantile;
use crate::resample;
use crate::rng::RngStream;
use crate::sim::{Algorithm, DatasetKind, ExclusionReason};
use rand::seq::SliceRandom;
use rand::Rng;
use std::path::{Path, PathBuf};

/// Stream path layout: every random draw of the pipeline derives from the
/// split seed under this purpose, so a (file, config) pair fully determines
/// the result.
mod stage {
    pub const PURPOSE: u64 = 3;
    pub const SPLIT: u64 = 0;
    pub const UNDERSAMPLE: u64 = 1;
    pub const OVERSAMPLE: u64 = 2;
    pub const SMOTE: u64 = 3;
    pub const RIDGE_CV_BASE: u64 = 5;
    pub const BOOTSTRAP: u64 = 9;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PredictorKind {
    Continuous { spline: bool },
    Ordinal,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredictorSpec {
    pub name: String,
    pub kind: PredictorKind,
}

/// Parse a predictor list: comma-separated `name[:kind][:spline]` items,
/// kind one of `continuous` (default) or `ordinal`.
pub fn parse_predictors(value: &str) -> Result<Vec<PredictorSpec>> {
    let mut out: Vec<PredictorSpec> = Vec::new();
    for item in value.split(',') {
        let item = item.trim();
        if item.is_empty() {
            return Err(Error::Config("empty predictor item".into()));
        }
        let mut parts = item.split(':');
        let name = parts.next().unwrap().trim().to_string();
        let mut kind = PredictorKind::Continuous { spline: false };
        for tag in parts {
            match tag.trim() {
                "continuous" => {}
                "ordinal" => kind = PredictorKind::Ordinal,
                "spline" => match kind {
                    PredictorKind::Continuous { .. } => {
                        kind = PredictorKind::Continuous { spline: true }
                    }
                    PredictorKind::Ordinal => {
                        return Err(Error::Config(format!(
                            "predictor `{name}`: ordinal columns cannot take a spline"
                        )))
                    }
                },
                other => {
                    return Err(Error::Config(format!("predictor `{name}`: unknown tag `{other}`")))
                }
            }
        }
        if out.iter().any(|p| p.name == name) {
            return Err(Error::Config(format!("predictor `{name}` listed twice")));
        }
        out.push(PredictorSpec { name, kind });
    }
    Ok(out)
}

/// Parse the model list: `all` or comma-separated `dataset:algorithm` pairs.
/// Dataset aliases: none/unadjusted, rus/undersampled, ros/oversampled,
/// smote. Algorithm aliases: slr/standard, ridge.
pub fn parse_methods(value: &str) -> Result<Vec<(DatasetKind, Algorithm)>> {
    if value == "all" {
        return Ok(default_methods());
    }
    let mut out = Vec::new();
    for item in value.split(',') {
        let item = item.trim();
        let (d, a) = item
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("method `{item}`: expected dataset:algorithm")))?;
        let dataset = match d.trim() {
            "none" | "unadjusted" => DatasetKind::Unadjusted,
            "rus" | "undersampled" => DatasetKind::Undersampled,
            "ros" | "oversampled" => DatasetKind::Oversampled,
            "smote" => DatasetKind::Smote,
            other => return Err(Error::Config(format!("unknown dataset `{other}`"))),
        };
        let algorithm = match a.trim() {
            "slr" | "standard" => Algorithm::Standard,
            "ridge" => Algorithm::Ridge,
            other => return Err(Error::Config(format!("unknown algorithm `{other}`"))),
        };
        if !out.contains(&(dataset, algorithm)) {
            out.push((dataset, algorithm));
        }
    }
    if out.is_empty() {
        return Err(Error::Config("empty method list".into()));
    }
    Ok(out)
}

fn default_methods() -> Vec<(DatasetKind, Algorithm)> {
    let mut out = Vec::new();
    for dataset in DatasetKind::ALL {
        for algorithm in Algorithm::ALL {
            out.push((dataset, algorithm));
        }
    }
    out
}

/// Parse `a:b` split ratios into the training fraction a/(a+b).
pub fn parse_split_ratio(value: &str) -> Result<f64> {
    let (a, b) = value
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("split ratio `{value}`: expected a:b")))?;
    let a: f64 = a.trim().parse().map_err(|_| Error::Config(format!("split ratio `{value}`")))?;
    let b: f64 = b.trim().parse().map_err(|_| Error::Config(format!("split ratio `{value}`")))?;
    if !(a > 0.0) || !(b > 0.0) {
        return Err(Error::Config(format!("split ratio `{value}`: parts must be positive")));
    }
    Ok(a / (a + b))
}

#[derive(Clone, Debug)]
pub struct CaseStudyOptions {
    pub input: Option<PathBuf>,
    pub outcome: Option<String>,
    pub predictors: Vec<PredictorSpec>,
    /// Training fraction of the split (default 4:1 → 0.8).
    pub train_fraction: f64,
    pub split_seed: u64,
    pub stratified: bool,
    /// Fixed probability thresholds applied to every model.
    pub thresholds: Vec<f64>,
    /// Also classify at the training event rate (unadjusted-data models
    /// only, since rebalanced training sets have no meaningful event rate).
    pub train_rate_threshold: bool,
    pub methods: Vec<(DatasetKind, Algorithm)>,
    pub smote_k: usize,
    pub bootstrap: usize,
    pub loess_span: f64,
    pub nb_weight: NetBenefitWeight,
    pub out_dir: PathBuf,
}

impl Default for CaseStudyOptions {
    fn default() -> Self {
        CaseStudyOptions {
            input: None,
            outcome: None,
            predictors: Vec::new(),
            train_fraction: 0.8,
            split_seed: 1,
            stratified: false,
            thresholds: vec![0.5],
            train_rate_threshold: true,
            methods: default_methods(),
            smote_k: 5,
            bootstrap: 1000,
            loess_span: 0.75,
            nb_weight: NetBenefitWeight::ThresholdOdds,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl CaseStudyOptions {
    /// Apply one configuration key. Unknown keys are an error.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "input" => self.input = Some(PathBuf::from(value)),
            "outcome" => self.outcome = Some(value.to_string()),
            "predictors" => self.predictors = parse_predictors(value)?,
            "split_ratio" => self.train_fraction = parse_split_ratio(value)?,
            "split_seed" => {
                self.split_seed =
                    value.parse().map_err(|_| Error::Config(format!("split_seed `{value}`")))?
            }
            "stratified" => self.stratified = super::config::parse_bool(key, value)?,
            "thresholds" => {
                self.thresholds.clear();
                self.train_rate_threshold = false;
                for item in value.split(',') {
                    let item = item.trim();
                    if item == "train_rate" {
                        self.train_rate_threshold = true;
                    } else {
                        let t: f64 = item
                            .parse()
                            .map_err(|_| Error::Config(format!("threshold `{item}`")))?;
                        if !(0.0..=1.0).contains(&t) {
                            return Err(Error::Config(format!("threshold {t} outside [0, 1]")));
                        }
                        self.thresholds.push(t);
                    }
                }
            }
            "methods" => self.methods = parse_methods(value)?,
            "smote_k" => {
                self.smote_k =
                    value.parse().map_err(|_| Error::Config(format!("smote_k `{value}`")))?
            }
            "bootstrap" => {
                self.bootstrap =
                    value.parse().map_err(|_| Error::Config(format!("bootstrap `{value}`")))?
            }
            "loess_span" => {
                self.loess_span =
                    value.parse().map_err(|_| Error::Config(format!("loess_span `{value}`")))?
            }
            "nb_weight" => self.nb_weight = super::config::parse_nb_weight(key, value)?,
            "out" => self.out_dir = PathBuf::from(value),
            other => return Err(Error::Config(format!("unknown configuration key `{other}`"))),
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        for (k, v) in super::config::parse_kv_file(path)? {
            self.apply_kv(&k, &v)?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Ingestion
// ---------------------------------------------------------------------------

pub struct Cohort {
    pub data: Dataset,
    pub predictors: Vec<PredictorSpec>,
}

fn column_index(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers.iter().position(|h| h == name).ok_or_else(|| {
        Error::Ingest(format!(
            "{}: no column named `{name}`; available columns: {}",
            path.display(),
            headers.iter().collect::<Vec<_>>().join(", ")
        ))
    })
}

/// Read the cohort CSV, keeping only the outcome and the configured
/// predictor columns (in configuration order).
pub fn load_cohort(opts: &CaseStudyOptions) -> Result<Cohort> {
    let path =
        opts.input.as_ref().ok_or_else(|| Error::Config("no input file configured".into()))?;
    let outcome_name = opts
        .outcome
        .as_ref()
        .ok_or_else(|| Error::Config("no outcome column configured".into()))?;
    if opts.predictors.is_empty() {
        return Err(Error::Config("no predictor columns configured".into()));
    }

    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Ingest(format!("{}: {e}", path.display())))?;
    let headers =
        reader.headers().map_err(|e| Error::Ingest(format!("{}: {e}", path.display())))?.clone();
    let outcome_col = column_index(&headers, outcome_name, path)?;
    let pred_cols: Vec<usize> = opts
        .predictors
        .iter()
        .map(|p| column_index(&headers, &p.name, path))
        .collect::<Result<_>>()?;

    let mut y: Vec<u8> = Vec::new();
    let mut x_rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec =
            rec.map_err(|e| Error::Ingest(format!("{}: data row {row}: {e}", path.display())))?;
        let outcome_cell = rec.get(outcome_col).unwrap_or_default();
        y.push(match outcome_cell.trim() {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::Ingest(format!(
                    "{}: data row {row}, column `{outcome_name}`: outcome must be 0 or 1, found `{other}`",
                    path.display()
                )))
            }
        });
        let mut xr = Vec::with_capacity(pred_cols.len());
        for (spec, &c) in opts.predictors.iter().zip(&pred_cols) {
            let cell = rec.get(c).unwrap_or_default().trim();
            let v: f64 = cell.parse().map_err(|_| {
                Error::Ingest(format!(
                    "{}: data row {row}, column `{}`: `{cell}` is not a number",
                    path.display(),
                    spec.name
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Ingest(format!(
                    "{}: data row {row}, column `{}`: non-finite value",
                    path.display(),
                    spec.name
                )));
            }
            xr.push(v);
        }
        x_rows.push(xr);
    }

    if x_rows.len() < 50 {
        return Err(Error::DegenerateInput(format!(
            "cohort has {} rows; at least 50 are required",
            x_rows.len()
        )));
    }
    let x = Matrix::from_rows(&x_rows)?;

    let mut kinds = Vec::with_capacity(opts.predictors.len());
    for (j, spec) in opts.predictors.iter().enumerate() {
        let mut distinct = x.column(j);
        distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
        distinct.dedup();
        if distinct.len() < 2 {
            return Err(Error::DegenerateInput(format!("column `{}` is constant", spec.name)));
        }
        kinds.push(match spec.kind {
            PredictorKind::Continuous { .. } => FeatureKind::Continuous,
            PredictorKind::Ordinal => FeatureKind::Ordinal { levels: distinct },
        });
    }

    let data = Dataset::new(x, y, kinds)?;
    Ok(Cohort { data, predictors: opts.predictors.clone() })
}

// ---------------------------------------------------------------------------
// Split and feature pipeline
// ---------------------------------------------------------------------------

/// Training/test row indices (each ascending). The training side takes
/// ⌈fraction·N⌉ rows; with stratification the same rule applies to the event
/// rows, and the non-event count makes up the difference.
pub fn split_indices(
    y: &[u8],
    fraction: f64,
    stratified: bool,
    stream: &mut RngStream,
) -> (Vec<usize>, Vec<usize>) {
    let n = y.len();
    let n_train = ((fraction * n as f64).ceil() as usize).min(n);
    let mut train: Vec<usize>;
    if stratified {
        let mut events: Vec<usize> = (0..n).filter(|&i| y[i] == 1).collect();
        let mut nonevents: Vec<usize> = (0..n).filter(|&i| y[i] == 0).collect();
        events.shuffle(stream);
        nonevents.shuffle(stream);
        let ev_take = ((fraction * events.len() as f64).ceil() as usize).min(events.len());
        let ne_take = (n_train - ev_take).min(nonevents.len());
        train = events[..ev_take].to_vec();
        train.extend_from_slice(&nonevents[..ne_take]);
    } else {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(stream);
        train = perm[..n_train].to_vec();
    }
    train.sort_unstable();
    let mut in_train = vec![false; n];
    for &i in &train {
        in_train[i] = true;
    }
    let test: Vec<usize> = (0..n).filter(|&i| !in_train[i]).collect();
    (train, test)
}

/// Column-affine rescaling of the continuous predictors to training z-scores.
/// SMOTE neighbour geometry depends on column scales, so the rebalancing
/// happens in this standardized space; logistic fits and probability-scale
/// metrics are unaffected by any affine change of the inputs.
struct ColumnScaler {
    mean: Vec<f64>,
    sd: Vec<f64>,
}

impl ColumnScaler {
    fn fit(train: &Dataset) -> ColumnScaler {
        let (n, p) = (train.n(), train.p());
        let mut mean = vec![0.0; p];
        let mut sd = vec![1.0; p];
        for j in 0..p {
            if !matches!(train.kinds()[j], FeatureKind::Continuous) {
                continue;
            }
            let col = train.x().column(j);
            let m = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
            mean[j] = m;
            if var > 0.0 {
                sd[j] = var.sqrt();
            }
        }
        ColumnScaler { mean, sd }
    }

    fn apply(&self, ds: &Dataset) -> Dataset {
        let (n, p) = (ds.n(), ds.p());
        let mut x = ds.x().clone();
        let kinds = ds.kinds().to_vec();
        for (j, kind) in kinds.iter().enumerate().take(p) {
            if !matches!(kind, FeatureKind::Continuous) {
                continue;
            }
            for i in 0..n {
                x.set(i, j, (x.get(i, j) - self.mean[j]) / self.sd[j]);
            }
        }
        // Ordinal levels are untouched, so kinds stay valid.
        Dataset::new(x, ds.y().to_vec(), kinds).expect("affine rescale keeps the dataset valid")
    }
}

/// Spline expansion plan: knots are placed once, on the unadjusted training
/// data, and the same basis is applied to every rebalanced training set and
/// to the test set so all models share one feature space.
struct FeaturePlan {
    bases: Vec<Option<RcsBasis>>,
}

impl FeaturePlan {
    fn fit(train: &Dataset, predictors: &[PredictorSpec]) -> Result<FeaturePlan> {
        let mut bases = Vec::with_capacity(predictors.len());
        for (j, spec) in predictors.iter().enumerate() {
            if let PredictorKind::Continuous { spline: true } = spec.kind {
                let basis = RcsBasis::from_data(&train.x().column(j))
                    .map_err(|e| Error::DegenerateInput(format!("column `{}`: {e}", spec.name)))?;
                bases.push(Some(basis));
            } else {
                bases.push(None);
            }
        }
        Ok(FeaturePlan { bases })
    }

    fn expand(&self, x: &Matrix) -> Matrix {
        let n = x.rows();
        let width: usize = self.bases.iter().map(|b| if b.is_some() { 2 } else { 1 }).sum();
        let mut out = Matrix::zeros(n, width);
        for i in 0..n {
            let mut c = 0;
            for (j, basis) in self.bases.iter().enumerate() {
                let v = x.get(i, j);
                match basis {
                    Some(b) => {
                        let cols = b.expand(v);
                        out.set(i, c, cols[0]);
                        out.set(i, c + 1, cols[1]);
                        c += 2;
                    }
                    None => {
                        out.set(i, c, v);
                        c += 1;
                    }
                }
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// Point estimate with a percentile bootstrap interval.
#[derive(Clone, Copy, Debug)]
pub struct Estimate {
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

fn estimate(value: f64, draws: &[f64]) -> Estimate {
    if draws.is_empty() {
        return Estimate { value, lo: value, hi: value };
    }
    Estimate { value, lo: quantile(draws, 0.025).unwrap(), hi: quantile(draws, 0.975).unwrap() }
}

#[derive(Clone, Debug)]
pub struct ThresholdReport {
    pub label: String,
    pub threshold: f64,
    pub accuracy: Estimate,
    pub sensitivity: Option<Estimate>,
    pub specificity: Option<Estimate>,
}

#[derive(Clone, Debug)]
pub struct EvaluatedModel {
    pub auroc: Estimate,
    pub calib_intercept: Estimate,
    pub calib_slope: Option<Estimate>,
    pub thresholds: Vec<ThresholdReport>,
    pub calibration_curve: Vec<(f64, f64)>,
    pub decision_curve: Vec<(f64, f64)>,
    /// Ridge penalty chosen by cross-validation (ridge models only).
    pub lambda: Option<f64>,
}

#[derive(Clone, Debug)]
pub enum ModelOutcome {
    Evaluated(Box<EvaluatedModel>),
    Excluded(ExclusionReason),
}

#[derive(Clone, Debug)]
pub struct CaseModelResult {
    pub dataset: DatasetKind,
    pub algorithm: Algorithm,
    pub outcome: ModelOutcome,
}

#[derive(Clone, Debug)]
pub struct CaseStudyReport {
    pub n_total: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub train_events: usize,
    pub test_events: usize,
    pub train_event_rate: f64,
    pub models: Vec<CaseModelResult>,
    /// Decision-curve threshold grid and the treat-all reference on it.
    pub nb_grid: Vec<f64>,
    pub treat_all: Vec<(f64, f64)>,
}

/// Smoothed observed-event-rate curve over a grid spanning the central 99%
/// of the predicted probabilities, clamped to the unit interval.
pub fn calibration_curve(ps: &PredictionSet, span: f64) -> Result<Vec<(f64, f64)>> {
    let probs = ps.probabilities();
    let lo = quantile(probs, 0.005).ok_or_else(|| {
        Error::DegenerateInput("calibration curve from an empty prediction set".into())
    })?;
    let hi = quantile(probs, 0.995).unwrap();
    let grid: Vec<f64> = if hi > lo {
        (0..100).map(|i| lo + (hi - lo) * i as f64 / 99.0).collect()
    } else {
        vec![lo]
    };
    let outcomes: Vec<f64> = ps.outcomes().iter().map(|&v| v as f64).collect();
    let fitted = loess::smooth(probs, &outcomes, &grid, &LoessConfig { span })?;
    Ok(grid.into_iter().zip(fitted).map(|(x, y)| (x, y.clamp(0.0, 1.0))).collect())
}

/// Net-benefit curve of a prediction set on a fixed threshold grid.
fn decision_points(
    ps: &PredictionSet,
    grid: &[f64],
    weight: NetBenefitWeight,
) -> Result<Vec<(f64, f64)>> {
    grid.iter().map(|&t| Ok((t, metrics::net_benefit(ps, t, weight)?))).collect()
}

fn gather_ps(ps: &PredictionSet, idx: &[usize]) -> PredictionSet {
    let lp: Vec<f64> = idx.iter().map(|&i| ps.linear_predictors()[i]).collect();
    let y: Vec<u8> = idx.iter().map(|&i| ps.outcomes()[i]).collect();
    PredictionSet::from_linear_predictors(lp, y).expect("resampled predictions stay finite")
}

struct ThresholdPlan {
    label: String,
    threshold: f64,
    unadjusted_only: bool,
}

/// Evaluation inputs shared by every model: the threshold plans, the paired
/// bootstrap draws, and the decision/calibration-curve settings.
struct EvalContext {
    plans: Vec<ThresholdPlan>,
    boots: Vec<Vec<usize>>,
    nb_grid: Vec<f64>,
    nb_weight: NetBenefitWeight,
    loess_span: f64,
}

fn evaluate_model(
    ps: &PredictionSet,
    dataset: DatasetKind,
    eval: &EvalContext,
    lambda: Option<f64>,
) -> Result<EvaluatedModel> {
    let auroc = metrics::auroc(ps)?;
    let intercept = metrics::calibration_intercept(ps)?;
    let slope = metrics::calibration_slope(ps).ok();

    let mut auroc_draws = Vec::with_capacity(eval.boots.len());
    let mut int_draws = Vec::with_capacity(eval.boots.len());
    let mut slope_draws = Vec::with_capacity(eval.boots.len());
    let mut thr_draws: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> =
        eval.plans.iter().map(|_| (Vec::new(), Vec::new(), Vec::new())).collect();
    for idx in &eval.boots {
        let bps = gather_ps(ps, idx);
        if let Ok(v) = metrics::auroc(&bps) {
            auroc_draws.push(v);
        }
        if let Ok(v) = metrics::calibration_intercept(&bps) {
            int_draws.push(v);
        }
        if let Ok(v) = metrics::calibration_slope(&bps) {
            slope_draws.push(v);
        }
        for (plan, (acc, sens, spec)) in eval.plans.iter().zip(&mut thr_draws) {
            if plan.unadjusted_only && dataset != DatasetKind::Unadjusted {
                continue;
            }
            let c = metrics::confusion_at(&bps, plan.threshold);
            acc.push(c.accuracy());
            if let Some(v) = c.sensitivity() {
                sens.push(v);
            }
            if let Some(v) = c.specificity() {
                spec.push(v);
            }
        }
    }

    let mut thresholds = Vec::new();
    for (plan, (acc_d, sens_d, spec_d)) in eval.plans.iter().zip(&thr_draws) {
        if plan.unadjusted_only && dataset != DatasetKind::Unadjusted {
            continue;
        }
        let c = metrics::confusion_at(ps, plan.threshold);
        thresholds.push(ThresholdReport {
            label: plan.label.clone(),
            threshold: plan.threshold,
            accuracy: estimate(c.accuracy(), acc_d),
            sensitivity: c.sensitivity().map(|v| estimate(v, sens_d)),
            specificity: c.specificity().map(|v| estimate(v, spec_d)),
        });
    }

    Ok(EvaluatedModel {
        auroc: estimate(auroc, &auroc_draws),
        calib_intercept: estimate(intercept, &int_draws),
        calib_slope: slope.map(|s| estimate(s, &slope_draws)),
        thresholds,
        calibration_curve: calibration_curve(ps, eval.loess_span)?,
        decision_curve: decision_points(ps, &eval.nb_grid, eval.nb_weight)?,
        lambda,
    })
}

/// Run the whole pipeline. Models appear dataset-major with the standard
/// algorithm before ridge, restricted to the configured method list.
pub fn run_casestudy(opts: &CaseStudyOptions) -> Result<CaseStudyReport> {
    let cohort = load_cohort(opts)?;
    run_casestudy_on(opts, &cohort)
}

/// Pipeline body, separated so tests can inject an in-memory cohort.
pub fn run_casestudy_on(opts: &CaseStudyOptions, cohort: &Cohort) -> Result<CaseStudyReport> {
    let data = &cohort.data;
    let n = data.n();
    let mut split_stream = RngStream::derive(opts.split_seed, &[stage::PURPOSE, stage::SPLIT]);
    let (train_idx, test_idx) =
        split_indices(data.y(), opts.train_fraction, opts.stratified, &mut split_stream);
    if train_idx.is_empty() || test_idx.is_empty() {
        return Err(Error::DegenerateInput("split leaves an empty training or test set".into()));
    }
    let train_raw = data.subset(&train_idx);
    let test_raw = data.subset(&test_idx);
    let train_events = train_raw.n_events();
    if train_events == 0 || train_events == train_raw.n() {
        return Err(Error::DegenerateInput(
            "training split contains a single outcome class".into(),
        ));
    }
    let train_event_rate = train_raw.event_fraction();

    // Shared feature space: training z-scores for the continuous columns,
    // spline knots from the unadjusted training data.
    let scaler = ColumnScaler::fit(&train_raw);
    let train = scaler.apply(&train_raw);
    let test = scaler.apply(&test_raw);
    let plan = FeaturePlan::fit(&train, &cohort.predictors)?;
    let test_x = plan.expand(test.x());

    let mut plans: Vec<ThresholdPlan> = opts
        .thresholds
        .iter()
        .map(|&t| ThresholdPlan {
            label: format!("t={}", crate::report::fmt_short(t)),
            threshold: t,
            unadjusted_only: false,
        })
        .collect();
    if opts.train_rate_threshold {
        plans.push(ThresholdPlan {
            label: format!("t=train_rate({})", crate::report::fmt_short(train_event_rate)),
            threshold: train_event_rate,
            unadjusted_only: true,
        });
    }

    // Paired bootstrap: the same test-row draws evaluate every model.
    let mut boot_stream = RngStream::derive(opts.split_seed, &[stage::PURPOSE, stage::BOOTSTRAP]);
    let boots: Vec<Vec<usize>> = (0..opts.bootstrap)
        .map(|_| (0..test.n()).map(|_| boot_stream.random_range(0..test.n())).collect())
        .collect();

    let nb_grid: Vec<f64> = (0..=50).map(|i| i as f64 / 100.0).collect();
    let treat_all: Vec<(f64, f64)> = nb_grid
        .iter()
        .map(|&t| (t, metrics::net_benefit_treat_all(test.event_fraction(), t, opts.nb_weight)))
        .collect();
    let eval = EvalContext {
        plans,
        boots,
        nb_grid,
        nb_weight: opts.nb_weight,
        loess_span: opts.loess_span,
    };

    let mut models = Vec::new();
    for (di, dataset) in DatasetKind::ALL.into_iter().enumerate() {
        let wanted: Vec<Algorithm> =
            Algorithm::ALL.into_iter().filter(|a| opts.methods.contains(&(dataset, *a))).collect();
        if wanted.is_empty() {
            continue;
        }
        let mut push_all = |outcome: &ModelOutcome| {
            for &algorithm in &wanted {
                models.push(CaseModelResult { dataset, algorithm, outcome: outcome.clone() });
            }
        };

        let built: Result<Dataset> = match dataset {
            DatasetKind::Unadjusted => Ok(train.clone()),
            DatasetKind::Undersampled => {
                let mut s =
                    RngStream::derive(opts.split_seed, &[stage::PURPOSE, stage::UNDERSAMPLE]);
                resample::undersample(&train, &mut s)
            }
            DatasetKind::Oversampled => {
                let mut s =
                    RngStream::derive(opts.split_seed, &[stage::PURPOSE, stage::OVERSAMPLE]);
                resample::oversample(&train, &mut s)
            }
            DatasetKind::Smote => {
                let mut s = RngStream::derive(opts.split_seed, &[stage::PURPOSE, stage::SMOTE]);
                resample::smote(&train, opts.smote_k, &mut s)
            }
        };
        let ds = match built {
            Ok(ds) => ds,
            Err(e) => {
                push_all(&ModelOutcome::Excluded(exclusion_for(&e)));
                continue;
            }
        };

        // Fit in the expanded feature space.
        let fit_ds = Dataset::new(
            plan.expand(ds.x()),
            ds.y().to_vec(),
            vec![FeatureKind::Continuous; test_x.cols()],
        )?;
        let fit_opts = glm::FitOptions::default();
        let ml = match glm::fit_ml(&fit_ds, &fit_opts) {
            Ok(m) => m,
            Err(e) => {
                push_all(&ModelOutcome::Excluded(exclusion_for(&e)));
                continue;
            }
        };
        match glm::detect_separation(&ml, &fit_ds) {
            Ok(false) => {}
            Ok(true) => {
                push_all(&ModelOutcome::Excluded(ExclusionReason::Separation));
                continue;
            }
            Err(e) => {
                push_all(&ModelOutcome::Excluded(exclusion_for(&e)));
                continue;
            }
        }

        for &algorithm in &wanted {
            let fitted: Result<(glm::FittedModel, Option<f64>)> = match algorithm {
                Algorithm::Standard => {
                    if ml.converged {
                        Ok((ml.clone(), None))
                    } else {
                        Err(Error::NonConvergence("maximum-likelihood fit".into()))
                    }
                }
                Algorithm::Ridge => {
                    let mut s = RngStream::derive(
                        opts.split_seed,
                        &[stage::PURPOSE, stage::RIDGE_CV_BASE + di as u64],
                    );
                    glm::fit_ridge_cv(&fit_ds, &glm::RidgeConfig::default(), &mut s, &fit_opts)
                        .and_then(|rf| {
                            if rf.model.converged {
                                let lambda = rf.model.lambda;
                                Ok((rf.model, Some(lambda)))
                            } else {
                                Err(Error::NonConvergence("ridge fit".into()))
                            }
                        })
                }
            };
            let outcome = match fitted {
                Err(e) => ModelOutcome::Excluded(exclusion_for(&e)),
                Ok((model, lambda)) => {
                    let lp = model.linear_predictor(&test_x);
                    let ps = PredictionSet::from_linear_predictors(lp, test.y().to_vec())?;
                    ModelOutcome::Evaluated(Box::new(evaluate_model(&ps, dataset, &eval, lambda)?))
                }
            };
            models.push(CaseModelResult { dataset, algorithm, outcome });
        }
    }

    Ok(CaseStudyReport {
        n_total: n,
        n_train: train_idx.len(),
        n_test: test_idx.len(),
        train_events,
        test_events: test.n_events(),
        train_event_rate,
        models,
        nb_grid: eval.nb_grid,
        treat_all,
    })
}

fn exclusion_for(e: &Error) -> ExclusionReason {
    match e {
        Error::NonConvergence(_) => ExclusionReason::NonConvergence,
        _ => ExclusionReason::OneClass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predictor_and_method_parsing() {
        let preds =
            parse_predictors("age:continuous:spline, diameter:spline, papillary:ordinal, z")
                .unwrap();
        assert_eq!(preds.len(), 4);
        assert_eq!(preds[0].kind, PredictorKind::Continuous { spline: true });
        assert_eq!(preds[1].kind, PredictorKind::Continuous { spline: true });
        assert_eq!(preds[2].kind, PredictorKind::Ordinal);
        assert_eq!(preds[3].kind, PredictorKind::Continuous { spline: false });
        assert!(parse_predictors("a:ordinal:spline").is_err());
        assert!(parse_predictors("a,a").is_err());

        assert_eq!(parse_methods("all").unwrap().len(), 8);
        let m = parse_methods("none:slr, rus:ridge").unwrap();
        assert_eq!(
            m,
            vec![
                (DatasetKind::Unadjusted, Algorithm::Standard),
                (DatasetKind::Undersampled, Algorithm::Ridge),
            ]
        );
        assert!(parse_methods("rus").is_err());
        assert!(parse_methods("rus:boost").is_err());

        assert!((parse_split_ratio("4:1").unwrap() - 0.8).abs() < 1e-12);
        assert!(parse_split_ratio("4").is_err());
        assert!(parse_split_ratio("0:1").is_err());
    }

    #[test]
    fn split_sizes_follow_ceiling_rule() {
        let y: Vec<u8> = (0..3369).map(|i| u8::from(i % 5 == 0)).collect();
        let mut s = RngStream::derive(1, &[stage::PURPOSE, stage::SPLIT]);
        let (train, test) = split_indices(&y, 0.8, false, &mut s);
        assert_eq!(train.len(), 2696); // ⌈0.8 · 3369⌉
        assert_eq!(test.len(), 673);
        assert!(train.windows(2).all(|w| w[0] < w[1]));
        assert!(test.windows(2).all(|w| w[0] < w[1]));
        let mut all: Vec<usize> = train.iter().chain(test.iter()).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..3369).collect::<Vec<_>>());

        // Same seed → same split; different seed → different split.
        let mut s2 = RngStream::derive(1, &[stage::PURPOSE, stage::SPLIT]);
        let again = split_indices(&y, 0.8, false, &mut s2);
        assert_eq!(again.0, train);
        let mut s3 = RngStream::derive(2, &[stage::PURPOSE, stage::SPLIT]);
        assert_ne!(split_indices(&y, 0.8, false, &mut s3).0, train);
    }

    #[test]
    fn stratified_split_preserves_class_balance() {
        let y: Vec<u8> = (0..1000).map(|i| u8::from(i < 100)).collect();
        let mut s = RngStream::derive(5, &[stage::PURPOSE, stage::SPLIT]);
        let (train, _) = split_indices(&y, 0.8, true, &mut s);
        assert_eq!(train.len(), 800);
        let events = train.iter().filter(|&&i| y[i] == 1).count();
        assert_eq!(events, 80); // ⌈0.8 · 100⌉
    }

    #[test]
    fn config_keys_apply() {
        let mut opts = CaseStudyOptions::default();
        opts.apply_kv("input", "cohort.csv").unwrap();
        opts.apply_kv("outcome", "cancer").unwrap();
        opts.apply_kv("predictors", "age:spline,papillary:ordinal").unwrap();
        opts.apply_kv("split_ratio", "3:1").unwrap();
        opts.apply_kv("thresholds", "0.5,0.3,train_rate").unwrap();
        opts.apply_kv("methods", "none:slr,smote:ridge").unwrap();
        assert_eq!(opts.train_fraction, 0.75);
        assert_eq!(opts.thresholds, vec![0.5, 0.3]);
        assert!(opts.train_rate_threshold);
        assert_eq!(opts.methods.len(), 2);
        assert!(opts.apply_kv("bogus", "1").is_err());
        assert!(opts.apply_kv("thresholds", "1.5").is_err());
    }
}
