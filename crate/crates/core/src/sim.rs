//! Monte Carlo orchestration: the scenario grid, the per-run pipeline
//! (generate, rebalance, fit, score), and aggregation across runs.
//!
//! Every run produces one record per model variant: four training datasets
//! (unadjusted, undersampled, oversampled, SMOTE) × two algorithms
//! (standard and ridge logistic regression), plus intercept-recalibrated
//! versions of the six corrected-data models — 14 records in all. Records
//! for models that cannot be evaluated (separated training data,
//! non-converged fits, degenerate inputs) carry an exclusion reason and
//! empty metrics.
//!
//! Reproducibility: all randomness flows through [`RngStream`] paths of the
//! form (purpose, scenario, run, stage), so results are identical for any
//! worker count and any execution order.

use crate::data::{Dataset, PredictionSet};
use crate::datagen::{self, DgmSpec};
use crate::error::{Error, Result};
use crate::glm::{self, FitOptions, RidgeConfig};
use crate::metrics;
use crate::resample;
use crate::rng::RngStream;
use rayon::prelude::*;

/// Stream path purposes (first path element).
pub mod purpose {
    /// Shared test set of a scenario: path [TEST_SET, scenario_id].
    pub const TEST_SET: u64 = 0;
    /// Per-run stages: path [RUN, scenario_id, run_id, stage].
    pub const RUN: u64 = 1;
    /// Coefficient solving: path [DGM_SOLVE, p, round(ef · 1e6), ...].
    pub const DGM_SOLVE: u64 = 2;
}

/// Per-run stage ids (fourth path element under [`purpose::RUN`]).
pub mod stage {
    pub const TRAIN: u64 = 0;
    pub const UNDERSAMPLE: u64 = 1;
    pub const OVERSAMPLE: u64 = 2;
    pub const SMOTE: u64 = 3;
    /// Ridge CV fold shuffling: RIDGE_CV_BASE + dataset index.
    pub const RIDGE_CV_BASE: u64 = 5;
}

pub const TARGET_AUROC: f64 = 0.75;
/// Replication counts of the original study design.
pub const FULL_RUNS: u32 = 2000;
pub const FULL_TEST_N: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DatasetKind {
    Unadjusted,
    Undersampled,
    Oversampled,
    Smote,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 4] = [
        DatasetKind::Unadjusted,
        DatasetKind::Undersampled,
        DatasetKind::Oversampled,
        DatasetKind::Smote,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::Unadjusted => "unadjusted",
            DatasetKind::Undersampled => "undersampled",
            DatasetKind::Oversampled => "oversampled",
            DatasetKind::Smote => "smote",
        }
    }

    pub fn from_name(s: &str) -> Option<DatasetKind> {
        DatasetKind::ALL.into_iter().find(|k| k.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Standard,
    Ridge,
}

impl Algorithm {
    pub const ALL: [Algorithm; 2] = [Algorithm::Standard, Algorithm::Ridge];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Standard => "standard",
            Algorithm::Ridge => "ridge",
        }
    }

    pub fn from_name(s: &str) -> Option<Algorithm> {
        Algorithm::ALL.into_iter().find(|a| a.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExclusionReason {
    /// The training dataset was separated (apparent AUROC of its ML fit
    /// is 1); every model on that dataset is excluded.
    Separation,
    /// The fit ran out of iterations without separation.
    NonConvergence,
    /// Degenerate input, e.g. a single-class training draw.
    OneClass,
}

impl ExclusionReason {
    pub fn name(self) -> &'static str {
        match self {
            ExclusionReason::Separation => "separation",
            ExclusionReason::NonConvergence => "non_convergence",
            ExclusionReason::OneClass => "one_class",
        }
    }

    pub fn from_name(s: &str) -> Option<ExclusionReason> {
        [ExclusionReason::Separation, ExclusionReason::NonConvergence, ExclusionReason::OneClass]
            .into_iter()
            .find(|r| r.name() == s)
    }
}

/// One of the 14 model variants evaluated per run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ModelKey {
    pub dataset: DatasetKind,
    pub algorithm: Algorithm,
    pub recalibrated: bool,
}

/// The 14 model variants in their fixed record order: the eight raw models
/// (dataset-major, standard before ridge), then the six recalibrated
/// corrected-data models in the same order.
pub fn model_keys() -> Vec<ModelKey> {
    let mut keys = Vec::with_capacity(14);
    for dataset in DatasetKind::ALL {
        for algorithm in Algorithm::ALL {
            keys.push(ModelKey { dataset, algorithm, recalibrated: false });
        }
    }
    for dataset in &DatasetKind::ALL[1..] {
        for algorithm in Algorithm::ALL {
            keys.push(ModelKey { dataset: *dataset, algorithm, recalibrated: true });
        }
    }
    keys
}

/// Position of a model variant in the fixed record order of [`model_keys`].
pub fn key_slot(key: &ModelKey) -> usize {
    let di = DatasetKind::ALL.iter().position(|k| k == &key.dataset).unwrap();
    let ai = Algorithm::ALL.iter().position(|a| a == &key.algorithm).unwrap();
    if key.recalibrated {
        8 + (di - 1) * 2 + ai
    } else {
        di * 2 + ai
    }
}

/// Performance of one model variant in one run. `None` metrics are not
/// applicable (excluded model, or a threshold block that only exists for
/// the unadjusted dataset).
#[derive(Clone, Debug, PartialEq)]
pub struct MetricRecord {
    pub scenario_id: u32,
    pub run_id: u32,
    pub key: ModelKey,
    pub auroc: Option<f64>,
    pub calib_intercept: Option<f64>,
    pub calib_slope: Option<f64>,
    pub acc_t50: Option<f64>,
    pub sens_t50: Option<f64>,
    pub spec_t50: Option<f64>,
    pub acc_tef: Option<f64>,
    pub sens_tef: Option<f64>,
    pub spec_tef: Option<f64>,
    pub exclusion_reason: Option<ExclusionReason>,
}

impl MetricRecord {
    fn excluded(
        scenario_id: u32,
        run_id: u32,
        key: ModelKey,
        why: ExclusionReason,
    ) -> MetricRecord {
        MetricRecord {
            scenario_id,
            run_id,
            key,
            auroc: None,
            calib_intercept: None,
            calib_slope: None,
            acc_t50: None,
            sens_t50: None,
            spec_t50: None,
            acc_tef: None,
            sens_tef: None,
            spec_tef: None,
            exclusion_reason: Some(why),
        }
    }
}

/// One cell of the simulation grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scenario {
    pub id: u32,
    pub event_fraction: f64,
    pub n_train: usize,
    pub p: usize,
}

impl Scenario {
    /// The full 24-scenario grid: event fraction varies slowest, then the
    /// training size, then the number of predictors.
    pub fn grid() -> Vec<Scenario> {
        let mut out = Vec::with_capacity(24);
        let mut id = 1;
        for &event_fraction in &[0.01, 0.1, 0.3] {
            for &n_train in &[2500usize, 5000] {
                for &p in &[3usize, 6, 12, 24] {
                    out.push(Scenario { id, event_fraction, n_train, p });
                    id += 1;
                }
            }
        }
        out
    }

    pub fn by_id(id: u32) -> Option<Scenario> {
        Scenario::grid().into_iter().find(|s| s.id == id)
    }
}

/// Settings for a simulation pass. Defaults are the desk-scale settings
/// (200 runs against a 20 000-row test set); the original design used
/// [`FULL_RUNS`] and [`FULL_TEST_N`].
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub master_seed: u64,
    pub n_runs: u32,
    pub n_test: usize,
    pub smote_k: usize,
    pub ridge: RidgeConfig,
    pub fit: FitOptions,
    /// Rayon worker threads; 0 uses the global default pool.
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            master_seed: 1,
            n_runs: 200,
            n_test: 20_000,
            smote_k: 5,
            ridge: RidgeConfig::default(),
            fit: FitOptions::default(),
            workers: 0,
        }
    }
}

/// The scenario's shared test set (one draw reused by every run).
pub fn make_test_set(scenario: &Scenario, spec: &DgmSpec, cfg: &RunConfig) -> Dataset {
    let mut stream = RngStream::derive(cfg.master_seed, &[purpose::TEST_SET, scenario.id as u64]);
    datagen::sample(spec, cfg.n_test, &mut stream)
}

fn run_stream(cfg: &RunConfig, scenario: &Scenario, run_id: u32, stage: u64) -> RngStream {
    RngStream::derive(cfg.master_seed, &[purpose::RUN, scenario.id as u64, run_id as u64, stage])
}

/// Map fitting-layer failures to an exclusion category.
fn exclusion_for(e: &Error) -> ExclusionReason {
    match e {
        Error::NonConvergence(_) => ExclusionReason::NonConvergence,
        _ => ExclusionReason::OneClass,
    }
}

fn measure(
    scenario: &Scenario,
    run_id: u32,
    key: ModelKey,
    ps: &PredictionSet,
    with_ef_threshold: bool,
) -> MetricRecord {
    let c50 = metrics::confusion_at(ps, 0.5);
    let (acc_tef, sens_tef, spec_tef) = if with_ef_threshold {
        let cef = metrics::confusion_at(ps, scenario.event_fraction);
        (Some(cef.accuracy()), cef.sensitivity(), cef.specificity())
    } else {
        (None, None, None)
    };
    MetricRecord {
        scenario_id: scenario.id,
        run_id,
        key,
        auroc: metrics::auroc(ps).ok(),
        calib_intercept: metrics::calibration_intercept(ps).ok(),
        calib_slope: metrics::calibration_slope(ps).ok(),
        acc_t50: Some(c50.accuracy()),
        sens_t50: c50.sensitivity(),
        spec_t50: c50.specificity(),
        acc_tef,
        sens_tef,
        spec_tef,
        exclusion_reason: None,
    }
}

/// Execute one Monte Carlo run and return its 14 records in fixed order.
pub fn run_single(
    scenario: &Scenario,
    spec: &DgmSpec,
    run_id: u32,
    cfg: &RunConfig,
    test: &Dataset,
) -> Vec<MetricRecord> {
    let sid = scenario.id;
    let mut slots: Vec<Option<MetricRecord>> = vec![None; 14];
    let keys = model_keys();

    let mut train_stream = run_stream(cfg, scenario, run_id, stage::TRAIN);
    let train = datagen::sample(spec, scenario.n_train, &mut train_stream);

    for (di, kind) in DatasetKind::ALL.into_iter().enumerate() {
        let built: Result<Dataset> = match kind {
            DatasetKind::Unadjusted => Ok(train.clone()),
            DatasetKind::Undersampled => {
                let mut s = run_stream(cfg, scenario, run_id, stage::UNDERSAMPLE);
                resample::undersample(&train, &mut s)
            }
            DatasetKind::Oversampled => {
                let mut s = run_stream(cfg, scenario, run_id, stage::OVERSAMPLE);
                resample::oversample(&train, &mut s)
            }
            DatasetKind::Smote => {
                let mut s = run_stream(cfg, scenario, run_id, stage::SMOTE);
                resample::smote(&train, cfg.smote_k, &mut s)
            }
        };

        let exclude_dataset = |slots: &mut Vec<Option<MetricRecord>>, why: ExclusionReason| {
            for key in keys.iter().filter(|k| k.dataset == kind) {
                slots[key_slot(key)] = Some(MetricRecord::excluded(sid, run_id, *key, why));
            }
        };

        let ds = match built {
            Ok(ds) => ds,
            Err(e) => {
                exclude_dataset(&mut slots, exclusion_for(&e));
                continue;
            }
        };

        // Separation is a property of the training data, diagnosed through
        // the ML fit; it rules out every model on this dataset.
        let ml = match glm::fit_ml(&ds, &cfg.fit) {
            Ok(m) => m,
            Err(e) => {
                exclude_dataset(&mut slots, exclusion_for(&e));
                continue;
            }
        };
        match glm::detect_separation(&ml, &ds) {
            Ok(true) => {
                exclude_dataset(&mut slots, ExclusionReason::Separation);
                continue;
            }
            Ok(false) => {}
            Err(e) => {
                exclude_dataset(&mut slots, exclusion_for(&e));
                continue;
            }
        }

        let ridge_fit = {
            let mut s = run_stream(cfg, scenario, run_id, stage::RIDGE_CV_BASE + di as u64);
            glm::fit_ridge_cv(&ds, &cfg.ridge, &mut s, &cfg.fit)
        };

        let models: [(Algorithm, Result<glm::FittedModel>); 2] = [
            (
                Algorithm::Standard,
                if ml.converged {
                    Ok(ml.clone())
                } else {
                    Err(Error::NonConvergence("maximum-likelihood fit".into()))
                },
            ),
            (
                Algorithm::Ridge,
                ridge_fit.and_then(|rf| {
                    if rf.model.converged {
                        Ok(rf.model)
                    } else {
                        Err(Error::NonConvergence("ridge fit".into()))
                    }
                }),
            ),
        ];

        for (algorithm, model) in models {
            let raw_key = ModelKey { dataset: kind, algorithm, recalibrated: false };
            let recal_key = ModelKey { dataset: kind, algorithm, recalibrated: true };
            match model {
                Err(e) => {
                    let why = exclusion_for(&e);
                    slots[key_slot(&raw_key)] =
                        Some(MetricRecord::excluded(sid, run_id, raw_key, why));
                    if kind != DatasetKind::Unadjusted {
                        slots[key_slot(&recal_key)] =
                            Some(MetricRecord::excluded(sid, run_id, recal_key, why));
                    }
                }
                Ok(model) => {
                    let test_lp = model.linear_predictor(test.x());
                    let ps = PredictionSet::from_linear_predictors(test_lp, test.y().to_vec())
                        .expect("test predictions are finite");
                    slots[key_slot(&raw_key)] = Some(measure(
                        scenario,
                        run_id,
                        raw_key,
                        &ps,
                        kind == DatasetKind::Unadjusted,
                    ));
                    if kind != DatasetKind::Unadjusted {
                        // Recalibration-in-the-large: refit the intercept on
                        // the *original* (unadjusted) development data.
                        let dev_lp = model.linear_predictor(train.x());
                        let rec = match glm::fit_offset_intercept(&dev_lp, train.y()) {
                            Ok(shift) => {
                                measure(scenario, run_id, recal_key, &ps.shift(shift), false)
                            }
                            Err(e) => {
                                MetricRecord::excluded(sid, run_id, recal_key, exclusion_for(&e))
                            }
                        };
                        slots[key_slot(&recal_key)] = Some(rec);
                    }
                }
            }
        }
    }

    slots.into_iter().map(|s| s.expect("every model slot filled")).collect()
}

/// Run a whole scenario. Records come back sorted by run, then by the fixed
/// model order, and their values do not depend on the worker count.
pub fn run_scenario(
    scenario: &Scenario,
    spec: &DgmSpec,
    cfg: &RunConfig,
) -> Result<Vec<MetricRecord>> {
    let test = make_test_set(scenario, spec, cfg);
    let body = || {
        (0..cfg.n_runs)
            .into_par_iter()
            .map(|run_id| run_single(scenario, spec, run_id, cfg, &test))
            .collect::<Vec<_>>()
    };
    let nested = if cfg.workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
        pool.install(body)
    } else {
        body()
    };
    Ok(nested.into_iter().flatten().collect())
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

/// Median and quartiles of one metric over the included runs of a group.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricSummary {
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub n: usize,
}

fn summarize_values(values: &[f64]) -> Option<MetricSummary> {
    if values.is_empty() {
        return None;
    }
    Some(MetricSummary {
        median: crate::num::quantile(values, 0.5).unwrap(),
        q25: crate::num::quantile(values, 0.25).unwrap(),
        q75: crate::num::quantile(values, 0.75).unwrap(),
        n: values.len(),
    })
}

/// Distribution summary for one (scenario, model variant) group.
#[derive(Clone, Debug)]
pub struct GroupSummary {
    pub scenario_id: u32,
    pub key: ModelKey,
    pub n_runs: usize,
    pub n_included: usize,
    pub n_separation: usize,
    pub n_non_convergence: usize,
    pub n_one_class: usize,
    pub auroc: Option<MetricSummary>,
    pub calib_intercept: Option<MetricSummary>,
    pub calib_slope: Option<MetricSummary>,
    pub acc_t50: Option<MetricSummary>,
    pub sens_t50: Option<MetricSummary>,
    pub spec_t50: Option<MetricSummary>,
    pub acc_tef: Option<MetricSummary>,
    pub sens_tef: Option<MetricSummary>,
    pub spec_tef: Option<MetricSummary>,
}

/// Group records by (scenario, model variant) and summarize each metric
/// over the non-excluded runs. Output order: scenario id, then the fixed
/// model order.
pub fn summarize(records: &[MetricRecord]) -> Vec<GroupSummary> {
    use std::collections::BTreeMap;
    let mut groups: BTreeMap<(u32, usize), Vec<&MetricRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.scenario_id, key_slot(&r.key))).or_default().push(r);
    }
    let keys = model_keys();
    groups
        .into_iter()
        .map(|((scenario_id, slot), rs)| {
            let mut n_sep = 0;
            let mut n_nc = 0;
            let mut n_oc = 0;
            for r in &rs {
                match r.exclusion_reason {
                    Some(ExclusionReason::Separation) => n_sep += 1,
                    Some(ExclusionReason::NonConvergence) => n_nc += 1,
                    Some(ExclusionReason::OneClass) => n_oc += 1,
                    None => {}
                }
            }
            let included: Vec<&&MetricRecord> =
                rs.iter().filter(|r| r.exclusion_reason.is_none()).collect();
            let collect = |f: fn(&MetricRecord) -> Option<f64>| -> Option<MetricSummary> {
                let vals: Vec<f64> = included.iter().filter_map(|r| f(r)).collect();
                summarize_values(&vals)
            };
            GroupSummary {
                scenario_id,
                key: keys[slot],
                n_runs: rs.len(),
                n_included: included.len(),
                n_separation: n_sep,
                n_non_convergence: n_nc,
                n_one_class: n_oc,
                auroc: collect(|r| r.auroc),
                calib_intercept: collect(|r| r.calib_intercept),
                calib_slope: collect(|r| r.calib_slope),
                acc_t50: collect(|r| r.acc_t50),
                sens_t50: collect(|r| r.sens_t50),
                spec_t50: collect(|r| r.spec_t50),
                acc_tef: collect(|r| r.acc_tef),
                sens_tef: collect(|r| r.sens_tef),
                spec_tef: collect(|r| r.spec_tef),
            }
        })
        .collect()
}
