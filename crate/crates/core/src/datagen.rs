//! Data generation for the simulation study.
//!
//! Predictors are i.i.d. standard normal and the outcome follows a logistic
//! model with one shared coefficient: P(y=1 | x) = expit(α + β Σx_j).
//! For each (number of predictors, event fraction) pair the study needs the
//! (α, β) that hit a target event fraction and a target AUROC. Those are
//! found numerically: on a fixed calibration draw of linear-predictor sums
//! the *expected* prevalence and *expected* AUROC are smooth deterministic
//! functions of (α, β), so BFGS applies directly. Restarts and replicate
//! calibration draws are aggregated by coordinate-wise medians, and the
//! result is validated on a fresh sample.

use crate::data::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::glm::FittedModel;
use crate::metrics;
use crate::num::{clamp_prob, expit, logit, median};
use crate::optim::{self, BfgsOptions};
use crate::rng::RngStream;
use rand::Rng;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// Fully specified data-generating model.
#[derive(Clone, Debug, PartialEq)]
pub struct DgmSpec {
    pub p: usize,
    pub intercept: f64,
    pub beta: f64,
}

impl DgmSpec {
    /// The true model as a fitted-model value, so the usual prediction path
    /// applies to oracle probabilities too.
    pub fn model(&self) -> FittedModel {
        FittedModel {
            intercept: self.intercept,
            coefficients: vec![self.beta; self.p],
            lambda: 0.0,
            converged: true,
            iterations: 0,
        }
    }
}

/// Draw `n` observations. Per row: p standard normals, then one uniform
/// for the Bernoulli outcome draw. The order is part of the reproducibility
/// contract.
pub fn sample(spec: &DgmSpec, n: usize, stream: &mut RngStream) -> Dataset {
    let p = spec.p;
    let mut data = Vec::with_capacity(n * p);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let mut s = 0.0;
        for _ in 0..p {
            let v: f64 = stream.sample(rand_distr::StandardNormal);
            data.push(v);
            s += v;
        }
        let pi = expit(spec.intercept + spec.beta * s);
        let u: f64 = stream.random_range(0.0..1.0);
        y.push(u8::from(u < pi));
    }
    Dataset::continuous(Matrix::from_vec(n, p, data), y)
        .expect("generated sample is always well-formed")
}

/// Expected (prevalence, AUROC) of the model expit(a + b·s) over outcomes
/// drawn at fixed linear-predictor sums `s` (must be sorted ascending).
///
/// The AUROC term is the expected concordant-pair count over the expected
/// comparable-pair count: pairs are concordant when the event sits at the
/// higher predicted risk, and tied scores count one half.
pub fn expected_operating_point(intercept: f64, beta: f64, sorted_sums: &[f64]) -> (f64, f64) {
    let n = sorted_sums.len();
    assert!(n >= 2, "need at least two calibration points");
    let total_pi: f64;
    let mut auc = 0.5;
    if beta == 0.0 {
        total_pi = expit(intercept) * n as f64;
    } else {
        // Walk in score-ascending order: ascending s for b > 0, else
        // descending. Accumulate U = Σ π_i · (mass of 1−π below) + ½·ties.
        let mut u = 0.0;
        let mut cum_q = 0.0;
        let mut sum_pi = 0.0;
        let mut sum_piqi = 0.0;
        let mut i = 0;
        let pi_at = |idx: usize| -> f64 {
            let k = if beta > 0.0 { idx } else { n - 1 - idx };
            expit(intercept + beta * sorted_sums[k])
        };
        let s_at = |idx: usize| -> f64 {
            if beta > 0.0 {
                sorted_sums[idx]
            } else {
                sorted_sums[n - 1 - idx]
            }
        };
        while i < n {
            let mut j = i + 1;
            while j < n && s_at(j) == s_at(i) {
                j += 1;
            }
            let mut g_pi = 0.0;
            let mut g_q = 0.0;
            let mut g_piqi = 0.0;
            for k in i..j {
                let pi = pi_at(k);
                g_pi += pi;
                g_q += 1.0 - pi;
                g_piqi += pi * (1.0 - pi);
            }
            u += g_pi * cum_q + 0.5 * (g_pi * g_q - g_piqi);
            cum_q += g_q;
            sum_pi += g_pi;
            sum_piqi += g_piqi;
            i = j;
        }
        total_pi = sum_pi;
        let den = sum_pi * (n as f64 - sum_pi) - sum_piqi;
        if den > 0.0 {
            auc = u / den;
        }
    }
    (total_pi / n as f64, auc)
}

/// Search settings for [`solve_coefficients`].
#[derive(Clone, Debug)]
pub struct SolverConfig {
    /// Calibration points per replicate draw.
    pub n_calibration: usize,
    /// Independent calibration draws; the final answer is the
    /// coordinate-wise median over them.
    pub n_datasets: usize,
    /// BFGS restarts per draw (jittered starts), aggregated by
    /// coordinate-wise median.
    pub n_restarts: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { n_calibration: 100_000, n_datasets: 20, n_restarts: 20 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolvedCoefficients {
    pub p: usize,
    pub event_fraction: f64,
    pub target_auroc: f64,
    pub intercept: f64,
    pub beta: f64,
}

impl SolvedCoefficients {
    pub fn spec(&self) -> DgmSpec {
        DgmSpec { p: self.p, intercept: self.intercept, beta: self.beta }
    }
}

/// Find (α, β > 0) such that the generated data hit `event_fraction` and
/// `target_auroc` in expectation.
pub fn solve_coefficients(
    p: usize,
    event_fraction: f64,
    target_auroc: f64,
    cfg: &SolverConfig,
    parent: &RngStream,
) -> Result<SolvedCoefficients> {
    if p == 0 || !(0.0..1.0).contains(&event_fraction) || event_fraction == 0.0 {
        return Err(Error::Config(format!(
            "invalid solver request: p={p}, event fraction {event_fraction}"
        )));
    }
    if !(0.5..1.0).contains(&target_auroc) {
        return Err(Error::Config(format!("target AUROC {target_auroc} outside (0.5, 1)")));
    }

    // A restart counts as usable below 1e-8 (relative target errors ~1e-4);
    // polishing two orders further costs nothing in accuracy downstream but
    // stops the line search from grinding long past the acceptance bar.
    let opts = BfgsOptions { max_iters: 300, grad_tol: 1e-9, fd_step: 1e-4, value_target: 1e-10 };
    let sd = (p as f64).sqrt();
    let mut per_dataset_a = Vec::with_capacity(cfg.n_datasets);
    let mut per_dataset_b = Vec::with_capacity(cfg.n_datasets);
    let mut best_objective = f64::INFINITY;

    for d in 0..cfg.n_datasets {
        let mut cal_stream = parent.child(&[d as u64, 0]);
        let mut sums: Vec<f64> = (0..cfg.n_calibration)
            .map(|_| sd * cal_stream.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        sums.sort_by(|a, b| a.partial_cmp(b).unwrap());

        let objective = |theta: &[f64]| -> f64 {
            let (prev, auc) = expected_operating_point(theta[0], theta[1], &sums);
            let ep = (prev - event_fraction) / event_fraction;
            let ea = (auc - target_auroc) / target_auroc;
            ep * ep + ea * ea
        };

        let mut jitter_stream = parent.child(&[d as u64, 1]);
        let mut a_hits = Vec::with_capacity(cfg.n_restarts);
        let mut b_hits = Vec::with_capacity(cfg.n_restarts);
        for r in 0..cfg.n_restarts {
            let ja: f64 = jitter_stream.random_range(-0.5..0.5);
            let jb: f64 = jitter_stream.random_range(-0.5..0.5);
            let start = if r == 0 {
                [logit(event_fraction), 0.5]
            } else {
                [logit(event_fraction) + ja, 0.5 * (1.0 + jb)]
            };
            let res = optim::minimize(objective, &start, &opts);
            best_objective = best_objective.min(res.value);
            // Accept a restart when it actually pinned both targets; the
            // negative-beta mirror solution is discarded by convention.
            if res.value < 1e-8 && res.x[1] > 0.0 {
                a_hits.push(res.x[0]);
                b_hits.push(res.x[1]);
            }
        }
        if a_hits.is_empty() {
            return Err(Error::SolverFailure {
                context: format!(
                    "no usable restart for p={p}, event fraction {event_fraction}, draw {d}"
                ),
                best_objective,
            });
        }
        per_dataset_a.push(median(&a_hits).unwrap());
        per_dataset_b.push(median(&b_hits).unwrap());
    }

    Ok(SolvedCoefficients {
        p,
        event_fraction,
        target_auroc,
        intercept: median(&per_dataset_a).unwrap(),
        beta: median(&per_dataset_b).unwrap(),
    })
}

/// Empirical behaviour of a solved model on a fresh sample.
#[derive(Clone, Copy, Debug)]
pub struct ValidationReport {
    pub n: usize,
    pub prevalence: f64,
    pub auroc: f64,
}

/// Draw a fresh sample of size `n` and measure the realised event fraction
/// and the AUROC of the true linear predictor.
pub fn validate(spec: &DgmSpec, n: usize, stream: &mut RngStream) -> Result<ValidationReport> {
    let ds = sample(spec, n, stream);
    let lp = spec.model().linear_predictor(ds.x());
    let auroc = metrics::auroc_from_scores(&lp, ds.y())?;
    Ok(ValidationReport { n, prevalence: ds.event_fraction(), auroc })
}

// ---------------------------------------------------------------------------
// Coefficient cache
// ---------------------------------------------------------------------------

const CACHE_HEADER: &str = "p,event_fraction,target_auroc,intercept,beta";

/// On-disk table of solved coefficients, keyed by
/// (p, event_fraction, target_auroc). Values are stored with 12 significant
/// digits; consumers must use the parsed values, not the full-precision
/// originals, so that a cache round-trip is idempotent.
#[derive(Clone, Debug, Default)]
pub struct CoefficientTable {
    entries: Vec<SolvedCoefficients>,
}

impl CoefficientTable {
    pub fn new() -> CoefficientTable {
        CoefficientTable::default()
    }

    pub fn entries(&self) -> &[SolvedCoefficients] {
        &self.entries
    }

    /// Insert or replace the entry with the same key. The stored value is
    /// immediately put through the serialisation round-trip, so lookups
    /// return exactly what a reload from disk would.
    pub fn upsert(&mut self, c: SolvedCoefficients) {
        let c = round_trip(c);
        match self.entries.iter_mut().find(|e| same_key(e, &c)) {
            Some(e) => *e = c,
            None => self.entries.push(c),
        }
    }

    pub fn find(
        &self,
        p: usize,
        event_fraction: f64,
        target_auroc: f64,
    ) -> Option<SolvedCoefficients> {
        self.entries
            .iter()
            .find(|e| {
                e.p == p && e.event_fraction == event_fraction && e.target_auroc == target_auroc
            })
            .copied()
    }

    pub fn load(path: &Path) -> Result<CoefficientTable> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::Ingest(format!("{}: {e}", path.display())))?;
        let reader = BufReader::new(file);
        let mut entries = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if lineno == 0 {
                if line != CACHE_HEADER {
                    return Err(Error::Ingest(format!(
                        "{}:1: unexpected header '{line}'",
                        path.display()
                    )));
                }
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(Error::Ingest(format!(
                    "{}:{}: expected 5 fields, found {}",
                    path.display(),
                    lineno + 1,
                    fields.len()
                )));
            }
            let col = ["p", "event_fraction", "target_auroc", "intercept", "beta"];
            let parse = |i: usize| -> Result<f64> {
                fields[i].trim().parse::<f64>().map_err(|_| {
                    Error::Ingest(format!(
                        "{}:{}: bad value '{}' in column '{}'",
                        path.display(),
                        lineno + 1,
                        fields[i],
                        col[i]
                    ))
                })
            };
            let p = fields[0].trim().parse::<usize>().map_err(|_| {
                Error::Ingest(format!(
                    "{}:{}: bad value '{}' in column 'p'",
                    path.display(),
                    lineno + 1,
                    fields[0]
                ))
            })?;
            entries.push(SolvedCoefficients {
                p,
                event_fraction: parse(1)?,
                target_auroc: parse(2)?,
                intercept: parse(3)?,
                beta: parse(4)?,
            });
        }
        Ok(CoefficientTable { entries })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str(CACHE_HEADER);
        out.push('\n');
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.p,
                fmt12(e.event_fraction),
                fmt12(e.target_auroc),
                fmt12(e.intercept),
                fmt12(e.beta)
            ));
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(out.as_bytes())?;
        Ok(())
    }
}

fn same_key(a: &SolvedCoefficients, b: &SolvedCoefficients) -> bool {
    a.p == b.p && a.event_fraction == b.event_fraction && a.target_auroc == b.target_auroc
}

/// 12 significant digits, the cache precision.
fn fmt12(v: f64) -> String {
    format!("{v:.11e}")
}

fn round_trip(c: SolvedCoefficients) -> SolvedCoefficients {
    let rt = |v: f64| fmt12(v).parse::<f64>().expect("12-digit format reparses");
    SolvedCoefficients {
        p: c.p,
        event_fraction: rt(c.event_fraction),
        target_auroc: rt(c.target_auroc),
        intercept: rt(c.intercept),
        beta: rt(c.beta),
    }
}

/// Clamp helper shared by reporting code: probabilities derived from the
/// true model run through the same clamping as fitted ones.
pub fn true_probabilities(spec: &DgmSpec, x: &Matrix) -> Vec<f64> {
    spec.model().linear_predictor(x).into_iter().map(|z| clamp_prob(expit(z))).collect()
}
