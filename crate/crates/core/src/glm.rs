//! Logistic regression fitting.
//!
//! Covers the four fitting problems the study needs:
//! maximum-likelihood logistic regression (Newton/IRLS with step halving),
//! ridge logistic regression with the penalty chosen by K-fold
//! cross-validation over a fixed grid, one-parameter offset recalibration
//! (intercept updates), and the two-parameter intercept/slope fit used for
//! calibration assessment.
//!
//! Fits work on multiplicity-weighted rows internally. Datasets built by
//! with-replacement oversampling contain many bit-identical rows; collapsing
//! them into weights gives algebraically identical results at a fraction of
//! the cost, which matters because cross-validation refits the model a few
//! thousand times per training set.

use crate::data::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::metrics;
use crate::num::{clamp_prob, expit, logit};
use crate::rng::RngStream;
use rand::seq::SliceRandom;

#[derive(Clone, Debug)]
pub struct FitOptions {
    pub max_iters: usize,
    /// Converged when the max-norm of the (penalized) score drops below
    /// `grad_tol_per_obs` times the total observation weight.
    pub grad_tol_per_obs: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { max_iters: 50, grad_tol_per_obs: 1e-8 }
    }
}

/// Ridge CV settings. The penalty grid has `n_lambda` values in ascending
/// order: 0, then log-equidistant points from `lambda_min` to `lambda_max`.
#[derive(Clone, Debug)]
pub struct RidgeConfig {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub n_lambda: usize,
    pub n_folds: usize,
    /// Fall back to leave-one-out CV when either outcome class has fewer
    /// members than this.
    pub loocv_class_threshold: usize,
}

impl Default for RidgeConfig {
    fn default() -> Self {
        RidgeConfig {
            lambda_min: 1e-4,
            lambda_max: 64.0,
            n_lambda: 251,
            n_folds: 10,
            loocv_class_threshold: 8,
        }
    }
}

pub fn lambda_grid(cfg: &RidgeConfig) -> Vec<f64> {
    let k = cfg.n_lambda - 1;
    let mut grid = Vec::with_capacity(cfg.n_lambda);
    grid.push(0.0);
    let (lo, hi) = (cfg.lambda_min.ln(), cfg.lambda_max.ln());
    for i in 0..k {
        let l = if i == 0 {
            cfg.lambda_min
        } else if i == k - 1 {
            cfg.lambda_max
        } else {
            (lo + i as f64 * (hi - lo) / (k - 1) as f64).exp()
        };
        grid.push(l);
    }
    grid
}

/// A fitted logistic model on the raw feature scale.
#[derive(Clone, Debug)]
pub struct FittedModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    /// Ridge penalty the model was fitted under (0 for plain ML).
    pub lambda: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl FittedModel {
    pub fn linear_predictor(&self, x: &Matrix) -> Vec<f64> {
        assert_eq!(x.cols(), self.coefficients.len(), "feature count mismatch");
        x.iter_rows()
            .map(|row| {
                let mut z = self.intercept;
                for (v, b) in row.iter().zip(&self.coefficients) {
                    z += v * b;
                }
                z
            })
            .collect()
    }

    /// Predicted event probabilities, clamped away from 0 and 1.
    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        self.linear_predictor(x).into_iter().map(|z| clamp_prob(expit(z))).collect()
    }
}

/// Intercept/slope of a logistic fit of outcomes on linear predictors.
#[derive(Clone, Copy, Debug)]
pub struct CalibrationFit {
    pub intercept: f64,
    pub slope: f64,
}

/// Result of a cross-validated ridge fit.
#[derive(Clone, Debug)]
pub struct RidgeFit {
    pub model: FittedModel,
    /// Mean out-of-fold deviance per grid value, aligned with
    /// [`lambda_grid`] (ascending).
    pub cv_mean_deviance: Vec<f64>,
    pub folds_used: usize,
}

// ---------------------------------------------------------------------------
// Weighted design + IRLS core
// ---------------------------------------------------------------------------

/// Design matrix with an implicit leading intercept column, plus outcome and
/// multiplicity weight per distinct row.
struct Design {
    /// n × (p+1), row-major; first entry of each row is 1.0.
    aug: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
    n: usize,
    m: usize, // p + 1
    total_w: f64,
}

impl Design {
    fn row(&self, i: usize) -> &[f64] {
        &self.aug[i * self.m..(i + 1) * self.m]
    }
}

/// Compare two feature rows (plus outcomes) for bit equality, ordering
/// lexicographically by the raw f64 bit patterns.
fn row_key_cmp(x: &Matrix, y: &[u8], a: usize, b: usize) -> std::cmp::Ordering {
    for (va, vb) in x.row(a).iter().zip(x.row(b)) {
        let o = va.to_bits().cmp(&vb.to_bits());
        if o != std::cmp::Ordering::Equal {
            return o;
        }
    }
    y[a].cmp(&y[b])
}

/// Build a weighted design from the given rows, merging bit-identical
/// (features, outcome) rows into a single weighted row.
fn build_design(x: &Matrix, y: &[u8], idx: &[usize]) -> Design {
    let m = x.cols() + 1;
    let mut order: Vec<usize> = idx.to_vec();
    order.sort_by(|&a, &b| row_key_cmp(x, y, a, b));

    let mut aug = Vec::with_capacity(order.len() * m);
    let mut yv = Vec::new();
    let mut wv: Vec<f64> = Vec::new();
    let mut prev: Option<usize> = None;
    for &i in &order {
        if let Some(p) = prev {
            if row_key_cmp(x, y, p, i) == std::cmp::Ordering::Equal {
                *wv.last_mut().unwrap() += 1.0;
                continue;
            }
        }
        aug.push(1.0);
        aug.extend_from_slice(x.row(i));
        yv.push(y[i] as f64);
        wv.push(1.0);
        prev = Some(i);
    }
    let n = yv.len();
    let total_w = idx.len() as f64;
    Design { aug, y: yv, w: wv, n, m, total_w }
}

/// Column means and standard deviations (weighted, population convention)
/// of the non-intercept columns. Zero-variance columns get sd = 1 so the
/// transform is a no-op for them.
fn column_stats(d: &Design) -> (Vec<f64>, Vec<f64>) {
    let p = d.m - 1;
    let mut mean = vec![0.0; p];
    let mut sd = vec![0.0; p];
    for i in 0..d.n {
        let row = d.row(i);
        let wi = d.w[i];
        for j in 0..p {
            mean[j] += wi * row[j + 1];
        }
    }
    for mj in mean.iter_mut() {
        *mj /= d.total_w;
    }
    for i in 0..d.n {
        let row = d.row(i);
        let wi = d.w[i];
        for j in 0..p {
            let c = row[j + 1] - mean[j];
            sd[j] += wi * c * c;
        }
    }
    for sj in sd.iter_mut() {
        *sj = (*sj / d.total_w).sqrt();
        if !(*sj > 0.0) {
            *sj = 1.0;
        }
    }
    (mean, sd)
}

/// Standardize the design's feature columns in place.
fn standardize(d: &mut Design, mean: &[f64], sd: &[f64]) {
    for i in 0..d.n {
        let base = i * d.m;
        for j in 0..mean.len() {
            d.aug[base + 1 + j] = (d.aug[base + 1 + j] - mean[j]) / sd[j];
        }
    }
}

/// Map coefficients fitted on standardized columns back to the raw scale.
fn destandardize_theta(theta: &[f64], mean: &[f64], sd: &[f64]) -> Vec<f64> {
    let mut out = theta.to_vec();
    for j in 0..mean.len() {
        out[j + 1] = theta[j + 1] / sd[j];
        out[0] -= theta[j + 1] * mean[j] / sd[j];
    }
    out
}

/// Scratch buffers reused across IRLS calls (the CV path makes thousands).
struct Workspace {
    lp: Vec<f64>,
    prob: Vec<f64>,
    g: Vec<f64>,
    h: Vec<f64>,
    theta_try: Vec<f64>,
}

impl Workspace {
    fn new() -> Workspace {
        Workspace {
            lp: Vec::new(),
            prob: Vec::new(),
            g: Vec::new(),
            h: Vec::new(),
            theta_try: Vec::new(),
        }
    }
}

struct IrlsOutcome {
    theta: Vec<f64>,
    iterations: usize,
    converged: bool,
}

/// Weight Gram of the Fisher information, Σ wᵢpᵢ(1−pᵢ) x̃x̃ᵀ, symmetrized.
fn build_weight_gram(d: &Design, prob: &[f64], h: &mut Vec<f64>) {
    let m = d.m;
    h.clear();
    h.resize(m * m, 0.0);
    for (i, row) in d.aug.chunks_exact(m).enumerate() {
        let wi = d.w[i] * prob[i] * (1.0 - prob[i]);
        if wi == 0.0 {
            continue;
        }
        for a in 0..m {
            let t = wi * row[a];
            let ha = &mut h[a * m..(a + 1) * m];
            for (hb, v) in ha[a..].iter_mut().zip(&row[a..]) {
                *hb += t * v;
            }
        }
    }
    for a in 1..m {
        for b in 0..a {
            h[a * m + b] = h[b * m + a];
        }
    }
}

/// Add the ridge curvature 2λ to every non-intercept diagonal entry.
fn add_ridge_diag(h: &mut [f64], m: usize, lambda: f64) {
    for j in 1..m {
        h[j * m + j] += 2.0 * lambda;
    }
}

/// Fisher information (plus ridge diagonal): Σ wᵢpᵢ(1−pᵢ) x̃x̃ᵀ + 2λ·diag(0,1,…).
fn accumulate_fisher(d: &Design, prob: &[f64], lambda: f64, h: &mut Vec<f64>) {
    build_weight_gram(d, prob, h);
    add_ridge_diag(h, d.m, lambda);
}

/// Unpenalized log-likelihood at `theta`, filling the row caches `lp` and
/// `prob` as a side effect. Probabilities are clamped, so the value stays
/// finite even for wildly separated fits.
fn eval_ll(d: &Design, theta: &[f64], lp: &mut Vec<f64>, prob: &mut Vec<f64>) -> f64 {
    lp.clear();
    prob.clear();
    let mut ll = 0.0;
    for i in 0..d.n {
        let row = d.row(i);
        let mut z = 0.0;
        for (v, t) in row.iter().zip(theta) {
            z += v * t;
        }
        let p = clamp_prob(expit(z));
        ll += d.w[i] * if d.y[i] == 1.0 { p.ln() } else { (1.0 - p).ln() };
        lp.push(z);
        prob.push(p);
    }
    ll
}

fn penalty(theta: &[f64]) -> f64 {
    let mut pen = 0.0;
    for t in &theta[1..] {
        pen += t * t;
    }
    pen
}

/// Penalized log-likelihood l(θ) − λ Σ βj².
fn penalized_ll(
    d: &Design,
    theta: &[f64],
    lambda: f64,
    lp: &mut Vec<f64>,
    prob: &mut Vec<f64>,
) -> f64 {
    eval_ll(d, theta, lp, prob) - lambda * penalty(theta)
}

/// Newton/IRLS with step halving on the penalized log-likelihood.
/// The score for convergence is g = Σ wᵢ(yᵢ − pᵢ)x̃ᵢ − 2λ(0, β).
fn irls(
    d: &Design,
    lambda: f64,
    theta0: &[f64],
    opts: &FitOptions,
    ws: &mut Workspace,
) -> IrlsOutcome {
    let m = d.m;
    let tol = opts.grad_tol_per_obs * d.total_w;
    let mut theta = theta0.to_vec();
    let mut pll = {
        let (lp, prob) = (&mut ws.lp, &mut ws.prob);
        penalized_ll(d, &theta, lambda, lp, prob)
    };
    let mut iterations = 0;

    loop {
        // Score at current theta (ws.lp/ws.prob hold matching values).
        ws.g.clear();
        ws.g.resize(m, 0.0);
        for i in 0..d.n {
            let row = d.row(i);
            let r = d.w[i] * (d.y[i] - ws.prob[i]);
            for (gj, v) in ws.g.iter_mut().zip(row) {
                *gj += r * v;
            }
        }
        for (gj, tj) in ws.g.iter_mut().zip(theta.iter()).skip(1) {
            *gj -= 2.0 * lambda * tj;
        }
        let gmax = ws.g.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if gmax <= tol {
            return IrlsOutcome { theta, iterations, converged: true };
        }
        if iterations >= opts.max_iters {
            return IrlsOutcome { theta, iterations, converged: false };
        }

        // Negated Hessian: Σ wᵢ pᵢ(1−pᵢ) x̃x̃ᵀ + 2λ diag(0,1,..,1).
        accumulate_fisher(d, &ws.prob, lambda, &mut ws.h);

        let delta = match crate::linalg::solve_sym(&ws.h, &ws.g) {
            Some(dd) => dd,
            // Weight matrix washed out (extreme probabilities): no further
            // progress possible.
            None => return IrlsOutcome { theta, iterations, converged: false },
        };

        // Step halving: accept the first step that does not reduce the
        // penalized log-likelihood.
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            ws.theta_try.clear();
            ws.theta_try.extend(theta.iter().zip(&delta).map(|(a, b)| a + t * b));
            let pll_try = penalized_ll(d, &ws.theta_try, lambda, &mut ws.lp, &mut ws.prob);
            if pll_try >= pll - 1e-10 * (1.0 + pll.abs()) && pll_try.is_finite() {
                theta.copy_from_slice(&ws.theta_try);
                pll = pll_try;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // Restore lp/prob for the unchanged theta and stop.
            let _ = penalized_ll(d, &theta, lambda, &mut ws.lp, &mut ws.prob);
            return IrlsOutcome { theta, iterations, converged: false };
        }
        iterations += 1;
    }
}

/// Fit state carried across adjacent penalties of a warm-started path: the
/// coefficients plus the row caches and unpenalized log-likelihood that are
/// all independent of λ. Reusing them lets a grid point whose warm start is
/// already within tolerance finish after a single score pass, with no
/// exp/log work and no Hessian.
struct PathState {
    theta: Vec<f64>,
    lp: Vec<f64>,
    prob: Vec<f64>,
    ll: f64,
    /// Cached weight Gram, possibly built at an earlier point of the path.
    gram: Vec<f64>,
    /// Accepted steps since `gram` was rebuilt.
    gram_age: usize,
}

/// Rebuild the cached Gram after this many accepted steps even if nothing
/// else forces it; along the dense penalty grid the IRLS weights drift only
/// slowly, so a mildly stale Gram still yields near-Newton steps.
const GRAM_REFRESH_INTERVAL: usize = 8;

impl PathState {
    fn at_origin(d: &Design) -> Self {
        let mut st = PathState {
            theta: vec![0.0; d.m],
            lp: Vec::new(),
            prob: Vec::new(),
            ll: 0.0,
            gram: Vec::new(),
            gram_age: 0,
        };
        st.ll = eval_ll(d, &st.theta, &mut st.lp, &mut st.prob);
        st
    }
}

/// Advance the path state to the fixed point at `lambda`. Same step-halving
/// ascent (and, because convergence is judged on the exact score, the same
/// fixed point) as `irls`; the differences are pure bookkeeping: entry
/// quantities come from the carried state instead of a fresh evaluation, and
/// the first step at each penalty may reuse a cached weight Gram. Any step
/// after the first within one penalty, a rejected or unsolvable cached step,
/// and every `GRAM_REFRESH_INTERVAL`-th accepted step all rebuild the Gram
/// at the current probabilities.
fn path_step(d: &Design, lambda: f64, st: &mut PathState, opts: &FitOptions, ws: &mut Workspace) {
    let m = d.m;
    let tol = opts.grad_tol_per_obs * d.total_w;
    let mut iterations = 0;
    loop {
        ws.g.clear();
        ws.g.resize(m, 0.0);
        for i in 0..d.n {
            let row = d.row(i);
            let r = d.w[i] * (d.y[i] - st.prob[i]);
            for (gj, v) in ws.g.iter_mut().zip(row) {
                *gj += r * v;
            }
        }
        for j in 1..m {
            ws.g[j] -= 2.0 * lambda * st.theta[j];
        }
        let gmax = ws.g.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if gmax <= tol || iterations >= opts.max_iters {
            return;
        }

        let mut fresh =
            st.gram.len() != m * m || iterations >= 1 || st.gram_age >= GRAM_REFRESH_INTERVAL;
        if fresh {
            build_weight_gram(d, &st.prob, &mut st.gram);
            st.gram_age = 0;
        }

        let mut accepted = false;
        loop {
            ws.h.clear();
            ws.h.extend_from_slice(&st.gram);
            add_ridge_diag(&mut ws.h, m, lambda);
            let delta = crate::linalg::solve_sym(&ws.h, &ws.g);

            if let Some(delta) = delta {
                let pll = st.ll - lambda * penalty(&st.theta);
                let mut t = 1.0;
                for _ in 0..30 {
                    ws.theta_try.clear();
                    ws.theta_try.extend(st.theta.iter().zip(&delta).map(|(a, b)| a + t * b));
                    let ll_try = eval_ll(d, &ws.theta_try, &mut ws.lp, &mut ws.prob);
                    let pll_try = ll_try - lambda * penalty(&ws.theta_try);
                    if pll_try >= pll - 1e-10 * (1.0 + pll.abs()) && pll_try.is_finite() {
                        st.theta.copy_from_slice(&ws.theta_try);
                        std::mem::swap(&mut st.lp, &mut ws.lp);
                        std::mem::swap(&mut st.prob, &mut ws.prob);
                        st.ll = ll_try;
                        st.gram_age += 1;
                        accepted = true;
                        break;
                    }
                    t *= 0.5;
                }
            }
            if accepted || fresh {
                break;
            }
            // The cached Gram produced an unusable step; rebuild it at the
            // current probabilities and try once more.
            build_weight_gram(d, &st.prob, &mut st.gram);
            st.gram_age = 0;
            fresh = true;
        }
        if !accepted {
            return;
        }
        iterations += 1;
    }
}

fn check_two_classes(y: &[u8]) -> Result<()> {
    let events: usize = y.iter().map(|&v| v as usize).sum();
    if events == 0 || events == y.len() {
        return Err(Error::DegenerateInput("outcome vector contains a single class".into()));
    }
    Ok(())
}

fn fit_on_design(mut d: Design, lambda: f64, opts: &FitOptions) -> FittedModel {
    let (mean, sd) = column_stats(&d);
    standardize(&mut d, &mean, &sd);
    let mut ws = Workspace::new();
    let theta0 = vec![0.0; d.m];
    let out = irls(&d, lambda, &theta0, opts, &mut ws);
    let theta = destandardize_theta(&out.theta, &mean, &sd);
    FittedModel {
        intercept: theta[0],
        coefficients: theta[1..].to_vec(),
        lambda,
        converged: out.converged,
        iterations: out.iterations,
    }
}

/// Maximum-likelihood logistic regression.
///
/// Returns a model with `converged = false` (rather than an error) when the
/// data are separable and the likelihood has no finite maximum; callers
/// decide how to treat such fits.
pub fn fit_ml(ds: &Dataset, opts: &FitOptions) -> Result<FittedModel> {
    check_two_classes(ds.y())?;
    let idx: Vec<usize> = (0..ds.n()).collect();
    let d = build_design(ds.x(), ds.y(), &idx);
    Ok(fit_on_design(d, 0.0, opts))
}

/// Logistic regression with a fixed ridge penalty λ on the (internally
/// standardized) non-intercept coefficients.
pub fn fit_penalized(ds: &Dataset, lambda: f64, opts: &FitOptions) -> Result<FittedModel> {
    check_two_classes(ds.y())?;
    let idx: Vec<usize> = (0..ds.n()).collect();
    let d = build_design(ds.x(), ds.y(), &idx);
    Ok(fit_on_design(d, lambda, opts))
}

/// Deviance contribution (−2 log-likelihood) of the held-out rows under a
/// raw-scale theta.
fn deviance_sum(x: &Matrix, y: &[u8], idx: &[usize], theta: &[f64]) -> f64 {
    let mut dev = 0.0;
    for &i in idx {
        let row = x.row(i);
        let mut z = theta[0];
        for (v, b) in row.iter().zip(&theta[1..]) {
            z += v * b;
        }
        let p = clamp_prob(expit(z));
        dev += -2.0 * if y[i] == 1 { p.ln() } else { (1.0 - p).ln() };
    }
    dev
}

/// Ridge logistic regression with the penalty chosen from the grid by
/// cross-validated deviance.
///
/// Fold assignment is a function of the supplied stream and the row count
/// only. With `n_folds`-fold CV the rows are shuffled once and split into
/// near-equal contiguous folds; when either class is smaller than
/// `loocv_class_threshold` the split degenerates to leave-one-out (no
/// shuffle needed). Ties in mean out-of-fold deviance resolve to the larger
/// penalty. The returned model is refitted on the full data at the chosen λ.
pub fn fit_ridge_cv(
    ds: &Dataset,
    cfg: &RidgeConfig,
    stream: &mut RngStream,
    opts: &FitOptions,
) -> Result<RidgeFit> {
    check_two_classes(ds.y())?;
    let n = ds.n();
    let grid = lambda_grid(cfg);
    let events = ds.n_events();
    let loocv = events < cfg.loocv_class_threshold || (n - events) < cfg.loocv_class_threshold;

    // Fold membership: folds[f] is the list of held-out row indices.
    let folds: Vec<Vec<usize>> = if loocv {
        (0..n).map(|i| vec![i]).collect()
    } else {
        let k = cfg.n_folds.min(n);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(stream);
        let base = n / k;
        let extra = n % k;
        let mut out = Vec::with_capacity(k);
        let mut at = 0;
        for f in 0..k {
            let size = base + usize::from(f < extra);
            out.push(perm[at..at + size].to_vec());
            at += size;
        }
        out
    };

    // Loose-but-cheap settings for the path fits; the model actually
    // returned is refitted tightly below.
    let path_opts = FitOptions { max_iters: 12, grad_tol_per_obs: 1e-6 };
    let mut dev_total = vec![0.0; grid.len()];
    let mut ws = Workspace::new();
    let mut in_train: Vec<bool> = Vec::new();

    for fold in &folds {
        in_train.clear();
        in_train.resize(n, true);
        for &i in fold {
            in_train[i] = false;
        }
        let train_idx: Vec<usize> = (0..n).filter(|&i| in_train[i]).collect();
        let train_events: usize = train_idx.iter().map(|&i| ds.y()[i] as usize).sum();

        if train_events == 0 || train_events == train_idx.len() {
            // Single-class training fold (only reachable on tiny inputs):
            // score the held-out rows with the constant clamped event rate.
            let p = clamp_prob(train_events as f64 / train_idx.len() as f64);
            let dev_row: f64 = fold
                .iter()
                .map(|&i| -2.0 * if ds.y()[i] == 1 { p.ln() } else { (1.0 - p).ln() })
                .sum();
            for dt in dev_total.iter_mut() {
                *dt += dev_row;
            }
            continue;
        }

        let mut d = build_design(ds.x(), ds.y(), &train_idx);
        let (mean, sd) = column_stats(&d);
        standardize(&mut d, &mean, &sd);

        // Walk the grid from the strongest penalty down, warm-starting each
        // fit from the previous solution.
        let mut st = PathState::at_origin(&d);
        for gi in (0..grid.len()).rev() {
            path_step(&d, grid[gi], &mut st, &path_opts, &mut ws);
            let raw = destandardize_theta(&st.theta, &mean, &sd);
            dev_total[gi] += deviance_sum(ds.x(), ds.y(), fold, &raw);
        }
    }

    let mut cv_mean_deviance = dev_total;
    for d in cv_mean_deviance.iter_mut() {
        *d /= n as f64;
    }
    // Ascending grid + `<=` keeps the largest penalty among exact ties.
    let mut best = 0;
    for gi in 1..grid.len() {
        if cv_mean_deviance[gi] <= cv_mean_deviance[best] {
            best = gi;
        }
    }

    let model = {
        let idx: Vec<usize> = (0..n).collect();
        let d = build_design(ds.x(), ds.y(), &idx);
        fit_on_design(d, grid[best], opts)
    };
    Ok(RidgeFit { model, cv_mean_deviance, folds_used: folds.len() })
}

/// Flag a fitted model as separated: its apparent AUROC on the data it was
/// fitted to is 1 (to within floating-point slack). Complete and
/// quasi-complete separation both hit this, and it is exactly the condition
/// under which the ML intercept/coefficients run away to infinity.
pub fn detect_separation(model: &FittedModel, ds: &Dataset) -> Result<bool> {
    let scores = model.linear_predictor(ds.x());
    let auc = metrics::auroc_from_scores(&scores, ds.y())?;
    Ok(auc >= 1.0 - 1e-12)
}

// ---------------------------------------------------------------------------
// Offset / calibration fits
// ---------------------------------------------------------------------------

/// Fit the intercept `a` of the model p = expit(a + z) for fixed offsets z.
///
/// The score Σ(y − expit(a + z)) is strictly decreasing in `a`, so the root
/// is found by safeguarded Newton (bisection fallback on a fixed bracket).
pub fn fit_offset_intercept(offsets: &[f64], y: &[u8]) -> Result<f64> {
    if offsets.is_empty() || offsets.len() != y.len() {
        return Err(Error::DegenerateInput(format!(
            "{} offsets for {} outcomes",
            offsets.len(),
            y.len()
        )));
    }
    check_two_classes(y).map_err(|_| {
        Error::UndefinedMetric("intercept update needs both outcome classes".into())
    })?;
    let n = y.len() as f64;
    let target: f64 = y.iter().map(|&v| v as f64).sum();
    let score = |a: f64| -> (f64, f64) {
        let mut s = -target;
        let mut info = 0.0;
        for &z in offsets {
            let p = expit(a + z);
            s += p;
            info += p * (1.0 - p);
        }
        (s, info) // s = Σp − Σy, increasing in a
    };
    let (mut lo, mut hi) = (-60.0, 60.0);
    let mut a = logit(clamp_prob(target / n));
    a -= {
        // start from logit(ȳ) − logit(mean p̂)
        let mean_p: f64 = offsets.iter().map(|&z| expit(z)).sum::<f64>() / n;
        logit(clamp_prob(mean_p))
    };
    a = a.clamp(lo, hi);
    for _ in 0..100 {
        let (s, info) = score(a);
        if s.abs() <= 1e-10 * n {
            return Ok(a);
        }
        if s > 0.0 {
            hi = a;
        } else {
            lo = a;
        }
        let newton = if info > 0.0 { a - s / info } else { f64::NAN };
        a = if newton.is_finite() && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
    }
    Err(Error::NonConvergence("offset intercept fit".into()))
}

/// Two-parameter logistic fit of outcomes on a single score:
/// p = expit(a + b·z). Used for calibration intercept/slope assessment.
pub fn fit_calibration(lp: &[f64], y: &[u8]) -> Result<CalibrationFit> {
    if lp.is_empty() || lp.len() != y.len() {
        return Err(Error::DegenerateInput(format!(
            "{} scores for {} outcomes",
            lp.len(),
            y.len()
        )));
    }
    check_two_classes(y)
        .map_err(|_| Error::UndefinedMetric("calibration fit needs both outcome classes".into()))?;
    let mean = lp.iter().sum::<f64>() / lp.len() as f64;
    let var = lp.iter().map(|z| (z - mean) * (z - mean)).sum::<f64>() / lp.len() as f64;
    if !(var > 0.0) {
        return Err(Error::UndefinedMetric(
            "calibration slope undefined for a constant score".into(),
        ));
    }
    // Fit on the standardized score: scores from overfit models span hundreds
    // of logits, and centring/scaling keeps the Fisher solve well conditioned.
    // It also makes the fit equivariant under rescaled scores — a score
    // scaled by 2^k standardizes to bit-identical values, so the returned
    // slope scales by exactly 2^-k.
    let sd = var.sqrt();
    let mut aug = Vec::with_capacity(lp.len() * 2);
    for &z in lp {
        aug.push(1.0);
        aug.push((z - mean) / sd);
    }
    let d = Design {
        aug,
        y: y.iter().map(|&v| v as f64).collect(),
        w: vec![1.0; lp.len()],
        n: lp.len(),
        m: 2,
        total_w: lp.len() as f64,
    };
    let mut ws = Workspace::new();
    let opts = FitOptions { max_iters: 100, grad_tol_per_obs: 1e-10 };
    let out = irls(&d, 0.0, &[0.0, 0.0], &opts, &mut ws);
    if !out.converged {
        return Err(Error::NonConvergence("calibration intercept/slope fit".into()));
    }
    let slope = out.theta[1] / sd;
    let intercept = out.theta[0] - out.theta[1] * (mean / sd);
    Ok(CalibrationFit { intercept, slope })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use rand::Rng;

    /// Small deterministic dataset with a known signal.
    fn toy_dataset(n: usize, seed: u64) -> Dataset {
        let mut stream = RngStream::derive(seed, &[99]);
        let mut rows = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let x1: f64 = stream.sample(rand_distr::StandardNormal);
            let x2: f64 = stream.sample(rand_distr::StandardNormal);
            let p = expit(-0.5 + 0.8 * x1 - 0.4 * x2);
            let u: f64 = stream.random_range(0.0..1.0);
            rows.push(vec![x1, x2]);
            y.push(u8::from(u < p));
        }
        Dataset::continuous(Matrix::from_rows(&rows).unwrap(), y).unwrap()
    }

    /// Independent oracle for the 2-parameter ML fit: iteratively refined
    /// grid search over (intercept, slope) on the log-likelihood.
    fn grid_search_2d(x: &[f64], y: &[u8]) -> (f64, f64) {
        let ll = |a: f64, b: f64| -> f64 {
            x.iter()
                .zip(y)
                .map(|(&xi, &yi)| {
                    let p = clamp_prob(expit(a + b * xi));
                    if yi == 1 {
                        p.ln()
                    } else {
                        (1.0 - p).ln()
                    }
                })
                .sum()
        };
        let (mut ca, mut cb) = (0.0, 0.0);
        let mut half = 8.0;
        for _ in 0..40 {
            let mut best = (f64::NEG_INFINITY, ca, cb);
            for i in -10..=10 {
                for j in -10..=10 {
                    let a = ca + half * i as f64 / 10.0;
                    let b = cb + half * j as f64 / 10.0;
                    let v = ll(a, b);
                    if v > best.0 {
                        best = (v, a, b);
                    }
                }
            }
            ca = best.1;
            cb = best.2;
            half *= 0.35;
        }
        (ca, cb)
    }

    #[test]
    fn ml_matches_grid_oracle() {
        let ds = toy_dataset(60, 7);
        let x: Vec<f64> = ds.x().column(0).to_vec();
        let ds1 =
            Dataset::continuous(Matrix::from_vec(x.len(), 1, x.clone()), ds.y().to_vec()).unwrap();
        let fit = fit_ml(&ds1, &FitOptions::default()).unwrap();
        assert!(fit.converged);
        let (a, b) = grid_search_2d(&x, ds.y());
        assert!((fit.intercept - a).abs() < 1e-4, "{} vs {a}", fit.intercept);
        assert!((fit.coefficients[0] - b).abs() < 1e-4, "{} vs {b}", fit.coefficients[0]);
    }

    #[test]
    fn single_class_is_degenerate() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let ds = Dataset::continuous(x, vec![1, 1]).unwrap();
        assert!(fit_ml(&ds, &FitOptions::default()).is_err());
    }

    #[test]
    fn separation_flagged() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 - 9.5]).collect();
        let y: Vec<u8> = (0..20).map(|i| u8::from(i >= 10)).collect();
        let ds = Dataset::continuous(Matrix::from_rows(&rows).unwrap(), y).unwrap();
        let fit = fit_ml(&ds, &FitOptions::default()).unwrap();
        // The score can vanish as coefficients run off to infinity, so the
        // convergence flag is not a separation signal; the apparent AUROC is.
        assert!(detect_separation(&fit, &ds).unwrap());
        assert!(fit.coefficients[0] > 3.0, "runaway slope expected");

        // and a noisy, non-separated fit is not flagged
        let ds2 = toy_dataset(200, 3);
        let fit2 = fit_ml(&ds2, &FitOptions::default()).unwrap();
        assert!(fit2.converged);
        assert!(!detect_separation(&fit2, &ds2).unwrap());
    }

    #[test]
    fn duplicated_rows_collapse_to_weights() {
        // Fitting a dataset with row i repeated k_i times must equal the
        // weighted fit; build_design does the collapsing internally.
        let base = toy_dataset(40, 11);
        let mut idx: Vec<usize> = (0..base.n()).collect();
        idx.extend([0, 0, 5, 5, 5, 17]); // repeat some rows
        let expanded = base.subset(&idx);
        let d = build_design(expanded.x(), expanded.y(), &(0..expanded.n()).collect::<Vec<_>>());
        assert_eq!(d.n, 40, "40 distinct rows expected");
        assert_eq!(d.total_w, 46.0);
        let fit_expanded = fit_ml(&expanded, &FitOptions::default()).unwrap();
        // Oracle: same fit via explicit per-row weights is what build_design
        // produced; cross-check against brute-force expansion by hand.
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut y = Vec::new();
        for &i in &idx {
            rows.push(base.x().row(i).to_vec());
            y.push(base.y()[i]);
        }
        let manual = Dataset::continuous(Matrix::from_rows(&rows).unwrap(), y).unwrap();
        let fit_manual = fit_ml(&manual, &FitOptions::default()).unwrap();
        assert!((fit_expanded.intercept - fit_manual.intercept).abs() < 1e-9);
        for (a, b) in fit_expanded.coefficients.iter().zip(&fit_manual.coefficients) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn lambda_grid_shape() {
        let cfg = RidgeConfig::default();
        let grid = lambda_grid(&cfg);
        assert_eq!(grid.len(), 251);
        assert_eq!(grid[0], 0.0);
        assert_eq!(grid[1], 1e-4);
        assert_eq!(*grid.last().unwrap(), 64.0);
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
        // log-equidistant between the non-zero endpoints
        let r1 = grid[3] / grid[2];
        let r2 = grid[150] / grid[149];
        assert!((r1 - r2).abs() < 1e-12);
    }

    #[test]
    fn ridge_zero_lambda_equals_ml() {
        let ds = toy_dataset(120, 21);
        let ml = fit_ml(&ds, &FitOptions::default()).unwrap();
        let pen = fit_penalized(&ds, 0.0, &FitOptions::default()).unwrap();
        assert!((ml.intercept - pen.intercept).abs() < 1e-6);
        for (a, b) in ml.coefficients.iter().zip(&pen.coefficients) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn ridge_shrinks_toward_zero() {
        let ds = toy_dataset(80, 5);
        let norms: Vec<f64> = [0.0, 1.0, 8.0, 64.0]
            .iter()
            .map(|&l| {
                let f = fit_penalized(&ds, l, &FitOptions::default()).unwrap();
                f.coefficients.iter().map(|b| b * b).sum::<f64>()
            })
            .collect();
        assert!(norms.windows(2).all(|w| w[1] < w[0] + 1e-12), "{norms:?}");
    }

    #[test]
    fn ridge_cv_reproducible_and_loocv_trigger() {
        let ds = toy_dataset(150, 13);
        let cfg = RidgeConfig { n_lambda: 26, ..RidgeConfig::default() };
        let mut s1 = RngStream::derive(5, &[1]);
        let mut s2 = RngStream::derive(5, &[1]);
        let f1 = fit_ridge_cv(&ds, &cfg, &mut s1, &FitOptions::default()).unwrap();
        let f2 = fit_ridge_cv(&ds, &cfg, &mut s2, &FitOptions::default()).unwrap();
        assert_eq!(f1.model.lambda, f2.model.lambda);
        assert_eq!(f1.folds_used, 10);
        assert_eq!(f1.cv_mean_deviance, f2.cv_mean_deviance);

        // 6 events < 8 → leave-one-out
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![(i % 7) as f64 - 3.0]).collect();
        let y: Vec<u8> = (0..30).map(|i| u8::from(i % 5 == 0)).collect();
        let small = Dataset::continuous(Matrix::from_rows(&rows).unwrap(), y).unwrap();
        let mut s3 = RngStream::derive(5, &[2]);
        let f3 = fit_ridge_cv(&small, &cfg, &mut s3, &FitOptions::default()).unwrap();
        assert_eq!(f3.folds_used, 30);
    }

    #[test]
    fn offset_intercept_constant_prediction_closed_form() {
        // With constant p̂, the fitted update is logit(ȳ) − logit(p̂).
        let y = vec![1, 0, 0, 0, 1, 0, 0, 0, 0, 0];
        let z = logit(0.35);
        let offsets = vec![z; y.len()];
        let a = fit_offset_intercept(&offsets, &y).unwrap();
        let expected = logit(0.2) - z;
        assert!((a - expected).abs() < 1e-8, "{a} vs {expected}");
    }

    #[test]
    fn offset_intercept_zero_on_own_training_fit() {
        let ds = toy_dataset(300, 17);
        let fit = fit_ml(&ds, &FitOptions::default()).unwrap();
        let lp = fit.linear_predictor(ds.x());
        let a = fit_offset_intercept(&lp, ds.y()).unwrap();
        assert!(a.abs() < 1e-6, "apparent intercept update {a}");
    }

    #[test]
    fn calibration_identity_on_own_training_fit() {
        let ds = toy_dataset(250, 29);
        let fit = fit_ml(&ds, &FitOptions::default()).unwrap();
        let lp = fit.linear_predictor(ds.x());
        let cal = fit_calibration(&lp, ds.y()).unwrap();
        assert!(cal.intercept.abs() < 1e-6);
        assert!((cal.slope - 1.0).abs() < 1e-6);
    }

    #[test]
    fn calibration_slope_halves_when_scores_double() {
        let ds = toy_dataset(250, 31);
        let fit = fit_ml(&ds, &FitOptions::default()).unwrap();
        let lp = fit.linear_predictor(ds.x());
        let cal = fit_calibration(&lp, ds.y()).unwrap();
        let doubled: Vec<f64> = lp.iter().map(|z| 2.0 * z).collect();
        let cal2 = fit_calibration(&doubled, ds.y()).unwrap();
        assert!((cal2.slope - cal.slope / 2.0).abs() < 1e-8);
        assert!((cal2.intercept - cal.intercept).abs() < 1e-8);
    }

    #[test]
    fn calibration_undefined_for_constant_score() {
        let y = vec![0, 1, 0, 1];
        let lp = vec![0.3; 4];
        assert!(matches!(fit_calibration(&lp, &y), Err(Error::UndefinedMetric(_))));
    }
}
