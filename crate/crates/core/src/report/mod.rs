//! Reporting layer: configuration, results persistence, figures, the
//! applied case-study pipeline, and the bodies of the command-line
//! subcommands (kept in the library so they are testable in-process).

pub mod casestudy;
pub mod config;
pub mod csv;
pub mod svg;

use crate::datagen::{self, CoefficientTable, SolverConfig};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::sim::{self, Algorithm, DatasetKind, MetricRecord, Scenario};
use std::path::{Path, PathBuf};

pub use config::SimOptions;

/// Compact decimal for labels and filenames: up to three decimals, trailing
/// zeros trimmed.
pub fn fmt_short(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() {
        "0".to_string()
    } else {
        s.to_string()
    }
}

// ---------------------------------------------------------------------------
// solve command
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub seed: u64,
    pub cache_path: PathBuf,
    /// (predictor count, event fraction) pairs; defaults to the 12 distinct
    /// pairs of the scenario grid.
    pub pairs: Vec<(usize, f64)>,
    pub target_auroc: f64,
    pub solver: SolverConfig,
    /// Rows used to validate each solved pair on fresh data.
    pub validation_n: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            seed: 1,
            cache_path: PathBuf::from("out/coefficients.csv"),
            pairs: grid_pairs(),
            target_auroc: sim::TARGET_AUROC,
            solver: SolverConfig::default(),
            validation_n: 100_000,
        }
    }
}

/// The distinct (p, event fraction) pairs of the scenario grid, event
/// fraction varying slowest.
pub fn grid_pairs() -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    for s in Scenario::grid() {
        if !out.contains(&(s.p, s.event_fraction)) {
            out.push((s.p, s.event_fraction));
        }
    }
    out
}

/// Parse `p:ef` pairs, e.g. `3:0.01,24:0.3`.
pub fn parse_pairs(value: &str) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::new();
    for item in value.split(',') {
        let item = item.trim();
        let (p, ef) = item
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("pair `{item}`: expected p:event_fraction")))?;
        let p: usize =
            p.trim().parse().map_err(|_| Error::Config(format!("pair `{item}`: bad p")))?;
        let ef: f64 = ef
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("pair `{item}`: bad event fraction")))?;
        if !out.contains(&(p, ef)) {
            out.push((p, ef));
        }
    }
    if out.is_empty() {
        return Err(Error::Config("empty pair list".into()));
    }
    Ok(out)
}

/// Solve any uncached (p, EF) pairs, validate each on fresh data, and keep
/// the cache file current. Warm entries are not recomputed, so re-invocation
/// with a complete cache rewrites an identical file.
pub fn cmd_solve(opts: &SolveOptions, log: &mut dyn std::io::Write) -> Result<CoefficientTable> {
    if let Some(dir) = opts.cache_path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let mut table = if opts.cache_path.exists() {
        CoefficientTable::load(&opts.cache_path)?
    } else {
        CoefficientTable::new()
    };
    for &(p, ef) in &opts.pairs {
        if let Some(hit) = table.find(p, ef, opts.target_auroc) {
            writeln!(
                log,
                "p={p} ef={ef}: cached (intercept {:.6}, beta {:.6})",
                hit.intercept, hit.beta
            )?;
            continue;
        }
        let parent = RngStream::derive(
            opts.seed,
            &[sim::purpose::DGM_SOLVE, p as u64, (ef * 1e6).round() as u64],
        );
        let solved = datagen::solve_coefficients(p, ef, opts.target_auroc, &opts.solver, &parent)?;
        table.upsert(solved);
        table.save(&opts.cache_path)?;
        // Report the cache-precision values, which are what simulations use.
        let stored = table.find(p, ef, opts.target_auroc).expect("entry just inserted");
        let mut vstream = parent.child(&[u64::MAX]);
        let v = datagen::validate(&stored.spec(), opts.validation_n, &mut vstream)?;
        writeln!(
            log,
            "p={p} ef={ef}: intercept {:.6}, beta {:.6} (fresh n={}: prevalence {:.4}, auroc {:.4})",
            stored.intercept, stored.beta, v.n, v.prevalence, v.auroc
        )?;
    }
    table.save(&opts.cache_path)?;
    Ok(table)
}

// ---------------------------------------------------------------------------
// simulate command
// ---------------------------------------------------------------------------

pub struct SimulateOutcome {
    pub records_path: PathBuf,
    pub summary_path: PathBuf,
    pub exclusions_path: PathBuf,
    pub figure_paths: Vec<PathBuf>,
    pub records: Vec<MetricRecord>,
    /// Wall-clock seconds spent on each scenario, in execution order.
    pub scenario_seconds: Vec<(u32, f64)>,
}

/// Run the configured scenarios from the coefficient cache and write the
/// per-run records, summaries, exclusion tally, and box-plot figures.
pub fn cmd_simulate(opts: &SimOptions, log: &mut dyn std::io::Write) -> Result<SimulateOutcome> {
    std::fs::create_dir_all(&opts.out_dir)?;
    let cache_path = opts.coefficients_path();
    if !cache_path.exists() {
        return Err(Error::Config(format!(
            "coefficient cache {} not found; run the solve command first",
            cache_path.display()
        )));
    }
    let table = CoefficientTable::load(&cache_path)?;

    let mut ids = opts.scenarios.clone();
    ids.sort_unstable();
    let cfg = opts.run_config();
    let mut records = Vec::new();
    let mut scenario_seconds = Vec::new();
    for id in ids {
        let scenario = Scenario::by_id(id)
            .ok_or_else(|| Error::Config(format!("scenario id {id} is outside the grid")))?;
        let solved = table
            .find(scenario.p, scenario.event_fraction, opts.target_auroc)
            .ok_or_else(|| {
                Error::Config(format!(
                    "coefficient cache {} has no entry for p={}, event fraction {} at target AUROC {}",
                    cache_path.display(),
                    scenario.p,
                    scenario.event_fraction,
                    opts.target_auroc
                ))
            })?;
        let t0 = std::time::Instant::now();
        let recs = sim::run_scenario(&scenario, &solved.spec(), &cfg)?;
        let secs = t0.elapsed().as_secs_f64();
        writeln!(
            log,
            "scenario {id} (ef {}, n {}, p {}): {} runs in {secs:.1}s",
            scenario.event_fraction, scenario.n_train, scenario.p, cfg.n_runs,
        )?;
        scenario_seconds.push((id, secs));
        records.extend(recs);
    }

    let records_path = opts.out_dir.join("runs.csv");
    csv::write_run_records(&records_path, &records)?;
    let summaries = sim::summarize(&records);
    let summary_path = opts.out_dir.join("summary.csv");
    csv::write_summaries(&summary_path, &summaries)?;
    let exclusions_path = opts.out_dir.join("exclusions.csv");
    csv::write_exclusions(&exclusions_path, &summaries)?;
    let figure_paths = render_sim_figures(&records, &opts.out_dir)?;
    Ok(SimulateOutcome {
        records_path,
        summary_path,
        exclusions_path,
        figure_paths,
        records,
        scenario_seconds,
    })
}

/// File label, record accessor, and optional reference line for one figure metric.
type FigureMetric = (&'static str, fn(&MetricRecord) -> Option<f64>, Option<f64>);

const FIGURE_METRICS: [FigureMetric; 3] = [
    ("auroc", |r| r.auroc, Some(sim::TARGET_AUROC)),
    ("calib_intercept", |r| r.calib_intercept, Some(0.0)),
    ("calib_slope", |r| r.calib_slope, Some(1.0)),
];

/// One box-plot SVG per (metric, event fraction, algorithm): scenario
/// clusters on the x axis, one box per training dataset, raw models only.
pub fn render_sim_figures(records: &[MetricRecord], out_dir: &Path) -> Result<Vec<PathBuf>> {
    if records.is_empty() {
        return Err(Error::DegenerateInput("no records to plot".into()));
    }
    std::fs::create_dir_all(out_dir)?;
    let mut efs: Vec<f64> = Vec::new();
    let mut scenario_ids: Vec<u32> = Vec::new();
    for r in records {
        if !scenario_ids.contains(&r.scenario_id) {
            scenario_ids.push(r.scenario_id);
        }
    }
    scenario_ids.sort_unstable();
    for &id in &scenario_ids {
        let ef = Scenario::by_id(id)
            .ok_or_else(|| Error::Ingest(format!("record for unknown scenario id {id}")))?
            .event_fraction;
        if !efs.contains(&ef) {
            efs.push(ef);
        }
    }
    efs.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut paths = Vec::new();
    for (metric, value_of, reference) in FIGURE_METRICS {
        for &ef in &efs {
            for algorithm in Algorithm::ALL {
                let mut groups = Vec::new();
                for &id in &scenario_ids {
                    let sc = Scenario::by_id(id).unwrap();
                    if sc.event_fraction != ef {
                        continue;
                    }
                    let series = DatasetKind::ALL
                        .into_iter()
                        .map(|dataset| {
                            let values: Vec<f64> = records
                                .iter()
                                .filter(|r| {
                                    r.scenario_id == id
                                        && r.key.dataset == dataset
                                        && r.key.algorithm == algorithm
                                        && !r.key.recalibrated
                                })
                                .filter_map(value_of)
                                .collect();
                            (dataset.name().to_string(), values)
                        })
                        .collect();
                    groups.push(svg::BoxGroup {
                        label: format!("N={} p={}", sc.n_train, sc.p),
                        series,
                    });
                }
                if groups.is_empty() {
                    continue;
                }
                let title = format!(
                    "{metric} | event fraction {} | {} regression",
                    fmt_short(ef),
                    algorithm.name()
                );
                let rendered = svg::render_boxplot(&title, metric, &groups, reference)?;
                let path = out_dir.join(format!(
                    "box_{metric}_ef{}_{}.svg",
                    fmt_short(ef),
                    algorithm.name()
                ));
                std::fs::write(&path, rendered)?;
                paths.push(path);
            }
        }
    }
    Ok(paths)
}

/// Re-render the figures from an existing per-run record file.
pub fn cmd_plot(records_path: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let records = csv::read_run_records(records_path)?;
    render_sim_figures(&records, out_dir)
}

// ---------------------------------------------------------------------------
// casestudy command
// ---------------------------------------------------------------------------

pub struct CaseStudyOutcome {
    pub report: casestudy::CaseStudyReport,
    pub metrics_path: PathBuf,
    pub figure_paths: Vec<PathBuf>,
}

fn ci_cells(e: &casestudy::Estimate) -> [String; 3] {
    [e.value.to_string(), e.lo.to_string(), e.hi.to_string()]
}

fn metric_row(
    w: &mut ::csv::Writer<std::fs::File>,
    dataset: DatasetKind,
    algorithm: Algorithm,
    metric: &str,
    cells: [String; 3],
) -> Result<()> {
    w.write_record([
        dataset.name().to_string(),
        algorithm.name().to_string(),
        metric.to_string(),
        cells[0].clone(),
        cells[1].clone(),
        cells[2].clone(),
    ])?;
    Ok(())
}

/// Run the case-study pipeline, write the metric table and figures, and
/// print a compact summary.
pub fn cmd_casestudy(
    opts: &casestudy::CaseStudyOptions,
    log: &mut dyn std::io::Write,
) -> Result<CaseStudyOutcome> {
    std::fs::create_dir_all(&opts.out_dir)?;
    let report = casestudy::run_casestudy(opts)?;
    writeln!(
        log,
        "cohort: {} rows ({} train / {} test), training event rate {:.4}",
        report.n_total, report.n_train, report.n_test, report.train_event_rate
    )?;

    let metrics_path = opts.out_dir.join("casestudy_metrics.csv");
    {
        let mut w = ::csv::Writer::from_path(&metrics_path)?;
        w.write_record(["dataset", "algorithm", "metric", "value", "ci_lo", "ci_hi"])?;
        for m in &report.models {
            match &m.outcome {
                casestudy::ModelOutcome::Excluded(reason) => {
                    metric_row(
                        &mut w,
                        m.dataset,
                        m.algorithm,
                        "excluded",
                        [reason.name().to_string(), String::new(), String::new()],
                    )?;
                }
                casestudy::ModelOutcome::Evaluated(ev) => {
                    metric_row(&mut w, m.dataset, m.algorithm, "auroc", ci_cells(&ev.auroc))?;
                    metric_row(
                        &mut w,
                        m.dataset,
                        m.algorithm,
                        "calib_intercept",
                        ci_cells(&ev.calib_intercept),
                    )?;
                    if let Some(s) = &ev.calib_slope {
                        metric_row(&mut w, m.dataset, m.algorithm, "calib_slope", ci_cells(s))?;
                    }
                    for t in &ev.thresholds {
                        metric_row(
                            &mut w,
                            m.dataset,
                            m.algorithm,
                            &format!("accuracy[{}]", t.label),
                            ci_cells(&t.accuracy),
                        )?;
                        if let Some(s) = &t.sensitivity {
                            metric_row(
                                &mut w,
                                m.dataset,
                                m.algorithm,
                                &format!("sensitivity[{}]", t.label),
                                ci_cells(s),
                            )?;
                        }
                        if let Some(s) = &t.specificity {
                            metric_row(
                                &mut w,
                                m.dataset,
                                m.algorithm,
                                &format!("specificity[{}]", t.label),
                                ci_cells(s),
                            )?;
                        }
                    }
                    if let Some(l) = ev.lambda {
                        metric_row(
                            &mut w,
                            m.dataset,
                            m.algorithm,
                            "ridge_lambda",
                            [l.to_string(), String::new(), String::new()],
                        )?;
                    }
                }
            }
        }
        w.flush()?;
    }

    let mut figure_paths = Vec::new();
    for algorithm in Algorithm::ALL {
        let evaluated: Vec<(&casestudy::CaseModelResult, &casestudy::EvaluatedModel)> = report
            .models
            .iter()
            .filter(|m| m.algorithm == algorithm)
            .filter_map(|m| match &m.outcome {
                casestudy::ModelOutcome::Evaluated(ev) => Some((m, ev.as_ref())),
                casestudy::ModelOutcome::Excluded(_) => None,
            })
            .collect();
        if evaluated.is_empty() {
            continue;
        }
        let cal_curves: Vec<svg::Curve> = evaluated
            .iter()
            .map(|(m, ev)| svg::Curve {
                name: m.dataset.name().to_string(),
                points: ev.calibration_curve.clone(),
            })
            .collect();
        let cal = svg::render_calibration_plot(
            &format!("calibration | {} regression", algorithm.name()),
            &cal_curves,
        )?;
        let cal_path = opts.out_dir.join(format!("casestudy_calibration_{}.svg", algorithm.name()));
        std::fs::write(&cal_path, cal)?;
        figure_paths.push(cal_path);

        let nb_curves: Vec<svg::Curve> = evaluated
            .iter()
            .map(|(m, ev)| svg::Curve {
                name: m.dataset.name().to_string(),
                points: ev.decision_curve.clone(),
            })
            .collect();
        let treat_all = svg::Curve { name: "treat all".into(), points: report.treat_all.clone() };
        let dc = svg::render_decision_curve(
            &format!("decision curves | {} regression", algorithm.name()),
            &nb_curves,
            &treat_all,
        )?;
        let dc_path = opts.out_dir.join(format!("casestudy_decision_{}.svg", algorithm.name()));
        std::fs::write(&dc_path, dc)?;
        figure_paths.push(dc_path);
    }

    for m in &report.models {
        match &m.outcome {
            casestudy::ModelOutcome::Excluded(reason) => writeln!(
                log,
                "{:>12} {:>8}: excluded ({})",
                m.dataset.name(),
                m.algorithm.name(),
                reason.name()
            )?,
            casestudy::ModelOutcome::Evaluated(ev) => writeln!(
                log,
                "{:>12} {:>8}: auroc {:.3} ({:.3}..{:.3}), intercept {:+.3} ({:+.3}..{:+.3}), slope {}",
                m.dataset.name(),
                m.algorithm.name(),
                ev.auroc.value,
                ev.auroc.lo,
                ev.auroc.hi,
                ev.calib_intercept.value,
                ev.calib_intercept.lo,
                ev.calib_intercept.hi,
                ev.calib_slope
                    .as_ref()
                    .map(|s| format!("{:.3} ({:.3}..{:.3})", s.value, s.lo, s.hi))
                    .unwrap_or_else(|| "n/a".to_string()),
            )?,
        }
    }

    Ok(CaseStudyOutcome { report, metrics_path, figure_paths })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_pairs_cover_the_design() {
        let pairs = grid_pairs();
        assert_eq!(pairs.len(), 12);
        assert_eq!(pairs[0], (3, 0.01));
        assert_eq!(pairs[11], (24, 0.3));
    }

    #[test]
    fn pair_parsing() {
        assert_eq!(parse_pairs("3:0.01, 24:0.3").unwrap(), vec![(3, 0.01), (24, 0.3)]);
        assert!(parse_pairs("3").is_err());
        assert!(parse_pairs("x:0.1").is_err());
    }

    #[test]
    fn short_format() {
        assert_eq!(fmt_short(0.01), "0.01");
        assert_eq!(fmt_short(0.5), "0.5");
        assert_eq!(fmt_short(0.192_000_4), "0.192");
        assert_eq!(fmt_short(0.0), "0");
    }
}
