//! Persistence of simulation results: the flat per-run record file the rest
//! of the tooling is built around, the per-group summary file, and the
//! exclusion tally.
//!
//! Floating-point cells use Rust's shortest round-trip formatting, so a file
//! written from a set of records parses back to bit-identical values and two
//! runs that produce the same numbers produce byte-identical files.

use crate::error::{Error, Result};
use crate::sim::{
    Algorithm, DatasetKind, ExclusionReason, GroupSummary, MetricRecord, MetricSummary, ModelKey,
};
use std::path::Path;

/// Column order of the per-run record file.
pub const RUN_HEADER: [&str; 15] = [
    "scenario_id",
    "run_id",
    "dataset",
    "algorithm",
    "recalibrated",
    "auroc",
    "calib_intercept",
    "calib_slope",
    "acc_t50",
    "sens_t50",
    "spec_t50",
    "acc_tef",
    "sens_tef",
    "spec_tef",
    "exclusion_reason",
];

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Write per-run records in the fixed schema, one row per model variant.
pub fn write_run_records(path: &Path, records: &[MetricRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RUN_HEADER)?;
    for r in records {
        w.write_record([
            r.scenario_id.to_string(),
            r.run_id.to_string(),
            r.key.dataset.name().to_string(),
            r.key.algorithm.name().to_string(),
            if r.key.recalibrated { "1" } else { "0" }.to_string(),
            opt_cell(r.auroc),
            opt_cell(r.calib_intercept),
            opt_cell(r.calib_slope),
            opt_cell(r.acc_t50),
            opt_cell(r.sens_t50),
            opt_cell(r.spec_t50),
            opt_cell(r.acc_tef),
            opt_cell(r.sens_tef),
            opt_cell(r.spec_tef),
            r.exclusion_reason.map(|e| e.name().to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn ingest_err(path: &Path, row: usize, column: &str, what: &str) -> Error {
    Error::Ingest(format!("{}: data row {row}, column `{column}`: {what}", path.display()))
}

fn parse_f64_opt(path: &Path, row: usize, column: &str, cell: &str) -> Result<Option<f64>> {
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse::<f64>()
        .map(Some)
        .map_err(|_| ingest_err(path, row, column, &format!("`{cell}` is not a number")))
}

/// Read a per-run record file written by [`write_run_records`].
pub fn read_run_records(path: &Path) -> Result<Vec<MetricRecord>> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| Error::Ingest(format!("{}: {e}", path.display())))?;
    {
        let got = r.headers().map_err(|e| Error::Ingest(format!("{}: {e}", path.display())))?;
        if got.iter().ne(RUN_HEADER) {
            return Err(Error::Ingest(format!(
                "{}: unexpected header `{}`",
                path.display(),
                got.iter().collect::<Vec<_>>().join(",")
            )));
        }
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let row = i + 1;
        let rec =
            rec.map_err(|e| Error::Ingest(format!("{}: data row {row}: {e}", path.display())))?;
        if rec.len() != RUN_HEADER.len() {
            return Err(Error::Ingest(format!(
                "{}: data row {row}: expected {} fields, found {}",
                path.display(),
                RUN_HEADER.len(),
                rec.len()
            )));
        }
        let cell = |c: usize| rec.get(c).unwrap_or_default();
        let scenario_id = cell(0)
            .parse::<u32>()
            .map_err(|_| ingest_err(path, row, "scenario_id", "not an integer"))?;
        let run_id = cell(1)
            .parse::<u32>()
            .map_err(|_| ingest_err(path, row, "run_id", "not an integer"))?;
        let dataset = DatasetKind::from_name(cell(2)).ok_or_else(|| {
            ingest_err(path, row, "dataset", &format!("unknown kind `{}`", cell(2)))
        })?;
        let algorithm = Algorithm::from_name(cell(3)).ok_or_else(|| {
            ingest_err(path, row, "algorithm", &format!("unknown algorithm `{}`", cell(3)))
        })?;
        let recalibrated = match cell(4) {
            "0" => false,
            "1" => true,
            other => {
                return Err(ingest_err(
                    path,
                    row,
                    "recalibrated",
                    &format!("expected 0 or 1, found `{other}`"),
                ))
            }
        };
        let exclusion_reason = match cell(14) {
            "" => None,
            name => Some(ExclusionReason::from_name(name).ok_or_else(|| {
                ingest_err(path, row, "exclusion_reason", &format!("unknown reason `{name}`"))
            })?),
        };
        out.push(MetricRecord {
            scenario_id,
            run_id,
            key: ModelKey { dataset, algorithm, recalibrated },
            auroc: parse_f64_opt(path, row, "auroc", cell(5))?,
            calib_intercept: parse_f64_opt(path, row, "calib_intercept", cell(6))?,
            calib_slope: parse_f64_opt(path, row, "calib_slope", cell(7))?,
            acc_t50: parse_f64_opt(path, row, "acc_t50", cell(8))?,
            sens_t50: parse_f64_opt(path, row, "sens_t50", cell(9))?,
            spec_t50: parse_f64_opt(path, row, "spec_t50", cell(10))?,
            acc_tef: parse_f64_opt(path, row, "acc_tef", cell(11))?,
            sens_tef: parse_f64_opt(path, row, "sens_tef", cell(12))?,
            spec_tef: parse_f64_opt(path, row, "spec_tef", cell(13))?,
            exclusion_reason,
        });
    }
    Ok(out)
}

const SUMMARY_METRICS: [&str; 9] = [
    "auroc",
    "calib_intercept",
    "calib_slope",
    "acc_t50",
    "sens_t50",
    "spec_t50",
    "acc_tef",
    "sens_tef",
    "spec_tef",
];

fn summary_cells(s: Option<MetricSummary>) -> [String; 3] {
    match s {
        Some(m) => [m.median.to_string(), m.q25.to_string(), m.q75.to_string()],
        None => Default::default(),
    }
}

/// Write per-group summaries: one row per (scenario, model variant) with
/// inclusion counts and median/quartiles per metric.
pub fn write_summaries(path: &Path, summaries: &[GroupSummary]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![
        "scenario_id".to_string(),
        "dataset".to_string(),
        "algorithm".to_string(),
        "recalibrated".to_string(),
        "n_runs".to_string(),
        "n_included".to_string(),
        "n_separation".to_string(),
        "n_non_convergence".to_string(),
        "n_one_class".to_string(),
    ];
    for m in SUMMARY_METRICS {
        header.push(format!("{m}_median"));
        header.push(format!("{m}_q25"));
        header.push(format!("{m}_q75"));
    }
    w.write_record(&header)?;
    for s in summaries {
        let mut rec = vec![
            s.scenario_id.to_string(),
            s.key.dataset.name().to_string(),
            s.key.algorithm.name().to_string(),
            if s.key.recalibrated { "1" } else { "0" }.to_string(),
            s.n_runs.to_string(),
            s.n_included.to_string(),
            s.n_separation.to_string(),
            s.n_non_convergence.to_string(),
            s.n_one_class.to_string(),
        ];
        for m in [
            s.auroc,
            s.calib_intercept,
            s.calib_slope,
            s.acc_t50,
            s.sens_t50,
            s.spec_t50,
            s.acc_tef,
            s.sens_tef,
            s.spec_tef,
        ] {
            rec.extend(summary_cells(m));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Write the per-(scenario, dataset) exclusion tally: separation is counted
/// once per training dataset, non-convergence per algorithm.
pub fn write_exclusions(path: &Path, summaries: &[GroupSummary]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "scenario_id",
        "dataset",
        "n_runs",
        "n_separation",
        "n_non_convergence_standard",
        "n_non_convergence_ridge",
        "n_one_class",
    ])?;
    // Raw (non-recalibrated) records carry the dataset-level story.
    for std_row in
        summaries.iter().filter(|s| !s.key.recalibrated && s.key.algorithm == Algorithm::Standard)
    {
        let ridge_row = summaries
            .iter()
            .find(|s| {
                s.scenario_id == std_row.scenario_id
                    && s.key
                        == ModelKey {
                            dataset: std_row.key.dataset,
                            algorithm: Algorithm::Ridge,
                            recalibrated: false,
                        }
            })
            .ok_or_else(|| {
                Error::Config(format!(
                    "summaries missing the ridge twin of scenario {} dataset {}",
                    std_row.scenario_id,
                    std_row.key.dataset.name()
                ))
            })?;
        w.write_record([
            std_row.scenario_id.to_string(),
            std_row.key.dataset.name().to_string(),
            std_row.n_runs.to_string(),
            std_row.n_separation.to_string(),
            std_row.n_non_convergence.to_string(),
            ridge_row.n_non_convergence.to_string(),
            std_row.n_one_class.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::model_keys;

    fn sample_records() -> Vec<MetricRecord> {
        let keys = model_keys();
        let mut out = Vec::new();
        for run in 0..3u32 {
            for (i, key) in keys.iter().enumerate() {
                let excluded = run == 1 && i % 5 == 0;
                if excluded {
                    out.push(MetricRecord {
                        scenario_id: 7,
                        run_id: run,
                        key: *key,
                        auroc: None,
                        calib_intercept: None,
                        calib_slope: None,
                        acc_t50: None,
                        sens_t50: None,
                        spec_t50: None,
                        acc_tef: None,
                        sens_tef: None,
                        spec_tef: None,
                        exclusion_reason: Some(ExclusionReason::Separation),
                    });
                } else {
                    let v = 0.1 + run as f64 * 0.017 + i as f64 / 97.0;
                    out.push(MetricRecord {
                        scenario_id: 7,
                        run_id: run,
                        key: *key,
                        auroc: Some(0.5 + v / 3.0),
                        calib_intercept: Some(-v),
                        calib_slope: Some(1.0 - v / 2.0),
                        acc_t50: Some(1.0 - v / 5.0),
                        sens_t50: None,
                        spec_t50: Some(0.99),
                        acc_tef: (i == 0).then_some(0.7 + v / 10.0),
                        sens_tef: (i == 0).then_some(0.6),
                        spec_tef: (i == 0).then_some(0.8),
                        exclusion_reason: None,
                    });
                }
            }
        }
        out
    }

    #[test]
    fn run_records_round_trip_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("runs.csv");
        let records = sample_records();
        write_run_records(&path, &records).unwrap();
        let back = read_run_records(&path).unwrap();
        assert_eq!(records, back);

        // Writing the parsed records again reproduces the file byte for byte.
        let path2 = dir.path().join("runs2.csv");
        write_run_records(&path2, &back).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn malformed_cells_name_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("runs.csv");
        let mut body = RUN_HEADER.join(",");
        body.push('\n');
        body.push_str("7,0,unadjusted,standard,0,0.9,,,,,,,,,\n");
        body.push_str("7,1,unadjusted,standard,0,not_a_number,,,,,,,,,\n");
        std::fs::write(&path, body).unwrap();
        let err = read_run_records(&path).unwrap_err().to_string();
        assert!(err.contains("row 2"), "{err}");
        assert!(err.contains("auroc"), "{err}");

        let mut body = RUN_HEADER.join(",");
        body.push('\n');
        body.push_str("7,0,unadjusted,standard,2,,,,,,,,,,\n");
        std::fs::write(&path, body).unwrap();
        let err = read_run_records(&path).unwrap_err().to_string();
        assert!(err.contains("recalibrated"), "{err}");
    }

    #[test]
    fn summaries_from_file_match_direct_summaries() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("runs.csv");
        let records = sample_records();
        write_run_records(&path, &records).unwrap();
        let direct = crate::sim::summarize(&records);
        let indirect = crate::sim::summarize(&read_run_records(&path).unwrap());
        assert_eq!(direct.len(), indirect.len());
        for (a, b) in direct.iter().zip(&indirect) {
            assert_eq!(a.scenario_id, b.scenario_id);
            assert_eq!(a.key, b.key);
            assert_eq!(a.n_included, b.n_included);
            assert_eq!(a.auroc, b.auroc);
            assert_eq!(a.calib_intercept, b.calib_intercept);
            assert_eq!(a.acc_tef, b.acc_tef);
        }

        let spath = dir.path().join("summary.csv");
        write_summaries(&spath, &direct).unwrap();
        let epath = dir.path().join("exclusions.csv");
        write_exclusions(&epath, &direct).unwrap();
        let etext = std::fs::read_to_string(&epath).unwrap();
        // 4 datasets of scenario 7 plus the header.
        assert_eq!(etext.lines().count(), 5);
    }
}
