//! Output files of a benchmark run.
//!
//! * `report.csv`: one row per grid point and error metric. It holds no
//!   wall-clock data, so a fixed `(config, seed)` always yields the same
//!   bytes.
//! * `timing.csv`: the same schema, with metric `seconds`.
//! * `report.json`: the config, run metadata and every trial outcome.
//! * `plotdata/{metric}_{mode}.dat`: `x median q25 q75` columns, `x = ε` for
//!   error metrics and `x = N` for timing.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::bench::{BenchmarkReport, PointReport, Series, Summary};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::model::mixer_kind;
use crate::tomography::TomographyMode;

pub const CSV_HEADER: [&str; 12] =
    ["N", "K", "M", "gamma", "epsilon", "mode", "metric", "median", "q25", "q75", "trials", "failures"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    DeltaTMax,
    DeltaF95,
    Seconds,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::DeltaTMax => "delta_t_max",
            Metric::DeltaF95 => "delta_f95",
            Metric::Seconds => "seconds",
        }
    }

    fn summary(self, point: &PointReport) -> Option<Summary> {
        match self {
            Metric::DeltaTMax => point.delta_t_max,
            Metric::DeltaF95 => point.delta_f95,
            Metric::Seconds => point.seconds,
        }
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Format(format!("{}: {e}", path.display()))
}

fn number(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".to_string(), |v| format!("{v:e}"))
}

fn metric_csv(report: &BenchmarkReport, metrics: &[Metric]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| Error::Format(e.to_string());
    writer.write_record(CSV_HEADER).map_err(to_err)?;
    for point in &report.points {
        let p = &point.point;
        for &metric in metrics {
            let s = metric.summary(point);
            writer
                .write_record([
                    p.modes.to_string(),
                    p.depth.to_string(),
                    p.block_size.to_string(),
                    format!("{:e}", p.gamma),
                    format!("{:e}", p.epsilon),
                    p.mode.as_str().to_string(),
                    metric.as_str().to_string(),
                    number(s.map(|s| s.median)),
                    number(s.map(|s| s.q25)),
                    number(s.map(|s| s.q75)),
                    point.trials.to_string(),
                    point.failures.to_string(),
                ])
                .map_err(to_err)?;
        }
    }
    let bytes = writer.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is ASCII"))
}

/// The deterministic error-metric table.
pub fn report_csv(report: &BenchmarkReport) -> Result<String> {
    metric_csv(report, &[Metric::DeltaTMax, Metric::DeltaF95])
}

pub fn timing_csv(report: &BenchmarkReport) -> Result<String> {
    metric_csv(report, &[Metric::Seconds])
}

#[derive(Serialize)]
struct RunDocument<'a> {
    config: &'a ExperimentConfig,
    gamma: f64,
    trials: usize,
    fidelity_samples: usize,
    seed: u64,
    /// Mixer used for each mode count in the run.
    mixers: Vec<(usize, &'static str)>,
    version: &'static str,
    report: &'a BenchmarkReport,
}

pub fn report_json(config: &ExperimentConfig, report: &BenchmarkReport) -> String {
    let mut sizes: Vec<usize> = report.points.iter().map(|p| p.point.modes).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let doc = RunDocument {
        config,
        gamma: config.gamma,
        trials: report.trials,
        fidelity_samples: report.fidelity_samples,
        seed: report.seed,
        mixers: sizes.into_iter().map(|n| (n, mixer_kind(n))).collect(),
        version: env!("CARGO_PKG_VERSION"),
        report,
    };
    serde_json::to_string_pretty(&doc).expect("reports always serialize")
}

/// Rows `(x, median, q25, q75)` of one plot curve, ascending in `x`.
pub fn plot_rows(report: &BenchmarkReport, metric: Metric, mode: TomographyMode) -> Vec<[f64; 4]> {
    let series = if metric == Metric::Seconds { Series::Timing } else { Series::ErrorSweep };
    let mut rows: Vec<[f64; 4]> = report
        .points
        .iter()
        .filter(|p| p.point.mode == mode && p.series.contains(&series))
        .filter_map(|p| {
            let s = metric.summary(p)?;
            let x = if series == Series::Timing { p.point.modes as f64 } else { p.point.epsilon };
            Some([x, s.median, s.q25, s.q75])
        })
        .collect();
    rows.sort_by(|a, b| a[0].total_cmp(&b[0]));
    rows
}

/// Write one `.dat` file per (metric, mode) curve that has data, returning
/// the paths written.
pub fn emit_plotdata(report: &BenchmarkReport, dir: &Path) -> Result<Vec<PathBuf>> {
    if report.points.is_empty() {
        return Err(Error::Validation { field: "report".into(), reason: "no grid points".into() });
    }
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let mut written = Vec::new();
    for metric in [Metric::DeltaTMax, Metric::DeltaF95, Metric::Seconds] {
        for mode in [TomographyMode::Full, TomographyMode::IntensityOnly] {
            let rows = plot_rows(report, metric, mode);
            if rows.is_empty() {
                continue;
            }
            let mut text = String::from("# x median q25 q75\n");
            for [x, median, q25, q75] in rows {
                text.push_str(&format!("{x:e} {median:e} {q25:e} {q75:e}\n"));
            }
            let path = dir.join(format!("{}_{}.dat", metric.as_str(), mode.as_str()));
            fs::write(&path, text).map_err(|e| io_error(&path, e))?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Parse a `.dat` file written by [`emit_plotdata`].
pub fn read_plotdata(path: &Path) -> Result<Vec<[f64; 4]>> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|line| {
            let values: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| io_error(path, e)))
                .collect::<Result<_>>()?;
            <[f64; 4]>::try_from(values).map_err(|_| io_error(path, "expected 4 columns"))
        })
        .collect()
}

/// Write every output of a run into `dir`.
pub fn write_outputs(config: &ExperimentConfig, report: &BenchmarkReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let write = |name: &str, text: String| {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| io_error(&path, e))
    };
    write("report.csv", report_csv(report)?)?;
    write("timing.csv", timing_csv(report)?)?;
    write("report.json", report_json(config, report))?;
    emit_plotdata(report, &dir.join("plotdata"))?;
    Ok(())
}
