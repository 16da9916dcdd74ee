//! Sweep archives (JSON) and the flat CSV of aggregated points.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sweep::{AggregatedPoint, SweepResult};
use super::AggregateMode;
use crate::error::{Error, Result};

pub const CSV_VERSION: &str = "granlab-sweep v1";
const ARCHIVE_FORMAT: &str = "granlab-sweep";

#[derive(Serialize, Deserialize)]
struct Archive {
    format: String,
    version: u32,
    #[serde(flatten)]
    result: SweepResult,
}

pub fn save_archive(path: &Path, result: &SweepResult) -> Result<()> {
    let archive = Archive {
        format: ARCHIVE_FORMAT.into(),
        version: 1,
        result: result.clone(),
    };
    crate::io::write_json_pretty(path, &archive)
}

pub fn load_archive(path: &Path) -> Result<SweepResult> {
    let archive: Archive = crate::io::read_json(path)?;
    if archive.format != ARCHIVE_FORMAT {
        return Err(Error::config(format!(
            "{} is not a sweep archive (format '{}')",
            path.display(),
            archive.format
        )));
    }
    Ok(archive.result)
}

/// `%.9g`-style rendering: 9 significant digits, `.` separator, trailing
/// zeros trimmed, exponent form outside `1e-5 ..< 1e9`.
pub fn format_g9(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-5..9).contains(&exp) {
        trim(&format!("{v:.*}", (8 - exp) as usize))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mantissa), exp.abs())
    }
}

/// One data row of the results CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub axis_value: f64,
    pub acc_fine: f64,
    pub acc_coarse: f64,
    pub delta: f64,
    pub spread_low: f64,
    pub spread_high: f64,
    pub n_over_p: f64,
    pub replicates: usize,
    pub fine_low: f64,
    pub fine_high: f64,
    pub coarse_low: f64,
    pub coarse_high: f64,
    pub failures: usize,
}

impl CsvRow {
    /// `spread_*` bound the delta by one standard error of the paired
    /// per-run differences; `fine_*`/`coarse_*` follow the aggregate mode.
    pub fn from_point(p: &AggregatedPoint) -> Self {
        let nan = f64::NAN;
        let delta = p.delta.unwrap_or(nan);
        let se = p.delta_se.unwrap_or(nan);
        let fine = p.fine;
        let coarse = p.coarse;
        CsvRow {
            axis_value: p.axis_value,
            acc_fine: fine.map_or(nan, |s| s.center()),
            acc_coarse: coarse.map_or(nan, |s| s.center()),
            delta,
            spread_low: delta - se,
            spread_high: delta + se,
            n_over_p: p.n_over_p,
            replicates: p.replicates,
            fine_low: fine.map_or(nan, |s| s.low()),
            fine_high: fine.map_or(nan, |s| s.high()),
            coarse_low: coarse.map_or(nan, |s| s.low()),
            coarse_high: coarse.map_or(nan, |s| s.high()),
            failures: p.failures,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub axis: String,
    pub aggregate: AggregateMode,
    pub rows: Vec<CsvRow>,
}

pub fn csv_columns(mode: AggregateMode) -> [&'static str; 13] {
    let (fine, coarse) = match mode {
        AggregateMode::Quartiles => ("acc_fine_median", "acc_coarse_median"),
        AggregateMode::StandardError => ("acc_fine_mean", "acc_coarse_mean"),
    };
    [
        "axis_value",
        fine,
        coarse,
        "delta",
        "spread_low",
        "spread_high",
        "n_over_p",
        "replicates",
        "fine_low",
        "fine_high",
        "coarse_low",
        "coarse_high",
        "failures",
    ]
}

pub fn render_csv(table: &CsvTable) -> String {
    let mut out = format!(
        "# {CSV_VERSION} axis={} aggregate={}\n{}\n",
        table.axis,
        table.aggregate,
        csv_columns(table.aggregate).join(",")
    );
    for r in &table.rows {
        let reals = [
            r.axis_value,
            r.acc_fine,
            r.acc_coarse,
            r.delta,
            r.spread_low,
            r.spread_high,
            r.n_over_p,
        ];
        let tail = [r.fine_low, r.fine_high, r.coarse_low, r.coarse_high];
        let fields: Vec<String> = reals
            .iter()
            .map(|&v| format_g9(v))
            .chain([r.replicates.to_string()])
            .chain(tail.iter().map(|&v| format_g9(v)))
            .chain([r.failures.to_string()])
            .collect();
        writeln!(out, "{}", fields.join(",")).expect("string write");
    }
    out
}

pub fn sweep_table(result: &SweepResult) -> CsvTable {
    CsvTable {
        axis: result.spec.axis.to_string(),
        aggregate: result.spec.aggregate,
        rows: result.aggregated().iter().map(CsvRow::from_point).collect(),
    }
}

/// Writes `<dir>/sweep.json` and `<dir>/sweep.csv`.
pub fn persist(dir: &Path, result: &SweepResult) -> Result<()> {
    save_archive(&dir.join("sweep.json"), result)?;
    crate::io::write_text(&dir.join("sweep.csv"), &render_csv(&sweep_table(result)))
}

pub fn parse_csv(text: &str, origin: &str) -> Result<CsvTable> {
    let fail = |line: usize, message: String| Error::Table {
        path: origin.to_string(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (n, first) = lines.next().ok_or_else(|| fail(1, "empty file".into()))?;
    let meta = first
        .strip_prefix("# ")
        .and_then(|rest| rest.strip_prefix(CSV_VERSION))
        .ok_or_else(|| fail(n, format!("expected a '# {CSV_VERSION}' header comment")))?;
    let mut axis = None;
    let mut aggregate = None;
    for field in meta.split_whitespace() {
        match field.split_once('=') {
            Some(("axis", v)) => axis = Some(v.to_string()),
            Some(("aggregate", v)) => {
                aggregate = Some(
                    v.parse::<AggregateMode>()
                        .map_err(|e| fail(n, e.to_string()))?,
                )
            }
            _ => return Err(fail(n, format!("unexpected header field '{field}'"))),
        }
    }
    let axis = axis.ok_or_else(|| fail(n, "header lacks axis=".into()))?;
    let aggregate = aggregate.ok_or_else(|| fail(n, "header lacks aggregate=".into()))?;

    let columns = csv_columns(aggregate);
    let (n, header) = lines
        .next()
        .ok_or_else(|| fail(n + 1, "missing column header".into()))?;
    if header.split(',').ne(columns.iter().copied()) {
        return Err(fail(n, format!("expected columns {}", columns.join(","))));
    }

    let mut rows = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(fail(
                n,
                format!("expected {} fields, found {}", columns.len(), fields.len()),
            ));
        }
        let real = |i: usize| -> Result<f64> {
            fields[i].trim().parse::<f64>().map_err(|_| {
                fail(
                    n,
                    format!("{}: '{}' is not a number", columns[i], fields[i]),
                )
            })
        };
        let count = |i: usize| -> Result<usize> {
            fields[i]
                .trim()
                .parse::<usize>()
                .map_err(|_| fail(n, format!("{}: '{}' is not a count", columns[i], fields[i])))
        };
        rows.push(CsvRow {
            axis_value: real(0)?,
            acc_fine: real(1)?,
            acc_coarse: real(2)?,
            delta: real(3)?,
            spread_low: real(4)?,
            spread_high: real(5)?,
            n_over_p: real(6)?,
            replicates: count(7)?,
            fine_low: real(8)?,
            fine_high: real(9)?,
            coarse_low: real(10)?,
            coarse_high: real(11)?,
            failures: count(12)?,
        });
    }
    Ok(CsvTable {
        axis,
        aggregate,
        rows,
    })
}

pub fn read_csv(path: &Path) -> Result<CsvTable> {
    let bytes = crate::io::read_bytes(path)?;
    let text = String::from_utf8(bytes).map_err(|e| Error::Table {
        path: path.display().to_string(),
        line: 0,
        message: format!("not UTF-8: {e}"),
    })?;
    parse_csv(&text, &path.display().to_string())
}
