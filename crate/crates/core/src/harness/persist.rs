//! Writing and reading a run directory.
//!
//! `summary.json` holds the reproducible result, `series.csv` the per-path
//! functional rows, `config.echo.json` the effective configuration and
//! `runtime.json` the facts that vary between runs (workers, wall time).

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use super::{series_digest, EnsembleSummary, RuntimeInfo, SeriesRow};
use crate::error::{Error, Result};

pub const SUMMARY_FILE: &str = "summary.json";
pub const SERIES_FILE: &str = "series.csv";
pub const CONFIG_FILE: &str = "config.echo.json";
pub const RUNTIME_FILE: &str = "runtime.json";

const SERIES_HEADER: [&str; 4] = ["path_index", "functional", "time", "value"];

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_error(what: &'static str, path: &Path, message: impl ToString) -> Error {
    Error::Format {
        what,
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = File::create(path).map_err(io_error(path))?;
    f.write_all(text.as_bytes()).map_err(io_error(path))?;
    f.write_all(b"\n").map_err(io_error(path))
}

fn write_series(path: &Path, summary: &EnsembleSummary) -> Result<()> {
    let file = File::create(path).map_err(io_error(path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let fail = |e: csv::Error| format_error("series csv", path, e);
    w.write_record(SERIES_HEADER).map_err(fail)?;
    for r in &summary.series {
        let name = &summary.series_functionals[r.functional];
        w.write_record([
            r.path_index.to_string().as_str(),
            name.as_str(),
            format!("{:?}", r.time).as_str(),
            format!("{:?}", r.value).as_str(),
        ])
        .map_err(fail)?;
    }
    w.flush().map_err(io_error(path))
}

/// Writes the four files of a run into `dir`, creating it if needed.
pub fn persist(summary: &EnsembleSummary, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_error(dir))?;
    write_text(&dir.join(SUMMARY_FILE), &summary.to_json())?;
    write_series(&dir.join(SERIES_FILE), summary)?;
    let config = serde_json::to_string_pretty(&summary.config).expect("configurations are plain data");
    write_text(&dir.join(CONFIG_FILE), &config)?;
    let runtime = serde_json::to_string_pretty(&summary.runtime).expect("runtime info is plain data");
    write_text(&dir.join(RUNTIME_FILE), &runtime)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &'static str) -> Result<T> {
    let f = File::open(path).map_err(io_error(path))?;
    serde_json::from_reader(BufReader::new(f)).map_err(|e| format_error(what, path, e))
}

fn read_series(path: &Path, names: &[String]) -> Result<Vec<SeriesRow>> {
    let file = File::open(path).map_err(io_error(path))?;
    let mut r = csv::Reader::from_reader(BufReader::new(file));
    let header = r.headers().map_err(|e| format_error("series csv", path, e))?;
    if header.iter().ne(SERIES_HEADER) {
        return Err(format_error("series csv", path, format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record.map_err(|e| format_error("series csv", path, e))?;
        let bad = |what: &str| format_error("series csv", path, format!("row {}: bad {what}", line + 1));
        if record.len() != 4 {
            return Err(bad("field count"));
        }
        let functional = names.iter().position(|n| n == &record[1]).ok_or_else(|| bad("functional"))?;
        rows.push(SeriesRow {
            path_index: record[0].parse().map_err(|_| bad("path_index"))?,
            functional,
            time: record[2].parse().map_err(|_| bad("time"))?,
            value: record[3].parse().map_err(|_| bad("value"))?,
        });
    }
    Ok(rows)
}

/// Reads a run directory written by [`persist`], verifying the series digest.
pub fn load(dir: &Path) -> Result<EnsembleSummary> {
    let summary_path = dir.join(SUMMARY_FILE);
    let mut summary: EnsembleSummary = read_json(&summary_path, "summary")?;
    let series_path = dir.join(SERIES_FILE);
    summary.series = read_series(&series_path, &summary.series_functionals)?;
    if summary.series.len() != summary.series_rows || series_digest(&summary.series) != summary.series_digest {
        return Err(format_error("series csv", &series_path, "rows do not match the summary digest"));
    }
    summary.runtime = read_json::<RuntimeInfo>(&dir.join(RUNTIME_FILE), "runtime")?;
    if summary.compute_content_hash() != summary.content_hash {
        return Err(format_error("summary", &summary_path, "content hash mismatch"));
    }
    Ok(summary)
}
