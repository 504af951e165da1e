//! CSV outputs: a provenance comment line, a header row, then data rows.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Result;
use crate::experiments::{Method, PhaseGrid, RocPoint};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// What produced a table: the seed and a flat `key=value;...` description of
/// the configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunMeta {
    pub seed: u64,
    pub config: String,
}

impl RunMeta {
    pub fn new(seed: u64, pairs: &[(&str, String)]) -> Self {
        let config = pairs.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";");
        RunMeta { seed, config }
    }

    pub fn comment(&self) -> String {
        format!("# corpca {VERSION} seed={} config={}", self.seed, self.config)
    }
}

/// Writes `rows` under `header` with the comment line of `meta` on top.
pub fn write_table(path: &Path, meta: &RunMeta, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{}", meta.comment())?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Shortest round-trip decimal form; empty for NaN.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

pub const PHASE_HEADER: [&str; 7] = ["s0", "m", "trials", "successes", "bound_nl1", "bound_l1l1", "bound_l1"];

/// Rows of the phase grid for one method.
pub fn phase_rows(grid: &PhaseGrid, method: Method) -> Vec<Vec<String>> {
    grid.cells
        .iter()
        .filter(|c| c.method == method)
        .map(|c| {
            let b = grid.bound(c.s0);
            vec![
                c.s0.to_string(),
                c.m.to_string(),
                c.trials.to_string(),
                c.successes.to_string(),
                fmt_f64(b.map_or(f64::NAN, |b| b.nl1)),
                fmt_f64(b.map_or(f64::NAN, |b| b.l1l1)),
                fmt_f64(b.map_or(f64::NAN, |b| b.l1)),
            ]
        })
        .collect()
}

pub fn write_phase_csv(path: &Path, grid: &PhaseGrid, method: Method, meta: &RunMeta) -> Result<()> {
    write_table(path, meta, &PHASE_HEADER, &phase_rows(grid, method))
}

pub fn write_roc_csv(path: &Path, points: &[RocPoint], meta: &RunMeta) -> Result<()> {
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| vec![fmt_f64(p.threshold), fmt_f64(p.fpr), fmt_f64(p.tpr)])
        .collect();
    write_table(path, meta, &["threshold", "fpr", "tpr"], &rows)
}

/// Data rows of a table written by [`write_table`]: comment lines and the
/// header are skipped.
pub fn read_data_rows(path: &Path) -> Result<Vec<Vec<String>>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .from_path(path)?;
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec?.iter().map(str::to_owned).collect());
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comment_header_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let meta = RunMeta::new(7, &[("n", "500".into()), ("mode", "l1".into())]);
        write_table(&path, &meta, &["a", "b"], &[vec!["1".into(), fmt_f64(0.5)]]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), format!("# corpca {VERSION} seed=7 config=n=500;mode=l1"));
        assert_eq!(lines.next().unwrap(), "a,b");
        assert_eq!(lines.next().unwrap(), "1,0.5");
        assert_eq!(read_data_rows(&path).unwrap(), vec![vec!["1".to_string(), "0.5".to_string()]]);
    }
}
