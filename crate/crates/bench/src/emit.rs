//! Output formats: CSV (appended cell by cell), JSON, Markdown and gnuplot data.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs::{File, OpenOptions};
use std::path::{Path, PathBuf};

use crate::sweep::{CellResult, SweepResult};
use crate::BenchError;

pub const CSV_HEADER: &str =
    "planner,n_exp,n_sim,seed,return_mean,return_std,steps_mean,wall_ms_per_plan,speedup,sel_ms,exp_ms,sim_ms,bp_ms,comm_ms";

fn csv_err(e: csv::Error) -> BenchError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => BenchError::Io(io),
        other => BenchError::Runtime(format!("csv: {other:?}")),
    }
}

/// Appends one flushed row per cell, so an interrupted sweep keeps every
/// finished cell on disk.
pub struct CsvSink {
    writer: csv::Writer<File>,
}

impl CsvSink {
    /// Truncates `path` and writes the header.
    pub fn create(path: &Path) -> Result<Self, BenchError> {
        let file = OpenOptions::new().create(true).write(true).truncate(true).open(path)?;
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(file);
        writer.write_record(CSV_HEADER.split(',')).map_err(csv_err)?;
        writer.flush()?;
        Ok(Self { writer })
    }

    pub fn append(&mut self, cell: &CellResult) -> Result<(), BenchError> {
        self.writer.serialize(cell).map_err(csv_err)?;
        self.writer.flush()?;
        Ok(())
    }
}

pub fn read_csv(path: &Path) -> Result<Vec<CellResult>, BenchError> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let header: Vec<String> = reader.headers().map_err(csv_err)?.iter().map(str::to_owned).collect();
    if header.join(",") != CSV_HEADER {
        return Err(BenchError::Runtime(format!("unexpected csv header in {}", path.display())));
    }
    reader.deserialize().map(|r| r.map_err(csv_err)).collect()
}

pub fn write_json(path: &Path, result: &SweepResult) -> Result<(), BenchError> {
    let text = serde_json::to_string_pretty(result).map_err(|e| BenchError::Runtime(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_json(path: &Path) -> Result<SweepResult, BenchError> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| BenchError::Runtime(format!("{}: {e}", path.display())))
}

fn cell<'a>(cells: &'a [CellResult], planner: &str, seed: u64, e: usize, s: usize) -> Option<&'a CellResult> {
    cells.iter().find(|c| c.planner == planner && c.seed == seed && c.n_exp == e && c.n_sim == s)
}

/// Speedup table with one row per expansion-worker count and one column per
/// simulation-worker count. Missing cells are shown as `-`.
pub fn speedup_table(cells: &[CellResult], planner: &str, seed: u64) -> String {
    let mine: Vec<&CellResult> = cells.iter().filter(|c| c.planner == planner && c.seed == seed).collect();
    let exps: BTreeSet<usize> = mine.iter().map(|c| c.n_exp).collect();
    let sims: BTreeSet<usize> = mine.iter().map(|c| c.n_sim).collect();
    let mut out = String::new();
    let _ = write!(out, "| {planner} (seed {seed}) |");
    for s in &sims {
        let _ = write!(out, " N_sim={s} |");
    }
    out.push_str("\n|---|");
    out.push_str(&"---|".repeat(sims.len()));
    out.push('\n');
    for e in &exps {
        let _ = write!(out, "| N_exp={e} |");
        for s in &sims {
            match cell(cells, planner, seed, *e, *s) {
                Some(c) => {
                    let _ = write!(out, " {:.2} |", c.speedup);
                }
                None => out.push_str(" - |"),
            }
        }
        out.push('\n');
    }
    out
}

/// Mean episode return per planner and simulation-worker count, at the
/// smallest expansion-worker count present for each planner.
pub fn return_table(cells: &[CellResult]) -> String {
    let mut planners: Vec<&str> = Vec::new();
    for c in cells {
        if !planners.contains(&c.planner.as_str()) {
            planners.push(&c.planner);
        }
    }
    let sims: BTreeSet<usize> = cells.iter().map(|c| c.n_sim).collect();
    let mut out = String::from("| planner |");
    for s in &sims {
        let _ = write!(out, " N_sim={s} |");
    }
    out.push_str("\n|---|");
    out.push_str(&"---|".repeat(sims.len()));
    out.push('\n');
    for p in planners {
        let _ = write!(out, "| {p} |");
        for s in &sims {
            let row: Vec<&CellResult> = cells.iter().filter(|c| c.planner == p && c.n_sim == *s).collect();
            let Some(min_exp) = row.iter().map(|c| c.n_exp).min() else {
                out.push_str(" - |");
                continue;
            };
            let vals: Vec<f64> = row.iter().filter(|c| c.n_exp == min_exp).map(|c| c.return_mean).collect();
            let _ = write!(out, " {:.3} |", vals.iter().sum::<f64>() / vals.len() as f64);
        }
        out.push('\n');
    }
    out
}

pub fn markdown(result: &SweepResult) -> String {
    let mut seen = Vec::new();
    let mut out = String::new();
    for c in &result.cells {
        let key = (c.planner.clone(), c.seed);
        if !seen.contains(&key) {
            out.push_str(&speedup_table(&result.cells, &c.planner, c.seed));
            out.push('\n');
            seen.push(key);
        }
    }
    out.push_str("Mean episode return:\n\n");
    out.push_str(&return_table(&result.cells));
    if !result.failures.is_empty() {
        out.push_str("\nFailed cells:\n\n");
        for f in &result.failures {
            let _ = writeln!(out, "- {} n_exp={} n_sim={} seed={}: {}", f.planner, f.n_exp, f.n_sim, f.seed, f.error);
        }
    }
    out
}

/// Whitespace-separated columns for gnuplot; blocks per planner and seed are
/// separated by two blank lines so `index` can pick them out.
pub fn gnuplot(cells: &[CellResult]) -> String {
    let mut out = String::from("# planner seed n_exp n_sim speedup wall_ms_per_plan return_mean return_std\n");
    let mut last: Option<(&str, u64)> = None;
    for c in cells {
        let key = (c.planner.as_str(), c.seed);
        if last.is_some_and(|k| k != key) {
            out.push_str("\n\n");
        }
        last = Some(key);
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {} {}",
            c.planner, c.seed, c.n_exp, c.n_sim, c.speedup, c.wall_ms_per_plan, c.return_mean, c.return_std
        );
    }
    out
}

/// Paths of the files written for output stem `stem` in `dir`.
pub fn output_paths(dir: &Path, stem: &str) -> [PathBuf; 4] {
    ["csv", "json", "md", "dat"].map(|ext| dir.join(format!("{stem}.{ext}")))
}

/// Writes JSON, Markdown and gnuplot files. The CSV is written while the
/// sweep runs.
pub fn write_summaries(dir: &Path, stem: &str, result: &SweepResult) -> Result<(), BenchError> {
    let [_, json, md, dat] = output_paths(dir, stem);
    write_json(&json, result)?;
    std::fs::write(md, markdown(result))?;
    std::fs::write(dat, gnuplot(&result.cells))?;
    Ok(())
}
