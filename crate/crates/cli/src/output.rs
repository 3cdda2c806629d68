//! CSV files written and read by the commands.

use std::io::{Read, Write};
use std::path::Path;

use selfmod_core::{HistoryRow, RunHistory, SweepResult};

use crate::CliError;

pub const HISTORY_HEADER: [&str; 9] = [
    "seed",
    "iteration",
    "total_env_steps",
    "parent_fitness",
    "child_fitness",
    "best_fitness",
    "nonempty_buckets",
    "range_min",
    "range_max",
];

/// One parsed row of a history CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedRow {
    pub seed: u64,
    pub row: HistoryRow,
}

pub fn write_histories<W: Write>(out: W, runs: &[(u64, &RunHistory)]) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(HISTORY_HEADER)?;
    for (seed, history) in runs {
        for r in &history.rows {
            w.write_record([
                seed.to_string(),
                r.iteration.to_string(),
                r.total_env_steps.to_string(),
                r.parent_fitness.to_string(),
                r.child_fitness.to_string(),
                r.best_fitness.to_string(),
                r.nonempty_buckets.to_string(),
                r.range_min.to_string(),
                r.range_max.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_histories_to(path: &Path, runs: &[(u64, &RunHistory)]) -> Result<(), CliError> {
    let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    write_histories(std::io::BufWriter::new(file), runs)
}

pub fn read_histories<R: Read>(input: R) -> Result<Vec<SeedRow>, CliError> {
    let mut r = csv::ReaderBuilder::new().from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(HISTORY_HEADER) {
        return Err(CliError::Data(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut rows = Vec::new();
    for (n, record) in r.records().enumerate() {
        let record = record?;
        let bad = |field: &str| CliError::Data(format!("data row {}: bad {field}", n + 1));
        let int = |i: usize| record[i].parse::<u64>().map_err(|_| bad(HISTORY_HEADER[i]));
        let real = |i: usize| record[i].parse::<f64>().map_err(|_| bad(HISTORY_HEADER[i]));
        rows.push(SeedRow {
            seed: int(0)?,
            row: HistoryRow {
                iteration: int(1)? as usize,
                total_env_steps: int(2)?,
                parent_fitness: real(3)?,
                child_fitness: real(4)?,
                best_fitness: real(5)?,
                nonempty_buckets: int(6)? as usize,
                range_min: real(7)?,
                range_max: real(8)?,
            },
        });
    }
    Ok(rows)
}

pub fn read_histories_from(path: &Path) -> Result<Vec<SeedRow>, CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    read_histories(std::io::BufReader::new(file))
}

pub fn write_sweep(path: &Path, sweep: &SweepResult) -> Result<(), CliError> {
    let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file);
    w.write_record(["sigma", "mean_final_best"])?;
    for row in &sweep.rows {
        w.write_record([row.sigma.to_string(), row.mean_final_best.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
