use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nadyn_core::entropy::{format_g, CountRecord, CountTable};
use serde::Serialize;

use crate::CliError;

/// One `(system_id, i, epsilon)` group across every input table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub system_id: String,
    pub i: i64,
    pub epsilon: f64,
    pub records: usize,
    pub n_max: usize,
    pub separated: u64,
    pub spanning_ub: u64,
    /// `ln s_n − ln s_{n−1}` at the two largest `n`.
    pub last_step_rate: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Summary {
    pub files: usize,
    pub rows: Vec<SummaryRow>,
}

impl Summary {
    pub fn to_text(&self) -> String {
        let mut s = String::from("system_id\ti\tepsilon\trecords\tn_max\tseparated\tspanning_ub\tlast_step_rate\n");
        for r in &self.rows {
            let rate = r.last_step_rate.map(format_g).unwrap_or_else(|| "-".into());
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.system_id,
                r.i,
                format_g(r.epsilon),
                r.records,
                r.n_max,
                r.separated,
                r.spanning_ub,
                rate
            );
        }
        s
    }
}

fn expand(paths: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut inner: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| CliError::io(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|q| q.extension().is_some_and(|x| x == "csv"))
                .collect();
            inner.sort();
            files.extend(inner);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

fn read_table(path: &Path) -> Result<CountTable, CliError> {
    let f = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    CountTable::read_csv(f).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn cmd_report(paths: &[PathBuf]) -> Result<Summary, CliError> {
    let files = expand(paths)?;
    let mut records: Vec<CountRecord> = Vec::new();
    for f in &files {
        records.extend(read_table(f)?.records);
    }
    records.sort_by(|a, b| {
        (a.system_id.as_str(), a.i)
            .cmp(&(b.system_id.as_str(), b.i))
            .then(a.epsilon.total_cmp(&b.epsilon))
            .then(a.n.cmp(&b.n))
    });
    let mut rows = Vec::new();
    for group in records.chunk_by(|a, b| a.system_id == b.system_id && a.i == b.i && a.epsilon == b.epsilon) {
        let last = group.last().unwrap();
        let prev = group.iter().rev().find(|r| r.n + 1 == last.n);
        let last_step_rate = prev
            .filter(|p| p.separated > 0 && last.separated > 0)
            .map(|p| (last.separated as f64).ln() - (p.separated as f64).ln());
        rows.push(SummaryRow {
            system_id: last.system_id.clone(),
            i: last.i,
            epsilon: last.epsilon,
            records: group.len(),
            n_max: last.n,
            separated: last.separated,
            spanning_ub: last.spanning_ub,
            last_step_rate,
        });
    }
    Ok(Summary {
        files: files.len(),
        rows,
    })
}
