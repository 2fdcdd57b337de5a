//! CSV artifacts. Floats are written with 17 significant digits so that
//! parsing a file gives back the exact values.

use std::path::Path;

use crate::error::{Error, Result};
use crate::lqg::Trajectory;
use crate::meta::MetaTrace;
use crate::sim::ExperimentReport;

/// Scientific notation with 17 significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn optional(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

/// A header plus rows of pre-formatted fields.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::dim("csv row fields", self.header.len(), row.len()));
        }
        self.rows.push(row);
        Ok(())
    }
}

pub fn write_csv(table: &CsvTable, path: &Path) -> Result<()> {
    let io_err = |e: std::io::Error| Error::Io { path: path.display().to_string(), source: e };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&table.header)?;
    for row in &table.rows {
        if row.len() != table.header.len() {
            return Err(Error::dim("csv row fields", table.header.len(), row.len()));
        }
        w.write_record(row)?;
    }
    w.flush().map_err(io_err)
}

pub const TRACE_HEADER: [&str; 4] = ["iteration", "meta_cost", "mean_expected_cost", "grad_norm"];

/// One row per outer iteration. Wall time is left out so that files are
/// reproducible byte for byte.
pub fn trace_table(trace: &MetaTrace) -> CsvTable {
    let mut table = CsvTable::new(TRACE_HEADER);
    for r in &trace.records {
        table.rows.push(vec![
            r.iteration.to_string(),
            format_float(r.meta_cost),
            format_float(r.mean_expected_cost),
            format_float(r.grad_norm),
        ]);
    }
    table
}

/// `t`, the state, then leader and follower controls. The final row holds
/// the terminal state with empty control fields.
pub fn trajectory_table(traj: &Trajectory) -> CsvTable {
    let n = traj.states.first().map_or(0, |x| x.len());
    let rl = traj.leader_controls.first().map_or(0, |u| u.len());
    let rf = traj.follower_controls.first().map_or(0, |u| u.len());
    let header = std::iter::once("t".to_string())
        .chain((0..n).map(|i| format!("x_{i}")))
        .chain((0..rl).map(|i| format!("u_leader_{i}")))
        .chain((0..rf).map(|i| format!("u_follower_{i}")));
    let mut table = CsvTable::new(header);
    for (t, x) in traj.states.iter().enumerate() {
        let mut row = vec![t.to_string()];
        row.extend(x.iter().map(|v| format_float(*v)));
        match (traj.leader_controls.get(t), traj.follower_controls.get(t)) {
            (Some(ul), Some(uf)) => {
                row.extend(ul.iter().map(|v| format_float(*v)));
                row.extend(uf.iter().map(|v| format_float(*v)));
            }
            _ => row.extend(std::iter::repeat_n(String::new(), rl + rf)),
        }
        table.rows.push(row);
    }
    table
}

pub const REPORT_HEADER: [&str; 10] = [
    "type",
    "expected_meta",
    "expected_adapted",
    "simulated_adapted",
    "expected_unilateral",
    "simulated_unilateral",
    "expected_individual",
    "simulated_individual",
    "expected_transfer",
    "simulated_transfer",
];

/// One row per follower type; columns an experiment did not produce are
/// empty.
pub fn report_table(report: &ExperimentReport) -> CsvTable {
    let mut table = CsvTable::new(REPORT_HEADER);
    for r in &report.rows {
        let mut row = vec![r.type_id.to_string()];
        row.extend(r.values().into_iter().map(optional));
        table.rows.push(row);
    }
    table
}

/// Per-run simulated costs: `run, cost`.
pub fn costs_table(costs: &[f64]) -> CsvTable {
    let mut table = CsvTable::new(["run", "cost"]);
    for (i, c) in costs.iter().enumerate() {
        table.rows.push(vec![i.to_string(), format_float(*c)]);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Vector;
    use crate::meta::TraceRecord;

    fn read(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
        let mut r = csv::Reader::from_path(path).unwrap();
        let header = r.headers().unwrap().iter().map(String::from).collect();
        let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
        (header, rows)
    }

    #[test]
    fn floats_round_trip_exactly() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, 123456.789] {
            assert_eq!(format_float(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn trace_schema() {
        let trace = MetaTrace {
            records: vec![TraceRecord {
                iteration: 0,
                meta_cost: 1.0 / 7.0,
                mean_expected_cost: 2.0,
                grad_norm: 0.5,
                wall_time_secs: 9.9,
            }],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/trace.csv");
        write_csv(&trace_table(&trace), &path).unwrap();
        let (header, rows) = read(&path);
        assert_eq!(header, TRACE_HEADER);
        assert_eq!(rows[0][1].parse::<f64>().unwrap(), 1.0 / 7.0);
    }

    #[test]
    fn trajectory_schema() {
        let traj = Trajectory {
            states: vec![Vector::from_vec(vec![1.0, 2.0, 3.0]), Vector::from_vec(vec![0.0, 0.5, 1.0])],
            leader_controls: vec![Vector::from_vec(vec![0.1])],
            follower_controls: vec![Vector::from_vec(vec![0.2, 0.3])],
            noise: vec![Vector::zeros(3)],
            realized_cost: 1.0,
        };
        let table = trajectory_table(&traj);
        assert_eq!(table.header, ["t", "x_0", "x_1", "x_2", "u_leader_0", "u_follower_0", "u_follower_1"]);
        assert_eq!(table.rows.len(), 2);
        assert_eq!(table.rows[1][4], "");
        assert!(table.rows.iter().all(|r| r.len() == 7));
    }

    #[test]
    fn mismatched_rows_rejected() {
        let mut table = CsvTable::new(["a", "b"]);
        assert!(table.push(vec!["1".into()]).is_err());
        table.rows.push(vec!["1".into()]);
        let dir = tempfile::tempdir().unwrap();
        assert!(write_csv(&table, &dir.path().join("x.csv")).is_err());
    }
}
