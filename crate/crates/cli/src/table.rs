//! The convergence table and its CSV form.
//!
//! Columns, in order: `level`, `h_surface`, `n_triangles`, `n_cells`,
//! `n_unknowns`, `third_green_rel`, `trace_identity_rel`, `probe_rel`,
//! `interior_norm_rel`, `trace_recovery_rel`, `conormal_recovery_rel`,
//! `condition_estimate`, `runtime_s`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub level: usize,
    pub h_surface: f64,
    pub n_triangles: usize,
    pub n_cells: usize,
    pub n_unknowns: usize,
    pub third_green_rel: f64,
    pub trace_identity_rel: f64,
    pub probe_rel: f64,
    pub interior_norm_rel: f64,
    pub trace_recovery_rel: f64,
    pub conormal_recovery_rel: f64,
    pub condition_estimate: f64,
    pub runtime_s: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.rows.windows(2).any(|w| w[0].level >= w[1].level) {
            return Err(CliError::Failure("convergence levels are not strictly increasing".into()));
        }
        for r in &self.rows {
            let m = [
                r.third_green_rel,
                r.trace_identity_rel,
                r.probe_rel,
                r.interior_norm_rel,
                r.trace_recovery_rel,
                r.conormal_recovery_rel,
                r.runtime_s,
            ];
            if m.iter().any(|v| !(*v >= 0.0)) {
                return Err(CliError::Failure(format!("negative or undefined metric at level {}", r.level)));
            }
        }
        Ok(())
    }

    /// Whether the interior error decreases strictly from row to row.
    pub fn interior_error_decreases(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].interior_norm_rel < w[0].interior_norm_rel)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(w);
        for r in &self.rows {
            w.serialize(r).map_err(|e| CliError::Failure(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, CliError> {
        let mut rd = csv::Reader::from_reader(r);
        let rows = rd
            .deserialize()
            .collect::<Result<Vec<ConvergenceRow>, _>>()
            .map_err(|e| CliError::Failure(format!("bad convergence table: {e}")))?;
        Ok(Self { rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(level: usize, err: f64) -> ConvergenceRow {
        ConvergenceRow {
            level,
            h_surface: 0.6 / (1 << level) as f64,
            n_triangles: 20 << (2 * level),
            n_cells: 100 * level,
            n_unknowns: 140 * level,
            third_green_rel: err / 3.0,
            trace_identity_rel: err / 7.0,
            probe_rel: 0.1 * err,
            interior_norm_rel: err,
            trace_recovery_rel: 1.0 / 3.0,
            conormal_recovery_rel: 0.1 + 0.2,
            condition_estimate: 1.5e2 * level as f64,
            runtime_s: 0.25 * level as f64,
        }
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let t = ConvergenceTable {
            rows: vec![row(1, 0.0853), row(2, 0.0207), row(3, std::f64::consts::PI * 1e-3)],
        };
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("level,h_surface,n_triangles,n_cells,n_unknowns,third_green_rel,"));
        let back = ConvergenceTable::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, t);
        assert!(t.interior_error_decreases());
        t.validate().unwrap();
    }

    #[test]
    fn invariants_are_checked() {
        let t = ConvergenceTable {
            rows: vec![row(2, 0.01), row(1, 0.02)],
        };
        assert!(t.validate().is_err());
        let mut r = row(1, 0.01);
        r.probe_rel = -1.0;
        assert!(ConvergenceTable { rows: vec![r] }.validate().is_err());
        let flat = ConvergenceTable {
            rows: vec![row(1, 0.01), row(2, 0.01)],
        };
        assert!(!flat.interior_error_decreases());
    }
}
