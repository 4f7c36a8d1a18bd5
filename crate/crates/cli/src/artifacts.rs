//! CSV and JSON artifacts.
//!
//! Every CSV starts with a `# qhd-<kind> v1 ...` comment line, then a header
//! row. Numbers are written with 17 significant digits so they read back
//! bit-identically.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use qhd_core::functionals::{DiagnosticsFrame, Snapshot};
use qhd_core::Grid;
use serde::Serialize;

use crate::error::{CliError, Result};

pub const DIAGNOSTICS_HEADER: &str = "# qhd-diagnostics v1";
pub const FIELDS_TAG: &str = "# qhd-fields v1";
pub const PSI_TAG: &str = "# qhd-psi v1";

pub const FIELD_COLUMNS: [&str; 10] = [
    "x",
    "sqrt_rho",
    "Lambda",
    "rho",
    "J",
    "e",
    "lambda",
    "dx_sqrt_rho",
    "psi_re",
    "psi_im",
];

pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

/// Write a tagged CSV: comment line, header, rows.
pub fn write_table(path: &Path, tag: &str, columns: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let io = |e: std::io::Error| CliError::io(path, e);
    let mut out = create(path)?;
    writeln!(out, "{tag}").map_err(io)?;
    {
        let mut w = csv::Writer::from_writer(&mut out);
        let csv_err = |e: csv::Error| CliError::input(path, e.to_string());
        w.write_record(columns).map_err(csv_err)?;
        for r in rows {
            w.write_record(r.iter().map(|v| num(*v))).map_err(csv_err)?;
        }
        w.flush().map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let io = |e: std::io::Error| CliError::io(path, e);
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| CliError::input(path, e.to_string()))?;
    writeln!(out).map_err(io)?;
    out.flush().map_err(io)
}

pub fn write_diagnostics(path: &Path, frames: &[DiagnosticsFrame]) -> Result<()> {
    let rows: Vec<Vec<f64>> = frames.iter().map(|f| f.csv_values().to_vec()).collect();
    write_table(path, DIAGNOSTICS_HEADER, &DiagnosticsFrame::CSV_COLUMNS, &rows)
}

pub fn fields_name(index: usize) -> String {
    format!("fields_{index:04}.csv")
}

pub fn write_fields(path: &Path, grid: &Grid, index: usize, snap: &Snapshot) -> Result<()> {
    let h = &snap.hydro;
    let rows: Vec<Vec<f64>> = (0..grid.len())
        .map(|i| {
            let (re, im) = snap.psi.as_ref().map_or((f64::NAN, f64::NAN), |p| (p[i].re, p[i].im));
            vec![
                grid.x()[i],
                h.sqrt_rho[i],
                h.root_momentum[i],
                h.rho[i],
                h.j[i],
                snap.energy_density[i],
                snap.chem.lambda[i],
                h.dx_sqrt_rho[i],
                re,
                im,
            ]
        })
        .collect();
    let tag = format!("{FIELDS_TAG} t={} snapshot={index}", num(snap.t));
    write_table(path, &tag, &FIELD_COLUMNS, &rows)
}

/// A numeric CSV with its comment line.
#[derive(Debug, Clone)]
pub struct Table {
    pub path: PathBuf,
    pub comment: Option<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let comment = text
            .lines()
            .next()
            .filter(|l| l.starts_with('#'))
            .map(str::to_string);
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let columns: Vec<String> = rdr
            .headers()
            .map_err(|e| CliError::input(path, e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| CliError::input(path, e.to_string()))?;
            let row = rec
                .iter()
                .map(|s| {
                    s.parse::<f64>().map_err(|_| {
                        CliError::input(path, format!("row {}: '{s}' is not a number", line + 1))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Ok(Self {
            path: path.to_path_buf(),
            comment,
            columns,
            rows,
        })
    }

    pub fn has(&self, name: &str) -> bool {
        self.columns.iter().any(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| CliError::input(&self.path, format!("missing column '{name}'")))?;
        Ok(self.rows.iter().map(|r| r[j]).collect())
    }

    /// `key=value` from the comment line.
    pub fn tag_value(&self, key: &str) -> Option<f64> {
        let prefix = format!("{key}=");
        self.comment
            .as_deref()?
            .split_whitespace()
            .find_map(|w| w.strip_prefix(prefix.as_str()))
            .and_then(|v| v.parse().ok())
    }

    /// The grid the `x` column was sampled on.
    pub fn infer_grid(&self) -> Result<Grid> {
        let x = self.column("x")?;
        let n = x.len();
        if n < 16 || !n.is_power_of_two() {
            return Err(CliError::input(
                &self.path,
                format!("need a power-of-two number of rows >= 16, got {n}"),
            ));
        }
        let l = -x[0];
        let grid = Grid::new(l, n).map_err(|e| CliError::input(&self.path, e.to_string()))?;
        check_x(&self.path, &grid, &x)?;
        Ok(grid)
    }
}

/// `x` must match the grid nodes.
pub fn check_x(path: &Path, grid: &Grid, x: &[f64]) -> Result<()> {
    if x.len() != grid.len() {
        return Err(CliError::input(
            path,
            format!("{} rows, grid has {} points", x.len(), grid.len()),
        ));
    }
    let tol = 1e-9 * (1.0 + grid.half_length());
    if let Some(i) = (0..x.len()).find(|&i| (x[i] - grid.x()[i]).abs() > tol) {
        return Err(CliError::input(
            path,
            format!("x[{i}] = {} does not match the grid node {}", x[i], grid.x()[i]),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let rows = vec![vec![0.1, -1.0 / 3.0], vec![f64::MIN_POSITIVE, 1e300]];
        write_table(&p, "# test v1 t=2.5000000000000000e-1", &["a", "b"], &rows).unwrap();
        let t = Table::read(&p).unwrap();
        assert_eq!(t.columns, ["a", "b"]);
        assert_eq!(t.rows, rows);
        assert_eq!(t.tag_value("t"), Some(0.25));
        assert!(t.column("c").is_err());
    }

    #[test]
    fn grid_inference_checks_spacing() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        let g = Grid::new(5.0, 32).unwrap();
        let rows: Vec<Vec<f64>> = g.x().iter().map(|&x| vec![x]).collect();
        write_table(&p, "# x", &["x"], &rows).unwrap();
        let back = Table::read(&p).unwrap().infer_grid().unwrap();
        assert_eq!(back.len(), 32);
        assert!((back.half_length() - 5.0).abs() < 1e-15);

        let mut bad = rows.clone();
        bad[7][0] += 0.01;
        write_table(&p, "# x", &["x"], &bad).unwrap();
        assert!(Table::read(&p).unwrap().infer_grid().is_err());
    }
}
