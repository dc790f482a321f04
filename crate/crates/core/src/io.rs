//! Plain-text file formats: CSV for fields and histories, ASCII PGM for
//! phase labels. Floats are written in shortest round-trip form.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::Matrix2;

use crate::envelope::PhaseLabelField;
use crate::error::{Error, Result};
use crate::fem::TriMesh;
use crate::grid::{GridSpec, LevelFunctionSet};
use crate::shape_gradient::ShapeGradientData;

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Rows of a numeric CSV with a fixed header. Returns the data rows.
pub fn parse_numeric_csv(path: &Path, text: &str, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut lines = text.lines().enumerate();
    let (_, first) = lines.next().ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let got: Vec<&str> = first.split(',').map(str::trim).collect();
    if got != header {
        return Err(parse_err(
            path,
            1,
            format!("expected header `{}`, found `{first}`", header.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(path, i + 1, e.to_string()))?;
        if row.len() != header.len() {
            return Err(parse_err(
                path,
                i + 1,
                format!("expected {} columns, found {}", header.len(), row.len()),
            ));
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn level_function_csv(grid: &GridSpec, values: &[f64]) -> String {
    let mut s = String::with_capacity(values.len() * 32);
    s.push_str(if grid.dim() == 2 { "x,y,value\n" } else { "x,y,z,value\n" });
    for (i, v) in values.iter().enumerate() {
        let p = grid.node_point(i);
        match grid.dim() {
            2 => writeln!(s, "{},{},{}", p[0], p[1], v),
            _ => writeln!(s, "{},{},{},{}", p[0], p[1], p[2], v),
        }
        .expect("string write");
    }
    s
}

pub fn write_level_function(path: &Path, grid: &GridSpec, values: &[f64]) -> Result<()> {
    write_file(path, &level_function_csv(grid, values))
}

/// Reads one level function, inferring the grid from the header and the
/// row count.
pub fn read_level_function(path: &Path) -> Result<(GridSpec, Vec<f64>)> {
    let text = read_file(path)?;
    let first = text.lines().next().unwrap_or("");
    let dim = match first.split(',').count() {
        3 => 2,
        4 => 3,
        _ => return Err(parse_err(path, 1, "header must be `x,y,value` or `x,y,z,value`")),
    };
    let header: &[&str] = if dim == 2 { &["x", "y", "value"] } else { &["x", "y", "z", "value"] };
    let rows = parse_numeric_csv(path, &text, header)?;
    let m = (rows.len() as f64).powf(1.0 / dim as f64).round() as usize;
    if m < 3 || m.pow(dim as u32) != rows.len() {
        return Err(parse_err(path, 1, format!("{} rows do not form a grid", rows.len())));
    }
    let grid = GridSpec::new(dim, m - 1)?;
    let tol = 1e-9;
    for (i, row) in rows.iter().enumerate() {
        let p = grid.node_point(i);
        if (0..dim).any(|a| (row[a] - p[a]).abs() > tol) {
            return Err(parse_err(path, i + 2, "node coordinates out of row-major order"));
        }
    }
    Ok((grid, rows.into_iter().map(|r| r[dim]).collect()))
}

/// Writes `phi0.csv`, `phi1.csv`, ... into `dir`.
pub fn write_level_set(dir: &Path, phi: &LevelFunctionSet) -> Result<()> {
    for (k, f) in phi.fields().iter().enumerate() {
        write_level_function(&dir.join(format!("phi{k}.csv")), phi.grid(), f)?;
    }
    Ok(())
}

/// ASCII PGM with the highest `y` row first.
pub fn labels_pgm(labels: &PhaseLabelField) -> String {
    let n = labels.grid().n();
    let denom = (labels.kappa() - 1).max(1) as f64;
    let mut s = format!("P2\n{n} {n}\n255\n");
    for j in (0..n).rev() {
        let row: Vec<String> = (0..n)
            .map(|i| {
                let l = labels.label(j * n + i) as f64;
                ((255.0 * l / denom).round() as u8).to_string()
            })
            .collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

pub fn nodal_csv(mesh: &TriMesh, values: &[f64]) -> String {
    let mut s = String::from("node,x,y,value\n");
    for (i, v) in values.iter().enumerate() {
        let p = mesh.node_point(i);
        writeln!(s, "{i},{},{},{v}", p[0], p[1]).expect("string write");
    }
    s
}

pub fn shape_gradient_csv(s: &ShapeGradientData) -> String {
    let mut out = String::from("element,S1_xx,S1_xy,S1_yx,S1_yy,S0_x,S0_y\n");
    for (e, (m, z)) in s.s1().iter().zip(s.s0()).enumerate() {
        let m: &Matrix2<f64> = m;
        writeln!(
            out,
            "{e},{},{},{},{},{},{}",
            m[(0, 0)],
            m[(0, 1)],
            m[(1, 0)],
            m[(1, 1)],
            z.x,
            z.y
        )
        .expect("string write");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::extract_phases;

    #[test]
    fn level_function_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let grid = GridSpec::square(7).unwrap();
        let values: Vec<f64> = (0..grid.node_count()).map(|i| (i as f64 * 0.37).sin() / 3.0).collect();
        let path = dir.path().join("f.csv");
        write_level_function(&path, &grid, &values).unwrap();
        let (g, back) = read_level_function(&path).unwrap();
        assert_eq!(g, grid);
        assert_eq!(back, values);
    }

    #[test]
    fn three_dimensional_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let grid = GridSpec::cube(3).unwrap();
        let values: Vec<f64> = (0..grid.node_count()).map(|i| i as f64 * 0.1).collect();
        let path = dir.path().join("f.csv");
        write_level_function(&path, &grid, &values).unwrap();
        assert_eq!(read_level_function(&path).unwrap(), (grid, values));
    }

    #[test]
    fn bad_header_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        fs::write(&path, "a,b,c\n0,0,1\n").unwrap();
        assert!(matches!(read_level_function(&path), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn pgm_puts_top_row_first() {
        let grid = GridSpec::square(2).unwrap();
        let fs: [fn(&[f64]) -> f64; 2] = [|_| 0.0, |p| 0.5 - p[1]];
        let phi = LevelFunctionSet::from_fns(grid, &fs, true).unwrap();
        let pgm = labels_pgm(&extract_phases(&phi));
        assert_eq!(pgm, "P2\n2 2\n255\n255 255\n0 0\n");
    }
}
