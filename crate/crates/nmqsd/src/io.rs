//! File formats. Complex numbers are `[re, im]` in JSON and `re,im` column
//! pairs in CSV; matrices are row-major nested arrays. Floats are written in
//! shortest round-trip form, so outputs are byte-stable.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nmqsd_core::dynamics::Trajectory;
use nmqsd_core::kernels::NoisePath;
use nmqsd_core::models::AnsatzTable;
use nmqsd_core::{CMatrix, C64};
use serde_json::{json, Value};

use crate::Result;

pub fn complex(c: C64) -> Value {
    json!([c.re, c.im])
}

pub fn matrix(m: &CMatrix) -> Value {
    Value::Array((0..m.nrows()).map(|i| Value::Array((0..m.ncols()).map(|j| complex(m[(i, j)])).collect())).collect())
}

/// Inverse of [`matrix`].
pub fn parse_matrix(v: &Value) -> Option<CMatrix> {
    let rows = v.as_array()?;
    let n = rows.len();
    let m = rows.first()?.as_array()?.len();
    let mut out = CMatrix::zeros(n, m);
    for (i, row) in rows.iter().enumerate() {
        let row = row.as_array()?;
        if row.len() != m {
            return None;
        }
        for (j, c) in row.iter().enumerate() {
            let c = c.as_array()?;
            out[(i, j)] = C64::new(c.first()?.as_f64()?, c.get(1)?.as_f64()?);
        }
    }
    Some(out)
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn csv_writer(path: &Path, header: &[String]) -> Result<csv::Writer<File>> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    Ok(w)
}

fn strings(header: &[&str]) -> Vec<String> {
    header.iter().map(|s| s.to_string()).collect()
}

/// `t,re,im` of the stored `z*` values.
pub fn write_noise(path: &Path, noise: &NoisePath) -> Result<()> {
    let mut w = csv_writer(path, &strings(&["t", "re", "im"]))?;
    for (j, t) in noise.grid().times().enumerate() {
        let v = noise.values()[j];
        w.write_record([t.to_string(), v.re.to_string(), v.im.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Long format `path_id,t,re,im`.
pub fn write_noise_long(path: &Path, paths: &[NoisePath]) -> Result<()> {
    let mut w = csv_writer(path, &strings(&["path_id", "t", "re", "im"]))?;
    for (id, p) in paths.iter().enumerate() {
        for (j, t) in p.grid().times().enumerate() {
            let v = p.values()[j];
            w.write_record([id.to_string(), t.to_string(), v.re.to_string(), v.im.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `t,norm,re_0,im_0,...`.
pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    let d = traj.states[0].len();
    let mut header = strings(&["t", "norm"]);
    for k in 0..d {
        header.push(format!("re_{k}"));
        header.push(format!("im_{k}"));
    }
    let mut w = csv_writer(path, &header)?;
    for (j, t) in traj.grid.times().enumerate() {
        let mut row = vec![t.to_string(), traj.norms[j].to_string()];
        for a in traj.states[j].iter() {
            row.push(a.re.to_string());
            row.push(a.im.to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `t,s,re_f,im_f` for `s <= t`.
pub fn write_ansatz_f(path: &Path, table: &AnsatzTable) -> Result<()> {
    let mut w = csv_writer(path, &strings(&["t", "s", "re_f", "im_f"]))?;
    let grid = table.grid();
    for i in 0..grid.len() {
        for j in 0..=i {
            let f = table.f(i, j);
            w.write_record([grid.time(i).to_string(), grid.time(j).to_string(), f.re.to_string(), f.im.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `t,re_F,im_F`.
pub fn write_ansatz_rate(path: &Path, table: &AnsatzTable) -> Result<()> {
    let mut w = csv_writer(path, &strings(&["t", "re_F", "im_F"]))?;
    for (j, t) in table.grid().times().enumerate() {
        let f = table.rate(j);
        w.write_record([t.to_string(), f.re.to_string(), f.im.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Plain numeric table with the given header.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv_writer(path, &strings(header))?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip() {
        let m = CMatrix::from_row_slice(2, 2, &[C64::new(1.0, -0.5), C64::new(0.0, 2.0), C64::new(3.25, 0.0), C64::new(-1e-17, 7.0)]);
        let v = matrix(&m);
        assert_eq!(v[0][1], json!([0.0, 2.0]));
        assert_eq!(parse_matrix(&v).unwrap(), m);
    }
}
