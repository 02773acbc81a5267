//! Comma-separated output tables. Floats are written with 17 significant
//! digits so that reading a table back reproduces every value bit for bit.

use std::fs;
use std::path::Path;

use crate::continuation::Branch;
use crate::error::{Error, Result};
use crate::model::{FieldState, Grid};
use crate::pde::TrajectoryRecord;
use crate::spectral::SpectrumReport;

pub const TRAJECTORY_HEADER: &str = "t,c,a";
pub const BRANCH_HEADER: &str =
    "param,g1,g2,alpha,beta,gamma,norm,re_lam1,im_lam1,re_lam2,im_lam2,re_lam3,im_lam3,stable,bif";
pub const SPECTRUM_HEADER: &str = "re,im,residual";
pub const PROFILE_HEADER: &str = "x,u,v,w";

/// 17 significant digits; `-0` and non-finite values keep their spelling.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn io(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &str) -> Self {
        Table { header: header.split(',').map(String::from).collect(), rows: Vec::new() }
    }

    pub fn push_floats(&mut self, values: &[f64]) {
        self.rows.push(values.iter().map(|&v| fmt17(v)).collect());
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Io("empty table".into()))?;
        let header: Vec<String> = header.split(',').map(String::from).collect();
        let mut rows = Vec::new();
        for (i, l) in lines.enumerate() {
            if l.is_empty() {
                continue;
            }
            let r: Vec<String> = l.split(',').map(String::from).collect();
            if r.len() != header.len() {
                return Err(Error::Io(format!("row {} has {} fields, header has {}", i + 2, r.len(), header.len())));
            }
            rows.push(r);
        }
        Ok(Table { header, rows })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render()).map_err(|e| io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| io(path, e))?;
        Self::parse(&text)
    }

    pub fn expect_header(&self, header: &str) -> Result<()> {
        if self.header.join(",") == header {
            Ok(())
        } else {
            Err(Error::Io(format!("unexpected header '{}', wanted '{header}'", self.header.join(","))))
        }
    }

    /// Column `j` parsed as floats.
    pub fn column(&self, j: usize) -> Result<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| r[j].parse::<f64>().map_err(|e| Error::Io(format!("bad number '{}': {e}", r[j]))))
            .collect()
    }

    pub fn column_named(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name).ok_or_else(|| Error::Io(format!("no column '{name}'")))?;
        self.column(j)
    }
}

pub fn trajectory_table(rec: &TrajectoryRecord) -> Table {
    let mut t = Table::new(TRAJECTORY_HEADER);
    for i in 0..rec.t.len() {
        t.push_floats(&[rec.t[i], rec.c[i], rec.a[i]]);
    }
    t
}

pub fn write_trajectory(path: &Path, rec: &TrajectoryRecord) -> Result<()> {
    trajectory_table(rec).write(path)
}

pub fn read_trajectory(path: &Path) -> Result<TrajectoryRecord> {
    let t = Table::read(path)?;
    t.expect_header(TRAJECTORY_HEADER)?;
    Ok(TrajectoryRecord { t: t.column(0)?, c: t.column(1)?, a: t.column(2)?, snapshots: Vec::new() })
}

/// Branch rows; eigenvalues beyond those stored are written as NaN.
pub fn branch_table(branch: &Branch) -> Table {
    let mut t = Table::new(BRANCH_HEADER);
    for p in &branch.points {
        let mut row = vec![p.value, p.g.0, p.g.1, p.params.alpha, p.params.beta, p.params.gamma, p.norm];
        for k in 0..3 {
            let z = p.spectrum.eigenvalues.get(k).copied();
            row.push(z.map_or(f64::NAN, |z| z.re));
            row.push(z.map_or(f64::NAN, |z| z.im));
        }
        let mut cells: Vec<String> = row.iter().map(|&v| fmt17(v)).collect();
        cells.push(if p.stable { "1".into() } else { "0".into() });
        cells.push(p.tag());
        t.rows.push(cells);
    }
    t
}

pub fn write_branch(path: &Path, branch: &Branch) -> Result<()> {
    branch_table(branch).write(path)
}

pub fn spectrum_table(s: &SpectrumReport) -> Table {
    let mut t = Table::new(SPECTRUM_HEADER);
    for (z, r) in s.eigenvalues.iter().zip(&s.residuals) {
        t.push_floats(&[z.re, z.im, *r]);
    }
    t
}

pub fn write_spectrum(path: &Path, s: &SpectrumReport) -> Result<()> {
    spectrum_table(s).write(path)
}

/// (re, im, residual) triples.
pub fn read_spectrum(path: &Path) -> Result<Vec<[f64; 3]>> {
    let t = Table::read(path)?;
    t.expect_header(SPECTRUM_HEADER)?;
    let (a, b, c) = (t.column(0)?, t.column(1)?, t.column(2)?);
    Ok((0..a.len()).map(|i| [a[i], b[i], c[i]]).collect())
}

pub fn profile_table(state: &FieldState, grid: &Grid) -> Table {
    let mut t = Table::new(PROFILE_HEADER);
    for i in 0..grid.len() {
        t.push_floats(&[grid.nodes[i], state.u[i], state.v[i], state.w[i]]);
    }
    t
}

pub fn read_profile(path: &Path) -> Result<(Vec<f64>, FieldState)> {
    let t = Table::read(path)?;
    t.expect_header(PROFILE_HEADER)?;
    Ok((t.column(0)?, FieldState { u: t.column(1)?, v: t.column(2)?, w: t.column(3)? }))
}
