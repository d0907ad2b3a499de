//! 2-D NLDM lookup tables over (input slew, output load) with bilinear
//! interpolation and boundary-patch extrapolation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A delay or slew table: `values[i][j]` is the table entry at
/// `slew_axis[i]` ns and `load_axis[j]` fF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lut2D {
    pub slew_axis: Vec<f64>,
    pub load_axis: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

/// One bilinear evaluation: the value, both partial derivatives, the
/// 2x2 patch it came from, and whether the query fell outside the grid.
#[derive(Debug, Clone, Copy)]
pub struct BilinearSample {
    pub value: f64,
    pub d_slew: f64,
    pub d_load: f64,
    pub patch: (usize, usize),
    pub out_of_grid: bool,
}

fn strictly_ascending(axis: &[f64]) -> bool {
    axis.windows(2).all(|w| w[0] < w[1])
}

/// Index of the 2x2 patch whose slew/load interval is used for `q`:
/// the largest `i <= n-2` with `axis[i] <= q` (so a query exactly on an
/// interior breakpoint uses the patch on the increasing side), clamped
/// to the boundary patch outside the grid.
pub fn interval_index(axis: &[f64], q: f64) -> usize {
    let n = axis.len();
    let le = axis.partition_point(|&x| x <= q);
    if le == 0 {
        0
    } else {
        (le - 1).min(n - 2)
    }
}

impl Lut2D {
    pub fn new(slew_axis: Vec<f64>, load_axis: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if slew_axis.len() < 2 || load_axis.len() < 2 {
            return Err(Error::Argument("lut axes need at least 2 breakpoints".into()));
        }
        if !strictly_ascending(&slew_axis) || !strictly_ascending(&load_axis) {
            return Err(Error::Argument("lut axes must be strictly ascending".into()));
        }
        if values.len() != slew_axis.len() || values.iter().any(|r| r.len() != load_axis.len()) {
            return Err(Error::Shape(format!(
                "lut values must be {}x{}",
                slew_axis.len(),
                load_axis.len()
            )));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Argument("lut values must be finite".into()));
        }
        Ok(Lut2D { slew_axis, load_axis, values })
    }

    /// Table of a single constant value on a trivial 2x2 grid.
    pub fn constant(v: f64) -> Lut2D {
        Lut2D {
            slew_axis: vec![0.0, 1.0],
            load_axis: vec![0.0, 1.0],
            values: vec![vec![v, v], vec![v, v]],
        }
    }

    /// Bilinear interpolation, extrapolating with the nearest boundary
    /// patch outside the grid. Total and continuous over the plane.
    pub fn eval(&self, slew: f64, load: f64) -> f64 {
        self.sample(slew, load).value
    }

    pub fn sample(&self, slew: f64, load: f64) -> BilinearSample {
        let i = interval_index(&self.slew_axis, slew);
        let j = interval_index(&self.load_axis, load);
        let x0 = self.slew_axis[i];
        let x1 = self.slew_axis[i + 1];
        let y0 = self.load_axis[j];
        let y1 = self.load_axis[j + 1];
        let t = (slew - x0) / (x1 - x0);
        let u = (load - y0) / (y1 - y0);
        let v00 = self.values[i][j];
        let v01 = self.values[i][j + 1];
        let v10 = self.values[i + 1][j];
        let v11 = self.values[i + 1][j + 1];
        let value = (1.0 - t) * (1.0 - u) * v00
            + (1.0 - t) * u * v01
            + t * (1.0 - u) * v10
            + t * u * v11;
        let d_slew = ((1.0 - u) * (v10 - v00) + u * (v11 - v01)) / (x1 - x0);
        let d_load = ((1.0 - t) * (v01 - v00) + t * (v11 - v10)) / (y1 - y0);
        let out_of_grid = slew < self.slew_axis[0]
            || slew > *self.slew_axis.last().unwrap()
            || load < self.load_axis[0]
            || load > *self.load_axis.last().unwrap();
        BilinearSample { value, d_slew, d_load, patch: (i, j), out_of_grid }
    }

    /// Resample this table onto the given axes by bilinear evaluation.
    pub fn resample(&self, slew_axis: &[f64], load_axis: &[f64]) -> Lut2D {
        let values = slew_axis
            .iter()
            .map(|&s| load_axis.iter().map(|&l| self.eval(s, l)).collect())
            .collect();
        Lut2D {
            slew_axis: slew_axis.to_vec(),
            load_axis: load_axis.to_vec(),
            values,
        }
    }

    /// Merge tables into their elementwise maximum on the union grid of
    /// all axes: every input is resampled onto the union grid and the
    /// result takes the largest value per node.
    pub fn union_max(tables: &[&Lut2D]) -> Result<Lut2D> {
        if tables.is_empty() {
            return Err(Error::Argument("union_max of zero tables".into()));
        }
        let slew_axis = union_axis(tables.iter().map(|t| t.slew_axis.as_slice()));
        let load_axis = union_axis(tables.iter().map(|t| t.load_axis.as_slice()));
        let mut values = vec![vec![f64::NEG_INFINITY; load_axis.len()]; slew_axis.len()];
        for t in tables {
            for (i, &s) in slew_axis.iter().enumerate() {
                for (j, &l) in load_axis.iter().enumerate() {
                    let v = t.eval(s, l);
                    if v > values[i][j] {
                        values[i][j] = v;
                    }
                }
            }
        }
        Lut2D::new(slew_axis, load_axis, values)
    }
}

fn union_axis<'a>(axes: impl Iterator<Item = &'a [f64]>) -> Vec<f64> {
    let mut all: Vec<f64> = axes.flatten().copied().collect();
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    all.dedup();
    all
}
