//! Distribution functions sampled on a uniform grid.
//!
//! A [`GridFunction`] stores the nodal values of a nondecreasing
//! `F: [0, L] -> [0, 1]`. Between nodes it is linear; to the left of `0` it is
//! `0` and to the right of `L` it is `1`. Jumps are smeared over one cell, and
//! the node sitting exactly at a jump carries the left limit.

use std::io::{Read, Write};

use rand::Rng;

use crate::error::{Error, Result};

pub const DEFAULT_INTERVALS: usize = 2048;

/// How far outside `[0, 1]` a value may drift
/// before projection treats it as an upstream bug.
pub const PROJECTION_SLACK: f64 = 1e-6;

/// Uniform grid `x_k = k L / n`, `k = 0..=n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n_intervals: usize,
    length: f64,
}

impl Grid {
    pub fn new(n_intervals: usize, length: f64) -> Result<Self> {
        if n_intervals == 0 {
            return Err(Error::domain("grid needs at least one interval"));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::domain(format!(
                "grid length {length} must be positive and finite"
            )));
        }
        Ok(Grid { n_intervals, length })
    }

    /// Grid on `[0, 1]`.
    pub fn unit(n_intervals: usize) -> Result<Self> {
        Grid::new(n_intervals, 1.0)
    }

    pub fn n_intervals(&self) -> usize {
        self.n_intervals
    }

    pub fn len(&self) -> usize {
        self.n_intervals + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn step(&self) -> f64 {
        self.length / self.n_intervals as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        if k == self.n_intervals {
            self.length
        } else {
            k as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.len()).map(move |k| self.node(k))
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self.n_intervals != other.n_intervals || (self.length - other.length).abs() > 1e-12 * self.length {
            return Err(Error::GridMismatch {
                left: self.n_intervals,
                left_len: self.length,
                right: other.n_intervals,
                right_len: other.length,
            });
        }
        Ok(())
    }

    /// Linear interpolation of nodal `values` at `x`, without the extension
    /// rules: `x` is clamped into `[0, L]`.
    pub(crate) fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        let t = (x / self.step()).clamp(0.0, self.n_intervals as f64);
        let k = (t.floor() as usize).min(self.n_intervals - 1);
        let s = t - k as f64;
        if s == 0.0 {
            values[k]
        } else {
            values[k] + s * (values[k + 1] - values[k])
        }
    }

    /// Exact `∫|f|` of the piecewise linear interpolant of `values`.
    pub(crate) fn abs_integral(&self, values: &[f64]) -> f64 {
        let h = self.step();
        values.windows(2).map(|w| abs_segment(w[0], w[1]) * h).sum()
    }
}

/// Shortest decimal form of `x` that parses back to the same `f64`, in
/// exponent notation for magnitudes below `1e-4` or from `1e15` up.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

/// `∫_0^1 |a + (b - a) s| ds`.
pub(crate) fn abs_segment(a: f64, b: f64) -> f64 {
    if a * b >= 0.0 {
        0.5 * (a.abs() + b.abs())
    } else {
        0.5 * (a * a + b * b) / (a.abs() + b.abs())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    /// Wraps nodal values that already satisfy the invariants: every value in
    /// `[0, 1]` and nondecreasing.
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::domain(format!(
                "expected {} nodal values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::domain(format!("value {v} outside [0, 1]")));
        }
        if let Some(k) = values.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::domain(format!(
                "values decrease between nodes {k} and {}",
                k + 1
            )));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn zero(grid: Grid) -> Self {
        GridFunction {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn one(grid: Grid) -> Self {
        GridFunction {
            grid,
            values: vec![1.0; grid.len()],
        }
    }

    /// Samples `f` at the nodes and projects onto the admissible set.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        monotone_project(grid, grid.nodes().map(f).collect())
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `F(x)`, extended by `0` left of the grid and `1` right of it.
    pub fn eval(&self, x: f64) -> f64 {
        if x < 0.0 {
            0.0
        } else if x > self.grid.length {
            1.0
        } else {
            self.grid.interpolate(&self.values, x)
        }
    }

    /// Whether `F(L) = 1`.
    pub fn has_unit_endpoint(&self) -> bool {
        self.values[self.values.len() - 1] == 1.0
    }

    /// Generalized inverse `inf{x : F(x) >= u}` of a uniform draw `u`.
    ///
    /// Returns exactly `0` with probability `F(0)`. Mass missing at the right
    /// end (when `F(L) < 1`) is placed at `L`.
    pub fn sample_from<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.quantile(u)
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let v = &self.values;
        if u <= v[0] {
            return 0.0;
        }
        let k = v.partition_point(|&f| f < u);
        if k >= v.len() {
            return self.grid.length;
        }
        let (f0, f1) = (v[k - 1], v[k]);
        let s = (u - f0) / (f1 - f0);
        self.grid.node(k - 1) + s * self.grid.step()
    }

    /// Writes `x,F` rows, one per node. Values use the shortest decimal form
    /// that parses back to the same `f64`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["x", "F"])?;
        for (k, v) in self.values.iter().enumerate() {
            w.write_record([fmt_f64(self.grid.node(k)), fmt_f64(*v)])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Reads the format written by [`GridFunction::write_csv`]. The grid is
    /// recovered from the row count and the last `x`.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
        let headers = r.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "x" || &headers[1] != "F" {
            return Err(Error::domain("expected header `x,F`"));
        }
        let mut xs = Vec::new();
        let mut values = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let parse = |s: &str| s.parse::<f64>().map_err(|_| Error::domain(format!("bad number `{s}`")));
            xs.push(parse(&rec[0])?);
            values.push(parse(&rec[1])?);
        }
        if xs.len() < 2 {
            return Err(Error::domain("grid function needs at least two rows"));
        }
        let grid = Grid::new(xs.len() - 1, xs[xs.len() - 1])?;
        GridFunction::new(grid, values)
    }
}

/// Running maximum followed by clamping into `[0, 1]`.
///
/// Inputs that leave `[0, 1]` by more than [`PROJECTION_SLACK`] are rejected.
pub fn monotone_project(grid: Grid, values: Vec<f64>) -> Result<GridFunction> {
    if values.len() != grid.len() {
        return Err(Error::domain(format!(
            "expected {} nodal values, got {}",
            grid.len(),
            values.len()
        )));
    }
    let mut out = values;
    let mut running = f64::NEG_INFINITY;
    for v in out.iter_mut() {
        if !v.is_finite() || *v < -PROJECTION_SLACK || *v > 1.0 + PROJECTION_SLACK {
            return Err(Error::Consistency(format!(
                "value {v} is outside [0, 1] beyond projection slack"
            )));
        }
        running = running.max(*v);
        *v = running.clamp(0.0, 1.0);
    }
    Ok(GridFunction { grid, values: out })
}

/// `max_k |F_k - G_k|`.
pub fn sup_distance(f: &GridFunction, g: &GridFunction) -> Result<f64> {
    f.grid.check_same(&g.grid)?;
    Ok(sup_gap(&f.values, &g.values))
}

/// `∫|F - G| dx` of the interpolants, cell by cell.
pub fn l1_distance(f: &GridFunction, g: &GridFunction) -> Result<f64> {
    f.grid.check_same(&g.grid)?;
    let diff: Vec<f64> = f.values.iter().zip(&g.values).map(|(a, b)| a - b).collect();
    Ok(f.grid.abs_integral(&diff))
}

pub(crate) fn sup_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
