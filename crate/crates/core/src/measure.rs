//! Probability measures that drive the convolution.
//!
//! Supported families: finitely many atoms on `[0, 1)`, the uniform density on
//! `[0, 1]`, the exponential law with rate `a` on `[0, ∞)` and a piecewise
//! linear density read from a table. A measure never carries an atom at the
//! right end of its support.
//!
//! Measures parse from a small grammar:
//!
//! ```text
//! uniform | exp:a=<float> | dirac:t=<float> | atoms:<w1>@<x1>,<w2>@<x2>,... | table:<path>
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};

/// Density values below this tail mass are dropped when an unbounded support
/// is cut down to a grid.
pub const TRUNCATION_MASS: f64 = 1e-12;

/// Default panel count for density quadrature.
pub const QUADRATURE_PANELS: usize = 2048;

const MASS_TOL: f64 = 1e-6;
const ATOM_MASS_TOL: f64 = 1e-9;

pub const GRAMMAR: &str = "uniform | exp:a=<float> | dirac:t=<float> | atoms:<w1>@<x1>,<w2>@<x2>,... | table:<path>";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub location: f64,
    pub weight: f64,
}

/// Piecewise linear density on `[nodes[0], nodes[last]] ⊂ [0, 1]`, zero outside.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityTable {
    nodes: Vec<f64>,
    values: Vec<f64>,
    /// Cumulative mass at each node.
    cumulative: Vec<f64>,
}

impl DensityTable {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn density(&self, x: f64) -> f64 {
        let n = self.nodes.len();
        if x < self.nodes[0] || x > self.nodes[n - 1] {
            return 0.0;
        }
        let k = self.cell(x);
        let (x0, x1) = (self.nodes[k], self.nodes[k + 1]);
        let s = (x - x0) / (x1 - x0);
        self.values[k] + s * (self.values[k + 1] - self.values[k])
    }

    /// Index of the cell `[nodes[k], nodes[k+1]]` containing `x` (clamped).
    fn cell(&self, x: f64) -> usize {
        let n = self.nodes.len();
        let k = self.nodes.partition_point(|&v| v <= x);
        k.clamp(1, n - 1) - 1
    }

    fn cdf(&self, x: f64) -> f64 {
        let n = self.nodes.len();
        if x <= self.nodes[0] {
            return 0.0;
        }
        if x >= self.nodes[n - 1] {
            return 1.0;
        }
        let k = self.cell(x);
        let (x0, x1) = (self.nodes[k], self.nodes[k + 1]);
        let d0 = self.values[k];
        let d1 = self.values[k + 1];
        let s = x - x0;
        self.cumulative[k] + d0 * s + (d1 - d0) * s * s / (2.0 * (x1 - x0))
    }

    fn quantile(&self, u: f64) -> f64 {
        let k = self
            .cumulative
            .partition_point(|&c| c < u)
            .clamp(1, self.nodes.len() - 1)
            - 1;
        let (x0, x1) = (self.nodes[k], self.nodes[k + 1]);
        let h = x1 - x0;
        let d0 = self.values[k];
        let slope = (self.values[k + 1] - d0) / h;
        let need = (u - self.cumulative[k]).max(0.0);
        // solve d0 s + slope s^2 / 2 = need on [0, h]
        let s = if slope.abs() < 1e-14 {
            if d0 > 0.0 {
                need / d0
            } else {
                0.0
            }
        } else {
            let disc = (d0 * d0 + 2.0 * slope * need).max(0.0);
            // numerically stable root of the quadratic
            2.0 * need / (d0 + disc.sqrt())
        };
        (x0 + s.clamp(0.0, h)).min(x1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Measure {
    /// Finitely many atoms at locations in `[0, 1)`; weights sum to one.
    Atomic(Vec<Atom>),
    /// Lebesgue measure on `[0, 1]`.
    Uniform,
    /// Density `a e^{-a x}` on `[0, ∞)`.
    Exponential {
        rate: f64,
    },
    Tabulated(DensityTable),
}

impl Measure {
    /// Builds an atomic measure. Weights within `1e-9` of unit total are
    /// renormalized.
    pub fn atomic(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::domain("atomic measure needs at least one atom"));
        }
        for a in &atoms {
            if !(a.weight > 0.0) || !a.weight.is_finite() {
                return Err(Error::domain(format!("atom weight {} must be positive", a.weight)));
            }
            if !(0.0..1.0).contains(&a.location) {
                return Err(Error::domain(format!(
                    "atom location {} must lie in [0, 1); atoms at the right endpoint are not supported",
                    a.location
                )));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > ATOM_MASS_TOL {
            return Err(Error::domain(format!("atom weights sum to {total}, expected 1")));
        }
        let mut atoms: Vec<Atom> = atoms
            .into_iter()
            .map(|a| Atom {
                location: a.location,
                weight: a.weight / total,
            })
            .collect();
        atoms.sort_by(|a, b| a.location.total_cmp(&b.location));
        Ok(Measure::Atomic(atoms))
    }

    /// Unit point mass at `t`.
    pub fn dirac(t: f64) -> Result<Self> {
        Measure::atomic(vec![Atom {
            location: t,
            weight: 1.0,
        }])
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::domain(format!("exponential rate {rate} must be positive")));
        }
        Ok(Measure::Exponential { rate })
    }

    /// Piecewise linear density through `(nodes[i], values[i])`.
    ///
    /// Nodes must be strictly increasing inside `[0, 1]`, values nonnegative.
    /// A table whose mass is within `1e-6` of one is rescaled to unit mass;
    /// anything further off is rejected.
    pub fn tabulated(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 || nodes.len() != values.len() {
            return Err(Error::domain(
                "density table needs at least two rows with matching x and density columns",
            ));
        }
        if nodes[0] < 0.0 || nodes[nodes.len() - 1] > 1.0 {
            return Err(Error::domain("density table nodes must lie in [0, 1]"));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("density table nodes must be strictly increasing"));
        }
        if values.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::domain("density values must be finite and nonnegative"));
        }
        let mut cumulative = Vec::with_capacity(nodes.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for k in 1..nodes.len() {
            acc += 0.5 * (values[k] + values[k - 1]) * (nodes[k] - nodes[k - 1]);
            cumulative.push(acc);
        }
        if (acc - 1.0).abs() > MASS_TOL {
            return Err(Error::domain(format!("density table integrates to {acc}, expected 1")));
        }
        let values = values.into_iter().map(|v| v / acc).collect();
        let cumulative = cumulative.into_iter().map(|c| c / acc).collect();
        Ok(Measure::Tabulated(DensityTable {
            nodes,
            values,
            cumulative,
        }))
    }

    /// Reads a CSV density table with header `x,density`.
    pub fn from_table_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(file);
        let headers = reader.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "x" || &headers[1] != "density" {
            return Err(Error::domain(format!(
                "{}: expected header `x,density`",
                path.display()
            )));
        }
        let mut nodes = Vec::new();
        let mut values = Vec::new();
        for record in reader.records() {
            let record = record?;
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::domain(format!("{}: bad number `{s}`", path.display())))
            };
            nodes.push(parse(&record[0])?);
            values.push(parse(&record[1])?);
        }
        Measure::tabulated(nodes, values)
    }

    /// Parses the measure grammar (see module docs).
    pub fn parse(spec: &str) -> Result<Self> {
        let bad = || Error::domain(format!("unrecognized measure `{spec}`; expected {GRAMMAR}"));
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
        let spec_t = spec.trim();
        if spec_t == "uniform" {
            return Ok(Measure::Uniform);
        }
        let (kind, rest) = spec_t.split_once(':').ok_or_else(bad)?;
        match kind {
            "exp" => {
                let a = rest.strip_prefix("a=").ok_or_else(bad)?;
                Measure::exponential(num(a)?)
            }
            "dirac" => {
                let t = rest.strip_prefix("t=").ok_or_else(bad)?;
                Measure::dirac(num(t)?)
            }
            "atoms" => {
                let atoms = rest
                    .split(',')
                    .map(|item| {
                        let (w, x) = item.split_once('@').ok_or_else(bad)?;
                        Ok(Atom {
                            location: num(x)?,
                            weight: num(w)?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Measure::atomic(atoms)
            }
            "table" => Measure::from_table_file(rest),
            _ => Err(bad()),
        }
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self, Measure::Atomic(_))
    }

    /// Right end of the support interval (`∞` for the exponential law).
    pub fn support_end(&self) -> f64 {
        match self {
            Measure::Exponential { .. } => f64::INFINITY,
            _ => 1.0,
        }
    }

    /// Right end used when the support is represented on a finite grid:
    /// `1` for measures on `[0, 1]`, `-ln(1e-12) / a` for the exponential law.
    pub fn grid_length(&self) -> f64 {
        match self {
            Measure::Exponential { rate } => -TRUNCATION_MASS.ln() / rate,
            _ => 1.0,
        }
    }

    /// Density at `x`; `None` for atomic measures.
    pub fn density(&self, x: f64) -> Option<f64> {
        match self {
            Measure::Atomic(_) => None,
            Measure::Uniform => Some(if (0.0..=1.0).contains(&x) { 1.0 } else { 0.0 }),
            Measure::Exponential { rate } => Some(if x >= 0.0 { rate * (-rate * x).exp() } else { 0.0 }),
            Measure::Tabulated(t) => Some(t.density(x)),
        }
    }

    fn check_point(&self, x: f64) -> Result<()> {
        if x.is_nan() || x < 0.0 || x > self.support_end() {
            return Err(Error::domain(format!(
                "x = {x} lies outside the support [0, {}]",
                self.support_end()
            )));
        }
        Ok(())
    }

    /// `μ([x, end])`.
    pub fn tail_mass(&self, x: f64) -> Result<f64> {
        self.check_point(x)?;
        Ok(match self {
            Measure::Atomic(atoms) => atoms.iter().filter(|a| a.location >= x).map(|a| a.weight).sum(),
            Measure::Uniform => 1.0 - x,
            Measure::Exponential { rate } => (-rate * x).exp(),
            Measure::Tabulated(t) => 1.0 - t.cdf(x),
        })
    }

    /// `∫_{[lo, hi]} g dμ`, atoms at either bound included.
    ///
    /// Densities use the composite trapezoid rule with [`QUADRATURE_PANELS`]
    /// panels; for the exponential law `hi` is clipped to [`Measure::grid_length`].
    pub fn integrate_against<G: Fn(f64) -> f64>(&self, g: G, lo: f64, hi: f64) -> Result<f64> {
        if !(lo <= hi) {
            return Err(Error::domain(format!("integration bounds [{lo}, {hi}] are reversed")));
        }
        self.check_point(lo)?;
        let hi = if hi == f64::INFINITY { self.support_end() } else { hi };
        self.check_point(hi)?;
        if let Measure::Atomic(atoms) = self {
            return Ok(atoms
                .iter()
                .filter(|a| a.location >= lo && a.location <= hi)
                .map(|a| a.weight * g(a.location))
                .sum());
        }
        let hi = hi.min(self.grid_length());
        if hi <= lo {
            return Ok(0.0);
        }
        let n = QUADRATURE_PANELS;
        let h = (hi - lo) / n as f64;
        let f = |z: f64| g(z) * self.density(z).unwrap_or(0.0);
        let interior: f64 = (1..n).map(|k| f(lo + k as f64 * h)).sum();
        Ok(h * (0.5 * f(lo) + interior + 0.5 * f(hi)))
    }

    /// One draw from the measure.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Measure::Atomic(atoms) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for a in atoms {
                    acc += a.weight;
                    if u < acc {
                        return a.location;
                    }
                }
                atoms[atoms.len() - 1].location
            }
            Measure::Uniform => rng.random(),
            Measure::Exponential { rate } => Exp::new(*rate).expect("rate checked at construction").sample(rng),
            Measure::Tabulated(t) => t.quantile(rng.random()),
        }
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Measure::parse(s)
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Measure::Uniform => write!(f, "uniform"),
            Measure::Exponential { rate } => write!(f, "exp:a={rate}"),
            Measure::Atomic(atoms) if atoms.len() == 1 => write!(f, "dirac:t={}", atoms[0].location),
            Measure::Atomic(atoms) => {
                write!(f, "atoms:")?;
                for (i, a) in atoms.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{}@{}", a.weight, a.location)?;
                }
                Ok(())
            }
            Measure::Tabulated(t) => write!(f, "table[{} rows]", t.nodes.len()),
        }
    }
}
