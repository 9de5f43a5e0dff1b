//! The convolution `Φ_μ` and the exponential-linear map `T = exp(-λ Φ_μ)`.
//!
//! `Φ_μ(F)(x) = ∫_{[x, L]} F(z - x) dμ(z)` is evaluated at every grid node.
//! Atoms sitting exactly at `x` are included, so nodal outputs are the left
//! limits of `Φ_μ F`; [`Convolution::right_limits`] gives the values just to
//! the right of each node, which only differ when an atom sits on a node.
//!
//! For densities the integral is a trapezoid sum over the nodes `z_j ≥ x_k`.
//! Because the grid is uniform, `z_j - x_k` is again a node and no
//! interpolation is needed; the uniform density reduces to a running sum.

use std::f64::consts::E;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::gridfn::{abs_segment, monotone_project, sup_gap, Grid, GridFunction};
use crate::measure::{Atom, Measure};

/// A positive linear operator on nodal vectors of a fixed grid.
pub trait PositiveLinearOperator: Send + Sync {
    fn grid(&self) -> Grid;

    /// Nodal values of the image of `values`.
    fn apply(&self, values: &[f64]) -> Vec<f64>;

    /// An upper bound on the sup-norm operator norm.
    fn sup_norm_bound(&self) -> f64;
}

#[derive(Debug, Clone)]
enum Kernel {
    /// Lebesgue measure on `[0, 1]`.
    Uniform,
    /// Trapezoid weights `ρ(z_j) h` at every node.
    Density(Vec<f64>),
    Atoms(Vec<Atom>),
}

/// `Φ_μ` discretized on a grid matching the measure's support.
#[derive(Debug, Clone)]
pub struct Convolution {
    measure: Measure,
    grid: Grid,
    kernel: Kernel,
    exec: Exec,
}

impl Convolution {
    /// Fails when the grid does not span the measure's (truncated) support,
    /// e.g. an exponential measure on a `[0, 1]` grid.
    pub fn new(measure: Measure, grid: Grid) -> Result<Self> {
        let expected = measure.grid_length();
        if (grid.length() - expected).abs() > 1e-12 * expected {
            return Err(Error::domain(format!(
                "measure {measure} needs a grid on [0, {expected}], got [0, {}]",
                grid.length()
            )));
        }
        let kernel = match &measure {
            Measure::Uniform => Kernel::Uniform,
            Measure::Atomic(atoms) => Kernel::Atoms(atoms.clone()),
            _ => {
                let h = grid.step();
                Kernel::Density(grid.nodes().map(|z| measure.density(z).unwrap_or(0.0) * h).collect())
            }
        };
        Ok(Convolution {
            measure,
            grid,
            kernel,
            exec: Exec::default(),
        })
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn measure(&self) -> &Measure {
        &self.measure
    }

    pub fn exec(&self) -> Exec {
        self.exec
    }

    fn atom_slack(&self) -> f64 {
        1e-12 * self.grid.length()
    }

    fn apply_atoms(&self, atoms: &[Atom], values: &[f64], include_at_node: bool) -> Vec<f64> {
        let eps = self.atom_slack();
        let grid = self.grid;
        self.exec.map(grid.len(), |k| {
            let x = grid.node(k);
            atoms
                .iter()
                .filter(|a| {
                    if include_at_node {
                        a.location >= x - eps
                    } else {
                        a.location > x + eps
                    }
                })
                .map(|a| a.weight * grid.interpolate(values, (a.location - x).max(0.0)))
                .sum()
        })
    }

    /// Values of `Φ_μ F` just to the right of each node.
    pub fn right_limits(&self, values: &[f64]) -> Vec<f64> {
        match &self.kernel {
            Kernel::Atoms(atoms) => self.apply_atoms(atoms, values, false),
            _ => self.apply(values),
        }
    }
}

impl PositiveLinearOperator for Convolution {
    fn grid(&self) -> Grid {
        self.grid
    }

    fn apply(&self, values: &[f64]) -> Vec<f64> {
        let n = self.grid.n_intervals();
        match &self.kernel {
            Kernel::Uniform => {
                // running trapezoid C_m = ∫_0^{x_m} F, read back as Φ_k = C_{n-k}
                let h = self.grid.step();
                let mut cumulative = Vec::with_capacity(n + 1);
                let mut acc = 0.0;
                cumulative.push(0.0);
                for w in values.windows(2) {
                    acc += 0.5 * h * (w[0] + w[1]);
                    cumulative.push(acc);
                }
                (0..=n).map(|k| cumulative[n - k]).collect()
            }
            Kernel::Density(weights) => self.exec.map(n + 1, |k| {
                if k == n {
                    return 0.0;
                }
                let interior: f64 = (k + 1..n).map(|j| weights[j] * values[j - k]).sum();
                0.5 * weights[k] * values[0] + interior + 0.5 * weights[n] * values[n - k]
            }),
            Kernel::Atoms(atoms) => self.apply_atoms(atoms, values, true),
        }
    }

    fn sup_norm_bound(&self) -> f64 {
        // for a positive operator the sup norm is attained on the constant one
        let ones = vec![1.0; self.grid.len()];
        self.apply(&ones).into_iter().fold(0.0, f64::max)
    }
}

/// The map `F ↦ exp(-λ P F)` for a positive linear operator `P`.
#[derive(Debug, Clone)]
pub struct ExpLinMap<P = Convolution> {
    lambda: f64,
    op: P,
}

impl ExpLinMap<Convolution> {
    /// `T_λ = exp(-λ Φ_μ)` on a grid of `n_intervals` cells spanning the
    /// measure's support.
    pub fn new(lambda: f64, measure: Measure, n_intervals: usize) -> Result<Self> {
        let grid = Grid::new(n_intervals, measure.grid_length())?;
        ExpLinMap::with_operator(lambda, Convolution::new(measure, grid)?)
    }

    pub fn measure(&self) -> &Measure {
        self.op.measure()
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.op = self.op.with_exec(exec);
        self
    }
}

impl<P: PositiveLinearOperator> ExpLinMap<P> {
    pub fn with_operator(lambda: f64, op: P) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::domain(format!("lambda = {lambda} must be positive and finite")));
        }
        Ok(ExpLinMap { lambda, op })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn operator(&self) -> &P {
        &self.op
    }

    pub fn grid(&self) -> Grid {
        self.op.grid()
    }

    /// `Ψ = λ P` applied to nodal values.
    pub fn psi(&self, values: &[f64]) -> Vec<f64> {
        let mut out = self.op.apply(values);
        for v in out.iter_mut() {
            *v *= self.lambda;
        }
        out
    }

    /// Contraction constant `κ = ‖Ψ‖_sup / e` of `T²`.
    pub fn kappa(&self) -> f64 {
        self.lambda * self.op.sup_norm_bound() / E
    }

    /// `T F = exp(-Ψ F)`, projected back onto nondecreasing `[0, 1]` values.
    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        self.grid().check_same(&f.grid())?;
        let raw: Vec<f64> = self.psi(f.values()).into_iter().map(|p| (-p).exp()).collect();
        monotone_project(self.grid(), raw)
    }

    /// `T(T F)`.
    pub fn apply_twice(&self, f: &GridFunction) -> Result<GridFunction> {
        self.apply(&self.apply(f)?)
    }

    /// Directional derivative `DT(F)(H) = -T F · Ψ H`.
    pub fn derivative(&self, f: &GridFunction, h: &[f64]) -> Result<Vec<f64>> {
        let tf = self.apply(f)?;
        Ok(tf.values().iter().zip(self.psi(h)).map(|(t, p)| -t * p).collect())
    }

    /// `‖T²(F + sH) - T²F‖_sup / (s ‖H‖_sup)`; bounded by `κ` when `λ < e`.
    pub fn contraction_ratio_probe(&self, f: &GridFunction, h: &[f64], scale: f64) -> Result<f64> {
        if !(scale > 0.0) {
            return Err(Error::domain(format!("probe scale {scale} must be positive")));
        }
        if h.len() != self.grid().len() {
            return Err(Error::domain("direction has the wrong number of nodes"));
        }
        let h_sup = h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if h_sup == 0.0 {
            return Err(Error::domain("probe direction is identically zero"));
        }
        let shifted: Vec<f64> = f.values().iter().zip(h).map(|(a, b)| a + scale * b).collect();
        let shifted = GridFunction::new(self.grid(), shifted)
            .map_err(|e| Error::domain(format!("perturbed function leaves the admissible set: {e}")))?;
        let a = self.apply_twice(&shifted)?;
        let b = self.apply_twice(f)?;
        Ok(sup_gap(a.values(), b.values()) / (scale * h_sup))
    }
}

/// Nodal `Φ_μ F` on the grid of `f`.
pub fn phi(measure: &Measure, f: &GridFunction) -> Result<Vec<f64>> {
    Ok(Convolution::new(measure.clone(), f.grid())?.apply(f.values()))
}

/// `T F` for a one-off `(λ, μ)` pair; see [`ExpLinMap`] for repeated use.
pub fn apply_t(lambda: f64, measure: &Measure, f: &GridFunction) -> Result<GridFunction> {
    let op = Convolution::new(measure.clone(), f.grid())?;
    ExpLinMap::with_operator(lambda, op)?.apply(f)
}

/// `∫ a · Φb` where `Φb` is given by its nodal (left) values and right
/// limits; each cell uses the one-sided values so jumps at nodes are handled.
fn cell_inner(h: f64, a: &[f64], phi_left: &[f64], phi_right: &[f64]) -> f64 {
    (0..a.len() - 1)
        .map(|k| 0.5 * h * (a[k] * phi_right[k] + a[k + 1] * phi_left[k + 1]))
        .sum()
}

/// `|∫ F · Φ G dx - ∫ Φ F · G dx|` on `[0, 1]`.
pub fn adjoint_defect(measure: &Measure, f: &GridFunction, g: &GridFunction) -> Result<f64> {
    f.grid().check_same(&g.grid())?;
    if measure.grid_length() != 1.0 {
        return Err(Error::domain("adjoint defect is defined for measures on [0, 1]"));
    }
    let op = Convolution::new(measure.clone(), f.grid())?;
    let h = f.grid().step();
    let phi_g = (op.apply(g.values()), op.right_limits(g.values()));
    let phi_f = (op.apply(f.values()), op.right_limits(f.values()));
    let lhs = cell_inner(h, f.values(), &phi_g.0, &phi_g.1);
    let rhs = cell_inner(h, g.values(), &phi_f.0, &phi_f.1);
    Ok((lhs - rhs).abs())
}

/// Ratios `(sup|ΦH| / sup|H|, ∫|ΦH| / ∫|H|)`; both are at most one.
pub fn norm_probe(measure: &Measure, grid: Grid, h: &[f64]) -> Result<(f64, f64)> {
    if h.len() != grid.len() {
        return Err(Error::domain("direction has the wrong number of nodes"));
    }
    let h_sup = h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if h_sup == 0.0 {
        return Err(Error::domain("norm ratio is undefined for H = 0"));
    }
    let op = Convolution::new(measure.clone(), grid)?;
    let left = op.apply(h);
    let right = op.right_limits(h);
    let sup = left.iter().chain(&right).fold(0.0f64, |m, v| m.max(v.abs()));
    let step = grid.step();
    let l1_phi: f64 = (0..left.len() - 1)
        .map(|k| abs_segment(right[k], left[k + 1]) * step)
        .sum();
    Ok((sup / h_sup, l1_phi / grid.abs_integral(h)))
}
