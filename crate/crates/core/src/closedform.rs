//! Closed-form fixed points for three measure families and the scalar maps
//! their dynamics reduce to.
//!
//! * Uniform on `[0, 1]`: `F_A(x) = A e^{Aλx} / (e^{Aλ}(A-1) + e^{Aλx})` with
//!   `e^{Aλ}(A-1)² = 1`, `A ∈ (1, 2)`.
//! * Exponential with rate `a`: `F_K(x) = exp(-K e^{-ax})` where `K` is the
//!   fixed point of `K ↦ λ(1 - e^{-K}) / K`, independent of `a`.
//! * Point mass at `t`: the step `M` on `[0, t]`, `1` beyond, where
//!   `M = e^{-λM}`. For `λ > e` the map `x ↦ e^{-λx}` has an attracting
//!   2-cycle `L < M < U` instead.
//!
//! Every scalar root is found by bisection on a monotone function; see
//! [`bisect`].

use std::f64::consts::E;
use std::fmt;

use crate::error::{Error, Result};
use crate::gridfn::{monotone_project, Grid, GridFunction};
use crate::measure::TRUNCATION_MASS;

pub const BISECTION_STEPS: usize = 200;

/// Gap kept between the 2-cycle bracket and the fixed point `M`.
const PERIOD2_GAP: f64 = 1e-9;

/// Root of `f` on `[lo, hi]` assuming `f(lo) < 0 < f(hi)` (or the reverse).
///
/// Runs [`BISECTION_STEPS`] halvings or stops once the bracket no longer
/// shrinks in floating point.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let rising = f(hi) > f(lo);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid);
        if v == 0.0 {
            return mid;
        }
        if (v < 0.0) == rising {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Uniform,
    Exponential,
    Dirac,
}

impl Family {
    pub fn param_name(self) -> &'static str {
        match self {
            Family::Uniform => "A",
            Family::Exponential => "K",
            Family::Dirac => "M",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Uniform => "uniform",
            Family::Exponential => "exponential",
            Family::Dirac => "dirac",
        })
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Family::Uniform),
            "exponential" | "exp" => Ok(Family::Exponential),
            "dirac" => Ok(Family::Dirac),
            _ => Err(Error::domain(format!(
                "unknown family `{s}`; expected uniform | exponential | dirac"
            ))),
        }
    }
}

/// Solved parameter of one example family at one `λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExampleParams {
    pub family: Family,
    pub lambda: f64,
    /// `A`, `K` or `M` depending on the family.
    pub value: f64,
    /// Residual of the defining equation at `value`.
    pub residual: f64,
    /// The 2-cycle `(L, U)` of the Dirac map when `λ > e`.
    pub period2: Option<(f64, f64)>,
}

impl ExampleParams {
    pub fn solve(family: Family, lambda: f64) -> Result<Self> {
        let (value, residual, period2) = match family {
            Family::Uniform => {
                let a = solve_a(lambda)?;
                (a, uniform_residual(lambda, a), None)
            }
            Family::Exponential => {
                let k = solve_k(lambda)?;
                (k, (k - k_map(lambda, k)).abs(), None)
            }
            Family::Dirac => {
                let m = solve_m(lambda)?;
                let cycle = if lambda > E { Some(dirac_period2(lambda)?) } else { None };
                (m, (dirac_map(lambda, m) - m).abs(), cycle)
            }
        };
        Ok(ExampleParams {
            family,
            lambda,
            value,
            residual,
            period2,
        })
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::domain(format!("lambda = {lambda} must be positive and finite")));
    }
    Ok(())
}

/// `|e^{Aλ}(A-1)² - 1|`, evaluated in log form.
pub fn uniform_residual(lambda: f64, a: f64) -> f64 {
    (a * lambda + 2.0 * (a - 1.0).ln()).exp_m1().abs()
}

/// The unique `A ∈ (1, 2)` with `e^{Aλ}(A-1)² = 1`.
///
/// Solved for `s = ln(A - 1)` as the root of `λ(1 + e^s) + 2s`, which is
/// increasing and changes sign on `[-λ/2 - 1, 0]`; this keeps full precision
/// in `A - 1` for large `λ`.
pub fn solve_a(lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let s = bisect(|s| lambda * (1.0 + s.exp()) + 2.0 * s, -0.5 * lambda - 1.0, 0.0);
    Ok(1.0 + s.exp())
}

/// `F_A(x)` for the uniform measure.
pub fn uniform_profile(lambda: f64, a: f64, x: f64) -> f64 {
    // divide through by e^{Aλ} to stay finite for large λ
    let tail = (a * lambda * (x - 1.0)).exp();
    a * tail / ((a - 1.0) + tail)
}

pub fn uniform_fixed_point(lambda: f64, n_intervals: usize) -> Result<GridFunction> {
    let a = solve_a(lambda)?;
    let grid = Grid::unit(n_intervals)?;
    let mut values: Vec<f64> = grid.nodes().map(|x| uniform_profile(lambda, a, x)).collect();
    // F_A(1) = A / (A - 1 + 1) = 1 exactly
    *values.last_mut().expect("grid has nodes") = 1.0;
    monotone_project(grid, values)
}

/// `λ (1 - e^{-K}) / K`, with the `K → 0` limit `λ`.
pub fn k_map(lambda: f64, k: f64) -> f64 {
    if k == 0.0 {
        lambda
    } else {
        -lambda * (-k).exp_m1() / k
    }
}

/// Fixed point of [`k_map`]; `K = 0` exactly when `λ = 0`.
pub fn solve_k(lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::domain(format!(
            "lambda = {lambda} must be nonnegative and finite"
        )));
    }
    if lambda == 0.0 {
        return Ok(0.0);
    }
    // K - k_map(K) rises from -λ at 0 and is positive at max(λ, 1)
    Ok(bisect(|k| k - k_map(lambda, k), 0.0, lambda.max(1.0)))
}

/// Truncation point `-ln(1e-12) / a` of the exponential measure.
pub fn exponential_domain(rate: f64) -> f64 {
    -TRUNCATION_MASS.ln() / rate
}

/// `F_K(x) = exp(-K e^{-ax})` on `[0, x_max]`.
pub fn exponential_fixed_point(lambda: f64, rate: f64, n_intervals: usize, x_max: f64) -> Result<GridFunction> {
    check_lambda(lambda)?;
    if !(rate > 0.0) || !(x_max > 0.0) {
        return Err(Error::domain("rate and x_max must be positive"));
    }
    let k = solve_k(lambda)?;
    exponential_profile(k, rate, n_intervals, x_max)
}

/// `exp(-K e^{-ax})` on a grid for an arbitrary `K ≥ 0`.
pub fn exponential_profile(k: f64, rate: f64, n_intervals: usize, x_max: f64) -> Result<GridFunction> {
    let grid = Grid::new(n_intervals, x_max)?;
    monotone_project(grid, grid.nodes().map(|x| (-k * (-rate * x).exp()).exp()).collect())
}

/// `x ↦ e^{-λx}`.
pub fn dirac_map(lambda: f64, x: f64) -> f64 {
    (-lambda * x).exp()
}

/// The unique `M ∈ (0, 1]` with `e^{-λM} = M`.
pub fn solve_m(lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(bisect(|m| dirac_map(lambda, m) - m, 0.0, 1.0))
}

/// The 2-cycle `(L, U)`, `L < M < U`, of `x ↦ e^{-λx}` for `λ > e`.
pub fn dirac_period2(lambda: f64) -> Result<(f64, f64)> {
    if !(lambda > E) || !lambda.is_finite() {
        return Err(Error::domain(format!(
            "lambda = {lambda}: a proper 2-cycle exists only for lambda > e"
        )));
    }
    let m = solve_m(lambda)?;
    let g = |x: f64| dirac_map(lambda, dirac_map(lambda, x)) - x;
    // g(0) > 0 and g < 0 just below the repelling fixed point; close to the
    // cutoff the sign change sits very near M, so widen the gap until g is
    // clearly negative there.
    let mut gap = PERIOD2_GAP;
    while !(g(m - gap) < 0.0) {
        gap *= 10.0;
        if gap >= m {
            return Err(Error::Consistency(format!(
                "no sign change of f(f(x)) - x below M = {m} at lambda = {lambda}"
            )));
        }
    }
    let low = bisect(g, 0.0, m - gap);
    Ok((low, dirac_map(lambda, low)))
}

/// Step `M` on `[0, t]`, `1` on the nodes right of `t`. The node at `t`
/// carries the left limit `M`; the jump is smeared over the following cell.
pub fn dirac_fixed_point(lambda: f64, t: f64, n_intervals: usize) -> Result<GridFunction> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::domain(format!("dirac location t = {t} must lie in (0, 1)")));
    }
    let m = solve_m(lambda)?;
    dirac_step(m, t, n_intervals)
}

/// Step with plateau `level` on `[0, t]` and `1` beyond.
pub fn dirac_step(level: f64, t: f64, n_intervals: usize) -> Result<GridFunction> {
    let grid = Grid::unit(n_intervals)?;
    let eps = 1e-12;
    monotone_project(
        grid,
        grid.nodes().map(|x| if x <= t + eps { level } else { 1.0 }).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Plain bisection oracle on [lo, hi] with a fixed 300 halvings.
    fn oracle_root(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        let flo = f(lo);
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if (f(mid) < 0.0) == (flo < 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn solve_a_anchors() {
        // e^{Aλ}(A-1)^2 - 1 solved directly on [1, 2] at λ = 1
        let direct = oracle_root(|a| (a * 1.0f64).exp() * (a - 1.0) * (a - 1.0) - 1.0, 1.0, 2.0);
        let a1 = solve_a(1.0).unwrap();
        assert!((a1 - direct).abs() < 1e-12);
        assert!((a1 - 1.4776).abs() < 1e-4);
        assert!(uniform_residual(1.0, a1) <= 1e-12);

        assert!(solve_a(1e-6).unwrap() > 1.999);
        assert!(solve_a(60.0).unwrap() < 1.0 + 1e-10);
        for lambda in [0.1, 1.0, 10.0] {
            let a = solve_a(lambda).unwrap();
            assert!(a > 1.0 && a < 2.0);
            assert!(uniform_residual(lambda, a) <= 1e-12, "λ = {lambda}");
        }
        // A - 1 = 1/e forces Aλ = 2, i.e. λ = 2e/(e+1)
        let boundary = 2.0 * E / (E + 1.0);
        assert!((solve_a(boundary).unwrap() - 1.0 - 1.0 / E).abs() < 1e-9);
        assert!(solve_a(E / (E + 1.0)).unwrap() - 1.0 > 1.0 / E);
        assert!(solve_a(2.0).unwrap() - 1.0 < 1.0 / E);
        assert!(solve_a(0.0).is_err());
        assert!(solve_a(-1.0).is_err());
    }

    #[test]
    fn uniform_profile_endpoints() {
        for lambda in [0.3, 1.0, 2.0, 7.0] {
            let a = solve_a(lambda).unwrap();
            assert!((uniform_profile(lambda, a, 1.0) - 1.0).abs() < 1e-12);
            assert!((uniform_profile(lambda, a, 0.0) - (a - 1.0)).abs() < 1e-9);
            let f = uniform_fixed_point(lambda, 256).unwrap();
            assert_eq!(f.values()[256], 1.0);
        }
    }

    #[test]
    fn uniform_satisfies_log_derivative_identity() {
        // λ exp(-λ ∫_0^x F) = F'(x) / F(x) at 100 interior points
        let lambda = 1.3;
        let a = solve_a(lambda).unwrap();
        let f = |x: f64| uniform_profile(lambda, a, x);
        let n = 20_000;
        let h = 1.0 / n as f64;
        let mut integral = vec![0.0; n + 1];
        for k in 1..=n {
            integral[k] = integral[k - 1] + 0.5 * h * (f((k - 1) as f64 * h) + f(k as f64 * h));
        }
        for i in 1..=100 {
            let k = i * n / 101;
            let x = k as f64 * h;
            let d = (f(x + 1e-6) - f(x - 1e-6)) / 2e-6;
            let lhs = lambda * (-lambda * integral[k]).exp();
            assert!((lhs - d / f(x)).abs() < 1e-4, "x = {x}");
        }
    }

    #[test]
    fn solve_k_anchors() {
        assert_eq!(solve_k(0.0).unwrap(), 0.0);
        let direct = oracle_root(|k| k * k - (1.0 - (-k).exp()), 1e-9, 1.0);
        let k1 = solve_k(1.0).unwrap();
        assert!((k1 - direct).abs() < 1e-12);
        assert!((k1 - 0.7146).abs() < 1e-4);
        for lambda in [0.01, 0.5, 1.0, 2.0, 30.0] {
            let k = solve_k(lambda).unwrap();
            assert!((k - k_map(lambda, k)).abs() <= 1e-12);
        }
        assert!(solve_k(-0.1).is_err());
        // λ > e/(e-1) pushes K past 1
        assert!(solve_k(E / (E - 1.0) + 1e-3).unwrap() > 1.0);
        assert!(solve_k(E / (E - 1.0) - 1e-3).unwrap() < 1.0);
    }

    #[test]
    fn k_map_has_no_proper_two_cycle() {
        for lambda in [0.5, 1.0, 3.0, 10.0] {
            let k = solve_k(lambda).unwrap();
            assert!((k_map(lambda, k_map(lambda, k)) - k).abs() < 1e-12);
            let n = 20_000;
            let g = |x: f64| k_map(lambda, k_map(lambda, x)) - x;
            // sign of g(x) is that of (K - x) on (0, λ]
            for i in 1..=n {
                let x = lambda * i as f64 / n as f64;
                if (x - k).abs() > 1e-6 {
                    assert!(g(x) * (k - x) > 0.0, "λ = {lambda}, x = {x}");
                }
            }
        }
    }

    #[test]
    fn exponential_profile_anchors() {
        let k = solve_k(1.0).unwrap();
        let x_max = exponential_domain(1.0);
        let f = exponential_fixed_point(1.0, 1.0, 2048, x_max).unwrap();
        assert!((f.values()[0] - (-k).exp()).abs() < 1e-15);
        assert!((f.values()[0] - 0.4894).abs() < 1e-4);
        assert!((1.0 - f.values()[2048]).abs() <= 1e-12);
        assert!(exponential_fixed_point(1.0, 0.0, 16, 1.0).is_err());
        assert!(exponential_fixed_point(0.0, 1.0, 16, 1.0).is_err());
    }

    #[test]
    fn dirac_anchors() {
        assert_eq!(dirac_map(3.0, 0.0), 1.0);
        assert!((dirac_map(E, 1.0 / E) - 1.0 / E).abs() < 1e-16);
        assert!((solve_m(E).unwrap() - 1.0 / E).abs() < 1e-12);
        let m1 = solve_m(1.0).unwrap();
        let direct = oracle_root(|m| (-m).exp() - m, 0.0, 1.0);
        assert!((m1 - direct).abs() < 1e-12);
        assert!((m1 - 0.567143).abs() < 1e-6);
        assert!((dirac_map(1.0, m1) - m1).abs() < 1e-12);
        assert!(solve_m(1e-9).unwrap() > 0.999_999);
        let mut prev = 1.0;
        for i in 1..50 {
            let m = solve_m(0.2 * i as f64).unwrap();
            assert!(m < prev);
            prev = m;
        }
    }

    #[test]
    fn dirac_second_iterate_sign() {
        let f2 = |l: f64, x: f64| dirac_map(l, dirac_map(l, x));
        for lambda in [0.5, 1.0, 2.0, 2.7] {
            let m = solve_m(lambda).unwrap();
            for i in 0..=1000 {
                let x = i as f64 / 1000.0;
                if (x - m).abs() > 1e-6 {
                    assert!((f2(lambda, x) - x) * (m - x) > 0.0, "λ = {lambda}, x = {x}");
                }
            }
        }
        let lambda = 3.0;
        let m = solve_m(lambda).unwrap();
        let (lo, _) = dirac_period2(lambda).unwrap();
        let x = 0.5 * (lo + m);
        assert!((f2(lambda, x) - x) * (m - x) < 0.0);
    }

    #[test]
    fn period_two_orbit() {
        let (lo, hi) = dirac_period2(3.0).unwrap();
        let m = solve_m(3.0).unwrap();
        assert!(lo < m && m < hi);
        assert!((dirac_map(3.0, lo) - hi).abs() <= 1e-12);
        assert!((dirac_map(3.0, hi) - lo).abs() <= 1e-12);
        let mut x = 0.1;
        for _ in 0..10_000 {
            x = dirac_map(3.0, x);
        }
        // even number of steps from 0.1 < M lands on the lower point
        assert!((x - lo).abs() < 1e-9);
        assert!((dirac_map(3.0, x) - hi).abs() < 1e-9);

        let near = dirac_period2(E + 1e-6).unwrap();
        assert!(near.1 - near.0 < 1e-2);
        assert!((dirac_map(E + 1e-6, near.0) - near.1).abs() <= 1e-12);
        assert!((dirac_map(E + 1e-6, near.1) - near.0).abs() <= 1e-12);
        assert!(dirac_period2(E).is_err());
        assert!(dirac_period2(2.0).is_err());
    }

    #[test]
    fn dirac_step_profile() {
        let f = dirac_fixed_point(E, 0.5, 2048).unwrap();
        assert!((f.values()[1024] - 1.0 / E).abs() < 1e-12);
        assert_eq!(f.values()[1025], 1.0);
        assert!((f.values()[0] - 1.0 / E).abs() < 1e-12);
        assert!(dirac_fixed_point(1.0, 1.0, 16).is_err());
        let f = dirac_fixed_point(1.0, 0.3, 2048).unwrap();
        assert!((f.values()[10] - 0.567143).abs() < 1e-6);
    }

    #[test]
    fn example_params_residuals() {
        for family in [Family::Uniform, Family::Exponential, Family::Dirac] {
            for lambda in [0.5, 1.0, 2.0, 3.5] {
                let p = ExampleParams::solve(family, lambda).unwrap();
                assert!(p.residual <= 1e-12, "{family} {lambda}: {}", p.residual);
                assert_eq!(p.period2.is_some(), family == Family::Dirac && lambda > E);
            }
        }
        assert_eq!("exp".parse::<Family>().unwrap(), Family::Exponential);
        assert!("poisson".parse::<Family>().is_err());
    }
}
