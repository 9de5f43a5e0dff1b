//! Maximum-weight matching on sparse random graphs, and the Monte Carlo
//! estimators tying it to the fixed point of `T`.
//!
//! On `G(n, λ/n)` with i.i.d. edge weights `W ~ μ`, the normalized optimum
//! `E[M_μ(n, λ)] / n` converges to
//!
//! ```text
//! ½ E[ Σ_{i ≤ K} W_i · 1{W_i − X_i = max_{j ≤ K} (W_j − X_j) > 0} ]
//! ```
//!
//! with `K ~ Pois(λ)`, `W_i ~ μ` and `X_i ~ F*` all independent, where `F*`
//! is the fixed point of `T`. [`empirical_limit`] estimates the left side by
//! solving random instances exactly, [`analytic_limit`] the right side by
//! direct sampling. [`recursion_cdf_check`] checks the distributional
//! recursion `X = max(0, max_{i ≤ K}(W_i − X_i))` whose law is `T F`.

mod blossom;

use rand::Rng;

use crate::error::{Error, Result};
use crate::exec::Streams;
use crate::gridfn::GridFunction;
use crate::measure::Measure;
use crate::operator::apply_t;

/// Largest edge count [`brute_force_matching`] accepts.
pub const BRUTE_FORCE_MAX_EDGES: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub w: f64,
}

/// Undirected graph on `0..n` with nonnegative edge weights; each edge is
/// stored once with `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    n: usize,
    edges: Vec<Edge>,
}

impl WeightedGraph {
    pub fn new(n: usize, edges: Vec<Edge>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for e in &edges {
            if e.i >= e.j || e.j >= n {
                return Err(Error::domain(format!("edge ({}, {}) is not i < j < n = {n}", e.i, e.j)));
            }
            if !(e.w >= 0.0 && e.w.is_finite()) {
                return Err(Error::domain(format!(
                    "edge weight {} is not a finite nonnegative number",
                    e.w
                )));
            }
            if !seen.insert((e.i, e.j)) {
                return Err(Error::domain(format!("duplicate edge ({}, {})", e.i, e.j)));
            }
        }
        Ok(WeightedGraph { n, edges })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn without_edge(&self, k: usize) -> Self {
        let mut edges = self.edges.clone();
        edges.remove(k);
        WeightedGraph { n: self.n, edges }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchingResult {
    /// Indices into the graph's edge list, ascending.
    pub matched_edges: Vec<usize>,
    pub total_weight: f64,
}

impl MatchingResult {
    fn from_edges(g: &WeightedGraph, mut matched: Vec<usize>) -> Self {
        matched.sort_unstable();
        let total_weight = matched.iter().map(|&k| g.edges[k].w).sum();
        MatchingResult {
            matched_edges: matched,
            total_weight,
        }
    }

    /// Whether no two matched edges share a vertex.
    pub fn is_matching(&self, g: &WeightedGraph) -> bool {
        let mut used = vec![false; g.n];
        for &k in &self.matched_edges {
            let e = g.edges[k];
            if used[e.i] || used[e.j] {
                return false;
            }
            used[e.i] = true;
            used[e.j] = true;
        }
        true
    }
}

/// Erdős–Rényi graph: each of the `n(n−1)/2` pairs is present with
/// probability `λ/n`, independently, with an independent weight drawn from
/// `m`. Pairs are visited in lexicographic order, one uniform per pair and
/// one weight draw per included pair.
pub fn gen_graph<R: Rng + ?Sized>(n: usize, lambda: f64, m: &Measure, rng: &mut R) -> Result<WeightedGraph> {
    if n < 2 {
        return Err(Error::domain(format!("graph needs at least 2 nodes, got {n}")));
    }
    if !(lambda > 0.0 && lambda < n as f64) {
        return Err(Error::domain(format!(
            "lambda must lie in (0, n) = (0, {n}), got {lambda}"
        )));
    }
    let p = lambda / n as f64;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push(Edge { i, j, w: m.sample(rng) });
            }
        }
    }
    Ok(WeightedGraph { n, edges })
}

/// Exact maximum-weight matching (not necessarily of maximum cardinality).
pub fn max_weight_matching(g: &WeightedGraph) -> MatchingResult {
    let raw: Vec<(usize, usize, f64)> = g.edges.iter().map(|e| (e.i, e.j, e.w)).collect();
    let mate = blossom::solve(g.n, &raw);
    let matched = g
        .edges
        .iter()
        .enumerate()
        .filter(|(_, e)| mate[e.i] == Some(e.j))
        .map(|(k, _)| k)
        .collect();
    MatchingResult::from_edges(g, matched)
}

/// Exhaustive search with an optimistic bound; the oracle for
/// [`max_weight_matching`].
pub fn brute_force_matching(g: &WeightedGraph) -> Result<MatchingResult> {
    let m = g.edges.len();
    if m > BRUTE_FORCE_MAX_EDGES {
        return Err(Error::domain(format!(
            "brute force takes at most {BRUTE_FORCE_MAX_EDGES} edges, got {m}"
        )));
    }
    // suffix[k] = total weight of edges k.. (an upper bound on what is left)
    let mut suffix = vec![0.0; m + 1];
    for k in (0..m).rev() {
        suffix[k] = suffix[k + 1] + g.edges[k].w;
    }
    struct Search<'a> {
        g: &'a WeightedGraph,
        suffix: Vec<f64>,
        used: Vec<bool>,
        current: Vec<usize>,
        weight: f64,
        best: Vec<usize>,
        best_weight: f64,
    }
    impl Search<'_> {
        fn go(&mut self, k: usize) {
            if self.weight > self.best_weight {
                self.best_weight = self.weight;
                self.best = self.current.clone();
            }
            if k == self.g.edges.len() || self.weight + self.suffix[k] <= self.best_weight {
                return;
            }
            let e = self.g.edges[k];
            if !self.used[e.i] && !self.used[e.j] {
                self.used[e.i] = true;
                self.used[e.j] = true;
                self.current.push(k);
                self.weight += e.w;
                self.go(k + 1);
                self.weight -= e.w;
                self.current.pop();
                self.used[e.i] = false;
                self.used[e.j] = false;
            }
            self.go(k + 1);
        }
    }
    let mut s = Search {
        g,
        suffix,
        used: vec![false; g.n],
        current: Vec::new(),
        weight: 0.0,
        best: Vec::new(),
        best_weight: 0.0,
    };
    s.go(0);
    Ok(MatchingResult::from_edges(g, s.best))
}

/// Greedy matching over the edges in the given order.
pub fn greedy_matching(g: &WeightedGraph, order: &[usize]) -> MatchingResult {
    let mut used = vec![false; g.n];
    let mut matched = Vec::new();
    for &k in order {
        let e = g.edges[k];
        if !used[e.i] && !used[e.j] {
            used[e.i] = true;
            used[e.j] = true;
            matched.push(k);
        }
    }
    MatchingResult::from_edges(g, matched)
}

/// `Pois(λ)` by sequential inversion of the CDF with one uniform.
pub fn sample_poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut p = (-lambda).exp();
    let mut cdf = p;
    let mut k = 0;
    // The cap only matters when rounding keeps the CDF below u.
    while u >= cdf && k < 10_000 {
        k += 1;
        p *= lambda / k as f64;
        cdf += p;
    }
    k
}

/// Sample mean and standard error of the mean.
fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "lambda must be positive and finite, got {lambda}"
        )))
    }
}

/// Mean and standard error of `M_μ(n, λ) / n` over `samples` graphs; graph
/// `i` is drawn from stream `i`.
pub fn empirical_limit(n: usize, lambda: f64, m: &Measure, samples: usize, streams: &Streams) -> Result<(f64, f64)> {
    if samples < 2 {
        return Err(Error::domain(format!("need at least 2 samples, got {samples}")));
    }
    let values = streams.map(samples, |_, rng| -> Result<f64> {
        let g = gen_graph(n, lambda, m, rng)?;
        Ok(max_weight_matching(&g).total_weight / n as f64)
    });
    let values = values.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(mean_se(&values))
}

/// Monte Carlo value of the limit expression; replicate `i` uses stream `i`
/// and draws `K`, then `(W_1, X_1), (W_2, X_2), ...`. Ties in the argmax go
/// to the lowest index.
pub fn analytic_limit(
    lambda: f64,
    m: &Measure,
    f_star: &GridFunction,
    replicates: usize,
    streams: &Streams,
) -> Result<(f64, f64)> {
    check_lambda(lambda)?;
    if m.is_atomic() {
        return Err(Error::domain("the matching limit needs an atom-free weight law"));
    }
    if replicates < 2 {
        return Err(Error::domain(format!("need at least 2 replicates, got {replicates}")));
    }
    let values = streams.map(replicates, |_, rng| {
        let k = sample_poisson(lambda, rng);
        let mut best = f64::NEG_INFINITY;
        let mut best_w = 0.0;
        for _ in 0..k {
            let w = m.sample(rng);
            let x = f_star.sample_from(rng);
            if w - x > best {
                best = w - x;
                best_w = w;
            }
        }
        if best > 0.0 {
            0.5 * best_w
        } else {
            0.0
        }
    });
    Ok(mean_se(&values))
}

/// Kolmogorov–Smirnov distance between `samples` draws of
/// `X = max(0, max_{i ≤ K}(W_i − X_i))` (`X = 0` when `K = 0`) with
/// `X_i ~ F`, and `T F` on the grid of `F`.
pub fn recursion_cdf_check(
    lambda: f64,
    m: &Measure,
    f: &GridFunction,
    samples: usize,
    streams: &Streams,
) -> Result<f64> {
    check_lambda(lambda)?;
    if samples == 0 {
        return Err(Error::domain("need at least one sample"));
    }
    let target = apply_t(lambda, m, f)?;
    let mut xs = streams.map(samples, |_, rng| {
        let k = sample_poisson(lambda, rng);
        let mut x = 0.0f64;
        for _ in 0..k {
            let w = m.sample(rng);
            let xi = f.sample_from(rng);
            x = x.max(w - xi);
        }
        x
    });
    xs.sort_unstable_by(f64::total_cmp);
    Ok(ks_distance(&xs, &target))
}

/// `sup_x |F_emp(x) − G(x)|` for sorted samples on `[0, ∞)` and a grid CDF
/// `G`. `G` is continuous except for a possible atom at `0`, so the supremum
/// is attained at a sample value (from either side) or at `0`.
fn ks_distance(sorted: &[f64], g: &GridFunction) -> f64 {
    let n = sorted.len() as f64;
    let zeros = sorted.partition_point(|&x| x <= 0.0);
    let mut d = (zeros as f64 / n - g.eval(0.0)).abs();
    let mut i = zeros;
    while i < sorted.len() {
        let v = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == v {
            j += 1;
        }
        let gv = g.eval(v);
        d = d.max((i as f64 / n - gv).abs()).max((j as f64 / n - gv).abs());
        i = j;
    }
    d
}

/// Empirical and analytic sides of the matching limit, side by side.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitEstimate {
    pub empirical_mean: f64,
    pub std_error: f64,
    pub analytic_value: f64,
    pub analytic_std_error: f64,
    pub n: usize,
    pub samples: usize,
}

impl LimitEstimate {
    /// Graphs use `streams.derive(1)`, analytic replicates `streams.derive(2)`.
    pub fn compute(
        n: usize,
        lambda: f64,
        m: &Measure,
        f_star: &GridFunction,
        samples: usize,
        replicates: usize,
        streams: &Streams,
    ) -> Result<Self> {
        let (empirical_mean, std_error) = empirical_limit(n, lambda, m, samples, &streams.derive(1))?;
        let (analytic_value, analytic_std_error) = analytic_limit(lambda, m, f_star, replicates, &streams.derive(2))?;
        Ok(LimitEstimate {
            empirical_mean,
            std_error,
            analytic_value,
            analytic_std_error,
            n,
            samples,
        })
    }

    pub fn combined_se(&self) -> f64 {
        self.std_error.hypot(self.analytic_std_error)
    }

    /// `|empirical − analytic| ≤ 3 · combined SE + 2/n`.
    pub fn agrees(&self) -> bool {
        (self.empirical_mean - self.analytic_value).abs() <= 3.0 * self.combined_se() + 2.0 / self.n as f64
    }
}
