//! Envelope iteration and attractor classification.
//!
//! Starting from the constant `1`, the iterates `One^n = Tⁿ(1)` interleave:
//! even iterates decrease, odd iterates increase, and every odd iterate lies
//! below every even one. Their limits `U` (even) and `L` (odd) bracket every
//! trajectory from the second step on, and the map has a globally attracting
//! fixed point exactly when `L = U`.
//!
//! [`iterate_envelopes`] follows the pair until the gap `‖One^{2n} - One^{2n+1}‖`
//! closes (fixed point), stops moving while still open (period two), or the
//! iteration budget runs out.

use std::f64::consts::E;
use std::io::Write;

use crate::error::{Error, Result};
use crate::gridfn::{fmt_f64, l1_distance, sup_gap, GridFunction};
use crate::operator::{ExpLinMap, PositiveLinearOperator};

/// Allowed violation of the envelope ordering before it counts as a bug.
pub const ENVELOPE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    FixedPoint,
    PeriodTwo,
    Undecided,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Classification::FixedPoint => "FixedPoint",
            Classification::PeriodTwo => "PeriodTwo",
            Classification::Undecided => "Undecided",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeOptions {
    /// Sup-norm gap at which `L` and `U` count as equal.
    pub tol: f64,
    /// Budget of applications of `T`.
    pub max_iter: usize,
    /// Largest change of the gap per double step that counts as "stalled".
    pub stall_tol: f64,
    /// Consecutive stalled double steps needed to declare period two.
    pub stall_window: usize,
    /// Within this distance of `λ = e` a stall is reported as undecided.
    pub cutoff_band: f64,
}

impl Default for EnvelopeOptions {
    fn default() -> Self {
        EnvelopeOptions {
            tol: 1e-9,
            max_iter: 100_000,
            stall_tol: 1e-12,
            stall_window: 50,
            cutoff_band: 1e-3,
        }
    }
}

impl EnvelopeOptions {
    pub fn with_tol(tol: f64, max_iter: usize) -> Self {
        EnvelopeOptions {
            tol,
            max_iter,
            ..Default::default()
        }
    }
}

/// One row of the gap trace, logged after every odd iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapSample {
    /// Number of applications of `T` that produced the odd iterate.
    pub iteration: usize,
    pub sup_gap: f64,
    pub l1_gap: f64,
    /// Value of the odd iterate at `x = 0`.
    pub value_at_0: f64,
}

#[derive(Debug, Clone)]
pub struct AttractorReport {
    pub classification: Classification,
    /// Last odd iterate `One^{2n+1}`, the lower envelope.
    pub lower: GridFunction,
    /// Last even iterate `One^{2n}`, the upper envelope.
    pub upper: GridFunction,
    pub iterations_used: usize,
    pub final_sup_gap: f64,
    pub final_l1_gap: f64,
    pub gap_trace: Vec<GapSample>,
}

impl AttractorReport {
    /// Ratios `gap_{n+1} / gap_n` between consecutive double steps.
    pub fn gap_ratios(&self) -> Vec<f64> {
        self.gap_trace
            .windows(2)
            .filter(|w| w[0].sup_gap > 0.0)
            .map(|w| w[1].sup_gap / w[0].sup_gap)
            .collect()
    }

    /// Writes the trace as `iter,sup_gap,l1_gap,F_at_0`.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["iter", "sup_gap", "l1_gap", "F_at_0"])?;
        for s in &self.gap_trace {
            w.write_record([
                s.iteration.to_string(),
                fmt_f64(s.sup_gap),
                fmt_f64(s.l1_gap),
                fmt_f64(s.value_at_0),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

fn check_below(lower: &GridFunction, upper: &GridFunction, what: &str) -> Result<()> {
    let worst = lower
        .values()
        .iter()
        .zip(upper.values())
        .map(|(l, u)| l - u)
        .fold(f64::NEG_INFINITY, f64::max);
    if worst > ENVELOPE_SLACK {
        return Err(Error::Consistency(format!(
            "envelope ordering violated ({what}) by {worst:e}"
        )));
    }
    Ok(())
}

/// Iterates `T` from the constant one, tracking the even/odd envelopes.
pub fn iterate_envelopes<P: PositiveLinearOperator>(
    map: &ExpLinMap<P>,
    opts: &EnvelopeOptions,
) -> Result<AttractorReport> {
    if !(opts.tol > 0.0) {
        return Err(Error::domain(format!("tolerance {} must be positive", opts.tol)));
    }
    if opts.max_iter < 2 {
        return Err(Error::domain("max_iter must be at least 2"));
    }
    let near_cutoff = (map.lambda() - E).abs() <= opts.cutoff_band;

    let mut even = GridFunction::one(map.grid());
    let mut odd = map.apply(&even)?;
    check_below(&odd, &even, "One^1 <= One^0")?;
    let mut iterations = 1;
    let mut trace = Vec::new();
    let mut stalled = 0usize;
    let mut prev_gap = f64::NAN;

    loop {
        let gap = sup_gap(even.values(), odd.values());
        let l1 = l1_distance(&even, &odd)?;
        trace.push(GapSample {
            iteration: iterations,
            sup_gap: gap,
            l1_gap: l1,
            value_at_0: odd.values()[0],
        });

        let classification = if gap <= opts.tol {
            Some(Classification::FixedPoint)
        } else {
            if (gap - prev_gap).abs() < opts.stall_tol {
                stalled += 1;
            } else {
                stalled = 0;
            }
            if stalled >= opts.stall_window {
                Some(if near_cutoff {
                    Classification::Undecided
                } else {
                    Classification::PeriodTwo
                })
            } else if iterations + 2 > opts.max_iter {
                Some(Classification::Undecided)
            } else {
                None
            }
        };
        if let Some(classification) = classification {
            return Ok(AttractorReport {
                classification,
                lower: odd,
                upper: even,
                iterations_used: iterations,
                final_sup_gap: gap,
                final_l1_gap: l1,
                gap_trace: trace,
            });
        }
        prev_gap = gap;

        let next_even = map.apply(&odd)?;
        let next_odd = map.apply(&next_even)?;
        iterations += 2;
        check_below(&next_even, &even, "even iterates decrease")?;
        check_below(&odd, &next_odd, "odd iterates increase")?;
        check_below(&next_odd, &next_even, "odd below even")?;
        even = next_even;
        odd = next_odd;
    }
}

/// The trajectory `F0, T F0, ..., Tⁿ F0`.
pub fn iterate_from<P: PositiveLinearOperator>(
    map: &ExpLinMap<P>,
    start: &GridFunction,
    steps: usize,
) -> Result<Vec<GridFunction>> {
    let mut out = Vec::with_capacity(steps + 1);
    out.push(start.clone());
    for _ in 0..steps {
        let next = map.apply(out.last().expect("trajectory is never empty"))?;
        out.push(next);
    }
    Ok(out)
}

/// Least `N ≤ max_n` with `One^{2N+1}(0) > 1/e`, if any.
///
/// A positive answer means the envelopes meet in `L¹`. Odd iterates increase
/// with `N`, so the scan stops once they stop moving below the threshold.
pub fn endpoint_criterion<P: PositiveLinearOperator>(map: &ExpLinMap<P>, max_n: usize) -> Result<Option<usize>> {
    let threshold = 1.0 / E;
    let mut odd = map.apply(&GridFunction::one(map.grid()))?;
    let mut prev = f64::NAN;
    for n in 0..=max_n {
        let v = odd.values()[0];
        if v > threshold {
            return Ok(Some(n));
        }
        if (v - prev).abs() <= 1e-15 {
            return Ok(None);
        }
        prev = v;
        if n < max_n {
            odd = map.apply_twice(&odd)?;
        }
    }
    Ok(None)
}
