use std::f64::consts::E;
use std::io::Write;
use std::path::PathBuf;

use ecutoff::closedform::{
    dirac_fixed_point, dirac_map, exponential_fixed_point, uniform_fixed_point, ExampleParams, Family,
};
use ecutoff::dynamics::{endpoint_criterion, iterate_envelopes, AttractorReport, Classification, EnvelopeOptions};
use ecutoff::error::{Error, Result};
use ecutoff::exec::Streams;
use ecutoff::gridfn::{fmt_f64, GridFunction};
use ecutoff::matching::{recursion_cdf_check, LimitEstimate};
use ecutoff::measure::Measure;
use ecutoff::operator::{apply_t, ExpLinMap};

use crate::{Command, Common, Iteration, Output, Start};

/// Steps scanned by the endpoint criterion in `classify`.
const ENDPOINT_STEPS: usize = 200;

pub fn run(command: Command, line: &str) -> Result<()> {
    match command {
        Command::Classify { common, iter, trace } => classify(&common, &iter, trace.as_deref(), line),
        Command::Solve { family, lambda, out } => solve(family, lambda, &out, line),
        Command::Verify { common, iter } => verify(&common, &iter, line),
        Command::SimulateMatching {
            common,
            iter,
            n,
            samples,
            replicates,
        } => simulate_matching(&common, &iter, n, samples, replicates, line),
        Command::RecursionCheck {
            common,
            iter,
            samples,
            start,
        } => recursion_check(&common, &iter, samples, start, line),
    }
}

fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("--lambda must be positive and finite, got {lambda}")))
    }
}

/// Parses and range-checks the flags shared by the measure-based commands.
fn setup(common: &Common, iter: &Iteration) -> Result<(ExpLinMap, EnvelopeOptions)> {
    check_lambda(common.lambda)?;
    if common.grid < 16 {
        return Err(domain(format!("--grid must be at least 16, got {}", common.grid)));
    }
    if !(iter.tol > 0.0) {
        return Err(domain(format!("--tol must be positive, got {}", iter.tol)));
    }
    let measure = Measure::parse(&common.measure)?;
    let map = ExpLinMap::new(common.lambda, measure, common.grid)?;
    Ok((map, EnvelopeOptions::with_tol(iter.tol, iter.max_iter)))
}

/// CSV report preceded by `# command: ...` and `# seed: ...` lines.
struct Report {
    rows: csv::Writer<Vec<u8>>,
}

impl Report {
    fn new(line: &str, seed: u64, header: &[&str]) -> Result<Self> {
        let mut buf = Vec::new();
        writeln!(buf, "# command: {line}").expect("writing to memory");
        writeln!(buf, "# seed: {seed}").expect("writing to memory");
        let mut rows = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(buf);
        rows.write_record(header)?;
        Ok(Report { rows })
    }

    fn row<I: IntoIterator<Item = String>>(&mut self, fields: I) -> Result<()> {
        self.rows.write_record(fields)?;
        Ok(())
    }

    fn finish(self, out: Option<&str>) -> Result<()> {
        let bytes = self.rows.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
        emit(&bytes, out)
    }
}

fn emit(bytes: &[u8], out: Option<&str>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, bytes).map_err(|source| Error::Io {
            path: PathBuf::from(path),
            source,
        }),
        None => std::io::stdout().write_all(bytes).map_err(|source| Error::Io {
            path: PathBuf::from("<stdout>"),
            source,
        }),
    }
}

fn classify(common: &Common, iter: &Iteration, trace: Option<&str>, line: &str) -> Result<()> {
    let (map, opts) = setup(common, iter)?;
    let r = iterate_envelopes(&map, &opts)?;
    let endpoint = endpoint_criterion(&map, ENDPOINT_STEPS)?;

    let mut report = Report::new(
        line,
        common.out.seed,
        &[
            "measure",
            "lambda",
            "grid",
            "tol",
            "classification",
            "iterations",
            "final_sup_gap",
            "final_l1_gap",
            "kappa",
            "L_at_0",
            "U_at_0",
            "endpoint_n",
        ],
    )?;
    report.row([
        common.measure.clone(),
        fmt_f64(common.lambda),
        common.grid.to_string(),
        fmt_f64(iter.tol),
        r.classification.to_string(),
        r.iterations_used.to_string(),
        fmt_f64(r.final_sup_gap),
        fmt_f64(r.final_l1_gap),
        fmt_f64(map.kappa()),
        fmt_f64(r.lower.values()[0]),
        fmt_f64(r.upper.values()[0]),
        endpoint.map_or_else(|| "none".to_string(), |n| n.to_string()),
    ])?;
    if let Some(path) = trace {
        write_trace(&r, line, common.out.seed, path)?;
    }
    report.finish(common.out.out.as_deref())
}

fn write_trace(r: &AttractorReport, line: &str, seed: u64, path: &str) -> Result<()> {
    let mut buf = format!("# command: {line}\n# seed: {seed}\n").into_bytes();
    r.write_trace_csv(&mut buf)?;
    emit(&buf, Some(path))
}

fn solve(family: Family, lambda: f64, out: &Output, line: &str) -> Result<()> {
    check_lambda(lambda)?;
    let p = ExampleParams::solve(family, lambda)?;
    let mut report = Report::new(
        line,
        out.seed,
        &["family", "lambda", "param_name", "param_value", "residual"],
    )?;
    report.row([
        family.to_string(),
        fmt_f64(lambda),
        family.param_name().to_string(),
        fmt_f64(p.value),
        fmt_f64(p.residual),
    ])?;
    // Beyond the cutoff the Dirac map also has a 2-cycle.
    if let Some((low, high)) = p.period2 {
        for (name, x) in [("L", low), ("U", high)] {
            let residual = (dirac_map(lambda, dirac_map(lambda, x)) - x).abs();
            report.row([
                family.to_string(),
                fmt_f64(lambda),
                name.to_string(),
                fmt_f64(x),
                fmt_f64(residual),
            ])?;
        }
    }
    report.finish(out.out.as_deref())
}

fn verify(common: &Common, iter: &Iteration, line: &str) -> Result<()> {
    let (map, opts) = setup(common, iter)?;
    let lambda = common.lambda;
    let n = common.grid;
    let measure = map.measure().clone();
    let h = map.grid().step();
    // nodes excluded from comparisons (the jump cell of the Dirac step)
    let (family, closed, jump) = match &measure {
        Measure::Uniform => (Family::Uniform, uniform_fixed_point(lambda, n)?, None),
        Measure::Exponential { rate } => (
            Family::Exponential,
            exponential_fixed_point(lambda, *rate, n, measure.grid_length())?,
            None,
        ),
        Measure::Atomic(atoms) if atoms.len() == 1 => {
            let t = atoms[0].location;
            (Family::Dirac, dirac_fixed_point(lambda, t, n)?, Some(t))
        }
        _ => {
            return Err(domain(format!(
                "no closed-form fixed point for `{}`; verify takes uniform, exp:a=<rate> or dirac:t=<t>",
                common.measure
            )))
        }
    };
    let keep = |x: f64| jump.is_none_or(|t| (x - t).abs() > 1.5 * h);
    let sup = |a: &GridFunction, b: &GridFunction| {
        a.grid()
            .nodes()
            .zip(a.values().iter().zip(b.values()))
            .filter(|(x, _)| keep(*x))
            .map(|(_, (u, v))| (u - v).abs())
            .fold(0.0f64, f64::max)
    };

    let params = ExampleParams::solve(family, lambda)?;
    let residual = sup(&apply_t(lambda, &measure, &closed)?, &closed);
    let bound = 5.0 / n as f64;
    let r = iterate_envelopes(&map, &opts)?;
    let envelope_distance = match r.classification {
        Classification::FixedPoint => fmt_f64(sup(&r.upper, &closed)),
        _ => String::new(),
    };

    let mut report = Report::new(
        line,
        common.out.seed,
        &[
            "measure",
            "lambda",
            "grid",
            "family",
            "param_name",
            "param_value",
            "residual",
            "bound",
            "classification",
            "envelope_distance",
        ],
    )?;
    report.row([
        common.measure.clone(),
        fmt_f64(lambda),
        n.to_string(),
        family.to_string(),
        family.param_name().to_string(),
        fmt_f64(params.value),
        fmt_f64(residual),
        fmt_f64(bound),
        r.classification.to_string(),
        envelope_distance,
    ])?;
    report.finish(common.out.out.as_deref())?;
    if !(residual <= bound) {
        return Err(Error::Consistency(format!(
            "closed-form residual {residual:e} exceeds {bound:e}"
        )));
    }
    Ok(())
}

fn converged(map: &ExpLinMap, opts: &EnvelopeOptions) -> Result<GridFunction> {
    let r = iterate_envelopes(map, opts)?;
    if r.classification != Classification::FixedPoint {
        let hint = if map.lambda() >= E {
            " (lambda is beyond the cutoff e)"
        } else {
            ""
        };
        return Err(domain(format!(
            "the envelopes did not converge to a fixed point: {}{hint}",
            r.classification
        )));
    }
    Ok(r.upper)
}

fn simulate_matching(
    common: &Common,
    iter: &Iteration,
    n: usize,
    samples: usize,
    replicates: usize,
    line: &str,
) -> Result<()> {
    let (map, opts) = setup(common, iter)?;
    if map.measure().is_atomic() {
        return Err(domain("simulate-matching needs an atom-free weight law"));
    }
    let f_star = converged(&map, &opts)?;
    let seed = common.out.seed;
    let est = LimitEstimate::compute(
        n,
        common.lambda,
        map.measure(),
        &f_star,
        samples,
        replicates,
        &Streams::new(seed),
    )?;
    let mut report = Report::new(
        line,
        seed,
        &[
            "n",
            "lambda",
            "measure",
            "samples",
            "empirical_mean",
            "empirical_se",
            "analytic_value",
            "analytic_se",
            "seed",
        ],
    )?;
    report.row([
        n.to_string(),
        fmt_f64(common.lambda),
        common.measure.clone(),
        samples.to_string(),
        fmt_f64(est.empirical_mean),
        fmt_f64(est.std_error),
        fmt_f64(est.analytic_value),
        fmt_f64(est.analytic_std_error),
        seed.to_string(),
    ])?;
    report.finish(common.out.out.as_deref())
}

fn recursion_check(common: &Common, iter: &Iteration, samples: usize, start: Start, line: &str) -> Result<()> {
    let (map, opts) = setup(common, iter)?;
    let f = match start {
        Start::One => GridFunction::one(map.grid()),
        Start::Fixed => converged(&map, &opts)?,
    };
    let seed = common.out.seed;
    let ks = recursion_cdf_check(common.lambda, map.measure(), &f, samples, &Streams::new(seed))?;
    let mut report = Report::new(
        line,
        seed,
        &["measure", "lambda", "grid", "start", "samples", "ks", "seed"],
    )?;
    report.row([
        common.measure.clone(),
        fmt_f64(common.lambda),
        common.grid.to_string(),
        match start {
            Start::One => "one",
            Start::Fixed => "fixed",
        }
        .to_string(),
        samples.to_string(),
        fmt_f64(ks),
        seed.to_string(),
    ])?;
    report.finish(common.out.out.as_deref())
}
