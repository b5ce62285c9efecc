//! Time/data tradeoff tables: complexity, sample size for unit risk and the
//! risk attained there, for a hierarchy of relaxations of one signal set.

use super::output::{num, ExperimentOutput, Table};
use super::{Experiment, ExperimentConfig, MAIN_HEADER, TIMING_HEADER};
use crate::convex::{
    gaussian_sq_complexity, matrix_side, risk_mc, sample_size_for_unit_risk, ConeMethod, ConeOptions, ConvexBody,
    DenoiseProblem, Elliptope, NuclearBall, Singleton, SignalSpec, DEFAULT_VERTEX_CAP,
};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Bodies compared for a signal family, tightest first, followed by the
/// singleton control.
pub fn bodies_for(signal: SignalSpec, x_star: &[f64]) -> Result<Vec<Box<dyn ConvexBody>>> {
    let p = signal.p();
    let q = matrix_side(p)?;
    let mut out: Vec<Box<dyn ConvexBody>> = vec![Box::new(signal.hull()?)];
    if let SignalSpec::CutMatrix { .. } = signal {
        out.push(Box::new(Elliptope::new(q)));
    }
    out.push(Box::new(NuclearBall::for_signals(p)?));
    out.push(Box::new(Singleton { point: x_star.to_vec() }));
    Ok(out)
}

/// One row of the table.
#[derive(Clone, Debug, PartialEq)]
pub struct BodyReport {
    pub body: String,
    pub cone: &'static str,
    pub complexity: f64,
    pub complexity_se: f64,
    pub complexity_dropped: usize,
    pub n_unit_risk: u64,
    pub risk: f64,
    pub risk_se: f64,
    pub risk_bound: f64,
    pub risk_bound_se: f64,
    pub unconverged: usize,
    /// Mean wallclock of one projection onto the body.
    pub projection_seconds: f64,
}

/// Evaluates one body. `streams` holds the complexity and risk streams; the
/// caller shares them across bodies so that comparisons use common draws.
pub fn evaluate_body(
    body: &dyn ConvexBody,
    x_star: &[f64],
    sigma: f64,
    trials: usize,
    opts: &ConeOptions,
    cone_rng: &RngStream,
    complexity_rng: &RngStream,
    risk_rng: &RngStream,
) -> Result<BodyReport> {
    let cone = body.tangent_cone(x_star, opts, cone_rng)?;
    let g = gaussian_sq_complexity(&cone, trials, complexity_rng)?;
    let n = sample_size_for_unit_risk(sigma, g.mean)?;
    let n_eval = n.max(1);
    let risk = risk_mc(
        &DenoiseProblem {
            x_star: x_star.to_vec(),
            sigma,
            n: n_eval,
            body,
        },
        trials,
        risk_rng,
    )?;
    let factor = sigma * sigma / n_eval as f64;
    Ok(BodyReport {
        body: body.name(),
        cone: cone.kind(),
        complexity: g.mean,
        complexity_se: g.std_error,
        complexity_dropped: g.dropped,
        n_unit_risk: n,
        risk: risk.mean,
        risk_se: risk.std_error,
        risk_bound: factor * g.mean,
        risk_bound_se: factor * g.std_error,
        unconverged: risk.unconverged,
        projection_seconds: risk.projection_seconds / trials as f64,
    })
}

pub(super) fn run(cfg: &ExperimentConfig, experiment: Experiment) -> Result<ExperimentOutput> {
    let c = &cfg.convex;
    let make = |p: usize| match experiment {
        Experiment::TradeoffCutMatrix => Ok(SignalSpec::CutMatrix { p }),
        Experiment::TradeoffSparsePca => Ok(SignalSpec::SparsePca { p, k: c.k }),
        other => Err(Error::invalid(format!("{other} is not a tradeoff experiment"))),
    };
    let opts = ConeOptions {
        method: if c.sampled_cones { ConeMethod::Sampled } else { ConeMethod::Exact },
        n_gen: c.n_gen,
        ..ConeOptions::default()
    };
    let exp = experiment.name();
    let root = RngStream::from_seed(cfg.seed);
    let mut results = Table::new(&MAIN_HEADER);
    let mut timing = Table::new(&TIMING_HEADER);
    for (step, &p) in c.p.iter().enumerate() {
        let signal = make(p)?;
        let stream = root.derive(step as u64);
        let x_star = signal.sample(&stream.derive(0))?;
        let config = match signal {
            SignalSpec::SparsePca { k, .. } => format!("signal={};p={p};k={k};sigma={}", signal.name(), c.sigma),
            SignalSpec::CutMatrix { .. } => format!("signal={};p={p};sigma={}", signal.name(), c.sigma),
        };
        for body in bodies_for(signal, &x_star)? {
            let report = evaluate_body(
                body.as_ref(),
                &x_star,
                c.sigma,
                c.trials,
                &opts,
                &stream.derive(1),
                &stream.derive(2),
                &stream.derive(3),
            )?;
            let metrics: [(&str, String); 11] = [
                ("complexity", num(report.complexity)),
                ("complexity_se", num(report.complexity_se)),
                ("complexity_dropped", report.complexity_dropped.to_string()),
                ("n_unit_risk", report.n_unit_risk.to_string()),
                ("risk", num(report.risk)),
                ("risk_se", num(report.risk_se)),
                ("risk_bound", num(report.risk_bound)),
                ("risk_bound_se", num(report.risk_bound_se)),
                ("unconverged", report.unconverged.to_string()),
                ("trials", c.trials.to_string()),
                ("cone", report.cone.to_string()),
            ];
            for (metric, value) in metrics {
                results.push(vec![
                    exp.into(),
                    report.body.clone(),
                    config.clone(),
                    step.to_string(),
                    c.trials.to_string(),
                    metric.into(),
                    value,
                    "ok".into(),
                ]);
            }
            timing.push(vec![
                exp.into(),
                report.body.clone(),
                config.clone(),
                step.to_string(),
                num(report.projection_seconds),
                num(report.projection_seconds * c.trials as f64),
            ]);
        }
    }

    // Footnote: whether the exact hull is still enumerable at a larger size.
    let signal = make(c.footnote_p)?;
    let config = format!("signal={};p={}", signal.name(), c.footnote_p);
    let (value, status) = match signal.signals(DEFAULT_VERTEX_CAP) {
        Ok(v) => (v.len().to_string(), "feasible".to_string()),
        Err(Error::InfeasibleScale { vertices, cap }) => {
            (vertices.to_string(), format!("infeasible-scale: more than {cap} vertices; use a relaxation"))
        }
        Err(e) => return Err(e),
    };
    results.push(vec![
        exp.into(),
        "hull".into(),
        config,
        c.p.len().to_string(),
        "0".into(),
        "vertex_count".into(),
        value,
        status,
    ]);
    Ok(ExperimentOutput {
        experiment,
        results,
        timing,
    })
}
