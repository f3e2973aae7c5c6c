//! Solving clustering problems on a general metric through random
//! ultrametrics.
//!
//! Each sample `ρ` dominates `d`, so for a monotone objective the cost of any
//! solution under `d` is at most its cost under `ρ`. Every sample is solved
//! on its ultrametric, re-evaluated under the original metric, and the
//! cheapest one is kept.

use rayon::prelude::*;
use serde::Serialize;

use crate::cluster::{
    eval_facility, eval_ft_kmedian, eval_sigma_lp, solve_facility_ultrametric, solve_ft_kmedian_ultrametric,
    solve_sigma_lp_ultrametric, ClusteringSolution, FaultToleranceProfile, Objective,
};
use crate::embed::ScalePlan;
use crate::error::{Error, Result};
use crate::metric::FiniteMetric;
use crate::oracle::{oracle_facility, oracle_ft_kmedian, oracle_sigma_lp};
use crate::ultrametric::UltrametricTree;

pub const DEFAULT_SAMPLES: usize = 16;

/// Largest instance accepted by [`approximation_ratio_report`].
pub const REPORT_CAP: usize = 10;

/// A clustering objective that is homogeneous of order one and monotone in
/// the metric, together with an ultrametric solver and an exact oracle.
pub trait MonotoneProblem: Sync {
    fn objective(&self) -> Objective;
    fn evaluate(&self, m: &FiniteMetric, solution: &ClusteringSolution) -> Result<f64>;
    fn solve_on_ultrametric(&self, t: &UltrametricTree) -> Result<ClusteringSolution>;
    fn oracle(&self, m: &FiniteMetric) -> Result<ClusteringSolution>;
}

#[derive(Debug, Clone)]
pub struct FtKMedian {
    pub k: usize,
    pub profile: FaultToleranceProfile,
}

#[derive(Debug, Clone)]
pub struct Facility {
    pub profile: FaultToleranceProfile,
    pub open_cost: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SigmaLp {
    pub k: usize,
    pub p: f64,
    pub eps: f64,
}

impl MonotoneProblem for FtKMedian {
    fn objective(&self) -> Objective {
        Objective::FtKmedian
    }

    fn evaluate(&self, m: &FiniteMetric, solution: &ClusteringSolution) -> Result<f64> {
        eval_ft_kmedian(m, &solution.centers, &self.profile)
    }

    fn solve_on_ultrametric(&self, t: &UltrametricTree) -> Result<ClusteringSolution> {
        solve_ft_kmedian_ultrametric(t, self.k, &self.profile)
    }

    fn oracle(&self, m: &FiniteMetric) -> Result<ClusteringSolution> {
        oracle_ft_kmedian(m, self.k, &self.profile)
    }
}

impl MonotoneProblem for Facility {
    fn objective(&self) -> Objective {
        Objective::Facility
    }

    fn evaluate(&self, m: &FiniteMetric, solution: &ClusteringSolution) -> Result<f64> {
        eval_facility(m, &solution.centers, &self.profile, &self.open_cost)
    }

    fn solve_on_ultrametric(&self, t: &UltrametricTree) -> Result<ClusteringSolution> {
        solve_facility_ultrametric(t, &self.profile, &self.open_cost)
    }

    fn oracle(&self, m: &FiniteMetric) -> Result<ClusteringSolution> {
        oracle_facility(m, &self.profile, &self.open_cost)
    }
}

impl MonotoneProblem for SigmaLp {
    fn objective(&self) -> Objective {
        Objective::SigmaLp
    }

    fn evaluate(&self, m: &FiniteMetric, solution: &ClusteringSolution) -> Result<f64> {
        let clusters = solution
            .clusters
            .as_deref()
            .ok_or_else(|| Error::InvalidSolution("sigma_lp solution without clusters".into()))?;
        eval_sigma_lp(m, &solution.centers, clusters, self.p)
    }

    fn solve_on_ultrametric(&self, t: &UltrametricTree) -> Result<ClusteringSolution> {
        solve_sigma_lp_ultrametric(t, self.k, self.p, self.eps)
    }

    fn oracle(&self, m: &FiniteMetric) -> Result<ClusteringSolution> {
        oracle_sigma_lp(m, self.k, self.p)
    }
}

/// One sample's outcome.
#[derive(Debug, Clone, Serialize)]
pub struct SampleValue {
    pub sample: usize,
    /// Cost under the sampled ultrametric.
    pub ultrametric_value: f64,
    /// Cost of the same solution under the original metric.
    pub original_value: f64,
}

#[derive(Debug, Clone)]
pub struct Reduction {
    /// Best solution, valued under the original metric.
    pub solution: ClusteringSolution,
    pub best_sample: usize,
    /// Successful samples in sample order.
    pub samples: Vec<SampleValue>,
    pub failures: usize,
}

/// Runs the reduction and keeps per-sample values.
pub fn reduce_detailed(
    m: &FiniteMetric,
    problem: &dyn MonotoneProblem,
    samples: usize,
    seed: u64,
) -> Result<Reduction> {
    if samples == 0 {
        return Err(Error::BadParameter("samples must be at least 1".into()));
    }
    let plan = ScalePlan::new(m)?;
    let outcomes: Vec<Result<(ClusteringSolution, SampleValue)>> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let emb = plan.sample(seed, s as u64)?;
            let mut sol = problem.solve_on_ultrametric(&emb.rho)?;
            let ultrametric_value = sol.value;
            let original_value = problem.evaluate(m, &sol)?;
            sol.value = original_value;
            sol.metric_tag = "original".into();
            Ok((sol, SampleValue { sample: s, ultrametric_value, original_value }))
        })
        .collect();

    let mut best: Option<(ClusteringSolution, usize)> = None;
    let mut values = Vec::with_capacity(samples);
    let mut last_error = None;
    for outcome in outcomes {
        match outcome {
            Ok((sol, v)) => {
                if best.as_ref().is_none_or(|(b, _)| sol.value < b.value) {
                    best = Some((sol, v.sample));
                }
                values.push(v);
            }
            Err(e) => last_error = Some(e),
        }
    }
    let failures = samples - values.len();
    match best {
        Some((solution, best_sample)) => Ok(Reduction { solution, best_sample, samples: values, failures }),
        None => Err(Error::AllSamplesFailed(samples, Box::new(last_error.expect("some sample ran")))),
    }
}

/// Best-of-`samples` solution, valued under the original metric `m`.
pub fn reduce_and_solve(
    m: &FiniteMetric,
    problem: &dyn MonotoneProblem,
    samples: usize,
    seed: u64,
) -> Result<ClusteringSolution> {
    Ok(reduce_detailed(m, problem, samples, seed)?.solution)
}

#[derive(Debug, Clone, Serialize)]
pub struct ApproximationReport {
    pub returned_value: f64,
    pub oracle_value: f64,
    /// `returned / oracle`; 1 when both are zero.
    pub ratio: f64,
    pub per_sample_values: Vec<f64>,
}

/// Compares the reduction's answer with the exact optimum.
pub fn approximation_ratio_report(
    m: &FiniteMetric,
    problem: &dyn MonotoneProblem,
    samples: usize,
    seed: u64,
) -> Result<ApproximationReport> {
    if m.len() > REPORT_CAP {
        return Err(Error::TooLargeForOracle { n: m.len(), cap: REPORT_CAP });
    }
    let oracle_value = problem.oracle(m)?.value;
    let run = reduce_detailed(m, problem, samples, seed)?;
    let returned_value = run.solution.value;
    let ratio = if oracle_value == 0.0 {
        if returned_value == 0.0 { 1.0 } else { f64::INFINITY }
    } else {
        returned_value / oracle_value
    };
    Ok(ApproximationReport {
        returned_value,
        oracle_value,
        ratio,
        per_sample_values: run.samples.iter().map(|s| s.original_value).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{gen_cycle, gen_random, RandomMode};

    #[test]
    fn sound_and_sample_monotone() {
        let m = gen_random(7, RandomMode::Euclidean2d, 3).unwrap();
        let problem = FtKMedian { k: 2, profile: FaultToleranceProfile::uniform(7, 1) };
        let opt = problem.oracle(&m).unwrap().value;
        let one = reduce_and_solve(&m, &problem, 1, 9).unwrap();
        let many = reduce_detailed(&m, &problem, 16, 9).unwrap();
        assert!(one.value >= opt - 1e-9);
        assert!(many.solution.value <= one.value);
        for s in &many.samples {
            assert!(s.ultrametric_value >= s.original_value - 1e-9);
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let m = gen_cycle(8).unwrap();
        let problem = SigmaLp { k: 2, p: 2.0, eps: 0.1 };
        let a = reduce_and_solve(&m, &problem, 4, 5).unwrap();
        let b = reduce_and_solve(&m, &problem, 4, 5).unwrap();
        assert_eq!(a.centers, b.centers);
        assert_eq!(a.value, b.value);
    }

    #[test]
    fn report_checks_size() {
        let m = gen_cycle(11).unwrap();
        let problem = FtKMedian { k: 1, profile: FaultToleranceProfile::uniform(11, 1) };
        assert!(matches!(
            approximation_ratio_report(&m, &problem, 2, 0),
            Err(Error::TooLargeForOracle { n: 11, cap: 10 })
        ));
        let m = gen_cycle(6).unwrap();
        let problem = Facility { profile: FaultToleranceProfile::uniform(6, 1), open_cost: vec![1.0; 6] };
        let r = approximation_ratio_report(&m, &problem, 4, 0).unwrap();
        assert!(r.ratio >= 1.0);
    }

    #[test]
    fn all_failures_are_reported() {
        let m = gen_cycle(5).unwrap();
        let problem = FtKMedian { k: 6, profile: FaultToleranceProfile::uniform(5, 1) };
        assert!(matches!(reduce_and_solve(&m, &problem, 3, 0), Err(Error::AllSamplesFailed(3, _))));
    }
}
