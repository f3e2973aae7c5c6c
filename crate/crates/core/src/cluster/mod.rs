//! Clustering objectives and dynamic programs on ultrametric trees.
//!
//! Three objectives are supported, all homogeneous of order one and monotone
//! in the metric:
//!
//! * fault-tolerant k-median: point `x` pays the distance to its `j(x)`-th
//!   closest center;
//! * fault-tolerant facility location: the same plus an opening cost per
//!   center, with no bound on the number of centers;
//! * Σℓ_p clustering: explicit clusters `C_1..C_k` with centers, cost
//!   `Σ_j ‖(d(x, x_j))_{x ∈ C_j}‖_p`.

mod fault_tolerant;
pub mod sigma_lp;

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::metric::FiniteMetric;

pub use fault_tolerant::{solve_facility_ultrametric, solve_ft_kmedian_ultrametric};
pub use sigma_lp::solve_sigma_lp_ultrametric;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    FtKmedian,
    Facility,
    SigmaLp,
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::FtKmedian => "ft_kmedian",
            Objective::Facility => "facility",
            Objective::SigmaLp => "sigma_lp",
        })
    }
}

/// `j(x)` for every point: which closest center serves `x` (1-based).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FaultToleranceProfile(pub Vec<usize>);

impl FaultToleranceProfile {
    /// `j ≡ 1` on `n` points.
    pub fn uniform(n: usize, j: usize) -> Self {
        FaultToleranceProfile(vec![j; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, x: usize) -> usize {
        self.0[x]
    }

    pub fn max(&self) -> usize {
        self.0.iter().copied().max().unwrap_or(0)
    }

    /// Checks `1 <= j(x) <= k` and one entry per point.
    pub fn check(&self, n: usize, k: usize) -> Result<()> {
        if self.0.len() != n {
            return Err(Error::ProfileLength { got: self.0.len(), n });
        }
        for (point, &value) in self.0.iter().enumerate() {
            if value == 0 {
                return Err(Error::BadParameter(format!(
                    "fault-tolerance parameter at point {point} must be at least 1"
                )));
            }
            if value > k {
                return Err(Error::ProfileExceedsK { point, value, k });
            }
        }
        Ok(())
    }
}

/// Exponent of the Σℓ_p objective; `p = ∞` is `f64::INFINITY`.
pub fn check_exponent(p: f64) -> Result<()> {
    if p >= 1.0 && !p.is_nan() {
        Ok(())
    } else {
        Err(Error::BadParameter(format!("exponent p must lie in [1, ∞], got {p}")))
    }
}

/// ℓ_p norm of non-negative values. `p ∈ {1, 2, ∞}` use sum, `sqrt`, max so
/// that scaling by a power of two commutes exactly.
pub fn lp_norm(values: impl Iterator<Item = f64>, p: f64) -> f64 {
    if p == 1.0 {
        values.sum()
    } else if p == f64::INFINITY {
        values.fold(0.0, f64::max)
    } else if p == 2.0 {
        values.map(|v| v * v).sum::<f64>().sqrt()
    } else {
        values.map(|v| v.powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringSolution {
    pub objective: Objective,
    /// Point indices of the centers, in center order.
    pub centers: Vec<usize>,
    /// Explicit clusters aligned with `centers` (Σℓ_p only).
    pub clusters: Option<Vec<Vec<usize>>>,
    pub value: f64,
    /// Which metric `value` was computed under.
    pub metric_tag: String,
    pub params: Value,
}

impl ClusteringSolution {
    /// Solution JSON with labels instead of indices.
    pub fn to_json(&self, labels: &[String]) -> Value {
        let centers: Vec<&str> = self.centers.iter().map(|&c| labels[c].as_str()).collect();
        let clusters: Option<Vec<Vec<&str>>> = self.clusters.as_ref().map(|cs| {
            cs.iter().map(|c| c.iter().map(|&x| labels[x].as_str()).collect()).collect()
        });
        json!({
            "centers": centers,
            "clusters": clusters,
            "value": self.value,
            "objective": self.objective.to_string(),
            "metric": self.metric_tag,
            "params": self.params,
        })
    }
}

fn check_centers(n: usize, centers: &[usize]) -> Result<()> {
    let mut seen = vec![false; n];
    for &c in centers {
        if c >= n {
            return Err(Error::InvalidSolution(format!("center {c} is not a point")));
        }
        if seen[c] {
            return Err(Error::InvalidSolution(format!("center {c} appears twice")));
        }
        seen[c] = true;
    }
    Ok(())
}

/// `Σ_x d(x, x*_{j(x)})` where `x*_j` is the `j`-th closest center; ties are
/// broken by position in `centers`.
pub fn eval_ft_kmedian(
    m: &FiniteMetric,
    centers: &[usize],
    profile: &FaultToleranceProfile,
) -> Result<f64> {
    let n = m.len();
    check_centers(n, centers)?;
    profile.check(n, centers.len())?;
    let mut row = Vec::with_capacity(centers.len());
    let mut total = 0.0;
    for x in 0..n {
        row.clear();
        row.extend(centers.iter().map(|&c| m.d(x, c)));
        // Stable, so equal distances keep center order.
        row.sort_by(f64::total_cmp);
        total += row[profile.get(x) - 1];
    }
    Ok(total)
}

/// Opening costs plus the fault-tolerant k-median cost.
pub fn eval_facility(
    m: &FiniteMetric,
    centers: &[usize],
    profile: &FaultToleranceProfile,
    open_cost: &[f64],
) -> Result<f64> {
    check_open_costs(m.len(), open_cost)?;
    let service = eval_ft_kmedian(m, centers, profile)?;
    let opening: f64 = centers.iter().map(|&c| open_cost[c]).sum();
    Ok(opening + service)
}

pub(crate) fn check_open_costs(n: usize, open_cost: &[f64]) -> Result<()> {
    if open_cost.len() != n {
        return Err(Error::BadParameter(format!(
            "{} opening costs for {n} points",
            open_cost.len()
        )));
    }
    if let Some(x) = open_cost.iter().position(|f| !(f.is_finite() && *f >= 0.0)) {
        return Err(Error::BadParameter(format!("opening cost at point {x} must be finite and non-negative")));
    }
    Ok(())
}

/// Checks that `clusters` partition the `n` points (empty clusters allowed).
pub fn check_partition(n: usize, clusters: &[Vec<usize>]) -> Result<()> {
    let mut seen = vec![false; n];
    for c in clusters {
        for &x in c {
            if x >= n {
                return Err(Error::NotAPartition(format!("point {x} out of range")));
            }
            if seen[x] {
                return Err(Error::NotAPartition(format!("point {x} in two clusters")));
            }
            seen[x] = true;
        }
    }
    match seen.iter().position(|s| !s) {
        Some(x) => Err(Error::NotAPartition(format!("point {x} is not covered"))),
        None => Ok(()),
    }
}

/// `Σ_j ‖(d(x, x_j))_{x ∈ C_j}‖_p`.
pub fn eval_sigma_lp(
    m: &FiniteMetric,
    centers: &[usize],
    clusters: &[Vec<usize>],
    p: f64,
) -> Result<f64> {
    check_exponent(p)?;
    check_centers(m.len(), centers)?;
    if clusters.len() != centers.len() {
        return Err(Error::NotAPartition(format!(
            "{} clusters for {} centers",
            clusters.len(),
            centers.len()
        )));
    }
    check_partition(m.len(), clusters)?;
    Ok(centers
        .iter()
        .zip(clusters)
        .map(|(&c, members)| lp_norm(members.iter().map(|&x| m.d(x, c)), p))
        .sum())
}

/// Re-evaluates a solution's objective under `m`.
pub fn evaluate(
    m: &FiniteMetric,
    solution: &ClusteringSolution,
    profile: Option<&FaultToleranceProfile>,
    open_cost: Option<&[f64]>,
    p: Option<f64>,
) -> Result<f64> {
    let missing = |what: &str| Error::BadParameter(format!("{what} required for {}", solution.objective));
    match solution.objective {
        Objective::FtKmedian => {
            eval_ft_kmedian(m, &solution.centers, profile.ok_or_else(|| missing("profile"))?)
        }
        Objective::Facility => eval_facility(
            m,
            &solution.centers,
            profile.ok_or_else(|| missing("profile"))?,
            open_cost.ok_or_else(|| missing("opening costs"))?,
        ),
        Objective::SigmaLp => eval_sigma_lp(
            m,
            &solution.centers,
            solution.clusters.as_deref().ok_or_else(|| missing("clusters"))?,
            p.ok_or_else(|| missing("exponent"))?,
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abc() -> FiniteMetric {
        FiniteMetric::new(
            vec!["a".into(), "b".into(), "c".into()],
            &[vec![0.0, 2.0, 8.0], vec![2.0, 0.0, 8.0], vec![8.0, 8.0, 0.0]],
        )
        .unwrap()
    }

    #[test]
    fn ft_kmedian_examples() {
        let m = abc();
        let all = FaultToleranceProfile::uniform(3, 1);
        assert_eq!(eval_ft_kmedian(&m, &[0, 1, 2], &all).unwrap(), 0.0);
        let two = FaultToleranceProfile::uniform(3, 2);
        assert_eq!(eval_ft_kmedian(&m, &[0, 1], &two).unwrap(), 12.0);
        assert_eq!(eval_ft_kmedian(&m, &[0], &all).unwrap(), 10.0);
        assert!(matches!(
            eval_ft_kmedian(&m, &[0], &two),
            Err(Error::ProfileExceedsK { point: 0, value: 2, k: 1 })
        ));
        assert!(matches!(eval_ft_kmedian(&m, &[0, 0], &all), Err(Error::InvalidSolution(_))));
    }

    #[test]
    fn facility_examples() {
        let m = abc();
        let j = FaultToleranceProfile::uniform(3, 1);
        let zero = [0.0; 3];
        assert_eq!(
            eval_facility(&m, &[0, 2], &j, &zero).unwrap(),
            eval_ft_kmedian(&m, &[0, 2], &j).unwrap()
        );
        let two = FiniteMetric::new(vec!["a".into(), "b".into()], &[vec![0.0, 5.0], vec![5.0, 0.0]]).unwrap();
        let j2 = FaultToleranceProfile::uniform(2, 1);
        assert_eq!(eval_facility(&two, &[0], &j2, &[10.0, 10.0]).unwrap(), 15.0);
        assert!(eval_facility(&two, &[0], &j2, &[10.0]).is_err());
    }

    #[test]
    fn sigma_lp_examples() {
        let m = abc();
        let clusters = vec![vec![0, 1], vec![2]];
        assert_eq!(eval_sigma_lp(&m, &[0, 2], &clusters, 2.0).unwrap(), 2.0);
        let j = FaultToleranceProfile::uniform(3, 1);
        // p = 1 with nearest-center clusters is k-median.
        assert_eq!(
            eval_sigma_lp(&m, &[0, 2], &clusters, 1.0).unwrap(),
            eval_ft_kmedian(&m, &[0, 2], &j).unwrap()
        );
        // p = ∞ is the sum of radii.
        let wide = vec![vec![0, 1, 2], vec![]];
        assert_eq!(eval_sigma_lp(&m, &[0, 1], &wide, f64::INFINITY).unwrap(), 8.0);
        assert!(matches!(
            eval_sigma_lp(&m, &[0, 2], &[vec![0], vec![2]], 1.0),
            Err(Error::NotAPartition(_))
        ));
        assert!(eval_sigma_lp(&m, &[0, 2], &clusters, 0.5).is_err());
    }

    #[test]
    fn profile_checks() {
        assert!(FaultToleranceProfile(vec![1, 2]).check(2, 2).is_ok());
        assert!(matches!(FaultToleranceProfile(vec![1]).check(2, 2), Err(Error::ProfileLength { .. })));
        assert!(FaultToleranceProfile(vec![0, 1]).check(2, 2).is_err());
    }

    #[test]
    fn lp_norm_special_cases() {
        let v = [3.0, 4.0];
        assert_eq!(lp_norm(v.iter().copied(), 1.0), 7.0);
        assert_eq!(lp_norm(v.iter().copied(), 2.0), 5.0);
        assert_eq!(lp_norm(v.iter().copied(), f64::INFINITY), 4.0);
        assert!((lp_norm(v.iter().copied(), 3.0) - 91f64.cbrt()).abs() < 1e-12);
    }
}
