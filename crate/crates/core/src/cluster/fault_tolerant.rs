//! Exact dynamic program for fault-tolerant k-median and facility location
//! on an ultrametric tree.
//!
//! `cost(v, s)` is the cheapest way to place `s` centers among the leaves of
//! `T_v`, counting only points with `j(x) <= s`. At an internal node with
//! children `u`, `w` and a split `t + (s - t) = s`, a point of `T_u` with
//! `t < j(x) <= s` is served by a center in `T_w` at distance `Δ(v)`, and
//! symmetrically for `T_w`.

use serde_json::json;

use super::{check_open_costs, ClusteringSolution, FaultToleranceProfile, Objective};
use crate::error::{Error, Result};
use crate::ultrametric::UltrametricTree;

struct Tables {
    cost: Vec<Vec<f64>>,
    split: Vec<Vec<usize>>,
}

/// Runs the DP with at most `cap` centers per subtree. `open_cost` adds the
/// opening cost of a leaf when it is chosen.
fn run(t: &UltrametricTree, profile: &FaultToleranceProfile, cap: usize, open_cost: Option<&[f64]>) -> Tables {
    let nodes = t.node_count();
    let mut cost: Vec<Vec<f64>> = vec![Vec::new(); nodes];
    let mut split: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    // prefix[v][s] = #{x in T_v : j(x) <= s}, s = 0..=cap
    let mut prefix: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    for v in t.postorder() {
        match t.children(v) {
            None => {
                let mut p = vec![0; cap + 1];
                for (s, slot) in p.iter_mut().enumerate() {
                    *slot = usize::from(profile.get(v) <= s);
                }
                prefix[v] = p;
                let open = open_cost.map_or(0.0, |f| f[v]);
                cost[v] = if cap >= 1 { vec![0.0, open] } else { vec![0.0] };
                split[v] = vec![0; cost[v].len()];
            }
            Some([a, b]) => {
                let delta = t.delta(v);
                let (ca, cb) = (&cost[a], &cost[b]);
                let (pa, pb) = (&prefix[a], &prefix[b]);
                let top = cap.min(t.leaf_count(v));
                let mut cv = vec![f64::INFINITY; top + 1];
                let mut sv = vec![0; top + 1];
                for s in 0..=top {
                    let lo = s.saturating_sub(cb.len() - 1);
                    let hi = s.min(ca.len() - 1);
                    for ta in lo..=hi {
                        let tb = s - ta;
                        let crossing = (pa[s] - pa[ta]) + (pb[s] - pb[tb]);
                        let c = ca[ta] + cb[tb] + delta * crossing as f64;
                        if c < cv[s] {
                            cv[s] = c;
                            sv[s] = ta;
                        }
                    }
                }
                prefix[v] = pa.iter().zip(pb).map(|(x, y)| x + y).collect();
                cost[v] = cv;
                split[v] = sv;
            }
        }
    }
    Tables { cost, split }
}

fn extract_centers(t: &UltrametricTree, tables: &Tables, s: usize) -> Vec<usize> {
    let mut centers = Vec::with_capacity(s);
    let mut stack = vec![(t.root(), s)];
    while let Some((v, s)) = stack.pop() {
        if s == 0 {
            continue;
        }
        match t.children(v) {
            None => centers.push(v),
            Some([a, b]) => {
                let ta = tables.split[v][s];
                stack.push((a, ta));
                stack.push((b, s - ta));
            }
        }
    }
    centers.sort_unstable();
    centers
}

/// Exact optimum of fault-tolerant k-median on the ultrametric of `t`.
///
/// The reported value is the DP optimum; the extracted centers re-evaluate
/// to the same value.
pub fn solve_ft_kmedian_ultrametric(
    t: &UltrametricTree,
    k: usize,
    profile: &FaultToleranceProfile,
) -> Result<ClusteringSolution> {
    let n = t.len();
    if k == 0 {
        return Err(Error::BadParameter("k must be at least 1".into()));
    }
    if k > n {
        return Err(Error::KTooLarge { k, n });
    }
    profile.check(n, k)?;
    let tables = run(t, profile, k, None);
    let value = tables.cost[t.root()][k];
    let centers = extract_centers(t, &tables, k);
    debug_assert_eq!(centers.len(), k);
    Ok(ClusteringSolution {
        objective: Objective::FtKmedian,
        centers,
        clusters: None,
        value,
        metric_tag: "ultrametric".into(),
        params: json!({ "k": k, "profile": profile }),
    })
}

/// Exact optimum of fault-tolerant facility location on the ultrametric of
/// `t`, over every number of open centers that can serve the profile.
pub fn solve_facility_ultrametric(
    t: &UltrametricTree,
    profile: &FaultToleranceProfile,
    open_cost: &[f64],
) -> Result<ClusteringSolution> {
    let n = t.len();
    check_open_costs(n, open_cost)?;
    profile.check(n, n)?;
    let tables = run(t, profile, n, Some(open_cost));
    let root = &tables.cost[t.root()];
    let need = profile.max();
    let (best_s, value) = (need..root.len())
        .map(|s| (s, root[s]))
        .fold((need, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
    let centers = extract_centers(t, &tables, best_s);
    Ok(ClusteringSolution {
        objective: Objective::Facility,
        centers,
        clusters: None,
        value,
        metric_tag: "ultrametric".into(),
        params: json!({ "profile": profile, "open_cost": open_cost }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::{eval_facility, eval_ft_kmedian};
    use crate::ultrametric::Shape;

    /// Re-evaluates a DP solution on the tree's metric.
    fn reevaluate(
        t: &UltrametricTree,
        sol: &ClusteringSolution,
        profile: &FaultToleranceProfile,
        open_cost: Option<&[f64]>,
    ) -> Result<f64> {
        let m = t.to_metric();
        match open_cost {
            None => eval_ft_kmedian(&m, &sol.centers, profile),
            Some(f) => eval_facility(&m, &sol.centers, profile, f),
        }
    }

    fn abc() -> UltrametricTree {
        // Leaves: c = 0, a = 1, b = 2.
        UltrametricTree::from_shape(&Shape::node(
            8.0,
            Shape::leaf("c"),
            Shape::node(2.0, Shape::leaf("a"), Shape::leaf("b")),
        ))
        .unwrap()
    }

    #[test]
    fn all_points_open() {
        let t = abc();
        let sol = solve_ft_kmedian_ultrametric(&t, 3, &FaultToleranceProfile::uniform(3, 1)).unwrap();
        assert_eq!(sol.value, 0.0);
        assert_eq!(sol.centers, vec![0, 1, 2]);
    }

    #[test]
    fn two_leaves_second_closest() {
        let t = UltrametricTree::from_shape(&Shape::node(5.0, Shape::leaf("a"), Shape::leaf("b"))).unwrap();
        let sol = solve_ft_kmedian_ultrametric(&t, 2, &FaultToleranceProfile::uniform(2, 2)).unwrap();
        assert_eq!(sol.value, 10.0);
    }

    #[test]
    fn three_leaves_second_closest() {
        let t = abc();
        let j = FaultToleranceProfile::uniform(3, 2);
        let sol = solve_ft_kmedian_ultrametric(&t, 2, &j).unwrap();
        assert_eq!(sol.value, 12.0);
        assert_eq!(reevaluate(&t, &sol, &j, None).unwrap(), 12.0);
    }

    #[test]
    fn single_center() {
        let t = abc();
        let j = FaultToleranceProfile::uniform(3, 1);
        let sol = solve_ft_kmedian_ultrametric(&t, 1, &j).unwrap();
        assert_eq!(sol.value, 10.0);
        assert_ne!(sol.centers, vec![0]);
    }

    #[test]
    fn errors() {
        let t = abc();
        let j = FaultToleranceProfile::uniform(3, 1);
        assert!(matches!(solve_ft_kmedian_ultrametric(&t, 4, &j), Err(Error::KTooLarge { k: 4, n: 3 })));
        assert!(matches!(
            solve_ft_kmedian_ultrametric(&t, 1, &FaultToleranceProfile::uniform(3, 2)),
            Err(Error::ProfileExceedsK { .. })
        ));
        assert!(solve_ft_kmedian_ultrametric(&t, 0, &j).is_err());
    }

    #[test]
    fn facility_small_cases() {
        let t = abc();
        let j = FaultToleranceProfile::uniform(3, 1);
        let sol = solve_facility_ultrametric(&t, &j, &[0.0; 3]).unwrap();
        assert_eq!(sol.value, 0.0);
        assert_eq!(sol.centers.len(), 3);

        let two = UltrametricTree::from_shape(&Shape::node(5.0, Shape::leaf("a"), Shape::leaf("b"))).unwrap();
        let j2 = FaultToleranceProfile::uniform(2, 1);
        let sol = solve_facility_ultrametric(&two, &j2, &[1.0, 1.0]).unwrap();
        assert_eq!(sol.value, 2.0);
        assert_eq!(reevaluate(&two, &sol, &j2, Some(&[1.0, 1.0])).unwrap(), 2.0);

        // Expensive facilities: open as few as the profile allows.
        let j = FaultToleranceProfile(vec![2, 1, 1]);
        let sol = solve_facility_ultrametric(&t, &j, &[1e6; 3]).unwrap();
        assert_eq!(sol.centers.len(), 2);
    }
}
