//! Brute-force exact solvers, used as ground truth.
//!
//! Size caps keep every call well under a second.

use serde_json::json;

use crate::cluster::{
    check_exponent, eval_facility, eval_ft_kmedian, lp_norm, ClusteringSolution, FaultToleranceProfile, Objective,
};
use crate::error::{Error, Result};
use crate::metric::FiniteMetric;

pub const FT_KMEDIAN_CAP: usize = 12;
pub const FACILITY_CAP: usize = 10;
pub const SIGMA_LP_CAP: usize = 8;
pub const SIGMA_LP_K_CAP: usize = 3;

/// Calls `f` on every `k`-subset of `0..n` in lexicographic order.
fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let Some(i) = (0..k).rev().find(|&i| idx[i] < n - k + i) else {
            return;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::BadParameter("k must be at least 1".into()));
    }
    if k > n {
        return Err(Error::KTooLarge { k, n });
    }
    Ok(())
}

fn solution(objective: Objective, centers: Vec<usize>, clusters: Option<Vec<Vec<usize>>>, value: f64, params: serde_json::Value) -> ClusteringSolution {
    ClusteringSolution { objective, centers, clusters, value, metric_tag: "original".into(), params }
}

/// Exact fault-tolerant k-median over all `C(n, k)` center sets.
pub fn oracle_ft_kmedian(m: &FiniteMetric, k: usize, profile: &FaultToleranceProfile) -> Result<ClusteringSolution> {
    let n = m.len();
    if n > FT_KMEDIAN_CAP {
        return Err(Error::TooLargeForOracle { n, cap: FT_KMEDIAN_CAP });
    }
    check_k(k, n)?;
    profile.check(n, k)?;
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut failure = None;
    for_each_subset(n, k, |centers| match eval_ft_kmedian(m, centers, profile) {
        Ok(v) if best.as_ref().is_none_or(|(b, _)| v < *b) => best = Some((v, centers.to_vec())),
        Ok(_) => {}
        Err(e) => failure = Some(e),
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let (value, centers) = best.expect("at least one subset");
    Ok(solution(Objective::FtKmedian, centers, None, value, json!({ "k": k, "profile": profile })))
}

/// Exact fault-tolerant facility location over every nonempty center set
/// with at least `max j(x)` centers.
pub fn oracle_facility(m: &FiniteMetric, profile: &FaultToleranceProfile, open_cost: &[f64]) -> Result<ClusteringSolution> {
    let n = m.len();
    if n > FACILITY_CAP {
        return Err(Error::TooLargeForOracle { n, cap: FACILITY_CAP });
    }
    profile.check(n, n)?;
    let need = profile.max().max(1);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for mask in 1u32..(1 << n) {
        if (mask.count_ones() as usize) < need {
            continue;
        }
        let centers: Vec<usize> = (0..n).filter(|&x| mask >> x & 1 == 1).collect();
        let v = eval_facility(m, &centers, profile, open_cost)?;
        if best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, centers));
        }
    }
    let (value, centers) = best.expect("profile needs at most n centers");
    Ok(solution(Objective::Facility, centers, None, value, json!({ "profile": profile, "open_cost": open_cost })))
}

/// Exact Σℓ_p clustering: every partition into exactly `k` nonempty
/// clusters, with every assignment of distinct centers.
///
/// Partitions with fewer than `k` clusters never do better: splitting off a
/// singleton served by itself cannot increase the cost.
pub fn oracle_sigma_lp(m: &FiniteMetric, k: usize, p: f64) -> Result<ClusteringSolution> {
    let n = m.len();
    if n > SIGMA_LP_CAP {
        return Err(Error::TooLargeForOracle { n, cap: SIGMA_LP_CAP });
    }
    if k > SIGMA_LP_K_CAP {
        return Err(Error::TooLarge { what: "k for the sigma_lp oracle", max: SIGMA_LP_K_CAP, got: k });
    }
    check_k(k, n)?;
    check_exponent(p)?;

    let mut best: Option<(f64, Vec<usize>, Vec<usize>)> = None;
    // Restricted-growth string: block[0] = 0, block[i] <= 1 + max(block[..i]).
    let mut block = vec![0usize; n];
    let mut cost = vec![vec![0.0; n]; k];
    loop {
        let used = block.iter().max().map_or(0, |b| b + 1);
        if used == k {
            for (b, row) in cost.iter_mut().enumerate() {
                for (c, slot) in row.iter_mut().enumerate() {
                    *slot = lp_norm((0..n).filter(|&x| block[x] == b).map(|x| m.d(x, c)), p);
                }
            }
            let mut centers = vec![0usize; k];
            search_centers(&cost, 0, &mut centers, 0.0, &mut |v, cs| {
                if best.as_ref().is_none_or(|(b, _, _)| v < *b) {
                    best = Some((v, cs.to_vec(), block.clone()));
                }
            });
        }
        if !next_rgs(&mut block, k) {
            break;
        }
    }
    let (value, centers, block) = best.expect("k <= n admits a partition");
    let mut clusters = vec![Vec::new(); k];
    for (x, &b) in block.iter().enumerate() {
        clusters[b].push(x);
    }
    let p_json = if p.is_infinite() { json!("inf") } else { json!(p) };
    Ok(solution(Objective::SigmaLp, centers, Some(clusters), value, json!({ "k": k, "p": p_json })))
}

/// Distinct center per block, minimizing the summed block costs.
fn search_centers(cost: &[Vec<f64>], b: usize, centers: &mut [usize], acc: f64, emit: &mut impl FnMut(f64, &[usize])) {
    if b == cost.len() {
        emit(acc, centers);
        return;
    }
    for c in 0..cost[b].len() {
        if centers[..b].contains(&c) {
            continue;
        }
        centers[b] = c;
        search_centers(cost, b + 1, centers, acc + cost[b][c], emit);
    }
}

/// Advances a restricted-growth string with values below `k`.
fn next_rgs(block: &mut [usize], k: usize) -> bool {
    let n = block.len();
    for i in (1..n).rev() {
        let prefix_max = block[..i].iter().copied().max().unwrap_or(0);
        if block[i] <= prefix_max && block[i] + 1 < k {
            block[i] += 1;
            for b in &mut block[i + 1..] {
                *b = 0;
            }
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::validate;

    fn abc() -> FiniteMetric {
        // a, b, c
        validate(&[vec![0.0, 2.0, 8.0], vec![2.0, 0.0, 8.0], vec![8.0, 8.0, 0.0]]).unwrap()
    }

    #[test]
    fn subsets_are_enumerated() {
        let mut count = 0;
        for_each_subset(6, 3, |_| count += 1);
        assert_eq!(count, 20);
    }

    #[test]
    fn rgs_count_is_stirling() {
        // S(5,1) + S(5,2) + S(5,3) = 1 + 15 + 25
        let mut block = vec![0; 5];
        let mut count = 1;
        while next_rgs(&mut block, 3) {
            count += 1;
        }
        assert_eq!(count, 41);
    }

    #[test]
    fn ft_kmedian_examples() {
        let m = abc();
        let one = FaultToleranceProfile::uniform(3, 1);
        assert_eq!(oracle_ft_kmedian(&m, 3, &one).unwrap().value, 0.0);
        let sol = oracle_ft_kmedian(&m, 1, &one).unwrap();
        assert_eq!(sol.value, 10.0);
        assert_eq!(sol.centers, vec![0]);
        assert_eq!(oracle_ft_kmedian(&m, 2, &FaultToleranceProfile::uniform(3, 2)).unwrap().value, 12.0);
    }

    #[test]
    fn facility_examples() {
        let m = abc();
        assert_eq!(oracle_facility(&m, &FaultToleranceProfile::uniform(3, 1), &[0.0; 3]).unwrap().value, 0.0);
        let two = validate(&[vec![0.0, 5.0], vec![5.0, 0.0]]).unwrap();
        let sol = oracle_facility(&two, &FaultToleranceProfile::uniform(2, 1), &[1.0, 1.0]).unwrap();
        assert_eq!(sol.value, 2.0);
        assert_eq!(sol.centers, vec![0, 1]);
    }

    #[test]
    fn sigma_lp_examples() {
        let m = abc();
        let sol = oracle_sigma_lp(&m, 2, 2.0).unwrap();
        assert_eq!(sol.value, 2.0);
        let one = oracle_sigma_lp(&m, 1, 1.0).unwrap();
        assert_eq!(one.value, oracle_ft_kmedian(&m, 1, &FaultToleranceProfile::uniform(3, 1)).unwrap().value);
        let inf = oracle_sigma_lp(&m, 1, f64::INFINITY).unwrap().value;
        let l2 = oracle_sigma_lp(&m, 1, 2.0).unwrap().value;
        assert!(inf <= l2 && l2 <= one.value);
    }

    #[test]
    fn caps_are_enforced() {
        let m = crate::metric::gen_cycle(13).unwrap();
        let j = FaultToleranceProfile::uniform(13, 1);
        assert!(matches!(oracle_ft_kmedian(&m, 2, &j), Err(Error::TooLargeForOracle { n: 13, cap: 12 })));
        assert!(matches!(oracle_facility(&m, &j, &[0.0; 13]), Err(Error::TooLargeForOracle { .. })));
        assert!(matches!(oracle_sigma_lp(&m, 2, 1.0), Err(Error::TooLargeForOracle { .. })));
        assert!(oracle_sigma_lp(&abc(), 4, 1.0).is_err());
    }
}
