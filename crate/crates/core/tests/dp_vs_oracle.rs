use maxgrad::cluster::sigma_lp::{discretized_minima, solve_sigma_lp_ultrametric};
use maxgrad::cluster::{
    eval_facility, eval_ft_kmedian, lp_norm, solve_facility_ultrametric, solve_ft_kmedian_ultrametric,
    FaultToleranceProfile,
};
use maxgrad::oracle::{oracle_facility, oracle_ft_kmedian, oracle_sigma_lp};
use maxgrad::rng::{derive_seed, rng_from_seed};
use maxgrad::ultrametric::gen_random_ultrametric;
use maxgrad::UltrametricTree;
use rand::Rng;

fn random_profile(n: usize, k: usize, seed: u64) -> FaultToleranceProfile {
    let mut rng = rng_from_seed(seed);
    FaultToleranceProfile((0..n).map(|_| rng.gen_range(1..=k)).collect())
}

#[test]
fn ft_kmedian_dp_matches_oracle() {
    for trial in 0..300u64 {
        let mut rng = rng_from_seed(derive_seed(1, &[trial]));
        let n = rng.gen_range(1..=9);
        let k = rng.gen_range(1..=n.min(4));
        let t = gen_random_ultrametric(n, derive_seed(2, &[trial])).unwrap();
        let j = random_profile(n, k, derive_seed(3, &[trial]));
        let dp = solve_ft_kmedian_ultrametric(&t, k, &j).unwrap();
        let m = t.to_metric();
        let oracle = oracle_ft_kmedian(&m, k, &j).unwrap();
        assert_eq!(dp.value, oracle.value, "trial {trial}");
        assert_eq!(eval_ft_kmedian(&m, &dp.centers, &j).unwrap(), dp.value, "trial {trial}");
    }
}

#[test]
fn facility_dp_matches_oracle() {
    for trial in 0..300u64 {
        let mut rng = rng_from_seed(derive_seed(4, &[trial]));
        let n = rng.gen_range(1..=7);
        let t = gen_random_ultrametric(n, derive_seed(5, &[trial])).unwrap();
        let j = random_profile(n, rng.gen_range(1..=n), derive_seed(6, &[trial]));
        let f: Vec<f64> = (0..n).map(|_| rng.gen_range(0..=12) as f64).collect();
        let dp = solve_facility_ultrametric(&t, &j, &f).unwrap();
        let m = t.to_metric();
        let oracle = oracle_facility(&m, &j, &f).unwrap();
        assert_eq!(dp.value, oracle.value, "trial {trial}");
        assert_eq!(eval_facility(&m, &dp.centers, &j, &f).unwrap(), dp.value, "trial {trial}");
    }
}

#[test]
fn expensive_facilities_open_the_minimum() {
    for trial in 0..100u64 {
        let n = 2 + (trial as usize % 5);
        let t = gen_random_ultrametric(n, trial).unwrap();
        let j = random_profile(n, n, derive_seed(7, &[trial]));
        let huge = vec![1e6; n];
        let dp = solve_facility_ultrametric(&t, &j, &huge).unwrap();
        assert_eq!(dp.centers.len(), j.max(), "trial {trial}");
        assert_eq!(dp.value, oracle_facility(&t.to_metric(), &j, &huge).unwrap().value);
    }
}

#[test]
fn sigma_lp_fptas_within_eps() {
    for trial in 0..300u64 {
        let mut rng = rng_from_seed(derive_seed(8, &[trial]));
        let n = rng.gen_range(1..=8);
        let k = rng.gen_range(1..=n.min(3));
        let p = [1.0, 2.0, f64::INFINITY, 3.0][trial as usize % 4];
        let t = gen_random_ultrametric(n, derive_seed(9, &[trial])).unwrap();
        let sol = solve_sigma_lp_ultrametric(&t, k, p, 0.1).unwrap();
        let opt = oracle_sigma_lp(&t.to_metric(), k, p).unwrap().value;
        assert!(sol.value >= opt - 1e-9, "trial {trial}");
        assert!(sol.value <= 1.1 * opt + 1e-9, "trial {trial}: {} vs {opt}", sol.value);
        assert_eq!(sol.centers.len(), k);
    }
}

/// Exact (unrounded) `min_τ B(v, ℓ, 0, τ)` on the contracted subtree, by
/// brute force over every clustering of its leaves into `ℓ` clusters with
/// centers inside the clusters.
fn exact_minima(t: &UltrametricTree, v: usize, k: usize, p: f64, contract: f64) -> Vec<f64> {
    let leaves = t.leaves(v).to_vec();
    let size = leaves.len();
    let d = |x: usize, y: usize| {
        let r = t.dist(x, y);
        if r <= contract { 0.0 } else { r }
    };
    let mut best = vec![f64::INFINITY; k + 1];
    let mut block = vec![0usize; size];
    loop {
        let used = block.iter().max().unwrap() + 1;
        if used <= k {
            let mut total = 0.0;
            for b in 0..used {
                let members: Vec<usize> = (0..size).filter(|&i| block[i] == b).map(|i| leaves[i]).collect();
                total += members
                    .iter()
                    .map(|&c| lp_norm(members.iter().map(|&x| d(x, c)), p))
                    .fold(f64::INFINITY, f64::min);
            }
            best[used] = best[used].min(total);
        }
        // Next restricted-growth string.
        let mut i = size;
        loop {
            if i <= 1 {
                return best;
            }
            i -= 1;
            let prefix_max = *block[..i].iter().max().unwrap();
            if block[i] <= prefix_max && block[i] + 1 < k {
                block[i] += 1;
                block[i + 1..].iter_mut().for_each(|b| *b = 0);
                break;
            }
        }
    }
}

#[test]
fn discretization_error_is_bounded() {
    let eps = 0.2;
    for trial in 0..150u64 {
        let mut rng = rng_from_seed(derive_seed(10, &[trial]));
        let n = rng.gen_range(2..=7);
        let t = gen_random_ultrametric(n, derive_seed(11, &[trial])).unwrap();
        let p = [1.0, 2.0, f64::INFINITY][trial as usize % 3];
        let k = rng.gen_range(1..=n.min(3));
        let h = t.delta(t.root());
        let v = t.root();
        let (approx, step) = discretized_minima(&t, v, k, p, eps, h).unwrap();
        let exact = exact_minima(&t, v, k, p, eps * h / (n * n) as f64);
        for ell in 1..=k {
            let bound = 4.0 * t.leaf_count(v) as f64 * step;
            assert!(
                (approx[ell] - exact[ell]).abs() <= bound + 1e-9,
                "trial {trial} ell {ell}: {} vs {} (bound {bound})",
                approx[ell],
                exact[ell]
            );
        }
    }
}
