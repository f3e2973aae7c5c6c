//! Random non-contractive embeddings into ultrametrics with small expected
//! maximum gradient.
//!
//! For every integer scale `k` an independent quotient-lifted partition
//! `P_k` at `Δ = 16^k` is drawn, and `ρ(x, y) = 16^(k+1)` for the largest `k`
//! with `P_k(x) != P_k(y)`. Only the scales between the all-singleton scale
//! `k_min` and the first deterministically trivial scale `k_max` are sampled.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metric::{quotient_at_scale, FiniteMetric, QuotientMap};
use crate::partition::{quotient_partition_with, PartitionSample};
use crate::rng::scale_rng;
use crate::ultrametric::UltrametricTree;

pub const SCALE_BASE: f64 = 16.0;

/// Samples processed per parallel batch; partial sums are combined in order.
const BATCH: usize = 64;

#[inline]
pub fn scale(k: i32) -> f64 {
    SCALE_BASE.powi(k)
}

/// Precomputed scale range and quotient maps for one metric. Quotients only
/// depend on the metric, so they are shared by every sample.
pub struct ScalePlan<'a> {
    metric: &'a FiniteMetric,
    k_min: i32,
    k_max: i32,
    quotients: Vec<QuotientMap<'a>>,
}

/// One draw of the random ultrametric `ρ` on the points of `source`.
#[derive(Debug, Clone)]
pub struct EmbeddingSample<'a> {
    pub source: &'a FiniteMetric,
    pub rho: UltrametricTree,
    pub scale_range: (i32, i32),
    /// The partition drawn at each scale, ordered by ascending scale index.
    pub partitions: Vec<PartitionSample>,
    rho_matrix: Vec<f64>,
}

impl<'a> ScalePlan<'a> {
    pub fn new(m: &'a FiniteMetric) -> Result<Self> {
        let n = m.len();
        if n < 2 {
            return Err(Error::TooSmall { what: "point count", min: 2, got: n });
        }
        let min = m.min_distance().expect("n >= 2");
        let diam = m.diameter();
        // Largest k with 16^k < min: identity quotient and CKR radius < min.
        let mut k_min = min.log(SCALE_BASE).floor() as i32;
        while scale(k_min) >= min {
            k_min -= 1;
        }
        while scale(k_min + 1) < min {
            k_min += 1;
        }
        // Smallest k at which one block is forced: either the quotient has a
        // single class (16^k >= 2n diam) or the quotient CKR radius, at least
        // 16^k / 8, covers the whole quotient (16^k >= 8 diam).
        let trivial = diam * (2.0 * n as f64).min(8.0);
        let mut k_max = trivial.log(SCALE_BASE).ceil() as i32;
        while scale(k_max) < trivial {
            k_max += 1;
        }
        while scale(k_max - 1) >= trivial {
            k_max -= 1;
        }
        let quotients = (k_min..=k_max)
            .map(|k| quotient_at_scale(m, scale(k)))
            .collect::<Result<Vec<_>>>()?;
        Ok(ScalePlan { metric: m, k_min, k_max, quotients })
    }

    pub fn metric(&self) -> &'a FiniteMetric {
        self.metric
    }

    pub fn scale_range(&self) -> (i32, i32) {
        (self.k_min, self.k_max)
    }

    pub fn scale_count(&self) -> usize {
        (self.k_max - self.k_min + 1) as usize
    }

    fn partitions(&self, seed: u64, sample: u64) -> Result<Vec<PartitionSample>> {
        (self.k_min..=self.k_max)
            .zip(&self.quotients)
            .map(|(k, q)| {
                let mut rng = scale_rng(seed, sample, k);
                let mut p = quotient_partition_with(q, &mut rng)?;
                p.scale_index = Some(k);
                Ok(p)
            })
            .collect()
    }

    /// Assembles `ρ` from per-scale partitions by refining top-down: pairs
    /// that are still together above scale `k` and split by `P_k` get
    /// `16^(k+1)`.
    fn rho_from_partitions(&self, partitions: &[PartitionSample]) -> Vec<f64> {
        let n = self.metric.len();
        let mut rho = vec![0.0; n * n];
        let mut groups: Vec<Vec<usize>> = vec![(0..n).collect()];
        let mut slot = vec![usize::MAX; n];
        debug_assert_eq!(partitions.last().map(|p| p.blocks.len()), Some(1));
        for (offset, p) in partitions.iter().enumerate().rev() {
            let k = self.k_min + offset as i32;
            let value = scale(k + 1);
            let mut next = Vec::with_capacity(groups.len());
            for group in groups {
                let mut parts: Vec<(usize, Vec<usize>)> = Vec::new();
                for x in group {
                    let b = p.block_of[x];
                    if slot[b] == usize::MAX {
                        slot[b] = parts.len();
                        parts.push((b, Vec::new()));
                    }
                    parts[slot[b]].1.push(x);
                }
                for (b, _) in &parts {
                    slot[*b] = usize::MAX;
                }
                for a in 0..parts.len() {
                    for b in a + 1..parts.len() {
                        for &x in &parts[a].1 {
                            for &y in &parts[b].1 {
                                rho[x * n + y] = value;
                                rho[y * n + x] = value;
                            }
                        }
                    }
                }
                next.extend(parts.into_iter().map(|(_, members)| members));
            }
            groups = next;
        }
        debug_assert!(groups.iter().all(|g| g.len() == 1), "k_min scale must separate all points");
        rho
    }

    /// Draws sample number `sample` under master seed `seed`.
    pub fn sample(&self, seed: u64, sample: u64) -> Result<EmbeddingSample<'a>> {
        let partitions = self.partitions(seed, sample)?;
        let rho_matrix = self.rho_from_partitions(&partitions);
        let rho_metric = FiniteMetric::from_trusted(self.metric.labels().to_vec(), rho_matrix.clone());
        let rho = UltrametricTree::single_linkage(&rho_metric);
        Ok(EmbeddingSample {
            source: self.metric,
            rho,
            scale_range: (self.k_min, self.k_max),
            partitions,
            rho_matrix,
        })
    }

    /// `ρ` matrix only, skipping the tree build.
    pub fn sample_rho(&self, seed: u64, sample: u64) -> Result<Vec<f64>> {
        Ok(self.rho_from_partitions(&self.partitions(seed, sample)?))
    }

    /// Per-point maximum gradients of samples `0..samples`, in sample order.
    pub fn gradient_table(&self, samples: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        (0..samples as u64)
            .into_par_iter()
            .map(|s| Ok(point_gradients(self.metric, &self.sample_rho(seed, s)?)))
            .collect()
    }

    /// Monte-Carlo gradient report over samples `0..samples`.
    pub fn estimate(&self, samples: usize, seed: u64) -> Result<GradientReport> {
        if samples == 0 {
            return Err(Error::BadParameter("samples must be at least 1".into()));
        }
        let m = self.metric;
        let n = m.len();
        let mut sum = vec![0.0; n];
        let mut sum_sq = vec![0.0; n];
        let mut ratio_sum = vec![0.0; n * n];
        let mut per_sample_means = Vec::with_capacity(samples);
        let mut start = 0;
        while start < samples {
            let end = (start + BATCH).min(samples);
            let batch: Vec<(Vec<f64>, Vec<f64>)> = (start as u64..end as u64)
                .into_par_iter()
                .map(|s| {
                    let rho = self.sample_rho(seed, s)?;
                    let g = point_gradients(m, &rho);
                    Ok((g, rho))
                })
                .collect::<Result<_>>()?;
            for (g, rho) in batch {
                for x in 0..n {
                    sum[x] += g[x];
                    sum_sq[x] += g[x] * g[x];
                }
                for (i, acc) in ratio_sum.iter_mut().enumerate() {
                    let (x, y) = (i / n, i % n);
                    if x != y {
                        *acc += rho[i] / m.d(x, y);
                    }
                }
                per_sample_means.push(g.iter().sum::<f64>() / n as f64);
            }
            start = end;
        }
        let s = samples as f64;
        let per_point: Vec<f64> = sum.iter().map(|v| v / s).collect();
        let per_point_stderr: Vec<f64> = (0..n)
            .map(|x| {
                if samples < 2 {
                    return 0.0;
                }
                let mean = per_point[x];
                let var = ((sum_sq[x] - s * mean * mean) / (s - 1.0)).max(0.0);
                (var / s).sqrt()
            })
            .collect();
        let average_distortion = ratio_sum.iter().fold(0.0, |a: f64, &b| a.max(b)) / s;
        Ok(GradientReport::assemble(m, per_point, per_point_stderr, per_sample_means, average_distortion))
    }
}

impl EmbeddingSample<'_> {
    #[inline]
    pub fn rho(&self, x: usize, y: usize) -> f64 {
        self.rho_matrix[x * self.source.len() + y]
    }

    pub fn rho_matrix(&self) -> &[f64] {
        &self.rho_matrix
    }

    /// First pair violating `d <= ρ <= 32 n d`, if any.
    pub fn distortion_violation(&self) -> Option<(usize, usize)> {
        let m = self.source;
        let n = m.len();
        let cap = 32.0 * n as f64;
        for x in 0..n {
            for y in x + 1..n {
                let (d, r) = (m.d(x, y), self.rho(x, y));
                if r < d || r > cap * d {
                    return Some((x, y));
                }
            }
        }
        None
    }
}

/// Draws one embedding: sample 0 under master seed `seed`.
pub fn sample_embedding(m: &FiniteMetric, seed: u64) -> Result<EmbeddingSample<'_>> {
    if m.len() < 2 {
        return Err(Error::SinglePoint);
    }
    ScalePlan::new(m)?.sample(seed, 0)
}

/// `max_{y != x} ρ(x,y) / d(x,y)` for every `x`.
pub fn point_gradients(m: &FiniteMetric, rho: &[f64]) -> Vec<f64> {
    let n = m.len();
    (0..n)
        .map(|x| {
            let row = m.row(x);
            let rrow = &rho[x * n..(x + 1) * n];
            (0..n).filter(|&y| y != x).map(|y| rrow[y] / row[y]).fold(0.0, f64::max)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct GradientReport {
    pub n: usize,
    pub samples: usize,
    pub labels: Vec<String>,
    /// Mean over samples of the maximum gradient at each point.
    pub per_point: Vec<f64>,
    pub per_point_stderr: Vec<f64>,
    /// Arithmetic mean of `per_point`.
    pub mean_max_gradient: f64,
    /// `max_x per_point[x]`.
    pub max_point_mean: f64,
    /// Standard error of the worst point's mean.
    pub max_point_stderr: f64,
    pub worst_point: String,
    pub per_sample_means: Vec<f64>,
    /// `max_{x != y}` of the mean of `ρ(x,y)/d(x,y)`.
    pub average_distortion: f64,
}

impl GradientReport {
    fn assemble(
        m: &FiniteMetric,
        per_point: Vec<f64>,
        per_point_stderr: Vec<f64>,
        per_sample_means: Vec<f64>,
        average_distortion: f64,
    ) -> Self {
        let n = m.len();
        let worst = (0..n).fold(0, |w, x| if per_point[x] > per_point[w] { x } else { w });
        GradientReport {
            n,
            samples: per_sample_means.len(),
            labels: m.labels().to_vec(),
            mean_max_gradient: per_point.iter().sum::<f64>() / n as f64,
            max_point_mean: per_point[worst],
            max_point_stderr: per_point_stderr[worst],
            worst_point: m.label(worst).to_string(),
            per_point,
            per_point_stderr,
            per_sample_means,
            average_distortion,
        }
    }
}

/// Gradient report of a single sample.
pub fn max_gradient(sample: &EmbeddingSample<'_>) -> GradientReport {
    let m = sample.source;
    let g = point_gradients(m, sample.rho_matrix());
    let mean = g.iter().sum::<f64>() / m.len() as f64;
    let distortion = average_distortion(std::slice::from_ref(sample));
    GradientReport::assemble(m, g, vec![0.0; m.len()], vec![mean], distortion)
}

pub fn estimate_expected_max_gradient(
    m: &FiniteMetric,
    samples: usize,
    seed: u64,
) -> Result<GradientReport> {
    ScalePlan::new(m)?.estimate(samples, seed)
}

/// `max_{x != y}` of the empirical mean of `ρ(x,y)/d(x,y)` over `samples`.
pub fn average_distortion(samples: &[EmbeddingSample<'_>]) -> f64 {
    let Some(first) = samples.first() else {
        return f64::NAN;
    };
    let m = first.source;
    let n = m.len();
    let mut best: f64 = 0.0;
    for x in 0..n {
        for y in x + 1..n {
            let total: f64 = samples.iter().map(|s| s.rho(x, y) / m.d(x, y)).sum();
            best = best.max(total / samples.len() as f64);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{gen_cycle, gen_path, validate};
    use crate::ultrametric::is_exact_ultrametric;

    #[test]
    fn two_points_always_sixteen() {
        let m = validate(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let plan = ScalePlan::new(&m).unwrap();
        assert_eq!(plan.scale_range(), (-1, 1));
        for seed in 0..100 {
            let s = plan.sample(seed, 0).unwrap();
            assert_eq!(s.rho(0, 1), 16.0);
            let r = max_gradient(&s);
            assert_eq!(r.per_point, vec![16.0, 16.0]);
        }
    }

    #[test]
    fn samples_are_valid_and_reproducible() {
        let m = gen_cycle(20).unwrap();
        for seed in 0..20 {
            let s = sample_embedding(&m, seed).unwrap();
            assert_eq!(s.distortion_violation(), None);
            assert!(is_exact_ultrametric(s.rho_matrix(), m.len()));
            assert_eq!(s.rho.distance_matrix(), s.rho_matrix());
            let again = sample_embedding(&m, seed).unwrap();
            assert_eq!(s.rho_matrix(), again.rho_matrix());
        }
    }

    #[test]
    fn single_sample_estimate_matches_max_gradient() {
        let m = gen_path(12).unwrap();
        let est = estimate_expected_max_gradient(&m, 1, 5).unwrap();
        let one = max_gradient(&sample_embedding(&m, 5).unwrap());
        assert_eq!(est.per_point, one.per_point);
        assert_eq!(est.average_distortion, one.average_distortion);
    }

    #[test]
    fn hand_built_gradients() {
        // d: (0,1)=1, (0,2)=2, (1,2)=2; ρ/d ratios 16, 16, 256 via ρ = 16, 32, 512
        let m = validate(&[vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 2.0], vec![2.0, 2.0, 0.0]]).unwrap();
        let rho = vec![0.0, 16.0, 32.0, 16.0, 0.0, 512.0, 32.0, 512.0, 0.0];
        let g = point_gradients(&m, &rho);
        let mut brute = [0.0f64; 3];
        for x in 0..3 {
            for y in 0..3 {
                if x != y {
                    brute[x] = brute[x].max(rho[x * 3 + y] / m.d(x, y));
                }
            }
        }
        assert_eq!(g, brute.to_vec());
        assert_eq!(g, vec![16.0, 256.0, 256.0]);
    }

    #[test]
    fn distortion_below_mean_gradient() {
        let m = gen_cycle(16).unwrap();
        let plan = ScalePlan::new(&m).unwrap();
        let samples: Vec<_> = (0..30).map(|s| plan.sample(9, s).unwrap()).collect();
        let avg = average_distortion(&samples);
        assert!(avg >= 1.0);
        let mean_of_max: f64 = samples
            .iter()
            .map(|s| max_gradient(s).per_point.iter().copied().fold(0.0, f64::max))
            .sum::<f64>()
            / samples.len() as f64;
        assert!(avg <= mean_of_max);
        let est = plan.estimate(30, 9).unwrap();
        assert!((est.average_distortion - avg).abs() <= 1e-9 * avg);
    }

    #[test]
    fn single_point_rejected() {
        let m = validate(&[vec![0.0]]).unwrap();
        assert!(matches!(sample_embedding(&m, 0), Err(Error::SinglePoint)));
    }
}
