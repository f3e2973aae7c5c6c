//! Experiments on the cycle, path and diamond families: the random-edge
//! cycle-to-path embedding, the cycle certificate for tree embeddings, and
//! maximum-gradient growth curves with CSV output.

use std::io::Write;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::embed::ScalePlan;
use crate::error::{Error, Result};
use crate::metric::{diamond_graph, gen_cycle, gen_path, gen_random, FiniteMetric, RandomMode};
use crate::rng::derive_seed;

fn cycle_distance(n: usize, x: usize, y: usize) -> usize {
    let a = x.abs_diff(y);
    a.min(n - a)
}

/// Position of vertex `x` on the path left after deleting cycle edge
/// `(edge, edge + 1)`.
fn path_position(n: usize, edge: usize, x: usize) -> usize {
    (x + n - (edge + 1) % n) % n
}

/// The cycle `C_n` mapped onto a path by deleting one edge.
#[derive(Debug, Clone)]
pub struct KarpEmbedding {
    pub n: usize,
    pub deleted_edge: usize,
    /// Path distances between cycle vertices (a tree metric).
    pub path_metric: FiniteMetric,
    /// Exact maximum gradient of the map at each vertex.
    pub gradients: Vec<f64>,
}

/// Deletes edge `(edge, edge + 1 mod n)` of `C_n`.
pub fn karp_cycle_embedding(n: usize, edge: usize) -> Result<KarpEmbedding> {
    if n < 4 {
        return Err(Error::TooSmall { what: "cycle length", min: 4, got: n });
    }
    if edge >= n {
        return Err(Error::BadEdge { edge, n });
    }
    let mut dist = vec![0.0; n * n];
    let mut gradients = vec![0.0f64; n];
    for x in 0..n {
        let px = path_position(n, edge, x);
        for y in 0..n {
            if x == y {
                continue;
            }
            let d = px.abs_diff(path_position(n, edge, y)) as f64;
            dist[x * n + y] = d;
            gradients[x] = gradients[x].max(d / cycle_distance(n, x, y) as f64);
        }
    }
    let labels = (0..n).map(|i| i.to_string()).collect();
    let rows: Vec<Vec<f64>> = dist.chunks(n).map(<[f64]>::to_vec).collect();
    Ok(KarpEmbedding { n, deleted_edge: edge, path_metric: FiniteMetric::new(labels, &rows)?, gradients })
}

/// `(2/n) Σ_{0 ≤ t ≤ n/2} (n - t - 1)/(t + 1)`.
pub fn karp_gradient_estimate(n: usize) -> f64 {
    let nf = n as f64;
    (0..=n / 2).map(|t| (nf - t as f64 - 1.0) / (t as f64 + 1.0)).sum::<f64>() * 2.0 / nf
}

/// Exact statistics of the uniformly random edge deletion on `C_n`.
#[derive(Debug, Clone, Serialize)]
pub struct KarpStats {
    pub n: usize,
    /// Largest, over vertex pairs, of the mean stretch over all deletions.
    pub max_mean_pair_stretch: f64,
    /// Expected maximum gradient at each vertex.
    pub expected_max_gradient: Vec<f64>,
    /// Closed-form estimate of the expected maximum gradient.
    pub estimate: f64,
}

/// Averages over all `n` deletions.
pub fn karp_statistics(n: usize) -> Result<KarpStats> {
    let mut stretch_sum = vec![0.0; n * n];
    let mut grad_sum = vec![0.0; n];
    for edge in 0..n {
        let emb = karp_cycle_embedding(n, edge)?;
        for x in 0..n {
            grad_sum[x] += emb.gradients[x];
            for y in x + 1..n {
                stretch_sum[x * n + y] += emb.path_metric.d(x, y) / cycle_distance(n, x, y) as f64;
            }
        }
    }
    let nf = n as f64;
    Ok(KarpStats {
        n,
        max_mean_pair_stretch: stretch_sum.iter().fold(0.0, |a: f64, &b| a.max(b)) / nf,
        expected_max_gradient: grad_sum.iter().map(|g| g / nf).collect(),
        estimate: karp_gradient_estimate(n),
    })
}

/// A cycle edge stretched by a tree embedding.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Certificate {
    /// The edge is `(edge, edge + 1 mod n)`.
    pub edge: usize,
    pub tree_distance: f64,
}

/// Finds the most stretched edge of `C_n` under the tree distances `tree`
/// (row-major `n × n`, vertices in cycle order), after checking that the
/// embedding does not contract any pair. Fails if no edge reaches `n/3 - 1`.
pub fn rr_certificate(tree: &[f64], n: usize) -> Result<Certificate> {
    if n < 3 {
        return Err(Error::TooSmall { what: "cycle length", min: 3, got: n });
    }
    if tree.len() != n * n {
        return Err(Error::BadParameter(format!("expected {} tree distances, got {}", n * n, tree.len())));
    }
    for i in 0..n {
        for j in i + 1..n {
            if tree[i * n + j] < cycle_distance(n, i, j) as f64 {
                return Err(Error::NotNonContractive { i, j });
            }
        }
    }
    let (edge, tree_distance) = (0..n)
        .map(|x| (x, tree[x * n + (x + 1) % n]))
        .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
    let bound = n as f64 / 3.0 - 1.0;
    if tree_distance < bound {
        return Err(Error::CertificateMissing { bound, best: tree_distance });
    }
    Ok(Certificate { edge, tree_distance })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Cycle,
    Path,
    /// Sizes are diamond levels `k`.
    Diamond,
    /// Uniform points in the unit square.
    Random,
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cycle" => Ok(Family::Cycle),
            "path" => Ok(Family::Path),
            "diamond" => Ok(Family::Diamond),
            "random" => Ok(Family::Random),
            other => Err(Error::BadParameter(format!("unknown family {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub family: Family,
    pub sizes: Vec<usize>,
    pub samples: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() {
            return Err(Error::BadParameter("sizes must be nonempty".into()));
        }
        if self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::BadParameter("sizes must be strictly increasing".into()));
        }
        if self.samples == 0 {
            return Err(Error::BadParameter("samples must be at least 1".into()));
        }
        Ok(())
    }
}

/// Instance of `family` at `size`; random instances use a seed derived from
/// the master seed and the size.
pub fn family_metric(family: Family, size: usize, seed: u64) -> Result<FiniteMetric> {
    match family {
        Family::Cycle => gen_cycle(size),
        Family::Path => gen_path(size),
        Family::Diamond => Ok(diamond_graph(size)?.metric()),
        Family::Random => gen_random(size, RandomMode::Euclidean2d, derive_seed(seed, &[size as u64])),
    }
}

/// One CSV row. Logarithms are natural.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthRow {
    /// Number of points.
    pub n: usize,
    pub mean_max_gradient: f64,
    pub max_point_mean: f64,
    /// Standard error of `max_point_mean`.
    pub stderr: f64,
    pub ln_n: f64,
    pub ln_n_sq: f64,
    /// Diamond family only: `4^{-k} Σ_{edges} Σ_{x ∈ e} E|∇f(x)|`.
    pub edge_weighted_mean: Option<f64>,
}

pub const CSV_COLUMNS: [&str; 7] =
    ["n", "mean_max_gradient", "max_point_mean", "stderr", "ln_n", "ln_n_sq", "edge_weighted_mean"];

/// Estimates the expected maximum gradient for every size of `config`.
pub fn growth_curve(config: &ExperimentConfig) -> Result<Vec<GrowthRow>> {
    config.validate()?;
    let mut rows = Vec::with_capacity(config.sizes.len());
    for &size in &config.sizes {
        let m = family_metric(config.family, size, config.seed)?;
        let plan = ScalePlan::new(&m)?;
        let report = plan.estimate(config.samples, derive_seed(config.seed, &[size as u64]))?;
        let edge_weighted_mean = match config.family {
            Family::Diamond => {
                let g = diamond_graph(size)?;
                let total: f64 = g.edges.iter().map(|&(u, v)| report.per_point[u] + report.per_point[v]).sum();
                Some(total / g.edges.len() as f64)
            }
            _ => None,
        };
        let n = m.len();
        let ln_n = (n as f64).ln();
        rows.push(GrowthRow {
            n,
            mean_max_gradient: report.mean_max_gradient,
            max_point_mean: report.max_point_mean,
            stderr: report.max_point_stderr,
            ln_n,
            ln_n_sq: ln_n * ln_n,
            edge_weighted_mean,
        });
    }
    Ok(rows)
}

/// Writes rows as CSV with a header line.
pub fn write_csv<W: Write>(rows: &[GrowthRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Least-squares line `y = a x + b`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn least_squares(xs: &[f64], ys: &[f64]) -> Fit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Fit { slope, intercept, r2 }
}

/// Fits of `max_point_mean` against `ln n` and against `(ln n)²`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GrowthFits {
    pub log: Fit,
    pub log_sq: Fit,
}

pub fn growth_fits(rows: &[GrowthRow]) -> GrowthFits {
    let ys: Vec<f64> = rows.iter().map(|r| r.max_point_mean).collect();
    let ln: Vec<f64> = rows.iter().map(|r| r.ln_n).collect();
    let ln_sq: Vec<f64> = rows.iter().map(|r| r.ln_n_sq).collect();
    GrowthFits { log: least_squares(&ln, &ys), log_sq: least_squares(&ln_sq, &ys) }
}
