//! Finite metric spaces: validation, derived quantities, instance generators
//! and the quotient construction used by the quotient-lifted partitions.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Relative tolerance for the triangle inequality.
pub const TRIANGLE_RTOL: f64 = 1e-9;

/// An `n`-point metric space stored as a dense row-major distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMetric {
    labels: Vec<String>,
    dist: Vec<f64>,
    n: usize,
}

/// On-disk metric format: `{"labels": [...], "dist": [[...]]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricJson {
    pub labels: Vec<String>,
    pub dist: Vec<Vec<f64>>,
}

/// On-disk weighted graph format: `{"n": N, "edges": [[u, v, w], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphJson {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

fn default_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

/// Checks the metric axioms and builds a [`FiniteMetric`] with labels `0..n`.
pub fn validate(rows: &[Vec<f64>]) -> Result<FiniteMetric> {
    FiniteMetric::new(default_labels(rows.len()), rows)
}

impl FiniteMetric {
    /// Validating constructor.
    pub fn new(labels: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if labels.len() != n {
            return Err(Error::LabelMismatch { labels: labels.len(), n });
        }
        let mut seen = HashSet::with_capacity(n);
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::DuplicateLabel(l.clone()));
            }
        }
        let mut dist = Vec::with_capacity(n * n);
        for (row, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(Error::NotSquare { row, len: r.len(), n });
            }
            for (j, &x) in r.iter().enumerate() {
                if !x.is_finite() || x < 0.0 {
                    return Err(Error::NonFinite { i: row, j });
                }
            }
            dist.extend_from_slice(r);
        }
        let m = FiniteMetric { labels, dist, n };
        m.check_axioms()?;
        Ok(m)
    }

    /// Builds a metric from a flat matrix known to satisfy the axioms
    /// (generators, ultrametric materialization, embedder output).
    pub(crate) fn from_trusted(labels: Vec<String>, dist: Vec<f64>) -> Self {
        let n = labels.len();
        debug_assert_eq!(dist.len(), n * n);
        FiniteMetric { labels, dist, n }
    }

    fn check_axioms(&self) -> Result<()> {
        let n = self.n;
        for i in 0..n {
            if self.d(i, i) != 0.0 {
                return Err(Error::NonzeroDiagonal { i });
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                if self.d(i, j) != self.d(j, i) {
                    return Err(Error::AsymmetricMatrix { i, j });
                }
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                if self.d(i, j) == 0.0 {
                    return Err(Error::DuplicatePoint { i, j });
                }
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                let dij = self.d(i, j);
                for k in 0..n {
                    if k == i || k == j {
                        continue;
                    }
                    let via = self.d(i, k) + self.d(k, j);
                    if dij > via * (1.0 + TRIANGLE_RTOL) {
                        return Err(Error::TriangleViolation { i, j, k });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn from_json(json: &MetricJson) -> Result<Self> {
        Self::new(json.labels.clone(), &json.dist)
    }

    pub fn to_json(&self) -> MetricJson {
        MetricJson { labels: self.labels.clone(), dist: self.rows() }
    }

    /// Shortest-path closure of a connected weighted graph.
    pub fn from_graph(graph: &GraphJson) -> Result<Self> {
        shortest_path_metric(default_labels(graph.n), graph.n, &graph.edges)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.dist[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    /// Smallest distance between distinct points; `None` when `n < 2`.
    pub fn min_distance(&self) -> Option<f64> {
        let n = self.n;
        let mut best: Option<f64> = None;
        for i in 0..n {
            for j in i + 1..n {
                let x = self.d(i, j);
                best = Some(best.map_or(x, |b| b.min(x)));
            }
        }
        best
    }

    /// Diameter over minimum positive distance.
    pub fn aspect_ratio(&self) -> Result<f64> {
        let min = self.min_distance().ok_or(Error::SinglePoint)?;
        Ok(self.diameter() / min)
    }

    /// `|B(x, r)|` for the closed ball under counting measure.
    pub fn ball_size(&self, x: usize, r: f64) -> usize {
        self.row(x).iter().filter(|&&d| d <= r).count()
    }

    /// The same points with every distance multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        assert!(factor > 0.0 && factor.is_finite());
        FiniteMetric {
            labels: self.labels.clone(),
            dist: self.dist.iter().map(|d| d * factor).collect(),
            n: self.n,
        }
    }

    /// Restriction to a subset of points, in the given order.
    pub fn restrict(&self, points: &[usize]) -> Self {
        let labels = points.iter().map(|&i| self.labels[i].clone()).collect();
        let mut dist = Vec::with_capacity(points.len() * points.len());
        for &i in points {
            for &j in points {
                dist.push(self.d(i, j));
            }
        }
        FiniteMetric::from_trusted(labels, dist)
    }
}

fn shortest_path_metric(
    labels: Vec<String>,
    n: usize,
    edges: &[(usize, usize, f64)],
) -> Result<FiniteMetric> {
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for &(u, v, w) in edges {
        if u >= n || v >= n {
            return Err(Error::BadGraphEdge { u, v, reason: "endpoint out of range" });
        }
        if u == v {
            return Err(Error::BadGraphEdge { u, v, reason: "self loop" });
        }
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::BadGraphEdge { u, v, reason: "weight must be positive and finite" });
        }
        adj[u].push((v, w));
        adj[v].push((u, w));
    }
    let mut dist = vec![f64::INFINITY; n * n];
    let mut heap = BinaryHeap::new();
    for src in 0..n {
        let row = &mut dist[src * n..(src + 1) * n];
        row[src] = 0.0;
        heap.push(Reverse((OrdF64(0.0), src)));
        while let Some(Reverse((OrdF64(du), u))) = heap.pop() {
            if du > row[u] {
                continue;
            }
            for &(v, w) in &adj[u] {
                let nd = du + w;
                if nd < row[v] {
                    row[v] = nd;
                    heap.push(Reverse((OrdF64(nd), v)));
                }
            }
        }
        if let Some(v) = row.iter().position(|d| d.is_infinite()) {
            return Err(Error::Disconnected(v));
        }
    }
    // Dijkstra from each side can differ in the last ulp; symmetrize.
    for i in 0..n {
        for j in i + 1..n {
            let m = dist[i * n + j].min(dist[j * n + i]);
            dist[i * n + j] = m;
            dist[j * n + i] = m;
        }
    }
    Ok(FiniteMetric::from_trusted(labels, dist))
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Shortest-path metric of the unweighted `n`-cycle.
pub fn gen_cycle(n: usize) -> Result<FiniteMetric> {
    if n < 3 {
        return Err(Error::TooSmall { what: "cycle length", min: 3, got: n });
    }
    let mut dist = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let a = i.abs_diff(j);
            dist.push(a.min(n - a) as f64);
        }
    }
    Ok(FiniteMetric::from_trusted(default_labels(n), dist))
}

/// Shortest-path metric of the unweighted path on `n` vertices.
pub fn gen_path(n: usize) -> Result<FiniteMetric> {
    if n < 2 {
        return Err(Error::TooSmall { what: "path length", min: 2, got: n });
    }
    let mut dist = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            dist.push(i.abs_diff(j) as f64);
        }
    }
    Ok(FiniteMetric::from_trusted(default_labels(n), dist))
}

pub const MAX_DIAMOND_K: usize = 6;

/// The `k`-th diamond graph as an explicit unit-weight graph.
#[derive(Debug, Clone)]
pub struct DiamondGraph {
    pub k: usize,
    pub labels: Vec<String>,
    pub edges: Vec<(usize, usize)>,
}

/// Builds `G_k`: start from a single edge `s-t` and replace every edge by a
/// quadrilateral `k` times.
///
/// Edges carry digit strings over `{1,2,3,4}`; the quadrilateral that
/// replaces edge `σ` (endpoints `u`, `v`) has new vertices `σa`, `σb` and
/// edges `σ1 = u-σa`, `σ2 = σa-v`, `σ3 = u-σb`, `σ4 = σb-v`.
pub fn diamond_graph(k: usize) -> Result<DiamondGraph> {
    if k < 1 {
        return Err(Error::TooSmall { what: "diamond level", min: 1, got: k });
    }
    if k > MAX_DIAMOND_K {
        return Err(Error::TooLarge { what: "diamond level", max: MAX_DIAMOND_K, got: k });
    }
    let mut labels = vec!["s".to_string(), "t".to_string()];
    let mut edges: Vec<(usize, usize, String)> = vec![(0, 1, String::new())];
    for _ in 0..k {
        let mut next = Vec::with_capacity(edges.len() * 4);
        for (u, v, sigma) in edges {
            let a = labels.len();
            labels.push(format!("{sigma}a"));
            let b = labels.len();
            labels.push(format!("{sigma}b"));
            next.push((u, a, format!("{sigma}1")));
            next.push((a, v, format!("{sigma}2")));
            next.push((u, b, format!("{sigma}3")));
            next.push((b, v, format!("{sigma}4")));
        }
        edges = next;
    }
    Ok(DiamondGraph { k, labels, edges: edges.into_iter().map(|(u, v, _)| (u, v)).collect() })
}

impl DiamondGraph {
    pub fn metric(&self) -> FiniteMetric {
        let weighted: Vec<_> = self.edges.iter().map(|&(u, v)| (u, v, 1.0)).collect();
        shortest_path_metric(self.labels.clone(), self.labels.len(), &weighted)
            .expect("diamond graphs are connected")
    }
}

/// Shortest-path metric of the `k`-th diamond graph.
pub fn gen_diamond(k: usize) -> Result<FiniteMetric> {
    Ok(diamond_graph(k)?.metric())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RandomMode {
    /// i.i.d. uniform points in the unit square, Euclidean distances.
    Euclidean2d,
    /// Every distance i.i.d. uniform in `[1, 2]`.
    UniformPerturbed,
}

pub fn gen_random(n: usize, mode: RandomMode, seed: u64) -> Result<FiniteMetric> {
    if n < 2 {
        return Err(Error::TooSmall { what: "point count", min: 2, got: n });
    }
    let mut rng = rng_from_seed(seed);
    let mut dist = vec![0.0; n * n];
    match mode {
        RandomMode::Euclidean2d => {
            let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen::<f64>(), rng.gen::<f64>())).collect();
            for i in 0..n {
                for j in i + 1..n {
                    let d = (pts[i].0 - pts[j].0).hypot(pts[i].1 - pts[j].1);
                    if d == 0.0 {
                        return Err(Error::DuplicatePoint { i, j });
                    }
                    dist[i * n + j] = d;
                    dist[j * n + i] = d;
                }
            }
        }
        RandomMode::UniformPerturbed => {
            for i in 0..n {
                for j in i + 1..n {
                    let d = rng.gen_range(1.0..=2.0);
                    dist[i * n + j] = d;
                    dist[j * n + i] = d;
                }
            }
        }
    }
    Ok(FiniteMetric::from_trusted(default_labels(n), dist))
}

/// Quotient of a metric by the classes of the relation "joined by a chain of
/// hops of length at most `delta / (2n)`".
#[derive(Debug, Clone)]
pub struct QuotientMap<'a> {
    pub parent: &'a FiniteMetric,
    pub delta: f64,
    /// Blocks, ordered by smallest member; members ascending.
    pub classes: Vec<Vec<usize>>,
    /// `block_of[x]` is the class index of parent point `x`.
    pub block_of: Vec<usize>,
    /// Maximal metric on the classes majorized by the cross distances.
    pub quotient: FiniteMetric,
}

impl QuotientMap<'_> {
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.classes.len() == self.parent.len()
    }

    /// Quotient distance between the classes of parent points `x` and `y`.
    pub fn project_distance(&self, x: usize, y: usize) -> f64 {
        self.quotient.d(self.block_of[x], self.block_of[y])
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

pub fn quotient_at_scale(m: &FiniteMetric, delta: f64) -> Result<QuotientMap<'_>> {
    if delta.is_nan() || delta <= 0.0 {
        return Err(Error::BadParameter(format!("scale must be positive, got {delta}")));
    }
    let n = m.len();
    let threshold = delta / (2.0 * n as f64);
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        for j in i + 1..n {
            if m.d(i, j) <= threshold {
                uf.union(i, j);
            }
        }
    }
    let mut block_of = vec![usize::MAX; n];
    let mut classes: Vec<Vec<usize>> = Vec::new();
    let mut root_block = vec![usize::MAX; n];
    for x in 0..n {
        let r = uf.find(x);
        if root_block[r] == usize::MAX {
            root_block[r] = classes.len();
            classes.push(Vec::new());
        }
        block_of[x] = root_block[r];
        classes[root_block[r]].push(x);
    }
    let blocks = classes.len();
    let labels: Vec<String> = (0..blocks).map(|b| format!("W{b}")).collect();
    let quotient = if blocks == n {
        FiniteMetric::from_trusted(labels, m.dist.clone())
    } else {
        let mut cross = vec![f64::INFINITY; blocks * blocks];
        for b in 0..blocks {
            cross[b * blocks + b] = 0.0;
        }
        for i in 0..n {
            let bi = block_of[i];
            for j in i + 1..n {
                let bj = block_of[j];
                if bi != bj {
                    let d = m.d(i, j);
                    let c = &mut cross[bi * blocks + bj];
                    if d < *c {
                        *c = d;
                        cross[bj * blocks + bi] = d;
                    }
                }
            }
        }
        floyd_warshall(&mut cross, blocks);
        FiniteMetric::from_trusted(labels, cross)
    };
    Ok(QuotientMap { parent: m, delta, classes, block_of, quotient })
}

/// In-place all-pairs shortest paths on a dense `n × n` weight matrix.
pub(crate) fn floyd_warshall(w: &mut [f64], n: usize) {
    for k in 0..n {
        for i in 0..n {
            let wik = w[i * n + k];
            if wik.is_infinite() {
                continue;
            }
            for j in 0..n {
                let via = wik + w[k * n + j];
                if via < w[i * n + j] {
                    w[i * n + j] = via;
                }
            }
        }
    }
}
