//! FPTAS for Σℓ_p clustering on an ultrametric tree.
//!
//! For a guess `h` of the largest center-to-point distance in the optimum:
//!
//! 1. the maximal subtrees with `Δ(v) <= h` (the level `L`) cannot share a
//!    cluster, so each gets its own clusters and a knapsack over the tree
//!    above `L` distributes the `k` centers among them;
//! 2. inside an `L` subtree, subtrees with `Δ <= εh/n²` are contracted to a
//!    single group of coincident points;
//! 3. a table `B'(v, ℓ, s, τ)` holds the cheapest clustering of the leaves
//!    of `T_v` with `ℓ` centers and `s` points left unassigned (to be served
//!    from outside `T_v`), where the most expensive cluster has cost `τ`,
//!    rounded onto the grid `{0, A/M, …, A}` with `M = ⌈n/ε⌉`. Unassigned
//!    points of one child always join the most expensive cluster of the
//!    other child, which is optimal because `(τ^p + rΔ^p)^{1/p} - τ` shrinks
//!    as `τ` grows.
//!
//! Every guess `h` is tried, each candidate solution is rebuilt from
//! backpointers and re-evaluated exactly, and the cheapest one is returned.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde_json::json;

use super::{check_exponent, eval_sigma_lp, ClusteringSolution, Objective};
use crate::error::{Error, Result};
use crate::ultrametric::UltrametricTree;

/// Largest tree accepted by the FPTAS.
pub const MAX_POINTS: usize = 64;

/// `(ℓ, s, τ index)`
type Key = (usize, usize, usize);

#[derive(Debug, Clone, Copy)]
enum Back {
    Group,
    Join {
        a: Key,
        b: Key,
        /// Unassigned points of the first child sent to the second child's heaviest cluster.
        moved_from_a: usize,
        moved_from_b: usize,
        heavy_in_b: bool,
    },
}

type Table = BTreeMap<Key, (f64, Back)>;

/// Centers and their clusters.
type Clustering = (Vec<usize>, Vec<Vec<usize>>);

/// Per level-set node: its index in the level set and `min_τ B'(v, ℓ, 0, τ)`.
type LevelMinima = BTreeMap<usize, (usize, Vec<Option<(f64, Key)>>)>;

/// Rounding grid `{0, step, 2 step, …, max_index · step}`.
#[derive(Debug, Clone, Copy)]
pub struct Grid {
    pub step: f64,
    pub max_index: usize,
}

impl Grid {
    /// `A' = {0, A/M, …, A}`.
    pub fn new(upper: f64, m: usize) -> Self {
        Grid { step: upper / m as f64, max_index: m }
    }

    /// Nearest multiple of the step, ties rounding down.
    fn steps(&self, x: f64) -> usize {
        if self.step <= 0.0 || x <= 0.0 {
            return 0;
        }
        let q = x / self.step;
        let lo = q.floor();
        let i = if q - lo > 0.5 { lo + 1.0 } else { lo };
        i as usize
    }

    /// `rd(x)` as a grid index, clamped to the top of the grid.
    pub fn index(&self, x: f64) -> usize {
        self.steps(x).min(self.max_index)
    }

    pub fn value(&self, i: usize) -> f64 {
        i as f64 * self.step
    }

    /// Rounds a cost increment to the grid spacing (not clamped).
    pub fn round(&self, x: f64) -> f64 {
        self.steps(x) as f64 * self.step
    }
}

/// `(τ^p + r Δ^p)^{1/p}`; for `p = ∞`, `max(τ, Δ)` when `r > 0`.
fn grow(tau: f64, r: usize, delta: f64, p: f64) -> f64 {
    if r == 0 {
        tau
    } else if p == f64::INFINITY {
        tau.max(delta)
    } else if p == 1.0 {
        tau + r as f64 * delta
    } else if p == 2.0 {
        (tau * tau + r as f64 * delta * delta).sqrt()
    } else {
        (tau.powf(p) + r as f64 * delta.powf(p)).powf(1.0 / p)
    }
}

/// Upper bound on one cluster's cost when all its distances are at most `h`.
fn cost_cap(points: usize, h: f64, p: f64) -> f64 {
    if p == f64::INFINITY {
        h
    } else {
        (points as f64).powf(1.0 / p) * h
    }
}

/// Discretized table for one subtree.
struct SubtreeDp<'t> {
    tree: &'t UltrametricTree,
    p: f64,
    /// Subtrees with `Δ <= contract` are collapsed to a single group.
    contract: f64,
    ell_cap: usize,
    grid: Grid,
    tables: BTreeMap<usize, Table>,
}

impl<'t> SubtreeDp<'t> {
    fn is_group(&self, v: usize) -> bool {
        self.tree.delta(v) <= self.contract
    }

    fn build(&mut self, v: usize) {
        // Postorder restricted to the contracted subtree.
        let mut order = Vec::new();
        let mut stack = vec![(v, false)];
        while let Some((u, done)) = stack.pop() {
            match self.tree.children(u) {
                Some([a, b]) if !done && !self.is_group(u) => {
                    stack.push((u, true));
                    stack.push((b, false));
                    stack.push((a, false));
                }
                _ => order.push(u),
            }
        }
        for u in order {
            let table = if self.is_group(u) {
                self.group_table(u)
            } else {
                let [a, b] = self.tree.children(u).expect("internal");
                self.join_table(u, a, b)
            };
            self.tables.insert(u, table);
        }
    }

    fn group_table(&self, u: usize) -> Table {
        let size = self.tree.leaf_count(u);
        let mut t = Table::new();
        t.insert((0, size, 0), (0.0, Back::Group));
        for ell in 1..=size.min(self.ell_cap) {
            t.insert((ell, 0, 0), (0.0, Back::Group));
        }
        t
    }

    fn join_table(&self, u: usize, a: usize, b: usize) -> Table {
        let delta = self.tree.delta(u);
        let (ta, tb) = (&self.tables[&a], &self.tables[&b]);
        let mut out = Table::new();
        for (&ka, &(ca, _)) in ta {
            let (la, sa, ia) = ka;
            let tau_a = self.grid.value(ia);
            for (&kb, &(cb, _)) in tb {
                let (lb, sb, ib) = kb;
                if la + lb > self.ell_cap {
                    continue;
                }
                let tau_b = self.grid.value(ib);
                let max_from_a = if lb == 0 { 0 } else { sa };
                let max_from_b = if la == 0 { 0 } else { sb };
                for moved_a in 0..=max_from_a {
                    let new_b = grow(tau_b, moved_a, delta, self.p);
                    for moved_b in 0..=max_from_b {
                        let new_a = grow(tau_a, moved_b, delta, self.p);
                        let inc = self.grid.round((new_a - tau_a) + (new_b - tau_b));
                        let heavy_in_b = la == 0 || (lb > 0 && new_b > new_a);
                        let tau = if heavy_in_b { new_b } else { new_a };
                        let key = (la + lb, sa + sb - moved_a - moved_b, self.grid.index(tau));
                        let cost = ca + cb + inc;
                        let entry = out.entry(key).or_insert((f64::INFINITY, Back::Group));
                        if cost < entry.0 {
                            *entry = (
                                cost,
                                Back::Join { a: ka, b: kb, moved_from_a: moved_a, moved_from_b: moved_b, heavy_in_b },
                            );
                        }
                    }
                }
            }
        }
        pareto_prune(out)
    }

    /// `min_τ B'(v, ℓ, 0, τ)` with its key, for `ℓ = 0..=ell_cap`.
    fn closed_minima(&self, v: usize) -> Vec<Option<(f64, Key)>> {
        let mut best: Vec<Option<(f64, Key)>> = vec![None; self.ell_cap + 1];
        for (&key, &(cost, _)) in &self.tables[&v] {
            let (ell, s, _) = key;
            if s == 0 && best[ell].is_none_or(|(c, _)| cost < c) {
                best[ell] = Some((cost, key));
            }
        }
        best
    }

    /// Rebuilds clusters for state `key` at node `u`.
    fn reconstruct(&self, u: usize, key: Key) -> Partial {
        match self.tables[&u][&key].1 {
            Back::Group => {
                let members = self.tree.leaves(u).to_vec();
                let (ell, _, _) = key;
                if ell == 0 {
                    return Partial { clusters: Vec::new(), heavy: None, unassigned: members };
                }
                // First center takes the whole group, the others serve themselves.
                let mut clusters = vec![(members[0], Vec::new())];
                for &c in &members[1..ell] {
                    clusters.push((c, vec![c]));
                }
                clusters[0].1.push(members[0]);
                clusters[0].1.extend_from_slice(&members[ell..]);
                Partial { clusters, heavy: Some(0), unassigned: Vec::new() }
            }
            Back::Join { a, b, moved_from_a, moved_from_b, heavy_in_b } => {
                let [ca, cb] = self.tree.children(u).expect("internal");
                let mut pa = self.reconstruct(ca, a);
                let mut pb = self.reconstruct(cb, b);
                let to_b: Vec<usize> = pa.unassigned.drain(..moved_from_a).collect();
                let to_a: Vec<usize> = pb.unassigned.drain(..moved_from_b).collect();
                if let Some(h) = pb.heavy {
                    pb.clusters[h].1.extend(to_b);
                }
                if let Some(h) = pa.heavy {
                    pa.clusters[h].1.extend(to_a);
                }
                let offset = pa.clusters.len();
                let heavy = if heavy_in_b { pb.heavy.map(|h| h + offset) } else { pa.heavy };
                let mut clusters = pa.clusters;
                clusters.extend(pb.clusters);
                let mut unassigned = pa.unassigned;
                unassigned.extend(pb.unassigned);
                Partial { clusters, heavy, unassigned }
            }
        }
    }
}

/// Keeps, for each `(ℓ, s)`, only states not dominated by a state with a
/// larger or equal `τ` and no larger cost.
fn pareto_prune(table: Table) -> Table {
    let mut out = Table::new();
    let mut group: Vec<(Key, (f64, Back))> = Vec::new();
    let flush = |group: &mut Vec<(Key, (f64, Back))>, out: &mut Table| {
        let mut best = f64::INFINITY;
        for (key, val) in group.drain(..).rev() {
            if val.0 < best {
                best = val.0;
                out.insert(key, val);
            }
        }
    };
    for (key, val) in table {
        if let Some(&((l, s, _), _)) = group.last() {
            if (l, s) != (key.0, key.1) {
                flush(&mut group, &mut out);
            }
        }
        group.push((key, val));
    }
    flush(&mut group, &mut out);
    out
}

struct Partial {
    clusters: Vec<(usize, Vec<usize>)>,
    heavy: Option<usize>,
    unassigned: Vec<usize>,
}

/// Maximal subtrees with `Δ(v) <= h`, left to right.
fn level_set(t: &UltrametricTree, h: f64) -> Vec<usize> {
    let mut out = Vec::new();
    let mut stack = vec![t.root()];
    while let Some(v) = stack.pop() {
        match t.children(v) {
            Some([a, b]) if t.delta(v) > h => {
                stack.push(b);
                stack.push(a);
            }
            _ => out.push(v),
        }
    }
    out
}

fn check_args(t: &UltrametricTree, k: usize, p: f64, eps: f64) -> Result<()> {
    let n = t.len();
    if n > MAX_POINTS {
        return Err(Error::TooLarge { what: "points for the sigma_lp solver", max: MAX_POINTS, got: n });
    }
    if k == 0 {
        return Err(Error::BadParameter("k must be at least 1".into()));
    }
    if k > n {
        return Err(Error::KTooLarge { k, n });
    }
    check_exponent(p)?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::BadEps(eps));
    }
    Ok(())
}

fn subtree_dp(t: &UltrametricTree, v: usize, ell_cap: usize, p: f64, eps: f64, h: f64) -> SubtreeDp<'_> {
    let n = t.len();
    let m = (n as f64 / eps).ceil() as usize;
    let mut dp = SubtreeDp {
        tree: t,
        p,
        contract: eps * h / (n * n) as f64,
        ell_cap,
        grid: Grid::new(cost_cap(t.leaf_count(v), h, p), m),
        tables: BTreeMap::new(),
    };
    dp.build(v);
    dp
}

/// Candidate solution for one guess `h`, or `None` if `k` centers cannot
/// cover the level set.
fn solve_for_h(t: &UltrametricTree, k: usize, p: f64, eps: f64, h: f64) -> Option<Clustering> {
    let level = level_set(t, h);
    if level.len() > k {
        return None;
    }
    let ell_cap = k - (level.len() - 1);
    let dps: Vec<SubtreeDp<'_>> = level.iter().map(|&v| subtree_dp(t, v, ell_cap, p, eps, h)).collect();
    let minima: LevelMinima = level
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, (i, dps[i].closed_minima(v))))
        .collect();

    // Knapsack over the tree above the level set.
    let mut glue: BTreeMap<usize, (Vec<f64>, Vec<usize>)> = BTreeMap::new();
    let mut order = Vec::new();
    let mut stack = vec![(t.root(), false)];
    while let Some((v, done)) = stack.pop() {
        match t.children(v) {
            Some([a, b]) if !done && !minima.contains_key(&v) => {
                stack.push((v, true));
                stack.push((b, false));
                stack.push((a, false));
            }
            _ => order.push(v),
        }
    }
    for v in order {
        if let Some((_, mins)) = minima.get(&v) {
            let mut c = vec![f64::INFINITY; k + 1];
            for (ell, m) in mins.iter().enumerate().skip(1) {
                if let Some((cost, _)) = m {
                    c[ell] = *cost;
                }
            }
            glue.insert(v, (c, Vec::new()));
        } else {
            let [a, b] = t.children(v).expect("internal");
            let (ca, cb) = (&glue[&a].0, &glue[&b].0);
            let mut c = vec![f64::INFINITY; k + 1];
            let mut split = vec![0; k + 1];
            for ell in 0..=k {
                for la in 0..=ell {
                    let cost = ca[la] + cb[ell - la];
                    if cost < c[ell] {
                        c[ell] = cost;
                        split[ell] = la;
                    }
                }
            }
            glue.insert(v, (c, split));
        }
    }
    if !glue[&t.root()].0[k].is_finite() {
        return None;
    }
    let mut centers = Vec::with_capacity(k);
    let mut clusters = Vec::with_capacity(k);
    let mut stack = vec![(t.root(), k)];
    while let Some((v, ell)) = stack.pop() {
        if let Some((i, mins)) = minima.get(&v) {
            let (_, key) = mins[ell].expect("finite glue value has a state");
            let part = dps[*i].reconstruct(v, key);
            debug_assert!(part.unassigned.is_empty());
            for (c, members) in part.clusters {
                centers.push(c);
                clusters.push(members);
            }
        } else {
            let [a, b] = t.children(v).expect("internal");
            let la = glue[&v].1[ell];
            stack.push((b, ell - la));
            stack.push((a, la));
        }
    }
    Some((centers, clusters))
}

/// `(1 + O(ε))`-approximate Σℓ_p clustering with exactly `k` clusters.
///
/// The reported value is the exact objective of the returned clustering on
/// the tree's metric.
pub fn solve_sigma_lp_ultrametric(t: &UltrametricTree, k: usize, p: f64, eps: f64) -> Result<ClusteringSolution> {
    check_args(t, k, p, eps)?;
    let n = t.len();
    let params = json!({ "k": k, "p": if p.is_infinite() { json!("inf") } else { json!(p) }, "eps": eps });
    let metric = t.to_metric();
    if k == n {
        let centers: Vec<usize> = (0..n).collect();
        let clusters = centers.iter().map(|&c| vec![c]).collect();
        return Ok(ClusteringSolution {
            objective: Objective::SigmaLp,
            centers,
            clusters: Some(clusters),
            value: 0.0,
            metric_tag: "ultrametric".into(),
            params,
        });
    }
    let mut guesses: Vec<f64> = (n..t.node_count()).map(|v| t.delta(v)).collect();
    guesses.sort_by(f64::total_cmp);
    guesses.dedup();
    let candidates: Vec<Option<(f64, Clustering)>> = guesses
        .par_iter()
        .map(|&h| {
            solve_for_h(t, k, p, eps, h).map(|(centers, clusters)| {
                let value = eval_sigma_lp(&metric, &centers, &clusters, p).expect("DP output is a partition");
                (value, (centers, clusters))
            })
        })
        .collect();
    let (value, (centers, clusters)) = candidates
        .into_iter()
        .flatten()
        .fold(None, |best: Option<(f64, Clustering)>, cur| match best {
            Some(b) if b.0 <= cur.0 => Some(b),
            _ => Some(cur),
        })
        .ok_or_else(|| Error::Infeasible(format!("no guess of the cluster radius admits {k} clusters")))?;
    Ok(ClusteringSolution {
        objective: Objective::SigmaLp,
        centers,
        clusters: Some(clusters),
        value,
        metric_tag: "ultrametric".into(),
        params,
    })
}

/// Minimum over `τ` of the discretized table `B'(v, ℓ, 0, τ)` for
/// `ℓ = 0..=k`, computed on `T_v` with radius guess `h` (contraction
/// threshold `εh/n²`, grid `A = |T_v|^{1/p} h`, `M = ⌈n/ε⌉`). Infeasible
/// entries are `+∞`. Also returns the grid step `A/M`.
pub fn discretized_minima(
    t: &UltrametricTree,
    v: usize,
    k: usize,
    p: f64,
    eps: f64,
    h: f64,
) -> Result<(Vec<f64>, f64)> {
    check_args(t, k.max(1), p, eps)?;
    let dp = subtree_dp(t, v, k, p, eps, h);
    let mins = dp.closed_minima(v).into_iter().map(|m| m.map_or(f64::INFINITY, |(c, _)| c)).collect();
    Ok((mins, dp.grid.step))
}

/// Distances of `t` with every pair below `threshold` contracted to zero.
/// Not a metric in general (coincident points); used to check the
/// contraction step.
pub fn contracted_distances(t: &UltrametricTree, threshold: f64) -> Vec<f64> {
    t.distance_matrix().into_iter().map(|d| if d <= threshold { 0.0 } else { d }).collect()
}

/// Σℓ_p cost of a clustering under a raw distance matrix.
pub fn sigma_lp_cost_raw(dist: &[f64], n: usize, centers: &[usize], clusters: &[Vec<usize>], p: f64) -> f64 {
    centers
        .iter()
        .zip(clusters)
        .map(|(&c, members)| super::lp_norm(members.iter().map(|&x| dist[x * n + c]), p))
        .sum()
}
