//! Δ-bounded random partitions.
//!
//! [`ckr_partition`] is the Calinescu–Karloff–Rabani decomposition: a uniform
//! random order of the points and one radius `R ~ U[Δ/4, Δ/2]`; every point
//! joins the block of the first point in the order within distance `R`.
//! [`quotient_partition`] first glues together points joined by chains of
//! hops of length at most `Δ/(2n)`, partitions the quotient at scale `Δ/2`
//! and pulls the blocks back, so such pairs are never separated.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::metric::{quotient_at_scale, FiniteMetric, QuotientMap};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSample {
    /// 16-adic scale index when the partition was drawn at `Δ = 16^k`.
    pub scale_index: Option<i32>,
    pub delta: f64,
    pub blocks: Vec<Vec<usize>>,
    pub block_of: Vec<usize>,
}

impl PartitionSample {
    fn from_assignment(delta: f64, block_of: Vec<usize>, blocks: usize) -> Self {
        let mut members = vec![Vec::new(); blocks];
        for (x, &b) in block_of.iter().enumerate() {
            members[b].push(x);
        }
        PartitionSample { scale_index: None, delta, blocks: members, block_of }
    }

    pub fn same_block(&self, x: usize, y: usize) -> bool {
        self.block_of[x] == self.block_of[y]
    }

    /// Largest block diameter under `m`.
    pub fn max_block_diameter(&self, m: &FiniteMetric) -> f64 {
        self.blocks
            .iter()
            .map(|b| {
                b.iter()
                    .flat_map(|&x| b.iter().map(move |&y| (x, y)))
                    .map(|(x, y)| m.d(x, y))
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Checks disjoint cover and `diam(block) <= delta`.
    pub fn check(&self, m: &FiniteMetric) -> Result<()> {
        let n = m.len();
        let mut seen = vec![false; n];
        for (b, block) in self.blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::NotAPartition(format!("block {b} is empty")));
            }
            for &x in block {
                if x >= n || seen[x] || self.block_of[x] != b {
                    return Err(Error::NotAPartition(format!("point {x} misplaced")));
                }
                seen[x] = true;
            }
        }
        if let Some(x) = seen.iter().position(|s| !s) {
            return Err(Error::NotAPartition(format!("point {x} is uncovered")));
        }
        let diam = self.max_block_diameter(m);
        if diam > self.delta {
            return Err(Error::NotAPartition(format!(
                "block diameter {diam} exceeds bound {}",
                self.delta
            )));
        }
        Ok(())
    }

    /// Debug dump: list of blocks of point labels.
    pub fn to_json(&self, m: &FiniteMetric) -> Value {
        let blocks: Vec<Vec<&str>> =
            self.blocks.iter().map(|b| b.iter().map(|&x| m.label(x)).collect()).collect();
        json!({ "scale_index": self.scale_index, "delta": self.delta, "blocks": blocks })
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(Error::BadParameter(format!("scale must be positive and finite, got {delta}")))
    }
}

pub fn ckr_partition(m: &FiniteMetric, delta: f64, rng: &mut Rng) -> Result<PartitionSample> {
    check_delta(delta)?;
    let n = m.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let radius = rng.gen_range(delta / 4.0..=delta / 2.0);
    let mut block_of = vec![usize::MAX; n];
    let mut blocks = 0;
    let mut assigned = 0;
    for &c in &order {
        if assigned == n {
            break;
        }
        let row = m.row(c);
        let mut used = false;
        for y in 0..n {
            if block_of[y] == usize::MAX && row[y] <= radius {
                block_of[y] = blocks;
                assigned += 1;
                used = true;
            }
        }
        if used {
            blocks += 1;
        }
    }
    Ok(PartitionSample::from_assignment(delta, block_of, blocks))
}

/// Draws a quotient-lifted partition from a precomputed quotient.
pub fn quotient_partition_with(q: &QuotientMap<'_>, rng: &mut Rng) -> Result<PartitionSample> {
    let inner = ckr_partition(&q.quotient, q.delta / 2.0, rng)?;
    let block_of: Vec<usize> = q.block_of.iter().map(|&w| inner.block_of[w]).collect();
    Ok(PartitionSample::from_assignment(q.delta, block_of, inner.blocks.len()))
}

pub fn quotient_partition(m: &FiniteMetric, delta: f64, rng: &mut Rng) -> Result<PartitionSample> {
    let q = quotient_at_scale(m, delta)?;
    quotient_partition_with(&q, rng)
}

/// Monte-Carlo estimate of `Pr[B(x, t) ⊄ P(x)]` over CKR partitions.
pub fn estimate_padding(
    m: &FiniteMetric,
    delta: f64,
    t: f64,
    x: usize,
    trials: usize,
    rng: &mut Rng,
) -> Result<f64> {
    check_delta(delta)?;
    if !(t > 0.0 && t <= delta / 8.0) {
        return Err(Error::BadParameter(format!("ball radius must lie in (0, delta/8], got {t}")));
    }
    if trials == 0 {
        return Err(Error::BadParameter("trials must be at least 1".into()));
    }
    if x >= m.len() {
        return Err(Error::UnknownPoint(x.to_string()));
    }
    let ball: Vec<usize> = (0..m.len()).filter(|&y| m.d(x, y) <= t).collect();
    let mut cut = 0usize;
    for _ in 0..trials {
        let p = ckr_partition(m, delta, rng)?;
        if ball.iter().any(|&y| !p.same_block(x, y)) {
            cut += 1;
        }
    }
    Ok(cut as f64 / trials as f64)
}

/// Right-hand side of the padding inequality for CKR partitions, counting
/// measure: `16t/Δ · ln(|B(x,Δ)| / |B(x,Δ/8)|)`.
pub fn padding_bound(m: &FiniteMetric, delta: f64, t: f64, x: usize) -> f64 {
    let outer = m.ball_size(x, delta) as f64;
    let inner = m.ball_size(x, delta / 8.0) as f64;
    16.0 * t / delta * (outer / inner).ln()
}

/// The weaker bound for quotient-lifted partitions:
/// `32t/Δ · ln(|B(x,Δ)| / |B(x,Δ/16)|)`, valid for `t <= Δ/16`.
pub fn quotient_padding_bound(m: &FiniteMetric, delta: f64, t: f64, x: usize) -> f64 {
    let outer = m.ball_size(x, delta) as f64;
    let inner = m.ball_size(x, delta / 16.0) as f64;
    32.0 * t / delta * (outer / inner).ln()
}
