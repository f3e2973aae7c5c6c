//! Ultrametrics as Δ-labelled binary trees: `d(u, v) = Δ(lca(u, v))`.

use std::collections::HashSet;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::metric::FiniteMetric;
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub delta: f64,
    pub children: Option<[usize; 2]>,
    pub parent: Option<usize>,
}

/// Rooted binary tree whose leaves are the points. Node ids `0..n` are the
/// leaves, with leaf `i` carrying label `labels[i]`; internal nodes follow.
#[derive(Debug, Clone, PartialEq)]
pub struct UltrametricTree {
    labels: Vec<String>,
    nodes: Vec<Node>,
    root: usize,
    depth: Vec<usize>,
    /// Leaves in depth-first order; every subtree owns a contiguous range.
    leaf_order: Vec<usize>,
    range: Vec<(usize, usize)>,
}

/// Nested description of a tree, used for JSON and for building by hand.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Leaf(String),
    Node(f64, Box<Shape>, Box<Shape>),
}

impl Shape {
    pub fn leaf(label: impl Into<String>) -> Self {
        Shape::Leaf(label.into())
    }

    pub fn node(delta: f64, left: Shape, right: Shape) -> Self {
        Shape::Node(delta, Box::new(left), Box::new(right))
    }
}

impl UltrametricTree {
    /// Builds from a nested shape. Leaves are numbered in left-to-right order.
    pub fn from_shape(shape: &Shape) -> Result<Self> {
        fn count(s: &Shape) -> usize {
            match s {
                Shape::Leaf(_) => 1,
                Shape::Node(_, a, b) => count(a) + count(b),
            }
        }
        let n = count(shape);
        let mut labels = Vec::with_capacity(n);
        let mut nodes: Vec<Node> = Vec::with_capacity(2 * n);
        // Reserve leaf slots so leaves get ids 0..n.
        for _ in 0..n {
            nodes.push(Node { delta: 0.0, children: None, parent: None });
        }
        fn build(s: &Shape, labels: &mut Vec<String>, nodes: &mut Vec<Node>) -> usize {
            match s {
                Shape::Leaf(l) => {
                    labels.push(l.clone());
                    labels.len() - 1
                }
                Shape::Node(delta, a, b) => {
                    let ia = build(a, labels, nodes);
                    let ib = build(b, labels, nodes);
                    let id = nodes.len();
                    nodes.push(Node { delta: *delta, children: Some([ia, ib]), parent: None });
                    nodes[ia].parent = Some(id);
                    nodes[ib].parent = Some(id);
                    id
                }
            }
        }
        let root = build(shape, &mut labels, &mut nodes);
        Self::assemble(labels, nodes, root)
    }

    pub fn to_shape(&self) -> Shape {
        fn go(t: &UltrametricTree, v: usize) -> Shape {
            match t.nodes[v].children {
                None => Shape::Leaf(t.labels[v].clone()),
                Some([a, b]) => Shape::node(t.nodes[v].delta, go(t, a), go(t, b)),
            }
        }
        go(self, self.root)
    }

    /// Checks structure and labels, then precomputes depths and leaf ranges.
    fn assemble(labels: Vec<String>, nodes: Vec<Node>, root: usize) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::MalformedTree("tree has no leaves".into()));
        }
        let mut seen = HashSet::with_capacity(n);
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::DuplicateLabel(l.clone()));
            }
        }
        if nodes.len() != 2 * n - 1 {
            return Err(Error::MalformedTree(format!(
                "{} nodes for {n} leaves; a binary tree needs {}",
                nodes.len(),
                2 * n - 1
            )));
        }
        for (v, node) in nodes.iter().enumerate() {
            if !node.delta.is_finite() || node.delta < 0.0 {
                return Err(Error::MalformedTree(format!("node {v} has invalid label {}", node.delta)));
            }
            match node.children {
                None if v >= n => {
                    return Err(Error::MalformedTree(format!("internal node {v} has no children")))
                }
                Some(_) if v < n => {
                    return Err(Error::MalformedTree(format!("leaf {v} has children")))
                }
                None if node.delta != 0.0 => {
                    return Err(Error::MalformedTree(format!("leaf {v} has nonzero label")))
                }
                Some([a, b]) => {
                    if node.delta <= 0.0 {
                        return Err(Error::MalformedTree(format!(
                            "internal node {v} must have a positive label"
                        )));
                    }
                    for c in [a, b] {
                        if nodes[c].delta > node.delta {
                            return Err(Error::MalformedTree(format!(
                                "label increases from node {v} to child {c}"
                            )));
                        }
                    }
                }
                None => {}
            }
        }
        let mut depth = vec![usize::MAX; nodes.len()];
        let mut range = vec![(0, 0); nodes.len()];
        let mut leaf_order = Vec::with_capacity(n);
        // Iterative DFS: (node, entered?)
        let mut stack = vec![(root, false)];
        depth[root] = 0;
        while let Some((v, done)) = stack.pop() {
            match (nodes[v].children, done) {
                (None, _) => {
                    range[v] = (leaf_order.len(), leaf_order.len() + 1);
                    leaf_order.push(v);
                }
                (Some([a, b]), false) => {
                    range[v].0 = leaf_order.len();
                    stack.push((v, true));
                    for c in [b, a] {
                        if depth[c] != usize::MAX || nodes[c].parent != Some(v) {
                            return Err(Error::MalformedTree(format!("node {c} is reached twice")));
                        }
                        depth[c] = depth[v] + 1;
                        stack.push((c, false));
                    }
                }
                (Some(_), true) => range[v].1 = leaf_order.len(),
            }
        }
        if leaf_order.len() != n || depth.contains(&usize::MAX) {
            return Err(Error::MalformedTree("tree is not connected".into()));
        }
        Ok(UltrametricTree { labels, nodes, root, depth, leaf_order, range })
    }

    /// Single-linkage tree of a metric that satisfies the strong triangle
    /// inequality (checked within the metric tolerance).
    pub fn from_distance_matrix(m: &FiniteMetric) -> Result<Self> {
        check_ultrametric(m)?;
        Ok(Self::single_linkage(m))
    }

    /// Single-linkage agglomeration. Clusters merge in order of the minimum
    /// cross distance, ties by the lower endpoint indices; each merge creates
    /// one binary node, so a k-way merge at one level becomes a chain of
    /// equal-label nodes. On an ultrametric input the induced distances equal
    /// the input entries exactly.
    pub(crate) fn single_linkage(m: &FiniteMetric) -> Self {
        let n = m.len();
        let labels = m.labels().to_vec();
        let mut nodes: Vec<Node> =
            (0..n).map(|_| Node { delta: 0.0, children: None, parent: None }).collect();
        if n == 1 {
            return Self::assemble(labels, nodes, 0).expect("single leaf");
        }
        // Prim on the dense graph.
        let mut in_tree = vec![false; n];
        let mut best = vec![f64::INFINITY; n];
        let mut from = vec![0usize; n];
        in_tree[0] = true;
        for j in 1..n {
            best[j] = m.d(0, j);
        }
        let mut edges = Vec::with_capacity(n - 1);
        for _ in 1..n {
            let mut pick = usize::MAX;
            for j in 0..n {
                if !in_tree[j] && (pick == usize::MAX || best[j] < best[pick]) {
                    pick = j;
                }
            }
            let u = from[pick];
            edges.push((best[pick], u.min(pick), u.max(pick)));
            in_tree[pick] = true;
            let row = m.row(pick);
            for j in 0..n {
                if !in_tree[j] && row[j] < best[j] {
                    best[j] = row[j];
                    from[j] = pick;
                }
            }
        }
        edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut rep: Vec<usize> = (0..n).collect();
        let mut cluster_node: Vec<usize> = (0..n).collect();
        fn find(rep: &mut [usize], mut x: usize) -> usize {
            while rep[x] != x {
                rep[x] = rep[rep[x]];
                x = rep[x];
            }
            x
        }
        for (w, a, b) in edges {
            let (ra, rb) = (find(&mut rep, a), find(&mut rep, b));
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            let id = nodes.len();
            let (left, right) = (cluster_node[lo], cluster_node[hi]);
            nodes.push(Node { delta: w, children: Some([left, right]), parent: None });
            nodes[left].parent = Some(id);
            nodes[right].parent = Some(id);
            rep[hi] = lo;
            cluster_node[lo] = id;
        }
        let root = nodes.len() - 1;
        Self::assemble(labels, nodes, root).expect("single linkage yields a valid tree")
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn delta(&self, v: usize) -> f64 {
        self.nodes[v].delta
    }

    pub fn children(&self, v: usize) -> Option<[usize; 2]> {
        self.nodes[v].children
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.nodes[v].parent
    }

    pub fn is_leaf(&self, v: usize) -> bool {
        self.nodes[v].children.is_none()
    }

    /// Leaves (point indices) of the subtree rooted at `v`.
    pub fn leaves(&self, v: usize) -> &[usize] {
        let (lo, hi) = self.range[v];
        &self.leaf_order[lo..hi]
    }

    pub fn leaf_count(&self, v: usize) -> usize {
        let (lo, hi) = self.range[v];
        hi - lo
    }

    /// Node ids with children before parents.
    pub fn postorder(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![(self.root, false)];
        while let Some((v, done)) = stack.pop() {
            match self.nodes[v].children {
                Some([a, b]) if !done => {
                    stack.push((v, true));
                    stack.push((b, false));
                    stack.push((a, false));
                }
                _ => out.push(v),
            }
        }
        out
    }

    pub fn lca(&self, mut u: usize, mut v: usize) -> usize {
        while self.depth[u] > self.depth[v] {
            u = self.nodes[u].parent.expect("non-root has a parent");
        }
        while self.depth[v] > self.depth[u] {
            v = self.nodes[v].parent.expect("non-root has a parent");
        }
        while u != v {
            u = self.nodes[u].parent.expect("non-root has a parent");
            v = self.nodes[v].parent.expect("non-root has a parent");
        }
        u
    }

    /// Distance between leaves `u` and `v` (point indices).
    pub fn dist(&self, u: usize, v: usize) -> f64 {
        if u == v {
            0.0
        } else {
            self.nodes[self.lca(u, v)].delta
        }
    }

    /// Distance between two points named by label.
    pub fn distance(&self, u: &str, v: &str) -> Result<f64> {
        let iu = self.index_of(u).ok_or_else(|| Error::UnknownPoint(u.to_string()))?;
        let iv = self.index_of(v).ok_or_else(|| Error::UnknownPoint(v.to_string()))?;
        Ok(self.dist(iu, iv))
    }

    /// Full induced distance matrix, row-major.
    pub fn distance_matrix(&self) -> Vec<f64> {
        let n = self.len();
        let mut dist = vec![0.0; n * n];
        for v in n..self.nodes.len() {
            if let Some([a, b]) = self.nodes[v].children {
                let delta = self.nodes[v].delta;
                for &x in self.leaves(a) {
                    for &y in self.leaves(b) {
                        dist[x * n + y] = delta;
                        dist[y * n + x] = delta;
                    }
                }
            }
        }
        dist
    }

    pub fn to_metric(&self) -> FiniteMetric {
        FiniteMetric::from_trusted(self.labels.clone(), self.distance_matrix())
    }

    /// Nested JSON: `{"delta": x, "children": [a, b]}`, leaves `{"leaf": "label"}`.
    pub fn to_json(&self) -> Value {
        fn go(s: &Shape) -> Value {
            match s {
                Shape::Leaf(l) => json!({ "leaf": l }),
                Shape::Node(d, a, b) => json!({ "delta": d, "children": [go(a), go(b)] }),
            }
        }
        go(&self.to_shape())
    }

    pub fn from_json(value: &Value) -> Result<Self> {
        fn go(v: &Value) -> Result<Shape> {
            let obj = v
                .as_object()
                .ok_or_else(|| Error::MalformedTree("tree node must be an object".into()))?;
            if let Some(l) = obj.get("leaf") {
                let l = l
                    .as_str()
                    .ok_or_else(|| Error::MalformedTree("leaf label must be a string".into()))?;
                return Ok(Shape::leaf(l));
            }
            let delta = obj
                .get("delta")
                .and_then(Value::as_f64)
                .ok_or_else(|| Error::MalformedTree("internal node needs a numeric delta".into()))?;
            let children = obj
                .get("children")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::MalformedTree("internal node needs children".into()))?;
            if children.len() != 2 {
                return Err(Error::MalformedTree(format!(
                    "internal node has {} children, expected 2",
                    children.len()
                )));
            }
            Ok(Shape::node(delta, go(&children[0])?, go(&children[1])?))
        }
        Self::from_shape(&go(value)?)
    }
}

/// Brute-force strong triangle check; reports the first violating triple in
/// lexicographic `(i < j, k)` order.
pub fn check_ultrametric(m: &FiniteMetric) -> Result<()> {
    let n = m.len();
    for i in 0..n {
        for j in i + 1..n {
            let dij = m.d(i, j);
            for k in 0..n {
                if k == i || k == j {
                    continue;
                }
                let bound = m.d(i, k).max(m.d(k, j));
                if dij > bound * (1.0 + crate::metric::TRIANGLE_RTOL) {
                    return Err(Error::NotUltrametric { i, j, k });
                }
            }
        }
    }
    Ok(())
}

/// Exact strong-triangle check on a raw matrix, no tolerance.
pub fn is_exact_ultrametric(dist: &[f64], n: usize) -> bool {
    (0..n).all(|i| {
        (0..n).all(|j| (0..n).all(|k| dist[i * n + j] <= dist[i * n + k].max(dist[k * n + j])))
    })
}

/// Random ultrametric on `n` points with integer labels: clusters are merged
/// in random pairs and each merge raises the label by 0 to 3.
pub fn gen_random_ultrametric(n: usize, seed: u64) -> Result<UltrametricTree> {
    use rand::Rng as _;
    if n < 1 {
        return Err(Error::TooSmall { what: "point count", min: 1, got: n });
    }
    let mut rng = rng_from_seed(seed);
    let mut nodes: Vec<Node> = (0..n).map(|_| Node { delta: 0.0, children: None, parent: None }).collect();
    let mut roots: Vec<usize> = (0..n).collect();
    let mut delta = rng.gen_range(1..=4) as f64;
    while roots.len() > 1 {
        let a = roots.swap_remove(rng.gen_range(0..roots.len()));
        let b = roots.swap_remove(rng.gen_range(0..roots.len()));
        let id = nodes.len();
        nodes.push(Node { delta, children: Some([a, b]), parent: None });
        nodes[a].parent = Some(id);
        nodes[b].parent = Some(id);
        roots.push(id);
        delta += rng.gen_range(0..=3) as f64;
    }
    let labels = (0..n).map(|i| i.to_string()).collect();
    UltrametricTree::assemble(labels, nodes, roots[0])
}
