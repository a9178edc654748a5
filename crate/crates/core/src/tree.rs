//! Aggregation trees: layered groupings of hypotheses, built from a distance
//! matrix or a one-dimensional ordering.
//!
//! Layer 1 (index 0 in [`AggregationTree::layers`]) holds the `m` singleton
//! nodes. Each node on a higher layer lists its children by position in the
//! layer directly below. Within every layer built here, nodes are sorted by
//! their smallest member.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};
use std::fmt;

use crate::error::{Error, Result};
use crate::eval::quantile_sorted;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    /// Positions of the children in the layer below; empty on layer 1.
    pub children: Vec<usize>,
    /// 0-based hypothesis indices covered by the node, ascending.
    pub members: Vec<usize>,
}

impl Node {
    fn leaf(i: usize) -> Self {
        Node {
            children: Vec::new(),
            members: vec![i],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregationTree {
    m: usize,
    max_children: usize,
    layers: Vec<Vec<Node>>,
}

impl AggregationTree {
    /// Builds a tree from child lists for layers 2..L and validates it.
    ///
    /// `upper_layers[k]` describes layer `k + 2`; each node is the list of
    /// 0-based child positions in the layer below.
    pub fn from_children(
        m: usize,
        max_children: usize,
        upper_layers: Vec<Vec<Vec<usize>>>,
    ) -> Result<Self> {
        if m == 0 {
            return Err(Error::domain("a tree needs at least one hypothesis"));
        }
        let mut layers = vec![(0..m).map(Node::leaf).collect::<Vec<_>>()];
        for (k, nodes) in upper_layers.into_iter().enumerate() {
            let below = &layers[k];
            let mut built = Vec::with_capacity(nodes.len());
            for (pos, children) in nodes.into_iter().enumerate() {
                let mut members = Vec::new();
                for &c in &children {
                    let child = below.get(c).ok_or_else(|| {
                        Error::InvalidTree(vec![Violation::ChildOutOfRange {
                            layer: k + 2,
                            node: pos,
                            child: c,
                        }])
                    })?;
                    members.extend_from_slice(&child.members);
                }
                members.sort_unstable();
                members.dedup();
                built.push(Node { children, members });
            }
            layers.push(built);
        }
        let tree = Self::from_parts_unchecked(m, max_children, layers);
        let violations = validate_tree(&tree);
        if violations.is_empty() {
            Ok(tree)
        } else {
            Err(Error::InvalidTree(violations))
        }
    }

    /// Assembles a tree without validation; see [`validate_tree`].
    pub fn from_parts_unchecked(m: usize, max_children: usize, layers: Vec<Vec<Node>>) -> Self {
        Self {
            m,
            max_children,
            layers,
        }
    }

    /// The tree with only layer 1.
    pub fn singletons(m: usize, max_children: usize) -> Self {
        Self {
            m,
            max_children,
            layers: vec![(0..m).map(Node::leaf).collect()],
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn max_children(&self) -> usize {
        self.max_children
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Vec<Node>] {
        &self.layers
    }

    /// Nodes of the 1-based layer `layer`.
    pub fn layer(&self, layer: usize) -> &[Node] {
        &self.layers[layer - 1]
    }

    /// The first `num_layers` layers; a no-op if the tree is already shorter.
    pub fn truncated(&self, num_layers: usize) -> Self {
        let keep = num_layers.max(1).min(self.layers.len());
        Self {
            m: self.m,
            max_children: self.max_children,
            layers: self.layers[..keep].to_vec(),
        }
    }

    /// Child lists of layers 2..L.
    pub fn upper_children(&self) -> Vec<Vec<Vec<usize>>> {
        self.layers[1..]
            .iter()
            .map(|l| l.iter().map(|n| n.children.clone()).collect())
            .collect()
    }
}

/// A failed tree invariant. Layers are 1-based, nodes 0-based positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    MaxChildrenTooSmall {
        max_children: usize,
    },
    EmptyTree,
    BadLeafLayer {
        detail: String,
    },
    ChildOutOfRange {
        layer: usize,
        node: usize,
        child: usize,
    },
    ChildCount {
        layer: usize,
        node: usize,
        count: usize,
        max: usize,
    },
    DuplicateChild {
        layer: usize,
        node: usize,
        child: usize,
    },
    Overlap {
        layer: usize,
        first: usize,
        second: usize,
    },
    Coverage {
        layer: usize,
        node: usize,
    },
    Orphan {
        layer: usize,
        node: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MaxChildrenTooSmall { max_children } => {
                write!(f, "max_children must be at least 2, got {max_children}")
            }
            Violation::EmptyTree => write!(f, "tree has no layers"),
            Violation::BadLeafLayer { detail } => write!(f, "layer 1: {detail}"),
            Violation::ChildOutOfRange { layer, node, child } => write!(
                f,
                "layer {layer} node {}: child {} does not exist in layer {}",
                node + 1,
                child + 1,
                layer - 1
            ),
            Violation::ChildCount {
                layer,
                node,
                count,
                max,
            } => write!(
                f,
                "layer {layer} node {}: {count} children, allowed 1..={max}",
                node + 1
            ),
            Violation::DuplicateChild { layer, node, child } => write!(
                f,
                "layer {layer} node {}: child {} listed more than once",
                node + 1,
                child + 1
            ),
            Violation::Overlap {
                layer,
                first,
                second,
            } => write!(
                f,
                "layer {layer}: nodes {} and {} share hypotheses",
                first + 1,
                second + 1
            ),
            Violation::Coverage { layer, node } => write!(
                f,
                "layer {layer} node {}: hypothesis set differs from the union of its children",
                node + 1
            ),
            Violation::Orphan { layer, node } => write!(
                f,
                "layer {layer} node {}: no parent on layer {}",
                node + 1,
                layer + 1
            ),
        }
    }
}

/// Checks every tree invariant and returns the violations found.
///
/// Each fault is reported once: a child claimed by two parents shows up as
/// an overlap between those parents, not additionally as a parentage error.
pub fn validate_tree(tree: &AggregationTree) -> Vec<Violation> {
    let mut out = Vec::new();
    if tree.max_children < 2 {
        out.push(Violation::MaxChildrenTooSmall {
            max_children: tree.max_children,
        });
    }
    let Some(leaves) = tree.layers.first() else {
        out.push(Violation::EmptyTree);
        return out;
    };
    if leaves.len() != tree.m {
        out.push(Violation::BadLeafLayer {
            detail: format!("{} nodes, expected {}", leaves.len(), tree.m),
        });
    }
    for (i, node) in leaves.iter().enumerate() {
        if !node.children.is_empty() || node.members != [i] {
            out.push(Violation::BadLeafLayer {
                detail: format!("node {} is not the singleton {{{}}}", i + 1, i + 1),
            });
        }
    }

    // Hypothesis sets implied by the child structure alone; stored member
    // lists are compared against these so one bad list is reported once.
    let mut derived: Vec<BTreeSet<usize>> =
        (0..leaves.len()).map(|i| BTreeSet::from([i])).collect();
    for l in 1..tree.layers.len() {
        let layer = l + 1;
        let below_len = tree.layers[l - 1].len();
        let nodes = &tree.layers[l];
        let mut parent_count = vec![0usize; below_len];
        let mut next_derived = Vec::with_capacity(nodes.len());
        for (pos, node) in nodes.iter().enumerate() {
            let count = node.children.len();
            if count == 0 || count > tree.max_children {
                out.push(Violation::ChildCount {
                    layer,
                    node: pos,
                    count,
                    max: tree.max_children,
                });
            }
            let mut seen = BTreeSet::new();
            let mut union = BTreeSet::new();
            let mut in_range = true;
            for &c in &node.children {
                if c >= below_len {
                    out.push(Violation::ChildOutOfRange {
                        layer,
                        node: pos,
                        child: c,
                    });
                    in_range = false;
                    continue;
                }
                if !seen.insert(c) {
                    out.push(Violation::DuplicateChild {
                        layer,
                        node: pos,
                        child: c,
                    });
                    continue;
                }
                parent_count[c] += 1;
                union.extend(derived[c].iter().copied());
            }
            let members: BTreeSet<usize> = node.members.iter().copied().collect();
            if in_range && (members != union || members.len() != node.members.len()) {
                out.push(Violation::Coverage { layer, node: pos });
            }
            next_derived.push(union);
        }
        // pairwise disjointness via an owner map over hypotheses
        let mut owner: Vec<Option<usize>> = vec![None; tree.m];
        let mut reported = BTreeSet::new();
        for (pos, set) in next_derived.iter().enumerate() {
            for &h in set {
                if h >= tree.m {
                    continue;
                }
                match owner[h] {
                    Some(prev) => {
                        if reported.insert((prev, pos)) {
                            out.push(Violation::Overlap {
                                layer,
                                first: prev,
                                second: pos,
                            });
                        }
                    }
                    None => owner[h] = Some(pos),
                }
            }
        }
        for (c, &n) in parent_count.iter().enumerate() {
            if n == 0 {
                out.push(Violation::Orphan {
                    layer: layer - 1,
                    node: c,
                });
            }
        }
        derived = next_derived;
    }
    out
}

/// `L = max(1, ⌊log_M(m / c_m)⌋)`, computed in exact integer arithmetic.
pub fn max_layers(m: usize, max_children: usize, preferred_top_nodes: usize) -> Result<usize> {
    if max_children < 2 {
        return Err(Error::domain(format!(
            "max_children must be at least 2, got {max_children}"
        )));
    }
    if preferred_top_nodes == 0 || preferred_top_nodes > m {
        return Err(Error::domain(format!(
            "preferred top-layer node count must lie in 1..={m}, got {preferred_top_nodes}"
        )));
    }
    let mut k = 0usize;
    let mut span = preferred_top_nodes as u128;
    while span * max_children as u128 <= m as u128 {
        span *= max_children as u128;
        k += 1;
    }
    Ok(k.max(1))
}

/// Symmetric `m × m` matrix of nonnegative finite distances with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    m: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    /// `rows` must be square; symmetry is checked to 1e-12.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = rows.len();
        if m == 0 {
            return Err(Error::domain("distance matrix is empty"));
        }
        let mut data = Vec::with_capacity(m * m);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != m {
                return Err(Error::domain(format!(
                    "distance matrix row {} has {} columns, expected {m}",
                    i + 1,
                    row.len()
                )));
            }
            data.extend(row);
        }
        let d = Self { m, data };
        d.check()?;
        Ok(d)
    }

    pub fn from_fn(m: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::domain("distance matrix is empty"));
        }
        let mut data = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                data[i * m + j] = f(i, j);
            }
        }
        let d = Self { m, data };
        d.check()?;
        Ok(d)
    }

    /// Euclidean distances between points in the plane.
    pub fn euclidean(points: &[[f64; 2]]) -> Result<Self> {
        Self::from_fn(points.len(), |i, j| {
            let dx = points[i][0] - points[j][0];
            let dy = points[i][1] - points[j][1];
            dx.hypot(dy)
        })
    }

    fn check(&self) -> Result<()> {
        let m = self.m;
        for i in 0..m {
            for j in 0..m {
                let v = self.get(i, j);
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::domain(format!(
                        "distance ({}, {}) = {v} is not a finite nonnegative number",
                        i + 1,
                        j + 1
                    )));
                }
                if i == j && v != 0.0 {
                    return Err(Error::domain(format!(
                        "distance ({}, {}) on the diagonal must be 0, got {v}",
                        i + 1,
                        j + 1
                    )));
                }
                if j > i && (v - self.get(j, i)).abs() > 1e-12 {
                    return Err(Error::domain(format!(
                        "distance matrix is not symmetric at ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.m + j]
    }
}

/// Greedy average-linkage construction.
///
/// On layer `ℓ` the nodes of layer `ℓ-1` start as singleton clusters. The
/// closest pair of clusters whose average-linkage distance is at most
/// `g^(ℓ)` and whose combined child count is at most `max_children` is
/// merged, distances are updated (Lance–Williams), and the process repeats
/// until no eligible pair remains. Ties in distance go to the pair with the
/// smallest `(min member, min member)` key. Clusters left alone become
/// single-child pass-through parents.
///
/// `thresholds` holds `g^(2)..g^(L)`. When absent, `g^(ℓ)` is the
/// `1 - 2^-(ℓ-1)` type-7 quantile of the nearest-neighbour distances among
/// layer-`ℓ-1` nodes, raised where needed to keep the sequence
/// nondecreasing.
pub fn build_tree_from_distances(
    d: &DistanceMatrix,
    max_children: usize,
    num_layers: usize,
    thresholds: Option<&[f64]>,
) -> Result<AggregationTree> {
    if max_children < 2 {
        return Err(Error::domain(format!(
            "max_children must be at least 2, got {max_children}"
        )));
    }
    if num_layers == 0 {
        return Err(Error::domain("the tree needs at least one layer"));
    }
    if let Some(g) = thresholds {
        if g.len() != num_layers - 1 {
            return Err(Error::domain(format!(
                "{} layers need {} thresholds, got {}",
                num_layers,
                num_layers - 1,
                g.len()
            )));
        }
        if g.iter().any(|&x| !x.is_finite() || x <= 0.0) {
            return Err(Error::domain("thresholds must be positive and finite"));
        }
        if g.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::domain("thresholds must be nondecreasing"));
        }
    }

    let m = d.m();
    let mut tree = AggregationTree::singletons(m, max_children);
    let mut previous_g = 0.0f64;
    for layer in 2..=num_layers {
        let below = tree.layers.last().expect("leaf layer present");
        let linkage = node_linkage(d, below);
        let g = match thresholds {
            Some(g) => g[layer - 2],
            None => {
                let q = 1.0 - 0.5f64.powi(layer as i32 - 1);
                default_threshold(&linkage, below.len(), q).max(previous_g)
            }
        };
        previous_g = g;
        let groups = greedy_merge(below, linkage, g, max_children);
        let nodes = groups
            .into_iter()
            .map(|children| {
                let mut members: Vec<usize> = children
                    .iter()
                    .flat_map(|&c| below[c].members.iter().copied())
                    .collect();
                members.sort_unstable();
                Node { children, members }
            })
            .collect();
        tree.layers.push(nodes);
    }
    Ok(tree)
}

/// Row-major average-linkage distances between the given nodes.
fn node_linkage(d: &DistanceMatrix, nodes: &[Node]) -> Vec<f64> {
    let n = nodes.len();
    let mut owner = vec![0usize; d.m()];
    for (pos, node) in nodes.iter().enumerate() {
        for &h in &node.members {
            owner[h] = pos;
        }
    }
    let mut sums = vec![0.0; n * n];
    for (i, &a) in owner.iter().enumerate() {
        for (j, &b) in owner.iter().enumerate().skip(i + 1) {
            if a != b {
                let v = d.get(i, j);
                sums[a * n + b] += v;
                sums[b * n + a] += v;
            }
        }
    }
    for a in 0..n {
        for b in 0..n {
            let pairs = (nodes[a].members.len() * nodes[b].members.len()) as f64;
            sums[a * n + b] /= pairs;
        }
        sums[a * n + a] = 0.0;
    }
    sums
}

fn default_threshold(linkage: &[f64], n: usize, level: f64) -> f64 {
    if n < 2 {
        return f64::MIN_POSITIVE;
    }
    let mut nearest: Vec<f64> = (0..n)
        .map(|a| {
            (0..n)
                .filter(|&b| b != a)
                .map(|b| linkage[a * n + b])
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    nearest.sort_by(f64::total_cmp);
    quantile_sorted(&nearest, level).max(f64::MIN_POSITIVE)
}

#[derive(Debug, PartialEq)]
struct Candidate {
    dist: f64,
    key: (usize, usize),
    a: usize,
    b: usize,
    versions: (u32, u32),
}

impl Eq for Candidate {}

impl Ord for Candidate {
    // reversed: BinaryHeap is a max-heap and we want the closest pair first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.key.cmp(&self.key))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Cluster {
    children: Vec<usize>,
    size: usize,
    min_member: usize,
    version: u32,
    active: bool,
}

fn greedy_merge(
    below: &[Node],
    mut linkage: Vec<f64>,
    threshold: f64,
    max_children: usize,
) -> Vec<Vec<usize>> {
    let n = below.len();
    let mut clusters: Vec<Cluster> = below
        .iter()
        .enumerate()
        .map(|(pos, node)| Cluster {
            children: vec![pos],
            size: node.members.len(),
            min_member: node.members[0],
            version: 0,
            active: true,
        })
        .collect();

    let candidate = |clusters: &[Cluster], a: usize, b: usize, dist: f64| {
        let (ka, kb) = (clusters[a].min_member, clusters[b].min_member);
        Candidate {
            dist,
            key: (ka.min(kb), ka.max(kb)),
            a,
            b,
            versions: (clusters[a].version, clusters[b].version),
        }
    };

    let mut heap = BinaryHeap::new();
    for a in 0..n {
        for b in (a + 1)..n {
            let dist = linkage[a * n + b];
            if dist <= threshold && max_children >= 2 {
                heap.push(candidate(&clusters, a, b, dist));
            }
        }
    }

    while let Some(c) = heap.pop() {
        let (a, b) = (c.a, c.b);
        if !clusters[a].active
            || !clusters[b].active
            || clusters[a].version != c.versions.0
            || clusters[b].version != c.versions.1
        {
            continue;
        }
        let (sa, sb) = (clusters[a].size as f64, clusters[b].size as f64);
        let moved = std::mem::take(&mut clusters[b].children);
        clusters[b].active = false;
        clusters[a].children.extend(moved);
        clusters[a].size += clusters[b].size;
        clusters[a].min_member = clusters[a].min_member.min(clusters[b].min_member);
        clusters[a].version += 1;
        for k in 0..n {
            if k == a || !clusters[k].active {
                continue;
            }
            let merged = (sa * linkage[a * n + k] + sb * linkage[b * n + k]) / (sa + sb);
            linkage[a * n + k] = merged;
            linkage[k * n + a] = merged;
        }
        let room = clusters[a].children.len();
        if room >= max_children {
            continue;
        }
        for k in 0..n {
            if k == a || !clusters[k].active {
                continue;
            }
            let dist = linkage[a * n + k];
            if dist <= threshold && room + clusters[k].children.len() <= max_children {
                heap.push(candidate(&clusters, a, k, dist));
            }
        }
    }

    let mut groups: Vec<(usize, Vec<usize>)> = clusters
        .into_iter()
        .filter(|c| c.active)
        .map(|mut c| {
            c.children.sort_unstable();
            (c.min_member, c.children)
        })
        .collect();
    groups.sort_unstable_by_key(|(k, _)| *k);
    groups.into_iter().map(|(_, g)| g).collect()
}

/// Tree whose layer `ℓ` groups consecutive rank blocks of size at most
/// `M^(ℓ-1)`.
///
/// `ranks[i]` is the 1-based rank of hypothesis `i`. This is what greedy
/// merging on the one-dimensional distance `|rank_i - rank_j|` produces
/// when ties are broken in rank order, but it is built directly in `O(m)`
/// so orderings with tens of thousands of entries need no `m × m` matrix.
pub fn build_tree_from_ordering(
    ranks: &[usize],
    max_children: usize,
    num_layers: usize,
) -> Result<AggregationTree> {
    if max_children < 2 {
        return Err(Error::domain(format!(
            "max_children must be at least 2, got {max_children}"
        )));
    }
    if num_layers == 0 {
        return Err(Error::domain("the tree needs at least one layer"));
    }
    let m = ranks.len();
    if m == 0 {
        return Err(Error::domain("ordering is empty"));
    }
    let mut by_rank = vec![usize::MAX; m];
    for (i, &r) in ranks.iter().enumerate() {
        if r == 0 || r > m || by_rank[r - 1] != usize::MAX {
            return Err(Error::domain(format!(
                "ranks must be a permutation of 1..={m}; hypothesis {} has rank {r}",
                i + 1
            )));
        }
        by_rank[r - 1] = i;
    }

    // layer 1 stays indexed by hypothesis; rank order enters at layer 2
    let mut tree = AggregationTree::singletons(m, max_children);
    let mut order: Vec<usize> = by_rank;
    for _ in 2..=num_layers {
        let below = tree.layers.last().expect("leaf layer present");
        let nodes: Vec<Node> = order
            .chunks(max_children)
            .map(|chunk| {
                let mut members: Vec<usize> = chunk
                    .iter()
                    .flat_map(|&c| below[c].members.iter().copied())
                    .collect();
                members.sort_unstable();
                Node {
                    children: chunk.to_vec(),
                    members,
                }
            })
            .collect();
        order = (0..nodes.len()).collect();
        tree.layers.push(nodes);
    }
    Ok(tree)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[f64]) -> DistanceMatrix {
        DistanceMatrix::from_fn(points.len(), |i, j| (points[i] - points[j]).abs()).unwrap()
    }

    fn sets(tree: &AggregationTree, layer: usize) -> Vec<Vec<usize>> {
        tree.layer(layer)
            .iter()
            .map(|n| n.members.clone())
            .collect()
    }

    #[test]
    fn max_layers_examples() {
        assert_eq!(max_layers(1000, 2, 5).unwrap(), 7);
        assert_eq!(max_layers(1000, 2, 1000).unwrap(), 1);
        assert_eq!(max_layers(1024, 2, 1).unwrap(), 10);
        assert_eq!(max_layers(22283, 2, 5).unwrap(), 12);
        assert!(max_layers(10, 2, 11).is_err());
        assert!(max_layers(10, 1, 1).is_err());
    }

    #[test]
    fn distances_merge_close_pairs() {
        let t =
            build_tree_from_distances(&line(&[0.0, 1.0, 10.0, 11.0]), 2, 2, Some(&[2.0])).unwrap();
        assert_eq!(sets(&t, 2), vec![vec![0, 1], vec![2, 3]]);
        assert!(validate_tree(&t).is_empty());
    }

    #[test]
    fn distances_single_layer_is_leaves() {
        let t = build_tree_from_distances(&line(&[0.0, 1.0, 10.0]), 2, 1, None).unwrap();
        assert_eq!(t.num_layers(), 1);
        assert_eq!(sets(&t, 1), vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn distances_beyond_threshold_pass_through() {
        let t = build_tree_from_distances(&line(&[0.0, 100.0, 200.0, 300.0]), 2, 2, Some(&[1.0]))
            .unwrap();
        assert_eq!(t.layer(2).len(), 4);
        assert!(t.layer(2).iter().all(|n| n.children.len() == 1));
    }

    #[test]
    fn greedy_prefers_nearest_pair() {
        // 1-2 at 0.5 beats 0-1 at 1.0; 0 is left alone
        let t =
            build_tree_from_distances(&line(&[0.0, 1.0, 1.5, 5.0]), 2, 2, Some(&[1.2])).unwrap();
        assert_eq!(sets(&t, 2), vec![vec![0], vec![1, 2], vec![3]]);
    }

    #[test]
    fn ties_break_by_smallest_indices() {
        // 0-1 and 1-2 both at distance 1
        let t = build_tree_from_distances(&line(&[0.0, 1.0, 2.0]), 2, 2, Some(&[1.0])).unwrap();
        assert_eq!(sets(&t, 2), vec![vec![0, 1], vec![2]]);
    }

    #[test]
    fn larger_fanout_uses_average_linkage() {
        // with M = 3, {0,1} then 2 joins at mean distance (2 + 1)/2 = 1.5
        let t =
            build_tree_from_distances(&line(&[0.0, 1.0, 2.0, 9.0]), 3, 2, Some(&[1.5])).unwrap();
        assert_eq!(sets(&t, 2), vec![vec![0, 1, 2], vec![3]]);
        let t =
            build_tree_from_distances(&line(&[0.0, 1.0, 2.0, 9.0]), 3, 2, Some(&[1.4])).unwrap();
        assert_eq!(sets(&t, 2), vec![vec![0, 1], vec![2], vec![3]]);
    }

    #[test]
    fn threshold_validation() {
        let d = line(&[0.0, 1.0, 2.0]);
        assert!(build_tree_from_distances(&d, 2, 3, Some(&[1.0])).is_err());
        assert!(build_tree_from_distances(&d, 2, 3, Some(&[2.0, 1.0])).is_err());
        assert!(build_tree_from_distances(&d, 2, 2, Some(&[0.0])).is_err());
        assert!(build_tree_from_distances(&d, 1, 2, Some(&[1.0])).is_err());
    }

    #[test]
    fn distance_matrix_validation() {
        assert!(DistanceMatrix::from_rows(vec![vec![0.0, 1.0], vec![1.1, 0.0]]).is_err());
        assert!(DistanceMatrix::from_rows(vec![vec![0.5, 1.0], vec![1.0, 0.0]]).is_err());
        assert!(DistanceMatrix::from_rows(vec![vec![0.0, -1.0], vec![-1.0, 0.0]]).is_err());
        assert!(DistanceMatrix::from_rows(vec![vec![0.0, f64::NAN], vec![f64::NAN, 0.0]]).is_err());
        assert!(DistanceMatrix::from_rows(vec![vec![0.0, 1.0]]).is_err());
        assert!(DistanceMatrix::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).is_ok());
    }

    #[test]
    fn ordering_examples() {
        let t = build_tree_from_ordering(&[1, 2, 3, 4], 2, 2).unwrap();
        assert_eq!(sets(&t, 2), vec![vec![0, 1], vec![2, 3]]);
        let t = build_tree_from_ordering(&[2, 1, 4, 3], 2, 2).unwrap();
        assert_eq!(sets(&t, 2), vec![vec![0, 1], vec![2, 3]]);
        let t = build_tree_from_ordering(&[1, 2, 3, 4, 5], 2, 2).unwrap();
        assert_eq!(t.layer(2).len(), 3);
        assert_eq!(t.layer(2)[2].children, vec![4]);
        assert!(validate_tree(&t).is_empty());
    }

    #[test]
    fn ordering_blocks_follow_rank() {
        // hypothesis 3 is ranked first, so it pairs with rank-2 hypothesis 1
        let t = build_tree_from_ordering(&[2, 4, 1, 3], 2, 3).unwrap();
        assert_eq!(sets(&t, 2), vec![vec![0, 2], vec![1, 3]]);
        assert_eq!(sets(&t, 3), vec![vec![0, 1, 2, 3]]);
    }

    #[test]
    fn ordering_rejects_non_permutations() {
        assert!(build_tree_from_ordering(&[1, 1, 2], 2, 2).is_err());
        assert!(build_tree_from_ordering(&[0, 1, 2], 2, 2).is_err());
        assert!(build_tree_from_ordering(&[1, 2, 4], 2, 2).is_err());
        assert!(build_tree_from_ordering(&[], 2, 2).is_err());
    }

    fn seven_tree() -> AggregationTree {
        AggregationTree::from_children(
            7,
            2,
            vec![
                vec![vec![0, 1], vec![2, 3], vec![4, 5], vec![6]],
                vec![vec![0, 1], vec![2, 3]],
            ],
        )
        .unwrap()
    }

    #[test]
    fn seven_hypothesis_tree_is_valid() {
        let t = seven_tree();
        assert_eq!(t.num_layers(), 3);
        assert!(validate_tree(&t).is_empty());
    }

    #[test]
    fn overlap_is_one_violation() {
        let t = AggregationTree::from_children(4, 2, vec![vec![vec![0, 1], vec![1, 2], vec![3]]]);
        match t {
            Err(Error::InvalidTree(v)) => {
                assert_eq!(
                    v,
                    vec![Violation::Overlap {
                        layer: 2,
                        first: 0,
                        second: 1
                    }]
                );
            }
            other => panic!("expected invalid tree, got {other:?}"),
        }
    }

    #[test]
    fn coverage_is_one_violation() {
        let mut layers = seven_tree().layers().to_vec();
        layers[1][0].members = vec![0];
        let t = AggregationTree::from_parts_unchecked(7, 2, layers);
        assert_eq!(
            validate_tree(&t),
            vec![Violation::Coverage { layer: 2, node: 0 }]
        );
    }

    #[test]
    fn other_violations() {
        let t = AggregationTree::from_children(3, 2, vec![vec![vec![0, 1, 2]]]);
        assert!(
            matches!(t, Err(Error::InvalidTree(ref v)) if v == &[Violation::ChildCount { layer: 2, node: 0, count: 3, max: 2 }])
        );
        let t = AggregationTree::from_children(3, 2, vec![vec![vec![0, 1]]]);
        assert!(
            matches!(t, Err(Error::InvalidTree(ref v)) if v == &[Violation::Orphan { layer: 1, node: 2 }])
        );
        let t = AggregationTree::from_children(3, 2, vec![vec![vec![0, 7]]]);
        assert!(matches!(t, Err(Error::InvalidTree(_))));
        let t = AggregationTree::from_children(2, 2, vec![vec![vec![0, 0], vec![1]]]);
        assert!(
            matches!(t, Err(Error::InvalidTree(ref v)) if v == &[Violation::DuplicateChild { layer: 2, node: 0, child: 0 }])
        );
    }

    #[test]
    fn default_thresholds_build_valid_layers() {
        let pts: Vec<f64> = (0..64)
            .map(|i| (i as f64 * 0.37).sin() * 10.0 + i as f64)
            .collect();
        let t = build_tree_from_distances(&line(&pts), 2, 6, None).unwrap();
        assert_eq!(t.num_layers(), 6);
        assert!(validate_tree(&t).is_empty());
        let merged = t.layer(2).iter().filter(|n| n.children.len() == 2).count();
        assert!(merged > 0);
    }

    #[test]
    fn truncation_keeps_prefix() {
        let t = seven_tree();
        assert_eq!(t.truncated(2).num_layers(), 2);
        assert_eq!(t.truncated(9).num_layers(), 3);
        assert_eq!(t.truncated(2).layer(2), t.layer(2));
    }
}
