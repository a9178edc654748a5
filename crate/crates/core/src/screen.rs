//! Screening stage: layer-by-layer testing of Stouffer node statistics
//! against data-driven thresholds.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::normal;
use crate::tree::AggregationTree;
use crate::types::{alpha_floor, Dart2Config, LayerAlphaRule, StatisticVector};

/// Stouffer combination `Σ_{i∈S} T_i / √|S|`.
pub fn node_statistic(t: &StatisticVector, members: &[usize]) -> Result<f64> {
    if members.is_empty() {
        return Err(Error::domain("node statistic of an empty hypothesis set"));
    }
    let mut sum = 0.0;
    for &i in members {
        if i >= t.len() {
            return Err(Error::domain(format!(
                "hypothesis index {i} out of range for {} statistics",
                t.len()
            )));
        }
        sum += t.get(i);
    }
    Ok(sum / (members.len() as f64).sqrt())
}

/// Screening level `α^(ℓ)` for a layer whose qualified nodes have the
/// given sizes.
pub fn layer_alpha(alpha: f64, node_sizes: &[usize], rule: LayerAlphaRule) -> Result<f64> {
    let largest = node_sizes
        .iter()
        .copied()
        .max()
        .ok_or_else(|| Error::domain("layer_alpha needs at least one qualified node"))?;
    Ok(match rule {
        LayerAlphaRule::Constant => alpha,
        LayerAlphaRule::Scaled => alpha / largest.max(1) as f64,
    })
}

/// Smallest `c` in `[Φ̄⁻¹(level), Φ̄⁻¹(floor)]` with
/// `Σ|S|·Φ̄(c) / max(Σ|S|·1{T_S > c}, 1) ≤ level`.
///
/// The estimated FDP is decreasing in `c` between consecutive node
/// statistics and jumps up at each one, so the infimum is either the left
/// end of such an interval or the point where `N·Φ̄(c) = level·R` inside it.
/// Each interval is checked in order; this is exact, with no grid. If no `c`
/// in range qualifies, the upper end is returned.
///
/// `nodes` holds `(T_S, |S|)` pairs.
pub fn layer_threshold(nodes: &[(f64, usize)], level: f64, floor: f64) -> Result<f64> {
    if nodes.is_empty() {
        return Err(Error::domain("layer_threshold needs at least one node"));
    }
    if !(floor > 0.0 && floor <= level && level < 1.0) {
        return Err(Error::domain(format!(
            "layer_threshold needs 0 < floor <= level < 1, got floor {floor}, level {level}"
        )));
    }
    if let Some(&(t, s)) = nodes.iter().find(|(t, s)| !t.is_finite() || *s == 0) {
        return Err(Error::domain(format!(
            "node statistic {t} with size {s} is not usable"
        )));
    }
    let lo = normal::sf_inv(level);
    let hi = normal::sf_inv(floor);

    let mut sorted: Vec<(f64, usize)> = nodes.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: usize = sorted.iter().map(|&(_, s)| s).sum();
    let total = total as f64;

    // exceed = Σ|S| over nodes with T_S > u, tracked as u moves right
    let mut next = sorted.partition_point(|&(t, _)| t <= lo);
    let mut exceed: usize = sorted[next..].iter().map(|&(_, s)| s).sum();
    let mut start = lo;
    loop {
        let target = level * exceed.max(1) as f64 / total;
        let crossing = if target >= 1.0 {
            start
        } else {
            normal::sf_inv(target).max(start)
        };
        match sorted.get(next).map(|p| p.0).filter(|&t| t < hi) {
            Some(end) => {
                if crossing < end {
                    return Ok(crossing);
                }
                start = end;
                while next < sorted.len() && sorted[next].0 <= start {
                    exceed -= sorted[next].1;
                    next += 1;
                }
            }
            // last stretch [start, hi]; past hi the fallback is hi itself
            None => return Ok(crossing.min(hi)),
        }
    }
}

/// A node that took part in testing on some layer.
#[derive(Debug, Clone, PartialEq)]
pub struct QualifiedNode {
    /// 0-based position of the node in its tree layer.
    pub node: usize,
    /// Members still unscreened when the layer was tested.
    pub members: Vec<usize>,
    pub statistic: f64,
    pub screened: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerScreen {
    /// 1-based layer number.
    pub layer: usize,
    pub alpha_level: f64,
    pub alpha_floor: f64,
    /// `None` when the qualified set was empty and the layer was skipped.
    pub threshold: Option<f64>,
    pub qualified: Vec<QualifiedNode>,
}

impl LayerScreen {
    pub fn screened(&self) -> impl Iterator<Item = &QualifiedNode> {
        self.qualified.iter().filter(|n| n.screened)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreeningResult {
    pub m: usize,
    pub layers: Vec<LayerScreen>,
}

impl ScreeningResult {
    /// Hypotheses screened out as singletons on layer 1.
    pub fn layer_one_rejections(&self) -> BTreeSet<usize> {
        self.layers
            .first()
            .map(|l| {
                l.screened()
                    .flat_map(|n| n.members.iter().copied())
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Every screened-out hypothesis, across layers.
    pub fn screened_hypotheses(&self) -> BTreeSet<usize> {
        self.layers
            .iter()
            .flat_map(|l| l.screened())
            .flat_map(|n| n.members.iter().copied())
            .collect()
    }
}

/// Runs the screening loop over all layers of `tree`.
///
/// Layer 1 tests every singleton. On each later layer, hypotheses already
/// screened out are removed from every node, only nodes with at least two
/// nonempty children are tested, and `T_S` is recomputed from survivors.
/// Nodes with `T_S > ĉ^(ℓ)` (strict) are screened out.
pub fn screening_stage(
    t: &StatisticVector,
    tree: &AggregationTree,
    cfg: &Dart2Config,
) -> Result<ScreeningResult> {
    let m = t.len();
    if tree.m() != m {
        return Err(Error::DimensionMismatch {
            what: "tree",
            expected: m,
            found: tree.m(),
        });
    }
    let mut removed = vec![false; m];
    let mut layers = Vec::with_capacity(tree.num_layers());

    for (l, nodes) in tree.layers().iter().enumerate() {
        let layer = l + 1;
        let mut qualified = Vec::new();
        if l == 0 {
            for (i, &value) in t.values().iter().enumerate() {
                qualified.push(QualifiedNode {
                    node: i,
                    members: vec![i],
                    statistic: value,
                    screened: false,
                });
            }
        } else {
            let below = &tree.layers()[l - 1];
            let alive_below: Vec<bool> = below
                .iter()
                .map(|n| n.members.iter().any(|&h| !removed[h]))
                .collect();
            for (pos, node) in nodes.iter().enumerate() {
                let live_children = node.children.iter().filter(|&&c| alive_below[c]).count();
                if live_children < 2 {
                    continue;
                }
                let members: Vec<usize> = node
                    .members
                    .iter()
                    .copied()
                    .filter(|&h| !removed[h])
                    .collect();
                let statistic = node_statistic(t, &members)?;
                qualified.push(QualifiedNode {
                    node: pos,
                    members,
                    statistic,
                    screened: false,
                });
            }
        }

        if qualified.is_empty() {
            layers.push(LayerScreen {
                layer,
                alpha_level: cfg.alpha(),
                alpha_floor: alpha_floor(m, cfg.alpha()),
                threshold: None,
                qualified,
            });
            continue;
        }

        let sizes: Vec<usize> = qualified.iter().map(|n| n.members.len()).collect();
        let level = layer_alpha(cfg.alpha(), &sizes, cfg.layer_alpha_rule)?;
        let floor = alpha_floor(m, level);
        let stats: Vec<(f64, usize)> = qualified
            .iter()
            .map(|n| (n.statistic, n.members.len()))
            .collect();
        let threshold = layer_threshold(&stats, level, floor)?;
        for n in qualified.iter_mut() {
            if n.statistic > threshold {
                n.screened = true;
                for &h in &n.members {
                    removed[h] = true;
                }
            }
        }
        layers.push(LayerScreen {
            layer,
            alpha_level: level,
            alpha_floor: floor,
            threshold: Some(threshold),
            qualified,
        });
    }
    Ok(ScreeningResult { m, layers })
}
