//! Refining stage: per-hypothesis thresholds inside screened-out nodes.

use crate::error::{Error, Result};
use crate::normal;
use crate::screen::{screening_stage, ScreeningResult};
use crate::tree::AggregationTree;
use crate::types::{
    check_alpha, Dart2Config, LayerReport, RefineMode, RefineRecord, RejectionReport,
    StatisticVector,
};

/// `t*_S = ĉ^(ℓ) / √|S|`.
pub fn naive_threshold(c_hat: f64, node_size: usize) -> f64 {
    c_hat / (node_size.max(1) as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustThreshold {
    /// `max(t*, Φ̄⁻¹(α))`.
    pub floored: f64,
    /// `max{T_i : i ∈ S}`.
    pub max_statistic: f64,
    /// `min(floored, max_statistic)`.
    pub threshold: f64,
}

/// Floors the naive threshold at `Φ̄⁻¹(α)` and caps it at the largest member
/// statistic, so at least one member always clears it.
pub fn robust_threshold(t_star: f64, alpha: f64, member_stats: &[f64]) -> Result<RobustThreshold> {
    check_alpha(alpha)?;
    let max_statistic = member_stats
        .iter()
        .copied()
        .reduce(f64::max)
        .ok_or_else(|| Error::domain("robust threshold of an empty node"))?;
    let floored = t_star.max(normal::sf_inv(alpha));
    Ok(RobustThreshold {
        floored,
        max_statistic,
        threshold: floored.min(max_statistic),
    })
}

/// Applies the refining thresholds to every screened node and assembles
/// the final rejection set. Members are rejected when `T_i ≥ t_S`.
///
/// Layer-1 singletons go through the same path; their threshold never
/// exceeds their own statistic, so they are always kept.
pub fn refining_stage(
    screen: &ScreeningResult,
    t: &StatisticVector,
    cfg: &Dart2Config,
) -> Result<RejectionReport> {
    if screen.m != t.len() {
        return Err(Error::DimensionMismatch {
            what: "screening result",
            expected: t.len(),
            found: screen.m,
        });
    }
    let mut layers = Vec::with_capacity(screen.layers.len());
    for ls in &screen.layers {
        let mut screened = Vec::new();
        if let Some(c_hat) = ls.threshold {
            for node in ls.screened() {
                let member_stats: Vec<f64> = node.members.iter().map(|&i| t.get(i)).collect();
                let naive = naive_threshold(c_hat, node.members.len());
                let robust = robust_threshold(naive, cfg.alpha(), &member_stats)?;
                let threshold = match cfg.mode {
                    RefineMode::Naive => naive,
                    RefineMode::Robust => robust.threshold,
                };
                let rejected: Vec<usize> = node
                    .members
                    .iter()
                    .copied()
                    .filter(|&i| t.get(i) >= threshold)
                    .collect();
                if cfg.mode == RefineMode::Robust && rejected.is_empty() {
                    return Err(Error::Invariant(format!(
                        "robust refining rejected nothing in layer {} node {}",
                        ls.layer,
                        node.node + 1
                    )));
                }
                screened.push(RefineRecord {
                    layer: ls.layer,
                    node: node.node,
                    members: node.members.clone(),
                    node_statistic: node.statistic,
                    naive_threshold: naive,
                    floored_threshold: robust.floored,
                    max_statistic: robust.max_statistic,
                    threshold,
                    rejected,
                });
            }
        }
        layers.push(LayerReport {
            layer: ls.layer,
            alpha_level: ls.alpha_level,
            threshold: ls.threshold,
            qualified: ls.qualified.len(),
            screened,
        });
    }
    RejectionReport::new(t.len(), cfg.mode, layers)
}

/// Screening followed by refining.
pub fn dart2(
    t: &StatisticVector,
    tree: &AggregationTree,
    cfg: &Dart2Config,
) -> Result<RejectionReport> {
    let screen = screening_stage(t, tree, cfg)?;
    refining_stage(&screen, t, cfg)
}
