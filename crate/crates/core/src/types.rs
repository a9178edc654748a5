//! Shared domain types and the p-value to z-statistic transform.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;

/// Per-hypothesis z-scale test statistics `T_1..T_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct StatisticVector(Vec<f64>);

impl StatisticVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain(
                "statistic vector must hold at least one value",
            ));
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteStatistic { index, value });
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.0[index]
    }

    /// One-sided upper-tail p-values `Φ̄(T_i)`, nudged into the open unit
    /// interval so that statistics beyond ±37.5 still yield a valid vector.
    pub fn to_pvalues(&self) -> PValueVector {
        let values = self
            .0
            .iter()
            .map(|&t| normal::sf(t).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0))
            .collect();
        PValueVector(values)
    }
}

/// P-values, each strictly inside `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PValueVector(Vec<f64>);

impl PValueVector {
    /// Boundary values 0 and 1 are rejected; pre-clip them if needed.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, &p)| !(p > 0.0 && p < 1.0))
        {
            return Err(Error::PValueOutOfRange { index, value });
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `T_i = Φ⁻¹(1 - p_i)`, computed as `Φ̄⁻¹(p_i)` so no precision is lost
/// forming `1 - p_i`.
pub fn pvalue_to_z(p: &PValueVector) -> Result<StatisticVector> {
    StatisticVector::new(p.0.iter().map(|&q| normal::sf_inv(q)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RefineMode {
    Naive,
    Robust,
}

/// How the screening level `α^(ℓ)` is derived from the target level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerAlphaRule {
    /// `α^(ℓ) = α` on every layer.
    Constant,
    /// `α^(ℓ) = α / max |S|` over the qualified nodes of the layer.
    Scaled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dart2Config {
    alpha: f64,
    pub mode: RefineMode,
    pub layer_alpha_rule: LayerAlphaRule,
}

impl Dart2Config {
    /// Robust refining with the scaled layer rule.
    pub fn new(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self {
            alpha,
            mode: RefineMode::Robust,
            layer_alpha_rule: LayerAlphaRule::Scaled,
        })
    }

    pub fn with_mode(mut self, mode: RefineMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_layer_alpha_rule(mut self, rule: LayerAlphaRule) -> Self {
        self.layer_alpha_rule = rule;
        self
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "alpha must lie strictly inside (0, 1), got {alpha}"
        )))
    }
}

/// The asymptotic floor `α_m = (m ln m)⁻¹` on the tail probability of a
/// screening threshold.
///
/// For small `m` the floor exceeds any useful level (it is infinite at
/// `m = 1` and above 0.05 up to `m = 12`). When it is not strictly below
/// `level`, the floor falls back to `level / m`, which sits beyond the
/// single-rejection (Bonferroni) point of every layer and so never binds.
pub fn alpha_floor(m: usize, level: f64) -> f64 {
    let mf = m as f64;
    let floor = if m >= 2 {
        1.0 / (mf * mf.ln())
    } else {
        f64::INFINITY
    };
    if floor < level {
        floor
    } else {
        level / mf
    }
}

/// Which stage of the procedure rejected a hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Provenance {
    /// 1-based layer of the screened node that produced the rejection.
    pub layer: usize,
    /// 0-based position of that node within its layer.
    pub node: usize,
    /// Refining threshold the statistic cleared.
    pub threshold: f64,
}

/// Per-node refining audit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefineRecord {
    pub layer: usize,
    pub node: usize,
    /// Surviving members of the node at the time it was screened.
    pub members: Vec<usize>,
    pub node_statistic: f64,
    pub naive_threshold: f64,
    /// `max(t*, Φ̄⁻¹(α))`.
    pub floored_threshold: f64,
    /// Largest member statistic.
    pub max_statistic: f64,
    /// Threshold actually applied for the configured mode.
    pub threshold: f64,
    pub rejected: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerReport {
    pub layer: usize,
    pub alpha_level: f64,
    /// `None` when no node qualified for testing on this layer.
    pub threshold: Option<f64>,
    pub qualified: usize,
    pub screened: Vec<RefineRecord>,
}

/// Final rejection set with provenance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectionReport {
    pub m: usize,
    pub mode: RefineMode,
    pub layers: Vec<LayerReport>,
    rejected: BTreeSet<usize>,
    provenance: Vec<Option<Provenance>>,
}

impl RejectionReport {
    pub(crate) fn new(m: usize, mode: RefineMode, layers: Vec<LayerReport>) -> Result<Self> {
        let mut provenance = vec![None; m];
        let mut rejected = BTreeSet::new();
        for rec in layers.iter().flat_map(|l| l.screened.iter()) {
            for &i in &rec.rejected {
                if !rejected.insert(i) {
                    return Err(Error::Invariant(format!(
                        "hypothesis {i} rejected by more than one screened node"
                    )));
                }
                provenance[i] = Some(Provenance {
                    layer: rec.layer,
                    node: rec.node,
                    threshold: rec.threshold,
                });
            }
        }
        Ok(Self {
            m,
            mode,
            layers,
            rejected,
            provenance,
        })
    }

    /// 0-based indices of rejected hypotheses, ascending.
    pub fn rejected(&self) -> &BTreeSet<usize> {
        &self.rejected
    }

    pub fn provenance(&self, index: usize) -> Option<Provenance> {
        self.provenance.get(index).copied().flatten()
    }

    pub fn screened_nodes(&self) -> impl Iterator<Item = &RefineRecord> {
        self.layers.iter().flat_map(|l| l.screened.iter())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pvalue_transform_examples() {
        let t = pvalue_to_z(&PValueVector::new(vec![0.5, 0.975, 0.025]).unwrap()).unwrap();
        assert_eq!(t.get(0), 0.0);
        assert!((t.get(1) + 1.959963984540054).abs() < 1e-12);
        assert!((t.get(2) - 1.959963984540054).abs() < 1e-12);
        assert!((t.get(1) + t.get(2)).abs() < 1e-12);
    }

    #[test]
    fn boundary_pvalues_name_the_index() {
        for bad in [0.0, 1.0, -0.2, 1.2, f64::NAN] {
            let err = PValueVector::new(vec![0.3, 0.4, bad]).unwrap_err();
            match err {
                Error::PValueOutOfRange { index, .. } => assert_eq!(index, 2),
                other => panic!("unexpected {other}"),
            }
        }
    }

    #[test]
    fn statistic_vector_rejects_non_finite_and_empty() {
        assert!(StatisticVector::new(vec![]).is_err());
        let err = StatisticVector::new(vec![1.0, f64::INFINITY]).unwrap_err();
        assert!(matches!(err, Error::NonFiniteStatistic { index: 1, .. }));
        assert!(StatisticVector::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn config_alpha_is_open_interval() {
        for a in [0.0, 1.0, -0.5, 2.0, f64::NAN] {
            assert!(Dart2Config::new(a).is_err());
        }
        let cfg = Dart2Config::new(0.05).unwrap();
        assert_eq!(cfg.mode, RefineMode::Robust);
        assert_eq!(cfg.layer_alpha_rule, LayerAlphaRule::Scaled);
    }

    #[test]
    fn alpha_floor_rule() {
        let m = 1000usize;
        let want = 1.0 / (1000.0 * 1000f64.ln());
        assert_eq!(alpha_floor(m, 0.05), want);
        // m = 7: (7 ln 7)^-1 ≈ 0.073 ≥ 0.05
        assert_eq!(alpha_floor(7, 0.05), 0.05 / 7.0);
        assert_eq!(alpha_floor(1, 0.05), 0.05);
    }

    #[test]
    fn to_pvalues_stays_open() {
        let t = StatisticVector::new(vec![-60.0, 0.0, 60.0]).unwrap();
        let p = t.to_pvalues();
        assert!(p.values().iter().all(|&x| x > 0.0 && x < 1.0));
        assert_eq!(p.values()[1], 0.5);
    }
}
