//! Synthetic experiments: a planar signal field, label-swapping corruption
//! of the ancillary information, two statistic generators and a seeded
//! replication runner.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Bernoulli, Distribution, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::bh_procedure;
use crate::error::{Error, Result};
use crate::eval::{fdp, sensitivity};
use crate::normal::{normal_pdf, std_normal_pdf};
use crate::refine::dart2;
use crate::tree::{build_tree_from_distances, AggregationTree, DistanceMatrix};
use crate::types::{Dart2Config, LayerAlphaRule, RefineMode, StatisticVector};

/// Hypotheses whose distances anchor the two signal clusters (0-based for
/// hypotheses 156 and 800).
pub const CENTERS: (usize, usize) = (155, 799);

/// Variance of the narrow second density.
pub const SECOND_DENSITY_VARIANCE: f64 = 0.1;

const FROZEN_LOCATIONS: &str = include_str!("../data/locations.csv");

/// `η = {[a1·φ₁(d₁) − b1] ∨ 0 + a2·φ₂(d₂) − b2} ∨ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
}

impl Coefficients {
    pub const MAIN: Self = Self {
        a1: 3.4,
        b1: 0.6,
        a2: 3.0,
        b2: 0.1,
    };
    pub const APPENDIX: Self = Self {
        a1: 5.1,
        b1: 0.9,
        a2: 4.5,
        b2: 0.1,
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalField {
    locations: Vec<[f64; 2]>,
    eta: Vec<f64>,
}

impl SignalField {
    pub fn locations(&self) -> &[[f64; 2]] {
        &self.locations
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn m(&self) -> usize {
        self.eta.len()
    }

    pub fn is_alternative(&self, i: usize) -> bool {
        self.eta[i] > 0.0
    }

    pub fn alternatives(&self) -> BTreeSet<usize> {
        (0..self.m()).filter(|&i| self.is_alternative(i)).collect()
    }

    pub fn nulls(&self) -> BTreeSet<usize> {
        (0..self.m()).filter(|&i| !self.is_alternative(i)).collect()
    }
}

/// The 1000 frozen planar locations shipped with the crate.
///
/// They were drawn uniformly on `[0, 5]²` and the seed chosen so the main
/// coefficients give exactly 216 alternatives (see
/// `examples/calibrate_locations.rs`).
pub fn frozen_locations() -> Vec<[f64; 2]> {
    FROZEN_LOCATIONS
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let mut it = l
                .split(',')
                .map(|v| v.trim().parse::<f64>().expect("fixture value"));
            [it.next().expect("x"), it.next().expect("y")]
        })
        .collect()
}

/// Signal strengths from distances to the two centre hypotheses.
pub fn eta_field(
    locations: &[[f64; 2]],
    coeffs: Coefficients,
    centers: (usize, usize),
) -> Result<SignalField> {
    let m = locations.len();
    if centers.0 >= m || centers.1 >= m {
        return Err(Error::domain(format!(
            "centres {:?} out of range for {m} locations",
            (centers.0 + 1, centers.1 + 1)
        )));
    }
    let (c1, c2) = (locations[centers.0], locations[centers.1]);
    let dist = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]);
    let eta = locations
        .iter()
        .map(|&p| {
            let first = (coeffs.a1 * std_normal_pdf(dist(p, c1)) - coeffs.b1).max(0.0);
            let second = coeffs.a2 * normal_pdf(dist(p, c2), SECOND_DENSITY_VARIANCE);
            (first + second - coeffs.b2).max(0.0)
        })
        .collect();
    Ok(SignalField {
        locations: locations.to_vec(),
        eta,
    })
}

/// Swaps the signal of `⌈τ·m₁⌉` random alternatives with as many random
/// nulls. Locations stay put, so the distances now point the wrong way for
/// the swapped hypotheses.
pub fn apply_misleading<R: Rng + ?Sized>(
    field: &SignalField,
    tau: f64,
    rng: &mut R,
) -> Result<SignalField> {
    check_tau(tau)?;
    let alternatives: Vec<usize> = field.alternatives().into_iter().collect();
    let nulls: Vec<usize> = field.nulls().into_iter().collect();
    // the small offset keeps products like 0.3·10 from rounding up a step
    let swaps =
        ((tau * alternatives.len() as f64 - 1e-9).ceil().max(0.0) as usize).min(nulls.len());
    let mut eta = field.eta.clone();
    if swaps > 0 {
        let from = sample(rng, alternatives.len(), swaps);
        let to = sample(rng, nulls.len(), swaps);
        for (a, n) in from.iter().zip(to.iter()) {
            eta.swap(alternatives[a], nulls[n]);
        }
    }
    Ok(SignalField {
        locations: field.locations.clone(),
        eta,
    })
}

fn check_tau(tau: f64) -> Result<()> {
    if (0.0..=1.0).contains(&tau) {
        Ok(())
    } else {
        Err(Error::domain(format!("tau must lie in [0, 1], got {tau}")))
    }
}

/// `T_i ~ N(√n·η_i/5, 1)`.
pub fn gen_se1<R: Rng + ?Sized>(
    field: &SignalField,
    n: usize,
    rng: &mut R,
) -> Result<StatisticVector> {
    if n == 0 {
        return Err(Error::domain("sample size must be at least 1"));
    }
    let scale = (n as f64).sqrt() / 5.0;
    let values = field
        .eta
        .iter()
        .map(|&eta| {
            let z: f64 = StandardNormal.sample(rng);
            scale * eta + z
        })
        .collect();
    StatisticVector::new(values)
}

/// Least-squares fit with coefficient standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub residual_variance: f64,
}

/// OLS through a Householder QR factorization of `x` (`n × p`, `n > p`).
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            what: "response",
            expected: n,
            found: y.len(),
        });
    }
    if n <= p {
        return Err(Error::domain(format!(
            "OLS needs more rows than columns, got {n}×{p}"
        )));
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let scale = r.diagonal().amax().max(f64::MIN_POSITIVE);
    if r.diagonal().iter().any(|d| d.abs() <= 1e-12 * scale) {
        return Err(Error::SingularDesign);
    }
    let qty = qr.q().transpose() * y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or(Error::SingularDesign)?;
    let resid = y - x * &beta;
    let sigma2 = resid.norm_squared() / (n - p) as f64;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or(Error::SingularDesign)?;
    // (XᵀX)⁻¹ = R⁻¹R⁻ᵀ, so its diagonal is the squared row norms of R⁻¹
    let standard_errors = (0..p)
        .map(|k| (sigma2 * r_inv.row(k).norm_squared()).sqrt())
        .collect();
    Ok(OlsFit {
        coefficients: beta.iter().copied().collect(),
        standard_errors,
        residual_variance: sigma2,
    })
}

/// Wald statistics `θ̂₁ / se(θ̂₁)` from `Y = 0.1 + (η/3)·W₁ + 0.1·W₂ + ε`,
/// with `W₁ ~ Bernoulli(0.5)`, `W₂ ~ U(0.1, 0.5)` and `ε ~ N(0, 1)` drawn
/// afresh for every hypothesis.
pub fn gen_se2<R: Rng + ?Sized>(
    field: &SignalField,
    n: usize,
    rng: &mut R,
) -> Result<StatisticVector> {
    if n < 4 {
        return Err(Error::domain(format!(
            "the linear setting needs at least 4 observations, got {n}"
        )));
    }
    let coin = Bernoulli::new(0.5).expect("valid probability");
    let unif = Uniform::new(0.1, 0.5).expect("valid range");
    let mut values = Vec::with_capacity(field.m());
    for &eta in &field.eta {
        let slope = eta / 3.0;
        let mut attempt = 0;
        let stat = loop {
            let mut x = DMatrix::zeros(n, 3);
            let mut y = DVector::zeros(n);
            for row in 0..n {
                let w1 = if coin.sample(rng) { 1.0 } else { 0.0 };
                let w2 = unif.sample(rng);
                let eps: f64 = StandardNormal.sample(rng);
                x[(row, 0)] = 1.0;
                x[(row, 1)] = w1;
                x[(row, 2)] = w2;
                y[row] = 0.1 + slope * w1 + 0.1 * w2 + eps;
            }
            match ols(&x, &y) {
                Ok(fit) => break fit.coefficients[1] / fit.standard_errors[1],
                Err(Error::SingularDesign) if attempt == 0 => attempt += 1,
                Err(e) => return Err(e),
            }
        };
        values.push(stat);
    }
    StatisticVector::new(values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    Se1,
    Se2,
}

impl Setting {
    pub fn generate<R: Rng + ?Sized>(
        self,
        field: &SignalField,
        n: usize,
        rng: &mut R,
    ) -> Result<StatisticVector> {
        match self {
            Setting::Se1 => gen_se1(field, n, rng),
            Setting::Se2 => gen_se2(field, n, rng),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimScenario {
    pub field: SignalField,
    pub taus: Vec<f64>,
    pub setting: Setting,
    pub n: usize,
    pub alphas: Vec<f64>,
    pub reps: usize,
    pub seed: u64,
}

impl SimScenario {
    pub fn validate(&self) -> Result<()> {
        for &tau in &self.taus {
            check_tau(tau)?;
        }
        for &alpha in &self.alphas {
            Dart2Config::new(alpha)?;
        }
        if self.taus.is_empty() || self.alphas.is_empty() {
            return Err(Error::domain(
                "scenario needs at least one tau and one alpha",
            ));
        }
        if self.reps == 0 {
            return Err(Error::domain("scenario needs at least one repetition"));
        }
        if self.reps >= 1 << 30 || self.taus.len() >= 1 << 30 {
            return Err(Error::domain("too many repetitions or tau values"));
        }
        let min_n = match self.setting {
            Setting::Se1 => 1,
            Setting::Se2 => 4,
        };
        if self.n < min_n {
            return Err(Error::domain(format!(
                "sample size {} too small for {:?}",
                self.n, self.setting
            )));
        }
        if self.field.alternatives().is_empty() {
            return Err(Error::domain("signal field has no alternatives"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Procedure {
    Dart2 {
        layers: usize,
        mode: RefineMode,
        layer_alpha_rule: LayerAlphaRule,
    },
    Bh,
}

impl Procedure {
    pub fn dart2(layers: usize) -> Self {
        Procedure::Dart2 {
            layers,
            mode: RefineMode::Robust,
            layer_alpha_rule: LayerAlphaRule::Scaled,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Procedure::Dart2 {
                layers,
                mode,
                layer_alpha_rule,
            } => {
                let mode = match mode {
                    RefineMode::Naive => "naive",
                    RefineMode::Robust => "robust",
                };
                let rule = match layer_alpha_rule {
                    LayerAlphaRule::Scaled => "",
                    LayerAlphaRule::Constant => "_const",
                };
                format!("dart2_L{layers}_{mode}{rule}")
            }
            Procedure::Bh => "bh".to_string(),
        }
    }
}

/// How the shared aggregation tree is built from the field's locations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeSpec {
    pub max_children: usize,
    /// `g^(2)..`; when shorter than needed, or absent, defaults are used.
    pub thresholds: Option<Vec<f64>>,
}

impl Default for TreeSpec {
    fn default() -> Self {
        Self {
            max_children: 2,
            thresholds: None,
        }
    }
}

impl TreeSpec {
    pub fn build(&self, locations: &[[f64; 2]], num_layers: usize) -> Result<AggregationTree> {
        let d = DistanceMatrix::euclidean(locations)?;
        let g = self
            .thresholds
            .as_ref()
            .map(|g| g[..(num_layers - 1).min(g.len())].to_vec());
        match g {
            Some(g) if g.len() == num_layers - 1 => {
                build_tree_from_distances(&d, self.max_children, num_layers, Some(&g))
            }
            Some(_) => Err(Error::domain(format!(
                "tree needs {} thresholds for {num_layers} layers",
                num_layers - 1
            ))),
            None => build_tree_from_distances(&d, self.max_children, num_layers, None),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationRow {
    pub rep: usize,
    pub procedure: String,
    pub alpha: f64,
    pub tau: f64,
    pub fdp: f64,
    pub sensitivity: f64,
}

const STREAM_CORRUPTION: u64 = 0;
const STREAM_STATISTICS: u64 = 1;

/// Generator for one purpose within one repetition.
///
/// ChaCha20 keyed by the master seed; the 64-bit stream id packs
/// `(tau index, repetition, purpose)` as `tau << 32 | rep << 2 | purpose`,
/// so any repetition can be replayed on its own.
pub fn replication_rng(seed: u64, tau_index: usize, rep: usize, purpose: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(((tau_index as u64) << 32) | ((rep as u64) << 2) | purpose);
    rng
}

/// Runs every procedure on every `(τ, repetition)` cell.
///
/// The tree is built once from the locations, which never move; each
/// DART2 procedure uses its first `layers` layers. Rows come back ordered by
/// τ, repetition, procedure and α regardless of how the cells were
/// scheduled on the current rayon pool.
pub fn run_replications(
    scenario: &SimScenario,
    procedures: &[Procedure],
    tree_spec: &TreeSpec,
) -> Result<Vec<ReplicationRow>> {
    scenario.validate()?;
    if procedures.is_empty() {
        return Err(Error::domain("no procedures to run"));
    }
    let max_layers = procedures
        .iter()
        .filter_map(|p| match p {
            Procedure::Dart2 { layers, .. } => Some(*layers),
            Procedure::Bh => None,
        })
        .max();
    if max_layers == Some(0) {
        return Err(Error::domain("a DART2 procedure needs at least one layer"));
    }
    let tree = match max_layers {
        Some(l) => tree_spec.build(scenario.field.locations(), l)?,
        None => AggregationTree::singletons(scenario.field.m(), tree_spec.max_children),
    };
    let truncated: Vec<Option<AggregationTree>> = procedures
        .iter()
        .map(|p| match p {
            Procedure::Dart2 { layers, .. } => Some(tree.truncated(*layers)),
            Procedure::Bh => None,
        })
        .collect();

    let cells: Vec<(usize, usize)> = (0..scenario.taus.len())
        .flat_map(|t| (0..scenario.reps).map(move |r| (t, r)))
        .collect();
    let blocks: Vec<Vec<ReplicationRow>> = cells
        .par_iter()
        .map(|&(tau_index, rep)| run_cell(scenario, procedures, &truncated, tau_index, rep))
        .collect::<Result<_>>()?;
    Ok(blocks.into_iter().flatten().collect())
}

fn run_cell(
    scenario: &SimScenario,
    procedures: &[Procedure],
    trees: &[Option<AggregationTree>],
    tau_index: usize,
    rep: usize,
) -> Result<Vec<ReplicationRow>> {
    let tau = scenario.taus[tau_index];
    let mut rng = replication_rng(scenario.seed, tau_index, rep, STREAM_CORRUPTION);
    let field = apply_misleading(&scenario.field, tau, &mut rng)?;
    let mut rng = replication_rng(scenario.seed, tau_index, rep, STREAM_STATISTICS);
    let stats = scenario.setting.generate(&field, scenario.n, &mut rng)?;
    let nulls = field.nulls();
    let alternatives = field.alternatives();
    let pvalues = stats.to_pvalues();

    let mut rows = Vec::with_capacity(procedures.len() * scenario.alphas.len());
    for (procedure, tree) in procedures.iter().zip(trees) {
        for &alpha in &scenario.alphas {
            let rejected = match (procedure, tree) {
                (
                    Procedure::Dart2 {
                        mode,
                        layer_alpha_rule,
                        ..
                    },
                    Some(tree),
                ) => {
                    let cfg = Dart2Config::new(alpha)?
                        .with_mode(*mode)
                        .with_layer_alpha_rule(*layer_alpha_rule);
                    dart2(&stats, tree, &cfg)?.rejected().clone()
                }
                _ => bh_procedure(&pvalues, alpha)?,
            };
            rows.push(ReplicationRow {
                rep,
                procedure: procedure.name(),
                alpha,
                tau,
                fdp: fdp(&rejected, &nulls),
                sensitivity: sensitivity(&rejected, &alternatives)?,
            });
        }
    }
    Ok(rows)
}
