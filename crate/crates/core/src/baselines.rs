//! Benjamini–Hochberg step-up procedure.

use std::collections::BTreeSet;

use crate::error::Result;
use crate::types::{check_alpha, PValueVector};

/// Rejects the `k*` smallest p-values, `k* = max{k : p_(k) ≤ kα/m}`.
///
/// Sorting is stable on the original index; every p-value tied with `p_(k*)`
/// is rejected because the rule depends on values only.
pub fn bh_procedure(p: &PValueVector, alpha: f64) -> Result<BTreeSet<usize>> {
    check_alpha(alpha)?;
    let m = p.len();
    let values = p.values();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let cutoff = order
        .iter()
        .enumerate()
        .rev()
        .find(|&(k, &i)| values[i] <= (k + 1) as f64 * alpha / m as f64)
        .map(|(k, _)| k + 1)
        .unwrap_or(0);
    Ok(order[..cutoff].iter().copied().collect())
}
