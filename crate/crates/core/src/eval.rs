//! Discovery metrics and replication summaries.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};

/// `|R ∩ Ω₀| / max(|R|, 1)`.
pub fn fdp(rejected: &BTreeSet<usize>, nulls: &BTreeSet<usize>) -> f64 {
    let false_hits = rejected.intersection(nulls).count();
    false_hits as f64 / rejected.len().max(1) as f64
}

/// `|R ∩ Ω₁| / |Ω₁|`.
pub fn sensitivity(rejected: &BTreeSet<usize>, alternatives: &BTreeSet<usize>) -> Result<f64> {
    if alternatives.is_empty() {
        return Err(Error::domain(
            "sensitivity is undefined without alternatives",
        ));
    }
    let hits = rejected.intersection(alternatives).count();
    Ok(hits as f64 / alternatives.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Accuracy {
    pub precision: f64,
    pub sensitivity: f64,
    pub f1: f64,
}

/// Precision, sensitivity and their harmonic mean against a benchmark set.
/// Precision is 0 for an empty rejection set.
pub fn precision_f1(rejected: &BTreeSet<usize>, benchmark: &BTreeSet<usize>) -> Result<Accuracy> {
    let sensitivity = sensitivity(rejected, benchmark)?;
    let hits = rejected.intersection(benchmark).count() as f64;
    let precision = if rejected.is_empty() {
        0.0
    } else {
        hits / rejected.len() as f64
    };
    let f1 = if precision + sensitivity > 0.0 {
        2.0 * precision * sensitivity / (precision + sensitivity)
    } else {
        0.0
    };
    Ok(Accuracy {
        precision,
        sensitivity,
        f1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub q05: f64,
    pub q95: f64,
    pub count: usize,
}

/// Mean with 5% and 95% empirical quantiles (type 7, linear interpolation:
/// `h = (n-1)p`, `Q = x[⌊h⌋] + (h - ⌊h⌋)(x[⌊h⌋+1] - x[⌊h⌋])`).
pub fn summarize(values: &[f64]) -> Result<MetricSummary> {
    if values.is_empty() {
        return Err(Error::domain("cannot summarize an empty sequence"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("cannot summarize non-finite values"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    // shifted sum in sorted order: independent of input order and exact
    // for constant input
    let base = sorted[0];
    let mean = base + sorted.iter().map(|v| v - base).sum::<f64>() / sorted.len() as f64;
    Ok(MetricSummary {
        mean,
        q05: quantile_sorted(&sorted, 0.05),
        q95: quantile_sorted(&sorted, 0.95),
        count: sorted.len(),
    })
}

/// Type-7 quantile of an ascending, nonempty slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(v: &[usize]) -> BTreeSet<usize> {
        v.iter().copied().collect()
    }

    #[test]
    fn fdp_examples() {
        assert!((fdp(&set(&[1, 2, 3]), &set(&[2])) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(fdp(&set(&[]), &set(&[1, 2])), 0.0);
        assert_eq!(fdp(&set(&[4, 5]), &set(&[4, 5])), 1.0);
    }

    #[test]
    fn sensitivity_examples() {
        assert_eq!(
            sensitivity(&set(&[1, 2, 3, 9]), &set(&[1, 2, 3])).unwrap(),
            1.0
        );
        assert_eq!(sensitivity(&set(&[7]), &set(&[1, 2])).unwrap(), 0.0);
        let alt: BTreeSet<usize> = (0..216).collect();
        let r: BTreeSet<usize> = (0..108).chain(500..520).collect();
        assert_eq!(sensitivity(&r, &alt).unwrap(), 0.5);
        assert!(sensitivity(&set(&[1]), &set(&[])).is_err());
    }

    #[test]
    fn precision_f1_examples() {
        let b = set(&[1, 2, 3]);
        let a = precision_f1(&b, &b).unwrap();
        assert_eq!((a.precision, a.sensitivity, a.f1), (1.0, 1.0, 1.0));
        let a = precision_f1(&set(&[8, 9]), &b).unwrap();
        assert_eq!((a.precision, a.sensitivity, a.f1), (0.0, 0.0, 0.0));
        let benchmark: BTreeSet<usize> = (0..20).collect();
        let r: BTreeSet<usize> = (15..25).collect();
        let a = precision_f1(&r, &benchmark).unwrap();
        assert_eq!(a.precision, 0.5);
        assert_eq!(a.sensitivity, 0.25);
        assert!((a.f1 - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(precision_f1(&set(&[]), &b).unwrap().precision, 0.0);
        assert!(precision_f1(&b, &set(&[])).is_err());
    }

    #[test]
    fn summarize_examples() {
        let s = summarize(&[0.5]).unwrap();
        assert_eq!((s.mean, s.q05, s.q95, s.count), (0.5, 0.5, 0.5, 1));
        let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let s = summarize(&grid).unwrap();
        assert!((s.q05 - 0.05).abs() < 1e-12);
        assert!((s.q95 - 0.95).abs() < 1e-12);
        assert!((s.mean - 0.5).abs() < 1e-12);
        let s = summarize(&[0.2; 9]).unwrap();
        assert_eq!((s.mean, s.q05, s.q95), (0.2, 0.2, 0.2));
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn quantile_interpolates() {
        // h = 3 * 0.5 = 1.5 → halfway between 2 and 4
        assert_eq!(quantile_sorted(&[1.0, 2.0, 4.0, 8.0], 0.5), 3.0);
        assert_eq!(quantile_sorted(&[1.0, 2.0, 4.0, 8.0], 1.0), 8.0);
        assert_eq!(quantile_sorted(&[1.0, 2.0, 4.0, 8.0], 0.0), 1.0);
    }
}
