//! Validation-error metrics: NMBE, CVRMSE, GOF, their weighted forms, and the
//! spread of repeated estimates around a reference error.
//!
//! NMBE follows the (simulated − measured) sign convention. All metrics are in
//! percent.

use alloc::vec::Vec;
use core::f64::consts::FRAC_1_SQRT_2;

#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Aligned simulated (`s`) and measured (`m`) hourly values.
#[derive(Debug, Clone, Copy)]
pub struct SeriesPair<'a> {
    simulated: &'a [f64],
    measured: &'a [f64],
}

impl<'a> SeriesPair<'a> {
    pub fn new(simulated: &'a [f64], measured: &'a [f64]) -> Result<Self> {
        if simulated.is_empty() {
            return Err(Error::EmptyInput);
        }
        if simulated.len() != measured.len() {
            return Err(Error::LengthMismatch {
                expected: simulated.len(),
                got: measured.len(),
            });
        }
        Ok(Self { simulated, measured })
    }

    pub fn simulated(&self) -> &'a [f64] {
        self.simulated
    }

    pub fn measured(&self) -> &'a [f64] {
        self.measured
    }

    pub fn len(&self) -> usize {
        self.simulated.len()
    }

    pub fn is_empty(&self) -> bool {
        self.simulated.is_empty()
    }
}

/// NMBE, CVRMSE and GOF of one comparison, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub nmbe: f64,
    pub cvrmse: f64,
    pub gof: f64,
}

impl ErrorMetrics {
    pub fn from_parts(nmbe: f64, cvrmse: f64) -> Self {
        Self {
            nmbe,
            cvrmse,
            gof: gof(nmbe, cvrmse),
        }
    }

    /// Unweighted metrics of a pair.
    pub fn of(pair: SeriesPair<'_>) -> Result<Self> {
        Ok(Self::from_parts(nmbe(pair)?, cvrmse(pair)?))
    }

    /// Weighted metrics of a pair restricted to observed points.
    pub fn weighted(pair: SeriesPair<'_>, weights: &[f64], n_pop: usize) -> Result<Self> {
        Ok(Self::from_parts(
            weighted_nmbe(pair, weights)?,
            weighted_cvrmse(pair, weights, n_pop)?,
        ))
    }
}

fn nonzero(denominator: f64) -> Result<f64> {
    if denominator == 0.0 || !denominator.is_finite() {
        Err(Error::ZeroDenominator)
    } else {
        Ok(denominator)
    }
}

/// `100 · Σ(s − m) / Σ m`.
pub fn nmbe(pair: SeriesPair<'_>) -> Result<f64> {
    let mut bias = 0.0;
    let mut total = 0.0;
    for (s, m) in pair.simulated.iter().zip(pair.measured) {
        bias += s - m;
        total += m;
    }
    Ok(100.0 * bias / nonzero(total)?)
}

/// `100 · √n · √Σ(s − m)² / Σ m`, i.e. RMSD over the mean measurement.
pub fn cvrmse(pair: SeriesPair<'_>) -> Result<f64> {
    let mut sq = 0.0;
    let mut total = 0.0;
    for (s, m) in pair.simulated.iter().zip(pair.measured) {
        let d = s - m;
        sq += d * d;
        total += m;
    }
    let n = pair.len() as f64;
    Ok(100.0 * n.sqrt() * sq.sqrt() / nonzero(total)?)
}

/// Goodness of fit: `(√2/2) · √(CVRMSE² + NMBE²)`.
pub fn gof(nmbe: f64, cvrmse: f64) -> f64 {
    FRAC_1_SQRT_2 * (cvrmse * cvrmse + nmbe * nmbe).sqrt()
}

fn check_weights(pair: SeriesPair<'_>, weights: &[f64]) -> Result<()> {
    if weights.len() != pair.len() {
        return Err(Error::LengthMismatch {
            expected: pair.len(),
            got: weights.len(),
        });
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::invalid("weights", "weights must be non-negative"));
    }
    Ok(())
}

/// `100 · Σ w(s − m) / Σ w m`.
pub fn weighted_nmbe(pair: SeriesPair<'_>, weights: &[f64]) -> Result<f64> {
    check_weights(pair, weights)?;
    let mut bias = 0.0;
    let mut total = 0.0;
    for ((s, m), w) in pair.simulated.iter().zip(pair.measured).zip(weights) {
        bias += w * (s - m);
        total += w * m;
    }
    Ok(100.0 * bias / nonzero(total)?)
}

/// `100 · √n_pop · √Σ w(s − m)² / Σ w m`, where `n_pop` counts the points of
/// the complete measured data.
pub fn weighted_cvrmse(pair: SeriesPair<'_>, weights: &[f64], n_pop: usize) -> Result<f64> {
    check_weights(pair, weights)?;
    if n_pop == 0 {
        return Err(Error::invalid("n_pop", "must be at least 1"));
    }
    let mut sq = 0.0;
    let mut total = 0.0;
    for ((s, m), w) in pair.simulated.iter().zip(pair.measured).zip(weights) {
        let d = s - m;
        sq += w * (d * d);
        total += w * m;
    }
    let n = n_pop as f64;
    Ok(100.0 * n.sqrt() * sq.sqrt() / nonzero(total)?)
}

/// Root-mean-square distance between a reference error and its estimates.
pub fn estimate_rmse(reference: f64, estimates: &[f64]) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::EmptyInput);
    }
    let sq: f64 = estimates
        .iter()
        .map(|e| (reference - e) * (reference - e))
        .sum();
    Ok((sq / estimates.len() as f64).sqrt())
}

/// Empirical percentile of sorted data with linear interpolation between
/// order statistics (`h = (n − 1)·p`).
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// RMSE against the reference, median and empirical 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateSummary {
    pub rmse: f64,
    pub median: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    pub n_estimates: usize,
}

/// Summarises repeated estimates of a single reference error. Median and
/// interval are in GOF percent.
pub fn summarize(reference: f64, estimates: &[f64]) -> Result<EstimateSummary> {
    let rmse = estimate_rmse(reference, estimates)?;
    let s = sorted(estimates);
    Ok(EstimateSummary {
        rmse,
        median: percentile(&s, 0.5),
        ci95_low: percentile(&s, 0.025),
        ci95_high: percentile(&s, 0.975),
        n_estimates: s.len(),
    })
}

/// Summarises `(reference, estimate)` pairs pooled over several references.
///
/// The RMSE pools squared deviations; median and interval describe the
/// deviation `estimate − reference` in GOF points, so that pooling over
/// references with different magnitudes keeps bias and spread readable.
pub fn summarize_pooled(pairs: &[(f64, f64)]) -> Result<EstimateSummary> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let deviations: Vec<f64> = pairs.iter().map(|(r, e)| e - r).collect();
    let sq: f64 = deviations.iter().map(|d| d * d).sum();
    let s = sorted(&deviations);
    Ok(EstimateSummary {
        rmse: (sq / pairs.len() as f64).sqrt(),
        median: percentile(&s, 0.5),
        ci95_low: percentile(&s, 0.025),
        ci95_high: percentile(&s, 0.975),
        n_estimates: s.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pair<'a>(s: &'a [f64], m: &'a [f64]) -> SeriesPair<'a> {
        SeriesPair::new(s, m).unwrap()
    }

    #[test]
    fn nmbe_examples() {
        assert_eq!(nmbe(pair(&[1.0, 2.0], &[1.0, 2.0])).unwrap(), 0.0);
        assert_relative_eq!(nmbe(pair(&[2.0, 2.0], &[1.0, 1.0])).unwrap(), 100.0, max_relative = 1e-9);
        assert_eq!(nmbe(pair(&[1.0, 3.0], &[2.0, 2.0])).unwrap(), 0.0);
        assert_eq!(nmbe(pair(&[1.0, 3.0], &[0.0, 0.0])), Err(Error::ZeroDenominator));
    }

    #[test]
    fn cvrmse_examples() {
        assert_eq!(cvrmse(pair(&[1.0, 2.0], &[1.0, 2.0])).unwrap(), 0.0);
        assert_relative_eq!(cvrmse(pair(&[1.0, 3.0], &[2.0, 2.0])).unwrap(), 50.0, max_relative = 1e-9);
        let p = pair(&[3.0, 3.0], &[2.0, 2.0]);
        assert_relative_eq!(cvrmse(p).unwrap(), 50.0, max_relative = 1e-9);
        assert_relative_eq!(nmbe(p).unwrap(), 50.0, max_relative = 1e-9);
    }

    #[test]
    fn gof_examples() {
        assert_eq!(gof(0.0, 0.0), 0.0);
        assert_relative_eq!(gof(3.0, 4.0), 2.5 * 2f64.sqrt(), max_relative = 1e-12);
        for x in [0.5, 1.0, 7.25, 100.0] {
            assert_relative_eq!(gof(x, x), x, max_relative = 1e-12);
        }
    }

    #[test]
    fn weighted_examples() {
        let p = pair(&[3.0, 9.0], &[2.0, 5.0]);
        let w = [2.0, 0.0];
        assert_relative_eq!(weighted_nmbe(p, &w).unwrap(), 50.0, max_relative = 1e-9);
        assert_relative_eq!(weighted_cvrmse(p, &w, 2).unwrap(), 50.0, max_relative = 1e-9);
        let same = pair(&[1.0, 4.0], &[1.0, 4.0]);
        assert_eq!(weighted_cvrmse(same, &[0.3, 7.0], 10).unwrap(), 0.0);
        assert!(weighted_nmbe(p, &[1.0, -1.0]).is_err());
        assert_eq!(weighted_nmbe(p, &[0.0, 0.0]), Err(Error::ZeroDenominator));
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(estimate_rmse(10.0, &[10.0, 10.0, 10.0]).unwrap(), 0.0);
        assert_relative_eq!(estimate_rmse(10.0, &[9.0, 11.0]).unwrap(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(estimate_rmse(0.0, &[3.0, 4.0]).unwrap(), 12.5f64.sqrt(), max_relative = 1e-12);
        assert_eq!(estimate_rmse(1.0, &[]), Err(Error::EmptyInput));
    }

    #[test]
    fn summary_examples() {
        let s = summarize(5.0, &[5.0; 4]).unwrap();
        assert_eq!((s.median, s.ci95_low, s.ci95_high), (5.0, 5.0, 5.0));
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        let s = summarize(50.0, &v).unwrap();
        // numpy.percentile(range(1, 101), [50, 2.5, 97.5]) -> 50.5, 3.475, 97.525
        assert_relative_eq!(s.median, 50.5, max_relative = 1e-12);
        assert_relative_eq!(s.ci95_low, 3.475, max_relative = 1e-12);
        assert_relative_eq!(s.ci95_high, 97.525, max_relative = 1e-12);
        let mut v = vec![2.0; 100];
        v[17] = 1e6;
        assert_eq!(summarize(2.0, &v).unwrap().median, 2.0);
        assert_eq!(summarize(1.0, &[]), Err(Error::EmptyInput));
    }

    #[test]
    fn pooled_summary_reports_deviations() {
        let s = summarize_pooled(&[(10.0, 11.0), (20.0, 19.0), (5.0, 5.0)]).unwrap();
        assert_eq!(s.median, 0.0);
        assert_relative_eq!(s.rmse, (2.0f64 / 3.0).sqrt(), max_relative = 1e-12);
    }

    fn series() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..40).prop_flat_map(|n| {
            (
                proptest::collection::vec(0.0f64..50.0, n),
                proptest::collection::vec(0.1f64..50.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn unit_weights_reduce_to_unweighted((s, m) in series()) {
            let p = pair(&s, &m);
            let w = vec![1.0; s.len()];
            prop_assert_eq!(weighted_nmbe(p, &w).unwrap(), nmbe(p).unwrap());
            prop_assert_eq!(weighted_cvrmse(p, &w, s.len()).unwrap(), cvrmse(p).unwrap());
        }

        #[test]
        fn scale_invariance((s, m) in series(), c in 0.01f64..100.0) {
            let a = ErrorMetrics::of(pair(&s, &m)).unwrap();
            let cs: Vec<f64> = s.iter().map(|v| v * c).collect();
            let cm: Vec<f64> = m.iter().map(|v| v * c).collect();
            let b = ErrorMetrics::of(pair(&cs, &cm)).unwrap();
            prop_assert!((a.nmbe - b.nmbe).abs() <= 1e-9 * (1.0 + a.nmbe.abs()));
            prop_assert!((a.cvrmse - b.cvrmse).abs() <= 1e-9 * (1.0 + a.cvrmse));
            prop_assert!((a.gof - b.gof).abs() <= 1e-9 * (1.0 + a.gof));
        }

        #[test]
        fn gof_bounds(nmbe in -200.0f64..200.0, cv in 0.0f64..200.0) {
            let g = gof(nmbe, cv);
            let hi = nmbe.abs().max(cv);
            prop_assert!(FRAC_1_SQRT_2 * hi <= g * (1.0 + 1e-12));
            prop_assert!(g <= hi * (1.0 + 1e-12));
        }

        #[test]
        fn weight_scale_invariance((s, m) in series(), c in 0.01f64..100.0) {
            let w: Vec<f64> = (0..s.len()).map(|i| 0.5 + (i % 3) as f64).collect();
            let cw: Vec<f64> = w.iter().map(|v| v * c).collect();
            let p = pair(&s, &m);
            let a = weighted_nmbe(p, &w).unwrap();
            let b = weighted_nmbe(p, &cw).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
            // Eq. 4 scales as 1/sqrt(c): invariance only holds once weights are
            // normalised to the population total
            let a = weighted_cvrmse(p, &w, 7).unwrap();
            let b = weighted_cvrmse(p, &cw, 7).unwrap() * c.sqrt();
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a));
        }
    }
}
