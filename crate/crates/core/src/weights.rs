//! Nonresponse weighting for partially observed series.
//!
//! Hours are weighted in three steps: an availability factor inflating the
//! observed hours of each day to the day's population hours, a day-level
//! calibration factor (cell weighting on joint bins or raking on marginal
//! bins of daily feature scores), and a global scale so the weights sum to
//! the population point count.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{ErrorMetrics, SeriesPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Calibration {
    Cell,
    Rake,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RakeConfig {
    pub max_iter: usize,
    /// Maximum relative marginal deviation accepted as converged.
    pub tol: f64,
}

impl Default for RakeConfig {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            tol: 0.01,
        }
    }
}

/// How the day-level factors were obtained.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WeightRecord {
    /// Raking cycles performed.
    pub iterations: usize,
    /// Final max relative marginal deviation (raking) or 0 (cells).
    pub max_deviation: f64,
    pub converged: bool,
    /// Components dropped by the cell collapse rule.
    pub collapsed_components: usize,
    /// Population bins whose mass was redistributed before raking.
    pub redistributed_bins: usize,
    /// Calibration was infeasible; only availability factors were applied.
    pub fallback: bool,
}

/// Per-hour weights over the full grid, zero at unobserved hours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub weights: Vec<f64>,
    pub method: Calibration,
    pub record: WeightRecord,
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, got })
    }
}

/// Availability factor per hour: population hours of the day over sample
/// hours of the day at every sample hour, 0 elsewhere. The sample must be a
/// subset of the population.
pub fn availability_weights(
    population: &[bool],
    sample: &[bool],
    spans: &[Range<usize>],
) -> Result<Vec<f64>> {
    check_len(population.len(), sample.len())?;
    if sample.iter().zip(population).any(|(&s, &p)| s && !p) {
        return Err(Error::invalid("sample", "observed outside the population"));
    }
    let mut out = vec![0.0; sample.len()];
    for span in spans {
        let pop = population[span.clone()].iter().filter(|&&p| p).count();
        let obs = sample[span.clone()].iter().filter(|&&s| s).count();
        if obs == 0 {
            continue;
        }
        let factor = pop as f64 / obs as f64;
        for i in span.clone().filter(|&i| sample[i]) {
            out[i] = factor;
        }
    }
    Ok(out)
}

/// Cell-weighting result over population days.
#[derive(Debug, Clone, PartialEq)]
pub struct CellFactors {
    /// Factor per population day, 0 for nonrespondents.
    pub factors: Vec<f64>,
    /// Leading components forming the final cells.
    pub components_used: usize,
}

/// Post-stratification factors: population over respondent count of each
/// joint cell. While some populated cell has no respondent the last
/// component is dropped and cells are re-formed.
pub fn cell_weights(cells: &[Vec<usize>], respondent: &[bool]) -> Result<CellFactors> {
    check_len(cells.len(), respondent.len())?;
    if !respondent.iter().any(|&r| r) {
        return Err(Error::WeightingInfeasible("no respondent days"));
    }
    let k_max = cells.iter().map(Vec::len).min().unwrap_or(0);
    let mut k = k_max;
    loop {
        let mut counts: BTreeMap<&[usize], (usize, usize)> = BTreeMap::new();
        for (cell, &r) in cells.iter().zip(respondent) {
            let entry = counts.entry(&cell[..k]).or_insert((0, 0));
            entry.0 += 1;
            entry.1 += r as usize;
        }
        if counts.values().all(|&(_, resp)| resp > 0) {
            let factors = cells
                .iter()
                .zip(respondent)
                .map(|(cell, &r)| {
                    if r {
                        let (pop, resp) = counts[&cell[..k]];
                        pop as f64 / resp as f64
                    } else {
                        0.0
                    }
                })
                .collect();
            return Ok(CellFactors {
                factors,
                components_used: k,
            });
        }
        // k = 0 is a single cell, which has respondents
        k -= 1;
    }
}

/// Population day counts per bin of each component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marginals {
    pub counts: Vec<Vec<f64>>,
}

impl Marginals {
    /// Tallies population bin tuples; `n_bins[c]` bounds component `c`.
    pub fn from_cells(cells: &[Vec<usize>], n_bins: &[usize]) -> Result<Self> {
        let mut counts: Vec<Vec<f64>> = n_bins.iter().map(|&q| vec![0.0; q]).collect();
        for cell in cells {
            check_len(n_bins.len(), cell.len())?;
            for (c, &b) in cell.iter().enumerate() {
                if b >= n_bins[c] {
                    return Err(Error::invalid("cells", "bin index out of range"));
                }
                counts[c][b] += 1.0;
            }
        }
        Ok(Self { counts })
    }
}

/// Raking result over respondent days.
#[derive(Debug, Clone, PartialEq)]
pub struct RakeFactors {
    /// Factor per respondent day, in input order.
    pub factors: Vec<f64>,
    pub iterations: usize,
    pub max_deviation: f64,
    pub converged: bool,
    pub redistributed_bins: usize,
}

fn max_deviation(targets: &[Vec<f64>], bins: &[Vec<usize>], w: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for (c, target) in targets.iter().enumerate() {
        let mut totals = vec![0.0; target.len()];
        for (cell, wi) in bins.iter().zip(w) {
            totals[cell[c]] += wi;
        }
        for (t, p) in totals.iter().zip(target) {
            if *p > 0.0 {
                worst = worst.max((t - p).abs() / p);
            }
        }
    }
    worst
}

/// Lower bound on raked day factors; incompatible marginals otherwise drive
/// some factors to zero.
pub const WEIGHT_FLOOR: f64 = 1e-9;

/// Iterative proportional fitting of respondent day weights (starting at 1)
/// to the population marginals of every component.
pub fn rake_weights(
    marginals: &Marginals,
    bins: &[Vec<usize>],
    max_iter: usize,
    tol: f64,
) -> Result<RakeFactors> {
    if bins.is_empty() {
        return Err(Error::WeightingInfeasible("no respondent days"));
    }
    let k = marginals.counts.len();
    for cell in bins {
        check_len(k, cell.len())?;
        if cell.iter().zip(&marginals.counts).any(|(&b, m)| b >= m.len()) {
            return Err(Error::invalid("bins", "bin index out of range"));
        }
    }

    // move population mass of respondent-free bins onto the component's other bins
    let mut redistributed_bins = 0;
    let mut targets = Vec::with_capacity(k);
    for (c, pop) in marginals.counts.iter().enumerate() {
        let mut has_resp = vec![false; pop.len()];
        for cell in bins {
            has_resp[cell[c]] = true;
        }
        let total: f64 = pop.iter().sum();
        let covered: f64 = pop.iter().zip(&has_resp).filter(|(_, &h)| h).map(|(p, _)| p).sum();
        if !(covered > 0.0) {
            return Err(Error::WeightingInfeasible("respondents fall in empty population bins"));
        }
        redistributed_bins += pop
            .iter()
            .zip(&has_resp)
            .filter(|(&p, &h)| p > 0.0 && !h)
            .count();
        let scale = total / covered;
        targets.push(
            pop.iter()
                .zip(&has_resp)
                .map(|(&p, &h)| if h { p * scale } else { 0.0 })
                .collect::<Vec<f64>>(),
        );
    }

    let mut w = vec![1.0; bins.len()];
    let mut deviation = max_deviation(&targets, bins, &w);
    let mut iterations = 0;
    while deviation >= tol && iterations < max_iter {
        for (c, target) in targets.iter().enumerate() {
            let mut totals = vec![0.0; target.len()];
            for (cell, wi) in bins.iter().zip(&w) {
                totals[cell[c]] += wi;
            }
            for (cell, wi) in bins.iter().zip(w.iter_mut()) {
                *wi = (*wi * target[cell[c]] / totals[cell[c]]).max(WEIGHT_FLOOR);
            }
        }
        iterations += 1;
        deviation = max_deviation(&targets, bins, &w);
    }
    Ok(RakeFactors {
        factors: w,
        iterations,
        max_deviation: deviation,
        converged: deviation < tol,
        redistributed_bins,
    })
}

/// Scales weights so they sum to `n_pop`.
pub fn match_population_total(weights: &[f64], n_pop: usize) -> Result<Vec<f64>> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::ZeroDenominator);
    }
    let scale = n_pop as f64 / total;
    Ok(weights.iter().map(|w| w * scale).collect())
}

/// Weighted NMBE, CVRMSE and GOF over observed points.
pub fn weighted_error(
    simulated: &[f64],
    measured: &[f64],
    weights: &[f64],
    n_pop: usize,
) -> Result<ErrorMetrics> {
    ErrorMetrics::weighted(SeriesPair::new(simulated, measured)?, weights, n_pop)
}

/// Full three-step pipeline.
///
/// `day_bins[d]` is the bin tuple of day `d` (aligned with `spans`); only
/// days holding population hours are read. Returns per-hour weights over the
/// grid summing to the population point count.
pub fn hourly_weights(
    method: Calibration,
    population: &[bool],
    sample: &[bool],
    spans: &[Range<usize>],
    day_bins: &[Vec<usize>],
    n_bins: &[usize],
    rake: &RakeConfig,
) -> Result<WeightVector> {
    check_len(spans.len(), day_bins.len())?;
    let availability = availability_weights(population, sample, spans)?;
    let mut pop_days = Vec::new();
    let mut respondent = Vec::new();
    for (d, span) in spans.iter().enumerate() {
        if population[span.clone()].iter().any(|&p| p) {
            pop_days.push(d);
            respondent.push(sample[span.clone()].iter().any(|&s| s));
        }
    }
    let cells: Vec<Vec<usize>> = pop_days.iter().map(|&d| day_bins[d].clone()).collect();

    let mut record = WeightRecord::default();
    let calibrated: Result<Vec<f64>> = match method {
        Calibration::Cell => cell_weights(&cells, &respondent).map(|cf| {
            record.collapsed_components = n_bins.len().saturating_sub(cf.components_used);
            record.converged = true;
            cf.factors
        }),
        Calibration::Rake => {
            let marginals = Marginals::from_cells(&cells, n_bins)?;
            let resp_cells: Vec<Vec<usize>> = cells
                .iter()
                .zip(&respondent)
                .filter(|(_, &r)| r)
                .map(|(c, _)| c.clone())
                .collect();
            rake_weights(&marginals, &resp_cells, rake.max_iter, rake.tol).map(|rf| {
                record.iterations = rf.iterations;
                record.max_deviation = rf.max_deviation;
                record.converged = rf.converged;
                record.redistributed_bins = rf.redistributed_bins;
                let mut it = rf.factors.into_iter();
                respondent
                    .iter()
                    .map(|&r| if r { it.next().unwrap_or(0.0) } else { 0.0 })
                    .collect()
            })
        }
    };
    let day_factors = match calibrated {
        Ok(f) => f,
        Err(Error::WeightingInfeasible(why)) => {
            log::debug!("calibration infeasible ({why}); availability weights only");
            record.fallback = true;
            respondent.iter().map(|&r| if r { 1.0 } else { 0.0 }).collect()
        }
        Err(e) => return Err(e),
    };

    let mut hourly = availability;
    for (&d, f) in pop_days.iter().zip(&day_factors) {
        for i in spans[d].clone() {
            hourly[i] *= f;
        }
    }
    let n_pop = population.iter().filter(|&&p| p).count();
    Ok(WeightVector {
        weights: match_population_total(&hourly, n_pop)?,
        method,
        record,
    })
}
