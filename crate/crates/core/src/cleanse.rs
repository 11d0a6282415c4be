//! Exclusion of unrealistic, quantised and malfunction-period data.
//!
//! Rules run in a fixed order (outlier, quantised, malfunction, manual) and the
//! first rule that flags an index owns it in the report. Cleansing only ever
//! removes observations; it never repairs them.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use chrono::NaiveDateTime;
#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{day_spans, HourlyRecord, MeasuredSeries};

/// Shortest window on which quantisation is judged (one day).
pub const MIN_QUANTISATION_WINDOW: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flag {
    Outlier,
    Quantised,
    Malfunction,
    Manual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CleanseConfig {
    /// Sigma multiplier of the outlier rule.
    pub sigma_k: f64,
    /// A window is quantised when distinct values / length falls below this.
    pub min_distinct_ratio: f64,
    /// Runs of at least this many inverted-temperature hours are widened by an
    /// hour on each side.
    pub malfunction_min_run: usize,
    /// Inclusive periods excluded by hand.
    pub manual: Vec<(NaiveDateTime, NaiveDateTime)>,
}

impl Default for CleanseConfig {
    fn default() -> Self {
        Self {
            sigma_k: 3.0,
            min_distinct_ratio: 0.05,
            malfunction_min_run: 6,
            manual: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagCounts {
    pub outlier: usize,
    pub quantised: usize,
    pub malfunction: usize,
    pub manual: usize,
}

/// Outcome of [`apply_cleansing`].
///
/// `flags` counts observed points removed by each rule. Points that were
/// already unobserved are counted once in `already_missing`, so
/// `flags + already_missing + retained == len`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanseReport {
    pub flags: FlagCounts,
    pub already_missing: usize,
    /// Rule hits that landed on already-unobserved points.
    pub flagged_while_missing: usize,
    pub retained: usize,
    pub missingness: f64,
    #[serde(skip)]
    pub per_index: Vec<Option<Flag>>,
}

/// Indices of observed points with `|x − mean| > k·std` (population std over
/// observed points). With zero spread every point different from the mean is
/// flagged.
pub fn detect_sigma_outliers(values: &[f64], mask: &[bool], k: f64) -> Result<Vec<usize>> {
    if values.len() != mask.len() {
        return Err(Error::LengthMismatch {
            expected: values.len(),
            got: mask.len(),
        });
    }
    if !(k > 0.0) {
        return Err(Error::invalid("sigma_k", "must be positive"));
    }
    let observed: Vec<f64> = values
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&v, _)| v)
        .collect();
    if observed.len() < 10 {
        return Err(Error::InsufficientData {
            needed: 10,
            got: observed.len(),
        });
    }
    let n = observed.len() as f64;
    let mean = observed.iter().sum::<f64>() / n;
    let var = observed.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    Ok(values
        .iter()
        .zip(mask)
        .enumerate()
        .filter(|(_, (&v, &m))| {
            m && if std == 0.0 {
                v != mean
            } else {
                (v - mean).abs() > k * std
            }
        })
        .map(|(i, _)| i)
        .collect())
}

/// Distinct observed values over observed count, or `None` when the window
/// has fewer than [`MIN_QUANTISATION_WINDOW`] observations.
pub fn distinct_ratio(values: &[f64], mask: &[bool]) -> Option<f64> {
    let mut observed: Vec<u64> = values
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(v, _)| v.to_bits())
        .collect();
    if observed.len() < MIN_QUANTISATION_WINDOW {
        return None;
    }
    let len = observed.len();
    observed.sort_unstable();
    observed.dedup();
    Some(observed.len() as f64 / len as f64)
}

/// One flag per window: true when its distinct-value ratio is strictly below
/// `min_distinct_ratio`.
pub fn detect_quantisation(
    values: &[f64],
    mask: &[bool],
    windows: &[Range<usize>],
    min_distinct_ratio: f64,
) -> Vec<bool> {
    windows
        .iter()
        .map(|w| {
            distinct_ratio(&values[w.clone()], &mask[w.clone()])
                .is_some_and(|r| r < min_distinct_ratio)
        })
        .collect()
}

/// Hours whose return temperature exceeds the supply temperature. A run of at
/// least `min_run` such hours is widened by one hour on each side.
pub fn detect_malfunction(records: &[HourlyRecord], min_run: usize) -> Result<Vec<usize>> {
    if !records
        .iter()
        .any(|r| r.supply_temp.is_some() && r.return_temp.is_some())
    {
        return Err(Error::NotApplicable("supply/return temperatures are absent"));
    }
    let inverted: Vec<bool> = records
        .iter()
        .map(|r| match (r.supply_temp, r.return_temp) {
            (Some(s), Some(ret)) => ret > s,
            _ => false,
        })
        .collect();
    let n = inverted.len();
    let mut flagged = inverted.clone();
    let mut i = 0;
    while i < n {
        if !inverted[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && inverted[i] {
            i += 1;
        }
        if i - start >= min_run.max(1) {
            if start > 0 {
                flagged[start - 1] = true;
            }
            if i < n {
                flagged[i] = true;
            }
        }
    }
    Ok(flagged
        .iter()
        .enumerate()
        .filter(|(_, &f)| f)
        .map(|(i, _)| i)
        .collect())
}

/// Runs every rule and clears flagged points from the mask.
///
/// Negative power readings are physically impossible and are attributed to
/// the outlier rule.
pub fn apply_cleansing(
    series: &MeasuredSeries,
    records: Option<&[HourlyRecord]>,
    cfg: &CleanseConfig,
) -> Result<(MeasuredSeries, CleanseReport)> {
    let n = series.len();
    let values = series.values();
    let mask = series.mask();
    if let Some(recs) = records {
        if recs.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: recs.len(),
            });
        }
        if recs
            .iter()
            .zip(series.timestamps())
            .any(|(r, t)| r.timestamp != *t)
        {
            return Err(Error::Schema("records are not aligned with the series".into()));
        }
    }

    let mut per_index: Vec<Option<Flag>> = vec![None; n];
    let mut mark = |i: usize, flag: Flag| {
        if per_index[i].is_none() {
            per_index[i] = Some(flag);
        }
    };

    for i in 0..n {
        if mask[i] && values[i] < 0.0 {
            mark(i, Flag::Outlier);
        }
    }
    match detect_sigma_outliers(values, mask, cfg.sigma_k) {
        Ok(idx) => idx.into_iter().for_each(|i| mark(i, Flag::Outlier)),
        Err(Error::InsufficientData { .. }) => {}
        Err(e) => return Err(e),
    }

    let days = day_spans(series.timestamps());
    let quantised = detect_quantisation(values, mask, &days, cfg.min_distinct_ratio);
    for (day, q) in days.iter().zip(quantised) {
        if q {
            day.clone().for_each(|i| mark(i, Flag::Quantised));
        }
    }

    if let Some(recs) = records {
        match detect_malfunction(recs, cfg.malfunction_min_run) {
            Ok(idx) => idx.into_iter().for_each(|i| mark(i, Flag::Malfunction)),
            Err(Error::NotApplicable(_)) => {}
            Err(e) => return Err(e),
        }
    }

    for (from, to) in &cfg.manual {
        for (i, ts) in series.timestamps().iter().enumerate() {
            if ts >= from && ts <= to {
                mark(i, Flag::Manual);
            }
        }
    }

    let mut counts = FlagCounts::default();
    let mut already_missing = 0;
    let mut flagged_while_missing = 0;
    let mut new_mask = mask.to_vec();
    for i in 0..n {
        if !mask[i] {
            already_missing += 1;
            if per_index[i].is_some() {
                flagged_while_missing += 1;
            }
            continue;
        }
        if let Some(flag) = per_index[i] {
            new_mask[i] = false;
            match flag {
                Flag::Outlier => counts.outlier += 1,
                Flag::Quantised => counts.quantised += 1,
                Flag::Malfunction => counts.malfunction += 1,
                Flag::Manual => counts.manual += 1,
            }
        }
    }
    let cleaned = series.with_mask(new_mask)?;
    let report = CleanseReport {
        flags: counts,
        already_missing,
        flagged_while_missing,
        retained: cleaned.observed_count(),
        missingness: cleaned.missingness(),
        per_index,
    };
    Ok((cleaned, report))
}
