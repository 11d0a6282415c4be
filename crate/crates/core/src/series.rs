//! Core data types: measured and weather series on an hourly grid, simulation
//! ensembles and parameter combinations.
//!
//! Timestamps are naive local times. Daylight-saving transitions are not
//! modelled; every series lives on a grid of whole hours.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One hourly heat-meter reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HourlyRecord {
    pub timestamp: NaiveDateTime,
    /// Average heating power over the hour, MW.
    pub power: f64,
    /// Flow rate, m³/h.
    pub flow: Option<f64>,
    /// Supply temperature, °C.
    pub supply_temp: Option<f64>,
    /// Return temperature, °C.
    pub return_temp: Option<f64>,
}

impl HourlyRecord {
    pub fn validate(&self) -> Result<()> {
        if !is_whole_hour(&self.timestamp) {
            return Err(Error::Grid(self.timestamp));
        }
        if self.power < 0.0 || self.flow.is_some_and(|f| f < 0.0) {
            return Err(Error::invalid("power", "negative reading"));
        }
        Ok(())
    }
}

pub fn is_whole_hour(ts: &NaiveDateTime) -> bool {
    ts.minute() == 0 && ts.second() == 0 && ts.nanosecond() == 0
}

fn check_grid(timestamps: &[NaiveDateTime]) -> Result<()> {
    if timestamps.is_empty() {
        return Err(Error::EmptyInput);
    }
    for ts in timestamps {
        if !is_whole_hour(ts) {
            return Err(Error::Grid(*ts));
        }
    }
    for w in timestamps.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Unordered(w[1]));
        }
    }
    Ok(())
}

/// Measured load of one substation with its availability mask.
///
/// `mask[i] == true` means the value at `i` was observed. Values at unobserved
/// indices are placeholders (0.0) and estimators never read them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasuredSeries {
    substation_id: String,
    timestamps: Vec<NaiveDateTime>,
    values: Vec<f64>,
    mask: Vec<bool>,
}

impl MeasuredSeries {
    pub fn new(
        substation_id: impl Into<String>,
        timestamps: Vec<NaiveDateTime>,
        values: Vec<f64>,
        mask: Vec<bool>,
    ) -> Result<Self> {
        check_grid(&timestamps)?;
        for len in [values.len(), mask.len()] {
            if len != timestamps.len() {
                return Err(Error::LengthMismatch {
                    expected: timestamps.len(),
                    got: len,
                });
            }
        }
        Ok(Self {
            substation_id: substation_id.into(),
            timestamps,
            values,
            mask,
        })
    }

    /// Builds a densified hourly series from (possibly unordered) readings.
    ///
    /// Every hour between the first and last reading gets a slot; hours absent
    /// from the input, or present with `None`, become unobserved.
    pub fn from_observations(
        substation_id: impl Into<String>,
        mut observations: Vec<(NaiveDateTime, Option<f64>)>,
    ) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::EmptyInput);
        }
        observations.sort_by_key(|(ts, _)| *ts);
        for (ts, _) in &observations {
            if !is_whole_hour(ts) {
                return Err(Error::Grid(*ts));
            }
        }
        for w in observations.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::Duplicate(w[1].0));
            }
        }
        let first = observations[0].0;
        let last = observations[observations.len() - 1].0;
        let n = (last - first).num_hours() as usize + 1;
        let mut timestamps = Vec::with_capacity(n);
        let mut values = vec![0.0; n];
        let mut mask = vec![false; n];
        for i in 0..n {
            timestamps.push(first + Duration::hours(i as i64));
        }
        for (ts, value) in observations {
            let i = (ts - first).num_hours() as usize;
            if let Some(v) = value {
                values[i] = v;
                mask[i] = true;
            }
        }
        Self::new(substation_id, timestamps, values, mask)
    }

    pub fn substation_id(&self) -> &str {
        &self.substation_id
    }

    pub fn timestamps(&self) -> &[NaiveDateTime] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn observed_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Fraction of grid slots that are unobserved.
    pub fn missingness(&self) -> f64 {
        1.0 - self.observed_count() as f64 / self.len() as f64
    }

    /// `(value, observed)` pairs; `None` for unobserved slots.
    pub fn observed(&self) -> impl Iterator<Item = Option<f64>> + '_ {
        self.values
            .iter()
            .zip(&self.mask)
            .map(|(&v, &m)| if m { Some(v) } else { None })
    }

    /// Same series with a replacement mask.
    pub fn with_mask(&self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: mask.len(),
            });
        }
        Ok(Self {
            mask,
            ..self.clone()
        })
    }

    /// Same series with replacement values; the mask is kept.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: values.len(),
            });
        }
        Ok(Self {
            values,
            ..self.clone()
        })
    }

    /// Re-expresses the series on another grid. Hours of `grid` that this
    /// series does not cover are unobserved.
    pub fn align_to(&self, grid: &[NaiveDateTime]) -> Result<Self> {
        check_grid(grid)?;
        let mut values = vec![0.0; grid.len()];
        let mut mask = vec![false; grid.len()];
        let mut j = 0;
        for (i, ts) in grid.iter().enumerate() {
            while j < self.timestamps.len() && self.timestamps[j] < *ts {
                j += 1;
            }
            if j < self.timestamps.len() && self.timestamps[j] == *ts {
                values[i] = self.values[j];
                mask[i] = self.mask[j];
            }
        }
        Self::new(self.substation_id.clone(), grid.to_vec(), values, mask)
    }
}

/// Descriptive metadata of a sampled substation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubstationMeta {
    pub substation_id: String,
    pub year_built: i32,
    /// Useful floor area, m².
    pub floor_area: f64,
    /// Fraction of the validation period without data.
    pub missingness: f64,
}

impl SubstationMeta {
    pub fn new(
        substation_id: impl Into<String>,
        year_built: i32,
        floor_area: f64,
        missingness: f64,
    ) -> Result<Self> {
        if !(floor_area > 0.0) {
            return Err(Error::invalid("floor_area", "must be positive"));
        }
        if !(0.0..=1.0).contains(&missingness) {
            return Err(Error::invalid("missingness", "must lie in [0, 1]"));
        }
        Ok(Self {
            substation_id: substation_id.into(),
            year_built,
            floor_area,
            missingness,
        })
    }

    pub fn from_series(series: &MeasuredSeries, year_built: i32, floor_area: f64) -> Result<Self> {
        Self::new(
            series.substation_id(),
            year_built,
            floor_area,
            series.missingness(),
        )
    }
}

/// Complete hourly weather on the same grid contract as [`MeasuredSeries`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherSeries {
    timestamps: Vec<NaiveDateTime>,
    outdoor_temp: Vec<f64>,
    ghi: Vec<f64>,
    wind: Vec<f64>,
}

impl WeatherSeries {
    pub fn new(
        timestamps: Vec<NaiveDateTime>,
        outdoor_temp: Vec<f64>,
        ghi: Vec<f64>,
        wind: Vec<f64>,
    ) -> Result<Self> {
        check_grid(&timestamps)?;
        for col in [&outdoor_temp, &ghi, &wind] {
            if col.len() != timestamps.len() {
                return Err(Error::LengthMismatch {
                    expected: timestamps.len(),
                    got: col.len(),
                });
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("weather", "non-finite value"));
            }
        }
        if ghi.iter().any(|&g| g < 0.0) {
            return Err(Error::invalid("ghi", "negative irradiance"));
        }
        Ok(Self {
            timestamps,
            outdoor_temp,
            ghi,
            wind,
        })
    }

    pub fn timestamps(&self) -> &[NaiveDateTime] {
        &self.timestamps
    }

    /// Outdoor dry-bulb temperature, °C.
    pub fn outdoor_temp(&self) -> &[f64] {
        &self.outdoor_temp
    }

    /// Global horizontal irradiance, W/m².
    pub fn ghi(&self) -> &[f64] {
        &self.ghi
    }

    /// Wind speed, m/s.
    pub fn wind(&self) -> &[f64] {
        &self.wind
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }
}

/// One point of the calibrated parameter space, in [`crate::synth::default_space`]
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterCombination(pub Vec<f64>);

impl ParameterCombination {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Simulated hourly loads, one row per parameter combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationEnsemble {
    combinations: Vec<ParameterCombination>,
    loads: Vec<Vec<f64>>,
    calibration_gof: Vec<f64>,
}

impl SimulationEnsemble {
    pub fn new(combinations: Vec<ParameterCombination>, loads: Vec<Vec<f64>>) -> Result<Self> {
        if loads.is_empty() {
            return Err(Error::EmptyInput);
        }
        if combinations.len() != loads.len() {
            return Err(Error::LengthMismatch {
                expected: loads.len(),
                got: combinations.len(),
            });
        }
        let n = loads[0].len();
        for row in &loads {
            if row.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            if row.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(Error::invalid("loads", "simulated loads must be finite and non-negative"));
            }
        }
        Ok(Self {
            combinations,
            loads,
            calibration_gof: Vec::new(),
        })
    }

    /// Attaches per-combination calibration errors (GOF, %).
    pub fn with_calibration_gof(mut self, gof: Vec<f64>) -> Result<Self> {
        if gof.len() != self.loads.len() {
            return Err(Error::LengthMismatch {
                expected: self.loads.len(),
                got: gof.len(),
            });
        }
        self.calibration_gof = gof;
        Ok(self)
    }

    pub fn combinations(&self) -> &[ParameterCombination] {
        &self.combinations
    }

    pub fn loads(&self) -> &[Vec<f64>] {
        &self.loads
    }

    pub fn load(&self, combination: usize) -> &[f64] {
        &self.loads[combination]
    }

    /// Empty until calibration errors are attached.
    pub fn calibration_gof(&self) -> &[f64] {
        &self.calibration_gof
    }

    pub fn size(&self) -> usize {
        self.loads.len()
    }

    pub fn n_hours(&self) -> usize {
        self.loads[0].len()
    }

    /// Hour-by-hour mean over every combination.
    pub fn mean_profile(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.n_hours()];
        for row in &self.loads {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        let k = self.loads.len() as f64;
        mean.iter_mut().for_each(|m| *m /= k);
        mean
    }

    /// Keeps the hours where `keep` is true.
    pub fn select_hours(&self, keep: &[bool]) -> Result<Self> {
        if keep.len() != self.n_hours() {
            return Err(Error::LengthMismatch {
                expected: self.n_hours(),
                got: keep.len(),
            });
        }
        let loads = self
            .loads
            .iter()
            .map(|row| select(row, keep))
            .collect();
        Ok(Self {
            loads,
            ..self.clone()
        })
    }
}

fn select<T: Clone>(values: &[T], keep: &[bool]) -> Vec<T> {
    values
        .iter()
        .zip(keep)
        .filter(|(_, &k)| k)
        .map(|(v, _)| v.clone())
        .collect()
}

/// Types indexed by an hourly timestamp grid.
pub trait HourlyGrid: Sized {
    fn grid(&self) -> &[NaiveDateTime];
    /// Keeps the indices where `keep` is true.
    fn retain_hours(&self, keep: &[bool]) -> Self;
}

impl HourlyGrid for MeasuredSeries {
    fn grid(&self) -> &[NaiveDateTime] {
        &self.timestamps
    }

    fn retain_hours(&self, keep: &[bool]) -> Self {
        Self {
            substation_id: self.substation_id.clone(),
            timestamps: select(&self.timestamps, keep),
            values: select(&self.values, keep),
            mask: select(&self.mask, keep),
        }
    }
}

impl HourlyGrid for WeatherSeries {
    fn grid(&self) -> &[NaiveDateTime] {
        &self.timestamps
    }

    fn retain_hours(&self, keep: &[bool]) -> Self {
        Self {
            timestamps: select(&self.timestamps, keep),
            outdoor_temp: select(&self.outdoor_temp, keep),
            ghi: select(&self.ghi, keep),
            wind: select(&self.wind, keep),
        }
    }
}

/// First and last calendar day (month, day) of the removed summer window.
pub const SUMMER_START: (u32, u32) = (5, 29);
pub const SUMMER_END: (u32, u32) = (10, 13);

/// True when `date` falls in the summer window, bounds included.
pub fn in_summer_window(date: NaiveDate) -> bool {
    let md = (date.month(), date.day());
    md >= SUMMER_START && md <= SUMMER_END
}

/// Drops every hour dated 29 May to 13 October (inclusive) of any year.
pub fn filter_heating_season<T: HourlyGrid>(series: &T) -> T {
    let keep: Vec<bool> = series
        .grid()
        .iter()
        .map(|ts| !in_summer_window(ts.date()))
        .collect();
    series.retain_hours(&keep)
}

/// Index ranges of consecutive grid hours sharing a calendar date.
pub fn day_spans(timestamps: &[NaiveDateTime]) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    let mut start = 0;
    for i in 1..=timestamps.len() {
        if i == timestamps.len() || timestamps[i].date() != timestamps[start].date() {
            if i > start {
                spans.push(start..i);
            }
            start = i;
        }
    }
    spans
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(month: u32, day: u32, hour: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2021, month, day)
            .unwrap()
            .and_hms_opt(hour, 0, 0)
            .unwrap()
    }

    fn hourly(n: usize) -> Vec<NaiveDateTime> {
        (0..n).map(|i| ts(1, 1, 0) + Duration::hours(i as i64)).collect()
    }

    #[test]
    fn densifies_gaps_into_mask() {
        let obs = vec![
            (ts(1, 1, 0), Some(1.0)),
            (ts(1, 1, 1), Some(2.0)),
            (ts(1, 1, 3), Some(4.0)),
        ];
        let s = MeasuredSeries::from_observations("A", obs).unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s.mask(), &[true, true, false, true]);
        assert_eq!(s.values()[3], 4.0);
    }

    #[test]
    fn rejects_bad_grids() {
        assert_eq!(
            MeasuredSeries::from_observations("A", vec![]),
            Err(Error::EmptyInput)
        );
        let off = ts(1, 1, 0) + Duration::minutes(30);
        assert_eq!(
            MeasuredSeries::from_observations("A", vec![(ts(1, 1, 0), Some(1.0)), (off, Some(1.0))]),
            Err(Error::Grid(off))
        );
        assert_eq!(
            MeasuredSeries::from_observations(
                "A",
                vec![(ts(1, 1, 2), Some(1.0)), (ts(1, 1, 2), Some(3.0))]
            ),
            Err(Error::Duplicate(ts(1, 1, 2)))
        );
    }

    #[test]
    fn full_series_is_fully_observed() {
        let grid = hourly(5160);
        let obs = grid.iter().map(|t| (*t, Some(1.0))).collect();
        let s = MeasuredSeries::from_observations("SST16", obs).unwrap();
        assert_eq!(s.observed_count(), 5160);
        assert_eq!(s.missingness(), 0.0);
    }

    #[test]
    fn summer_window_bounds() {
        assert!(in_summer_window(ts(7, 1, 0).date()));
        assert!(in_summer_window(ts(5, 29, 0).date()));
        assert!(in_summer_window(ts(10, 13, 23).date()));
        assert!(!in_summer_window(ts(5, 28, 23).date()));
        assert!(!in_summer_window(ts(10, 14, 0).date()));
    }

    #[test]
    fn season_filter_is_idempotent_and_drops_summer() {
        let grid: Vec<_> = (0..365 * 24)
            .map(|i| ts(1, 1, 0) + Duration::hours(i))
            .collect();
        let n = grid.len();
        let weather =
            WeatherSeries::new(grid, vec![10.0; n], vec![0.0; n], vec![2.0; n]).unwrap();
        let once = filter_heating_season(&weather);
        let twice = filter_heating_season(&once);
        assert_eq!(once, twice);
        // 29 May .. 13 Oct is 138 days
        assert_eq!(once.len(), (365 - 138) * 24);
        assert!(once.timestamps().contains(&ts(5, 28, 23)));
        assert!(once.timestamps().contains(&ts(10, 14, 0)));
    }

    #[test]
    fn align_to_marks_uncovered_hours_missing() {
        let s = MeasuredSeries::new("A", hourly(3), vec![1.0, 2.0, 3.0], vec![true; 3]).unwrap();
        let grid = hourly(5);
        let aligned = s.align_to(&grid).unwrap();
        assert_eq!(aligned.mask(), &[true, true, true, false, false]);
    }

    #[test]
    fn day_spans_split_on_date() {
        let spans = day_spans(&hourly(50));
        assert_eq!(spans, vec![0..24, 24..48, 48..50]);
    }

    #[test]
    fn meta_missingness_matches_series() {
        let mut mask = vec![true; 100];
        mask[10..21].iter_mut().for_each(|m| *m = false);
        let s = MeasuredSeries::new("A", hourly(100), vec![1.0; 100], mask).unwrap();
        let meta = SubstationMeta::from_series(&s, 1979, 4949.0).unwrap();
        assert!((meta.missingness - 0.11).abs() < 0.005);
        assert!(SubstationMeta::new("A", 1979, 0.0, 0.1).is_err());
    }

    #[test]
    fn ensemble_mean_of_identical_rows() {
        let row = vec![1.0, 2.0, 3.0];
        let ens = SimulationEnsemble::new(
            vec![ParameterCombination(vec![0.0]); 3],
            vec![row.clone(); 3],
        )
        .unwrap();
        assert_eq!(ens.mean_profile(), row);
        assert!(SimulationEnsemble::new(
            vec![ParameterCombination(vec![0.0])],
            vec![vec![-1.0]]
        )
        .is_err());
    }
}
