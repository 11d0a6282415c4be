//! Synthetic district: weather, a steady-state building load model driven by
//! the thirteen calibration parameters, Latin hypercube ensembles and noisy
//! measured truths. Everything is a pure function of the seed.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike, Weekday};
#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::derive_seed;
use crate::metrics::{ErrorMetrics, SeriesPair};
use crate::series::{
    in_summer_window, HourlyGrid, MeasuredSeries, ParameterCombination, SimulationEnsemble,
    SubstationMeta, WeatherSeries,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParameterKind {
    /// Multiplier on an archetype baseline.
    Rate,
    /// Absolute value in the stated unit.
    Value,
}

/// Uniform range of one calibration parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterRange {
    pub name: String,
    pub kind: ParameterKind,
    pub low: f64,
    pub high: f64,
}

impl ParameterRange {
    pub fn new(name: &str, kind: ParameterKind, low: f64, high: f64) -> Self {
        Self {
            name: name.to_string(),
            kind,
            low,
            high,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.low.is_finite() && self.high.is_finite() && self.low < self.high) {
            return Err(Error::invalid(
                &format!("parameters.{}", self.name),
                "low must be below high",
            ));
        }
        Ok(())
    }
}

/// Positions of the parameters in [`default_space`] and in every
/// [`ParameterCombination`].
pub mod param {
    pub const DHW_RATE: usize = 0;
    pub const WALL_U: usize = 1;
    pub const ROOF_U: usize = 2;
    pub const FLOOR_U: usize = 3;
    pub const WINDOW_U: usize = 4;
    pub const WINDOW_SHARE: usize = 5;
    pub const INFILTRATION: usize = 6;
    pub const ECONOMY_SETPOINT: usize = 7;
    pub const COMFORT_SETPOINT: usize = 8;
    pub const ECONOMY_START: usize = 9;
    pub const COMFORT_START: usize = 10;
    pub const OPEN_BLIND_RATIO: usize = 11;
    pub const OVERSIZING: usize = 12;
}

/// The thirteen calibrated parameters with their uniform ranges. The economy
/// start hour runs from 20:00 to midnight, written as 24.
pub fn default_space() -> Vec<ParameterRange> {
    use ParameterKind::{Rate, Value};
    vec![
        ParameterRange::new("user_draw_off_load", Rate, 0.0, 2.0),
        ParameterRange::new("exterior_wall_u_value", Rate, 0.5, 1.5),
        ParameterRange::new("exterior_roof_u_value", Rate, 0.5, 1.5),
        ParameterRange::new("exterior_floor_u_value", Rate, 0.5, 1.5),
        ParameterRange::new("exterior_wall_window_u_value", Value, 1.0, 6.0),
        ParameterRange::new("exterior_wall_window_share", Rate, 0.5, 1.5),
        ParameterRange::new("infiltration_rate", Rate, 0.5, 1.5),
        ParameterRange::new("economy_heating_set_point", Value, 16.0, 19.0),
        ParameterRange::new("comfort_heating_set_point", Value, 19.0, 22.0),
        ParameterRange::new("economy_heating_start", Value, 20.0, 24.0),
        ParameterRange::new("comfort_heating_start", Value, 4.0, 8.0),
        ParameterRange::new("open_blind_ratio", Value, 0.2, 0.9),
        ParameterRange::new("oversizing_coefficient", Value, 0.2, 1.0),
    ]
}

/// Latin hypercube sample: each dimension's `n` equal-probability strata hold
/// exactly one point, strata permuted independently per dimension.
pub fn lhs_sample(space: &[ParameterRange], n: usize, seed: u64) -> Result<Vec<ParameterCombination>> {
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    for r in space {
        r.validate()?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut columns = Vec::with_capacity(space.len());
    for r in space {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(&mut rng);
        let col: Vec<f64> = strata
            .into_iter()
            .map(|k| {
                let u = (k as f64 + rng.random::<f64>()) / n as f64;
                r.low + u * (r.high - r.low)
            })
            .collect();
        columns.push(col);
    }
    Ok((0..n)
        .map(|i| ParameterCombination(columns.iter().map(|c| c[i]).collect()))
        .collect())
}

/// Stratum of a value in an `n`-stratum partition of the range.
pub fn stratum(range: &ParameterRange, value: f64, n: usize) -> usize {
    let u = (value - range.low) / (range.high - range.low);
    ((u * n as f64).floor() as usize).min(n - 1)
}

/// Synthetic weather settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeatherConfig {
    pub start: NaiveDate,
    pub mean_temp: f64,
    pub annual_amplitude: f64,
    pub diurnal_amplitude: f64,
    pub latitude_deg: f64,
}

impl Default for WeatherConfig {
    fn default() -> Self {
        Self {
            start: NaiveDate::from_ymd_opt(2021, 1, 1).expect("valid date"),
            mean_temp: 14.0,
            annual_amplitude: 8.0,
            diurnal_amplitude: 4.0,
            latitude_deg: 43.6,
        }
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Cosine of the solar zenith for the middle of an hour (solar time).
fn solar_height(lat: f64, doy: u32, hour: u32) -> f64 {
    let decl = (23.44f64).to_radians() * (2.0 * PI * (284.0 + doy as f64) / 365.0).sin();
    let omega = (15.0 * (hour as f64 + 0.5 - 12.0)).to_radians();
    let phi = lat.to_radians();
    phi.sin() * decl.sin() + phi.cos() * decl.cos() * omega.cos()
}

/// Hourly weather over `days` days: sinusoidal temperature with AR(1)
/// anomalies, clear-sky irradiance dimmed by a daily cloud factor, and
/// lognormal AR(1) wind.
pub fn synth_weather(cfg: &WeatherConfig, days: usize, seed: u64) -> Result<WeatherSeries> {
    if days == 0 {
        return Err(Error::invalid("days", "must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = days * 24;
    let t0 = cfg.start.and_hms_opt(0, 0, 0).expect("midnight");
    let mut timestamps = Vec::with_capacity(n);
    let mut temp = Vec::with_capacity(n);
    let mut ghi = Vec::with_capacity(n);
    let mut wind = Vec::with_capacity(n);
    let (mut t_anom, mut w_anom, mut cloud_anom) = (0.0, 0.0, 0.0);
    let mut cloud = 1.0;
    for i in 0..n {
        let ts = t0 + Duration::hours(i as i64);
        let doy = ts.ordinal();
        let hour = ts.hour();
        if hour == 0 {
            cloud_anom = 0.6 * cloud_anom + 0.25 * normal(&mut rng);
            cloud = (0.7 + cloud_anom).clamp(0.1, 1.0);
        }
        t_anom = 0.97 * t_anom + 0.6 * normal(&mut rng);
        w_anom = 0.9 * w_anom + 0.17 * normal(&mut rng);
        let annual = -cfg.annual_amplitude * (2.0 * PI * (doy as f64 - 15.0) / 365.0).cos();
        let diurnal = cfg.diurnal_amplitude * (2.0 * PI * (hour as f64 - 15.0) / 24.0).cos();
        let h = solar_height(cfg.latitude_deg, doy, hour);
        let clear = if h > 0.0 { 1100.0 * h * (-0.15 / h.max(0.05)).exp() } else { 0.0 };
        timestamps.push(ts);
        temp.push(cfg.mean_temp + annual + diurnal + t_anom);
        ghi.push(clear * cloud);
        wind.push(3.0 * w_anom.exp());
    }
    WeatherSeries::new(timestamps, temp, ghi, wind)
}

/// Archetype baselines per square metre of floor area that the rate
/// parameters multiply.
pub mod archetype {
    pub const WALL_AREA: f64 = 0.8;
    pub const ROOF_AREA: f64 = 0.2;
    pub const FLOOR_AREA: f64 = 0.2;
    pub const WINDOW_SHARE: f64 = 0.2;
    pub const WALL_U: f64 = 1.2;
    pub const ROOF_U: f64 = 0.8;
    pub const FLOOR_U: f64 = 0.9;
    /// Ground-contact temperature reduction on floor losses.
    pub const GROUND_FACTOR: f64 = 0.5;
    pub const HEIGHT: f64 = 2.5;
    /// Air heat capacity in Wh/(m³·K).
    pub const AIR_CAPACITY: f64 = 0.34;
    pub const INFILTRATION_ACH: f64 = 0.6;
    /// Effective façade fraction of horizontal irradiance times glazing g-value.
    pub const SOLAR_APERTURE: f64 = 0.3 * 0.6;
    pub const INTERNAL_GAINS: f64 = 3.0;
    /// Domestic hot water draw at rate 1, W/m².
    pub const DHW: f64 = 1.5;
    pub const DESIGN_INDOOR: f64 = 20.0;
    pub const DESIGN_OUTDOOR: f64 = -5.0;
}

/// Heat loss coefficient in W/(m²·K) of floor area.
pub fn ua_per_m2(p: &[f64]) -> f64 {
    use archetype::*;
    let window = WALL_AREA * WINDOW_SHARE * p[param::WINDOW_SHARE];
    let wall = (WALL_AREA - window).max(0.0);
    wall * WALL_U * p[param::WALL_U]
        + ROOF_AREA * ROOF_U * p[param::ROOF_U]
        + FLOOR_AREA * FLOOR_U * GROUND_FACTOR * p[param::FLOOR_U]
        + window * p[param::WINDOW_U]
        + AIR_CAPACITY * INFILTRATION_ACH * p[param::INFILTRATION] * HEIGHT
}

/// Fraction of the hour `[h, h + 1)` spent in comfort mode.
fn comfort_fraction(hour: f64, comfort_start: f64, economy_start: f64) -> f64 {
    ((hour + 1.0).min(economy_start) - hour.max(comfort_start)).clamp(0.0, 1.0)
}

/// Hourly heat load in MW of a building with the given floor area.
pub fn simulate_load(params: &ParameterCombination, weather: &WeatherSeries, floor_area: f64) -> Result<Vec<f64>> {
    let p = params.values();
    if p.len() != param::OVERSIZING + 1 {
        return Err(Error::LengthMismatch {
            expected: param::OVERSIZING + 1,
            got: p.len(),
        });
    }
    if !(floor_area > 0.0) {
        return Err(Error::invalid("floor_area", "must be positive"));
    }
    use archetype::*;
    let ua = ua_per_m2(p);
    let window = WALL_AREA * WINDOW_SHARE * p[param::WINDOW_SHARE];
    let dhw = DHW * p[param::DHW_RATE];
    let capacity = ua * (DESIGN_INDOOR - DESIGN_OUTDOOR) * (1.0 + p[param::OVERSIZING]) + dhw;
    let scale = floor_area * 1e-6;
    Ok(weather
        .timestamps()
        .iter()
        .zip(weather.outdoor_temp())
        .zip(weather.ghi())
        .map(|((ts, &t), &g)| {
            let frac = comfort_fraction(
                ts.hour() as f64,
                p[param::COMFORT_START],
                p[param::ECONOMY_START],
            );
            let setpoint = p[param::ECONOMY_SETPOINT]
                + frac * (p[param::COMFORT_SETPOINT] - p[param::ECONOMY_SETPOINT]);
            let solar = g * window * SOLAR_APERTURE * p[param::OPEN_BLIND_RATIO];
            let space = (ua * (setpoint - t) - solar - INTERNAL_GAINS).max(0.0);
            (space + dhw).clamp(0.0, capacity) * scale
        })
        .collect())
}

/// One row of the sampled-substation table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubstationProfile {
    pub id: &'static str,
    pub year_built: i32,
    pub floor_area: f64,
    pub missingness: f64,
}

pub const SUBSTATIONS: [SubstationProfile; 7] = [
    SubstationProfile { id: "SST3", year_built: 1976, floor_area: 4907.0, missingness: 0.11 },
    SubstationProfile { id: "SST8", year_built: 1997, floor_area: 4539.0, missingness: 0.14 },
    SubstationProfile { id: "SST9", year_built: 1976, floor_area: 7567.0, missingness: 0.10 },
    SubstationProfile { id: "SST13", year_built: 1978, floor_area: 3585.0, missingness: 0.12 },
    SubstationProfile { id: "SST16", year_built: 1979, floor_area: 4949.0, missingness: 0.11 },
    SubstationProfile { id: "SST20", year_built: 1980, floor_area: 6875.0, missingness: 0.13 },
    SubstationProfile { id: "SST25", year_built: 1987, floor_area: 4827.0, missingness: 0.10 },
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub seed: u64,
    pub days: usize,
    pub weather: WeatherConfig,
    /// Standard deviation of the log measurement noise.
    pub noise_sigma: f64,
    /// Lag-one autocorrelation of the log noise.
    pub noise_phi: f64,
    /// Weekend load multiplier.
    pub weekend_factor: f64,
    pub ensemble_size: usize,
    /// Maximum length in hours of the short MCAR gaps in measurements.
    pub max_gap: usize,
    pub space: Vec<ParameterRange>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 2021,
            days: 365,
            weather: WeatherConfig::default(),
            noise_sigma: 0.05,
            noise_phi: 0.8,
            weekend_factor: 1.06,
            ensemble_size: 200,
            max_gap: 24,
            space: default_space(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.days == 0 {
            return Err(Error::invalid("synth.days", "must be at least 1"));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::invalid("synth.noise_sigma", "must be non-negative"));
        }
        if !(self.noise_phi.abs() < 1.0) {
            return Err(Error::invalid("synth.noise_phi", "must lie in (-1, 1)"));
        }
        if self.ensemble_size == 0 {
            return Err(Error::invalid("synth.ensemble_size", "must be at least 1"));
        }
        if self.max_gap == 0 {
            return Err(Error::invalid("synth.max_gap", "must be at least 1"));
        }
        if self.space.len() != param::OVERSIZING + 1 {
            return Err(Error::invalid("synth.space", "must list the thirteen parameters"));
        }
        self.space.iter().try_for_each(ParameterRange::validate)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSubstation {
    pub meta: SubstationMeta,
    pub true_params: ParameterCombination,
    pub measured: MeasuredSeries,
    pub ensemble: SimulationEnsemble,
}

/// Seven substations sharing one season-filtered weather grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthDistrict {
    pub weather: WeatherSeries,
    pub substations: Vec<SynthSubstation>,
}

/// Multiplies a clean load by lognormal AR(1) noise and the weekend factor.
fn perturb(load: &[f64], timestamps: &[NaiveDateTime], cfg: &SynthConfig, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let innovation = cfg.noise_sigma * (1.0 - cfg.noise_phi * cfg.noise_phi).sqrt();
    let mut x = cfg.noise_sigma * normal(&mut rng);
    load.iter()
        .zip(timestamps)
        .map(|(&l, ts)| {
            x = cfg.noise_phi * x + innovation * normal(&mut rng);
            let occupancy = if matches!(ts.weekday(), Weekday::Sat | Weekday::Sun) {
                cfg.weekend_factor
            } else {
                1.0
            };
            l * occupancy * x.exp()
        })
        .collect()
}

/// Short random gaps until at least `fraction` of the grid is missing.
fn mcar_gaps(n: usize, fraction: f64, max_gap: usize, seed: u64) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mask = vec![true; n];
    let target = (fraction * n as f64).round() as usize;
    let mut missing = 0;
    while missing < target.min(n.saturating_sub(1)) {
        let start = rng.random_range(0..n);
        let len = rng.random_range(1..=max_gap);
        for m in &mut mask[start..(start + len).min(n)] {
            if *m && missing < target {
                *m = false;
                missing += 1;
            }
        }
    }
    mask
}

/// GOF of every ensemble member against the observed measurements.
pub fn calibration_gof(measured: &MeasuredSeries, ensemble: &SimulationEnsemble) -> Result<Vec<f64>> {
    let observed: Vec<usize> = (0..measured.len()).filter(|&i| measured.mask()[i]).collect();
    let m: Vec<f64> = observed.iter().map(|&i| measured.values()[i]).collect();
    ensemble
        .loads()
        .iter()
        .map(|load| {
            let s: Vec<f64> = observed.iter().map(|&i| load[i]).collect();
            Ok(ErrorMetrics::of(SeriesPair::new(&s, &m)?)?.gof)
        })
        .collect()
}

/// Generates one substation on the unfiltered weather, then filters.
pub fn build_substation(
    index: usize,
    profile: &SubstationProfile,
    weather: &WeatherSeries,
    keep: &[bool],
    cfg: &SynthConfig,
) -> Result<SynthSubstation> {
    let path = |stream: u64| derive_seed(cfg.seed, &[stream, index as u64]);
    let true_params = {
        let mut rng = ChaCha8Rng::seed_from_u64(path(1));
        ParameterCombination(
            cfg.space
                .iter()
                .map(|r| r.low + rng.random::<f64>() * (r.high - r.low))
                .collect(),
        )
    };
    let truth = simulate_load(&true_params, weather, profile.floor_area)?;
    let noisy = perturb(&truth, weather.timestamps(), cfg, path(3));
    let grid: Vec<NaiveDateTime> = select(weather.timestamps(), keep);
    let values = select(&noisy, keep);
    let mask = mcar_gaps(grid.len(), profile.missingness, cfg.max_gap, path(4));
    let measured = MeasuredSeries::new(profile.id, grid, values, mask)?;

    let combinations = lhs_sample(&cfg.space, cfg.ensemble_size, path(2))?;
    let loads = combinations
        .iter()
        .map(|c| Ok(select(&simulate_load(c, weather, profile.floor_area)?, keep)))
        .collect::<Result<Vec<_>>>()?;
    let ensemble = SimulationEnsemble::new(combinations, loads)?;
    let gof = calibration_gof(&measured, &ensemble)?;
    let ensemble = ensemble.with_calibration_gof(gof)?;
    let meta = SubstationMeta::from_series(&measured, profile.year_built, profile.floor_area)?;
    Ok(SynthSubstation {
        meta,
        true_params,
        measured,
        ensemble,
    })
}

fn select<T: Clone>(values: &[T], keep: &[bool]) -> Vec<T> {
    values
        .iter()
        .zip(keep)
        .filter(|(_, &k)| k)
        .map(|(v, _)| v.clone())
        .collect()
}

/// Unfiltered weather and the heating-season keep mask of a configuration.
pub fn district_weather(cfg: &SynthConfig) -> Result<(WeatherSeries, Vec<bool>)> {
    cfg.validate()?;
    let weather = synth_weather(&cfg.weather, cfg.days, derive_seed(cfg.seed, &[0]))?;
    let keep: Vec<bool> = weather
        .timestamps()
        .iter()
        .map(|ts| !in_summer_window(ts.date()))
        .collect();
    if !keep.iter().any(|&k| k) {
        return Err(Error::invalid("synth.days", "no heating-season hours generated"));
    }
    Ok((weather, keep))
}

/// Builds the full district sequentially.
pub fn build_district(cfg: &SynthConfig) -> Result<SynthDistrict> {
    let (weather, keep) = district_weather(cfg)?;
    let substations = SUBSTATIONS
        .iter()
        .enumerate()
        .map(|(i, p)| build_substation(i, p, &weather, &keep, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(SynthDistrict {
        weather: weather.retain_hours(&keep),
        substations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_weather(temp: f64, hours: usize) -> WeatherSeries {
        let t0 = NaiveDate::from_ymd_opt(2021, 1, 4).unwrap().and_hms_opt(0, 0, 0).unwrap();
        WeatherSeries::new(
            (0..hours).map(|i| t0 + Duration::hours(i as i64)).collect(),
            vec![temp; hours],
            vec![0.0; hours],
            vec![3.0; hours],
        )
        .unwrap()
    }

    fn mid_params() -> Vec<f64> {
        default_space().iter().map(|r| 0.5 * (r.low + r.high)).collect()
    }

    #[test]
    fn weather_examples() {
        let cfg = WeatherConfig::default();
        let a = synth_weather(&cfg, 365, 7).unwrap();
        assert_eq!(a, synth_weather(&cfg, 365, 7).unwrap());
        assert_ne!(a, synth_weather(&cfg, 365, 8).unwrap());
        for (ts, g) in a.timestamps().iter().zip(a.ghi()) {
            if ts.hour() == 0 {
                assert_eq!(*g, 0.0);
            }
        }
        let mean = a.outdoor_temp().iter().sum::<f64>() / a.len() as f64;
        assert!((mean - cfg.mean_temp).abs() < 1.0, "mean {mean}");
        assert!(a.wind().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn lhs_examples() {
        let unit = [ParameterRange::new("x", ParameterKind::Value, 0.0, 1.0)];
        let s = lhs_sample(&unit, 2, 3).unwrap();
        let mut strata: Vec<usize> = s.iter().map(|c| stratum(&unit[0], c.0[0], 2)).collect();
        strata.sort_unstable();
        assert_eq!(strata, vec![0, 1]);

        let space = default_space();
        let s = lhs_sample(&space, 200, 11).unwrap();
        for (d, r) in space.iter().enumerate() {
            let mut seen = vec![0usize; 200];
            for c in &s {
                assert!(c.0[d] >= r.low && c.0[d] < r.high);
                seen[stratum(r, c.0[d], 200)] += 1;
            }
            assert!(seen.iter().all(|&k| k == 1), "dimension {d}");
        }
        assert_eq!(s, lhs_sample(&space, 200, 11).unwrap());
    }

    #[test]
    fn lhs_marginals_pass_chi_square() {
        // 10 coarse bins of 20 strata each hold exactly 20 points: statistic 0
        let space = default_space();
        let s = lhs_sample(&space, 200, 5).unwrap();
        for (d, r) in space.iter().enumerate() {
            let mut counts = [0f64; 10];
            for c in &s {
                counts[stratum(r, c.0[d], 10)] += 1.0;
            }
            let chi2: f64 = counts.iter().map(|o| (o - 20.0) * (o - 20.0) / 20.0).sum();
            // critical value of chi-square with 9 degrees of freedom at 0.01
            assert!(chi2 < 21.666);
        }
    }

    #[test]
    fn invalid_range_names_key() {
        let mut space = default_space();
        space[8].low = 23.0;
        match lhs_sample(&space, 10, 1) {
            Err(Error::InvalidParameter { name, .. }) => {
                assert_eq!(name, "parameters.comfort_heating_set_point")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn warm_day_without_dhw_has_no_load() {
        let mut p = mid_params();
        p[param::DHW_RATE] = 0.0;
        let load = simulate_load(&ParameterCombination(p), &flat_weather(25.0, 24), 5000.0).unwrap();
        assert!(load.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn halving_u_values_never_raises_load() {
        let w = synth_weather(&WeatherConfig::default(), 60, 3).unwrap();
        let p = mid_params();
        let mut half = p.clone();
        for k in [param::WALL_U, param::ROOF_U, param::FLOOR_U] {
            half[k] *= 0.5;
        }
        let a = simulate_load(&ParameterCombination(p), &w, 5000.0).unwrap();
        let b = simulate_load(&ParameterCombination(half), &w, 5000.0).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| y <= x));
        assert!(a.iter().zip(&b).any(|(x, y)| y < x));
    }

    #[test]
    fn higher_comfort_setpoint_costs_energy() {
        let w = flat_weather(5.0, 24);
        let mut p = mid_params();
        p[param::COMFORT_SETPOINT] = 19.0;
        let low: f64 = simulate_load(&ParameterCombination(p.clone()), &w, 5000.0).unwrap().iter().sum();
        p[param::COMFORT_SETPOINT] = 22.0;
        let high: f64 = simulate_load(&ParameterCombination(p), &w, 5000.0).unwrap().iter().sum();
        assert!(high > low);
    }

    #[test]
    fn comfort_fraction_handles_partial_hours() {
        assert_eq!(comfort_fraction(5.0, 5.5, 22.0), 0.5);
        assert_eq!(comfort_fraction(12.0, 5.5, 22.0), 1.0);
        assert_eq!(comfort_fraction(22.0, 5.5, 22.25), 0.25);
        assert_eq!(comfort_fraction(23.0, 5.5, 24.0), 1.0);
        assert_eq!(comfort_fraction(2.0, 5.5, 24.0), 0.0);
    }

    #[test]
    fn noiseless_truth_calibrates_to_zero() {
        let cfg = SynthConfig {
            noise_sigma: 0.0,
            weekend_factor: 1.0,
            days: 30,
            ensemble_size: 5,
            ..SynthConfig::default()
        };
        let (weather, keep) = district_weather(&cfg).unwrap();
        let sub = build_substation(0, &SUBSTATIONS[0], &weather, &keep, &cfg).unwrap();
        let truth = simulate_load(&sub.true_params, &weather, SUBSTATIONS[0].floor_area).unwrap();
        let ens = SimulationEnsemble::new(vec![sub.true_params.clone()], vec![truth]).unwrap();
        assert_eq!(calibration_gof(&sub.measured, &ens).unwrap(), vec![0.0]);
    }

    #[test]
    fn gaps_reach_target_fraction() {
        let m = mcar_gaps(5448, 0.11, 24, 1);
        assert_eq!(m.iter().filter(|&&x| !x).count(), 599);
    }
}
