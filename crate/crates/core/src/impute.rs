//! Regression imputation of the masked measured series from complete hourly
//! auxiliaries, with Bayesian ridge regression whose regularisation is set by
//! evidence maximisation.
//!
//! The auxiliaries are complete, so chained imputation over a single
//! incomplete column reduces to one regression pass.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use chrono::Timelike;
use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::standardize;
use crate::metrics::{ErrorMetrics, SeriesPair};
use crate::series::{MeasuredSeries, SimulationEnsemble, WeatherSeries};

/// Columns of [`build_hourly_features`] before constant-column removal.
pub const HOURLY_FEATURES: [&str; 6] = [
    "temp",
    "ghi",
    "wind",
    "sim_load_mean",
    "hour_sin",
    "hour_cos",
];

/// Gamma hyperprior shape/rate shared by both precisions.
const HYPER: f64 = 1e-6;
/// Ridge strength used when evidence maximisation does not converge.
pub const FALLBACK_LAMBDA: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RidgeMode {
    /// Alternate noise- and weight-precision updates until the coefficients
    /// settle.
    Evidence,
    /// Plain ridge with penalty `lambda` on the centred least-squares problem.
    Fixed { lambda: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImputationConfig {
    /// Chained-imputation rounds; one suffices with a single incomplete column.
    pub max_rounds: usize,
    pub mode: RidgeMode,
    pub evidence_iterations: usize,
    /// Relative coefficient change that ends the evidence iteration.
    pub tolerance: f64,
}

impl Default for ImputationConfig {
    fn default() -> Self {
        Self {
            max_rounds: 10,
            mode: RidgeMode::Evidence,
            evidence_iterations: 300,
            tolerance: 1e-3,
        }
    }
}

impl ImputationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_rounds == 0 {
            return Err(Error::invalid("imputation.max_rounds", "must be at least 1"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid("imputation.tolerance", "must be positive"));
        }
        if let RidgeMode::Fixed { lambda } = self.mode {
            if !(lambda >= 0.0) {
                return Err(Error::invalid("imputation.mode.lambda", "must be non-negative"));
            }
        }
        Ok(())
    }
}

/// Sine/cosine encoding of the hour of day.
pub fn hour_encoding(hour: u32) -> (f64, f64) {
    let angle = 2.0 * PI * hour as f64 / 24.0;
    (angle.sin(), angle.cos())
}

/// Standardised hourly auxiliaries: weather, ensemble-mean load and the
/// hour-of-day encoding.
pub fn build_hourly_features(
    weather: &WeatherSeries,
    ensemble: &SimulationEnsemble,
) -> Result<DMatrix<f64>> {
    build_hourly_features_profile(weather, &ensemble.mean_profile())
}

/// As [`build_hourly_features`], with a precomputed ensemble-mean profile.
pub fn build_hourly_features_profile(
    weather: &WeatherSeries,
    mean_load: &[f64],
) -> Result<DMatrix<f64>> {
    let n = weather.len();
    if mean_load.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: mean_load.len(),
        });
    }
    let raw = DMatrix::from_fn(n, HOURLY_FEATURES.len(), |i, j| match j {
        0 => weather.outdoor_temp()[i],
        1 => weather.ghi()[i],
        2 => weather.wind()[i],
        3 => mean_load[i],
        4 => hour_encoding(weather.timestamps()[i].hour()).0,
        _ => hour_encoding(weather.timestamps()[i].hour()).1,
    });
    Ok(standardize(&raw)?.data)
}

/// Fitted Bayesian ridge regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesianRidge {
    pub coef: Vec<f64>,
    pub intercept: f64,
    /// Noise precision.
    pub alpha: f64,
    /// Weight precision.
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Centred second moments of the rows selected by a mask.
struct Moments {
    n: usize,
    x_mean: DVector<f64>,
    y_mean: f64,
    gram: DMatrix<f64>,
    xty: DVector<f64>,
    yty: f64,
}

impl Moments {
    fn collect(x: &DMatrix<f64>, y: &[f64], rows: &[bool]) -> Self {
        let p = x.ncols();
        let n = rows.iter().filter(|&&r| r).count();
        let mut x_mean = DVector::zeros(p);
        let mut y_mean = 0.0;
        for i in (0..x.nrows()).filter(|&i| rows[i]) {
            for j in 0..p {
                x_mean[j] += x[(i, j)];
            }
            y_mean += y[i];
        }
        x_mean /= n as f64;
        y_mean /= n as f64;
        let mut gram = DMatrix::zeros(p, p);
        let mut xty = DVector::zeros(p);
        let mut yty = 0.0;
        let mut row = vec![0.0; p];
        for i in (0..x.nrows()).filter(|&i| rows[i]) {
            for j in 0..p {
                row[j] = x[(i, j)] - x_mean[j];
            }
            let yc = y[i] - y_mean;
            for a in 0..p {
                xty[a] += row[a] * yc;
                for b in a..p {
                    gram[(a, b)] += row[a] * row[b];
                }
            }
            yty += yc * yc;
        }
        for a in 0..p {
            for b in 0..a {
                gram[(a, b)] = gram[(b, a)];
            }
        }
        Self {
            n,
            x_mean,
            y_mean,
            gram,
            xty,
            yty,
        }
    }
}

/// Ridge solution in the eigenbasis of the Gram matrix.
struct Spectral {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    /// Projection of Xᵀy on the eigenvectors.
    proj: Vec<f64>,
}

impl Spectral {
    fn new(m: &Moments) -> Self {
        let eig = m.gram.clone().symmetric_eigen();
        let eigenvalues: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(0.0)).collect();
        let proj = (eig.eigenvectors.transpose() * &m.xty).iter().copied().collect();
        Self {
            eigenvalues,
            eigenvectors: eig.eigenvectors,
            proj,
        }
    }

    fn scale(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(0.0, f64::max)
    }

    /// Coefficients (eigenbasis) of the ridge problem with penalty `ratio`.
    fn coef_eig(&self, ratio: f64) -> Vec<f64> {
        let floor = 1e-12 * self.scale().max(f64::MIN_POSITIVE);
        self.eigenvalues
            .iter()
            .zip(&self.proj)
            .map(|(&s, &c)| if s + ratio > floor { c / (s + ratio) } else { 0.0 })
            .collect()
    }

    fn to_coef(&self, coef_eig: &[f64]) -> Vec<f64> {
        (&self.eigenvectors * DVector::from_column_slice(coef_eig))
            .iter()
            .copied()
            .collect()
    }

    /// Residual sum of squares of eigenbasis coefficients.
    fn rss(&self, yty: f64, coef_eig: &[f64]) -> f64 {
        let mut rss = yty;
        for ((&s, &c), &w) in self.eigenvalues.iter().zip(&self.proj).zip(coef_eig) {
            rss += s * w * w - 2.0 * c * w;
        }
        rss.max(0.0)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl BayesianRidge {
    /// Fits on the rows of `x` where `rows` is true.
    pub fn fit(x: &DMatrix<f64>, y: &[f64], rows: &[bool], cfg: &ImputationConfig) -> Result<Self> {
        if y.len() != x.nrows() || rows.len() != x.nrows() {
            return Err(Error::LengthMismatch {
                expected: x.nrows(),
                got: y.len().min(rows.len()),
            });
        }
        let p = x.ncols();
        let m = Moments::collect(x, y, rows);
        if m.n < p + 2 {
            return Err(Error::InsufficientData {
                needed: p + 2,
                got: m.n,
            });
        }
        let spec = Spectral::new(&m);
        let (ratio, alpha, lambda, iterations, converged) = match cfg.mode {
            RidgeMode::Fixed { lambda } => (lambda, f64::NAN, lambda, 0, true),
            RidgeMode::Evidence => Self::maximise_evidence(&m, &spec, cfg),
        };
        let coef = spec.to_coef(&spec.coef_eig(ratio));
        let intercept = m.y_mean - coef.iter().zip(m.x_mean.iter()).map(|(c, x)| c * x).sum::<f64>();
        Ok(Self {
            coef,
            intercept,
            alpha,
            lambda,
            iterations,
            converged,
        })
    }

    /// Returns (penalty ratio, alpha, lambda, iterations, converged).
    fn maximise_evidence(
        m: &Moments,
        spec: &Spectral,
        cfg: &ImputationConfig,
    ) -> (f64, f64, f64, usize, bool) {
        let n = m.n as f64;
        // both precisions start from the least-squares residual variance
        let ls = spec.coef_eig(0.0);
        let var_res = spec.rss(m.yty, &ls) / n;
        let var_y = m.yty / n;
        let start = 1.0 / var_res.max(1e-10 * var_y).max(f64::MIN_POSITIVE);
        let mut alpha = start;
        let mut lambda = start;
        let mut coef = spec.coef_eig(lambda / alpha);
        for it in 1..=cfg.evidence_iterations {
            let gamma: f64 = spec
                .eigenvalues
                .iter()
                .map(|&s| alpha * s / (lambda + alpha * s))
                .sum();
            let w2: f64 = coef.iter().map(|c| c * c).sum();
            lambda = (gamma + 2.0 * HYPER) / (w2 + 2.0 * HYPER);
            alpha = (n - gamma + 2.0 * HYPER) / (spec.rss(m.yty, &coef) + 2.0 * HYPER);
            let next = spec.coef_eig(lambda / alpha);
            let change: Vec<f64> = next.iter().zip(&coef).map(|(a, b)| a - b).collect();
            let rel = norm(&change) / norm(&next).max(f64::MIN_POSITIVE);
            coef = next;
            if !(alpha.is_finite() && lambda.is_finite()) {
                break;
            }
            if rel < cfg.tolerance {
                return (lambda / alpha, alpha, lambda, it, true);
            }
        }
        log::debug!("evidence maximisation did not converge; using fixed ridge");
        (FALLBACK_LAMBDA, alpha, lambda, cfg.evidence_iterations, false)
    }

    pub fn predict_row(&self, x: &DMatrix<f64>, i: usize) -> f64 {
        self.intercept
            + self
                .coef
                .iter()
                .enumerate()
                .map(|(j, c)| c * x[(i, j)])
                .sum::<f64>()
    }
}

/// Completes a masked series: observed values are kept bit-for-bit, missing
/// ones become non-negative regression predictions.
pub fn impute_series(
    target: &MeasuredSeries,
    aux: &DMatrix<f64>,
    cfg: &ImputationConfig,
) -> Result<Vec<f64>> {
    impute_values(target.values(), target.mask(), aux, cfg)
}

/// As [`impute_series`] on raw values and mask.
pub fn impute_values(
    values: &[f64],
    mask: &[bool],
    aux: &DMatrix<f64>,
    cfg: &ImputationConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if aux.nrows() != values.len() || mask.len() != values.len() {
        return Err(Error::LengthMismatch {
            expected: values.len(),
            got: aux.nrows(),
        });
    }
    let observed = mask.iter().filter(|&&m| m).count();
    if observed == values.len() {
        return Ok(values.to_vec());
    }
    let needed = (aux.ncols() + 2).max(30);
    if observed < needed {
        return Err(Error::InsufficientData {
            needed,
            got: observed,
        });
    }
    let model = BayesianRidge::fit(aux, values, mask, cfg)?;
    Ok(values
        .iter()
        .zip(mask)
        .enumerate()
        .map(|(i, (&v, &m))| if m { v } else { model.predict_row(aux, i).max(0.0) })
        .collect())
}

/// Validation error with the imputed series standing in for the measurement,
/// over the points of the complete measured data (`population`).
pub fn imputed_error(
    target: &MeasuredSeries,
    population: &[bool],
    aux: &DMatrix<f64>,
    simulated: &[f64],
    cfg: &ImputationConfig,
) -> Result<ErrorMetrics> {
    let completed = impute_series(target, aux, cfg)?;
    error_over(population, simulated, &completed)
}

/// Unweighted metrics over the points selected by `population`.
pub fn error_over(population: &[bool], simulated: &[f64], measured: &[f64]) -> Result<ErrorMetrics> {
    let (s, m): (Vec<f64>, Vec<f64>) = population
        .iter()
        .zip(simulated.iter().zip(measured))
        .filter(|(&p, _)| p)
        .map(|(_, (&s, &m))| (s, m))
        .unzip();
    ErrorMetrics::of(SeriesPair::new(&s, &m)?)
}
