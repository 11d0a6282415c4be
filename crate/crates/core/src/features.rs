//! Daily auxiliary features, standardisation, PCA, mutual-information
//! screening and quantile discretisation.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use chrono::{Datelike, NaiveDate, Weekday};
use nalgebra::DMatrix;
#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{day_spans, SimulationEnsemble, WeatherSeries};

/// Base temperature of heating degree-hours, °C.
pub const DEGREE_HOUR_BASE: f64 = 18.0;

/// Columns of [`DailyFeatureMatrix`], in order.
pub const DAILY_FEATURES: [&str; 10] = [
    "temp_mean",
    "temp_min",
    "temp_max",
    "degree_hours",
    "ghi_mean",
    "ghi_max",
    "wind_mean",
    "sim_load_mean",
    "sim_load_peak",
    "weekend",
];

/// One row per calendar day of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyFeatureMatrix {
    pub dates: Vec<NaiveDate>,
    pub names: Vec<String>,
    /// Days × features.
    pub values: DMatrix<f64>,
    /// Grid index range of each day.
    pub spans: Vec<Range<usize>>,
    /// Observed hours per day under the mask used at aggregation.
    pub observed_hours: Vec<usize>,
}

impl DailyFeatureMatrix {
    pub fn n_days(&self) -> usize {
        self.dates.len()
    }

    /// A day responds when at least one of its hours is observed.
    pub fn is_respondent(&self, day: usize) -> bool {
        self.observed_hours[day] > 0
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.names.iter().position(|n| n == name)?;
        Some(self.values.column(j).iter().copied().collect())
    }
}

/// Daily features from weather and the ensemble-mean simulated load.
pub fn aggregate_daily(
    weather: &WeatherSeries,
    ensemble: &SimulationEnsemble,
    mask: &[bool],
) -> Result<DailyFeatureMatrix> {
    aggregate_daily_profile(weather, &ensemble.mean_profile(), mask)
}

/// As [`aggregate_daily`], with a precomputed ensemble-mean profile.
pub fn aggregate_daily_profile(
    weather: &WeatherSeries,
    mean_load: &[f64],
    mask: &[bool],
) -> Result<DailyFeatureMatrix> {
    let n = weather.len();
    for len in [mean_load.len(), mask.len()] {
        if len != n {
            return Err(Error::LengthMismatch { expected: n, got: len });
        }
    }
    let spans = day_spans(weather.timestamps());
    let temp = weather.outdoor_temp();
    let ghi = weather.ghi();
    let wind = weather.wind();
    let mut values = DMatrix::zeros(spans.len(), DAILY_FEATURES.len());
    let mut dates = Vec::with_capacity(spans.len());
    let mut observed_hours = Vec::with_capacity(spans.len());
    for (d, span) in spans.iter().enumerate() {
        let date = weather.timestamps()[span.start].date();
        let t = &temp[span.clone()];
        let g = &ghi[span.clone()];
        let load = &mean_load[span.clone()];
        let row = [
            mean(t),
            t.iter().copied().fold(f64::INFINITY, f64::min),
            t.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            t.iter().map(|v| (DEGREE_HOUR_BASE - v).max(0.0)).sum(),
            mean(g),
            g.iter().copied().fold(0.0, f64::max),
            mean(&wind[span.clone()]),
            mean(load),
            load.iter().copied().fold(0.0, f64::max),
            if matches!(date.weekday(), Weekday::Sat | Weekday::Sun) {
                1.0
            } else {
                0.0
            },
        ];
        for (j, v) in row.into_iter().enumerate() {
            values[(d, j)] = v;
        }
        dates.push(date);
        observed_hours.push(mask[span.clone()].iter().filter(|&&m| m).count());
    }
    Ok(DailyFeatureMatrix {
        dates,
        names: DAILY_FEATURES.iter().map(|s| s.to_string()).collect(),
        values,
        spans,
        observed_hours,
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Z-scored columns with the statistics needed to reproduce the transform.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardized {
    pub data: DMatrix<f64>,
    /// Indices of the input columns that were kept.
    pub kept: Vec<usize>,
    pub means: Vec<f64>,
    /// Population standard deviations.
    pub stds: Vec<f64>,
}

fn column_stats(matrix: &DMatrix<f64>, j: usize) -> (f64, f64) {
    let n = matrix.nrows() as f64;
    let col = matrix.column(j);
    let mean = col.iter().sum::<f64>() / n;
    let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn is_constant(mean: f64, std: f64) -> bool {
    !(std > 1e-12 * mean.abs().max(1.0))
}

/// Standard scores per column. Constant columns are dropped with a warning.
pub fn standardize(matrix: &DMatrix<f64>) -> Result<Standardized> {
    if matrix.nrows() == 0 {
        return Err(Error::EmptyInput);
    }
    let mut kept = Vec::new();
    let mut means = Vec::new();
    let mut stds = Vec::new();
    for j in 0..matrix.ncols() {
        let (mean, std) = column_stats(matrix, j);
        if is_constant(mean, std) {
            log::warn!("dropping constant feature column {j}");
            continue;
        }
        kept.push(j);
        means.push(mean);
        stds.push(std);
    }
    let data = DMatrix::from_fn(matrix.nrows(), kept.len(), |i, k| {
        (matrix[(i, kept[k])] - means[k]) / stds[k]
    });
    Ok(Standardized {
        data,
        kept,
        means,
        stds,
    })
}

/// Correlation PCA: standardisation followed by the eigen-decomposition of
/// the covariance of the standardised features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    n_features: usize,
    kept: Vec<usize>,
    means: Vec<f64>,
    stds: Vec<f64>,
    /// Orthonormal rows, one per component, over the kept features.
    loadings: Vec<Vec<f64>>,
    explained_variance_ratio: Vec<f64>,
}

impl PcaModel {
    pub fn explained_variance_ratio(&self) -> &[f64] {
        &self.explained_variance_ratio
    }

    pub fn loadings(&self) -> &[Vec<f64>] {
        &self.loadings
    }

    pub fn n_components(&self) -> usize {
        self.loadings.len()
    }

    /// Smallest number of components whose cumulative explained variance
    /// reaches `target`.
    pub fn components_for(&self, target: f64) -> usize {
        let mut cum = 0.0;
        for (k, r) in self.explained_variance_ratio.iter().enumerate() {
            cum += r;
            if cum >= target - 1e-12 {
                return k + 1;
            }
        }
        self.explained_variance_ratio.len()
    }

    /// Scores on the first `k` components.
    pub fn transform(&self, matrix: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
        if matrix.ncols() != self.n_features {
            return Err(Error::Schema(alloc::format!(
                "expected {} feature columns, got {}",
                self.n_features,
                matrix.ncols()
            )));
        }
        let k = k.min(self.loadings.len());
        Ok(DMatrix::from_fn(matrix.nrows(), k, |i, c| {
            self.kept
                .iter()
                .enumerate()
                .map(|(f, &j)| (matrix[(i, j)] - self.means[f]) / self.stds[f] * self.loadings[c][f])
                .sum()
        }))
    }

    /// Maps scores on the leading components back to feature space. Dropped
    /// constant columns come back as their mean.
    pub fn inverse_transform(&self, scores: &DMatrix<f64>, constants: &[f64]) -> DMatrix<f64> {
        let mut out = DMatrix::from_fn(scores.nrows(), self.n_features, |_, j| {
            constants.get(j).copied().unwrap_or(0.0)
        });
        for i in 0..scores.nrows() {
            for (f, &j) in self.kept.iter().enumerate() {
                let z: f64 = (0..scores.ncols())
                    .map(|c| scores[(i, c)] * self.loadings[c][f])
                    .sum();
                out[(i, j)] = z * self.stds[f] + self.means[f];
            }
        }
        out
    }
}

/// Fits a correlation PCA and returns it with the retained component count
/// for `variance_target`.
pub fn pca_fit(matrix: &DMatrix<f64>, variance_target: f64) -> Result<(PcaModel, usize)> {
    if !(variance_target > 0.0 && variance_target <= 1.0) {
        return Err(Error::invalid("variance_target", "must lie in (0, 1]"));
    }
    if matrix.nrows() < 2 {
        return Err(Error::DegenerateInput("PCA needs at least two rows"));
    }
    let z = standardize(matrix)?;
    if z.kept.is_empty() {
        return Err(Error::DegenerateInput("every feature is constant"));
    }
    let n = matrix.nrows() as f64;
    let cov = (z.data.transpose() * &z.data) / n;
    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = values.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateInput("zero total variance"));
    }
    let loadings: Vec<Vec<f64>> = order
        .iter()
        .map(|&i| {
            let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            // sign convention: largest-magnitude entry positive
            let pivot = v
                .iter()
                .copied()
                .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
            if pivot < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        })
        .collect();
    let model = PcaModel {
        n_features: matrix.ncols(),
        kept: z.kept,
        means: z.means,
        stds: z.stds,
        loadings,
        explained_variance_ratio: values.iter().map(|v| v / total).collect(),
    };
    let k = model.components_for(variance_target);
    Ok((model, k))
}

/// Interior quantile edges and the bin of every value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileBins {
    /// `n_quantiles − 1` non-decreasing edges at the `i / n_quantiles`
    /// quantiles (linear interpolation).
    pub edges: Vec<f64>,
    pub bins: Vec<usize>,
}

/// Bin of `value`: the number of edges strictly below it, so ties go to the
/// lower bin.
pub fn assign_bin(edges: &[f64], value: f64) -> usize {
    edges.iter().filter(|&&e| value > e).count()
}

/// Equal-mass discretisation of a population column.
pub fn quantile_discretize(values: &[f64], n_quantiles: usize) -> Result<QuantileBins> {
    if n_quantiles == 0 {
        return Err(Error::invalid("n_quantiles", "must be at least 1"));
    }
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let edges: Vec<f64> = (1..n_quantiles)
        .map(|i| crate::metrics::percentile(&sorted, i as f64 / n_quantiles as f64))
        .collect();
    let bins = values.iter().map(|&v| assign_bin(&edges, v)).collect();
    Ok(QuantileBins { edges, bins })
}

/// Plug-in mutual information (nats) of the joint quantile-binned histogram.
pub fn mutual_information(x: &[f64], y: &[f64], bins: usize) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 30 {
        return Err(Error::InsufficientData {
            needed: 30,
            got: x.len(),
        });
    }
    if bins < 2 {
        return Err(Error::invalid("bins", "must be at least 2"));
    }
    let bx = quantile_discretize(x, bins)?.bins;
    let by = quantile_discretize(y, bins)?.bins;
    let mut joint = vec![0usize; bins * bins];
    let mut px = vec![0usize; bins];
    let mut py = vec![0usize; bins];
    for (&a, &b) in bx.iter().zip(&by) {
        joint[a * bins + b] += 1;
        px[a] += 1;
        py[b] += 1;
    }
    let n = x.len() as f64;
    let mut mi = 0.0;
    for a in 0..bins {
        for b in 0..bins {
            let c = joint[a * bins + b];
            if c == 0 {
                continue;
            }
            let pxy = c as f64 / n;
            mi += pxy * (pxy * n * n / (px[a] as f64 * py[b] as f64)).ln();
        }
    }
    Ok(mi.max(0.0))
}

/// Default bin counts for `k` retained components: component `j` gets
/// `max(floor(q_max · (1 − j/k)), 1)` bins.
pub fn default_bins_per_component(k: usize, q_max: usize) -> Vec<usize> {
    (0..k)
        .map(|j| ((q_max as f64 * (1.0 - j as f64 / k as f64)).floor() as usize).max(1))
        .collect()
}

/// Quantile bins of each retained component over the population days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellPartition {
    /// Edges per component.
    pub edges: Vec<Vec<f64>>,
    /// Bin tuple of every population day, components in descending-variance
    /// order.
    pub cells: Vec<Vec<usize>>,
    /// Bin count requested per component.
    pub n_bins: Vec<usize>,
}

impl CellPartition {
    /// Discretises each column of `scores` (population days × components).
    pub fn from_scores(scores: &DMatrix<f64>, n_bins: &[usize]) -> Result<Self> {
        if n_bins.len() != scores.ncols() {
            return Err(Error::LengthMismatch {
                expected: scores.ncols(),
                got: n_bins.len(),
            });
        }
        let mut edges = Vec::with_capacity(n_bins.len());
        let mut cells = vec![Vec::with_capacity(n_bins.len()); scores.nrows()];
        for (c, &q) in n_bins.iter().enumerate() {
            let col: Vec<f64> = scores.column(c).iter().copied().collect();
            let qb = quantile_discretize(&col, q)?;
            for (cell, b) in cells.iter_mut().zip(qb.bins) {
                cell.push(b);
            }
            edges.push(qb.edges);
        }
        Ok(Self {
            edges,
            cells,
            n_bins: n_bins.to_vec(),
        })
    }

    pub fn n_components(&self) -> usize {
        self.edges.len()
    }

    /// Bin tuple of a new score vector.
    pub fn locate(&self, scores: &[f64]) -> Vec<usize> {
        self.edges
            .iter()
            .zip(scores)
            .map(|(e, &s)| assign_bin(e, s))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use chrono::{Duration, NaiveDate, NaiveDateTime};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn grid(n: usize) -> Vec<NaiveDateTime> {
        let t0 = NaiveDate::from_ymd_opt(2021, 1, 4) // a Monday
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap();
        (0..n).map(|i| t0 + Duration::hours(i as i64)).collect()
    }

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    fn weather(temp: Vec<f64>) -> WeatherSeries {
        let n = temp.len();
        WeatherSeries::new(grid(n), temp, vec![100.0; n], vec![3.0; n]).unwrap()
    }

    #[test]
    fn degree_hours_and_observed_counts() {
        let mut temp = vec![18.0; 24];
        temp.extend(vec![8.0; 24]);
        let mut mask = vec![true; 48];
        mask[24..36].iter_mut().for_each(|m| *m = false);
        let daily = aggregate_daily_profile(&weather(temp), &[1.0; 48], &mask).unwrap();
        let dh = daily.column("degree_hours").unwrap();
        assert_eq!(dh, vec![0.0, 240.0]);
        assert_eq!(daily.observed_hours, vec![24, 12]);
        assert!(daily.is_respondent(1));
        assert_eq!(daily.column("weekend").unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn standardize_examples() {
        let m = DMatrix::from_column_slice(3, 2, &[1.0, 2.0, 3.0, 5.0, 5.0, 5.0]);
        let z = standardize(&m).unwrap();
        assert_eq!(z.kept, vec![0]);
        let e = 1.5f64.sqrt();
        assert_relative_eq!(z.data[(0, 0)], -e, max_relative = 1e-12);
        assert_relative_eq!(z.data[(1, 0)], 0.0);
        assert_relative_eq!(z.data[(2, 0)], e, max_relative = 1e-12);
        let again = standardize(&z.data).unwrap();
        for (a, b) in again.data.iter().zip(z.data.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn pca_on_a_line_has_one_component() {
        let x = normals(200, 1);
        let m = DMatrix::from_fn(200, 2, |i, j| if j == 0 { x[i] } else { 3.0 * x[i] - 1.0 });
        for target in [0.5, 0.95, 1.0] {
            let (model, k) = pca_fit(&m, target).unwrap();
            assert_eq!(k, 1);
            assert!(model.explained_variance_ratio()[0] > 1.0 - 1e-12);
        }
        let (model, _) = pca_fit(&m, 0.95).unwrap();
        let scores = model.transform(&m, 2).unwrap();
        assert!(scores.column(1).iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn pca_isotropic_splits_variance() {
        let x = normals(4000, 2);
        let y = normals(4000, 3);
        let m = DMatrix::from_fn(4000, 2, |i, j| if j == 0 { x[i] } else { y[i] });
        let (model, k) = pca_fit(&m, 0.95).unwrap();
        assert_eq!(k, 2);
        for r in model.explained_variance_ratio() {
            assert!((r - 0.5).abs() < 0.05);
        }
    }

    fn random_features(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let base = normals(n * p, seed);
        // correlated columns
        DMatrix::from_fn(n, p, |i, j| {
            base[i * p + j] + 0.7 * base[i * p] + 2.0 * j as f64
        })
    }

    #[test]
    fn pca_full_rank_and_properties() {
        let m = random_features(300, 5, 4);
        let (model, k) = pca_fit(&m, 1.0).unwrap();
        assert_eq!(k, 5);
        let r = model.explained_variance_ratio();
        assert!(r.windows(2).all(|w| w[0] >= w[1]));
        assert_relative_eq!(r.iter().sum::<f64>(), 1.0, max_relative = 1e-12);
        // orthonormal loadings
        for a in 0..5 {
            for b in 0..5 {
                let dot: f64 = (0..5).map(|f| model.loadings()[a][f] * model.loadings()[b][f]).sum();
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-8);
            }
        }
        // diagonal score covariance and reconstruction
        let s = model.transform(&m, 5).unwrap();
        let cov = s.transpose() * &s / 300.0;
        for a in 0..5 {
            for b in 0..5 {
                if a != b {
                    assert!(cov[(a, b)].abs() < 1e-8);
                }
            }
        }
        let back = model.inverse_transform(&s, &[]);
        for (a, b) in back.iter().zip(m.iter()) {
            assert!((a - b).abs() < 1e-8);
        }
        // the means row maps to zero
        let means = DMatrix::from_fn(1, 5, |_, j| m.column(j).mean());
        assert!(model.transform(&means, 5).unwrap().iter().all(|v| v.abs() < 1e-10));
        assert!(matches!(
            model.transform(&DMatrix::zeros(2, 4), 2),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn pca_rejects_constant_input() {
        let m = DMatrix::from_element(10, 3, 2.0);
        assert!(matches!(pca_fit(&m, 0.9), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn mi_of_identity_is_ln_bins() {
        let x = normals(1000, 7);
        let mi = mutual_information(&x, &x, 4).unwrap();
        assert!((mi - 4f64.ln()).abs() < 1e-6);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let mi_neg = mutual_information(&x, &neg, 4).unwrap();
        assert!((mi_neg - mi).abs() < 1e-9);
    }

    #[test]
    fn mi_of_independent_draws_is_small() {
        let x = normals(5000, 8);
        let y = normals(5000, 9);
        let mi = mutual_information(&x, &y, 8).unwrap();
        assert!(mi >= 0.0 && mi < 0.02, "mi = {mi}");
        assert!(mutual_information(&x[..10], &y[..10], 8).is_err());
    }

    #[test]
    fn quantile_examples() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert!(quantile_discretize(&v, 1).unwrap().bins.iter().all(|&b| b == 0));
        let q = quantile_discretize(&v, 4).unwrap();
        for b in 0..4 {
            assert_eq!(q.bins.iter().filter(|&&x| x == b).count(), 25);
        }
        assert!(q.edges.windows(2).all(|w| w[0] <= w[1]));
        let flat = quantile_discretize(&[3.0; 40], 5).unwrap();
        assert!(flat.bins.iter().all(|&b| b == 0));
    }

    #[test]
    fn default_bins_follow_variance_order() {
        assert_eq!(default_bins_per_component(5, 5), vec![5, 4, 3, 2, 1]);
        assert_eq!(default_bins_per_component(8, 10), vec![10, 8, 7, 6, 5, 3, 2, 1]);
        assert_eq!(default_bins_per_component(1, 10), vec![10]);
    }

    #[test]
    fn partition_maps_every_day() {
        let m = random_features(120, 3, 10);
        let (model, k) = pca_fit(&m, 0.9).unwrap();
        let scores = model.transform(&m, k).unwrap();
        let bins = default_bins_per_component(k, 5);
        let part = CellPartition::from_scores(&scores, &bins).unwrap();
        assert_eq!(part.cells.len(), 120);
        for (i, cell) in part.cells.iter().enumerate() {
            let row: Vec<f64> = scores.row(i).iter().copied().collect();
            assert_eq!(&part.locate(&row), cell);
            for (b, q) in cell.iter().zip(&bins) {
                assert!(b < q);
            }
        }
    }
}
