//! The error-estimation experiment.
//!
//! For every substation, missingness ratio and repetition one contiguous
//! block is masked out of the measured series; each estimator then produces
//! a GOF estimate for every selected parameter combination from the same
//! incomplete series, to be compared with the reference GOF of the complete
//! data.
//!
//! Work is split into independent [`Cell`]s so callers can evaluate them in
//! any order or in parallel; [`Plan::assemble`] restores a canonical order.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;
use core::str::FromStr;

use nalgebra::DMatrix;
#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{
    aggregate_daily_profile, default_bins_per_component, mutual_information, pca_fit, CellPartition,
    DAILY_FEATURES,
};
use crate::impute::{build_hourly_features_profile, error_over, impute_values, ImputationConfig};
use crate::mask::{block_mask, compose_mask, derive_seed, sample_starts, MaskSpec};
use crate::metrics::{gof, summarize_pooled, ErrorMetrics, EstimateSummary, SeriesPair};
use crate::series::{MeasuredSeries, SimulationEnsemble, WeatherSeries};
use crate::weights::{hourly_weights, weighted_error, Calibration, RakeConfig, WeightRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Unadjusted,
    Imputation,
    Cell,
    Rake,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Unadjusted, Method::Imputation, Method::Cell, Method::Rake];

    pub fn name(self) -> &'static str {
        match self {
            Method::Unadjusted => "unadjusted",
            Method::Imputation => "imputation",
            Method::Cell => "cell",
            Method::Rake => "rake",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid("method", "expected unadjusted, imputation, cell or rake"))
    }
}

/// Daily-feature discretisation for one weighting method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSettings {
    /// Upper bound on retained principal components.
    pub variables: usize,
    pub explained_variance: f64,
    /// Bins of the leading component; later ones get fewer.
    pub max_quantiles: usize,
}

impl CalibrationSettings {
    pub const CELL: Self = Self {
        variables: 5,
        explained_variance: 0.95,
        max_quantiles: 5,
    };
    pub const RAKE: Self = Self {
        variables: 8,
        explained_variance: 0.98,
        max_quantiles: 10,
    };

    fn validate(&self, key: &str) -> Result<()> {
        if self.variables == 0 {
            return Err(Error::invalid(&alloc::format!("{key}.variables"), "must be at least 1"));
        }
        if !(self.explained_variance > 0.0 && self.explained_variance <= 1.0) {
            return Err(Error::invalid(
                &alloc::format!("{key}.explained_variance"),
                "must lie in (0, 1]",
            ));
        }
        if self.max_quantiles == 0 {
            return Err(Error::invalid(&alloc::format!("{key}.max_quantiles"), "must be at least 1"));
        }
        Ok(())
    }
}

/// Stream tag separating block-start seeds from other uses of the master seed.
const START_STREAM: u64 = 0x7374_6172_7473;

/// Ratios 5% to 95% in steps of 2.5%.
pub fn default_ratio_grid() -> Vec<f64> {
    (0..37).map(|k| (50 + 25 * k) as f64 / 1000.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Strictly increasing masked fractions in [0, 1).
    pub ratios: Vec<f64>,
    pub repetitions: usize,
    pub methods: Vec<Method>,
    /// Fraction of the ensemble, lowest calibration GOF first, under test.
    pub best_fraction: f64,
    pub seed: u64,
    pub cell: CalibrationSettings,
    pub rake: CalibrationSettings,
    pub raking: RakeConfig,
    pub imputation: ImputationConfig,
    /// Relative deviation from the reference counted as accurate.
    pub rel_tolerance: f64,
    /// Share of accurate estimates required for a ratio to be tolerable.
    pub coverage: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            ratios: default_ratio_grid(),
            repetitions: 100,
            methods: Method::ALL.to_vec(),
            best_fraction: 0.05,
            seed: 42,
            cell: CalibrationSettings::CELL,
            rake: CalibrationSettings::RAKE,
            raking: RakeConfig::default(),
            imputation: ImputationConfig::default(),
            rel_tolerance: 0.10,
            coverage: 0.95,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ratios.is_empty() {
            return Err(Error::invalid("experiment.ratios", "must not be empty"));
        }
        if self.ratios.iter().any(|r| !(0.0..1.0).contains(r)) {
            return Err(Error::invalid("experiment.ratios", "each ratio must lie in [0, 1)"));
        }
        if self.ratios.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("experiment.ratios", "must be strictly increasing"));
        }
        if self.repetitions == 0 {
            return Err(Error::invalid("experiment.repetitions", "must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(Error::invalid("experiment.methods", "must not be empty"));
        }
        let mut seen = self.methods.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.methods.len() {
            return Err(Error::invalid("experiment.methods", "must not repeat a method"));
        }
        if !(self.best_fraction > 0.0 && self.best_fraction <= 1.0) {
            return Err(Error::invalid("experiment.best_fraction", "must lie in (0, 1]"));
        }
        if !(self.rel_tolerance > 0.0) {
            return Err(Error::invalid("experiment.rel_tolerance", "must be positive"));
        }
        if !(self.coverage > 0.0 && self.coverage <= 1.0) {
            return Err(Error::invalid("experiment.coverage", "must lie in (0, 1]"));
        }
        if self.raking.max_iter == 0 || !(self.raking.tol > 0.0) {
            return Err(Error::invalid("experiment.raking", "max_iter and tol must be positive"));
        }
        self.cell.validate("experiment.cell")?;
        self.rake.validate("experiment.rake")?;
        self.imputation.validate()
    }
}

/// Measured data and simulations of one substation on the weather grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SubstationData {
    pub measured: MeasuredSeries,
    pub ensemble: SimulationEnsemble,
}

/// Reference metrics of every combination against the observed points of the
/// complete measured series.
pub fn reference_errors(measured: &MeasuredSeries, ensemble: &SimulationEnsemble) -> Result<Vec<ErrorMetrics>> {
    if ensemble.n_hours() != measured.len() {
        return Err(Error::LengthMismatch {
            expected: measured.len(),
            got: ensemble.n_hours(),
        });
    }
    ensemble
        .loads()
        .iter()
        .map(|load| error_over(measured.mask(), load, measured.values()))
        .collect()
}

/// Indices of the `⌈fraction · N⌉` combinations with the lowest calibration
/// GOF, ties broken by index, in ascending GOF order.
pub fn select_best(calibration_gof: &[f64], fraction: f64) -> Vec<usize> {
    let n = calibration_gof.len();
    if n == 0 {
        return Vec::new();
    }
    let k = ((fraction * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| calibration_gof[a].total_cmp(&calibration_gof[b]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

/// Bin tuple of every day (empty for days outside the population) and the
/// bin counts per retained component.
#[derive(Debug, Clone, PartialEq)]
pub struct DayBins {
    pub bins: Vec<Vec<usize>>,
    pub n_bins: Vec<usize>,
    pub explained_variance: f64,
}

fn day_bins(
    features: &DMatrix<f64>,
    population_days: &[usize],
    n_days: usize,
    settings: &CalibrationSettings,
) -> Result<DayBins> {
    let rows = DMatrix::from_fn(population_days.len(), features.ncols(), |i, j| {
        features[(population_days[i], j)]
    });
    let (pca, k) = pca_fit(&rows, settings.explained_variance)?;
    let k = k.min(settings.variables);
    let scores = pca.transform(&rows, k)?;
    let n_bins = default_bins_per_component(k, settings.max_quantiles);
    let partition = CellPartition::from_scores(&scores, &n_bins)?;
    let mut bins = vec![Vec::new(); n_days];
    for (&d, cell) in population_days.iter().zip(partition.cells) {
        bins[d] = cell;
    }
    Ok(DayBins {
        bins,
        n_bins,
        explained_variance: pca.explained_variance_ratio()[..k].iter().sum(),
    })
}

/// Everything the estimators need for one substation, computed once.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub id: String,
    pub measured: MeasuredSeries,
    pub n_pop: usize,
    pub spans: Vec<Range<usize>>,
    pub aux: DMatrix<f64>,
    /// Ensemble indices under test.
    pub selected: Vec<usize>,
    /// Hourly loads of the selected combinations.
    pub simulations: Vec<Vec<f64>>,
    pub references: Vec<ErrorMetrics>,
    pub cell: DayBins,
    pub rake: DayBins,
}

/// Precomputes features, partitions and references for one substation.
pub fn prepare(weather: &WeatherSeries, data: &SubstationData, cfg: &ExperimentConfig) -> Result<Prepared> {
    let measured = &data.measured;
    if measured.timestamps() != weather.timestamps() {
        return Err(Error::Schema(alloc::format!(
            "substation {} is not on the weather grid",
            measured.substation_id()
        )));
    }
    let references_all = reference_errors(measured, &data.ensemble)?;
    let calibration: Vec<f64> = if data.ensemble.calibration_gof().is_empty() {
        references_all.iter().map(|e| e.gof).collect()
    } else {
        data.ensemble.calibration_gof().to_vec()
    };
    let selected = select_best(&calibration, cfg.best_fraction);
    let mean_load = data.ensemble.mean_profile();
    let aux = build_hourly_features_profile(weather, &mean_load)?;
    let daily = aggregate_daily_profile(weather, &mean_load, measured.mask())?;
    let population_days: Vec<usize> = (0..daily.n_days()).filter(|&d| daily.is_respondent(d)).collect();
    let cell = day_bins(&daily.values, &population_days, daily.n_days(), &cfg.cell)?;
    let rake = day_bins(&daily.values, &population_days, daily.n_days(), &cfg.rake)?;
    Ok(Prepared {
        id: measured.substation_id().to_string(),
        measured: measured.clone(),
        n_pop: measured.observed_count(),
        spans: daily.spans,
        aux,
        simulations: selected.iter().map(|&c| data.ensemble.load(c).to_vec()).collect(),
        references: selected.iter().map(|&c| references_all[c]).collect(),
        selected,
        cell,
        rake,
    })
}

/// One (substation, ratio, repetition) unit of work.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub substation: usize,
    pub ratio_index: usize,
    pub repetition: usize,
    /// First masked grid index.
    pub start: usize,
}

/// One GOF estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub substation: usize,
    /// Ensemble index of the combination.
    pub combination: usize,
    pub method: Method,
    pub ratio_index: usize,
    pub repetition: usize,
    pub start: usize,
    pub estimate: f64,
    pub reference: f64,
}

/// An estimator that produced nothing for a cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub substation: usize,
    pub method: Method,
    pub ratio_index: usize,
    pub repetition: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellOutput {
    pub cell: Cell,
    pub records: Vec<Record>,
    pub failures: Vec<Failure>,
    pub weights: Vec<(Method, WeightRecord)>,
}

/// Prepared substations and the full list of cells.
#[derive(Debug, Clone)]
pub struct Plan {
    pub config: ExperimentConfig,
    pub substations: Vec<Prepared>,
    pub cells: Vec<Cell>,
}

impl Plan {
    pub fn new(weather: &WeatherSeries, data: &[SubstationData], config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        if data.is_empty() {
            return Err(Error::EmptyInput);
        }
        let substations = data
            .iter()
            .map(|d| prepare(weather, d, config))
            .collect::<Result<Vec<_>>>()?;
        let mut cells = Vec::new();
        for (s, sub) in substations.iter().enumerate() {
            let n = sub.measured.len();
            for r in 0..config.ratios.len() {
                let starts = sample_starts(
                    n,
                    config.repetitions,
                    derive_seed(config.seed, &[START_STREAM, s as u64, r as u64]),
                );
                cells.extend(starts.into_iter().enumerate().map(|(rep, start)| Cell {
                    substation: s,
                    ratio_index: r,
                    repetition: rep,
                    start,
                }));
            }
        }
        Ok(Self {
            config: config.clone(),
            substations,
            cells,
        })
    }

    /// Runs every configured estimator on one cell. Never fails: estimator
    /// errors become [`Failure`]s.
    pub fn run_cell(&self, cell: Cell) -> CellOutput {
        let sub = &self.substations[cell.substation];
        let cfg = &self.config;
        let mut out = CellOutput {
            cell,
            records: Vec::new(),
            failures: Vec::new(),
            weights: Vec::new(),
        };
        let fail = |method: Method, e: &Error| Failure {
            substation: cell.substation,
            method,
            ratio_index: cell.ratio_index,
            repetition: cell.repetition,
            reason: e.to_string(),
        };
        let n = sub.measured.len();
        let sample = block_mask(n, &MaskSpec::new(cfg.ratios[cell.ratio_index], cell.start))
            .and_then(|synthetic| compose_mask(sub.measured.mask(), &synthetic));
        let sample = match sample {
            Ok(s) => s,
            Err(e) => {
                out.failures.extend(cfg.methods.iter().map(|&m| fail(m, &e)));
                return out;
            }
        };
        for &method in &cfg.methods {
            match self.estimate(sub, method, &sample) {
                Ok((estimates, weight_record)) => {
                    if let Some(w) = weight_record {
                        out.weights.push((method, w));
                    }
                    out.records.extend(estimates.into_iter().enumerate().map(|(k, estimate)| Record {
                        substation: cell.substation,
                        combination: sub.selected[k],
                        method,
                        ratio_index: cell.ratio_index,
                        repetition: cell.repetition,
                        start: cell.start,
                        estimate,
                        reference: sub.references[k].gof,
                    }));
                }
                Err(e) => {
                    log::debug!(
                        "{} {} ratio {} rep {}: {e}",
                        sub.id,
                        method,
                        cfg.ratios[cell.ratio_index],
                        cell.repetition
                    );
                    out.failures.push(fail(method, &e));
                }
            }
        }
        out
    }

    /// GOF estimate of every selected combination.
    fn estimate(&self, sub: &Prepared, method: Method, sample: &[bool]) -> Result<(Vec<f64>, Option<WeightRecord>)> {
        let cfg = &self.config;
        let measured = sub.measured.values();
        let population = sub.measured.mask();
        let observed: Vec<usize> = (0..sample.len()).filter(|&i| sample[i]).collect();
        let pick = |v: &[f64]| observed.iter().map(|&i| v[i]).collect::<Vec<f64>>();
        let m_obs = pick(measured);
        match method {
            Method::Unadjusted => sub
                .simulations
                .iter()
                .map(|s| Ok(ErrorMetrics::of(SeriesPair::new(&pick(s), &m_obs)?)?.gof))
                .collect::<Result<Vec<_>>>()
                .map(|e| (e, None)),
            Method::Imputation => {
                let completed = impute_values(measured, sample, &sub.aux, &cfg.imputation)?;
                sub.simulations
                    .iter()
                    .map(|s| Ok(error_over(population, s, &completed)?.gof))
                    .collect::<Result<Vec<_>>>()
                    .map(|e| (e, None))
            }
            Method::Cell | Method::Rake => {
                let (calibration, bins) = match method {
                    Method::Cell => (Calibration::Cell, &sub.cell),
                    _ => (Calibration::Rake, &sub.rake),
                };
                let w = hourly_weights(
                    calibration,
                    population,
                    sample,
                    &sub.spans,
                    &bins.bins,
                    &bins.n_bins,
                    &cfg.raking,
                )?;
                let w_obs = pick(&w.weights);
                sub.simulations
                    .iter()
                    .map(|s| Ok(weighted_error(&pick(s), &m_obs, &w_obs, sub.n_pop)?.gof))
                    .collect::<Result<Vec<_>>>()
                    .map(|e| (e, Some(w.record)))
            }
        }
    }

    /// Combines cell outputs, in any order, into the canonical result.
    pub fn assemble(&self, mut outputs: Vec<CellOutput>) -> ExperimentResult {
        outputs.sort_by_key(|o| o.cell);
        let cfg = &self.config;
        let mut records = Vec::new();
        let mut failures = Vec::new();
        let mut convergence: BTreeMap<(Method, usize), ConvergenceStats> = BTreeMap::new();
        for o in outputs {
            records.extend(o.records);
            failures.extend(o.failures);
            for (method, w) in o.weights {
                convergence
                    .entry((method, o.cell.ratio_index))
                    .or_insert_with(|| ConvergenceStats::new(method, cfg.ratios[o.cell.ratio_index]))
                    .add(&w);
            }
        }
        let references = self
            .substations
            .iter()
            .enumerate()
            .flat_map(|(s, sub)| {
                sub.selected.iter().zip(&sub.references).map(move |(&c, e)| ReferenceRow {
                    substation: s,
                    combination: c,
                    nmbe: e.nmbe,
                    cvrmse: e.cvrmse,
                    gof: e.gof,
                })
            })
            .collect();
        let summaries = summarize_records(&records, &cfg.methods, &cfg.ratios);
        let tolerable = tolerable_missingness(
            &records,
            &cfg.methods,
            &cfg.ratios,
            self.substations.len(),
            cfg.rel_tolerance,
            cfg.coverage,
        );
        ExperimentResult {
            substations: self.substations.iter().map(|s| s.id.clone()).collect(),
            ratios: cfg.ratios.clone(),
            records,
            failures,
            references,
            summaries,
            convergence: convergence.into_values().collect(),
            tolerable,
        }
    }
}

/// Reference metrics of one selected combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub substation: usize,
    pub combination: usize,
    pub nmbe: f64,
    pub cvrmse: f64,
    pub gof: f64,
}

/// Pooled summary of one (method, ratio).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub ratio: f64,
    /// `None` when every cell failed.
    pub summary: Option<EstimateSummary>,
}

/// Raking and cell-weighting diagnostics of one (method, ratio).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStats {
    pub method: Method,
    pub ratio: f64,
    pub cells: usize,
    pub converged: usize,
    pub fallbacks: usize,
    pub mean_iterations: f64,
    pub max_deviation: f64,
    pub collapsed_components: usize,
    pub redistributed_bins: usize,
}

impl ConvergenceStats {
    fn new(method: Method, ratio: f64) -> Self {
        Self {
            method,
            ratio,
            cells: 0,
            converged: 0,
            fallbacks: 0,
            mean_iterations: 0.0,
            max_deviation: 0.0,
            collapsed_components: 0,
            redistributed_bins: 0,
        }
    }

    fn add(&mut self, w: &WeightRecord) {
        self.cells += 1;
        self.converged += w.converged as usize;
        self.fallbacks += w.fallback as usize;
        self.mean_iterations += (w.iterations as f64 - self.mean_iterations) / self.cells as f64;
        self.max_deviation = self.max_deviation.max(w.max_deviation);
        self.collapsed_components += w.collapsed_components;
        self.redistributed_bins += w.redistributed_bins;
    }
}

/// Largest tolerable ratio of one method for one substation, or for the whole
/// sample when `substation` is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TolerableRow {
    pub method: Method,
    pub substation: Option<usize>,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub substations: Vec<String>,
    pub ratios: Vec<f64>,
    /// Ordered by substation, ratio, repetition, method, combination.
    pub records: Vec<Record>,
    pub failures: Vec<Failure>,
    pub references: Vec<ReferenceRow>,
    pub summaries: Vec<SummaryRow>,
    pub convergence: Vec<ConvergenceStats>,
    pub tolerable: Vec<TolerableRow>,
}

/// Pooled summaries over substations, combinations and repetitions for each
/// (method, ratio), methods in the given order.
pub fn summarize_records(records: &[Record], methods: &[Method], ratios: &[f64]) -> Vec<SummaryRow> {
    let mut pairs: BTreeMap<(Method, usize), Vec<(f64, f64)>> = BTreeMap::new();
    for r in records {
        pairs.entry((r.method, r.ratio_index)).or_default().push((r.reference, r.estimate));
    }
    let mut rows = Vec::with_capacity(methods.len() * ratios.len());
    for &method in methods {
        for (ri, &ratio) in ratios.iter().enumerate() {
            let summary = pairs
                .get(&(method, ri))
                .and_then(|p| summarize_pooled(p).ok());
            rows.push(SummaryRow { method, ratio, summary });
        }
    }
    rows
}

/// Whether a set of estimates meets the coverage criterion. References of
/// zero leave the relative deviation undefined and are skipped.
fn meets_criterion<'a>(records: impl Iterator<Item = &'a Record>, rel_tolerance: f64, coverage: f64) -> bool {
    let mut total = 0usize;
    let mut within = 0usize;
    for r in records.filter(|r| r.reference != 0.0) {
        total += 1;
        if ((r.estimate - r.reference) / r.reference).abs() <= rel_tolerance {
            within += 1;
        }
    }
    total > 0 && within as f64 >= coverage * total as f64
}

/// Monotone prefix rule: the largest grid ratio such that the criterion holds
/// at it and every smaller grid ratio; 0 when it fails at the first one.
pub fn tolerable_ratio(records: &[&Record], ratios: &[f64], rel_tolerance: f64, coverage: f64) -> f64 {
    let mut tolerable = 0.0;
    for (ri, &ratio) in ratios.iter().enumerate() {
        let at = records.iter().copied().filter(|r| r.ratio_index == ri);
        if !meets_criterion(at, rel_tolerance, coverage) {
            break;
        }
        tolerable = ratio;
    }
    tolerable
}

/// Tolerable missingness per (method, substation) followed by the
/// sample-level value per method.
pub fn tolerable_missingness(
    records: &[Record],
    methods: &[Method],
    ratios: &[f64],
    n_substations: usize,
    rel_tolerance: f64,
    coverage: f64,
) -> Vec<TolerableRow> {
    let zero_refs = records.iter().filter(|r| r.reference == 0.0).count();
    if zero_refs > 0 {
        log::warn!("{zero_refs} estimates have a zero reference and are excluded from tolerable missingness");
    }
    let mut rows = Vec::new();
    for &method in methods {
        let of_method: Vec<&Record> = records.iter().filter(|r| r.method == method).collect();
        for s in 0..n_substations {
            let sub: Vec<&Record> = of_method.iter().copied().filter(|r| r.substation == s).collect();
            rows.push(TolerableRow {
                method,
                substation: Some(s),
                ratio: tolerable_ratio(&sub, ratios, rel_tolerance, coverage),
            });
        }
        rows.push(TolerableRow {
            method,
            substation: None,
            ratio: tolerable_ratio(&of_method, ratios, rel_tolerance, coverage),
        });
    }
    rows
}

/// Runs the whole plan sequentially.
pub fn run_experiment(weather: &WeatherSeries, data: &[SubstationData], cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let plan = Plan::new(weather, data, cfg)?;
    let outputs = plan.cells.iter().map(|&c| plan.run_cell(c)).collect();
    Ok(plan.assemble(outputs))
}

/// Daily GOF of the mean of the best combinations against the measurement,
/// `None` for days without enough observed load.
pub fn daily_gof(measured: &MeasuredSeries, simulated: &[f64], spans: &[Range<usize>]) -> Vec<Option<f64>> {
    spans
        .iter()
        .map(|span| {
            let (s, m): (Vec<f64>, Vec<f64>) = span
                .clone()
                .filter(|&i| measured.mask()[i])
                .map(|i| (simulated[i], measured.values()[i]))
                .unzip();
            SeriesPair::new(&s, &m)
                .and_then(ErrorMetrics::of)
                .ok()
                .map(|e| gof(e.nmbe, e.cvrmse))
        })
        .collect()
}

/// Mutual information between each daily feature and the daily GOF of the
/// best-combination mean, sorted by decreasing information.
pub fn sensitivity(
    weather: &WeatherSeries,
    data: &SubstationData,
    best_fraction: f64,
    bins: usize,
) -> Result<Vec<(String, f64)>> {
    let ensemble = &data.ensemble;
    let calibration = if ensemble.calibration_gof().is_empty() {
        reference_errors(&data.measured, ensemble)?.iter().map(|e| e.gof).collect()
    } else {
        ensemble.calibration_gof().to_vec()
    };
    let best = select_best(&calibration, best_fraction);
    let mut mean = vec![0.0; ensemble.n_hours()];
    for &c in &best {
        for (m, l) in mean.iter_mut().zip(ensemble.load(c)) {
            *m += l / best.len() as f64;
        }
    }
    let daily = aggregate_daily_profile(weather, &ensemble.mean_profile(), data.measured.mask())?;
    let gofs = daily_gof(&data.measured, &mean, &daily.spans);
    let days: Vec<usize> = (0..gofs.len()).filter(|&d| gofs[d].is_some()).collect();
    let y: Vec<f64> = days.iter().filter_map(|&d| gofs[d]).collect();
    let mut out = DAILY_FEATURES
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let x: Vec<f64> = days.iter().map(|&d| daily.values[(d, j)]).collect();
            Ok((name.to_string(), mutual_information(&x, &y, bins)?))
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(out)
}
