//! The five commands. Each takes a validated [`RunConfig`].

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use ubemval_core::cleanse::{apply_cleansing, CleanseReport, FlagCounts};
use ubemval_core::features::{aggregate_daily_profile, DAILY_FEATURES};
use ubemval_core::harness::{sensitivity, Plan};
use ubemval_core::series::{filter_heating_season, in_summer_window, HourlyGrid, HourlyRecord};
use ubemval_core::synth::{build_substation, district_weather, SynthSubstation, SUBSTATIONS};

use crate::config::RunConfig;
use crate::dataset::load_dataset;
use crate::error::CliError;
use crate::io::{
    discover, fmt6, out_err, read_manifest, read_measured, write_ensemble, write_json, write_measured,
    write_weather, writer, Manifest, ManifestEntry, SubstationFiles,
};
use crate::report::{emit_report, rederive};
use crate::run::run_plan;

fn required<'a>(path: &'a Option<PathBuf>, key: &str) -> Result<&'a Path, CliError> {
    path.as_deref()
        .ok_or_else(|| CliError::Config(format!("`{key}` is required (flag --{key} or config key `{key}`)")))
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))
}

/// Generates the synthetic district as a dataset directory.
pub fn synth(cfg: &RunConfig) -> Result<(), CliError> {
    let out = required(&cfg.out, "out")?;
    let (weather, keep) = district_weather(&cfg.synth).map_err(CliError::from_core)?;
    let substations: Vec<SynthSubstation> = pool(cfg.jobs)?
        .install(|| {
            SUBSTATIONS
                .par_iter()
                .enumerate()
                .map(|(i, p)| build_substation(i, p, &weather, &keep, &cfg.synth))
                .collect::<Result<Vec<_>, _>>()
        })
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let weather = filter_heating_season(&weather);
    write_weather(&out.join("weather.csv"), &weather)?;
    let names: Vec<String> = cfg.synth.space.iter().map(|r| r.name.clone()).collect();
    let mut entries = Vec::with_capacity(substations.len());
    for s in &substations {
        let files = SubstationFiles::in_dir(out, &s.meta.substation_id);
        write_measured(&files.measured, &s.measured, None)?;
        write_ensemble(
            &files.ensemble,
            &files.params,
            s.measured.timestamps(),
            &s.ensemble,
            &names,
        )?;
        entries.push(ManifestEntry {
            substation_id: s.meta.substation_id.clone(),
            year_built: Some(s.meta.year_built),
            floor_area: Some(s.meta.floor_area),
            missingness: s.meta.missingness,
            true_parameters: Some(names.iter().cloned().zip(s.true_params.values().iter().copied()).collect()),
        });
    }
    write_json(
        &out.join("manifest.json"),
        &Manifest {
            seed: Some(cfg.synth.seed),
            substations: entries,
            config: cfg.to_json(),
        },
    )?;
    log::info!("wrote {} substations to {}", substations.len(), out.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct CleanseSummary {
    flags: FlagCounts,
    already_missing: usize,
    flagged_while_missing: usize,
    retained: usize,
    missingness: f64,
}

impl From<&CleanseReport> for CleanseSummary {
    fn from(r: &CleanseReport) -> Self {
        Self {
            flags: r.flags,
            already_missing: r.already_missing,
            flagged_while_missing: r.flagged_while_missing,
            retained: r.retained,
            missingness: r.missingness,
        }
    }
}

fn copy(from: &Path, to: &Path) -> Result<(), CliError> {
    if !from.is_file() {
        return Err(CliError::Data(format!("{}: file not found", from.display())));
    }
    if let Some(dir) = to.parent() {
        fs::create_dir_all(dir).map_err(|e| out_err(dir, e))?;
    }
    fs::copy(from, to).map(|_| ()).map_err(|e| out_err(to, e))
}

fn same_dir(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

/// Flags bad measurements and writes a cleaned copy of the dataset. Only
/// heating-season hours are cleansed and written.
pub fn clean(cfg: &RunConfig) -> Result<(), CliError> {
    let data = required(&cfg.data, "data")?;
    let out = required(&cfg.out, "out")?;
    if same_dir(data, out) {
        return Err(CliError::Config("`out` must differ from `data`".into()));
    }
    let files = discover(data)?;
    let manifest = read_manifest(data)?;
    copy(&data.join("weather.csv"), &out.join("weather.csv"))?;
    let mut reports = BTreeMap::new();
    let mut entries = Vec::with_capacity(files.len());
    for f in &files {
        let loaded = read_measured(&f.measured, &f.id)?;
        let keep: Vec<bool> = loaded
            .series
            .timestamps()
            .iter()
            .map(|ts| !in_summer_window(ts.date()))
            .collect();
        let series = loaded.series.retain_hours(&keep);
        let records: Option<Vec<HourlyRecord>> = loaded.records.map(|r| {
            r.into_iter()
                .zip(&keep)
                .filter(|(_, &k)| k)
                .map(|(r, _)| r)
                .collect()
        });
        let (cleaned, report) =
            apply_cleansing(&series, records.as_deref(), &cfg.cleanse).map_err(CliError::from_core)?;
        let target = SubstationFiles::in_dir(out, &f.id);
        write_measured(&target.measured, &cleaned, records.as_deref())?;
        copy(&f.ensemble, &target.ensemble)?;
        copy(&f.params, &target.params)?;
        log::info!(
            "{}: {} outliers, {} quantised, {} malfunction, {} manual; missingness {:.1}%",
            f.id,
            report.flags.outlier,
            report.flags.quantised,
            report.flags.malfunction,
            report.flags.manual,
            100.0 * report.missingness
        );
        let known = manifest
            .as_ref()
            .and_then(|m| m.substations.iter().find(|e| e.substation_id == f.id));
        entries.push(ManifestEntry {
            substation_id: f.id.clone(),
            year_built: known.and_then(|e| e.year_built),
            floor_area: known.and_then(|e| e.floor_area),
            missingness: cleaned.missingness(),
            true_parameters: known.and_then(|e| e.true_parameters.clone()),
        });
        reports.insert(f.id.clone(), CleanseSummary::from(&report));
    }
    write_json(&out.join("cleanse.json"), &reports)?;
    write_json(
        &out.join("manifest.json"),
        &Manifest {
            seed: manifest.and_then(|m| m.seed),
            substations: entries,
            config: cfg.to_json(),
        },
    )
}

/// Ranks daily features by mutual information with the daily GOF and
/// exports the daily feature matrices.
pub fn sensitivity_cmd(cfg: &RunConfig) -> Result<(), CliError> {
    let data = required(&cfg.data, "data")?;
    let out = required(&cfg.out, "out")?;
    let dataset = load_dataset(data)?;
    let ranking_path = out.join("sensitivity.csv");
    let features_path = out.join("features.csv");
    let mut ranking = writer(&ranking_path)?;
    ranking
        .write_record(["substation", "rank", "feature", "mi"])
        .map_err(|e| out_err(&ranking_path, e))?;
    let mut features = writer(&features_path)?;
    let mut header = vec!["substation", "date"];
    header.extend(DAILY_FEATURES);
    features.write_record(&header).map_err(|e| out_err(&features_path, e))?;
    for sub in &dataset.substations {
        let id = sub.measured.substation_id();
        let mi = sensitivity(&dataset.weather, sub, cfg.sensitivity.best_fraction, cfg.sensitivity.bins)
            .map_err(|e| CliError::Data(format!("{id}: {e}")))?;
        for (rank, (name, value)) in mi.iter().enumerate() {
            ranking
                .write_record([id.to_string(), (rank + 1).to_string(), name.clone(), fmt6(*value)])
                .map_err(|e| out_err(&ranking_path, e))?;
        }
        let daily = aggregate_daily_profile(&dataset.weather, &sub.ensemble.mean_profile(), sub.measured.mask())
            .map_err(|e| CliError::Data(format!("{id}: {e}")))?;
        for d in 0..daily.n_days() {
            let mut row = vec![id.to_string(), daily.dates[d].to_string()];
            row.extend((0..daily.names.len()).map(|j| daily.values[(d, j)].to_string()));
            features.write_record(&row).map_err(|e| out_err(&features_path, e))?;
        }
        log::info!("{id}: top feature {}", mi.first().map_or("-", |m| m.0.as_str()));
    }
    ranking.flush().map_err(|e| out_err(&ranking_path, e))?;
    features.flush().map_err(|e| out_err(&features_path, e))?;
    write_json(
        &out.join("sensitivity.json"),
        &serde_json::json!({ "config": cfg.to_json() }),
    )
}

/// Runs the masking experiment and writes the report files.
pub fn experiment(cfg: &RunConfig) -> Result<(), CliError> {
    let data = required(&cfg.data, "data")?;
    let out = required(&cfg.out, "out")?;
    let dataset = load_dataset(data)?;
    let plan = Plan::new(&dataset.weather, &dataset.substations, &cfg.experiment).map_err(CliError::from_core)?;
    log::info!(
        "{} cells over {} substations and {} ratios",
        plan.cells.len(),
        plan.substations.len(),
        cfg.experiment.ratios.len()
    );
    let started = Instant::now();
    let result = run_plan(&plan, cfg.jobs).map_err(|e| CliError::Internal(e.to_string()))?;
    log::info!(
        "{} estimates, {} failures in {:.1} s",
        result.records.len(),
        result.failures.len(),
        started.elapsed().as_secs_f64()
    );
    emit_report(&result, cfg, out)
}

/// Re-derives summaries of the run in `run` into `out` (default `run`).
pub fn report(run: &Path, out: Option<&Path>) -> Result<(), CliError> {
    rederive(run, out.unwrap_or(run))
}
