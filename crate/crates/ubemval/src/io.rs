//! CSV and JSON files of a dataset directory.
//!
//! A dataset holds `weather.csv`, a `manifest.json` listing substations, and
//! per substation a directory with `measured.csv`, `ensemble.csv` and
//! `params.csv`. Data files keep full float precision so they round-trip;
//! report files use [`fmt6`].

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use ubemval_core::series::{
    HourlyRecord, MeasuredSeries, ParameterCombination, SimulationEnsemble, WeatherSeries,
};

use crate::error::CliError;

const TS_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";
const TS_ALTERNATES: [&str; 3] = ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"];

pub fn format_timestamp(ts: &NaiveDateTime) -> String {
    ts.format(TS_FORMAT).to_string()
}

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    std::iter::once(TS_FORMAT)
        .chain(TS_ALTERNATES)
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

/// Six significant digits, trailing zeros trimmed.
pub fn fmt6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    if !(-5..15).contains(&magnitude) {
        return format!("{x:.5e}");
    }
    let decimals = (5 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

fn data_err(path: &Path, what: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {what}", path.display()))
}

fn reader(path: &Path) -> Result<csv::Reader<File>, CliError> {
    let file = File::open(path).map_err(|e| data_err(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

pub fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>, CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))?;
    }
    let file = File::create(path).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

pub fn out_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Output(format!("{}: {e}", path.display()))
}

fn headers(rdr: &mut csv::Reader<File>, path: &Path) -> Result<Vec<String>, CliError> {
    Ok(rdr
        .headers()
        .map_err(|e| data_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect())
}

fn column(headers: &[String], name: &str, path: &Path) -> Result<usize, CliError> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| data_err(path, format!("missing column `{name}`")))
}

fn parse_f64(field: &str, path: &Path, line: u64) -> Result<f64, CliError> {
    field
        .parse()
        .map_err(|_| data_err(path, format!("line {line}: `{field}` is not a number")))
}

fn parse_opt(field: Option<&str>, path: &Path, line: u64) -> Result<Option<f64>, CliError> {
    match field {
        None | Some("") => Ok(None),
        Some(f) => parse_f64(f, path, line).map(Some),
    }
}

/// Measured load and, when the optional hydraulic columns are present,
/// records aligned with the densified grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredFile {
    pub series: MeasuredSeries,
    pub records: Option<Vec<HourlyRecord>>,
}

/// Reads `timestamp,power_mw[,flow_m3h,supply_c,return_c]`. An empty power
/// field or an absent hour is a missing observation.
pub fn read_measured(path: &Path, substation_id: &str) -> Result<MeasuredFile, CliError> {
    let mut rdr = reader(path)?;
    let h = headers(&mut rdr, path)?;
    let ts_col = column(&h, "timestamp", path)?;
    let power_col = column(&h, "power_mw", path)?;
    let extra: Vec<Option<usize>> = ["flow_m3h", "supply_c", "return_c"]
        .iter()
        .map(|n| h.iter().position(|c| c == n))
        .collect();
    let has_extra = extra.iter().any(Option::is_some);
    let mut observations = Vec::new();
    let mut raw_records = BTreeMap::new();
    for (k, row) in rdr.records().enumerate() {
        let line = k as u64 + 2;
        let row = row.map_err(|e| data_err(path, e))?;
        let field = |c: usize| row.get(c).unwrap_or("");
        let ts = parse_timestamp(field(ts_col))
            .ok_or_else(|| data_err(path, format!("line {line}: bad timestamp `{}`", field(ts_col))))?;
        let power = parse_opt(Some(field(power_col)), path, line)?;
        observations.push((ts, power));
        if has_extra {
            let get = |c: Option<usize>| parse_opt(c.map(field), path, line);
            raw_records.insert(ts, (power, get(extra[0])?, get(extra[1])?, get(extra[2])?));
        }
    }
    let series = MeasuredSeries::from_observations(substation_id, observations)
        .map_err(|e| data_err(path, e))?;
    let records = has_extra.then(|| {
        series
            .timestamps()
            .iter()
            .map(|ts| {
                let (power, flow, supply, ret) = raw_records.get(ts).copied().unwrap_or_default();
                HourlyRecord {
                    timestamp: *ts,
                    power: power.unwrap_or(0.0),
                    flow,
                    supply_temp: supply,
                    return_temp: ret,
                }
            })
            .collect()
    });
    Ok(MeasuredFile { series, records })
}

fn opt_field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_measured(path: &Path, series: &MeasuredSeries, records: Option<&[HourlyRecord]>) -> Result<(), CliError> {
    let mut w = writer(path)?;
    let mut header = vec!["timestamp", "power_mw"];
    if records.is_some() {
        header.extend(["flow_m3h", "supply_c", "return_c"]);
    }
    w.write_record(&header).map_err(|e| out_err(path, e))?;
    for i in 0..series.len() {
        let mut row = vec![
            format_timestamp(&series.timestamps()[i]),
            if series.mask()[i] { series.values()[i].to_string() } else { String::new() },
        ];
        if let Some(recs) = records {
            let r = &recs[i];
            row.extend([opt_field(r.flow), opt_field(r.supply_temp), opt_field(r.return_temp)]);
        }
        w.write_record(&row).map_err(|e| out_err(path, e))?;
    }
    w.flush().map_err(|e| out_err(path, e))
}

/// Reads `timestamp,temp_c,ghi_wm2,wind_ms`; weather must be complete.
pub fn read_weather(path: &Path) -> Result<WeatherSeries, CliError> {
    let mut rdr = reader(path)?;
    let h = headers(&mut rdr, path)?;
    let cols: Vec<usize> = ["timestamp", "temp_c", "ghi_wm2", "wind_ms"]
        .iter()
        .map(|n| column(&h, n, path))
        .collect::<Result<_, _>>()?;
    let (mut ts, mut temp, mut ghi, mut wind) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (k, row) in rdr.records().enumerate() {
        let line = k as u64 + 2;
        let row = row.map_err(|e| data_err(path, e))?;
        let field = |c: usize| row.get(c).unwrap_or("");
        ts.push(
            parse_timestamp(field(cols[0]))
                .ok_or_else(|| data_err(path, format!("line {line}: bad timestamp `{}`", field(cols[0]))))?,
        );
        temp.push(parse_f64(field(cols[1]), path, line)?);
        ghi.push(parse_f64(field(cols[2]), path, line)?);
        wind.push(parse_f64(field(cols[3]), path, line)?);
    }
    WeatherSeries::new(ts, temp, ghi, wind).map_err(|e| data_err(path, e))
}

pub fn write_weather(path: &Path, weather: &WeatherSeries) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["timestamp", "temp_c", "ghi_wm2", "wind_ms"])
        .map_err(|e| out_err(path, e))?;
    for i in 0..weather.len() {
        w.write_record([
            format_timestamp(&weather.timestamps()[i]),
            weather.outdoor_temp()[i].to_string(),
            weather.ghi()[i].to_string(),
            weather.wind()[i].to_string(),
        ])
        .map_err(|e| out_err(path, e))?;
    }
    w.flush().map_err(|e| out_err(path, e))
}

/// Simulated loads with their grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleFile {
    pub timestamps: Vec<NaiveDateTime>,
    pub ensemble: SimulationEnsemble,
}

/// Reads the wide `timestamp,sim_000,...` matrix and the
/// `combo_id,param_name,value` sidecar. A `calibration_gof` parameter row,
/// when present for every combination, restores the calibration errors.
pub fn read_ensemble(matrix: &Path, params: &Path) -> Result<EnsembleFile, CliError> {
    let mut rdr = reader(matrix)?;
    let h = headers(&mut rdr, matrix)?;
    let ts_col = column(&h, "timestamp", matrix)?;
    let sim_cols: Vec<usize> = (0..h.len()).filter(|&c| h[c].starts_with("sim_")).collect();
    if sim_cols.is_empty() {
        return Err(data_err(matrix, "no sim_ columns"));
    }
    let mut timestamps = Vec::new();
    let mut loads = vec![Vec::new(); sim_cols.len()];
    for (k, row) in rdr.records().enumerate() {
        let line = k as u64 + 2;
        let row = row.map_err(|e| data_err(matrix, e))?;
        let field = |c: usize| row.get(c).unwrap_or("");
        timestamps.push(
            parse_timestamp(field(ts_col))
                .ok_or_else(|| data_err(matrix, format!("line {line}: bad timestamp `{}`", field(ts_col))))?,
        );
        for (j, &c) in sim_cols.iter().enumerate() {
            loads[j].push(parse_f64(field(c), matrix, line)?);
        }
    }

    let mut rdr = reader(params)?;
    let h = headers(&mut rdr, params)?;
    let cols: Vec<usize> = ["combo_id", "param_name", "value"]
        .iter()
        .map(|n| column(&h, n, params))
        .collect::<Result<_, _>>()?;
    let mut values: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut gof: BTreeMap<usize, f64> = BTreeMap::new();
    for (k, row) in rdr.records().enumerate() {
        let line = k as u64 + 2;
        let row = row.map_err(|e| data_err(params, e))?;
        let field = |c: usize| row.get(c).unwrap_or("");
        let id: usize = field(cols[0])
            .parse()
            .map_err(|_| data_err(params, format!("line {line}: bad combo_id")))?;
        let v = parse_f64(field(cols[2]), params, line)?;
        if field(cols[1]) == "calibration_gof" {
            gof.insert(id, v);
        } else {
            values.entry(id).or_default().push(v);
        }
    }
    let combinations: Vec<ParameterCombination> = (0..loads.len())
        .map(|i| ParameterCombination(values.remove(&i).unwrap_or_default()))
        .collect();
    let mut ensemble = SimulationEnsemble::new(combinations, loads).map_err(|e| data_err(matrix, e))?;
    if !gof.is_empty() {
        if gof.len() != ensemble.size() {
            return Err(data_err(params, "calibration_gof missing for some combinations"));
        }
        ensemble = ensemble
            .with_calibration_gof(gof.into_values().collect())
            .map_err(|e| data_err(params, e))?;
    }
    Ok(EnsembleFile { timestamps, ensemble })
}

pub fn write_ensemble(
    matrix: &Path,
    params: &Path,
    timestamps: &[NaiveDateTime],
    ensemble: &SimulationEnsemble,
    names: &[String],
) -> Result<(), CliError> {
    let mut w = writer(matrix)?;
    let mut header = vec!["timestamp".to_string()];
    header.extend((0..ensemble.size()).map(|i| format!("sim_{i:03}")));
    w.write_record(&header).map_err(|e| out_err(matrix, e))?;
    for (t, ts) in timestamps.iter().enumerate() {
        let mut row = vec![format_timestamp(ts)];
        row.extend(ensemble.loads().iter().map(|l| l[t].to_string()));
        w.write_record(&row).map_err(|e| out_err(matrix, e))?;
    }
    w.flush().map_err(|e| out_err(matrix, e))?;

    let mut w = writer(params)?;
    w.write_record(["combo_id", "param_name", "value"])
        .map_err(|e| out_err(params, e))?;
    for (i, c) in ensemble.combinations().iter().enumerate() {
        for (j, v) in c.values().iter().enumerate() {
            let name = names.get(j).cloned().unwrap_or_else(|| format!("param_{j}"));
            w.write_record([i.to_string(), name, v.to_string()])
                .map_err(|e| out_err(params, e))?;
        }
        if let Some(g) = ensemble.calibration_gof().get(i) {
            w.write_record([i.to_string(), "calibration_gof".into(), g.to_string()])
                .map_err(|e| out_err(params, e))?;
        }
    }
    w.flush().map_err(|e| out_err(params, e))
}

/// One substation of a dataset. Building metadata is unknown for datasets
/// assembled without a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub substation_id: String,
    #[serde(default)]
    pub year_built: Option<i32>,
    #[serde(default)]
    pub floor_area: Option<f64>,
    /// Missing fraction of the measured series as written.
    pub missingness: f64,
    /// Generating parameters of synthetic substations, by name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_parameters: Option<BTreeMap<String, f64>>,
}

/// Dataset index written next to the data files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: Option<u64>,
    pub substations: Vec<ManifestEntry>,
    /// Resolved configuration of the producing command.
    #[serde(default)]
    pub config: serde_json::Value,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| out_err(dir, e))?;
    }
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| out_err(path, e))
}

pub fn read_manifest(dir: &Path) -> Result<Option<Manifest>, CliError> {
    let path = dir.join("manifest.json");
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(|e| data_err(&path, e))?;
    serde_json::from_str(&text).map(Some).map_err(|e| data_err(&path, e))
}

/// Files of one substation inside a dataset directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubstationFiles {
    pub id: String,
    pub measured: PathBuf,
    pub ensemble: PathBuf,
    pub params: PathBuf,
}

impl SubstationFiles {
    pub fn in_dir(root: &Path, id: &str) -> Self {
        let dir = root.join(id);
        Self {
            id: id.to_string(),
            measured: dir.join("measured.csv"),
            ensemble: dir.join("ensemble.csv"),
            params: dir.join("params.csv"),
        }
    }
}

/// Substation ids from the manifest, or else every subdirectory holding a
/// `measured.csv`, sorted by name.
pub fn discover(root: &Path) -> Result<Vec<SubstationFiles>, CliError> {
    if !root.is_dir() {
        return Err(CliError::Data(format!("{}: dataset directory not found", root.display())));
    }
    let ids: Vec<String> = match read_manifest(root)? {
        Some(m) => m.substations.into_iter().map(|s| s.substation_id).collect(),
        None => {
            let mut ids: Vec<String> = fs::read_dir(root)
                .map_err(|e| data_err(root, e))?
                .filter_map(|e| e.ok())
                .filter(|e| e.path().join("measured.csv").is_file())
                .map(|e| e.file_name().to_string_lossy().into_owned())
                .collect();
            ids.sort();
            ids
        }
    };
    if ids.is_empty() {
        return Err(data_err(root, "no substations found"));
    }
    Ok(ids.iter().map(|id| SubstationFiles::in_dir(root, id)).collect())
}
