//! Loading a dataset directory onto the heating-season grid.

use std::path::Path;

use ubemval_core::harness::SubstationData;
use ubemval_core::series::{filter_heating_season, WeatherSeries};

use crate::error::CliError;
use crate::io::{discover, read_ensemble, read_manifest, read_measured, read_weather, Manifest};

#[derive(Debug, Clone)]
pub struct Dataset {
    /// Season-filtered weather; every series below is on its grid.
    pub weather: WeatherSeries,
    pub substations: Vec<SubstationData>,
    pub manifest: Option<Manifest>,
}

/// Reads weather, measurements and ensembles, drops the summer window, and
/// aligns measurements to the weather grid. Hours absent from a measured file
/// count as missing; ensembles must cover every weather hour exactly.
pub fn load_dataset(dir: &Path) -> Result<Dataset, CliError> {
    let files = discover(dir)?;
    let manifest = read_manifest(dir)?;
    let weather_path = dir.join("weather.csv");
    let full = read_weather(&weather_path)?;
    let weather = filter_heating_season(&full);
    if weather.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no heating-season hours",
            weather_path.display()
        )));
    }
    let grid = weather.timestamps();
    let mut substations = Vec::with_capacity(files.len());
    for f in &files {
        let measured = read_measured(&f.measured, &f.id)?
            .series
            .align_to(grid)
            .map_err(CliError::from_core)?;
        let loaded = read_ensemble(&f.ensemble, &f.params)?;
        let keep: Vec<bool> = loaded
            .timestamps
            .iter()
            .map(|ts| grid.binary_search(ts).is_ok())
            .collect();
        let kept: Vec<_> = loaded
            .timestamps
            .iter()
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|(ts, _)| *ts)
            .collect();
        if kept != grid {
            return Err(CliError::Data(format!(
                "{}: simulated hours do not cover the weather grid",
                f.ensemble.display()
            )));
        }
        let ensemble = loaded.ensemble.select_hours(&keep).map_err(CliError::from_core)?;
        log::info!(
            "{}: {} hours, {:.1}% missing, {} simulations",
            f.id,
            measured.len(),
            100.0 * measured.missingness(),
            ensemble.size()
        );
        substations.push(SubstationData { measured, ensemble });
    }
    Ok(Dataset {
        weather,
        substations,
        manifest,
    })
}
