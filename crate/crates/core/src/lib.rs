//! Validation-error estimation for building-energy models from incomplete
//! hourly measurements.
//!
//! The crate estimates the Goodness of Fit (GOF) of a set of simulated load
//! profiles against a measured series that has long gaps, using three
//! survey-sampling bias adjustments (regression imputation, cell weighting and
//! raking), and runs Monte-Carlo masking experiments that quantify the bias and
//! variance of each estimator as a function of the missing-data ratio.
//!
//! Everything here is `no_std` + `alloc`. File formats, configuration and the
//! parallel runner live in the `ubemval` crate.

#![no_std]
// `!(x > 0.0)` is deliberate throughout: it rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod cleanse;
pub mod error;
pub mod features;
pub mod harness;
pub mod impute;
pub mod mask;
pub mod metrics;
pub mod series;
pub mod synth;
pub mod weights;

pub use error::{Error, Result};
pub use metrics::{ErrorMetrics, EstimateSummary};
pub use series::{
    filter_heating_season, HourlyRecord, MeasuredSeries, ParameterCombination,
    SimulationEnsemble, SubstationMeta, WeatherSeries,
};
