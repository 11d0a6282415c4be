//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runs the full default experiment, so it takes a while.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use ubemval::run::run_plan;
use ubemval_core::features::mutual_information;
use ubemval_core::harness::{ExperimentConfig, ExperimentResult, Method, Plan, SubstationData};
use ubemval_core::impute::{build_hourly_features_profile, error_over, imputed_error, ImputationConfig};
use ubemval_core::mask::{block_mask, derive_seed, sample_starts, MaskSpec};
use ubemval_core::metrics::{cvrmse, gof, nmbe, weighted_cvrmse, weighted_nmbe, ErrorMetrics, SeriesPair};
use ubemval_core::series::{MeasuredSeries, WeatherSeries};
use ubemval_core::synth::{
    build_district, default_space, lhs_sample, stratum, synth_weather, SynthConfig, SynthDistrict, WeatherConfig,
};
use ubemval_core::weights::{cell_weights, hourly_weights, rake_weights, Calibration, Marginals, RakeConfig};

type Outcome = Result<String, String>;

/// Uniform draw in [0, 1) from a hashed (seed, index) path.
fn unit(seed: u64, i: u64) -> f64 {
    (derive_seed(seed, &[i]) >> 11) as f64 / (1u64 << 53) as f64
}

fn close(got: f64, want: f64, rel: f64) -> bool {
    if want == 0.0 {
        got.abs() <= rel
    } else {
        ((got - want) / want).abs() <= rel
    }
}

fn check(ok: bool, detail: impl Into<String>) -> Outcome {
    if ok {
        Ok(detail.into())
    } else {
        Err(detail.into())
    }
}

fn c1_formula_oracles() -> Outcome {
    let p = |s: &'static [f64], m: &'static [f64]| SeriesPair::new(s, m).unwrap();
    let cases: Vec<(&str, f64, f64)> = vec![
        ("nmbe s=m", nmbe(p(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0])).unwrap(), 0.0),
        ("nmbe doubling", nmbe(p(&[2.0, 2.0], &[1.0, 1.0])).unwrap(), 100.0),
        ("nmbe cancelling", nmbe(p(&[1.0, 3.0], &[2.0, 2.0])).unwrap(), 0.0),
        ("cvrmse s=m", cvrmse(p(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0])).unwrap(), 0.0),
        ("cvrmse [1,3]/[2,2]", cvrmse(p(&[1.0, 3.0], &[2.0, 2.0])).unwrap(), 50.0),
        ("cvrmse pure bias", cvrmse(p(&[3.0, 3.0], &[2.0, 2.0])).unwrap(), 50.0),
        ("nmbe pure bias", nmbe(p(&[3.0, 3.0], &[2.0, 2.0])).unwrap(), 50.0),
        ("gof(0,0)", gof(0.0, 0.0), 0.0),
        ("gof(3,4)", gof(3.0, 4.0), 2.5 * 2f64.sqrt()),
        ("gof(7.25,7.25)", gof(7.25, 7.25), 7.25),
        ("weighted nmbe", weighted_nmbe(p(&[3.0, 9.0], &[2.0, 5.0]), &[2.0, 0.0]).unwrap(), 50.0),
        ("weighted cvrmse", weighted_cvrmse(p(&[3.0, 9.0], &[2.0, 5.0]), &[2.0, 0.0], 2).unwrap(), 50.0),
        ("weighted cvrmse s=m", weighted_cvrmse(p(&[3.0, 9.0], &[3.0, 9.0]), &[0.7, 1.9], 2).unwrap(), 0.0),
    ];
    let bad: Vec<String> = cases
        .iter()
        .filter(|(_, got, want)| !close(*got, *want, 1e-9))
        .map(|(name, got, want)| format!("{name}: {got} != {want}"))
        .collect();
    if !bad.is_empty() {
        return Err(bad.join("; "));
    }
    // unit weights on complete data reduce to the unweighted forms
    let mut worst: f64 = 0.0;
    for trial in 0..50u64 {
        let n = 24 + (trial as usize * 7) % 200;
        let m: Vec<f64> = (0..n).map(|i| 0.5 + unit(trial, i as u64)).collect();
        let s: Vec<f64> = (0..n).map(|i| 0.3 + 1.4 * unit(trial + 1000, i as u64)).collect();
        let pair = SeriesPair::new(&s, &m).unwrap();
        let plain = ErrorMetrics::of(pair).unwrap();
        let weighted = ErrorMetrics::weighted(pair, &vec![1.0; n], n).unwrap();
        for (a, b) in [
            (plain.nmbe, weighted.nmbe),
            (plain.cvrmse, weighted.cvrmse),
            (plain.gof, weighted.gof),
        ] {
            worst = worst.max(((a - b) / a).abs());
        }
    }
    check(
        worst <= 1e-12,
        format!("{} examples at 1e-9; unit-weight reduction worst rel {worst:.1e}", cases.len()),
    )
}

fn c2_ipf_oracle() -> Outcome {
    let bins = vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]];
    let m = Marginals {
        counts: vec![vec![3.0, 1.0], vec![2.0, 2.0]],
    };
    let r = rake_weights(&m, &bins, 2000, 0.01).map_err(|e| e.to_string())?;
    if r.factors != [1.5, 1.5, 0.5, 0.5] || r.iterations != 1 {
        return Err(format!("2x2: {:?} after {} cycles", r.factors, r.iterations));
    }
    let mut worst: f64 = 0.0;
    for t in 0..50u64 {
        let seed = 9000 + t;
        let q = [2 + (t % 3) as usize, 2 + (t / 3 % 2) as usize, 2];
        let n_pop = 40 + (t as usize * 13) % 60;
        let mut draw = 0u64;
        let mut next = || {
            draw += 1;
            unit(seed, draw)
        };
        let (pop, resp) = loop {
            let pop: Vec<Vec<usize>> = (0..n_pop)
                .map(|_| q.iter().map(|&k| ((next() * k as f64) as usize).min(k - 1)).collect())
                .collect();
            let resp: Vec<bool> = (0..n_pop).map(|_| next() < 0.65).collect();
            // keep tables where every populated bin has a respondent
            let covered = (0..q.len()).all(|c| {
                (0..q[c]).all(|b| {
                    let populated = pop.iter().any(|d| d[c] == b);
                    !populated || pop.iter().zip(&resp).any(|(d, &r)| r && d[c] == b)
                })
            });
            if covered {
                break (pop, resp);
            }
        };
        let marg = Marginals::from_cells(&pop, &q).map_err(|e| e.to_string())?;
        let rb: Vec<Vec<usize>> = pop.iter().zip(&resp).filter(|(_, &r)| r).map(|(d, _)| d.clone()).collect();
        let r = rake_weights(&marg, &rb, 2000, 0.01).map_err(|e| e.to_string())?;
        for c in 0..q.len() {
            let mut got = vec![0.0; q[c]];
            for (d, f) in rb.iter().zip(&r.factors) {
                got[d[c]] += f;
            }
            for (g, want) in got.iter().zip(&marg.counts[c]) {
                if *want > 0.0 {
                    worst = worst.max((g - want).abs() / want);
                }
            }
        }
    }
    check(
        worst < 0.01,
        format!("2x2 in 1 cycle; 50 random tables, worst marginal deviation {:.3}%", 100.0 * worst),
    )
}

fn c3_cell_exactness() -> Outcome {
    let days = 60;
    let q = [3usize, 2, 2];
    let spans: Vec<_> = (0..days).map(|d| d * 24..(d + 1) * 24).collect();
    let mut worst_cell: f64 = 0.0;
    let mut worst_total: f64 = 0.0;
    let mut collapsed = 0;
    for t in 0..100u64 {
        let seed = 31_000 + t;
        let day_bins: Vec<Vec<usize>> = (0..days as u64)
            .map(|d| {
                q.iter()
                    .enumerate()
                    .map(|(c, &k)| ((unit(seed, d * 8 + c as u64) * k as f64) as usize).min(k - 1))
                    .collect()
            })
            .collect();
        let population: Vec<bool> = (0..days as u64 * 24).map(|h| unit(seed + 500, h) < 0.9).collect();
        let ratio = 0.1 + 0.8 * unit(seed, 99_999);
        let start = (unit(seed, 77_777) * (days * 24) as f64) as usize;
        let block = block_mask(days * 24, &MaskSpec::new(ratio, start)).map_err(|e| e.to_string())?;
        let sample: Vec<bool> = population.iter().zip(&block).map(|(&p, &b)| p && b).collect();

        let pop_days: Vec<usize> = (0..days).filter(|&d| population[spans[d].clone()].iter().any(|&p| p)).collect();
        let cells: Vec<Vec<usize>> = pop_days.iter().map(|&d| day_bins[d].clone()).collect();
        let respondent: Vec<bool> = pop_days
            .iter()
            .map(|&d| sample[spans[d].clone()].iter().any(|&s| s))
            .collect();
        if !respondent.iter().any(|&r| r) {
            continue;
        }
        let cf = cell_weights(&cells, &respondent).map_err(|e| e.to_string())?;
        collapsed += (cf.components_used < q.len()) as usize;
        let mut pop_count: HashMap<&[usize], f64> = HashMap::new();
        let mut weighted: HashMap<&[usize], f64> = HashMap::new();
        for ((cell, &r), f) in cells.iter().zip(&respondent).zip(&cf.factors) {
            let key = &cell[..cf.components_used];
            *pop_count.entry(key).or_default() += 1.0;
            if r {
                *weighted.entry(key).or_default() += f;
            }
        }
        for (key, p) in &pop_count {
            let w = weighted.get(key).copied().unwrap_or(0.0);
            worst_cell = worst_cell.max((w - p).abs() / p);
        }

        let wv = hourly_weights(
            Calibration::Cell,
            &population,
            &sample,
            &spans,
            &day_bins,
            &q,
            &RakeConfig::default(),
        )
        .map_err(|e| e.to_string())?;
        let n_pop = population.iter().filter(|&&p| p).count() as f64;
        worst_total = worst_total.max((wv.weights.iter().sum::<f64>() - n_pop).abs());
    }
    check(
        worst_cell <= 1e-12 && worst_total <= 1e-9,
        format!(
            "100 masks ({collapsed} with collapsed cells): worst cell rel error {worst_cell:.1e}, worst |total - n_pop| {worst_total:.1e}"
        ),
    )
}

fn substation_data(d: &SynthDistrict) -> Vec<SubstationData> {
    d.substations
        .iter()
        .map(|s| SubstationData {
            measured: s.measured.clone(),
            ensemble: s.ensemble.clone(),
        })
        .collect()
}

fn c4_zero_missingness(weather: &WeatherSeries, data: &[SubstationData]) -> Outcome {
    let cfg = ExperimentConfig {
        ratios: vec![0.0],
        repetitions: 3,
        ..ExperimentConfig::default()
    };
    let plan = Plan::new(weather, data, &cfg).map_err(|e| e.to_string())?;
    let res = run_plan(&plan, 0).map_err(|e| e.to_string())?;
    let mismatched = res.records.iter().filter(|r| r.estimate != r.reference).count();
    let per_method: BTreeMap<Method, usize> = res.records.iter().fold(BTreeMap::new(), |mut m, r| {
        *m.entry(r.method).or_default() += 1;
        m
    });
    check(
        mismatched == 0 && res.failures.is_empty() && per_method.len() == 4,
        format!(
            "{} estimates over 4 methods, {mismatched} differ from the reference, {} failures",
            res.records.len(),
            res.failures.len()
        ),
    )
}

fn c5_noiseless_imputation() -> Outcome {
    let days = 120;
    let weather = synth_weather(&WeatherConfig::default(), days, 5).map_err(|e| e.to_string())?;
    let n = weather.len();
    let mean_load: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.05 * (20.0 - weather.outdoor_temp()[i]).max(0.0))
        .collect();
    let aux = build_hourly_features_profile(&weather, &mean_load).map_err(|e| e.to_string())?;
    let linear: Vec<f64> = (0..n)
        .map(|i| {
            -0.8 * aux[(i, 0)] + 0.1 * aux[(i, 1)] + 0.05 * aux[(i, 2)] + 1.5 * aux[(i, 3)] + 0.3 * aux[(i, 4)]
                - 0.2 * aux[(i, 5)]
        })
        .collect();
    // an intercept keeps the target positive, so the non-negativity clamp never binds
    let floor = linear.iter().copied().fold(f64::INFINITY, f64::min);
    let y: Vec<f64> = linear.iter().map(|v| v - floor + 1.0).collect();
    let sim: Vec<f64> = (0..n).map(|i| y[i] * (1.08 + 0.1 * (i as f64 / 17.0).sin())).collect();
    let population = vec![true; n];
    let reference = error_over(&population, &sim, &y).map_err(|e| e.to_string())?.gof;
    let cfg = ImputationConfig::default();
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for k in 0..=34u32 {
        let ratio = (50 + 25 * k) as f64 / 1000.0;
        for start in sample_starts(n, 5, derive_seed(55, &[k as u64])) {
            let mask = block_mask(n, &MaskSpec::new(ratio, start)).map_err(|e| e.to_string())?;
            let target = MeasuredSeries::new("linear", weather.timestamps().to_vec(), y.clone(), mask)
                .map_err(|e| e.to_string())?;
            let est = imputed_error(&target, &population, &aux, &sim, &cfg).map_err(|e| e.to_string())?;
            worst = worst.max((est.gof - reference).abs());
            cases += 1;
        }
    }
    check(
        worst <= 0.1,
        format!("{cases} masks at 5%..90%, worst |imputed - reference| = {worst:.2e} GOF points"),
    )
}

/// Median of pooled relative deviations (estimate − reference)/reference.
fn relative_median(res: &ExperimentResult, method: Method, ratio_index: usize) -> f64 {
    let mut rel: Vec<f64> = res
        .records
        .iter()
        .filter(|r| r.method == method && r.ratio_index == ratio_index && r.reference != 0.0)
        .map(|r| (r.estimate - r.reference) / r.reference)
        .collect();
    rel.sort_by(f64::total_cmp);
    let n = rel.len();
    if n % 2 == 1 {
        rel[n / 2]
    } else {
        0.5 * (rel[n / 2 - 1] + rel[n / 2])
    }
}

fn summary_of(res: &ExperimentResult, method: Method, ratio: f64) -> Option<ubemval_core::EstimateSummary> {
    res.summaries
        .iter()
        .find(|s| s.method == method && (s.ratio - ratio).abs() < 1e-12)
        .and_then(|s| s.summary)
}

fn c6a(res: &ExperimentResult) -> Outcome {
    let idx: Vec<usize> = (0..res.ratios.len())
        .filter(|&i| res.ratios[i] >= 0.2 - 1e-12 && res.ratios[i] <= 0.6 + 1e-12)
        .collect();
    let rmse = |m: Method, i: usize| summary_of(res, m, res.ratios[i]).map_or(f64::NAN, |s| s.rmse);
    let increasing = idx.windows(2).all(|w| rmse(Method::Unadjusted, w[1]) > rmse(Method::Unadjusted, w[0]));
    let largest: Vec<String> = idx
        .iter()
        .filter(|&&i| {
            Method::ALL[1..]
                .iter()
                .any(|&m| !(rmse(Method::Unadjusted, i) > rmse(m, i)))
        })
        .map(|&i| format!("{}", res.ratios[i]))
        .collect();
    let i20 = idx[0];
    let i60 = *idx.last().unwrap();
    check(
        increasing && largest.is_empty(),
        format!(
            "unadjusted RMSE {:.3} at 20% -> {:.3} at 60%, strictly increasing: {increasing}; not largest at {:?}",
            rmse(Method::Unadjusted, i20),
            rmse(Method::Unadjusted, i60),
            largest
        ),
    )
}

fn c6b(res: &ExperimentResult) -> Outcome {
    let mut worst = (0.0f64, Method::Cell, 0.0);
    for m in [Method::Cell, Method::Rake] {
        for (i, &ratio) in res.ratios.iter().enumerate().filter(|(_, &r)| r <= 0.6 + 1e-12) {
            let med = relative_median(res, m, i).abs();
            if med > worst.0 {
                worst = (med, m, ratio);
            }
        }
    }
    check(
        worst.0 <= 0.05,
        format!(
            "largest |median relative deviation| up to 60%: {:.2}% ({} at {})",
            100.0 * worst.0,
            worst.1,
            worst.2
        ),
    )
}

fn c6c(res: &ExperimentResult) -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for m in [Method::Cell, Method::Rake] {
        let width = |r: f64| summary_of(res, m, r).map_or(f64::NAN, |s| s.ci95_high - s.ci95_low);
        let ratio = width(0.85) / width(0.40);
        ok &= ratio >= 3.0;
        parts.push(format!("{m} width(85%)/width(40%) = {ratio:.2}"));
    }
    check(ok, parts.join(", "))
}

fn c7(res: &ExperimentResult) -> Outcome {
    let sample: BTreeMap<Method, f64> = res
        .tolerable
        .iter()
        .filter(|t| t.substation.is_none())
        .map(|t| (t.method, t.ratio))
        .collect();
    let u = sample[&Method::Unadjusted];
    let ok = Method::ALL[1..].iter().all(|m| sample[m] > u);
    check(
        ok,
        sample
            .iter()
            .map(|(m, r)| format!("{m} {r}"))
            .collect::<Vec<_>>()
            .join(", "),
    )
}

fn c8_determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_ubemval");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg_path = dir.path().join("run.toml");
    fs::write(
        &cfg_path,
        "seed = 11\n[synth]\ndays = 150\nensemble_size = 40\n[experiment]\nratios = [0.1, 0.4, 0.7]\nrepetitions = 4\nbest_fraction = 0.1\n",
    )
    .map_err(|e| e.to_string())?;
    let run = |args: &[&str]| -> Result<(), String> {
        let out = Command::new(bin)
            .arg("--config")
            .arg(&cfg_path)
            .args(args)
            .output()
            .map_err(|e| e.to_string())?;
        if out.status.success() {
            Ok(())
        } else {
            Err(String::from_utf8_lossy(&out.stderr).into_owned())
        }
    };
    let d = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    run(&["synth", "--out", &d("data")])?;
    run(&["experiment", "--data", &d("data"), "--out", &d("a"), "--jobs", "1"])?;
    run(&["experiment", "--data", &d("data"), "--out", &d("b"), "--jobs", "4"])?;
    run(&["experiment", "--data", &d("data"), "--out", &d("c"), "--jobs", "0"])?;
    let read = |p: &Path| fs::read(p).map_err(|e| format!("{}: {e}", p.display()));
    let mut ok = true;
    for file in ["summary.csv", "records.csv"] {
        let a = read(&dir.path().join("a").join(file))?;
        for other in ["b", "c"] {
            ok &= a == read(&dir.path().join(other).join(file))?;
        }
    }
    check(ok, "summary.csv and records.csv byte-identical at --jobs 1, 4 and 0")
}

fn c9_mutual_information() -> Outcome {
    let n = 10_000;
    let x: Vec<f64> = (0..n).map(|i| unit(901, i)).collect();
    let y: Vec<f64> = (0..n).map(|i| unit(902, i)).collect();
    let independent = mutual_information(&x, &y, 4).map_err(|e| e.to_string())?;
    let own = mutual_information(&x, &x, 4).map_err(|e| e.to_string())?;
    let err = (own - 4f64.ln()).abs();
    check(
        independent < 0.02 && err <= 1e-6,
        format!("independent MI {independent:.5} nats; MI(x,x) - ln 4 = {err:.1e}"),
    )
}

fn c10_lhs() -> Outcome {
    let space = default_space();
    let samples = lhs_sample(&space, 200, 2024).map_err(|e| e.to_string())?;
    let mut bad = Vec::new();
    for (j, range) in space.iter().enumerate() {
        let mut counts = vec![0usize; 200];
        for s in &samples {
            counts[stratum(range, s.values()[j], 200)] += 1;
        }
        if counts.iter().any(|&c| c != 1) {
            bad.push(range.name.clone());
        }
    }
    check(
        bad.is_empty() && samples.len() == 200,
        format!("{} dimensions x 200 strata, uneven: {bad:?}", space.len()),
    )
}

fn main() {
    let mut lines: Vec<(String, Outcome)> = Vec::new();
    let mut record = |name: &str, outcome: Outcome| {
        let status = if outcome.is_ok() { "PASS" } else { "FAIL" };
        let detail = match &outcome {
            Ok(d) | Err(d) => d.clone(),
        };
        println!("{status} {name}: {detail}");
        lines.push((name.to_string(), outcome));
    };

    record("1 formula oracles", c1_formula_oracles());
    record("2 IPF oracle", c2_ipf_oracle());
    record("3 cell-weighting exactness", c3_cell_exactness());

    let started = Instant::now();
    let district = build_district(&SynthConfig::default()).expect("default district builds");
    let data = substation_data(&district);
    record("4 zero-missingness identity", c4_zero_missingness(&district.weather, &data));
    record("5 noiseless-linear imputation", c5_noiseless_imputation());

    let experiment_start = Instant::now();
    let full = Plan::new(&district.weather, &data, &ExperimentConfig::default())
        .map_err(|e| e.to_string())
        .and_then(|plan| run_plan(&plan, 0).map_err(|e| e.to_string()));
    let elapsed = experiment_start.elapsed();
    match full {
        Ok(res) => {
            record("6a unadjusted RMSE grows and is largest", c6a(&res));
            record("6b weighting unbiased up to 60%", c6b(&res));
            record("6c CI95 elbow", c6c(&res));
            record(
                "6 runtime",
                check(
                    elapsed <= Duration::from_secs(300),
                    format!(
                        "{} estimates, {} failures in {:.1} s (budget 300 s)",
                        res.records.len(),
                        res.failures.len(),
                        elapsed.as_secs_f64()
                    ),
                ),
            );
            record("7 unadjusted has the lowest tolerable missingness", c7(&res));
        }
        Err(e) => {
            for name in ["6a", "6b", "6c", "6 runtime", "7"] {
                record(name, Err(e.clone()));
            }
        }
    }
    println!("     district build and experiments took {:.1} s", started.elapsed().as_secs_f64());

    record("8 determinism across --jobs", c8_determinism());
    record("9 mutual information sanity", c9_mutual_information());
    record("10 LHS stratification", c10_lhs());

    let failed: Vec<&str> = lines.iter().filter(|(_, o)| o.is_err()).map(|(n, _)| n.as_str()).collect();
    println!(
        "acceptance: {} passed, {} failed",
        lines.len() - failed.len(),
        failed.len()
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
