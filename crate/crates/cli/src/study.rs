//! Repeated fits at growing training sizes, compared against plain MC.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use sepsr::model::format_f64;
use sepsr::{analytic_covariance, fit, TrainingSet};

use crate::config::ScenarioConfig;
use crate::error::{HarnessError, Result};
use crate::manifest::ArtifactWriter;
use crate::pipeline::mc_moments;
use crate::scenario::Scenario;

pub const METHOD_SR: &str = "sr";
pub const METHOD_MC: &str = "mc";

/// One (method, N, repeat) STD estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudySample {
    pub method: &'static str,
    pub n: usize,
    pub repeat: usize,
    pub seed: u64,
    pub std: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxSummary {
    pub method: &'static str,
    pub n: usize,
    pub repeats: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudySummary {
    pub qoi: String,
    pub reference_std: f64,
    /// "exact" or "monte_carlo".
    pub reference_kind: &'static str,
    pub reference_samples: usize,
    /// Least-squares slope of log(median relative error) against log N.
    pub mc_slope: f64,
    pub sr_slope: f64,
    pub boxes: Vec<BoxSummary>,
}

#[derive(Debug, Clone)]
pub struct StudyOutcome {
    pub summary: StudySummary,
    pub samples: Vec<StudySample>,
}

impl StudyOutcome {
    pub fn median(&self, method: &str, n: usize) -> Option<f64> {
        self.summary
            .boxes
            .iter()
            .find(|b| b.method == method && b.n == n)
            .map(|b| b.median)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Training seed for one (N, repeat) cell.
pub fn repeat_seed(base: u64, n: usize, repeat: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ n as u64) ^ repeat as u64)
}

/// Linear interpolation between order statistics (type 7).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn box_summary(method: &'static str, n: usize, errors: &[f64]) -> BoxSummary {
    let mut s = errors.to_vec();
    s.sort_by(f64::total_cmp);
    BoxSummary {
        method,
        n,
        repeats: s.len(),
        min: s[0],
        q1: quantile(&s, 0.25),
        median: quantile(&s, 0.5),
        q3: quantile(&s, 0.75),
        max: s[s.len() - 1],
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Fits `repeats` surrogates per training size on fresh draws and records the
/// relative error of the analytic STD of output `qoi`. The MC baseline is the
/// sample STD of the same `N` true outputs.
pub fn convergence_study(config: &ScenarioConfig, n_list: &[usize], repeats: usize) -> Result<StudyOutcome> {
    config.validate()?;
    if repeats < 2 {
        return Err(HarnessError::Config("a study needs at least 2 repeats".into()));
    }
    if n_list.is_empty() || n_list.contains(&0) {
        return Err(HarnessError::Config("training sizes must be positive".into()));
    }
    let scenario = Scenario::new(config)?;
    let (d, m) = (scenario.input_dim(), scenario.output_dim());
    let qoi = config.study.qoi;
    if qoi >= m {
        return Err(HarnessError::Config(format!("study.qoi {qoi} out of range for {m} outputs")));
    }

    let (reference_std, reference_kind, reference_samples) = match scenario.exact_moments() {
        Some((_, cov)) => (cov[qoi][qoi].max(0.0).sqrt(), "exact", 0),
        None => {
            let n = config.study.n_reference;
            let x = scenario.sample(n, splitmix64(config.study.seed ^ 0x5EED))?;
            let q = scenario.evaluate_rows(&x.values)?;
            (mc_moments(&q, m)[qoi][1], "monte_carlo", n)
        }
    };
    if !(reference_std > 0.0) || !reference_std.is_finite() {
        return Err(HarnessError::Numerical(format!("reference STD is {reference_std}")));
    }

    let cells: Vec<(usize, usize)> = n_list.iter().flat_map(|&n| (0..repeats).map(move |r| (n, r))).collect();
    let results: Vec<[StudySample; 2]> = cells
        .par_iter()
        .map(|&(n, repeat)| {
            let seed = repeat_seed(config.study.seed, n, repeat);
            let x = scenario.sample(n, seed)?;
            let q = scenario.evaluate_rows(&x.values)?;
            let mc_std = mc_moments(&q, m)[qoi][1];
            let train = TrainingSet::new(d, m, x.xi, q, seed)?;
            let (model, _) = fit(&train, &config.als)?;
            let sr_std = analytic_covariance(&model)[qoi][qoi].max(0.0).sqrt();
            let cell = |method, std: f64| StudySample {
                method,
                n,
                repeat,
                seed,
                std,
                rel_error: (std - reference_std).abs() / reference_std,
            };
            Ok([cell(METHOD_SR, sr_std), cell(METHOD_MC, mc_std)])
        })
        .collect::<Result<_>>()?;
    let samples: Vec<StudySample> = results.into_iter().flatten().collect();

    let mut boxes = Vec::new();
    for method in [METHOD_SR, METHOD_MC] {
        for &n in n_list {
            let errs: Vec<f64> = samples
                .iter()
                .filter(|s| s.method == method && s.n == n)
                .map(|s| s.rel_error)
                .collect();
            boxes.push(box_summary(method, n, &errs));
        }
    }
    let ns: Vec<f64> = n_list.iter().map(|&n| n as f64).collect();
    let slope = |method| {
        let med: Vec<f64> = boxes.iter().filter(|b| b.method == method).map(|b| b.median).collect();
        if n_list.len() < 2 {
            f64::NAN
        } else {
            log_log_slope(&ns, &med)
        }
    };
    let summary = StudySummary {
        qoi: scenario.output_names[qoi].clone(),
        reference_std,
        reference_kind,
        reference_samples,
        mc_slope: slope(METHOD_MC),
        sr_slope: slope(METHOD_SR),
        boxes,
    };
    Ok(StudyOutcome { summary, samples })
}

pub fn study_csv(boxes: &[BoxSummary]) -> String {
    let mut s = String::from("method,n,repeats,min,q1,median,q3,max\n");
    for b in boxes {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            b.method,
            b.n,
            b.repeats,
            format_f64(b.min),
            format_f64(b.q1),
            format_f64(b.median),
            format_f64(b.q3),
            format_f64(b.max)
        ));
    }
    s
}

pub fn study_raw_csv(samples: &[StudySample]) -> String {
    let mut s = String::from("method,n,repeat,seed,std,rel_error\n");
    for r in samples {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.method,
            r.n,
            r.repeat,
            r.seed,
            format_f64(r.std),
            format_f64(r.rel_error)
        ));
    }
    s
}

/// Writes `study.csv`, `study_raw.csv` and `study_summary.json`.
pub fn write_study(outcome: &StudyOutcome, dir: &Path) -> Result<ArtifactWriter> {
    let mut out = ArtifactWriter::new(dir)?;
    out.write("study.csv", &study_csv(&outcome.summary.boxes))?;
    out.write("study_raw.csv", &study_raw_csv(&outcome.samples))?;
    let json = serde_json::to_string_pretty(&outcome.summary).expect("summary serializes") + "\n";
    out.write("study_summary.json", &json)?;
    Ok(out)
}
