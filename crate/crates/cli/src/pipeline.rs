//! generate → propagate → fit → validate → analyze → report.

use std::fmt::Write as _;
use std::path::PathBuf;

use sepsr::model::format_f64;
use sepsr::stats::{column, freedman_diaconis_bins, validation_rms, ValidationTable};
use sepsr::{
    analytic_covariance, analytic_mean, factor_variability_table, fit, histogram, sample_surrogate, sobol_indices,
    FitReport, SeparatedRepresentation, SobolResult, TrainingSet,
};
use sepsr_astro::ric_transform;

use crate::config::ScenarioConfig;
use crate::error::{HarnessError, Result};
use crate::manifest::{ArtifactWriter, Manifest, Seeds, Versions};
use crate::scenario::Scenario;

pub const FACTOR_GRID_POINTS: usize = 41;

/// How the reference moments in `moments.csv` were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceKind {
    Exact,
    /// Plain Monte Carlo over the true map (the validation samples).
    MonteCarlo { samples: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentRow {
    pub qoi: String,
    pub sr_mean: f64,
    pub sr_std: f64,
    pub ref_mean: f64,
    pub ref_std: f64,
    /// Standard errors of the reference; zero for exact references.
    pub ref_mean_se: f64,
    pub ref_std_se: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub model: SeparatedRepresentation,
    pub report: FitReport,
    pub validation: ValidationTable,
    pub moments: Vec<MomentRow>,
    pub reference: ReferenceKind,
    pub sobol: SobolResult,
    pub input_names: Vec<String>,
    pub output_names: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides `output_dir` from the config.
    pub out_dir: Option<PathBuf>,
    /// Fail with a threshold error when validation ratios exceed the limit.
    pub assert: bool,
}

fn csv_row(values: impl IntoIterator<Item = String>) -> String {
    let mut s = values.into_iter().collect::<Vec<_>>().join(",");
    s.push('\n');
    s
}

pub fn validation_csv(table: &ValidationTable, names: &[String]) -> String {
    let mut s = format!("# samples={}\nqoi,residual_rms,sample_rms,ratio\n", table.samples);
    for (k, name) in names.iter().enumerate() {
        let (r, m) = (table.residual_rms[k], table.sample_rms[k]);
        s.push_str(&csv_row([name.clone(), format_f64(r), format_f64(m), format_f64(r / m)]));
    }
    s
}

pub fn moments_csv(rows: &[MomentRow], reference: ReferenceKind) -> String {
    let mut s = match reference {
        ReferenceKind::Exact => "# reference=exact\n".to_string(),
        ReferenceKind::MonteCarlo { samples } => format!("# reference=monte_carlo samples={samples}\n"),
    };
    s.push_str("qoi,sr_mean,sr_std,ref_mean,ref_std,ref_mean_se,ref_std_se,rel_mean,rel_std\n");
    for r in rows {
        s.push_str(&csv_row([
            r.qoi.clone(),
            format_f64(r.sr_mean),
            format_f64(r.sr_std),
            format_f64(r.ref_mean),
            format_f64(r.ref_std),
            format_f64(r.ref_mean_se),
            format_f64(r.ref_std_se),
            format_f64((r.sr_mean - r.ref_mean).abs() / r.ref_mean.abs()),
            format_f64((r.sr_std - r.ref_std).abs() / r.ref_std),
        ]));
    }
    s
}

/// Mean, STD and their standard errors of each column of an `N × M` buffer.
pub fn mc_moments(values: &[f64], m: usize) -> Vec<[f64; 4]> {
    let n = values.len() / m;
    (0..m)
        .map(|k| {
            let col = column(values, m, k);
            let mean = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0).max(1.0);
            let sd = var.sqrt();
            [mean, sd, sd / (n as f64).sqrt(), sd / (2.0 * (n as f64 - 1.0).max(1.0)).sqrt()]
        })
        .collect()
}

struct Run<'a> {
    config: &'a ScenarioConfig,
    out: ArtifactWriter,
    stage: &'static str,
}

impl Run<'_> {
    fn manifest(&self, status: &str, error: Option<String>) -> Manifest {
        let c = self.config;
        Manifest {
            name: c.name.clone(),
            status: status.to_string(),
            failure_stage: error.as_ref().map(|_| self.stage.to_string()),
            error,
            versions: Versions {
                harness: env!("CARGO_PKG_VERSION").to_string(),
                model_format: sepsr::model::MODEL_VERSION,
            },
            seeds: Seeds {
                train: c.seeds.train,
                validate: c.seeds.validate,
                surrogate: c.seeds.surrogate,
                sobol: c.seeds.sobol,
                als_init: c.als.init_seed,
            },
            artifacts: Vec::new(),
        }
    }

    fn execute(&mut self, options: &RunOptions) -> Result<RunOutcome> {
        let c = self.config;
        self.stage = "generate";
        self.out.write("config.toml", &c.to_toml())?;
        let scenario = Scenario::new(c)?;
        let (d, m) = (scenario.input_dim(), scenario.output_dim());
        let train_in = scenario.sample(c.sampling.n_train, c.seeds.train)?;
        let valid_in = scenario.sample(c.sampling.n_validate, c.seeds.validate)?;

        self.stage = "propagate";
        let train_out = scenario.evaluate_rows(&train_in.values)?;
        let valid_out = scenario.evaluate_rows(&valid_in.values)?;
        let train = TrainingSet::new(d, m, train_in.xi.clone(), train_out, c.seeds.train)?;
        let holdout = TrainingSet::new(d, m, valid_in.xi.clone(), valid_out, c.seeds.validate)?;
        self.out.write("training.csv", &train.to_csv())?;
        self.out.write("holdout.csv", &holdout.to_csv())?;

        self.stage = "fit";
        let (model, report) = fit(&train, &c.als)?;
        self.out.write("model.json", &model.to_json())?;
        self.out.write("fit_report.json", &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"))?;

        self.stage = "validate";
        let validation = validation_rms(&model, &holdout)?;
        self.out.write("validation.csv", &validation_csv(&validation, &scenario.output_names))?;

        self.stage = "analyze";
        let sr_mean = analytic_mean(&model);
        let sr_cov = analytic_covariance(&model);
        let (reference, refs) = match scenario.exact_moments() {
            Some((mean, cov)) => (
                ReferenceKind::Exact,
                (0..m).map(|k| [mean[k], cov[k][k].max(0.0).sqrt(), 0.0, 0.0]).collect::<Vec<_>>(),
            ),
            None => (
                ReferenceKind::MonteCarlo { samples: holdout.len() },
                mc_moments(holdout.outputs(), m),
            ),
        };
        let moments: Vec<MomentRow> = (0..m)
            .map(|k| MomentRow {
                qoi: scenario.output_names[k].clone(),
                sr_mean: sr_mean[k],
                sr_std: sr_cov[k][k].max(0.0).sqrt(),
                ref_mean: refs[k][0],
                ref_std: refs[k][1],
                ref_mean_se: refs[k][2],
                ref_std_se: refs[k][3],
            })
            .collect();
        self.out.write("moments.csv", &moments_csv(&moments, reference))?;

        let samples = sample_surrogate(&model, c.sampling.n_surrogate_mc, c.seeds.surrogate)?;
        for (k, name) in scenario.output_names.iter().enumerate() {
            let col = column(&samples, m, k);
            let bins = c.sampling.histogram_bins.unwrap_or_else(|| freedman_diaconis_bins(&col));
            self.out.write(&format!("hist_{name}.csv"), &histogram(&col, bins)?.to_csv())?;
        }

        let sobol = sobol_indices(&model, c.sampling.n_sobol, (c.seeds.sobol[0], c.seeds.sobol[1]))?;
        self.out.write("sobol.csv", &sobol.to_csv(&scenario.input_names, &scenario.output_names))?;

        let factors = factor_variability_table(&model, FACTOR_GRID_POINTS)?;
        self.out.write("factors.csv", &factors.to_csv())?;
        let mut ranges = String::from("input,term,scale,range,weighted_range\n");
        for row in &factors.rows {
            ranges.push_str(&csv_row([
                scenario.input_names[row.direction].clone(),
                (row.term + 1).to_string(),
                format_f64(row.scale),
                format_f64(row.range()),
                format_f64(row.weighted_range()),
            ]));
        }
        self.out.write("factor_ranges.csv", &ranges)?;

        if scenario.is_cartesian_orbit() {
            let center = scenario.output_state(train.output(0)).expect("cartesian scenario");
            let mut ric = String::from("# center=training sample 1\nsource,index,radial,intrack,crosstrack\n");
            let mut push = |src: &str, rows: &[f64]| -> Result<()> {
                for (j, q) in rows.chunks_exact(m).enumerate() {
                    let d = ric_transform(&center, &scenario.output_state(q).expect("cartesian scenario"))?;
                    let _ = writeln!(ric, "{src},{j},{},{},{}", format_f64(d[0]), format_f64(d[1]), format_f64(d[2]));
                }
                Ok(())
            };
            push("mc", holdout.outputs())?;
            push("sr", &samples)?;
            self.out.write("ric.csv", &ric)?;
        }

        self.stage = "report";
        let manifest = self.out.finish(self.manifest("ok", None))?;
        if options.assert {
            let limit = c.assert.max_validation_ratio;
            let failing: Vec<String> = scenario
                .output_names
                .iter()
                .zip(validation.ratios())
                .filter(|(_, r)| !(*r < limit))
                .map(|(n, r)| format!("{n}: {r:.3e}"))
                .collect();
            if !failing.is_empty() {
                return Err(HarnessError::Threshold(format!(
                    "validation ratio above {limit:e} for {}",
                    failing.join(", ")
                )));
            }
        }
        Ok(RunOutcome {
            dir: self.out.dir().to_path_buf(),
            manifest,
            model,
            report,
            validation,
            moments,
            reference,
            sobol,
            input_names: scenario.input_names,
            output_names: scenario.output_names,
        })
    }
}

/// Runs every stage and writes the artifacts plus `manifest.json`. On failure
/// the artifacts written so far are kept and the manifest names the stage.
pub fn run_pipeline(config: &ScenarioConfig, options: &RunOptions) -> Result<RunOutcome> {
    config.validate()?;
    let dir = options.out_dir.clone().unwrap_or_else(|| config.output_dir.clone());
    let mut run = Run {
        config,
        out: ArtifactWriter::new(dir)?,
        stage: "generate",
    };
    match run.execute(options) {
        Ok(outcome) => Ok(outcome),
        Err(e @ HarnessError::Threshold(_)) => Err(e),
        Err(e) => {
            let _ = run.out.finish(run.manifest("failed", Some(e.to_string())));
            Err(e)
        }
    }
}
