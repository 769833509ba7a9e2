use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sepsr::model::format_f64;
use sepsr::stats::{analytic_moments, column, freedman_diaconis_bins, sample_moments};
use sepsr::{fit, histogram, load_model, sample_surrogate, sobol_indices, validation_rms, TrainingSet};
use sepsr_cli::pipeline::{validation_csv, RunOptions};
use sepsr_cli::study::write_study;
use sepsr_cli::{convergence_study, run_pipeline, ArtifactWriter, HarnessError, OracleKind, Result, Scenario, ScenarioConfig};

#[derive(Parser)]
#[command(name = "sepsr", version, about = "Separated-representation surrogates for orbit uncertainty")]
struct Cli {
    /// Worker threads for sampling, propagation and surrogate Monte Carlo (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario TOML file.
    config: PathBuf,
    /// Replace the scenario's truth oracle.
    #[arg(long, value_enum)]
    oracle: Option<OracleKind>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<ScenarioConfig> {
        let mut cfg = ScenarioConfig::load(&self.config)?;
        if let Some(oracle) = self.oracle {
            cfg.oracle = oracle;
            cfg.validate()?;
        }
        Ok(cfg)
    }

    fn out_dir(&self, cfg: &ScenarioConfig) -> PathBuf {
        self.out.clone().unwrap_or_else(|| cfg.output_dir.clone())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: sample, propagate, fit, validate, analyze, report.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Exit with code 4 when a validation ratio exceeds the configured limit.
        #[arg(long)]
        assert: bool,
    },
    /// Sample inputs and write training and hold-out sets with true outputs.
    Propagate {
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
    /// Fit a model to a training CSV using the scenario's `[als]` settings.
    Fit {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Training CSV; sampled from the scenario when absent.
        #[arg(long)]
        train: Option<PathBuf>,
    },
    /// Residual and sample RMS of a model on a hold-out CSV.
    Validate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        holdout: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Exit with code 4 when any ratio is at or above this value.
        #[arg(long)]
        assert: Option<f64>,
    },
    /// Analytic moments, surrogate Monte Carlo moments and histograms.
    Stats {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        bins: Option<usize>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// First-order Sobol indices of a model.
    Sobol {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, num_args = 2, default_values_t = [1u64, 2])]
        seeds: Vec<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Convergence study of the STD estimate against training size.
    Study {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Training sizes (overrides `study.n_list`).
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<usize>>,
        #[arg(long)]
        repeats: Option<usize>,
    },
}

fn generic_names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn scenario_sets(cfg: &ScenarioConfig) -> Result<(TrainingSet, TrainingSet)> {
    let scenario = Scenario::new(cfg)?;
    let (d, m) = (scenario.input_dim(), scenario.output_dim());
    let mut sets = Vec::new();
    for (n, seed) in [(cfg.sampling.n_train, cfg.seeds.train), (cfg.sampling.n_validate, cfg.seeds.validate)] {
        let x = scenario.sample(n, seed)?;
        let q = scenario.evaluate_rows(&x.values)?;
        sets.push(TrainingSet::new(d, m, x.xi, q, seed)?);
    }
    let holdout = sets.pop().unwrap();
    Ok((sets.pop().unwrap(), holdout))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { scenario, assert } => {
            let cfg = scenario.load()?;
            let options = RunOptions {
                out_dir: scenario.out.clone(),
                assert,
            };
            let outcome = run_pipeline(&cfg, &options)?;
            println!("rank {} ({:?})", outcome.report.final_rank, outcome.report.termination_reason);
            for (name, ratio) in outcome.output_names.iter().zip(outcome.validation.ratios()) {
                println!("{name:>8}  validation ratio {ratio:.3e}");
            }
            println!("artifacts in {}", outcome.dir.display());
        }
        Command::Propagate { scenario } => {
            let cfg = scenario.load()?;
            let (train, holdout) = scenario_sets(&cfg)?;
            let mut out = ArtifactWriter::new(scenario.out_dir(&cfg))?;
            out.write("training.csv", &train.to_csv())?;
            out.write("holdout.csv", &holdout.to_csv())?;
            println!("wrote {} + {} samples to {}", train.len(), holdout.len(), out.dir().display());
        }
        Command::Fit { scenario, train } => {
            let cfg = scenario.load()?;
            let train = match train {
                Some(p) => TrainingSet::load_csv(p)?,
                None => scenario_sets(&cfg)?.0,
            };
            let (model, report) = fit(&train, &cfg.als)?;
            let mut out = ArtifactWriter::new(scenario.out_dir(&cfg))?;
            out.write("model.json", &model.to_json())?;
            out.write("fit_report.json", &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"))?;
            println!("rank {} gamma {:.3e} ({:?})", report.final_rank, report.final_gamma, report.termination_reason);
        }
        Command::Validate { model, holdout, out, assert } => {
            let model = load_model(&model)?;
            let holdout = TrainingSet::load_csv(&holdout)?;
            let table = validation_rms(&model, &holdout)?;
            let names = generic_names("q", model.output_dim());
            ArtifactWriter::new(&out)?.write("validation.csv", &validation_csv(&table, &names))?;
            let ratios = table.ratios();
            for (name, r) in names.iter().zip(&ratios) {
                println!("{name:>8}  ratio {r:.3e}");
            }
            if let Some(limit) = assert {
                if ratios.iter().any(|r| !(*r < limit)) {
                    return Err(HarnessError::Threshold(format!("a validation ratio is at or above {limit:e}")));
                }
            }
        }
        Command::Stats { model, samples, seed, bins, out } => write_stats(&model, samples, seed, bins, &out)?,
        Command::Sobol { model, samples, seeds, out } => {
            let model = load_model(&model)?;
            let result = sobol_indices(&model, samples, (seeds[0], seeds[1]))?;
            let csv = result.to_csv(&generic_names("x", model.input_dim()), &generic_names("q", model.output_dim()));
            ArtifactWriter::new(&out)?.write("sobol.csv", &csv)?;
            print!("{csv}");
        }
        Command::Study { scenario, n, repeats } => {
            let cfg = scenario.load()?;
            let n_list = n.unwrap_or_else(|| cfg.study.n_list.clone());
            let outcome = convergence_study(&cfg, &n_list, repeats.unwrap_or(cfg.study.repeats))?;
            write_study(&outcome, &scenario.out_dir(&cfg))?;
            print!("{}", sepsr_cli::study::study_csv(&outcome.summary.boxes));
            println!("mc slope {:.3}", outcome.summary.mc_slope);
        }
    }
    Ok(())
}

fn write_stats(model: &Path, samples: usize, seed: u64, bins: Option<usize>, out: &Path) -> Result<()> {
    let model = load_model(model)?;
    let m = model.output_dim();
    let analytic = analytic_moments(&model);
    let draws = sample_surrogate(&model, samples, seed)?;
    let mc = sample_moments(&draws, m)?;
    let (a_std, mc_std) = (analytic.std_dev(), mc.std_dev());
    let mut csv = format!("# surrogate_samples={samples} seed={seed}\nqoi,mean,std,mc_mean,mc_std\n");
    let mut writer = ArtifactWriter::new(out)?;
    for (k, name) in generic_names("q", m).iter().enumerate() {
        csv.push_str(&format!(
            "{name},{},{},{},{}\n",
            format_f64(analytic.mean[k]),
            format_f64(a_std[k]),
            format_f64(mc.mean[k]),
            format_f64(mc_std[k])
        ));
        let col = column(&draws, m, k);
        let b = bins.unwrap_or_else(|| freedman_diaconis_bins(&col));
        writer.write(&format!("hist_{name}.csv"), &histogram(&col, b)?.to_csv())?;
    }
    writer.write("moments.csv", &csv)?;
    print!("{csv}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
