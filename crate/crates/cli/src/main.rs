use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use ewishart::estimation::{fit, FitReport};
use ewishart::experiments::io::{
    format_matrix, read_sample_set, write_records_csv, write_sample_set, write_summary_json,
    write_trace_csv, SampleFile,
};
use ewishart::experiments::{
    random_center, run_convergence_study, run_error_study, stream_rng, summarize, ExperimentConfig,
};
use ewishart::learning::{align_labels, ew_kmeans, ewda_predict_all, ewda_train, LabeledSampleSet};
use ewishart::model::{check_assumptions, default_grid, sample, SampleSet};
use ewishart::Error;

#[derive(Parser)]
#[command(name = "ewishart", version, about = "Elliptical Wishart estimation, classification and benchmarks")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration; built-in defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: configured output, else the current directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the configured algorithm: fp, rsd or rcg.
    #[arg(long, global = true)]
    algorithm: Option<String>,
    /// Twenty repetitions instead of the configured count.
    #[arg(long, global = true)]
    fast: bool,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw K samples per class around random centers.
    Sample {
        #[arg(long, default_value_t = 1)]
        classes: usize,
    },
    /// Estimate the center of a sample file.
    Fit {
        #[arg(long)]
        input: PathBuf,
    },
    /// Fixed point against Riemannian conjugate gradient, with traces.
    BenchConvergence,
    /// Estimation error against the number of samples.
    BenchError,
    /// Train a discriminant classifier and label a test file.
    Classify {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
    },
    /// K-means clustering of a sample file.
    Cluster {
        #[arg(long)]
        input: PathBuf,
    },
    /// Assumption diagnostics for the configured density generator.
    CheckModel,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Parse(_) | Error::Parameter(_) => 2,
        Error::Io(_) => 4,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ewishart: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.experiment.seed = seed;
    }
    if let Some(alg) = &common.algorithm {
        cfg.fit.algorithm = alg.clone();
    }
    if common.fast {
        cfg.experiment.repetitions = 20;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn output_dir(common: &Common, cfg: &ExperimentConfig) -> Result<PathBuf, Error> {
    let dir = common
        .out
        .clone()
        .or_else(|| cfg.experiment.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    if let Some(threads) = cli.common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Parameter(e.to_string()))?;
    }
    let cfg = load_config(&cli.common)?;
    let out = output_dir(&cli.common, &cfg)?;
    fs::write(out.join("config.toml"), cfg.to_toml_string())?;
    match cli.command {
        Command::Sample { classes } => cmd_sample(&cfg, &out, classes),
        Command::Fit { input } => cmd_fit(&cfg, &out, &input),
        Command::BenchConvergence => cmd_bench_convergence(&cfg, &out),
        Command::BenchError => cmd_bench_error(&cfg, &out),
        Command::Classify { train, test } => cmd_classify(&cfg, &out, &train, &test),
        Command::Cluster { input } => cmd_cluster(&cfg, &out, &input),
        Command::CheckModel => cmd_check_model(&cfg, &out),
    }
}

fn cmd_sample(cfg: &ExperimentConfig, out: &Path, classes: usize) -> Result<(), Error> {
    if classes == 0 {
        return Err(Error::Parameter("--classes must be at least 1".into()));
    }
    let model = cfg.model()?;
    let pr = &cfg.problem;
    let mut all = Vec::new();
    let mut labels = Vec::new();
    for z in 1..=classes {
        let mut rng = stream_rng(cfg.experiment.seed, z as u64);
        let center = random_center(pr.p, pr.condition_number, &mut rng)?;
        fs::write(out.join(format!("center_{z}.csv")), format_matrix(center.as_matrix()))?;
        all.extend(sample(&model, &center, pr.k, &mut rng)?.into_samples());
        labels.extend(std::iter::repeat_n(z, pr.k));
    }
    let data = SampleSet::new(all)?;
    let labels = (classes > 1).then_some(labels.as_slice());
    write_sample_set(&out.join("samples.csv"), &data, pr.n, labels)?;
    println!("wrote {} samples to {}", data.len(), out.join("samples.csv").display());
    Ok(())
}

fn read_input(cfg: &ExperimentConfig, path: &Path) -> Result<(SampleFile, ewishart::model::EWModel), Error> {
    let file = read_sample_set(path)?;
    if file.samples.dim() != cfg.problem.p {
        return Err(Error::Parameter(format!(
            "{} holds {}x{} matrices but the configuration has p={}",
            path.display(),
            file.samples.dim(),
            file.samples.dim(),
            cfg.problem.p
        )));
    }
    let model = cfg.model_with_n(file.n)?;
    Ok((file, model))
}

fn report_json(report: &FitReport) -> serde_json::Value {
    let last = report.trace.last();
    json!({
        "iterations": report.iterations,
        "converged": report.converged,
        "termination": report.termination,
        "final_cost": last.map(|r| r.cost),
        "final_grad_norm": last.map(|r| r.grad_norm),
        "seconds": last.map(|r| r.elapsed),
    })
}

fn cmd_fit(cfg: &ExperimentConfig, out: &Path, input: &Path) -> Result<(), Error> {
    let (file, model) = read_input(cfg, input)?;
    let report = fit(&model, &file.samples, &cfg.fit_options()?)?;
    fs::write(out.join("estimate.csv"), format_matrix(report.estimate.as_matrix()))?;
    let mut trace = String::from("iteration,cost,grad_norm,step_distance,time\n");
    for (i, r) in report.trace.iter().enumerate() {
        trace.push_str(&format!(
            "{},{:e},{:e},{:e},{:e}\n",
            i + 1,
            r.cost,
            r.grad_norm,
            r.step_distance,
            r.elapsed
        ));
    }
    fs::write(out.join("trace.csv"), trace)?;
    write_json(&out.join("report.json"), &report_json(&report))?;
    println!(
        "{}: {} iterations, converged={}",
        cfg.fit.algorithm, report.iterations, report.converged
    );
    Ok(())
}

fn cmd_bench_convergence(cfg: &ExperimentConfig, out: &Path) -> Result<(), Error> {
    let grid = if cfg.experiment.n_grid.is_empty() {
        vec![cfg.problem.n]
    } else {
        cfg.experiment.n_grid.clone()
    };
    let traces = out.join("traces");
    fs::create_dir_all(&traces)?;
    let mut records = Vec::new();
    for n in grid {
        let mut c = cfg.clone();
        c.problem.n = n;
        records.extend(run_convergence_study(&c)?);
    }
    for r in &records {
        let name = format!("trace_n{}_rep{}_{}.csv", r.n, r.repetition, r.estimator);
        write_trace_csv(&traces.join(name), r)?;
    }
    write_records_csv(&out.join("records.csv"), &records)?;
    let summary = summarize(cfg, &records);
    write_summary_json(&out.join("summary.json"), &summary)?;
    for e in &summary.estimators {
        println!(
            "n={} {}: mean iterations {:.1}, mean error {:.4e}, failures {}",
            e.n, e.name, e.mean_iters, e.mean_err, e.failures
        );
    }
    Ok(())
}

fn cmd_bench_error(cfg: &ExperimentConfig, out: &Path) -> Result<(), Error> {
    let records = run_error_study(cfg, &cfg.experiment.k_grid)?;
    write_records_csv(&out.join("records.csv"), &records)?;
    let summary = summarize(cfg, &records);
    write_summary_json(&out.join("summary.json"), &summary)?;
    for e in &summary.estimators {
        println!(
            "K={} {}: mean error {:.4e} (std {:.2e})",
            e.k, e.name, e.mean_err, e.std_err
        );
    }
    Ok(())
}

fn labeled(file: SampleFile, path: &Path) -> Result<(LabeledSampleSet, usize), Error> {
    let labels = file
        .labels
        .ok_or_else(|| Error::Parse(format!("{} has no labels line", path.display())))?;
    let classes = labels.iter().copied().max().unwrap_or(0);
    Ok((LabeledSampleSet::new(file.samples, labels, classes)?, classes))
}

fn cmd_classify(cfg: &ExperimentConfig, out: &Path, train: &Path, test: &Path) -> Result<(), Error> {
    let (train_file, model) = read_input(cfg, train)?;
    let (train_set, _) = labeled(train_file, train)?;
    let (test_file, _) = read_input(cfg, test)?;
    let truth = test_file.labels.clone();
    let ewda = ewda_train(&model, &train_set, &cfg.fit_options()?)?;
    let predicted = ewda_predict_all(&ewda, &test_file.samples)?;
    let lines: Vec<String> = predicted.iter().map(|y| y.to_string()).collect();
    fs::write(out.join("predictions.csv"), lines.join("\n") + "\n")?;
    let accuracy = truth.map(|t| {
        t.iter().zip(&predicted).filter(|(a, b)| a == b).count() as f64 / t.len() as f64
    });
    write_json(
        &out.join("metrics.json"),
        &json!({ "accuracy": accuracy, "priors": ewda.priors(), "test_samples": predicted.len() }),
    )?;
    match accuracy {
        Some(a) => println!("test accuracy {a:.4}"),
        None => println!("labeled {} test samples", predicted.len()),
    }
    Ok(())
}

fn cmd_cluster(cfg: &ExperimentConfig, out: &Path, input: &Path) -> Result<(), Error> {
    let (file, model) = read_input(cfg, input)?;
    let z = cfg.clustering.clusters;
    let mut rng = stream_rng(cfg.experiment.seed, 0);
    let result = ew_kmeans(&model, &file.samples, z, &cfg.kmeans_options()?, &mut rng)?;
    let lines: Vec<String> = result.labels.iter().map(|y| y.to_string()).collect();
    fs::write(out.join("labels.csv"), lines.join("\n") + "\n")?;
    let alignment = match &file.labels {
        Some(truth) => {
            let classes = truth.iter().copied().max().unwrap_or(1).max(z);
            Some(align_labels(&result.labels, truth, classes)?)
        }
        None => None,
    };
    write_json(
        &out.join("metrics.json"),
        &json!({
            "inertia": result.inertia,
            "chosen_init": result.chosen_init,
            "iterations_per_init": result.iterations_per_init,
            "accuracy": alignment.as_ref().map(|a| a.accuracy),
            "miou": alignment.as_ref().map(|a| a.miou),
        }),
    )?;
    match alignment {
        Some(a) => println!("accuracy {:.4}, mIoU {:.4}", a.accuracy, a.miou),
        None => println!("clustered {} samples", result.labels.len()),
    }
    Ok(())
}

fn cmd_check_model(cfg: &ExperimentConfig, out: &Path) -> Result<(), Error> {
    let model = cfg.model()?;
    let report = check_assumptions(model.generator(), model.n(), model.p(), &default_grid(model.np()))?;
    let value = serde_json::to_value(&report).map_err(|e| Error::Parse(e.to_string()))?;
    write_json(&out.join("assumptions.json"), &value)?;
    let coeff = model.coefficients();
    println!("{} (n={}, p={})", report.generator, model.n(), model.p());
    println!("metric coefficients: alpha={}, beta={}", coeff.alpha, coeff.beta);
    for name in report.failures() {
        println!("FAIL {name}");
    }
    for name in report.inconclusive() {
        println!("INCONCLUSIVE {name}");
    }
    if report.all_pass() {
        println!("all assumption checks pass");
    }
    Ok(())
}
