use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use sensebridge::eval::{compare_runs, fit_final, prepare, run_grid, run_prepared, ExperimentConfig, RunReport};
use sensebridge::ingest::{read_dataset, save_dataset, DatasetManifest, SyntheticSpec};
use sensebridge::model_io::{self, read_envelope};
use sensebridge::{Error, RngSeed};

/// Single-sensor activity recognition trained with multi-sensor data.
#[derive(Parser, Debug)]
#[command(name = "sensebridge", version)]
struct Cli {
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a dataset manifest and its CSV files.
    Validate {
        /// Dataset manifest (TOML).
        #[arg(long)]
        config: PathBuf,
    },
    /// Generate a synthetic dataset from a spec file and write it as CSV.
    Synth {
        /// Synthetic dataset spec (TOML).
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run one leave-one-subject-out experiment.
    Run(RunArgs),
    /// Run every test sensor x variant cell of the config's grid and compare them.
    Grid(RunArgs),
    /// Summarize a saved model or report.
    Inspect {
        /// A JSON file written by `run` or `grid`.
        path: PathBuf,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the experiment seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
}

/// Failure with the process exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn runtime(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_)
            | Error::UnknownSensor { .. }
            | Error::UnknownSubject(_)
            | Error::Schema { .. }
            | Error::TimestampRegression { .. }
            | Error::InvalidDataset(_)
            | Error::TomlDe(_)
            | Error::FormatVersion { .. }
            | Error::ModelKind { .. }
            | Error::Io { .. }
            | Error::Csv(_)
            | Error::Json(_) => 1,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CmdResult {
    fs::write(path, contents).map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> CmdResult {
    fs::create_dir_all(path).map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))
}

fn save<T: model_io::Persist>(value: &T, path: &Path) -> CmdResult {
    model_io::save(value, path).map_err(|e| Failure::runtime(e.to_string()))
}

fn init_workers(workers: Option<usize>) -> CmdResult {
    if let Some(n) = workers {
        if n == 0 {
            return Err(Failure {
                code: 1,
                message: "--workers must be at least 1".into(),
            });
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::runtime(e.to_string()))?;
    }
    Ok(())
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::from_path(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = RngSeed(seed);
    }
    Ok(cfg)
}

fn validate(manifest_path: &Path, quiet: bool) -> CmdResult {
    let manifest = DatasetManifest::from_path(manifest_path)?;
    let mut unreadable = 0;
    let files: Vec<PathBuf> = manifest
        .sample_paths()
        .into_iter()
        .chain(std::iter::once(manifest.label_path()))
        .collect();
    for f in &files {
        match fs::File::open(f) {
            Ok(_) if !quiet => println!("{}: readable", f.display()),
            Ok(_) => {}
            Err(e) => {
                println!("{}: {e}", f.display());
                unreadable += 1;
            }
        }
    }
    if unreadable > 0 {
        return Err(Failure {
            code: 1,
            message: format!("{unreadable} file(s) cannot be read"),
        });
    }
    let ds = read_dataset(&manifest)?;
    let issues = ds.validate();
    for issue in &issues {
        println!("{issue}");
    }
    if !issues.is_empty() {
        return Err(Failure {
            code: 1,
            message: format!("{} problem(s) found", issues.len()),
        });
    }
    if !quiet {
        println!("OK");
    }
    Ok(())
}

fn synth(config: &Path, out: &Path, seed: Option<u64>, quiet: bool) -> CmdResult {
    let text = fs::read_to_string(config).map_err(|e| Error::io(config, e))?;
    let mut spec: SyntheticSpec = toml::from_str(&text).map_err(Error::from)?;
    if let Some(s) = seed {
        spec.seed = RngSeed(s);
    }
    let ds = sensebridge::ingest::generate_synthetic(&spec)?;
    create_dir(out)?;
    save_dataset(&ds, out).map_err(|e| Failure::runtime(e.to_string()))?;
    if !quiet {
        println!(
            "wrote {} subjects, {} sensors to {}",
            ds.subjects.len(),
            ds.sensors.len(),
            out.join("manifest.toml").display()
        );
    }
    Ok(())
}

fn echo_config(cfg: &ExperimentConfig, out: &Path) -> CmdResult {
    create_dir(out)?;
    write_file(&out.join("config.toml"), cfg.to_toml()?)
}

fn write_timing(out: &Path, seconds: f64) -> CmdResult {
    write_file(&out.join("timing.json"), format!("{{\"wall_time_s\": {seconds:.3}}}\n"))
}

fn run(args: &RunArgs, quiet: bool) -> CmdResult {
    init_workers(args.workers)?;
    let mut cfg = load_config(args)?;
    cfg.grid = None;
    echo_config(&cfg, &args.out)?;
    let started = Instant::now();
    let prepared = prepare(&cfg)?;
    let report = run_prepared(&cfg, &prepared, None)?;
    let model = fit_final(&cfg, &prepared)?;
    save(&report, &args.out.join("report.json"))?;
    save(&model, &args.out.join("model.json"))?;
    write_timing(&args.out, started.elapsed().as_secs_f64())?;
    if !quiet {
        print_report(&report);
    }
    Ok(())
}

fn cell_file_name(cfg: &ExperimentConfig, mixed_encodings: bool) -> String {
    let sensor: String = cfg
        .test_sensor
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect();
    if mixed_encodings {
        let enc = serde_json::to_value(cfg.representation.encoding)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default();
        format!("{sensor}_{}_{enc}.json", cfg.variant)
    } else {
        format!("{sensor}_{}.json", cfg.variant)
    }
}

fn grid(args: &RunArgs, quiet: bool) -> CmdResult {
    init_workers(args.workers)?;
    let cfg = load_config(args)?;
    if cfg.grid.is_none() {
        return Err(Failure {
            code: 1,
            message: "config has no [grid] section".into(),
        });
    }
    echo_config(&cfg, &args.out)?;
    let started = Instant::now();
    let cells = run_grid(&cfg)?;
    let reports_dir = args.out.join("reports");
    create_dir(&reports_dir)?;
    let mixed = cfg.grid.as_ref().and_then(|g| g.encodings.as_ref()).is_some_and(|e| e.len() > 1);
    let mut reports: Vec<RunReport> = Vec::new();
    let mut failures = Vec::new();
    for cell in cells {
        let name = cell_file_name(&cell.config, mixed);
        match cell.result {
            Ok(report) => {
                save(&report, &reports_dir.join(&name))?;
                reports.push(report);
            }
            Err(e) => {
                tracing::warn!(cell = %name, "cell failed: {e}");
                failures.push(format!("{name}: {e}"));
            }
        }
    }
    if !failures.is_empty() {
        write_file(&args.out.join("failures.txt"), failures.join("\n") + "\n")?;
    }
    if !reports.is_empty() {
        let table = compare_runs(&reports)?;
        write_file(&args.out.join("comparison.csv"), table.to_csv()?)?;
        let text = table.to_text();
        write_file(&args.out.join("comparison.txt"), &text)?;
        if !quiet {
            print!("{text}");
        }
    }
    write_timing(&args.out, started.elapsed().as_secs_f64())?;
    if failures.is_empty() {
        Ok(())
    } else {
        for f in &failures {
            eprintln!("failed: {f}");
        }
        Err(Failure::runtime(format!("{} grid cell(s) failed", failures.len())))
    }
}

fn print_report(r: &RunReport) {
    println!(
        "{} | test sensor {} | {} | pooled micro-F1 {:.4} (mean over folds {:.4})",
        r.dataset, r.test_sensor, r.variant, r.pooled_micro_f1, r.mean_fold_micro_f1
    );
    for f in &r.folds {
        let alphas = f
            .alphas
            .map(|a| format!("  alpha = ({:.3}, {:.3})", a[0], a[1]))
            .unwrap_or_default();
        println!("  {:<12} n={:<6} F1 {:.4}{alphas}", f.held_out, f.n_test_rows, f.micro_f1);
    }
}

fn inspect(path: &Path) -> CmdResult {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let env = read_envelope(&text)?;
    println!("{}: {} (format version {})", path.display(), env.kind, env.format_version);
    match env.kind.as_str() {
        "run_report" => print_report(&model_io::from_json(&text)?),
        "pipeline" => {
            let m: sensebridge::eval::PipelineModel = model_io::from_json(&text)?;
            println!("variant {} on test sensor {}", m.variant, m.test_sensor);
            println!("classes: {}", m.class_set.join(", "));
            if let Some(rep) = m.representation() {
                println!("representation: d = {} over {}", rep.dim(), rep.sensor_ids().join(", "));
            }
            if let sensebridge::eval::PipelineStages::Boosted { ensemble, .. } = &m.stages {
                println!("stage weights: {:.4}, {:.4}", ensemble.alphas[0], ensemble.alphas[1]);
            }
        }
        "representation" => {
            let m: sensebridge::representation::RepresentationModel = model_io::from_json(&text)?;
            println!("d = {} ({:?} encoding)", m.dim(), m.encoding);
            for g in &m.groups {
                println!("  {}: {} clusters x {} features", g.sensor_id, g.centroids.nrows(), g.centroids.ncols());
            }
        }
        "mapping" => {
            let m: sensebridge::mapping::MappingModel = model_io::from_json(&text)?;
            println!("{:?} mapping from {} ({} -> {})", m.kind, m.sensor_id, m.input_dim(), m.output_dim());
        }
        "boosted_ensemble" => {
            let m: sensebridge::classify::BoostedEnsemble = model_io::from_json(&text)?;
            println!("stage weights: {:.4}, {:.4}", m.alphas[0], m.alphas[1]);
        }
        "classifier" => {
            let m: sensebridge::classify::LinearClassifier = model_io::from_json(&text)?;
            println!("{} classes x {} inputs", m.weights.nrows(), m.weights.ncols());
        }
        _ => {}
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_max_level(if cli.quiet { tracing::Level::ERROR } else { tracing::Level::WARN })
        .init();

    let result = match &cli.command {
        Command::Validate { config } => validate(config, cli.quiet),
        Command::Synth { config, out, seed } => synth(config, out, *seed, cli.quiet),
        Command::Run(args) => run(args, cli.quiet),
        Command::Grid(args) => grid(args, cli.quiet),
        Command::Inspect { path } => inspect(path),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
