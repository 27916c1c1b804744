use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use bell_anomaly::io::ReportFormat;
use bell_anomaly::sim::{repetition_seed, simulate_with_seed, GENERATOR};
use bell_anomaly::{
    build_comparison, ch_statistic, coincidence_probability, critical_efficiency,
    empirical_ch_counts, fit_scale, normalize_record, outcome_distribution,
    parse_experiment_file, parse_sim_config, quantum_setting_probabilities, render_report,
    serialize_experiment, singles_probability, validate_pipeline, Angle, Error,
    ExperimentRecord, PairSourceModel, Result, SettingPair,
};

#[derive(Parser)]
#[command(name = "bell-anomaly", version, about = "Quantum predictions and anomaly diagnostics for photon-pair Bell test counts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coincidence probability and singles marginals at one pair of angles.
    Predict {
        #[arg(long, allow_hyphen_values = true)]
        r: f64,
        /// Alice's analyzer angle in degrees.
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        /// Bob's analyzer angle in degrees.
        #[arg(long, allow_hyphen_values = true)]
        beta: f64,
    },
    /// Fit the scale N*eta1*eta2 to an experiment file.
    Fit { experiment: PathBuf },
    /// Full comparison table of raw, corrected and predicted counts.
    Report {
        experiment: PathBuf,
        #[arg(long, default_value = "text")]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate synthetic experiment files and pipeline recovery statistics.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        reps: usize,
        /// Output file for one repetition, output directory for several.
        #[arg(long)]
        out: PathBuf,
    },
    /// Critical detection efficiency and CH statistic at unit efficiency.
    CriticalEfficiency { experiment: PathBuf },
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn load(path: &Path) -> Result<(ExperimentRecord, PairSourceModel)> {
    let record = parse_experiment_file(&read(path)?)?;
    let model = *record.model().ok_or_else(|| Error::Schema {
        field: "model".into(),
        message: "this command needs the source model `{\"r\": ...}`".into(),
    })?;
    Ok((record, model))
}

fn predict(r: f64, alpha: f64, beta: f64) -> Result<()> {
    let model = PairSourceModel::new(r)?;
    let (alpha, beta) = (Angle::from_degrees(alpha)?, Angle::from_degrees(beta)?);
    let dist = outcome_distribution(&model, alpha, beta)?;
    println!("coincidence_probability = {}", coincidence_probability(&model, alpha, beta)?);
    println!("singles_alice = {}", singles_probability(&model, alpha)?);
    println!("singles_bob = {}", singles_probability(&model, beta)?);
    println!(
        "outcomes (++, +-, -+, --) = {}, {}, {}, {}",
        dist.p_pp, dist.p_pm, dist.p_mp, dist.p_mm
    );
    Ok(())
}

fn fit(path: &Path) -> Result<()> {
    let (record, model) = load(path)?;
    let e = normalize_record(&record)?;
    let q = quantum_setting_probabilities(&model, record.angles())?;
    let fit = fit_scale(&e, &q)?;
    println!("reference_trials = {}", record.reference_trials());
    println!("scale = {}", fit.scale);
    println!("sse = {}", fit.sse);
    println!("setting,q,corrected,residual");
    for (j, pair) in SettingPair::ALL.iter().enumerate() {
        println!("{},{},{},{}", pair.key(), fit.q[j], fit.e[j], fit.residuals[j]);
    }
    Ok(())
}

fn report(path: &Path, format: &str, out: Option<&Path>) -> Result<()> {
    let format: ReportFormat = format.parse()?;
    let (record, model) = load(path)?;
    let table = build_comparison(&record, &model)?;
    let bytes = render_report(&table, format);
    match out {
        Some(out) => write(out, &bytes),
        None => {
            print!("{}", String::from_utf8_lossy(&bytes));
            Ok(())
        }
    }
}

fn simulate(config: &Path, seed: Option<u64>, reps: usize, out: &Path) -> Result<()> {
    let mut config = parse_sim_config(&read(config)?)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if reps == 0 {
        return Err(Error::Usage("--reps must be at least 1".into()));
    }
    if reps == 1 {
        let sim = simulate_with_seed(&config, config.seed)?;
        write(out, serialize_experiment(&sim.record).as_bytes())?;
        let q = quantum_setting_probabilities(&config.model, &config.angles)?;
        let fit = fit_scale(&normalize_record(&sim.record)?, &q)?;
        let summary = json!({
            "generator": GENERATOR,
            "seed": sim.seed,
            "true_scale": config.true_scale(),
            "fitted_scale": fit.scale,
        });
        println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
        return Ok(());
    }

    fs::create_dir_all(out).map_err(|e| Error::Io {
        path: out.display().to_string(),
        message: e.to_string(),
    })?;
    for i in 0..reps {
        let sim = simulate_with_seed(&config, repetition_seed(config.seed, i as u64))?;
        write(&out.join(format!("rep_{i:04}.json")), serialize_experiment(&sim.record).as_bytes())?;
    }
    let stats = validate_pipeline(&config, reps)?;
    let mut text = serde_json::to_string_pretty(&stats).expect("stats serialize");
    text.push('\n');
    write(&out.join("recovery.json"), text.as_bytes())?;
    print!("{text}");
    Ok(())
}

fn critical(path: &Path) -> Result<()> {
    let (record, model) = load(path)?;
    let angles = record.angles();
    let j = ch_statistic(&model, angles, 1.0, 1.0)?;
    let eta = critical_efficiency(&model, angles)?;
    println!("critical_efficiency = {eta}");
    println!("ch_statistic_unit_efficiency = {j}");
    if let Some(counts) = empirical_ch_counts(&record)? {
        println!("empirical_ch_counts = {counts}");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Predict { r, alpha, beta } => predict(r, alpha, beta),
        Command::Fit { experiment } => fit(&experiment),
        Command::Report { experiment, format, out } => report(&experiment, &format, out.as_deref()),
        Command::Simulate { config, seed, reps, out } => simulate(&config, seed, reps, &out),
        Command::CriticalEfficiency { experiment } => critical(&experiment),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
