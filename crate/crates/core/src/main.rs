//! Command-line front end: builds a configuration from preset, file and
//! flags (later sources win), runs the batch, prints a summary and emits
//! CSV/JSON files when an output directory is given.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use blindsim::config::{parse_architecture, parse_attack_spec, preset, FileConfig};
use blindsim::output::{
    render_csv, render_json, run_batch, write_outputs, BatchResult, MetricStats, OutputFormat,
    OutputOptions,
};
use blindsim::{Config, Error};

/// Discrete-gate simulator of detector-blinding attacks on a BB84 link.
#[derive(Debug, Parser)]
#[command(name = "blindsim", version, about)]
struct Cli {
    /// Parameter preset: baseline, fig1a-blind, fig1b-blind, fig1c-blind,
    /// intercept, rng-control, weak-cw or partial:<fraction>
    #[arg(long)]
    preset: Option<String>,

    /// Gates per session
    #[arg(long)]
    gates: Option<u64>,

    /// Independent sessions to run
    #[arg(long)]
    sessions: Option<u32>,

    /// Master seed; sessions derive their own seeds from it
    #[arg(long)]
    seed: Option<u64>,

    /// Receiver architecture: passive, pem or mirror
    #[arg(long)]
    receiver: Option<String>,

    /// Attack: none, intercept, blind, blind-partial:<fraction> or
    /// rng-control
    #[arg(long)]
    attack: Option<String>,

    /// TOML configuration file applied between preset and flags
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Directory for emitted result files
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Which files to emit under --out: csv, json or both
    #[arg(long, default_value = "both")]
    format: String,
}

fn build_config(cli: &Cli) -> Result<Config, Error> {
    let mut config = match &cli.preset {
        Some(name) => preset(name)?,
        None => Config::default(),
    };
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path).map_err(|error| Error::ConfigFile {
            path: path.display().to_string(),
            message: error.to_string(),
        })?;
        FileConfig::parse(&text)?.apply(&mut config)?;
    }
    if let Some(gates) = cli.gates {
        config.gates = gates;
    }
    if let Some(sessions) = cli.sessions {
        config.sessions = sessions;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(receiver) = &cli.receiver {
        config.architecture = parse_architecture(receiver)?;
    }
    if let Some(attack) = &cli.attack {
        config.attack.kind = parse_attack_spec(attack)?;
    }
    let format: OutputFormat = cli.format.parse()?;
    if let Some(dir) = &cli.out {
        config.output = Some(OutputOptions {
            dir: dir.clone(),
            format,
        });
    }
    config.finalize();
    config.validate()?;
    Ok(config)
}

fn format_stat(stat: &MetricStats<f64>) -> String {
    match (stat.mean, stat.std) {
        (Some(mean), Some(std)) => format!("mean={mean} std={std}"),
        _ => "n/a".to_string(),
    }
}

fn print_report(config: &Config, batch: &BatchResult<f64>) {
    for row in &batch.rows {
        println!(
            "session {}: seed={} sifted_rate={} qber={} p_c'={} leaked<={} final>={}",
            row.session,
            row.seed,
            row.sifted_rate,
            row.report.qber,
            row.report.p_c_prime_hat,
            row.report.leaked_bits_bound,
            row.report.final_key_bound,
        );
    }
    println!(
        "summary over {} sessions x {} gates (seed {}):",
        batch.rows.len(),
        config.gates,
        config.seed,
    );
    if let Some(p_c0) = batch.p_c0_hat {
        println!("  calibrated p_c0: {p_c0}");
    }
    let s = &batch.summary;
    println!("  sifted_rate: {}", format_stat(&s.sifted_rate));
    println!("  qber: {}", format_stat(&s.qber));
    println!(
        "  coincidence_probability: {}",
        format_stat(&s.coincidence_probability)
    );
    println!(
        "  eve_knowledge_fraction: {}",
        format_stat(&s.eve_knowledge_fraction)
    );
    println!("  leaked_bits_bound: {}", format_stat(&s.leaked_bits_bound));
    println!("  final_key_bound: {}", format_stat(&s.final_key_bound));
}

fn exit_code(error: &Error) -> u8 {
    match error {
        Error::Io(_) => 3,
        _ => 2,
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    let config = build_config(cli)?;
    let batch = run_batch(&config)?;
    if let Some(options) = &config.output {
        let csv = render_csv(&batch.rows);
        let json = render_json(&batch.rows, &batch.summary);
        let written = write_outputs(options, &csv, &json)?;
        for path in written {
            println!("wrote {}", path.display());
        }
    }
    print_report(&config, &batch);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(exit_code(&error))
        }
    }
}
