//! Batch execution and result emission.
//!
//! A run executes `sessions` independent sessions, each seeded from the
//! master seed and its index, scores every transcript against one shared
//! dark-coincidence calibration, and renders the results as a versioned
//! CSV table and a JSON document. Both renderings use the shortest
//! round-trip float form, so parsing a value back yields the exact bits
//! that produced it and repeated runs are byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::SimulationConfig;
use crate::defense::{calibrate_p_c0, DefenseReport};
use crate::protocol::{eve_knowledge_fraction, run_session};
use crate::rng::derive_seed;
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Which files a run emits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    Both,
}

impl OutputFormat {
    pub fn wants_csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    pub fn wants_json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
            OutputFormat::Both => "both",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        match text {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "both" => Ok(OutputFormat::Both),
            other => Err(Error::invalid(
                "format",
                &format!("unknown format '{other}', expected csv, json or both"),
            )),
        }
    }
}

/// Destination directory and formats for emitted files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputOptions {
    pub dir: PathBuf,
    pub format: OutputFormat,
}

/// One finished session, scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRow<F: Scalar> {
    pub session: u32,
    pub seed: u64,
    pub report: DefenseReport<F>,
    pub sifted_rate: F,
    pub eve_knowledge_fraction: F,
}

/// Mean and population standard deviation of one metric. Absent when the
/// run had no sessions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricStats<F> {
    pub mean: Option<F>,
    pub std: Option<F>,
}

/// Cross-session statistics over the reported metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats<F> {
    pub sifted_rate: MetricStats<F>,
    pub qber: MetricStats<F>,
    pub coincidence_probability: MetricStats<F>,
    pub eve_knowledge_fraction: MetricStats<F>,
    pub leaked_bits_bound: MetricStats<F>,
    pub final_key_bound: MetricStats<F>,
}

/// Everything a batch produces before rendering.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult<F: Scalar> {
    pub rows: Vec<SessionRow<F>>,
    pub summary: SummaryStats<F>,
    /// Calibrated floor shared by all rows; absent for an empty run.
    pub p_c0_hat: Option<F>,
}

/// Seed of session `index` within a batch keyed by `master`.
pub fn session_seed(master: u64, index: u32) -> u64 {
    derive_seed(master, &format!("session-{index}"))
}

/// Runs the configured number of sessions sequentially in index order.
pub fn run_batch<F: Scalar>(config: &SimulationConfig<F>) -> Result<BatchResult<F>> {
    config.validate()?;
    let p_c0_hat = if config.sessions > 0 {
        Some(calibrate_p_c0(config)?)
    } else {
        None
    };
    let mut rows = Vec::with_capacity(config.sessions as usize);
    for index in 0..config.sessions {
        let mut session_config = config.clone();
        session_config.seed = session_seed(config.seed, index);
        let transcript = run_session(&session_config)?;
        let report = DefenseReport::from_transcript(&transcript, p_c0_hat.unwrap())?;
        rows.push(SessionRow {
            session: index,
            seed: session_config.seed,
            report,
            sifted_rate: transcript.sifted_rate(),
            eve_knowledge_fraction: eve_knowledge_fraction(&transcript),
        });
    }
    let summary = summarize(&rows);
    Ok(BatchResult {
        rows,
        summary,
        p_c0_hat,
    })
}

fn stats<F: Scalar>(values: &[F]) -> MetricStats<F> {
    if values.is_empty() {
        return MetricStats {
            mean: None,
            std: None,
        };
    }
    let n = F::real(values.len() as f64);
    let mut sum = F::zero();
    for &v in values {
        sum += v;
    }
    let mean = sum / n;
    let mut squares = F::zero();
    for &v in values {
        let d = v - mean;
        squares += d * d;
    }
    MetricStats {
        mean: Some(mean),
        std: Some((squares / n).sqrt()),
    }
}

/// Population statistics over the six reported metrics, in row order.
pub fn summarize<F: Scalar>(rows: &[SessionRow<F>]) -> SummaryStats<F> {
    let collect = |f: fn(&SessionRow<F>) -> F| rows.iter().map(f).collect::<Vec<F>>();
    SummaryStats {
        sifted_rate: stats(&collect(|r| r.sifted_rate)),
        qber: stats(&collect(|r| r.report.qber)),
        coincidence_probability: stats(&collect(|r| r.report.p_c_prime_hat)),
        eve_knowledge_fraction: stats(&collect(|r| r.eve_knowledge_fraction)),
        leaked_bits_bound: stats(&collect(|r| r.report.leaked_bits_bound)),
        final_key_bound: stats(&collect(|r| r.report.final_key_bound)),
    }
}

pub const CSV_SCHEMA_LINE: &str = "# schema=1";
pub const CSV_HEADER: &str = "session,seed,p_c_prime_hat,p_c0_hat,extra_coincidences,\
leaked_bits_bound,sifted_length,qber,final_key_bound,sifted_rate,eve_knowledge_fraction";

/// Renders the per-session table. Column order is fixed by the schema.
pub fn render_csv<F: Scalar>(rows: &[SessionRow<F>]) -> String {
    let mut text = String::new();
    let _ = writeln!(text, "{CSV_SCHEMA_LINE}");
    let _ = writeln!(text, "{CSV_HEADER}");
    for row in rows {
        let r = &row.report;
        let _ = writeln!(
            text,
            "{},{},{},{},{},{},{},{},{},{},{}",
            row.session,
            row.seed,
            r.p_c_prime_hat,
            r.p_c0_hat,
            r.extra_coincidences,
            r.leaked_bits_bound,
            r.sifted_length,
            r.qber,
            r.final_key_bound,
            row.sifted_rate,
            row.eve_knowledge_fraction,
        );
    }
    text
}

#[derive(Debug, Serialize)]
struct JsonDocument<'a, F: Scalar> {
    schema: u32,
    sessions: &'a [SessionRow<F>],
    summary: &'a SummaryStats<F>,
}

/// Renders the JSON document: schema tag, per-session objects, summary.
pub fn render_json<F: Scalar>(rows: &[SessionRow<F>], summary: &SummaryStats<F>) -> String {
    let document = JsonDocument {
        schema: 1,
        sessions: rows,
        summary,
    };
    let mut text = serde_json::to_string_pretty(&document).expect("reports are plain data");
    text.push('\n');
    text
}

/// Writes the selected renderings under `options.dir`, creating it if
/// needed. On any failure every file this call created is removed before
/// the error propagates, so a run never leaves partial outputs behind.
pub fn write_outputs(
    options: &OutputOptions,
    csv_text: &str,
    json_text: &str,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let result = (|| -> std::io::Result<()> {
        fs::create_dir_all(&options.dir)?;
        if options.format.wants_csv() {
            let path = options.dir.join("sessions.csv");
            fs::write(&path, csv_text)?;
            written.push(path);
        }
        if options.format.wants_json() {
            let path = options.dir.join("summary.json");
            fs::write(&path, json_text)?;
            written.push(path);
        }
        Ok(())
    })();
    match result {
        Ok(()) => Ok(written),
        Err(error) => {
            for path in &written {
                let _ = fs::remove_file(path);
            }
            Err(error.into())
        }
    }
}
