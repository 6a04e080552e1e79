use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use trendsketch_core::clustering::Cut;
use trendsketch_core::constraint::{Annotation, StructuredInterpreter};
use trendsketch_core::ingest::{dataset_summary, export_json, load_csv, CsvMapping, TimeFormat};
use trendsketch_core::model::Dataset;
use trendsketch_core::pipeline::{
    build, run_cluster, run_query, ClusterRequest, IndexBundle, ModeName, ModeSpec, PenaltyOverrides,
    QueryRequest,
};
use trendsketch_core::ps::PsScene;
use trendsketch_core::search::{Viewport, DEFAULT_K};

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;

#[derive(Parser)]
#[command(
    name = "trendsketch",
    version,
    about = "Sketch-based trend search over time-series datasets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TimeFormatArg {
    Auto,
    Iso8601,
    Year,
    EpochSeconds,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Local,
    Global,
}

#[derive(Subcommand)]
enum Command {
    /// Load a CSV into a dataset JSON file.
    Ingest {
        #[arg(long)]
        csv: PathBuf,
        /// Time column.
        #[arg(long)]
        time: String,
        /// Categorical columns identifying each signal.
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        measures: Vec<String>,
        #[arg(long, value_enum, default_value = "auto")]
        time_format: TimeFormatArg,
        #[arg(long)]
        dataset_id: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a search index over a dataset.
    Index {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank signals against a sketched polyline; one JSON match per line.
    Query {
        #[arg(long)]
        index: PathBuf,
        /// JSON file `{"points": [[x, y], ...], "viewport": {...}?}`.
        #[arg(long)]
        sketch: PathBuf,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        #[arg(long)]
        constraint: Option<String>,
        /// Penalty weights as inline JSON, or `@file`.
        #[arg(long)]
        penalties: Option<String>,
        /// Print the whole response object instead of JSON lines.
        #[arg(long)]
        response: bool,
    },
    /// Cluster all indexed signals and print the report.
    Cluster {
        #[arg(long)]
        index: PathBuf,
        #[arg(long, conflicts_with = "threshold")]
        k: Option<usize>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        penalties: Option<String>,
        /// Include the distance matrix.
        #[arg(long)]
        matrix: bool,
    },
    /// Resolve a deictic reference in a scene.
    PsResolve {
        #[arg(long)]
        scene: PathBuf,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn data(e: impl std::fmt::Display) -> Self {
        CliError::Data(e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Deserialize)]
struct Polyline {
    points: Vec<[f64; 2]>,
    #[serde(default)]
    viewport: Option<Viewport>,
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_slice(&read(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn penalties(arg: Option<&str>) -> Result<PenaltyOverrides> {
    let Some(raw) = arg else {
        return Ok(PenaltyOverrides::default());
    };
    let text = match raw.strip_prefix('@') {
        Some(path) => String::from_utf8_lossy(&read(Path::new(path))?).into_owned(),
        None => raw.to_string(),
    };
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("--penalties: {e}")))
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string(value).expect("responses serialize"));
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest {
            csv,
            time,
            dims,
            measures,
            time_format,
            dataset_id,
            out,
        } => {
            let mapping = CsvMapping {
                time_field: time,
                categorical_fields: dims,
                measure_fields: measures,
                time_format: match time_format {
                    TimeFormatArg::Auto => TimeFormat::Auto,
                    TimeFormatArg::Iso8601 => TimeFormat::Iso8601,
                    TimeFormatArg::Year => TimeFormat::Year,
                    TimeFormatArg::EpochSeconds => TimeFormat::EpochSeconds,
                },
                dataset_id,
            };
            let outcome = load_csv(&read(&csv)?, &mapping).map_err(CliError::data)?;
            for w in &outcome.warnings {
                eprintln!(
                    "warning: {}",
                    serde_json::to_string(w).expect("warnings serialize")
                );
            }
            write(&out, export_json(&outcome.dataset).as_bytes())?;
            print_json(&dataset_summary(&outcome.dataset));
        }
        Command::Index {
            dataset,
            epsilon,
            mode,
            out,
        } => {
            let dataset: Dataset = read_json(&dataset)?;
            let overrides = PenaltyOverrides {
                epsilon,
                mode: mode.map(|m| {
                    ModeSpec::Named(match m {
                        ModeArg::Local => ModeName::Local,
                        ModeArg::Global => ModeName::Global,
                    })
                }),
                ..PenaltyOverrides::default()
            };
            let index = build(&dataset, &overrides).map_err(CliError::data)?;
            for u in &index.unindexable {
                eprintln!("warning: signal `{}` not indexed: {}", u.id, u.reason);
            }
            let bundle = IndexBundle { dataset, index };
            write(&out, &serde_json::to_vec(&bundle).map_err(CliError::data)?)?;
            eprintln!("indexed {} signals", bundle.index.len());
        }
        Command::Query {
            index,
            sketch,
            k,
            constraint,
            penalties: p,
            response,
        } => {
            let bundle: IndexBundle = read_json(&index)?;
            let polyline: Polyline = read_json(&sketch)?;
            let req = QueryRequest {
                sketch_points: polyline.points,
                penalty_config: penalties(p.as_deref())?,
                k,
                constraint: constraint.map(Annotation::Text),
                viewport: polyline.viewport,
            };
            let resp = run_query((&bundle.dataset, &bundle.index), &req, &StructuredInterpreter)
                .map_err(CliError::data)?;
            if response {
                print_json(&resp);
            } else {
                for m in &resp.matches {
                    print_json(m);
                }
                if req.constraint.is_some() {
                    eprintln!("dropped_by_constraint: {}", resp.dropped_by_constraint);
                }
            }
        }
        Command::Cluster {
            index,
            k,
            threshold,
            penalties: p,
            matrix,
        } => {
            let bundle: IndexBundle = read_json(&index)?;
            let cut = match (k, threshold) {
                (Some(k), _) => Some(Cut::Count(k)),
                (None, Some(t)) => Some(Cut::Threshold(t)),
                (None, None) => None,
            };
            let req = ClusterRequest {
                cut,
                penalty_config: penalties(p.as_deref())?,
                include_matrix: matrix,
            };
            let resp = run_cluster((&bundle.dataset, &bundle.index), &req).map_err(CliError::data)?;
            print_json(&resp);
        }
        Command::PsResolve { scene } => {
            let scene: PsScene = read_json(&scene)?;
            print_json(&scene.resolve().map_err(CliError::Data)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_DATA)
        }
    }
}
