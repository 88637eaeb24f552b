use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use collabgeo::analytics::StageDefinition;
use collabgeo::corpus::{IngestOptions, InputFormat};
use collabgeo::geodesy::GeoPoint;
use collabgeo::georesolve::load_boundaries;
use collabgeo::pipeline::{self, AnalysisOptions, DEFAULT_CHUNK_SIZE};
use collabgeo::synth::{self, FixtureWriter, Profile};

mod config;
mod output;

use config::{DistanceModeName, FileConfig, FormatName, Overrides, PolicyName, RunConfig};

#[derive(Parser)]
#[command(name = "collabgeo", version, about = "Geographic distance analysis of research collaborations")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and check input records without computing distances.
    Validate(InputArgs),
    /// Run the full analysis and write result tables.
    Analyze(AnalyzeArgs),
    /// Print the distance between two points in kilometers.
    Distance(DistanceArgs),
    /// Write a synthetic corpus and its ground-truth sidecar.
    GenFixture(FixtureArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Input files, read in the given order.
    inputs: Vec<PathBuf>,
    /// TOML config file; flags take precedence over its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatName>,
    #[arg(long, value_enum)]
    missing_coordinates: Option<PolicyName>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
    /// GeoJSON country boundaries used to fill missing countries.
    #[arg(long)]
    boundary_file: Option<PathBuf>,
    #[arg(long)]
    snap_radius_km: Option<f64>,
    #[arg(long)]
    start_year: Option<i32>,
    #[arg(long)]
    end_year: Option<i32>,
    /// Comma-separated stages, e.g. "early=1950-1996,1997-2009".
    #[arg(long)]
    stages: Option<StageDefinition>,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long, value_enum)]
    distance_mode: Option<DistanceModeName>,
    /// Worker threads; defaults to the number of available cores.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct DistanceArgs {
    lat1: f64,
    lon1: f64,
    lat2: f64,
    lon2: f64,
    #[arg(long, value_enum, default_value = "geodesic")]
    mode: DistanceModeName,
}

#[derive(Args)]
struct FixtureArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    size: usize,
    /// mixed, multi25, powerlaw<alpha> or landmark.
    #[arg(long, default_value = "mixed")]
    profile: Profile,
    #[arg(long, value_enum, default_value = "line-records")]
    format: FormatName,
    #[arg(short, long)]
    output: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    let result = match cli.command {
        Command::Validate(a) => cmd_validate(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Distance(a) => cmd_distance(a),
        Command::GenFixture(a) => cmd_gen_fixture(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn input_overrides(a: &InputArgs) -> Result<(FileConfig, Overrides)> {
    let file = match &a.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let flags = Overrides {
        inputs: a.inputs.clone(),
        input_format: a.format.map(InputFormat::from),
        missing_coordinates: a.missing_coordinates.map(Into::into),
        ..Overrides::default()
    };
    Ok((file, flags))
}

fn open_inputs(config: &RunConfig) -> Result<Vec<(BufReader<File>, InputFormat)>> {
    config
        .inputs
        .iter()
        .map(|p| {
            let f = File::open(p).with_context(|| format!("cannot open input {}", p.display()))?;
            Ok((BufReader::with_capacity(1 << 16, f), config.input_format))
        })
        .collect()
}

fn ingest_options(config: &RunConfig) -> IngestOptions {
    IngestOptions {
        missing_coordinates: config.missing_coordinates,
        ..IngestOptions::default()
    }
}

fn cmd_validate(a: InputArgs) -> Result<ExitCode> {
    let (file, flags) = input_overrides(&a)?;
    let config = RunConfig::resolve(file, flags, false)?;
    let report = pipeline::validate(open_inputs(&config)?, &ingest_options(&config))?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    if report.accepted == 0 {
        eprintln!("error: no valid publication records");
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<ExitCode> {
    let (file, mut flags) = input_overrides(&a.input)?;
    flags.output_dir = a.output_dir;
    flags.boundary_file = a.boundary_file;
    flags.snap_radius_km = a.snap_radius_km;
    flags.start_year = a.start_year;
    flags.end_year = a.end_year;
    flags.stages = a.stages;
    flags.top_k = a.top_k;
    flags.distance_mode = a.distance_mode;
    flags.workers = a.workers;
    let config = RunConfig::resolve(file, flags, true)?;

    let boundaries = match &config.boundary_file {
        Some(p) => Some(load_boundaries(p)?),
        None => None,
    };
    let opts = AnalysisOptions {
        ingest: ingest_options(&config),
        window: config.year_window,
        stages: config.stages.clone(),
        distance: config.distance_mode.mode(),
        snap_radius_km: config.snap_radius_km,
        chunk_size: DEFAULT_CHUNK_SIZE,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .context("cannot start worker pool")?;
    let sources = open_inputs(&config)?;
    let outcome = pool.install(|| pipeline::analyze(sources, boundaries.as_ref(), &opts))?;
    let (files, summary) = pool.install(|| output::render(&outcome, &config))?;
    output::write_atomically(&config.output_dir, &files)?;
    for w in &summary.warnings {
        log::warn!("{w}");
    }
    println!("{}", summary.line());
    Ok(ExitCode::SUCCESS)
}

fn cmd_distance(a: DistanceArgs) -> Result<ExitCode> {
    let p = GeoPoint::new(a.lat1, a.lon1).context("invalid first point")?;
    let q = GeoPoint::new(a.lat2, a.lon2).context("invalid second point")?;
    println!("{:.2}", a.mode.mode().distance_km(p, q));
    Ok(ExitCode::SUCCESS)
}

fn sidecar_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".truth.json");
    output.with_file_name(name)
}

fn cmd_gen_fixture(a: FixtureArgs) -> Result<ExitCode> {
    if a.size == 0 {
        bail!("size must be at least 1");
    }
    let dir = match a.output.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(&dir).with_context(|| format!("cannot write to {}", dir.display()))?;
    let mut writer = FixtureWriter::new(BufWriter::new(tmp), a.format.into())?;
    let truth = synth::generate(a.profile, a.seed, a.size, &mut writer)?;
    let tmp = writer.finish()?.into_inner().map_err(|e| e.into_error())?;

    let mut side = tempfile::NamedTempFile::new_in(&dir)?;
    serde_json::to_writer_pretty(&mut side, &truth)?;
    side.write_all(b"\n")?;
    tmp.persist(&a.output)
        .with_context(|| format!("cannot write {}", a.output.display()))?;
    let sidecar = sidecar_path(&a.output);
    side.persist(&sidecar)
        .with_context(|| format!("cannot write {}", sidecar.display()))?;
    log::info!(
        "wrote {} publications over {} affiliations to {}",
        truth.publications,
        truth.affiliations,
        a.output.display()
    );
    Ok(ExitCode::SUCCESS)
}
