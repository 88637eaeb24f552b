use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use collabgeo::analytics::{Stage, StageDefinition, DEFAULT_TOP_K};
use collabgeo::corpus::{InputFormat, MissingCoordinatePolicy, YearWindow};
use collabgeo::geodesy::{DistanceMode, MEAN_EARTH_RADIUS_KM};
use collabgeo::georesolve::DEFAULT_SNAP_RADIUS_KM;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceModeName {
    Geodesic,
    Spherical,
}

impl DistanceModeName {
    pub fn mode(self) -> DistanceMode {
        match self {
            DistanceModeName::Geodesic => DistanceMode::geodesic(),
            DistanceModeName::Spherical => DistanceMode::Spherical {
                radius_km: MEAN_EARTH_RADIUS_KM,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FormatName {
    #[value(alias = "jsonl")]
    LineRecords,
    #[value(alias = "csv")]
    DelimitedEdges,
}

impl From<FormatName> for InputFormat {
    fn from(f: FormatName) -> Self {
        match f {
            FormatName::LineRecords => InputFormat::LineRecords,
            FormatName::DelimitedEdges => InputFormat::DelimitedEdges,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PolicyName {
    DropPublication,
    DropAffiliation,
}

impl From<PolicyName> for MissingCoordinatePolicy {
    fn from(p: PolicyName) -> Self {
        match p {
            PolicyName::DropPublication => MissingCoordinatePolicy::DropPublication,
            PolicyName::DropAffiliation => MissingCoordinatePolicy::DropAffiliation,
        }
    }
}

/// Settings read from a TOML config file. Every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub inputs: Option<Vec<PathBuf>>,
    pub input_format: Option<InputFormat>,
    pub boundary_file: Option<PathBuf>,
    pub snap_radius_km: Option<f64>,
    pub start_year: Option<i32>,
    pub end_year: Option<i32>,
    pub stages: Option<Vec<Stage>>,
    pub top_k: Option<usize>,
    pub missing_coordinates: Option<MissingCoordinatePolicy>,
    pub output_dir: Option<PathBuf>,
    pub distance_mode: Option<DistanceModeName>,
    pub workers: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }
}

/// Settings given on the command line; `None` defers to the config file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub inputs: Vec<PathBuf>,
    pub input_format: Option<InputFormat>,
    pub boundary_file: Option<PathBuf>,
    pub snap_radius_km: Option<f64>,
    pub start_year: Option<i32>,
    pub end_year: Option<i32>,
    pub stages: Option<StageDefinition>,
    pub top_k: Option<usize>,
    pub missing_coordinates: Option<MissingCoordinatePolicy>,
    pub output_dir: Option<PathBuf>,
    pub distance_mode: Option<DistanceModeName>,
    pub workers: Option<usize>,
}

/// Fully resolved settings of one run. The serialized form leaves out the
/// output directory and worker count, which do not affect results.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub inputs: Vec<PathBuf>,
    pub input_format: InputFormat,
    pub boundary_file: Option<PathBuf>,
    pub snap_radius_km: f64,
    pub year_window: YearWindow,
    pub stages: StageDefinition,
    pub top_k: usize,
    pub missing_coordinates: MissingCoordinatePolicy,
    pub distance_mode: DistanceModeName,
    #[serde(skip)]
    pub output_dir: PathBuf,
    #[serde(skip)]
    pub workers: usize,
}

impl RunConfig {
    /// Merges flags over the file config over defaults and checks the result.
    pub fn resolve(file: FileConfig, flags: Overrides, need_output: bool) -> Result<Self> {
        let inputs = if flags.inputs.is_empty() {
            file.inputs.unwrap_or_default()
        } else {
            flags.inputs
        };
        if inputs.is_empty() {
            bail!("no input files given");
        }
        let stages = match (flags.stages, file.stages) {
            (Some(s), _) => s,
            (None, Some(s)) => StageDefinition::new(s)?,
            (None, None) => StageDefinition::default(),
        };
        let default_window = stages.span();
        let year_window = YearWindow::new(
            flags.start_year.or(file.start_year).unwrap_or(default_window.start),
            flags.end_year.or(file.end_year).unwrap_or(default_window.end),
        )?;
        stages.check_covers(year_window)?;
        let snap_radius_km = flags
            .snap_radius_km
            .or(file.snap_radius_km)
            .unwrap_or(DEFAULT_SNAP_RADIUS_KM);
        if !(snap_radius_km >= 0.0 && snap_radius_km.is_finite()) {
            bail!("snap radius must be a non-negative number of kilometers");
        }
        let top_k = flags.top_k.or(file.top_k).unwrap_or(DEFAULT_TOP_K);
        if top_k == 0 {
            bail!("top-k must be at least 1");
        }
        let output_dir = flags.output_dir.or(file.output_dir);
        if need_output && output_dir.is_none() {
            bail!("no output directory given");
        }
        let workers = flags
            .workers
            .or(file.workers)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        if workers == 0 {
            bail!("workers must be at least 1");
        }
        let config = RunConfig {
            inputs,
            input_format: flags
                .input_format
                .or(file.input_format)
                .unwrap_or(InputFormat::LineRecords),
            boundary_file: flags.boundary_file.or(file.boundary_file),
            snap_radius_km,
            year_window,
            stages,
            top_k,
            missing_coordinates: flags.missing_coordinates.or(file.missing_coordinates).unwrap_or_default(),
            distance_mode: flags
                .distance_mode
                .or(file.distance_mode)
                .unwrap_or(DistanceModeName::Geodesic),
            output_dir: output_dir.unwrap_or_default(),
            workers,
        };
        config.check_paths(need_output)?;
        Ok(config)
    }

    fn check_paths(&self, need_output: bool) -> Result<()> {
        for p in &self.inputs {
            std::fs::File::open(p).with_context(|| format!("cannot open input {}", p.display()))?;
        }
        if let Some(b) = &self.boundary_file {
            if !b.is_file() {
                bail!("boundary file {} does not exist", b.display());
            }
        }
        if need_output && self.output_dir.exists() && !self.output_dir.is_dir() {
            bail!("output path {} is not a directory", self.output_dir.display());
        }
        Ok(())
    }
}
