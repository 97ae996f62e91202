//! Subcommand implementations behind the `vinewatch` binary.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use vinewatch_core::aggregate::{summaries_to_csv, AggregateError};
use vinewatch_core::features::{build_instances as build, read_instances, write_instances, FeatureError, LabelingSummary};
use vinewatch_core::glyph::GlyphError;
use vinewatch_core::ingest::{
    generate_synthetic, parse_areas, parse_elevation, parse_landuse, parse_observations, write_areas, write_elevation, write_landuse,
    write_observations, AreaPolygon, CategoryManifest, ElevationGrid, IngestError, LandUseMap,
};
use vinewatch_core::learn::{cross_validate, load_model, save_model, train_stacked_ensemble, Dataset, EnsembleModel, EvaluationReport, LearnError, NoProbe};
use vinewatch_core::predict::{build_catalog, load_catalog, save_catalog, PredictError, PredictionCatalog};

use crate::config::{ConfigError, ServiceConfig};
use crate::session::{ApiSession, SessionError};

pub const OBSERVATIONS_FILE: &str = "observations.csv";
pub const LANDUSE_FILE: &str = "landuse.geojson";
pub const ELEVATION_FILE: &str = "elevation.asc";
pub const AREAS_FILE: &str = "areas.geojson";
pub const INSTANCES_FILE: &str = "instances.csv";
pub const LABELING_FILE: &str = "labeling.txt";
pub const REPORT_CSV_FILE: &str = "kappa_report.csv";
pub const REPORT_TEXT_FILE: &str = "kappa_report.txt";
pub const SUMMARIES_FILE: &str = "summaries.csv";

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Aggregate(#[from] AggregateError),
    #[error(transparent)]
    Glyph(#[from] GlyphError),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("{0}")]
    Invalid(String),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CommandError {
    /// Bad input (files, flags, config) as opposed to an internal failure.
    pub fn is_validation(&self) -> bool {
        match self {
            CommandError::Output { .. } => false,
            CommandError::Ingest(IngestError::Io { .. }) => false,
            CommandError::Predict(PredictError::Io { .. }) => false,
            _ => true,
        }
    }
}

fn output_err(path: &Path) -> impl FnOnce(std::io::Error) -> CommandError + '_ {
    move |source| CommandError::Output { path: path.to_path_buf(), source }
}

fn create(path: &Path) -> Result<BufWriter<File>, CommandError> {
    File::create(path).map(BufWriter::new).map_err(output_err(path))
}

fn write_text(path: &Path, text: &str) -> Result<(), CommandError> {
    std::fs::write(path, text).map_err(output_err(path))
}

fn ensure_dir(dir: &Path) -> Result<(), CommandError> {
    std::fs::create_dir_all(dir).map_err(output_err(dir))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthReport {
    pub n_observations: usize,
    pub n_stations: usize,
    pub n_landuse_polygons: usize,
    pub n_areas: usize,
}

/// Write the four synthetic input files into `out`.
pub fn synth(config: &ServiceConfig, seed: u64, out: &Path) -> Result<SynthReport, CommandError> {
    let data = generate_synthetic(&config.synth_config(), seed)?;
    ensure_dir(out)?;
    write_observations(create(&out.join(OBSERVATIONS_FILE))?, &data.observations)?;
    write_landuse(create(&out.join(LANDUSE_FILE))?, &data.landuse)?;
    let elev = out.join(ELEVATION_FILE);
    write_elevation(create(&elev)?, &data.elevation).map_err(output_err(&elev))?;
    write_areas(create(&out.join(AREAS_FILE))?, &data.areas)?;
    Ok(SynthReport {
        n_observations: data.observations.len(),
        n_stations: data.stations.len(),
        n_landuse_polygons: data.landuse.polygons().len(),
        n_areas: data.areas.len(),
    })
}

/// Land use, elevation and areas from a data directory.
pub struct Environment {
    pub manifest: Arc<CategoryManifest>,
    pub landuse: LandUseMap,
    pub elevation: ElevationGrid,
}

pub fn load_environment(config: &ServiceConfig, data: &Path) -> Result<Environment, CommandError> {
    let manifest = Arc::new(config.category_manifest()?);
    let landuse = parse_landuse(&data.join(LANDUSE_FILE), manifest.clone())?;
    let elevation = parse_elevation(&data.join(ELEVATION_FILE))?;
    Ok(Environment { manifest, landuse, elevation })
}

pub fn load_areas(data: &Path) -> Result<Vec<AreaPolygon>, CommandError> {
    Ok(parse_areas(&data.join(AREAS_FILE))?)
}

pub fn labeling_text(s: &LabelingSummary) -> String {
    format!(
        "percentile = {}\nthreshold = {}\ninstances = {}\npositive = {}\nnegative = {}\n",
        s.percentile, s.threshold_value, s.n_total, s.n_positive, s.n_negative
    )
}

/// Labeled instances and the labeling summary, written into `out`.
pub fn build_instances(config: &ServiceConfig, data: &Path, out: &Path) -> Result<LabelingSummary, CommandError> {
    let observations = parse_observations(&data.join(OBSERVATIONS_FILE), &config.region)?;
    let env = load_environment(config, data)?;
    let (instances, summary) = build(&observations, &env.landuse, &env.elevation, config.percentile, &config.sampling())?;
    ensure_dir(out)?;
    write_instances(create(&out.join(INSTANCES_FILE))?, &instances)?;
    write_text(&out.join(LABELING_FILE), &labeling_text(&summary))?;
    Ok(summary)
}

pub fn train(config: &ServiceConfig, seed: u64, instances: &Path, model_out: &Path) -> Result<EnsembleModel, CommandError> {
    let instances = read_instances(instances)?;
    let model = train_stacked_ensemble(&instances, &config.learn_config(), seed)?;
    if let Some(dir) = model_out.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    save_model(model_out, &model)?;
    Ok(model)
}

/// Cross-validated kappa report, written as CSV and aligned text into `out`.
pub fn evaluate(
    config: &ServiceConfig,
    seed: u64,
    instances: &Path,
    shuffle_labels: bool,
    out: &Path,
) -> Result<EvaluationReport, CommandError> {
    let instances = read_instances(instances)?;
    let mut data = Dataset::from_instances(&instances)?;
    if shuffle_labels {
        data = data.with_shuffled_labels(seed);
    }
    let report = cross_validate(&data, config.folds, &config.learn_config(), seed, &NoProbe)?;
    ensure_dir(out)?;
    write_text(&out.join(REPORT_CSV_FILE), &report.to_csv())?;
    write_text(&out.join(REPORT_TEXT_FILE), &report.to_text())?;
    Ok(report)
}

/// Predict every area of a data directory and save the catalog into `out`.
pub fn predict(config: &ServiceConfig, model: &Path, data: &Path, out: &Path) -> Result<PredictionCatalog, CommandError> {
    let model = load_model(model)?;
    let env = load_environment(config, data)?;
    let areas = load_areas(data)?;
    let catalog = build_catalog(&model, &areas, &env.landuse, &env.elevation, &config.sampling())?;
    save_catalog(out, &catalog)?;
    Ok(catalog)
}

pub fn load_session(config: &ServiceConfig, catalog_dir: &Path) -> Result<ApiSession, CommandError> {
    let catalog = load_catalog(catalog_dir)?;
    let manifest = config.category_manifest()?;
    if let Some(a) = catalog.areas().next() {
        if a.landuse.len() != manifest.codes().len() {
            return Err(CommandError::Invalid("catalog land-use vectors do not match the category manifest".into()));
        }
    }
    Ok(ApiSession::new(catalog, manifest, config.clone()))
}

pub fn glyph_file_name(i: i64, j: i64) -> String {
    format!("cell_{i}_{j}.svg")
}

/// One SVG per non-empty cell plus the summary export; returns the glyph count.
pub fn render(session: &ApiSession, cell_size_m: f64, radius_px: f64, out: &Path) -> Result<usize, CommandError> {
    let glyphs = session.all_glyphs(cell_size_m, radius_px)?;
    ensure_dir(out)?;
    for (cell, svg) in &glyphs {
        write_text(&out.join(glyph_file_name(cell.i, cell.j)), svg)?;
    }
    let index = session.index(cell_size_m)?;
    write_text(&out.join(SUMMARIES_FILE), &summaries_to_csv(&index.summaries))?;
    Ok(glyphs.len())
}
