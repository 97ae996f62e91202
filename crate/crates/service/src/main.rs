use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Parser, Subcommand};
use vinewatch_service::commands::{self, CommandError};
use vinewatch_service::config::LISTEN_ENV;
use vinewatch_service::{router, ServiceConfig};

/// Infestation-risk pipeline: synthetic data, training, evaluation,
/// prediction, glyph rendering and the exploration API.
#[derive(Parser)]
#[command(name = "vinewatch", version)]
struct Cli {
    /// Seed for every random step.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    /// `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic observations, land use, elevation and areas.
    Synth {
        #[arg(long)]
        out: PathBuf,
    },
    /// Build labeled station-month instances from a data directory.
    BuildInstances {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the stacked ensemble and write the model container.
    Train {
        #[arg(long)]
        instances: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validated kappa report for every classifier.
    Evaluate {
        #[arg(long)]
        instances: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Permute labels first (chance-level baseline).
        #[arg(long)]
        shuffle_labels: bool,
    },
    /// Predict every area and month.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// One glyph SVG per non-empty cell.
    Render {
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        cell_size_m: Option<f64>,
        #[arg(long)]
        radius_px: Option<f64>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        catalog: PathBuf,
        /// Overrides the config file's `listen`.
        #[arg(long, env = LISTEN_ENV)]
        listen: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let validation = e.chain().any(|c| c.downcast_ref::<CommandError>().is_some_and(CommandError::is_validation));
            ExitCode::from(if validation { 2 } else { 1 })
        }
    }
}

fn load_config(path: Option<&Path>) -> anyhow::Result<ServiceConfig> {
    Ok(ServiceConfig::load_or_default(path).map_err(CommandError::from)?)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = load_config(cli.config.as_deref())?;
    let seed = cli.seed;
    match cli.command {
        Command::Synth { out } => {
            let r = commands::synth(&config, seed, &out)?;
            println!(
                "wrote {} observations from {} stations, {} land-use polygons, {} areas to {}",
                r.n_observations,
                r.n_stations,
                r.n_landuse_polygons,
                r.n_areas,
                out.display()
            );
        }
        Command::BuildInstances { data, out } => {
            let s = commands::build_instances(&config, &data, &out)?;
            print!("{}", commands::labeling_text(&s));
        }
        Command::Train { instances, out } => {
            let m = commands::train(&config, seed, &instances, &out)?;
            println!(
                "trained on {} instances ({} positive, {} synthetic); model {} written to {}",
                m.metadata.n_train,
                m.metadata.n_positive,
                m.metadata.n_synthetic,
                &m.fingerprint()[..12],
                out.display()
            );
        }
        Command::Evaluate { instances, out, shuffle_labels } => {
            let report = commands::evaluate(&config, seed, &instances, shuffle_labels, &out)?;
            print!("{}", report.to_text());
        }
        Command::Predict { model, data, out } => {
            let c = commands::predict(&config, &model, &data, &out)?;
            println!("{} predictions for {} areas, {} skipped; catalog in {}", c.len(), c.n_areas(), c.warnings().len(), out.display());
        }
        Command::Render { catalog, out, cell_size_m, radius_px } => {
            let session = commands::load_session(&config, &catalog)?;
            let size = cell_size_m.unwrap_or(config.default_cell_size_m);
            let radius = radius_px.unwrap_or(config.default_radius_px);
            let n = commands::render(&session, size, radius, &out)?;
            println!("rendered {n} glyphs at {size} m into {}", out.display());
        }
        Command::Serve { catalog, listen } => {
            let session = Arc::new(commands::load_session(&config, &catalog)?);
            let addr = listen.unwrap_or_else(|| config.listen.clone());
            serve(session, &addr)?;
        }
    }
    Ok(())
}

fn serve(session: Arc<vinewatch_service::ApiSession>, addr: &str) -> anyhow::Result<()> {
    let rt = tokio::runtime::Runtime::new().context("starting runtime")?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, router(session))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .context("server error")
    })
}
