//! Command implementations behind the `cbrne` binary.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use cbrne_core::geo::{discretize_region, project, GeoPoint, GridSpec};
use cbrne_core::mission::{Mission, MissionError};
use cbrne_core::planner::{agents_from_list, plan_routes, route_metrics, AgentId, RouteMetrics, RoutePlan};
use cbrne_core::protocol::canonical::{to_canonical, to_canonical_line};
use cbrne_core::protocol::messages::{MissionStatus, MissionSummary};
use cbrne_core::retrieval::{Index, RankedDocument};
use cbrne_core::scenario::ScenarioFile;
use cbrne_hub::{Hub, HubConfig, HubError};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

pub const EVENTS_FILE: &str = "events.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_ABORTED: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "cbrne", version, about = "CBRNE scene-assessment simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario headless and write its event log and summary.
    Run(RunArgs),
    /// Discretize a region and plan routes without simulating.
    Plan(PlanArgs),
    /// Serve the HTTP hub until interrupted.
    Serve(ServeArgs),
    /// Inspect a corpus and optionally rank it against a query.
    Index(IndexArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Overrides the scenario's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Tick limit; the mission aborts when it is reached.
    #[arg(long)]
    pub ticks: Option<u64>,
    /// Output directory for the event log and summary.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the scenario's corpus directory.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Print the summary as JSON on stdout.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct PlanArgs {
    /// Four corners as `lat lon` pairs, in order around the rectangle.
    #[arg(long, num_args = 8, value_names = ["LAT", "LON"], allow_negative_numbers = true)]
    pub corners: Vec<f64>,
    #[arg(long)]
    pub spacing: f64,
    /// `id=LAT,LON` entries separated by `;`.
    #[arg(long)]
    pub agents: String,
    #[arg(long, default_value_t = 0.0)]
    pub altitude: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    /// TOML config file; flags and environment variables override it.
    #[arg(long, env = "CBRNE_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, env = "CBRNE_PORT")]
    pub port: Option<u16>,
    #[arg(long, env = "CBRNE_DATA_DIR")]
    pub data_dir: Option<PathBuf>,
    #[arg(long, env = "CBRNE_CORPUS_DIR")]
    pub corpus: Option<PathBuf>,
    #[arg(long, env = "CBRNE_SCENARIOS_DIR")]
    pub scenarios: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct IndexArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub query: Option<String>,
    #[arg(long, default_value_t = 5)]
    pub limit: usize,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Scenario(#[from] cbrne_core::scenario::ScenarioError),
    #[error("{0}")]
    Corpus(#[from] cbrne_core::retrieval::RetrievalError),
    #[error("{0}")]
    Mission(#[from] MissionError),
    #[error("{0}")]
    Hub(#[from] HubError),
    #[error("{0}")]
    Invalid(String),
    #[error("writing {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// What a headless run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: MissionSummary,
    pub events_path: PathBuf,
    pub summary_path: PathBuf,
}

impl RunOutcome {
    pub fn exit_code(&self) -> u8 {
        match self.summary.status {
            MissionStatus::Complete => EXIT_OK,
            _ => EXIT_ABORTED,
        }
    }
}

/// The id a scenario file's missions get: its file stem.
pub fn scenario_name(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("mission").to_owned()
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

pub fn cmd_run(args: &RunArgs) -> Result<RunOutcome, CliError> {
    let scenario = ScenarioFile::load(&args.scenario)?;
    let index = match &args.corpus {
        Some(dir) => Index::load_dir(dir)?,
        None => scenario.load_index(None)?,
    };
    let name = scenario_name(&args.scenario);
    let request = scenario.mission_request(&name, args.seed, args.ticks);
    let mut mission = Mission::create(name, request, Arc::new(scenario), Arc::new(index))?;
    mission.run_to_end()?;

    fs::create_dir_all(&args.out).map_err(|source| CliError::Io { path: args.out.display().to_string(), source })?;
    let events_path = args.out.join(EVENTS_FILE);
    let summary_path = args.out.join(SUMMARY_FILE);
    let summary = mission.summary();
    write(&events_path, &mission.log().to_jsonl())?;
    write(&summary_path, &to_canonical_line(&summary))?;
    Ok(RunOutcome { summary, events_path, summary_path })
}

#[derive(Debug, Clone, Serialize)]
pub struct PlanOutput {
    pub grid: GridSpec,
    pub plan: RoutePlan,
    pub metrics: RouteMetrics,
}

/// Parses `id=LAT,LON;id=LAT,LON`.
pub fn parse_agents(spec: &str) -> Result<Vec<(AgentId, GeoPoint)>, CliError> {
    spec.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|entry| {
            let bad = || CliError::Invalid(format!("agent entry {entry:?} is not id=LAT,LON"));
            let (id, pos) = entry.split_once('=').ok_or_else(bad)?;
            let (lat, lon) = pos.split_once(',').ok_or_else(bad)?;
            let lat: f64 = lat.trim().parse().map_err(|_| bad())?;
            let lon: f64 = lon.trim().parse().map_err(|_| bad())?;
            Ok((AgentId::new(id.trim()), GeoPoint::new(lat, lon, 0.0)))
        })
        .collect()
}

pub fn cmd_plan(args: &PlanArgs) -> Result<PlanOutput, CliError> {
    if args.corners.len() != 8 {
        return Err(CliError::Invalid(format!("--corners needs 8 numbers, got {}", args.corners.len())));
    }
    let c = &args.corners;
    let corners = [0, 2, 4, 6].map(|i| GeoPoint::new(c[i], c[i + 1], 0.0));
    let invalid = |e: &dyn std::fmt::Display| CliError::Invalid(e.to_string());
    for p in &corners {
        p.validate().map_err(|e| invalid(&e))?;
    }
    let grid = discretize_region(&corners, args.spacing, args.altitude).map_err(|e| invalid(&e))?;
    let origin = *grid.origin();
    let mut starts = Vec::new();
    for (id, p) in parse_agents(&args.agents)? {
        p.validate().map_err(|e| invalid(&e))?;
        starts.push((id, project(&origin, &p).map_err(|e| invalid(&e))?));
    }
    let agents = agents_from_list(starts).map_err(|e| invalid(&e))?;
    let points = grid.local_points();
    let plan = plan_routes(&points, &agents).map_err(|e| invalid(&e))?;
    let metrics = route_metrics(&plan, &points).map_err(|e| invalid(&e))?;
    Ok(PlanOutput { grid, plan, metrics })
}

/// Resolves file, environment and flag settings into a hub config.
pub fn serve_config(args: &ServeArgs) -> Result<HubConfig, CliError> {
    let mut config = match &args.config {
        Some(path) => HubConfig::from_file(path)?,
        None => HubConfig::default(),
    };
    if let Some(port) = args.port {
        config.port = port;
    }
    if let Some(dir) = &args.data_dir {
        config.data_dir = dir.clone();
    }
    if let Some(dir) = &args.corpus {
        config.corpus_dir = Some(dir.clone());
    }
    if let Some(dir) = &args.scenarios {
        config.scenarios_dir = dir.clone();
    }
    Ok(config)
}

pub fn cmd_serve(args: &ServeArgs) -> Result<(), CliError> {
    let config = serve_config(args)?;
    if !config.scenarios_dir.is_dir() {
        return Err(CliError::Invalid(format!("scenario directory {} does not exist", config.scenarios_dir.display())));
    }
    let runtime = tokio::runtime::Runtime::new().map_err(|source| CliError::Io { path: "runtime".into(), source })?;
    runtime.block_on(async {
        let port = config.port;
        let hub = Arc::new(Hub::open(config)?);
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        cbrne_hub::serve(hub, port, shutdown).await
    })?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct IndexReport {
    pub documents: usize,
    pub vocabulary: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ranking: Option<Vec<RankedDocument>>,
}

pub fn cmd_index(args: &IndexArgs) -> Result<IndexReport, CliError> {
    let index = Index::load_dir(&args.corpus)?;
    let ranking = args.query.as_ref().map(|q| {
        let mut terms = std::collections::BTreeMap::new();
        for t in index.analyzer().tokenize(q) {
            *terms.entry(t).or_insert(0) += 1;
        }
        index.rank_terms(&terms, args.limit)
    });
    Ok(IndexReport { documents: index.n_docs(), vocabulary: index.vocabulary().len(), ranking })
}

/// Prints to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

/// Runs a parsed command line and returns the process exit code.
pub fn execute(cli: Cli) -> u8 {
    let result = match cli.command {
        Command::Run(args) => cmd_run(&args).map(|outcome| {
            if args.json {
                emit(&to_canonical(&outcome.summary));
            } else {
                let s = &outcome.summary;
                emit(&format!(
                    "{} {}: visited {}/{} in {} ticks, argmax {}, top document {}",
                    s.mission_id,
                    s.status.as_str(),
                    s.visited,
                    s.grid_size,
                    s.makespan_ticks.map_or("-".into(), |t| t.to_string()),
                    s.argmax_category,
                    s.top_documents.first().map_or("-", |d| d.doc_id.as_str()),
                ));
                emit(&format!("wrote {} and {}", outcome.events_path.display(), outcome.summary_path.display()));
            }
            outcome.exit_code()
        }),
        Command::Plan(args) => cmd_plan(&args).map(|out| {
            emit(&serde_json::to_string_pretty(&out).expect("plan serializes"));
            EXIT_OK
        }),
        Command::Serve(args) => {
            tracing_subscriber::fmt().with_writer(std::io::stderr).init();
            cmd_serve(&args).map(|()| EXIT_OK)
        }
        Command::Index(args) => cmd_index(&args).map(|report| {
            emit(&serde_json::to_string_pretty(&report).expect("report serializes"));
            EXIT_OK
        }),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        EXIT_FAILURE
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn agents_parse_with_whitespace_and_trailing_separator() {
        let agents = parse_agents(" rav-1 = 53.27, -9.05 ;rav-2=53.28,-9.04;").unwrap();
        assert_eq!(agents.len(), 2);
        assert_eq!(agents[0], (AgentId::new("rav-1"), GeoPoint::new(53.27, -9.05, 0.0)));
        assert_eq!(agents[1].0, AgentId::new("rav-2"));
    }

    #[test]
    fn malformed_agents_are_rejected() {
        for spec in ["rav-1", "rav-1=53.2", "rav-1=north,-9", "=,"] {
            assert!(matches!(parse_agents(spec), Err(CliError::Invalid(_))), "{spec}");
        }
    }

    #[test]
    fn mission_id_is_the_file_stem() {
        assert_eq!(scenario_name(Path::new("scenarios/train_derailment.json")), "train_derailment");
    }

    #[test]
    fn cli_parses_plan_corners_with_negative_longitudes() {
        let cli = Cli::try_parse_from([
            "cbrne", "plan", "--corners", "1", "-2", "1", "-1", "2", "-1", "2", "-2", "--spacing", "5", "--agents", "a=1,-2",
        ])
        .unwrap();
        let Command::Plan(args) = cli.command else { panic!("not a plan command") };
        assert_eq!(args.corners, vec![1.0, -2.0, 1.0, -1.0, 2.0, -1.0, 2.0, -2.0]);
    }
}
