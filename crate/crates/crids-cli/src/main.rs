//! Batch front door for the assessment and planning pipeline.
//!
//! Exit statuses: 0 success, 1 I/O or configuration error, 2 planner
//! infeasibility (including a budget below the feasible minimum),
//! 3 zero sites assessed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use crids::config::{RunConfig, DEFAULT_CONFIG_TOML};
use crids::pipeline::{self, PlanOutput, RunManifest};
use crids::{io, Error};

type Result<T> = std::result::Result<T, Error>;

#[derive(Parser)]
#[command(
    name = "crids",
    version,
    about = "Resilience assessment and adaptation planning for on-site wastewater systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score every site and write the per-site report plus run manifest.
    Assess(AssessArgs),
    /// Assess, then assign one adaptation option per site.
    Plan(PlanArgs),
    /// Print threshold statistics and a histogram for a written report.
    Summarize(SummarizeArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Configuration document; entries overlay the built-in defaults.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Sites table: comma-separated text with a header row.
    #[arg(long)]
    sites: PathBuf,

    /// Directory of layer documents (.geojson/.json), named by file stem.
    #[arg(long)]
    layers_dir: Option<PathBuf>,

    /// Per-site elevation samples (id, ground_elevation, groundwater_elevation).
    #[arg(long)]
    elevations: Option<PathBuf>,

    /// Scenario override as key=value; keys: slr, ratio, depth. Repeatable.
    #[arg(long = "scenario-override")]
    scenario_override: Vec<String>,

    /// Worker threads for per-site work (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct AssessArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Report path (default assess_report.csv). The manifest lands
    /// beside it with a .manifest.json extension.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Per-site option costs (id, option, cost), overriding flat costs.
    #[arg(long)]
    costs: Option<PathBuf>,

    /// Plan report path (default plan_report.csv).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SummarizeArgs {
    /// A report written by `assess`.
    report: PathBuf,

    /// Configuration document (sets the summary thresholds).
    #[arg(long)]
    config: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Assess(args) => run_assess(args),
        Command::Plan(args) => run_plan(args),
        Command::Summarize(args) => run_summarize(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                // A budget below the cheapest feasible spend is a
                // planner infeasibility, not an input problem.
                Error::InvalidBudget { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn load_config(common: &CommonArgs) -> Result<(RunConfig, String)> {
    let (mut config, text) = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            (RunConfig::from_str_overlaid(&text)?, text)
        }
        None => (RunConfig::builtin(), DEFAULT_CONFIG_TOML.to_string()),
    };
    for override_text in &common.scenario_override {
        apply_scenario_override(&mut config, override_text)?;
    }
    if let Some(workers) = common.workers {
        config.run.workers = workers;
    }
    config.validate()?;
    Ok((config, text))
}

fn apply_scenario_override(config: &mut RunConfig, text: &str) -> Result<()> {
    let (key, value) = text
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("scenario override '{text}' is not key=value")))?;
    let value: f64 = value.trim().parse().map_err(|_| {
        Error::Config(format!("scenario override '{text}' has a non-numeric value"))
    })?;
    match key.trim() {
        "slr" | "sea_level_rise" => config.scenario.sea_level_rise = value,
        "ratio" | "groundwater_response_ratio" => config.scenario.groundwater_response_ratio = value,
        "depth" | "drainfield_depth" => config.scenario.drainfield_depth = value,
        other => {
            return Err(Error::Config(format!(
                "unknown scenario override key '{other}' (expected slr, ratio, or depth)"
            )))
        }
    }
    Ok(())
}

struct LoadedRun {
    config: RunConfig,
    config_text: String,
    layers: BTreeMap<String, crids::geo::FeatureLayer>,
    elevations: BTreeMap<String, crids::geo::ElevationSample>,
    assessment: pipeline::Assessment,
}

fn load_and_assess(common: &CommonArgs) -> Result<LoadedRun> {
    let (config, config_text) = load_config(common)?;
    let sites = io::load_sites(&common.sites, &config)?;
    let layers = match &common.layers_dir {
        Some(dir) => io::load_layers_dir(dir)?,
        None => BTreeMap::new(),
    };
    let elevations = match &common.elevations {
        Some(path) => io::load_elevations(path)?,
        None => BTreeMap::new(),
    };
    let assessment = pipeline::assess(sites, &layers, &elevations, &config)?;
    for warning in &assessment.warnings {
        eprintln!("warning: {warning}");
    }
    for (site, message) in assessment.failed() {
        eprintln!("site {}: {message}", site.id);
    }
    Ok(LoadedRun {
        config,
        config_text,
        layers,
        elevations,
        assessment,
    })
}

fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

fn run_assess(args: AssessArgs) -> Result<ExitCode> {
    let run = load_and_assess(&args.common)?;
    let out = args.out.unwrap_or_else(|| PathBuf::from("assess_report.csv"));
    pipeline::write_assess_report(&out, &run.assessment)?;
    let manifest = RunManifest::new(
        &run.config_text,
        &run.config,
        &run.assessment,
        &run.layers,
        run.elevations.len(),
    );
    manifest.write(&manifest_path(&out))?;

    let summary = pipeline::summarize(
        &run.assessment.indices(),
        &run.config.run.summary_thresholds,
    );
    print!("{}", pipeline::render_summary(&summary));
    println!("report: {}", out.display());
    if run.assessment.assessed_count() == 0 {
        eprintln!("no sites assessed");
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

fn run_plan(args: PlanArgs) -> Result<ExitCode> {
    let run = load_and_assess(&args.common)?;
    if run.assessment.assessed_count() == 0 {
        eprintln!("no sites assessed");
        return Ok(ExitCode::from(3));
    }
    let cost_overrides = match &args.costs {
        Some(path) => io::load_costs(path)?,
        None => BTreeMap::new(),
    };
    let output = pipeline::plan_adaptation(&run.assessment, &run.config, &cost_overrides)?;
    let out = args.out.unwrap_or_else(|| PathBuf::from("plan_report.csv"));
    pipeline::write_plan_report(&out, &output, &run.config.options)?;
    let manifest = RunManifest::new(
        &run.config_text,
        &run.config,
        &run.assessment,
        &run.layers,
        run.elevations.len(),
    );
    manifest.write(&manifest_path(&out))?;

    match &output {
        PlanOutput::Assignment(plan) => {
            println!("assigned sites: {}", plan.assignments.len());
            println!("total cost: {:.2}", plan.total_cost);
        }
        PlanOutput::Frontier(points) => {
            println!("frontier points: {}", points.len());
        }
    }
    println!("report: {}", out.display());

    let infeasible = output.infeasible_sites();
    if !infeasible.is_empty() {
        eprintln!("infeasible sites ({}):", infeasible.len());
        for id in infeasible {
            eprintln!("  {id}");
        }
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn run_summarize(args: SummarizeArgs) -> Result<ExitCode> {
    let config = match &args.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::builtin(),
    };
    let indices = pipeline::read_report_indices(&args.report)?;
    let summary = pipeline::summarize(&indices, &config.run.summary_thresholds);
    print!("{}", pipeline::render_summary(&summary));
    Ok(ExitCode::SUCCESS)
}
