use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use relay_core::cost::CostKind;
use relay_core::geometry::Point2;
use relay_core::harness::config::{Config, ConfigError, Scenario};
use relay_core::harness::maps::{emit_power_capacity_maps, MapsError};
use relay_core::harness::output::{self, Artifact, RunError};
use relay_core::harness::study::{
    build_study_table, run_cluster_study, run_single_user_study, StudyError,
};
use relay_core::harness::verify::{run_verify, VerifyPlan};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "relay",
    version,
    about = "Aerial relay placement in urban maps"
)]
struct Cli {
    /// TOML configuration; the built-in reference setup when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `scenario.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; all cores when omitted.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the map and write it as text and SVG.
    Map,
    /// Build the elevation-angle LOS probability table.
    Lostable,
    /// Run the placement search for one user.
    Search {
        /// User position `x,y`; a seeded street point when omitted.
        #[arg(long, value_parser = parse_point)]
        user: Option<Point2>,
        #[arg(long, value_enum, default_value_t = CostArg::Df)]
        cost: CostArg,
    },
    /// Monte Carlo studies.
    Study {
        #[command(subcommand)]
        kind: StudyKind,
    },
    /// Received-power and capacity maps over UAV positions.
    Maps {
        #[arg(long, value_parser = parse_point)]
        user: Option<Point2>,
    },
    /// Run the property suites.
    Verify,
}

#[derive(Subcommand)]
enum StudyKind {
    Single,
    Cluster,
}

#[derive(Clone, Copy, ValueEnum)]
enum CostArg {
    Af,
    Df,
}

fn parse_point(s: &str) -> Result<Point2, String> {
    let (x, y) = s.split_once(',').ok_or("expected x,y")?;
    let p = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    Ok(Point2::new(p(x)?, p(y)?))
}

enum Failure {
    Validation {
        key: Option<String>,
        message: String,
    },
    Runtime(String),
}

impl Failure {
    fn runtime(e: impl std::fmt::Display) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        let key = match &e {
            ConfigError::Invalid { key, .. } => Some(key.clone()),
            _ => None,
        };
        Failure::Validation {
            key,
            message: e.to_string(),
        }
    }
}

impl From<StudyError> for Failure {
    fn from(e: StudyError) -> Self {
        match e {
            StudyError::Config(c) => c.into(),
            other => Failure::runtime(other),
        }
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Config(c) => c.into(),
            other => Failure::runtime(other),
        }
    }
}

impl From<MapsError> for Failure {
    fn from(e: MapsError) -> Self {
        match e {
            MapsError::Config(c) => c.into(),
            other => Failure::runtime(other),
        }
    }
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<Config, ConfigError> {
    let mut cfg = match path {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = seed {
        cfg.scenario.seed = s;
    }
    Ok(cfg)
}

fn emit(dir: &Path, artifacts: &[Artifact]) -> Result<(), Failure> {
    for p in output::write_all(dir, artifacts)
        .map_err(|e| Failure::runtime(format!("{}: {e}", dir.display())))?
    {
        println!("{}", p.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = load_config(cli.config.as_deref(), cli.seed)?;
    let sc = Scenario::build(cfg)?;
    let out = cli.out.as_path();
    match cli.command {
        Command::Map => emit(out, &output::map_artifacts(&sc)),
        Command::Lostable => {
            let table = build_study_table(&sc).map_err(Failure::runtime)?;
            emit(out, &output::lostable_artifacts(&table))
        }
        Command::Search { user, cost } => {
            let kind = match cost {
                CostArg::Af => CostKind::AfOutage,
                CostArg::Df => CostKind::DfRate,
            };
            let user = output::resolve_user(&sc, user);
            let (summary, outcome) = output::run_search(&sc, user, kind)?;
            emit(out, &output::search_artifacts(&sc, &summary, &outcome))?;
            info!(
                "f_min {} at ({}, {})",
                summary.f_min, summary.placement.position.x, summary.placement.position.y
            );
            if !summary.lengths.within_bound {
                return Err(Failure::runtime(format!(
                    "trajectory length {} exceeds the bound {}",
                    summary.lengths.total, summary.lengths.bound
                )));
            }
            Ok(())
        }
        Command::Study { kind } => {
            info!("building LOS table");
            let table = build_study_table(&sc).map_err(Failure::runtime)?;
            let mut files = output::lostable_artifacts(&table);
            match kind {
                StudyKind::Single => {
                    info!("single-user study, {} users", sc.config.study.users);
                    let report = run_single_user_study(&sc, &table)?;
                    files.extend(output::single_study_artifacts(&report));
                    emit(out, &files)?;
                    report.check_lengths()?;
                }
                StudyKind::Cluster => {
                    info!("cluster study, {} clusters", sc.config.study.clusters);
                    let report = run_cluster_study(&sc, &table)?;
                    files.extend(output::cluster_study_artifacts(&report));
                    emit(out, &files)?;
                    report.check_lengths()?;
                }
            }
            Ok(())
        }
        Command::Maps { user } => {
            let user = output::resolve_user(
                &sc,
                user.or(sc.config.maps.user.map(|[x, y]| Point2::new(x, y))),
            );
            let m = emit_power_capacity_maps(&sc, user, sc.config.maps.overlay)?;
            emit(out, &output::maps_artifacts(&sc, &m))
        }
        Command::Verify => {
            let report = run_verify(&sc.config, &VerifyPlan::default())?;
            emit(out, &output::verify_artifacts(&report))?;
            for c in &report.checks {
                info!(
                    "{} {} ({} checked) {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.checked,
                    c.detail
                );
            }
            let failed: Vec<&str> = report
                .checks
                .iter()
                .filter(|c| !c.passed)
                .map(|c| c.name)
                .collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Failure::runtime(format!(
                    "failed checks: {}",
                    failed.join(", ")
                )))
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            eprintln!(
                "{}",
                json!({"error": "validation", "key": null, "message": e.kind().to_string()})
            );
            return ExitCode::from(1);
        }
    };
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("{}", json!({"error": "runtime", "message": e.to_string()}));
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation { key, message }) => {
            eprintln!(
                "{}",
                json!({"error": "validation", "key": key, "message": message})
            );
            ExitCode::from(1)
        }
        Err(Failure::Runtime(message)) => {
            eprintln!("{}", json!({"error": "runtime", "message": message}));
            ExitCode::from(2)
        }
    }
}
