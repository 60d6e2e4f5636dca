//! Named output files for each command, and writing them into a directory.

use std::io;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::baselines::LosProbabilityTable;
use crate::cost::CostKind;
use crate::geometry::Point2;
use crate::harness::config::{ConfigError, Scenario};
use crate::harness::maps::PowerCapacityMap;
use crate::harness::study::{search_with, ClusterReport, SingleUserReport};
use crate::harness::svg::Canvas;
use crate::harness::verify::VerifyReport;
use crate::search::{LengthReport, PlacementResult, SearchError, SearchOutcome};

const SVG_WIDTH_PX: f64 = 600.0;
/// Stream of the RNG drawing the user when none is given.
const SEARCH_USER_STREAM: u64 = 7;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

impl Artifact {
    pub fn new(name: &str, contents: String) -> Self {
        Self {
            name: name.to_string(),
            contents,
        }
    }

    pub fn json<T: Serialize>(name: &str, value: &T) -> Self {
        let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
        s.push('\n');
        Self::new(name, s)
    }
}

/// Writes every artifact under `dir`, creating it if needed.
pub fn write_all(dir: &Path, artifacts: &[Artifact]) -> io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    artifacts
        .iter()
        .map(|a| {
            let path = dir.join(&a.name);
            std::fs::write(&path, &a.contents)?;
            Ok(path)
        })
        .collect()
}

pub fn map_artifacts(sc: &Scenario) -> Vec<Artifact> {
    let mut c = Canvas::new(sc.map.extent(), SVG_WIDTH_PX);
    c.buildings(&sc.map);
    c.triangle(sc.bs, 6.0, "#0040ff");
    vec![
        Artifact::new("map.txt", sc.map.to_text()),
        Artifact::new("map.svg", c.finish()),
    ]
}

pub fn lostable_artifacts(table: &LosProbabilityTable) -> Vec<Artifact> {
    vec![Artifact::new("lostable.csv", table.to_csv())]
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchSummary {
    pub cost: CostKind,
    pub user: Point2,
    pub bs: Point2,
    /// Horizontal BS-user distance.
    pub length: f64,
    pub num_segments: usize,
    pub placement: PlacementResult,
    pub f_min: f64,
    pub critical: Vec<Option<f64>>,
    pub lengths: LengthReport,
    pub waypoints: usize,
    pub flat_theta_fallbacks: usize,
    pub corrector_fallbacks: usize,
    pub boundary_refinements: usize,
    pub region_clips: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Search(#[from] SearchError),
}

/// The given user, or a street point drawn from the scenario seed.
pub fn resolve_user(sc: &Scenario, user: Option<Point2>) -> Point2 {
    if let Some(u) = user {
        return u;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sc.config.scenario.seed);
    rng.set_stream(SEARCH_USER_STREAM);
    loop {
        let u = sc.map.sample_street_point(&mut rng);
        if u != sc.bs {
            return u;
        }
    }
}

/// One search with the configured membership mode.
pub fn run_search(
    sc: &Scenario,
    user: Point2,
    kind: CostKind,
) -> Result<(SearchSummary, SearchOutcome), RunError> {
    let problem = sc.problem(user, sc.config.relay_cost(kind)?)?;
    let oracle = sc.oracle();
    let out = search_with(sc, &problem, &oracle, sc.config.scenario.seed)?;
    let summary = SearchSummary {
        cost: kind,
        user,
        bs: sc.bs,
        length: problem.length(),
        num_segments: problem.num_segments(),
        placement: out.placement(&problem, &oracle),
        f_min: out.record.f_min,
        critical: out.critical.clone(),
        lengths: out.lengths.clone(),
        waypoints: out.trajectory.waypoints.len(),
        flat_theta_fallbacks: out.flat_theta_fallbacks,
        corrector_fallbacks: out.corrector_fallbacks,
        boundary_refinements: out.boundary_refinements,
        region_clips: out.region_clips,
    };
    Ok((summary, out))
}

pub fn search_artifacts(
    sc: &Scenario,
    summary: &SearchSummary,
    out: &SearchOutcome,
) -> Vec<Artifact> {
    let mut c = Canvas::new(sc.map.extent(), SVG_WIDTH_PX);
    c.buildings(&sc.map);
    let axis: Vec<Point2> = out
        .trajectory
        .waypoints
        .iter()
        .take_while(|w| w.partition_k == 0)
        .map(|w| w.position)
        .collect();
    c.polyline(&axis, "#00c000", 1.5);
    for b in &out.trajectory.branches {
        let pts: Vec<Point2> = out
            .trajectory
            .branch_waypoints(b)
            .iter()
            .map(|w| w.position)
            .collect();
        c.polyline(&pts, "#00c000", 1.5);
    }
    c.circle(out.record.x_hat, 4.0, "#ffffff");
    c.circle(summary.user, 5.0, "#e00000");
    c.triangle(summary.bs, 6.0, "#0040ff");
    vec![
        Artifact::new("trajectory.csv", out.trajectory.to_csv()),
        Artifact::json("result.json", summary),
        Artifact::new("trajectory.svg", c.finish()),
    ]
}

pub fn single_study_artifacts(report: &SingleUserReport) -> Vec<Artifact> {
    vec![
        Artifact::new("results.csv", report.results_csv()),
        Artifact::new("cdf.csv", report.cdf_csv()),
        Artifact::new("bars.csv", report.bars_csv()),
        Artifact::json("summary.json", &report.summary),
    ]
}

#[derive(Serialize)]
struct ClusterSummary<'a> {
    radii: &'a [crate::harness::study::RadiusSummary],
    trials: usize,
    length_violations: usize,
}

pub fn cluster_study_artifacts(report: &ClusterReport) -> Vec<Artifact> {
    let summary = ClusterSummary {
        radii: &report.radii,
        trials: report.trials.len(),
        length_violations: report.length_violations,
    };
    vec![
        Artifact::new("cluster_results.csv", report.results_csv()),
        Artifact::new("cluster_bars.csv", report.bars_csv()),
        Artifact::json("cluster_summary.json", &summary),
    ]
}

pub fn maps_artifacts(sc: &Scenario, m: &PowerCapacityMap) -> Vec<Artifact> {
    let e = sc.map.extent();
    let mut out = vec![
        Artifact::new("power_capacity.csv", m.to_csv()),
        Artifact::new("power_map.svg", m.power_svg(e)),
        Artifact::new("capacity_map.svg", m.capacity_svg(e)),
    ];
    if let Some(p) = &m.placement {
        out.push(Artifact::json("map_placement.json", p));
    }
    out
}

pub fn verify_artifacts(report: &VerifyReport) -> Vec<Artifact> {
    vec![Artifact::json("verify.json", report)]
}
