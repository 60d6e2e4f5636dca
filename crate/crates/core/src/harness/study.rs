//! Single-user Monte Carlo study and the clustered-users radius sweep.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::baselines::{
    bs_user_segment, build_los_table, classify_users, direct_link_eval, exhaustive_from_grid,
    probabilistic_cluster_position, probabilistic_placement, simple_search_placement,
    BaselineError, DirectLink, GridSegments, LosProbabilityTable, UserClass,
};
use crate::cost::{sum_rate, ClusterOracle, CostKind, UserCluster};
use crate::geometry::Point2;
use crate::harness::config::{ConfigError, Membership, Scenario};
use crate::report::{sig6, CsvTable};
use crate::search::{
    length_bound, shaded_contour_search, shaded_contour_search_detected, PlacementResult, Scheme,
    SearchError, SearchOutcome, BRANCH_LENGTH_RATIO,
};
use crate::terrain::SegmentOracle;

/// Street draws allowed when looking for an obstructed cluster centre.
const MAX_CENTER_DRAWS: usize = 100_000;

#[derive(Debug, Error)]
pub enum StudyError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("trial {trial}: {source}")]
    Search { trial: usize, source: SearchError },
    #[error("trial {trial}: {source}")]
    Baseline { trial: usize, source: BaselineError },
    #[error("{0}")]
    Sampling(String),
    #[error("{count} proposed trajectories exceed the length bound")]
    LengthBound { count: usize },
}

/// Per-trial RNG: master seed xor trial index.
pub fn trial_rng(master: u64, trial: usize, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master ^ trial as u64);
    rng.set_stream(stream);
    rng
}

const USER_STREAM: u64 = 0;
const CLUSTER_STREAM: u64 = 1;
const LOS_TABLE_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

pub fn los_table_seed(master: u64) -> u64 {
    master ^ LOS_TABLE_SALT
}

pub fn build_study_table(sc: &Scenario) -> Result<LosProbabilityTable, BaselineError> {
    let st = &sc.config.study;
    build_los_table(
        &sc.map,
        st.los_table_users,
        st.los_table_samples,
        &sc.heights,
        los_table_seed(sc.config.scenario.seed),
    )
}

/// One scheme's placements for one user: DF for throughput, AF for outage.
#[derive(Debug, Clone, Serialize)]
pub struct SchemeOutcome {
    pub scheme: Scheme,
    pub df: PlacementResult,
    pub af: PlacementResult,
    /// AF outage at the AF placement over the direct-link outage.
    pub outage_ratio: f64,
    pub length: Option<LengthVerdict>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LengthVerdict {
    pub total: f64,
    pub bound: f64,
    pub within_bound: bool,
    pub max_branch_ratio: f64,
}

impl LengthVerdict {
    fn worst(a: &SearchOutcome, b: &SearchOutcome) -> Self {
        let (la, lb) = (&a.lengths, &b.lengths);
        Self {
            total: la.total.max(lb.total),
            bound: la.bound,
            within_bound: la.within_bound && lb.within_bound,
            max_branch_ratio: la.max_branch_ratio.max(lb.max_branch_ratio),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct UserTrial {
    pub trial: usize,
    pub user: Point2,
    pub direct: DirectLink,
    pub class: UserClass,
    pub schemes: Vec<SchemeOutcome>,
}

impl UserTrial {
    pub fn scheme(&self, s: Scheme) -> &SchemeOutcome {
        self.schemes
            .iter()
            .find(|o| o.scheme == s)
            .expect("every trial runs every scheme")
    }
}

pub fn search_with<O: SegmentOracle + ?Sized>(
    sc: &Scenario,
    problem: &crate::cost::RelayProblem,
    oracle: &O,
    seed: u64,
) -> Result<SearchOutcome, SearchError> {
    let params = sc.config.search.params();
    match sc.config.search.membership {
        Membership::Oracle => shaded_contour_search(problem, oracle, &params),
        Membership::Detector => {
            let detector = sc.detector(oracle, seed);
            shaded_contour_search_detected(problem, oracle, &detector, &params)
        }
    }
}

/// Runs every scheme for the user of trial `trial`.
pub fn run_user_trial(
    sc: &Scenario,
    table: &LosProbabilityTable,
    trial: usize,
) -> Result<UserTrial, StudyError> {
    let master = sc.config.scenario.seed;
    let mut rng = trial_rng(master, trial, USER_STREAM);
    let mut user = sc.map.sample_street_point(&mut rng);
    while user == sc.bs {
        user = sc.map.sample_street_point(&mut rng);
    }
    let oracle = sc.oracle();
    let df = sc.problem(user, sc.config.relay_cost(CostKind::DfRate)?)?;
    let af = sc.problem(user, sc.config.relay_cost(CostKind::AfOutage)?)?;
    let direct_seg = bs_user_segment(&sc.map, user, sc.bs, &sc.heights, sc.num_segments());
    let direct = direct_link_eval(user, sc.bs, direct_seg, &sc.heights, sc.model(), df.cost());
    let ratio = |r: &PlacementResult| r.outage / direct.outage;
    let search_err = |source| StudyError::Search { trial, source };
    let base_err = |source| StudyError::Baseline { trial, source };

    let search_seed = master ^ trial as u64;
    let p_df = search_with(sc, &df, &oracle, search_seed).map_err(search_err)?;
    let p_af = search_with(sc, &af, &oracle, search_seed).map_err(search_err)?;
    let proposed_df = p_df.placement(&df, &oracle);
    let proposed_af = p_af.placement(&af, &oracle);
    let proposed = SchemeOutcome {
        scheme: Scheme::Proposed,
        df: proposed_df,
        af: proposed_af,
        outage_ratio: ratio(&proposed_af),
        length: Some(LengthVerdict::worst(&p_df, &p_af)),
    };

    let pcfg = sc.config.probabilistic();
    let prob_df = probabilistic_placement(&df, &oracle, table, &pcfg).map_err(base_err)?;
    let prob_af = probabilistic_placement(&af, &oracle, table, &pcfg).map_err(base_err)?;

    let delta = sc.config.search.delta;
    let simple_df = simple_search_placement(&df, &oracle, delta).map_err(base_err)?;
    let simple_af = simple_search_placement(&af, &oracle, delta).map_err(base_err)?;

    let grid = GridSegments::evaluate(&df, &oracle, sc.config.study.exhaustive_spacing)
        .map_err(base_err)?;
    let ex_df = exhaustive_from_grid(&df, &oracle, &grid).map_err(base_err)?;
    let ex_af = exhaustive_from_grid(&af, &oracle, &grid).map_err(base_err)?;

    let direct_row = |cost: &crate::cost::RelayProblem| PlacementResult {
        scheme: Scheme::Direct,
        position: sc.bs,
        segment: direct_seg,
        cost: match cost.cost().kind {
            CostKind::AfOutage => direct.outage,
            CostKind::DfRate => -direct.throughput,
        },
        throughput: direct.throughput,
        outage: direct.outage,
        trajectory_length: None,
    };

    let plain = |scheme, d: PlacementResult, a: PlacementResult| SchemeOutcome {
        scheme,
        df: d,
        af: a,
        outage_ratio: ratio(&a),
        length: None,
    };
    let schemes = vec![
        proposed,
        plain(Scheme::Probabilistic, prob_df, prob_af),
        plain(Scheme::SimpleSearch, simple_df, simple_af),
        plain(Scheme::Exhaustive, ex_df, ex_af),
        SchemeOutcome {
            scheme: Scheme::Direct,
            df: direct_row(&df),
            af: direct_row(&af),
            outage_ratio: 1.0,
            length: None,
        },
    ];
    Ok(UserTrial {
        trial,
        user,
        direct,
        class: UserClass::Middle,
        schemes,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SchemeSummary {
    pub scheme: Scheme,
    pub mean_throughput: f64,
    pub mean_throughput_cell_edge: f64,
    pub mean_throughput_cell_center: f64,
    pub mean_outage_ratio: f64,
    pub mean_outage_ratio_cell_edge: f64,
    pub mean_outage_ratio_cell_center: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SingleUserSummary {
    pub users: usize,
    pub seed: u64,
    pub direct_los_fraction: f64,
    pub schemes: Vec<SchemeSummary>,
    /// Mean proposed throughput over mean probabilistic-baseline throughput.
    pub gain_over_probabilistic: f64,
    /// 95th percentile of |proposed - exhaustive| DF throughput.
    pub exhaustive_gap_p95: f64,
    pub length_violations: usize,
    pub branch_ratio_violations: usize,
    pub max_branch_ratio: f64,
    /// Users whose proposed AF outage ratio exceeds 1.
    pub outage_ratio_above_one: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SingleUserReport {
    pub trials: Vec<UserTrial>,
    pub summary: SingleUserSummary,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Nearest-rank percentile `q` in `[0, 1]`.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

pub fn run_single_user_study(
    sc: &Scenario,
    table: &LosProbabilityTable,
) -> Result<SingleUserReport, StudyError> {
    let n = sc.config.study.users;
    let mut trials: Vec<UserTrial> = (0..n)
        .into_par_iter()
        .map(|i| run_user_trial(sc, table, i))
        .collect::<Result<_, _>>()?;
    let direct: Vec<f64> = trials.iter().map(|t| t.direct.throughput).collect();
    for (t, c) in trials
        .iter_mut()
        .zip(classify_users(&direct, sc.config.study.category_fraction))
    {
        t.class = c;
    }
    let summary = summarize(&trials, sc.config.scenario.seed);
    Ok(SingleUserReport { trials, summary })
}

fn summarize(trials: &[UserTrial], seed: u64) -> SingleUserSummary {
    let schemes: Vec<SchemeSummary> = Scheme::ALL
        .iter()
        .map(|&s| {
            let of = |c: Option<UserClass>| {
                trials
                    .iter()
                    .filter(move |t| c.is_none_or(|c| t.class == c))
            };
            SchemeSummary {
                scheme: s,
                mean_throughput: mean(of(None).map(|t| t.scheme(s).df.throughput)),
                mean_throughput_cell_edge: mean(
                    of(Some(UserClass::CellEdge)).map(|t| t.scheme(s).df.throughput),
                ),
                mean_throughput_cell_center: mean(
                    of(Some(UserClass::CellCenter)).map(|t| t.scheme(s).df.throughput),
                ),
                mean_outage_ratio: mean(of(None).map(|t| t.scheme(s).outage_ratio)),
                mean_outage_ratio_cell_edge: mean(
                    of(Some(UserClass::CellEdge)).map(|t| t.scheme(s).outage_ratio),
                ),
                mean_outage_ratio_cell_center: mean(
                    of(Some(UserClass::CellCenter)).map(|t| t.scheme(s).outage_ratio),
                ),
            }
        })
        .collect();
    let get = |s: Scheme| {
        schemes
            .iter()
            .find(|x| x.scheme == s)
            .map(|x| x.mean_throughput)
            .unwrap_or(f64::NAN)
    };
    let gaps: Vec<f64> = trials
        .iter()
        .map(|t| {
            (t.scheme(Scheme::Proposed).df.throughput - t.scheme(Scheme::Exhaustive).df.throughput)
                .abs()
        })
        .collect();
    let verdicts: Vec<LengthVerdict> = trials
        .iter()
        .filter_map(|t| t.scheme(Scheme::Proposed).length)
        .collect();
    SingleUserSummary {
        users: trials.len(),
        seed,
        direct_los_fraction: mean(trials.iter().map(|t| {
            if t.direct.segment.get() == 1 {
                1.0
            } else {
                0.0
            }
        })),
        gain_over_probabilistic: get(Scheme::Proposed) / get(Scheme::Probabilistic),
        exhaustive_gap_p95: percentile(&gaps, 0.95),
        length_violations: verdicts.iter().filter(|v| !v.within_bound).count(),
        branch_ratio_violations: verdicts
            .iter()
            .filter(|v| v.max_branch_ratio > BRANCH_LENGTH_RATIO)
            .count(),
        max_branch_ratio: verdicts
            .iter()
            .map(|v| v.max_branch_ratio)
            .fold(0.0, f64::max),
        outage_ratio_above_one: trials
            .iter()
            .filter(|t| t.scheme(Scheme::Proposed).outage_ratio > 1.0)
            .count(),
        schemes,
    }
}

impl SingleUserReport {
    pub fn results_csv(&self) -> String {
        let mut t = CsvTable::new(&[
            "trial",
            "scheme",
            "user_x",
            "user_y",
            "class",
            "df_x",
            "df_y",
            "df_segment",
            "throughput",
            "af_x",
            "af_y",
            "af_segment",
            "outage",
            "outage_ratio",
            "trajectory_length",
            "length_bound",
            "within_bound",
        ]);
        for tr in &self.trials {
            for o in &tr.schemes {
                let (len, bound, ok) = match o.length {
                    Some(v) => (sig6(v.total), sig6(v.bound), v.within_bound.to_string()),
                    None => (String::new(), String::new(), String::new()),
                };
                t.push(vec![
                    tr.trial.to_string(),
                    o.scheme.as_str().to_string(),
                    sig6(tr.user.x),
                    sig6(tr.user.y),
                    tr.class.as_str().to_string(),
                    sig6(o.df.position.x),
                    sig6(o.df.position.y),
                    o.df.segment.to_string(),
                    sig6(o.df.throughput),
                    sig6(o.af.position.x),
                    sig6(o.af.position.y),
                    o.af.segment.to_string(),
                    sig6(o.af.outage),
                    sig6(o.outage_ratio),
                    len,
                    bound,
                    ok,
                ]);
            }
        }
        t.to_csv()
    }

    /// Empirical CDF of DF throughput per scheme.
    pub fn cdf_csv(&self) -> String {
        let mut t = CsvTable::new(&["scheme", "throughput", "cdf"]);
        for s in Scheme::ALL {
            let mut v: Vec<f64> = self
                .trials
                .iter()
                .map(|tr| tr.scheme(s).df.throughput)
                .collect();
            v.sort_by(f64::total_cmp);
            let n = v.len() as f64;
            for (i, x) in v.iter().enumerate() {
                t.push(vec![
                    s.as_str().to_string(),
                    sig6(*x),
                    sig6((i + 1) as f64 / n),
                ]);
            }
        }
        t.to_csv()
    }

    /// Mean throughput and outage ratio by user class and scheme.
    pub fn bars_csv(&self) -> String {
        let mut t = CsvTable::new(&[
            "category",
            "scheme",
            "users",
            "mean_throughput",
            "mean_outage_ratio",
        ]);
        for (cat, class) in [
            ("all", None),
            ("cell_edge", Some(UserClass::CellEdge)),
            ("cell_center", Some(UserClass::CellCenter)),
        ] {
            let members: Vec<&UserTrial> = self
                .trials
                .iter()
                .filter(|tr| class.is_none_or(|c| tr.class == c))
                .collect();
            for s in Scheme::ALL {
                t.push(vec![
                    cat.to_string(),
                    s.as_str().to_string(),
                    members.len().to_string(),
                    sig6(mean(members.iter().map(|tr| tr.scheme(s).df.throughput))),
                    sig6(mean(members.iter().map(|tr| tr.scheme(s).outage_ratio))),
                ]);
            }
        }
        t.to_csv()
    }

    /// Fails when any proposed trajectory broke the length bound.
    pub fn check_lengths(&self) -> Result<(), StudyError> {
        match self.summary.length_violations {
            0 => Ok(()),
            count => Err(StudyError::LengthBound { count }),
        }
    }
}

/// Obstructed cluster centre and its users for each radius.
#[derive(Debug, Clone, Serialize)]
pub struct ClusterDraw {
    pub index: usize,
    pub center: Point2,
    pub clusters: Vec<UserCluster>,
}

fn draw_users(
    sc: &Scenario,
    center: Point2,
    radius: f64,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Point2> {
    (0..n)
        .map(|_| {
            if radius == 0.0 {
                return center;
            }
            loop {
                let r = radius * rng.random::<f64>().sqrt();
                let a = rng.random_range(0.0..std::f64::consts::TAU);
                let p = center + Point2::new(a.cos(), a.sin()) * r;
                if sc.map.extent().contains(p) && sc.map.is_outdoor(p) {
                    return p;
                }
            }
        })
        .collect()
}

/// Cluster `index`: a street centre without LOS to the BS and, per radius,
/// `cluster_users` street users uniform in the disc around it.
pub fn draw_cluster(sc: &Scenario, index: usize) -> Result<ClusterDraw, StudyError> {
    let st = &sc.config.study;
    let master = sc.config.scenario.seed;
    let mut rng = trial_rng(master, index, CLUSTER_STREAM);
    let center = (0..MAX_CENTER_DRAWS)
        .map(|_| sc.map.sample_street_point(&mut rng))
        .find(|&c| {
            c != sc.bs
                && bs_user_segment(&sc.map, c, sc.bs, &sc.heights, sc.num_segments()).get() > 1
        })
        .ok_or_else(|| StudyError::Sampling("no obstructed street position found".into()))?;
    let clusters = st
        .cluster_radii
        .iter()
        .enumerate()
        .map(|(ri, &r)| {
            let mut urng = trial_rng(master, index, CLUSTER_STREAM + 1 + ri as u64);
            let users = draw_users(sc, center, r, st.cluster_users, &mut urng);
            UserCluster::new(center, r, users).map_err(|e| StudyError::Sampling(e.to_string()))
        })
        .collect::<Result<_, _>>()?;
    Ok(ClusterDraw {
        index,
        center,
        clusters,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusterTrial {
    pub cluster: usize,
    pub radius: f64,
    pub center: Point2,
    pub proposed: Point2,
    pub proposed_rate: f64,
    pub probabilistic: Point2,
    pub probabilistic_rate: f64,
    pub length: LengthVerdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct RadiusSummary {
    pub radius: f64,
    pub clusters: usize,
    pub proposed_mean: f64,
    pub proposed_stderr: f64,
    pub probabilistic_mean: f64,
    pub probabilistic_stderr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusterReport {
    pub trials: Vec<ClusterTrial>,
    pub radii: Vec<RadiusSummary>,
    pub length_violations: usize,
}

fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

pub fn run_cluster_trial(
    sc: &Scenario,
    table: &LosProbabilityTable,
    cluster: &UserCluster,
    index: usize,
) -> Result<ClusterTrial, StudyError> {
    let oracle = sc.oracle();
    let virtual_oracle = ClusterOracle::new(&oracle, cluster);
    let cost = sc.config.relay_cost(CostKind::DfRate)?;
    let problem = sc.problem(cluster.center, cost)?;
    let outcome = search_with(
        sc,
        &problem,
        &virtual_oracle,
        sc.config.scenario.seed ^ index as u64,
    )
    .map_err(|source| StudyError::Search {
        trial: index,
        source,
    })?;
    let proposed = outcome.record.x_hat;
    let probabilistic =
        probabilistic_cluster_position(cluster, &problem, table, &sc.config.probabilistic())
            .map_err(|source| StudyError::Baseline {
                trial: index,
                source,
            })?;
    let rate = |x| sum_rate(cluster, x, &oracle, sc.model(), &sc.heights, sc.bs, &cost);
    Ok(ClusterTrial {
        cluster: index,
        radius: cluster.radius,
        center: cluster.center,
        proposed,
        proposed_rate: rate(proposed),
        probabilistic,
        probabilistic_rate: rate(probabilistic),
        length: LengthVerdict {
            total: outcome.lengths.total,
            bound: length_bound(problem.num_segments(), problem.length()),
            within_bound: outcome.lengths.within_bound,
            max_branch_ratio: outcome.lengths.max_branch_ratio,
        },
    })
}

pub fn run_cluster_study(
    sc: &Scenario,
    table: &LosProbabilityTable,
) -> Result<ClusterReport, StudyError> {
    let st = &sc.config.study;
    let draws: Vec<ClusterDraw> = (0..st.clusters)
        .into_par_iter()
        .map(|c| draw_cluster(sc, c))
        .collect::<Result<_, _>>()?;
    let jobs: Vec<(usize, &UserCluster)> = draws
        .iter()
        .flat_map(|d| d.clusters.iter().map(move |c| (d.index, c)))
        .collect();
    let trials: Vec<ClusterTrial> = jobs
        .par_iter()
        .map(|&(i, c)| run_cluster_trial(sc, table, c, i))
        .collect::<Result<_, _>>()?;
    let radii = st
        .cluster_radii
        .iter()
        .map(|&r| {
            let at: Vec<&ClusterTrial> = trials.iter().filter(|t| t.radius == r).collect();
            let (pm, ps) = mean_stderr(&at.iter().map(|t| t.proposed_rate).collect::<Vec<_>>());
            let (bm, bs) =
                mean_stderr(&at.iter().map(|t| t.probabilistic_rate).collect::<Vec<_>>());
            RadiusSummary {
                radius: r,
                clusters: at.len(),
                proposed_mean: pm,
                proposed_stderr: ps,
                probabilistic_mean: bm,
                probabilistic_stderr: bs,
            }
        })
        .collect();
    let length_violations = trials.iter().filter(|t| !t.length.within_bound).count();
    Ok(ClusterReport {
        trials,
        radii,
        length_violations,
    })
}

impl ClusterReport {
    pub fn results_csv(&self) -> String {
        let mut t = CsvTable::new(&[
            "cluster",
            "radius",
            "center_x",
            "center_y",
            "scheme",
            "x",
            "y",
            "mean_rate",
            "trajectory_length",
            "within_bound",
        ]);
        for tr in &self.trials {
            for (scheme, x, rate, len) in [
                (
                    Scheme::Proposed,
                    tr.proposed,
                    tr.proposed_rate,
                    Some(tr.length),
                ),
                (
                    Scheme::Probabilistic,
                    tr.probabilistic,
                    tr.probabilistic_rate,
                    None,
                ),
            ] {
                t.push(vec![
                    tr.cluster.to_string(),
                    sig6(tr.radius),
                    sig6(tr.center.x),
                    sig6(tr.center.y),
                    scheme.as_str().to_string(),
                    sig6(x.x),
                    sig6(x.y),
                    sig6(rate),
                    len.map(|l| sig6(l.total)).unwrap_or_default(),
                    len.map(|l| l.within_bound.to_string()).unwrap_or_default(),
                ]);
            }
        }
        t.to_csv()
    }

    pub fn bars_csv(&self) -> String {
        let mut t = CsvTable::new(&["radius", "scheme", "clusters", "mean_rate", "stderr"]);
        for r in &self.radii {
            t.push(vec![
                sig6(r.radius),
                Scheme::Proposed.as_str().into(),
                r.clusters.to_string(),
                sig6(r.proposed_mean),
                sig6(r.proposed_stderr),
            ]);
            t.push(vec![
                sig6(r.radius),
                Scheme::Probabilistic.as_str().into(),
                r.clusters.to_string(),
                sig6(r.probabilistic_mean),
                sig6(r.probabilistic_stderr),
            ]);
        }
        t.to_csv()
    }

    pub fn check_lengths(&self) -> Result<(), StudyError> {
        match self.length_violations {
            0 => Ok(()),
            count => Err(StudyError::LengthBound { count }),
        }
    }
}
