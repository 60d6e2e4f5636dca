//! Comparison placement schemes: an elevation-angle LOS-probability model,
//! an axis-only search, an exhaustive grid, and the direct BS-user link.

use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::SegmentModel;
use crate::cost::{RelayCost, RelayObjective, RelayProblem, UserCluster};
use crate::geometry::{dist_to_bs, elevation_angle, Heights, Point2, Point3, PolarFrame};
use crate::report::{sig6, CsvTable};
use crate::search::{axis_critical_points, PlacementResult, Scheme};
use crate::terrain::{SegmentId, SegmentOracle, UrbanMap};

pub const LOS_TABLE_BINS: usize = 64;

/// Draws per UAV sample before giving up on landing inside the map.
const MAX_UAV_DRAWS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("{0} must be at least 1")]
    ZeroCount(&'static str),
    #[error("LOS table has no populated bins")]
    EmptyTable,
    #[error("probability {0} outside [0, 1]")]
    Probability(f64),
    #[error("the probabilistic baseline needs exactly 2 segments, got {0}")]
    SegmentCount(usize),
    #[error("grid spacing must be positive, got {0}")]
    Spacing(f64),
    #[error("no candidate positions")]
    NoCandidates,
}

/// Empirical `P{LOS | elevation angle}` over uniform bins on `(0, pi/2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LosProbabilityTable {
    p_los: Vec<Option<f64>>,
    samples: Vec<u64>,
}

impl LosProbabilityTable {
    /// Table from per-bin LOS and total counts; bins with no samples are absent.
    pub fn from_counts(los: &[u64], total: &[u64]) -> Result<Self, BaselineError> {
        if los.is_empty() || los.len() != total.len() {
            return Err(BaselineError::EmptyTable);
        }
        let p_los: Vec<Option<f64>> = los
            .iter()
            .zip(total)
            .map(|(&l, &n)| (n > 0).then(|| l.min(n) as f64 / n as f64))
            .collect();
        if p_los.iter().all(Option::is_none) {
            return Err(BaselineError::EmptyTable);
        }
        Ok(Self {
            p_los,
            samples: total.to_vec(),
        })
    }

    pub fn constant(p: f64) -> Result<Self, BaselineError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(BaselineError::Probability(p));
        }
        Ok(Self {
            p_los: vec![Some(p); LOS_TABLE_BINS],
            samples: vec![0; LOS_TABLE_BINS],
        })
    }

    pub fn bins(&self) -> usize {
        self.p_los.len()
    }

    pub fn bin_width(&self) -> f64 {
        FRAC_PI_2 / self.bins() as f64
    }

    pub fn bin_of(&self, phi: f64) -> usize {
        ((phi / self.bin_width()).floor().max(0.0) as usize).min(self.bins() - 1)
    }

    pub fn bin_probability(&self, bin: usize) -> Option<f64> {
        self.p_los.get(bin).copied().flatten()
    }

    pub fn bin_samples(&self, bin: usize) -> u64 {
        self.samples.get(bin).copied().unwrap_or(0)
    }

    /// `f_LOS(phi)`, linear between populated bin centres and flat beyond the outermost ones.
    pub fn lookup(&self, phi: f64) -> f64 {
        let w = self.bin_width();
        let pos = phi / w - 0.5;
        let below = (0..self.bins())
            .rev()
            .find(|&i| i as f64 <= pos && self.p_los[i].is_some());
        let above = (0..self.bins()).find(|&i| i as f64 >= pos && self.p_los[i].is_some());
        match (below, above) {
            (Some(i), Some(j)) if i == j => self.p_los[i].unwrap_or(0.0),
            (Some(i), Some(j)) => {
                let (a, b) = (self.p_los[i].unwrap_or(0.0), self.p_los[j].unwrap_or(0.0));
                let t = (pos - i as f64) / (j - i) as f64;
                a + t * (b - a)
            }
            (Some(i), None) | (None, Some(i)) => self.p_los[i].unwrap_or(0.0),
            (None, None) => 0.0,
        }
    }

    pub fn to_csv(&self) -> String {
        let w = self.bin_width();
        let mut t = CsvTable::new(&["phi_low_rad", "phi_high_rad", "p_los", "n_samples"]);
        for i in 0..self.bins() {
            t.push(vec![
                sig6(i as f64 * w),
                sig6((i + 1) as f64 * w),
                self.p_los[i].map(sig6).unwrap_or_default(),
                self.samples[i].to_string(),
            ]);
        }
        t.to_csv()
    }
}

/// A UAV position at altitude seen from `user` at uniform elevation and
/// azimuth, redrawn until it lands inside the map.
fn sample_uav<R: Rng + ?Sized>(
    map: &UrbanMap,
    user: Point2,
    heights: &Heights,
    rng: &mut R,
) -> Option<Point2> {
    let extent = map.extent();
    for _ in 0..MAX_UAV_DRAWS {
        let phi = rng.random_range(f64::EPSILON..=FRAC_PI_2);
        let az = rng.random_range(0.0..std::f64::consts::TAU);
        let r = heights.user_gap() / phi.tan();
        let x = user + Point2::new(az.cos(), az.sin()) * r;
        if extent.contains(x) {
            return Some(x);
        }
    }
    None
}

/// LOS counts per elevation bin for one street user.
fn user_counts(
    map: &UrbanMap,
    user: Point2,
    n: usize,
    heights: &Heights,
    rng: &mut ChaCha8Rng,
) -> (Vec<u64>, Vec<u64>) {
    let mut los = vec![0u64; LOS_TABLE_BINS];
    let mut total = vec![0u64; LOS_TABLE_BINS];
    let w = FRAC_PI_2 / LOS_TABLE_BINS as f64;
    for _ in 0..n {
        let Some(x) = sample_uav(map, user, heights, rng) else {
            continue;
        };
        let phi = elevation_angle(x, user, heights);
        let bin = ((phi / w) as usize).min(LOS_TABLE_BINS - 1);
        total[bin] += 1;
        let blocked = map.count_blockers(
            Point3::at_height(user, heights.user),
            Point3::at_height(x, heights.uav),
            1,
        );
        if blocked == 0 {
            los[bin] += 1;
        }
    }
    (los, total)
}

/// The street user and the RNG used for user `i` of a table build.
pub fn los_table_user_stream(map: &UrbanMap, seed: u64, i: usize) -> (Point2, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    let user = map.sample_street_point(&mut rng);
    (user, rng)
}

/// Empirical LOS probability from `n_users` random street users, each seeing
/// `n_uav_samples` random UAV positions.
pub fn build_los_table(
    map: &UrbanMap,
    n_users: usize,
    n_uav_samples: usize,
    heights: &Heights,
    seed: u64,
) -> Result<LosProbabilityTable, BaselineError> {
    if n_users == 0 {
        return Err(BaselineError::ZeroCount("n_users"));
    }
    if n_uav_samples == 0 {
        return Err(BaselineError::ZeroCount("n_uav_samples"));
    }
    let counts: Vec<(Vec<u64>, Vec<u64>)> = (0..n_users)
        .into_par_iter()
        .map(|i| {
            let (user, mut rng) = los_table_user_stream(map, seed, i);
            user_counts(map, user, n_uav_samples, heights, &mut rng)
        })
        .collect();
    let mut los = vec![0u64; LOS_TABLE_BINS];
    let mut total = vec![0u64; LOS_TABLE_BINS];
    for (l, t) in &counts {
        for b in 0..LOS_TABLE_BINS {
            los[b] += l[b];
            total[b] += t[b];
        }
    }
    LosProbabilityTable::from_counts(&los, &total)
}

/// Distance used in the averaged-gain model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainDistance {
    /// Horizontal distance to the user.
    #[default]
    Horizontal,
    /// 3D UAV-user distance.
    ThreeD,
}

/// UAV-user gain averaged over the LOS probability at the UAV's elevation angle.
pub fn averaged_user_gain(
    x: Point2,
    user: Point2,
    model: &SegmentModel,
    heights: &Heights,
    table: &LosProbabilityTable,
    distance: GainDistance,
) -> f64 {
    let r = (x - user).norm();
    let d = match distance {
        GainDistance::Horizontal => r,
        GainDistance::ThreeD => r.hypot(heights.user_gap()),
    };
    let p = table.lookup(elevation_angle(x, user, heights));
    let los = model.segment(SegmentId::LOS).gain(d);
    let nlos = model.segment(SegmentId::clamped(2, 2)).gain(d);
    p * los + (1.0 - p) * nlos
}

/// Grid of spacing `spacing` aligned with the BS-user axis, anchored at the
/// user and restricted to the half-disc with the BS-user segment as diameter.
pub fn search_grid(frame: &PolarFrame, spacing: f64) -> Result<Vec<Point2>, BaselineError> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(BaselineError::Spacing(spacing));
    }
    let l = frame.length();
    let half = l / 2.0;
    let e = frame.axis();
    let n = Point2::new(-e.y, e.x);
    let steps = (l / spacing).floor() as i64;
    let side = (half / spacing).floor() as i64;
    let tol = 1e-9 * l.max(1.0);
    let mut out = Vec::new();
    for i in 0..=steps {
        let a = i as f64 * spacing;
        for j in -side..=side {
            let b = j as f64 * spacing;
            if (a - half).hypot(b) <= half + tol {
                out.push(frame.user() + e * a + n * b);
            }
        }
    }
    Ok(out)
}

/// Grid positions with their true segments; the segment lookups dominate the
/// cost, so one evaluation serves several cost kinds.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSegments {
    pub points: Vec<Point2>,
    pub segments: Vec<SegmentId>,
}

impl GridSegments {
    pub fn evaluate<O: SegmentOracle + ?Sized>(
        problem: &RelayProblem,
        oracle: &O,
        spacing: f64,
    ) -> Result<Self, BaselineError> {
        let points = search_grid(problem.frame(), spacing)?;
        let segments = points
            .iter()
            .map(|&x| oracle.segment(x, problem.user()))
            .collect();
        Ok(Self { points, segments })
    }

    /// First grid point of least true cost under `problem`'s cost.
    pub fn argmin(&self, problem: &RelayProblem) -> Option<(Point2, f64)> {
        let mut best: Option<(Point2, f64)> = None;
        for (&x, &k) in self.points.iter().zip(&self.segments) {
            let f = problem.fictitious_at(k, x);
            if best.is_none_or(|(_, b)| f < b) {
                best = Some((x, f));
            }
        }
        best
    }
}

/// Exhaustive grid search of the true cost over the bounded region.
pub fn exhaustive_placement<O: SegmentOracle + ?Sized>(
    problem: &RelayProblem,
    oracle: &O,
    spacing: f64,
) -> Result<PlacementResult, BaselineError> {
    let grid = GridSegments::evaluate(problem, oracle, spacing)?;
    exhaustive_from_grid(problem, oracle, &grid)
}

pub fn exhaustive_from_grid<O: SegmentOracle + ?Sized>(
    problem: &RelayProblem,
    oracle: &O,
    grid: &GridSegments,
) -> Result<PlacementResult, BaselineError> {
    let (x, _) = grid.argmin(problem).ok_or(BaselineError::NoCandidates)?;
    Ok(PlacementResult::score(
        Scheme::Exhaustive,
        problem,
        oracle,
        x,
        None,
    ))
}

/// Best axis critical point by true cost.
pub fn simple_search_placement<O: SegmentOracle + ?Sized>(
    problem: &RelayProblem,
    oracle: &O,
    delta: f64,
) -> Result<PlacementResult, BaselineError> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(BaselineError::Spacing(delta));
    }
    let frame = problem.frame();
    let mut best: Option<(Point2, f64)> = None;
    for rho in axis_critical_points(problem, oracle, delta)
        .into_iter()
        .flatten()
    {
        let x = frame.user() + frame.axis() * rho;
        let (_, f) = problem.true_cost(oracle, x);
        if best.is_none_or(|(_, b)| f < b) {
            best = Some((x, f));
        }
    }
    let (x, _) = best.ok_or(BaselineError::NoCandidates)?;
    Ok(PlacementResult::score(
        Scheme::SimpleSearch,
        problem,
        oracle,
        x,
        None,
    ))
}

/// Settings of the LOS-probability baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbabilisticConfig {
    pub spacing: f64,
    pub distance: GainDistance,
}

impl Default for ProbabilisticConfig {
    fn default() -> Self {
        Self {
            spacing: 5.0,
            distance: GainDistance::Horizontal,
        }
    }
}

fn check_two_segments(model: &SegmentModel) -> Result<(), BaselineError> {
    match model.num_segments() {
        2 => Ok(()),
        k => Err(BaselineError::SegmentCount(k)),
    }
}

/// Minimises the cost with the LOS-probability-averaged user gain over the
/// grid, then scores the chosen position with the true segment.
pub fn probabilistic_placement<O: SegmentOracle + ?Sized>(
    problem: &RelayProblem,
    oracle: &O,
    table: &LosProbabilityTable,
    cfg: &ProbabilisticConfig,
) -> Result<PlacementResult, BaselineError> {
    let x = probabilistic_position(problem, table, cfg)?;
    Ok(PlacementResult::score(
        Scheme::Probabilistic,
        problem,
        oracle,
        x,
        None,
    ))
}

/// The position chosen by the LOS-probability baseline.
pub fn probabilistic_position(
    problem: &RelayProblem,
    table: &LosProbabilityTable,
    cfg: &ProbabilisticConfig,
) -> Result<Point2, BaselineError> {
    check_two_segments(problem.model())?;
    let model = problem.model();
    let h = problem.heights();
    let mut best: Option<(Point2, f64)> = None;
    for x in search_grid(problem.frame(), cfg.spacing)? {
        let g_u = averaged_user_gain(x, problem.user(), model, h, table, cfg.distance);
        let g_b = model.gain_bs_at(dist_to_bs(x, problem.bs(), h));
        let f = problem.cost().value(g_u, g_b);
        if best.is_none_or(|(_, b)| f < b) {
            best = Some((x, f));
        }
    }
    best.map(|(x, _)| x).ok_or(BaselineError::NoCandidates)
}

/// Cluster version: minimises the users' mean cost, each user with the
/// averaged gain, over the grid of the centre-to-BS region.
pub fn probabilistic_cluster_position(
    cluster: &UserCluster,
    center_problem: &RelayProblem,
    table: &LosProbabilityTable,
    cfg: &ProbabilisticConfig,
) -> Result<Point2, BaselineError> {
    check_two_segments(center_problem.model())?;
    let model = center_problem.model();
    let h = center_problem.heights();
    let cost: &RelayCost = center_problem.cost();
    let mut best: Option<(Point2, f64)> = None;
    for x in search_grid(center_problem.frame(), cfg.spacing)? {
        let g_b = model.gain_bs_at(dist_to_bs(x, center_problem.bs(), h));
        let total: f64 = cluster
            .users
            .iter()
            .map(|&u| cost.value(averaged_user_gain(x, u, model, h, table, cfg.distance), g_b))
            .sum();
        let f = total / cluster.users.len() as f64;
        if best.is_none_or(|(_, b)| f < b) {
            best = Some((x, f));
        }
    }
    best.map(|(x, _)| x).ok_or(BaselineError::NoCandidates)
}

/// Direct BS-user transmission reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DirectLink {
    pub segment: SegmentId,
    pub distance: f64,
    pub gain: f64,
    /// `log2(1 + P_b g_0)` in bps/Hz.
    pub throughput: f64,
    /// `1 / (P_b g_0)`.
    pub outage: f64,
}

/// Degree of obstruction of the BS-user link.
pub fn bs_user_segment(
    map: &UrbanMap,
    user: Point2,
    bs: Point2,
    heights: &Heights,
    num_segments: usize,
) -> SegmentId {
    let k = num_segments.max(1);
    let blockers = map.count_blockers(
        Point3::at_height(user, heights.user),
        Point3::at_height(bs, heights.bs),
        k - 1,
    );
    SegmentId::clamped(1 + blockers, k)
}

/// The UAV-user segment law applied to the BS-user distance and link state.
pub fn direct_link_eval(
    user: Point2,
    bs: Point2,
    segment: SegmentId,
    heights: &Heights,
    model: &SegmentModel,
    cost: &RelayCost,
) -> DirectLink {
    let distance = (bs - user).norm().hypot(heights.bs - heights.user);
    let gain = model.gain_user_at(segment, distance);
    DirectLink {
        segment,
        distance,
        gain,
        throughput: (cost.p_b * gain).ln_1p() / std::f64::consts::LN_2,
        outage: 1.0 / (cost.p_b * gain),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserClass {
    CellEdge,
    Middle,
    CellCenter,
}

impl UserClass {
    pub fn as_str(self) -> &'static str {
        match self {
            UserClass::CellEdge => "cell_edge",
            UserClass::Middle => "middle",
            UserClass::CellCenter => "cell_center",
        }
    }
}

/// Rank classes by direct throughput: the lowest `fraction` of users are cell
/// edge, the highest `fraction` cell centre. Ties keep input order.
pub fn classify_users(direct_throughput: &[f64], fraction: f64) -> Vec<UserClass> {
    let n = direct_throughput.len();
    let m = ((fraction.clamp(0.0, 0.5) * n as f64).round() as usize).min(n / 2);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| direct_throughput[a].total_cmp(&direct_throughput[b]));
    let mut out = vec![UserClass::Middle; n];
    for &i in &order[..m] {
        out[i] = UserClass::CellEdge;
    }
    for &i in &order[n - m..] {
        out[i] = UserClass::CellCenter;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::CostKind;
    use crate::geometry::PolarCoord;
    use crate::search::{shaded_contour_search, SearchParams};
    use crate::terrain::{Building, NestedBoundaryField, Rect};

    fn heights() -> Heights {
        Heights::new(50.0, 45.0, 1.5).unwrap()
    }

    fn problem(kind: CostKind, user: Point2, bs: Point2) -> RelayProblem {
        let cost = RelayCost::from_dbm(kind, 33.0, 33.0, -80.0).unwrap();
        RelayProblem::new(user, bs, heights(), SegmentModel::urban_los_nlos(), cost).unwrap()
    }

    fn city() -> UrbanMap {
        let mut b = Vec::new();
        for i in 0..4 {
            for j in 0..4 {
                let (x, y) = (20.0 + 60.0 * i as f64, 20.0 + 60.0 * j as f64);
                b.push(Building {
                    footprint: Rect::new(x, y, x + 40.0, y + 40.0),
                    height: 10.0 + 8.0 * ((i + j) % 4) as f64,
                });
            }
        }
        UrbanMap::new(Rect::new(0.0, 0.0, 260.0, 260.0), b).unwrap()
    }

    #[test]
    fn table_recount() {
        let map = city();
        let h = heights();
        let table = build_los_table(&map, 10, 10, &h, 9).unwrap();
        let mut los = vec![0u64; LOS_TABLE_BINS];
        let mut total = vec![0u64; LOS_TABLE_BINS];
        let w = FRAC_PI_2 / LOS_TABLE_BINS as f64;
        for i in 0..10 {
            let (user, mut rng) = los_table_user_stream(&map, 9, i);
            for _ in 0..10 {
                let Some(x) = sample_uav(&map, user, &h, &mut rng) else {
                    continue;
                };
                let phi = (h.uav - h.user).atan2((x - user).norm());
                let bin = ((phi / w) as usize).min(LOS_TABLE_BINS - 1);
                total[bin] += 1;
                // independent LOS test: sample the 3D segment densely
                let n = 2000;
                let blocked = (0..=n).any(|s| {
                    let t = s as f64 / n as f64;
                    let p = user + (x - user) * t;
                    let z = h.user + (h.uav - h.user) * t;
                    map.buildings()
                        .iter()
                        .any(|b| b.footprint.contains_strict(p) && b.height > z)
                });
                if !blocked {
                    los[bin] += 1;
                }
            }
        }
        assert_eq!(total.iter().sum::<u64>(), 100);
        for b in 0..LOS_TABLE_BINS {
            assert_eq!(table.bin_samples(b), total[b], "bin {b}");
            if total[b] > 0 {
                assert_eq!(
                    table.bin_probability(b),
                    Some(los[b] as f64 / total[b] as f64),
                    "bin {b}"
                );
            } else {
                assert_eq!(table.bin_probability(b), None);
            }
        }
        assert_eq!(table, build_los_table(&map, 10, 10, &h, 9).unwrap());
    }

    #[test]
    fn free_space_table_is_all_los() {
        let map = UrbanMap::empty(Rect::new(0.0, 0.0, 500.0, 500.0));
        let t = build_los_table(&map, 20, 50, &heights(), 1).unwrap();
        for b in 0..t.bins() {
            assert!(t.bin_probability(b).is_none_or(|p| p == 1.0));
        }
        assert_eq!(t.lookup(0.3), 1.0);
    }

    #[test]
    fn overhead_is_los() {
        let t = build_los_table(&city(), 50, 200, &heights(), 3).unwrap();
        assert!(t.lookup(FRAC_PI_2) > 0.9, "{}", t.lookup(FRAC_PI_2));
        assert!(t.lookup(0.2) < t.lookup(1.4));
    }

    #[test]
    fn lookup_interpolates_and_skips_empty_bins() {
        let mut los = vec![0u64; LOS_TABLE_BINS];
        let mut total = vec![0u64; LOS_TABLE_BINS];
        los[10] = 1;
        total[10] = 4;
        los[12] = 3;
        total[12] = 4;
        let t = LosProbabilityTable::from_counts(&los, &total).unwrap();
        let w = t.bin_width();
        assert!((t.lookup(10.5 * w) - 0.25).abs() < 1e-12);
        assert!((t.lookup(11.5 * w) - 0.5).abs() < 1e-12);
        assert!((t.lookup(12.0 * w) - 0.625).abs() < 1e-12);
        assert_eq!(t.lookup(0.0), 0.25);
        assert_eq!(t.lookup(FRAC_PI_2), 0.75);
        let csv = t.to_csv();
        assert!(csv.starts_with("phi_low_rad,phi_high_rad,p_los,n_samples\n0,"));
        assert_eq!(csv.lines().count(), LOS_TABLE_BINS + 1);
        assert!(LosProbabilityTable::from_counts(&[0; 4], &[0; 4]).is_err());
    }

    /// Independent double loop over world-frame offsets, rotated onto the axis.
    fn naive_grid_min(pr: &RelayProblem, oracle: &dyn SegmentOracle, s: f64) -> f64 {
        let (u, b) = (pr.user(), pr.bs());
        let l = (b - u).norm();
        let (c, sn) = ((b.x - u.x) / l, (b.y - u.y) / l);
        let mut best = f64::INFINITY;
        let m = (l / s).ceil() as i64 + 1;
        for i in -m..=m {
            for j in -m..=m {
                let (a, v) = (i as f64 * s, j as f64 * s);
                let x = Point2::new(u.x + a * c - v * sn, u.y + a * sn + v * c);
                let mid = Point2::new((u.x + b.x) / 2.0, (u.y + b.y) / 2.0);
                if (x - mid).norm() > l / 2.0 + 1e-6 {
                    continue;
                }
                let k = oracle.segment(x, u);
                best = best.min(pr.fictitious_at(k, x));
            }
        }
        best
    }

    #[test]
    fn exhaustive_matches_naive_double_loop() {
        let map = city();
        let oracle = crate::terrain::MapOracle::new(&map, heights(), 2);
        for (u, kind) in [
            (Point2::new(10.0, 10.0), CostKind::DfRate),
            (Point2::new(130.0, 70.0), CostKind::AfOutage),
            (Point2::new(250.0, 10.0), CostKind::DfRate),
        ] {
            let pr = problem(kind, u, Point2::new(250.0, 250.0));
            let got = exhaustive_placement(&pr, &oracle, 5.0).unwrap();
            let want = naive_grid_min(&pr, &oracle, 5.0);
            assert!(
                (got.cost - want).abs() <= 1e-12 * want.abs(),
                "{} vs {want}",
                got.cost
            );
        }
    }

    #[test]
    fn finer_grid_never_worse() {
        let map = city();
        let oracle = crate::terrain::MapOracle::new(&map, heights(), 2);
        let pr = problem(
            CostKind::AfOutage,
            Point2::new(10.0, 130.0),
            Point2::new(250.0, 250.0),
        );
        let coarse = exhaustive_placement(&pr, &oracle, 10.0).unwrap();
        let fine = exhaustive_placement(&pr, &oracle, 5.0).unwrap();
        assert!(fine.cost <= coarse.cost);
    }

    #[test]
    fn single_point_grid() {
        let pr = problem(
            CostKind::DfRate,
            Point2::new(0.0, 0.0),
            Point2::new(3.0, 0.0),
        );
        let field = NestedBoundaryField::isotropic(&[1.0]).unwrap();
        let grid = search_grid(pr.frame(), 10.0).unwrap();
        assert_eq!(grid, vec![Point2::new(0.0, 0.0)]);
        let r = exhaustive_placement(&pr, &field, 10.0).unwrap();
        assert_eq!(r.position, Point2::new(0.0, 0.0));
        assert_eq!(r.scheme, Scheme::Exhaustive);
        assert!(search_grid(pr.frame(), 0.0).is_err());
    }

    #[test]
    fn grid_stays_in_region() {
        let pr = problem(
            CostKind::DfRate,
            Point2::new(5.0, -7.0),
            Point2::new(300.0, 120.0),
        );
        let grid = search_grid(pr.frame(), 5.0).unwrap();
        assert!(grid.len() > 1000);
        for &x in &grid {
            let p = pr.frame().to_polar(x);
            let slack = PolarCoord::new((p.rho - 1e-6).max(0.0), p.theta);
            assert!(pr.frame().in_search_region(slack), "{x:?}");
        }
    }

    #[test]
    fn simple_search_on_open_world_matches_full_search() {
        let field = NestedBoundaryField::isotropic(&[1e6]).unwrap();
        for kind in [CostKind::AfOutage, CostKind::DfRate] {
            let pr = problem(kind, Point2::new(0.0, 0.0), Point2::new(400.0, 0.0));
            let simple = simple_search_placement(&pr, &field, 5.0).unwrap();
            let full = shaded_contour_search(&pr, &field, &SearchParams::default()).unwrap();
            assert!((simple.cost - full.record.f_min).abs() <= 1e-12 * full.record.f_min.abs());
        }
    }

    #[test]
    fn simple_search_matches_axis_scan_and_is_no_better_than_full() {
        let field =
            NestedBoundaryField::new(2, vec![vec![60.0], vec![60.0], vec![250.0], vec![60.0]])
                .unwrap();
        for kind in [CostKind::AfOutage, CostKind::DfRate] {
            let pr = problem(kind, Point2::new(0.0, 0.0), Point2::new(400.0, 0.0));
            let simple = simple_search_placement(&pr, &field, 5.0).unwrap();
            let full = shaded_contour_search(&pr, &field, &SearchParams::default()).unwrap();
            assert!(simple.cost >= full.record.f_min);
            let scan = (0..=4000)
                .map(|i| pr.true_cost(&field, Point2::new(i as f64 * 0.1, 0.0)).1)
                .fold(f64::INFINITY, f64::min);
            assert!(
                simple.cost <= scan + 1e-6 * scan.abs(),
                "{} vs {scan}",
                simple.cost
            );
            assert!(simple.position.y == 0.0);
        }
    }

    #[test]
    fn degenerate_tables_reduce_to_segment_grids() {
        let pr = problem(
            CostKind::DfRate,
            Point2::new(0.0, 0.0),
            Point2::new(400.0, 0.0),
        );
        let cfg = ProbabilisticConfig {
            distance: GainDistance::ThreeD,
            ..Default::default()
        };
        for (p, k) in [(1.0, 1usize), (0.0, 2)] {
            let table = LosProbabilityTable::constant(p).unwrap();
            let field =
                NestedBoundaryField::isotropic(if k == 1 { &[1e6] } else { &[0.0] }).unwrap();
            let got = probabilistic_position(&pr, &table, &cfg).unwrap();
            let (want, _) = GridSegments::evaluate(&pr, &field, 5.0)
                .unwrap()
                .argmin(&pr)
                .unwrap();
            assert_eq!(got, want, "p = {p}");
        }
        // all-LOS optimum lies on the axis near the LOS critical point
        let all_los = NestedBoundaryField::isotropic(&[1e6]).unwrap();
        let x = probabilistic_position(&pr, &LosProbabilityTable::constant(1.0).unwrap(), &cfg)
            .unwrap();
        let rho1 = axis_critical_points(&pr, &all_los, 5.0)[0].unwrap();
        assert_eq!(x.y, 0.0);
        assert!((x.x - rho1).abs() <= 2.5 + 1e-9, "{} vs {rho1}", x.x);
    }

    #[test]
    fn probabilistic_needs_two_segments() {
        let mut model = SegmentModel::urban_los_nlos();
        model.segments.push(model.segments[1]);
        let cost = RelayCost::from_dbm(CostKind::DfRate, 33.0, 33.0, -80.0).unwrap();
        let pr = RelayProblem::new(
            Point2::new(0.0, 0.0),
            Point2::new(100.0, 0.0),
            heights(),
            model,
            cost,
        )
        .unwrap();
        let t = LosProbabilityTable::constant(0.5).unwrap();
        assert_eq!(
            probabilistic_position(&pr, &t, &ProbabilisticConfig::default()),
            Err(BaselineError::SegmentCount(3))
        );
    }

    #[test]
    fn horizontal_distance_singularity_is_tolerated() {
        let pr = problem(
            CostKind::AfOutage,
            Point2::new(0.0, 0.0),
            Point2::new(200.0, 0.0),
        );
        let t = LosProbabilityTable::constant(0.5).unwrap();
        let x = probabilistic_position(&pr, &t, &ProbabilisticConfig::default()).unwrap();
        assert!(x.is_finite());
        let field = NestedBoundaryField::isotropic(&[30.0]).unwrap();
        let r = probabilistic_placement(&pr, &field, &t, &ProbabilisticConfig::default()).unwrap();
        assert!(r.cost.is_finite() && r.scheme == Scheme::Probabilistic);
    }

    #[test]
    fn cluster_of_one_matches_single_user() {
        let pr = problem(
            CostKind::DfRate,
            Point2::new(0.0, 0.0),
            Point2::new(300.0, 0.0),
        );
        let t = LosProbabilityTable::constant(0.3).unwrap();
        let cfg = ProbabilisticConfig {
            distance: GainDistance::ThreeD,
            ..Default::default()
        };
        let cluster = UserCluster::new(pr.user(), 0.0, vec![pr.user()]).unwrap();
        assert_eq!(
            probabilistic_cluster_position(&cluster, &pr, &t, &cfg).unwrap(),
            probabilistic_position(&pr, &t, &cfg).unwrap()
        );
    }

    #[test]
    fn direct_link_uses_user_law() {
        let h = heights();
        let model = SegmentModel::urban_los_nlos();
        let cost = RelayCost::from_dbm(CostKind::DfRate, 33.0, 33.0, -80.0).unwrap();
        let (u, b) = (Point2::new(0.0, 0.0), Point2::new(300.0, 400.0));
        let d = (500.0f64 * 500.0 + 43.5 * 43.5).sqrt();
        for k in [1usize, 2] {
            let seg = SegmentId::new(k, 2).unwrap();
            let r = direct_link_eval(u, b, seg, &h, &model, &cost);
            let p = model.segments[k - 1];
            let g = 10f64.powf(p.log10_beta) * d.powf(-p.alpha);
            assert!((r.distance - d).abs() < 1e-9);
            assert!((r.gain / g - 1.0).abs() < 1e-12);
            assert!((r.outage * cost.p_b * g - 1.0).abs() < 1e-12);
            assert!((2f64.powf(r.throughput) - 1.0 - cost.p_b * g).abs() < 1e-9 * cost.p_b * g);
        }
        let map = city();
        assert_eq!(
            bs_user_segment(
                &map,
                Point2::new(10.0, 10.0),
                Point2::new(250.0, 10.0),
                &h,
                2
            ),
            SegmentId::LOS
        );
        assert_eq!(
            bs_user_segment(
                &map,
                Point2::new(10.0, 10.0),
                Point2::new(250.0, 250.0),
                &h,
                2
            )
            .get(),
            2
        );
    }

    #[test]
    fn classification_recount() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v: Vec<f64> = (0..100).map(|_| rng.random_range(0.0..10.0)).collect();
        let classes = classify_users(&v, 0.2);
        let mut sorted = v.clone();
        sorted.sort_by(f64::total_cmp);
        let (lo, hi) = (sorted[19], sorted[80]);
        for (x, c) in v.iter().zip(&classes) {
            let want = if *x <= lo {
                UserClass::CellEdge
            } else if *x >= hi {
                UserClass::CellCenter
            } else {
                UserClass::Middle
            };
            assert_eq!(*c, want);
        }
        assert_eq!(
            classes
                .iter()
                .filter(|c| **c == UserClass::CellEdge)
                .count(),
            20
        );
        assert_eq!(
            classes
                .iter()
                .filter(|c| **c == UserClass::CellCenter)
                .count(),
            20
        );
        assert!(classify_users(&[], 0.2).is_empty());
    }
}
