//! Shaded-contour exploration: an axis sweep for per-partition critical
//! points, then for every virtual LOS/NLOS partition a right and a left branch
//! that move radially through the virtual LOS region and follow the
//! fictitious-cost contour through the virtual NLOS region.

use std::f64::consts::PI;
use std::fmt;

use log::debug;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::{CostError, RelayProblem};
use crate::geometry::{Point2, PolarCoord};
use crate::report::{sig6, CsvTable};
use crate::terrain::{SegmentId, SegmentOracle};

/// Resolution of boundary bisection and golden-section refinement on the axis.
pub const AXIS_TOL_M: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid search parameters: {0}")]
    InvalidParams(String),
    #[error("step cap of {cap} exceeded on the {phase} branch of partition {k}")]
    MaxSteps {
        cap: usize,
        k: usize,
        phase: Phase,
        partial: Box<Trajectory>,
    },
    #[error(transparent)]
    Cost(#[from] CostError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchParams {
    /// Step size in meters.
    pub delta: f64,
    /// Safety cap on branch steps; raised to `ceil(4 (2.4K - 1.4) L / delta)` when smaller.
    pub max_steps: usize,
    /// Relative tolerance of the contour corrector.
    pub contour_tol: f64,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            delta: 5.0,
            max_steps: 0,
            contour_tol: 1e-6,
        }
    }
}

impl SearchParams {
    pub fn with_delta(delta: f64) -> Self {
        Self {
            delta,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(SearchError::InvalidParams(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        if !(self.contour_tol > 0.0 && self.contour_tol < 1.0) {
            return Err(SearchError::InvalidParams(format!(
                "contour_tol must be in (0, 1), got {}",
                self.contour_tol
            )));
        }
        Ok(())
    }

    pub fn step_cap(&self, num_segments: usize, length: f64) -> usize {
        let auto = (4.0 * length_bound(num_segments, length) / self.delta).ceil() as usize;
        self.max_steps.max(auto).max(1)
    }
}

/// `(2.4 K - 1.4) L`.
pub fn length_bound(num_segments: usize, length: f64) -> f64 {
    (2.4 * num_segments as f64 - 1.4) * length
}

/// Per-branch length allowance as a multiple of `L`.
pub const BRANCH_LENGTH_RATIO: f64 = 1.21;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Axis,
    Right,
    Left,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Axis => "axis",
            Phase::Right => "right",
            Phase::Left => "left",
        }
    }

    fn sign(self) -> f64 {
        if self == Phase::Left {
            -1.0
        } else {
            1.0
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Waypoint {
    pub position: Point2,
    pub polar: PolarCoord,
    /// True segment at the position.
    pub segment: SegmentId,
    /// True cost at the position.
    pub cost: f64,
    pub phase: Phase,
    /// Virtual partition index of the branch; 0 on the axis sweep.
    pub partition_k: usize,
    /// Track record after visiting this point; unset during the axis sweep.
    pub f_min_so_far: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// `rho >= L cos(theta)`.
    Region,
    /// `dF_k/drho >= 0`.
    Derivative,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchSummary {
    pub k: usize,
    pub phase: Phase,
    /// Waypoint index range `first..=last`.
    pub first: usize,
    pub last: usize,
    pub length: f64,
    pub stop: StopReason,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Trajectory {
    pub waypoints: Vec<Waypoint>,
    pub axis_length: f64,
    pub branches: Vec<BranchSummary>,
}

impl Trajectory {
    pub fn length(&self) -> f64 {
        self.axis_length + self.branches.iter().map(|b| b.length).sum::<f64>()
    }

    pub fn branch_waypoints(&self, b: &BranchSummary) -> &[Waypoint] {
        &self.waypoints[b.first..=b.last]
    }

    pub fn to_csv(&self) -> String {
        let mut t = CsvTable::new(&[
            "step",
            "x",
            "y",
            "rho",
            "theta_rad",
            "segment",
            "phase",
            "partition_k",
            "cost",
            "f_min_so_far",
        ]);
        for (i, w) in self.waypoints.iter().enumerate() {
            t.push(vec![
                i.to_string(),
                sig6(w.position.x),
                sig6(w.position.y),
                sig6(w.polar.rho),
                sig6(w.polar.theta),
                w.segment.to_string(),
                w.phase.to_string(),
                w.partition_k.to_string(),
                sig6(w.cost),
                w.f_min_so_far.map(sig6).unwrap_or_default(),
            ]);
        }
        t.to_csv()
    }
}

/// Best true cost seen so far and where.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrackRecord {
    pub f_min: f64,
    pub x_hat: Point2,
    pub polar: PolarCoord,
    pub segment: SegmentId,
}

/// Total, per-branch and bound verdicts for one search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthReport {
    pub total: f64,
    pub axis: f64,
    pub per_branch: Vec<f64>,
    pub bound: f64,
    pub within_bound: bool,
    pub max_branch_ratio: f64,
    pub branches_within: bool,
}

pub fn trajectory_length_report(
    traj: &Trajectory,
    length: f64,
    num_segments: usize,
) -> LengthReport {
    let bound = length_bound(num_segments, length);
    let per_branch: Vec<f64> = traj.branches.iter().map(|b| b.length).collect();
    let max_branch_ratio = per_branch.iter().fold(0.0f64, |m, &b| m.max(b / length));
    let total = traj.length();
    LengthReport {
        total,
        axis: traj.axis_length,
        per_branch,
        bound,
        within_bound: total <= bound * (1.0 + 1e-9),
        max_branch_ratio,
        branches_within: max_branch_ratio <= BRANCH_LENGTH_RATIO,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchOutcome {
    pub record: TrackRecord,
    /// `rho_k^0` for `k = 1..=K`, absent when the constraint set on the axis is empty.
    pub critical: Vec<Option<f64>>,
    pub trajectory: Trajectory,
    pub lengths: LengthReport,
    /// Contour steps replaced by a radial step because `dF_k/dtheta` vanished.
    pub flat_theta_fallbacks: usize,
    /// Contour steps where the corrector was rejected and the predictor used.
    pub corrector_fallbacks: usize,
    /// Contour steps shortened to end at a virtual LOS boundary.
    pub boundary_refinements: usize,
    /// Final steps shortened to end on the search-region boundary.
    pub region_clips: usize,
}

/// Golden-section minimisation of a unimodal `f` on `[a, b]` to width `tol`.
pub fn golden_section_min(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (a.min(b), a.max(b));
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    [(c, fc), (d, fd), (x, fx)].into_iter().fold(
        (x, fx),
        |best, cand| if cand.1 < best.1 { cand } else { best },
    )
}

/// Axis samples from the user (`rho = 0`) to the BS (`rho = L`) at spacing at most `delta`.
fn axis_samples(length: f64, delta: f64) -> Vec<f64> {
    let n = (length / delta).ceil().max(1.0) as usize;
    (0..=n).map(|i| length * i as f64 / n as f64).collect()
}

fn axis_segments<O: SegmentOracle + ?Sized>(
    problem: &RelayProblem,
    oracle: &O,
    rhos: &[f64],
) -> Vec<SegmentId> {
    let frame = problem.frame();
    rhos.iter()
        .map(|&r| oracle.segment(frame.to_cartesian(PolarCoord::new(r, 0.0)), problem.user()))
        .collect()
}

/// Boundary between an in-set and an out-of-set axis radius, to `AXIS_TOL_M`; returns the in-set side.
fn bisect_boundary(mut inside: f64, mut outside: f64, member: impl Fn(f64) -> bool) -> f64 {
    while (inside - outside).abs() > AXIS_TOL_M {
        let mid = 0.5 * (inside + outside);
        if member(mid) {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    inside
}

fn constrained_axis_min<O: SegmentOracle + ?Sized>(
    problem: &RelayProblem,
    oracle: &O,
    k: SegmentId,
    rhos: &[f64],
    segs: &[SegmentId],
    in_set: impl Fn(SegmentId) -> bool,
) -> Option<f64> {
    let frame = problem.frame();
    let member = |r: f64| {
        in_set(oracle.segment(frame.to_cartesian(PolarCoord::new(r, 0.0)), problem.user()))
    };
    let cost = |r: f64| problem.fictitious(k, PolarCoord::new(r, 0.0));
    let mut best: Option<(f64, f64)> = None;
    let mut offer = |r: f64, f: f64| {
        if best.is_none_or(|(_, bf)| f < bf) {
            best = Some((r, f));
        }
    };
    let mut i = 0;
    while i < rhos.len() {
        if !in_set(segs[i]) {
            i += 1;
            continue;
        }
        let start = i;
        while i + 1 < rhos.len() && in_set(segs[i + 1]) {
            i += 1;
        }
        let end = i;
        i += 1;
        let lo = if start > 0 {
            bisect_boundary(rhos[start], rhos[start - 1], member)
        } else {
            rhos[start]
        };
        let hi = if end + 1 < rhos.len() {
            bisect_boundary(rhos[end], rhos[end + 1], member)
        } else {
            rhos[end]
        };
        // best sample of the run is always a valid fallback
        let (mut run_best, mut run_f) = (rhos[start], cost(rhos[start]));
        for &r in &rhos[start + 1..=end] {
            let f = cost(r);
            if f < run_f {
                run_best = r;
                run_f = f;
            }
        }
        for r in [lo, hi] {
            let f = cost(r);
            if f < run_f {
                run_best = r;
                run_f = f;
            }
        }
        if hi - lo > AXIS_TOL_M {
            let (r, f) = golden_section_min(cost, lo, hi, AXIS_TOL_M);
            if f < run_f && member(r) {
                run_best = r;
                run_f = f;
            }
        }
        offer(run_best, run_f);
    }
    best.map(|(r, _)| r)
}

fn critical_from_scan<O: SegmentOracle + ?Sized>(
    problem: &RelayProblem,
    oracle: &O,
    rhos: &[f64],
    segs: &[SegmentId],
) -> Vec<Option<f64>> {
    let n = problem.num_segments();
    (1..=n)
        .map(|k| {
            let id = SegmentId::clamped(k, n);
            if k < n {
                constrained_axis_min(problem, oracle, id, rhos, segs, |s| s.get() <= k)
            } else {
                constrained_axis_min(problem, oracle, id, rhos, segs, |s| s.get() == n)
            }
        })
        .collect()
}

/// `rho_k^0` for `k = 1..=K`: for `k < K` the minimiser of `F_k(rho, 0)` over axis
/// points in segments `1..=k`, for `k = K` over axis points in segment `K`.
pub fn axis_critical_points<O: SegmentOracle + ?Sized>(
    problem: &RelayProblem,
    oracle: &O,
    delta: f64,
) -> Vec<Option<f64>> {
    let rhos = axis_samples(problem.length(), delta);
    let segs = axis_segments(problem, oracle, &rhos);
    critical_from_scan(problem, oracle, &rhos, &segs)
}

/// Unit direction of the first-order contour step at `p` given `(dF/drho, dF/dtheta)`,
/// or `None` when `dF/dtheta` is too small to divide by.
pub fn contour_direction(
    problem: &RelayProblem,
    p: PolarCoord,
    grad: (f64, f64),
) -> Option<Point2> {
    let (fr, ft) = grad;
    if ft.abs() < 1e-12 {
        return None;
    }
    let frame = problem.frame();
    let dir = frame.radial(p.theta) + frame.tangential(p.theta) * (p.rho * (-fr / ft));
    let n = dir.norm();
    (n.is_finite() && n > 0.0).then(|| dir * (1.0 / n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContourKind {
    /// Predictor followed by a successful corrector on the `delta` circle.
    Corrected,
    /// First-order predictor only.
    Predictor,
    /// Radial step because `dF_k/dtheta` vanished.
    Radial,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourStep {
    pub polar: PolarCoord,
    pub position: Point2,
    pub kind: ContourKind,
}

/// One contour-following step of chord `delta` keeping `F_k` at its current
/// value. The first-order direction is corrected by solving `F_k = C` on the
/// circle of radius `delta` around the current point, restricted to the
/// forward half-circle; the corrected point is kept only when it still moves
/// away from the user without decreasing `|theta|`.
pub fn contour_step(
    problem: &RelayProblem,
    k: SegmentId,
    p: PolarCoord,
    delta: f64,
    tol: f64,
) -> Result<ContourStep, CostError> {
    let frame = problem.frame();
    let x = frame.to_cartesian(p);
    let grad = problem.fictitious_grad(k, p)?;
    let Some(t) = contour_direction(problem, p, grad) else {
        let polar = PolarCoord::new(p.rho + delta, p.theta);
        return Ok(ContourStep {
            polar,
            position: frame.to_cartesian(polar),
            kind: ContourKind::Radial,
        });
    };
    let predicted = x + t * delta;
    let predictor = ContourStep {
        polar: frame.to_polar(predicted),
        position: predicted,
        kind: ContourKind::Predictor,
    };

    let target = problem.fictitious(k, p);
    let g_cart = frame.radial(p.theta) * grad.0 + frame.tangential(p.theta) * (grad.1 / p.rho);
    let mut n = Point2::new(-t.y, t.x);
    if n.dot(g_cart) < 0.0 {
        n = n * -1.0;
    }
    let at = |s: f64| x + (t * s.cos() + n * s.sin()) * delta;
    let h = |s: f64| problem.fictitious_at(k, at(s)) - target;
    let (mut lo, mut hi) = (-0.5 * PI, 0.5 * PI);
    if !(h(lo) < 0.0 && h(hi) > 0.0) {
        return Ok(predictor);
    }
    let scale = target.abs().max(f64::MIN_POSITIVE);
    let mut s = 0.0;
    for _ in 0..200 {
        s = 0.5 * (lo + hi);
        let v = h(s);
        if v.abs() <= 1e-13 * scale || hi - lo < 1e-15 {
            break;
        }
        if v < 0.0 {
            lo = s;
        } else {
            hi = s;
        }
    }
    if h(s).abs() > tol * scale {
        return Ok(predictor);
    }
    let position = at(s);
    let polar = frame.to_polar(position);
    let same_side = polar.theta * p.theta >= 0.0;
    if polar.rho > p.rho && polar.theta.abs() >= p.theta.abs() && same_side {
        Ok(ContourStep {
            polar,
            position,
            kind: ContourKind::Corrected,
        })
    } else {
        Ok(predictor)
    }
}

struct Searcher<'a, T: ?Sized, M: ?Sized> {
    problem: &'a RelayProblem,
    truth: &'a T,
    member: &'a M,
    params: SearchParams,
    cap: usize,
    steps: usize,
    record: Option<TrackRecord>,
    traj: Trajectory,
    flat_theta_fallbacks: usize,
    corrector_fallbacks: usize,
    boundary_refinements: usize,
    region_clips: usize,
}

impl<T: SegmentOracle + ?Sized, M: SegmentOracle + ?Sized> Searcher<'_, T, M> {
    /// Appends a visited point, updating the record when its true cost is strictly lower.
    fn visit(&mut self, polar: PolarCoord, position: Point2, phase: Phase, k: usize) {
        let (segment, cost) = self.problem.true_cost(self.truth, position);
        let f_min_so_far = if phase == Phase::Axis {
            None
        } else {
            if self.record.is_none_or(|r| cost < r.f_min) {
                self.record = Some(TrackRecord {
                    f_min: cost,
                    x_hat: position,
                    polar,
                    segment,
                });
            }
            self.record.map(|r| r.f_min)
        };
        self.traj.waypoints.push(Waypoint {
            position,
            polar,
            segment,
            cost,
            phase,
            partition_k: k,
            f_min_so_far,
        });
    }

    fn offer_axis_point(&mut self, rho: f64) {
        let polar = PolarCoord::new(rho, 0.0);
        let position = self.problem.frame().to_cartesian(polar);
        let (segment, cost) = self.problem.true_cost(self.truth, position);
        if self.record.is_none_or(|r| cost < r.f_min) {
            self.record = Some(TrackRecord {
                f_min: cost,
                x_hat: position,
                polar,
                segment,
            });
        }
    }

    /// Shortens a contour step that lands in the virtual LOS region so that
    /// it ends just past the boundary crossing.
    fn boundary_entry(
        &mut self,
        k: SegmentId,
        p: PolarCoord,
        full: ContourStep,
    ) -> Result<ContourStep, SearchError> {
        let problem = self.problem;
        let (mut lo, mut hi) = (0.0, self.params.delta);
        let mut best = full;
        while hi - lo > AXIS_TOL_M {
            let mid = 0.5 * (lo + hi);
            let step = contour_step(problem, k, p, mid, self.params.contour_tol)?;
            if self.member.segment(step.position, problem.user()).get() <= k.get() {
                hi = mid;
                best = step;
            } else {
                lo = mid;
            }
        }
        self.boundary_refinements += 1;
        Ok(best)
    }

    /// Shortens a step from `p` that leaves `rho <= L cos(theta)` so that it
    /// ends on the boundary.
    fn region_exit(
        &mut self,
        k: SegmentId,
        p: PolarCoord,
        full: (PolarCoord, Point2),
        radial: bool,
    ) -> Result<(PolarCoord, Point2), SearchError> {
        let problem = self.problem;
        let frame = problem.frame();
        let l = problem.length();
        let outside = |q: PolarCoord| q.rho > l * q.theta.cos();
        if !outside(full.0) {
            return Ok(full);
        }
        self.region_clips += 1;
        let mut theta = full.0.theta;
        if !radial {
            let (mut lo, mut hi) = (0.0, self.params.delta);
            let mut best = full.0;
            while hi - lo > AXIS_TOL_M {
                let mid = 0.5 * (lo + hi);
                let step = contour_step(problem, k, p, mid, self.params.contour_tol)?;
                if outside(step.polar) {
                    hi = mid;
                    best = step.polar;
                } else {
                    lo = mid;
                }
            }
            theta = best.theta;
            if l * theta.cos() <= p.rho {
                return Ok((best, frame.to_cartesian(best)));
            }
        }
        let q = PolarCoord::new(l * theta.cos(), theta);
        Ok((q, frame.to_cartesian(q)))
    }

    fn branch(&mut self, k: usize, rho0: f64, phase: Phase) -> Result<(), SearchError> {
        let problem = self.problem;
        let frame = problem.frame();
        let l = problem.length();
        let delta = self.params.delta;
        let seg_k = SegmentId::clamped(k, problem.num_segments());
        let first = self.traj.waypoints.len();

        let origin = PolarCoord::new(rho0, 0.0);
        let origin_x = frame.to_cartesian(origin);
        self.visit(origin, origin_x, phase, k);

        let offset = if rho0 >= delta {
            delta / rho0
        } else {
            PI / 64.0
        };
        let mut p = PolarCoord::new(rho0, phase.sign() * offset);
        let mut x = frame.to_cartesian(p);
        let mut length = origin_x.distance(x);
        let stop = loop {
            self.visit(p, x, phase, k);
            if p.rho >= l * p.theta.cos() {
                break StopReason::Region;
            }
            if p.rho > 0.0 && problem.fictitious_grad(seg_k, p)?.0 >= 0.0 {
                break StopReason::Derivative;
            }
            self.steps += 1;
            if self.steps > self.cap {
                let mut partial = self.traj.clone();
                partial.branches.push(BranchSummary {
                    k,
                    phase,
                    first,
                    last: partial.waypoints.len() - 1,
                    length,
                    stop: StopReason::Region,
                });
                return Err(SearchError::MaxSteps {
                    cap: self.cap,
                    k,
                    phase,
                    partial: Box::new(partial),
                });
            }
            let virtual_los = self.member.segment(x, problem.user()).get() <= k;
            let (np, nx) = if virtual_los || p.rho == 0.0 {
                let np = PolarCoord::new(p.rho + delta, p.theta);
                (np, frame.to_cartesian(np))
            } else {
                let mut step = contour_step(problem, seg_k, p, delta, self.params.contour_tol)?;
                if self.member.segment(step.position, problem.user()).get() <= k {
                    step = self.boundary_entry(seg_k, p, step)?;
                }
                match step.kind {
                    ContourKind::Corrected => {}
                    ContourKind::Predictor => self.corrector_fallbacks += 1,
                    ContourKind::Radial => {
                        self.flat_theta_fallbacks += 1;
                        debug!(
                            "flat dF/dtheta at rho={:.3} theta={:.6}, radial step",
                            p.rho, p.theta
                        );
                    }
                }
                (step.polar, step.position)
            };
            let (np, nx) = self.region_exit(seg_k, p, (np, nx), virtual_los || p.rho == 0.0)?;
            length += x.distance(nx);
            p = np;
            x = nx;
        };
        let last = self.traj.waypoints.len() - 1;
        self.traj.branches.push(BranchSummary {
            k,
            phase,
            first,
            last,
            length,
            stop,
        });
        Ok(())
    }
}

fn run_search<T: SegmentOracle + ?Sized, M: SegmentOracle + ?Sized>(
    problem: &RelayProblem,
    truth: &T,
    member: &M,
    params: &SearchParams,
) -> Result<SearchOutcome, SearchError> {
    params.validate()?;
    let n = problem.num_segments();
    for (name, got) in [
        ("segment oracle", truth.num_segments()),
        ("membership oracle", member.num_segments()),
    ] {
        if got != n {
            return Err(SearchError::InvalidParams(format!(
                "{name} has {got} segments, channel model has {n}"
            )));
        }
    }
    let l = problem.length();
    let mut s = Searcher {
        problem,
        truth,
        member,
        params: *params,
        cap: params.step_cap(n, l),
        steps: 0,
        record: None,
        traj: Trajectory::default(),
        flat_theta_fallbacks: 0,
        corrector_fallbacks: 0,
        boundary_refinements: 0,
        region_clips: 0,
    };

    // the sweep starts above the BS and moves toward the user
    let rhos = axis_samples(l, params.delta);
    let segs = axis_segments(problem, member, &rhos);
    for &r in rhos.iter().rev() {
        let polar = PolarCoord::new(r, 0.0);
        s.visit(polar, problem.frame().to_cartesian(polar), Phase::Axis, 0);
    }
    s.traj.axis_length = l;
    let critical = critical_from_scan(problem, member, &rhos, &segs);

    if let Some(r) = critical[0] {
        s.offer_axis_point(r);
    }
    for k in 1..n {
        if let Some(rho0) = critical[k - 1] {
            s.branch(k, rho0, Phase::Right)?;
            s.branch(k, rho0, Phase::Left)?;
        }
    }
    if let Some(r) = critical[n - 1] {
        s.offer_axis_point(r);
    }
    let record = match s.record {
        Some(r) => r,
        None => {
            // unreachable for a non-empty axis: every sample lies in some constraint set
            let (i, w) = s
                .traj
                .waypoints
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.cost.total_cmp(&b.1.cost))
                .expect("axis sweep is never empty");
            debug!("no critical point found; using axis sample {i}");
            TrackRecord {
                f_min: w.cost,
                x_hat: w.position,
                polar: w.polar,
                segment: w.segment,
            }
        }
    };
    let lengths = trajectory_length_report(&s.traj, l, n);
    Ok(SearchOutcome {
        record,
        critical,
        trajectory: s.traj,
        lengths,
        flat_theta_fallbacks: s.flat_theta_fallbacks,
        corrector_fallbacks: s.corrector_fallbacks,
        boundary_refinements: s.boundary_refinements,
        region_clips: s.region_clips,
    })
}

/// Runs the full search with `oracle` as ground truth for membership and cost.
pub fn shaded_contour_search<O: SegmentOracle + ?Sized>(
    problem: &RelayProblem,
    oracle: &O,
    params: &SearchParams,
) -> Result<SearchOutcome, SearchError> {
    run_search(problem, oracle, oracle, params)
}

/// As [`shaded_contour_search`], but segment membership decisions come from
/// `detector` while recorded costs use the true segment.
pub fn shaded_contour_search_detected<T: SegmentOracle + ?Sized, D: SegmentOracle + ?Sized>(
    problem: &RelayProblem,
    truth: &T,
    detector: &D,
    params: &SearchParams,
) -> Result<SearchOutcome, SearchError> {
    run_search(problem, truth, detector, params)
}

/// Placement scheme identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Proposed,
    Probabilistic,
    SimpleSearch,
    Exhaustive,
    Direct,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::Proposed,
        Scheme::Probabilistic,
        Scheme::SimpleSearch,
        Scheme::Exhaustive,
        Scheme::Direct,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Probabilistic => "probabilistic",
            Scheme::SimpleSearch => "simple",
            Scheme::Exhaustive => "exhaustive",
            Scheme::Direct => "direct",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A chosen UAV position scored by the true-cost evaluator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlacementResult {
    pub scheme: Scheme,
    pub position: Point2,
    pub segment: SegmentId,
    /// True cost under the problem's cost kind.
    pub cost: f64,
    /// DF throughput in bps/Hz.
    pub throughput: f64,
    /// AF outage cost.
    pub outage: f64,
    pub trajectory_length: Option<f64>,
}

impl PlacementResult {
    /// Scores `position` with the true segment from `oracle`. All schemes go through here.
    pub fn score<O: SegmentOracle + ?Sized>(
        scheme: Scheme,
        problem: &RelayProblem,
        oracle: &O,
        position: Point2,
        trajectory_length: Option<f64>,
    ) -> Self {
        let (segment, cost) = problem.true_cost(oracle, position);
        Self {
            scheme,
            position,
            segment,
            cost,
            throughput: problem.throughput(segment, position),
            outage: problem.outage(segment, position),
            trajectory_length,
        }
    }
}

impl SearchOutcome {
    pub fn placement<O: SegmentOracle + ?Sized>(
        &self,
        problem: &RelayProblem,
        oracle: &O,
    ) -> PlacementResult {
        PlacementResult::score(
            Scheme::Proposed,
            problem,
            oracle,
            self.record.x_hat,
            Some(self.lengths.total),
        )
    }
}
