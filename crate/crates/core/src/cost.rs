//! Relay cost functions of the two link gains, the per-segment fictitious
//! costs `F_k(rho, theta)` with analytic partials, the structural conditions
//! that make the contour search globally optimal, and the cluster virtual user.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::SegmentModel;
use crate::geometry::{
    dist_to_bs, dist_to_user, GeometryError, Heights, Point2, PolarCoord, PolarFrame,
};
use crate::terrain::{SegmentId, SegmentOracle};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostError {
    #[error("gains must be positive, got g_u={g_u}, g_b={g_b}")]
    NonPositiveGain { g_u: f64, g_b: f64 },
    #[error("transmit power must be positive and finite, got {0}")]
    Power(f64),
    #[error("gradient undefined at rho = 0")]
    GradientAtOrigin,
    #[error("cluster has no users")]
    EmptyCluster,
    #[error("user {index} at ({x}, {y}) lies outside the cluster radius {radius}")]
    UserOutsideCluster {
        index: usize,
        x: f64,
        y: f64,
        radius: f64,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    /// High-SNR outage of amplify-and-forward relaying, `1/(P_u g_u) + 1/(P_b g_b)`.
    AfOutage,
    /// Negated decode-and-forward rate, `max{-log2(1+P_b g_b), -log2(1+P_u g_u)}`.
    DfRate,
}

impl CostKind {
    pub fn name(self) -> &'static str {
        match self {
            CostKind::AfOutage => "af_outage",
            CostKind::DfRate => "df_rate",
        }
    }
}

/// Converts a transmit power in dBm into a linear SNR scale factor over the noise floor.
pub fn snr_scale(power_dbm: f64, noise_dbm: f64) -> f64 {
    10f64.powf((power_dbm - noise_dbm) / 10.0)
}

/// A cost kind with its noise-normalised transmit powers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelayCost {
    pub kind: CostKind,
    pub p_b: f64,
    pub p_u: f64,
}

/// First and second partial derivatives of a two-argument cost `f(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Partials {
    pub fx: f64,
    pub fy: f64,
    pub fxx: f64,
    pub fyy: f64,
    pub fxy: f64,
}

/// A cost of (UAV-user gain, BS-UAV gain) exposing the structure the
/// optimality conditions are stated in.
pub trait RelayObjective {
    fn value(&self, x: f64, y: f64) -> f64;
    fn partials(&self, x: f64, y: f64) -> Partials;
    /// `(f1(x), f2(y))` when the cost is written as `max{f1(x), f2(y)}`.
    fn max_components(&self, _x: f64, _y: f64) -> Option<(f64, f64)> {
        None
    }
}

impl RelayCost {
    pub fn new(kind: CostKind, p_b: f64, p_u: f64) -> Result<Self, CostError> {
        for p in [p_b, p_u] {
            if !(p > 0.0 && p.is_finite()) {
                return Err(CostError::Power(p));
            }
        }
        Ok(Self { kind, p_b, p_u })
    }

    pub fn from_dbm(
        kind: CostKind,
        p_b_dbm: f64,
        p_u_dbm: f64,
        noise_dbm: f64,
    ) -> Result<Self, CostError> {
        Self::new(
            kind,
            snr_scale(p_b_dbm, noise_dbm),
            snr_scale(p_u_dbm, noise_dbm),
        )
    }

    pub fn with_kind(self, kind: CostKind) -> Self {
        Self { kind, ..self }
    }

    pub fn eval(&self, g_u: f64, g_b: f64) -> Result<f64, CostError> {
        if !(g_u > 0.0 && g_b > 0.0) {
            return Err(CostError::NonPositiveGain { g_u, g_b });
        }
        Ok(self.value(g_u, g_b))
    }

    fn user_branch(&self, g_u: f64) -> f64 {
        -(self.p_u * g_u).ln_1p() / LN_2
    }

    fn bs_branch(&self, g_b: f64) -> f64 {
        -(self.p_b * g_b).ln_1p() / LN_2
    }

    /// Decode-and-forward throughput `1/2 min{log2(1+P_b g_b), log2(1+P_u g_u)}` in bps/Hz.
    pub fn df_throughput(&self, g_u: f64, g_b: f64) -> f64 {
        -0.5 * self.user_branch(g_u).max(self.bs_branch(g_b))
    }

    /// AF outage-cost value regardless of `kind`.
    pub fn af_outage(&self, g_u: f64, g_b: f64) -> f64 {
        1.0 / (self.p_u * g_u) + 1.0 / (self.p_b * g_b)
    }

    /// Gradient of the cost with respect to two variables, given each gain's
    /// gradient. At a DF kink the per-variable one-sided derivative from the
    /// left is used, which is the smaller of the two branch partials.
    pub fn chain(&self, g_u: f64, g_b: f64, dg_u: [f64; 2], dg_b: [f64; 2]) -> [f64; 2] {
        match self.kind {
            CostKind::AfOutage => {
                let fu = -1.0 / (self.p_u * g_u * g_u);
                let fb = -1.0 / (self.p_b * g_b * g_b);
                [fu * dg_u[0] + fb * dg_b[0], fu * dg_u[1] + fb * dg_b[1]]
            }
            CostKind::DfRate => {
                let user = self.user_branch(g_u);
                let bs = self.bs_branch(g_b);
                let fu = -self.p_u / ((1.0 + self.p_u * g_u) * LN_2);
                let fb = -self.p_b / ((1.0 + self.p_b * g_b) * LN_2);
                let gu = [fu * dg_u[0], fu * dg_u[1]];
                let gb = [fb * dg_b[0], fb * dg_b[1]];
                if user > bs {
                    gu
                } else if bs > user {
                    gb
                } else {
                    [gu[0].min(gb[0]), gu[1].min(gb[1])]
                }
            }
        }
    }
}

impl RelayObjective for RelayCost {
    fn value(&self, g_u: f64, g_b: f64) -> f64 {
        match self.kind {
            CostKind::AfOutage => self.af_outage(g_u, g_b),
            CostKind::DfRate => self.user_branch(g_u).max(self.bs_branch(g_b)),
        }
    }

    fn partials(&self, x: f64, y: f64) -> Partials {
        match self.kind {
            CostKind::AfOutage => Partials {
                fx: -1.0 / (self.p_u * x * x),
                fy: -1.0 / (self.p_b * y * y),
                fxx: 2.0 / (self.p_u * x * x * x),
                fyy: 2.0 / (self.p_b * y * y * y),
                fxy: 0.0,
            },
            CostKind::DfRate => {
                let branch = |p: f64, v: f64| {
                    let q = 1.0 + p * v;
                    (-p / (q * LN_2), p * p / (q * q * LN_2))
                };
                if self.user_branch(x) >= self.bs_branch(y) {
                    let (fx, fxx) = branch(self.p_u, x);
                    Partials {
                        fx,
                        fxx,
                        ..Partials::default()
                    }
                } else {
                    let (fy, fyy) = branch(self.p_b, y);
                    Partials {
                        fy,
                        fyy,
                        ..Partials::default()
                    }
                }
            }
        }
    }

    fn max_components(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        match self.kind {
            CostKind::AfOutage => None,
            CostKind::DfRate => Some((self.user_branch(x), self.bs_branch(y))),
        }
    }
}

/// Outcome of checking a structural condition on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub holds: bool,
    pub points_checked: usize,
    /// First grid point `(x, y)` where the condition failed.
    pub witness: Option<(f64, f64)>,
}

/// Log-spaced evaluation grid `10^-6 ..= 10^6` with `per_decade` points per decade.
pub fn condition_grid(per_decade: usize) -> Vec<f64> {
    let n = 12 * per_decade.max(1);
    (0..=n)
        .map(|i| 10f64.powf(-6.0 + 12.0 * i as f64 / n as f64))
        .collect()
}

/// Checks `f_xy = 0`, `x f_xx + 2 f_x >= 0` and `y f_yy + 2 f_y >= 0` at
/// every grid pair, to a relative tolerance of `1e-9` of the terms involved.
pub fn check_condition1(f: &dyn RelayObjective, grid: &[f64]) -> ConditionReport {
    let tol = 1e-9;
    let mut checked = 0;
    for &x in grid {
        for &y in grid {
            checked += 1;
            let p = f.partials(x, y);
            let cx = x * p.fxx + 2.0 * p.fx;
            let cy = y * p.fyy + 2.0 * p.fy;
            let scale_x = (x * p.fxx).abs() + (2.0 * p.fx).abs();
            let scale_y = (y * p.fyy).abs() + (2.0 * p.fy).abs();
            let cross_scale = (p.fxx * p.fyy).abs().sqrt();
            let ok =
                cx >= -tol * scale_x && cy >= -tol * scale_y && p.fxy.abs() <= tol * cross_scale;
            if !ok || !cx.is_finite() || !cy.is_finite() {
                return ConditionReport {
                    holds: false,
                    points_checked: checked,
                    witness: Some((x, y)),
                };
            }
        }
    }
    ConditionReport {
        holds: true,
        points_checked: checked,
        witness: None,
    }
}

/// Checks that `f = max{f1(x), f2(y)}` with `f1` depending on `x` only,
/// `f2` on `y` only, and both strictly decreasing along the grid.
pub fn check_condition2(f: &dyn RelayObjective, grid: &[f64]) -> ConditionReport {
    let mut checked = 0;
    let fail = |x: f64, y: f64, checked: usize| ConditionReport {
        holds: false,
        points_checked: checked,
        witness: Some((x, y)),
    };
    let y_ref = grid[grid.len() / 2];
    let x_ref = y_ref;
    for (i, &x) in grid.iter().enumerate() {
        for (j, &y) in grid.iter().enumerate() {
            checked += 1;
            let Some((f1, f2)) = f.max_components(x, y) else {
                return fail(x, y, checked);
            };
            if f.value(x, y) != f1.max(f2) {
                return fail(x, y, checked);
            }
            let (f1_ref, _) = f.max_components(x, y_ref).expect("components exist");
            let (_, f2_ref) = f.max_components(x_ref, y).expect("components exist");
            if f1 != f1_ref || f2 != f2_ref {
                return fail(x, y, checked);
            }
            if i > 0 {
                let (prev, _) = f.max_components(grid[i - 1], y).expect("components exist");
                if !(f1 < prev) {
                    return fail(x, y, checked);
                }
            }
            if j > 0 {
                let (_, prev) = f.max_components(x, grid[j - 1]).expect("components exist");
                if !(f2 < prev) {
                    return fail(x, y, checked);
                }
            }
        }
    }
    ConditionReport {
        holds: true,
        points_checked: checked,
        witness: None,
    }
}

/// One relay placement problem: a user, the BS, heights, channel and cost.
/// Evaluates the fictitious costs `F_k` in polar and Cartesian form.
#[derive(Debug, Clone)]
pub struct RelayProblem {
    frame: PolarFrame,
    heights: Heights,
    model: SegmentModel,
    cost: RelayCost,
}

impl RelayProblem {
    pub fn new(
        user: Point2,
        bs: Point2,
        heights: Heights,
        model: SegmentModel,
        cost: RelayCost,
    ) -> Result<Self, CostError> {
        Ok(Self {
            frame: PolarFrame::new(user, bs)?,
            heights,
            model,
            cost,
        })
    }

    pub fn frame(&self) -> &PolarFrame {
        &self.frame
    }

    pub fn user(&self) -> Point2 {
        self.frame.user()
    }

    pub fn bs(&self) -> Point2 {
        self.frame.bs()
    }

    pub fn length(&self) -> f64 {
        self.frame.length()
    }

    pub fn heights(&self) -> &Heights {
        &self.heights
    }

    pub fn model(&self) -> &SegmentModel {
        &self.model
    }

    pub fn cost(&self) -> &RelayCost {
        &self.cost
    }

    pub fn num_segments(&self) -> usize {
        self.model.num_segments()
    }

    /// `(g_u^(k), g_b)` at polar position `p`.
    pub fn gains_polar(&self, k: SegmentId, p: PolarCoord) -> (f64, f64) {
        let d_u = self.frame.dist_to_user_polar(p.rho, &self.heights);
        let d_b = self.frame.dist_to_bs_polar(p, &self.heights);
        (self.model.gain_user_at(k, d_u), self.model.gain_bs_at(d_b))
    }

    /// `(g_u^(k), g_b)` at Cartesian position `x`.
    pub fn gains(&self, k: SegmentId, x: Point2) -> (f64, f64) {
        let d_u = dist_to_user(x, self.user(), &self.heights);
        let d_b = dist_to_bs(x, self.bs(), &self.heights);
        (self.model.gain_user_at(k, d_u), self.model.gain_bs_at(d_b))
    }

    /// Fictitious cost `F_k(rho, theta)`.
    pub fn fictitious(&self, k: SegmentId, p: PolarCoord) -> f64 {
        let (g_u, g_b) = self.gains_polar(k, p);
        self.cost.value(g_u, g_b)
    }

    /// Fictitious cost evaluated through Cartesian distances.
    pub fn fictitious_at(&self, k: SegmentId, x: Point2) -> f64 {
        let (g_u, g_b) = self.gains(k, x);
        self.cost.value(g_u, g_b)
    }

    /// `(dF_k/drho, dF_k/dtheta)`.
    pub fn fictitious_grad(&self, k: SegmentId, p: PolarCoord) -> Result<(f64, f64), CostError> {
        if !(p.rho > 0.0) {
            return Err(CostError::GradientAtOrigin);
        }
        let h = &self.heights;
        let l = self.frame.length();
        let d_u = self.frame.dist_to_user_polar(p.rho, h);
        let d_b = self.frame.dist_to_bs_polar(p, h);
        let g_u = self.model.gain_user_at(k, d_u);
        let g_b = self.model.gain_bs_at(d_b);
        let alpha_k = self.model.segment(k).alpha;
        let (sin, cos) = p.theta.sin_cos();
        let dgu_rho = -alpha_k * g_u / d_u * (p.rho / d_u);
        let dgb = -self.model.alpha0 * g_b / d_b;
        let dgb_rho = dgb * (p.rho - l * cos) / d_b;
        let dgb_theta = dgb * (p.rho * l * sin) / d_b;
        let [fr, ft] = self
            .cost
            .chain(g_u, g_b, [dgu_rho, 0.0], [dgb_rho, dgb_theta]);
        Ok((fr, ft))
    }

    /// True cost `F(x)` with the segment supplied by `oracle`.
    pub fn true_cost<O: SegmentOracle + ?Sized>(&self, oracle: &O, x: Point2) -> (SegmentId, f64) {
        let k = oracle.segment(x, self.user());
        (k, self.fictitious_at(k, x))
    }

    /// DF throughput in bps/Hz as if the UAV at `x` were in segment `k`.
    pub fn throughput(&self, k: SegmentId, x: Point2) -> f64 {
        let (g_u, g_b) = self.gains(k, x);
        self.cost.df_throughput(g_u, g_b)
    }

    /// AF outage cost as if the UAV at `x` were in segment `k`.
    pub fn outage(&self, k: SegmentId, x: Point2) -> f64 {
        let (g_u, g_b) = self.gains(k, x);
        self.cost.af_outage(g_u, g_b)
    }
}

/// Users clustered around a hotspot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserCluster {
    pub center: Point2,
    pub radius: f64,
    pub users: Vec<Point2>,
}

impl UserCluster {
    pub fn new(center: Point2, radius: f64, users: Vec<Point2>) -> Result<Self, CostError> {
        if users.is_empty() {
            return Err(CostError::EmptyCluster);
        }
        for (index, u) in users.iter().enumerate() {
            if u.distance(center) > radius * (1.0 + 1e-12) + 1e-12 {
                return Err(CostError::UserOutsideCluster {
                    index,
                    x: u.x,
                    y: u.y,
                    radius,
                });
            }
        }
        Ok(Self {
            center,
            radius,
            users,
        })
    }
}

/// Segment oracle of the virtual user: majority vote of the real users'
/// segments, ties toward the smaller index. The queried user position is ignored.
#[derive(Debug, Clone, Copy)]
pub struct ClusterOracle<'a, O: ?Sized> {
    pub oracle: &'a O,
    pub users: &'a [Point2],
}

impl<'a, O: SegmentOracle + ?Sized> ClusterOracle<'a, O> {
    pub fn new(oracle: &'a O, cluster: &'a UserCluster) -> Self {
        Self {
            oracle,
            users: &cluster.users,
        }
    }
}

impl<O: SegmentOracle + ?Sized> SegmentOracle for ClusterOracle<'_, O> {
    fn num_segments(&self) -> usize {
        self.oracle.num_segments()
    }

    fn segment(&self, x: Point2, _user: Point2) -> SegmentId {
        let n = self.oracle.num_segments();
        let mut votes = vec![0usize; n];
        for &u in self.users {
            votes[self.oracle.segment(x, u).index()] += 1;
        }
        let mut best = 0;
        for (i, &v) in votes.iter().enumerate() {
            if v > votes[best] {
                best = i;
            }
        }
        SegmentId::clamped(best + 1, n)
    }
}

/// Cost of the virtual user at the cluster centre; `problem` must be posed
/// with the centre as its user.
pub fn virtual_user_cost<O: SegmentOracle + ?Sized>(
    cluster: &UserCluster,
    x: Point2,
    oracle: &O,
    problem: &RelayProblem,
) -> f64 {
    let k = ClusterOracle::new(oracle, cluster).segment(x, cluster.center);
    problem.fictitious_at(k, x)
}

/// Mean DF throughput over the cluster's users, each with its own segment.
pub fn sum_rate<O: SegmentOracle + ?Sized>(
    cluster: &UserCluster,
    x: Point2,
    oracle: &O,
    model: &SegmentModel,
    heights: &Heights,
    bs: Point2,
    cost: &RelayCost,
) -> f64 {
    let g_b = model.gain_bs_at(dist_to_bs(x, bs, heights));
    let total: f64 = cluster
        .users
        .iter()
        .map(|&u| {
            let k = oracle.segment(x, u);
            let g_u = model.gain_user_at(k, dist_to_user(x, u, heights));
            cost.df_throughput(g_u, g_b)
        })
        .sum();
    total / cluster.users.len() as f64
}
