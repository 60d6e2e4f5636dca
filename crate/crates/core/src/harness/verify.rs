//! Property suites: cost conditions, gradients, trajectory monotonicity,
//! region containment, radial sign changes, distance identities and
//! trajectory length bounds.

use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cost::{
    check_condition1, check_condition2, condition_grid, CostKind, RelayObjective, RelayProblem,
};
use crate::geometry::{dist_to_bs, dist_to_user, Heights, Point2, PolarCoord};
use crate::harness::config::{Config, ConfigError};
use crate::harness::worlds::{nested_world, NestedWorld};
use crate::search::{shaded_contour_search, SearchOutcome, SearchParams, BRANCH_LENGTH_RATIO};
use crate::terrain::SegmentId;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub checked: usize,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Sizes of the suites.
#[derive(Debug, Clone, Copy)]
pub struct VerifyPlan {
    pub worlds: usize,
    pub gradient_points: usize,
    pub sign_slices: usize,
    pub distance_points: usize,
    pub delta: f64,
}

impl Default for VerifyPlan {
    fn default() -> Self {
        Self {
            worlds: 40,
            gradient_points: 10_000,
            sign_slices: 1000,
            distance_points: 10_000,
            delta: 1.0,
        }
    }
}

fn check(name: &'static str, checked: usize, failure: Option<String>) -> Check {
    Check {
        name,
        passed: failure.is_none(),
        checked,
        detail: failure.unwrap_or_default(),
    }
}

fn worlds(seed: u64, n: usize) -> Vec<NestedWorld> {
    (0..n)
        .map(|i| nested_world(seed ^ i as u64, &[2, 3, 4], (150.0, 400.0)))
        .collect()
}

fn problems(
    cfg: &Config,
    heights: Heights,
    worlds: &[NestedWorld],
) -> Result<Vec<RelayProblem>, ConfigError> {
    let mut out = Vec::new();
    for w in worlds {
        for kind in [CostKind::AfOutage, CostKind::DfRate] {
            out.push(w.problem(heights, cfg.relay_cost(kind)?));
        }
    }
    Ok(out)
}

fn conditions(cfg: &Config) -> Result<Vec<Check>, ConfigError> {
    let grid = condition_grid(8);
    let af = check_condition1(&cfg.relay_cost(CostKind::AfOutage)?, &grid);
    let df = check_condition2(&cfg.relay_cost(CostKind::DfRate)?, &grid);
    let detail = |w: Option<(f64, f64)>| w.map(|(x, y)| format!("fails at g_u={x:e}, g_b={y:e}"));
    Ok(vec![
        check("condition1_af", af.points_checked, detail(af.witness)),
        check("condition2_df", df.points_checked, detail(df.witness)),
    ])
}

/// Analytic `(F_rho, F_theta)` against central differences, compared as a
/// Cartesian gradient vector; DF points near the max-kink are skipped.
fn gradients(problems: &[RelayProblem], n: usize, rng: &mut ChaCha8Rng) -> Check {
    let tol = 1e-5;
    let mut checked = 0;
    let mut attempts = 0;
    while checked < n && attempts < 20 * n {
        attempts += 1;
        let pr = &problems[rng.random_range(0..problems.len())];
        let k = SegmentId::clamped(rng.random_range(1..=pr.num_segments()), pr.num_segments());
        let l = pr.length();
        let p = PolarCoord::new(rng.random_range(0.5..1.2 * l), rng.random_range(-3.0..3.0));
        let (g_u, g_b) = pr.gains_polar(k, p);
        if let Some((a, b)) = pr.cost().max_components(g_u, g_b) {
            if (a - b).abs() < 1e-3 * a.abs().max(b.abs()) {
                continue;
            }
        }
        let Ok((fr, ft)) = pr.fictitious_grad(k, p) else {
            continue;
        };
        let hr = 1e-5 * p.rho.max(1.0);
        let ht = 1e-7;
        let f = |q: PolarCoord| pr.fictitious(k, q);
        let dr = (f(PolarCoord::new(p.rho + hr, p.theta))
            - f(PolarCoord::new(p.rho - hr, p.theta)))
            / (2.0 * hr);
        let dt = (f(PolarCoord::new(p.rho, p.theta + ht))
            - f(PolarCoord::new(p.rho, p.theta - ht)))
            / (2.0 * ht);
        let norm = fr.hypot(ft / p.rho);
        let err = (fr - dr).hypot((ft - dt) / p.rho);
        checked += 1;
        if !(err <= tol * norm) {
            return check(
                "gradient_fd",
                checked,
                Some(format!(
                    "k={k} rho={} theta={}: error {err:e} vs norm {norm:e}",
                    p.rho, p.theta
                )),
            );
        }
    }
    check(
        "gradient_fd",
        checked,
        (checked < n).then(|| format!("only {checked} smooth points found")),
    )
}

/// Every step after a branch's angular offset moves away from the user
/// without decreasing `|theta|`.
fn monotonicity(outcomes: &[SearchOutcome]) -> Check {
    let mut checked = 0;
    for o in outcomes {
        for b in &o.trajectory.branches {
            let wps = o.trajectory.branch_waypoints(b);
            for w in wps.windows(2).skip(1) {
                checked += 1;
                let (a, c) = (w[0].polar, w[1].polar);
                if !(c.rho > a.rho && c.theta.abs() >= a.theta.abs()) {
                    return check(
                        "branch_monotonicity",
                        checked,
                        Some(format!(
                            "({}, {}) -> ({}, {})",
                            a.rho, a.theta, c.rho, c.theta
                        )),
                    );
                }
            }
        }
    }
    check("branch_monotonicity", checked, None)
}

fn containment(problems: &[RelayProblem], outcomes: &[SearchOutcome]) -> Check {
    for (i, (pr, o)) in problems.iter().zip(outcomes).enumerate() {
        let p = pr.frame().to_polar(o.record.x_hat);
        let slack = 1e-9 * pr.length();
        let inside = p.theta.abs() <= FRAC_PI_2 && p.rho <= pr.length() * p.theta.cos() + slack;
        if !inside {
            return check(
                "estimate_in_region",
                i + 1,
                Some(format!("x_hat at rho={} theta={}", p.rho, p.theta)),
            );
        }
    }
    check("estimate_in_region", outcomes.len(), None)
}

fn lengths(outcomes: &[SearchOutcome]) -> Check {
    for (i, o) in outcomes.iter().enumerate() {
        let l = &o.lengths;
        if !l.within_bound || !l.branches_within {
            return check(
                "length_bounds",
                i + 1,
                Some(format!(
                    "total {} bound {} max branch ratio {} (limit {BRANCH_LENGTH_RATIO})",
                    l.total, l.bound, l.max_branch_ratio
                )),
            );
        }
    }
    check("length_bounds", outcomes.len(), None)
}

/// `dF_k/drho` along a ray changes sign at most once, from negative to positive.
fn sign_changes(problems: &[RelayProblem], n: usize, rng: &mut ChaCha8Rng) -> Check {
    for i in 0..n {
        let pr = &problems[rng.random_range(0..problems.len())];
        let k = SegmentId::clamped(rng.random_range(1..=pr.num_segments()), pr.num_segments());
        let theta = rng.random_range(-1.5..1.5f64);
        let end = pr.length() * theta.cos();
        let samples = 400;
        let mut seen_positive = false;
        for j in 1..=samples {
            let rho = end * j as f64 / samples as f64;
            let Ok((fr, _)) = pr.fictitious_grad(k, PolarCoord::new(rho, theta)) else {
                continue;
            };
            if fr > 0.0 {
                seen_positive = true;
            } else if fr < 0.0 && seen_positive {
                return check(
                    "radial_sign_change",
                    i + 1,
                    Some(format!("k={k} theta={theta}: + to - at rho={rho}")),
                );
            }
        }
    }
    check("radial_sign_change", n, None)
}

/// At fixed `rho`, `F_k` grows with `|theta|`: strictly for smooth costs,
/// weakly for max-costs whose user-link term ignores `theta`.
fn angular_growth(problems: &[RelayProblem], n: usize, rng: &mut ChaCha8Rng) -> Check {
    for i in 0..n {
        let pr = &problems[rng.random_range(0..problems.len())];
        let k = SegmentId::clamped(rng.random_range(1..=pr.num_segments()), pr.num_segments());
        let rho = rng.random_range(0.5..1.5 * pr.length());
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let t1 = rng.random_range(0.0..3.0f64);
        let t2 = rng.random_range(t1 + 1e-3..3.14);
        let (f1, f2) = (
            pr.fictitious(k, PolarCoord::new(rho, sign * t1)),
            pr.fictitious(k, PolarCoord::new(rho, sign * t2)),
        );
        let weak = pr.cost().max_components(1.0, 1.0).is_some();
        if !(f1 < f2 || (weak && f1 <= f2)) {
            return check(
                "angular_growth",
                i + 1,
                Some(format!(
                    "k={k} rho={rho}: |theta| {t1} -> {t2} gives {f1} -> {f2}"
                )),
            );
        }
    }
    check("angular_growth", n, None)
}

fn distances(heights: &Heights, n: usize, rng: &mut ChaCha8Rng) -> Check {
    for i in 0..n {
        let u = Point2::new(rng.random_range(-1e3..1e3), rng.random_range(-1e3..1e3));
        let b = Point2::new(rng.random_range(-1e3..1e3), rng.random_range(-1e3..1e3));
        let Ok(frame) = crate::geometry::PolarFrame::new(u, b) else {
            continue;
        };
        let p = PolarCoord::new(rng.random_range(0.0..2e3), rng.random_range(-3.14..3.14));
        let x = frame.to_cartesian(p);
        let du = (frame.dist_to_user_polar(p.rho, heights) - dist_to_user(x, u, heights)).abs();
        let db = (frame.dist_to_bs_polar(p, heights) - dist_to_bs(x, b, heights)).abs();
        if du > 1e-9 || db > 1e-9 {
            return check(
                "distance_identities",
                i + 1,
                Some(format!("errors {du:e}, {db:e}")),
            );
        }
    }
    check("distance_identities", n, None)
}

/// Runs every suite with the powers and heights of `cfg`.
pub fn run_verify(cfg: &Config, plan: &VerifyPlan) -> Result<VerifyReport, ConfigError> {
    let heights = cfg.heights()?;
    let seed = cfg.scenario.seed;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ws = worlds(seed, plan.worlds);
    let probs = problems(cfg, heights, &ws)?;
    let params = SearchParams {
        delta: plan.delta,
        ..cfg.search.params()
    };
    let mut outcomes = Vec::with_capacity(probs.len());
    let mut searched = Vec::with_capacity(probs.len());
    let mut failures = Vec::new();
    for (i, pr) in probs.iter().enumerate() {
        match shaded_contour_search(pr, &ws[i / 2].field, &params) {
            Ok(o) => {
                outcomes.push(o);
                searched.push(pr.clone());
            }
            Err(e) => failures.push(format!("world {}: {e}", ws[i / 2].seed)),
        }
    }
    let mut checks = conditions(cfg)?;
    checks.push(gradients(&probs, plan.gradient_points, &mut rng));
    checks.push(check("search_runs", probs.len(), failures.first().cloned()));
    checks.push(monotonicity(&outcomes));
    checks.push(containment(&searched, &outcomes));
    checks.push(lengths(&outcomes));
    checks.push(sign_changes(&probs, plan.sign_slices, &mut rng));
    checks.push(angular_growth(&probs, plan.sign_slices, &mut rng));
    checks.push(distances(&heights, plan.distance_points, &mut rng));
    Ok(VerifyReport { checks })
}
