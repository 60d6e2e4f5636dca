//! Synthetic nested worlds and the grid-optimality trial run on them.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::baselines::GridSegments;
use crate::channel::{SegmentModel, SegmentParams};
use crate::cost::{CostKind, RelayCost, RelayProblem};
use crate::geometry::{Heights, Point2};
use crate::search::{shaded_contour_search, LengthReport, SearchError, SearchParams};
use crate::terrain::{FieldShape, NestedBoundaryField, SegmentId, SegmentOracle};

/// `K` segments with exponent, offset and shadowing interpolated linearly
/// between the urban LOS and NLOS laws.
pub fn graded_model(num_segments: usize) -> SegmentModel {
    let base = SegmentModel::urban_los_nlos();
    let (los, nlos) = (base.segments[0], base.segments[1]);
    let k = num_segments.max(1);
    let segments = (0..k)
        .map(|i| {
            if i + 1 == k && k > 1 {
                return nlos;
            }
            let t = if k == 1 {
                0.0
            } else {
                i as f64 / (k - 1) as f64
            };
            SegmentParams {
                alpha: los.alpha + t * (nlos.alpha - los.alpha),
                log10_beta: los.log10_beta + t * (nlos.log10_beta - los.log10_beta),
                sigma_db: los.sigma_db + t * (nlos.sigma_db - los.sigma_db),
            }
        })
        .collect();
    SegmentModel { segments, ..base }
}

/// A user, a BS and a random nested boundary field around the user.
#[derive(Debug, Clone)]
pub struct NestedWorld {
    pub seed: u64,
    pub user: Point2,
    pub bs: Point2,
    pub field: NestedBoundaryField,
}

impl NestedWorld {
    pub fn num_segments(&self) -> usize {
        self.field.num_segments()
    }

    pub fn problem(&self, heights: Heights, cost: RelayCost) -> RelayProblem {
        RelayProblem::new(
            self.user,
            self.bs,
            heights,
            graded_model(self.num_segments()),
            cost,
        )
        .expect("world BS and user are distinct")
    }
}

/// World `seed`: `K` drawn from `segment_choices`, BS-user distance uniform on
/// `length_range`, boundary radii uniform on `[0.05, 1.1] * L` over 360 bins.
pub fn nested_world(seed: u64, segment_choices: &[usize], length_range: (f64, f64)) -> NestedWorld {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = segment_choices[rng.random_range(0..segment_choices.len())];
    let l = rng.random_range(length_range.0..=length_range.1);
    let user = Point2::new(
        rng.random_range(-500.0..500.0),
        rng.random_range(-500.0..500.0),
    );
    let dir = rng.random_range(0.0..TAU);
    let bs = user + Point2::new(dir.cos(), dir.sin()) * l;
    let shape = FieldShape {
        bins: 360,
        r_min: 0.05 * l,
        r_max: 1.1 * l,
        pieces: (1, 12),
    };
    let field = NestedBoundaryField::random(&mut rng, k, &shape);
    NestedWorld {
        seed,
        user,
        bs,
        field,
    }
}

/// Search optimum against a fine exhaustive grid on one world.
#[derive(Debug, Clone, Serialize)]
pub struct OptimalityTrial {
    pub seed: u64,
    pub num_segments: usize,
    pub kind: CostKind,
    pub length: f64,
    pub search_min: f64,
    pub grid_min: f64,
    /// Largest change of the grid minimiser's segment cost across the cells around it.
    pub epsilon: f64,
    pub passed: bool,
    pub lengths: LengthReport,
    pub steps: usize,
}

/// Largest `|F_k(y) - F_k(x)|` over the 8 grid neighbours `y` of `x`.
pub fn cell_variation(problem: &RelayProblem, k: SegmentId, x: Point2, spacing: f64) -> f64 {
    let e = problem.frame().axis();
    let n = Point2::new(-e.y, e.x);
    let f0 = problem.fictitious_at(k, x);
    let mut eps: f64 = 0.0;
    for i in -1..=1 {
        for j in -1..=1 {
            let y = x + e * (i as f64 * spacing) + n * (j as f64 * spacing);
            eps = eps.max((problem.fictitious_at(k, y) - f0).abs());
        }
    }
    eps
}

/// Runs the search and the grid on `problem` for both cost kinds; the grid's
/// segment lookups are shared.
pub fn optimality_trials<O: SegmentOracle + ?Sized>(
    seed: u64,
    problem: &RelayProblem,
    oracle: &O,
    params: &SearchParams,
    grid_spacing: f64,
) -> Result<Vec<OptimalityTrial>, SearchError> {
    let grid = GridSegments::evaluate(problem, oracle, grid_spacing)
        .map_err(|e| SearchError::InvalidParams(e.to_string()))?;
    let mut out = Vec::new();
    for kind in [CostKind::AfOutage, CostKind::DfRate] {
        let cost = problem.cost().with_kind(kind);
        let pr = RelayProblem::new(
            problem.user(),
            problem.bs(),
            *problem.heights(),
            problem.model().clone(),
            cost,
        )
        .map_err(SearchError::Cost)?;
        let outcome = shaded_contour_search(&pr, oracle, params)?;
        let (xg, grid_min) = grid.argmin(&pr).expect("grid contains the user position");
        let kg = oracle.segment(xg, pr.user());
        let epsilon = cell_variation(&pr, kg, xg, grid_spacing);
        let search_min = outcome.record.f_min;
        out.push(OptimalityTrial {
            seed,
            num_segments: pr.num_segments(),
            kind,
            length: pr.length(),
            search_min,
            grid_min,
            epsilon,
            passed: search_min <= grid_min + epsilon,
            lengths: outcome.lengths.clone(),
            steps: outcome.trajectory.waypoints.len(),
        });
    }
    Ok(out)
}
