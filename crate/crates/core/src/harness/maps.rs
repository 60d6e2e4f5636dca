//! Received-power and end-to-end capacity maps over UAV positions.

use serde::Serialize;

use crate::cost::{CostKind, RelayCost, RelayProblem};
use crate::geometry::{dist_to_bs, dist_to_user, Point2};
use crate::harness::config::{ConfigError, Scenario};
use crate::harness::svg::{color, Canvas};
use crate::report::{sig6, CsvTable};
use crate::search::{shaded_contour_search, PlacementResult, SearchError, SearchOutcome};
use crate::terrain::{Rect, SegmentId, SegmentOracle};

const SVG_WIDTH_PX: f64 = 600.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MapCell {
    pub center: Point2,
    pub segment: SegmentId,
    /// UAV-user received power in dBm.
    pub power_dbm: f64,
    /// DF end-to-end capacity in bps/Hz.
    pub capacity: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PowerCapacityMap {
    pub user: Point2,
    pub bs: Point2,
    pub spacing: f64,
    pub cells: Vec<MapCell>,
    #[serde(skip)]
    pub trajectory: Option<SearchOutcome>,
    pub placement: Option<PlacementResult>,
}

/// Power and capacity of a UAV at `x`, using the true segment from `oracle`.
pub fn map_cell<O: SegmentOracle + ?Sized>(
    problem: &RelayProblem,
    oracle: &O,
    uav_power_dbm: f64,
    x: Point2,
) -> MapCell {
    let h = problem.heights();
    let segment = oracle.segment(x, problem.user());
    let g_u = problem
        .model()
        .gain_user_at(segment, dist_to_user(x, problem.user(), h));
    let g_b = problem.model().gain_bs_at(dist_to_bs(x, problem.bs(), h));
    MapCell {
        center: x,
        segment,
        power_dbm: uav_power_dbm + 10.0 * g_u.log10(),
        capacity: problem.cost().df_throughput(g_u, g_b),
    }
}

/// Cell-centre grid over the whole map for the user at `user`, with the DF
/// search trajectory when `overlay` is set.
pub fn emit_power_capacity_maps(
    sc: &Scenario,
    user: Point2,
    overlay: bool,
) -> Result<PowerCapacityMap, MapsError> {
    let cost: RelayCost = sc.config.map_cost(CostKind::DfRate)?;
    let problem = sc.problem(user, cost)?;
    let oracle = sc.oracle();
    let spacing = sc.config.maps.spacing;
    let e = sc.map.extent();
    let nx = (e.width() / spacing).ceil() as usize;
    let ny = (e.height() / spacing).ceil() as usize;
    let mut cells = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let x = Point2::new(
                (e.x_min + (i as f64 + 0.5) * spacing).min(e.x_max),
                (e.y_min + (j as f64 + 0.5) * spacing).min(e.y_max),
            );
            cells.push(map_cell(&problem, &oracle, sc.config.maps.p_uav_dbm, x));
        }
    }
    let (trajectory, placement) = if overlay {
        let out = shaded_contour_search(&problem, &oracle, &sc.config.search.params())?;
        let placement = out.placement(&problem, &oracle);
        (Some(out), Some(placement))
    } else {
        (None, None)
    };
    Ok(PowerCapacityMap {
        user,
        bs: sc.bs,
        spacing,
        cells,
        trajectory,
        placement,
    })
}

#[derive(Debug, thiserror::Error)]
pub enum MapsError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Search(#[from] SearchError),
}

impl PowerCapacityMap {
    pub fn to_csv(&self) -> String {
        let mut t = CsvTable::new(&["x", "y", "segment", "power_dbm", "capacity"]);
        for c in &self.cells {
            t.push(vec![
                sig6(c.center.x),
                sig6(c.center.y),
                c.segment.to_string(),
                sig6(c.power_dbm),
                sig6(c.capacity),
            ]);
        }
        t.to_csv()
    }

    fn heatmap(&self, extent: Rect, value: impl Fn(&MapCell) -> f64) -> String {
        let (lo, hi) = self
            .cells
            .iter()
            .map(&value)
            .filter(|v| v.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                (a.min(v), b.max(v))
            });
        let span = if hi > lo { hi - lo } else { 1.0 };
        let mut c = Canvas::new(extent, SVG_WIDTH_PX);
        let half = self.spacing / 2.0;
        for cell in &self.cells {
            let r = Rect::new(
                cell.center.x - half,
                cell.center.y - half,
                cell.center.x + half,
                cell.center.y + half,
            );
            c.rect(&r, &color((value(cell) - lo) / span));
        }
        if let Some(out) = &self.trajectory {
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
        }
        c.circle(self.user, 5.0, "#e00000");
        c.triangle(self.bs, 6.0, "#0040ff");
        c.finish()
    }

    pub fn power_svg(&self, extent: Rect) -> String {
        self.heatmap(extent, |c| c.power_dbm)
    }

    pub fn capacity_svg(&self, extent: Rect) -> String {
        self.heatmap(extent, |c| c.capacity)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::Config;

    fn scenario(extent: f64, free: bool) -> Scenario {
        let mut cfg = Config::default();
        cfg.scenario.extent = [extent, extent];
        cfg.scenario.bs = [extent, extent];
        cfg.maps.spacing = 20.0;
        let mut sc = Scenario::build(cfg).unwrap();
        if free {
            sc.map = crate::terrain::UrbanMap::empty(sc.map.extent());
        }
        sc
    }

    #[test]
    fn free_space_power_decays_with_distance() {
        let sc = scenario(300.0, true);
        let user = Point2::new(150.0, 150.0);
        let m = emit_power_capacity_maps(&sc, user, false).unwrap();
        let mut by_dist: Vec<(f64, f64)> = m
            .cells
            .iter()
            .map(|c| (c.center.distance(user), c.power_dbm))
            .collect();
        by_dist.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in by_dist.windows(2) {
            if w[1].0 > w[0].0 + 1e-9 {
                assert!(w[1].1 < w[0].1);
            }
        }
    }

    #[test]
    fn grid_matches_direct_evaluation_and_placement() {
        let sc = scenario(300.0, false);
        let user = Point2::new(5.0, 5.0);
        let m = emit_power_capacity_maps(&sc, user, true).unwrap();
        assert_eq!(m.cells.len(), 15 * 15);
        let problem = sc
            .problem(user, sc.config.map_cost(CostKind::DfRate).unwrap())
            .unwrap();
        let oracle = sc.oracle();
        for c in m.cells.iter().step_by(17) {
            let k = oracle.segment(c.center, user);
            let (g_u, g_b) = problem.gains(k, c.center);
            assert_eq!(k, c.segment);
            assert!((c.power_dbm - (36.0 + 10.0 * g_u.log10())).abs() < 1e-9);
            let rate = 0.5
                * (1.0 + problem.cost().p_u * g_u)
                    .log2()
                    .min((1.0 + problem.cost().p_b * g_b).log2());
            assert!((c.capacity - rate).abs() < 1e-9);
        }
        let p = m.placement.unwrap();
        let at = map_cell(&problem, &oracle, 36.0, p.position);
        assert!((at.capacity - p.throughput).abs() < 1e-12);
        let svg = m.capacity_svg(sc.map.extent());
        assert!(svg.contains("<polyline"));
        assert_eq!(m.to_csv().lines().count(), 1 + 225);
    }
}
