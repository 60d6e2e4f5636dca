//! TOML study configuration and the validated scenario built from it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{GainDistance, ProbabilisticConfig};
use crate::channel::{DetectorOracle, SegmentModel, SegmentParams};
use crate::cost::{CostKind, RelayCost, RelayProblem};
use crate::geometry::{Heights, Point2};
use crate::search::SearchParams;
use crate::terrain::{generate_map, BlockSpec, MapOracle, SegmentOracle, UrbanMap};

/// Reference configuration: the urban LOS/NLOS setup at desk scale.
pub const REFERENCE_CONFIG: &str = include_str!("reference.toml");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{0}")]
    Parse(String),
    #[error("invalid `{key}`: {message}")]
    Invalid { key: String, message: String },
}

impl ConfigError {
    fn invalid(key: &str, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key: key.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub scenario: ScenarioConfig,
    pub channel: SegmentModel,
    pub cost: CostConfig,
    pub search: SearchConfig,
    pub study: StudyConfig,
    pub maps: MapsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    /// Map width and depth in meters.
    pub extent: [f64; 2],
    pub bs: [f64; 2],
    pub h_bs: f64,
    pub h_uav: f64,
    pub h_user: f64,
    pub building_heights: [f64; 2],
    pub blocks: BlockSpec,
    /// Pre-serialized map used instead of generating one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    pub noise_dbm: f64,
    pub p_bs_dbm: f64,
    pub p_uav_dbm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    /// Ground-truth segment from the map.
    Oracle,
    /// Segment detected from a simulated noisy gain measurement.
    Detector,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub delta: f64,
    pub max_steps: usize,
    pub contour_tol: f64,
    pub membership: Membership,
    pub fading_snapshots: usize,
}

impl SearchConfig {
    pub fn params(&self) -> SearchParams {
        SearchParams {
            delta: self.delta,
            max_steps: self.max_steps,
            contour_tol: self.contour_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub users: usize,
    pub exhaustive_spacing: f64,
    /// Share of users in each of the cell-edge and cell-centre classes.
    pub category_fraction: f64,
    pub los_table_users: usize,
    pub los_table_samples: usize,
    pub probabilistic_distance: GainDistance,
    pub clusters: usize,
    pub cluster_users: usize,
    pub cluster_radii: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapsConfig {
    pub p_bs_dbm: f64,
    pub p_uav_dbm: f64,
    pub spacing: f64,
    /// User position; a random street point when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user: Option<[f64; 2]>,
    pub overlay: bool,
}

impl Default for Config {
    fn default() -> Self {
        Config::from_toml(REFERENCE_CONFIG).expect("reference config parses")
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.message().trim().replace('\n', " ")))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut cfg = Self::from_toml(&text)?;
        // relative map paths are resolved against the config file
        if let (Some(map), Some(dir)) = (cfg.scenario.map_file.as_mut(), path.parent()) {
            if map.is_relative() {
                *map = dir.join(&*map);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn heights(&self) -> Result<Heights, ConfigError> {
        let s = &self.scenario;
        Heights::new(s.h_uav, s.h_bs, s.h_user).map_err(|_| {
            ConfigError::invalid(
                "scenario.h_uav",
                "heights must satisfy h_uav > h_bs > h_user >= 0",
            )
        })
    }

    pub fn relay_cost(&self, kind: CostKind) -> Result<RelayCost, ConfigError> {
        let c = &self.cost;
        RelayCost::from_dbm(kind, c.p_bs_dbm, c.p_uav_dbm, c.noise_dbm)
            .map_err(|e| ConfigError::invalid("cost.p_bs_dbm", e.to_string()))
    }

    pub fn map_cost(&self, kind: CostKind) -> Result<RelayCost, ConfigError> {
        RelayCost::from_dbm(
            kind,
            self.maps.p_bs_dbm,
            self.maps.p_uav_dbm,
            self.cost.noise_dbm,
        )
        .map_err(|e| ConfigError::invalid("maps.p_bs_dbm", e.to_string()))
    }

    pub fn probabilistic(&self) -> ProbabilisticConfig {
        ProbabilisticConfig {
            spacing: self.search.delta,
            distance: self.study.probabilistic_distance,
        }
    }

    /// Checks every field that does not need the map.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = &self.scenario;
        let heights = self.heights()?;
        if !(s.extent[0] > 0.0 && s.extent[1] > 0.0) {
            return Err(ConfigError::invalid(
                "scenario.extent",
                "width and depth must be positive",
            ));
        }
        let [lo, hi] = s.building_heights;
        if !(lo >= 0.0 && hi >= lo) {
            return Err(ConfigError::invalid(
                "scenario.building_heights",
                "need 0 <= min <= max",
            ));
        }
        if hi > heights.bs {
            return Err(ConfigError::invalid(
                "scenario.h_bs",
                format!(
                    "BS at {} m is below the tallest building height {hi} m",
                    heights.bs
                ),
            ));
        }
        let bs = Point2::new(s.bs[0], s.bs[1]);
        if !(bs.x >= 0.0 && bs.x <= s.extent[0] && bs.y >= 0.0 && bs.y <= s.extent[1]) {
            return Err(ConfigError::invalid(
                "scenario.bs",
                "BS must lie inside the map extent",
            ));
        }
        validate_model(&self.channel, s.extent, &heights)?;
        self.relay_cost(CostKind::DfRate)?;
        self.map_cost(CostKind::DfRate)?;
        self.search
            .params()
            .validate()
            .map_err(|e| ConfigError::invalid("search.delta", e.to_string()))?;
        let st = &self.study;
        if st.users == 0 {
            return Err(ConfigError::invalid("study.users", "must be at least 1"));
        }
        if !(st.exhaustive_spacing > 0.0) {
            return Err(ConfigError::invalid(
                "study.exhaustive_spacing",
                "must be positive",
            ));
        }
        if !(0.0..=0.5).contains(&st.category_fraction) {
            return Err(ConfigError::invalid(
                "study.category_fraction",
                "must be in [0, 0.5]",
            ));
        }
        if st.los_table_users == 0 || st.los_table_samples == 0 {
            return Err(ConfigError::invalid(
                "study.los_table_users",
                "table sizes must be at least 1",
            ));
        }
        if st.clusters == 0 || st.cluster_users == 0 {
            return Err(ConfigError::invalid(
                "study.clusters",
                "cluster counts must be at least 1",
            ));
        }
        if st.cluster_radii.is_empty() || st.cluster_radii.iter().any(|r| !(*r >= 0.0)) {
            return Err(ConfigError::invalid(
                "study.cluster_radii",
                "need at least one non-negative radius",
            ));
        }
        if !(self.maps.spacing > 0.0) {
            return Err(ConfigError::invalid("maps.spacing", "must be positive"));
        }
        Ok(())
    }
}

fn validate_model(model: &SegmentModel, extent: [f64; 2], h: &Heights) -> Result<(), ConfigError> {
    if model.segments.is_empty() {
        return Err(ConfigError::invalid(
            "channel.segments",
            "at least one segment is required",
        ));
    }
    if let Some(SegmentParams { sigma_db, .. }) =
        model.segments.iter().find(|p| !(p.sigma_db > 0.0))
    {
        return Err(ConfigError::invalid(
            "channel.segments.sigma_db",
            format!("must be positive, got {sigma_db}"),
        ));
    }
    if !(model.alpha0 > 1.0) {
        return Err(ConfigError::invalid("channel.alpha0", "must exceed 1"));
    }
    let d_min = h.user_gap().min(h.bs_gap());
    let d_max = extent[0].hypot(extent[1]).hypot(h.uav);
    model
        .validate(d_min, d_max)
        .map_err(|e| ConfigError::invalid("channel.segments", e.to_string()))
}

/// A validated configuration with its map.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: Config,
    pub map: UrbanMap,
    pub bs: Point2,
    pub heights: Heights,
}

impl Scenario {
    pub fn build(config: Config) -> Result<Self, ConfigError> {
        config.validate()?;
        let s = &config.scenario;
        let map = match &s.map_file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
                    path: path.clone(),
                    message: e.to_string(),
                })?;
                UrbanMap::from_text(&text)
                    .map_err(|e| ConfigError::invalid("scenario.map_file", e.to_string()))?
            }
            None => generate_map(
                s.seed,
                (s.extent[0], s.extent[1]),
                &s.blocks,
                (s.building_heights[0], s.building_heights[1]),
            )
            .map_err(|e| ConfigError::invalid("scenario.blocks", e.to_string()))?,
        };
        let heights = config.heights()?;
        if map.max_building_height() > heights.bs {
            return Err(ConfigError::invalid(
                "scenario.h_bs",
                format!(
                    "BS at {} m is below a {} m building",
                    heights.bs,
                    map.max_building_height()
                ),
            ));
        }
        let bs = Point2::new(s.bs[0], s.bs[1]);
        Ok(Self {
            config,
            map,
            bs,
            heights,
        })
    }

    pub fn model(&self) -> &SegmentModel {
        &self.config.channel
    }

    pub fn num_segments(&self) -> usize {
        self.config.channel.num_segments()
    }

    pub fn oracle(&self) -> MapOracle<'_> {
        MapOracle::new(&self.map, self.heights, self.num_segments())
    }

    pub fn detector<'a, O: SegmentOracle + ?Sized>(
        &'a self,
        truth: &'a O,
        seed: u64,
    ) -> DetectorOracle<'a, O> {
        DetectorOracle {
            truth,
            model: &self.config.channel,
            heights: self.heights,
            seed,
            fading_snapshots: self.config.search.fading_snapshots,
        }
    }

    /// Rejects users inside buildings or outside the map.
    pub fn check_user(&self, user: Point2) -> Result<(), ConfigError> {
        if !self.map.extent().contains(user) || !self.map.is_outdoor(user) {
            return Err(ConfigError::invalid(
                "user",
                format!("({}, {}) is not a street position", user.x, user.y),
            ));
        }
        if user.distance(self.bs) == 0.0 {
            return Err(ConfigError::invalid("user", "user coincides with the BS"));
        }
        Ok(())
    }

    pub fn problem(&self, user: Point2, cost: RelayCost) -> Result<RelayProblem, ConfigError> {
        self.check_user(user)?;
        RelayProblem::new(
            user,
            self.bs,
            self.heights,
            self.config.channel.clone(),
            cost,
        )
        .map_err(|e| ConfigError::invalid("user", e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_config_round_trips() {
        let cfg = Config::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.channel, SegmentModel::urban_los_nlos());
        assert_eq!(Config::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn missing_key_is_named() {
        let text = REFERENCE_CONFIG.replace("delta = 5.0\n", "");
        match Config::from_toml(&text) {
            Err(ConfigError::Parse(m)) => assert!(m.contains("delta"), "{m}"),
            other => panic!("{other:?}"),
        }
        let text = format!("{REFERENCE_CONFIG}\n[extra]\nx = 1\n");
        assert!(
            matches!(Config::from_toml(&text), Err(ConfigError::Parse(m)) if m.contains("extra"))
        );
    }

    #[test]
    fn low_bs_is_rejected() {
        let mut cfg = Config::default();
        cfg.scenario.building_heights = [5.0, 48.0];
        match cfg.validate() {
            Err(ConfigError::Invalid { key, .. }) => assert_eq!(key, "scenario.h_bs"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn crossing_segment_laws_are_rejected() {
        let mut cfg = Config::default();
        cfg.channel.segments[1].log10_beta = -2.0;
        assert!(
            matches!(cfg.validate(), Err(ConfigError::Invalid { key, .. }) if key == "channel.segments")
        );
    }

    #[test]
    fn scenario_rejects_indoor_user() {
        let mut cfg = Config::default();
        cfg.scenario.extent = [300.0, 300.0];
        cfg.scenario.bs = [300.0, 300.0];
        let sc = Scenario::build(cfg).unwrap();
        let b = sc.map.buildings()[0].footprint;
        let inside = Point2::new((b.x_min + b.x_max) / 2.0, (b.y_min + b.y_max) / 2.0);
        assert!(sc.check_user(inside).is_err());
        assert!(sc.check_user(Point2::new(1.0, 1.0)).is_ok());
    }
}
