//! Declarative scenario files: map, model kind, observations, planner and
//! inference settings, all in one versioned JSON document. Every experiment
//! in `scenarios/` is one of these. A scenario may carry a `desk` block with
//! scaled-down planner/inference/eval settings; commands use those by
//! default and the paper-scale settings only under `--full`.

use std::collections::BTreeMap;
use std::path::{Path as FsPath, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geom::{Point, Polygon, WorldMap};
use crate::models::{
    build_belief_goal_model, build_common_goal_model, build_drone_model, build_waypoint_model,
    BuiltModel, ModelError, ObstaclePrior, WaypointStrategy,
};
use crate::neural::ProposalNet;
use crate::planner::{PlannerError, PlannerParams, TimeGrid};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("scenario is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid scenario at `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("model kind `{kind}` does not support `{operation}`")]
    UnsupportedOperation { kind: &'static str, operation: &'static str },
    #[error("neural strategy requires a net file (set inference.net_file or run train first)")]
    MissingNetFile,
}

fn invalid(field: &str, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    pub seed: u64,
    /// Polygons as lists of [x, y] pairs.
    pub map: Vec<Vec<[f64; 2]>>,
    /// Named axis-aligned rectangles [x0, y0, x1, y1] used in reports.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub regions: BTreeMap<String, [f64; 4]>,
    pub model: ModelSpec,
    /// Explicit goal for the `plan` command (the model's goal is latent).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan_goal: Option<[f64; 2]>,
    pub planner: PlannerConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inference: Option<InferenceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval: Option<EvalConfig>,
    /// Scaled-down settings for desk-sized machines.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub desk: Option<DeskOverrides>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Drone {
        start: [f64; 2],
        times: Vec<f64>,
        observations: Vec<[f64; 2]>,
        obs_noise_std: f64,
    },
    Waypoint {
        start: [f64; 2],
        times: Vec<f64>,
        observations: Vec<[f64; 2]>,
        noise_std: f64,
    },
    CommonGoal {
        starts: [[f64; 2]; 2],
        times: Vec<f64>,
        observations_a: Vec<[f64; 2]>,
        observations_b: Vec<[f64; 2]>,
        obs_noise_std: f64,
    },
    BeliefGoal {
        start: [f64; 2],
        times: Vec<f64>,
        observations: Vec<[f64; 2]>,
        obs_noise_std: f64,
        obstacle_prior: ObstaclePriorConfig,
    },
}

impl ModelSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelSpec::Drone { .. } => "drone",
            ModelSpec::Waypoint { .. } => "waypoint",
            ModelSpec::CommonGoal { .. } => "common_goal",
            ModelSpec::BeliefGoal { .. } => "belief_goal",
        }
    }

    pub fn times(&self) -> &[f64] {
        match self {
            ModelSpec::Drone { times, .. }
            | ModelSpec::Waypoint { times, .. }
            | ModelSpec::CommonGoal { times, .. }
            | ModelSpec::BeliefGoal { times, .. } => times,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct ObstaclePriorConfig {
    pub angle: [f64; 2],
    pub length: [f64; 2],
    pub width: f64,
}

impl From<ObstaclePriorConfig> for ObstaclePrior {
    fn from(c: ObstaclePriorConfig) -> Self {
        ObstaclePrior {
            angle: (c.angle[0], c.angle[1]),
            length: (c.length[0], c.length[1]),
            width: c.width,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct PlannerConfig {
    pub restarts: usize,
    pub refine_iters: usize,
    pub refine_std: f64,
    pub speed: f64,
    pub max_tree_nodes: usize,
    pub min_tree_nodes: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig::from(PlannerParams::default())
    }
}

impl From<PlannerParams> for PlannerConfig {
    fn from(p: PlannerParams) -> Self {
        PlannerConfig {
            restarts: p.restarts,
            refine_iters: p.refine_iters,
            refine_std: p.refine_std,
            speed: p.speed,
            max_tree_nodes: p.max_tree_nodes,
            min_tree_nodes: p.min_tree_nodes,
        }
    }
}

impl From<PlannerConfig> for PlannerParams {
    fn from(c: PlannerConfig) -> Self {
        PlannerParams {
            restarts: c.restarts,
            refine_iters: c.refine_iters,
            refine_std: c.refine_std,
            speed: c.speed,
            max_tree_nodes: c.max_tree_nodes,
            min_tree_nodes: c.min_tree_nodes,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Hash)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrategyConfig {
    /// Cascading Resimulation MH.
    Cr,
    /// Resimulation Nested Inference MH with K importance samples.
    Rni { k: usize },
    /// Neural Nested Inference MH with K importance samples.
    Nni { k: usize },
}

impl StrategyConfig {
    pub fn label(&self) -> String {
        match self {
            StrategyConfig::Cr => "cr".to_string(),
            StrategyConfig::Rni { k } => format!("rni-k{k}"),
            StrategyConfig::Nni { k } => format!("nni-k{k}"),
        }
    }

    pub fn needs_net(&self) -> bool {
        matches!(self, StrategyConfig::Nni { .. })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InferenceConfig {
    pub strategy: StrategyConfig,
    pub transitions: usize,
    pub replicates: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub net_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrainingConfig {
    pub examples: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub validation_fraction: f64,
    pub hidden: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            examples: 10_000,
            learning_rate: 1e-2,
            batch_size: 64,
            epochs: 50,
            validation_fraction: 0.1,
            hidden: 64,
        }
    }
}

fn default_grid() -> usize {
    crate::eval::DEFAULT_GRID
}

fn default_pseudocount() -> f64 {
    crate::eval::DEFAULT_PSEUDOCOUNT
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EvalConfig {
    pub strategies: Vec<StrategyConfig>,
    pub transition_counts: Vec<usize>,
    pub replicates: usize,
    pub reference_transitions: usize,
    pub reference_replicates: usize,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_pseudocount")]
    pub pseudocount: f64,
    /// Transition counts to mark with circles in the rendered curve, keyed
    /// by strategy label.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub marker_transitions: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct DeskOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planner: Option<PlannerConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inference: Option<InferenceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval: Option<EvalConfig>,
}

/// Which settings block to resolve from a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    /// Desk-scale overrides where present (the default).
    Desk,
    /// The scenario's paper-scale settings, verbatim.
    Full,
}

fn point(p: [f64; 2]) -> Point {
    Point::new(p[0], p[1])
}

pub fn points(ps: &[[f64; 2]]) -> Vec<Point> {
    ps.iter().map(|&p| point(p)).collect()
}

impl Scenario {
    pub fn load(path: &FsPath) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)?;
        let scenario: Scenario = serde_json::from_str(&text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario = serde_json::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Hex digest of the canonical JSON form, used as a provenance column in
    /// every output row.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_json().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", self.schema_version),
            ));
        }
        for (i, poly) in self.map.iter().enumerate() {
            Polygon::new(points(poly))
                .map_err(|e| invalid(&format!("map[{i}]"), e.to_string()))?;
        }
        for (name, r) in &self.regions {
            if r[0] >= r[2] || r[1] >= r[3] {
                return Err(invalid(
                    &format!("regions.{name}"),
                    "rectangle must be [x0, y0, x1, y1] with x0 < x1 and y0 < y1",
                ));
            }
        }
        TimeGrid::new(self.model.times().to_vec())
            .map_err(|e| invalid("model.times", e.to_string()))?;
        match &self.model {
            ModelSpec::Drone {
                observations,
                times,
                obs_noise_std,
                ..
            } => {
                check_series(observations, times, "model.observations")?;
                check_positive(*obs_noise_std, "model.obs_noise_std")?;
            }
            ModelSpec::Waypoint {
                observations,
                times,
                noise_std,
                ..
            } => {
                check_series(observations, times, "model.observations")?;
                check_positive(*noise_std, "model.noise_std")?;
            }
            ModelSpec::CommonGoal {
                observations_a,
                observations_b,
                times,
                obs_noise_std,
                ..
            } => {
                check_series(observations_a, times, "model.observations_a")?;
                check_series(observations_b, times, "model.observations_b")?;
                check_positive(*obs_noise_std, "model.obs_noise_std")?;
                if times.len() < 2 {
                    return Err(invalid(
                        "model.times",
                        "per-agent speeds need at least two time points",
                    ));
                }
            }
            ModelSpec::BeliefGoal {
                observations,
                times,
                obs_noise_std,
                obstacle_prior,
                ..
            } => {
                check_series(observations, times, "model.observations")?;
                check_positive(*obs_noise_std, "model.obs_noise_std")?;
                ObstaclePrior::from(*obstacle_prior)
                    .validate()
                    .map_err(|e| invalid("model.obstacle_prior", e.to_string()))?;
            }
        }
        self.check_planner(&self.planner, "planner")?;
        if let Some(desk) = &self.desk {
            if let Some(p) = &desk.planner {
                self.check_planner(p, "desk.planner")?;
            }
        }
        for (cfg, field) in [
            (self.eval.as_ref(), "eval"),
            (self.desk.as_ref().and_then(|d| d.eval.as_ref()), "desk.eval"),
        ] {
            if let Some(e) = cfg {
                if e.transition_counts.is_empty() {
                    return Err(invalid(
                        &format!("{field}.transition_counts"),
                        "must be non-empty",
                    ));
                }
                if e.strategies.is_empty() {
                    return Err(invalid(&format!("{field}.strategies"), "must be non-empty"));
                }
            }
        }
        Ok(())
    }

    fn check_planner(&self, cfg: &PlannerConfig, field: &str) -> Result<(), ScenarioError> {
        PlannerParams::from(*cfg)
            .validate()
            .map_err(|e: PlannerError| invalid(field, e.to_string()))
    }

    pub fn world_map(&self) -> WorldMap {
        WorldMap::new(
            self.map
                .iter()
                .map(|poly| Polygon::new(points(poly)).expect("validated at load"))
                .collect(),
        )
    }

    pub fn planner_params(&self, scale: Scale) -> PlannerParams {
        let cfg = match (scale, &self.desk) {
            (Scale::Desk, Some(d)) => d.planner.unwrap_or(self.planner),
            _ => self.planner,
        };
        cfg.into()
    }

    pub fn inference_config(&self, scale: Scale) -> Option<InferenceConfig> {
        match (scale, &self.desk) {
            (Scale::Desk, Some(d)) if d.inference.is_some() => d.inference.clone(),
            _ => self.inference.clone(),
        }
    }

    pub fn eval_config(&self, scale: Scale) -> Option<EvalConfig> {
        match (scale, &self.desk) {
            (Scale::Desk, Some(d)) if d.eval.is_some() => d.eval.clone(),
            _ => self.eval.clone(),
        }
    }

    pub fn time_grid(&self) -> TimeGrid {
        TimeGrid::new(self.model.times().to_vec()).expect("validated at load")
    }

    /// Build the scenario's model for its configured (or an explicit)
    /// inference strategy.
    pub fn build_model(
        &self,
        strategy: &StrategyConfig,
        scale: Scale,
        net: Option<Arc<ProposalNet>>,
    ) -> Result<BuiltModel, ScenarioError> {
        let map = Arc::new(self.world_map());
        let times = self.time_grid();
        let params = self.planner_params(scale);
        match &self.model {
            ModelSpec::Drone {
                start,
                observations,
                obs_noise_std,
                ..
            } => match strategy {
                StrategyConfig::Cr => Ok(build_drone_model(
                    map,
                    point(*start),
                    &times,
                    &points(observations),
                    *obs_noise_std,
                    &params,
                )?),
                other => Err(ScenarioError::Invalid {
                    field: "inference.strategy".into(),
                    reason: format!(
                        "drone model supports only cascading resimulation, got {}",
                        other.label()
                    ),
                }),
            },
            ModelSpec::Waypoint {
                start,
                observations,
                noise_std,
                ..
            } => {
                let strategy = match strategy {
                    StrategyConfig::Cr => WaypointStrategy::CascadingResimulation,
                    StrategyConfig::Rni { k } => WaypointStrategy::Resimulation {
                        sample_count: *k,
                    },
                    StrategyConfig::Nni { k } => WaypointStrategy::Neural {
                        net: net.ok_or(ScenarioError::MissingNetFile)?,
                        sample_count: *k,
                    },
                };
                Ok(build_waypoint_model(
                    map,
                    point(*start),
                    &times,
                    &points(observations),
                    *noise_std,
                    &params,
                    &strategy,
                )?)
            }
            ModelSpec::CommonGoal {
                starts,
                observations_a,
                observations_b,
                obs_noise_std,
                ..
            } => match strategy {
                StrategyConfig::Cr => Ok(build_common_goal_model(
                    map,
                    [point(starts[0]), point(starts[1])],
                    &times,
                    &points(observations_a),
                    &points(observations_b),
                    *obs_noise_std,
                    &params,
                )?),
                other => Err(ScenarioError::Invalid {
                    field: "inference.strategy".into(),
                    reason: format!(
                        "common_goal model supports only cascading resimulation, got {}",
                        other.label()
                    ),
                }),
            },
            ModelSpec::BeliefGoal {
                start,
                observations,
                obs_noise_std,
                obstacle_prior,
                ..
            } => match strategy {
                StrategyConfig::Cr => Ok(build_belief_goal_model(
                    map,
                    point(*start),
                    &times,
                    &points(observations),
                    *obs_noise_std,
                    &params,
                    &ObstaclePrior::from(*obstacle_prior),
                )?),
                other => Err(ScenarioError::Invalid {
                    field: "inference.strategy".into(),
                    reason: format!(
                        "belief_goal model supports only cascading resimulation, got {}",
                        other.label()
                    ),
                }),
            },
        }
    }

    /// (start, observations, noise std) for single-agent models.
    pub fn single_agent_parts(&self) -> Result<(Point, Vec<Point>, f64), ScenarioError> {
        match &self.model {
            ModelSpec::Drone {
                start,
                observations,
                obs_noise_std,
                ..
            } => Ok((point(*start), points(observations), *obs_noise_std)),
            ModelSpec::Waypoint {
                start,
                observations,
                noise_std,
                ..
            } => Ok((point(*start), points(observations), *noise_std)),
            other => Err(ScenarioError::UnsupportedOperation {
                kind: other.kind(),
                operation: "single-agent access",
            }),
        }
    }
}

fn check_series(
    observations: &[[f64; 2]],
    times: &[f64],
    field: &str,
) -> Result<(), ScenarioError> {
    if observations.is_empty() {
        return Err(invalid(field, "must be non-empty"));
    }
    if observations.len() != times.len() {
        return Err(invalid(
            field,
            format!("{} observations but {} time points", observations.len(), times.len()),
        ));
    }
    if observations.iter().any(|p| !point(*p).is_finite()) {
        return Err(invalid(field, "coordinates must be finite"));
    }
    Ok(())
}

fn check_positive(v: f64, field: &str) -> Result<(), ScenarioError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, "must be a positive finite number"))
    }
}
