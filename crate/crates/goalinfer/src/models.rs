//! The example probabilistic programs, assembled as choice graphs over the
//! planner primitives: the single-drone goal model, the waypoint-planner
//! variant, the two-agent common-goal model, and the joint belief+goal model
//! with an uncertain obstacle.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::geom::{Point, Polygon, WorldMap};
use crate::inference::{
    NestedInferenceAlgorithm, NiaMap, PriorProposal, Transition,
};
use crate::neural::{neural_nested_algorithm, ProposalNet};
use crate::planner::{
    agent_path, agent_waypoint_path, noise_logdensity, waypoint_walk_given, PlannerParams,
    TimeGrid, WaypointTrace,
};
use crate::stats::normal_logpdf;
use crate::trace::{
    ArgFn, InternalTrace, ModelGraph, ModelGraphBuilder, Primitive, TraceError, Value,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{observed} observations but {times} time points")]
    ObservationCountMismatch { observed: usize, times: usize },
    #[error("model needs at least one observation")]
    NoObservations,
    #[error("degenerate prior range for {0}")]
    DegeneratePrior(&'static str),
    #[error("per-agent speed needs at least two time points")]
    TooFewTimesForSpeed,
    #[error(transparent)]
    Graph(#[from] TraceError),
    #[error("obstacle rectangle construction failed: {0}")]
    Obstacle(#[from] crate::geom::GeomError),
}

/// A graph plus the kernel schedule and nested inference algorithms that the
/// experiments run it with.
pub struct BuiltModel {
    pub graph: ModelGraph,
    pub schedule: Vec<Transition>,
    pub nias: NiaMap,
}

/// Uniform([0,1]^2) prior over a location.
pub fn uniform_point_primitive() -> Arc<Primitive> {
    Arc::new(Primitive::with_density(
        "uniform_point",
        Box::new(|_, rng| Value::Point(Point::new(rng.gen(), rng.gen()))),
        Box::new(|z, _| {
            if z.as_point().in_unit_square() {
                0.0
            } else {
                f64::NEG_INFINITY
            }
        }),
    ))
}

pub fn bernoulli_primitive(p: f64) -> Arc<Primitive> {
    Arc::new(Primitive::with_density(
        "bernoulli",
        Box::new(move |_, rng| Value::Bool(rng.gen_bool(p))),
        Box::new(move |z, _| if z.as_bool() { p.ln() } else { (1.0 - p).ln() }),
    ))
}

pub fn uniform_real_primitive(lo: f64, hi: f64) -> Arc<Primitive> {
    let width = hi - lo;
    Arc::new(Primitive::with_density(
        "uniform_real",
        Box::new(move |_, rng| Value::Real(rng.gen_range(lo..hi))),
        Box::new(move |z, _| {
            let v = z.as_real();
            if (lo..=hi).contains(&v) {
                -width.ln()
            } else {
                f64::NEG_INFINITY
            }
        }),
    ))
}

/// Isotropic Gaussian around a point argument; used for per-timepoint
/// observation noise.
pub fn gaussian_point_primitive(std: f64) -> Arc<Primitive> {
    Arc::new(Primitive::with_density(
        "gaussian_point",
        Box::new(move |args, rng| {
            let mean = args[0].as_point();
            let noise = Normal::new(0.0, std).expect("positive observation std");
            Value::Point(Point::new(mean.x + noise.sample(rng), mean.y + noise.sample(rng)))
        }),
        Box::new(move |z, args| {
            let p = z.as_point();
            let mean = args[0].as_point();
            normal_logpdf(p.x, mean.x, std) + normal_logpdf(p.y, mean.y, std)
        }),
    ))
}

/// Likelihood-free planner choice: goal argument in, walked series out.
pub fn agent_path_primitive(
    map: Arc<WorldMap>,
    start: Point,
    times: TimeGrid,
    params: PlannerParams,
) -> Arc<Primitive> {
    Arc::new(Primitive::likelihood_free(
        "agent_path",
        Box::new(move |args, rng| {
            let goal = args[0].as_point();
            Value::Series(agent_path(&map, start, goal, &times, &params, rng))
        }),
    ))
}

/// Waypoint planner without observation noise, for layouts that observe the
/// walked series through separate Gaussian children.
pub fn waypoint_plan_primitive(
    map: Arc<WorldMap>,
    start: Point,
    times: TimeGrid,
    params: PlannerParams,
) -> Arc<Primitive> {
    Arc::new(Primitive::likelihood_free(
        "waypoint_plan",
        Box::new(move |args, rng| {
            let goal = args[0].as_point();
            let waypoint = Point::new(rng.gen(), rng.gen());
            let used: bool = rng.gen_bool(0.5);
            Value::Series(waypoint_walk_given(
                &map, start, goal, &times, &params, used, waypoint, rng,
            ))
        }),
    ))
}

/// Full waypoint planner including additive noise; trace-simulable so nested
/// inference can constrain its output directly.
pub fn waypoint_path_primitive(
    map: Arc<WorldMap>,
    start: Point,
    times: TimeGrid,
    params: PlannerParams,
    noise_std: f64,
) -> Arc<Primitive> {
    let traced_map = Arc::clone(&map);
    let traced_times = times.clone();
    Arc::new(
        Primitive::likelihood_free(
            "waypoint_path",
            Box::new(move |args, rng| {
                let goal = args[0].as_point();
                let (observed, _) =
                    agent_waypoint_path(&map, start, goal, &times, &params, noise_std, rng);
                Value::Series(observed)
            }),
        )
        .traced(Box::new(move |args, rng| {
            let goal = args[0].as_point();
            let (observed, trace) = agent_waypoint_path(
                &traced_map,
                start,
                goal,
                &traced_times,
                &params,
                noise_std,
                rng,
            );
            (InternalTrace::Waypoint(trace), Value::Series(observed))
        })),
    )
}

/// Resimulation nested inference for the waypoint planner: internal traces
/// come from the prior, so the density ratio is just the observation-noise
/// density of z around the walked series.
pub fn waypoint_resimulation_nia(
    map: Arc<WorldMap>,
    start: Point,
    times: TimeGrid,
    params: PlannerParams,
    noise_std: f64,
    sample_count: usize,
) -> NestedInferenceAlgorithm {
    NestedInferenceAlgorithm::new(
        Box::new(move |args, _z, rng| {
            let goal = args[0].as_point();
            let waypoint = Point::new(rng.gen(), rng.gen());
            let used: bool = rng.gen_bool(0.5);
            let walked =
                waypoint_walk_given(&map, start, goal, &times, &params, used, waypoint, rng);
            InternalTrace::Waypoint(WaypointTrace {
                used_waypoint: used,
                waypoint,
                walked,
            })
        }),
        Box::new(move |u, z, _args| {
            noise_logdensity(z.as_series(), &u.as_waypoint().walked, noise_std)
        }),
        sample_count,
    )
}

fn first_parent() -> ArgFn {
    Box::new(|parents| vec![parents[0].clone()])
}

fn series_element(index: usize) -> ArgFn {
    Box::new(move |parents| vec![Value::Point(parents[0].as_series()[index])])
}

fn check_observations(observed: usize, times: usize) -> Result<(), ModelError> {
    if observed == 0 {
        return Err(ModelError::NoObservations);
    }
    if observed != times {
        return Err(ModelError::ObservationCountMismatch { observed, times });
    }
    Ok(())
}

/// Single drone with a latent goal: goal -> path -> per-timepoint Gaussian
/// observations, run with Cascading Resimulation MH and a prior proposal on
/// the goal.
pub fn build_drone_model(
    map: Arc<WorldMap>,
    start: Point,
    times: &TimeGrid,
    observations: &[Point],
    obs_noise_std: f64,
    params: &PlannerParams,
) -> Result<BuiltModel, ModelError> {
    check_observations(observations.len(), times.len())?;
    let mut builder = ModelGraphBuilder::new()
        .root("goal", uniform_point_primitive())
        .choice(
            "path",
            agent_path_primitive(Arc::clone(&map), start, times.clone(), *params),
            &["goal"],
            first_parent(),
        );
    let obs_primitive = gaussian_point_primitive(obs_noise_std);
    for (i, &obs) in observations.iter().enumerate() {
        let id = format!("obs_{i}");
        builder = builder
            .choice(&id, Arc::clone(&obs_primitive), &["path"], series_element(i))
            .constrain(&id, Value::Point(obs));
    }
    let graph = builder.build()?;
    let kernel = PriorProposal::new(&graph, &["goal"]).expect("goal is tractable");
    Ok(BuiltModel {
        graph,
        schedule: vec![Transition::CascadingResimulation(Box::new(kernel))],
        nias: NiaMap::new(),
    })
}

/// Inference strategy for the waypoint model.
pub enum WaypointStrategy {
    /// Cascading resimulation over a split layout: a noiseless planner node
    /// with tractable Gaussian observation children.
    CascadingResimulation,
    /// Nested inference with prior (resimulation) proposals over the
    /// planner's internal trace.
    Resimulation { sample_count: usize },
    /// Nested inference with the learned network proposing (w, g').
    Neural {
        net: Arc<ProposalNet>,
        sample_count: usize,
    },
}

/// Same goal-inference task with the waypoint planner. Nested-inference
/// strategies constrain the noisy planner output directly; the cascading
/// layout splits the noise out into tractable observation children.
pub fn build_waypoint_model(
    map: Arc<WorldMap>,
    start: Point,
    times: &TimeGrid,
    observations: &[Point],
    noise_std: f64,
    params: &PlannerParams,
    strategy: &WaypointStrategy,
) -> Result<BuiltModel, ModelError> {
    check_observations(observations.len(), times.len())?;
    match strategy {
        WaypointStrategy::CascadingResimulation => {
            let mut builder = ModelGraphBuilder::new()
                .root("goal", uniform_point_primitive())
                .choice(
                    "path",
                    waypoint_plan_primitive(Arc::clone(&map), start, times.clone(), *params),
                    &["goal"],
                    first_parent(),
                );
            let obs_primitive = gaussian_point_primitive(noise_std);
            for (i, &obs) in observations.iter().enumerate() {
                let id = format!("obs_{i}");
                builder = builder
                    .choice(&id, Arc::clone(&obs_primitive), &["path"], series_element(i))
                    .constrain(&id, Value::Point(obs));
            }
            let graph = builder.build()?;
            let kernel = PriorProposal::new(&graph, &["goal"]).expect("goal is tractable");
            Ok(BuiltModel {
                graph,
                schedule: vec![Transition::CascadingResimulation(Box::new(kernel))],
                nias: NiaMap::new(),
            })
        }
        WaypointStrategy::Resimulation { sample_count } => {
            let nia = waypoint_resimulation_nia(
                Arc::clone(&map),
                start,
                times.clone(),
                *params,
                noise_std,
                *sample_count,
            );
            build_waypoint_nested(map, start, times, observations, noise_std, params, nia)
        }
        WaypointStrategy::Neural { net, sample_count } => {
            let nia = neural_nested_algorithm(
                Arc::clone(net),
                Arc::clone(&map),
                start,
                times.clone(),
                *params,
                noise_std,
                *sample_count,
            );
            build_waypoint_nested(map, start, times, observations, noise_std, params, nia)
        }
    }
}

fn build_waypoint_nested(
    map: Arc<WorldMap>,
    start: Point,
    times: &TimeGrid,
    observations: &[Point],
    noise_std: f64,
    params: &PlannerParams,
    nia: NestedInferenceAlgorithm,
) -> Result<BuiltModel, ModelError> {
    let graph = ModelGraphBuilder::new()
        .root("goal", uniform_point_primitive())
        .choice(
            "noisy_path",
            waypoint_path_primitive(map, start, times.clone(), *params, noise_std),
            &["goal"],
            first_parent(),
        )
        .constrain("noisy_path", Value::Series(observations.to_vec()))
        .build()?;
    let mut nias = NiaMap::new();
    nias.insert(graph.node_index("noisy_path")?, nia);
    let kernel = PriorProposal::new(&graph, &["goal"]).expect("goal is tractable");
    Ok(BuiltModel {
        graph,
        schedule: vec![Transition::NestedInference(Box::new(kernel))],
        nias,
    })
}

/// Average speed along an observed series: total length over total time.
pub fn observed_speed(observations: &[Point], times: &TimeGrid) -> Result<f64, ModelError> {
    if times.len() < 2 {
        return Err(ModelError::TooFewTimesForSpeed);
    }
    let length: f64 = observations.windows(2).map(|w| w[0].dist(w[1])).sum();
    let span = times.times()[times.len() - 1] - times.times()[0];
    Ok(length / span)
}

/// Two agents whose destinations may or may not coincide: a shared-goal flag
/// routes agent b's planner to goal_a or goal_b. Inference uses one blocked
/// prior proposal over all three latents with cascading resimulation.
pub fn build_common_goal_model(
    map: Arc<WorldMap>,
    starts: [Point; 2],
    times: &TimeGrid,
    observations_a: &[Point],
    observations_b: &[Point],
    obs_noise_std: f64,
    params: &PlannerParams,
) -> Result<BuiltModel, ModelError> {
    check_observations(observations_a.len(), times.len())?;
    check_observations(observations_b.len(), times.len())?;
    let params_a = PlannerParams {
        speed: observed_speed(observations_a, times)?,
        ..*params
    };
    let params_b = PlannerParams {
        speed: observed_speed(observations_b, times)?,
        ..*params
    };

    let mut builder = ModelGraphBuilder::new()
        .root("is_common_goal", bernoulli_primitive(0.5))
        .root("goal_a", uniform_point_primitive())
        .root("goal_b", uniform_point_primitive())
        .choice(
            "path_a",
            agent_path_primitive(Arc::clone(&map), starts[0], times.clone(), params_a),
            &["goal_a"],
            first_parent(),
        )
        .choice(
            "path_b",
            agent_path_primitive(Arc::clone(&map), starts[1], times.clone(), params_b),
            &["is_common_goal", "goal_a", "goal_b"],
            Box::new(|parents| {
                let effective = if parents[0].as_bool() {
                    parents[1].clone()
                } else {
                    parents[2].clone()
                };
                vec![effective]
            }),
        );
    let obs_primitive = gaussian_point_primitive(obs_noise_std);
    for (agent, series) in [("a", observations_a), ("b", observations_b)] {
        let path_id = format!("path_{agent}");
        for (i, &obs) in series.iter().enumerate() {
            let id = format!("obs_{agent}_{i}");
            builder = builder
                .choice(&id, Arc::clone(&obs_primitive), &[&path_id], series_element(i))
                .constrain(&id, Value::Point(obs));
        }
    }
    let graph = builder.build()?;
    let kernel = PriorProposal::new(&graph, &["is_common_goal", "goal_a", "goal_b"])
        .expect("latents are tractable");
    Ok(BuiltModel {
        graph,
        schedule: vec![Transition::CascadingResimulation(Box::new(kernel))],
        nias: NiaMap::new(),
    })
}

/// Prior ranges for the uncertain obstacle in the belief+goal model.
#[derive(Debug, Clone, Copy)]
pub struct ObstaclePrior {
    pub angle: (f64, f64),
    pub length: (f64, f64),
    pub width: f64,
}

impl Default for ObstaclePrior {
    fn default() -> Self {
        ObstaclePrior {
            angle: (0.0, std::f64::consts::PI),
            length: (0.1, 0.5),
            width: 0.02,
        }
    }
}

impl ObstaclePrior {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.angle.0 < self.angle.1) {
            return Err(ModelError::DegeneratePrior("angle"));
        }
        if !(self.length.0 < self.length.1) || self.length.0 <= 0.0 {
            return Err(ModelError::DegeneratePrior("length"));
        }
        if self.width <= 0.0 {
            return Err(ModelError::DegeneratePrior("width"));
        }
        Ok(())
    }
}

/// Thin rectangle extending from a post location along `angle` for `length`,
/// with the given width centered on the spine.
pub fn obstacle_rect(post: Point, angle: f64, length: f64, width: f64) -> Polygon {
    let (dx, dy) = (angle.cos(), angle.sin());
    let (nx, ny) = (-dy * width / 2.0, dx * width / 2.0);
    let tip = Point::new(post.x + dx * length, post.y + dy * length);
    Polygon::new(vec![
        Point::new(post.x - nx, post.y - ny),
        Point::new(tip.x - nx, tip.y - ny),
        Point::new(tip.x + nx, tip.y + ny),
        Point::new(post.x + nx, post.y + ny),
    ])
    .expect("positive width and length give a simple rectangle")
}

/// Joint inference over an agent's goal and its belief about an extra
/// obstacle (post location, orientation, length) that the agent plans
/// against. One blocked prior proposal covers all four latents.
pub fn build_belief_goal_model(
    known_objects: Arc<WorldMap>,
    start: Point,
    times: &TimeGrid,
    observations: &[Point],
    obs_noise_std: f64,
    params: &PlannerParams,
    prior: &ObstaclePrior,
) -> Result<BuiltModel, ModelError> {
    check_observations(observations.len(), times.len())?;
    prior.validate()?;

    let planner_params = *params;
    let times_inner = times.clone();
    let width = prior.width;
    let belief_path = Primitive::likelihood_free(
        "belief_agent_path",
        Box::new(move |args, rng| {
            let goal = args[0].as_point();
            let post = args[1].as_point();
            let angle = args[2].as_real();
            let length = args[3].as_real();
            let mut believed = (*known_objects).clone();
            believed.push(obstacle_rect(post, angle, length, width));
            Value::Series(agent_path(
                &believed,
                start,
                goal,
                &times_inner,
                &planner_params,
                rng,
            ))
        }),
    );

    let mut builder = ModelGraphBuilder::new()
        .root("goal", uniform_point_primitive())
        .root("obstacle_post", uniform_point_primitive())
        .root("obstacle_angle", uniform_real_primitive(prior.angle.0, prior.angle.1))
        .root(
            "obstacle_length",
            uniform_real_primitive(prior.length.0, prior.length.1),
        )
        .choice(
            "path",
            Arc::new(belief_path),
            &["goal", "obstacle_post", "obstacle_angle", "obstacle_length"],
            Box::new(|parents| parents.to_vec()),
        );
    let obs_primitive = gaussian_point_primitive(obs_noise_std);
    for (i, &obs) in observations.iter().enumerate() {
        let id = format!("obs_{i}");
        builder = builder
            .choice(&id, Arc::clone(&obs_primitive), &["path"], series_element(i))
            .constrain(&id, Value::Point(obs));
    }
    let graph = builder.build()?;
    let kernel = PriorProposal::new(
        &graph,
        &["goal", "obstacle_post", "obstacle_angle", "obstacle_length"],
    )
    .expect("latents are tractable");
    Ok(BuiltModel {
        graph,
        schedule: vec![Transition::CascadingResimulation(Box::new(kernel))],
        nias: NiaMap::new(),
    })
}
