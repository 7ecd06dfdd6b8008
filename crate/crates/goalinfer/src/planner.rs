//! Randomized goal-directed motion model: RRT growth, path simplification,
//! local refinement, restarts, constant-speed walking, and a waypoint
//! variant that routes through an optional intermediate destination.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::geom::{
    clear_line, nearest_vertex_index, path_length, valid_state, Path, Point, WorldMap,
};
use crate::rng::{substream, Stream};
use crate::stats::normal_logpdf;

#[derive(Debug, Error, PartialEq)]
pub enum PlannerError {
    #[error("invalid planner endpoint: ({0:?} is inside an obstacle or outside the world)")]
    InvalidEndpoint(Point),
    #[error("invalid planner parameters: {0}")]
    BadParams(String),
    #[error("time grid must be non-empty, non-negative, and strictly increasing")]
    BadTimeGrid,
}

/// Tuning knobs for the planner. Defaults follow the drone experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerParams {
    /// Local refinement iterations (N).
    pub refine_iters: usize,
    /// Independent planner restarts among which the shortest path wins (R).
    pub restarts: usize,
    /// Maximum RRT growth iterations (J).
    pub max_tree_nodes: usize,
    /// Minimum growth iterations before the goal may be connected (S).
    pub min_tree_nodes: usize,
    /// Std of the per-coordinate refinement perturbation.
    pub refine_std: f64,
    /// Agent speed in world units per time unit (v).
    pub speed: f64,
}

impl Default for PlannerParams {
    fn default() -> Self {
        PlannerParams {
            refine_iters: 1000,
            restarts: 10,
            max_tree_nodes: 10_000,
            min_tree_nodes: 2000,
            refine_std: 0.01,
            speed: 0.5,
        }
    }
}

impl PlannerParams {
    pub fn validate(&self) -> Result<(), PlannerError> {
        if self.restarts == 0 {
            return Err(PlannerError::BadParams("restarts must be positive".into()));
        }
        if self.max_tree_nodes == 0 {
            return Err(PlannerError::BadParams("max_tree_nodes must be positive".into()));
        }
        if self.min_tree_nodes >= self.max_tree_nodes {
            return Err(PlannerError::BadParams(
                "min_tree_nodes must be < max_tree_nodes".into(),
            ));
        }
        if !(self.refine_std > 0.0) {
            return Err(PlannerError::BadParams("refine_std must be positive".into()));
        }
        if !(self.speed > 0.0) {
            return Err(PlannerError::BadParams("speed must be positive".into()));
        }
        Ok(())
    }
}

/// `None` means `no-path-found`.
pub type PlanResult = Option<Path>;

/// Strictly increasing sequence of non-negative observation times.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self, PlannerError> {
        if times.is_empty() || times[0] < 0.0 || times.iter().any(|t| !t.is_finite()) {
            return Err(PlannerError::BadTimeGrid);
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(PlannerError::BadTimeGrid);
        }
        Ok(TimeGrid { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Agent locations at each grid time.
pub type LocationSeries = Vec<Point>;

/// Grow a rapidly-exploring random tree from `s` until some vertex gains
/// line of sight to `g` after at least `min_tree_nodes` iterations, then
/// extract the tree path. Returns `None` after `max_tree_nodes` iterations.
pub fn rrt(
    m: &WorldMap,
    s: Point,
    g: Point,
    params: &PlannerParams,
    rng: &mut Stream,
) -> Result<PlanResult, PlannerError> {
    check_endpoints(m, s, g)?;
    let mut nodes: Vec<Point> = vec![s];
    let mut parent: Vec<usize> = vec![usize::MAX];

    for j in 1..=params.max_tree_nodes {
        let a = Point::new(rng.gen(), rng.gen());
        if !valid_state(m, a) {
            continue;
        }
        let bi = nearest_vertex_index(&nodes, a).expect("tree is never empty");
        let b = nodes[bi];
        let eps: f64 = rng.gen();
        let c = Point::new(eps * a.x + (1.0 - eps) * b.x, eps * a.y + (1.0 - eps) * b.y);
        if clear_line(m, b, c) {
            nodes.push(c);
            parent.push(bi);
            if j > params.min_tree_nodes && clear_line(m, c, g) {
                return Ok(Some(path_in_tree(&nodes, &parent, g)));
            }
        }
    }
    Ok(None)
}

fn path_in_tree(nodes: &[Point], parent: &[usize], g: Point) -> Path {
    let mut rev = vec![g];
    let mut i = nodes.len() - 1;
    loop {
        rev.push(nodes[i]);
        if parent[i] == usize::MAX {
            break;
        }
        i = parent[i];
    }
    rev.reverse();
    Path::new(rev).expect("tree path has start and goal")
}

/// One-pass shortcutting: drop an interior point whenever the last kept
/// point still has line of sight to the following point.
pub fn simplify_path(m: &WorldMap, p: &Path) -> Path {
    let pts = p.points();
    let mut kept = vec![pts[0]];
    for i in 1..pts.len() - 1 {
        let last = *kept.last().unwrap();
        if !clear_line(m, last, pts[i + 1]) {
            kept.push(pts[i]);
        }
    }
    kept.push(*pts.last().unwrap());
    Path::new(kept).expect("simplify keeps endpoints")
}

/// Stochastic local shortening: perturb each interior coordinate with
/// Gaussian noise, keeping a move only when it strictly shortens the path
/// and stays collision-free. Endpoints are fixed.
pub fn refine_path(m: &WorldMap, p: &Path, params: &PlannerParams, rng: &mut Stream) -> Path {
    let mut pts = p.points().to_vec();
    if pts.len() <= 2 {
        return p.clone();
    }
    let noise = Normal::new(0.0, params.refine_std).expect("validated refine_std");
    let mut d = path_length(p);
    for _ in 0..params.refine_iters {
        for pi in 1..pts.len() - 1 {
            for coord in 0..2 {
                let eps = noise.sample(rng);
                let mut cand = pts[pi];
                if coord == 0 {
                    cand.x += eps;
                } else {
                    cand.y += eps;
                }
                let old_local = pts[pi - 1].dist(pts[pi]) + pts[pi].dist(pts[pi + 1]);
                let new_local = pts[pi - 1].dist(cand) + cand.dist(pts[pi + 1]);
                let d_new = d - old_local + new_local;
                if d_new < d
                    && valid_state(m, cand)
                    && clear_line(m, pts[pi - 1], cand)
                    && clear_line(m, cand, pts[pi + 1])
                {
                    pts[pi] = cand;
                    d = d_new;
                }
            }
        }
    }
    Path::new(pts).expect("refinement preserves point count")
}

/// Run `restarts` independent rrt -> simplify -> refine pipelines and return
/// the shortest successful path; `None` only if every restart fails. Each
/// restart runs on its own sub-stream so it can be replayed in isolation.
pub fn plan_path(
    m: &WorldMap,
    s: Point,
    g: Point,
    params: &PlannerParams,
    rng: &mut Stream,
) -> Result<PlanResult, PlannerError> {
    check_endpoints(m, s, g)?;
    let base: u64 = rng.gen();
    let mut best: Option<(Path, f64)> = None;
    for r in 0..params.restarts {
        let mut sub = substream(base, r as u64);
        if let Some(raw) = rrt(m, s, g, params, &mut sub)? {
            let path = refine_path(m, &simplify_path(m, &raw), params, &mut sub);
            let d = path_length(&path);
            if best.as_ref().map_or(true, |(_, bd)| d < *bd) {
                best = Some((path, d));
            }
        }
    }
    Ok(best.map(|(p, _)| p))
}

/// Position after walking the path at speed `v` for time `t`: the point at
/// arc length `t * v`, clamped to the final point once the path is spent.
pub fn walk_to(p: &Path, t: f64, v: f64) -> Point {
    let target = t * v;
    let mut travelled = 0.0;
    for w in p.points().windows(2) {
        let delta = w[0].dist(w[1]);
        if travelled + delta > target {
            let e = target - travelled;
            let frac = if delta > 0.0 { e / delta } else { 0.0 };
            return Point::new(
                w[0].x + frac * (w[1].x - w[0].x),
                w[0].y + frac * (w[1].y - w[0].y),
            );
        }
        travelled += delta;
    }
    *p.points().last().unwrap()
}

pub fn walk_path(p: &Path, t: &TimeGrid, v: f64) -> LocationSeries {
    t.times().iter().map(|&ti| walk_to(p, ti, v)).collect()
}

/// Model of an agent's path given its destination: plan, then walk at
/// constant speed. If planning fails (or an endpoint is infeasible) the
/// agent stays at the start for all times, keeping the model total.
pub fn agent_path(
    m: &WorldMap,
    s: Point,
    g: Point,
    t: &TimeGrid,
    params: &PlannerParams,
    rng: &mut Stream,
) -> LocationSeries {
    match plan_path(m, s, g, params, rng) {
        Ok(Some(p)) => walk_path(&p, t, params.speed),
        _ => vec![s; t.len()],
    }
}

/// Internal randomness of one `agent_waypoint_path` run that downstream
/// consumers need: the waypoint decision plus the noiseless walked series
/// (a sufficient summary of the planner's internal choices).
#[derive(Debug, Clone, PartialEq)]
pub struct WaypointTrace {
    pub used_waypoint: bool,
    pub waypoint: Point,
    pub walked: LocationSeries,
}

/// Waypoint variant: draw a candidate waypoint uniformly, flip a fair coin
/// for whether to route through it, plan the one or two legs, walk, and add
/// i.i.d. Gaussian observation noise per coordinate. A failed leg degrades
/// to staying at that leg's start.
pub fn agent_waypoint_path(
    m: &WorldMap,
    s: Point,
    g: Point,
    t: &TimeGrid,
    params: &PlannerParams,
    noise_std: f64,
    rng: &mut Stream,
) -> (LocationSeries, WaypointTrace) {
    let waypoint = Point::new(rng.gen(), rng.gen());
    let used: bool = rng.gen_bool(0.5);
    let walked = waypoint_walk_given(m, s, g, t, params, used, waypoint, rng);
    let noise = Normal::new(0.0, noise_std).expect("noise_std must be positive");
    let observed = walked
        .iter()
        .map(|p| Point::new(p.x + noise.sample(rng), p.y + noise.sample(rng)))
        .collect();
    (
        observed,
        WaypointTrace {
            used_waypoint: used,
            waypoint,
            walked,
        },
    )
}

/// Plan and walk the waypoint model's path with the waypoint decision fixed;
/// used both by the forward model and by nested inference over it.
#[allow(clippy::too_many_arguments)]
pub fn waypoint_walk_given(
    m: &WorldMap,
    s: Point,
    g: Point,
    t: &TimeGrid,
    params: &PlannerParams,
    used: bool,
    waypoint: Point,
    rng: &mut Stream,
) -> LocationSeries {
    let fallback = || Path::new(vec![s, s]).unwrap();
    let path = if used {
        match plan_path(m, s, waypoint, params, rng) {
            Ok(Some(p1)) => match plan_path(m, waypoint, g, params, rng) {
                Ok(Some(p2)) => concat_paths(&p1, &p2),
                _ => p1,
            },
            _ => fallback(),
        }
    } else {
        match plan_path(m, s, g, params, rng) {
            Ok(Some(p)) => p,
            _ => fallback(),
        }
    };
    walk_path(&path, t, params.speed)
}

fn concat_paths(p1: &Path, p2: &Path) -> Path {
    let mut pts = p1.points().to_vec();
    pts.extend_from_slice(&p2.points()[1..]);
    Path::new(pts).expect("concatenation keeps endpoints")
}

/// Log density of the additive observation noise: the probability of seeing
/// `observed` given the noiseless walked series.
pub fn noise_logdensity(observed: &[Point], walked: &[Point], noise_std: f64) -> f64 {
    assert_eq!(observed.len(), walked.len(), "series lengths must match");
    observed
        .iter()
        .zip(walked.iter())
        .map(|(o, w)| {
            normal_logpdf(o.x, w.x, noise_std) + normal_logpdf(o.y, w.y, noise_std)
        })
        .sum()
}

fn check_endpoints(m: &WorldMap, s: Point, g: Point) -> Result<(), PlannerError> {
    if !valid_state(m, s) {
        return Err(PlannerError::InvalidEndpoint(s));
    }
    if !valid_state(m, g) {
        return Err(PlannerError::InvalidEndpoint(g));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{clear_path, Polygon};
    use crate::rng::seeded;

    fn fast_params() -> PlannerParams {
        PlannerParams {
            refine_iters: 50,
            restarts: 2,
            max_tree_nodes: 2000,
            min_tree_nodes: 0,
            refine_std: 0.01,
            speed: 0.5,
        }
    }

    fn square(x0: f64, y0: f64, x1: f64, y1: f64) -> Polygon {
        Polygon::new(vec![
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
        ])
        .unwrap()
    }

    /// Ring of obstacles fully enclosing (0.5, 0.5) with no gap.
    fn sealed_ring() -> WorldMap {
        WorldMap::new(vec![
            square(0.3, 0.3, 0.7, 0.35),
            square(0.3, 0.65, 0.7, 0.7),
            square(0.3, 0.35, 0.35, 0.65),
            square(0.65, 0.35, 0.7, 0.65),
        ])
    }

    #[test]
    fn rrt_unobstructed_finds_clear_path() {
        let m = WorldMap::empty();
        let mut rng = seeded(1);
        let p = rrt(&m, Point::new(0.1, 0.1), Point::new(0.9, 0.9), &fast_params(), &mut rng)
            .unwrap()
            .expect("path in empty map");
        assert!(clear_path(&m, &p));
        assert_eq!(p.start(), Point::new(0.1, 0.1));
        assert_eq!(p.goal(), Point::new(0.9, 0.9));
    }

    #[test]
    fn rrt_unreachable_goal_returns_none() {
        let m = sealed_ring();
        let params = PlannerParams {
            max_tree_nodes: 500,
            ..fast_params()
        };
        let mut rng = seeded(2);
        let r = rrt(&m, Point::new(0.1, 0.1), Point::new(0.5, 0.5), &params, &mut rng).unwrap();
        assert!(r.is_none());
    }

    #[test]
    fn rrt_invalid_endpoint_is_an_error() {
        let m = WorldMap::new(vec![square(0.4, 0.4, 0.6, 0.6)]);
        let mut rng = seeded(3);
        let bad = Point::new(0.5, 0.5);
        let r = rrt(&m, bad, Point::new(0.9, 0.9), &fast_params(), &mut rng);
        assert_eq!(r, Err(PlannerError::InvalidEndpoint(bad)));
        let r = rrt(&m, Point::new(0.9, 0.9), bad, &fast_params(), &mut rng);
        assert_eq!(r, Err(PlannerError::InvalidEndpoint(bad)));
    }

    #[test]
    fn simplify_drops_collinear_point() {
        let m = WorldMap::empty();
        let p = Path::new(vec![
            Point::new(0.0, 0.0),
            Point::new(0.5, 0.0),
            Point::new(1.0, 0.0),
        ])
        .unwrap();
        let s = simplify_path(&m, &p);
        assert_eq!(s.points(), &[Point::new(0.0, 0.0), Point::new(1.0, 0.0)]);
    }

    #[test]
    fn simplify_keeps_two_point_path() {
        let m = WorldMap::empty();
        let p = Path::new(vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0)]).unwrap();
        assert_eq!(simplify_path(&m, &p), p);
    }

    #[test]
    fn simplify_retains_load_bearing_corner() {
        let m = WorldMap::new(vec![square(0.4, 0.4, 0.6, 0.6)]);
        let p = Path::new(vec![
            Point::new(0.3, 0.5),
            Point::new(0.3, 0.3),
            Point::new(0.7, 0.3),
            Point::new(0.7, 0.5),
        ])
        .unwrap();
        assert!(clear_path(&m, &p));
        let s = simplify_path(&m, &p);
        assert!(clear_path(&m, &s));
        assert!(path_length(&s) <= path_length(&p) + 1e-12);
        // The direct line is blocked, so at least one corner must survive.
        assert!(s.len() >= 3);
    }

    #[test]
    fn refine_noop_on_two_point_path() {
        let m = WorldMap::empty();
        let p = Path::new(vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0)]).unwrap();
        let mut rng = seeded(4);
        assert_eq!(refine_path(&m, &p, &fast_params(), &mut rng), p);
    }

    #[test]
    fn refine_with_vanishing_std_changes_little() {
        let m = WorldMap::empty();
        let p = Path::new(vec![
            Point::new(0.0, 0.0),
            Point::new(0.5, 0.4),
            Point::new(1.0, 0.0),
        ])
        .unwrap();
        let params = PlannerParams {
            refine_std: 1e-12,
            refine_iters: 1000,
            ..fast_params()
        };
        let mut rng = seeded(5);
        let refined = refine_path(&m, &p, &params, &mut rng);
        assert!(path_length(&p) - path_length(&refined) < 1e-6);
    }

    #[test]
    fn refine_straightens_zigzag() {
        // Median final length over 20 seeds within 2% of the straight line.
        let m = WorldMap::empty();
        let zigzag = Path::new(vec![
            Point::new(0.1, 0.1),
            Point::new(0.3, 0.3),
            Point::new(0.5, 0.1),
            Point::new(0.7, 0.3),
            Point::new(0.9, 0.1),
        ])
        .unwrap();
        let straight = zigzag.start().dist(zigzag.goal());
        let params = PlannerParams {
            refine_iters: 1000,
            refine_std: 0.01,
            ..fast_params()
        };
        let mut lengths: Vec<f64> = (0..20)
            .map(|seed| {
                let mut rng = seeded(100 + seed);
                path_length(&refine_path(&m, &zigzag, &params, &mut rng))
            })
            .collect();
        lengths.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = lengths[lengths.len() / 2];
        assert!(
            median <= straight * 1.02,
            "median {median} vs straight {straight}"
        );
    }

    #[test]
    fn plan_path_single_restart_matches_pipeline() {
        let m = WorldMap::empty();
        let params = PlannerParams {
            restarts: 1,
            ..fast_params()
        };
        let s = Point::new(0.1, 0.1);
        let g = Point::new(0.9, 0.9);

        let mut rng = seeded(6);
        let planned = plan_path(&m, s, g, &params, &mut rng).unwrap().unwrap();

        // Replay the single restart through its derived sub-stream.
        let mut rng = seeded(6);
        let base: u64 = rng.gen();
        let mut sub = substream(base, 0);
        let raw = rrt(&m, s, g, &params, &mut sub).unwrap().unwrap();
        let expected = refine_path(&m, &simplify_path(&m, &raw), &params, &mut sub);
        assert_eq!(planned, expected);
    }

    #[test]
    fn plan_path_takes_min_over_replayed_restarts() {
        let m = WorldMap::new(vec![square(0.4, 0.3, 0.6, 0.7)]);
        let params = PlannerParams {
            restarts: 10,
            ..fast_params()
        };
        let s = Point::new(0.1, 0.5);
        let g = Point::new(0.9, 0.5);

        let mut rng = seeded(7);
        let planned = plan_path(&m, s, g, &params, &mut rng).unwrap().unwrap();

        let mut rng = seeded(7);
        let base: u64 = rng.gen();
        let mut best = f64::INFINITY;
        for r in 0..params.restarts {
            let mut sub = substream(base, r as u64);
            if let Some(raw) = rrt(&m, s, g, &params, &mut sub).unwrap() {
                let p = refine_path(&m, &simplify_path(&m, &raw), &params, &mut sub);
                best = best.min(path_length(&p));
            }
        }
        assert!((path_length(&planned) - best).abs() < 1e-12);
    }

    #[test]
    fn plan_path_unreachable_is_none() {
        let m = sealed_ring();
        let params = PlannerParams {
            max_tree_nodes: 300,
            ..fast_params()
        };
        let mut rng = seeded(8);
        assert!(plan_path(&m, Point::new(0.1, 0.1), Point::new(0.5, 0.5), &params, &mut rng)
            .unwrap()
            .is_none());
    }

    #[test]
    fn walk_path_examples() {
        let p = Path::new(vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0)]).unwrap();
        let t = TimeGrid::new(vec![1.0]).unwrap();
        assert_eq!(walk_path(&p, &t, 0.5), vec![Point::new(0.5, 0.0)]);

        // Beyond the path duration the agent stays at the goal.
        let t = TimeGrid::new(vec![100.0]).unwrap();
        assert_eq!(walk_path(&p, &t, 0.5), vec![Point::new(1.0, 0.0)]);

        let bent = Path::new(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
        ])
        .unwrap();
        let t = TimeGrid::new(vec![1.5]).unwrap();
        assert_eq!(walk_path(&bent, &t, 1.0), vec![Point::new(1.0, 0.5)]);
    }

    #[test]
    fn agent_path_monotone_on_straight_shot() {
        let m = WorldMap::empty();
        let t = TimeGrid::new((1..=8).map(|i| i as f64 * 0.2).collect()).unwrap();
        let mut rng = seeded(9);
        let s = Point::new(0.1, 0.1);
        let series = agent_path(&m, s, Point::new(0.9, 0.9), &t, &fast_params(), &mut rng);
        assert_eq!(series.len(), t.len());
        let dists: Vec<f64> = series.iter().map(|p| p.dist(s)).collect();
        assert!(dists.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        let m_ref = &m;
        assert!(series.iter().all(|&p| valid_state(m_ref, p)));
    }

    #[test]
    fn agent_path_unreachable_stays_at_start() {
        let m = sealed_ring();
        let params = PlannerParams {
            max_tree_nodes: 300,
            ..fast_params()
        };
        let t = TimeGrid::new(vec![0.5, 1.0, 1.5]).unwrap();
        let s = Point::new(0.1, 0.1);
        let mut rng = seeded(10);
        let series = agent_path(&m, s, Point::new(0.5, 0.5), &t, &params, &mut rng);
        assert_eq!(series, vec![s; 3]);
    }

    #[test]
    fn waypoint_coin_is_fair() {
        // Empirical P(w) over 10,000 runs within the 3-sigma binomial band.
        let m = WorldMap::empty();
        let t = TimeGrid::new(vec![0.5]).unwrap();
        let params = PlannerParams {
            refine_iters: 1,
            restarts: 1,
            max_tree_nodes: 200,
            ..fast_params()
        };
        let mut rng = seeded(11);
        let mut used = 0usize;
        let n = 10_000;
        for _ in 0..n {
            let g = Point::new(rng.gen(), rng.gen());
            let (_, tr) =
                agent_waypoint_path(&m, Point::new(0.1, 0.1), g, &t, &params, 0.02, &mut rng);
            if tr.used_waypoint {
                used += 1;
            }
        }
        let frac = used as f64 / n as f64;
        assert!((0.485..=0.515).contains(&frac), "P(w) = {frac}");
    }

    #[test]
    fn waypoint_through_goal_ends_at_goal() {
        // Forcing w=true with waypoint == goal must still finish at the goal
        // when the grid spans the full walk.
        let m = WorldMap::empty();
        let t = TimeGrid::new(vec![1.0, 2.0, 4.0]).unwrap();
        let g = Point::new(0.9, 0.1);
        let mut rng = seeded(12);
        let series =
            waypoint_walk_given(&m, Point::new(0.1, 0.1), g, &t, &fast_params(), true, g, &mut rng);
        assert_eq!(*series.last().unwrap(), g);
    }

    #[test]
    fn waypoint_no_detour_matches_agent_path_distribution() {
        // With w forced false the walked series is a plain plan from s to g.
        let m = WorldMap::empty();
        let t = TimeGrid::new(vec![0.4, 0.8]).unwrap();
        let params = fast_params();
        let s = Point::new(0.1, 0.1);
        let g = Point::new(0.9, 0.9);
        let mut rng_a = seeded(13);
        let walked =
            waypoint_walk_given(&m, s, g, &t, &params, false, Point::new(0.5, 0.5), &mut rng_a);
        let mut rng_b = seeded(13);
        let direct = agent_path(&m, s, g, &t, &params, &mut rng_b);
        assert_eq!(walked, direct);
    }

    #[test]
    fn planner_is_deterministic() {
        let m = WorldMap::new(vec![square(0.4, 0.3, 0.6, 0.7)]);
        let t = TimeGrid::new(vec![0.3, 0.6, 0.9, 1.2]).unwrap();
        let run = || {
            let mut rng = seeded(42);
            agent_path(&m, Point::new(0.05, 0.5), Point::new(0.95, 0.5), &t, &fast_params(), &mut rng)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn noise_logdensity_matches_by_hand() {
        let a = vec![Point::new(0.1, 0.2)];
        let b = vec![Point::new(0.15, 0.2)];
        let expected = normal_logpdf(0.1, 0.15, 0.02) + normal_logpdf(0.2, 0.2, 0.02);
        assert!((noise_logdensity(&a, &b, 0.02) - expected).abs() < 1e-12);
    }

    #[test]
    fn time_grid_validation() {
        assert!(TimeGrid::new(vec![]).is_err());
        assert!(TimeGrid::new(vec![-0.1]).is_err());
        assert!(TimeGrid::new(vec![0.2, 0.2]).is_err());
        assert!(TimeGrid::new(vec![0.0, 0.5, 1.0]).is_ok());
    }

    #[test]
    fn params_validation() {
        assert!(PlannerParams::default().validate().is_ok());
        let bad = PlannerParams {
            min_tree_nodes: 10,
            max_tree_nodes: 10,
            ..PlannerParams::default()
        };
        assert!(bad.validate().is_err());
    }
}
