//! The four operations behind the CLI: plan, infer, train, and eval. Each
//! loads one scenario, runs the corresponding experiment, and writes CSV
//! tables plus SVG renders into an output directory. Outputs carry the
//! scenario hash and seed in every row; sample and path tables are
//! byte-identical across reruns with the same seed (timing columns in
//! `curve.csv` are the one documented exception).

use std::fmt::Write as FmtWrite;
use std::path::{Path as FsPath, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::eval::{acceptance_stats, convergence_study, goal_samples, ConvergencePoint, StudyConfig};
use crate::geom::{path_length, Path, Point};
use crate::inference::{run_chains, ChainSpec, RunOutcome};
use crate::models::BuiltModel;
use crate::neural::{
    generate_training_data, load_net, save_net, train, NeuralError, ProposalNet, TrainConfig,
};
use crate::planner::plan_path;
use crate::render::{kl_curve_svg, SceneSvg};
use crate::rng::{seeded, substream};
use crate::scenario::{
    points, ModelSpec, Scale, Scenario, ScenarioError, StrategyConfig, TrainingConfig,
};
use crate::trace::Value;

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error("output i/o failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("scenario has no `{0}` section")]
    MissingSection(&'static str),
    #[error("`plan` needs a top-level `plan_goal` in the scenario")]
    MissingPlanGoal,
    #[error("planner rejected the scenario endpoints: {0}")]
    Planner(#[from] crate::planner::PlannerError),
}

/// Everything a command needs besides its own arguments.
pub struct CommandCtx {
    pub scenario: Scenario,
    /// Directory the scenario was loaded from; relative net paths resolve
    /// against it.
    pub scenario_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub scale: Scale,
}

impl CommandCtx {
    pub fn new(scenario: Scenario, out_dir: PathBuf, scale: Scale) -> Self {
        CommandCtx {
            scenario,
            scenario_dir: None,
            out_dir,
            scale,
        }
    }

    fn resolve(&self, path: &FsPath) -> PathBuf {
        if path.is_absolute() {
            return path.to_path_buf();
        }
        match &self.scenario_dir {
            Some(dir) => dir.join(path),
            None => path.to_path_buf(),
        }
    }
}

/// Files written by a command.
#[derive(Debug, Default)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
}

impl RunOutput {
    fn add(&mut self, path: PathBuf) -> &mut Self {
        self.files.push(path);
        self
    }
}

fn write_file(out: &mut RunOutput, dir: &FsPath, name: &str, contents: &str) -> Result<PathBuf, CommandError> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    out.add(path.clone());
    Ok(path)
}

/// One planned run for the `plan` command.
pub struct PlanRun {
    pub path: Option<Path>,
    pub length: Option<f64>,
}

/// Run the planner `count` times on fresh sub-streams of the scenario seed.
pub fn plan_runs(
    scenario: &Scenario,
    goal: Point,
    scale: Scale,
    count: usize,
) -> Result<Vec<PlanRun>, CommandError> {
    let map = scenario.world_map();
    let params = scenario.planner_params(scale);
    let (start, _, _) = scenario.single_agent_parts()?;
    let runs: Vec<Result<PlanRun, crate::planner::PlannerError>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(scenario.seed, i as u64);
            plan_path(&map, start, goal, &params, &mut rng).map(|r| PlanRun {
                length: r.as_ref().map(path_length),
                path: r,
            })
        })
        .collect();
    let mut out = Vec::with_capacity(runs.len());
    for r in runs {
        out.push(r?);
    }
    Ok(out)
}

/// Plan repeatedly and persist paths, lengths, and an overlay render.
pub fn cmd_plan(ctx: &CommandCtx, count: usize) -> Result<RunOutput, CommandError> {
    let scenario = &ctx.scenario;
    let goal = scenario
        .plan_goal
        .map(|g| Point::new(g[0], g[1]))
        .ok_or(CommandError::MissingPlanGoal)?;
    let runs = plan_runs(scenario, goal, ctx.scale, count)?;
    let hash = scenario.hash();

    let mut paths_csv = String::from("scenario,seed,run,point,x,y\n");
    let mut lengths_csv = String::from("scenario,seed,run,found,length\n");
    for (i, run) in runs.iter().enumerate() {
        match (&run.path, run.length) {
            (Some(path), Some(len)) => {
                for (j, p) in path.points().iter().enumerate() {
                    let _ = writeln!(paths_csv, "{hash},{},{i},{j},{},{}", scenario.seed, p.x, p.y);
                }
                let _ = writeln!(lengths_csv, "{hash},{},{i},true,{len}", scenario.seed);
            }
            _ => {
                let _ = writeln!(lengths_csv, "{hash},{},{i},false,", scenario.seed);
            }
        }
    }

    let map = scenario.world_map();
    let mut scene = SceneSvg::new();
    scene.map(&map);
    for run in &runs {
        if let Some(path) = &run.path {
            scene.polyline(path.points(), "#1f6fb4", 1.5, 0.35);
        }
    }
    if let Ok((start, _, _)) = scenario.single_agent_parts() {
        scene.markers(&[start], "#ff8c00", 6.0, "start");
    }
    scene.markers(&[goal], "#2ca02c", 6.0, "goal");
    let svg = scene.finish(&format!("{} paths", scenario.name));

    let mut out = RunOutput::default();
    write_file(&mut out, &ctx.out_dir, "paths.csv", &paths_csv)?;
    write_file(&mut out, &ctx.out_dir, "lengths.csv", &lengths_csv)?;
    write_file(&mut out, &ctx.out_dir, "paths.svg", &svg)?;
    Ok(out)
}

fn load_net_for(
    ctx: &CommandCtx,
    strategy: &StrategyConfig,
) -> Result<Option<Arc<ProposalNet>>, CommandError> {
    if !strategy.needs_net() {
        return Ok(None);
    }
    let cfg = ctx
        .scenario
        .inference_config(ctx.scale)
        .ok_or(CommandError::MissingSection("inference"))?;
    let path = cfg.net_file.ok_or(ScenarioError::MissingNetFile)?;
    Ok(Some(Arc::new(load_net(&ctx.resolve(&path))?)))
}

fn scalar_rows(rows: &mut String, prefix: &str, choice: &str, value: &Value) {
    match value {
        Value::Bool(b) => {
            let _ = writeln!(rows, "{prefix},{choice},{}", if *b { 1 } else { 0 });
        }
        Value::Int(i) => {
            let _ = writeln!(rows, "{prefix},{choice},{i}");
        }
        Value::Real(r) => {
            let _ = writeln!(rows, "{prefix},{choice},{r}");
        }
        Value::Point(p) => {
            let _ = writeln!(rows, "{prefix},{choice}.x,{}", p.x);
            let _ = writeln!(rows, "{prefix},{choice}.y,{}", p.y);
        }
        // Walked series are derived planner output, not reported latents.
        Value::Series(_) => {}
    }
}

fn region_fraction(samples: &[Point], rect: &[f64; 4]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let inside = samples
        .iter()
        .filter(|p| p.x >= rect[0] && p.x <= rect[2] && p.y >= rect[1] && p.y <= rect[3])
        .count();
    inside as f64 / samples.len() as f64
}

/// Derived summary rows for a finished run.
pub fn run_summaries(
    scenario: &Scenario,
    built: &BuiltModel,
    outcome: &RunOutcome,
) -> Vec<(String, f64)> {
    let mut rows = Vec::new();
    for k in acceptance_stats(outcome) {
        rows.push((format!("acceptance[{}]", k.name), k.acceptance));
    }
    if let Ok(flag) = built.graph.node_index("is_common_goal") {
        let p = outcome
            .finals
            .iter()
            .filter(|s| s.values[flag].as_bool())
            .count() as f64
            / outcome.finals.len().max(1) as f64;
        rows.push(("p_is_common_goal".to_string(), p));
    }
    for goal_id in ["goal", "goal_a", "goal_b"] {
        if built.graph.node_index(goal_id).is_ok() {
            let samples = goal_samples(&built.graph, outcome, goal_id);
            for (region, rect) in &scenario.regions {
                rows.push((
                    format!("frac_{goal_id}_in_{region}"),
                    region_fraction(&samples, rect),
                ));
            }
        }
    }
    rows
}

fn render_infer_svg(scenario: &Scenario, built: &BuiltModel, outcome: &RunOutcome) -> String {
    let map = scenario.world_map();
    let mut scene = SceneSvg::new();
    scene.map(&map);

    match &scenario.model {
        ModelSpec::Drone { start, observations, .. }
        | ModelSpec::Waypoint { start, observations, .. } => {
            scene.observations(&points(observations));
            scene.markers(&[Point::new(start[0], start[1])], "#ff8c00", 6.0, "start");
            scene.markers(
                &goal_samples(&built.graph, outcome, "goal"),
                "#d62728",
                5.0,
                "goal-sample",
            );
        }
        ModelSpec::CommonGoal { starts, observations_a, observations_b, .. } => {
            scene.observations(&points(observations_a));
            scene.observations(&points(observations_b));
            for s in starts {
                scene.markers(&[Point::new(s[0], s[1])], "#ff8c00", 6.0, "start");
            }
            let flag = built.graph.node_index("is_common_goal").expect("flag exists");
            let goal_a = built.graph.node_index("goal_a").expect("goal_a exists");
            let goal_b = built.graph.node_index("goal_b").expect("goal_b exists");
            let mut common = Vec::new();
            let mut separate_a = Vec::new();
            let mut separate_b = Vec::new();
            for s in &outcome.finals {
                if s.values[flag].as_bool() {
                    common.push(s.values[goal_a].as_point());
                } else {
                    separate_a.push(s.values[goal_a].as_point());
                    separate_b.push(s.values[goal_b].as_point());
                }
            }
            // Shared destinations render as one yellow marker; split
            // destinations as separate magenta and blue markers.
            scene.markers(&common, "#f2c500", 5.0, "goal-common");
            scene.markers(&separate_a, "#d545d5", 5.0, "goal-a");
            scene.markers(&separate_b, "#1f6fb4", 5.0, "goal-b");
        }
        ModelSpec::BeliefGoal { start, observations, obstacle_prior, .. } => {
            scene.observations(&points(observations));
            scene.markers(&[Point::new(start[0], start[1])], "#ff8c00", 6.0, "start");
            let post = built.graph.node_index("obstacle_post").expect("post exists");
            let angle = built.graph.node_index("obstacle_angle").expect("angle exists");
            let length = built.graph.node_index("obstacle_length").expect("length exists");
            for s in &outcome.finals {
                let rect = crate::models::obstacle_rect(
                    s.values[post].as_point(),
                    s.values[angle].as_real(),
                    s.values[length].as_real(),
                    obstacle_prior.width,
                );
                let mut outline: Vec<Point> = rect.vertices().to_vec();
                outline.push(outline[0]);
                scene.polyline(&outline, "#7a4fb0", 1.0, 0.4);
            }
            scene.markers(
                &goal_samples(&built.graph, outcome, "goal"),
                "#d62728",
                5.0,
                "goal-sample",
            );
        }
    }
    scene.finish(&format!("{} posterior samples", scenario.name))
}

/// Run replicated chains per the scenario's inference section and persist
/// final-state samples, diagnostics, and a posterior render.
pub fn cmd_infer(ctx: &CommandCtx) -> Result<RunOutput, CommandError> {
    let scenario = &ctx.scenario;
    let cfg = scenario
        .inference_config(ctx.scale)
        .ok_or(CommandError::MissingSection("inference"))?;
    let net = load_net_for(ctx, &cfg.strategy)?;
    let built = scenario.build_model(&cfg.strategy, ctx.scale, net)?;
    let outcome = run_chains(&ChainSpec {
        graph: &built.graph,
        schedule: &built.schedule,
        nias: &built.nias,
        num_transitions: cfg.transitions,
        num_replicates: cfg.replicates,
        seed: scenario.seed,
    });

    let hash = scenario.hash();
    let mut samples_csv = String::from("scenario,seed,replicate,choice,value\n");
    for (rep, state) in outcome.finals.iter().enumerate() {
        let prefix = format!("{hash},{},{rep}", scenario.seed);
        for i in 0..built.graph.len() {
            if built.graph.is_constrained(i) {
                continue;
            }
            scalar_rows(&mut samples_csv, &prefix, built.graph.id(i), &state.values[i]);
        }
    }

    let mut diagnostics_csv = String::from("scenario,seed,metric,value\n");
    let _ = writeln!(diagnostics_csv, "{hash},{},replicates,{}", scenario.seed, cfg.replicates);
    let _ = writeln!(diagnostics_csv, "{hash},{},transitions,{}", scenario.seed, cfg.transitions);
    for (metric, value) in run_summaries(scenario, &built, &outcome) {
        let _ = writeln!(diagnostics_csv, "{hash},{},{metric},{value}", scenario.seed);
    }
    eprintln!(
        "infer: {} replicates x {} transitions in {:.1}s",
        cfg.replicates,
        cfg.transitions,
        outcome.elapsed.as_secs_f64()
    );

    let svg = render_infer_svg(scenario, &built, &outcome);
    let mut out = RunOutput::default();
    write_file(&mut out, &ctx.out_dir, "samples.csv", &samples_csv)?;
    write_file(&mut out, &ctx.out_dir, "diagnostics.csv", &diagnostics_csv)?;
    write_file(&mut out, &ctx.out_dir, "samples.svg", &svg)?;
    Ok(out)
}

fn train_config(cfg: &TrainingConfig, seed: u64) -> TrainConfig {
    TrainConfig {
        learning_rate: cfg.learning_rate,
        batch_size: cfg.batch_size,
        epochs: cfg.epochs,
        validation_fraction: cfg.validation_fraction,
        seed,
    }
}

/// Generate waypoint training data, fit the proposal network, and persist
/// the parameters plus the per-epoch loss curve.
pub fn cmd_train(ctx: &CommandCtx) -> Result<RunOutput, CommandError> {
    let scenario = &ctx.scenario;
    let train_cfg = scenario.train.clone().unwrap_or_default();
    let (start, observations, noise_std) = scenario.single_agent_parts()?;
    let times = scenario.time_grid();
    let params = scenario.planner_params(ctx.scale);
    let map = scenario.world_map();

    let mut rng = seeded(scenario.seed);
    let data = generate_training_data(
        &map,
        start,
        &times,
        &params,
        noise_std,
        train_cfg.examples,
        &mut rng,
    );
    let input_dim = 2 + 2 * observations.len();
    let net = ProposalNet::new(input_dim, train_cfg.hidden, scenario.seed ^ 0x6e65_7431);
    let outcome = train(net, &data, &train_config(&train_cfg, scenario.seed))?;

    let hash = scenario.hash();
    let mut curve_csv = String::from("scenario,seed,epoch,train_nll,val_nll\n");
    for e in &outcome.curve {
        let _ = writeln!(
            curve_csv,
            "{hash},{},{},{},{}",
            scenario.seed, e.epoch, e.train_nll, e.val_nll
        );
    }
    eprintln!(
        "train: {} examples, {} epochs, final val nll {:.4}",
        train_cfg.examples,
        train_cfg.epochs,
        outcome.curve.last().map(|e| e.val_nll).unwrap_or(f64::NAN)
    );

    let mut out = RunOutput::default();
    std::fs::create_dir_all(&ctx.out_dir)?;
    let net_path = ctx.out_dir.join("net.json");
    save_net(&outcome.net, &net_path)?;
    out.add(net_path);
    write_file(&mut out, &ctx.out_dir, "training_curve.csv", &curve_csv)?;
    Ok(out)
}

/// Build the strategy models named in the eval section. The neural strategy
/// loads the configured net file, or trains one into the output directory
/// when none is configured.
fn eval_models(
    ctx: &CommandCtx,
    strategies: &[StrategyConfig],
    out: &mut RunOutput,
) -> Result<Vec<(String, BuiltModel)>, CommandError> {
    let mut net: Option<Arc<ProposalNet>> = None;
    if strategies.iter().any(|s| s.needs_net()) {
        let configured = ctx
            .scenario
            .inference_config(ctx.scale)
            .and_then(|c| c.net_file)
            .map(|p| ctx.resolve(&p));
        net = Some(match configured {
            Some(path) if path.exists() => Arc::new(load_net(&path)?),
            _ => {
                eprintln!("eval: no net file configured; training one first");
                let trained = cmd_train(ctx)?;
                out.files.extend(trained.files);
                Arc::new(load_net(&ctx.out_dir.join("net.json"))?)
            }
        });
    }
    let mut models = Vec::new();
    for s in strategies {
        let model = ctx.scenario.build_model(s, ctx.scale, net.clone())?;
        models.push((s.label(), model));
    }
    Ok(models)
}

/// Convergence study: long cascading-resimulation reference chains, then a
/// KL-vs-transitions curve for every configured strategy.
pub fn cmd_eval(ctx: &CommandCtx) -> Result<RunOutput, CommandError> {
    let scenario = &ctx.scenario;
    let cfg = scenario
        .eval_config(ctx.scale)
        .ok_or(CommandError::MissingSection("eval"))?;
    let mut out = RunOutput::default();
    let strategies = eval_models(ctx, &cfg.strategies, &mut out)?;
    let reference = scenario.build_model(&StrategyConfig::Cr, ctx.scale, None)?;

    let study = StudyConfig {
        transition_counts: cfg.transition_counts.clone(),
        replicates: cfg.replicates,
        reference_transitions: cfg.reference_transitions,
        reference_replicates: cfg.reference_replicates,
        grid: cfg.grid,
        pseudocount: cfg.pseudocount,
        seed: scenario.seed,
    };
    let curve = convergence_study(&reference, &strategies, "goal", &study);

    let hash = scenario.hash();
    let mut curve_csv = String::from("scenario,seed,strategy,transitions,kl,ms_per_sample,samples\n");
    for p in &curve {
        let _ = writeln!(
            curve_csv,
            "{hash},{},{},{},{},{:.3},{}",
            scenario.seed, p.strategy, p.transitions, p.kl, p.ms_per_sample, p.sample_count
        );
    }
    let svg = kl_curve_svg(&curve, &cfg.marker_transitions, &format!("{} convergence", scenario.name));

    write_file(&mut out, &ctx.out_dir, "curve.csv", &curve_csv)?;
    write_file(&mut out, &ctx.out_dir, "curve.svg", &svg)?;
    Ok(out)
}

/// Library entry for the full KL study, handy for tests that need the raw
/// curve rather than files.
pub fn eval_curve(ctx: &CommandCtx) -> Result<Vec<ConvergencePoint>, CommandError> {
    let scenario = &ctx.scenario;
    let cfg = scenario
        .eval_config(ctx.scale)
        .ok_or(CommandError::MissingSection("eval"))?;
    let mut scratch = RunOutput::default();
    let strategies = eval_models(ctx, &cfg.strategies, &mut scratch)?;
    let reference = scenario.build_model(&StrategyConfig::Cr, ctx.scale, None)?;
    Ok(convergence_study(
        &reference,
        &strategies,
        "goal",
        &StudyConfig {
            transition_counts: cfg.transition_counts.clone(),
            replicates: cfg.replicates,
            reference_transitions: cfg.reference_transitions,
            reference_replicates: cfg.reference_replicates,
            grid: cfg.grid,
            pseudocount: cfg.pseudocount,
            seed: scenario.seed,
        },
    ))
}
