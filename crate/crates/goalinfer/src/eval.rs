//! Quantitative evaluation: binned-KL convergence curves against a
//! gold-standard sampler, plus acceptance-rate and timing diagnostics.

use crate::geom::Point;
use crate::inference::{run_chains, ChainSpec, RunOutcome};
use crate::models::BuiltModel;
use crate::trace::ModelGraph;

/// Histogram over a GxG grid on the unit square with a pseudocount added to
/// every bin before normalization, so KL against it stays finite.
#[derive(Debug, Clone)]
pub struct BinnedHistogram {
    grid: usize,
    counts: Vec<u64>,
    probs: Vec<f64>,
}

pub const DEFAULT_GRID: usize = 5;
pub const DEFAULT_PSEUDOCOUNT: f64 = 0.1;

impl BinnedHistogram {
    pub fn from_points(points: &[Point], grid: usize, pseudocount: f64) -> Self {
        assert!(grid >= 1, "grid must have at least one bin");
        assert!(pseudocount > 0.0, "pseudocount must be positive");
        let mut counts = vec![0u64; grid * grid];
        for p in points {
            let gx = ((p.x * grid as f64) as usize).min(grid - 1);
            let gy = ((p.y * grid as f64) as usize).min(grid - 1);
            counts[gy * grid + gx] += 1;
        }
        let total = points.len() as f64 + pseudocount * (grid * grid) as f64;
        let probs = counts
            .iter()
            .map(|&c| (c as f64 + pseudocount) / total)
            .collect();
        BinnedHistogram {
            grid,
            counts,
            probs,
        }
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// KL divergence from `self` to `other` in nats.
    pub fn kl_to(&self, other: &BinnedHistogram) -> f64 {
        assert_eq!(self.grid, other.grid, "histogram grids must match");
        self.probs
            .iter()
            .zip(other.probs.iter())
            .map(|(&p, &q)| p * (p / q).ln())
            .sum()
    }
}

/// D_KL(reference || test) with both histograms built identically.
pub fn binned_kl(reference: &[Point], test: &[Point], grid: usize, pseudocount: f64) -> f64 {
    assert!(
        !reference.is_empty() && !test.is_empty(),
        "binned_kl needs non-empty sample lists"
    );
    let r = BinnedHistogram::from_points(reference, grid, pseudocount);
    let t = BinnedHistogram::from_points(test, grid, pseudocount);
    r.kl_to(&t)
}

#[derive(Debug, Clone)]
pub struct ConvergencePoint {
    pub strategy: String,
    pub transitions: usize,
    pub kl: f64,
    pub ms_per_sample: f64,
    pub sample_count: usize,
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub transition_counts: Vec<usize>,
    pub replicates: usize,
    pub reference_transitions: usize,
    pub reference_replicates: usize,
    pub grid: usize,
    pub pseudocount: f64,
    pub seed: u64,
}

/// Final goal samples from a batch of chains.
pub fn goal_samples(graph: &ModelGraph, outcome: &RunOutcome, goal_id: &str) -> Vec<Point> {
    let idx = graph.node_index(goal_id).expect("goal choice exists");
    outcome
        .finals
        .iter()
        .map(|s| s.values[idx].as_point())
        .collect()
}

/// Run a gold-standard sampler once, then every (strategy, transition count)
/// pair, recording binned KL from the reference samples to each strategy's
/// final-state samples along with wall-clock per sample.
pub fn convergence_study(
    reference: &BuiltModel,
    strategies: &[(String, BuiltModel)],
    goal_id: &str,
    cfg: &StudyConfig,
) -> Vec<ConvergencePoint> {
    if strategies.is_empty() {
        return Vec::new();
    }
    let ref_outcome = run_chains(&ChainSpec {
        graph: &reference.graph,
        schedule: &reference.schedule,
        nias: &reference.nias,
        num_transitions: cfg.reference_transitions,
        num_replicates: cfg.reference_replicates,
        seed: cfg.seed,
    });
    let ref_points = goal_samples(&reference.graph, &ref_outcome, goal_id);

    let mut curve = Vec::new();
    for (si, (name, model)) in strategies.iter().enumerate() {
        for (ti, &transitions) in cfg.transition_counts.iter().enumerate() {
            let outcome = run_chains(&ChainSpec {
                graph: &model.graph,
                schedule: &model.schedule,
                nias: &model.nias,
                num_transitions: transitions,
                num_replicates: cfg.replicates,
                // One stream family per (strategy, count) cell.
                seed: cfg.seed ^ ((si as u64 + 1) << 32) ^ ((ti as u64 + 1) << 16),
            });
            let points = goal_samples(&model.graph, &outcome, goal_id);
            curve.push(ConvergencePoint {
                strategy: name.clone(),
                transitions,
                kl: binned_kl(&ref_points, &points, cfg.grid, cfg.pseudocount),
                ms_per_sample: outcome.elapsed.as_secs_f64() * 1000.0 / cfg.replicates as f64,
                sample_count: points.len(),
            });
        }
    }
    curve
}

#[derive(Debug, Clone)]
pub struct KernelSummary {
    pub name: String,
    pub acceptance: f64,
    pub mean_ms_per_transition: f64,
    pub proposals: u64,
}

/// Per-kernel acceptance fractions and mean per-transition time from a
/// completed run.
pub fn acceptance_stats(outcome: &RunOutcome) -> Vec<KernelSummary> {
    outcome
        .kernel_stats
        .iter()
        .map(|k| KernelSummary {
            name: k.name.clone(),
            acceptance: k.acceptance(),
            mean_ms_per_transition: if k.proposals == 0 {
                0.0
            } else {
                k.elapsed.as_secs_f64() * 1000.0 / k.proposals as f64
            },
            proposals: k.proposals,
        })
        .collect()
}
