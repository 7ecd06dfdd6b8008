//! The two Metropolis-Hastings transition operators for programs with
//! likelihood-free choices, the importance-sampling likelihood estimator
//! they share, and a seeded multi-replicate chain runner.
//!
//! All densities and acceptance ratios are handled in log space; a ratio is
//! exponentiated exactly once, at the comparison with the uniform draw.

use std::collections::{BinaryHeap, HashMap};
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::rng::{substream, Stream};
use crate::stats::logsumexp;
use crate::trace::{InternalTrace, ModelGraph, TraceState, Value};

#[derive(Debug, Error, PartialEq)]
pub enum InferenceError {
    #[error("proposal target `{0}` must have a tractable density")]
    LikelihoodFreeTarget(String),
    #[error("nested inference proposals are single-site; got {0} targets")]
    MultiSiteNested(usize),
    #[error("proposal kernel needs at least one target")]
    NoTargets,
}

/// A (possibly blocked) proposal over explicitly named target choices.
/// Implementations must report mutually consistent forward and reverse
/// densities for the same kernel family.
pub trait ProposalKernel: Send + Sync {
    fn targets(&self) -> &[usize];

    /// Draw proposed values for the targets (aligned with `targets()`),
    /// returning the forward log density log m(z'; z).
    fn propose(&self, graph: &ModelGraph, state: &TraceState, rng: &mut Stream)
        -> (Vec<Value>, f64);

    /// Reverse log density log m(z; z') of the current values under a chain
    /// positioned at the proposed values.
    fn reverse_log_density(
        &self,
        graph: &ModelGraph,
        state: &TraceState,
        proposed: &[Value],
    ) -> f64;

    fn name(&self) -> &str;
}

/// Independence proposal that redraws each target from its own prior. The
/// prior factors then cancel against the target density in the acceptance
/// ratio, which is the standard choice for the experiments here.
#[derive(Debug)]
pub struct PriorProposal {
    targets: Vec<usize>,
    name: String,
}

impl PriorProposal {
    pub fn new(graph: &ModelGraph, target_ids: &[&str]) -> Result<Self, InferenceError> {
        if target_ids.is_empty() {
            return Err(InferenceError::NoTargets);
        }
        let mut targets = Vec::with_capacity(target_ids.len());
        for id in target_ids {
            let i = graph
                .node_index(id)
                .unwrap_or_else(|_| panic!("unknown proposal target `{id}`"));
            if graph.is_likelihood_free(i) {
                return Err(InferenceError::LikelihoodFreeTarget((*id).to_string()));
            }
            targets.push(i);
        }
        Ok(PriorProposal {
            targets,
            name: format!("prior({})", target_ids.join(",")),
        })
    }
}

impl ProposalKernel for PriorProposal {
    fn targets(&self) -> &[usize] {
        &self.targets
    }

    fn propose(
        &self,
        graph: &ModelGraph,
        state: &TraceState,
        rng: &mut Stream,
    ) -> (Vec<Value>, f64) {
        // Ancestral block draw: later targets see the fresh values of any
        // co-target parents (targets are declared in topological order).
        let mut work = state.values.clone();
        let mut proposed = Vec::with_capacity(self.targets.len());
        let mut log_m = 0.0;
        for &t in &self.targets {
            let args = graph.args(&work, t);
            let value = (graph.primitive(t).simulate)(&args, rng);
            log_m += graph.log_density_of(t, &value, &args);
            work[t] = value.clone();
            proposed.push(value);
        }
        (proposed, log_m)
    }

    fn reverse_log_density(
        &self,
        graph: &ModelGraph,
        state: &TraceState,
        _proposed: &[Value],
    ) -> f64 {
        // The reverse move ancestrally restores the current values; since
        // non-target choices agree between the two states, the current state
        // already holds exactly the values each factor conditions on.
        self.targets
            .iter()
            .map(|&t| {
                let args = graph.args(&state.values, t);
                graph.log_density_of(t, &state.values[t], &args)
            })
            .sum()
    }

    fn name(&self) -> &str {
        &self.name
    }
}

/// Uniform independence proposal over an explicit finite value set; usable
/// on likelihood-free targets, whose priors cannot be evaluated.
pub struct UniformChoiceProposal {
    target: [usize; 1],
    choices: Vec<Value>,
    name: String,
}

impl UniformChoiceProposal {
    pub fn new(graph: &ModelGraph, target_id: &str, choices: Vec<Value>) -> Self {
        let i = graph
            .node_index(target_id)
            .unwrap_or_else(|_| panic!("unknown proposal target `{target_id}`"));
        assert!(!choices.is_empty(), "need at least one choice");
        UniformChoiceProposal {
            target: [i],
            choices,
            name: format!("uniform({target_id})"),
        }
    }
}

impl ProposalKernel for UniformChoiceProposal {
    fn targets(&self) -> &[usize] {
        &self.target
    }

    fn propose(
        &self,
        _graph: &ModelGraph,
        _state: &TraceState,
        rng: &mut Stream,
    ) -> (Vec<Value>, f64) {
        let k = rng.gen_range(0..self.choices.len());
        (
            vec![self.choices[k].clone()],
            -(self.choices.len() as f64).ln(),
        )
    }

    fn reverse_log_density(
        &self,
        _graph: &ModelGraph,
        _state: &TraceState,
        _proposed: &[Value],
    ) -> f64 {
        -(self.choices.len() as f64).ln()
    }

    fn name(&self) -> &str {
        &self.name
    }
}

pub type SampleQFn = Box<dyn Fn(&[Value], &Value, &mut Stream) -> InternalTrace + Send + Sync>;
pub type LogRatioFn = Box<dyn Fn(&InternalTrace, &Value, &[Value]) -> f64 + Send + Sync>;

/// A sampler over a primitive's internal traces approximating p(u | z; x),
/// with an evaluable joint-to-proposal density ratio. Only the ratio is ever
/// needed; q's own density never has to be evaluated in isolation.
pub struct NestedInferenceAlgorithm {
    /// Draw u ~ q(.; x, z).
    pub sample_q: SampleQFn,
    /// log [ p(u, z; x) / q(u; x, z) ].
    pub log_ratio: LogRatioFn,
    /// Number of importance samples K per estimate.
    pub sample_count: usize,
}

impl NestedInferenceAlgorithm {
    pub fn new(sample_q: SampleQFn, log_ratio: LogRatioFn, sample_count: usize) -> Self {
        assert!(sample_count >= 1, "K must be positive");
        NestedInferenceAlgorithm {
            sample_q,
            log_ratio,
            sample_count,
        }
    }
}

/// Map from choice index to its nested inference algorithm.
pub type NiaMap = HashMap<usize, NestedInferenceAlgorithm>;

/// Unbiased importance-sampling estimate of the intractable likelihood
/// p(z; x), returned in log space: log of the mean of K density ratios under
/// u_k ~ q(.; x, z). All-zero ratios yield -inf.
pub fn estimate_log_likelihood(
    nia: &NestedInferenceAlgorithm,
    args: &[Value],
    z: &Value,
    rng: &mut Stream,
) -> f64 {
    let mut log_ratios = Vec::with_capacity(nia.sample_count);
    for _ in 0..nia.sample_count {
        let u = (nia.sample_q)(args, z, rng);
        log_ratios.push((nia.log_ratio)(&u, z, args));
    }
    logsumexp(&log_ratios) - (nia.sample_count as f64).ln()
}

/// What one transition did.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub accepted: bool,
    pub log_alpha: f64,
    /// Likelihood-free choices resimulated by the cascade (empty for nested
    /// inference steps).
    pub resimulated: Vec<usize>,
}

/// Accept/reject in log space. The ratio may exceed one; it is only clamped
/// implicitly by the comparison with the uniform draw, and a -inf/-inf
/// situation rejects. The uniform draw always happens so that the stream
/// position does not depend on the ratio.
fn mh_accept(log_num: f64, log_den: f64, rng: &mut Stream) -> (bool, f64) {
    let log_alpha = if log_num == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else if log_den == f64::NEG_INFINITY {
        f64::INFINITY
    } else {
        log_num - log_den
    };
    let s: f64 = rng.gen();
    let accepted = log_alpha != f64::NEG_INFINITY && s.ln() <= log_alpha;
    (accepted, log_alpha)
}

/// Single Cascading Resimulation MH transition: propose to the kernel's
/// tractable targets, resimulate every likelihood-free descendant whose
/// arguments changed (the cascade), and accumulate tractable density ratios
/// along the way. The unknown likelihoods of resimulated choices cancel.
/// On acceptance the targets and the whole cascade update atomically.
pub fn cr_mh_step(
    graph: &ModelGraph,
    state: &mut TraceState,
    kernel: &dyn ProposalKernel,
    rng: &mut Stream,
) -> StepInfo {
    let (proposed, log_m_fwd) = kernel.propose(graph, state, rng);
    let targets = kernel.targets();
    debug_assert_eq!(proposed.len(), targets.len());

    let mut new_values = state.values.clone();
    for (&t, v) in targets.iter().zip(proposed.iter()) {
        debug_assert!(
            !graph.is_likelihood_free(t),
            "cascading resimulation targets must be tractable"
        );
        new_values[t] = v.clone();
    }

    // Worklist keyed by declaration order (a topological order), holding the
    // targets and their children; pops ask each choice for its likelihood
    // contribution or, for likelihood-free choices, resimulate and extend
    // the cascade to their children.
    let mut queued = vec![false; graph.len()];
    let mut worklist = BinaryHeap::new();
    let push = |worklist: &mut BinaryHeap<std::cmp::Reverse<usize>>,
                queued: &mut Vec<bool>,
                j: usize| {
        if !queued[j] {
            queued[j] = true;
            worklist.push(std::cmp::Reverse(j));
        }
    };
    for &t in targets {
        push(&mut worklist, &mut queued, t);
        for &c in graph.children(t) {
            push(&mut worklist, &mut queued, c);
        }
    }

    let mut log_old = 0.0;
    let mut log_new = 0.0;
    let mut resimulated = Vec::new();
    while let Some(std::cmp::Reverse(j)) = worklist.pop() {
        if graph.is_likelihood_free(j) {
            let args_new = graph.args(&new_values, j);
            new_values[j] = (graph.primitive(j).simulate)(&args_new, rng);
            resimulated.push(j);
            for &c in graph.children(j) {
                push(&mut worklist, &mut queued, c);
            }
        } else {
            let args_old = graph.args(&state.values, j);
            let args_new = graph.args(&new_values, j);
            log_old += graph.log_density_of(j, &state.values[j], &args_old);
            log_new += graph.log_density_of(j, &new_values[j], &args_new);
        }
    }

    let log_m_rev = kernel.reverse_log_density(graph, state, &proposed);
    let (accepted, log_alpha) = mh_accept(log_new + log_m_rev, log_old + log_m_fwd, rng);
    if accepted {
        state.values = new_values;
        // Values behind any stored estimates changed; drop them so a later
        // nested-inference step re-initializes lazily.
        for &j in &resimulated {
            state.log_estimates[j] = None;
        }
    }
    StepInfo {
        accepted,
        log_alpha,
        resimulated,
    }
}

/// Single-site Nested Inference MH transition: propose to choice `i`, form
/// fresh likelihood estimates for `i` (new output, old arguments) and for
/// each child (old output, new arguments), and accept against the recycled
/// estimates in the state's database. Choices without a nested inference
/// algorithm contribute exact density ratios instead. Estimates missing
/// from the database are initialized lazily from the current values.
pub fn ni_mh_step(
    graph: &ModelGraph,
    state: &mut TraceState,
    kernel: &dyn ProposalKernel,
    nias: &NiaMap,
    rng: &mut Stream,
) -> StepInfo {
    assert_eq!(
        kernel.targets().len(),
        1,
        "nested inference proposals are single-site"
    );
    let i = kernel.targets()[0];
    let (proposed, log_m_fwd) = kernel.propose(graph, state, rng);
    let z_i_new = proposed[0].clone();

    let mut new_values = state.values.clone();
    new_values[i] = z_i_new;

    let mut touched: Vec<usize> = vec![i];
    touched.extend(graph.children(i).iter().copied());

    let mut log_old = 0.0;
    let mut log_new = 0.0;
    let mut fresh: Vec<(usize, f64)> = Vec::new();
    for &j in &touched {
        let args_old = graph.args(&state.values, j);
        let args_new = graph.args(&new_values, j);
        match nias.get(&j) {
            Some(nia) => {
                let old = match state.log_estimates[j] {
                    Some(e) => e,
                    None => {
                        let e = estimate_log_likelihood(nia, &args_old, &state.values[j], rng);
                        state.log_estimates[j] = Some(e);
                        e
                    }
                };
                let new = estimate_log_likelihood(nia, &args_new, &new_values[j], rng);
                fresh.push((j, new));
                log_old += old;
                log_new += new;
            }
            None => {
                log_old += graph.log_density_of(j, &state.values[j], &args_old);
                log_new += graph.log_density_of(j, &new_values[j], &args_new);
            }
        }
    }

    let log_m_rev = kernel.reverse_log_density(graph, state, &proposed);
    let (accepted, log_alpha) = mh_accept(log_new + log_m_rev, log_old + log_m_fwd, rng);
    if accepted {
        state.values = new_values;
        for (j, e) in fresh {
            state.log_estimates[j] = Some(e);
        }
    }
    StepInfo {
        accepted,
        log_alpha,
        resimulated: Vec::new(),
    }
}

/// One entry of a kernel schedule.
pub enum Transition {
    CascadingResimulation(Box<dyn ProposalKernel>),
    NestedInference(Box<dyn ProposalKernel>),
}

impl Transition {
    pub fn kernel_name(&self) -> &str {
        match self {
            Transition::CascadingResimulation(k) => k.name(),
            Transition::NestedInference(k) => k.name(),
        }
    }

    pub fn apply(
        &self,
        graph: &ModelGraph,
        state: &mut TraceState,
        nias: &NiaMap,
        rng: &mut Stream,
    ) -> StepInfo {
        match self {
            Transition::CascadingResimulation(k) => cr_mh_step(graph, state, k.as_ref(), rng),
            Transition::NestedInference(k) => ni_mh_step(graph, state, k.as_ref(), nias, rng),
        }
    }
}

/// A batch of independent replicated chains over one model.
pub struct ChainSpec<'a> {
    pub graph: &'a ModelGraph,
    pub schedule: &'a [Transition],
    pub nias: &'a NiaMap,
    /// Sweeps through the whole kernel schedule per replicate.
    pub num_transitions: usize,
    pub num_replicates: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct KernelStats {
    pub name: String,
    pub proposals: u64,
    pub accepts: u64,
    pub elapsed: Duration,
}

impl KernelStats {
    pub fn acceptance(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepts as f64 / self.proposals as f64
        }
    }
}

pub struct RunOutcome {
    pub finals: Vec<TraceState>,
    pub kernel_stats: Vec<KernelStats>,
    pub elapsed: Duration,
}

/// Initialize every replicate from the prior, apply the kernel schedule
/// `num_transitions` times, and return the final states. Replicates run on
/// independent derived streams (in parallel) so results are reproducible
/// regardless of thread count.
pub fn run_chains(spec: &ChainSpec) -> RunOutcome {
    let started = Instant::now();
    let per_replicate: Vec<(TraceState, Vec<(u64, u64, Duration)>)> = (0..spec.num_replicates)
        .into_par_iter()
        .map(|rep| {
            let mut rng = substream(spec.seed, rep as u64);
            let mut state = spec.graph.simulate_trace(&mut rng);
            let mut counts = vec![(0u64, 0u64, Duration::ZERO); spec.schedule.len()];
            for _ in 0..spec.num_transitions {
                for (k, transition) in spec.schedule.iter().enumerate() {
                    let t0 = Instant::now();
                    let info = transition.apply(spec.graph, &mut state, spec.nias, &mut rng);
                    counts[k].2 += t0.elapsed();
                    counts[k].0 += 1;
                    if info.accepted {
                        counts[k].1 += 1;
                    }
                }
            }
            (state, counts)
        })
        .collect();

    let mut kernel_stats: Vec<KernelStats> = spec
        .schedule
        .iter()
        .map(|t| KernelStats {
            name: t.kernel_name().to_string(),
            proposals: 0,
            accepts: 0,
            elapsed: Duration::ZERO,
        })
        .collect();
    let mut finals = Vec::with_capacity(per_replicate.len());
    for (state, counts) in per_replicate {
        for (k, (p, a, d)) in counts.into_iter().enumerate() {
            kernel_stats[k].proposals += p;
            kernel_stats[k].accepts += a;
            kernel_stats[k].elapsed += d;
        }
        finals.push(state);
    }
    RunOutcome {
        finals,
        kernel_stats,
        elapsed: started.elapsed(),
    }
}
