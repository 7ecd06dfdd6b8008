//! Trainable nested-inference proposal for the waypoint planner: a small
//! feed-forward network mapping (goal, observed series) to a distribution
//! over the planner's waypoint decision (w, g'), plus dataset generation and
//! maximum-likelihood training with hand-derived gradients.
//!
//! The proposal factorizes as q(w, g') = q(w) * (w ? q(g') : Uniform): when
//! the planner skipped the waypoint, g' never influenced the observations,
//! so proposing it from its uniform prior matches the conditional exactly.
//! The Bernoulli head is a clamped sigmoid and g' gets an axis-aligned
//! Gaussian truncated to the unit square, so the density is proper and
//! strictly positive everywhere the planner's trace density is.

use std::path::Path as FsPath;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Point, WorldMap};
use crate::inference::NestedInferenceAlgorithm;
use crate::planner::{
    agent_waypoint_path, noise_logdensity, waypoint_walk_given, PlannerParams, TimeGrid,
};
use crate::rng::{seeded, substream, Stream};
use crate::stats::{normal_logpdf, std_normal_pdf, trunc_mass, trunc_normal_sample};
use crate::trace::{InternalTrace, Value};

const NUM_OUTPUTS: usize = 5;
const STD_FLOOR: f64 = 1e-3;
const PROB_CLAMP: f64 = 1e-6;
// Cap on the log-std heads so saturated nets keep a proper density.
const LOG_STD_CLAMP: f64 = 20.0;
const LN_HALF: f64 = -std::f64::consts::LN_2;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("training produced a non-finite loss at epoch {0}")]
    NonFiniteLoss(usize),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("invalid train config: {0}")]
    BadConfig(String),
    #[error("net file i/o failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("net file malformed: {0}")]
    Format(#[from] serde_json::Error),
    #[error("unsupported net file version {0}")]
    Version(u32),
    #[error("net input size {expected} does not match scenario ({got})")]
    InputMismatch { expected: usize, got: usize },
}

/// One hidden tanh layer and three heads: a logit for w, sigmoid means for
/// g' in [0,1]^2, and per-coordinate log-stds.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalNet {
    pub input_dim: usize,
    pub hidden_dim: usize,
    params: Vec<f64>,
}

/// Decoded network outputs.
#[derive(Debug, Clone, Copy)]
pub struct Heads {
    pub w_prob: f64,
    pub mu: [f64; 2],
    pub std: [f64; 2],
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl ProposalNet {
    pub fn param_count(input_dim: usize, hidden_dim: usize) -> usize {
        hidden_dim * input_dim + hidden_dim + NUM_OUTPUTS * hidden_dim + NUM_OUTPUTS
    }

    /// Xavier-uniform weights, zero biases.
    pub fn new(input_dim: usize, hidden_dim: usize, seed: u64) -> Self {
        let mut rng = seeded(seed);
        let mut params = vec![0.0; Self::param_count(input_dim, hidden_dim)];
        let lim1 = (6.0 / (input_dim + hidden_dim) as f64).sqrt();
        for w in params.iter_mut().take(hidden_dim * input_dim) {
            *w = rng.gen_range(-lim1..lim1);
        }
        let lim2 = (6.0 / (hidden_dim + NUM_OUTPUTS) as f64).sqrt();
        let w2_start = hidden_dim * input_dim + hidden_dim;
        for w in params
            .iter_mut()
            .skip(w2_start)
            .take(NUM_OUTPUTS * hidden_dim)
        {
            *w = rng.gen_range(-lim2..lim2);
        }
        ProposalNet {
            input_dim,
            hidden_dim,
            params,
        }
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        ProposalNet {
            input_dim,
            hidden_dim,
            params: vec![0.0; Self::param_count(input_dim, hidden_dim)],
        }
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn w1(&self) -> &[f64] {
        &self.params[..self.hidden_dim * self.input_dim]
    }

    fn b1(&self) -> &[f64] {
        let start = self.hidden_dim * self.input_dim;
        &self.params[start..start + self.hidden_dim]
    }

    fn w2(&self) -> &[f64] {
        let start = self.hidden_dim * self.input_dim + self.hidden_dim;
        &self.params[start..start + NUM_OUTPUTS * self.hidden_dim]
    }

    fn b2(&self) -> &[f64] {
        let start =
            self.hidden_dim * self.input_dim + self.hidden_dim + NUM_OUTPUTS * self.hidden_dim;
        &self.params[start..]
    }

    fn forward_raw(&self, input: &[f64]) -> (Vec<f64>, [f64; NUM_OUTPUTS]) {
        assert_eq!(input.len(), self.input_dim, "net input size mismatch");
        let (m, n) = (self.hidden_dim, self.input_dim);
        let (w1, b1, w2, b2) = (self.w1(), self.b1(), self.w2(), self.b2());
        let mut hidden = vec![0.0; m];
        for j in 0..m {
            let row = &w1[j * n..(j + 1) * n];
            let a: f64 = row.iter().zip(input).map(|(w, v)| w * v).sum::<f64>() + b1[j];
            hidden[j] = a.tanh();
        }
        let mut out = [0.0; NUM_OUTPUTS];
        for (k, o) in out.iter_mut().enumerate() {
            let row = &w2[k * m..(k + 1) * m];
            *o = row.iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>() + b2[k];
        }
        (hidden, out)
    }

    fn decode(out: &[f64; NUM_OUTPUTS]) -> Heads {
        Heads {
            w_prob: sigmoid(out[0]).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP),
            mu: [sigmoid(out[1]), sigmoid(out[2])],
            std: [
                STD_FLOOR + out[3].clamp(-LOG_STD_CLAMP, LOG_STD_CLAMP).exp(),
                STD_FLOOR + out[4].clamp(-LOG_STD_CLAMP, LOG_STD_CLAMP).exp(),
            ],
        }
    }

    pub fn heads(&self, input: &[f64]) -> Heads {
        let (_, out) = self.forward_raw(input);
        Self::decode(&out)
    }
}

/// Network input layout: goal coordinates followed by the flattened series.
pub fn encode_input(goal: Point, observed: &[Point]) -> Vec<f64> {
    let mut v = Vec::with_capacity(2 + 2 * observed.len());
    v.push(goal.x);
    v.push(goal.y);
    for p in observed {
        v.push(p.x);
        v.push(p.y);
    }
    v
}

fn trunc_logpdf_unit(x: f64, mu: f64, std: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) {
        return f64::NEG_INFINITY;
    }
    normal_logpdf(x, mu, std) - trunc_mass(mu, std, 0.0, 1.0).ln()
}

/// log q(w, g'; goal, observed) under the factorized proposal.
pub fn net_logdensity(
    net: &ProposalNet,
    goal: Point,
    observed: &[Point],
    used_waypoint: bool,
    waypoint: Point,
) -> f64 {
    let heads = net.heads(&encode_input(goal, observed));
    if used_waypoint {
        heads.w_prob.ln()
            + trunc_logpdf_unit(waypoint.x, heads.mu[0], heads.std[0])
            + trunc_logpdf_unit(waypoint.y, heads.mu[1], heads.std[1])
    } else {
        // g' is proposed from its uniform prior, density one on the square.
        (1.0 - heads.w_prob).ln()
    }
}

/// Draw (w, g') from the network's proposal.
pub fn sample_waypoint(
    net: &ProposalNet,
    goal: Point,
    observed: &[Point],
    rng: &mut Stream,
) -> (bool, Point) {
    let heads = net.heads(&encode_input(goal, observed));
    let used = rng.gen_bool(heads.w_prob);
    let waypoint = if used {
        Point::new(
            trunc_normal_sample(heads.mu[0], heads.std[0], 0.0, 1.0, rng),
            trunc_normal_sample(heads.mu[1], heads.std[1], 0.0, 1.0, rng),
        )
    } else {
        Point::new(rng.gen(), rng.gen())
    };
    (used, waypoint)
}

/// One recorded forward run: planner inputs, noisy output, and the waypoint
/// part of the internal trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingExample {
    pub goal: Point,
    pub observed: Vec<Point>,
    pub used_waypoint: bool,
    pub waypoint: Point,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainingSet {
    pub examples: Vec<TrainingExample>,
}

#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-2,
            batch_size: 64,
            epochs: 50,
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        if !(self.learning_rate > 0.0) {
            return Err(NeuralError::BadConfig("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(NeuralError::BadConfig("batch_size and epochs must be positive".into()));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(NeuralError::BadConfig("validation_fraction must be in (0,1)".into()));
        }
        Ok(())
    }
}

/// Draw `count` goals from the training distribution (uniform over the
/// square), run the traced waypoint planner on each, and record the trace.
pub fn generate_training_data(
    map: &WorldMap,
    start: Point,
    times: &TimeGrid,
    params: &PlannerParams,
    noise_std: f64,
    count: usize,
    rng: &mut Stream,
) -> TrainingSet {
    let base: u64 = rng.gen();
    let examples: Vec<TrainingExample> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut sub = substream(base, i as u64);
            let goal = Point::new(sub.gen(), sub.gen());
            let (observed, trace) =
                agent_waypoint_path(map, start, goal, times, params, noise_std, &mut sub);
            TrainingExample {
                goal,
                observed,
                used_waypoint: trace.used_waypoint,
                waypoint: trace.waypoint,
            }
        })
        .collect();
    TrainingSet { examples }
}

/// Mean negative log proposal density over a batch.
pub fn batch_nll(net: &ProposalNet, batch: &[&TrainingExample]) -> f64 {
    let total: f64 = batch
        .iter()
        .map(|ex| -net_logdensity(net, ex.goal, &ex.observed, ex.used_waypoint, ex.waypoint))
        .sum();
    total / batch.len() as f64
}

/// Mean NLL and its gradient with respect to every parameter.
pub fn batch_nll_grad(net: &ProposalNet, batch: &[&TrainingExample]) -> (f64, Vec<f64>) {
    let (m, n) = (net.hidden_dim, net.input_dim);
    let mut grad = vec![0.0; net.params.len()];
    let mut total_nll = 0.0;
    let w2_start = m * n + m;
    let b2_start = w2_start + NUM_OUTPUTS * m;

    for ex in batch {
        let input = encode_input(ex.goal, &ex.observed);
        let (hidden, out) = net.forward_raw(&input);

        // Head gradients of the per-example NLL.
        let mut delta = [0.0; NUM_OUTPUTS];
        let mut nll = 0.0;

        let p_raw = sigmoid(out[0]);
        let p = p_raw.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        let w = ex.used_waypoint;
        nll -= if w { p.ln() } else { (1.0 - p).ln() };
        if (PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&p_raw) {
            delta[0] = p - if w { 1.0 } else { 0.0 };
        }

        if w {
            let x = [ex.waypoint.x, ex.waypoint.y];
            for c in 0..2 {
                let mu = sigmoid(out[1 + c]);
                let raw = out[3 + c];
                let exp_raw = raw.clamp(-LOG_STD_CLAMP, LOG_STD_CLAMP).exp();
                let std = STD_FLOOR + exp_raw;
                let alpha = -mu / std;
                let beta = (1.0 - mu) / std;
                let z = trunc_mass(mu, std, 0.0, 1.0);
                nll -= normal_logpdf(x[c], mu, std) - z.ln();

                let dz_dmu = (std_normal_pdf(alpha) - std_normal_pdf(beta)) / std;
                let dlog_dmu = (x[c] - mu) / (std * std) - dz_dmu / z;
                delta[1 + c] = -dlog_dmu * mu * (1.0 - mu);

                let dz_dstd =
                    (std_normal_pdf(alpha) * alpha - std_normal_pdf(beta) * beta) / std;
                let r = x[c] - mu;
                let dlog_dstd = -1.0 / std + r * r / (std * std * std) - dz_dstd / z;
                let dstd_draw = if raw.abs() < LOG_STD_CLAMP { exp_raw } else { 0.0 };
                delta[3 + c] = -dlog_dstd * dstd_draw;
            }
        }
        total_nll += nll;

        // Backpropagate through the output layer and the tanh hidden layer.
        let w2 = net.w2();
        for k in 0..NUM_OUTPUTS {
            if delta[k] == 0.0 {
                continue;
            }
            for j in 0..m {
                grad[w2_start + k * m + j] += delta[k] * hidden[j];
            }
            grad[b2_start + k] += delta[k];
        }
        for j in 0..m {
            let mut dh = 0.0;
            for k in 0..NUM_OUTPUTS {
                dh += w2[k * m + j] * delta[k];
            }
            let da = dh * (1.0 - hidden[j] * hidden[j]);
            if da == 0.0 {
                continue;
            }
            for i in 0..n {
                grad[j * n + i] += da * input[i];
            }
            grad[m * n + j] += da;
        }
    }

    let scale = 1.0 / batch.len() as f64;
    for g in grad.iter_mut() {
        *g *= scale;
    }
    (total_nll * scale, grad)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_nll: f64,
    pub val_nll: f64,
}

pub struct TrainOutcome {
    pub net: ProposalNet,
    /// Entry 0 is the pre-training evaluation; entry e the state after
    /// epoch e.
    pub curve: Vec<EpochStats>,
}

/// Plain mini-batch SGD on the mean NLL. Deterministic given the config
/// seed; aborts on a non-finite loss.
pub fn train(
    mut net: ProposalNet,
    data: &TrainingSet,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, NeuralError> {
    cfg.validate()?;
    if data.examples.is_empty() {
        return Err(NeuralError::EmptyTrainingSet);
    }
    if let Some(ex) = data.examples.first() {
        let got = 2 + 2 * ex.observed.len();
        if got != net.input_dim {
            return Err(NeuralError::InputMismatch {
                expected: net.input_dim,
                got,
            });
        }
    }

    let mut rng = seeded(cfg.seed);
    let total = data.examples.len();
    let mut indices: Vec<usize> = (0..total).collect();
    indices.shuffle(&mut rng);
    let val_count = if total >= 2 {
        ((total as f64 * cfg.validation_fraction).round() as usize).clamp(1, total - 1)
    } else {
        0
    };
    let (val_idx, train_idx) = indices.split_at(val_count);
    let train_set: Vec<&TrainingExample> = train_idx.iter().map(|&i| &data.examples[i]).collect();
    let val_set: Vec<&TrainingExample> = val_idx.iter().map(|&i| &data.examples[i]).collect();

    let eval = |net: &ProposalNet| {
        let train_nll = batch_nll(net, &train_set);
        let val_nll = if val_set.is_empty() {
            train_nll
        } else {
            batch_nll(net, &val_set)
        };
        (train_nll, val_nll)
    };

    let mut curve = Vec::with_capacity(cfg.epochs + 1);
    let (t0, v0) = eval(&net);
    curve.push(EpochStats {
        epoch: 0,
        train_nll: t0,
        val_nll: v0,
    });

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&TrainingExample> = chunk.iter().map(|&i| train_set[i]).collect();
            let (loss, grad) = batch_nll_grad(&net, &batch);
            if !loss.is_finite() {
                return Err(NeuralError::NonFiniteLoss(epoch));
            }
            for (p, g) in net.params_mut().iter_mut().zip(&grad) {
                *p -= cfg.learning_rate * g;
            }
        }
        let (train_nll, val_nll) = eval(&net);
        if !train_nll.is_finite() || !val_nll.is_finite() {
            return Err(NeuralError::NonFiniteLoss(epoch));
        }
        curve.push(EpochStats {
            epoch,
            train_nll,
            val_nll,
        });
    }
    Ok(TrainOutcome { net, curve })
}

/// Nested inference for the waypoint planner: the network proposes (w, g')
/// given goal and observations, the remaining planner internals run forward
/// from their prior, and the density ratio reduces to the observation-noise
/// density times the (w, g') prior over the network's proposal density.
#[allow(clippy::too_many_arguments)]
pub fn neural_nested_algorithm(
    net: Arc<ProposalNet>,
    map: Arc<WorldMap>,
    start: Point,
    times: TimeGrid,
    params: PlannerParams,
    noise_std: f64,
    sample_count: usize,
) -> NestedInferenceAlgorithm {
    let sample_net = Arc::clone(&net);
    let sample_map = Arc::clone(&map);
    let sample_times = times.clone();
    NestedInferenceAlgorithm::new(
        Box::new(move |args: &[Value], z: &Value, rng: &mut Stream| {
            let goal = args[0].as_point();
            let observed = z.as_series();
            let (used, waypoint) = sample_waypoint(&sample_net, goal, observed, rng);
            let walked = waypoint_walk_given(
                &sample_map,
                start,
                goal,
                &sample_times,
                &params,
                used,
                waypoint,
                rng,
            );
            InternalTrace::Waypoint(crate::planner::WaypointTrace {
                used_waypoint: used,
                waypoint,
                walked,
            })
        }),
        Box::new(move |u: &InternalTrace, z: &Value, args: &[Value]| {
            let goal = args[0].as_point();
            let observed = z.as_series();
            let wt = u.as_waypoint();
            noise_logdensity(observed, &wt.walked, noise_std) + LN_HALF
                - net_logdensity(&net, goal, observed, wt.used_waypoint, wt.waypoint)
        }),
        sample_count,
    )
}

#[derive(Serialize, Deserialize)]
struct NetFile {
    version: u32,
    input_dim: usize,
    hidden_dim: usize,
    params: Vec<f64>,
}

const NET_FILE_VERSION: u32 = 1;

pub fn save_net(net: &ProposalNet, path: &FsPath) -> Result<(), NeuralError> {
    let file = NetFile {
        version: NET_FILE_VERSION,
        input_dim: net.input_dim,
        hidden_dim: net.hidden_dim,
        params: net.params.clone(),
    };
    std::fs::write(path, serde_json::to_string(&file)?)?;
    Ok(())
}

pub fn load_net(path: &FsPath) -> Result<ProposalNet, NeuralError> {
    let file: NetFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if file.version != NET_FILE_VERSION {
        return Err(NeuralError::Version(file.version));
    }
    if file.params.len() != ProposalNet::param_count(file.input_dim, file.hidden_dim) {
        return Err(NeuralError::BadConfig("parameter count mismatch".into()));
    }
    Ok(ProposalNet {
        input_dim: file.input_dim,
        hidden_dim: file.hidden_dim,
        params: file.params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::trunc_normal_logpdf;

    fn tiny_example(used: bool) -> TrainingExample {
        TrainingExample {
            goal: Point::new(0.8, 0.2),
            observed: vec![Point::new(0.1, 0.1), Point::new(0.2, 0.2)],
            used_waypoint: used,
            waypoint: Point::new(0.4, 0.7),
        }
    }

    #[test]
    fn zero_net_density_splits_into_coin_and_trunc_gaussian() {
        let net = ProposalNet::zeros(6, 8);
        let ex = tiny_example(true);
        let ld = net_logdensity(&net, ex.goal, &ex.observed, true, ex.waypoint);
        // sigmoid(0) = 0.5, mu = 0.5, std = 1e-3 + 1.
        let expected = 0.5f64.ln()
            + trunc_normal_logpdf(0.4, 0.5, 1.001, 0.0, 1.0)
            + trunc_normal_logpdf(0.7, 0.5, 1.001, 0.0, 1.0);
        assert!((ld - expected).abs() < 1e-12, "{ld} vs {expected}");
    }

    #[test]
    fn unused_waypoint_contributes_only_the_coin() {
        let net = ProposalNet::zeros(6, 8);
        let ex = tiny_example(false);
        let ld = net_logdensity(&net, ex.goal, &ex.observed, false, ex.waypoint);
        assert!((ld - 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn density_integrates_to_one_by_monte_carlo() {
        // E_{g' ~ U}[q(w=0, g') + q(w=1, g')] estimates the total mass.
        let net = ProposalNet::new(6, 16, 3);
        let ex = tiny_example(true);
        let mut rng = seeded(10);
        let n = 200_000;
        let mut total = 0.0;
        for _ in 0..n {
            let gp = Point::new(rng.gen(), rng.gen());
            total += net_logdensity(&net, ex.goal, &ex.observed, false, gp).exp()
                + net_logdensity(&net, ex.goal, &ex.observed, true, gp).exp();
        }
        let integral = total / n as f64;
        assert!((integral - 1.0).abs() < 0.01, "integral = {integral}");
    }

    #[test]
    fn gradient_matches_central_finite_differences() {
        let mut net = ProposalNet::new(6, 8, 7);
        let examples: Vec<TrainingExample> = vec![
            tiny_example(true),
            tiny_example(false),
            TrainingExample {
                goal: Point::new(0.1, 0.9),
                observed: vec![Point::new(0.3, 0.4), Point::new(0.5, 0.6)],
                used_waypoint: true,
                waypoint: Point::new(0.9, 0.1),
            },
        ];
        let batch: Vec<&TrainingExample> = examples.iter().collect();
        let (_, grad) = batch_nll_grad(&net, &batch);

        let h = 1e-5;
        let mut max_rel = 0.0f64;
        for i in 0..net.params().len() {
            let orig = net.params()[i];
            net.params_mut()[i] = orig + h;
            let up = batch_nll(&net, &batch);
            net.params_mut()[i] = orig - h;
            let down = batch_nll(&net, &batch);
            net.params_mut()[i] = orig;
            let fd = (up - down) / (2.0 * h);
            let rel = (grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(1e-8);
            max_rel = max_rel.max(rel);
        }
        assert!(max_rel < 1e-4, "max relative gradient error {max_rel}");
    }

    #[test]
    fn loss_equals_negative_mean_logdensity() {
        // The training objective drops a constant; what is optimized must be
        // exactly the negative mean log proposal density.
        let net = ProposalNet::new(6, 8, 1);
        let examples = vec![tiny_example(true), tiny_example(false)];
        let batch: Vec<&TrainingExample> = examples.iter().collect();
        let direct: f64 = batch
            .iter()
            .map(|ex| -net_logdensity(&net, ex.goal, &ex.observed, ex.used_waypoint, ex.waypoint))
            .sum::<f64>()
            / 2.0;
        let (loss, _) = batch_nll_grad(&net, &batch);
        assert!((loss - direct).abs() < 1e-10);
        assert!((batch_nll(&net, &batch) - direct).abs() < 1e-10);
    }

    #[test]
    fn overfits_a_repeated_example() {
        let data = TrainingSet {
            examples: vec![tiny_example(true); 64],
        };
        let cfg = TrainConfig {
            epochs: 30,
            batch_size: 16,
            ..TrainConfig::default()
        };
        let net = ProposalNet::new(6, 8, 2);
        let out = train(net, &data, &cfg).unwrap();
        let first = out.curve.first().unwrap().train_nll;
        let last = out.curve.last().unwrap().train_nll;
        assert!(last <= first, "nll went up: {first} -> {last}");
    }

    #[test]
    fn training_is_deterministic() {
        let data = TrainingSet {
            examples: (0..40).map(|i| tiny_example(i % 2 == 0)).collect(),
        };
        let cfg = TrainConfig {
            epochs: 3,
            ..TrainConfig::default()
        };
        let run = || {
            train(ProposalNet::new(6, 8, 5), &data, &cfg)
                .unwrap()
                .net
                .params()
                .to_vec()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn proposal_support_covers_the_whole_square() {
        // Extreme parameters still give positive density everywhere.
        let mut net = ProposalNet::new(6, 8, 11);
        for p in net.params_mut() {
            *p *= 100.0;
        }
        let ex = tiny_example(true);
        let mut rng = seeded(12);
        for _ in 0..200 {
            let gp = Point::new(rng.gen(), rng.gen());
            for used in [false, true] {
                let ld = net_logdensity(&net, ex.goal, &ex.observed, used, gp);
                assert!(ld.is_finite(), "density vanished at {gp:?} used={used}");
            }
        }
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        let net = ProposalNet::new(6, 8, 9);
        save_net(&net, &path).unwrap();
        assert_eq!(load_net(&path).unwrap(), net);
    }
}
