//! Shared test fixtures: a tiny discrete chain a -> b -> c whose middle
//! node is likelihood-free but fully enumerable from the outside, plus the
//! exact-arithmetic oracles the acceptance suite checks against.

use std::sync::Arc;

use rand::Rng;

use goalinfer::inference::NestedInferenceAlgorithm;
use goalinfer::trace::{
    InternalTrace, ModelGraph, ModelGraphBuilder, Primitive, Value,
};

/// Prior over a in {0, 1, 2}.
pub const PRIOR_A: [f64; 3] = [0.2, 0.3, 0.5];
/// p(u | a) for the middle node's internal latent u in {0, 1, 2}.
pub const P_U_GIVEN_A: [[f64; 3]; 3] = [
    [0.7, 0.2, 0.1],
    [0.2, 0.5, 0.3],
    [0.1, 0.3, 0.6],
];
/// p(b = 1 | u); b in {0, 1}.
pub const P_B1_GIVEN_U: [f64; 3] = [0.1, 0.5, 0.9];
/// p(c = 1 | b); c in {0, 1}.
pub const P_C1_GIVEN_B: [f64; 2] = [0.2, 0.8];
/// The observed value of c.
pub const C_OBS: i64 = 1;

pub fn p_c_given_b(c: i64, b: i64) -> f64 {
    let p1 = P_C1_GIVEN_B[b as usize];
    if c == 1 {
        p1
    } else {
        1.0 - p1
    }
}

pub fn p_b_given_u(b: i64, u: usize) -> f64 {
    let p1 = P_B1_GIVEN_U[u];
    if b == 1 {
        p1
    } else {
        1.0 - p1
    }
}

/// Marginal likelihood of the likelihood-free node: p(b | a), summing out u.
pub fn marginal_b(b: i64, a: i64) -> f64 {
    (0..3)
        .map(|u| P_U_GIVEN_A[a as usize][u] * p_b_given_u(b, u))
        .sum()
}

/// Conditional over the internal latent: p(u | b, a).
pub fn posterior_u(b: i64, a: i64) -> [f64; 3] {
    let z = marginal_b(b, a);
    let mut out = [0.0; 3];
    for u in 0..3 {
        out[u] = P_U_GIVEN_A[a as usize][u] * p_b_given_u(b, u) / z;
    }
    out
}

/// Exact posterior p(a | c = C_OBS), marginalizing b.
pub fn exact_posterior_a() -> [f64; 3] {
    let mut weights = [0.0; 3];
    for a in 0..3i64 {
        for b in 0..2i64 {
            weights[a as usize] +=
                PRIOR_A[a as usize] * marginal_b(b, a) * p_c_given_b(C_OBS, b);
        }
    }
    let total: f64 = weights.iter().sum();
    weights.map(|w| w / total)
}

/// Exact joint posterior p(a, b | c = C_OBS), indexed [a][b].
pub fn exact_posterior_ab() -> [[f64; 2]; 3] {
    let mut weights = [[0.0; 2]; 3];
    let mut total = 0.0;
    for a in 0..3i64 {
        for b in 0..2i64 {
            let w = PRIOR_A[a as usize] * marginal_b(b, a) * p_c_given_b(C_OBS, b);
            weights[a as usize][b as usize] = w;
            total += w;
        }
    }
    for row in weights.iter_mut() {
        for w in row.iter_mut() {
            *w /= total;
        }
    }
    weights
}

fn sample_index(probs: &[f64], rng: &mut goalinfer::rng::Stream) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

pub fn prior_a_primitive() -> Arc<Primitive> {
    Arc::new(Primitive::with_density(
        "prior_a",
        Box::new(|_, rng| Value::Int(sample_index(&PRIOR_A, rng) as i64)),
        Box::new(|z, _| PRIOR_A[z.as_int() as usize].ln()),
    ))
}

/// The likelihood-free middle node: simulates u internally, emits b, and
/// exposes no output density. The traced variant records u.
pub fn opaque_b_primitive() -> Arc<Primitive> {
    Arc::new(
        Primitive::likelihood_free(
            "opaque_b",
            Box::new(|args, rng| {
                let a = args[0].as_int();
                let u = sample_index(&P_U_GIVEN_A[a as usize], rng);
                let b = i64::from(rng.gen_bool(P_B1_GIVEN_U[u]));
                Value::Int(b)
            }),
        )
        .traced(Box::new(|args, rng| {
            let a = args[0].as_int();
            let u = sample_index(&P_U_GIVEN_A[a as usize], rng);
            let b = i64::from(rng.gen_bool(P_B1_GIVEN_U[u]));
            (InternalTrace::Discrete(u as i64), Value::Int(b))
        })),
    )
}

/// Tractable variant of the middle node, for fully-tractable baselines.
pub fn tractable_b_primitive() -> Arc<Primitive> {
    Arc::new(Primitive::with_density(
        "tractable_b",
        Box::new(|args, rng| {
            let a = args[0].as_int();
            let u = sample_index(&P_U_GIVEN_A[a as usize], rng);
            Value::Int(i64::from(rng.gen_bool(P_B1_GIVEN_U[u])))
        }),
        Box::new(|z, args| marginal_b(z.as_int(), args[0].as_int()).ln()),
    ))
}

pub fn leaf_c_primitive() -> Arc<Primitive> {
    Arc::new(Primitive::with_density(
        "leaf_c",
        Box::new(|args, rng| {
            let b = args[0].as_int();
            Value::Int(i64::from(rng.gen_bool(P_C1_GIVEN_B[b as usize])))
        }),
        Box::new(|z, args| p_c_given_b(z.as_int(), args[0].as_int()).ln()),
    ))
}

fn pass_through() -> goalinfer::trace::ArgFn {
    Box::new(|parents| parents.to_vec())
}

/// a -> b(likelihood-free) -> c(constrained), the standard toy chain.
pub fn toy_chain(b: Arc<Primitive>) -> ModelGraph {
    ModelGraphBuilder::new()
        .root("a", prior_a_primitive())
        .choice("b", b, &["a"], pass_through())
        .choice("c", leaf_c_primitive(), &["b"], pass_through())
        .constrain("c", Value::Int(C_OBS))
        .build()
        .expect("toy chain builds")
}

/// Resimulation nested inference for the opaque node: u from its prior,
/// ratio p(b | u).
pub fn resimulation_nia(sample_count: usize) -> NestedInferenceAlgorithm {
    NestedInferenceAlgorithm::new(
        Box::new(|args, _z, rng| {
            let a = args[0].as_int();
            InternalTrace::Discrete(sample_index(&P_U_GIVEN_A[a as usize], rng) as i64)
        }),
        Box::new(|u, z, _args| p_b_given_u(z.as_int(), u.as_discrete() as usize).ln()),
        sample_count,
    )
}

/// Exact nested inference: u from p(u | b, a), ratio constantly p(b | a).
pub fn exact_nia(sample_count: usize) -> NestedInferenceAlgorithm {
    NestedInferenceAlgorithm::new(
        Box::new(|args, z, rng| {
            let probs = posterior_u(z.as_int(), args[0].as_int());
            InternalTrace::Discrete(sample_index(&probs, rng) as i64)
        }),
        Box::new(|_u, z, args| marginal_b(z.as_int(), args[0].as_int()).ln()),
        sample_count,
    )
}

/// Total-variation distance between two distributions over indices.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p
        .iter()
        .zip(q.iter())
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
}

/// Empirical marginal of an Int-valued choice over final states.
pub fn empirical_marginal(
    graph: &ModelGraph,
    finals: &[goalinfer::trace::TraceState],
    id: &str,
    support: usize,
) -> Vec<f64> {
    let idx = graph.node_index(id).expect("choice exists");
    let mut counts = vec![0usize; support];
    for s in finals {
        counts[s.values[idx].as_int() as usize] += 1;
    }
    counts
        .into_iter()
        .map(|c| c as f64 / finals.len() as f64)
        .collect()
}
