//! Small numeric helpers shared across modules: log-space accumulation,
//! Gaussian and truncated-Gaussian densities, and a rank-sum test.

use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::rng::Stream;

pub const LN_2PI: f64 = 1.8378770664093453;

/// log(sum(exp(xs))), stable for large negative inputs. Empty or all -inf
/// input yields -inf.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + sum.ln()
}

pub fn normal_logpdf(x: f64, mean: f64, std: f64) -> f64 {
    let z = (x - mean) / std;
    -std.ln() - 0.5 * LN_2PI - 0.5 * z * z
}

pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).unwrap()
}

pub fn std_normal_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

pub fn std_normal_inv_cdf(p: f64) -> f64 {
    std_normal().inverse_cdf(p)
}

/// Log density of a Gaussian truncated (and renormalized) to [lo, hi].
pub fn trunc_normal_logpdf(x: f64, mean: f64, std: f64, lo: f64, hi: f64) -> f64 {
    if x < lo || x > hi {
        return f64::NEG_INFINITY;
    }
    let z = trunc_mass(mean, std, lo, hi);
    normal_logpdf(x, mean, std) - z.ln()
}

/// Mass of the untruncated Gaussian inside [lo, hi].
pub fn trunc_mass(mean: f64, std: f64, lo: f64, hi: f64) -> f64 {
    std_normal_cdf((hi - mean) / std) - std_normal_cdf((lo - mean) / std)
}

/// Inverse-CDF sample from a Gaussian truncated to [lo, hi].
pub fn trunc_normal_sample(mean: f64, std: f64, lo: f64, hi: f64, rng: &mut Stream) -> f64 {
    let a = std_normal_cdf((lo - mean) / std);
    let b = std_normal_cdf((hi - mean) / std);
    let u: f64 = rng.gen();
    let p = (a + u * (b - a)).clamp(f64::MIN_POSITIVE, 1.0 - 1e-16);
    (mean + std * std_normal_inv_cdf(p)).clamp(lo, hi)
}

/// One-sided Mann-Whitney rank-sum test with normal approximation and
/// midranks for ties. Returns the p-value for H1: samples in `xs` tend to be
/// larger than samples in `ys`.
pub fn mann_whitney_p_greater(xs: &[f64], ys: &[f64]) -> f64 {
    let n1 = xs.len() as f64;
    let n2 = ys.len() as f64;
    assert!(n1 > 0.0 && n2 > 0.0, "mann_whitney needs non-empty samples");

    let mut all: Vec<(f64, bool)> = xs
        .iter()
        .map(|&v| (v, true))
        .chain(ys.iter().map(|&v| (v, false)))
        .collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let n = all.len();
    let mut ranks = vec![0.0; n];
    let mut tie_correction = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let avg_rank = ((i + 1 + j + 1) as f64) / 2.0;
        for r in ranks.iter_mut().take(j + 1).skip(i) {
            *r = avg_rank;
        }
        let t = (j - i + 1) as f64;
        tie_correction += t * t * t - t;
        i = j + 1;
    }

    let r1: f64 = all
        .iter()
        .zip(ranks.iter())
        .filter(|((_, is_x), _)| *is_x)
        .map(|(_, &r)| r)
        .sum();
    let u1 = r1 - n1 * (n1 + 1.0) / 2.0;

    let mean_u = n1 * n2 / 2.0;
    let nf = n as f64;
    let var_u = n1 * n2 / 12.0 * ((nf + 1.0) - tie_correction / (nf * (nf - 1.0)));
    if var_u <= 0.0 {
        return if u1 > mean_u { 0.0 } else { 1.0 };
    }
    let z = (u1 - mean_u - 0.5) / var_u.sqrt();
    1.0 - std_normal_cdf(z)
}
