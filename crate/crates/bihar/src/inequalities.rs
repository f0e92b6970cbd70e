//! Executable scalar-inequality oracles: superadditivity with a cross
//! term, the Taylor remainder bound for real powers, and the Jensen
//! convexity gap. Randomized scans report empirical constants; they are
//! frozen as regression bounds, never asserted as proven values.
//!
//! Real powers of negative bases use the signed convention
//! x^q := sign(x) |x|^q throughout.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// sign(x) |x|^q.
pub fn signed_pow(x: f64, q: f64) -> f64 {
    x.signum() * x.abs().powf(q)
}

/// (sum a)^q - sum a_i^q - (gamma q / 2) sum_{i != j} a_i^{q-1} a_j.
/// Nonnegative for some gamma > 1 by the superadditivity lemma; this
/// evaluates the gap at a supplied gamma.
pub fn superadditivity_gap(a: &[f64], q: f64, gamma: f64) -> Result<f64> {
    if !(q > 2.0) {
        return Err(Error::InvalidParameter(format!("superadditivity wants q > 2, got {q}")));
    }
    if a.is_empty() || a.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::InvalidParameter("tuple entries must be positive".into()));
    }
    let total: f64 = a.iter().sum();
    let power_sum: f64 = a.iter().map(|&x| x.powf(q)).sum();
    let mut cross = 0.0;
    for (i, &ai) in a.iter().enumerate() {
        for (j, &aj) in a.iter().enumerate() {
            if i != j {
                cross += ai.powf(q - 1.0) * aj;
            }
        }
    }
    Ok(total.powf(q) - power_sum - gamma * q / 2.0 * cross)
}

/// |(a+b)^q - a^q - q a^{q-1} b| / (|b|^q + |a|^{q-2} min(a^2, b^2)),
/// signed powers; 0/0 is defined as 0.
///
/// The middle factor uses |a|^{q-1}, the derivative of the signed power
/// sign(a)|a|^q divided by q. With sign(a)|a|^{q-1} instead, the linear
/// term doubles rather than cancels for a < 0 and the ratio is
/// unbounded as b -> 0; both readings agree for a > 0, where the
/// estimate is actually applied.
pub fn taylor_remainder_ratio(a: f64, b: f64, q: f64) -> Result<f64> {
    if !(q > 2.0) {
        return Err(Error::InvalidParameter(format!("taylor remainder wants q > 2, got {q}")));
    }
    let denom = b.abs().powf(q) + a.abs().powf(q - 2.0) * (a * a).min(b * b);
    if denom == 0.0 {
        return Ok(0.0);
    }
    let num = (signed_pow(a + b, q) - signed_pow(a, q) - q * a.abs().powf(q - 1.0) * b).abs();
    Ok(num / denom)
}

/// Jensen gap sum beta_i d_i^q - (sum beta_i d_i)^q for simplex weights;
/// nonnegative for q > 1.
pub fn convexity_check(beta: &[f64], deltas: &[f64], q: f64) -> Result<f64> {
    if !(q > 1.0) {
        return Err(Error::InvalidParameter(format!("convexity wants q > 1, got {q}")));
    }
    if beta.len() != deltas.len() || beta.is_empty() {
        return Err(Error::InvalidParameter("weights and values must match".into()));
    }
    if beta.iter().any(|&b| b < 0.0) || (beta.iter().sum::<f64>() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter("weights must lie on the simplex".into()));
    }
    if deltas.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::InvalidParameter("values must be positive".into()));
    }
    let lhs: f64 = beta.iter().zip(deltas).map(|(&b, &d)| b * d.powf(q)).sum();
    let mean: f64 = beta.iter().zip(deltas).map(|(&b, &d)| b * d).sum();
    Ok(lhs - mean.powf(q))
}

/// Outcome of a randomized scan; `extreme` is the bound-defining value
/// and `worst` the tuple attaining it.
#[derive(Debug, Clone, Serialize)]
pub struct ScanReport {
    pub q: f64,
    pub samples: usize,
    pub extreme: f64,
    pub worst: Vec<f64>,
}

/// Largest gamma keeping the superadditivity gap nonnegative over random
/// positive tuples (p between 2 and 5); the lemma claims the infimum
/// exceeds 1.
pub fn scan_gamma_star(q: f64, samples: usize, seed: u64) -> Result<ScanReport> {
    if !(q > 2.0) {
        return Err(Error::InvalidParameter(format!("scan wants q > 2, got {q}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gamma_star = f64::INFINITY;
    let mut worst = Vec::new();
    for _ in 0..samples {
        let p = rng.gen_range(2..=5usize);
        let a: Vec<f64> = (0..p).map(|_| rng.gen_range(1e-3..1.0f64)).collect();
        let total: f64 = a.iter().sum();
        let power_sum: f64 = a.iter().map(|&x| x.powf(q)).sum();
        let mut cross = 0.0;
        for (i, &ai) in a.iter().enumerate() {
            for (j, &aj) in a.iter().enumerate() {
                if i != j {
                    cross += ai.powf(q - 1.0) * aj;
                }
            }
        }
        // gap >= 0  <=>  gamma <= [(sum)^q - sum a^q] / (q/2 cross)
        let cap = (total.powf(q) - power_sum) / (q / 2.0 * cross);
        if cap < gamma_star {
            gamma_star = cap;
            worst = a;
        }
    }
    Ok(ScanReport { q, samples, extreme: gamma_star, worst })
}

/// Largest Taylor-remainder ratio over random pairs in [-range, range]^2.
pub fn scan_m_star(q: f64, samples: usize, range: f64, seed: u64) -> Result<ScanReport> {
    if !(q > 2.0) {
        return Err(Error::InvalidParameter(format!("scan wants q > 2, got {q}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m_star = 0.0f64;
    let mut worst = vec![0.0, 0.0];
    for _ in 0..samples {
        let a = rng.gen_range(-range..range);
        let b = rng.gen_range(-range..range);
        let r = taylor_remainder_ratio(a, b, q)?;
        if r > m_star {
            m_star = r;
            worst = vec![a, b];
        }
    }
    Ok(ScanReport { q, samples, extreme: m_star, worst })
}

/// Smallest Jensen gap over random simplex weights and positive values.
pub fn scan_jensen(q: f64, samples: usize, seed: u64) -> Result<ScanReport> {
    if !(q > 1.0) {
        return Err(Error::InvalidParameter(format!("scan wants q > 1, got {q}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_gap = f64::INFINITY;
    let mut worst = Vec::new();
    for _ in 0..samples {
        let p = rng.gen_range(1..=5usize);
        let mut beta: Vec<f64> = (0..p).map(|_| rng.gen_range(0.0..1.0f64)).collect();
        let total: f64 = beta.iter().sum();
        if total == 0.0 {
            continue;
        }
        for b in beta.iter_mut() {
            *b /= total;
        }
        let deltas: Vec<f64> = (0..p).map(|_| rng.gen_range(1e-3..10.0f64)).collect();
        let gap = convexity_check(&beta, &deltas, q)?;
        if gap < min_gap {
            min_gap = gap;
            worst = beta.iter().chain(deltas.iter()).copied().collect();
        }
    }
    Ok(ScanReport { q, samples, extreme: min_gap, worst })
}
