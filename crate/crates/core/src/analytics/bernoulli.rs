//! Analytical binomial model of intersection throughput.
//!
//! With Bernoulli(k) occupancy, constant block length ℓ and green times
//! long enough to clear a full approach, the vehicles wanting to cross an
//! intersection per axis during cycle 0 follow Bin(2ℓ, k). Signal control
//! propagates extreme-value recursions across cycles: LQF feeds the
//! maximum of the two axes downstream, SQF the minimum, the random policy
//! leaves the law unchanged. Flow per lane is the count scaled by
//! `u/(8ℓ)`.

use crate::error::{Error, Result};
use crate::policy::PolicyKind;
use crate::scalar::Scalar;

/// Probability mass of Bin(n, p) by the multiplicative recurrence.
pub fn binom_pmf_table<S: Scalar>(n: u32, p: S) -> Vec<S> {
    let one = S::one();
    if p <= S::zero() {
        let mut t = vec![S::zero(); n as usize + 1];
        t[0] = one;
        return t;
    }
    if p >= one {
        let mut t = vec![S::zero(); n as usize + 1];
        t[n as usize] = one;
        return t;
    }
    let odds = p / (one - p);
    let mut t = Vec::with_capacity(n as usize + 1);
    let mut mass = (one - p).powi(n as i32);
    t.push(mass);
    for i in 0..n {
        let ratio = S::from_count((n - i) as u64) / S::from_count((i + 1) as u64);
        mass = mass * ratio * odds;
        t.push(mass);
    }
    t
}

/// Cumulative distribution of Bin(n, p), clamped to the unit interval:
/// `F(x) = 0` below the support and `1` from `n` upward.
pub fn binom_cdf<S: Scalar>(n: u32, p: S, x: i64) -> S {
    if x < 0 {
        return S::zero();
    }
    if x >= n as i64 {
        return S::one();
    }
    let table = binom_pmf_table(n, p);
    let mut acc = S::zero();
    for &mass in table.iter().take(x as usize + 1) {
        acc = acc + mass;
    }
    acc.min(S::one())
}

fn cdf_table<S: Scalar>(n: u32, p: S) -> Vec<S> {
    let mut acc = S::zero();
    binom_pmf_table(n, p)
        .into_iter()
        .map(|m| {
            acc = (acc + m).min(S::one());
            acc
        })
        .collect()
}

fn validate_base<S: Scalar>(kind: PolicyKind, j: u32, k: S) -> Result<()> {
    if kind == PolicyKind::Neural {
        return Err(Error::invalid(
            "policy",
            "the binomial model covers lqf, sqf and rnd only",
        ));
    }
    if kind != PolicyKind::Rnd && j == 0 {
        return Err(Error::invalid("j", "lqf/sqf recursions start at j = 1"));
    }
    if k < S::zero() || k > S::one() {
        return Err(Error::invalid("k", "density must lie in [0, 1]"));
    }
    Ok(())
}

fn propagate<S: Scalar>(kind: PolicyKind, j: u32, f0: S) -> S {
    match kind {
        // max of 2j i.i.d. draws
        PolicyKind::Lqf => f0.powi(2 * j as i32),
        // min of 2j i.i.d. draws
        PolicyKind::Sqf => S::one() - (S::one() - f0).powi(2 * j as i32),
        PolicyKind::Rnd => f0,
        PolicyKind::Neural => unreachable!("rejected in validate_base"),
    }
}

/// CDF of the per-axis crossing count at cycle `j` under the given
/// policy, with base law Bin(2ℓ, k).
pub fn fn_j<S: Scalar>(kind: PolicyKind, j: u32, ell: u32, k: S, n: i64) -> Result<S> {
    validate_base(kind, j, k)?;
    Ok(propagate(kind, j, binom_cdf(2 * ell, k, n)))
}

/// Quantiles of the flow per lane `Q = N / (8ℓ)` at cycle `j`: invert the
/// count CDF over its integer support and rescale.
pub fn flow_quantiles<S: Scalar>(
    kind: PolicyKind,
    j: u32,
    ell: u32,
    k: S,
    percentiles: &[f64],
) -> Result<Vec<S>> {
    validate_base(kind, j, k)?;
    if percentiles.iter().any(|&q| !(0.0 < q && q < 1.0)) {
        return Err(Error::invalid("percentiles", "must lie inside (0, 1)"));
    }
    let base = cdf_table(2 * ell, k);
    let scale = S::from_count(8 * ell as u64);
    Ok(percentiles
        .iter()
        .map(|&q| {
            let alpha = S::from_f64_lossy(q);
            let n = base
                .iter()
                .position(|&f| propagate(kind, j, f) >= alpha)
                .unwrap_or(2 * ell as usize);
            S::from_count(n as u64) / scale
        })
        .collect())
}

/// CDF of `min(X₁, X₂)` for independent `Xᵢ ~ Bin(2n, k)`.
pub fn min_two_binomials_cdf<S: Scalar>(n: u32, k: S, m: i64) -> S {
    let f = binom_cdf(2 * n, k, m);
    S::one() - (S::one() - f) * (S::one() - f)
}

/// Quantiles of the minimum of two independent Bin(2n, k) counts.
pub fn min_two_binomials_quantiles<S: Scalar>(
    n: u32,
    k: S,
    percentiles: &[f64],
) -> Result<Vec<u32>> {
    if n < 1 {
        return Err(Error::invalid("n", "need at least one trial pair"));
    }
    if k < S::zero() || k > S::one() {
        return Err(Error::invalid("k", "probability must lie in [0, 1]"));
    }
    if percentiles.iter().any(|&q| !(0.0 < q && q < 1.0)) {
        return Err(Error::invalid("percentiles", "must lie inside (0, 1)"));
    }
    let base = cdf_table(2 * n, k);
    Ok(percentiles
        .iter()
        .map(|&q| {
            let alpha = S::from_f64_lossy(q);
            base.iter()
                .position(|&f| {
                    let g = S::one() - (S::one() - f) * (S::one() - f);
                    g >= alpha
                })
                .unwrap_or(2 * n as usize) as u32
        })
        .collect())
}
