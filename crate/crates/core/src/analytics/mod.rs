//! Flow-density analytics: MFD estimation with percentile bands, extreme
//! cuts, overlap and skewness diagnostics, and detaching detection.

pub mod bernoulli;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::network::{build_network, Axis, NetworkConfig};
use crate::policy::min_green;
use crate::policy::Policy;
use crate::rng::{derive_seed, Stream};
use crate::scalar::Scalar;
use crate::sim::{decide_phases, init_bernoulli, run, step, Phase};

/// Sampling protocol for one MFD estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct MfdProtocol {
    /// Densities to probe, strictly increasing inside (0, 1).
    pub densities: Vec<f64>,
    /// Replications per density.
    pub reps: usize,
    /// Warm-up cycles (one cycle is 2g steps) discarded before measuring.
    pub warmup_cycles: u32,
    /// Cycles averaged into one flow sample.
    pub measure_cycles: u32,
}

impl Default for MfdProtocol {
    fn default() -> Self {
        MfdProtocol {
            densities: (1..=9).map(|i| i as f64 / 10.0).collect(),
            reps: 50,
            warmup_cycles: 4,
            measure_cycles: 4,
        }
    }
}

impl MfdProtocol {
    pub fn validate(&self) -> Result<()> {
        if self.densities.is_empty() {
            return Err(Error::invalid("densities", "need at least one density"));
        }
        if !self.densities.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid("densities", "must be strictly increasing"));
        }
        if self.densities.iter().any(|&k| !(0.0..=1.0).contains(&k)) {
            return Err(Error::invalid("densities", "must lie in [0, 1]"));
        }
        if self.reps < 2 {
            return Err(Error::invalid("reps", "need at least 2 replications"));
        }
        if self.measure_cycles == 0 {
            return Err(Error::invalid("measure_cycles", "must be positive"));
        }
        Ok(())
    }
}

/// Mean and 90%-probability band of the flow at one density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MfdBand<S> {
    pub mean: S,
    pub p5: S,
    pub p95: S,
}

/// Empirical MFD of one policy on one network family.
#[derive(Debug, Clone)]
pub struct MfdEstimate<S: Scalar> {
    pub policy: String,
    pub lambda: f64,
    pub delta: f64,
    pub turn_prob: f64,
    pub densities: Vec<f64>,
    /// Replicate mean flows per density.
    pub samples: Vec<Vec<S>>,
    pub aggregates: Vec<MfdBand<S>>,
}

impl<S: Scalar> MfdEstimate<S> {
    pub fn mean_at(&self, idx: usize) -> S {
        self.aggregates[idx].mean
    }

    /// Peak mean flow over the density grid.
    pub fn peak(&self) -> S {
        self.aggregates
            .iter()
            .map(|b| b.mean)
            .fold(S::zero(), S::max)
    }
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile<S: Scalar>(sorted: &[S], q: f64) -> S {
    assert!(!sorted.is_empty());
    assert!((0.0..=1.0).contains(&q));
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let w = S::from_f64_lossy(h - h.floor());
    sorted[lo] + w * (sorted[hi] - sorted[lo])
}

fn aggregate<S: Scalar>(samples: &[S]) -> MfdBand<S> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mean =
        samples.iter().fold(S::zero(), |acc, &x| acc + x) / S::from_count(samples.len() as u64);
    MfdBand {
        mean,
        p5: quantile(&sorted, 0.05),
        p95: quantile(&sorted, 0.95),
    }
}

/// One replicate: build the network, draw a Bernoulli initial state, warm
/// up unmeasured, then average the per-step flow over the measuring
/// window. Returns (flow sample, realized density).
fn replicate<S: Scalar>(
    cfg: &NetworkConfig,
    policy: &Policy<S>,
    protocol: &MfdProtocol,
    k: f64,
    seed: u64,
) -> Result<(S, S)> {
    let mut net_cfg = cfg.clone();
    net_cfg.seed = derive_seed(seed, Stream::BlockLengths);
    let net = build_network(&net_cfg)?;
    let g = min_green(policy.kind(), cfg.mean_block_length, cfg.lambda)?;
    let cycle = 2 * g as usize;
    let mut state = init_bernoulli(&net, k, seed)?;
    let density = state.density::<S>(&net);
    run(
        &mut state,
        &net,
        policy,
        protocol.warmup_cycles as usize * cycle,
    )?;
    let trace = run(
        &mut state,
        &net,
        policy,
        protocol.measure_cycles as usize * cycle,
    )?;
    debug_assert_eq!(state.density::<S>(&net), density);
    Ok((trace.mean_flow(&net), density))
}

/// Estimate the MFD of `policy` on the network family `cfg` by seeded
/// replication. Replicates fan out across workers; seeds derive from the
/// (density, repetition) index so parallel and serial runs agree exactly.
pub fn estimate_mfd<S: Scalar>(
    cfg: &NetworkConfig,
    policy: &Policy<S>,
    protocol: &MfdProtocol,
    seed: u64,
) -> Result<MfdEstimate<S>> {
    cfg.validate()?;
    protocol.validate()?;
    let tasks: Vec<(usize, usize)> = (0..protocol.densities.len())
        .flat_map(|d| (0..protocol.reps).map(move |r| (d, r)))
        .collect();
    let flows: Result<Vec<S>> = tasks
        .par_iter()
        .map(|&(d, r)| {
            let rep_seed = derive_seed(seed, Stream::Replicate(d as u64, r as u64));
            replicate(cfg, policy, protocol, protocol.densities[d], rep_seed).map(|(flow, _)| flow)
        })
        .collect();
    let flows = flows?;
    let samples: Vec<Vec<S>> = flows
        .chunks(protocol.reps)
        .map(|chunk| chunk.to_vec())
        .collect();
    let aggregates = samples.iter().map(|s| aggregate(s)).collect();
    Ok(MfdEstimate {
        policy: policy.kind().label().to_string(),
        lambda: cfg.lambda,
        delta: cfg.delta,
        turn_prob: cfg.turn_prob,
        densities: protocol.densities.clone(),
        samples,
        aggregates,
    })
}

/// Wave speeds of the two extreme cuts bounding the MFD.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutEstimate<S> {
    /// Free-flow cut speed.
    pub u0: S,
    /// Congested cut speed.
    pub w0: S,
}

impl<S: Scalar> CutEstimate<S> {
    /// Sample the two cut lines `q = u0·k` and `q = w0·(1−k)` for overlay
    /// plotting.
    pub fn flow_lines(&self, densities: &[f64]) -> Vec<(f64, S, S)> {
        densities
            .iter()
            .map(|&k| {
                let ks = S::from_f64_lossy(k);
                (k, self.u0 * ks, self.w0 * (S::one() - ks))
            })
            .collect()
    }
}

/// Extreme cut speeds `u0 = w0 = 4λ / (δ² + 2λ + 1)`.
pub fn extreme_cuts<S: Scalar>(lambda: S, delta: S) -> Result<CutEstimate<S>> {
    let lambda_ok = lambda.is_finite() && lambda > S::zero();
    if !lambda_ok {
        return Err(Error::invalid("lambda", "must be positive and finite"));
    }
    if delta < S::zero() {
        return Err(Error::invalid("delta", "must be nonnegative"));
    }
    let four = S::from_f64_lossy(4.0);
    let two = S::from_f64_lossy(2.0);
    let speed = four * lambda / (delta * delta + two * lambda + S::one());
    Ok(CutEstimate {
        u0: speed,
        w0: speed,
    })
}

/// True iff the [p5, p95] bands of the two estimates intersect at every
/// density inside `range` (inclusive).
pub fn overlap_test<S: Scalar>(
    a: &MfdEstimate<S>,
    b: &MfdEstimate<S>,
    range: (f64, f64),
) -> Result<bool> {
    let in_range = |k: f64| k >= range.0 && k <= range.1;
    let ka: Vec<f64> = a
        .densities
        .iter()
        .copied()
        .filter(|&k| in_range(k))
        .collect();
    let kb: Vec<f64> = b
        .densities
        .iter()
        .copied()
        .filter(|&k| in_range(k))
        .collect();
    if ka != kb {
        return Err(Error::Mismatch(
            "estimates sample different density grids on the range".into(),
        ));
    }
    if ka.is_empty() {
        return Err(Error::Mismatch("no common densities in range".into()));
    }
    for (i, k) in a.densities.iter().enumerate() {
        if !in_range(*k) {
            continue;
        }
        let j = b.densities.iter().position(|x| x == k).unwrap();
        let (x, y) = (&a.aggregates[i], &b.aggregates[j]);
        if x.p5 > y.p95 || y.p5 > x.p95 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Outcome of a detaching probe.
#[derive(Debug, Clone)]
pub struct DetachReport<S> {
    /// No intersection changed phase during the final quarter.
    pub permanent_colors: bool,
    /// Fraction of streets green at every one of their intersections
    /// throughout the final quarter.
    pub green_street_fraction: f64,
    /// Mean network flow over the final quarter.
    pub mean_flow: S,
    /// Whether the flow exceeds the provided LQF baseline, if given.
    pub detaching: Option<bool>,
}

/// Run `policy` for `horizon` steps and classify the emergent signal
/// pattern. A street is a ring of blocks sharing an axis and a row or
/// column; it counts as green when every intersection along it gates its
/// axis green for the entire final quarter of the run.
pub fn detect_detaching<S: Scalar>(
    cfg: &NetworkConfig,
    policy: &Policy<S>,
    k: f64,
    horizon: usize,
    seed: u64,
    lqf_mean: Option<S>,
) -> Result<DetachReport<S>> {
    if !(0.0 < k && k < 1.0) {
        return Err(Error::invalid("k", "density must lie inside (0, 1)"));
    }
    if horizon < 8 {
        return Err(Error::invalid("horizon", "too short to classify"));
    }
    let net = build_network(cfg)?;
    let g = min_green(policy.kind(), cfg.mean_block_length, cfg.lambda)? as usize;
    let mut state = init_bernoulli(&net, k, seed)?;

    let tail_start = horizon - horizon / 4;
    let mut phase_changed = vec![false; net.n_intersections()];
    let mut tail_phases: Vec<Phase> = Vec::new();
    let mut moved_tail = 0usize;
    let mut tail_steps = 0usize;
    for t in 0..horizon {
        if t > 0 && t % g == 0 {
            decide_phases(&mut state, &net, policy, &[]);
        }
        if t == tail_start {
            tail_phases = state.phases().to_vec();
        }
        if t >= tail_start {
            for (i, (&now, &then)) in state.phases().iter().zip(&tail_phases).enumerate() {
                if now != then {
                    phase_changed[i] = true;
                }
            }
        }
        let m = step(&mut state, &net);
        if t >= tail_start {
            moved_tail += m.moved;
            tail_steps += 1;
        }
    }

    let permanent_colors = !phase_changed.iter().any(|&c| c);
    // streets: one per row and axis, one per column and axis
    let mut green_streets = 0usize;
    let total_streets = cfg.rows + cfg.cols;
    for r in 0..cfg.rows {
        let all_green = (0..cfg.cols).all(|c| {
            let node = r * cfg.cols + c;
            !phase_changed[node] && state.phases()[node].green_axis() == Axis::EastWest
        });
        if all_green {
            green_streets += 1;
        }
    }
    for c in 0..cfg.cols {
        let all_green = (0..cfg.rows).all(|r| {
            let node = r * cfg.cols + c;
            !phase_changed[node] && state.phases()[node].green_axis() == Axis::NorthSouth
        });
        if all_green {
            green_streets += 1;
        }
    }

    let mean_flow = S::from_count(moved_tail as u64)
        / (S::from_count(net.total_cells() as u64) * S::from_count(tail_steps.max(1) as u64));
    Ok(DetachReport {
        permanent_colors,
        green_street_fraction: green_streets as f64 / total_streets as f64,
        mean_flow,
        detaching: lqf_mean.map(|b| mean_flow > b),
    })
}

/// Skewness classification of an MFD.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Skew {
    Left,
    Symmetric,
    Right,
}

/// Locate the flow-maximizing density by parabolic refinement around the
/// grid argmax and classify against the symmetric band `0.5 ± 0.05`.
pub fn skewness<S: Scalar>(mfd: &MfdEstimate<S>) -> Result<Skew> {
    let ks = &mfd.densities;
    if ks.len() < 5 || ks[0] > 0.2 || ks[ks.len() - 1] < 0.8 {
        return Err(Error::Mismatch(
            "need at least 5 densities spanning (0.1, 0.9)".into(),
        ));
    }
    let means: Vec<f64> = mfd
        .aggregates
        .iter()
        .map(|b| b.mean.to_f64_lossy())
        .collect();
    let argmax = means
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let k_star = if argmax == 0 || argmax == ks.len() - 1 {
        ks[argmax]
    } else {
        parabolic_vertex(
            (ks[argmax - 1], means[argmax - 1]),
            (ks[argmax], means[argmax]),
            (ks[argmax + 1], means[argmax + 1]),
        )
    };
    let tau = 0.05;
    Ok(if k_star < 0.5 - tau {
        Skew::Left
    } else if k_star > 0.5 + tau {
        Skew::Right
    } else {
        Skew::Symmetric
    })
}

fn parabolic_vertex(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    let (x0, y0) = a;
    let (x1, y1) = b;
    let (x2, y2) = c;
    let d1 = (x1 - x0) * (y1 - y2);
    let d2 = (x1 - x2) * (y1 - y0);
    let denom = d1 - d2;
    if denom.abs() < 1e-30 {
        return x1;
    }
    x1 - 0.5 * ((x1 - x0) * d1 - (x1 - x2) * d2) / denom
}

/// Observation of a single intersection after settling `state` (exposed
/// for diagnostics and the CLI).
pub use crate::sim::observe as observe_intersection;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::Policy;

    fn cfg() -> NetworkConfig {
        NetworkConfig {
            rows: 3,
            cols: 3,
            mean_block_length: 8,
            lambda: 1.0,
            delta: 0.0,
            turn_prob: 0.75,
            seed: 1,
        }
    }

    fn small_protocol(densities: Vec<f64>, reps: usize) -> MfdProtocol {
        MfdProtocol {
            densities,
            reps,
            warmup_cycles: 2,
            measure_cycles: 2,
        }
    }

    #[test]
    fn cuts_formula() {
        let c = extreme_cuts::<f64>(1.0, 0.0).unwrap();
        assert_eq!(c.u0, 4.0 / 3.0);
        assert_eq!(c.w0, c.u0);
        assert_eq!(extreme_cuts::<f64>(2.0, 0.0).unwrap().u0, 8.0 / 5.0);
        let inhom = extreme_cuts::<f64>(1.0, 0.7).unwrap();
        assert!((inhom.u0 - 4.0 / 3.49).abs() < 1e-12);
        assert!(extreme_cuts::<f64>(0.0, 0.0).is_err());
    }

    #[test]
    fn cut_lines_have_expected_slopes() {
        let c = extreme_cuts::<f64>(1.0, 0.0).unwrap();
        let lines = c.flow_lines(&[0.0, 0.5, 1.0]);
        assert_eq!(lines[0], (0.0, 0.0, 4.0 / 3.0));
        assert_eq!(lines[2], (1.0, 4.0 / 3.0, 0.0));
    }

    #[test]
    fn quantile_interpolates() {
        let v = [1.0f64, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 5.0);
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 0.125), 1.5);
    }

    #[test]
    fn quantile_error_shrinks_with_sample_size() {
        // nested growing samples estimate the 5th percentile increasingly well
        use rand::Rng;
        let mut err_small = 0.0f64;
        let mut err_large = 0.0f64;
        for seed in 0..200u64 {
            let mut rng = crate::rng::stream_rng(seed, crate::rng::Stream::Init);
            let all: Vec<f64> = (0..200).map(|_| rng.random::<f64>()).collect();
            let mut small: Vec<f64> = all[..20].to_vec();
            let mut large = all.clone();
            small.sort_by(|a, b| a.partial_cmp(b).unwrap());
            large.sort_by(|a, b| a.partial_cmp(b).unwrap());
            err_small += (quantile(&small, 0.05) - 0.05).abs();
            err_large += (quantile(&large, 0.05) - 0.05).abs();
        }
        assert!(
            err_large < err_small,
            "expected error to shrink: {err_large} vs {err_small}"
        );
    }

    #[test]
    fn mfd_vanishes_at_jam() {
        let protocol = small_protocol(vec![0.05, 1.0 - 1e-9], 3);
        // k so close to 1 that rounding puts every cell occupied is not
        // guaranteed; use exact jam separately below
        let est = estimate_mfd(&cfg(), &Policy::<f64>::Lqf, &protocol, 3).unwrap();
        assert!(est.aggregates[0].mean < 0.06);
        for (band, &k) in est.aggregates.iter().zip(&protocol.densities) {
            assert!(band.p5 <= band.mean && band.mean <= band.p95, "k={k}");
        }
    }

    #[test]
    fn jammed_network_has_exactly_zero_flow() {
        let protocol = small_protocol(vec![1.0], 3);
        let est = estimate_mfd(&cfg(), &Policy::<f64>::Rnd, &protocol, 5).unwrap();
        assert_eq!(est.aggregates[0].mean, 0.0);
        assert_eq!(est.aggregates[0].p5, 0.0);
        assert_eq!(est.aggregates[0].p95, 0.0);
    }

    #[test]
    fn density_is_conserved_in_replicates() {
        let rep_seed = derive_seed(9, Stream::Replicate(0, 0));
        let (flow, density) = replicate(
            &cfg(),
            &Policy::<f64>::Rnd,
            &small_protocol(vec![0.4], 2),
            0.4,
            rep_seed,
        )
        .unwrap();
        assert!(flow > 0.0);
        assert!((density - 0.4).abs() < 0.1);
    }

    #[test]
    fn estimates_are_seed_reproducible() {
        let protocol = small_protocol(vec![0.3, 0.6], 4);
        let a = estimate_mfd(&cfg(), &Policy::<f64>::Lqf, &protocol, 17).unwrap();
        let b = estimate_mfd(&cfg(), &Policy::<f64>::Lqf, &protocol, 17).unwrap();
        assert_eq!(a.samples, b.samples);
    }

    #[test]
    fn overlap_detects_identical_and_disjoint_bands() {
        let protocol = small_protocol(vec![0.3, 0.6], 4);
        let a = estimate_mfd(&cfg(), &Policy::<f64>::Lqf, &protocol, 17).unwrap();
        assert!(overlap_test(&a, &a, (0.0, 1.0)).unwrap());
        let mut b = a.clone();
        for band in b.aggregates.iter_mut() {
            band.p5 += 10.0;
            band.p95 += 10.0;
        }
        assert!(!overlap_test(&a, &b, (0.0, 1.0)).unwrap());
        let mut c = a.clone();
        c.densities = vec![0.2, 0.6];
        assert!(overlap_test(&a, &c, (0.0, 1.0)).is_err());
    }

    #[test]
    fn skewness_classifies_synthetic_shapes() {
        let triangular = |peak: f64| {
            let densities: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
            let aggregates: Vec<MfdBand<f64>> = densities
                .iter()
                .map(|&k| {
                    let q = if k <= peak {
                        k / peak
                    } else {
                        (1.0 - k) / (1.0 - peak)
                    };
                    MfdBand {
                        mean: q,
                        p5: q - 0.01,
                        p95: q + 0.01,
                    }
                })
                .collect();
            MfdEstimate {
                policy: "lqf".into(),
                lambda: 1.0,
                delta: 0.0,
                turn_prob: 0.75,
                densities,
                samples: vec![],
                aggregates,
            }
        };
        assert_eq!(skewness(&triangular(0.5)).unwrap(), Skew::Symmetric);
        assert_eq!(skewness(&triangular(0.35)).unwrap(), Skew::Left);
        assert_eq!(skewness(&triangular(0.65)).unwrap(), Skew::Right);
        let mut narrow = triangular(0.5);
        narrow.densities = vec![0.4, 0.45, 0.5, 0.55, 0.6];
        narrow.aggregates.truncate(5);
        assert!(skewness(&narrow).is_err());
    }

    #[test]
    fn random_policy_keeps_switching() {
        let report = detect_detaching(&cfg(), &Policy::<f64>::Rnd, 0.5, 800, 3, None).unwrap();
        assert!(!report.permanent_colors);
        assert!(report.detaching.is_none());
    }
}
