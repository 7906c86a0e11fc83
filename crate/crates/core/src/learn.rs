//! Trainers for the neural signal policy: the policy-gradient trainer for
//! the continuing setting, two-example supervised training, and random
//! weight search, together with the advantage-flow reward.

use rand::Rng;

use crate::analytics::{estimate_mfd, MfdEstimate, MfdProtocol};
use crate::error::{Error, Result};
use crate::network::{build_network, Network, NetworkConfig};
use crate::policy::{extreme_states, Action, NeuralPolicy, Observation, Policy};
use crate::rng::{derive_seed, stream_rng, Stream};
use crate::scalar::Scalar;
use crate::sim::{decide_phases, init_bernoulli, observe, step};

/// Baseline flow lookup plus the decision interval it was measured under.
///
/// The lookup interpolates linearly between sampled densities and is
/// anchored at zero flow for the empty and jammed network, so it is
/// defined on all of [0, 1].
#[derive(Debug, Clone)]
pub struct RewardSpec<S: Scalar> {
    densities: Vec<f64>,
    flows: Vec<S>,
    /// Steps between decisions; the reward averages over this window.
    pub g: u32,
}

impl<S: Scalar> RewardSpec<S> {
    pub fn new(densities: Vec<f64>, flows: Vec<S>, g: u32) -> Result<Self> {
        if densities.len() != flows.len() || densities.is_empty() {
            return Err(Error::invalid(
                "baseline",
                "need matching density/flow samples",
            ));
        }
        if !densities.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid("baseline", "densities must be increasing"));
        }
        if g == 0 {
            return Err(Error::invalid("g", "decision interval must be positive"));
        }
        Ok(RewardSpec {
            densities,
            flows,
            g,
        })
    }

    /// Baseline from the mean curve of an estimated MFD.
    pub fn from_mfd(mfd: &MfdEstimate<S>, g: u32) -> Result<Self> {
        RewardSpec::new(
            mfd.densities.clone(),
            mfd.aggregates.iter().map(|b| b.mean).collect(),
            g,
        )
    }

    /// Constant baseline, mostly for tests.
    pub fn constant(flow: S, g: u32) -> Self {
        RewardSpec {
            densities: vec![0.0, 1.0],
            flows: vec![flow, flow],
            g,
        }
    }

    /// Piecewise-linear interpolation of the baseline flow at density `k`.
    pub fn baseline(&self, k: f64) -> S {
        let ks = &self.densities;
        // anchor the interpolation at zero flow on both ends
        let (mut k0, mut q0) = (0.0, S::zero());
        for (i, &ki) in ks.iter().enumerate() {
            if k <= ki {
                let span = ki - k0;
                if span <= 0.0 {
                    return self.flows[i];
                }
                let w = S::from_f64_lossy((k - k0) / span);
                return q0 + w * (self.flows[i] - q0);
            }
            k0 = ki;
            q0 = self.flows[i];
        }
        let span = 1.0 - k0;
        if span <= 0.0 {
            return q0;
        }
        let w = S::from_f64_lossy((k - k0) / span);
        q0 + w * (S::zero() - q0)
    }
}

/// Average advantage flow per lane over one decision window: crossings
/// per step per incoming lane minus the baseline flow at the prevailing
/// density.
pub fn advantage_reward<S: Scalar>(crossings: u64, k: f64, spec: &RewardSpec<S>) -> Result<S> {
    if !(0.0..=1.0).contains(&k) {
        return Err(Error::invalid("k", format!("density {k} outside [0, 1]")));
    }
    let lanes_per_intersection = S::from_f64_lossy(4.0);
    let window = S::from_count(spec.g as u64);
    Ok(S::from_count(crossings) / (window * lanes_per_intersection) - spec.baseline(k))
}

/// One iteration record of the policy-gradient trainer.
#[derive(Debug, Clone, Copy)]
pub struct TraceRecord<S> {
    pub iteration: usize,
    pub eta: S,
    pub grad_norm: S,
    pub pi_s1: S,
    pub pi_s2: S,
}

/// Trainer state threaded through the policy-gradient loop.
#[derive(Debug, Clone)]
pub struct TrainerState<S: Scalar> {
    pub policy: NeuralPolicy<S>,
    /// Running average-reward estimate.
    pub eta: S,
    pub alpha: S,
    pub beta: S,
    pub iteration: usize,
    pub traces: Vec<TraceRecord<S>>,
}

/// The three update lines of the continuing policy-gradient step:
/// `G ← R − η`, `η ← η + βG`, `θ ← θ + αG ∇_θ log π(A|S;θ)`.
/// Returns the differential return and the gradient norm.
pub fn reinforce_update<S: Scalar>(
    policy: &mut NeuralPolicy<S>,
    eta: &mut S,
    alpha: S,
    beta: S,
    obs: &Observation,
    action: Action,
    reward: S,
) -> (S, S) {
    let g = reward - *eta;
    *eta = *eta + beta * g;
    let grad = policy.grad_log_prob(obs, action);
    let norm = grad.iter().fold(S::zero(), |acc, &x| acc + x * x).sqrt();
    policy.add_scaled(&grad, alpha * g);
    (g, norm)
}

/// Configuration of a policy-gradient training run.
#[derive(Debug, Clone)]
pub struct ReinforceTdConfig {
    /// Constant network density during training.
    pub training_density: f64,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
    /// Intersection whose transitions drive the updates.
    pub monitored: usize,
}

impl ReinforceTdConfig {
    pub fn new(training_density: f64, iterations: usize, seed: u64) -> Self {
        ReinforceTdConfig {
            training_density,
            alpha: 0.2,
            beta: 0.05,
            iterations,
            seed,
            monitored: 0,
        }
    }
}

/// Train the policy on `net` at constant density with the one-step
/// differential return. A single intersection is monitored; its sampled
/// action drives the update while every other intersection acts with the
/// shared, evolving weights. Traces record η, the gradient norm and the
/// extreme-state probabilities each iteration.
pub fn reinforce_td<S: Scalar>(
    net: &Network,
    spec: &RewardSpec<S>,
    theta0: NeuralPolicy<S>,
    cfg: &ReinforceTdConfig,
) -> Result<TrainerState<S>> {
    if !(0.0..=1.0).contains(&cfg.training_density) {
        return Err(Error::invalid("training_density", "must lie in [0, 1]"));
    }
    if cfg.iterations == 0 {
        return Err(Error::invalid("iterations", "must be at least 1"));
    }
    if cfg.monitored >= net.n_intersections() {
        return Err(Error::invalid("monitored", "intersection id out of range"));
    }
    let (s1, s2) = extreme_states(net.config().mean_block_length);
    let g = spec.g;
    let k = cfg.training_density;
    let mut trainer = TrainerState {
        policy: theta0,
        eta: S::zero(),
        alpha: S::from_f64_lossy(cfg.alpha),
        beta: S::from_f64_lossy(cfg.beta),
        iteration: 0,
        traces: Vec::with_capacity(cfg.iterations),
    };
    let mut state = init_bernoulli(net, k, cfg.seed)?;
    let mut action_rng = stream_rng(cfg.seed, Stream::Trainer);
    let mut obs = observe(&state, net, cfg.monitored);

    for iteration in 0..cfg.iterations {
        let p_red = trainer.policy.forward(&obs).to_f64_lossy();
        let action = if action_rng.random::<f64>() < p_red {
            Action::NsRed
        } else {
            Action::NsGreen
        };
        let deployed = Policy::Neural(trainer.policy.clone());
        decide_phases(
            &mut state,
            net,
            &deployed,
            &[(cfg.monitored, action.phase())],
        );
        let mut crossings = 0u64;
        for _ in 0..g {
            let m = step(&mut state, net);
            crossings += m.crossings[cfg.monitored] as u64;
        }
        let reward = advantage_reward(crossings, k, spec)?;
        let next_obs = observe(&state, net, cfg.monitored);

        let (_, grad_norm) = reinforce_update(
            &mut trainer.policy,
            &mut trainer.eta,
            trainer.alpha,
            trainer.beta,
            &obs,
            action,
            reward,
        );
        trainer.iteration = iteration + 1;
        trainer.traces.push(TraceRecord {
            iteration: iteration + 1,
            eta: trainer.eta,
            grad_norm,
            pi_s1: trainer.policy.forward(&s1),
            pi_s2: trainer.policy.forward(&s2),
        });
        obs = next_obs;
    }
    Ok(trainer)
}

/// Configuration of the supervised trainer.
#[derive(Debug, Clone)]
pub struct SupervisedConfig {
    pub step_size: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for SupervisedConfig {
    fn default() -> Self {
        SupervisedConfig {
            step_size: 0.5,
            max_iterations: 100_000,
            tolerance: 0.01,
        }
    }
}

/// Binary cross-entropy of the policy on labeled observations, computed
/// from the logit for stability.
pub fn bce_loss<S: Scalar>(policy: &NeuralPolicy<S>, targets: &[(Observation, S)]) -> S {
    targets
        .iter()
        .map(|(obs, y)| {
            let y = *y;
            -(y * policy.log_prob(obs, Action::NsRed)
                + (S::one() - y) * policy.log_prob(obs, Action::NsGreen))
        })
        .fold(S::zero(), |a, b| a + b)
}

/// Full-batch gradient descent on the cross-entropy of the labeled
/// examples until every output is within `tolerance` of its target.
/// Returns the trained weights, or an error carrying the outputs
/// actually achieved when the iteration cap is hit.
pub fn train_supervised<S: Scalar>(
    theta0: NeuralPolicy<S>,
    targets: &[(Observation, S)],
    cfg: &SupervisedConfig,
) -> Result<NeuralPolicy<S>> {
    if targets.is_empty() {
        return Err(Error::invalid("targets", "need at least one example"));
    }
    for (i, (a, _)) in targets.iter().enumerate() {
        for (b, _) in targets.iter().skip(i + 1) {
            if a == b {
                return Err(Error::invalid("targets", "observations must be distinct"));
            }
        }
    }
    let tol = S::from_f64_lossy(cfg.tolerance);
    let step = S::from_f64_lossy(cfg.step_size);
    let mut policy = theta0;
    for _ in 0..=cfg.max_iterations {
        let outputs: Vec<S> = targets.iter().map(|(o, _)| policy.forward(o)).collect();
        let converged = outputs
            .iter()
            .zip(targets)
            .all(|(p, (_, y))| (*p - *y).abs() <= tol);
        if converged {
            return Ok(policy);
        }
        // d(loss)/d(logit) = p − y per example; the sigmoid cancels
        let mut grad = vec![S::zero(); policy.dim()];
        for ((obs, y), p) in targets.iter().zip(&outputs) {
            let coeff = *p - *y;
            let gl = policy.grad_logit(obs);
            for (gi, li) in grad.iter_mut().zip(&gl) {
                *gi = *gi + coeff * *li;
            }
        }
        policy.add_scaled(&grad, -step);
    }
    let achieved: Vec<f64> = targets
        .iter()
        .map(|(o, _)| policy.forward(o).to_f64_lossy())
        .collect();
    Err(Error::NoConvergence {
        iterations: cfg.max_iterations,
        achieved,
        targets: targets.iter().map(|(_, y)| y.to_f64_lossy()).collect(),
    })
}

/// Train toward the two extreme states: red with probability one when the
/// NS approaches are empty and the EW ones jammed, zero in the opposite
/// situation.
pub fn train_supervised_extremes<S: Scalar>(
    theta0: NeuralPolicy<S>,
    ell: usize,
    cfg: &SupervisedConfig,
) -> Result<NeuralPolicy<S>> {
    let (s1, s2) = extreme_states(ell);
    train_supervised(theta0, &[(s1, S::one()), (s2, S::zero())], cfg)
}

/// One random-search trial.
#[derive(Debug, Clone)]
pub struct RandomSearchTrial<S: Scalar> {
    pub index: usize,
    pub policy: NeuralPolicy<S>,
    pub mfd: MfdEstimate<S>,
    /// Smallest ratio of trial mean flow to the baseline mean over the grid.
    pub min_ratio: f64,
    pub competitive: bool,
}

/// Configuration of the random weight search.
#[derive(Debug, Clone)]
pub struct RandomSearchConfig {
    pub trials: usize,
    pub seed: u64,
    pub hidden: usize,
    /// A trial is competitive when its mean flow reaches this fraction of
    /// the baseline mean at every sampled density.
    pub competitive_ratio: f64,
}

impl RandomSearchConfig {
    pub fn new(trials: usize, seed: u64) -> Self {
        RandomSearchConfig {
            trials,
            seed,
            hidden: crate::policy::DEFAULT_HIDDEN,
            competitive_ratio: 0.9,
        }
    }
}

/// Draw standard-normal policies, deploy each to the whole network and
/// label it competitive if its mean MFD stays within the configured
/// fraction of the baseline at every density.
pub fn random_search<S: Scalar>(
    net_cfg: &NetworkConfig,
    protocol: &MfdProtocol,
    baseline: &MfdEstimate<S>,
    cfg: &RandomSearchConfig,
) -> Result<Vec<RandomSearchTrial<S>>> {
    if cfg.trials == 0 {
        return Err(Error::invalid("trials", "need at least one trial"));
    }
    if baseline.densities != protocol.densities {
        return Err(Error::Mismatch(
            "baseline was sampled on a different density grid".into(),
        ));
    }
    build_network(net_cfg)?; // surface config errors before the sweep
    let mut out = Vec::with_capacity(cfg.trials);
    for t in 0..cfg.trials {
        let trial_seed = derive_seed(cfg.seed, Stream::Trial(t as u64));
        let mut rng = stream_rng(trial_seed, Stream::Trainer);
        let policy = NeuralPolicy::<S>::random(cfg.hidden, &mut rng, 1.0);
        let mfd = estimate_mfd(
            net_cfg,
            &Policy::Neural(policy.clone()),
            protocol,
            trial_seed,
        )?;
        let min_ratio = mfd
            .aggregates
            .iter()
            .zip(&baseline.aggregates)
            .map(|(trial, base)| {
                let b = base.mean.to_f64_lossy();
                if b <= 0.0 {
                    1.0
                } else {
                    trial.mean.to_f64_lossy() / b
                }
            })
            .fold(f64::INFINITY, f64::min);
        out.push(RandomSearchTrial {
            index: t,
            competitive: min_ratio >= cfg.competitive_ratio,
            policy,
            mfd,
            min_ratio,
        });
    }
    Ok(out)
}
