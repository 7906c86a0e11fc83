//! Signal control policies: greedy baselines, the random control and the
//! neural policy network, together with green-time calibration.

use std::io::{BufRead, Write};

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sim::Phase;

/// Vehicle counts on the 8 approaches of an intersection, ordered
/// `[NS-in₁, NS-in₂, EW-in₁, EW-in₂, NS-out₁, NS-out₂, EW-out₁, EW-out₂]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Observation(pub [u32; 8]);

impl Observation {
    pub fn ns_incoming(&self) -> u32 {
        self.0[0] + self.0[1]
    }

    pub fn ew_incoming(&self) -> u32 {
        self.0[2] + self.0[3]
    }
}

/// Policy discriminant, also used for green-time calibration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    Lqf,
    Sqf,
    Rnd,
    Neural,
}

impl PolicyKind {
    pub fn label(self) -> &'static str {
        match self {
            PolicyKind::Lqf => "lqf",
            PolicyKind::Sqf => "sqf",
            PolicyKind::Rnd => "rnd",
            PolicyKind::Neural => "neural",
        }
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lqf" => Ok(PolicyKind::Lqf),
            "sqf" => Ok(PolicyKind::Sqf),
            "rnd" | "random" => Ok(PolicyKind::Rnd),
            "neural" => Ok(PolicyKind::Neural),
            other => Err(Error::invalid(
                "policy",
                format!("unknown policy `{other}`"),
            )),
        }
    }
}

/// A signal control policy shared by every intersection.
#[derive(Debug, Clone)]
pub enum Policy<S: Scalar> {
    /// Longest queue first: green to the axis with more incoming vehicles.
    Lqf,
    /// Shortest queue first: green to the axis with fewer incoming vehicles.
    Sqf,
    /// Random control: a fair coin per decision.
    Rnd,
    /// Neural policy over the 8-component observation.
    Neural(NeuralPolicy<S>),
}

impl<S: Scalar> Policy<S> {
    pub fn kind(&self) -> PolicyKind {
        match self {
            Policy::Lqf => PolicyKind::Lqf,
            Policy::Sqf => PolicyKind::Sqf,
            Policy::Rnd => PolicyKind::Rnd,
            Policy::Neural(_) => PolicyKind::Neural,
        }
    }

    /// Phase for the next green interval. Ties keep the current phase;
    /// the random and neural policies draw from `rng`.
    pub fn decide(&self, obs: &Observation, current: Phase, rng: &mut impl Rng) -> Phase {
        let ns = obs.ns_incoming();
        let ew = obs.ew_incoming();
        match self {
            Policy::Lqf => match ns.cmp(&ew) {
                std::cmp::Ordering::Greater => Phase::NsGreen,
                std::cmp::Ordering::Less => Phase::EwGreen,
                std::cmp::Ordering::Equal => current,
            },
            Policy::Sqf => match ns.cmp(&ew) {
                std::cmp::Ordering::Less => Phase::NsGreen,
                std::cmp::Ordering::Greater => Phase::EwGreen,
                std::cmp::Ordering::Equal => current,
            },
            Policy::Rnd => {
                if rng.random::<f64>() < 0.5 {
                    Phase::NsGreen
                } else {
                    Phase::EwGreen
                }
            }
            Policy::Neural(net) => {
                let p_red = net.forward(obs).to_f64_lossy();
                if rng.random::<f64>() < p_red {
                    Phase::EwGreen
                } else {
                    Phase::NsGreen
                }
            }
        }
    }
}

/// Minimum green time calibrated so a target λ is realized: `2ℓ/λ` for
/// queue-driven policies (LQF, SQF, neural), `ℓ/λ` for the random control
/// whose green runs form a geometric process. Rounded to the nearest
/// step, at least 1.
pub fn min_green(kind: PolicyKind, ell: usize, lambda: f64) -> Result<u32> {
    let lambda_ok = lambda.is_finite() && lambda > 0.0;
    if !lambda_ok {
        return Err(Error::invalid("lambda", "must be positive and finite"));
    }
    let raw = match kind {
        PolicyKind::Rnd => ell as f64 / lambda,
        _ => 2.0 * ell as f64 / lambda,
    };
    Ok((raw.round() as u32).max(1))
}

/// The binary action of the neural head.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    /// Red to the NS approaches (green to EW).
    NsRed,
    /// Green to the NS approaches.
    NsGreen,
}

impl Action {
    pub fn phase(self) -> Phase {
        match self {
            Action::NsRed => Phase::EwGreen,
            Action::NsGreen => Phase::NsGreen,
        }
    }
}

/// Observation size of the policy network.
pub const OBS_DIM: usize = 8;

/// Default hidden width.
pub const DEFAULT_HIDDEN: usize = 16;

/// Multilayer perceptron with a scalar head: linear 8→H, tanh, linear
/// H→H, summation over components, sigmoid. The output is the
/// probability of turning the NS approaches red.
///
/// Weights are a flat vector laid out as
/// `w1[h][8] | b1[h] | w2[h][h] | b2[h]`, rows major.
#[derive(Debug, Clone)]
pub struct NeuralPolicy<S: Scalar> {
    hidden: usize,
    theta: Vec<S>,
}

/// Weight count for a hidden width.
pub fn theta_dim(hidden: usize) -> usize {
    hidden * OBS_DIM + hidden + hidden * hidden + hidden
}

impl<S: Scalar> NeuralPolicy<S> {
    pub fn new(hidden: usize, theta: Vec<S>) -> Result<Self> {
        let expected = theta_dim(hidden);
        if theta.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: theta.len(),
            });
        }
        if theta.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("theta", "weights must be finite"));
        }
        Ok(NeuralPolicy { hidden, theta })
    }

    pub fn zeros(hidden: usize) -> Self {
        NeuralPolicy {
            hidden,
            theta: vec![S::zero(); theta_dim(hidden)],
        }
    }

    /// Weights drawn i.i.d. from `scale · N(0, 1)`.
    pub fn random(hidden: usize, rng: &mut impl Rng, scale: f64) -> Self {
        use rand_distr::{Distribution, StandardNormal};
        let theta = (0..theta_dim(hidden))
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                S::from_f64_lossy(z * scale)
            })
            .collect();
        NeuralPolicy { hidden, theta }
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn theta(&self) -> &[S] {
        &self.theta
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn add_scaled(&mut self, direction: &[S], factor: S) {
        debug_assert_eq!(direction.len(), self.theta.len());
        for (w, d) in self.theta.iter_mut().zip(direction) {
            *w = *w + factor * *d;
        }
    }

    fn slices(&self) -> (&[S], &[S], &[S], &[S]) {
        let h = self.hidden;
        let (w1, rest) = self.theta.split_at(h * OBS_DIM);
        let (b1, rest) = rest.split_at(h);
        let (w2, b2) = rest.split_at(h * h);
        (w1, b1, w2, b2)
    }

    /// Pre-sigmoid logit and the intermediate activations.
    fn forward_parts(&self, obs: &Observation) -> (S, Vec<S>) {
        let h = self.hidden;
        let (w1, b1, w2, b2) = self.slices();
        let x: Vec<S> = obs.0.iter().map(|&c| S::from_count(c as u64)).collect();
        let mut a1 = vec![S::zero(); h];
        for i in 0..h {
            let mut z = b1[i];
            for (k, xk) in x.iter().enumerate() {
                z = z + w1[i * OBS_DIM + k] * *xk;
            }
            a1[i] = z.tanh();
        }
        let mut logit = S::zero();
        for j in 0..h {
            let mut z = b2[j];
            for (i, a) in a1.iter().enumerate() {
                z = z + w2[j * h + i] * *a;
            }
            logit = logit + z;
        }
        (logit, a1)
    }

    /// Probability of NS-red, strictly inside (0, 1).
    pub fn forward(&self, obs: &Observation) -> S {
        let (logit, _) = self.forward_parts(obs);
        sigmoid(logit)
            .max(S::min_positive_value())
            .min(S::one() - S::epsilon())
    }

    /// Pre-sigmoid logit of NS-red.
    pub fn logit(&self, obs: &Observation) -> S {
        self.forward_parts(obs).0
    }

    /// `log π(action | obs; θ)`, computed from the logit so it stays
    /// accurate deep into sigmoid saturation.
    pub fn log_prob(&self, obs: &Observation, action: Action) -> S {
        let (logit, _) = self.forward_parts(obs);
        match action {
            Action::NsRed => -softplus(-logit),
            Action::NsGreen => -softplus(logit),
        }
    }

    /// Gradient of the pre-sigmoid logit with respect to every weight.
    pub fn grad_logit(&self, obs: &Observation) -> Vec<S> {
        let h = self.hidden;
        let (_, _, w2, _) = self.slices();
        let (_, a1) = self.forward_parts(obs);
        let x: Vec<S> = obs.0.iter().map(|&c| S::from_count(c as u64)).collect();
        let mut grad = vec![S::zero(); self.theta.len()];
        let (gw1, rest) = grad.split_at_mut(h * OBS_DIM);
        let (gb1, rest) = rest.split_at_mut(h);
        let (gw2, gb2) = rest.split_at_mut(h * h);
        // the summation head makes every z2 component contribute equally
        for j in 0..h {
            gb2[j] = S::one();
            for i in 0..h {
                gw2[j * h + i] = a1[i];
            }
        }
        for i in 0..h {
            let mut upstream = S::zero();
            for j in 0..h {
                upstream = upstream + w2[j * h + i];
            }
            let dz1 = upstream * (S::one() - a1[i] * a1[i]);
            gb1[i] = dz1;
            for (k, xk) in x.iter().enumerate() {
                gw1[i * OBS_DIM + k] = dz1 * *xk;
            }
        }
        grad
    }

    /// Analytic `∇_θ log π(action | obs; θ)` for the binary head.
    pub fn grad_log_prob(&self, obs: &Observation, action: Action) -> Vec<S> {
        let (logit, _) = self.forward_parts(obs);
        let p = sigmoid(logit);
        let coeff = match action {
            Action::NsRed => S::one() - p,
            Action::NsGreen => -p,
        };
        let mut grad = self.grad_logit(obs);
        for g in grad.iter_mut() {
            *g = *g * coeff;
        }
        grad
    }

    /// Serialize to the flat text format.
    pub fn save(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "# mfdlab policy weights")?;
        writeln!(w, "# layout w1[h][8] b1[h] w2[h][h] b2[h]")?;
        writeln!(w, "version=1")?;
        writeln!(w, "hidden={}", self.hidden)?;
        writeln!(w, "dim={}", self.theta.len())?;
        for v in &self.theta {
            writeln!(w, "{}", v.to_f64_lossy())?;
        }
        Ok(())
    }

    /// Parse the flat text format written by [`NeuralPolicy::save`].
    pub fn load(r: &mut impl BufRead) -> Result<Self> {
        let mut hidden: Option<usize> = None;
        let mut version: Option<u32> = None;
        let mut values: Vec<S> = Vec::new();
        for line in r.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some((key, value)) = line.split_once('=') {
                match key {
                    "hidden" => {
                        hidden = Some(
                            value
                                .parse()
                                .map_err(|_| Error::Parse(format!("bad hidden width `{value}`")))?,
                        )
                    }
                    "version" => {
                        version = Some(
                            value
                                .parse()
                                .map_err(|_| Error::Parse(format!("bad version `{value}`")))?,
                        )
                    }
                    "dim" => {}
                    other => return Err(Error::Parse(format!("unknown key `{other}`"))),
                }
                continue;
            }
            let v: f64 = line
                .parse()
                .map_err(|_| Error::Parse(format!("bad weight `{line}`")))?;
            values.push(S::from_f64_lossy(v));
        }
        match version {
            Some(1) => {}
            Some(v) => return Err(Error::Parse(format!("unsupported layout version {v}"))),
            None => return Err(Error::Parse("missing version header".into())),
        }
        let hidden = hidden.ok_or_else(|| Error::Parse("missing hidden width".into()))?;
        NeuralPolicy::new(hidden, values)
    }
}

fn sigmoid<S: Scalar>(z: S) -> S {
    if z >= S::zero() {
        S::one() / (S::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (S::one() + e)
    }
}

fn softplus<S: Scalar>(z: S) -> S {
    if z > S::zero() {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// The two extreme observations used as supervised training data: `s1`
/// has empty NS approaches and jammed EW approaches, `s2` the opposite;
/// all outgoing approaches are empty in both.
pub fn extreme_states(ell: usize) -> (Observation, Observation) {
    let l = ell as u32;
    (
        Observation([0, 0, l, l, 0, 0, 0, 0]),
        Observation([l, l, 0, 0, 0, 0, 0, 0]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn obs(v: [u32; 8]) -> Observation {
        Observation(v)
    }

    #[test]
    fn green_time_calibration() {
        assert_eq!(min_green(PolicyKind::Lqf, 10, 1.0).unwrap(), 20);
        assert_eq!(min_green(PolicyKind::Rnd, 10, 1.0).unwrap(), 10);
        assert_eq!(min_green(PolicyKind::Lqf, 10, 0.5).unwrap(), 40);
        assert_eq!(min_green(PolicyKind::Sqf, 10, 1.0).unwrap(), 20);
        assert_eq!(min_green(PolicyKind::Neural, 10, 1.0).unwrap(), 20);
        assert_eq!(min_green(PolicyKind::Rnd, 6, 8.0).unwrap(), 1);
        assert!(min_green(PolicyKind::Lqf, 10, 0.0).is_err());
    }

    #[test]
    fn greedy_decisions() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let o = obs([3, 2, 2, 1, 0, 0, 0, 0]); // ns=5, ew=3
        assert_eq!(
            Policy::<f64>::Lqf.decide(&o, Phase::EwGreen, &mut rng),
            Phase::NsGreen
        );
        assert_eq!(
            Policy::<f64>::Sqf.decide(&o, Phase::NsGreen, &mut rng),
            Phase::EwGreen
        );
        let tie = obs([1, 2, 2, 1, 0, 0, 0, 0]);
        assert_eq!(
            Policy::<f64>::Lqf.decide(&tie, Phase::EwGreen, &mut rng),
            Phase::EwGreen
        );
        assert_eq!(
            Policy::<f64>::Sqf.decide(&tie, Phase::NsGreen, &mut rng),
            Phase::NsGreen
        );
    }

    #[test]
    fn random_control_is_a_fair_coin() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let o = obs([9, 9, 0, 0, 1, 2, 3, 4]);
        let n = 20_000;
        let ns = (0..n)
            .filter(|_| Policy::<f64>::Rnd.decide(&o, Phase::NsGreen, &mut rng) == Phase::NsGreen)
            .count();
        let share = ns as f64 / n as f64;
        assert!((share - 0.5).abs() < 0.02, "share {share}");
    }

    #[test]
    fn zero_weights_output_half() {
        let nn = NeuralPolicy::<f64>::zeros(16);
        assert_eq!(nn.forward(&obs([5, 3, 2, 8, 1, 1, 0, 4])), 0.5);
    }

    #[test]
    fn empty_observation_is_finite() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let nn = NeuralPolicy::<f64>::random(16, &mut rng, 1.0);
            let p = nn.forward(&obs([0; 8]));
            assert!(p.is_finite() && p > 0.0 && p < 1.0);
        }
    }

    #[test]
    fn zero_theta_gradient_hits_only_the_head_bias() {
        let nn = NeuralPolicy::<f64>::zeros(4);
        let g = nn.grad_log_prob(&obs([1, 2, 3, 4, 0, 0, 0, 0]), Action::NsRed);
        let logit_grad = nn.grad_logit(&obs([1, 2, 3, 4, 0, 0, 0, 0]));
        for (gi, li) in g.iter().zip(&logit_grad) {
            assert!((gi - 0.5 * li).abs() < 1e-15);
        }
        // only the second-layer biases are live at θ = 0
        let h = 4;
        let b2_start = h * OBS_DIM + h + h * h;
        for (i, gi) in g.iter().enumerate() {
            if i >= b2_start {
                assert_eq!(*gi, 0.5);
            } else {
                assert_eq!(*gi, 0.0);
            }
        }
    }

    #[test]
    fn score_function_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let nn = NeuralPolicy::<f64>::random(8, &mut rng, 0.5);
            let o = obs([
                rng.random_range(0..12),
                rng.random_range(0..12),
                rng.random_range(0..12),
                rng.random_range(0..12),
                rng.random_range(0..12),
                rng.random_range(0..12),
                rng.random_range(0..12),
                rng.random_range(0..12),
            ]);
            let p = nn.forward(&o);
            let g_red = nn.grad_log_prob(&o, Action::NsRed);
            let g_green = nn.grad_log_prob(&o, Action::NsGreen);
            for (r, g) in g_red.iter().zip(&g_green) {
                let expectation = p * r + (1.0 - p) * g;
                assert!(expectation.abs() < 1e-10, "score identity violated");
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let eps = 1e-5;
        for trial in 0..10 {
            let nn = NeuralPolicy::<f64>::random(6, &mut rng, 0.3);
            let o = obs([
                rng.random_range(0..8),
                rng.random_range(0..8),
                rng.random_range(0..8),
                rng.random_range(0..8),
                rng.random_range(0..8),
                rng.random_range(0..8),
                rng.random_range(0..8),
                rng.random_range(0..8),
            ]);
            let action = if trial % 2 == 0 {
                Action::NsRed
            } else {
                Action::NsGreen
            };
            let analytic = nn.grad_log_prob(&o, action);
            let log_pi = |theta: Vec<f64>| {
                let n = NeuralPolicy::new(6, theta).unwrap();
                n.log_prob(&o, action)
            };
            let mut diff_sq = 0.0;
            let mut norm_sq = 0.0;
            for idx in 0..nn.dim() {
                let mut plus = nn.theta().to_vec();
                plus[idx] += eps;
                let mut minus = nn.theta().to_vec();
                minus[idx] -= eps;
                let numeric = (log_pi(plus) - log_pi(minus)) / (2.0 * eps);
                diff_sq += (numeric - analytic[idx]).powi(2);
                norm_sq += numeric.powi(2).max(analytic[idx].powi(2));
            }
            let rel = diff_sq.sqrt() / norm_sq.sqrt().max(1e-8);
            assert!(rel < 1e-5, "trial {trial}: relative gradient error {rel}");
        }
    }

    #[test]
    fn log_prob_agrees_with_forward_and_survives_saturation() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let nn = NeuralPolicy::<f64>::random(8, &mut rng, 0.2);
            let o = obs([3, 1, 4, 1, 5, 0, 2, 6]);
            let p = nn.forward(&o);
            assert!((nn.log_prob(&o, Action::NsRed) - p.ln()).abs() < 1e-10);
            assert!((nn.log_prob(&o, Action::NsGreen) - (1.0 - p).ln()).abs() < 1e-10);
        }
        // deep saturation: the logit path keeps full precision
        let mut theta = vec![0.0; theta_dim(4)];
        let b2_start = 4 * OBS_DIM + 4 + 16;
        for w in theta.iter_mut().skip(b2_start) {
            *w = 25.0;
        }
        let nn = NeuralPolicy::<f64>::new(4, theta).unwrap();
        let o = obs([0; 8]);
        assert!((nn.log_prob(&o, Action::NsGreen) + 100.0).abs() < 1e-9);
        assert!(nn.log_prob(&o, Action::NsRed).abs() < 1e-9);
    }

    #[test]
    fn weights_round_trip_through_text() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let nn = NeuralPolicy::<f64>::random(16, &mut rng, 1.0);
        let mut buf = Vec::new();
        nn.save(&mut buf).unwrap();
        let back = NeuralPolicy::<f64>::load(&mut buf.as_slice()).unwrap();
        assert_eq!(back.hidden(), 16);
        assert_eq!(back.theta(), nn.theta());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        assert!(NeuralPolicy::<f64>::new(16, vec![0.0; 10]).is_err());
        assert!(NeuralPolicy::<f64>::new(16, vec![0.0; theta_dim(16)]).is_ok());
    }

    #[test]
    fn single_precision_policy_tracks_double() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let nn64 = NeuralPolicy::<f64>::random(8, &mut rng, 0.2);
        let theta32: Vec<f32> = nn64.theta().iter().map(|&w| w as f32).collect();
        let nn32 = NeuralPolicy::<f32>::new(8, theta32).unwrap();
        let o = obs([2, 0, 7, 3, 1, 1, 4, 0]);
        assert!((nn32.forward(&o) as f64 - nn64.forward(&o)).abs() < 1e-5);
        let g64 = nn64.grad_log_prob(&o, Action::NsRed);
        let g32 = nn32.grad_log_prob(&o, Action::NsRed);
        for (a, b) in g32.iter().zip(&g64) {
            assert!((*a as f64 - b).abs() < 1e-4);
        }
    }

    #[test]
    fn extreme_states_are_axis_swaps() {
        let (s1, s2) = extreme_states(10);
        assert_eq!(s1, obs([0, 0, 10, 10, 0, 0, 0, 0]));
        assert_eq!(s2, obs([10, 10, 0, 0, 0, 0, 0, 0]));
        let swapped: [u32; 8] = [
            s1.0[2], s1.0[3], s1.0[0], s1.0[1], s1.0[6], s1.0[7], s1.0[4], s1.0[5],
        ];
        assert_eq!(Observation(swapped), s2);
    }

    proptest! {
        #[test]
        fn lqf_and_sqf_disagree_off_ties(v in prop::collection::vec(0u32..40, 8)) {
            let o = obs([v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7]]);
            prop_assume!(o.ns_incoming() != o.ew_incoming());
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let lqf = Policy::<f64>::Lqf.decide(&o, Phase::NsGreen, &mut rng);
            let sqf = Policy::<f64>::Sqf.decide(&o, Phase::NsGreen, &mut rng);
            prop_assert_ne!(lqf, sqf);
        }

        #[test]
        fn lqf_is_invariant_to_monotone_transforms(v in prop::collection::vec(0u32..40, 8)) {
            let o = obs([v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7]]);
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let direct = Policy::<f64>::Lqf.decide(&o, Phase::EwGreen, &mut rng);
            // any strictly monotone transform of both axis sums preserves order
            let f = |x: u32| (x as f64 + 1.0).ln() * 3.0 + 2.0;
            let (ns, ew) = (f(o.ns_incoming()), f(o.ew_incoming()));
            let transformed = match ns.partial_cmp(&ew).unwrap() {
                std::cmp::Ordering::Greater => Phase::NsGreen,
                std::cmp::Ordering::Less => Phase::EwGreen,
                std::cmp::Ordering::Equal => Phase::EwGreen,
            };
            prop_assert_eq!(direct, transformed);
        }

        #[test]
        fn neural_output_stays_in_open_unit_interval(
            seed in 0u64..1000,
            scale in 0.0f64..30.0,
            v in prop::collection::vec(0u32..200, 8),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let nn = NeuralPolicy::<f64>::random(16, &mut rng, scale);
            let p = nn.forward(&obs([v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7]]));
            prop_assert!(p > 0.0 && p < 1.0);
        }
    }
}
