//! Finite-horizon tabular Markov decision processes.
//!
//! A process runs for `horizon` decision steps `t = 0, .., horizon-1`. Step
//! `t` observes state `S_t`, picks action `A_t`, and moves to `S_{t+1}`, so a
//! rollout visits the state slots `S_0, .., S_horizon`. Utility is collected
//! at arrival states: a utility function `u` scores a rollout as
//! `u(S_1) + .. + u(S_horizon)`. The initial state is given, not chosen, and
//! never counts toward utility.

use ndarray::{Array1, Array2, Array3, ArrayView1};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{MegError, Result};

/// Tolerance for probability rows summing to one.
const PROB_TOL: f64 = 1e-9;

/// A finite-horizon MDP with tabular transitions and a state utility.
///
/// `transition[[s, a, s2]]` is the probability of arriving in `s2` after
/// taking action `a` in state `s`; the same kernel is used at every step.
/// `state_utility[s]` is the utility collected each time `s` is *entered*
/// (arrival states `S_1..S_horizon`; the initial state is never scored).
#[derive(Debug, Clone)]
pub struct TabularMdp {
    pub horizon: usize,
    pub n_states: usize,
    pub n_actions: usize,
    pub initial_dist: Array1<f64>,
    pub transition: Array3<f64>,
    pub state_utility: Array1<f64>,
}

impl TabularMdp {
    pub fn new(
        horizon: usize,
        initial_dist: Array1<f64>,
        transition: Array3<f64>,
        state_utility: Array1<f64>,
    ) -> Result<Self> {
        let n_states = initial_dist.len();
        let n_actions = transition.shape()[1];
        let mdp = TabularMdp {
            horizon,
            n_states,
            n_actions,
            initial_dist,
            transition,
            state_utility,
        };
        mdp.validate()?;
        Ok(mdp)
    }

    /// Check every structural invariant; returns the first violation found.
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(MegError::Validation("horizon must be at least 1".into()));
        }
        if self.n_states == 0 || self.n_actions == 0 {
            return Err(MegError::Validation(
                "state and action spaces must be non-empty".into(),
            ));
        }
        if self.initial_dist.len() != self.n_states {
            return Err(MegError::Dimension(format!(
                "initial distribution has {} entries, expected {}",
                self.initial_dist.len(),
                self.n_states
            )));
        }
        if self.transition.shape() != [self.n_states, self.n_actions, self.n_states] {
            return Err(MegError::Dimension(format!(
                "transition tensor has shape {:?}, expected [{}, {}, {}]",
                self.transition.shape(),
                self.n_states,
                self.n_actions,
                self.n_states
            )));
        }
        if self.state_utility.len() != self.n_states {
            return Err(MegError::Dimension(format!(
                "state utility has {} entries, expected {}",
                self.state_utility.len(),
                self.n_states
            )));
        }
        check_distribution(self.initial_dist.view(), "initial distribution")?;
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let row = self.transition.slice(ndarray::s![s, a, ..]);
                check_distribution(row, &format!("transition row (s={s}, a={a})"))?;
            }
        }
        if self.state_utility.iter().any(|u| !u.is_finite()) {
            return Err(MegError::Validation("state utility must be finite".into()));
        }
        Ok(())
    }

    /// The per-step utility schedule induced by `state_utility`.
    pub fn step_utilities(&self) -> StepUtilities {
        StepUtilities::stationary(self.state_utility.clone(), self.horizon)
    }

    /// Transition kernel flattened to `(n_states * n_actions, n_states)`,
    /// convenient for pushing occupancies forward with a matrix product.
    pub fn transition_matrix(&self) -> Array2<f64> {
        self.transition
            .clone()
            .into_shape((self.n_states * self.n_actions, self.n_states))
            .expect("standard-layout reshape")
    }

    /// State and state-action visit distributions under `policy`.
    pub fn occupancy(&self, policy: &Policy) -> Result<Occupancy> {
        self.check_policy_dims(policy)?;
        let tm = self.transition_matrix();
        let mut state = Vec::with_capacity(self.horizon + 1);
        let mut state_action = Vec::with_capacity(self.horizon);
        state.push(self.initial_dist.clone());
        for t in 0..self.horizon {
            let rho_s: &Array1<f64> = &state[t];
            let mut rho_sa = policy.steps[t].clone();
            for (s, mut row) in rho_sa.outer_iter_mut().enumerate() {
                row *= rho_s[s];
            }
            let flat = rho_sa
                .clone()
                .into_shape(self.n_states * self.n_actions)
                .expect("standard-layout reshape");
            state.push(flat.dot(&tm));
            state_action.push(rho_sa);
        }
        Ok(Occupancy {
            state,
            state_action,
        })
    }

    /// Expected total utility of `policy` under a per-step utility schedule:
    /// the sum over steps of the expected utility of that step's arrival
    /// state.
    pub fn expected_utility(&self, policy: &Policy, utilities: &StepUtilities) -> Result<f64> {
        self.check_utilities_dims(utilities)?;
        let occ = self.occupancy(policy)?;
        Ok(occ.expected_utility(utilities))
    }

    /// Causal entropy of `policy`: the expected sum over steps of
    /// `-ln pi_t(A_t | S_t)`, in nats. Equals `horizon * ln(n_actions)` for
    /// the uniform policy and 0 for deterministic ones.
    pub fn causal_entropy(&self, policy: &Policy) -> Result<f64> {
        let occ = self.occupancy(policy)?;
        let mut h = 0.0;
        for t in 0..self.horizon {
            for (rho, p) in occ.state_action[t].iter().zip(policy.steps[t].iter()) {
                if *rho > 0.0 {
                    h -= rho * p.ln();
                }
            }
        }
        Ok(h)
    }

    /// Backward induction for the ordinary (hard) optimal policy.
    ///
    /// Returns the deterministic optimal policy and the per-step Q tables.
    /// `q[t][[s, a]]` is the best achievable expected utility-to-go from
    /// taking `a` in `s` at step `t` (counting arrival states `t+1..horizon`).
    /// Ties pick the lowest action index.
    pub fn value_iteration(&self, utilities: &StepUtilities) -> Result<(Policy, Vec<Array2<f64>>)> {
        self.check_utilities_dims(utilities)?;
        let mut q: Vec<Array2<f64>> = Vec::with_capacity(self.horizon);
        // Optimal next-step value per state, filled backwards.
        let mut v_next = Array1::<f64>::zeros(self.n_states);
        for t in (0..self.horizon).rev() {
            let gain = utilities.at(t) + &v_next;
            let mut q_t = Array2::<f64>::zeros((self.n_states, self.n_actions));
            for s in 0..self.n_states {
                for a in 0..self.n_actions {
                    q_t[[s, a]] = self.transition.slice(ndarray::s![s, a, ..]).dot(&gain);
                }
            }
            for s in 0..self.n_states {
                v_next[s] = q_t
                    .row(s)
                    .iter()
                    .cloned()
                    .fold(f64::NEG_INFINITY, f64::max);
            }
            q.push(q_t);
        }
        q.reverse();
        let steps = q
            .iter()
            .map(|q_t| {
                let mut step = Array2::<f64>::zeros((self.n_states, self.n_actions));
                for s in 0..self.n_states {
                    let row = q_t.row(s);
                    let mut best = 0;
                    for a in 1..self.n_actions {
                        if row[a] > row[best] {
                            best = a;
                        }
                    }
                    step[[s, best]] = 1.0;
                }
                step
            })
            .collect();
        Ok((Policy { steps }, q))
    }

    /// Least and greatest expected utility achievable by any policy.
    pub fn attainable_range(&self, utilities: &StepUtilities) -> Result<UtilityRange> {
        let (_, q_max) = self.value_iteration(utilities)?;
        let (_, q_neg) = self.value_iteration(&utilities.scaled_shifted(-1.0, 0.0))?;
        let best = |q0: &Array2<f64>| {
            let mut v = 0.0;
            for s in 0..self.n_states {
                let m = q0.row(s).iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                v += self.initial_dist[s] * m;
            }
            v
        };
        Ok(UtilityRange {
            min: -best(&q_neg[0]),
            max: best(&q_max[0]),
        })
    }

    /// Roll out `count` episodes of `policy` with a seeded generator.
    pub fn sample_trajectories(
        &self,
        policy: &Policy,
        count: usize,
        seed: u64,
    ) -> Result<TrajectorySet> {
        self.check_policy_dims(policy)?;
        if count == 0 {
            return Err(MegError::InvalidArgument(
                "trajectory count must be at least 1".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut episodes = Vec::with_capacity(count);
        for _ in 0..count {
            let mut s = sample_index(&mut rng, self.initial_dist.view());
            let mut steps = Vec::with_capacity(self.horizon);
            for t in 0..self.horizon {
                let a = sample_index(&mut rng, policy.steps[t].row(s));
                steps.push((s, a));
                s = sample_index(&mut rng, self.transition.slice(ndarray::s![s, a, ..]));
            }
            episodes.push(steps);
        }
        Ok(TrajectorySet {
            horizon: self.horizon,
            episodes,
            weights: None,
        })
    }

    pub(crate) fn check_policy_dims(&self, policy: &Policy) -> Result<()> {
        if policy.steps.len() != self.horizon {
            return Err(MegError::Dimension(format!(
                "policy has {} steps, expected {}",
                policy.steps.len(),
                self.horizon
            )));
        }
        for (t, step) in policy.steps.iter().enumerate() {
            if step.shape() != [self.n_states, self.n_actions] {
                return Err(MegError::Dimension(format!(
                    "policy step {t} has shape {:?}, expected [{}, {}]",
                    step.shape(),
                    self.n_states,
                    self.n_actions
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn check_utilities_dims(&self, utilities: &StepUtilities) -> Result<()> {
        if utilities.horizon() != self.horizon {
            return Err(MegError::Dimension(format!(
                "utility schedule has {} steps, expected {}",
                utilities.horizon(),
                self.horizon
            )));
        }
        for t in 0..self.horizon {
            if utilities.at(t).len() != self.n_states {
                return Err(MegError::Dimension(format!(
                    "utility at step {t} has {} entries, expected {}",
                    utilities.at(t).len(),
                    self.n_states
                )));
            }
        }
        Ok(())
    }
}

/// A per-step utility schedule: the utility vector applied to the arrival
/// state of each decision step. Most models are stationary (one vector reused
/// at every step); per-step schedules support goals about specific times.
#[derive(Debug, Clone)]
pub enum StepUtilities {
    Stationary { values: Array1<f64>, horizon: usize },
    PerStep(Vec<Array1<f64>>),
}

impl StepUtilities {
    pub fn stationary(values: Array1<f64>, horizon: usize) -> Self {
        StepUtilities::Stationary { values, horizon }
    }

    pub fn per_step(values: Vec<Array1<f64>>) -> Self {
        StepUtilities::PerStep(values)
    }

    pub fn horizon(&self) -> usize {
        match self {
            StepUtilities::Stationary { horizon, .. } => *horizon,
            StepUtilities::PerStep(v) => v.len(),
        }
    }

    /// Utility vector applied to the arrival state of step `t`.
    pub fn at(&self, t: usize) -> &Array1<f64> {
        match self {
            StepUtilities::Stationary { values, horizon } => {
                assert!(t < *horizon, "step {t} out of horizon {horizon}");
                values
            }
            StepUtilities::PerStep(v) => &v[t],
        }
    }

    /// The schedule `a * u + b`, used for scale/translation checks.
    pub fn scaled_shifted(&self, a: f64, b: f64) -> StepUtilities {
        match self {
            StepUtilities::Stationary { values, horizon } => StepUtilities::Stationary {
                values: values.mapv(|u| a * u + b),
                horizon: *horizon,
            },
            StepUtilities::PerStep(v) => {
                StepUtilities::PerStep(v.iter().map(|u| u.mapv(|x| a * x + b)).collect())
            }
        }
    }
}

/// Least and greatest expected utility over all policies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityRange {
    pub min: f64,
    pub max: f64,
}

/// A (possibly non-stationary) stochastic policy: one `(n_states, n_actions)`
/// row-stochastic matrix per decision step.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub steps: Vec<Array2<f64>>,
}

impl Policy {
    /// Uniform policy over `n_actions` at every state and step.
    pub fn uniform(horizon: usize, n_states: usize, n_actions: usize) -> Self {
        let step = Array2::from_elem((n_states, n_actions), 1.0 / n_actions as f64);
        Policy {
            steps: vec![step; horizon],
        }
    }

    /// Repeat one decision rule at every step.
    pub fn stationary(step: Array2<f64>, horizon: usize) -> Self {
        Policy {
            steps: vec![step; horizon],
        }
    }

    /// Deterministic policy from an action table `actions[t][s]`.
    pub fn deterministic(actions: &[Vec<usize>], n_actions: usize) -> Self {
        let steps = actions
            .iter()
            .map(|per_state| {
                let mut step = Array2::<f64>::zeros((per_state.len(), n_actions));
                for (s, &a) in per_state.iter().enumerate() {
                    step[[s, a]] = 1.0;
                }
                step
            })
            .collect();
        Policy { steps }
    }

    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    /// Check each row is a probability distribution.
    pub fn validate(&self) -> Result<()> {
        for (t, step) in self.steps.iter().enumerate() {
            for (s, row) in step.outer_iter().enumerate() {
                check_distribution(row, &format!("policy row (t={t}, s={s})"))?;
            }
        }
        Ok(())
    }

    /// True when every row puts all mass on one action.
    pub fn is_deterministic(&self) -> bool {
        self.steps
            .iter()
            .all(|step| step.iter().all(|p| *p == 0.0 || *p == 1.0))
    }

    /// Mix a deterministic policy with uniform exploration: with probability
    /// `1 - epsilon` take the greedy action, otherwise an action uniformly at
    /// random (the greedy action included).
    pub fn epsilon_greedy(&self, epsilon: f64) -> Result<Policy> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(MegError::InvalidArgument(format!(
                "epsilon must lie in [0, 1], got {epsilon}"
            )));
        }
        if !self.is_deterministic() {
            return Err(MegError::InvalidArgument(
                "epsilon-greedy needs a deterministic base policy".into(),
            ));
        }
        let steps = self
            .steps
            .iter()
            .map(|step| {
                let n_actions = step.shape()[1];
                let explore = epsilon / n_actions as f64;
                step.mapv(|p| if p == 1.0 { 1.0 - epsilon + explore } else { explore })
            })
            .collect();
        Ok(Policy { steps })
    }
}

/// State and state-action visit distributions of a policy.
///
/// `state[t]` is the distribution of `S_t` for slots `t = 0..=horizon`;
/// `state_action[t]` the joint distribution of `(S_t, A_t)` for steps
/// `t = 0..horizon`.
#[derive(Debug, Clone)]
pub struct Occupancy {
    pub state: Vec<Array1<f64>>,
    pub state_action: Vec<Array2<f64>>,
}

impl Occupancy {
    pub fn horizon(&self) -> usize {
        self.state_action.len()
    }

    /// Expected total utility: arrival slots `1..=horizon` scored by the
    /// schedule of the step that entered them.
    pub fn expected_utility(&self, utilities: &StepUtilities) -> f64 {
        (0..self.horizon())
            .map(|t| self.state[t + 1].dot(utilities.at(t)))
            .sum()
    }
}

/// A batch of sampled episodes. Each episode records the `(state, action)`
/// pair of every decision step, in order; arrival at the final slot is not
/// stored. Optional per-episode weights support importance-weighted batches;
/// unweighted sets count each episode equally.
#[derive(Debug, Clone)]
pub struct TrajectorySet {
    pub horizon: usize,
    pub episodes: Vec<Vec<(usize, usize)>>,
    pub weights: Option<Vec<f64>>,
}

impl TrajectorySet {
    pub fn validate(&self, n_states: usize, n_actions: usize) -> Result<()> {
        if self.episodes.is_empty() {
            return Err(MegError::Validation(
                "trajectory set holds no episodes".into(),
            ));
        }
        for (i, ep) in self.episodes.iter().enumerate() {
            if ep.len() != self.horizon {
                return Err(MegError::Validation(format!(
                    "episode {i} has {} steps, expected {}",
                    ep.len(),
                    self.horizon
                )));
            }
            for (t, &(s, a)) in ep.iter().enumerate() {
                if s >= n_states || a >= n_actions {
                    return Err(MegError::Validation(format!(
                        "episode {i} step {t} references (s={s}, a={a}) outside \
                         a {n_states}-state, {n_actions}-action process"
                    )));
                }
            }
        }
        if let Some(w) = &self.weights {
            if w.len() != self.episodes.len() {
                return Err(MegError::Validation(format!(
                    "{} weights for {} episodes",
                    w.len(),
                    self.episodes.len()
                )));
            }
            if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(MegError::Validation(
                    "episode weights must be finite and non-negative".into(),
                ));
            }
            if w.iter().sum::<f64>() <= 0.0 {
                return Err(MegError::Validation(
                    "episode weights must not all be zero".into(),
                ));
            }
        }
        Ok(())
    }

    /// Normalized per-step visit weights: `weights[t][[s, a]]` is the
    /// (weighted) fraction of episodes whose step `t` was `(s, a)`. Each
    /// step's matrix sums to one.
    pub fn visit_weights(&self, n_states: usize, n_actions: usize) -> Vec<Array2<f64>> {
        let total: f64 = match &self.weights {
            Some(w) => w.iter().sum(),
            None => self.episodes.len() as f64,
        };
        let mut out = vec![Array2::<f64>::zeros((n_states, n_actions)); self.horizon];
        for (i, ep) in self.episodes.iter().enumerate() {
            let w = self.weights.as_ref().map_or(1.0, |w| w[i]) / total;
            for (t, &(s, a)) in ep.iter().enumerate() {
                out[t][[s, a]] += w;
            }
        }
        out
    }
}

/// Draw an index from a probability vector.
pub(crate) fn sample_index<R: Rng>(rng: &mut R, probs: ArrayView1<f64>) -> usize {
    let u: f64 = rng.gen();
    let mut cum = 0.0;
    for (i, p) in probs.iter().enumerate() {
        cum += p;
        if u < cum {
            return i;
        }
    }
    probs.len() - 1
}

fn check_distribution(row: ArrayView1<f64>, what: &str) -> Result<()> {
    if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(MegError::Validation(format!(
            "{what} has negative or non-finite entries"
        )));
    }
    let sum: f64 = row.sum();
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(MegError::Validation(format!(
            "{what} sums to {sum}, expected 1"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, arr3};

    /// Two-state chain: action 0 stays, action 1 flips. Start in state 0.
    fn flip_chain(horizon: usize) -> TabularMdp {
        let transition = arr3(&[
            [[1.0, 0.0], [0.0, 1.0]],
            [[0.0, 1.0], [1.0, 0.0]],
        ]);
        TabularMdp::new(horizon, arr1(&[1.0, 0.0]), transition, arr1(&[0.0, 1.0])).unwrap()
    }

    #[test]
    fn validate_rejects_bad_rows() {
        let mut mdp = flip_chain(2);
        mdp.transition[[0, 0, 0]] = 0.5;
        assert!(matches!(mdp.validate(), Err(MegError::Validation(_))));

        let mut mdp = flip_chain(2);
        mdp.initial_dist[0] = -1.0;
        mdp.initial_dist[1] = 2.0;
        assert!(mdp.validate().is_err());

        let mdp = TabularMdp::new(
            0,
            arr1(&[1.0]),
            arr3(&[[[1.0]]]),
            arr1(&[0.0]),
        );
        assert!(mdp.is_err());
    }

    #[test]
    fn occupancy_rows_normalized_and_deterministic_flip() {
        let mdp = flip_chain(3);
        // Always flip: visits 0, 1, 0, 1.
        let policy = Policy::deterministic(&[vec![1, 1], vec![1, 1], vec![1, 1]], 2);
        let occ = mdp.occupancy(&policy).unwrap();
        for rho in &occ.state {
            assert!((rho.sum() - 1.0).abs() < 1e-12);
        }
        for rho in &occ.state_action {
            assert!((rho.sum() - 1.0).abs() < 1e-12);
        }
        assert_eq!(occ.state[1][1], 1.0);
        assert_eq!(occ.state[2][0], 1.0);
        assert_eq!(occ.state[3][1], 1.0);
        // Arrival slots 1, 2, 3 carry utility 1, 0, 1.
        let eu = mdp
            .expected_utility(&policy, &mdp.step_utilities())
            .unwrap();
        assert!((eu - 2.0).abs() < 1e-12);
    }

    #[test]
    fn constant_utility_scores_horizon_times_constant() {
        // Every state worth c = 0.7: any policy collects horizon * c because
        // only arrival states are scored, never the initial one.
        let mut mdp = flip_chain(5);
        mdp.state_utility = arr1(&[0.7, 0.7]);
        let utilities = mdp.step_utilities();
        for policy in [
            Policy::uniform(5, 2, 2),
            Policy::deterministic(&vec![vec![0, 0]; 5], 2),
        ] {
            let eu = mdp.expected_utility(&policy, &utilities).unwrap();
            assert!((eu - 5.0 * 0.7).abs() < 1e-12, "got {eu}");
        }
    }

    #[test]
    fn causal_entropy_uniform_and_deterministic() {
        let mdp = flip_chain(4);
        let uniform = Policy::uniform(4, 2, 2);
        let h = mdp.causal_entropy(&uniform).unwrap();
        assert!((h - 4.0 * 2.0_f64.ln()).abs() < 1e-12);

        let det = Policy::deterministic(&vec![vec![1, 0]; 4], 2);
        assert_eq!(mdp.causal_entropy(&det).unwrap(), 0.0);

        // A 0.8/0.2 row in every visited state: entropy is
        // horizon * (0.8 ln(1/0.8) + 0.2 ln(1/0.2)).
        let step = ndarray::arr2(&[[0.8, 0.2], [0.8, 0.2]]);
        let policy = Policy::stationary(step, 4);
        let h = mdp.causal_entropy(&policy).unwrap();
        let per_step = -(0.8 * 0.8_f64.ln() + 0.2 * 0.2_f64.ln());
        assert!((h - 4.0 * per_step).abs() < 1e-12);
        assert!((per_step - 0.5004).abs() < 5e-5);
    }

    #[test]
    fn value_iteration_two_step_lookahead() {
        // Three states in a line; action 0 steps left, action 1 steps right
        // (clipped). Only the right end pays. With horizon 2 from the middle,
        // the optimal policy goes right twice and collects 1 + 1.
        let transition = arr3(&[
            [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]],
            [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        ]);
        let mdp = TabularMdp::new(
            2,
            arr1(&[0.0, 1.0, 0.0]),
            transition,
            arr1(&[0.0, 0.0, 1.0]),
        )
        .unwrap();
        let (policy, q) = mdp.value_iteration(&mdp.step_utilities()).unwrap();
        assert_eq!(policy.steps[0][[1, 1]], 1.0);
        assert_eq!(policy.steps[1][[2, 1]], 1.0);
        assert!((q[0][[1, 1]] - 2.0).abs() < 1e-12);
        assert!((q[0][[1, 0]] - 0.0).abs() < 1e-12);
        // Ties break toward the lowest action index.
        let flat = TabularMdp::new(
            1,
            arr1(&[1.0, 0.0]),
            arr3(&[
                [[1.0, 0.0], [1.0, 0.0]],
                [[0.0, 1.0], [0.0, 1.0]],
            ]),
            arr1(&[0.0, 0.0]),
        )
        .unwrap();
        let (p, _) = flat.value_iteration(&flat.step_utilities()).unwrap();
        assert_eq!(p.steps[0][[0, 0]], 1.0);
    }

    #[test]
    fn attainable_range_brackets_policies() {
        let mdp = flip_chain(3);
        let range = mdp.attainable_range(&mdp.step_utilities()).unwrap();
        // Best: flip then stay in state 1 (arrivals 1, 1, 1). Worst: stay
        // forever (arrivals 0, 0, 0).
        assert!((range.max - 3.0).abs() < 1e-12);
        assert!((range.min - 0.0).abs() < 1e-12);
        // Scaling and shifting the utility maps the range affinely.
        let range2 = mdp
            .attainable_range(&mdp.step_utilities().scaled_shifted(2.0, -1.0))
            .unwrap();
        assert!((range2.max - (2.0 * 3.0 - 3.0)).abs() < 1e-12);
        assert!((range2.min - (2.0 * 0.0 - 3.0)).abs() < 1e-12);
    }

    #[test]
    fn epsilon_greedy_rows() {
        let det = Policy::deterministic(&[vec![2, 0]], 4);
        let eg = det.epsilon_greedy(0.5).unwrap();
        assert!((eg.steps[0][[0, 2]] - 0.625).abs() < 1e-12);
        assert!((eg.steps[0][[0, 0]] - 0.125).abs() < 1e-12);
        assert!((eg.steps[0][[1, 0]] - 0.625).abs() < 1e-12);
        eg.validate().unwrap();
        // epsilon = 1 is uniform; epsilon = 0 is the base policy.
        let u = det.epsilon_greedy(1.0).unwrap();
        assert!((u.steps[0][[0, 0]] - 0.25).abs() < 1e-12);
        assert_eq!(det.epsilon_greedy(0.0).unwrap(), det);
        assert!(det.epsilon_greedy(1.5).is_err());
        let stochastic = Policy::uniform(1, 2, 4);
        assert!(stochastic.epsilon_greedy(0.5).is_err());
    }

    #[test]
    fn sampled_visit_weights_match_occupancy() {
        let mdp = flip_chain(3);
        let step = ndarray::arr2(&[[0.3, 0.7], [0.6, 0.4]]);
        let policy = Policy::stationary(step, 3);
        let trajs = mdp.sample_trajectories(&policy, 20_000, 7).unwrap();
        trajs.validate(2, 2).unwrap();
        assert_eq!(trajs.episodes.len(), 20_000);
        let weights = trajs.visit_weights(2, 2);
        let occ = mdp.occupancy(&policy).unwrap();
        for t in 0..3 {
            assert!((weights[t].sum() - 1.0).abs() < 1e-12);
            for s in 0..2 {
                for a in 0..2 {
                    let diff = (weights[t][[s, a]] - occ.state_action[t][[s, a]]).abs();
                    assert!(diff < 0.02, "t={t} s={s} a={a} diff={diff}");
                }
            }
        }
        // Same seed, same draw.
        let again = mdp.sample_trajectories(&policy, 100, 7).unwrap();
        let first = mdp.sample_trajectories(&policy, 100, 7).unwrap();
        assert_eq!(again.episodes, first.episodes);
    }

    #[test]
    fn weighted_visit_counts() {
        let set = TrajectorySet {
            horizon: 1,
            episodes: vec![vec![(0, 0)], vec![(0, 1)]],
            weights: Some(vec![3.0, 1.0]),
        };
        set.validate(1, 2).unwrap();
        let w = set.visit_weights(1, 2);
        assert!((w[0][[0, 0]] - 0.75).abs() < 1e-12);
        assert!((w[0][[0, 1]] - 0.25).abs() < 1e-12);
        let bad = TrajectorySet {
            horizon: 2,
            episodes: vec![vec![(0, 0)]],
            weights: None,
        };
        assert!(bad.validate(1, 2).is_err());
    }
}
