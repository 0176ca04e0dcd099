//! Maximum entropy goal-directedness (MEG) solvers.
//!
//! MEG asks how well a policy is predicted by the best maximum-entropy
//! (Boltzmann-rational) model of pursuing a utility function, relative to
//! uniformly random behaviour. The score is the optimal predictive accuracy
//!
//! ```text
//! E_pi[ sum_t ( ln model_t(A_t|S_t) - ln(1/n_actions) ) ]
//! ```
//!
//! maximized over the model family, in nats. It is zero for the uniform
//! policy, at most `horizon * ln(n_actions)`, and invariant to positive
//! scaling and translation of the utility.
//!
//! Known-utility MEG maximizes over the inverse rationality `β` alone (a
//! concave 1-D problem with exact gradient `E_pi[U] - E_soft[U]`).
//! Unknown-utility MEG ascends jointly over `(θ, β)` for a parametric
//! utility class, with random restarts; it is a lower bound on the exact
//! maximum over the class.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{MegError, Result};
use crate::mdp::{Policy, StepUtilities, TabularMdp, TrajectorySet};
use crate::soft_q::{log_soft_policy, soft_policy, Beta};
use crate::utility::ParametricUtility;

/// Solver hyperparameters. Defaults work for every built-in environment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MegOptions {
    /// Initial gradient-ascent step size; adapted during the run.
    pub learning_rate: f64,
    pub max_iterations: usize,
    /// Stop when |dPA/dβ| falls below this.
    pub beta_grad_tol: f64,
    /// Stop when the max-norm of the θ gradient falls below this.
    pub theta_grad_tol: f64,
    /// β is confined to [-beta_cap, beta_cap]; hitting the cap triggers an
    /// extra evaluation at the exact β = ±∞ limit.
    pub beta_cap: f64,
    /// Random initializations for the joint (θ, β) ascent.
    pub restarts: usize,
    pub seed: u64,
    /// Scale the θ direction by β (the exact gradient of predictive
    /// accuracy). When false, uses the plain occupancy-difference direction,
    /// which is an ascent direction only for β > 0.
    pub use_exact_theta_gradient: bool,
}

impl Default for MegOptions {
    fn default() -> Self {
        MegOptions {
            learning_rate: 0.1,
            max_iterations: 5000,
            beta_grad_tol: 1e-6,
            theta_grad_tol: 1e-5,
            beta_cap: 1e3,
            restarts: 5,
            seed: 0,
            use_exact_theta_gradient: true,
        }
    }
}

impl MegOptions {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0
            || self.beta_grad_tol <= 0.0
            || self.theta_grad_tol <= 0.0
            || self.beta_cap <= 0.0
        {
            return Err(MegError::InvalidArgument(
                "learning rate, tolerances and beta cap must be positive".into(),
            ));
        }
        if self.max_iterations == 0 || self.restarts == 0 {
            return Err(MegError::InvalidArgument(
                "max_iterations and restarts must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of a MEG computation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MegResult {
    /// The goal-directedness score, in nats; non-negative.
    pub meg: f64,
    pub beta_star: Beta,
    /// Best utility parameters found (unknown-utility solvers only).
    pub theta_star: Option<Vec<f64>>,
    /// Equals `meg`: the uniform baseline is part of the objective.
    pub predictive_accuracy: f64,
    /// Expected utility of the analysed policy under the (found) utility.
    pub expected_utility_policy: f64,
    /// Expected utility of the best-response soft policy at `beta_star`.
    pub expected_utility_soft: f64,
    /// `meg` times the sign of the policy's utility advantage over uniform;
    /// filled by the known-utility solvers.
    pub signed_meg: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub restarts_used: usize,
}

/// Predictive accuracy of one fixed model policy (no maximization).
#[derive(Debug, Clone, Copy)]
pub struct PredictiveAccuracy {
    /// `E_pi[sum_t ln model] + horizon * ln(n_actions)`; `-inf` when the
    /// model has a support gap.
    pub value: f64,
    /// True when the model puts probability 0 somewhere the policy has
    /// positive visit probability.
    pub support_gap: bool,
}

/// What we know about the analysed behaviour: per-step visit weights over
/// `(state, action)`, either exact occupancies of a policy or normalized
/// empirical counts from trajectories. `slot_weights[t]` is the implied
/// distribution of the arrival state of step `t` (counts pushed through the
/// known kernel), used for expected-utility terms.
struct Evidence {
    n_actions: usize,
    step_weights: Vec<Array2<f64>>,
    slot_weights: Vec<Array1<f64>>,
}

impl Evidence {
    fn from_policy(mdp: &TabularMdp, pi: &Policy) -> Result<Evidence> {
        mdp.check_policy_dims(pi)?;
        pi.validate()?;
        let occ = mdp.occupancy(pi)?;
        Ok(Evidence {
            n_actions: mdp.n_actions,
            slot_weights: occ.state[1..].to_vec(),
            step_weights: occ.state_action,
        })
    }

    fn from_trajectories(mdp: &TabularMdp, set: &TrajectorySet) -> Result<Evidence> {
        if set.horizon != mdp.horizon {
            return Err(MegError::Dimension(format!(
                "trajectories have horizon {}, process has {}",
                set.horizon, mdp.horizon
            )));
        }
        set.validate(mdp.n_states, mdp.n_actions)?;
        let step_weights = set.visit_weights(mdp.n_states, mdp.n_actions);
        let tm = mdp.transition_matrix();
        let slot_weights = step_weights
            .iter()
            .map(|w| {
                w.clone()
                    .into_shape(mdp.n_states * mdp.n_actions)
                    .expect("standard-layout reshape")
                    .dot(&tm)
            })
            .collect();
        Ok(Evidence {
            n_actions: mdp.n_actions,
            step_weights,
            slot_weights,
        })
    }

    fn horizon(&self) -> usize {
        self.step_weights.len()
    }

    /// Expected (or estimated) total utility of the analysed behaviour.
    fn expected_utility(&self, utilities: &StepUtilities) -> f64 {
        (0..self.horizon())
            .map(|t| self.slot_weights[t].dot(utilities.at(t)))
            .sum()
    }

    /// Predictive accuracy of a model given by its log-probabilities.
    fn accuracy_against(&self, log_model: &[Array2<f64>]) -> PredictiveAccuracy {
        let mut value = self.horizon() as f64 * (self.n_actions as f64).ln();
        for (w_t, lp_t) in self.step_weights.iter().zip(log_model) {
            for (w, lp) in w_t.iter().zip(lp_t.iter()) {
                if *w > 0.0 {
                    if *lp == f64::NEG_INFINITY {
                        return PredictiveAccuracy {
                            value: f64::NEG_INFINITY,
                            support_gap: true,
                        };
                    }
                    value += w * lp;
                }
            }
        }
        PredictiveAccuracy {
            value,
            support_gap: false,
        }
    }
}

/// Predictive accuracy of an explicit model policy against `pi`, relative to
/// the uniform baseline: `E_pi[sum_t (ln model - ln(1/n_actions))]`.
pub fn predictive_accuracy(
    mdp: &TabularMdp,
    pi: &Policy,
    model: &Policy,
) -> Result<PredictiveAccuracy> {
    mdp.check_policy_dims(model)?;
    model.validate()?;
    let evidence = Evidence::from_policy(mdp, pi)?;
    let log_model: Vec<Array2<f64>> = model
        .steps
        .iter()
        .map(|step| step.mapv(f64::ln))
        .collect();
    Ok(evidence.accuracy_against(&log_model))
}

/// The predictive accuracy of the soft policy at `beta` for `utilities`.
fn soft_accuracy(
    mdp: &TabularMdp,
    utilities: &StepUtilities,
    evidence: &Evidence,
    beta: Beta,
) -> Result<f64> {
    let lp = log_soft_policy(mdp, utilities, beta)?;
    Ok(evidence.accuracy_against(&lp).value)
}

/// Expected utility of the soft policy at `beta` (exact).
fn soft_expected_utility(
    mdp: &TabularMdp,
    utilities: &StepUtilities,
    beta: Beta,
) -> Result<f64> {
    let policy = soft_policy(mdp, utilities, beta)?;
    mdp.expected_utility(&policy, utilities)
}

/// One finished ascent run.
struct RunOutcome {
    accuracy: f64,
    beta: Beta,
    theta: Vec<f64>,
    iterations: usize,
    converged: bool,
}

/// Maximize predictive accuracy over β for a fixed utility schedule.
///
/// The objective is concave in β, so adaptive gradient ascent from 0 finds
/// the global maximum over `[-beta_cap, beta_cap]`. When the maximizer sits
/// at the cap the exact `β = ±∞` limit is also evaluated and the better of
/// the two reported (`converged` stays false: the iteration itself only
/// approaches that value).
fn ascend_beta(
    mdp: &TabularMdp,
    utilities: &StepUtilities,
    evidence: &Evidence,
    opts: &MegOptions,
) -> Result<RunOutcome> {
    let eu_pi = evidence.expected_utility(utilities);
    let mut beta = 0.0_f64;
    let mut alpha = opts.learning_rate;
    let mut accuracy = soft_accuracy(mdp, utilities, evidence, Beta::Finite(beta))?;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        iterations += 1;
        let grad = eu_pi - soft_expected_utility(mdp, utilities, Beta::Finite(beta))?;
        if grad.abs() <= opts.beta_grad_tol {
            converged = true;
            break;
        }
        let candidate = (beta + alpha * grad).clamp(-opts.beta_cap, opts.beta_cap);
        if candidate == beta {
            // Pinned against the cap (or a vanishing step): no further
            // progress is possible.
            break;
        }
        let cand_accuracy = soft_accuracy(mdp, utilities, evidence, Beta::Finite(candidate))?;
        if cand_accuracy >= accuracy {
            beta = candidate;
            accuracy = cand_accuracy;
            alpha = (alpha * 2.0).min(1e8);
        } else {
            alpha /= 2.0;
            if alpha < 1e-18 {
                break;
            }
        }
    }
    let mut outcome = RunOutcome {
        accuracy,
        beta: Beta::Finite(beta),
        theta: Vec::new(),
        iterations,
        converged,
    };
    // The family closes with the two hard limits; either may beat every
    // finite β (deterministic policies), so check both. A support gap makes
    // the limit accuracy -inf and the finite candidate survives.
    for limit in [Beta::PosInf, Beta::NegInf] {
        let limit_accuracy = soft_accuracy(mdp, utilities, evidence, limit)?;
        if limit_accuracy > outcome.accuracy {
            outcome.accuracy = limit_accuracy;
            outcome.beta = limit;
        }
    }
    Ok(outcome)
}

/// A differentiable utility class for the joint (θ, β) ascent.
trait UtilityClass {
    fn n_params(&self) -> usize;
    /// Starting parameters for restart `r` (deterministic given `seed`).
    fn init_theta(&self, seed: u64) -> Vec<f64>;
    fn step_utilities(&self, theta: &[f64], horizon: usize) -> StepUtilities;
    /// Accumulate `factor * sum_t sum_s slot_weights[t][s] * grad_theta u_t(s)`.
    fn add_slot_weighted_grads(
        &self,
        theta: &[f64],
        slot_weights: &[Array1<f64>],
        factor: f64,
        out: &mut [f64],
    );
}

/// Stationary parametric utility: the same `U^θ` scores every arrival slot.
struct StationaryClass<'a> {
    proto: &'a ParametricUtility,
}

impl UtilityClass for StationaryClass<'_> {
    fn n_params(&self) -> usize {
        self.proto.n_params()
    }

    fn init_theta(&self, seed: u64) -> Vec<f64> {
        ParametricUtility::init(
            self.proto.kind,
            self.proto.feature_map.clone(),
            self.proto.hidden,
            seed,
            0.1,
        )
        .theta
    }

    fn step_utilities(&self, theta: &[f64], horizon: usize) -> StepUtilities {
        let mut model = self.proto.clone();
        model.theta = theta.to_vec();
        StepUtilities::stationary(model.evaluate_all(), horizon)
    }

    fn add_slot_weighted_grads(
        &self,
        theta: &[f64],
        slot_weights: &[Array1<f64>],
        factor: f64,
        out: &mut [f64],
    ) {
        let mut model = self.proto.clone();
        model.theta = theta.to_vec();
        let mut total = Array1::<f64>::zeros(model.n_states());
        for w in slot_weights {
            total += w;
        }
        model.add_weighted_grads(total.view(), factor, out);
    }
}

/// Free tabular utility on chosen arrival steps, zero elsewhere: realizes
/// goals about *which states are visited at particular times*. One parameter
/// block per targeted step.
struct TargetStepsClass {
    n_states: usize,
    /// Targeted arrival steps (0-based), sorted.
    steps: Vec<usize>,
}

impl UtilityClass for TargetStepsClass {
    fn n_params(&self) -> usize {
        self.steps.len() * self.n_states
    }

    fn init_theta(&self, _seed: u64) -> Vec<f64> {
        vec![0.0; self.n_params()]
    }

    fn step_utilities(&self, theta: &[f64], horizon: usize) -> StepUtilities {
        let mut per_step = vec![Array1::<f64>::zeros(self.n_states); horizon];
        for (block, &t) in self.steps.iter().enumerate() {
            let chunk = &theta[block * self.n_states..(block + 1) * self.n_states];
            per_step[t] = Array1::from_vec(chunk.to_vec());
        }
        StepUtilities::per_step(per_step)
    }

    fn add_slot_weighted_grads(
        &self,
        _theta: &[f64],
        slot_weights: &[Array1<f64>],
        factor: f64,
        out: &mut [f64],
    ) {
        for (block, &t) in self.steps.iter().enumerate() {
            let chunk = &mut out[block * self.n_states..(block + 1) * self.n_states];
            for (o, w) in chunk.iter_mut().zip(slot_weights[t].iter()) {
                *o += factor * w;
            }
        }
    }
}

/// Joint adaptive gradient ascent on (θ, β) from one initialization.
fn ascend_joint(
    mdp: &TabularMdp,
    class: &dyn UtilityClass,
    evidence: &Evidence,
    opts: &MegOptions,
    beta0: f64,
    theta0: Vec<f64>,
) -> Result<RunOutcome> {
    let mut beta = beta0.clamp(-opts.beta_cap, opts.beta_cap);
    let mut theta = theta0;
    let mut alpha = opts.learning_rate;
    let mut utilities = class.step_utilities(&theta, mdp.horizon);
    let mut accuracy = soft_accuracy(mdp, &utilities, evidence, Beta::Finite(beta))?;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        iterations += 1;
        let soft = soft_policy(mdp, &utilities, Beta::Finite(beta))?;
        let occ_soft = mdp.occupancy(&soft)?;
        let eu_pi = evidence.expected_utility(&utilities);
        let eu_soft = occ_soft.expected_utility(&utilities);
        let grad_beta = eu_pi - eu_soft;
        let slot_deltas: Vec<Array1<f64>> = (0..mdp.horizon)
            .map(|t| &evidence.slot_weights[t] - &occ_soft.state[t + 1])
            .collect();
        let factor = if opts.use_exact_theta_gradient { beta } else { 1.0 };
        let mut grad_theta = vec![0.0; class.n_params()];
        class.add_slot_weighted_grads(&theta, &slot_deltas, factor, &mut grad_theta);
        let grad_theta_norm = grad_theta.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
        if grad_beta.abs() <= opts.beta_grad_tol && grad_theta_norm <= opts.theta_grad_tol {
            converged = true;
            break;
        }
        let cand_beta = (beta + alpha * grad_beta).clamp(-opts.beta_cap, opts.beta_cap);
        let cand_theta: Vec<f64> = theta
            .iter()
            .zip(&grad_theta)
            .map(|(t, g)| t + alpha * g)
            .collect();
        if cand_beta == beta && cand_theta == theta {
            break;
        }
        let cand_utilities = class.step_utilities(&cand_theta, mdp.horizon);
        let cand_accuracy =
            soft_accuracy(mdp, &cand_utilities, evidence, Beta::Finite(cand_beta))?;
        if cand_accuracy >= accuracy {
            beta = cand_beta;
            theta = cand_theta;
            utilities = cand_utilities;
            accuracy = cand_accuracy;
            alpha = (alpha * 2.0).min(1e8);
        } else {
            alpha /= 2.0;
            if alpha < 1e-18 {
                break;
            }
        }
    }
    let mut outcome = RunOutcome {
        accuracy,
        beta: Beta::Finite(beta),
        theta,
        iterations,
        converged,
    };
    // As in the fixed-utility ascent: the hard limits belong to the family,
    // so score them at the final parameters too.
    let final_utilities = class.step_utilities(&outcome.theta, mdp.horizon);
    for limit in [Beta::PosInf, Beta::NegInf] {
        let limit_accuracy = soft_accuracy(mdp, &final_utilities, evidence, limit)?;
        if limit_accuracy > outcome.accuracy {
            outcome.accuracy = limit_accuracy;
            outcome.beta = limit;
        }
    }
    Ok(outcome)
}

/// Assemble a [`MegResult`] from the winning run.
fn finish(
    mdp: &TabularMdp,
    evidence: &Evidence,
    utilities: &StepUtilities,
    outcome: RunOutcome,
    theta_star: Option<Vec<f64>>,
    restarts_used: usize,
) -> Result<MegResult> {
    let meg = outcome.accuracy.max(0.0);
    let eu_pi = evidence.expected_utility(utilities);
    let eu_soft = soft_expected_utility(mdp, utilities, outcome.beta)?;
    let uniform = Policy::uniform(mdp.horizon, mdp.n_states, mdp.n_actions);
    let eu_unif = mdp.expected_utility(&uniform, utilities)?;
    let advantage = eu_pi - eu_unif;
    let sign = if advantage > 0.0 {
        1.0
    } else if advantage < 0.0 {
        -1.0
    } else {
        0.0
    };
    Ok(MegResult {
        meg,
        beta_star: outcome.beta,
        theta_star,
        predictive_accuracy: meg,
        expected_utility_policy: eu_pi,
        expected_utility_soft: eu_soft,
        signed_meg: Some(sign * meg),
        iterations: outcome.iterations,
        converged: outcome.converged,
        restarts_used,
    })
}

fn known_impl(
    mdp: &TabularMdp,
    evidence: Evidence,
    utilities: &StepUtilities,
    opts: &MegOptions,
) -> Result<MegResult> {
    opts.validate()?;
    mdp.validate()?;
    mdp.check_utilities_dims(utilities)?;
    for t in 0..mdp.horizon {
        if utilities.at(t).iter().any(|u| !u.is_finite()) {
            return Err(MegError::Validation("utility values must be finite".into()));
        }
    }
    let outcome = ascend_beta(mdp, utilities, &evidence, opts)?;
    finish(mdp, &evidence, utilities, outcome, None, 1)
}

/// Known-utility MEG of a policy: best predictive accuracy over all
/// Boltzmann-rational models of `utilities`.
pub fn meg_known(
    mdp: &TabularMdp,
    pi: &Policy,
    utilities: &StepUtilities,
    opts: &MegOptions,
) -> Result<MegResult> {
    let evidence = Evidence::from_policy(mdp, pi)?;
    known_impl(mdp, evidence, utilities, opts)
}

/// Known-utility MEG from sampled behaviour: policy expectations are
/// replaced by trajectory averages (model-side terms stay exact).
pub fn meg_known_from_trajectories(
    mdp: &TabularMdp,
    trajectories: &TrajectorySet,
    utilities: &StepUtilities,
    opts: &MegOptions,
) -> Result<MegResult> {
    let evidence = Evidence::from_trajectories(mdp, trajectories)?;
    known_impl(mdp, evidence, utilities, opts)
}

fn unknown_impl(
    mdp: &TabularMdp,
    evidence: Evidence,
    class: &dyn UtilityClass,
    warm_theta: Option<Vec<f64>>,
    opts: &MegOptions,
) -> Result<MegResult> {
    opts.validate()?;
    mdp.validate()?;
    let beta_starts = [0.1, -0.1, 1.0, -1.0];
    let mut best: Option<RunOutcome> = None;
    let mut total_iterations = 0;
    for r in 0..opts.restarts {
        let beta0 = beta_starts[r % beta_starts.len()];
        let theta0 = match (&warm_theta, r) {
            (Some(theta), 0) => theta.clone(),
            _ => class.init_theta(opts.seed.wrapping_add(0x9E37_79B9 * r as u64)),
        };
        let outcome = ascend_joint(mdp, class, &evidence, opts, beta0, theta0)?;
        total_iterations += outcome.iterations;
        let better = match &best {
            None => true,
            Some(b) => outcome.accuracy > b.accuracy,
        };
        if better {
            best = Some(outcome);
        }
    }
    let mut outcome = best.expect("at least one restart");
    outcome.iterations = total_iterations;
    let utilities = class.step_utilities(&outcome.theta, mdp.horizon);
    let theta = outcome.theta.clone();
    finish(mdp, &evidence, &utilities, outcome, Some(theta), opts.restarts)
}

/// Unknown-utility MEG: maximize predictive accuracy over the parametric
/// utility class of `model` jointly with β. The passed model's parameters
/// warm-start the first restart. Returns a lower bound on the exact maximum
/// over the class.
pub fn meg_unknown(
    mdp: &TabularMdp,
    pi: &Policy,
    model: &ParametricUtility,
    opts: &MegOptions,
) -> Result<MegResult> {
    check_model_states(mdp, model)?;
    let evidence = Evidence::from_policy(mdp, pi)?;
    let class = StationaryClass { proto: model };
    unknown_impl(mdp, evidence, &class, Some(model.theta.clone()), opts)
}

/// Unknown-utility MEG from sampled behaviour.
pub fn meg_unknown_from_trajectories(
    mdp: &TabularMdp,
    trajectories: &TrajectorySet,
    model: &ParametricUtility,
    opts: &MegOptions,
) -> Result<MegResult> {
    check_model_states(mdp, model)?;
    let evidence = Evidence::from_trajectories(mdp, trajectories)?;
    let class = StationaryClass { proto: model };
    unknown_impl(mdp, evidence, &class, Some(model.theta.clone()), opts)
}

fn check_model_states(mdp: &TabularMdp, model: &ParametricUtility) -> Result<()> {
    if model.n_states() != mdp.n_states {
        return Err(MegError::Dimension(format!(
            "utility model covers {} states, process has {}",
            model.n_states(),
            mdp.n_states
        )));
    }
    Ok(())
}

fn target_class(mdp: &TabularMdp, target_slots: &[usize]) -> Result<TargetStepsClass> {
    if target_slots.is_empty() {
        return Err(MegError::InvalidArgument(
            "target slot set must not be empty".into(),
        ));
    }
    let mut steps = Vec::new();
    for &slot in target_slots {
        if slot == 0 || slot > mdp.horizon + 1 {
            return Err(MegError::InvalidArgument(format!(
                "target slot {slot} outside 1..={} (slot 1 is the initial state, \
                 slot t+1 the arrival state of step t)",
                mdp.horizon + 1
            )));
        }
        // Slot 1 is the initial state; no decision influences it, so utility
        // there shifts every rollout equally and contributes nothing.
        if slot >= 2 {
            steps.push(slot - 2);
        }
    }
    steps.sort_unstable();
    steps.dedup();
    Ok(TargetStepsClass {
        n_states: mdp.n_states,
        steps,
    })
}

/// MEG with respect to goals about the states occupied at chosen time slots:
/// the utility class is an unrestricted table over states at each targeted
/// slot (and zero elsewhere). Slots are 1-based: slot 1 is the initial
/// state, slot `t+1` the state after `t` decisions.
pub fn meg_target_state(
    mdp: &TabularMdp,
    pi: &Policy,
    target_slots: &[usize],
    opts: &MegOptions,
) -> Result<MegResult> {
    let class = target_class(mdp, target_slots)?;
    let evidence = Evidence::from_policy(mdp, pi)?;
    unknown_impl(mdp, evidence, &class, None, opts)
}

/// [`meg_target_state`] from sampled behaviour.
pub fn meg_target_state_from_trajectories(
    mdp: &TabularMdp,
    trajectories: &TrajectorySet,
    target_slots: &[usize],
    opts: &MegOptions,
) -> Result<MegResult> {
    let class = target_class(mdp, target_slots)?;
    let evidence = Evidence::from_trajectories(mdp, trajectories)?;
    unknown_impl(mdp, evidence, &class, None, opts)
}

/// `meg * sign(E_pi[U] - E_uniform[U])`: negative when the policy is better
/// explained as minimizing the utility. `sign(0)` is 0.
pub fn signed_meg(
    result: &MegResult,
    mdp: &TabularMdp,
    pi: &Policy,
    utilities: &StepUtilities,
) -> Result<f64> {
    let eu_pi = mdp.expected_utility(pi, utilities)?;
    let uniform = Policy::uniform(mdp.horizon, mdp.n_states, mdp.n_actions);
    let eu_unif = mdp.expected_utility(&uniform, utilities)?;
    let advantage = eu_pi - eu_unif;
    let sign = if advantage > 0.0 {
        1.0
    } else if advantage < 0.0 {
        -1.0
    } else {
        0.0
    };
    Ok(sign * result.meg)
}
