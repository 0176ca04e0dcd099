//! Independent verification oracles.
//!
//! Everything here re-derives quantities the main solvers compute, through
//! different formulations: closed-form single-decision problems, brute-force
//! grid and simplex searches, and finite differences. None of it shares
//! maximization code with the solvers, so agreement between the two is
//! evidence of correctness rather than tautology. Oracle tolerances are
//! deliberately looser than solver tolerances.

use ndarray::{Array1, Array2, Array3, ArrayView1};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{MegError, Result};
use crate::mdp::{Policy, StepUtilities, TabularMdp};
use crate::meg::MegResult;
use crate::soft_q::Beta;

/// A one-decision influence problem: a context `s ~ P(s)` is observed, a
/// decision `d` is taken by the observed policy `pi(d|s)`, and an outcome
/// `t ~ P(t|s,d)` results.
#[derive(Debug, Clone)]
pub struct SingleDecisionCid {
    pub context_dist: Array1<f64>,
    /// `policy[[s, d]]`.
    pub policy: Array2<f64>,
    /// `outcome_kernel[[s, d, t]]`.
    pub outcome_kernel: Array3<f64>,
}

impl SingleDecisionCid {
    pub fn n_contexts(&self) -> usize {
        self.context_dist.len()
    }

    pub fn n_decisions(&self) -> usize {
        self.policy.shape()[1]
    }

    pub fn n_outcomes(&self) -> usize {
        self.outcome_kernel.shape()[2]
    }

    pub fn validate(&self) -> Result<()> {
        let (s, d, t) = (self.n_contexts(), self.n_decisions(), self.n_outcomes());
        if self.policy.shape() != [s, d] || self.outcome_kernel.shape() != [s, d, t] {
            return Err(MegError::Dimension(
                "inconsistent context/decision/outcome dimensions".into(),
            ));
        }
        let tight = |row: ArrayView1<f64>| -> bool {
            row.iter().all(|p| *p >= 0.0) && (row.sum() - 1.0).abs() <= 1e-12
        };
        if !tight(self.context_dist.view()) {
            return Err(MegError::Validation("context distribution not normalized".into()));
        }
        for s_i in 0..s {
            if !tight(self.policy.row(s_i)) {
                return Err(MegError::Validation(format!(
                    "policy row {s_i} not normalized"
                )));
            }
            for d_i in 0..d {
                if !tight(self.outcome_kernel.slice(ndarray::s![s_i, d_i, ..])) {
                    return Err(MegError::Validation(format!(
                        "outcome kernel row (s={s_i}, d={d_i}) not normalized"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `q[[s, d]] = E[utility(T) | s, d]`.
    pub fn decision_values(&self, utility: ArrayView1<f64>) -> Array2<f64> {
        let mut q = Array2::<f64>::zeros((self.n_contexts(), self.n_decisions()));
        for s in 0..self.n_contexts() {
            for d in 0..self.n_decisions() {
                q[[s, d]] = self.outcome_kernel.slice(ndarray::s![s, d, ..]).dot(&utility);
            }
        }
        q
    }

    /// The equivalent horizon-1 MDP (contexts followed by absorbing outcome
    /// states) and the observed policy lifted onto it.
    pub fn to_mdp(&self, utility: ArrayView1<f64>) -> (TabularMdp, Policy) {
        let (nc, nd, nt) = (self.n_contexts(), self.n_decisions(), self.n_outcomes());
        let n = nc + nt;
        let mut transition = Array3::<f64>::zeros((n, nd, n));
        for s in 0..nc {
            for d in 0..nd {
                for t in 0..nt {
                    transition[[s, d, nc + t]] = self.outcome_kernel[[s, d, t]];
                }
            }
        }
        for t in 0..nt {
            for d in 0..nd {
                transition[[nc + t, d, nc + t]] = 1.0;
            }
        }
        let mut initial = Array1::<f64>::zeros(n);
        initial.slice_mut(ndarray::s![..nc]).assign(&self.context_dist);
        let mut state_utility = Array1::<f64>::zeros(n);
        state_utility
            .slice_mut(ndarray::s![nc..])
            .assign(&utility.to_owned());
        let mdp = TabularMdp::new(1, initial, transition, state_utility)
            .expect("lifted construction is valid");
        let mut step = Array2::<f64>::from_elem((n, nd), 1.0 / nd as f64);
        for s in 0..nc {
            step.row_mut(s).assign(&self.policy.row(s));
        }
        (mdp, Policy { steps: vec![step] })
    }
}

/// Log-softmax of a row, computed with a max shift. Local to the oracles on
/// purpose.
fn log_softmax(row: &[f64]) -> Vec<f64> {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + row.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
    row.iter().map(|x| x - lse).collect()
}

/// Predictive accuracy of the Boltzmann model at `beta` on a CID, in closed
/// form.
fn cid_accuracy(cid: &SingleDecisionCid, q: &Array2<f64>, beta: f64) -> f64 {
    let m = cid.n_decisions() as f64;
    let mut acc = m.ln();
    for s in 0..cid.n_contexts() {
        let logits: Vec<f64> = q.row(s).iter().map(|v| beta * v).collect();
        let lp = log_softmax(&logits);
        for d in 0..cid.n_decisions() {
            let w = cid.context_dist[s] * cid.policy[[s, d]];
            if w > 0.0 {
                acc += w * lp[d];
            }
        }
    }
    acc
}

/// Expected utility of the Boltzmann model at `beta` on a CID.
fn cid_model_utility(cid: &SingleDecisionCid, q: &Array2<f64>, beta: f64) -> f64 {
    let mut eu = 0.0;
    for s in 0..cid.n_contexts() {
        let logits: Vec<f64> = q.row(s).iter().map(|v| beta * v).collect();
        let lp = log_softmax(&logits);
        for d in 0..cid.n_decisions() {
            eu += cid.context_dist[s] * lp[d].exp() * q[[s, d]];
        }
    }
    eu
}

/// Golden-section search for the maximum of a concave function on `[lo, hi]`.
fn golden_section_max<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, iters: usize) -> (f64, f64) {
    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

fn cid_signed(cid: &SingleDecisionCid, q: &Array2<f64>, meg: f64, eu_policy: f64) -> f64 {
    let m = cid.n_decisions() as f64;
    let mut eu_unif = 0.0;
    for s in 0..cid.n_contexts() {
        for d in 0..cid.n_decisions() {
            eu_unif += cid.context_dist[s] * q[[s, d]] / m;
        }
    }
    let advantage = eu_policy - eu_unif;
    if advantage > 0.0 {
        meg
    } else if advantage < 0.0 {
        -meg
    } else {
        0.0
    }
}

/// Exact known-utility MEG of a single-decision problem: golden-section
/// search on the concave closed-form predictive accuracy over β.
pub fn exact_meg_known_single(
    cid: &SingleDecisionCid,
    utility: ArrayView1<f64>,
) -> Result<MegResult> {
    cid.validate()?;
    if utility.len() != cid.n_outcomes() {
        return Err(MegError::Dimension(format!(
            "utility over {} outcomes, kernel has {}",
            utility.len(),
            cid.n_outcomes()
        )));
    }
    let q = cid.decision_values(utility);
    let iters = 200;
    let (beta, accuracy) = golden_section_max(|b| cid_accuracy(cid, &q, b), -1e3, 1e3, iters);
    let mut eu_policy = 0.0;
    for s in 0..cid.n_contexts() {
        for d in 0..cid.n_decisions() {
            eu_policy += cid.context_dist[s] * cid.policy[[s, d]] * q[[s, d]];
        }
    }
    let meg = accuracy.max(0.0);
    Ok(MegResult {
        meg,
        beta_star: Beta::Finite(beta),
        theta_star: None,
        predictive_accuracy: meg,
        expected_utility_policy: eu_policy,
        expected_utility_soft: cid_model_utility(cid, &q, beta),
        signed_meg: Some(cid_signed(cid, &q, meg, eu_policy)),
        iterations: iters,
        converged: true,
        restarts_used: 1,
    })
}

/// Exact target-outcome MEG of a single-decision problem: gradient ascent on
/// the weight vector `w` over outcomes, with the model
/// `softmax_d(sum_t P(t|s,d) w_t)`. The objective is concave in `w`
/// (log-softmax of a linear map), so the ascent finds the global optimum; the
/// rationality scale is absorbed into `w`.
pub fn exact_meg_targets_single(cid: &SingleDecisionCid) -> Result<MegResult> {
    cid.validate()?;
    let nt = cid.n_outcomes();
    if nt > 16 {
        return Err(MegError::InvalidArgument(format!(
            "target set of {nt} outcomes exceeds the oracle limit of 16"
        )));
    }
    let (nc, nd) = (cid.n_contexts(), cid.n_decisions());
    let objective = |w: &Array1<f64>| -> f64 {
        let q = cid.decision_values(w.view());
        cid_accuracy(cid, &q, 1.0)
    };
    let gradient = |w: &Array1<f64>| -> Array1<f64> {
        // dF/dw_t = E_pi[P(t|s,d)] - E_model[P(t|s,d)]
        let q = cid.decision_values(w.view());
        let mut g = Array1::<f64>::zeros(nt);
        for s in 0..nc {
            let logits: Vec<f64> = q.row(s).iter().cloned().collect();
            let model: Vec<f64> = log_softmax(&logits).iter().map(|l| l.exp()).collect();
            for d in 0..nd {
                let delta = cid.context_dist[s] * (cid.policy[[s, d]] - model[d]);
                for t in 0..nt {
                    g[t] += delta * cid.outcome_kernel[[s, d, t]];
                }
            }
        }
        g
    };
    let mut w = Array1::<f64>::zeros(nt);
    let mut value = objective(&w);
    let mut alpha = 1.0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < 100_000 {
        iterations += 1;
        let g = gradient(&w);
        // Below ~1e-8 the value-gated acceptance cannot resolve progress
        // (objective differences fall under one ulp), so this is as tight a
        // stationarity check as the arithmetic supports.
        if g.iter().all(|x| x.abs() <= 5e-8) {
            converged = true;
            break;
        }
        // A diverging w means the optimum is a deterministic-model limit;
        // the objective value has plateaued by then.
        if w.iter().any(|x| x.abs() > 1e4) {
            break;
        }
        let cand = &w + &(alpha * &g);
        let cand_value = objective(&cand);
        if cand_value >= value {
            w = cand;
            value = cand_value;
            alpha = (alpha * 2.0).min(1e6);
        } else {
            alpha /= 2.0;
            if alpha < 1e-18 {
                break;
            }
        }
    }
    let q = cid.decision_values(w.view());
    let mut eu_policy = 0.0;
    for s in 0..nc {
        for d in 0..nd {
            eu_policy += cid.context_dist[s] * cid.policy[[s, d]] * q[[s, d]];
        }
    }
    let meg = value.max(0.0);
    Ok(MegResult {
        meg,
        beta_star: Beta::Finite(1.0),
        theta_star: Some(w.to_vec()),
        predictive_accuracy: meg,
        expected_utility_policy: eu_policy,
        expected_utility_soft: cid_model_utility(cid, &q, 1.0),
        signed_meg: Some(cid_signed(cid, &q, meg, eu_policy)),
        iterations,
        converged,
        restarts_used: 1,
    })
}

/// Euclidean projection of a vector onto the probability simplex.
fn project_simplex(row: &mut [f64]) {
    let mut sorted: Vec<f64> = row.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, v) in sorted.iter().enumerate() {
        cumsum += v;
        let candidate = (cumsum - 1.0) / (j + 1) as f64;
        if v - candidate > 0.0 {
            tau = candidate;
        }
    }
    for x in row.iter_mut() {
        *x = (*x - tau).max(0.0);
    }
}

/// Brute-force maximum-entropy policy at expected utility level `u`:
/// projected gradient ascent on causal entropy over the per-(step, state)
/// policy simplices, with an augmented-Lagrangian treatment of the utility
/// constraint and 50 random restarts. Test oracle only; instances must be
/// tiny.
pub fn oracle_maxent_policy(
    mdp: &TabularMdp,
    utilities: &StepUtilities,
    u: f64,
) -> Result<Policy> {
    mdp.validate()?;
    mdp.check_utilities_dims(utilities)?;
    if mdp.n_states * mdp.n_actions * mdp.horizon > 32 {
        return Err(MegError::InvalidArgument(
            "maxent oracle only handles n_states * n_actions * horizon <= 32".into(),
        ));
    }
    let range = mdp.attainable_range(utilities)?;
    if u < range.min - 1e-9 || u > range.max + 1e-9 {
        return Err(MegError::Unattainable {
            target: u,
            min: range.min,
            max: range.max,
        });
    }
    // Expected arrival utility of each (state, action) per step.
    let gains: Vec<Array2<f64>> = (0..mdp.horizon)
        .map(|t| {
            let mut g = Array2::<f64>::zeros((mdp.n_states, mdp.n_actions));
            for s in 0..mdp.n_states {
                for a in 0..mdp.n_actions {
                    g[[s, a]] = mdp
                        .transition
                        .slice(ndarray::s![s, a, ..])
                        .dot(utilities.at(t));
                }
            }
            g
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2718);
    // Best candidate ranked by (feasible, entropy) then by constraint gap.
    let mut best: Option<(bool, f64, f64, Policy)> = None;
    for restart in 0..50 {
        let mut pi = if restart == 0 {
            Policy::uniform(mdp.horizon, mdp.n_states, mdp.n_actions)
        } else {
            let steps = (0..mdp.horizon)
                .map(|_| {
                    let mut step = Array2::<f64>::zeros((mdp.n_states, mdp.n_actions));
                    for mut row in step.outer_iter_mut() {
                        let mut draws: Vec<f64> =
                            (0..mdp.n_actions).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
                        let sum: f64 = draws.iter().sum();
                        draws.iter_mut().for_each(|x| *x /= sum);
                        for (r, d) in row.iter_mut().zip(&draws) {
                            *r = *d;
                        }
                    }
                    step
                })
                .collect();
            Policy { steps }
        };
        let mut lambda = 0.0;
        let mut mu = 10.0;
        for _outer in 0..30 {
            maxent_inner_ascent(mdp, utilities, &gains, &mut pi, lambda, mu, u, 250)?;
            let e = mdp.expected_utility(&pi, utilities)?;
            lambda += mu * (e - u);
            mu = (mu * 2.0).min(1e7);
        }
        let e = mdp.expected_utility(&pi, utilities)?;
        let h = mdp.causal_entropy(&pi)?;
        let gap = (e - u).abs();
        let feasible = gap <= 1e-6;
        let better = match &best {
            None => true,
            Some((bf, bh, bgap, _)) => {
                if feasible != *bf {
                    feasible
                } else if feasible {
                    h > *bh
                } else {
                    gap < *bgap
                }
            }
        };
        if better {
            best = Some((feasible, h, gap, pi));
        }
    }
    Ok(best.expect("at least one restart").3)
}

/// One augmented-Lagrangian inner loop: ascend
/// `H(pi) - lambda (E - u) - mu/2 (E - u)^2` over the policy simplices.
fn maxent_inner_ascent(
    mdp: &TabularMdp,
    utilities: &StepUtilities,
    gains: &[Array2<f64>],
    pi: &mut Policy,
    lambda: f64,
    mu: f64,
    u: f64,
    iters: usize,
) -> Result<()> {
    let value = |p: &Policy| -> Result<f64> {
        let e = mdp.expected_utility(p, utilities)?;
        let h = mdp.causal_entropy(p)?;
        Ok(h - lambda * (e - u) - 0.5 * mu * (e - u) * (e - u))
    };
    let mut alpha = 0.1;
    let mut current = value(pi)?;
    for _ in 0..iters {
        let occ = mdp.occupancy(pi)?;
        let e = occ.expected_utility(utilities);
        let kappa = -(lambda + mu * (e - u));
        // Backward pass: to-go value of the integrand
        // -ln pi + kappa * gain under pi.
        let mut v_next = Array1::<f64>::zeros(mdp.n_states);
        let mut push: Vec<Array2<f64>> = vec![Array2::zeros((0, 0)); mdp.horizon];
        for t in (0..mdp.horizon).rev() {
            let mut v_t = Array1::<f64>::zeros(mdp.n_states);
            let mut carry = Array2::<f64>::zeros((mdp.n_states, mdp.n_actions));
            for s in 0..mdp.n_states {
                for a in 0..mdp.n_actions {
                    carry[[s, a]] = mdp.transition.slice(ndarray::s![s, a, ..]).dot(&v_next);
                    let p = pi.steps[t][[s, a]].max(1e-300);
                    v_t[s] += pi.steps[t][[s, a]]
                        * (-p.ln() + kappa * gains[t][[s, a]] + carry[[s, a]]);
                }
            }
            push[t] = carry;
            v_next = v_t;
        }
        // Row-wise preconditioned projected step.
        let mut candidate = pi.clone();
        for t in 0..mdp.horizon {
            for s in 0..mdp.n_states {
                let rho = occ.state[t][s];
                let scale = alpha / rho.max(1e-4);
                let mut row: Vec<f64> = (0..mdp.n_actions)
                    .map(|a| {
                        let p = pi.steps[t][[s, a]].max(1e-300);
                        let grad =
                            rho * (-p.ln() - 1.0 + kappa * gains[t][[s, a]] + push[t][[s, a]]);
                        pi.steps[t][[s, a]] + scale * grad
                    })
                    .collect();
                project_simplex(&mut row);
                for (a, p) in row.iter().enumerate() {
                    candidate.steps[t][[s, a]] = *p;
                }
            }
        }
        let cand_value = value(&candidate)?;
        if cand_value >= current {
            *pi = candidate;
            current = cand_value;
            alpha = (alpha * 2.0).min(10.0);
        } else {
            alpha /= 2.0;
            if alpha < 1e-14 {
                break;
            }
        }
    }
    Ok(())
}

/// Known-utility MEG by brute force: evaluate predictive accuracy on a β
/// grid, then refine inside the bracketing interval by golden-section search
/// (the objective is concave, hence unimodal). Returns `(accuracy, beta)`.
pub fn beta_grid_meg(
    mdp: &TabularMdp,
    pi: &Policy,
    utilities: &StepUtilities,
    lo: f64,
    hi: f64,
    points: usize,
) -> Result<(f64, f64)> {
    let pa = |beta: f64| -> f64 {
        let model = crate::soft_q::soft_policy(mdp, utilities, Beta::Finite(beta))
            .expect("finite beta");
        crate::meg::predictive_accuracy(mdp, pi, &model)
            .expect("matching dimensions")
            .value
    };
    let mut best_i = 0;
    let mut best = f64::NEG_INFINITY;
    let step = (hi - lo) / (points - 1) as f64;
    for i in 0..points {
        let v = pa(lo + i as f64 * step);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let bracket_lo = lo + step * best_i.saturating_sub(1) as f64;
    let bracket_hi = lo + step * (best_i + 1).min(points - 1) as f64;
    let (beta, refined) = golden_section_max(pa, bracket_lo, bracket_hi, 100);
    if refined >= best {
        Ok((refined, beta))
    } else {
        Ok((best, lo + step * best_i as f64))
    }
}

/// Compare an analytic gradient against central finite differences of `f`
/// at `x`. Returns the worst relative error, with an absolute floor of 1e-6
/// on the denominator.
pub fn grad_check<F: Fn(&[f64]) -> f64>(f: F, analytic: &[f64], x: &[f64], h: f64) -> f64 {
    let mut worst = 0.0_f64;
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let up = f(&probe);
        probe[i] = x[i] - h;
        let down = f(&probe);
        probe[i] = x[i];
        let fd = (up - down) / (2.0 * h);
        let err = (analytic[i] - fd).abs() / analytic[i].abs().max(1e-6);
        worst = worst.max(err);
    }
    worst
}

/// All deterministic (possibly non-stationary) policies of a small process.
pub fn enumerate_deterministic_policies(
    n_states: usize,
    n_actions: usize,
    horizon: usize,
) -> Vec<Policy> {
    let slots = n_states * horizon;
    let count = n_actions.checked_pow(slots as u32).expect("policy count overflow");
    assert!(count <= 1 << 20, "too many policies to enumerate");
    let mut out = Vec::with_capacity(count);
    for code in 0..count {
        let mut c = code;
        let mut actions = vec![vec![0usize; n_states]; horizon];
        for step_actions in actions.iter_mut() {
            for a in step_actions.iter_mut() {
                *a = c % n_actions;
                c /= n_actions;
            }
        }
        out.push(Policy::deterministic(&actions, n_actions));
    }
    out
}

/// Check the mediated-goal bound on a chain `S -> D -> M -> T`: goals about
/// the final outcome `T` cannot score higher than goals about the mediator
/// `M` when `T` depends on the decision only through `M`.
///
/// `cid` holds the kernel up to the mediator; `t_given_mid[[m, t]]` extends
/// it to the final outcome. Returns `(meg_T, meg_M, holds)`.
pub fn pseudo_terminal_check(
    cid: &SingleDecisionCid,
    t_given_mid: &Array2<f64>,
) -> Result<(f64, f64, bool)> {
    cid.validate()?;
    if t_given_mid.shape()[0] != cid.n_outcomes() {
        return Err(MegError::Dimension(format!(
            "mediator kernel has {} rows, cid has {} outcomes",
            t_given_mid.shape()[0],
            cid.n_outcomes()
        )));
    }
    for (m, row) in t_given_mid.outer_iter().enumerate() {
        if row.iter().any(|p| *p < 0.0) || (row.sum() - 1.0).abs() > 1e-9 {
            return Err(MegError::Validation(format!(
                "final-outcome row {m} not a distribution"
            )));
        }
    }
    let meg_mid = exact_meg_targets_single(cid)?.meg;
    let nt = t_given_mid.shape()[1];
    let mut composed = Array3::<f64>::zeros((cid.n_contexts(), cid.n_decisions(), nt));
    for s in 0..cid.n_contexts() {
        for d in 0..cid.n_decisions() {
            for m in 0..cid.n_outcomes() {
                for t in 0..nt {
                    composed[[s, d, t]] +=
                        cid.outcome_kernel[[s, d, m]] * t_given_mid[[m, t]];
                }
            }
        }
    }
    let chained = SingleDecisionCid {
        context_dist: cid.context_dist.clone(),
        policy: cid.policy.clone(),
        outcome_kernel: composed,
    };
    let meg_t = exact_meg_targets_single(&chained)?.meg;
    Ok((meg_t, meg_mid, meg_t <= meg_mid + 1e-3))
}

/// The one-step mouse problem as a CID: 2 contexts, 2 decisions, outcomes
/// {cheese, no cheese}.
pub fn mouse_cid(p_toward: f64) -> SingleDecisionCid {
    let mut kernel = Array3::<f64>::zeros((2, 2, 2));
    kernel[[0, 0, 0]] = 1.0;
    kernel[[0, 1, 1]] = 1.0;
    kernel[[1, 0, 1]] = 1.0;
    kernel[[1, 1, 0]] = 1.0;
    SingleDecisionCid {
        context_dist: ndarray::arr1(&[0.5, 0.5]),
        policy: ndarray::arr2(&[
            [p_toward, 1.0 - p_toward],
            [1.0 - p_toward, p_toward],
        ]),
        outcome_kernel: kernel,
    }
}

/// Seeded random CID with moderately smooth policies (Dirichlet rows mixed
/// with uniform), keeping the optimal rationality at a human scale.
pub fn random_cid(seed: u64, n_contexts: usize, n_decisions: usize, n_outcomes: usize) -> SingleDecisionCid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dirichlet_row = |len: usize| -> Vec<f64> {
        let mut v: Vec<f64> = (0..len).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
        let sum: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= sum);
        v
    };
    let context_dist = Array1::from_vec(dirichlet_row(n_contexts));
    let mut policy = Array2::<f64>::zeros((n_contexts, n_decisions));
    for mut row in policy.outer_iter_mut() {
        let draw = dirichlet_row(n_decisions);
        for (r, d) in row.iter_mut().zip(&draw) {
            *r = 0.5 * d + 0.5 / n_decisions as f64;
        }
    }
    let mut kernel = Array3::<f64>::zeros((n_contexts, n_decisions, n_outcomes));
    for s in 0..n_contexts {
        for d in 0..n_decisions {
            let draw = dirichlet_row(n_outcomes);
            for (t, p) in draw.iter().enumerate() {
                kernel[[s, d, t]] = *p;
            }
        }
    }
    SingleDecisionCid {
        context_dist,
        policy,
        outcome_kernel: kernel,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{mouse_onestep, random_mdp};
    use crate::meg::{meg_known, meg_unknown, predictive_accuracy, MegOptions};
    use crate::soft_q::soft_policy;
    use crate::utility::{FeatureMap, ParametricUtility, UtilityKind};
    use ndarray::arr1;

    #[test]
    fn mouse_cid_known_meg() {
        let cid = mouse_cid(0.8);
        let u = arr1(&[1.0, -1.0]);
        let result = exact_meg_known_single(&cid, u.view()).unwrap();
        let expect = 0.8 * 0.8_f64.ln() + 0.2 * 0.2_f64.ln() + 2.0_f64.ln();
        assert!((result.meg - expect).abs() < 1e-9);
        assert!((result.meg - 0.19).abs() < 0.01);
        assert!((result.beta_star.as_f64() - 2.0_f64.ln()).abs() < 1e-6);
        assert!(result.signed_meg.unwrap() > 0.0);
        // Uniform behaviour carries no evidence of the goal.
        let flat = mouse_cid(0.5);
        assert!(exact_meg_known_single(&flat, u.view()).unwrap().meg < 1e-9);
    }

    #[test]
    fn known_single_agrees_with_mdp_solver() {
        for seed in 0..4 {
            let cid = random_cid(seed, 3, 3, 4);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            let u = Array1::from_iter((0..4).map(|_| rng.gen_range(-1.0..1.0)));
            let oracle = exact_meg_known_single(&cid, u.view()).unwrap();
            let (mdp, pi) = cid.to_mdp(u.view());
            let solver = meg_known(&mdp, &pi, &mdp.step_utilities(), &MegOptions::default())
                .unwrap();
            assert!(
                (oracle.meg - solver.meg).abs() < 1e-6,
                "seed {seed}: oracle {} solver {}",
                oracle.meg,
                solver.meg
            );
        }
    }

    #[test]
    fn known_single_agrees_with_dense_grid() {
        let cid = random_cid(5, 3, 2, 3);
        let u = arr1(&[0.9, -0.4, 0.2]);
        let oracle = exact_meg_known_single(&cid, u.view()).unwrap();
        let q = cid.decision_values(u.view());
        let mut best = f64::NEG_INFINITY;
        for i in 0..100_001 {
            let beta = -50.0 + i as f64 * 1e-3;
            best = best.max(cid_accuracy(&cid, &q, beta));
        }
        assert!((oracle.meg - best).abs() < 1e-5);
    }

    #[test]
    fn targets_single_mouse_three_classes() {
        // Over a binary outcome only three utility equivalence classes
        // exist: prefer cheese, prefer no cheese, indifferent. The free
        // optimization over outcome weights must match the best of them.
        let cid = mouse_cid(0.8);
        let free = exact_meg_targets_single(&cid).unwrap();
        let prefer = exact_meg_known_single(&cid, arr1(&[1.0, -1.0]).view()).unwrap();
        let avoid = exact_meg_known_single(&cid, arr1(&[-1.0, 1.0]).view()).unwrap();
        let best = prefer.meg.max(avoid.meg).max(0.0);
        assert!(
            (free.meg - best).abs() < 1e-6,
            "free {} class-best {best}",
            free.meg
        );
        assert!(free.converged);
    }

    #[test]
    fn targets_single_no_influence_is_zero() {
        // The outcome ignores the decision, so no outcome goal explains
        // anything.
        let mut cid = random_cid(9, 3, 2, 3);
        for s in 0..3 {
            let row = cid.outcome_kernel.slice(ndarray::s![s, 0, ..]).to_owned();
            cid.outcome_kernel.slice_mut(ndarray::s![s, 1, ..]).assign(&row);
        }
        let result = exact_meg_targets_single(&cid).unwrap();
        assert!(result.meg < 1e-9);
    }

    #[test]
    fn targets_single_agrees_with_tabular_class_solver() {
        for seed in 0..3 {
            let cid = random_cid(40 + seed, 2, 3, 3);
            let oracle = exact_meg_targets_single(&cid).unwrap();
            let (mdp, pi) = cid.to_mdp(Array1::zeros(3).view());
            let model = ParametricUtility::init(
                UtilityKind::Tabular,
                FeatureMap::OneHot {
                    n_states: mdp.n_states,
                },
                0,
                0,
                0.1,
            );
            let solver = meg_unknown(&mdp, &pi, &model, &MegOptions::default()).unwrap();
            assert!(
                (oracle.meg - solver.meg).abs() < 1e-3,
                "seed {seed}: oracle {} solver {}",
                oracle.meg,
                solver.meg
            );
        }
    }

    #[test]
    fn maxent_oracle_unconstrained_level_is_uniform() {
        let mdp = random_mdp(31, 3, 3, 2);
        let utilities = mdp.step_utilities();
        let uniform = Policy::uniform(2, 3, 3);
        let u = mdp.expected_utility(&uniform, &utilities).unwrap();
        let oracle = oracle_maxent_policy(&mdp, &utilities, u).unwrap();
        for t in 0..2 {
            for (a, b) in oracle.steps[t].iter().zip(uniform.steps[t].iter()) {
                assert!((a - b).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn maxent_oracle_mouse_level() {
        let mdp = mouse_onestep();
        let utilities = mdp.step_utilities();
        let oracle = oracle_maxent_policy(&mdp, &utilities, 0.6).unwrap();
        // Matching expected utility 0.6 forces 0.8 toward-probability; the
        // entropy-maximal such policy mirrors the mouse's.
        assert!((oracle.steps[0][[0, 0]] - 0.8).abs() < 2e-3);
        assert!((oracle.steps[0][[1, 1]] - 0.8).abs() < 2e-3);
        let h = mdp.causal_entropy(&oracle).unwrap();
        assert!((h - 0.5004).abs() < 2e-3);
    }

    #[test]
    fn maxent_oracle_extreme_level_is_optimal_policy() {
        let mdp = mouse_onestep();
        let utilities = mdp.step_utilities();
        let oracle = oracle_maxent_policy(&mdp, &utilities, 1.0).unwrap();
        assert!(oracle.steps[0][[0, 0]] > 1.0 - 1e-3);
        assert!(oracle.steps[0][[1, 1]] > 1.0 - 1e-3);
        assert!(oracle_maxent_policy(&mdp, &utilities, 1.5).is_err());
    }

    #[test]
    fn maxent_oracle_matches_soft_policy_uniqueness() {
        // The soft policy at any beta is the unique causal-entropy maximizer
        // at its own expected utility level.
        for (seed, beta) in [(60, 0.8), (61, -1.2)] {
            let mdp = random_mdp(seed, 3, 3, 2);
            let utilities = mdp.step_utilities();
            let soft = soft_policy(&mdp, &utilities, Beta::Finite(beta)).unwrap();
            let u = mdp.expected_utility(&soft, &utilities).unwrap();
            let oracle = oracle_maxent_policy(&mdp, &utilities, u).unwrap();
            let h_soft = mdp.causal_entropy(&soft).unwrap();
            let h_oracle = mdp.causal_entropy(&oracle).unwrap();
            assert!((h_soft - h_oracle).abs() <= 1e-3, "entropy {h_oracle} vs {h_soft}");
            for t in 0..2 {
                let tv: f64 = soft.steps[t]
                    .iter()
                    .zip(oracle.steps[t].iter())
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>()
                    / 2.0;
                assert!(tv <= 1e-3 * 3.0, "seed {seed} step {t}: tv {tv}");
            }
        }
    }

    #[test]
    fn grid_oracle_refines_past_grid_resolution() {
        let mdp = mouse_onestep();
        let (accuracy, beta) = beta_grid_meg(
            &mdp,
            &crate::envs::mouse_policy(0.8),
            &mdp.step_utilities(),
            -50.0,
            50.0,
            2001,
        )
        .unwrap();
        assert!((beta - 2.0_f64.ln()).abs() < 1e-4);
        let expect = 0.8 * 0.8_f64.ln() + 0.2 * 0.2_f64.ln() + 2.0_f64.ln();
        assert!((accuracy - expect).abs() < 1e-8);
    }

    #[test]
    fn grad_check_quadratic_is_exact() {
        let f = |x: &[f64]| x.iter().map(|v| 3.0 * v * v + 2.0 * v).sum::<f64>();
        let x = [0.4, -1.2, 2.0];
        let analytic: Vec<f64> = x.iter().map(|v| 6.0 * v + 2.0).collect();
        assert!(grad_check(f, &analytic, &x, 1e-5) <= 1e-8);
    }

    #[test]
    fn grad_check_accuracy_in_beta() {
        let mdp = mouse_onestep();
        let pi = crate::envs::mouse_policy(0.8);
        let f = |x: &[f64]| {
            let model = soft_policy(&mdp, &mdp.step_utilities(), Beta::Finite(x[0])).unwrap();
            predictive_accuracy(&mdp, &pi, &model).unwrap().value
        };
        // Analytic slope at beta = 0.5: E_pi[U] - E_soft[U].
        let beta = 0.5;
        let soft = soft_policy(&mdp, &mdp.step_utilities(), Beta::Finite(beta)).unwrap();
        let analytic = [mdp
            .expected_utility(&pi, &mdp.step_utilities())
            .unwrap()
            - mdp.expected_utility(&soft, &mdp.step_utilities()).unwrap()];
        assert!(grad_check(f, &analytic, &[beta], 1e-4) <= 1e-3);
    }

    #[test]
    fn grad_check_mlp_parameters() {
        let proto = ParametricUtility::init(
            UtilityKind::Mlp,
            FeatureMap::OneHot { n_states: 5 },
            6,
            3,
            0.5,
        );
        let state = 2;
        let f = |theta: &[f64]| {
            let mut m = proto.clone();
            m.theta = theta.to_vec();
            m.evaluate(state).unwrap()
        };
        let analytic = proto.grad_params(state);
        assert!(grad_check(f, &analytic, &proto.theta, 1e-5) <= 1e-4);
    }

    #[test]
    fn pseudo_terminal_copy_and_noise() {
        let cid = random_cid(70, 2, 2, 3);
        // A perfect copy of the mediator preserves the score exactly.
        let copy = Array2::from_shape_fn((3, 3), |(m, t)| if m == t { 1.0 } else { 0.0 });
        let (meg_t, meg_m, holds) = pseudo_terminal_check(&cid, &copy).unwrap();
        assert!((meg_t - meg_m).abs() < 1e-6);
        assert!(holds);
        // Pure noise erases it.
        let noise = Array2::from_elem((3, 2), 0.5);
        let (meg_t, _, holds) = pseudo_terminal_check(&cid, &noise).unwrap();
        assert!(meg_t < 1e-6);
        assert!(holds);
    }

    #[test]
    fn pseudo_terminal_holds_on_random_chains() {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        for trial in 0..50 {
            let cid = random_cid(200 + trial, 2, 2, 3);
            let mut t_given_mid = Array2::<f64>::zeros((3, 3));
            for mut row in t_given_mid.outer_iter_mut() {
                let mut draws: Vec<f64> = (0..3).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
                let sum: f64 = draws.iter().sum();
                draws.iter_mut().for_each(|x| *x /= sum);
                for (r, d) in row.iter_mut().zip(&draws) {
                    *r = *d;
                }
            }
            let (meg_t, meg_m, holds) = pseudo_terminal_check(&cid, &t_given_mid).unwrap();
            assert!(holds, "trial {trial}: meg_T {meg_t} > meg_M {meg_m}");
        }
    }

    #[test]
    fn enumeration_is_complete() {
        let policies = enumerate_deterministic_policies(2, 2, 2);
        assert_eq!(policies.len(), 16);
        for p in &policies {
            assert!(p.is_deterministic());
            p.validate().unwrap();
        }
        // All pairwise distinct.
        for i in 0..policies.len() {
            for j in (i + 1)..policies.len() {
                assert_ne!(policies[i], policies[j]);
            }
        }
    }

    #[test]
    fn cid_validation() {
        let mut cid = mouse_cid(0.8);
        cid.policy[[0, 0]] = 0.9;
        assert!(cid.validate().is_err());
        let cid = mouse_cid(0.8);
        assert!(exact_meg_known_single(&cid, arr1(&[1.0]).view()).is_err());
    }
}
