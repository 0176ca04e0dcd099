//! Soft value iteration and Boltzmann-rational policies.
//!
//! For an inverse-rationality parameter `β`, the soft Q-function replaces the
//! hard max of backward induction with the scaled log-sum-exp
//! `(1/β)·ln Σ_a exp(β·Q(s,a))`. The induced policy is the softmax of `β·Q`
//! per state; it is the unique maximum-entropy policy among those attaining
//! its expected utility. `β = 0` gives the uniform policy, `β → ±∞` the
//! uniformly-randomized argmax/argmin policies of ordinary value iteration.

use std::fmt;

use ndarray::{Array1, Array2, ArrayView1};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{MegError, Result};
use crate::mdp::{Policy, StepUtilities, TabularMdp};

/// Relative tolerance for grouping tied actions in the `β = ±∞` limits.
const TIE_TOL: f64 = 1e-9;

/// Inverse rationality: a real number or one of the two infinite limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Beta {
    Finite(f64),
    PosInf,
    NegInf,
}

impl Beta {
    /// Classify a float, mapping `±∞` to the explicit tags.
    pub fn from_f64(x: f64) -> Beta {
        if x == f64::INFINITY {
            Beta::PosInf
        } else if x == f64::NEG_INFINITY {
            Beta::NegInf
        } else {
            Beta::Finite(x)
        }
    }

    pub fn as_f64(&self) -> f64 {
        match self {
            Beta::Finite(x) => *x,
            Beta::PosInf => f64::INFINITY,
            Beta::NegInf => f64::NEG_INFINITY,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Beta::Finite(_))
    }
}

impl fmt::Display for Beta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Beta::Finite(x) => write!(f, "{x}"),
            Beta::PosInf => write!(f, "inf"),
            Beta::NegInf => write!(f, "-inf"),
        }
    }
}

// Serialized as a plain number, or the strings "inf" / "-inf" for the limits
// (JSON has no infinity literal).
impl Serialize for Beta {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Beta::Finite(x) => serializer.serialize_f64(*x),
            Beta::PosInf => serializer.serialize_str("inf"),
            Beta::NegInf => serializer.serialize_str("-inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Beta {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct BetaVisitor;
        impl<'de> Visitor<'de> for BetaVisitor {
            type Value = Beta;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number, \"inf\", or \"-inf\"")
            }
            fn visit_f64<E: de::Error>(self, x: f64) -> std::result::Result<Beta, E> {
                Ok(Beta::from_f64(x))
            }
            fn visit_i64<E: de::Error>(self, x: i64) -> std::result::Result<Beta, E> {
                Ok(Beta::Finite(x as f64))
            }
            fn visit_u64<E: de::Error>(self, x: u64) -> std::result::Result<Beta, E> {
                Ok(Beta::Finite(x as f64))
            }
            fn visit_str<E: de::Error>(self, s: &str) -> std::result::Result<Beta, E> {
                match s {
                    "inf" | "+inf" => Ok(Beta::PosInf),
                    "-inf" => Ok(Beta::NegInf),
                    _ => s
                        .parse::<f64>()
                        .map(Beta::from_f64)
                        .map_err(|_| E::custom(format!("not a beta value: {s:?}"))),
                }
            }
        }
        deserializer.deserialize_any(BetaVisitor)
    }
}

/// Time-indexed soft Q tables for a fixed `β`.
///
/// For finite `β` these follow the soft backup; for `β = ±∞` they are the
/// hard Q tables of ordinary value iteration (the recursion's limit).
#[derive(Debug, Clone)]
pub struct SoftQ {
    pub beta: Beta,
    pub q: Vec<Array2<f64>>,
}

/// `(1/β)·ln Σ_i exp(β·x_i)`, shifted so no exponential overflows.
///
/// For `β > 0` the shift is `max(x)`; for `β < 0` it is `min(x)`, which keeps
/// every exponent non-positive in both cases. Stable for `|β|·|x|` up to 1e6
/// and beyond.
fn soft_max_scaled(x: ArrayView1<f64>, beta: f64) -> f64 {
    let shift = if beta > 0.0 {
        x.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    } else {
        x.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let sum: f64 = x.iter().map(|v| (beta * (v - shift)).exp()).sum();
    shift + sum.ln() / beta
}

/// Log-softmax of `β·q_row`, written into `out`.
fn log_softmax_scaled(q_row: ArrayView1<f64>, beta: f64, mut out: ndarray::ArrayViewMut1<f64>) {
    let logits: Vec<f64> = q_row.iter().map(|q| beta * q).collect();
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
    for (o, l) in out.iter_mut().zip(&logits) {
        *o = l - lse;
    }
}

/// Backward soft value iteration for finite `β ≠ 0`.
///
/// `q[t][[s, a]]` is the soft utility-to-go of taking `a` in `s` at step `t`:
/// the expected arrival utility plus the soft value of the arrival state.
pub fn soft_value_iteration(
    mdp: &TabularMdp,
    utilities: &StepUtilities,
    beta: f64,
) -> Result<SoftQ> {
    if beta == 0.0 || !beta.is_finite() {
        return Err(MegError::InvalidArgument(format!(
            "soft value iteration needs finite nonzero beta, got {beta}"
        )));
    }
    mdp.check_utilities_dims(utilities)?;
    let n = mdp.horizon;
    let mut q: Vec<Array2<f64>> = Vec::with_capacity(n);
    let mut v_next = Array1::<f64>::zeros(mdp.n_states);
    for t in (0..n).rev() {
        let gain = utilities.at(t) + &v_next;
        let mut q_t = Array2::<f64>::zeros((mdp.n_states, mdp.n_actions));
        for s in 0..mdp.n_states {
            for a in 0..mdp.n_actions {
                q_t[[s, a]] = mdp.transition.slice(ndarray::s![s, a, ..]).dot(&gain);
            }
        }
        for s in 0..mdp.n_states {
            v_next[s] = soft_max_scaled(q_t.row(s), beta);
        }
        q.push(q_t);
    }
    q.reverse();
    Ok(SoftQ {
        beta: Beta::Finite(beta),
        q,
    })
}

/// The Boltzmann-rational policy for `β`, covering all extended-real cases.
pub fn soft_policy(mdp: &TabularMdp, utilities: &StepUtilities, beta: Beta) -> Result<Policy> {
    match beta {
        Beta::Finite(b) if b == 0.0 => {
            Ok(Policy::uniform(mdp.horizon, mdp.n_states, mdp.n_actions))
        }
        Beta::Finite(b) => {
            let soft = soft_value_iteration(mdp, utilities, b)?;
            let steps = soft
                .q
                .iter()
                .map(|q_t| {
                    let mut step = Array2::<f64>::zeros(q_t.raw_dim());
                    for (s, row) in q_t.outer_iter().enumerate() {
                        log_softmax_scaled(row, b, step.row_mut(s));
                    }
                    step.mapv_into(f64::exp)
                })
                .collect();
            Ok(Policy { steps })
        }
        Beta::PosInf | Beta::NegInf => {
            let (_, q) = mdp.value_iteration(utilities)?;
            let maximize = beta == Beta::PosInf;
            let steps = q
                .iter()
                .map(|q_t| {
                    let mut step = Array2::<f64>::zeros(q_t.raw_dim());
                    for (s, row) in q_t.outer_iter().enumerate() {
                        let tied = tied_actions(row, maximize);
                        let p = 1.0 / tied.len() as f64;
                        for a in tied {
                            step[[s, a]] = p;
                        }
                    }
                    step
                })
                .collect();
            Ok(Policy { steps })
        }
    }
}

/// Log-probabilities of the Boltzmann-rational policy. For `β = ±∞`,
/// zero-probability actions map to `-∞`.
pub fn log_soft_policy(
    mdp: &TabularMdp,
    utilities: &StepUtilities,
    beta: Beta,
) -> Result<Vec<Array2<f64>>> {
    match beta {
        Beta::Finite(b) if b == 0.0 => {
            let lp = -(mdp.n_actions as f64).ln();
            Ok(vec![
                Array2::from_elem((mdp.n_states, mdp.n_actions), lp);
                mdp.horizon
            ])
        }
        Beta::Finite(b) => {
            let soft = soft_value_iteration(mdp, utilities, b)?;
            Ok(soft
                .q
                .iter()
                .map(|q_t| {
                    let mut step = Array2::<f64>::zeros(q_t.raw_dim());
                    for (s, row) in q_t.outer_iter().enumerate() {
                        log_softmax_scaled(row, b, step.row_mut(s));
                    }
                    step
                })
                .collect())
        }
        Beta::PosInf | Beta::NegInf => {
            let policy = soft_policy(mdp, utilities, beta)?;
            Ok(policy
                .steps
                .into_iter()
                .map(|step| step.mapv_into(f64::ln))
                .collect())
        }
    }
}

/// Indices within relative tolerance of the row's max (or min).
fn tied_actions(row: ArrayView1<f64>, maximize: bool) -> Vec<usize> {
    let best = if maximize {
        row.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    } else {
        row.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let tol = TIE_TOL * best.abs().max(1.0);
    row.iter()
        .enumerate()
        .filter(|(_, q)| if maximize { **q >= best - tol } else { **q <= best + tol })
        .map(|(a, _)| a)
        .collect()
}
