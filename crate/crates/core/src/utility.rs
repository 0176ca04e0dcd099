//! Parametric, differentiable utility functions over states.
//!
//! Three families share one flat parameter vector θ: a tabular function (one
//! parameter per state), a linear function of state features, and a
//! one-hidden-layer ReLU perceptron. All expose exact analytic gradients in
//! θ, so the goal-inference solvers stay model-agnostic.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{MegError, Result};

/// Maps a state index to a real feature vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FeatureMap {
    /// Indicator features; makes the linear family equivalent to the tabular
    /// one.
    OneHot { n_states: usize },
    /// Grid coordinates followed by the indicator: `(row, col, one-hot)`.
    /// States enumerate cells row-major.
    GridRowCol { height: usize, width: usize },
}

impl FeatureMap {
    pub fn n_states(&self) -> usize {
        match self {
            FeatureMap::OneHot { n_states } => *n_states,
            FeatureMap::GridRowCol { height, width } => height * width,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FeatureMap::OneHot { n_states } => *n_states,
            FeatureMap::GridRowCol { height, width } => 2 + height * width,
        }
    }

    pub fn features(&self, state: usize) -> Array1<f64> {
        let mut out = Array1::<f64>::zeros(self.dim());
        match self {
            FeatureMap::OneHot { .. } => out[state] = 1.0,
            FeatureMap::GridRowCol { width, .. } => {
                out[0] = (state / width) as f64;
                out[1] = (state % width) as f64;
                out[2 + state] = 1.0;
            }
        }
        out
    }

    /// All feature vectors stacked into an `(n_states, dim)` matrix.
    pub fn matrix(&self) -> Array2<f64> {
        let mut out = Array2::<f64>::zeros((self.n_states(), self.dim()));
        for s in 0..self.n_states() {
            out.row_mut(s).assign(&self.features(s));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UtilityKind {
    Tabular,
    Linear,
    Mlp,
}

/// A utility function `U^θ: state -> real` with parameters θ.
///
/// Parameter layouts:
/// - tabular: `θ[s]` is the utility of state `s` (`feature_map` sets the
///   state count only);
/// - linear: `θ · features(s)`;
/// - mlp: `W1 (hidden x dim, row-major) | b1 | w2 | b2`, ReLU activation,
///   with the subgradient at the kink taken as 0.
#[derive(Debug, Clone)]
pub struct ParametricUtility {
    pub kind: UtilityKind,
    pub feature_map: FeatureMap,
    /// Hidden width; meaningful for the mlp kind only.
    pub hidden: usize,
    pub theta: Vec<f64>,
}

impl ParametricUtility {
    /// Deterministic initialization: zeros for tabular/linear, i.i.d.
    /// uniform weights in `[-scale, scale]` for the mlp.
    pub fn init(
        kind: UtilityKind,
        feature_map: FeatureMap,
        hidden: usize,
        seed: u64,
        scale: f64,
    ) -> Self {
        let mut u = ParametricUtility {
            kind,
            feature_map,
            hidden,
            theta: Vec::new(),
        };
        u.theta = match kind {
            UtilityKind::Tabular | UtilityKind::Linear => vec![0.0; u.n_params()],
            UtilityKind::Mlp => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..u.n_params())
                    .map(|_| rng.gen_range(-scale..scale))
                    .collect()
            }
        };
        u
    }

    /// Wrap an existing parameter vector, checking its length.
    pub fn with_theta(
        kind: UtilityKind,
        feature_map: FeatureMap,
        hidden: usize,
        theta: Vec<f64>,
    ) -> Result<Self> {
        let u = ParametricUtility {
            kind,
            feature_map,
            hidden,
            theta,
        };
        if u.theta.len() != u.n_params() {
            return Err(MegError::Dimension(format!(
                "{} parameters supplied, model needs {}",
                u.theta.len(),
                u.n_params()
            )));
        }
        Ok(u)
    }

    pub fn n_params(&self) -> usize {
        let f = self.feature_map.dim();
        match self.kind {
            UtilityKind::Tabular => self.feature_map.n_states(),
            UtilityKind::Linear => f,
            UtilityKind::Mlp => self.hidden * f + 2 * self.hidden + 1,
        }
    }

    pub fn n_states(&self) -> usize {
        self.feature_map.n_states()
    }

    pub fn evaluate(&self, state: usize) -> Result<f64> {
        if state >= self.n_states() {
            return Err(MegError::InvalidArgument(format!(
                "state {state} out of range for {} states",
                self.n_states()
            )));
        }
        Ok(self.evaluate_all()[state])
    }

    /// Utilities of every state as one vector.
    pub fn evaluate_all(&self) -> Array1<f64> {
        match self.kind {
            UtilityKind::Tabular => Array1::from_vec(self.theta.clone()),
            UtilityKind::Linear => self
                .feature_map
                .matrix()
                .dot(&ArrayView1::from(&self.theta)),
            UtilityKind::Mlp => {
                let (w1, b1, w2, b2) = self.mlp_views();
                let hidden = self.feature_map.matrix().dot(&w1.t()) + &b1;
                hidden.mapv_into(|z| z.max(0.0)).dot(&w2) + b2
            }
        }
    }

    /// `∇_θ U^θ(state)` as a dense vector.
    pub fn grad_params(&self, state: usize) -> Vec<f64> {
        let mut weights = Array1::<f64>::zeros(self.n_states());
        weights[state] = 1.0;
        let mut out = vec![0.0; self.n_params()];
        self.add_weighted_grads(weights.view(), 1.0, &mut out);
        out
    }

    /// Accumulate `factor · Σ_s state_weights[s] · ∇_θ U^θ(s)` into `out`.
    ///
    /// This is the only gradient form the solvers need (the weights are
    /// occupancy differences), and it vectorizes over states.
    pub fn add_weighted_grads(&self, state_weights: ArrayView1<f64>, factor: f64, out: &mut [f64]) {
        assert_eq!(state_weights.len(), self.n_states());
        assert_eq!(out.len(), self.n_params());
        match self.kind {
            UtilityKind::Tabular => {
                for (o, w) in out.iter_mut().zip(state_weights.iter()) {
                    *o += factor * w;
                }
            }
            UtilityKind::Linear => {
                let g = self.feature_map.matrix().t().dot(&state_weights);
                for (o, gi) in out.iter_mut().zip(g.iter()) {
                    *o += factor * gi;
                }
            }
            UtilityKind::Mlp => {
                let (w1, b1, w2, _) = self.mlp_views();
                let phi = self.feature_map.matrix();
                let pre = phi.dot(&w1.t()) + &b1;
                let active = pre.mapv(|z| if z > 0.0 { 1.0 } else { 0.0 });
                let post = pre.mapv(|z| z.max(0.0));
                let h = self.hidden;
                let f = self.feature_map.dim();
                // d/dW1[i,j] = sum_s w_s * active[s,i] * w2[i] * phi[s,j]
                let mut scaled = active.clone();
                for (s, mut row) in scaled.outer_iter_mut().enumerate() {
                    for (i, v) in row.iter_mut().enumerate() {
                        *v *= state_weights[s] * w2[i];
                    }
                }
                let g_w1 = scaled.t().dot(&phi);
                for i in 0..h {
                    for j in 0..f {
                        out[i * f + j] += factor * g_w1[[i, j]];
                    }
                }
                // d/db1[i] = sum_s w_s * active[s,i] * w2[i]
                for i in 0..h {
                    let g: f64 = (0..self.n_states())
                        .map(|s| state_weights[s] * active[[s, i]] * w2[i])
                        .sum();
                    out[h * f + i] += factor * g;
                }
                // d/dw2[i] = sum_s w_s * post[s,i]
                let g_w2 = post.t().dot(&state_weights);
                for i in 0..h {
                    out[h * f + h + i] += factor * g_w2[i];
                }
                // d/db2 = sum_s w_s
                out[h * f + 2 * h] += factor * state_weights.sum();
            }
        }
    }

    /// Views into the flat mlp parameter vector: `(W1, b1, w2, b2)`.
    fn mlp_views(&self) -> (ArrayView2<'_, f64>, ArrayView1<'_, f64>, ArrayView1<'_, f64>, f64) {
        let h = self.hidden;
        let f = self.feature_map.dim();
        let w1 = ArrayView2::from_shape((h, f), &self.theta[..h * f]).unwrap();
        let b1 = ArrayView1::from(&self.theta[h * f..h * f + h]);
        let w2 = ArrayView1::from(&self.theta[h * f + h..h * f + 2 * h]);
        (w1, b1, w2, self.theta[h * f + 2 * h])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn onehot(n: usize) -> FeatureMap {
        FeatureMap::OneHot { n_states: n }
    }

    #[test]
    fn tabular_is_lookup() {
        let u = ParametricUtility::with_theta(
            UtilityKind::Tabular,
            onehot(2),
            0,
            vec![1.0, -1.0],
        )
        .unwrap();
        assert_eq!(u.evaluate(0).unwrap(), 1.0);
        assert_eq!(u.evaluate(1).unwrap(), -1.0);
        assert!(u.evaluate(2).is_err());
        let g = u.grad_params(1);
        assert_eq!(g, vec![0.0, 1.0]);
        let init = ParametricUtility::init(UtilityKind::Tabular, onehot(5), 0, 3, 0.1);
        assert_eq!(init.theta, vec![0.0; 5]);
        let g3 = init.grad_params(3);
        let mut e3 = vec![0.0; 5];
        e3[3] = 1.0;
        assert_eq!(g3, e3);
    }

    #[test]
    fn linear_is_dot_product() {
        let zero = ParametricUtility::init(UtilityKind::Linear, onehot(4), 0, 0, 0.1);
        for s in 0..4 {
            assert_eq!(zero.evaluate(s).unwrap(), 0.0);
        }
        let fm = FeatureMap::GridRowCol {
            height: 2,
            width: 3,
        };
        assert_eq!(fm.dim(), 8);
        let mut theta = vec![0.0; 8];
        theta[0] = 10.0; // weight on the row coordinate
        theta[1] = 1.0; // weight on the column coordinate
        let u = ParametricUtility::with_theta(UtilityKind::Linear, fm.clone(), 0, theta).unwrap();
        // State 4 = cell (1, 1).
        assert_eq!(u.evaluate(4).unwrap(), 11.0);
        assert_eq!(u.grad_params(4), fm.features(4).to_vec());
    }

    #[test]
    fn mlp_forward_matches_manual_pass() {
        let u = ParametricUtility::init(UtilityKind::Mlp, onehot(5), 4, 7, 0.1);
        assert_eq!(u.n_params(), 4 * 5 + 4 + 4 + 1);
        // Manual forward pass on state 2, straight off the flat layout.
        let state = 2;
        let (h, f) = (4, 5);
        let mut manual = u.theta[h * f + 2 * h]; // b2
        for i in 0..h {
            let z = u.theta[i * f + state] + u.theta[h * f + i]; // one-hot picks a column
            manual += u.theta[h * f + h + i] * z.max(0.0);
        }
        assert!((u.evaluate(state).unwrap() - manual).abs() < 1e-15);
        // Batch evaluation agrees with per-state evaluation.
        let all = u.evaluate_all();
        for s in 0..5 {
            assert!((all[s] - u.evaluate(s).unwrap()).abs() < 1e-15);
        }
    }

    #[test]
    fn init_is_seeded() {
        let a = ParametricUtility::init(UtilityKind::Mlp, onehot(3), 8, 0, 0.1);
        let b = ParametricUtility::init(UtilityKind::Mlp, onehot(3), 8, 0, 0.1);
        let c = ParametricUtility::init(UtilityKind::Mlp, onehot(3), 8, 1, 0.1);
        assert_eq!(a.theta, b.theta);
        assert_ne!(a.theta, c.theta);
        assert!(a.theta.iter().all(|w| w.abs() <= 0.1));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for kind in [UtilityKind::Tabular, UtilityKind::Linear, UtilityKind::Mlp] {
            for trial in 0..100 {
                let fm = if trial % 2 == 0 {
                    onehot(6)
                } else {
                    FeatureMap::GridRowCol {
                        height: 2,
                        width: 3,
                    }
                };
                let mut u = ParametricUtility::init(kind, fm, 5, trial, 0.1);
                for w in u.theta.iter_mut() {
                    *w = rng.gen_range(-1.0..1.0);
                }
                let state = rng.gen_range(0..6);
                let analytic = u.grad_params(state);
                let h = 1e-5;
                let mut worst = 0.0_f64;
                for i in 0..u.theta.len() {
                    let mut probe = u.clone();
                    probe.theta[i] += h;
                    let up = probe.evaluate(state).unwrap();
                    probe.theta[i] = u.theta[i] - h;
                    let down = probe.evaluate(state).unwrap();
                    let fd = (up - down) / (2.0 * h);
                    let err = (analytic[i] - fd).abs() / analytic[i].abs().max(1e-6);
                    worst = worst.max(err);
                }
                assert!(worst <= 1e-4, "{kind:?} trial {trial}: error {worst}");
            }
        }
    }

    #[test]
    fn weighted_grads_sum_per_state_grads() {
        let u = ParametricUtility::init(UtilityKind::Mlp, onehot(4), 3, 5, 0.1);
        let weights = ndarray::arr1(&[0.2, -0.5, 0.0, 1.3]);
        let mut batched = vec![0.0; u.n_params()];
        u.add_weighted_grads(weights.view(), 2.0, &mut batched);
        let mut manual = vec![0.0; u.n_params()];
        for s in 0..4 {
            for (m, g) in manual.iter_mut().zip(u.grad_params(s)) {
                *m += 2.0 * weights[s] * g;
            }
        }
        for (b, m) in batched.iter().zip(&manual) {
            assert!((b - m).abs() < 1e-12);
        }
    }

    #[test]
    fn tabular_realizes_any_state_utility() {
        let target = vec![0.3, -2.0, 5.5, 0.0];
        let u = ParametricUtility::with_theta(UtilityKind::Tabular, onehot(4), 0, target.clone())
            .unwrap();
        assert_eq!(u.evaluate_all().to_vec(), target);
        assert!(ParametricUtility::with_theta(
            UtilityKind::Tabular,
            onehot(4),
            0,
            vec![0.0; 3]
        )
        .is_err());
    }
}
