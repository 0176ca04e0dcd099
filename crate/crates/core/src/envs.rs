//! Built-in environments: the one-step mouse decision problem, a windy
//! cliff-walking gridworld, and a seeded random-MDP generator for property
//! tests.

use ndarray::{Array1, Array3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{MegError, Result};
use crate::mdp::{Policy, TabularMdp};

/// One-step mouse problem. A context state says whether the cheese is left
/// (state 0) or right (state 1), each with probability 1/2. Action 0 moves
/// left, action 1 moves right. Reaching the cheese enters state 2 (utility
/// +1), missing it enters state 3 (utility -1). Horizon 1.
pub fn mouse_onestep() -> TabularMdp {
    let mut transition = Array3::<f64>::zeros((4, 2, 4));
    // Context "cheese left": left finds it, right does not.
    transition[[0, 0, 2]] = 1.0;
    transition[[0, 1, 3]] = 1.0;
    // Context "cheese right": mirrored.
    transition[[1, 0, 3]] = 1.0;
    transition[[1, 1, 2]] = 1.0;
    // Outcome states absorb.
    for s in 2..4 {
        for a in 0..2 {
            transition[[s, a, s]] = 1.0;
        }
    }
    TabularMdp::new(
        1,
        ndarray::arr1(&[0.5, 0.5, 0.0, 0.0]),
        transition,
        ndarray::arr1(&[0.0, 0.0, 1.0, -1.0]),
    )
    .expect("mouse construction is valid")
}

/// Mouse policy that moves toward the cheese with probability `p_toward` in
/// either context. Rows for the (unvisited) outcome states are uniform.
pub fn mouse_policy(p_toward: f64) -> Policy {
    let step = ndarray::arr2(&[
        [p_toward, 1.0 - p_toward],
        [1.0 - p_toward, p_toward],
        [0.5, 0.5],
        [0.5, 0.5],
    ]);
    Policy { steps: vec![step] }
}

/// Configuration of the cliff-walking gridworld.
///
/// A `height x width` grid of cells, row 0 on top. The agent starts in the
/// top-left cell. A goal region of +10 cells runs `goal_length` cells from
/// the top-right corner: along the top row leftwards and down the last
/// column (the corner counted once). The rest of the top row is a cliff of
/// -10 cells; every other cell, the start included, costs -1. After each
/// intended move (clipped at the walls), wind pushes the agent one extra cell
/// up with probability `wind`. Nothing terminates; the horizon is fixed.
#[derive(Debug, Clone)]
pub struct CliffWorldSpec {
    pub height: usize,
    pub width: usize,
    /// Goal region length k; region size is 2k-1 cells.
    pub goal_length: usize,
    pub wind: f64,
    pub horizon: usize,
    /// Adds a fifth no-op action when set.
    pub include_stay: bool,
}

impl Default for CliffWorldSpec {
    fn default() -> Self {
        CliffWorldSpec {
            height: 4,
            width: 10,
            goal_length: 1,
            wind: 0.3,
            horizon: 20,
            include_stay: false,
        }
    }
}

impl CliffWorldSpec {
    pub fn validate(&self) -> Result<()> {
        if self.height < 2 || self.width < 2 {
            return Err(MegError::InvalidArgument(
                "cliff world needs at least a 2x2 grid".into(),
            ));
        }
        if !(1..=4).contains(&self.goal_length) {
            return Err(MegError::InvalidArgument(format!(
                "goal length must lie in 1..=4, got {}",
                self.goal_length
            )));
        }
        if self.goal_length > self.height || self.goal_length >= self.width {
            return Err(MegError::InvalidArgument(
                "goal region does not fit the grid".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.wind) {
            return Err(MegError::InvalidArgument(format!(
                "wind must lie in [0, 1], got {}",
                self.wind
            )));
        }
        if self.horizon == 0 {
            return Err(MegError::InvalidArgument("horizon must be at least 1".into()));
        }
        Ok(())
    }

    pub fn n_cells(&self) -> usize {
        self.height * self.width
    }

    pub fn cell(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    /// Goal cells: top-right corner, k-1 cells leftwards along the top row,
    /// k-1 cells down the last column.
    pub fn goal_cells(&self) -> Vec<usize> {
        let k = self.goal_length;
        let mut cells = vec![self.cell(0, self.width - 1)];
        for j in 1..k {
            cells.push(self.cell(0, self.width - 1 - j));
        }
        for i in 1..k {
            cells.push(self.cell(i, self.width - 1));
        }
        cells
    }

    /// Cliff cells: the top row minus the start cell and the goal region.
    pub fn cliff_cells(&self) -> Vec<usize> {
        let goal = self.goal_cells();
        (1..self.width)
            .map(|c| self.cell(0, c))
            .filter(|s| !goal.contains(s))
            .collect()
    }
}

/// Build the cliff-walking MDP. Actions: 0 up, 1 down, 2 left, 3 right,
/// optionally 4 stay.
pub fn cliffworld(spec: &CliffWorldSpec) -> Result<TabularMdp> {
    spec.validate()?;
    let n = spec.n_cells();
    let n_actions = if spec.include_stay { 5 } else { 4 };
    let moves: [(isize, isize); 5] = [(-1, 0), (1, 0), (0, -1), (0, 1), (0, 0)];
    let mut transition = Array3::<f64>::zeros((n, n_actions, n));
    for row in 0..spec.height {
        for col in 0..spec.width {
            let s = spec.cell(row, col);
            for (a, (dr, dc)) in moves.iter().take(n_actions).enumerate() {
                let r1 = clip(row as isize + dr, spec.height);
                let c1 = clip(col as isize + dc, spec.width);
                let landed = spec.cell(r1, c1);
                let blown = spec.cell(clip(r1 as isize - 1, spec.height), c1);
                transition[[s, a, landed]] += 1.0 - spec.wind;
                transition[[s, a, blown]] += spec.wind;
            }
        }
    }
    let mut utility = Array1::from_elem(n, -1.0);
    for s in spec.cliff_cells() {
        utility[s] = -10.0;
    }
    for s in spec.goal_cells() {
        utility[s] = 10.0;
    }
    let mut initial = Array1::<f64>::zeros(n);
    initial[spec.cell(0, 0)] = 1.0;
    TabularMdp::new(spec.horizon, initial, transition, utility)
}

fn clip(x: isize, len: usize) -> usize {
    x.clamp(0, len as isize - 1) as usize
}

/// Random MDP: Dirichlet(1) transition rows, uniform initial distribution,
/// i.i.d. uniform state utilities in `[-utility_scale, utility_scale]`.
/// Deterministic per seed.
pub fn random_mdp_scaled(
    seed: u64,
    n_states: usize,
    n_actions: usize,
    horizon: usize,
    utility_scale: f64,
) -> TabularMdp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut transition = Array3::<f64>::zeros((n_states, n_actions, n_states));
    for s in 0..n_states {
        for a in 0..n_actions {
            // A Dirichlet(1) row is a normalized vector of Exp(1) draws.
            let mut row: Vec<f64> = (0..n_states)
                .map(|_| -(1.0 - rng.gen::<f64>()).ln())
                .collect();
            let sum: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= sum);
            for (s2, p) in row.iter().enumerate() {
                transition[[s, a, s2]] = *p;
            }
        }
    }
    let utility =
        Array1::from_iter((0..n_states).map(|_| rng.gen_range(-utility_scale..utility_scale)));
    let initial = Array1::from_elem(n_states, 1.0 / n_states as f64);
    TabularMdp::new(horizon, initial, transition, utility).expect("generated MDP is valid")
}

/// [`random_mdp_scaled`] with utilities in `[-1, 1]`.
pub fn random_mdp(seed: u64, n_states: usize, n_actions: usize, horizon: usize) -> TabularMdp {
    random_mdp_scaled(seed, n_states, n_actions, horizon, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::enumerate_deterministic_policies;

    #[test]
    fn mouse_basics() {
        let mdp = mouse_onestep();
        mdp.validate().unwrap();
        let range = mdp.attainable_range(&mdp.step_utilities()).unwrap();
        assert!((range.min - (-1.0)).abs() < 1e-12);
        assert!((range.max - 1.0).abs() < 1e-12);
        // The 0.8-toward policy finds the cheese 80% of the time.
        let eu = mdp
            .expected_utility(&mouse_policy(0.8), &mdp.step_utilities())
            .unwrap();
        assert!((eu - 0.6).abs() < 1e-12);
    }

    #[test]
    fn cliffworld_structure() {
        for k in 1..=4 {
            let spec = CliffWorldSpec {
                goal_length: k,
                ..CliffWorldSpec::default()
            };
            let mdp = cliffworld(&spec).unwrap();
            mdp.validate().unwrap();
            assert_eq!(mdp.n_states, 40);
            assert_eq!(spec.goal_cells().len(), 2 * k - 1);
            // Goal, cliff, start disjoint and rewards as declared.
            let goal = spec.goal_cells();
            let cliff = spec.cliff_cells();
            assert!(!goal.contains(&0) && !cliff.contains(&0));
            assert!(goal.iter().all(|s| !cliff.contains(s)));
            assert_eq!(mdp.state_utility[0], -1.0);
            assert!(goal.iter().all(|&s| mdp.state_utility[s] == 10.0));
            assert!(cliff.iter().all(|&s| mdp.state_utility[s] == -10.0));
            assert_eq!(goal.len() + cliff.len(), spec.width - 1 + k - 1);
        }
    }

    #[test]
    fn cliffworld_wind_kernel() {
        let spec = CliffWorldSpec::default();
        let mdp = cliffworld(&spec).unwrap();
        // From (2, 3), right lands on (2, 4) with 0.7 and is blown to (1, 4)
        // with 0.3.
        let s = spec.cell(2, 3);
        assert!((mdp.transition[[s, 3, spec.cell(2, 4)]] - 0.7).abs() < 1e-12);
        assert!((mdp.transition[[s, 3, spec.cell(1, 4)]] - 0.3).abs() < 1e-12);
        // In the top row the blown cell clips back onto the landing cell.
        let top = spec.cell(0, 5);
        assert!((mdp.transition[[top, 3, spec.cell(0, 6)]] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cliffworld_windless_shortest_path_value() {
        // Without wind the best 20-step rollout detours under the cliff:
        // down, nine cells right, up into the goal corner, then holds the
        // corner by walking into the wall. Ten -1 arrivals, ten +10 arrivals.
        let spec = CliffWorldSpec {
            wind: 0.0,
            ..CliffWorldSpec::default()
        };
        let mdp = cliffworld(&spec).unwrap();
        let range = mdp.attainable_range(&mdp.step_utilities()).unwrap();
        assert!((range.max - 90.0).abs() < 1e-9, "got {}", range.max);
        // And a deterministic policy rolls out deterministically.
        let (opt, _) = mdp.value_iteration(&mdp.step_utilities()).unwrap();
        let a = mdp.sample_trajectories(&opt, 3, 1).unwrap();
        assert!(a.episodes.iter().all(|ep| *ep == a.episodes[0]));
        let eu = mdp.expected_utility(&opt, &mdp.step_utilities()).unwrap();
        assert!((eu - 90.0).abs() < 1e-9);
    }

    #[test]
    fn cliffworld_rejects_bad_specs() {
        for spec in [
            CliffWorldSpec {
                goal_length: 0,
                ..CliffWorldSpec::default()
            },
            CliffWorldSpec {
                goal_length: 5,
                ..CliffWorldSpec::default()
            },
            CliffWorldSpec {
                wind: 1.5,
                ..CliffWorldSpec::default()
            },
            CliffWorldSpec {
                horizon: 0,
                ..CliffWorldSpec::default()
            },
        ] {
            assert!(cliffworld(&spec).is_err());
        }
    }

    #[test]
    fn random_mdp_deterministic_and_valid() {
        let a = random_mdp(9, 6, 3, 4);
        let b = random_mdp(9, 6, 3, 4);
        assert_eq!(a.transition, b.transition);
        assert_eq!(a.state_utility, b.state_utility);
        a.validate().unwrap();
        let c = random_mdp(10, 6, 3, 4);
        assert_ne!(a.transition, c.transition);
        let scaled = random_mdp_scaled(9, 6, 3, 4, 7.0);
        assert!(scaled.state_utility.iter().all(|u| u.abs() <= 7.0));
    }

    #[test]
    fn value_iteration_matches_policy_enumeration() {
        let mdp = random_mdp(42, 3, 2, 2);
        let utilities = mdp.step_utilities();
        let (_, q) = mdp.value_iteration(&utilities).unwrap();
        let vi_value: f64 = (0..3)
            .map(|s| {
                mdp.initial_dist[s]
                    * q[0].row(s).iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            })
            .sum();
        let mut best = f64::NEG_INFINITY;
        for policy in enumerate_deterministic_policies(3, 2, 2) {
            let eu = mdp.expected_utility(&policy, &utilities).unwrap();
            best = best.max(eu);
        }
        assert!((vi_value - best).abs() < 1e-12);
    }
}
