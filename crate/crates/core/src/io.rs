//! File formats: MDPs, policies, trajectories, and utility-model
//! checkpoints.
//!
//! - MDP (JSON): `{"horizon", "n_states", "n_actions", "initial_dist",
//!   "transition"}` with `transition[s][a][s2]`, plus `"state_utility"`.
//! - Policy (JSON): `{"policy": [..]}` indexed `[t][s][a]`.
//! - Trajectories (CSV): header `episode,t,state,action`, 0-based indices.
//! - Utility checkpoint (JSON): `{"kind", "dims", "theta", "seed"}`.

use std::path::Path;

use ndarray::{Array1, Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{MegError, Result};
use crate::mdp::{Policy, TabularMdp, TrajectorySet};
use crate::utility::{FeatureMap, ParametricUtility, UtilityKind};

fn parse_err(path: &Path, message: impl ToString) -> MegError {
    MegError::Parse {
        path: path.display().to_string(),
        message: message.to_string(),
    }
}

#[derive(Serialize, Deserialize)]
struct MdpFile {
    horizon: usize,
    n_states: usize,
    n_actions: usize,
    initial_dist: Vec<f64>,
    transition: Vec<Vec<Vec<f64>>>,
    state_utility: Vec<f64>,
}

pub fn load_mdp(path: &Path) -> Result<TabularMdp> {
    let text = std::fs::read_to_string(path)?;
    let file: MdpFile = serde_json::from_str(&text).map_err(|e| parse_err(path, e))?;
    let (s, a) = (file.n_states, file.n_actions);
    if file.transition.len() != s
        || file.transition.iter().any(|rows| {
            rows.len() != a || rows.iter().any(|row| row.len() != s)
        })
    {
        return Err(parse_err(
            path,
            format!("transition must be a {s} x {a} x {s} array"),
        ));
    }
    let mut transition = Array3::<f64>::zeros((s, a, s));
    for (i, rows) in file.transition.iter().enumerate() {
        for (j, row) in rows.iter().enumerate() {
            for (k, p) in row.iter().enumerate() {
                transition[[i, j, k]] = *p;
            }
        }
    }
    if file.initial_dist.len() != s || file.state_utility.len() != s {
        return Err(parse_err(
            path,
            "initial_dist and state_utility must have n_states entries",
        ));
    }
    TabularMdp::new(
        file.horizon,
        Array1::from_vec(file.initial_dist),
        transition,
        Array1::from_vec(file.state_utility),
    )
}

pub fn save_mdp(path: &Path, mdp: &TabularMdp) -> Result<()> {
    let transition = (0..mdp.n_states)
        .map(|s| {
            (0..mdp.n_actions)
                .map(|a| mdp.transition.slice(ndarray::s![s, a, ..]).to_vec())
                .collect()
        })
        .collect();
    let file = MdpFile {
        horizon: mdp.horizon,
        n_states: mdp.n_states,
        n_actions: mdp.n_actions,
        initial_dist: mdp.initial_dist.to_vec(),
        transition,
        state_utility: mdp.state_utility.to_vec(),
    };
    std::fs::write(path, serde_json::to_string_pretty(&file).expect("serializable"))?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct PolicyFile {
    policy: Vec<Vec<Vec<f64>>>,
}

pub fn load_policy(path: &Path) -> Result<Policy> {
    let text = std::fs::read_to_string(path)?;
    let file: PolicyFile = serde_json::from_str(&text).map_err(|e| parse_err(path, e))?;
    if file.policy.is_empty() {
        return Err(parse_err(path, "policy must cover at least one step"));
    }
    let steps: Vec<Array2<f64>> = file
        .policy
        .iter()
        .enumerate()
        .map(|(t, step)| {
            let s = step.len();
            let a = step.first().map_or(0, |row| row.len());
            if s == 0 || a == 0 || step.iter().any(|row| row.len() != a) {
                return Err(parse_err(path, format!("step {t} is not rectangular")));
            }
            let mut out = Array2::<f64>::zeros((s, a));
            for (i, row) in step.iter().enumerate() {
                for (j, p) in row.iter().enumerate() {
                    out[[i, j]] = *p;
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let policy = Policy { steps };
    policy.validate()?;
    Ok(policy)
}

pub fn save_policy(path: &Path, policy: &Policy) -> Result<()> {
    let file = PolicyFile {
        policy: policy
            .steps
            .iter()
            .map(|step| step.outer_iter().map(|row| row.to_vec()).collect())
            .collect(),
    };
    std::fs::write(path, serde_json::to_string_pretty(&file).expect("serializable"))?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct TrajectoryRow {
    episode: usize,
    t: usize,
    state: usize,
    action: usize,
}

pub fn load_trajectories(path: &Path) -> Result<TrajectorySet> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| parse_err(path, e))?;
    let mut rows: Vec<TrajectoryRow> = Vec::new();
    for record in reader.deserialize() {
        rows.push(record.map_err(|e| parse_err(path, e))?);
    }
    if rows.is_empty() {
        return Err(parse_err(path, "no trajectory rows"));
    }
    rows.sort_by_key(|r| (r.episode, r.t));
    let mut episodes = Vec::new();
    let mut current_id = rows[0].episode;
    let mut current: Vec<(usize, usize)> = Vec::new();
    for row in &rows {
        if row.episode != current_id {
            episodes.push(std::mem::take(&mut current));
            current_id = row.episode;
        }
        if row.t != current.len() {
            return Err(parse_err(
                path,
                format!(
                    "episode {} has step t={} where t={} was expected",
                    row.episode,
                    row.t,
                    current.len()
                ),
            ));
        }
        current.push((row.state, row.action));
    }
    episodes.push(current);
    let horizon = episodes[0].len();
    if episodes.iter().any(|ep| ep.len() != horizon) {
        return Err(parse_err(path, "episodes have differing lengths"));
    }
    Ok(TrajectorySet {
        horizon,
        episodes,
        weights: None,
    })
}

pub fn save_trajectories(path: &Path, set: &TrajectorySet) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| parse_err(path, e))?;
    for (episode, steps) in set.episodes.iter().enumerate() {
        for (t, &(state, action)) in steps.iter().enumerate() {
            writer
                .serialize(TrajectoryRow {
                    episode,
                    t,
                    state,
                    action,
                })
                .map_err(|e| parse_err(path, e))?;
        }
    }
    writer.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct CheckpointDims {
    n_states: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    features: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    height: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hidden: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    kind: String,
    dims: CheckpointDims,
    theta: Vec<f64>,
    seed: u64,
}

pub fn load_utility_model(path: &Path) -> Result<ParametricUtility> {
    let text = std::fs::read_to_string(path)?;
    let file: CheckpointFile = serde_json::from_str(&text).map_err(|e| parse_err(path, e))?;
    let kind = match file.kind.as_str() {
        "tabular" => UtilityKind::Tabular,
        "linear" => UtilityKind::Linear,
        "mlp" => UtilityKind::Mlp,
        other => return Err(parse_err(path, format!("unknown utility kind {other:?}"))),
    };
    let feature_map = match file.dims.features.as_deref() {
        None | Some("one_hot") => FeatureMap::OneHot {
            n_states: file.dims.n_states,
        },
        Some("grid") => {
            let (height, width) = match (file.dims.height, file.dims.width) {
                (Some(h), Some(w)) => (h, w),
                _ => return Err(parse_err(path, "grid features need height and width")),
            };
            if height * width != file.dims.n_states {
                return Err(parse_err(path, "grid dimensions disagree with n_states"));
            }
            FeatureMap::GridRowCol { height, width }
        }
        Some(other) => {
            return Err(parse_err(path, format!("unknown feature map {other:?}")))
        }
    };
    let hidden = match kind {
        UtilityKind::Mlp => file
            .dims
            .hidden
            .ok_or_else(|| parse_err(path, "mlp checkpoint needs dims.hidden"))?,
        _ => 0,
    };
    ParametricUtility::with_theta(kind, feature_map, hidden, file.theta)
}

pub fn save_utility_model(path: &Path, model: &ParametricUtility, seed: u64) -> Result<()> {
    let kind = match model.kind {
        UtilityKind::Tabular => "tabular",
        UtilityKind::Linear => "linear",
        UtilityKind::Mlp => "mlp",
    };
    let (features, height, width) = match &model.feature_map {
        FeatureMap::OneHot { .. } => (None, None, None),
        FeatureMap::GridRowCol { height, width } => {
            (Some("grid".to_string()), Some(*height), Some(*width))
        }
    };
    let file = CheckpointFile {
        kind: kind.to_string(),
        dims: CheckpointDims {
            n_states: model.n_states(),
            features,
            height,
            width,
            hidden: (model.kind == UtilityKind::Mlp).then_some(model.hidden),
        },
        theta: model.theta.clone(),
        seed,
    };
    std::fs::write(path, serde_json::to_string_pretty(&file).expect("serializable"))?;
    Ok(())
}

/// Read a state-utility vector: either a bare JSON array `[u_0, .., u_S-1]`
/// or a model checkpoint (evaluated at every state).
pub fn load_utility_values(path: &Path) -> Result<Array1<f64>> {
    let text = std::fs::read_to_string(path)?;
    if let Ok(values) = serde_json::from_str::<Vec<f64>>(&text) {
        return Ok(Array1::from_vec(values));
    }
    let model = load_utility_model(path)?;
    Ok(model.evaluate_all())
}
