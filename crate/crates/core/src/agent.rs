//! Tabular contextual-bandit agent.
//!
//! One row per discrete state, one column per action. Actions are chosen
//! epsilon-greedily during training and greedily at inference; the value of
//! the chosen cell moves toward the observed reward by a fixed step `alpha`.

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::actionspace::{action_cost_bits, ActionSpace};
use crate::context::{discretize, BinSpec, Context, DiscreteState};
use crate::error::{Error, Result};
use crate::fpemu::Format;
use crate::gmres_ir::PrecisionAction;

pub const FORMAT_VERSION: u32 = 1;

/// Linear decay `eps_t = max(eps_min, 1 - t / T)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub episodes: usize,
    pub eps_min: f64,
}

impl EpsilonSchedule {
    pub fn new(episodes: usize, eps_min: f64) -> Result<Self> {
        if episodes == 0 || !(0.0..=1.0).contains(&eps_min) {
            return Err(Error::Config(format!(
                "epsilon schedule needs T >= 1 and eps_min in [0,1], got T={episodes}, eps_min={eps_min}"
            )));
        }
        Ok(Self { episodes, eps_min })
    }
}

pub fn epsilon_at(t: usize, sched: &EpsilonSchedule) -> f64 {
    sched.eps_min.max(1.0 - t as f64 / sched.episodes as f64)
}

/// What greedy inference does in a state that was never visited in training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnvisitedFallback {
    /// Use the row of the nearest visited state (bin-grid distance).
    #[default]
    NearestVisited,
    /// Plain argmax on the all-zero row, i.e. the cheapest action.
    TieBreak,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    values: Vec<f64>,
    visits: Vec<u64>,
    bins: BinSpec,
    space: ActionSpace,
    alpha: f64,
    schedule: EpsilonSchedule,
    gamma: f64,
    seed: u64,
}

impl QTable {
    pub fn new(
        bins: BinSpec,
        space: ActionSpace,
        alpha: f64,
        schedule: EpsilonSchedule,
        seed: u64,
    ) -> Result<Self> {
        bins.validate()?;
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Config(format!("learning rate {alpha} not in (0,1]")));
        }
        if space.is_empty() {
            return Err(Error::Config("empty action space".into()));
        }
        let cells = bins.n_states() * space.len();
        Ok(Self {
            values: vec![0.0; cells],
            visits: vec![0; cells],
            bins,
            space,
            alpha,
            schedule,
            gamma: 0.0,
            seed,
        })
    }

    /// Records a discount factor for bookkeeping; the one-step update never uses it.
    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn bins(&self) -> &BinSpec {
        &self.bins
    }

    pub fn space(&self) -> &ActionSpace {
        &self.space
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn schedule(&self) -> &EpsilonSchedule {
        &self.schedule
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn n_states(&self) -> usize {
        self.bins.n_states()
    }

    pub fn n_actions(&self) -> usize {
        self.space.len()
    }

    pub fn value(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.n_actions() + action]
    }

    pub fn visits(&self, state: usize, action: usize) -> u64 {
        self.visits[state * self.n_actions() + action]
    }

    pub fn row(&self, state: usize) -> &[f64] {
        let m = self.n_actions();
        &self.values[state * m..(state + 1) * m]
    }

    pub fn set_value(&mut self, state: usize, action: usize, v: f64) {
        let m = self.n_actions();
        self.values[state * m + action] = v;
    }

    pub fn state_visits(&self, state: usize) -> u64 {
        let m = self.n_actions();
        self.visits[state * m..(state + 1) * m].iter().sum()
    }

    pub fn discretize(&self, ctx: &Context) -> DiscreteState {
        discretize(ctx, &self.bins)
    }

    /// Argmax of a row; ties go to the fewest total significand bits, then
    /// the lowest index.
    pub fn greedy(&self, state: usize) -> usize {
        let row = self.row(state);
        let mut best = 0;
        for i in 1..row.len() {
            let better = row[i] > row[best]
                || (row[i] == row[best]
                    && action_cost_bits(&self.space.get(i)) < action_cost_bits(&self.space.get(best)));
            if better {
                best = i;
            }
        }
        best
    }

    /// One-step update `Q <- Q + alpha (R - Q)`; returns the prediction
    /// error `R - Q` before the update.
    pub fn update(&mut self, state: &DiscreteState, action: usize, reward: f64) -> f64 {
        assert!(reward.is_finite(), "reward must be finite");
        let m = self.n_actions();
        let cell = state.index * m + action;
        let delta = reward - self.values[cell];
        self.values[cell] += self.alpha * delta;
        self.visits[cell] += 1;
        delta
    }

    /// Nearest state (in bin units) with at least one visit.
    pub fn nearest_visited(&self, state: &DiscreteState) -> Option<usize> {
        let mut best: Option<(usize, usize)> = None;
        for idx in 0..self.n_states() {
            if self.state_visits(idx) == 0 {
                continue;
            }
            let s = DiscreteState::from_index(idx, &self.bins);
            let d = s.b1.abs_diff(state.b1).pow(2) + s.b2.abs_diff(state.b2).pow(2);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, idx));
            }
        }
        best.map(|(_, idx)| idx)
    }

    /// Greedy action for a new system.
    pub fn infer(&self, ctx: &Context) -> PrecisionAction {
        self.infer_with(ctx, UnvisitedFallback::default())
    }

    pub fn infer_with(&self, ctx: &Context, fallback: UnvisitedFallback) -> PrecisionAction {
        let s = self.discretize(ctx);
        let row = match fallback {
            UnvisitedFallback::NearestVisited if self.state_visits(s.index) == 0 => {
                self.nearest_visited(&s).unwrap_or(s.index)
            }
            _ => s.index,
        };
        self.space.get(self.greedy(row))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(&QTableFile::from(self))
            .map_err(|e| Error::MalformedTable(e.to_string()))?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::MalformedTable(e.to_string()))?;
        let version = raw
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::MalformedTable("missing format_version".into()))?;
        if version != FORMAT_VERSION as u64 {
            return Err(Error::VersionMismatch {
                found: version as u32,
                expected: FORMAT_VERSION,
            });
        }
        let file: QTableFile =
            serde_json::from_value(raw).map_err(|e| Error::MalformedTable(e.to_string()))?;
        file.into_table()
    }
}

/// On-disk layout of a trained table.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QTableFile {
    format_version: u32,
    bins: BinSpec,
    formats: Vec<String>,
    actions: Vec<String>,
    subsample_fraction: Option<f64>,
    alpha: f64,
    schedule: EpsilonSchedule,
    gamma: f64,
    seed: u64,
    values: Vec<f64>,
    visit_counts: Vec<u64>,
}

impl From<&QTable> for QTableFile {
    fn from(q: &QTable) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            bins: q.bins,
            formats: q.space.formats().iter().map(|f| f.to_string()).collect(),
            actions: q.space.actions().iter().map(|a| a.to_string()).collect(),
            subsample_fraction: q.space.subsample_fraction(),
            alpha: q.alpha,
            schedule: q.schedule,
            gamma: q.gamma,
            seed: q.seed,
            values: q.values.clone(),
            visit_counts: q.visits.clone(),
        }
    }
}

impl QTableFile {
    fn into_table(self) -> Result<QTable> {
        let formats = self
            .formats
            .iter()
            .map(|s| s.parse::<Format>())
            .collect::<Result<Vec<_>>>()?;
        let actions = self
            .actions
            .iter()
            .map(|s| s.parse::<PrecisionAction>())
            .collect::<Result<Vec<_>>>()?;
        let space = ActionSpace::from_actions(formats, actions, self.subsample_fraction)
            .map_err(|e| Error::MalformedTable(e.to_string()))?;
        self.bins
            .validate()
            .map_err(|e| Error::MalformedTable(e.to_string()))?;
        let cells = self.bins.n_states() * space.len();
        if self.values.len() != cells || self.visit_counts.len() != cells {
            return Err(Error::ShapeMismatch(format!(
                "{} states x {} actions needs {cells} cells, file has {} values and {} counts",
                self.bins.n_states(),
                space.len(),
                self.values.len(),
                self.visit_counts.len()
            )));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::MalformedTable("non-finite q-value".into()));
        }
        let mut q = QTable::new(self.bins, space, self.alpha, self.schedule, self.seed)
            .map_err(|e| Error::MalformedTable(e.to_string()))?;
        q.values = self.values;
        q.visits = self.visit_counts;
        q.gamma = self.gamma;
        Ok(q)
    }
}

/// Epsilon-greedy choice. One uniform draw decides explore/exploit; a
/// second picks the action when exploring.
pub fn select_action<R: Rng + ?Sized>(
    q: &QTable,
    state: &DiscreteState,
    eps: f64,
    rng: &mut R,
) -> usize {
    if rng.random::<f64>() < eps {
        rng.random_range(0..q.n_actions())
    } else {
        q.greedy(state.index)
    }
}
