//! The reduced action space of monotone precision 4-tuples.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fpemu::Format;
use crate::gmres_ir::PrecisionAction;

/// Number of steps in a precision action.
pub const STEPS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSpace {
    formats: Vec<Format>,
    actions: Vec<PrecisionAction>,
    subsample_fraction: Option<f64>,
}

impl ActionSpace {
    pub fn formats(&self) -> &[Format] {
        &self.formats
    }

    pub fn actions(&self) -> &[PrecisionAction] {
        &self.actions
    }

    pub fn subsample_fraction(&self) -> Option<f64> {
        self.subsample_fraction
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn get(&self, i: usize) -> PrecisionAction {
        self.actions[i]
    }

    pub fn index_of(&self, a: &PrecisionAction) -> Option<usize> {
        self.actions.iter().position(|x| x == a)
    }

    /// The all-highest-precision action.
    pub fn safest(&self) -> PrecisionAction {
        PrecisionAction::uniform(*self.formats.last().expect("non-empty format list"))
    }

    /// Rebuilds a space from an explicit action list (used when loading a
    /// saved table). Actions must be monotone and strictly increasing.
    pub fn from_actions(
        formats: Vec<Format>,
        actions: Vec<PrecisionAction>,
        subsample_fraction: Option<f64>,
    ) -> Result<Self> {
        check_formats(&formats)?;
        for a in &actions {
            if !a.is_monotone() {
                return Err(Error::NonMonotoneAction(a.to_string()));
            }
            if a.components().iter().any(|c| !formats.contains(c)) {
                return Err(Error::Config(format!("action {a} uses a format outside {formats:?}")));
            }
        }
        if actions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("actions must be sorted and distinct".into()));
        }
        Ok(Self {
            formats,
            actions,
            subsample_fraction,
        })
    }
}

fn check_formats(formats: &[Format]) -> Result<()> {
    if formats.is_empty() {
        return Err(Error::Config("format list is empty".into()));
    }
    if formats.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!(
            "formats must be strictly increasing in precision: {formats:?}"
        )));
    }
    Ok(())
}

/// Multiset coefficient `C(m + k - 1, k)`.
pub fn multiset_count(m: usize, k: usize) -> usize {
    if m == 0 {
        return usize::from(k == 0);
    }
    let n = m + k - 1;
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// All nondecreasing 4-tuples over `formats`, in lexicographic order.
pub fn enumerate_actions(formats: &[Format]) -> Result<ActionSpace> {
    check_formats(formats)?;
    let m = formats.len();
    let mut actions = Vec::with_capacity(multiset_count(m, STEPS));
    for i in 0..m {
        for j in i..m {
            for k in j..m {
                for l in k..m {
                    actions.push(PrecisionAction {
                        factor: formats[i],
                        working: formats[j],
                        gmres: formats[k],
                        residual: formats[l],
                    });
                }
            }
        }
    }
    Ok(ActionSpace {
        formats: formats.to_vec(),
        actions,
        subsample_fraction: None,
    })
}

/// Seeded uniform subsample of `ceil(fraction * |A|)` actions that always
/// keeps the all-highest-precision action. Order is preserved.
pub fn subsample(space: &ActionSpace, fraction: f64, seed: u64) -> Result<ActionSpace> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config(format!("subsample fraction {fraction} not in (0,1]")));
    }
    if fraction == 1.0 {
        return Ok(space.clone());
    }
    let keep = ((fraction * space.len() as f64).ceil() as usize).max(1);
    let safest = space.safest();
    let others: Vec<usize> = (0..space.len()).filter(|&i| space.get(i) != safest).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<usize> = sample(&mut rng, others.len(), keep - 1)
        .into_iter()
        .map(|i| others[i])
        .collect();
    chosen.extend(space.index_of(&safest));
    chosen.sort_unstable();
    Ok(ActionSpace {
        formats: space.formats.clone(),
        actions: chosen.into_iter().map(|i| space.get(i)).collect(),
        subsample_fraction: Some(fraction),
    })
}

/// Total significand bits over the four steps; the tie-break key.
pub fn action_cost_bits(a: &PrecisionAction) -> u32 {
    a.components().iter().map(|f| f.significand_bits()).sum()
}

/// Formats used in the experiments: BF16, TF32, FP32, FP64.
pub fn default_formats() -> Vec<Format> {
    vec![Format::Bf16, Format::Tf32, Format::Fp32, Format::Fp64]
}
