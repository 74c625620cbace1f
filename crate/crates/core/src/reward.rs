//! Multi-objective reward: precision savings, solution accuracy and an
//! iteration penalty.
//!
//! `R = w2 * f_precision + w1 * f_accuracy - w3 * f_penalty`

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::context::Context;
use crate::error::{Error, Result};
use crate::fpemu::Format;
use crate::gmres_ir::{PrecisionAction, SolveReport};
use crate::kernels::{norm_inf, norm_inf_vec, DenseMatrix};

/// Error floor inside the accuracy logarithms.
pub const C1: f64 = 1e-10;
/// Magnitude of the accuracy value assigned to failed or diverged solves.
pub const C2: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    /// accuracy
    pub w1: f64,
    /// precision
    pub w2: f64,
    /// iteration penalty
    pub w3: f64,
}

impl RewardWeights {
    pub const W1: RewardWeights = RewardWeights {
        w1: 1.0,
        w2: 0.1,
        w3: 1.0,
    };
    pub const W2: RewardWeights = RewardWeights {
        w1: 1.0,
        w2: 1.0,
        w3: 1.0,
    };

    pub fn validate(&self) -> Result<()> {
        if self.w1 > 0.0 && self.w2 > 0.0 && self.w3 >= 0.0 {
            Ok(())
        } else {
            Err(Error::Config(format!("reward weights {self:?} need w1, w2 > 0 and w3 >= 0")))
        }
    }
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self::W1
    }
}

impl FromStr for RewardWeights {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "W1" => Ok(Self::W1),
            "W2" => Ok(Self::W2),
            _ => Err(Error::UnknownPreset(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub weights: RewardWeights,
    /// Use `+C2` for diverged solves instead of `-C2`.
    pub literal_c2_sign: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub f_precision: f64,
    pub f_accuracy: f64,
    pub f_penalty: f64,
    pub total: f64,
    pub failed: bool,
}

/// `sum_p t(FP64) / (t(p) * (1 + log10(max(kappa, 1))))` over the four steps.
pub fn precision_term(a: &PrecisionAction, kappa: f64) -> f64 {
    let t64 = Format::Fp64.significand_bits() as f64;
    let scale = 1.0 + kappa.max(1.0).log10();
    a.components()
        .iter()
        .map(|p| t64 / (p.significand_bits() as f64 * scale))
        .sum()
}

/// Accuracy value from the two error measures; `None` signals the failure
/// branch (an error above 1 or non-finite).
pub fn accuracy_from_errors(err_distance: f64, err_normalized: f64) -> Option<f64> {
    let bad = |e: f64| !e.is_finite() || e > 1.0;
    if bad(err_distance) || bad(err_normalized) {
        return None;
    }
    Some(-err_distance.max(C1).log10() - err_normalized.max(C1).log10())
}

fn failure_value(literal_sign: bool) -> f64 {
    if literal_sign {
        C2
    } else {
        -C2
    }
}

/// Returns `(f_accuracy, failed)`.
pub fn accuracy_term(
    x_solve: &[f64],
    x_true: &[f64],
    a: &DenseMatrix,
    b: &[f64],
    literal_c2_sign: bool,
) -> (f64, bool) {
    let xt_norm = norm_inf_vec(x_true);
    let diff = x_solve
        .iter()
        .zip(x_true)
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max);
    let err_distance = if x_solve.iter().all(|v| v.is_finite()) {
        diff / xt_norm
    } else {
        f64::INFINITY
    };
    let err_normalized = err_distance / (norm_inf(a) * xt_norm + norm_inf_vec(b));
    match accuracy_from_errors(err_distance, err_normalized) {
        Some(v) => (v, false),
        None => (failure_value(literal_c2_sign), true),
    }
}

/// `log2(max(T_iter, 1))`.
pub fn penalty_term(gmres_iters_total: usize) -> f64 {
    (gmres_iters_total.max(1) as f64).log2()
}

pub fn combine(f_precision: f64, f_accuracy: f64, f_penalty: f64, w: &RewardWeights) -> f64 {
    w.w2 * f_precision + w.w1 * f_accuracy - w.w3 * f_penalty
}

/// Reward for one solve. `kappa` comes from the context features.
pub fn total_reward(
    report: &SolveReport,
    ctx: &Context,
    a: &DenseMatrix,
    b: &[f64],
    x_true: &[f64],
    cfg: &RewardConfig,
) -> RewardBreakdown {
    let f_precision = precision_term(&report.action, ctx.kappa());
    let (f_accuracy, acc_failed) = if report.failed() {
        (failure_value(cfg.literal_c2_sign), true)
    } else {
        accuracy_term(&report.x, x_true, a, b, cfg.literal_c2_sign)
    };
    let f_penalty = penalty_term(report.gmres_iters_total);
    RewardBreakdown {
        f_precision,
        f_accuracy,
        f_penalty,
        total: combine(f_precision, f_accuracy, f_penalty, &cfg.weights),
        failed: acc_failed,
    }
}
