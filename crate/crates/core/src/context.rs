//! Matrix features and their discretization into a state index.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{cond_2_exact, condest_1, norm_inf, DenseMatrix};

/// Floor applied to the condition estimate before taking logs.
pub const DELTA_COND: f64 = 1e-16;
/// Floor applied to the infinity norm before taking logs.
pub const DELTA_NORM: f64 = 1e-16;

/// Log-scale features of a system: `log10 kappa(A)` and `log10 ||A||_inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Context {
    pub phi1: f64,
    pub phi2: f64,
}

impl Context {
    /// The condition number the features were built from.
    pub fn kappa(&self) -> f64 {
        10f64.powf(self.phi1)
    }

    pub fn norm_inf(&self) -> f64 {
        10f64.powf(self.phi2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionMethod {
    /// Hager–Higham 1-norm estimate.
    #[default]
    Estimate1,
    /// Exact 2-norm condition number from an SVD; for small matrices.
    ExactSvd2,
}

pub fn extract_context(a: &DenseMatrix) -> Context {
    extract_context_with(a, ConditionMethod::Estimate1)
}

pub fn extract_context_with(a: &DenseMatrix, method: ConditionMethod) -> Context {
    let kappa = match method {
        ConditionMethod::Estimate1 => condest_1(a),
        ConditionMethod::ExactSvd2 => cond_2_exact(a),
    };
    // A singular matrix gives +inf; cap at the largest finite value so the
    // feature stays finite and clips into the top bin.
    let kappa = if kappa.is_nan() { f64::MAX } else { kappa.min(f64::MAX) };
    Context {
        phi1: kappa.max(DELTA_COND).log10(),
        phi2: norm_inf(a).max(DELTA_NORM).log10(),
    }
}

/// Uniform bins over `[lo, hi]` for each feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    pub lo1: f64,
    pub hi1: f64,
    pub n1: usize,
    pub lo2: f64,
    pub hi2: f64,
    pub n2: usize,
}

impl BinSpec {
    pub fn new(lo1: f64, hi1: f64, n1: usize, lo2: f64, hi2: f64, n2: usize) -> Result<Self> {
        let spec = Self {
            lo1,
            hi1,
            n1,
            lo2,
            hi2,
            n2,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n1 == 0 || self.n2 == 0 {
            return Err(Error::Config("bin counts must be at least 1".into()));
        }
        let ok = |lo: f64, hi: f64| lo.is_finite() && hi.is_finite() && lo <= hi;
        if !ok(self.lo1, self.hi1) || !ok(self.lo2, self.hi2) {
            return Err(Error::Config(format!("invalid bin ranges {self:?}")));
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.n1 * self.n2
    }

    /// Centre of bin `(b1, b2)` in feature space.
    pub fn center(&self, b1: usize, b2: usize) -> Context {
        let mid = |lo: f64, hi: f64, n: usize, b: usize| lo + (b as f64 + 0.5) * (hi - lo) / n as f64;
        Context {
            phi1: mid(self.lo1, self.hi1, self.n1, b1),
            phi2: mid(self.lo2, self.hi2, self.n2, b2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DiscreteState {
    pub b1: usize,
    pub b2: usize,
    pub index: usize,
}

impl DiscreteState {
    pub fn from_bins(b1: usize, b2: usize, spec: &BinSpec) -> Self {
        Self {
            b1,
            b2,
            index: b1 * spec.n2 + b2,
        }
    }

    pub fn from_index(index: usize, spec: &BinSpec) -> Self {
        Self {
            b1: index / spec.n2,
            b2: index % spec.n2,
            index,
        }
    }
}

/// Fits bin ranges to the min/max of the training features.
pub fn fit_bins(train: &[Context], n1: usize, n2: usize) -> Result<BinSpec> {
    if train.is_empty() {
        return Err(Error::Config("cannot fit bins without training contexts".into()));
    }
    let range = |f: fn(&Context) -> f64| {
        train.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        })
    };
    let (lo1, hi1) = range(|c| c.phi1);
    let (lo2, hi2) = range(|c| c.phi2);
    BinSpec::new(lo1, hi1, n1, lo2, hi2, n2)
}

pub fn bin_index(phi: f64, lo: f64, hi: f64, n: usize) -> usize {
    if !(hi > lo) || phi.is_nan() {
        return 0;
    }
    let raw = ((phi - lo) / (hi - lo) * n as f64).floor();
    raw.clamp(0.0, (n - 1) as f64) as usize
}

pub fn discretize(ctx: &Context, spec: &BinSpec) -> DiscreteState {
    let b1 = bin_index(ctx.phi1, spec.lo1, spec.hi1, spec.n1);
    let b2 = bin_index(ctx.phi2, spec.lo2, spec.hi2, spec.n2);
    DiscreteState::from_bins(b1, b2, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec() -> BinSpec {
        BinSpec::new(1.0, 9.0, 10, -1.0, 3.0, 10).unwrap()
    }

    #[test]
    fn identity_features() {
        let c = extract_context(&DenseMatrix::identity(6));
        assert_eq!(c, Context { phi1: 0.0, phi2: 0.0 });
    }

    #[test]
    fn diagonal_features() {
        let c = extract_context(&DenseMatrix::from_diagonal(&[1.0, 1e-4]));
        assert!((c.phi1 - 4.0).abs() < 1e-12);
        assert_eq!(c.phi2, 0.0);
        let e = extract_context_with(&DenseMatrix::from_diagonal(&[1.0, 1e-4]), ConditionMethod::ExactSvd2);
        assert!((e.phi1 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn singular_matrix_is_finite() {
        let c = extract_context(&DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]));
        assert!(c.phi1.is_finite());
        assert_eq!(discretize(&c, &spec()).b1, 9);
    }

    #[test]
    fn binning_examples() {
        assert_eq!(bin_index(1.0, 1.0, 9.0, 10), 0);
        assert_eq!(bin_index(5.0, 1.0, 9.0, 10), 5);
        assert_eq!(bin_index(9.0, 1.0, 9.0, 10), 9);
        assert_eq!(bin_index(-50.0, 1.0, 9.0, 10), 0);
        assert_eq!(bin_index(50.0, 1.0, 9.0, 10), 9);
        assert_eq!(bin_index(3.0, 2.0, 2.0, 10), 0);
        let s = DiscreteState::from_bins(3, 7, &spec());
        assert_eq!(s.index, 37);
        assert_eq!(DiscreteState::from_index(37, &spec()), s);
    }

    #[test]
    fn fitting_uses_min_and_max() {
        let ctxs = [
            Context { phi1: 2.0, phi2: 0.5 },
            Context { phi1: 7.5, phi2: 0.1 },
            Context { phi1: 4.0, phi2: 0.9 },
        ];
        let b = fit_bins(&ctxs, 10, 10).unwrap();
        assert_eq!((b.lo1, b.hi1, b.lo2, b.hi2), (2.0, 7.5, 0.1, 0.9));
        assert!(fit_bins(&[], 10, 10).is_err());
        let single = fit_bins(&ctxs[..1], 10, 10).unwrap();
        assert_eq!(discretize(&ctxs[1], &single).index, 0);
    }

    proptest! {
        #[test]
        fn discretize_is_total(p1 in -1e6f64..1e6, p2 in -1e6f64..1e6) {
            let s = spec();
            let d = discretize(&Context { phi1: p1, phi2: p2 }, &s);
            prop_assert!(d.b1 < s.n1 && d.b2 < s.n2 && d.index < s.n_states());
        }

        #[test]
        fn discretize_is_monotone(a in -5.0f64..15.0, b in -5.0f64..15.0) {
            let s = spec();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let x = discretize(&Context { phi1: lo, phi2: lo }, &s);
            let y = discretize(&Context { phi1: hi, phi2: hi }, &s);
            prop_assert!(x.b1 <= y.b1 && x.b2 <= y.b2);
        }

        #[test]
        fn centers_round_trip(b1 in 0usize..10, b2 in 0usize..10) {
            let s = spec();
            let d = discretize(&s.center(b1, b2), &s);
            prop_assert_eq!((d.b1, d.b2), (b1, b2));
        }
    }
}
