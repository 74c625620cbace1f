//! Mixed-precision GMRES-based iterative refinement.
//!
//! The four precisions of a [`PrecisionAction`] tag the steps of the solver:
//! LU factorization and initial solve (`u_f`), residual (`u_r`), the
//! left-preconditioned GMRES correction solve (`u_g`) and the solution
//! update (`u`).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::fpemu::{quantize_matrix, quantize_vector, Arith, Format, Subnormals};
use crate::kernels::{
    lu_factor, lu_solve, matvec, norm_inf, norm_inf_vec, residual, DenseMatrix,
    FactorFailureReason, LuFactors,
};

/// Precisions for the four solver steps, ordered `(u_f, u, u_g, u_r)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PrecisionAction {
    pub factor: Format,
    pub working: Format,
    pub gmres: Format,
    pub residual: Format,
}

impl PrecisionAction {
    /// Checked constructor enforcing `u_f <= u <= u_g <= u_r`.
    pub fn new(factor: Format, working: Format, gmres: Format, residual: Format) -> Result<Self> {
        let a = Self {
            factor,
            working,
            gmres,
            residual,
        };
        if a.is_monotone() {
            Ok(a)
        } else {
            Err(Error::NonMonotoneAction(a.to_string()))
        }
    }

    pub const fn uniform(f: Format) -> Self {
        Self {
            factor: f,
            working: f,
            gmres: f,
            residual: f,
        }
    }

    pub fn components(&self) -> [Format; 4] {
        [self.factor, self.working, self.gmres, self.residual]
    }

    pub fn from_components(c: [Format; 4]) -> Result<Self> {
        Self::new(c[0], c[1], c[2], c[3])
    }

    pub fn is_monotone(&self) -> bool {
        let c = self.components();
        c.windows(2).all(|w| w[0] <= w[1])
    }

    /// Number of components using `f`.
    pub fn count(&self, f: Format) -> usize {
        self.components().iter().filter(|&&c| c == f).count()
    }
}

impl fmt::Display for PrecisionAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}|{}|{}|{}",
            self.factor, self.working, self.gmres, self.residual
        )
    }
}

impl FromStr for PrecisionAction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('|').collect();
        if parts.len() != 4 {
            return Err(Error::InvalidAction(s.to_string()));
        }
        let mut c = [Format::Fp64; 4];
        for (slot, p) in c.iter_mut().zip(parts) {
            *slot = p.parse()?;
        }
        Self::from_components(c)
    }
}

impl Serialize for PrecisionAction {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PrecisionAction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Stopping and inner-solver controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StopConfig {
    /// Convergence tolerance on `||z_i|| / ||x_i||`, floored at `u(u)`.
    pub tau_conv: f64,
    /// Stagnation threshold on `||z_i|| / ||z_{i-1}||`.
    pub stagnation: f64,
    pub i_max: usize,
    /// Inner tolerance relative to the initial preconditioned residual.
    pub gmres_rtol: f64,
    /// Inner iteration cap; `None` means `min(n, 100)`.
    pub gmres_maxit: Option<usize>,
    pub subnormals: Subnormals,
}

impl Default for StopConfig {
    fn default() -> Self {
        Self {
            tau_conv: 1e-6,
            stagnation: 0.9,
            i_max: 10,
            gmres_rtol: 1e-4,
            gmres_maxit: None,
            subnormals: Subnormals::Gradual,
        }
    }
}

impl StopConfig {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: f64| v > 0.0 && v < 1.0;
        if !in_unit(self.tau_conv) {
            return Err(Error::Config(format!("tau_conv {} not in (0,1)", self.tau_conv)));
        }
        if !in_unit(self.stagnation) {
            return Err(Error::Config(format!(
                "stagnation ratio {} not in (0,1)",
                self.stagnation
            )));
        }
        if !in_unit(self.gmres_rtol) {
            return Err(Error::Config(format!("gmres_rtol {} not in (0,1)", self.gmres_rtol)));
        }
        if self.i_max == 0 || self.gmres_maxit == Some(0) {
            return Err(Error::Config("iteration caps must be at least 1".into()));
        }
        Ok(())
    }

    pub fn inner_cap(&self, n: usize) -> usize {
        self.gmres_maxit.unwrap_or(100).min(n).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    Stagnated,
    MaxIter,
    Failed,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Converged => "converged",
            SolveStatus::Stagnated => "stagnated",
            SolveStatus::MaxIter => "max_iter",
            SolveStatus::Failed => "failed",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    Factorization(FactorFailureReason),
    NonFiniteIterate,
    NonFiniteKrylov,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub x: Vec<f64>,
    pub status: SolveStatus,
    pub failure: Option<FailureReason>,
    pub outer_iters: usize,
    pub gmres_iters_total: usize,
    /// Inner iteration count of each outer step.
    pub inner_iters: Vec<usize>,
    pub ferr: f64,
    pub nbe: f64,
    pub action: PrecisionAction,
}

impl SolveReport {
    pub fn failed(&self) -> bool {
        self.status == SolveStatus::Failed
    }
}

/// Result of one inner GMRES solve.
#[derive(Debug, Clone, PartialEq)]
pub struct GmresOutcome {
    pub z: Vec<f64>,
    pub iters: usize,
    pub converged: bool,
    /// A non-finite value appeared; `z` is built from the columns before it.
    pub non_finite: bool,
}

fn dot(a: &[f64], b: &[f64], ar: Arith) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0, |acc, (&x, &y)| ar.add(acc, ar.mul(x, y)))
}

fn nrm2(a: &[f64], ar: Arith) -> f64 {
    ar.sqrt(dot(a, a, ar))
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Unrestarted GMRES on `M^-1 A z = M^-1 r` with `M = LU`, every operation
/// rounded to `fmt_g`. Arnoldi uses modified Gram-Schmidt and the least
/// squares problem is updated with Givens rotations.
pub fn gmres_left_preconditioned(
    a: &DenseMatrix,
    factors: &LuFactors,
    r: &[f64],
    fmt_g: impl Into<Arith>,
    cfg: &StopConfig,
) -> GmresOutcome {
    let ar = fmt_g.into();
    let n = r.len();
    let a_g = quantize_matrix(a, ar);
    let maxit = cfg.inner_cap(n);

    let zero = |non_finite: bool| GmresOutcome {
        z: vec![0.0; n],
        iters: 0,
        converged: !non_finite,
        non_finite,
    };

    let r0 = lu_solve(factors, &quantize_vector(r, ar), ar);
    let beta = nrm2(&r0, ar);
    if !beta.is_finite() || !all_finite(&r0) {
        return zero(true);
    }
    if beta == 0.0 {
        return zero(false);
    }

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(maxit + 1);
    basis.push(r0.iter().map(|&v| ar.div(v, beta)).collect());
    // column-major upper Hessenberg, already rotated to triangular form
    let mut h: Vec<Vec<f64>> = Vec::with_capacity(maxit);
    let mut cs: Vec<f64> = Vec::with_capacity(maxit);
    let mut sn: Vec<f64> = Vec::with_capacity(maxit);
    let mut g = vec![0.0; maxit + 1];
    g[0] = beta;
    let target = cfg.gmres_rtol * beta;

    let mut cols = 0;
    let mut converged = false;
    let mut non_finite = false;
    for j in 0..maxit {
        let av = matvec(&a_g, &basis[j], ar);
        let mut w = lu_solve(factors, &av, ar);
        let mut col = vec![0.0; j + 2];
        for (i, v) in basis.iter().enumerate().take(j + 1) {
            let hij = dot(&w, v, ar);
            for (wk, &vk) in w.iter_mut().zip(v) {
                *wk = ar.sub(*wk, ar.mul(hij, vk));
            }
            col[i] = hij;
        }
        let h_next = nrm2(&w, ar);
        col[j + 1] = h_next;
        if !h_next.is_finite() || !all_finite(&col) || !all_finite(&w) {
            non_finite = true;
            break;
        }

        for i in 0..j {
            let t = ar.add(ar.mul(cs[i], col[i]), ar.mul(sn[i], col[i + 1]));
            col[i + 1] = ar.sub(ar.mul(cs[i], col[i + 1]), ar.mul(sn[i], col[i]));
            col[i] = t;
        }
        let denom = ar.sqrt(ar.add(ar.mul(col[j], col[j]), ar.mul(h_next, h_next)));
        if denom == 0.0 || !denom.is_finite() {
            // singular least-squares column: keep the previous iterate
            non_finite = !denom.is_finite();
            converged = denom == 0.0;
            break;
        }
        let c = ar.div(col[j], denom);
        let s = ar.div(h_next, denom);
        col[j] = denom;
        col.truncate(j + 1);
        g[j + 1] = ar.mul(-s, g[j]);
        g[j] = ar.mul(c, g[j]);
        cs.push(c);
        sn.push(s);
        h.push(col);
        cols = j + 1;

        if g[j + 1].abs() <= target || h_next == 0.0 {
            converged = true;
            break;
        }
        basis.push(w.iter().map(|&v| ar.div(v, h_next)).collect());
    }

    // back substitution on the rotated triangular system
    let mut y = vec![0.0; cols];
    for i in (0..cols).rev() {
        let mut acc = g[i];
        for k in i + 1..cols {
            acc = ar.sub(acc, ar.mul(h[k][i], y[k]));
        }
        y[i] = ar.div(acc, h[i][i]);
    }
    let mut z = vec![0.0; n];
    for (yi, v) in y.iter().zip(&basis) {
        for (zk, &vk) in z.iter_mut().zip(v) {
            *zk = ar.add(*zk, ar.mul(*yi, vk));
        }
    }
    if !all_finite(&z) {
        non_finite = true;
    }
    GmresOutcome {
        z,
        iters: cols,
        converged,
        non_finite,
    }
}

/// Normwise relative forward error and backward error, at full precision.
pub fn compute_errors(x: &[f64], x_true: &[f64], a: &DenseMatrix, b: &[f64]) -> (f64, f64) {
    if !all_finite(x) {
        return (f64::INFINITY, f64::INFINITY);
    }
    let diff: Vec<f64> = x.iter().zip(x_true).map(|(p, q)| p - q).collect();
    let ferr = norm_inf_vec(&diff) / norm_inf_vec(x_true);
    let r: Vec<f64> = a.mul_vec(x).iter().zip(b).map(|(ax, bi)| bi - ax).collect();
    let nbe = norm_inf_vec(&r) / (norm_inf(a) * norm_inf_vec(x) + norm_inf_vec(b));
    (ferr, nbe)
}

/// Double-precision direct solve used when no ground truth is supplied.
pub fn reference_solution(a: &DenseMatrix, b: &[f64]) -> Option<Vec<f64>> {
    let f = lu_factor(a, Format::Fp64).ok()?;
    let x = lu_solve(&f, b, Format::Fp64);
    all_finite(&x).then_some(x)
}

/// Runs GMRES-IR with the given precisions.
///
/// Errors are measured against `x_true` when given, otherwise against a
/// double-precision direct solve. Numerical trouble is reported through
/// [`SolveStatus::Failed`], never as an `Err`.
pub fn solve_gmres_ir(
    a: &DenseMatrix,
    b: &[f64],
    action: PrecisionAction,
    cfg: &StopConfig,
    x_true: Option<&[f64]>,
) -> SolveReport {
    assert!(a.is_square() && a.n_rows() == b.len(), "solve_gmres_ir: dimension mismatch");
    let n = b.len();
    let arith = |f: Format| Arith::new(f, cfg.subnormals);
    let (ar_f, ar_u, ar_r) = (
        arith(action.factor),
        arith(action.working),
        arith(action.residual),
    );
    let ar_g = arith(action.gmres);

    let reference;
    let x_ref = match x_true {
        Some(x) => Some(x),
        None => {
            reference = reference_solution(a, b);
            reference.as_deref()
        }
    };

    let mut report = SolveReport {
        x: vec![0.0; n],
        status: SolveStatus::Failed,
        failure: None,
        outer_iters: 0,
        gmres_iters_total: 0,
        inner_iters: Vec::new(),
        ferr: f64::INFINITY,
        nbe: f64::INFINITY,
        action,
    };
    let fail = |mut rep: SolveReport, why: FailureReason| {
        rep.status = SolveStatus::Failed;
        rep.failure = Some(why);
        rep.ferr = f64::INFINITY;
        rep.nbe = f64::INFINITY;
        rep
    };

    let factors = match lu_factor(a, ar_f) {
        Ok(f) => f,
        Err(e) => return fail(report, FailureReason::Factorization(e.reason)),
    };
    let x0 = lu_solve(&factors, &quantize_vector(b, ar_f), ar_f);
    let mut x = quantize_vector(&x0, ar_u);
    if !all_finite(&x) {
        return fail(report, FailureReason::NonFiniteIterate);
    }

    let a_r = quantize_matrix(a, ar_r);
    let b_r = quantize_vector(b, ar_r);
    let conv_tol = cfg.tau_conv.max(action.working.unit_roundoff());
    let mut prev_update: Option<f64> = None;
    let status = loop {
        let r = residual(&a_r, &b_r, &quantize_vector(&x, ar_r), ar_r);
        let inner = gmres_left_preconditioned(a, &factors, &r, ar_g, cfg);
        report.outer_iters += 1;
        report.gmres_iters_total += inner.iters;
        report.inner_iters.push(inner.iters);
        if (inner.non_finite && inner.iters == 0) || !all_finite(&inner.z) {
            report.x = x;
            return fail(report, FailureReason::NonFiniteKrylov);
        }

        let z_norm = norm_inf_vec(&inner.z);
        let x_norm = norm_inf_vec(&x);
        let z_u = quantize_vector(&inner.z, ar_u);
        let next: Vec<f64> = x.iter().zip(&z_u).map(|(&xi, &zi)| ar_u.add(xi, zi)).collect();
        if !all_finite(&next) {
            report.x = x;
            return fail(report, FailureReason::NonFiniteIterate);
        }
        x = next;

        let rel_update = if z_norm == 0.0 { 0.0 } else { z_norm / x_norm };
        if rel_update <= conv_tol {
            break SolveStatus::Converged;
        }
        if let Some(prev) = prev_update {
            if z_norm >= cfg.stagnation * prev {
                break SolveStatus::Stagnated;
            }
        }
        if report.outer_iters >= cfg.i_max {
            break SolveStatus::MaxIter;
        }
        prev_update = Some(z_norm);
    };

    report.status = status;
    if let Some(xt) = x_ref {
        let (ferr, nbe) = compute_errors(&x, xt, a, b);
        report.ferr = ferr;
        report.nbe = nbe;
    }
    report.x = x;
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::lu_factor;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn well_conditioned(n: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a.set(i, j, rng.random_range(-1.0..1.0));
            }
            a.set(i, i, a.get(i, i) + 2.0 * (n as f64).sqrt());
        }
        a
    }

    #[test]
    fn action_parse_and_display() {
        let a: PrecisionAction = "BF16|tf32|fp32|FP64".parse().unwrap();
        assert_eq!(a.to_string(), "bf16|tf32|fp32|fp64");
        assert!(matches!(
            "fp64|fp32|fp64|fp64".parse::<PrecisionAction>(),
            Err(Error::NonMonotoneAction(_))
        ));
        assert!(matches!(
            "fp64|fp64".parse::<PrecisionAction>(),
            Err(Error::InvalidAction(_))
        ));
        assert!(matches!(
            "fp8|fp64|fp64|fp64".parse::<PrecisionAction>(),
            Err(Error::UnknownFormat(_))
        ));
    }

    #[test]
    fn gmres_identity_one_step() {
        let a = DenseMatrix::identity(4);
        let f = lu_factor(&a, Format::Fp64).unwrap();
        let r = vec![0.3, -1.1, 2.0, 0.7];
        for fmt in [Format::Fp64, Format::Tf32, Format::Bf16] {
            let out = gmres_left_preconditioned(&a, &f, &r, fmt, &StopConfig::default());
            assert_eq!(out.iters, 1);
            assert!(out.converged);
            let q = quantize_vector(&r, fmt);
            for (z, qv) in out.z.iter().zip(&q) {
                assert!((z - qv).abs() <= 4.0 * fmt.unit_roundoff() * qv.abs(), "{fmt}");
            }
        }
    }

    #[test]
    fn gmres_fp64_converges_within_n() {
        let n = 20;
        let a = well_conditioned(n, 4);
        // a deliberately poor preconditioner so GMRES has work to do
        let f = lu_factor(&a, Format::Bf16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cfg = StopConfig {
            gmres_rtol: 1e-10,
            ..StopConfig::default()
        };
        let out = gmres_left_preconditioned(&a, &f, &r, Format::Fp64, &cfg);
        assert!(out.converged && out.iters <= n);
        let exact = reference_solution(&a, &r).unwrap();
        let err: f64 = out.z.iter().zip(&exact).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err / norm_inf_vec(&exact) < 1e-8);
    }

    #[test]
    fn identity_system_converges_immediately() {
        let a = DenseMatrix::identity(3);
        let b = vec![1.0, 0.0, 0.0];
        let rep = solve_gmres_ir(
            &a,
            &b,
            PrecisionAction::uniform(Format::Fp64),
            &StopConfig::default(),
            Some(&b),
        );
        assert_eq!(rep.status, SolveStatus::Converged);
        assert_eq!(rep.outer_iters, 1);
        assert_eq!(rep.ferr, 0.0);
        assert_eq!(rep.gmres_iters_total, 0);
    }

    #[test]
    fn errors_match_formula() {
        let a = DenseMatrix::from_rows(&[
            vec![2.0, -1.0, 0.0, 0.5],
            vec![1.0, 3.0, -2.0, 0.0],
            vec![0.0, 1.0, 4.0, 1.0],
            vec![-1.0, 0.0, 1.0, 5.0],
        ]);
        let xt = vec![1.0, -2.0, 0.5, 0.25];
        let b = a.mul_vec(&xt);
        let xs = vec![1.001, -2.0, 0.49, 0.25];
        let (ferr, nbe) = compute_errors(&xs, &xt, &a, &b);
        // elementwise evaluation
        let mut dmax: f64 = 0.0;
        let mut tmax: f64 = 0.0;
        for i in 0..4 {
            dmax = dmax.max((xs[i] - xt[i]).abs());
            tmax = tmax.max(xt[i].abs());
        }
        assert!((ferr - dmax / tmax).abs() < 1e-15);
        let mut rmax: f64 = 0.0;
        let mut amax: f64 = 0.0;
        for i in 0..4 {
            let mut s = b[i];
            let mut rs = 0.0;
            for j in 0..4 {
                s -= a.get(i, j) * xs[j];
                rs += a.get(i, j).abs();
            }
            rmax = rmax.max(s.abs());
            amax = amax.max(rs);
        }
        let xs_max = xs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let b_max = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((nbe - rmax / (amax * xs_max + b_max)).abs() < 1e-15);

        // ||x_true|| = 1 and x_solve = 2 x_true
        let unit: Vec<f64> = xt.iter().map(|v| v / 2.0).collect();
        let dbl: Vec<f64> = unit.iter().map(|v| 2.0 * v).collect();
        assert_eq!(compute_errors(&dbl, &unit, &a, &a.mul_vec(&unit)).0, 1.0);
        assert_eq!(
            compute_errors(&[f64::NAN, 0.0, 0.0, 0.0], &xt, &a, &b),
            (f64::INFINITY, f64::INFINITY)
        );
    }

    #[test]
    fn exact_solution_has_tiny_backward_error() {
        let a = well_conditioned(12, 2);
        let xt: Vec<f64> = (0..12).map(|i| (i as f64 - 5.5) / 3.0).collect();
        let b = a.mul_vec(&xt);
        let (ferr, nbe) = compute_errors(&xt, &xt, &a, &b);
        assert_eq!(ferr, 0.0);
        assert!(nbe <= 12.0 * Format::Fp64.unit_roundoff());
    }

    #[test]
    fn inner_iterations_add_up() {
        let a = well_conditioned(15, 6);
        let xt: Vec<f64> = (0..15).map(|i| 1.0 + i as f64).collect();
        let b = a.mul_vec(&xt);
        let action: PrecisionAction = "bf16|fp32|fp64|fp64".parse().unwrap();
        let rep = solve_gmres_ir(&a, &b, action, &StopConfig::default(), Some(&xt));
        assert_eq!(rep.inner_iters.len(), rep.outer_iters);
        assert_eq!(rep.inner_iters.iter().sum::<usize>(), rep.gmres_iters_total);
        assert!(rep.outer_iters <= StopConfig::default().i_max);
        assert_ne!(rep.status, SolveStatus::Failed);
    }

    #[test]
    fn overflowing_factorization_fails_cleanly() {
        let a = DenseMatrix::from_rows(&[vec![1e5, 1.0], vec![1.0, 1.0]]);
        let b = vec![1.0, 1.0];
        let action: PrecisionAction = "fp16|fp64|fp64|fp64".parse().unwrap();
        let rep = solve_gmres_ir(&a, &b, action, &StopConfig::default(), None);
        assert_eq!(rep.status, SolveStatus::Failed);
        assert_eq!(
            rep.failure,
            Some(FailureReason::Factorization(FactorFailureReason::Overflow))
        );
        assert_eq!(rep.outer_iters, 0);
    }

    #[test]
    fn stop_config_validation() {
        assert!(StopConfig::default().validate().is_ok());
        let bad = StopConfig {
            tau_conv: 0.0,
            ..StopConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = StopConfig {
            i_max: 0,
            ..StopConfig::default()
        };
        assert!(bad.validate().is_err());
        assert_eq!(StopConfig::default().inner_cap(500), 100);
        assert_eq!(StopConfig::default().inner_cap(30), 30);
    }
}
