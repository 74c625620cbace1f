//! Independent reference implementations shared by the integration tests.
//!
//! Rounding here works on exact rationals: each operation is carried out
//! exactly and the result is rounded once to the target format.

#![allow(dead_code)]

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};
use precision_bandit::fpemu::Format;
use precision_bandit::problems::{DatasetConfig, Family};

fn pow2(e: i32) -> BigRational {
    let two = BigRational::from_integer(BigInt::from(2));
    if e >= 0 {
        num::pow(two, e as usize)
    } else {
        num::pow(two, (-e) as usize).recip()
    }
}

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite input")
}

/// Rounds an exact value to nearest, ties to even, with gradual underflow.
pub fn round_exact(r: &BigRational, fmt: Format) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    let (t, e_min, e_max) = (fmt.significand_bits() as i32, fmt.e_min(), fmt.e_max());
    let a = r.abs();
    // floor(log2 a): start from a float guess and correct it
    let mut e = a.to_f64().map(|v| v.log2().floor() as i32).unwrap_or(0);
    while pow2(e) > a {
        e -= 1;
    }
    while pow2(e + 1) <= a {
        e += 1;
    }
    let q = e.max(e_min) - t + 1;
    let scaled = &a / pow2(q);
    let fl = scaled.floor();
    let frac = &scaled - &fl;
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let mut m = fl.to_integer();
    if frac > half || (frac == half && (&m % 2) == BigInt::one()) {
        m += 1;
    }
    let mag = m.to_f64().expect("fits") * 2f64.powi(q);
    let limit = (2.0 - 2f64.powi(1 - t)) * 2f64.powi(e_max);
    let v = if mag > limit { f64::INFINITY } else { mag };
    if r.is_negative() {
        -v
    } else {
        v
    }
}

pub fn rnd(x: f64, fmt: Format) -> f64 {
    if !x.is_finite() {
        return x;
    }
    round_exact(&exact(x), fmt)
}

pub fn add(a: f64, b: f64, fmt: Format) -> f64 {
    round_exact(&(exact(a) + exact(b)), fmt)
}

pub fn sub(a: f64, b: f64, fmt: Format) -> f64 {
    round_exact(&(exact(a) - exact(b)), fmt)
}

pub fn mul(a: f64, b: f64, fmt: Format) -> f64 {
    round_exact(&(exact(a) * exact(b)), fmt)
}

pub fn div(a: f64, b: f64, fmt: Format) -> f64 {
    round_exact(&(exact(a) / exact(b)), fmt)
}

/// Row-major square matrix as nested vectors.
pub type Rows = Vec<Vec<f64>>;

pub fn matvec(a: &Rows, x: &[f64], fmt: Format) -> Vec<f64> {
    a.iter()
        .map(|row| {
            let mut acc = 0.0;
            for (aij, xj) in row.iter().zip(x) {
                acc = add(acc, mul(*aij, *xj, fmt), fmt);
            }
            acc
        })
        .collect()
}

/// Doolittle elimination with partial pivoting, first maximal pivot wins.
/// Returns the packed factors and the row permutation, or `None` on a zero
/// pivot or a non-finite value.
pub fn lu(a: &Rows, fmt: Format) -> Option<(Rows, Vec<usize>)> {
    let n = a.len();
    let mut m: Rows = a.iter().map(|r| r.iter().map(|&v| rnd(v, fmt)).collect()).collect();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut p = k;
        for i in k + 1..n {
            if m[i][k].abs() > m[p][k].abs() {
                p = i;
            }
        }
        if m[p][k] == 0.0 {
            return None;
        }
        m.swap(k, p);
        perm.swap(k, p);
        for i in k + 1..n {
            let l = div(m[i][k], m[k][k], fmt);
            m[i][k] = l;
            if l == 0.0 {
                continue;
            }
            for j in k + 1..n {
                m[i][j] = sub(m[i][j], mul(l, m[k][j], fmt), fmt);
                if !m[i][j].is_finite() {
                    return None;
                }
            }
        }
    }
    Some((m, perm))
}

pub fn lu_solve(f: &Rows, perm: &[usize], b: &[f64], fmt: Format) -> Vec<f64> {
    let n = f.len();
    let mut y: Vec<f64> = perm.iter().map(|&p| rnd(b[p], fmt)).collect();
    for i in 0..n {
        for j in 0..i {
            y[i] = sub(y[i], mul(f[i][j], y[j], fmt), fmt);
        }
    }
    for i in (0..n).rev() {
        for j in i + 1..n {
            y[i] = sub(y[i], mul(f[i][j], y[j], fmt), fmt);
        }
        y[i] = div(y[i], f[i][i], fmt);
    }
    y
}

/// `||A||_1 ||A^-1||_1` with the inverse from an exact rational Gauss-Jordan.
pub fn kappa_1_exact(a: &Rows) -> f64 {
    let n = a.len();
    let mut m: Vec<Vec<BigRational>> = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row: Vec<BigRational> = r.iter().map(|&v| exact(v)).collect();
            row.extend((0..n).map(|j| if i == j { BigRational::one() } else { BigRational::zero() }));
            row
        })
        .collect();
    for k in 0..n {
        let p = (k..n).find(|&i| !m[i][k].is_zero()).expect("nonsingular");
        m.swap(k, p);
        let piv = m[k][k].clone();
        for v in m[k].iter_mut() {
            *v = &*v / &piv;
        }
        for i in 0..n {
            if i != k && !m[i][k].is_zero() {
                let l = m[i][k].clone();
                for j in 0..2 * n {
                    let d = &l * &m[k][j];
                    m[i][j] = &m[i][j] - d;
                }
            }
        }
    }
    let col_sum = |get: &dyn Fn(usize, usize) -> f64| {
        (0..n).map(|j| (0..n).map(|i| get(i, j).abs()).sum::<f64>()).fold(0.0, f64::max)
    };
    let inv = |i: usize, j: usize| m[i][n + j].to_f64().unwrap();
    col_sum(&|i, j| a[i][j]) * col_sum(&inv)
}

/// Dense randsvd dataset at the sizes used across the test suite.
pub fn dense_config(n_train: usize, n_test: usize, n_min: usize, n_max: usize, seed: u64) -> DatasetConfig {
    DatasetConfig {
        name: "dense".into(),
        family: Family::DenseRandsvd,
        n_train,
        n_test,
        n_min,
        n_max,
        seed,
        ..DatasetConfig::default()
    }
}
