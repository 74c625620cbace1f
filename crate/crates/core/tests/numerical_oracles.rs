//! Kernels against the exact-rational oracle and hardware rounding.

mod common;

use precision_bandit::fpemu::{round_to, round_with, rounded_binop, BinOp, Format, Subnormals};
use precision_bandit::kernels::{cond_2_exact, condest_1, lu_factor, lu_solve_transpose, DenseMatrix};
use proptest::prelude::*;

fn any_format() -> impl Strategy<Value = Format> {
    prop::sample::select(Format::ALL.to_vec())
}

/// Values spread over the whole exponent range of the small formats.
fn wide() -> impl Strategy<Value = f64> {
    (-1.0f64..1.0, -140i32..130).prop_map(|(m, e)| m * 2f64.powi(e))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn rounding_matches_exact_oracle(x in wide(), f in any_format()) {
        prop_assert_eq!(round_to(x, f).to_bits(), common::rnd(x, f).to_bits());
    }

    #[test]
    fn binops_match_exact_oracle(a in wide(), b in wide(), f in any_format()) {
        let (a, b) = (round_to(a, f), round_to(b, f));
        prop_assume!(a.is_finite() && b.is_finite());
        prop_assert_eq!(rounded_binop(BinOp::Add, a, b, f), common::add(a, b, f));
        prop_assert_eq!(rounded_binop(BinOp::Sub, a, b, f), common::sub(a, b, f));
        prop_assert_eq!(rounded_binop(BinOp::Mul, a, b, f), common::mul(a, b, f));
        if b != 0.0 {
            prop_assert_eq!(rounded_binop(BinOp::Div, a, b, f), common::div(a, b, f));
        }
    }

    #[test]
    fn fp32_matches_hardware(x in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(round_to(x, Format::Fp32), x as f32 as f64);
    }

    #[test]
    fn flush_to_zero_only_below_x_min(x in wide(), f in any_format()) {
        let flushed = round_with(x, f, Subnormals::FlushToZero);
        if x.abs() < f.x_min() {
            prop_assert_eq!(flushed, 0.0);
        } else {
            prop_assert_eq!(flushed, round_to(x, f));
        }
    }
}

#[test]
fn transpose_solve_inverts_the_transpose() {
    let rows = vec![vec![4.0, 1.0, -2.0], vec![3.0, 6.0, 1.0], vec![-1.0, 2.0, 5.0]];
    let a = DenseMatrix::from_rows(&rows);
    let f = lu_factor(&a, Format::Fp64).unwrap();
    let c = [1.0, -2.0, 0.5];
    let y = lu_solve_transpose(&f, &c, Format::Fp64);
    let back = a.transpose().mul_vec(&y);
    for (u, v) in back.iter().zip(&c) {
        assert!((u - v).abs() < 1e-14);
    }
}

#[test]
fn condest_brackets_on_structured_matrices() {
    // Kahan-like upper triangular matrices defeat naive estimators
    for n in [4, 6, 8] {
        let rows: common::Rows = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0.5f64.powi(i as i32) } else if j > i { -0.5f64.powi(i as i32) } else { 0.0 }).collect())
            .collect();
        let exact = common::kappa_1_exact(&rows);
        let est = condest_1(&DenseMatrix::from_rows(&rows));
        assert!(est <= exact * (1.0 + 1e-12) && est >= exact / 10.0, "n={n}: {est:e} vs {exact:e}");
    }
    let d = DenseMatrix::from_diagonal(&[1.0, 1e-3, 10.0]);
    assert!((condest_1(&d) - 1e4).abs() < 1e-8);
    assert!((cond_2_exact(&d) - 1e4).abs() < 1e-8);
}
