//! LU factorization at different precisions and 1-norm condition estimates.

use precision_bandit::fpemu::Format;
use precision_bandit::kernels::{cond_2_exact, condest_1, lu_factor, lu_solve, norm_inf_vec};
use precision_bandit::problems::gen_dense_randsvd;

fn main() {
    for kappa in [1e2, 1e5, 1e8] {
        let p = gen_dense_randsvd(60, kappa, 1.0, 7).expect("valid parameters");
        println!(
            "kappa_2 target {kappa:.0e}: exact {:.3e}, 1-norm estimate {:.3e}",
            cond_2_exact(&p.a),
            condest_1(&p.a)
        );
        for f in [Format::Bf16, Format::Tf32, Format::Fp32, Format::Fp64] {
            match lu_factor(&p.a, f) {
                Ok(lu) => {
                    let x = lu_solve(&lu, &p.b, f);
                    let err: Vec<f64> = x.iter().zip(&p.x_true).map(|(a, b)| a - b).collect();
                    println!("  {f:<5} direct solve ferr {:.2e}", norm_inf_vec(&err) / norm_inf_vec(&p.x_true));
                }
                Err(e) => println!("  {f:<5} factorization failed: {e}"),
            }
        }
    }
}
