//! Mixed-precision GMRES-IR on one ill-conditioned system.

use precision_bandit::gmres_ir::{solve_gmres_ir, PrecisionAction, StopConfig};
use precision_bandit::problems::gen_dense_randsvd;

fn main() {
    let p = gen_dense_randsvd(100, 1e6, 1.0, 11).expect("valid parameters");
    let cfg = StopConfig::default();
    println!("n = 100, kappa_2 = 1e6, tau = {:e}\n", cfg.tau_conv);
    println!("{:<22} {:<10} {:>5} {:>6} {:>10} {:>10}", "action", "status", "outer", "gmres", "ferr", "nbe");
    for spec in [
        "fp64|fp64|fp64|fp64",
        "fp32|fp64|fp64|fp64",
        "bf16|fp64|fp64|fp64",
        "tf32|fp32|fp64|fp64",
        "bf16|fp32|fp32|fp64",
        "bf16|bf16|bf16|bf16",
    ] {
        let action: PrecisionAction = spec.parse().expect("valid action");
        let r = solve_gmres_ir(&p.a, &p.b, action, &cfg, Some(&p.x_true));
        println!(
            "{:<22} {:<10} {:>5} {:>6} {:>10.2e} {:>10.2e}",
            spec,
            r.status.to_string(),
            r.outer_iters,
            r.gmres_iters_total,
            r.ferr,
            r.nbe
        );
    }
}
