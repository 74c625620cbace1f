//! Reward breakdown for a few precision choices under both weight presets.

use precision_bandit::context::extract_context;
use precision_bandit::gmres_ir::{solve_gmres_ir, PrecisionAction, StopConfig};
use precision_bandit::problems::gen_dense_randsvd;
use precision_bandit::reward::{total_reward, RewardConfig, RewardWeights};

fn main() {
    let p = gen_dense_randsvd(80, 1e3, 1.0, 2).expect("valid parameters");
    let ctx = extract_context(&p.a);
    println!("condition estimate {:.3e}, norm {:.3}\n", ctx.kappa(), ctx.norm_inf());
    for (name, weights) in [("W1", RewardWeights::W1), ("W2", RewardWeights::W2)] {
        let cfg = RewardConfig { weights, ..RewardConfig::default() };
        println!("{name}: {:<22} {:>8} {:>8} {:>8} {:>8}", "action", "prec", "acc", "pen", "total");
        for spec in ["fp64|fp64|fp64|fp64", "fp32|fp64|fp64|fp64", "bf16|fp32|fp32|fp64", "bf16|bf16|bf16|bf16"] {
            let action: PrecisionAction = spec.parse().expect("valid action");
            let rep = solve_gmres_ir(&p.a, &p.b, action, &StopConfig::default(), Some(&p.x_true));
            let r = total_reward(&rep, &ctx, &p.a, &p.b, &p.x_true, &cfg);
            println!(
                "    {spec:<22} {:>8.3} {:>8.3} {:>8.3} {:>8.3}{}",
                r.f_precision,
                r.f_accuracy,
                r.f_penalty,
                r.total,
                if r.failed { "  (failed)" } else { "" }
            );
        }
        println!();
    }
}
