//! Training the Q-table on in-memory systems and reading back its policy.

use precision_bandit::fpemu::Format;
use precision_bandit::harness::{baseline_fp64_on, evaluate_on, train_on, EvalConfig, TrainConfig};
use precision_bandit::problems::{generate_instance, DatasetConfig, Split};
use precision_bandit::reward::RewardWeights;

fn main() {
    let data = DatasetConfig { n_train: 12, n_test: 12, n_min: 40, n_max: 60, seed: 3, ..DatasetConfig::default() };
    let load = |split| -> Vec<_> {
        (0..data.count(split)).map(|i| generate_instance(&data, split, i).expect("valid config")).collect()
    };
    let (train, test) = (load(Split::Train), load(Split::Test));

    let mut cfg = TrainConfig { episodes: 20, seed: 3, ..TrainConfig::default() };
    cfg.reward.weights = RewardWeights::W2;
    let (q, logs) = train_on(&train, &cfg).expect("training runs");
    println!("episode  epsilon  mean reward  mean |RPE|");
    for l in logs.iter().step_by(4) {
        println!("{:>7} {:>8.2} {:>12.3} {:>11.3}", l.episode, l.epsilon, l.mean_reward, l.mean_abs_rpe);
    }

    let eval = EvalConfig::matching(&cfg);
    let rl = evaluate_on(&q, &test, &eval).expect("evaluation runs");
    let base = baseline_fp64_on(&test, &eval).expect("evaluation runs");
    println!("\nmean FP64 steps per solve: {:.2}", rl.mean_usage(Format::Fp64));
    for (r, b) in rl.ranges.iter().zip(&base.ranges) {
        println!(
            "{:<17} xi {:>5.2}  ferr {:.2e} (fp64 {:.2e})",
            r.range.label(),
            r.xi.unwrap_or(f64::NAN),
            r.avg_ferr,
            b.avg_ferr
        );
    }
    for s in rl.systems.iter().take(5) {
        println!("  {} kappa {:.1e} -> {}", s.id, s.kappa_est, s.action);
    }
}
