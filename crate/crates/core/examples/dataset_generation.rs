//! Generating a checksummed dataset on disk and reading it back.

use precision_bandit::problems::{dataset_stats, gen_dataset, DatasetConfig, DatasetManifest, Family};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("pbandit-dataset-example");
    for (family, beta) in [(Family::DenseRandsvd, 1e-3), (Family::SparseSpd, 1e-8)] {
        let cfg = DatasetConfig {
            name: family.to_string(),
            family,
            n_train: 6,
            n_test: 4,
            n_min: 100,
            n_max: 160,
            beta,
            seed: 9,
            ..DatasetConfig::default()
        };
        let out = dir.join(family.name());
        let data = gen_dataset(&cfg, &out, None)?;
        println!("{}", dataset_stats(&data.train));
        println!("{}", dataset_stats(&data.test));

        let reloaded = DatasetManifest::load(&data.test_path)?;
        let inst = reloaded.load_instance(0)?;
        println!(
            "  {} n={} kappa est {:.3e}, files under {}",
            inst.meta.id,
            inst.n(),
            inst.meta.kappa_est,
            out.display()
        );
    }
    Ok(())
}
