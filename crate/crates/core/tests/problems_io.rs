mod common;

use std::fs;

use precision_bandit::kernels::DenseMatrix;
use precision_bandit::problems::{
    gen_dataset, gen_dense_randsvd, generate_instance, mtx, DatasetConfig, DatasetManifest, Family, Split,
};
use precision_bandit::Error;

fn small_dense(seed: u64) -> DatasetConfig {
    common::dense_config(4, 3, 12, 30, seed)
}

#[test]
fn generation_ignores_worker_count() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = small_dense(5);
    gen_dataset(&cfg, a.path(), Some(1)).unwrap();
    gen_dataset(&cfg, b.path(), Some(3)).unwrap();
    for split in [Split::Train, Split::Test] {
        let name = DatasetManifest::file_name(split);
        assert_eq!(fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap());
        let m = DatasetManifest::load(a.path().join(&name)).unwrap();
        for e in &m.instances {
            assert_eq!(fs::read(a.path().join(&e.matrix.path)).unwrap(), fs::read(b.path().join(&e.matrix.path)).unwrap());
        }
    }
}

#[test]
fn reload_is_lossless() {
    let dir = tempfile::tempdir().unwrap();
    for family in [Family::DenseRandsvd, Family::SparseSpd] {
        let cfg = DatasetConfig { family, ..small_dense(8) };
        let out = dir.path().join(family.name());
        let data = gen_dataset(&cfg, &out, None).unwrap();
        let loaded = data.test.load_all().unwrap();
        for (i, inst) in loaded.iter().enumerate() {
            let fresh = generate_instance(&cfg, Split::Test, i).unwrap();
            assert_eq!(inst.a, fresh.a);
            assert_eq!(inst.b, fresh.b);
            assert_eq!(inst.x_true, fresh.x_true);
            assert_eq!(inst.meta, fresh.meta);
        }
    }
}

#[test]
fn tampered_file_fails_checksum() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_dataset(&small_dense(2), dir.path(), None).unwrap();
    let rhs = dir.path().join(&data.train.instances[1].rhs.path);
    let text = fs::read_to_string(&rhs).unwrap();
    fs::write(&rhs, text.replacen("e", "E", 1)).unwrap();
    let manifest = DatasetManifest::load(&data.train_path).unwrap();
    assert!(manifest.load_instance(0).is_ok());
    assert!(matches!(manifest.load_instance(1), Err(Error::Checksum { .. })));
}

#[test]
fn manifest_version_and_count_are_checked() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_dataset(&small_dense(3), dir.path(), None).unwrap();
    let text = fs::read_to_string(&data.test_path).unwrap();
    fs::write(&data.test_path, text.replacen("\"format_version\": 1", "\"format_version\": 7", 1)).unwrap();
    assert!(matches!(DatasetManifest::load(&data.test_path), Err(Error::Manifest { .. })));
    assert!(matches!(DatasetManifest::load(dir.path().join("missing.json")), Err(Error::Io { .. })));
}

#[test]
fn randsvd_hits_the_condition_target() {
    for (n, kappa) in [(20, 1e1), (40, 1e4), (60, 1e8)] {
        let p = gen_dense_randsvd(n, kappa, 2.0, 17).unwrap();
        let m = nalgebra::DMatrix::from_fn(n, n, |i, j| p.a.get(i, j));
        let sv = m.singular_values();
        let (hi, lo) = (sv.max(), sv.min());
        assert!((hi - 2.0).abs() < 1e-10, "sigma_max {hi}");
        assert!(((hi / lo) / kappa - 1.0).abs() < 0.01, "n={n}: {} vs {kappa}", hi / lo);
        // n - 1 singular values equal sigma_max
        assert_eq!(sv.iter().filter(|&&s| (s - 2.0).abs() < 1e-8).count(), n - 1);
    }
}

#[test]
fn sparse_preset_regime() {
    // beta = 1e-8 puts the emergent condition numbers near 1e9
    let cfg = DatasetConfig {
        name: "sparse".into(),
        family: Family::SparseSpd,
        n_train: 6,
        n_test: 1,
        n_min: 100,
        n_max: 200,
        lambda_s: 0.01,
        beta: 1e-8,
        seed: 21,
        ..DatasetConfig::default()
    };
    for i in 0..cfg.n_train {
        let p = generate_instance(&cfg, Split::Train, i).unwrap();
        let n = p.n();
        assert!((1e8..=1e10).contains(&p.meta.kappa_est), "kappa {:e}", p.meta.kappa_est);
        assert!(p.meta.sparsity > 0.0 && p.meta.sparsity < 0.05, "sparsity {}", p.meta.sparsity);
        assert_eq!(p.a, p.a.transpose());
        assert!((0..n).all(|k| p.a.get(k, k) >= 1e-8));
    }
}

#[test]
fn mtx_accepts_foreign_symmetric_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.mtx");
    fs::write(&path, "%%MatrixMarket matrix coordinate real symmetric\n%\n3 3 4\n1 1 2.0\n2 1 -1\n2 2 2\n3 3 5e-1\n").unwrap();
    let a = mtx::read_matrix(&path).unwrap();
    let want = DenseMatrix::from_rows(&[vec![2.0, -1.0, 0.0], vec![-1.0, 2.0, 0.0], vec![0.0, 0.0, 0.5]]);
    assert_eq!(a, want);
    fs::write(&path, "%%MatrixMarket matrix array real general\n2 1\n1\n").unwrap();
    assert!(matches!(mtx::read_vector(&path), Err(Error::MatrixMarket { .. })));
}
