//! Synthetic test systems (dense randsvd and sparse SPD), dataset
//! persistence with checksummed manifests, and dataset statistics.

pub mod mtx;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kernels::{condest_1, norm_inf, DenseMatrix};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    DenseRandsvd,
    SparseSpd,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::DenseRandsvd => "dense_randsvd",
            Family::SparseSpd => "sparse_spd",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dense" | "dense_randsvd" | "randsvd" => Ok(Family::DenseRandsvd),
            "sparse" | "sparse_spd" | "spd" => Ok(Family::SparseSpd),
            _ => Err(Error::Config(format!(
                "unknown family `{s}` (expected dense or sparse)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemMeta {
    pub id: String,
    pub family: Family,
    pub n: usize,
    /// Requested condition number (dense only; sparse conditioning is emergent).
    pub kappa_target: Option<f64>,
    /// 1-norm condition estimate of the generated matrix.
    pub kappa_est: f64,
    pub norm_inf: f64,
    /// Fraction of nonzero entries in `A`.
    pub sparsity: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub a: DenseMatrix,
    pub x_true: Vec<f64>,
    pub b: Vec<f64>,
    pub meta: ProblemMeta,
}

impl ProblemInstance {
    pub fn n(&self) -> usize {
        self.meta.n
    }

    fn assemble(
        a: DenseMatrix,
        x_true: Vec<f64>,
        family: Family,
        kappa_target: Option<f64>,
        seed: u64,
    ) -> Self {
        let n = a.n_rows();
        let b = a.mul_vec(&x_true);
        let meta = ProblemMeta {
            id: format!("{}-{seed:016x}", family.name()),
            family,
            n,
            kappa_target,
            kappa_est: condest_1(&a),
            norm_inf: norm_inf(&a),
            sparsity: a.nnz() as f64 / (n * n) as f64,
            seed,
        };
        Self { a, x_true, b, meta }
    }
}

fn normal_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q()
}

/// `A = U diag(sigma) V^T` with `sigma_1 = ... = sigma_{n-1} = sigma_max` and
/// `sigma_n = sigma_max / kappa`.
pub fn gen_dense_randsvd(n: usize, kappa: f64, sigma_max: f64, seed: u64) -> Result<ProblemInstance> {
    if n < 2 {
        return Err(Error::Config(format!("randsvd needs n >= 2, got {n}")));
    }
    if !(kappa >= 1.0 && kappa.is_finite()) {
        return Err(Error::Config(format!("randsvd needs finite kappa >= 1, got {kappa}")));
    }
    if !(sigma_max > 0.0 && sigma_max.is_finite()) {
        return Err(Error::Config(format!("randsvd needs sigma_max > 0, got {sigma_max}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = random_orthogonal(n, &mut rng);
    let v = random_orthogonal(n, &mut rng);
    let mut sigma = DVector::from_element(n, sigma_max);
    sigma[n - 1] = sigma_max / kappa;
    let a = (u * DMatrix::from_diagonal(&sigma)) * v.transpose();
    let x_true = normal_vec(n, &mut rng);
    Ok(ProblemInstance::assemble(
        DenseMatrix::from_nalgebra(&a),
        x_true,
        Family::DenseRandsvd,
        Some(kappa),
        seed,
    ))
}

/// `A = A0 A0^T + beta I` where `A0` has `floor(lambda_s n^2)` standard
/// normal entries at distinct uniformly random positions.
pub fn gen_sparse_spd(n: usize, lambda_s: f64, beta: f64, seed: u64) -> Result<ProblemInstance> {
    if n < 1 {
        return Err(Error::Config("sparse generator needs n >= 1".into()));
    }
    if !(lambda_s > 0.0 && lambda_s <= 1.0) {
        return Err(Error::Config(format!("lambda_s must be in (0, 1], got {lambda_s}")));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Config(format!("beta must be positive, got {beta}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nnz = (lambda_s * (n * n) as f64).floor() as usize;
    let mut taken = vec![false; n * n];
    // entries grouped by column of A0: (row, value)
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut placed = 0;
    while placed < nnz {
        let pos = rng.random_range(0..n * n);
        if taken[pos] {
            continue;
        }
        taken[pos] = true;
        let v: f64 = rng.sample(StandardNormal);
        cols[pos % n].push((pos / n, v));
        placed += 1;
    }
    let mut a = DenseMatrix::zeros(n, n);
    for col in &mut cols {
        col.sort_by_key(|&(i, _)| i);
        for (p, &(i, vi)) in col.iter().enumerate() {
            for &(j, vj) in &col[p..] {
                a.set(i, j, a.get(i, j) + vi * vj);
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            a.set(i, j, a.get(j, i));
        }
        a.set(i, i, a.get(i, i) + beta);
    }
    let x_true = normal_vec(n, &mut rng);
    Ok(ProblemInstance::assemble(a, x_true, Family::SparseSpd, None, seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub name: String,
    pub family: Family,
    pub n_train: usize,
    pub n_test: usize,
    pub n_min: usize,
    pub n_max: usize,
    /// Dense condition targets are log-uniform over `[kappa_min, kappa_max]`.
    pub kappa_min: f64,
    pub kappa_max: f64,
    pub sigma_max: f64,
    pub lambda_s: f64,
    pub beta: f64,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            name: "dense".into(),
            family: Family::DenseRandsvd,
            n_train: 100,
            n_test: 100,
            n_min: 100,
            n_max: 500,
            kappa_min: 1e1,
            kappa_max: 1e9,
            sigma_max: 1.0,
            lambda_s: 0.01,
            beta: 1e-3,
            seed: 42,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n_train == 0 || self.n_test == 0 {
            return fail(format!(
                "n_train and n_test must be at least 1 (got {} and {})",
                self.n_train, self.n_test
            ));
        }
        if self.n_min < 2 || self.n_min > self.n_max {
            return fail(format!("size range [{}, {}] is invalid", self.n_min, self.n_max));
        }
        if !(self.kappa_min >= 1.0 && self.kappa_min <= self.kappa_max && self.kappa_max.is_finite()) {
            return fail(format!(
                "condition range [{}, {}] is invalid",
                self.kappa_min, self.kappa_max
            ));
        }
        if !(self.sigma_max > 0.0 && self.sigma_max.is_finite()) {
            return fail(format!("sigma_max must be positive, got {}", self.sigma_max));
        }
        if !(self.lambda_s > 0.0 && self.lambda_s <= 1.0) {
            return fail(format!("lambda_s must be in (0, 1], got {}", self.lambda_s));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return fail(format!("beta must be positive, got {}", self.beta));
        }
        Ok(())
    }

    pub fn count(&self, split: Split) -> usize {
        match split {
            Split::Train => self.n_train,
            Split::Test => self.n_test,
        }
    }
}

/// SplitMix64 finalizer, used to derive independent per-instance seeds.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn instance_seed(global: u64, split: Split, index: usize) -> u64 {
    let tag = match split {
        Split::Train => 1u64,
        Split::Test => 2u64,
    };
    splitmix64(splitmix64(global) ^ (tag << 32 | index as u64))
}

/// Draws the size and (dense) condition target of one instance.
pub fn sample_shape(cfg: &DatasetConfig, seed: u64) -> (usize, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed));
    let n = rng.random_range(cfg.n_min..=cfg.n_max);
    let (lo, hi) = (cfg.kappa_min.log10(), cfg.kappa_max.log10());
    let kappa = 10f64.powf(rng.random_range(lo..=hi)).clamp(cfg.kappa_min, cfg.kappa_max);
    (n, kappa)
}

pub fn generate_instance(cfg: &DatasetConfig, split: Split, index: usize) -> Result<ProblemInstance> {
    let seed = instance_seed(cfg.seed, split, index);
    let (n, kappa) = sample_shape(cfg, seed);
    let mut inst = match cfg.family {
        Family::DenseRandsvd => gen_dense_randsvd(n, kappa, cfg.sigma_max, seed)?,
        Family::SparseSpd => gen_sparse_spd(n, cfg.lambda_s, cfg.beta, seed)?,
    };
    inst.meta.id = format!("{}_{index:04}", split.name());
    Ok(inst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRef {
    /// Relative to the manifest's directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub matrix: FileRef,
    pub rhs: FileRef,
    pub truth: FileRef,
    pub meta: ProblemMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub name: String,
    pub split: Split,
    pub global_seed: u64,
    pub generation: DatasetConfig,
    pub instances: Vec<ManifestEntry>,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn file_name(split: Split) -> String {
        format!("manifest_{}.json", split.name())
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let bad = |reason: String| Error::Manifest {
            path: path.to_path_buf(),
            reason,
        };
        let mut m: DatasetManifest = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        if m.format_version != MANIFEST_VERSION {
            return Err(bad(format!(
                "format_version {} is not supported (expected {MANIFEST_VERSION})",
                m.format_version
            )));
        }
        if m.instances.len() != m.generation.count(m.split) {
            return Err(bad(format!(
                "{} instances listed but the generation config asks for {}",
                m.instances.len(),
                m.generation.count(m.split)
            )));
        }
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_instance(&self, i: usize) -> Result<ProblemInstance> {
        load_instance(self, &self.instances[i])
    }

    /// Loads every instance in manifest order.
    pub fn load_all(&self) -> Result<Vec<ProblemInstance>> {
        self.instances
            .par_iter()
            .map(|e| load_instance(self, e))
            .collect()
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_checked(base: &Path, rel: &str, contents: &str) -> Result<FileRef> {
    let path = base.join(rel);
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(FileRef {
        path: rel.to_string(),
        sha256: sha256_hex(contents.as_bytes()),
    })
}

fn read_checked(base: &Path, f: &FileRef) -> Result<String> {
    let path = base.join(&f.path);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let found = sha256_hex(&bytes);
    if found != f.sha256 {
        return Err(Error::Checksum {
            path,
            expected: f.sha256.clone(),
            found,
        });
    }
    String::from_utf8(bytes).map_err(|_| Error::MatrixMarket {
        path,
        reason: "not valid UTF-8".into(),
    })
}

pub fn load_instance(manifest: &DatasetManifest, entry: &ManifestEntry) -> Result<ProblemInstance> {
    let base = manifest.base_dir();
    let parse_m = |f: &FileRef| -> Result<DenseMatrix> {
        let text = read_checked(base, f)?;
        mtx::parse_matrix(&text).map_err(|reason| Error::MatrixMarket {
            path: base.join(&f.path),
            reason,
        })
    };
    let parse_v = |f: &FileRef| -> Result<Vec<f64>> {
        let m = parse_m(f)?;
        if m.n_cols() != 1 {
            return Err(Error::MatrixMarket {
                path: base.join(&f.path),
                reason: format!("expected a column vector, found {}x{}", m.n_rows(), m.n_cols()),
            });
        }
        Ok(m.entries().to_vec())
    };
    let a = parse_m(&entry.matrix)?;
    let b = parse_v(&entry.rhs)?;
    let x_true = parse_v(&entry.truth)?;
    let n = entry.meta.n;
    if a.n_rows() != n || a.n_cols() != n || b.len() != n || x_true.len() != n {
        return Err(Error::Manifest {
            path: base.join(&entry.matrix.path),
            reason: format!("instance {} does not have the recorded size {n}", entry.meta.id),
        });
    }
    Ok(ProblemInstance {
        a,
        x_true,
        b,
        meta: entry.meta.clone(),
    })
}

/// Writes one instance's files under `base/<split>/` and returns its entry.
pub fn write_instance(base: &Path, split: Split, inst: &ProblemInstance) -> Result<ManifestEntry> {
    let dir = base.join(split.name());
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let id = &inst.meta.id;
    let matrix_text = match inst.meta.family {
        Family::DenseRandsvd => mtx::dense_to_string(&inst.a),
        Family::SparseSpd => mtx::sparse_to_string(&inst.a),
    };
    let rel = |suffix: &str| format!("{}/{id}_{suffix}.mtx", split.name());
    Ok(ManifestEntry {
        matrix: write_checked(base, &rel("A"), &matrix_text)?,
        rhs: write_checked(base, &rel("b"), &mtx::vector_to_string(&inst.b))?,
        truth: write_checked(base, &rel("x"), &mtx::vector_to_string(&inst.x_true))?,
        meta: inst.meta.clone(),
    })
}

#[derive(Debug, Clone)]
pub struct GeneratedDataset {
    pub train: DatasetManifest,
    pub test: DatasetManifest,
    pub train_path: PathBuf,
    pub test_path: PathBuf,
}

/// Generates both splits under `out_dir` and writes their manifests.
/// `workers` bounds the generation thread pool (`None` uses all cores).
pub fn gen_dataset(cfg: &DatasetConfig, out_dir: &Path, workers: Option<usize>) -> Result<GeneratedDataset> {
    cfg.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let build = |split: Split| -> Result<(DatasetManifest, PathBuf)> {
        let entries: Vec<ManifestEntry> = pool.install(|| {
            (0..cfg.count(split))
                .into_par_iter()
                .map(|i| write_instance(out_dir, split, &generate_instance(cfg, split, i)?))
                .collect::<Result<_>>()
        })?;
        let manifest = DatasetManifest {
            format_version: MANIFEST_VERSION,
            name: cfg.name.clone(),
            split,
            global_seed: cfg.seed,
            generation: cfg.clone(),
            instances: entries,
            base_dir: out_dir.to_path_buf(),
        };
        let path = out_dir.join(DatasetManifest::file_name(split));
        manifest.save(&path)?;
        Ok((manifest, path))
    };
    let (train, train_path) = build(Split::Train)?;
    let (test, test_path) = build(Split::Test)?;
    Ok(GeneratedDataset {
        train,
        test,
        train_path,
        test_path,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub name: String,
    pub split: Split,
    pub count: usize,
    pub n_min: usize,
    pub n_max: usize,
    pub kappa_min: f64,
    pub kappa_max: f64,
    pub sparsity_min: f64,
    pub sparsity_max: f64,
}

pub fn dataset_stats(manifest: &DatasetManifest) -> DatasetStats {
    let metas = manifest.instances.iter().map(|e| &e.meta);
    let fmin = |a: f64, b: f64| a.min(b);
    let fmax = |a: f64, b: f64| a.max(b);
    DatasetStats {
        name: manifest.name.clone(),
        split: manifest.split,
        count: manifest.len(),
        n_min: metas.clone().map(|m| m.n).min().unwrap_or(0),
        n_max: metas.clone().map(|m| m.n).max().unwrap_or(0),
        kappa_min: metas.clone().map(|m| m.kappa_est).fold(f64::INFINITY, fmin),
        kappa_max: metas.clone().map(|m| m.kappa_est).fold(f64::NEG_INFINITY, fmax),
        sparsity_min: metas.clone().map(|m| m.sparsity).fold(f64::INFINITY, fmin),
        sparsity_max: metas.map(|m| m.sparsity).fold(f64::NEG_INFINITY, fmax),
    }
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<6} {:>4} systems  n {}-{}  kappa {:.3e} - {:.3e}  sparsity {:.2}% - {:.2}%",
            self.split,
            self.count,
            self.n_min,
            self.n_max,
            self.kappa_min,
            self.kappa_max,
            100.0 * self.sparsity_min,
            100.0 * self.sparsity_max
        )
    }
}
