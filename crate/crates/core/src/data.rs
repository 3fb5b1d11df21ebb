//! Labeled datasets, CSV I/O, standardization, the synthetic shifted-domain
//! benchmark and the 2-D PCA projection used for plotting.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, shape_err, Error, Result};
use crate::matrix::Matrix;
use crate::model::derive_seed;

/// Label value for rows without a class.
pub const UNLABELED: i64 = -1;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Matrix,
    labels: Vec<i64>,
    class_count: usize,
}

impl LabeledDataset {
    /// Labels must lie in `[0, class_count)` or be [`UNLABELED`].
    pub fn new(features: Matrix, labels: Vec<i64>, class_count: usize) -> Result<Self> {
        if labels.len() != features.rows() {
            return shape_err(format!(
                "{} labels for {} rows",
                labels.len(),
                features.rows()
            ));
        }
        if class_count == 0 {
            return config_err("class count must be at least 1");
        }
        if let Some(&l) = labels
            .iter()
            .find(|&&l| l != UNLABELED && (l < 0 || l as usize >= class_count))
        {
            return config_err(format!("label {l} outside [0, {class_count})"));
        }
        Ok(LabeledDataset {
            features,
            labels,
            class_count,
        })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Labels as class indices; fails if any row is unlabeled.
    pub fn class_labels(&self) -> Result<Vec<usize>> {
        self.labels
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                if l == UNLABELED {
                    config_err(format!("row {i} is unlabeled"))
                } else {
                    Ok(l as usize)
                }
            })
            .collect()
    }

    pub fn indices_of_class(&self, class: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class as i64)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        let features = self.features.select_rows(idx)?;
        let labels = idx.iter().map(|&i| self.labels[i]).collect();
        Ok(LabeledDataset {
            features,
            labels,
            class_count: self.class_count,
        })
    }

    /// Rows of class `c`, or a configuration error naming the class if none exist.
    pub fn class_subset(&self, class: usize) -> Result<Self> {
        let idx = self.indices_of_class(class);
        if idx.is_empty() {
            return config_err(format!("class {class} has no samples"));
        }
        self.subset(&idx)
    }

    pub fn with_features(&self, features: Matrix) -> Result<Self> {
        LabeledDataset::new(features, self.labels.clone(), self.class_count)
    }

    pub fn concat(&self, other: &LabeledDataset) -> Result<Self> {
        let features = Matrix::vstack(&[&self.features, &other.features])?;
        let labels = self.labels.iter().chain(&other.labels).copied().collect();
        LabeledDataset::new(features, labels, self.class_count.max(other.class_count))
    }

    /// Draws up to `per_class` rows of every class without replacement.
    /// Every class must have at least one row.
    pub fn few_shot(&self, per_class: usize, seed: u64) -> Result<Self> {
        if per_class == 0 {
            return config_err("labeled target samples per class must be at least 1");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked = Vec::new();
        for c in 0..self.class_count {
            let mut idx = self.indices_of_class(c);
            if idx.is_empty() {
                return config_err(format!("class {c} has no labeled target samples"));
            }
            idx.shuffle(&mut rng);
            idx.truncate(per_class);
            idx.sort_unstable();
            picked.extend(idx);
        }
        self.subset(&picked)
    }
}

/// Writes `label,f0,...,f{d-1}` with 17 significant digits per value.
pub fn save_csv(ds: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_csv_string(ds))?;
    Ok(())
}

pub fn to_csv_string(ds: &LabeledDataset) -> String {
    let d = ds.dim();
    let mut out = String::from("label");
    for j in 0..d {
        let _ = write!(out, ",f{j}");
    }
    out.push('\n');
    for (row, label) in ds.features.row_iter().zip(&ds.labels) {
        let _ = write!(out, "{label}");
        for v in row {
            let _ = write!(out, ",{}", format_value(*v));
        }
        out.push('\n');
    }
    out
}

/// Scientific notation with 17 significant digits; parses back bit-exactly.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

/// Reads a dataset. With `class_count = None` the count is inferred as
/// `max label + 1`.
pub fn load_csv(path: impl AsRef<Path>, class_count: Option<usize>) -> Result<LabeledDataset> {
    let text = std::fs::read_to_string(path)?;
    parse_csv(&text, class_count)
}

pub fn parse_csv(text: &str, class_count: Option<usize>) -> Result<LabeledDataset> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty file".into(),
    })?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns.first() != Some(&"label") || columns.len() < 2 {
        return Err(Error::Parse {
            line: 1,
            msg: "header must be `label,f0,...`".into(),
        });
    }
    for (j, name) in columns[1..].iter().enumerate() {
        if *name != format!("f{j}") {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected column f{j}, found `{name}`"),
            });
        }
    }
    let d = columns.len() - 1;
    let mut labels = Vec::new();
    let mut data = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != d + 1 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected {} cells, found {}", d + 1, cells.len()),
            });
        }
        let label: i64 = cells[0].parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("bad label `{}`", cells[0]),
        })?;
        if label < UNLABELED {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("negative label {label}"),
            });
        }
        if let Some(c) = class_count {
            if label >= c as i64 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("label {label} outside [0, {c})"),
                });
            }
        }
        for cell in &cells[1..] {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("non-numeric cell `{cell}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("non-finite value `{cell}`"),
                });
            }
            data.push(v);
        }
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(Error::Parse {
            line: 2,
            msg: "no data rows".into(),
        });
    }
    let inferred = labels.iter().copied().max().unwrap_or(0).max(0) as usize + 1;
    let c = class_count.unwrap_or(inferred);
    LabeledDataset::new(Matrix::new(labels.len(), d, data)?, labels, c)
}

/// Per-feature affine standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub const STD_FLOOR: f64 = 1e-8;

pub fn fit_standardizer(x: &Matrix) -> Standardizer {
    let mean = x.column_means();
    let n = x.rows() as f64;
    let mut var = vec![0.0; x.cols()];
    for row in x.row_iter() {
        for ((acc, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *acc += (v - m) * (v - m);
        }
    }
    let std = var
        .into_iter()
        .map(|s| (s / n).sqrt().max(STD_FLOOR))
        .collect();
    Standardizer { mean, std }
}

impl Standardizer {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        self.check(x)?;
        let mut out = x.clone();
        let d = x.cols();
        for (i, v) in out.as_mut_slice().iter_mut().enumerate() {
            let j = i % d;
            *v = (*v - self.mean[j]) / self.std[j];
        }
        Ok(out)
    }

    pub fn invert(&self, x: &Matrix) -> Result<Matrix> {
        self.check(x)?;
        let mut out = x.clone();
        let d = x.cols();
        for (i, v) in out.as_mut_slice().iter_mut().enumerate() {
            let j = i % d;
            *v = *v * self.std[j] + self.mean[j];
        }
        Ok(out)
    }

    pub fn apply_dataset(&self, ds: &LabeledDataset) -> Result<LabeledDataset> {
        ds.with_features(self.apply(ds.features())?)
    }

    fn check(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.dim() {
            return shape_err(format!(
                "standardizer fitted on {} features, got {}",
                self.dim(),
                x.cols()
            ));
        }
        Ok(())
    }
}

/// Affine shift applied to the source law to obtain the target law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shift {
    /// Rotation in the plane of the first two features, radians.
    pub theta: f64,
    /// Translation; shorter vectors are zero-padded.
    pub translation: Vec<f64>,
    pub scale: f64,
}

impl Shift {
    pub fn identity() -> Self {
        Shift {
            theta: 0.0,
            translation: Vec::new(),
            scale: 1.0,
        }
    }

    /// The default benchmark: 45° rotation, translation 3 along the first axis.
    pub fn benchmark() -> Self {
        Shift::degrees(45.0, vec![3.0, 0.0], 1.0)
    }

    pub fn degrees(theta_deg: f64, translation: Vec<f64>, scale: f64) -> Self {
        Shift {
            theta: theta_deg.to_radians(),
            translation,
            scale,
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        if !self.theta.is_finite() {
            return config_err("rotation angle must be finite");
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return config_err(format!("scale must be positive, got {}", self.scale));
        }
        if self.translation.len() > d {
            return config_err(format!(
                "translation has {} entries for {d} features",
                self.translation.len()
            ));
        }
        if self.translation.iter().any(|v| !v.is_finite()) {
            return config_err("translation must be finite");
        }
        Ok(())
    }

    /// `x ↦ s·R(θ)x + t`, rotating features 0 and 1.
    pub fn apply_row(&self, row: &mut [f64]) {
        let (sin, cos) = self.theta.sin_cos();
        let (a, b) = (row[0], row[1]);
        row[0] = cos * a - sin * b;
        row[1] = sin * a + cos * b;
        for (j, v) in row.iter_mut().enumerate() {
            *v = *v * self.scale + self.translation.get(j).copied().unwrap_or(0.0);
        }
    }
}

/// The three datasets of one synthetic domain-shift task.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftTask {
    pub source: LabeledDataset,
    pub target_train: LabeledDataset,
    pub target_test: LabeledDataset,
}

/// Radius of the circle carrying the class means.
pub const CLASS_RADIUS: f64 = 4.0;

/// Class `c` mean: `CLASS_RADIUS·(cos 2πc/C, sin 2πc/C, 0, …)`.
pub fn class_mean(class: usize, class_count: usize, d: usize) -> Vec<f64> {
    let angle = std::f64::consts::TAU * class as f64 / class_count as f64;
    let mut m = vec![0.0; d];
    m[0] = CLASS_RADIUS * angle.cos();
    m[1] = CLASS_RADIUS * angle.sin();
    m
}

fn sample_blobs(
    seed: u64,
    n_per_class: usize,
    d: usize,
    class_count: usize,
    shift: Option<&Shift>,
) -> Result<LabeledDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(n_per_class * class_count * d);
    let mut labels = Vec::with_capacity(n_per_class * class_count);
    for c in 0..class_count {
        let mean = class_mean(c, class_count, d);
        for _ in 0..n_per_class {
            let mut row: Vec<f64> = mean
                .iter()
                .map(|m| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    m + z
                })
                .collect();
            if let Some(s) = shift {
                s.apply_row(&mut row);
            }
            data.extend(row);
            labels.push(c as i64);
        }
    }
    LabeledDataset::new(Matrix::new(labels.len(), d, data)?, labels, class_count)
}

/// Gaussian class blobs (unit covariance) with means on a circle in the
/// first two features; the target is the same law pushed through `shift`.
/// The three draws use independent seed streams.
pub fn synth_shift_task(
    seed: u64,
    n_per_class: usize,
    d: usize,
    class_count: usize,
    shift: &Shift,
) -> Result<ShiftTask> {
    if d < 2 {
        return config_err(format!("synthetic task needs at least 2 features, got {d}"));
    }
    if class_count == 0 {
        return config_err("class count must be at least 1");
    }
    if n_per_class == 0 {
        return config_err("samples per class must be at least 1");
    }
    shift.validate(d)?;
    Ok(ShiftTask {
        source: sample_blobs(derive_seed(seed, 101), n_per_class, d, class_count, None)?,
        target_train: sample_blobs(
            derive_seed(seed, 102),
            n_per_class,
            d,
            class_count,
            Some(shift),
        )?,
        target_test: sample_blobs(
            derive_seed(seed, 103),
            n_per_class,
            d,
            class_count,
            Some(shift),
        )?,
    })
}

/// Top two principal directions of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca2 {
    pub mean: Vec<f64>,
    /// Unit-norm components, largest eigenvalue first.
    pub components: [Vec<f64>; 2],
    /// Covariance eigenvalues (population normalization) for the components.
    pub eigenvalues: [f64; 2],
}

pub const PCA_TOLERANCE: f64 = 1e-9;
pub const PCA_MAX_ITERS: usize = 1000;

#[allow(clippy::needless_range_loop)]
fn covariance(x: &Matrix, mean: &[f64]) -> Vec<Vec<f64>> {
    let d = x.cols();
    let mut cov = vec![vec![0.0; d]; d];
    for row in x.row_iter() {
        for i in 0..d {
            let a = row[i] - mean[i];
            for j in i..d {
                cov[i][j] += a * (row[j] - mean[j]);
            }
        }
    }
    let n = x.rows() as f64;
    for i in 0..d {
        for j in i..d {
            cov[i][j] /= n;
            cov[j][i] = cov[i][j];
        }
    }
    cov
}

fn mat_vec(a: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum())
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Power iteration on a symmetric positive semi-definite matrix.
fn dominant_eigenpair(
    a: &[Vec<f64>],
    scale: f64,
    orthogonal_to: Option<&[f64]>,
) -> (f64, Vec<f64>) {
    let d = a.len();
    let null_threshold = 1e-13 * scale.max(f64::MIN_POSITIVE);
    // deterministic start with every coordinate populated
    let mut v: Vec<f64> = (0..d).map(|i| 1.0 + 0.1 * i as f64).collect();
    // applied twice to keep rounding residue out of the deflated direction
    let project_out = |v: &mut Vec<f64>| {
        if let Some(u) = orthogonal_to {
            for _ in 0..2 {
                let k = dot(v, u);
                v.iter_mut().zip(u).for_each(|(x, y)| *x -= k * y);
            }
        }
    };
    project_out(&mut v);
    if normalize(&mut v) == 0.0 {
        v = vec![0.0; d];
        v[0] = 1.0;
    }
    for _ in 0..PCA_MAX_ITERS {
        let mut next = mat_vec(a, &v);
        project_out(&mut next);
        if normalize(&mut next) <= null_threshold {
            // null space reached
            return (0.0, v);
        }
        let delta = next
            .iter()
            .zip(&v)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
        v = next;
        if delta < PCA_TOLERANCE {
            break;
        }
    }
    let lambda = dot(&v, &mat_vec(a, &v));
    (lambda, v)
}

fn fix_sign(v: &mut [f64]) {
    let idx = v.iter().enumerate().fold(
        0,
        |best, (i, x)| if x.abs() > v[best].abs() { i } else { best },
    );
    if v[idx] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Fits the top-2 principal directions on the concatenation of `parts`.
pub fn fit_pca_2d(parts: &[&Matrix]) -> Result<Pca2> {
    if parts.is_empty() {
        return config_err("no data to project");
    }
    let all = Matrix::vstack(parts)?;
    if all.cols() < 2 {
        return config_err(format!(
            "projection needs at least 2 features, got {}",
            all.cols()
        ));
    }
    let mean = all.column_means();
    let mut cov = covariance(&all, &mean);
    let scale = (0..cov.len()).map(|i| cov[i][i]).fold(0.0, f64::max);
    let (l1, mut v1) = dominant_eigenpair(&cov, scale, None);
    // deflate
    for i in 0..cov.len() {
        for j in 0..cov.len() {
            cov[i][j] -= l1 * v1[i] * v1[j];
        }
    }
    let (l2, mut v2) = dominant_eigenpair(&cov, scale, Some(&v1));
    fix_sign(&mut v1);
    fix_sign(&mut v2);
    Ok(Pca2 {
        mean,
        components: [v1, v2],
        eigenvalues: [l1, l2.max(0.0)],
    })
}

impl Pca2 {
    pub fn project(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.mean.len() {
            return shape_err(format!(
                "projection fitted on {} features, got {}",
                self.mean.len(),
                x.cols()
            ));
        }
        let mut data = Vec::with_capacity(x.rows() * 2);
        for row in x.row_iter() {
            let centered: Vec<f64> = row.iter().zip(&self.mean).map(|(v, m)| v - m).collect();
            data.push(dot(&centered, &self.components[0]));
            data.push(dot(&centered, &self.components[1]));
        }
        Matrix::new(x.rows(), 2, data)
    }
}

/// Projects every part onto the top-2 principal directions of their union.
pub fn pca_project_2d(parts: &[&Matrix]) -> Result<Vec<Matrix>> {
    let pca = fit_pca_2d(parts)?;
    parts.iter().map(|p| pca.project(p)).collect()
}
