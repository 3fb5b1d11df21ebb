//! Downstream classifiers for the augmented training set.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, shape_err, Error, Result};
use crate::matrix::Matrix;

pub const DEFAULT_RIDGE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    /// Ridge least squares on one-hot targets.
    #[default]
    Lsq,
    /// Nearest class centroid.
    Centroid,
}

impl std::str::FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lsq" => Ok(ClassifierKind::Lsq),
            "centroid" => Ok(ClassifierKind::Centroid),
            other => config_err(format!(
                "unknown classifier `{other}` (expected lsq|centroid)"
            )),
        }
    }
}

/// Index of the largest score; ties go to the smaller index.
fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

fn check_labels(x: &Matrix, labels: &[usize], class_count: usize) -> Result<()> {
    if labels.len() != x.rows() {
        return shape_err(format!("{} labels for {} rows", labels.len(), x.rows()));
    }
    if class_count == 0 {
        return config_err("class count must be at least 1");
    }
    if let Some(l) = labels.iter().find(|&&l| l >= class_count) {
        return config_err(format!("label {l} outside [0, {class_count})"));
    }
    Ok(())
}

/// Linear scores `[x, 1]·W`; the last row of `weight` is the bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    pub weight: Matrix,
}

fn with_bias_column(x: &Matrix) -> Result<Matrix> {
    x.hstack(&Matrix::filled(x.rows(), 1, 1.0))
}

fn one_hot(labels: &[usize], class_count: usize) -> Result<Matrix> {
    let mut y = Matrix::zeros(labels.len().max(1), class_count);
    for (i, &l) in labels.iter().enumerate() {
        y.set(i, l, 1.0);
    }
    Ok(y)
}

/// Solves `A·X = B` for symmetric positive-definite `A` by Cholesky.
pub fn solve_spd(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    if a.cols() != n || b.rows() != n {
        return shape_err("solve_spd: incompatible shapes");
    }
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if !(s > 0.0 && s.is_finite()) {
                    return Err(Error::Numeric(format!(
                        "matrix not positive definite at pivot {i}"
                    )));
                }
                l.set(i, i, s.sqrt());
            } else {
                l.set(i, j, s / l.get(j, j));
            }
        }
    }
    let m = b.cols();
    let mut x = b.clone();
    for c in 0..m {
        // L y = b
        for i in 0..n {
            let mut s = x.get(i, c);
            for k in 0..i {
                s -= l.get(i, k) * x.get(k, c);
            }
            x.set(i, c, s / l.get(i, i));
        }
        // Lᵀ x = y
        for i in (0..n).rev() {
            let mut s = x.get(i, c);
            for k in i + 1..n {
                s -= l.get(k, i) * x.get(k, c);
            }
            x.set(i, c, s / l.get(i, i));
        }
    }
    Ok(x)
}

/// Minimizes `‖[X,1]W − Y‖² + λ‖W_feat‖²` where `Y` is the one-hot label
/// matrix and `W_feat` excludes the bias row.
pub fn fit_least_squares(
    x: &Matrix,
    labels: &[usize],
    class_count: usize,
    ridge: f64,
) -> Result<LinearClassifier> {
    check_labels(x, labels, class_count)?;
    if !(ridge > 0.0 && ridge.is_finite()) {
        return config_err(format!("ridge must be positive, got {ridge}"));
    }
    let a = with_bias_column(x)?;
    let y = one_hot(labels, class_count)?;
    let mut gram = a.t_matmul(&a)?;
    for j in 0..x.cols() {
        gram.set(j, j, gram.get(j, j) + ridge);
    }
    let rhs = a.t_matmul(&y)?;
    let weight = solve_spd(&gram, &rhs)?;
    weight.ensure_finite("least-squares weights")?;
    Ok(LinearClassifier { weight })
}

impl LinearClassifier {
    pub fn class_count(&self) -> usize {
        self.weight.cols()
    }

    pub fn scores(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() + 1 != self.weight.rows() {
            return shape_err(format!(
                "classifier expects {} features, got {}",
                self.weight.rows() - 1,
                x.cols()
            ));
        }
        with_bias_column(x)?.matmul(&self.weight)
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        Ok(self.scores(x)?.row_iter().map(argmax).collect())
    }

    /// The ridge objective this classifier minimizes, for the given data.
    pub fn objective(&self, x: &Matrix, labels: &[usize], ridge: f64) -> Result<f64> {
        let y = one_hot(labels, self.class_count())?;
        let resid = self.scores(x)?.sub(&y)?.frobenius_sq();
        let d = x.cols();
        let penalty: f64 = self.weight.as_slice()[..d * self.class_count()]
            .iter()
            .map(|w| w * w)
            .sum();
        Ok(resid + ridge * penalty)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidClassifier {
    /// `None` for classes absent from the training data.
    pub centroids: Vec<Option<Vec<f64>>>,
}

pub fn fit_centroid(
    x: &Matrix,
    labels: &[usize],
    class_count: usize,
) -> Result<CentroidClassifier> {
    check_labels(x, labels, class_count)?;
    let d = x.cols();
    let mut sums = vec![vec![0.0; d]; class_count];
    let mut counts = vec![0usize; class_count];
    for (row, &l) in x.row_iter().zip(labels) {
        counts[l] += 1;
        sums[l].iter_mut().zip(row).for_each(|(s, v)| *s += v);
    }
    let centroids = sums
        .into_iter()
        .zip(counts)
        .map(|(s, n)| (n > 0).then(|| s.into_iter().map(|v| v / n as f64).collect()))
        .collect();
    Ok(CentroidClassifier { centroids })
}

impl CentroidClassifier {
    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        let d = self.centroids.iter().flatten().next().map_or(0, Vec::len);
        if x.cols() != d {
            return shape_err(format!("classifier expects {d} features, got {}", x.cols()));
        }
        Ok(x.row_iter()
            .map(|row| {
                let mut best: Option<(usize, f64)> = None;
                for (c, centroid) in self.centroids.iter().enumerate() {
                    let Some(centroid) = centroid else { continue };
                    let dist: f64 = row
                        .iter()
                        .zip(centroid)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    if best.is_none_or(|(_, b)| dist < b) {
                        best = Some((c, dist));
                    }
                }
                best.map_or(0, |(c, _)| c)
            })
            .collect())
    }
}

/// Either fitted classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Classifier {
    Lsq(LinearClassifier),
    Centroid(CentroidClassifier),
}

impl Classifier {
    pub fn fit(
        kind: ClassifierKind,
        x: &Matrix,
        labels: &[usize],
        class_count: usize,
    ) -> Result<Self> {
        Ok(match kind {
            ClassifierKind::Lsq => {
                Classifier::Lsq(fit_least_squares(x, labels, class_count, DEFAULT_RIDGE)?)
            }
            ClassifierKind::Centroid => Classifier::Centroid(fit_centroid(x, labels, class_count)?),
        })
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        match self {
            Classifier::Lsq(c) => c.predict(x),
            Classifier::Centroid(c) => c.predict(x),
        }
    }
}

/// Fraction of positions where `pred` and `truth` agree.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() {
        return shape_err(format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        ));
    }
    if pred.is_empty() {
        return shape_err("accuracy of an empty set");
    }
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / pred.len() as f64)
}
