//! Feature matrices, PCA, `[0, pi]` scaling, dataset splits and synthetic
//! feature generation.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("expected {expected} values for a {rows}x{cols} matrix, got {got}")]
    Shape {
        rows: usize,
        cols: usize,
        expected: usize,
        got: usize,
    },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("label {0} is not -1 or +1")]
    BadLabel(i8),
    #[error("{0} labels for {1} rows")]
    LabelCount(usize, usize),
    #[error("dimension mismatch: expected {expected} columns, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("cannot keep {d_out} components of a {rows}x{cols} matrix")]
    TooManyComponents { d_out: usize, rows: usize, cols: usize },
    #[error("labels are required")]
    Unlabeled,
    #[error("fractions must lie in [0, 1) and leave room for training data")]
    BadFractions,
    #[error("need {needed} examples of class {class:+}, only {available} available")]
    InsufficientClass { class: i8, needed: usize, available: usize },
}

/// Dense row-major matrix of examples with optional `{-1, +1}` labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    labels: Option<Vec<i8>>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>, labels: Option<Vec<i8>>) -> Result<Self, FeatureError> {
        if data.len() != rows * cols {
            return Err(FeatureError::Shape {
                rows,
                cols,
                expected: rows * cols,
                got: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite {
                row: i / cols.max(1),
                col: i % cols.max(1),
            });
        }
        if let Some(l) = &labels {
            if l.len() != rows {
                return Err(FeatureError::LabelCount(l.len(), rows));
            }
            if let Some(&bad) = l.iter().find(|&&y| y != 1 && y != -1) {
                return Err(FeatureError::BadLabel(bad));
            }
        }
        Ok(Self {
            rows,
            cols,
            data,
            labels,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Option<Vec<i8>>) -> Result<Self, FeatureError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(FeatureError::Shape {
                    rows: i + 1,
                    cols,
                    expected: (i + 1) * cols,
                    got: data.len() + r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data, labels)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn labels(&self) -> Option<&[i8]> {
        self.labels.as_deref()
    }

    pub fn label(&self, i: usize) -> Option<i8> {
        self.labels.as_ref().map(|l| l[i])
    }

    pub fn with_labels(mut self, labels: Option<Vec<i8>>) -> Result<Self, FeatureError> {
        let data = core::mem::take(&mut self.data);
        Self::new(self.rows, self.cols, data, labels)
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            data,
            labels: self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect()),
        }
    }

    /// Appends the rows of `other`; labels are kept only if both have them.
    pub fn concat(&self, other: &FeatureMatrix) -> Result<Self, FeatureError> {
        if self.cols != other.cols && self.rows > 0 && other.rows > 0 {
            return Err(FeatureError::Dimension {
                expected: self.cols,
                got: other.cols,
            });
        }
        let cols = if self.rows > 0 { self.cols } else { other.cols };
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        let labels = match (&self.labels, &other.labels) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
            _ => None,
        };
        Self::new(self.rows + other.rows, cols, data, labels)
    }

    fn map_rows(&self, cols: usize, mut f: impl FnMut(&[f64], &mut Vec<f64>)) -> Self {
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in self.iter_rows() {
            f(r, &mut data);
        }
        Self {
            rows: self.rows,
            cols,
            data,
            labels: self.labels.clone(),
        }
    }

    pub fn positives(&self) -> usize {
        self.labels
            .as_ref()
            .map_or(0, |l| l.iter().filter(|&&y| y == 1).count())
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues and the matching eigenvectors (as rows), sorted by
/// decreasing eigenvalue.
pub fn symmetric_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let scale: f64 = m.iter().flat_map(|r| r.iter()).map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p][q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j][j].total_cmp(&m[i][i]));
    let values = order.iter().map(|&i| m[i][i]).collect();
    let vectors = order.iter().map(|&i| (0..n).map(|k| v[k][i]).collect()).collect();
    (values, vectors)
}

/// Principal axes of a training matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `d_out` orthonormal rows of length `d_in`.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    pub total_variance: f64,
    /// Some kept component carries (numerically) zero variance.
    pub rank_deficient: bool,
}

impl PcaModel {
    pub fn d_in(&self) -> usize {
        self.mean.len()
    }

    pub fn d_out(&self) -> usize {
        self.components.len()
    }

    pub fn transform_row(&self, x: &[f64]) -> Result<Vec<f64>, FeatureError> {
        if x.len() != self.d_in() {
            return Err(FeatureError::Dimension {
                expected: self.d_in(),
                got: x.len(),
            });
        }
        Ok(self
            .components
            .iter()
            .map(|c| c.iter().zip(x).zip(&self.mean).map(|((w, v), m)| w * (v - m)).sum())
            .collect())
    }

    pub fn transform(&self, x: &FeatureMatrix) -> Result<FeatureMatrix, FeatureError> {
        if x.cols != self.d_in() {
            return Err(FeatureError::Dimension {
                expected: self.d_in(),
                got: x.cols,
            });
        }
        Ok(x.map_rows(self.d_out(), |r, out| {
            out.extend(self.transform_row(r).expect("checked width"))
        }))
    }

    /// Maps reduced coordinates back to the input space.
    pub fn inverse_transform_row(&self, z: &[f64]) -> Result<Vec<f64>, FeatureError> {
        if z.len() != self.d_out() {
            return Err(FeatureError::Dimension {
                expected: self.d_out(),
                got: z.len(),
            });
        }
        let mut x = self.mean.clone();
        for (c, &zi) in self.components.iter().zip(z) {
            x.iter_mut().zip(c).for_each(|(xv, w)| *xv += zi * w);
        }
        Ok(x)
    }
}

/// Fits `d_out` principal components; covariance normalized by `rows - 1`.
///
/// Each component is signed so its largest-magnitude entry is positive.
pub fn pca_fit(x: &FeatureMatrix, d_out: usize) -> Result<PcaModel, FeatureError> {
    if x.rows < 2 {
        return Err(FeatureError::TooFewRows { needed: 2, got: x.rows });
    }
    if d_out == 0 || d_out > x.rows.min(x.cols) {
        return Err(FeatureError::TooManyComponents {
            d_out,
            rows: x.rows,
            cols: x.cols,
        });
    }
    let d = x.cols;
    let mut mean = vec![0.0; d];
    for r in x.iter_rows() {
        mean.iter_mut().zip(r).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= x.rows as f64);
    let mut cov = vec![vec![0.0; d]; d];
    for r in x.iter_rows() {
        let c: Vec<f64> = r.iter().zip(&mean).map(|(v, m)| v - m).collect();
        for i in 0..d {
            for j in i..d {
                cov[i][j] += c[i] * c[j];
            }
        }
    }
    let denom = (x.rows - 1) as f64;
    for i in 0..d {
        for j in i..d {
            cov[i][j] /= denom;
            cov[j][i] = cov[i][j];
        }
    }
    let total_variance: f64 = (0..d).map(|i| cov[i][i]).sum();
    let (values, vectors) = symmetric_eigen(&cov);
    let top = values.first().copied().unwrap_or(0.0).abs();
    let tiny = 1e-12 * top.max(f64::MIN_POSITIVE);
    let mut components = Vec::with_capacity(d_out);
    let mut explained_variance = Vec::with_capacity(d_out);
    let mut rank_deficient = false;
    for (val, mut vec) in values.into_iter().zip(vectors).take(d_out) {
        let lead = vec
            .iter()
            .enumerate()
            .fold(0, |b, (i, v)| if v.abs() > vec[b].abs() + 1e-12 { i } else { b });
        if vec[lead] < 0.0 {
            vec.iter_mut().for_each(|v| *v = -*v);
        }
        rank_deficient |= val <= tiny;
        components.push(vec);
        explained_variance.push(val.max(0.0));
    }
    Ok(PcaModel {
        mean,
        components,
        explained_variance,
        total_variance,
        rank_deficient,
    })
}

/// Per-feature affine map of the training range onto `[0, pi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Scaler {
    pub fn fit(x: &FeatureMatrix) -> Result<Self, FeatureError> {
        if x.rows == 0 {
            return Err(FeatureError::TooFewRows { needed: 1, got: 0 });
        }
        let mut min = vec![f64::INFINITY; x.cols];
        let mut max = vec![f64::NEG_INFINITY; x.cols];
        for r in x.iter_rows() {
            for (j, &v) in r.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Ok(Self { min, max })
    }

    /// Scales one row; out-of-range values are clamped into `[0, pi]` and
    /// counted. Constant training features map to `pi / 2`.
    pub fn apply_row(&self, x: &[f64], clamped: &mut usize) -> Result<Vec<f64>, FeatureError> {
        if x.len() != self.min.len() {
            return Err(FeatureError::Dimension {
                expected: self.min.len(),
                got: x.len(),
            });
        }
        Ok(x.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&v, (&lo, &hi))| {
                if hi <= lo {
                    return FRAC_PI_2;
                }
                let s = (v - lo) / (hi - lo) * PI;
                if !(0.0..=PI).contains(&s) {
                    *clamped += 1;
                }
                s.clamp(0.0, PI)
            })
            .collect())
    }

    /// Scales a matrix, returning it with the number of clamped entries.
    pub fn apply(&self, x: &FeatureMatrix) -> Result<(FeatureMatrix, usize), FeatureError> {
        if x.cols != self.min.len() {
            return Err(FeatureError::Dimension {
                expected: self.min.len(),
                got: x.cols,
            });
        }
        let mut clamped = 0;
        let out = x.map_rows(x.cols, |r, out| {
            out.extend(self.apply_row(r, &mut clamped).expect("checked width"))
        });
        Ok((out, clamped))
    }

    pub fn fit_transform(x: &FeatureMatrix) -> Result<(Self, FeatureMatrix), FeatureError> {
        let s = Self::fit(x)?;
        let (out, _) = s.apply(x)?;
        Ok((s, out))
    }
}

/// PCA followed by `[0, pi]` scaling, both fit on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub pca: PcaModel,
    pub scaler: Scaler,
}

impl Preprocessor {
    pub fn fit(x: &FeatureMatrix, d_out: usize) -> Result<(Self, FeatureMatrix), FeatureError> {
        let pca = pca_fit(x, d_out)?;
        let reduced = pca.transform(x)?;
        let (scaler, scaled) = Scaler::fit_transform(&reduced)?;
        Ok((Self { pca, scaler }, scaled))
    }

    pub fn d_in(&self) -> usize {
        self.pca.d_in()
    }

    pub fn d_out(&self) -> usize {
        self.pca.d_out()
    }

    pub fn apply_row(&self, x: &[f64]) -> Result<Vec<f64>, FeatureError> {
        let mut clamped = 0;
        self.scaler.apply_row(&self.pca.transform_row(x)?, &mut clamped)
    }

    pub fn apply(&self, x: &FeatureMatrix) -> Result<(FeatureMatrix, usize), FeatureError> {
        self.scaler.apply(&self.pca.transform(x)?)
    }
}

/// Fractions for [`split_dataset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    /// Share of the (rebalanced) data held out for testing.
    pub test_fraction: f64,
    /// Share of the remainder held out for validation.
    pub val_fraction: f64,
    /// Positive-class share to enforce by subsampling, if any.
    pub positive_fraction: Option<f64>,
    /// Total examples to draw when rebalancing; all that fit when `None`.
    pub total: Option<usize>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            test_fraction: 0.25,
            val_fraction: 0.25,
            positive_fraction: None,
            total: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: FeatureMatrix,
    pub val: FeatureMatrix,
    pub test: FeatureMatrix,
}

fn shuffled_class(x: &FeatureMatrix, class: i8, rng: &mut crate::rng::Rng) -> Vec<usize> {
    let labels = x.labels.as_ref().expect("caller checked labels");
    let mut idx: Vec<usize> = (0..x.rows).filter(|&i| labels[i] == class).collect();
    idx.shuffle(rng);
    idx
}

/// Stratified train/validation/test split.
///
/// With `test_fraction = val_fraction = 0.25` a 1000-row input yields 250
/// test rows, 187 validation rows and 563 training rows. Each class is
/// spread over the three parts in proportion to its share.
pub fn split_dataset(x: &FeatureMatrix, cfg: &SplitConfig, seed: u64) -> Result<Split, FeatureError> {
    let ok = |f: f64| (0.0..1.0).contains(&f);
    if !ok(cfg.test_fraction) || !ok(cfg.val_fraction) {
        return Err(FeatureError::BadFractions);
    }
    if x.labels.is_none() {
        return Err(FeatureError::Unlabeled);
    }
    let mut rng = rng_from_seed(seed);
    let mut pos = shuffled_class(x, 1, &mut rng);
    let mut neg = shuffled_class(x, -1, &mut rng);
    if let Some(frac) = cfg.positive_fraction {
        if !(0.0..=1.0).contains(&frac) {
            return Err(FeatureError::BadFractions);
        }
        let total = cfg.total.unwrap_or_else(|| {
            let by_pos = if frac > 0.0 {
                pos.len() as f64 / frac
            } else {
                f64::INFINITY
            };
            let by_neg = if frac < 1.0 {
                neg.len() as f64 / (1.0 - frac)
            } else {
                f64::INFINITY
            };
            by_pos.min(by_neg).floor() as usize
        });
        let need_pos = (total as f64 * frac).round() as usize;
        let need_neg = total - need_pos;
        if need_pos > pos.len() || (frac > 0.0 && need_pos == 0) {
            return Err(FeatureError::InsufficientClass {
                class: 1,
                needed: need_pos.max(1),
                available: pos.len(),
            });
        }
        if need_neg > neg.len() {
            return Err(FeatureError::InsufficientClass {
                class: -1,
                needed: need_neg,
                available: neg.len(),
            });
        }
        pos.truncate(need_pos);
        neg.truncate(need_neg);
    } else if let Some(total) = cfg.total {
        let n = pos.len() + neg.len();
        if total > n {
            return Err(FeatureError::TooFewRows { needed: total, got: n });
        }
        let keep_pos = (total as f64 * pos.len() as f64 / n as f64).round() as usize;
        pos.truncate(keep_pos);
        neg.truncate(total - keep_pos);
    }
    let n = pos.len() + neg.len();
    let n_test = (n as f64 * cfg.test_fraction).floor() as usize;
    let n_val = ((n - n_test) as f64 * cfg.val_fraction).floor() as usize;
    let share = pos.len() as f64 / n.max(1) as f64;
    let test_pos = ((n_test as f64 * share).round() as usize).min(pos.len());
    let val_pos = ((n_val as f64 * share).round() as usize).min(pos.len() - test_pos);
    let test_neg = n_test - test_pos;
    let val_neg = n_val - val_pos;
    if test_neg + val_neg > neg.len() {
        return Err(FeatureError::InsufficientClass {
            class: -1,
            needed: test_neg + val_neg,
            available: neg.len(),
        });
    }
    let part = |a: &[usize], b: &[usize]| -> Vec<usize> {
        let mut v: Vec<usize> = a.iter().chain(b).copied().collect();
        v.sort_unstable();
        v
    };
    Ok(Split {
        test: x.select(&part(&pos[..test_pos], &neg[..test_neg])),
        val: x.select(&part(
            &pos[test_pos..test_pos + val_pos],
            &neg[test_neg..test_neg + val_neg],
        )),
        train: x.select(&part(&pos[test_pos + val_pos..], &neg[test_neg + val_neg..])),
    })
}

/// Two isotropic Gaussian classes separated along the main diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub rows: usize,
    pub dims: usize,
    pub positive_fraction: f64,
    /// Distance between the class means, in units of `sigma`.
    pub separation: f64,
    pub sigma: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            rows: 100,
            dims: 4,
            positive_fraction: 0.5,
            separation: 6.0,
            sigma: 1.0,
        }
    }
}

/// Draws a shuffled labelled matrix from `spec`.
pub fn generate_synthetic_features(spec: &SyntheticSpec, seed: u64) -> Result<FeatureMatrix, FeatureError> {
    if !(0.0..=1.0).contains(&spec.positive_fraction) {
        return Err(FeatureError::BadFractions);
    }
    let mut rng = rng_from_seed(seed);
    let n_pos = (spec.rows as f64 * spec.positive_fraction).round() as usize;
    let mut labels: Vec<i8> = (0..spec.rows).map(|i| if i < n_pos { 1 } else { -1 }).collect();
    labels.shuffle(&mut rng);
    let offset = spec.separation * spec.sigma / 2.0 / (spec.dims.max(1) as f64).sqrt();
    let mut data = Vec::with_capacity(spec.rows * spec.dims);
    for &y in &labels {
        for _ in 0..spec.dims {
            let z: f64 = StandardNormal.sample(&mut rng);
            data.push(y as f64 * offset + spec.sigma * z);
        }
    }
    FeatureMatrix::new(spec.rows, spec.dims, data, Some(labels))
}
