//! Fisher's linear discriminant.
//!
//! Maximises wᵀS_B w / wᵀS_W w. The within-class scatter is regularised by λI
//! and whitened through its eigendecomposition V Λ Vᵀ, turning the generalised
//! problem into the symmetric one Tᵀ S_B T y = ρ y with T = V Λ^{-1/2}, w = T y.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{canonical_sign, sym_eigen};

#[derive(Debug, Clone, PartialEq)]
pub struct FldModel {
    pub(crate) mean: DVector<f64>,
    pub(crate) class_labels: Vec<usize>,
    pub(crate) class_means: Vec<DVector<f64>>,
    pub(crate) within: DMatrix<f64>,
    pub(crate) between: DMatrix<f64>,
    /// dim x k, unit-length columns, descending Fisher ratio.
    pub(crate) axes: DMatrix<f64>,
    pub(crate) ratios: Vec<f64>,
}

/// Overall mean, per-class means, within-class and between-class scatter.
pub type Scatter = (DVector<f64>, BTreeMap<usize, DVector<f64>>, DMatrix<f64>, DMatrix<f64>);

/// Within- and between-class scatter matrices plus the per-class means.
pub fn scatter_matrices(samples: &[DVector<f64>], labels: &[usize]) -> Result<Scatter> {
    if samples.len() != labels.len() || samples.is_empty() {
        return Err(Error::Model(format!(
            "{} samples but {} labels",
            samples.len(),
            labels.len()
        )));
    }
    let dim = samples[0].len();
    if let Some(bad) = samples.iter().find(|s| s.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim.to_string(),
            actual: bad.len().to_string(),
        });
    }
    let mut groups: BTreeMap<usize, Vec<&DVector<f64>>> = BTreeMap::new();
    for (s, &l) in samples.iter().zip(labels) {
        groups.entry(l).or_default().push(s);
    }
    let mean = samples.iter().fold(DVector::zeros(dim), |acc, s| acc + s) / samples.len() as f64;
    let mut within = DMatrix::zeros(dim, dim);
    let mut between = DMatrix::zeros(dim, dim);
    let mut means = BTreeMap::new();
    for (&label, members) in &groups {
        let mu = members.iter().fold(DVector::zeros(dim), |acc, s| acc + *s) / members.len() as f64;
        for s in members {
            let d = *s - &mu;
            within += &d * d.transpose();
        }
        let d = &mu - &mean;
        between += (&d * d.transpose()) * members.len() as f64;
        means.insert(label, mu);
    }
    Ok((mean, means, within, between))
}

impl FldModel {
    pub fn fit(samples: &[DVector<f64>], labels: &[usize], lambda: f64) -> Result<Self> {
        let (mean, means, within, between) = scatter_matrices(samples, labels)?;
        if means.len() < 2 {
            return Err(Error::Model("FLD needs at least two classes".into()));
        }
        for label in means.keys() {
            let count = labels.iter().filter(|&&l| l == *label).count();
            if count < 2 {
                return Err(Error::Model(format!(
                    "FLD class {label} has {count} sample(s); need at least two"
                )));
            }
        }
        let dim = mean.len();
        let reg = &within + DMatrix::identity(dim, dim) * lambda.max(0.0);
        let (w_values, w_vectors) = sym_eigen(&reg);
        if w_values.last().is_none_or(|&v| v <= 0.0) {
            return Err(Error::Model(
                "within-class scatter is singular; raise fld.lambda".into(),
            ));
        }
        // Whitening T = V Λ^{-1/2}, so Tᵀ S_W' T = I.
        let mut whiten = w_vectors;
        for (j, v) in w_values.iter().enumerate() {
            whiten.column_mut(j).scale_mut(1.0 / v.sqrt());
        }
        let c = whiten.transpose() * &between * &whiten;
        let c = (&c + c.transpose()) * 0.5;
        let (values, vectors) = sym_eigen(&c);

        let k = (means.len() - 1).min(dim);
        let mut axes = DMatrix::zeros(dim, k);
        for j in 0..k {
            let mut w = &whiten * vectors.column(j);
            let norm = w.norm();
            if norm > 0.0 {
                w /= norm;
            }
            canonical_sign(&mut w);
            axes.set_column(j, &w);
        }
        let (class_labels, class_means) = means.into_iter().unzip();
        Ok(Self {
            mean,
            class_labels,
            class_means,
            within,
            between,
            axes,
            ratios: values.into_iter().take(k).collect(),
        })
    }

    pub fn axes(&self) -> &DMatrix<f64> {
        &self.axes
    }

    /// Fisher ratios (under the regularised within-class scatter), descending.
    pub fn ratios(&self) -> &[f64] {
        &self.ratios
    }

    pub fn within(&self) -> &DMatrix<f64> {
        &self.within
    }

    pub fn between(&self) -> &DMatrix<f64> {
        &self.between
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn class_means(&self) -> impl Iterator<Item = (usize, &DVector<f64>)> {
        self.class_labels.iter().copied().zip(&self.class_means)
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.axes.ncols()
    }

    /// wᵀ S_B w / wᵀ S_W w for an arbitrary direction.
    pub fn fisher_ratio(&self, w: &DVector<f64>) -> f64 {
        let b = (w.transpose() * &self.between * w)[0];
        let s = (w.transpose() * &self.within * w)[0];
        b / s
    }

    /// Axesᵀ (x - mean).
    pub fn project(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len().to_string(),
                actual: x.len().to_string(),
            });
        }
        Ok(self.axes.tr_mul(&(x - &self.mean)))
    }
}
