//! Two-dimensional PCA on image matrices.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::sym_eigen;

#[derive(Debug, Clone, PartialEq)]
pub struct TwoDPcaModel {
    pub(crate) mean: DMatrix<f64>,
    /// cols x d, orthonormal columns.
    pub(crate) axes: DMatrix<f64>,
    pub(crate) eigenvalues: Vec<f64>,
}

/// Image covariance G = (1/N) Σ (Aᵢ - Ā)ᵀ (Aᵢ - Ā), together with Ā.
pub fn image_covariance(chips: &[DMatrix<f64>]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let first = chips
        .first()
        .ok_or_else(|| Error::Model("2DPCA needs at least one chip".into()))?;
    let (rows, cols) = first.shape();
    for c in chips {
        if c.shape() != (rows, cols) {
            return Err(Error::DimensionMismatch {
                expected: format!("{rows}x{cols}"),
                actual: format!("{}x{}", c.nrows(), c.ncols()),
            });
        }
    }
    let n = chips.len() as f64;
    let mut mean = DMatrix::zeros(rows, cols);
    for c in chips {
        mean += c;
    }
    mean /= n;
    let mut g = DMatrix::zeros(cols, cols);
    for c in chips {
        let d = c - &mean;
        g += d.transpose() * d;
    }
    g /= n;
    Ok((mean, g))
}

impl TwoDPcaModel {
    pub fn fit(chips: &[DMatrix<f64>], d: usize) -> Result<Self> {
        let (mean, g) = image_covariance(chips)?;
        let cols = g.ncols();
        let mut d = d.max(1);
        if d > cols {
            log::warn!("requested {d} 2DPCA axes but chips have {cols} columns; clamping");
            d = cols;
        }
        let (values, vectors) = sym_eigen(&g);
        Ok(Self {
            mean,
            axes: vectors.columns(0, d).into_owned(),
            eigenvalues: values.into_iter().take(d).collect(),
        })
    }

    pub fn mean(&self) -> &DMatrix<f64> {
        &self.mean
    }

    pub fn axes(&self) -> &DMatrix<f64> {
        &self.axes
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn components(&self) -> usize {
        self.axes.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.mean.shape()
    }

    /// (A - Ā) · axes, a rows x d matrix.
    pub fn features(&self, chip: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if chip.shape() != self.mean.shape() {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", self.mean.nrows(), self.mean.ncols()),
                actual: format!("{}x{}", chip.nrows(), chip.ncols()),
            });
        }
        Ok((chip - &self.mean) * &self.axes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_chips() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let m = TwoDPcaModel::fit(&[a.clone(), a.clone()], 2).unwrap();
        let (_, g) = image_covariance(&[a.clone(), a.clone()]).unwrap();
        assert_eq!(g, DMatrix::zeros(3, 3));
        assert_eq!(m.features(&a).unwrap(), DMatrix::zeros(2, 2));
    }

    #[test]
    fn hand_covariance() {
        // Ā = [[1,1],[1,1]]; deviations ±[[1,0],[0,1]]; G = I.
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let (mean, g) = image_covariance(&[a, b]).unwrap();
        assert_eq!(mean, DMatrix::from_element(2, 2, 1.0));
        assert_eq!(g, DMatrix::identity(2, 2));
    }

    #[test]
    fn mean_maps_to_zero_and_clamps() {
        let chips: Vec<DMatrix<f64>> = (0..3)
            .map(|k| DMatrix::from_fn(3, 2, |r, c| ((r * 5 + c * 3 + k * 7) % 11) as f64))
            .collect();
        let m = TwoDPcaModel::fit(&chips, 5).unwrap();
        assert_eq!(m.components(), 2);
        let f = m.features(&m.mean().clone()).unwrap();
        assert!(f.iter().all(|v| v.abs() < 1e-12));
        assert!(m.features(&DMatrix::zeros(2, 2)).is_err());
    }
}
