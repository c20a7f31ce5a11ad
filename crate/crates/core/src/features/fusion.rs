//! 2DPCA + Gabor features, each reduced by its own FLD and concatenated.

use nalgebra::{DMatrix, DVector};

use crate::config::FeatureConfig;
use crate::error::{Error, Result};
use crate::features::eigenfaces::GalleryEntry;
use crate::features::fld::FldModel;
use crate::features::gabor::{GaborBank, GaborParams};
use crate::features::twodpca::TwoDPcaModel;
use crate::image::Image;
use crate::linalg::{image_matrix, median};

/// FLD-projected 2DPCA features followed by FLD-projected Gabor features.
pub fn fuse_features(
    f_2dpca: &DVector<f64>,
    f_gabor: &DVector<f64>,
    fld_2dpca: &FldModel,
    fld_gabor: &FldModel,
) -> Result<DVector<f64>> {
    let a = fld_2dpca.project(f_2dpca)?;
    let b = fld_gabor.project(f_gabor)?;
    let mut out = Vec::with_capacity(a.len() + b.len());
    out.extend(a.iter());
    out.extend(b.iter());
    Ok(DVector::from_vec(out))
}

/// Row-major flattening of a feature matrix.
pub fn flatten(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(m.len(), m.transpose().iter().copied())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedExtractor {
    pub(crate) twodpca: TwoDPcaModel,
    pub(crate) gabor: GaborBank,
    pub(crate) fld_2dpca: FldModel,
    pub(crate) fld_gabor: FldModel,
}

/// Largest odd kernel side that fits both `rows` and `cols`, capped at `wanted`.
fn fitting_kernel(wanted: usize, rows: usize, cols: usize) -> usize {
    let limit = wanted.min(rows).min(cols);
    if limit.is_multiple_of(2) {
        limit.saturating_sub(1).max(1)
    } else {
        limit
    }
}

impl FusedExtractor {
    pub fn fit(chips: &[DMatrix<f64>], labels: &[usize], cfg: &FeatureConfig) -> Result<Self> {
        let first = chips
            .first()
            .ok_or_else(|| Error::Model("fused features need training chips".into()))?;
        let twodpca = TwoDPcaModel::fit(chips, cfg.twodpca_components)?;
        let kernel = fitting_kernel(cfg.gabor_kernel, first.nrows(), first.ncols());
        if kernel != cfg.gabor_kernel {
            log::warn!(
                "Gabor kernel {} does not fit {}x{} chips; using {kernel}",
                cfg.gabor_kernel,
                first.ncols(),
                first.nrows()
            );
        }
        let gabor = GaborBank::new(GaborParams {
            scales: cfg.gabor_scales,
            orientations: cfg.gabor_orientations,
            kernel_size: kernel,
            lambda_min: cfg.gabor_lambda_min,
            gamma: cfg.gabor_gamma,
            sigma_ratio: cfg.gabor_sigma_ratio,
        })?;
        let mut f2 = Vec::with_capacity(chips.len());
        let mut fg = Vec::with_capacity(chips.len());
        for c in chips {
            f2.push(flatten(&twodpca.features(c)?));
            fg.push(gabor.features(c)?);
        }
        let fld_2dpca = FldModel::fit(&f2, labels, cfg.fld_lambda)?;
        let fld_gabor = FldModel::fit(&fg, labels, cfg.fld_lambda)?;
        Ok(Self {
            twodpca,
            gabor,
            fld_2dpca,
            fld_gabor,
        })
    }

    pub fn extract(&self, chip: &DMatrix<f64>) -> Result<DVector<f64>> {
        let f2 = flatten(&self.twodpca.features(chip)?);
        let fg = self.gabor.features(chip)?;
        fuse_features(&f2, &fg, &self.fld_2dpca, &self.fld_gabor)
    }

    pub fn output_dim(&self) -> usize {
        self.fld_2dpca.output_dim() + self.fld_gabor.output_dim()
    }
}

/// Identity recognition in the fused feature space.
///
/// Each training face is augmented with its one-pixel shifts so every identity
/// has enough samples for the within-class scatter.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedIdentity {
    pub(crate) extractor: FusedExtractor,
    pub(crate) gallery: Vec<GalleryEntry>,
    pub(crate) phi: f64,
}

impl FusedIdentity {
    pub fn fit(faces: &[Image], identities: &[String], cfg: &FeatureConfig) -> Result<Self> {
        if faces.len() != identities.len() {
            return Err(Error::Model(format!(
                "{} faces but {} identities",
                faces.len(),
                identities.len()
            )));
        }
        let mut names: Vec<&String> = identities.iter().collect();
        names.sort();
        names.dedup();
        let mut samples = Vec::new();
        let mut labels = Vec::new();
        for (face, id) in faces.iter().zip(identities) {
            let label = names.binary_search(&id).expect("identity present");
            for s in shifted_copies(&image_matrix(face)) {
                samples.push(s);
                labels.push(label);
            }
        }
        let extractor = FusedExtractor::fit(&samples, &labels, cfg)?;
        let gallery = faces
            .iter()
            .zip(identities)
            .map(|(f, id)| {
                Ok(GalleryEntry {
                    identity: id.clone(),
                    weights: extractor.extract(&image_matrix(f))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let phi = match cfg.phi {
            Some(p) => p,
            None => {
                let mut d = Vec::new();
                for (i, a) in gallery.iter().enumerate() {
                    for b in &gallery[i + 1..] {
                        d.push((&a.weights - &b.weights).norm());
                    }
                }
                cfg.phi_factor * median(&mut d).unwrap_or(0.0)
            }
        };
        Ok(Self {
            extractor,
            gallery,
            phi,
        })
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn gallery(&self) -> &[GalleryEntry] {
        &self.gallery
    }

    /// Nearest gallery entry and its distance; the identity is kept only if the distance is below Φ.
    pub fn recognize(&self, probe: &Image) -> Result<(Option<(usize, String)>, f64)> {
        let f = self.extractor.extract(&image_matrix(probe))?;
        let mut best: Option<(usize, f64)> = None;
        for (i, g) in self.gallery.iter().enumerate() {
            let d = (&f - &g.weights).norm();
            if best.is_none_or(|(_, b)| d < b) {
                best = Some((i, d));
            }
        }
        Ok(match best {
            Some((i, d)) if d < self.phi => (Some((i, self.gallery[i].identity.clone())), d),
            Some((_, d)) => (None, d),
            None => (None, f64::INFINITY),
        })
    }
}

/// The chip and its four one-pixel shifts (edges replicated).
pub fn shifted_copies(chip: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
    let (rows, cols) = chip.shape();
    let shift = |dr: isize, dc: isize| {
        DMatrix::from_fn(rows, cols, |r, c| {
            let sr = (r as isize - dr).clamp(0, rows as isize - 1) as usize;
            let sc = (c as isize - dc).clamp(0, cols as isize - 1) as usize;
            chip[(sr, sc)]
        })
    };
    vec![
        chip.clone(),
        shift(1, 0),
        shift(-1, 0),
        shift(0, 1),
        shift(0, -1),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    fn toy_fld(offset: f64) -> FldModel {
        let samples = vec![
            v(&[offset, 0.0]),
            v(&[offset + 1.0, 0.2]),
            v(&[offset + 5.0, 3.0]),
            v(&[offset + 6.0, 3.1]),
        ];
        FldModel::fit(&samples, &[0, 0, 1, 1], 1e-6).unwrap()
    }

    #[test]
    fn concatenates_projections() {
        let (a, b) = (toy_fld(0.0), toy_fld(2.0));
        let x = v(&[1.0, 2.0]);
        let y = v(&[3.0, -1.0]);
        let fused = fuse_features(&x, &y, &a, &b).unwrap();
        assert_eq!(fused.len(), 2);
        assert_eq!(fused[0], a.project(&x).unwrap()[0]);
        assert_eq!(fused[1], b.project(&y).unwrap()[0]);
        assert!(fuse_features(&v(&[1.0]), &y, &a, &b).is_err());
    }

    #[test]
    fn zero_input_with_centred_models() {
        let samples = vec![v(&[-3.0, -1.0]), v(&[-2.0, -1.2]), v(&[2.0, 1.0]), v(&[3.0, 1.2])];
        let m = FldModel::fit(&samples, &[0, 0, 1, 1], 1e-6).unwrap();
        assert!(m.mean().norm() < 1e-12);
        let fused = fuse_features(&v(&[0.0, 0.0]), &v(&[0.0, 0.0]), &m, &m).unwrap();
        assert!(fused.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn kernel_fitting() {
        assert_eq!(fitting_kernel(21, 64, 64), 21);
        assert_eq!(fitting_kernel(21, 6, 64), 5);
        assert_eq!(fitting_kernel(21, 10, 64), 9);
    }

    #[test]
    fn flatten_is_row_major() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(flatten(&m).as_slice(), &[1.0, 2.0, 3.0, 4.0]);
    }
}
