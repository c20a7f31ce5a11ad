//! Eigenface identity model.
//!
//! Training faces are mean-centred and the top eigenvectors of their
//! covariance form the face space. When there are fewer images than pixels
//! the eigenvectors come from the small N x N Gram matrix and are lifted back
//! to pixel space. A probe is recognised as the gallery identity whose
//! projection is nearest in Euclidean distance, provided that distance is
//! below the threshold Φ.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::linalg::{canonical_sign, image_vector, median, sym_eigen};

#[derive(Debug, Clone, PartialEq)]
pub struct GalleryEntry {
    pub identity: String,
    pub weights: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenModel {
    pub(crate) width: usize,
    pub(crate) height: usize,
    pub(crate) mean: DVector<f64>,
    /// Pixel-space basis, one orthonormal column per eigenface.
    pub(crate) eigenfaces: DMatrix<f64>,
    /// Covariance eigenvalues of the requested components, descending.
    pub(crate) eigenvalues: Vec<f64>,
    pub(crate) gallery: Vec<GalleryEntry>,
    pub(crate) phi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenParams {
    /// Components to keep; 0 keeps all.
    pub components: usize,
    /// Explicit Φ; otherwise `phi_factor` x median pairwise gallery distance.
    pub phi: Option<f64>,
    pub phi_factor: f64,
}

impl Default for EigenParams {
    fn default() -> Self {
        Self {
            components: 0,
            phi: None,
            phi_factor: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recognition {
    /// Index into the gallery and its identity, if `er < Φ`.
    pub identity: Option<(usize, String)>,
    /// Distance to the nearest gallery projection.
    pub distance: f64,
    /// Distance from the probe to its reconstruction in face space.
    pub face_space_distance: f64,
}

fn check_dims(width: usize, height: usize, img: &Image) -> Result<()> {
    if img.width() != width || img.height() != height || img.data().len() != width * height {
        return Err(Error::DimensionMismatch {
            expected: format!("{width}x{height} gray"),
            actual: format!("{}x{} {}", img.width(), img.height(), img.channels().name()),
        });
    }
    Ok(())
}

impl EigenModel {
    /// Fits a face space; each face is its own gallery identity named by index.
    pub fn fit(faces: &[Image], components: usize) -> Result<Self> {
        let labels: Vec<String> = (0..faces.len()).map(|i| i.to_string()).collect();
        Self::fit_labeled(
            faces,
            &labels,
            &EigenParams {
                components,
                ..EigenParams::default()
            },
        )
    }

    pub fn fit_labeled(faces: &[Image], identities: &[String], params: &EigenParams) -> Result<Self> {
        if faces.len() < 2 {
            return Err(Error::Model("eigenfaces need at least two training faces".into()));
        }
        if identities.len() != faces.len() {
            return Err(Error::Model(format!(
                "{} faces but {} identities",
                faces.len(),
                identities.len()
            )));
        }
        let (width, height) = (faces[0].width(), faces[0].height());
        for f in faces {
            check_dims(width, height, f)?;
        }
        let n = faces.len();
        let p = width * height;
        let mut requested = if params.components == 0 { n } else { params.components };
        if requested > n {
            log::warn!("requested {requested} eigenfaces but only {n} training faces; clamping");
            requested = n;
        }

        let mut x = DMatrix::zeros(p, n);
        for (j, f) in faces.iter().enumerate() {
            x.set_column(j, &image_vector(f));
        }
        let mean = x.column_mean();
        for mut col in x.column_iter_mut() {
            col -= &mean;
        }

        let (values, basis) = if n < p {
            // Gram trick: XᵀX v = λ v  =>  (XXᵀ)(Xv) = λ (Xv).
            let gram = x.transpose() * &x;
            let (vals, vecs) = sym_eigen(&gram);
            let mut lifted = DMatrix::zeros(p, n);
            for j in 0..n {
                let mut u = &x * vecs.column(j);
                let norm = u.norm();
                if norm > 0.0 {
                    u /= norm;
                }
                canonical_sign(&mut u);
                lifted.set_column(j, &u);
            }
            (vals, lifted)
        } else {
            sym_eigen(&(&x * x.transpose()))
        };

        let values: Vec<f64> = values.iter().map(|v| (v / n as f64).max(0.0)).collect();
        let eigenvalues: Vec<f64> = values.iter().take(requested).copied().collect();
        let tol = values.first().copied().unwrap_or(0.0).max(1.0) * 1e-10;
        let rank = eigenvalues.iter().take_while(|&&v| v > tol).count();
        let eigenfaces = basis.columns(0, rank).into_owned();

        let mut model = Self {
            width,
            height,
            mean,
            eigenfaces,
            eigenvalues,
            gallery: Vec::with_capacity(n),
            phi: 0.0,
        };
        for (f, id) in faces.iter().zip(identities) {
            let weights = model.project(f)?;
            model.gallery.push(GalleryEntry {
                identity: id.clone(),
                weights,
            });
        }
        model.phi = match params.phi {
            Some(phi) => phi,
            None => model.default_phi(params.phi_factor),
        };
        Ok(model)
    }

    fn default_phi(&self, factor: f64) -> f64 {
        let mut distances = Vec::new();
        for (i, a) in self.gallery.iter().enumerate() {
            for b in &self.gallery[i + 1..] {
                distances.push((&a.weights - &b.weights).norm());
            }
        }
        match median(&mut distances) {
            Some(m) => factor * m,
            None => f64::INFINITY,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn mean_face(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn eigenfaces(&self) -> &DMatrix<f64> {
        &self.eigenfaces
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn gallery(&self) -> &[GalleryEntry] {
        &self.gallery
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn set_phi(&mut self, phi: f64) {
        self.phi = phi;
    }

    pub fn components(&self) -> usize {
        self.eigenfaces.ncols()
    }

    /// Face-space weights of an image.
    pub fn project(&self, img: &Image) -> Result<DVector<f64>> {
        check_dims(self.width, self.height, img)?;
        Ok(self.project_vector(&image_vector(img)))
    }

    pub fn project_vector(&self, pixels: &DVector<f64>) -> DVector<f64> {
        self.eigenfaces.tr_mul(&(pixels - &self.mean))
    }

    /// Reconstruction from the first `m` eigenfaces.
    pub fn reconstruct(&self, weights: &DVector<f64>, m: usize) -> DVector<f64> {
        let m = m.min(self.components()).min(weights.len());
        &self.mean + self.eigenfaces.columns(0, m) * weights.rows(0, m)
    }

    /// Distance between an image and its reconstruction from `m` eigenfaces.
    pub fn reconstruction_error(&self, img: &Image, m: usize) -> Result<f64> {
        let weights = self.project(img)?;
        Ok((image_vector(img) - self.reconstruct(&weights, m)).norm())
    }

    pub fn recognize(&self, probe: &Image) -> Result<Recognition> {
        let weights = self.project(probe)?;
        let face_space_distance = (image_vector(probe) - self.reconstruct(&weights, self.components())).norm();
        let mut best: Option<(usize, f64)> = None;
        for (i, entry) in self.gallery.iter().enumerate() {
            let d = (&weights - &entry.weights).norm();
            if best.is_none_or(|(_, b)| d < b) {
                best = Some((i, d));
            }
        }
        let (index, distance) = best.expect("gallery is never empty");
        let identity = (distance < self.phi).then(|| (index, self.gallery[index].identity.clone()));
        Ok(Recognition {
            identity,
            distance,
            face_space_distance,
        })
    }
}

/// Greedy novelty scan: the first face is a key face, and each later face is
/// one if its projection is farther than `tau` from every key face so far.
/// Returns indices into `faces`.
pub fn extract_key_faces(model: &EigenModel, faces: &[Image], tau: f64) -> Result<Vec<usize>> {
    let mut keys: Vec<(usize, DVector<f64>)> = Vec::new();
    for (i, f) in faces.iter().enumerate() {
        let w = model.project(f)?;
        if keys.iter().all(|(_, k)| (&w - k).norm() > tau) {
            keys.push((i, w));
        }
    }
    Ok(keys.into_iter().map(|(i, _)| i).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chip(w: usize, h: usize, f: impl Fn(usize) -> u8) -> Image {
        Image::gray(w, h, (0..w * h).map(f).collect()).unwrap()
    }

    #[test]
    fn identical_faces_have_no_variance() {
        let c = chip(3, 3, |i| (i * 20) as u8);
        let m = EigenModel::fit(&[c.clone(), c.clone(), c.clone()], 0).unwrap();
        assert!((m.mean_face() - image_vector(&c)).amax() < 1e-9);
        assert!(m.eigenvalues().iter().all(|&v| v.abs() < 1e-9));
        assert!(m.project(&c).unwrap().iter().all(|&v| v.abs() < 1e-9));
    }

    #[test]
    fn clamps_components_and_checks_dims() {
        let a = chip(2, 2, |i| i as u8);
        let b = chip(2, 2, |i| (i * 3) as u8);
        let m = EigenModel::fit(&[a.clone(), b], 10).unwrap();
        assert_eq!(m.eigenvalues().len(), 2);
        assert!(m.components() <= 2);
        assert!(matches!(
            m.project(&chip(3, 2, |_| 0)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(EigenModel::fit(&[a.clone(), chip(3, 3, |_| 0)], 1).is_err());
        assert!(EigenModel::fit(&[a], 1).is_err());
    }

    #[test]
    fn gallery_probe_is_itself() {
        let faces: Vec<Image> = (0..4).map(|k| chip(4, 4, |i| ((i * 7 + k * 31) % 251) as u8)).collect();
        let m = EigenModel::fit(&faces, 0).unwrap();
        assert!(m.phi() > 0.0);
        for (k, f) in faces.iter().enumerate() {
            let r = m.recognize(f).unwrap();
            assert_eq!(r.identity.as_ref().map(|x| x.0), Some(k));
            assert!(r.distance < 1e-9);
        }
    }

    #[test]
    fn far_probe_is_unknown() {
        let faces = vec![chip(2, 2, |_| 100), chip(2, 2, |_| 110)];
        let mut m = EigenModel::fit(&faces, 0).unwrap();
        m.set_phi(5.0);
        let r = m.recognize(&chip(2, 2, |_| 250)).unwrap();
        assert!(r.distance > 5.0);
        assert!(r.identity.is_none());
    }

    #[test]
    fn key_faces() {
        let dark = chip(3, 3, |_| 0);
        let light = chip(3, 3, |_| 255);
        let m = EigenModel::fit(&[dark.clone(), light.clone()], 0).unwrap();
        let same = vec![dark.clone(); 4];
        assert_eq!(extract_key_faces(&m, &same, 1.0).unwrap(), vec![0]);
        // |dark - light| = 255 * 3 = 765 in the single eigenface direction.
        let mixed = vec![dark.clone(), dark.clone(), light.clone(), light];
        assert_eq!(extract_key_faces(&m, &mixed, 1.0).unwrap(), vec![0, 2]);
    }
}
