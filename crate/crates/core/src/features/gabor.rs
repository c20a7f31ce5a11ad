//! Gabor filter bank texture features.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaborParams {
    pub scales: usize,
    pub orientations: usize,
    /// Odd kernel side.
    pub kernel_size: usize,
    /// Carrier wavelength at scale 0; each scale multiplies it by √2.
    pub lambda_min: f64,
    /// Spatial aspect ratio of the envelope.
    pub gamma: f64,
    /// Envelope σ as a fraction of the wavelength.
    pub sigma_ratio: f64,
}

impl Default for GaborParams {
    fn default() -> Self {
        Self {
            scales: 5,
            orientations: 8,
            kernel_size: 21,
            lambda_min: 4.0,
            gamma: 0.5,
            sigma_ratio: 0.56,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaborKernel {
    pub scale: usize,
    pub orientation: usize,
    pub theta: f64,
    pub wavelength: f64,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaborBank {
    params: GaborParams,
    kernels: Vec<GaborKernel>,
}

impl GaborBank {
    pub fn new(params: GaborParams) -> Result<Self> {
        if params.kernel_size.is_multiple_of(2) || params.scales == 0 || params.orientations == 0 {
            return Err(Error::Model(format!("invalid Gabor bank {params:?}")));
        }
        let half = (params.kernel_size / 2) as isize;
        let mut kernels = Vec::with_capacity(params.scales * params.orientations);
        for s in 0..params.scales {
            let wavelength = params.lambda_min * 2f64.sqrt().powi(s as i32);
            let sigma = params.sigma_ratio * wavelength;
            for o in 0..params.orientations {
                let theta = o as f64 * PI / params.orientations as f64;
                let (sin, cos) = theta.sin_cos();
                let mut re = Vec::with_capacity(params.kernel_size.pow(2));
                let mut im = Vec::with_capacity(params.kernel_size.pow(2));
                for y in -half..=half {
                    for x in -half..=half {
                        let (x, y) = (x as f64, y as f64);
                        let xr = x * cos + y * sin;
                        let yr = -x * sin + y * cos;
                        let env = (-(xr * xr + params.gamma.powi(2) * yr * yr) / (2.0 * sigma * sigma)).exp();
                        let phase = 2.0 * PI * xr / wavelength;
                        re.push(env * phase.cos());
                        im.push(env * phase.sin());
                    }
                }
                // Remove the DC component of the even part.
                let dc = re.iter().sum::<f64>() / re.len() as f64;
                re.iter_mut().for_each(|v| *v -= dc);
                kernels.push(GaborKernel {
                    scale: s,
                    orientation: o,
                    theta,
                    wavelength,
                    re,
                    im,
                });
            }
        }
        Ok(Self { params, kernels })
    }

    pub fn params(&self) -> &GaborParams {
        &self.params
    }

    pub fn kernels(&self) -> &[GaborKernel] {
        &self.kernels
    }

    /// Feature length: mean and standard deviation per filter.
    pub fn feature_len(&self) -> usize {
        2 * self.kernels.len()
    }

    /// Response magnitudes over the positions where the kernel lies fully inside the chip.
    pub fn response(&self, kernel: &GaborKernel, chip: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let k = self.params.kernel_size;
        let (rows, cols) = chip.shape();
        if rows < k || cols < k {
            return Err(Error::Size(format!(
                "chip {cols}x{rows} is smaller than the {k}x{k} Gabor kernel"
            )));
        }
        let (out_r, out_c) = (rows - k + 1, cols - k + 1);
        let mut out = DMatrix::zeros(out_r, out_c);
        for r in 0..out_r {
            for c in 0..out_c {
                let (mut sr, mut si) = (0.0, 0.0);
                for ky in 0..k {
                    for kx in 0..k {
                        // Correlation with the flipped kernel is convolution.
                        let v = chip[(r + k - 1 - ky, c + k - 1 - kx)];
                        let i = ky * k + kx;
                        sr += kernel.re[i] * v;
                        si += kernel.im[i] * v;
                    }
                }
                out[(r, c)] = (sr * sr + si * si).sqrt();
            }
        }
        Ok(out)
    }

    /// `[mean, std]` of the response magnitude for each filter, scale-major.
    pub fn features(&self, chip: &DMatrix<f64>) -> Result<DVector<f64>> {
        let mut out = Vec::with_capacity(self.feature_len());
        for kernel in &self.kernels {
            let resp = self.response(kernel, chip)?;
            let n = resp.len() as f64;
            let mean = resp.sum() / n;
            let var = resp.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            out.push(mean);
            out.push(var.sqrt());
        }
        Ok(DVector::from_vec(out))
    }
}

pub fn gabor_features(bank: &GaborBank, chip: &DMatrix<f64>) -> Result<DVector<f64>> {
    bank.features(chip)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> GaborBank {
        GaborBank::new(GaborParams {
            scales: 2,
            orientations: 4,
            kernel_size: 9,
            ..GaborParams::default()
        })
        .unwrap()
    }

    #[test]
    fn kernels_are_dc_free() {
        for k in GaborBank::new(GaborParams::default()).unwrap().kernels() {
            assert!(k.re.iter().sum::<f64>().abs() < 1e-6);
            assert!(k.im.iter().sum::<f64>().abs() < 1e-6);
        }
    }

    #[test]
    fn constant_chip_has_no_response() {
        let bank = small();
        let f = bank.features(&DMatrix::from_element(12, 12, 173.0)).unwrap();
        assert_eq!(f.len(), 2 * 2 * 4);
        for i in (0..f.len()).step_by(2) {
            assert!(f[i].abs() < 1e-4, "filter {} mean {}", i / 2, f[i]);
        }
    }

    #[test]
    fn too_small_chip() {
        assert!(matches!(
            small().features(&DMatrix::zeros(8, 20)),
            Err(Error::Size(_))
        ));
        assert!(GaborBank::new(GaborParams {
            kernel_size: 8,
            ..GaborParams::default()
        })
        .is_err());
    }
}
