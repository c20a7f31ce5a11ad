//! Flat `key = value` configuration.
//!
//! Lines starting with `#` are comments. Every key has a default; unknown keys
//! are rejected.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SkinConfig {
    pub rgb_r_min: f64,
    pub rgb_g_min: f64,
    pub rgb_b_min: f64,
    pub rgb_spread_min: f64,
    pub rgb_rg_diff_min: f64,
    pub cb_min: f64,
    pub cb_max: f64,
    pub cr_min: f64,
    pub cr_max: f64,
    /// Hue accepted in `[0, hue_low_max]`, degrees.
    pub hue_low_max: f64,
    /// Hue accepted in `[hue_high_min, 360]`, degrees.
    pub hue_high_min: f64,
    pub sat_min: f64,
    pub sat_max: f64,
    /// Intensity floor on the 0..255 scale.
    pub intensity_min: f64,
}

impl Default for SkinConfig {
    fn default() -> Self {
        Self {
            rgb_r_min: 95.0,
            rgb_g_min: 40.0,
            rgb_b_min: 20.0,
            rgb_spread_min: 15.0,
            rgb_rg_diff_min: 15.0,
            cb_min: 77.0,
            cb_max: 127.0,
            cr_min: 133.0,
            cr_max: 173.0,
            hue_low_max: 50.0,
            hue_high_min: 340.0,
            sat_min: 0.10,
            sat_max: 0.70,
            intensity_min: 40.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectConfig {
    /// Minimum component area as a fraction of the image area.
    pub min_area_frac: f64,
    /// Bounds on box height / width.
    pub aspect_min: f64,
    pub aspect_max: f64,
    pub min_eye_blobs: usize,
    pub min_mouth_blobs: usize,
    pub min_blob_px: usize,
    /// Clamp range for the Otsu dark-feature threshold.
    pub threshold_min: u8,
    pub threshold_max: u8,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            min_area_frac: 0.002,
            aspect_min: 0.8,
            aspect_max: 2.2,
            min_eye_blobs: 2,
            min_mouth_blobs: 1,
            min_blob_px: 2,
            threshold_min: 30,
            threshold_max: 120,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureSpace {
    Eigen,
    TwoDPca,
    Fused,
}

impl FeatureSpace {
    pub fn name(self) -> &'static str {
        match self {
            FeatureSpace::Eigen => "eigen",
            FeatureSpace::TwoDPca => "2dpca",
            FeatureSpace::Fused => "fused",
        }
    }
}

impl FromStr for FeatureSpace {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "eigen" => Ok(FeatureSpace::Eigen),
            "2dpca" => Ok(FeatureSpace::TwoDPca),
            "fused" => Ok(FeatureSpace::Fused),
            other => Err(format!("unknown feature space `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    /// Face-chip side in pixels.
    pub chip_size: usize,
    /// Eigenfaces kept; 0 keeps all.
    pub eigen_components: usize,
    /// Explicit recognition threshold; `None` derives it from the gallery.
    pub phi: Option<f64>,
    pub phi_factor: f64,
    pub tau_factor: f64,
    pub twodpca_components: usize,
    pub gabor_scales: usize,
    pub gabor_orientations: usize,
    pub gabor_kernel: usize,
    pub gabor_lambda_min: f64,
    pub gabor_gamma: f64,
    pub gabor_sigma_ratio: f64,
    pub fld_lambda: f64,
    pub au_space: FeatureSpace,
    pub identity_space: FeatureSpace,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            chip_size: 64,
            eigen_components: 0,
            phi: None,
            phi_factor: 0.8,
            tau_factor: 0.5,
            twodpca_components: 3,
            gabor_scales: 5,
            gabor_orientations: 8,
            gabor_kernel: 21,
            gabor_lambda_min: 4.0,
            gabor_gamma: 0.5,
            gabor_sigma_ratio: 0.56,
            fld_lambda: 1e-6,
            au_space: FeatureSpace::TwoDPca,
            identity_space: FeatureSpace::Eigen,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalConfig {
    /// F-measure weight.
    pub beta: f64,
    /// Pattern Hamming radius for fuzzy matching; 0 disables it.
    pub hamming_radius: u32,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            hamming_radius: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Config {
    pub skin: SkinConfig,
    pub detect: DetectConfig,
    pub features: FeatureConfig,
    pub retrieval: RetrievalConfig,
}

fn parse_num<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config {
        line,
        message: format!("invalid value `{value}` for `{key}`"),
    })
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                line: i + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            config.set(i + 1, key.trim(), value.trim())?;
        }
        config.validate()?;
        Ok(config)
    }

    fn set(&mut self, line: usize, key: &str, value: &str) -> Result<()> {
        macro_rules! num {
            ($field:expr) => {
                $field = parse_num(line, key, value)?
            };
        }
        let s = &mut self.skin;
        let d = &mut self.detect;
        let f = &mut self.features;
        let r = &mut self.retrieval;
        match key {
            "skin.rgb.r_min" => num!(s.rgb_r_min),
            "skin.rgb.g_min" => num!(s.rgb_g_min),
            "skin.rgb.b_min" => num!(s.rgb_b_min),
            "skin.rgb.spread_min" => num!(s.rgb_spread_min),
            "skin.rgb.rg_diff_min" => num!(s.rgb_rg_diff_min),
            "skin.ycbcr.cb_min" => num!(s.cb_min),
            "skin.ycbcr.cb_max" => num!(s.cb_max),
            "skin.ycbcr.cr_min" => num!(s.cr_min),
            "skin.ycbcr.cr_max" => num!(s.cr_max),
            "skin.hsi.hue_low_max" => num!(s.hue_low_max),
            "skin.hsi.hue_high_min" => num!(s.hue_high_min),
            "skin.hsi.sat_min" => num!(s.sat_min),
            "skin.hsi.sat_max" => num!(s.sat_max),
            "skin.hsi.intensity_min" => num!(s.intensity_min),
            "detect.min_area_frac" => num!(d.min_area_frac),
            "detect.aspect_min" => num!(d.aspect_min),
            "detect.aspect_max" => num!(d.aspect_max),
            "detect.min_eye_blobs" => num!(d.min_eye_blobs),
            "detect.min_mouth_blobs" => num!(d.min_mouth_blobs),
            "detect.min_blob_px" => num!(d.min_blob_px),
            "detect.threshold_min" => num!(d.threshold_min),
            "detect.threshold_max" => num!(d.threshold_max),
            "chip.size" => num!(f.chip_size),
            "recog.components" => num!(f.eigen_components),
            "recog.phi" => {
                f.phi = if value == "auto" {
                    None
                } else {
                    Some(parse_num(line, key, value)?)
                }
            }
            "recog.phi_factor" => num!(f.phi_factor),
            "recog.tau_factor" => num!(f.tau_factor),
            "recog.space" => {
                f.identity_space = value.parse().map_err(|m| Error::Config { line, message: m })?
            }
            "au.space" => {
                f.au_space = value.parse().map_err(|m| Error::Config { line, message: m })?
            }
            "twodpca.components" => num!(f.twodpca_components),
            "gabor.scales" => num!(f.gabor_scales),
            "gabor.orientations" => num!(f.gabor_orientations),
            "gabor.kernel" => num!(f.gabor_kernel),
            "gabor.lambda_min" => num!(f.gabor_lambda_min),
            "gabor.gamma" => num!(f.gabor_gamma),
            "gabor.sigma_ratio" => num!(f.gabor_sigma_ratio),
            "fld.lambda" => num!(f.fld_lambda),
            "eval.beta" => num!(r.beta),
            "retrieval.hamming_radius" => num!(r.hamming_radius),
            other => {
                return Err(Error::Config {
                    line,
                    message: format!("unknown key `{other}`"),
                })
            }
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        let bad = |message: &str| {
            Err(Error::Config {
                line: 0,
                message: message.to_string(),
            })
        };
        let f = &self.features;
        if f.chip_size < 24 {
            return bad("chip.size must be at least 24");
        }
        if f.identity_space == FeatureSpace::TwoDPca {
            return bad("recog.space must be `eigen` or `fused`");
        }
        if f.au_space == FeatureSpace::Eigen {
            return bad("au.space must be `2dpca` or `fused`");
        }
        if f.gabor_kernel.is_multiple_of(2) {
            return bad("gabor.kernel must be odd");
        }
        if f.gabor_scales == 0 || f.gabor_orientations == 0 || f.twodpca_components == 0 {
            return bad("component counts must be positive");
        }
        if !self.retrieval.beta.is_finite() || self.retrieval.beta <= 0.0 {
            return bad("eval.beta must be positive");
        }
        if self.detect.aspect_min > self.detect.aspect_max {
            return bad("detect.aspect_min exceeds detect.aspect_max");
        }
        Ok(())
    }

    /// Effective configuration in the same `key = value` form, sorted by key.
    pub fn echo(&self) -> String {
        let s = &self.skin;
        let d = &self.detect;
        let f = &self.features;
        let r = &self.retrieval;
        let mut entries: Vec<(&str, String)> = vec![
            ("skin.rgb.r_min", s.rgb_r_min.to_string()),
            ("skin.rgb.g_min", s.rgb_g_min.to_string()),
            ("skin.rgb.b_min", s.rgb_b_min.to_string()),
            ("skin.rgb.spread_min", s.rgb_spread_min.to_string()),
            ("skin.rgb.rg_diff_min", s.rgb_rg_diff_min.to_string()),
            ("skin.ycbcr.cb_min", s.cb_min.to_string()),
            ("skin.ycbcr.cb_max", s.cb_max.to_string()),
            ("skin.ycbcr.cr_min", s.cr_min.to_string()),
            ("skin.ycbcr.cr_max", s.cr_max.to_string()),
            ("skin.hsi.hue_low_max", s.hue_low_max.to_string()),
            ("skin.hsi.hue_high_min", s.hue_high_min.to_string()),
            ("skin.hsi.sat_min", s.sat_min.to_string()),
            ("skin.hsi.sat_max", s.sat_max.to_string()),
            ("skin.hsi.intensity_min", s.intensity_min.to_string()),
            ("detect.min_area_frac", d.min_area_frac.to_string()),
            ("detect.aspect_min", d.aspect_min.to_string()),
            ("detect.aspect_max", d.aspect_max.to_string()),
            ("detect.min_eye_blobs", d.min_eye_blobs.to_string()),
            ("detect.min_mouth_blobs", d.min_mouth_blobs.to_string()),
            ("detect.min_blob_px", d.min_blob_px.to_string()),
            ("detect.threshold_min", d.threshold_min.to_string()),
            ("detect.threshold_max", d.threshold_max.to_string()),
            ("chip.size", f.chip_size.to_string()),
            ("recog.components", f.eigen_components.to_string()),
            (
                "recog.phi",
                f.phi.map_or_else(|| "auto".to_string(), |p| p.to_string()),
            ),
            ("recog.phi_factor", f.phi_factor.to_string()),
            ("recog.tau_factor", f.tau_factor.to_string()),
            ("recog.space", f.identity_space.name().to_string()),
            ("au.space", f.au_space.name().to_string()),
            ("twodpca.components", f.twodpca_components.to_string()),
            ("gabor.scales", f.gabor_scales.to_string()),
            ("gabor.orientations", f.gabor_orientations.to_string()),
            ("gabor.kernel", f.gabor_kernel.to_string()),
            ("gabor.lambda_min", f.gabor_lambda_min.to_string()),
            ("gabor.gamma", f.gabor_gamma.to_string()),
            ("gabor.sigma_ratio", f.gabor_sigma_ratio.to_string()),
            ("fld.lambda", f.fld_lambda.to_string()),
            ("eval.beta", r.beta.to_string()),
            ("retrieval.hamming_radius", r.hamming_radius.to_string()),
        ];
        entries.sort_by(|a, b| a.0.cmp(b.0));
        let mut out = String::new();
        for (k, v) in entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}
