//! Per-region AU template gallery and nearest-template AU matching.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DVector;

use crate::config::{FeatureConfig, FeatureSpace};
use crate::error::{Error, Result};
use crate::facs::Region;
use crate::features::fusion::{flatten, shifted_copies, FusedExtractor};
use crate::features::twodpca::TwoDPcaModel;
use crate::image::{load_image, save_image, Image};
use crate::linalg::image_matrix;

/// Template key: region and AU code, `None` for the region's neutral template.
pub type TemplateKey = (Region, Option<u8>);

#[derive(Debug, Clone, PartialEq)]
pub enum RegionExtractor {
    TwoDPca(TwoDPcaModel),
    Fused(Box<FusedExtractor>),
}

impl RegionExtractor {
    pub fn extract(&self, chip: &Image) -> Result<DVector<f64>> {
        let m = image_matrix(chip);
        match self {
            RegionExtractor::TwoDPca(model) => Ok(flatten(&model.features(&m)?)),
            RegionExtractor::Fused(model) => model.extract(&m),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionGallery {
    pub region: Region,
    pub extractor: RegionExtractor,
    /// Neutral first, then AUs ascending.
    pub templates: Vec<(Option<u8>, DVector<f64>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuTemplateGallery {
    pub(crate) regions: Vec<RegionGallery>,
}

fn template_keys(region: Region) -> impl Iterator<Item = Option<u8>> {
    std::iter::once(None).chain(region.au_list().iter().map(|&a| Some(a)))
}

impl AuTemplateGallery {
    /// Fits one feature extractor per region on that region's template chips.
    pub fn build(chips: &BTreeMap<TemplateKey, Image>, cfg: &FeatureConfig) -> Result<Self> {
        let mut regions = Vec::with_capacity(6);
        for region in Region::CANONICAL {
            let mut region_chips = Vec::new();
            for key in template_keys(region) {
                let chip = chips.get(&(region, key)).ok_or_else(|| {
                    Error::Model(format!("missing template {}", template_file_name(region, key)))
                })?;
                region_chips.push((key, chip));
            }
            let extractor = match cfg.au_space {
                FeatureSpace::Fused => {
                    let mut samples = Vec::new();
                    let mut labels = Vec::new();
                    for (i, (_, chip)) in region_chips.iter().enumerate() {
                        for s in shifted_copies(&image_matrix(chip)) {
                            samples.push(s);
                            labels.push(i);
                        }
                    }
                    RegionExtractor::Fused(Box::new(FusedExtractor::fit(&samples, &labels, cfg)?))
                }
                _ => {
                    let mats: Vec<_> = region_chips.iter().map(|(_, c)| image_matrix(c)).collect();
                    RegionExtractor::TwoDPca(TwoDPcaModel::fit(&mats, cfg.twodpca_components)?)
                }
            };
            let templates = region_chips
                .iter()
                .map(|(key, chip)| Ok((*key, extractor.extract(chip)?)))
                .collect::<Result<_>>()?;
            regions.push(RegionGallery {
                region,
                extractor,
                templates,
            });
        }
        Ok(Self { regions })
    }

    pub fn region(&self, region: Region) -> Result<&RegionGallery> {
        self.regions
            .iter()
            .find(|g| g.region == region)
            .ok_or_else(|| Error::Model(format!("gallery has no entries for {region}")))
    }

    pub fn regions(&self) -> &[RegionGallery] {
        &self.regions
    }

    pub fn features(&self, region: Region, chip: &Image) -> Result<DVector<f64>> {
        self.region(region)?.extractor.extract(chip)
    }
}

/// Nearest template among the region's AUs and its neutral template.
///
/// Returns `None` for neutral. Ties go to neutral, then to the lowest AU code.
pub fn match_au(region: Region, features: &DVector<f64>, gallery: &AuTemplateGallery) -> Result<Option<u8>> {
    let g = gallery.region(region)?;
    for key in template_keys(region) {
        if !g.templates.iter().any(|(k, _)| *k == key) {
            return Err(Error::Model(format!(
                "missing template {}",
                template_file_name(region, key)
            )));
        }
    }
    let mut candidates: Vec<&(Option<u8>, DVector<f64>)> = g.templates.iter().collect();
    candidates.sort_by_key(|(k, _)| *k);
    let mut best: Option<(Option<u8>, f64)> = None;
    for (key, template) in candidates {
        if template.len() != features.len() {
            return Err(Error::DimensionMismatch {
                expected: template.len().to_string(),
                actual: features.len().to_string(),
            });
        }
        let d = (features - template).norm();
        if best.is_none_or(|(_, b)| d < b) {
            best = Some((*key, d));
        }
    }
    Ok(best.and_then(|(k, _)| k))
}

pub fn template_file_name(region: Region, au: Option<u8>) -> String {
    match au {
        Some(a) => format!("{region}_{a}.pgm"),
        None => format!("{region}_neutral.pgm"),
    }
}

/// Parses `<region>_<au>.pgm` / `<region>_neutral.pgm`.
pub fn parse_template_file_name(name: &str) -> Option<TemplateKey> {
    let stem = name.strip_suffix(".pgm")?;
    let (region, au) = stem.rsplit_once('_')?;
    let region: Region = region.parse().ok()?;
    let au = match au {
        "neutral" => None,
        code => {
            let code: u8 = code.parse().ok()?;
            region.au_list().contains(&code).then_some(code)?;
            Some(code)
        }
    };
    Some((region, au))
}

/// Reads every template chip in `dir`; other files are ignored.
pub fn load_template_dir(dir: &Path) -> Result<BTreeMap<TemplateKey, Image>> {
    let mut out = BTreeMap::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(key) = parse_template_file_name(&name) {
            out.insert(key, load_image(&entry.path())?);
        }
    }
    Ok(out)
}

pub fn save_template_dir(dir: &Path, chips: &BTreeMap<TemplateKey, Image>) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (&(region, au), chip) in chips {
        save_image(chip, &dir.join(template_file_name(region, au)))?;
    }
    Ok(())
}
