//! Frame analysis, shot aggregation and manifest ingestion.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Config, FeatureSpace};
use crate::error::{Error, Result};
use crate::facs::{classify_au_set, AuSet, ExpressionLabel, Region, RulePattern};
use crate::features::eigenfaces::{extract_key_faces, EigenModel, EigenParams};
use crate::features::fusion::FusedIdentity;
use crate::features::templates::{load_template_dir, match_au, AuTemplateGallery, TemplateKey};
use crate::image::{load_image, Image};
use crate::model_io::ModelFile;
use crate::vision::{crop_regions, detect_faces, face_chip, to_gray, FaceBox};

pub const EIGEN_FILE: &str = "eigen.pife";
pub const GALLERY_FILE: &str = "au_gallery.pife";
pub const FUSED_IDENTITY_FILE: &str = "identity_fused.pife";
pub const FACES_DIR: &str = "faces";

/// Everything the vision path needs: identity models, AU templates and settings.
#[derive(Debug, Clone)]
pub struct Models {
    pub eigen: EigenModel,
    pub fused_identity: Option<FusedIdentity>,
    pub gallery: AuTemplateGallery,
    pub config: Config,
}

impl Models {
    pub fn train(
        templates: &BTreeMap<TemplateKey, Image>,
        faces: &[Image],
        identities: &[String],
        config: &Config,
    ) -> Result<Self> {
        let fc = &config.features;
        let size = fc.chip_size;
        let chips: Vec<Image> = faces.iter().map(|f| to_gray(f).resize_nearest(size, size)).collect();
        let eigen = EigenModel::fit_labeled(
            &chips,
            identities,
            &EigenParams {
                components: fc.eigen_components,
                phi: fc.phi,
                phi_factor: fc.phi_factor,
            },
        )?;
        let fused_identity = match fc.identity_space {
            FeatureSpace::Fused => Some(FusedIdentity::fit(&chips, identities, fc)?),
            _ => None,
        };
        let gallery = AuTemplateGallery::build(templates, fc)?;
        Ok(Self {
            eigen,
            fused_identity,
            gallery,
            config: config.clone(),
        })
    }

    /// Trains from `<dir>/<region>_<au>.pgm` templates and `<dir>/faces/<identity>_<n>.pgm` faces.
    pub fn train_from_dir(dir: &Path, config: &Config) -> Result<Self> {
        let templates = load_template_dir(dir)?;
        let (faces, identities) = load_face_dir(&dir.join(FACES_DIR))?;
        Self::train(&templates, &faces, &identities, config)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.eigen.save(&dir.join(EIGEN_FILE))?;
        self.gallery.save(&dir.join(GALLERY_FILE))?;
        let fused = dir.join(FUSED_IDENTITY_FILE);
        match &self.fused_identity {
            Some(f) => f.save(&fused)?,
            None if fused.exists() => std::fs::remove_file(&fused).map_err(|e| Error::io(&fused, e))?,
            None => {}
        }
        Ok(())
    }

    pub fn load(dir: &Path, config: &Config) -> Result<Self> {
        let eigen = EigenModel::load(&dir.join(EIGEN_FILE))?;
        let gallery = AuTemplateGallery::load(&dir.join(GALLERY_FILE))?;
        let fused = dir.join(FUSED_IDENTITY_FILE);
        let fused_identity = if config.features.identity_space == FeatureSpace::Fused {
            Some(FusedIdentity::load(&fused)?)
        } else {
            None
        };
        let (w, h) = eigen.dims();
        let size = config.features.chip_size;
        if (w, h) != (size, size) {
            return Err(Error::DimensionMismatch {
                expected: format!("{size}x{size} eigenfaces (chip.size)"),
                actual: format!("{w}x{h}"),
            });
        }
        Ok(Self {
            eigen,
            fused_identity,
            gallery,
            config: config.clone(),
        })
    }

    /// Key-face novelty threshold τ.
    pub fn tau(&self) -> f64 {
        self.config.features.tau_factor * self.eigen.phi()
    }

    /// Identity of a normalised face chip, or `None` if it is not in the database.
    pub fn recognize(&self, chip: &Image) -> Result<Option<String>> {
        match &self.fused_identity {
            Some(f) => Ok(f.recognize(chip)?.0.map(|(_, id)| id)),
            None => Ok(self.eigen.recognize(chip)?.identity.map(|(_, id)| id)),
        }
    }

    /// AU set read from a normalised face chip by per-region template matching.
    pub fn extract_aus(&self, chip: &Image) -> Result<AuSet> {
        let regions = crop_regions(chip)?;
        let mut aus = AuSet::default();
        for region in Region::CANONICAL {
            let features = self.gallery.features(region, regions.get(region))?;
            if let Some(au) = match_au(region, &features, &self.gallery)? {
                aus.insert(au)?;
            }
        }
        Ok(aus)
    }
}

/// Loads `<identity>_<n>.pgm` faces in file-name order.
pub fn load_face_dir(dir: &Path) -> Result<(Vec<Image>, Vec<String>)> {
    let mut entries: Vec<(String, PathBuf)> = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        let is_image = name.ends_with(".pgm") || name.ends_with(".ppm");
        if let (true, Some((identity, _))) = (is_image, name.rsplit_once('_')) {
            entries.push((identity.to_string(), entry.path()));
        }
    }
    entries.sort_by(|a, b| a.1.cmp(&b.1));
    let mut faces = Vec::with_capacity(entries.len());
    let mut ids = Vec::with_capacity(entries.len());
    for (id, path) in entries {
        faces.push(load_image(&path)?);
        ids.push(id);
    }
    Ok((faces, ids))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceEntry {
    /// `None` for AU-bypass frames.
    pub face_box: Option<FaceBox>,
    pub identity: Option<String>,
    pub aus: AuSet,
    pub pattern: RulePattern,
    pub label: ExpressionLabel,
    /// 1 iff this face's expression equals the frame's first-face expression.
    pub annotation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameAnalysis {
    pub frame_index: usize,
    pub faces: Vec<FaceEntry>,
}

impl FrameAnalysis {
    /// Frame label: the first face's expression, Neutral without faces.
    pub fn label(&self) -> ExpressionLabel {
        self.faces.first().map_or(ExpressionLabel::Neutral, |f| f.label)
    }

    pub fn pattern(&self) -> RulePattern {
        self.faces.first().map_or_else(RulePattern::default, |f| f.pattern)
    }

    pub fn annotation_bits(&self) -> Vec<bool> {
        self.faces.iter().map(|f| f.annotation).collect()
    }
}

/// Builds a frame from per-face AU sets, in face order, setting annotation bits.
pub fn frame_from_faces(
    frame_index: usize,
    faces: impl IntoIterator<Item = (Option<FaceBox>, Option<String>, AuSet)>,
) -> FrameAnalysis {
    let mut entries: Vec<FaceEntry> = Vec::new();
    for (face_box, identity, aus) in faces {
        let c = classify_au_set(aus);
        let annotation = entries.first().is_none_or(|first| first.label == c.label);
        entries.push(FaceEntry {
            face_box,
            identity,
            aus,
            pattern: c.pattern,
            label: c.label,
            annotation,
        });
    }
    FrameAnalysis {
        frame_index,
        faces: entries,
    }
}

/// AU-bypass analysis: the annotated AU set is taken as the frame's single face.
pub fn analyze_aus(frame_index: usize, aus: AuSet) -> FrameAnalysis {
    frame_from_faces(frame_index, [(None, None, aus)])
}

/// Vision analysis; also returns the chip of the first recognised face.
fn analyze_image(frame_index: usize, img: &Image, models: &Models) -> Result<(FrameAnalysis, Option<Image>)> {
    let cfg = &models.config;
    let boxes = detect_faces(img, &cfg.skin, &cfg.detect)?;
    let mut faces = Vec::new();
    let mut first_chip = None;
    for b in boxes {
        let chip = face_chip(img, &b, cfg.features.chip_size)?;
        let Some(identity) = models.recognize(&chip)? else {
            log::debug!("frame {frame_index}: face at ({}, {}) not in the database", b.x, b.y);
            continue;
        };
        let aus = models.extract_aus(&chip)?;
        if first_chip.is_none() {
            first_chip = Some(chip);
        }
        faces.push((Some(b), Some(identity), aus));
    }
    Ok((frame_from_faces(frame_index, faces), first_chip))
}

/// Detect, recognise and read AUs for every face in a frame image.
pub fn analyze_frame(frame_index: usize, img: &Image, models: &Models) -> Result<FrameAnalysis> {
    Ok(analyze_image(frame_index, img, models)?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub shot_id: String,
    pub frame_count: usize,
    pub key_faces: Vec<usize>,
    pub frame_labels: Vec<ExpressionLabel>,
    pub frame_patterns: Vec<RulePattern>,
    pub shot_expression: ExpressionLabel,
    pub or_annotation: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<ExpressionLabel>,
}

impl ShotRecord {
    /// Per-frame labels of the key faces, in frame order.
    pub fn key_face_labels(&self) -> impl Iterator<Item = ExpressionLabel> + '_ {
        self.key_faces.iter().map(|&i| self.frame_labels[i])
    }
}

/// Most frequent label; ties go to the label that occurs first.
pub fn modal_label(labels: &[ExpressionLabel]) -> Option<ExpressionLabel> {
    let mut counts: Vec<(ExpressionLabel, usize)> = Vec::new();
    for &l in labels {
        match counts.iter_mut().find(|(k, _)| *k == l) {
            Some((_, n)) => *n += 1,
            None => counts.push((l, 1)),
        }
    }
    let mut best: Option<(ExpressionLabel, usize)> = None;
    for (l, n) in counts {
        if best.is_none_or(|(_, b)| n > b) {
            best = Some((l, n));
        }
    }
    best.map(|(l, _)| l)
}

/// Majority label and OR of annotation bits over a shot's frames.
///
/// Every frame is a key face; `ingest` narrows this down in vision mode.
pub fn aggregate_shot(shot_id: &str, analyses: &[FrameAnalysis]) -> Result<ShotRecord> {
    if analyses.is_empty() {
        return Err(Error::Manifest(format!("shot {shot_id} has no frames")));
    }
    let frame_labels: Vec<ExpressionLabel> = analyses.iter().map(FrameAnalysis::label).collect();
    Ok(ShotRecord {
        shot_id: shot_id.to_string(),
        frame_count: analyses.len(),
        key_faces: (0..analyses.len()).collect(),
        frame_patterns: analyses.iter().map(FrameAnalysis::pattern).collect(),
        shot_expression: modal_label(&frame_labels).expect("non-empty"),
        or_annotation: analyses.iter().flat_map(|a| &a.faces).any(|f| f.annotation),
        frame_labels,
        truth: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestShot {
    pub shot_id: String,
    #[serde(default)]
    pub frames: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aus: Option<Vec<AuSet>>,
}

impl ManifestShot {
    pub fn truth(&self) -> Result<Option<ExpressionLabel>> {
        self.label.as_deref().map(str::parse).transpose()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ShotManifest {
    pub shots: Vec<ManifestShot>,
}

impl ShotManifest {
    pub fn parse(text: &str) -> Result<Self> {
        let manifest: ShotManifest = serde_json::from_str(text).map_err(|e| {
            Error::Manifest(format!("line {} column {}: {e}", e.line(), e.column()))
        })?;
        manifest.validate()?;
        Ok(manifest)
    }

    /// Reads a manifest, resolving relative frame paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest = Self::parse(&text).map_err(|e| match e {
            Error::Manifest(m) => Error::Manifest(format!("{}: {m}", path.display())),
            e => e,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for shot in &mut manifest.shots {
            for f in &mut shot.frames {
                if f.is_relative() {
                    *f = base.join(&*f);
                }
            }
        }
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for shot in &self.shots {
            if !seen.insert(shot.shot_id.as_str()) {
                return Err(Error::Manifest(format!("duplicate shot_id `{}`", shot.shot_id)));
            }
            shot.truth()
                .map_err(|e| Error::Manifest(format!("shot `{}`: {e}", shot.shot_id)))?;
            if let Some(aus) = &shot.aus {
                if !shot.frames.is_empty() && shot.frames.len() != aus.len() {
                    return Err(Error::Manifest(format!(
                        "shot `{}` has {} frames but {} AU annotations",
                        shot.shot_id,
                        shot.frames.len(),
                        aus.len()
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotFailure {
    pub shot_id: String,
    pub error: String,
}

pub type ShotOutcome = std::result::Result<ShotRecord, ShotFailure>;

fn process_shot(shot: &ManifestShot, models: Option<&Models>) -> Result<ShotRecord> {
    let truth = shot.truth()?;
    let mut record = if let Some(aus) = &shot.aus {
        let frames: Vec<FrameAnalysis> = aus.iter().enumerate().map(|(i, &a)| analyze_aus(i, a)).collect();
        aggregate_shot(&shot.shot_id, &frames)?
    } else {
        let models = models.ok_or_else(|| {
            Error::Model(format!(
                "shot `{}` has no AU annotations and no models were given",
                shot.shot_id
            ))
        })?;
        let analysed = shot
            .frames
            .par_iter()
            .enumerate()
            .map(|(i, path)| analyze_image(i, &load_image(path)?, models))
            .collect::<Result<Vec<_>>>()?;
        let (frames, chips): (Vec<FrameAnalysis>, Vec<Option<Image>>) = analysed.into_iter().unzip();
        let mut record = aggregate_shot(&shot.shot_id, &frames)?;
        let with_faces: Vec<(usize, Image)> = chips
            .into_iter()
            .enumerate()
            .filter_map(|(i, c)| c.map(|c| (i, c)))
            .collect();
        let faces: Vec<Image> = with_faces.iter().map(|(_, c)| c.clone()).collect();
        record.key_faces = extract_key_faces(&models.eigen, &faces, models.tau())?
            .into_iter()
            .map(|k| with_faces[k].0)
            .collect();
        record
    };
    record.truth = truth;
    Ok(record)
}

/// Analyses every shot; output follows manifest order and failures stay per shot.
pub fn ingest(manifest: &ShotManifest, models: Option<&Models>) -> Vec<ShotOutcome> {
    manifest
        .shots
        .par_iter()
        .map(|shot| {
            process_shot(shot, models).map_err(|e| ShotFailure {
                shot_id: shot.shot_id.clone(),
                error: e.to_string(),
            })
        })
        .collect()
}

/// One JSON object per line: records, or `{"shot_id", "error"}` for failures.
pub fn records_to_json_lines(outcomes: &[ShotOutcome]) -> String {
    let mut out = String::new();
    for o in outcomes {
        let line = match o {
            Ok(r) => serde_json::to_string(r),
            Err(f) => serde_json::to_string(f),
        }
        .expect("records serialise");
        out.push_str(&line);
        out.push('\n');
    }
    out
}
