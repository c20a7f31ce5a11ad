//! Skin-colour face detection and facial-region cropping.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::config::{DetectConfig, SkinConfig};
use crate::error::{Error, Result};
use crate::facs::Region;
use crate::image::{Channels, Image};

/// Binary per-pixel mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn or(&self, other: &Mask) -> Mask {
        assert_eq!((self.width, self.height), (other.width, other.height));
        Mask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| a | b).collect(),
        }
    }

    /// True if every set pixel of `self` is set in `other`.
    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.bits.iter().zip(&other.bits).all(|(a, b)| !a || *b)
    }
}

fn mask_from_rgb(img: &Image, pred: impl Fn(f64, f64, f64) -> bool) -> Result<Mask> {
    img.require(Channels::Rgb8)?;
    let mut mask = Mask::new(img.width(), img.height());
    for (bit, px) in mask.bits.iter_mut().zip(img.data().chunks_exact(3)) {
        *bit = pred(f64::from(px[0]), f64::from(px[1]), f64::from(px[2]));
    }
    Ok(mask)
}

pub fn is_skin_rgb(cfg: &SkinConfig, r: f64, g: f64, b: f64) -> bool {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    r > cfg.rgb_r_min
        && g > cfg.rgb_g_min
        && b > cfg.rgb_b_min
        && max - min > cfg.rgb_spread_min
        && (r - g).abs() > cfg.rgb_rg_diff_min
        && r > g
        && r > b
}

/// BT.601 full-range chroma.
pub fn ycbcr(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let y = 0.299 * r + 0.587 * g + 0.114 * b;
    let cb = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b;
    let cr = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b;
    (y, cb, cr)
}

pub fn is_skin_ycbcr(cfg: &SkinConfig, r: f64, g: f64, b: f64) -> bool {
    let (_, cb, cr) = ycbcr(r, g, b);
    (cfg.cb_min..=cfg.cb_max).contains(&cb) && (cfg.cr_min..=cfg.cr_max).contains(&cr)
}

/// Hue in degrees, saturation in [0,1], intensity on the 0..255 scale.
pub fn hsi(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let sum = r + g + b;
    let intensity = sum / 3.0;
    if sum == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let saturation = 1.0 - 3.0 * r.min(g).min(b) / sum;
    let num = 0.5 * ((r - g) + (r - b));
    let den = ((r - g).powi(2) + (r - b) * (g - b)).sqrt();
    let mut hue = if den == 0.0 {
        0.0
    } else {
        (num / den).clamp(-1.0, 1.0).acos().to_degrees()
    };
    if b > g {
        hue = 360.0 - hue;
    }
    (hue, saturation, intensity)
}

pub fn is_skin_hsi(cfg: &SkinConfig, r: f64, g: f64, b: f64) -> bool {
    let (h, s, i) = hsi(r, g, b);
    // Achromatic pixels have no meaningful hue.
    if s == 0.0 {
        return false;
    }
    let hue_ok = (0.0..=cfg.hue_low_max).contains(&h) || (cfg.hue_high_min..=360.0).contains(&h);
    hue_ok && (cfg.sat_min..=cfg.sat_max).contains(&s) && i > cfg.intensity_min
}

pub fn skin_mask_rgb(img: &Image, cfg: &SkinConfig) -> Result<Mask> {
    mask_from_rgb(img, |r, g, b| is_skin_rgb(cfg, r, g, b))
}

pub fn skin_mask_ycbcr(img: &Image, cfg: &SkinConfig) -> Result<Mask> {
    mask_from_rgb(img, |r, g, b| is_skin_ycbcr(cfg, r, g, b))
}

pub fn skin_mask_hsi(img: &Image, cfg: &SkinConfig) -> Result<Mask> {
    mask_from_rgb(img, |r, g, b| is_skin_hsi(cfg, r, g, b))
}

/// A pixel is skin if any of the three colour-space rules accepts it.
pub fn skin_mask_combined(img: &Image, cfg: &SkinConfig) -> Result<Mask> {
    mask_from_rgb(img, |r, g, b| {
        is_skin_rgb(cfg, r, g, b) || is_skin_ycbcr(cfg, r, g, b) || is_skin_hsi(cfg, r, g, b)
    })
}

pub fn luminance(r: u8, g: u8, b: u8) -> u8 {
    (0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b)).round() as u8
}

/// RGB to luminance; grayscale input is returned unchanged.
pub fn to_gray(img: &Image) -> Image {
    match img.channels() {
        Channels::Gray8 => img.clone(),
        Channels::Rgb8 => {
            let data = img
                .data()
                .chunks_exact(3)
                .map(|p| luminance(p[0], p[1], p[2]))
                .collect();
            Image::gray(img.width(), img.height(), data).expect("same dimensions")
        }
    }
}

/// Marks pixels darker than `threshold`.
pub fn binarize(gray: &Image, threshold: u8) -> Result<Mask> {
    gray.require(Channels::Gray8)?;
    Ok(Mask {
        width: gray.width(),
        height: gray.height(),
        bits: gray.data().iter().map(|&v| v < threshold).collect(),
    })
}

/// Otsu threshold over a sample set, as the `binarize` cut (values below it are dark).
pub fn otsu_threshold(samples: &[u8]) -> u8 {
    let mut hist = [0u64; 256];
    for &s in samples {
        hist[s as usize] += 1;
    }
    let total = samples.len() as f64;
    if samples.is_empty() {
        return 128;
    }
    let sum_all: f64 = hist.iter().enumerate().map(|(v, &c)| v as f64 * c as f64).sum();
    let (mut w0, mut sum0) = (0.0, 0.0);
    let (mut best_t, mut best_var) = (0usize, -1.0);
    for (t, &count) in hist.iter().enumerate() {
        w0 += count as f64;
        sum0 += t as f64 * count as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = sum0 / w0;
        let m1 = (sum_all - sum0) / w1;
        let var = w0 * w1 * (m0 - m1).powi(2);
        if var > best_var {
            best_var = var;
            best_t = t;
        }
    }
    (best_t + 1).min(255) as u8
}

/// A 4-connected component: pixel count and bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Component {
    pub area: usize,
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

/// 4-connected components of set pixels, in raster order of their first pixel.
pub fn connected_components(mask: &Mask) -> Vec<Component> {
    let (w, h) = (mask.width, mask.height);
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !mask.bits[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut c = Component {
            area: 0,
            x0: usize::MAX,
            y0: usize::MAX,
            x1: 0,
            y1: 0,
        };
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % w, i / w);
            c.area += 1;
            c.x0 = c.x0.min(x);
            c.y0 = c.y0.min(y);
            c.x1 = c.x1.max(x);
            c.y1 = c.y1.max(y);
            let mut visit = |j: usize| {
                if mask.bits[j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        out.push(c);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceBox {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
    /// Fraction of skin pixels in the box.
    pub score: f64,
}

/// Counts dark blobs of at least `min_px` pixels that stay off the box border.
/// Left and right edges always count as border; the flags select the horizontal ones.
fn interior_blobs(dark: &Mask, min_px: usize, top_is_border: bool, bottom_is_border: bool) -> usize {
    connected_components(dark)
        .into_iter()
        .filter(|c| c.area >= min_px)
        .filter(|c| c.x0 > 0 && c.x1 + 1 < dark.width)
        .filter(|c| !top_is_border || c.y0 > 0)
        .filter(|c| !bottom_is_border || c.y1 + 1 < dark.height)
        .count()
}

/// Whether the box holds eye and mouth candidates: dark blobs enclosed by the face.
fn has_dark_features(gray: &Image, b: &FaceBox, cfg: &DetectConfig) -> Result<bool> {
    let region = gray.crop(b.x, b.y, b.w, b.h)?;
    let threshold = otsu_threshold(region.data()).clamp(cfg.threshold_min, cfg.threshold_max);
    let dark = binarize(&region, threshold)?;
    let half = b.h / 2;
    if half == 0 {
        return Ok(false);
    }
    let sub = |y0: usize, y1: usize| {
        let mut m = Mask::new(b.w, y1 - y0);
        for y in y0..y1 {
            for x in 0..b.w {
                m.set(x, y - y0, dark.get(x, y));
            }
        }
        m
    };
    let upper = interior_blobs(&sub(0, half), cfg.min_blob_px, true, false);
    let lower = interior_blobs(&sub(half, b.h), cfg.min_blob_px, false, true);
    Ok(upper >= cfg.min_eye_blobs && lower >= cfg.min_mouth_blobs)
}

/// Skin components that look like faces, highest skin fraction first.
pub fn detect_faces(img: &Image, skin: &SkinConfig, cfg: &DetectConfig) -> Result<Vec<FaceBox>> {
    let mask = skin_mask_combined(img, skin)?;
    let gray = to_gray(img);
    let min_area = cfg.min_area_frac * (img.width() * img.height()) as f64;
    let mut faces = Vec::new();
    for c in connected_components(&mask) {
        if (c.area as f64) < min_area {
            continue;
        }
        let (w, h) = (c.x1 - c.x0 + 1, c.y1 - c.y0 + 1);
        let aspect = h as f64 / w as f64;
        if aspect < cfg.aspect_min || aspect > cfg.aspect_max {
            continue;
        }
        let b = FaceBox {
            x: c.x0,
            y: c.y0,
            w,
            h,
            score: c.area as f64 / (w * h) as f64,
        };
        if has_dark_features(&gray, &b, cfg)? {
            faces.push(b);
        }
    }
    faces.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then((a.y, a.x).cmp(&(b.y, b.x)))
    });
    Ok(faces)
}

/// Grayscale square chip of the box, resampled to `size`.
pub fn face_chip(img: &Image, b: &FaceBox, size: usize) -> Result<Image> {
    Ok(to_gray(img).crop(b.x, b.y, b.w, b.h)?.resize_nearest(size, size))
}

pub const MIN_CHIP: usize = 24;

/// Row band `[top, bottom)` as percentages of chip height, plus the column
/// bands (percent of width) that are kept and laid side by side.
pub fn region_layout(region: Region) -> ((usize, usize), &'static [(usize, usize)]) {
    const FULL: &[(usize, usize)] = &[(0, 100)];
    match region {
        Region::EyeBrows => ((10, 25), FULL),
        Region::EyeLids => ((25, 35), FULL),
        Region::Eyes => ((30, 45), FULL),
        Region::Cheeks => ((45, 65), &[(0, 40), (60, 100)]),
        Region::LipPart1 => ((65, 80), FULL),
        Region::LipPart2 => ((75, 95), FULL),
    }
}

fn span(len: usize, (a, b): (usize, usize)) -> (usize, usize) {
    (len * a / 100, len * b / 100)
}

/// Per-region grayscale chips, canonical region order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionChips {
    chips: Vec<(Region, Image)>,
}

impl RegionChips {
    pub fn get(&self, region: Region) -> &Image {
        &self
            .chips
            .iter()
            .find(|(r, _)| *r == region)
            .expect("all regions present")
            .1
    }

    pub fn iter(&self) -> impl Iterator<Item = (Region, &Image)> {
        self.chips.iter().map(|(r, i)| (*r, i))
    }
}

pub fn crop_regions(chip: &Image) -> Result<RegionChips> {
    chip.require(Channels::Gray8)?;
    if chip.width() < MIN_CHIP || chip.height() < MIN_CHIP {
        return Err(Error::Size(format!(
            "face chip {}x{} is smaller than {MIN_CHIP}x{MIN_CHIP}",
            chip.width(),
            chip.height()
        )));
    }
    let mut chips = Vec::with_capacity(6);
    for region in Region::CANONICAL {
        let (rows, cols) = region_layout(region);
        let (y0, y1) = span(chip.height(), rows);
        let parts: Vec<Image> = cols
            .iter()
            .map(|&c| {
                let (x0, x1) = span(chip.width(), c);
                chip.crop(x0, y0, x1 - x0, y1 - y0)
            })
            .collect::<Result<_>>()?;
        let width: usize = parts.iter().map(Image::width).sum();
        let height = y1 - y0;
        let mut out = Image::filled(width, height, Channels::Gray8, &[0]);
        let mut x = 0;
        for p in &parts {
            out.paste(p, x, 0);
            x += p.width();
        }
        chips.push((region, out));
    }
    Ok(RegionChips { chips })
}
