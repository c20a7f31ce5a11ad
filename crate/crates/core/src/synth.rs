//! Synthetic faces for tests, demos and the template gallery.
//!
//! A synthetic face chip is a skin-coloured square carrying:
//! * an identity mark in the top band (rows 3-9%), outside every facial region,
//! * two eye dots and a mouth bar, present on every chip,
//! * one dark slot per active AU inside its region's core rows.
//!
//! Region cores avoid the rows where neighbouring region bands overlap, so an
//! AU drawn for one region never appears in another region's crop.

use crate::facs::{AuSet, Region};
use crate::image::{Channels, Image};
use crate::vision::{crop_regions, to_gray};

pub const SKIN: [u8; 3] = [220, 160, 130];
pub const DARK: [u8; 3] = [10, 10, 10];
pub const BACKGROUND: [u8; 3] = [20, 30, 80];

/// Number of distinct identity marks.
pub const IDENTITIES: usize = 4;

fn fill_pct(img: &mut Image, rows: (usize, usize), cols: (usize, usize), color: &[u8]) {
    let (w, h) = (img.width(), img.height());
    let (y0, y1) = (h * rows.0 / 100, h * rows.1 / 100);
    let (x0, x1) = (w * cols.0 / 100, w * cols.1 / 100);
    for y in y0..y1.max(y0 + 1) {
        for x in x0..x1.max(x0 + 1) {
            img.set_pixel(x, y, color);
        }
    }
}

/// Core rows (percent) where a region's AU slots are drawn.
fn region_core(region: Region) -> (usize, usize) {
    match region {
        Region::EyeBrows => (12, 23),
        Region::EyeLids => (26, 29),
        Region::Eyes => (36, 44),
        Region::Cheeks => (48, 62),
        Region::LipPart1 => (66, 74),
        Region::LipPart2 => (82, 93),
    }
}

/// Column span (percent) of slot `k` among `n` slots across [10%, 90%).
fn slot_cols(k: usize, n: usize) -> (usize, usize) {
    let width = 80 / n;
    let start = 10 + k * width;
    (start + 1, start + width - 1)
}

/// RGB face chip for an identity showing the given AUs.
pub fn face_chip_rgb(identity: usize, aus: AuSet, size: usize) -> Image {
    let mut chip = Image::filled(size, size, Channels::Rgb8, &SKIN);
    let id = identity % IDENTITIES;
    let band = 80 / IDENTITIES;
    fill_pct(&mut chip, (3, 9), (10 + id * band + 1, 10 + (id + 1) * band - 1), &DARK);

    // Eyes and mouth.
    fill_pct(&mut chip, (31, 34), (20, 30), &DARK);
    fill_pct(&mut chip, (31, 34), (70, 80), &DARK);
    fill_pct(&mut chip, (76, 79), (35, 65), &DARK);

    for region in Region::CANONICAL {
        let rows = region_core(region);
        let list = region.au_list();
        for (k, &au) in list.iter().enumerate() {
            if !aus.contains(au) {
                continue;
            }
            if region == Region::Cheeks {
                fill_pct(&mut chip, rows, (10, 30), &DARK);
                fill_pct(&mut chip, rows, (70, 90), &DARK);
            } else {
                fill_pct(&mut chip, rows, slot_cols(k, list.len()), &DARK);
            }
        }
    }
    chip
}

pub fn face_chip_gray(identity: usize, aus: AuSet, size: usize) -> Image {
    to_gray(&face_chip_rgb(identity, aus, size))
}

/// Region chip of a face showing only `au` (or nothing for the neutral template).
pub fn template_chip(region: Region, au: Option<u8>, size: usize) -> Image {
    let aus = au.map_or(AuSet::EMPTY, |a| AuSet::try_from_codes([a]).expect("known AU"));
    let chip = face_chip_gray(0, aus, size);
    crop_regions(&chip)
        .expect("synthetic chip is large enough")
        .get(region)
        .clone()
}

/// Background frame with face chips pasted at the given top-left corners.
pub fn frame(width: usize, height: usize, faces: &[(usize, usize, Image)]) -> Image {
    let mut img = Image::filled(width, height, Channels::Rgb8, &BACKGROUND);
    for (x, y, chip) in faces {
        img.paste(chip, *x, *y);
    }
    img
}

/// Skin ellipse with two eye dots and a mouth bar, drawn onto `img`.
pub fn draw_ellipse_face(img: &mut Image, cx: usize, cy: usize, rx: usize, ry: usize) {
    let (cxf, cyf, rxf, ryf) = (cx as f64, cy as f64, rx as f64, ry as f64);
    for y in cy.saturating_sub(ry)..=(cy + ry).min(img.height() - 1) {
        for x in cx.saturating_sub(rx)..=(cx + rx).min(img.width() - 1) {
            let dx = (x as f64 - cxf) / rxf;
            let dy = (y as f64 - cyf) / ryf;
            if dx * dx + dy * dy <= 1.0 {
                img.set_pixel(x, y, &SKIN);
            }
        }
    }
    let dot = (rx / 5).max(2);
    let eye_y = cy - ry / 3;
    for (ex, ey) in [(cx - rx / 2, eye_y), (cx + rx / 2 - dot, eye_y)] {
        for y in ey..ey + dot {
            for x in ex..ex + dot {
                img.set_pixel(x, y, &DARK);
            }
        }
    }
    let mouth_y = cy + ry / 2;
    for y in mouth_y..mouth_y + dot {
        for x in cx - rx / 3..cx + rx / 3 {
            img.set_pixel(x, y, &DARK);
        }
    }
}

/// Background frame with one ellipse face per centre.
pub fn ellipse_frame(width: usize, height: usize, centres: &[(usize, usize)], rx: usize, ry: usize) -> Image {
    let mut img = Image::filled(width, height, Channels::Rgb8, &BACKGROUND);
    for &(cx, cy) in centres {
        draw_ellipse_face(&mut img, cx, cy, rx, ry);
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn templates_differ_per_au() {
        for region in Region::CANONICAL {
            let neutral = template_chip(region, None, 64);
            for &au in region.au_list() {
                let t = template_chip(region, Some(au), 64);
                assert_ne!(t, neutral, "{region} AU {au}");
            }
        }
    }

    #[test]
    fn au_slots_stay_in_their_region() {
        let neutral = crop_regions(&face_chip_gray(0, AuSet::EMPTY, 64)).unwrap();
        for region in Region::CANONICAL {
            for &au in region.au_list() {
                let chips = crop_regions(&face_chip_gray(0, AuSet::try_from_codes([au]).unwrap(), 64)).unwrap();
                for other in Region::CANONICAL {
                    if other != region {
                        assert_eq!(chips.get(other), neutral.get(other), "AU {au} leaks into {other}");
                    }
                }
            }
        }
    }

    #[test]
    fn identity_mark_outside_regions() {
        let a = crop_regions(&face_chip_gray(0, AuSet::EMPTY, 64)).unwrap();
        let b = crop_regions(&face_chip_gray(1, AuSet::EMPTY, 64)).unwrap();
        assert_eq!(a, b);
        assert_ne!(face_chip_gray(0, AuSet::EMPTY, 64), face_chip_gray(1, AuSet::EMPTY, 64));
    }
}
