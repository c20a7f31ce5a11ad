//! Binary model container.
//!
//! Layout: `PIFE`, a version byte, a kind byte, then the body. Integers are
//! u64 little-endian, floats f64 little-endian, matrices are `rows cols`
//! followed by row-major data, strings are a length and UTF-8 bytes.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::facs::Region;
use crate::features::eigenfaces::{EigenModel, GalleryEntry};
use crate::features::fld::FldModel;
use crate::features::fusion::{FusedExtractor, FusedIdentity};
use crate::features::gabor::{GaborBank, GaborParams};
use crate::features::templates::{AuTemplateGallery, RegionExtractor, RegionGallery};
use crate::features::twodpca::TwoDPcaModel;

pub const MAGIC: &[u8; 4] = b"PIFE";
pub const VERSION: u8 = 1;

#[derive(Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn str(&mut self, s: &str) {
        self.usize(s.len());
        self.buf.extend_from_slice(s.as_bytes());
    }

    pub fn matrix(&mut self, m: &DMatrix<f64>) {
        self.usize(m.nrows());
        self.usize(m.ncols());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                self.f64(m[(r, c)]);
            }
        }
    }

    pub fn vector(&mut self, v: &DVector<f64>) {
        self.usize(v.len());
        v.iter().for_each(|&x| self.f64(x));
    }

    pub fn floats(&mut self, v: &[f64]) {
        self.usize(v.len());
        v.iter().for_each(|&x| self.f64(x));
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }
}

pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn error(&self, message: impl Into<String>) -> Error {
        Error::ModelFile {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(self.error(format!("truncated: need {n} bytes, {} left", self.remaining())));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    /// A count whose `elem`-byte items must fit in the remaining input.
    pub fn count(&mut self, elem: usize) -> Result<usize> {
        let at = self.pos;
        let n = self.u64()?;
        let fits = usize::try_from(n)
            .ok()
            .and_then(|n| n.checked_mul(elem.max(1)))
            .is_some_and(|bytes| bytes <= self.remaining());
        if !fits {
            return Err(Error::ModelFile {
                offset: at,
                message: format!("length {n} exceeds the remaining input"),
            });
        }
        Ok(n as usize)
    }

    /// A finite float; NaN and infinities mark a corrupt file.
    pub fn f64(&mut self) -> Result<f64> {
        let at = self.pos;
        let v = f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        if !v.is_finite() {
            return Err(Error::ModelFile {
                offset: at,
                message: format!("non-finite value {v}"),
            });
        }
        Ok(v)
    }

    pub fn str(&mut self) -> Result<String> {
        let n = self.count(1)?;
        let at = self.pos;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| Error::ModelFile {
            offset: at,
            message: "string is not UTF-8".into(),
        })
    }

    pub fn matrix(&mut self) -> Result<DMatrix<f64>> {
        let at = self.pos;
        let rows = self.u64()?;
        let cols = self.u64()?;
        let len = rows
            .checked_mul(cols)
            .and_then(|n| usize::try_from(n).ok())
            .filter(|n| n.checked_mul(8).is_some_and(|b| b <= self.remaining()))
            .ok_or_else(|| Error::ModelFile {
                offset: at,
                message: format!("{rows}x{cols} matrix exceeds the remaining input"),
            })?;
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(self.f64()?);
        }
        Ok(DMatrix::from_row_slice(rows as usize, cols as usize, &data))
    }

    pub fn vector(&mut self) -> Result<DVector<f64>> {
        Ok(DVector::from_vec(self.floats()?))
    }

    pub fn floats(&mut self) -> Result<Vec<f64>> {
        let n = self.count(8)?;
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn finish(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(self.error(format!("{} trailing bytes", self.remaining())));
        }
        Ok(())
    }
}

/// A model that can be stored in the container.
pub trait ModelFile: Sized {
    const KIND: u8;
    const NAME: &'static str;

    fn write_body(&self, w: &mut Writer);
    fn read_body(r: &mut Reader<'_>) -> Result<Self>;

    fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.buf.extend_from_slice(MAGIC);
        w.u8(VERSION);
        w.u8(Self::KIND);
        self.write_body(&mut w);
        w.into_bytes()
    }

    fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.take(4).ok() != Some(MAGIC.as_slice()) {
            return Err(Error::ModelFile {
                offset: 0,
                message: "missing PIFE magic".into(),
            });
        }
        let version = r.u8()?;
        if version > VERSION {
            return Err(Error::ModelFile {
                offset: 4,
                message: format!("version {version} is newer than supported version {VERSION}"),
            });
        }
        if version == 0 {
            return Err(Error::ModelFile {
                offset: 4,
                message: "version 0 is invalid".into(),
            });
        }
        let kind = r.u8()?;
        if kind != Self::KIND {
            return Err(Error::ModelFile {
                offset: 5,
                message: format!("expected a {} model (kind {}), found kind {kind}", Self::NAME, Self::KIND),
            });
        }
        let model = Self::read_body(&mut r)?;
        r.finish()?;
        Ok(model)
    }

    fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn check(r: &Reader<'_>, ok: bool, message: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(r.error(message))
    }
}

impl ModelFile for EigenModel {
    const KIND: u8 = 1;
    const NAME: &'static str = "eigenface";

    fn write_body(&self, w: &mut Writer) {
        w.usize(self.width);
        w.usize(self.height);
        w.vector(&self.mean);
        w.matrix(&self.eigenfaces);
        w.floats(&self.eigenvalues);
        w.usize(self.gallery.len());
        for g in &self.gallery {
            w.str(&g.identity);
            w.vector(&g.weights);
        }
        w.f64(self.phi);
    }

    fn read_body(r: &mut Reader<'_>) -> Result<Self> {
        let width = r.u64()? as usize;
        let height = r.u64()? as usize;
        let mean = r.vector()?;
        check(r, width.checked_mul(height) == Some(mean.len()), "mean face does not match dimensions")?;
        let eigenfaces = r.matrix()?;
        check(r, eigenfaces.nrows() == mean.len(), "eigenfaces do not match the mean face")?;
        let eigenvalues = r.floats()?;
        check(r, eigenvalues.len() >= eigenfaces.ncols(), "fewer eigenvalues than eigenfaces")?;
        let n = r.count(16)?;
        check(r, n >= 1, "empty gallery")?;
        let mut gallery = Vec::with_capacity(n);
        for _ in 0..n {
            let identity = r.str()?;
            let weights = r.vector()?;
            check(r, weights.len() == eigenfaces.ncols(), "gallery weights length mismatch")?;
            gallery.push(GalleryEntry { identity, weights });
        }
        let phi = r.f64()?;
        Ok(EigenModel {
            width,
            height,
            mean,
            eigenfaces,
            eigenvalues,
            gallery,
            phi,
        })
    }
}

impl ModelFile for TwoDPcaModel {
    const KIND: u8 = 2;
    const NAME: &'static str = "2DPCA";

    fn write_body(&self, w: &mut Writer) {
        w.matrix(&self.mean);
        w.matrix(&self.axes);
        w.floats(&self.eigenvalues);
    }

    fn read_body(r: &mut Reader<'_>) -> Result<Self> {
        let mean = r.matrix()?;
        let axes = r.matrix()?;
        check(r, axes.nrows() == mean.ncols() && axes.ncols() >= 1, "2DPCA axes do not match the mean")?;
        let eigenvalues = r.floats()?;
        check(r, eigenvalues.len() == axes.ncols(), "eigenvalue count mismatch")?;
        Ok(TwoDPcaModel {
            mean,
            axes,
            eigenvalues,
        })
    }
}

impl ModelFile for FldModel {
    const KIND: u8 = 3;
    const NAME: &'static str = "FLD";

    fn write_body(&self, w: &mut Writer) {
        w.vector(&self.mean);
        w.usize(self.class_labels.len());
        for (l, m) in self.class_labels.iter().zip(&self.class_means) {
            w.usize(*l);
            w.vector(m);
        }
        w.matrix(&self.within);
        w.matrix(&self.between);
        w.matrix(&self.axes);
        w.floats(&self.ratios);
    }

    fn read_body(r: &mut Reader<'_>) -> Result<Self> {
        let mean = r.vector()?;
        let dim = mean.len();
        let n = r.count(16)?;
        let mut class_labels = Vec::with_capacity(n);
        let mut class_means = Vec::with_capacity(n);
        for _ in 0..n {
            class_labels.push(r.u64()? as usize);
            let m = r.vector()?;
            check(r, m.len() == dim, "class mean length mismatch")?;
            class_means.push(m);
        }
        let within = r.matrix()?;
        let between = r.matrix()?;
        check(r, within.shape() == (dim, dim) && between.shape() == (dim, dim), "scatter shape mismatch")?;
        let axes = r.matrix()?;
        check(r, axes.nrows() == dim, "FLD axes do not match the mean")?;
        let ratios = r.floats()?;
        check(r, ratios.len() == axes.ncols(), "Fisher ratio count mismatch")?;
        Ok(FldModel {
            mean,
            class_labels,
            class_means,
            within,
            between,
            axes,
            ratios,
        })
    }
}

fn write_gabor(w: &mut Writer, bank: &GaborBank) {
    let p = bank.params();
    w.usize(p.scales);
    w.usize(p.orientations);
    w.usize(p.kernel_size);
    w.f64(p.lambda_min);
    w.f64(p.gamma);
    w.f64(p.sigma_ratio);
}

/// Largest bank a model file may request; the kernels are rebuilt on load.
const MAX_GABOR_TAPS: u64 = 1 << 24;

fn read_gabor(r: &mut Reader<'_>) -> Result<GaborBank> {
    let at = r.pos;
    let scales = r.u64()?;
    let orientations = r.u64()?;
    let kernel_size = r.u64()?;
    let taps = scales
        .checked_mul(orientations)
        .and_then(|n| n.checked_mul(kernel_size.checked_mul(kernel_size)?));
    if taps.is_none_or(|t| t > MAX_GABOR_TAPS) {
        return Err(Error::ModelFile {
            offset: at,
            message: "Gabor bank is too large".into(),
        });
    }
    let params = GaborParams {
        scales: scales as usize,
        orientations: orientations as usize,
        kernel_size: kernel_size as usize,
        lambda_min: r.f64()?,
        gamma: r.f64()?,
        sigma_ratio: r.f64()?,
    };
    GaborBank::new(params).map_err(|e| Error::ModelFile {
        offset: at,
        message: e.to_string(),
    })
}

fn write_fused(w: &mut Writer, f: &FusedExtractor) {
    f.twodpca.write_body(w);
    write_gabor(w, &f.gabor);
    f.fld_2dpca.write_body(w);
    f.fld_gabor.write_body(w);
}

fn read_fused(r: &mut Reader<'_>) -> Result<FusedExtractor> {
    let twodpca = TwoDPcaModel::read_body(r)?;
    let gabor = read_gabor(r)?;
    let fld_2dpca = FldModel::read_body(r)?;
    check(
        r,
        fld_2dpca.input_dim() == twodpca.shape().0 * twodpca.components(),
        "2DPCA discriminant does not match the 2DPCA features",
    )?;
    let fld_gabor = FldModel::read_body(r)?;
    check(
        r,
        fld_gabor.input_dim() == gabor.feature_len(),
        "Gabor discriminant does not match the filter bank",
    )?;
    Ok(FusedExtractor {
        twodpca,
        gabor,
        fld_2dpca,
        fld_gabor,
    })
}

impl ModelFile for AuTemplateGallery {
    const KIND: u8 = 4;
    const NAME: &'static str = "AU template gallery";

    fn write_body(&self, w: &mut Writer) {
        w.usize(self.regions.len());
        for g in &self.regions {
            w.str(g.region.name());
            match &g.extractor {
                RegionExtractor::TwoDPca(m) => {
                    w.u8(0);
                    m.write_body(w);
                }
                RegionExtractor::Fused(f) => {
                    w.u8(1);
                    write_fused(w, f);
                }
            }
            w.usize(g.templates.len());
            for (au, v) in &g.templates {
                w.u8(au.unwrap_or(0));
                w.vector(v);
            }
        }
    }

    fn read_body(r: &mut Reader<'_>) -> Result<Self> {
        let n = r.count(8)?;
        let mut regions: Vec<RegionGallery> = Vec::with_capacity(n);
        for _ in 0..n {
            let at = r.pos;
            let name = r.str()?;
            let region: Region = name.parse().map_err(|_| Error::ModelFile {
                offset: at,
                message: format!("unknown region `{name}`"),
            })?;
            check(r, regions.iter().all(|g| g.region != region), "duplicate region")?;
            let extractor = match r.u8()? {
                0 => RegionExtractor::TwoDPca(TwoDPcaModel::read_body(r)?),
                1 => RegionExtractor::Fused(Box::new(read_fused(r)?)),
                other => return Err(r.error(format!("unknown extractor tag {other}"))),
            };
            let t = r.count(9)?;
            let mut templates = Vec::with_capacity(t);
            for _ in 0..t {
                let at = r.pos;
                let au = match r.u8()? {
                    0 => None,
                    code if region.au_list().contains(&code) => Some(code),
                    code => {
                        return Err(Error::ModelFile {
                            offset: at,
                            message: format!("AU {code} does not belong to {region}"),
                        })
                    }
                };
                templates.push((au, r.vector()?));
            }
            regions.push(RegionGallery {
                region,
                extractor,
                templates,
            });
        }
        Ok(AuTemplateGallery { regions })
    }
}

impl ModelFile for FusedIdentity {
    const KIND: u8 = 5;
    const NAME: &'static str = "fused identity";

    fn write_body(&self, w: &mut Writer) {
        write_fused(w, &self.extractor);
        w.usize(self.gallery.len());
        for g in &self.gallery {
            w.str(&g.identity);
            w.vector(&g.weights);
        }
        w.f64(self.phi);
    }

    fn read_body(r: &mut Reader<'_>) -> Result<Self> {
        let extractor = read_fused(r)?;
        let n = r.count(16)?;
        let mut gallery = Vec::with_capacity(n);
        for _ in 0..n {
            let identity = r.str()?;
            let weights = r.vector()?;
            check(r, weights.len() == extractor.output_dim(), "gallery weights length mismatch")?;
            gallery.push(GalleryEntry { identity, weights });
        }
        let phi = r.f64()?;
        Ok(FusedIdentity {
            extractor,
            gallery,
            phi,
        })
    }
}
