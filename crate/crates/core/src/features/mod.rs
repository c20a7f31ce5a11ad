//! Feature extraction: eigenfaces, 2DPCA, Gabor, FLD and their fusion.

pub mod eigenfaces;
pub mod fld;
pub mod fusion;
pub mod gabor;
pub mod templates;
pub mod twodpca;

pub use eigenfaces::{extract_key_faces, EigenModel, EigenParams, GalleryEntry, Recognition};
pub use fld::FldModel;
pub use fusion::{fuse_features, FusedExtractor, FusedIdentity};
pub use gabor::{gabor_features, GaborBank, GaborParams};
pub use templates::{match_au, AuTemplateGallery};
pub use twodpca::TwoDPcaModel;
