#![no_main]
use facsca::features::{AuTemplateGallery, EigenModel, FldModel, FusedIdentity, TwoDPcaModel};
use facsca::model_io::ModelFile;
use libfuzzer_sys::fuzz_target;

fn check<M: ModelFile + PartialEq + std::fmt::Debug>(data: &[u8]) {
    if let Ok(m) = M::from_bytes(data) {
        assert_eq!(M::from_bytes(&m.to_bytes()).unwrap(), m);
    }
}

fuzz_target!(|data: &[u8]| {
    check::<EigenModel>(data);
    check::<TwoDPcaModel>(data);
    check::<FldModel>(data);
    check::<AuTemplateGallery>(data);
    check::<FusedIdentity>(data);
});
