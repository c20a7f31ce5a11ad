#![no_main]
use facsca::retrieval::ShotIndex;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(index) = ShotIndex::from_json(text) {
        assert_eq!(ShotIndex::from_json(&index.to_json()).unwrap(), index);
    }
});
