#![no_main]
use facsca::image::{decode_pnm, encode_pnm};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = decode_pnm(data) {
        assert_eq!(decode_pnm(&encode_pnm(&img)).unwrap(), img);
    }
});
