#![no_main]
use facsca::facs::{parse_pattern, render_pattern, RenderMode};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(p) = parse_pattern(text) {
        let canonical = render_pattern(&p, RenderMode::Canonical);
        assert_eq!(parse_pattern(&canonical).unwrap(), p);
    }
});
