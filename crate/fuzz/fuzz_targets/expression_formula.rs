#![no_main]
use facsca::facs::{AuSet, ExpressionDef, ExpressionLabel};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = ExpressionDef::parse(ExpressionLabel::Happiness, text);
    if let Ok(set) = text.parse::<AuSet>() {
        assert_eq!(set.to_string().parse::<AuSet>().unwrap(), set);
    }
});
