#![no_main]
use facsca::config::Config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = Config::parse(text) {
        assert_eq!(Config::parse(&cfg.echo()).unwrap().echo(), cfg.echo());
    }
});
