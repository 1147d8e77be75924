#![no_main]
use libfuzzer_sys::fuzz_target;
use pegsim::scenario::{parse_config, render};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    let Ok(cfg) = parse_config(s) else { return };
    let text = render(&cfg);
    let again = parse_config(&text).unwrap_or_else(|e| panic!("rendered config rejected: {e}\n{text}"));
    assert_eq!(again, cfg);
});
