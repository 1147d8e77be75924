#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Err(e) = pegsim::scenario::parse_config(s) {
            // every rejection is a configuration error
            assert_eq!(e.exit_code(), 1, "{e}");
        }
    }
});
