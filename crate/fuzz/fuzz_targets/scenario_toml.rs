#![no_main]

use armctl::scenario::Scenario;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(s) = Scenario::from_toml_str(text, None) {
            assert!(s.duration > 0.0);
            assert!(s.substeps() >= 1);
        }
    }
});
