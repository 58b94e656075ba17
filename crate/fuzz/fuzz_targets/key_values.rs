#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(pairs) = geomix::io::parse_key_values(text, "cfg") {
            for (k, _, line) in &pairs {
                assert!(!k.is_empty());
                assert!(*line >= 1);
            }
        }
    }
});
