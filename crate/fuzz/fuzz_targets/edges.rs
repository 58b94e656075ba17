#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(edges) = geomix::io::parse_edges(text, "edges.txt") {
            assert!(edges.len() <= text.lines().count());
        }
    }
});
