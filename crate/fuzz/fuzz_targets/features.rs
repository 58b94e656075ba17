#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(x) = geomix::io::parse_features(text, "features.csv") {
            assert!(x.iter().all(|v| v.is_finite()));
            // formatting then reparsing must give the same matrix
            let again = geomix::io::parse_features(&geomix::io::dataset::format_matrix(&x), "again").unwrap();
            assert_eq!(x, again);
        }
    }
});
