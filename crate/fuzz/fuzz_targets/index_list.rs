#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let a = geomix::io::parse_index_list(text, "train.txt");
        let b = geomix::io::parse_labels(text, "labels.txt");
        assert_eq!(a.is_ok(), b.is_ok());
    }
});
