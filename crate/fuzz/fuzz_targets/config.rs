#![no_main]

use geomix_cli::config::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = RunConfig::from_text(text, "fuzz.cfg") {
            // typed accessors may reject values but must not panic
            let _ = cfg.train();
            let _ = cfg.split_config();
            let _ = cfg.metric();
            let _ = cfg.list::<u64>("run.seeds");
        }
    }
});
