#![no_main]

//! Input is up to seven NUL-separated sections: meta, edges, features,
//! labels, then optionally train, val and test index lists.

use geomix::io::{graph_from_texts, DatasetTexts};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let parts: Vec<&str> = text.split('\0').collect();
    if parts.len() < 4 {
        return;
    }
    let split = (parts.len() >= 7).then(|| [parts[4], parts[5], parts[6]]);
    let texts = DatasetTexts { meta: parts[0], edges: parts[1], features: parts[2], labels: parts[3], split };
    if let Ok(g) = graph_from_texts(&texts) {
        assert_eq!(g.labels().len(), g.num_nodes());
        assert_eq!(g.features().nrows(), g.num_nodes());
    }
});
