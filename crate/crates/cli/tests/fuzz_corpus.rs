//! The fuzz seeds are meant to be valid inputs; keep them that way.

use std::path::{Path, PathBuf};

use geomix::io::{graph_from_texts, DatasetTexts};
use geomix_cli::config::RunConfig;

fn seeds(target: &str) -> Vec<(PathBuf, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            let text = std::fs::read_to_string(&p).unwrap();
            (p, text)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn text_parser_seeds_parse() {
    for (p, t) in seeds("edges") {
        geomix::io::parse_edges(&t, "e").unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
    for (p, t) in seeds("features") {
        geomix::io::parse_features(&t, "f").unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
    for (p, t) in seeds("index_list") {
        geomix::io::parse_index_list(&t, "i").unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
    for (p, t) in seeds("meta") {
        geomix::io::parse_meta(&t, "m").unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
    for (p, t) in seeds("key_values") {
        geomix::io::parse_key_values(&t, "k").unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
    for (p, t) in seeds("config") {
        RunConfig::from_text(&t, "c").unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
}

#[test]
fn dataset_seeds_build_graphs() {
    for (p, t) in seeds("dataset") {
        let parts: Vec<&str> = t.split('\0').collect();
        let split = (parts.len() >= 7).then(|| [parts[4], parts[5], parts[6]]);
        let texts = DatasetTexts { meta: parts[0], edges: parts[1], features: parts[2], labels: parts[3], split };
        graph_from_texts(&texts).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
}
