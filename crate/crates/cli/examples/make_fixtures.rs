//! Regenerates the datasets under `crates/cli/fixtures/`.
//!
//! `cargo run -p geomix-cli --example make_fixtures`

use std::collections::BTreeMap;
use std::path::Path;

use geomix::io::{make_splits, save_dataset, SplitConfig};
use geomix::theory::synthetic::{generate_graph, GraphSpec};

pub const FIXTURES: [(&str, f64); 2] = [("homophilic", 0.85), ("heterophilic", 0.3)];

pub fn spec(homophily: f64) -> GraphSpec {
    GraphSpec { nodes: 300, ..GraphSpec::benchmark(homophily) }
}

pub fn split() -> SplitConfig {
    SplitConfig { per_class_train: 20, val_total: 100, test_total: None }
}

fn main() -> geomix::Result<()> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    for (name, h) in FIXTURES {
        let graph = generate_graph(&spec(h))?;
        let masks = make_splits(&graph, &split(), 0)?;
        let graph = graph.with_masks(masks)?;
        let mut params = BTreeMap::new();
        params.insert("name".to_string(), name.to_string());
        params.insert("homophily".to_string(), h.to_string());
        save_dataset(&graph, &root.join(name), &params, "default")?;
        println!("{name}: {} nodes, {} edges", graph.num_nodes(), graph.edges().len());
    }
    Ok(())
}
