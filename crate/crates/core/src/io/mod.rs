//! Plain-text datasets, KNN graph construction, splits and result files.

pub mod dataset;
pub mod export;
pub mod knn;
pub mod parse;
pub mod splits;

pub use dataset::{
    graph_from_texts, load_dataset, save_dataset, verify_checksum, DatasetBundle, DatasetMeta, DatasetTexts,
};
pub use export::{mean_std, write_config_echo, write_metrics, write_summary, write_table};
pub use knn::{knn_graph, Metric};
pub use parse::{parse_edges, parse_features, parse_index_list, parse_key_values, parse_labels, parse_meta, Meta};
pub use splits::{make_splits, SplitConfig};
