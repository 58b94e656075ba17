use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::graph::{Graph, Masks};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitConfig {
    pub per_class_train: usize,
    pub val_total: usize,
    /// `None` puts every remaining node in the test set.
    pub test_total: Option<usize>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { per_class_train: 20, val_total: 500, test_total: None }
    }
}

/// `per_class_train` nodes of each class for training, then `val_total`
/// and the test set drawn from the remaining pool.
pub fn make_splits(graph: &Graph, config: &SplitConfig, seed: u64) -> Result<Masks> {
    let n = graph.num_nodes();
    let mut rng = rng::substream(seed, rng::SPLITS);
    let mut masks = Masks::empty(n);
    let mut pool = Vec::with_capacity(n);
    for c in 0..graph.num_classes() {
        let mut members: Vec<usize> = (0..n).filter(|&v| graph.labels()[v] == c).collect();
        if members.len() < config.per_class_train {
            return Err(Error::invalid(format!(
                "class {c} has {} nodes, fewer than {} training nodes requested",
                members.len(),
                config.per_class_train
            )));
        }
        members.shuffle(&mut rng);
        for &v in &members[..config.per_class_train] {
            masks.train[v] = true;
        }
        pool.extend_from_slice(&members[config.per_class_train..]);
    }
    pool.sort_unstable();
    pool.shuffle(&mut rng);
    let test_total = config.test_total.unwrap_or(pool.len().saturating_sub(config.val_total));
    if config.val_total + test_total > pool.len() {
        return Err(Error::invalid(format!(
            "{} unlabeled nodes cannot hold {} validation and {} test nodes",
            pool.len(),
            config.val_total,
            test_total
        )));
    }
    for &v in &pool[..config.val_total] {
        masks.val[v] = true;
    }
    for &v in &pool[config.val_total..config.val_total + test_total] {
        masks.test[v] = true;
    }
    Ok(masks)
}
