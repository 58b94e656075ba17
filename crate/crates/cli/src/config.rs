//! Dotted `key=value` run configuration.
//!
//! Values come from built-in defaults, then an optional config file, then
//! `--set` overrides, each layer replacing the one before. Every accepted
//! key is listed in [`KEYS`]; anything else is rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use geomix::augment::{MixConfig, MixVariant};
use geomix::graph::NormScheme;
use geomix::io::{parse_key_values, Metric, SplitConfig};
use geomix::trainer::{Reduction, TrainConfig};

use crate::CliError;

pub struct Key {
    pub name: &'static str,
    /// `None` means the key has no default and must be set when used.
    pub default: Option<&'static str>,
    pub help: &'static str,
}

const fn key(name: &'static str, default: &'static str, help: &'static str) -> Key {
    Key { name, default: Some(default), help }
}

const fn required(name: &'static str, help: &'static str) -> Key {
    Key { name, default: None, help }
}

pub const KEYS: &[Key] = &[
    required("data.dir", "dataset directory (edges.txt, features.csv, labels.txt, meta.txt)"),
    key("data.split", "", "split name under splits/; empty draws a fresh split"),
    key("data.split_seed", "0", "seed for a freshly drawn split"),
    key("data.per_class_train", "20", "training nodes per class for a fresh split"),
    key("data.val_total", "500", "validation nodes for a fresh split"),
    key("data.test_total", "rest", "test nodes for a fresh split, or `rest`"),
    key("mix.variant", "geomix1", "basic | geomix1 | geomix2 | geomix3"),
    key("mix.alpha", "0.5", "residual weight in [0, 1]"),
    key("mix.hops", "2", "number of mixup hops"),
    key("mix.eta", "0.5", "graph-branch weight for geomix3, in [0, 1]"),
    key("mix.scheme", "row", "edge weights: row | sym"),
    key("mix.self_loops", "false", "add self-loops before normalizing mixup weights"),
    key("train.lr", "0.01", "Adam learning rate"),
    key("train.weight_decay", "5e-4", "decoupled weight decay on weight matrices"),
    key("train.dropout", "0.5", "dropout rate on the hidden layer"),
    key("train.epochs", "500", "maximum epochs"),
    key("train.patience", "100", "epochs without a new best validation accuracy before stopping"),
    key("train.lambda", "1.0", "weight of the mixed-label term"),
    key("train.lambda_warmup", "0", "epochs over which lambda ramps up from 0"),
    key("train.reduction", "mean", "loss reduction: mean | sum"),
    key("train.hidden", "64", "hidden width"),
    key("train.projection_dim", "16", "attention projection width for geomix3"),
    key("run.seeds", "0,1,2,3,4", "comma-separated seeds, one training run each"),
    key("run.out", "out", "output directory"),
    key("verify.trials", "100000", "Monte Carlo neighborhoods per configuration"),
    key("verify.homophily", "0.5,0.7,0.9,1.0", "homophily grid"),
    key("verify.label_noise", "0.0,0.1", "label-noise grid"),
    key("verify.classes", "2,5", "class-count grid"),
    key("verify.degrees", "5,20", "degree grid"),
    key("verify.dims", "1,8", "feature-dimension grid"),
    key("verify.graphs", "50", "random graphs for the descent-step check"),
    key("verify.alphas", "0.2,0.5,0.8", "residual weights for the descent-step check"),
    key("verify.seed", "0", "master seed for verification"),
    key("gradcheck.reps", "20", "random instances per model"),
    key("gradcheck.nodes", "12", "nodes per instance"),
    key("gradcheck.seed", "0", "first instance seed"),
    required("knn.k", "neighbors per node"),
    key("knn.metric", "euclidean", "euclidean | cosine"),
    key("augment.pseudo_labels", "zero", "`zero` (uniform on unlabeled nodes) or a CSV of N soft-label rows"),
];

pub fn lookup(name: &str) -> Option<&'static Key> {
    KEYS.iter().find(|k| k.name == name)
}

/// Key table for `--help`.
pub fn key_table() -> String {
    let width = KEYS.iter().map(|k| k.name.len()).max().unwrap_or(0);
    let mut out = String::from("Configuration keys (file lines or --set key=value):\n");
    for k in KEYS {
        let default = match k.default {
            Some("") => "(empty)".to_string(),
            Some(d) => d.to_string(),
            None => "(required)".to_string(),
        };
        let _ = writeln!(out, "  {:<width$}  {:<16} {}", k.name, default, k.help);
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<&'static str, String>,
}

impl RunConfig {
    pub fn new() -> Self {
        let values = KEYS.iter().filter_map(|k| k.default.map(|d| (k.name, d.to_string()))).collect();
        RunConfig { values }
    }

    pub fn set(&mut self, name: &str, value: &str) -> Result<(), CliError> {
        let k = lookup(name).ok_or_else(|| CliError::Config(format!("unknown key {name:?}")))?;
        self.values.insert(k.name, value.trim().to_string());
        Ok(())
    }

    /// Applies a `key=value` override as given on the command line.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), CliError> {
        let (k, v) =
            pair.split_once('=').ok_or_else(|| CliError::Config(format!("expected key=value, found {pair:?}")))?;
        self.set(k.trim(), v)
    }

    /// Applies every line of a config file.
    pub fn apply_text(&mut self, text: &str, file: &str) -> Result<(), CliError> {
        let pairs = parse_key_values(text, file).map_err(|e| CliError::Config(e.to_string()))?;
        for (k, v, line) in pairs {
            self.set(&k, &v).map_err(|e| CliError::Config(format!("{file}:{line}: {e}")))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str, file: &str) -> Result<Self, CliError> {
        let mut c = RunConfig::new();
        c.apply_text(text, file)?;
        Ok(c)
    }

    pub fn raw(&self, name: &str) -> Option<&str> {
        self.values.get(name).map(String::as_str)
    }

    /// `(key, value)` in key order, for the config echo.
    pub fn entries(&self) -> Vec<(String, String)> {
        self.values.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    pub fn get<T: FromStr>(&self, name: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(name).ok_or_else(|| CliError::Config(format!("{name} must be set")))?;
        raw.parse().map_err(|e| CliError::Config(format!("{name}={raw}: {e}")))
    }

    pub fn list<T: FromStr>(&self, name: &str) -> Result<Vec<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(name).unwrap_or("");
        let items: Vec<T> = raw
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| t.parse().map_err(|e| CliError::Config(format!("{name}: {t:?}: {e}"))))
            .collect::<Result<_, _>>()?;
        if items.is_empty() {
            return Err(CliError::Config(format!("{name} must list at least one value")));
        }
        Ok(items)
    }

    pub fn path(&self, name: &str) -> Result<PathBuf, CliError> {
        match self.raw(name) {
            Some(p) if !p.is_empty() => Ok(PathBuf::from(p)),
            _ => Err(CliError::Config(format!("{name} must be set"))),
        }
    }

    pub fn out_dir(&self) -> Result<PathBuf, CliError> {
        self.path("run.out")
    }

    pub fn split_name(&self) -> Option<&str> {
        self.raw("data.split").filter(|s| !s.is_empty())
    }

    pub fn split_config(&self) -> Result<SplitConfig, CliError> {
        let test_total = match self.raw("data.test_total") {
            Some("rest") | None => None,
            Some(_) => Some(self.get("data.test_total")?),
        };
        Ok(SplitConfig {
            per_class_train: self.get("data.per_class_train")?,
            val_total: self.get("data.val_total")?,
            test_total,
        })
    }

    pub fn mix(&self) -> Result<MixConfig, CliError> {
        let scheme = match self.raw("mix.scheme") {
            Some("row") => NormScheme::RowNormalized,
            Some("sym") => NormScheme::Symmetric,
            other => return Err(CliError::Config(format!("mix.scheme must be row or sym, found {other:?}"))),
        };
        let mix = MixConfig {
            variant: self.get::<MixVariant>("mix.variant")?,
            alpha: self.get("mix.alpha")?,
            hops: self.get("mix.hops")?,
            eta: self.get("mix.eta")?,
            scheme,
            self_loops: self.get("mix.self_loops")?,
        };
        mix.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(mix)
    }

    pub fn train(&self) -> Result<TrainConfig, CliError> {
        let cfg = TrainConfig {
            learning_rate: self.get("train.lr")?,
            weight_decay: self.get("train.weight_decay")?,
            dropout: self.get("train.dropout")?,
            epochs: self.get("train.epochs")?,
            patience: self.get("train.patience")?,
            lambda: self.get("train.lambda")?,
            lambda_warmup: self.get("train.lambda_warmup")?,
            reduction: self.get::<Reduction>("train.reduction")?,
            hidden: self.get("train.hidden")?,
            projection_dim: self.get("train.projection_dim")?,
            mix: self.mix()?,
            ..TrainConfig::default()
        };
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn metric(&self) -> Result<Metric, CliError> {
        self.get("knn.metric")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_build_valid_configs() {
        let c = RunConfig::new();
        let t = c.train().unwrap();
        assert_eq!(t, TrainConfig { lambda_warmup: 0, ..TrainConfig::default() });
        assert_eq!(c.list::<u64>("run.seeds").unwrap(), vec![0, 1, 2, 3, 4]);
        assert_eq!(c.split_config().unwrap(), SplitConfig::default());
        assert!(c.path("data.dir").is_err());
        assert!(c.get::<usize>("knn.k").is_err());
    }

    #[test]
    fn file_then_override() {
        let mut c = RunConfig::from_text("# comment\nmix.alpha = 0.3\nmix.variant=geomix3\n", "cfg").unwrap();
        c.set_pair("mix.alpha=0.7").unwrap();
        let m = c.mix().unwrap();
        assert_eq!(m.alpha, 0.7);
        assert_eq!(m.variant, MixVariant::GeoMixIII);
    }

    #[test]
    fn unknown_and_malformed_keys() {
        let mut c = RunConfig::new();
        assert!(matches!(c.set_pair("mix.alpah=0.1"), Err(CliError::Config(_))));
        assert!(matches!(c.set_pair("mix.alpha"), Err(CliError::Config(_))));
        let err = RunConfig::from_text("train.lr=0.1\nbogus=1\n", "x.cfg").unwrap_err();
        assert!(err.to_string().contains("x.cfg:2"), "{err}");
        c.set_pair("mix.alpha=1.5").unwrap();
        assert!(c.mix().is_err());
        c.set_pair("mix.alpha=abc").unwrap();
        assert!(c.mix().is_err());
    }

    #[test]
    fn every_key_in_help() {
        let table = key_table();
        for k in KEYS {
            assert!(table.contains(k.name));
        }
        assert!(table.contains("(required)"));
    }

    #[test]
    fn explicit_test_size() {
        let mut c = RunConfig::new();
        c.set("data.test_total", "300").unwrap();
        assert_eq!(c.split_config().unwrap().test_total, Some(300));
    }
}
