//! Neighborhood mixup of node features and soft labels.
//!
//! Every step mixes features and labels with the same weights and the same
//! `alpha`, and returns a fresh [`MixState`]; inputs are never modified.

use std::sync::Arc;

use ndarray::{Array2, Zip};

use crate::adaptive::{self, AttentionParams};
use crate::error::{Error, Result};
use crate::graph::{aggregate, normalize_adjacency, Graph, NormScheme, NormalizedWeights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MixVariant {
    /// Plain neighbor average.
    Basic,
    /// Residual on the previous mixed state.
    GeoMixI,
    /// Residual on the original state.
    GeoMixII,
    /// Learned all-pair mixing blended with the graph aggregate.
    GeoMixIII,
}

impl MixVariant {
    pub fn name(self) -> &'static str {
        match self {
            MixVariant::Basic => "basic",
            MixVariant::GeoMixI => "geomix1",
            MixVariant::GeoMixII => "geomix2",
            MixVariant::GeoMixIII => "geomix3",
        }
    }
}

impl std::fmt::Display for MixVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for MixVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "basic" => Ok(MixVariant::Basic),
            "geomix1" | "geomix-i" | "i" => Ok(MixVariant::GeoMixI),
            "geomix2" | "geomix-ii" | "ii" => Ok(MixVariant::GeoMixII),
            "geomix3" | "geomix-iii" | "iii" => Ok(MixVariant::GeoMixIII),
            other => Err(Error::invalid(format!("unknown mixup variant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixConfig {
    pub variant: MixVariant,
    pub alpha: f64,
    pub hops: usize,
    /// Graph-branch weight, GeoMix-III only.
    pub eta: f64,
    pub scheme: NormScheme,
    pub self_loops: bool,
}

impl Default for MixConfig {
    fn default() -> Self {
        MixConfig {
            variant: MixVariant::GeoMixI,
            alpha: 0.5,
            hops: 2,
            eta: 0.5,
            scheme: NormScheme::RowNormalized,
            self_loops: false,
        }
    }
}

impl MixConfig {
    pub fn validate(&self) -> Result<()> {
        check_unit("alpha", self.alpha)?;
        check_unit("eta", self.eta)?;
        if self.hops == 0 {
            return Err(Error::invalid("hops must be at least 1"));
        }
        Ok(())
    }

    pub fn weights(&self, graph: &Graph) -> NormalizedWeights {
        normalize_adjacency(graph, self.scheme, self.self_loops)
    }
}

pub(crate) fn check_unit(name: &str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} = {x} outside [0, 1]")))
    }
}

/// Mixed features `H^(t)` and soft labels `Ȳ^(t)` after `hop` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct MixState {
    pub features: Array2<f64>,
    pub soft_labels: Array2<f64>,
    pub hop: usize,
    original_features: Arc<Array2<f64>>,
    original_labels: Arc<Array2<f64>>,
}

impl MixState {
    pub fn new(features: Array2<f64>, soft_labels: Array2<f64>) -> Result<Self> {
        if features.nrows() != soft_labels.nrows() {
            return Err(Error::RowCountMismatch {
                what: "soft labels".into(),
                expected: features.nrows(),
                found: soft_labels.nrows(),
            });
        }
        Ok(MixState {
            original_features: Arc::new(features.clone()),
            original_labels: Arc::new(soft_labels.clone()),
            features,
            soft_labels,
            hop: 0,
        })
    }

    pub fn original_features(&self) -> &Array2<f64> {
        &self.original_features
    }

    pub fn original_labels(&self) -> &Array2<f64> {
        &self.original_labels
    }

    pub(crate) fn successor(&self, features: Array2<f64>, soft_labels: Array2<f64>) -> MixState {
        MixState {
            features,
            soft_labels,
            hop: self.hop + 1,
            original_features: Arc::clone(&self.original_features),
            original_labels: Arc::clone(&self.original_labels),
        }
    }
}

/// Hop-0 state: input features and the pseudo-label matrix.
pub fn init_mix_state(graph: &Graph, pseudo_labels: &Array2<f64>) -> Result<MixState> {
    let shape = (graph.num_nodes(), graph.num_classes());
    if pseudo_labels.dim() != shape {
        return Err(Error::dims("init_mix_state", format!("{shape:?}"), format!("{:?}", pseudo_labels.dim())));
    }
    MixState::new(graph.features().clone(), pseudo_labels.clone())
}

pub fn basic_step(state: &MixState, weights: &NormalizedWeights) -> Result<MixState> {
    let h = aggregate(weights, &state.features)?;
    let y = aggregate(weights, &state.soft_labels)?;
    Ok(state.successor(h, y))
}

/// `alpha · residual + (1 − alpha) · aggregate`, elementwise.
fn blend(alpha: f64, residual: &Array2<f64>, mixed: Array2<f64>) -> Array2<f64> {
    let mut out = mixed;
    Zip::from(&mut out).and(residual).for_each(|m, &r| *m = alpha * r + (1.0 - alpha) * *m);
    out
}

pub fn geomix1_step(state: &MixState, weights: &NormalizedWeights, alpha: f64) -> Result<MixState> {
    check_unit("alpha", alpha)?;
    let h = blend(alpha, &state.features, aggregate(weights, &state.features)?);
    let y = blend(alpha, &state.soft_labels, aggregate(weights, &state.soft_labels)?);
    Ok(state.successor(h, y))
}

pub fn geomix2_step(state: &MixState, weights: &NormalizedWeights, alpha: f64) -> Result<MixState> {
    check_unit("alpha", alpha)?;
    let h = blend(alpha, state.original_features(), aggregate(weights, &state.features)?);
    let y = blend(alpha, state.original_labels(), aggregate(weights, &state.soft_labels)?);
    Ok(state.successor(h, y))
}

/// One hop of the configured variant.
pub fn mix_step(
    state: &MixState,
    weights: &NormalizedWeights,
    config: &MixConfig,
    params: Option<&AttentionParams>,
) -> Result<MixState> {
    match config.variant {
        MixVariant::Basic => basic_step(state, weights),
        MixVariant::GeoMixI => geomix1_step(state, weights, config.alpha),
        MixVariant::GeoMixII => geomix2_step(state, weights, config.alpha),
        MixVariant::GeoMixIII => {
            let params = params.ok_or_else(|| Error::invalid("geomix3 requires attention parameters"))?;
            adaptive::geomix3_step(state, weights, params, config.alpha, config.eta)
        }
    }
}

/// Applies `config.hops` steps starting from `state`.
pub fn mix_hops(
    state: MixState,
    weights: &NormalizedWeights,
    config: &MixConfig,
    params: Option<&AttentionParams>,
) -> Result<MixState> {
    config.validate()?;
    if config.variant == MixVariant::GeoMixIII && params.is_none() {
        return Err(Error::invalid("geomix3 requires attention parameters"));
    }
    let mut state = state;
    for _ in 0..config.hops {
        state = mix_step(&state, weights, config, params)?;
    }
    Ok(state)
}

pub fn run_mixup(
    graph: &Graph,
    pseudo_labels: &Array2<f64>,
    config: &MixConfig,
    params: Option<&AttentionParams>,
) -> Result<MixState> {
    config.validate()?;
    let weights = config.weights(graph);
    mix_hops(init_mix_state(graph, pseudo_labels)?, &weights, config, params)
}

/// Clamps rows at zero and rescales them to sum to one; all-zero rows
/// become uniform. Used for labels mixed with symmetric weights.
pub fn renormalize_rows(y: &Array2<f64>) -> Array2<f64> {
    let c = y.ncols();
    let mut out = y.mapv(|x| x.max(0.0));
    for mut row in out.rows_mut() {
        let s = row.sum();
        if s > 0.0 {
            row /= s;
        } else {
            row.fill(1.0 / c as f64);
        }
    }
    out
}

/// Adjoint of [`renormalize_rows`] at input `y` for upstream gradient `grad`.
pub fn renormalize_rows_backward(y: &Array2<f64>, grad: &Array2<f64>) -> Array2<f64> {
    let normalized = renormalize_rows(y);
    let mut out = Array2::zeros(y.dim());
    for v in 0..y.nrows() {
        let s: f64 = y.row(v).iter().map(|x| x.max(0.0)).sum();
        if s <= 0.0 {
            continue;
        }
        let dot = grad.row(v).dot(&normalized.row(v));
        for j in 0..y.ncols() {
            if y[[v, j]] > 0.0 {
                out[[v, j]] = (grad[[v, j]] - dot) / s;
            }
        }
    }
    out
}
