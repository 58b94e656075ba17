//! Two-layer GCN trained on mixed features and soft labels.
//!
//! Every epoch the current model labels the unlabeled nodes, the mixup
//! operator blends features and labels over the graph, and one Adam step is
//! taken on the mixed loss. For the learned variant the gradient also flows
//! back through every mixup hop into the attention projections. Evaluation
//! always uses the original features.

mod gcn;
mod loss;
mod optim;

pub use gcn::{gcn_backward, gcn_forward, gcn_logits, GcnTape, ModelParams};
pub use loss::{log_softmax, mixed_loss, mixed_loss_reduced, softmax, LossOutput, Reduction};
pub use optim::Adam;

use ndarray::Array2;
use rand::Rng;

use crate::adaptive::{self, AttentionParams};
use crate::augment::{init_mix_state, mix_hops, renormalize_rows, renormalize_rows_backward, MixConfig, MixVariant};
use crate::error::{Error, Result};
use crate::graph::{normalize_adjacency, Graph, MaskKind, NormScheme, NormalizedWeights};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PseudoLabelRefresh {
    #[default]
    EveryEpoch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub epochs: usize,
    /// Stop after this many epochs without a new best validation accuracy.
    pub patience: usize,
    /// Weight of the unlabeled (mixed-label) term.
    pub lambda: f64,
    /// Epochs over which the unlabeled weight ramps linearly from 0 to `lambda`.
    pub lambda_warmup: usize,
    pub reduction: Reduction,
    pub hidden: usize,
    /// Attention projection width for GeoMix-III.
    pub projection_dim: usize,
    pub mix: MixConfig,
    pub seed: u64,
    pub pseudo_label_refresh: PseudoLabelRefresh,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            weight_decay: 5e-4,
            dropout: 0.5,
            epochs: 500,
            patience: 100,
            lambda: 1.0,
            lambda_warmup: 0,
            reduction: Reduction::Mean,
            hidden: 64,
            projection_dim: 16,
            mix: MixConfig::default(),
            seed: 0,
            pseudo_label_refresh: PseudoLabelRefresh::EveryEpoch,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.mix.validate()?;
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::invalid(format!("lambda = {} must be non-negative", self.lambda)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!("dropout = {} outside [0, 1)", self.dropout)));
        }
        if !(self.learning_rate > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::invalid("learning rate must be positive and weight decay non-negative"));
        }
        if self.hidden == 0 || self.projection_dim == 0 {
            return Err(Error::invalid("hidden and projection widths must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    /// Accuracy of the parameters entering this epoch. NaN if the mask is empty.
    pub val_acc: f64,
    pub test_acc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters with the best validation accuracy.
    pub params: ModelParams,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_acc: f64,
    /// Test accuracy of `params`, NaN if there is no test mask.
    pub test_acc: f64,
}

/// GCN propagation weights: symmetric with self-loops.
pub fn propagation_weights(graph: &Graph) -> NormalizedWeights {
    normalize_adjacency(graph, NormScheme::Symmetric, true)
}

/// Graph plus the two weight sets a run needs.
#[derive(Debug, Clone)]
pub struct TrainContext<'g> {
    pub graph: &'g Graph,
    pub prop: NormalizedWeights,
    pub mix_weights: NormalizedWeights,
}

impl<'g> TrainContext<'g> {
    pub fn new(graph: &'g Graph, mix: &MixConfig) -> Self {
        TrainContext { graph, prop: propagation_weights(graph), mix_weights: mix.weights(graph) }
    }
}

fn one_hot_rows(graph: &Graph, rows: &mut Array2<f64>) {
    let train = graph.mask(MaskKind::Train);
    for (v, mut row) in rows.rows_mut().into_iter().enumerate() {
        if train[v] {
            row.fill(0.0);
            row[graph.labels()[v]] = 1.0;
        }
    }
}

fn pseudo_from_logits(graph: &Graph, logits: &Array2<f64>) -> Array2<f64> {
    let mut p = softmax(logits);
    one_hot_rows(graph, &mut p);
    p
}

/// One-hot rows for labeled nodes, model softmax on original features elsewhere.
pub fn pseudo_labels(params: &ModelParams, graph: &Graph, prop: &NormalizedWeights) -> Result<Array2<f64>> {
    Ok(pseudo_from_logits(graph, &gcn_logits(params, prop, graph.features())?))
}

fn argmax(row: ndarray::ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &x) in row.iter().enumerate() {
        if x > row[best] {
            best = i;
        }
    }
    best
}

/// Fraction of masked rows whose argmax (lowest index on ties) equals the label.
pub fn accuracy(logits: &Array2<f64>, labels: &[usize], mask: &[bool]) -> Result<f64> {
    let (mut hit, mut total) = (0usize, 0usize);
    for (v, row) in logits.rows().into_iter().enumerate() {
        if mask[v] {
            total += 1;
            hit += usize::from(argmax(row) == labels[v]);
        }
    }
    if total == 0 {
        return Err(Error::invalid("accuracy over an empty mask"));
    }
    Ok(hit as f64 / total as f64)
}

fn accuracy_or_nan(logits: &Array2<f64>, graph: &Graph, kind: MaskKind) -> f64 {
    accuracy(logits, graph.labels(), graph.mask(kind)).unwrap_or(f64::NAN)
}

pub fn evaluate(params: &ModelParams, graph: &Graph, mask: MaskKind) -> Result<f64> {
    let logits = gcn_logits(params, &propagation_weights(graph), graph.features())?;
    accuracy(&logits, graph.labels(), graph.mask(mask))
}

/// Fresh parameters for `config`, drawn from the `init` substream.
pub fn init_params(graph: &Graph, config: &TrainConfig) -> ModelParams {
    let mut rng = rng::substream(config.seed, rng::INIT);
    let mut params = ModelParams::init(graph.feature_dim(), config.hidden, graph.num_classes(), &mut rng);
    if config.mix.variant == MixVariant::GeoMixIII {
        params.attention =
            Some(AttentionParams::init(graph.feature_dim(), config.projection_dim, config.mix.hops, &mut rng));
    }
    params
}

/// Mixed loss and its gradient for every tensor in `params`, given fixed
/// pseudo-labels. Dropout is applied when `dropout` is given.
pub fn loss_and_grads<R: Rng>(
    params: &ModelParams,
    ctx: &TrainContext<'_>,
    pseudo: &Array2<f64>,
    config: &TrainConfig,
    dropout: Option<(f64, &mut R)>,
) -> Result<(f64, ModelParams)> {
    let graph = ctx.graph;
    let mix = &config.mix;
    let start = init_mix_state(graph, pseudo)?;
    let (state, tapes) = if mix.variant == MixVariant::GeoMixIII {
        let attention =
            params.attention.as_ref().ok_or_else(|| Error::invalid("geomix3 requires attention parameters"))?;
        let (s, t) = adaptive::forward_hops(start, &ctx.mix_weights, attention, mix)?;
        (s, Some(t))
    } else {
        (mix_hops(start, &ctx.mix_weights, mix, None)?, None)
    };
    let renorm = mix.scheme == NormScheme::Symmetric;
    let targets = if renorm { renormalize_rows(&state.soft_labels) } else { state.soft_labels.clone() };

    let (logits, tape) = gcn_forward(params, &ctx.prop, &state.features, dropout)?;
    let loss = mixed_loss_reduced(
        &logits,
        graph.labels(),
        graph.mask(MaskKind::Train),
        &targets,
        config.lambda,
        config.reduction,
    )?;
    let (mut grads, d_features) = gcn_backward(params, &ctx.prop, &tape, &loss.grad_logits)?;

    if let (Some(tapes), Some(attention)) = (tapes, params.attention.as_ref()) {
        let d_labels =
            if renorm { renormalize_rows_backward(&state.soft_labels, &loss.grad_targets) } else { loss.grad_targets };
        let hops = adaptive::backward_hops(&tapes, &ctx.mix_weights, attention, d_features, d_labels)?;
        grads.attention = Some(AttentionParams::from_parts(hops));
    } else {
        grads.attention = params.zeros_like().attention;
    }
    Ok((loss.value, grads))
}

/// Full training run: returns the best-validation parameters and the history.
pub fn train(graph: &Graph, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if !graph.mask(MaskKind::Train).iter().any(|&m| m) {
        return Err(Error::invalid("train mask is empty"));
    }
    let ctx = TrainContext::new(graph, &config.mix);
    let mut params = init_params(graph, config);
    let mut adam = Adam::new(&params, config.learning_rate, config.weight_decay);
    let has_val = graph.mask(MaskKind::Val).iter().any(|&m| m);

    let mut history = Vec::with_capacity(config.epochs);
    let mut best = (params.clone(), 0usize, f64::NEG_INFINITY);
    let mut stale = 0usize;
    for epoch in 0..config.epochs {
        let logits = gcn_logits(&params, &ctx.prop, graph.features())?;
        let val_acc = accuracy_or_nan(&logits, graph, MaskKind::Val);
        let test_acc = accuracy_or_nan(&logits, graph, MaskKind::Test);
        if !has_val || val_acc > best.2 {
            best = (params.clone(), epoch, val_acc);
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
        let pseudo = pseudo_from_logits(graph, &logits);
        let mut drop_rng = rng::indexed_substream(config.seed, rng::DROPOUT, epoch as u64);
        let ramp = if epoch < config.lambda_warmup { epoch as f64 / config.lambda_warmup as f64 } else { 1.0 };
        let epoch_config = TrainConfig { lambda: config.lambda * ramp, ..*config };
        let (loss, grads) =
            loss_and_grads(&params, &ctx, &pseudo, &epoch_config, Some((config.dropout, &mut drop_rng)))?;
        if !loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                detail: format!(
                    "loss = {loss}; lr = {}, lambda = {}, variant = {}",
                    config.learning_rate, config.lambda, config.mix.variant
                ),
            });
        }
        adam.update(&mut params, &grads);
        if !params.is_finite() {
            return Err(Error::Diverged { epoch, detail: "non-finite parameters after update".into() });
        }
        history.push(EpochRecord { epoch, loss, val_acc, test_acc });
    }
    let (params, best_epoch, best_val_acc) = best;
    let logits = gcn_logits(&params, &ctx.prop, graph.features())?;
    let test_acc = accuracy_or_nan(&logits, graph, MaskKind::Test);
    Ok(TrainOutcome { params, history, best_epoch, best_val_acc, test_acc })
}
