use ndarray::{Array1, Array2, ArrayViewD, ArrayViewMutD, Axis};
use rand::Rng;

use crate::adaptive::AttentionParams;
use crate::error::{Error, Result};
use crate::graph::{aggregate, aggregate_transpose, NormalizedWeights};

/// Two-layer GCN weights plus the optional per-hop attention projections.
/// The same type holds gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub w0: Array2<f64>,
    pub b0: Array1<f64>,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub attention: Option<AttentionParams>,
}

fn glorot<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-bound..=bound))
}

impl ModelParams {
    pub fn init<R: Rng>(features: usize, hidden: usize, classes: usize, rng: &mut R) -> Self {
        ModelParams {
            w0: glorot(features, hidden, rng),
            b0: Array1::zeros(hidden),
            w1: glorot(hidden, classes, rng),
            b1: Array1::zeros(classes),
            attention: None,
        }
    }

    pub fn zeros(features: usize, hidden: usize, classes: usize) -> Self {
        ModelParams {
            w0: Array2::zeros((features, hidden)),
            b0: Array1::zeros(hidden),
            w1: Array2::zeros((hidden, classes)),
            b1: Array1::zeros(classes),
            attention: None,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.w0.nrows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w0.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.w1.ncols()
    }

    /// Same shapes, all zero.
    pub fn zeros_like(&self) -> Self {
        let mut z = ModelParams::zeros(self.feature_dim(), self.hidden_dim(), self.num_classes());
        z.attention = self.attention.as_ref().map(|a| {
            let mut a = a.clone();
            for h in a.hops_mut() {
                h.query.fill(0.0);
                h.key.fill(0.0);
            }
            a
        });
        z
    }

    /// Tensors in a fixed order, each flagged with whether weight decay applies.
    pub fn tensors(&self) -> Vec<(&'static str, ArrayViewD<'_, f64>, bool)> {
        let mut out = vec![
            ("w0", self.w0.view().into_dyn(), true),
            ("b0", self.b0.view().into_dyn(), false),
            ("w1", self.w1.view().into_dyn(), true),
            ("b1", self.b1.view().into_dyn(), false),
        ];
        if let Some(a) = &self.attention {
            for h in a.hops() {
                out.push(("w_q", h.query.view().into_dyn(), true));
                out.push(("w_k", h.key.view().into_dyn(), true));
            }
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<ArrayViewMutD<'_, f64>> {
        let mut out = vec![
            self.w0.view_mut().into_dyn(),
            self.b0.view_mut().into_dyn(),
            self.w1.view_mut().into_dyn(),
            self.b1.view_mut().into_dyn(),
        ];
        if let Some(a) = &mut self.attention {
            for h in a.hops_mut() {
                out.push(h.query.view_mut().into_dyn());
                out.push(h.key.view_mut().into_dyn());
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t, _)| t.iter().all(|x| x.is_finite()))
    }
}

/// Intermediates kept by [`gcn_forward`].
#[derive(Debug, Clone)]
pub struct GcnTape {
    /// `Â X`
    ax: Array2<f64>,
    /// pre-activation of the hidden layer
    z0: Array2<f64>,
    /// inverted-dropout multipliers (0 or 1/(1-p)); `None` when dropout is off
    keep: Option<Array2<f64>>,
    /// `Â · dropout(relu(z0))`
    ad: Array2<f64>,
}

/// `logits = Â · dropout(relu(Â X W0 + b0)) · W1 + b1`.
///
/// `dropout` is `(rate, rng)`; pass `None` for evaluation.
pub fn gcn_forward<R: Rng>(
    params: &ModelParams,
    prop: &NormalizedWeights,
    features: &Array2<f64>,
    dropout: Option<(f64, &mut R)>,
) -> Result<(Array2<f64>, GcnTape)> {
    if features.ncols() != params.feature_dim() {
        return Err(Error::dims("gcn_forward", format!("{} feature columns", params.feature_dim()), features.ncols()));
    }
    if features.nrows() != prop.num_nodes() {
        return Err(Error::dims("gcn_forward", format!("{} rows", prop.num_nodes()), features.nrows()));
    }
    let ax = aggregate(prop, features)?;
    let mut z0 = ax.dot(&params.w0);
    z0 += &params.b0;
    let mut hidden = z0.mapv(|z| z.max(0.0));
    let keep = match dropout {
        Some((rate, rng)) if rate > 0.0 => {
            if !(0.0..1.0).contains(&rate) {
                return Err(Error::invalid(format!("dropout rate {rate} outside [0, 1)")));
            }
            let scale = 1.0 / (1.0 - rate);
            let keep = Array2::from_shape_fn(hidden.dim(), |_| if rng.random::<f64>() < rate { 0.0 } else { scale });
            hidden *= &keep;
            Some(keep)
        }
        _ => None,
    };
    let ad = aggregate(prop, &hidden)?;
    let mut logits = ad.dot(&params.w1);
    logits += &params.b1;
    Ok((logits, GcnTape { ax, z0, keep, ad }))
}

/// Logits without dropout.
pub fn gcn_logits(params: &ModelParams, prop: &NormalizedWeights, features: &Array2<f64>) -> Result<Array2<f64>> {
    gcn_forward::<rand_chacha::ChaCha8Rng>(params, prop, features, None).map(|(l, _)| l)
}

/// Parameter gradients (attention left `None`) and `∂L/∂features`.
pub fn gcn_backward(
    params: &ModelParams,
    prop: &NormalizedWeights,
    tape: &GcnTape,
    grad_logits: &Array2<f64>,
) -> Result<(ModelParams, Array2<f64>)> {
    let w1 = tape.ad.t().dot(grad_logits);
    let b1 = grad_logits.sum_axis(Axis(0));
    let d_ad = grad_logits.dot(&params.w1.t());
    let mut d_hidden = aggregate_transpose(prop, &d_ad)?;
    if let Some(keep) = &tape.keep {
        d_hidden *= keep;
    }
    let d_z0 = ndarray::Zip::from(&d_hidden).and(&tape.z0).map_collect(|&g, &z| if z > 0.0 { g } else { 0.0 });
    let w0 = tape.ax.t().dot(&d_z0);
    let b0 = d_z0.sum_axis(Axis(0));
    let d_ax = d_z0.dot(&params.w0.t());
    let d_x = aggregate_transpose(prop, &d_ax)?;
    Ok((ModelParams { w0, b0, w1, b1, attention: None }, d_x))
}
