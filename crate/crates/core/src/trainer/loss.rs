use ndarray::{Array2, ArrayView1, Zip};

use crate::error::{Error, Result};

/// Row-wise numerically stable log-softmax.
pub fn log_softmax(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let lse = log_sum_exp(row.view());
        row.mapv_inplace(|z| z - lse);
    }
    out
}

pub fn softmax(logits: &Array2<f64>) -> Array2<f64> {
    log_softmax(logits).mapv(f64::exp)
}

fn log_sum_exp(row: ArrayView1<f64>) -> f64 {
    let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if !m.is_finite() {
        return m;
    }
    m + row.iter().map(|z| (z - m).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone)]
pub struct LossOutput {
    pub value: f64,
    /// `∂L/∂logits`
    pub grad_logits: Array2<f64>,
    /// `∂L/∂soft_labels`; zero on labeled rows.
    pub grad_targets: Array2<f64>,
}

/// How the per-node terms of each part of the loss are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reduction {
    /// Plain sums over labeled and unlabeled nodes.
    Sum,
    /// Each part divided by its node count, so `lambda` weighs the two
    /// averages against each other regardless of the label rate.
    #[default]
    Mean,
}

impl Reduction {
    pub fn name(self) -> &'static str {
        match self {
            Reduction::Sum => "sum",
            Reduction::Mean => "mean",
        }
    }
}

impl std::str::FromStr for Reduction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(Reduction::Sum),
            "mean" => Ok(Reduction::Mean),
            _ => Err(Error::invalid(format!("unknown reduction {s:?} (expected sum or mean)"))),
        }
    }
}

/// Summed cross-entropy on labeled nodes plus `lambda` times soft-target
/// cross-entropy on every other node.
pub fn mixed_loss(
    logits: &Array2<f64>,
    labels: &[usize],
    train_mask: &[bool],
    soft_labels: &Array2<f64>,
    lambda: f64,
) -> Result<LossOutput> {
    mixed_loss_reduced(logits, labels, train_mask, soft_labels, lambda, Reduction::Sum)
}

/// [`mixed_loss`] with a choice of reduction.
pub fn mixed_loss_reduced(
    logits: &Array2<f64>,
    labels: &[usize],
    train_mask: &[bool],
    soft_labels: &Array2<f64>,
    lambda: f64,
    reduction: Reduction,
) -> Result<LossOutput> {
    let (n, c) = logits.dim();
    if soft_labels.dim() != (n, c) {
        return Err(Error::dims("mixed_loss", format!("{:?}", (n, c)), format!("{:?}", soft_labels.dim())));
    }
    if labels.len() != n || train_mask.len() != n {
        return Err(Error::dims(
            "mixed_loss",
            format!("{n} labels and mask entries"),
            format!("{} / {}", labels.len(), train_mask.len()),
        ));
    }
    if !train_mask.iter().any(|&m| m) {
        return Err(Error::invalid("mixed_loss needs at least one labeled node"));
    }
    if !(lambda >= 0.0) {
        return Err(Error::invalid(format!("lambda = {lambda} must be non-negative")));
    }
    let labeled = train_mask.iter().filter(|&&m| m).count();
    let (w_l, w_u) = match reduction {
        Reduction::Sum => (1.0, lambda),
        Reduction::Mean => (1.0 / labeled as f64, lambda / (n - labeled).max(1) as f64),
    };
    let logp = log_softmax(logits);
    let mut grad_logits = logp.mapv(f64::exp);
    let mut grad_targets = Array2::zeros((n, c));
    let mut value = 0.0;
    for v in 0..n {
        let lp = logp.row(v);
        let mut g = grad_logits.row_mut(v);
        if train_mask[v] {
            let y = labels[v];
            if y >= c {
                return Err(Error::invalid(format!("label {y} of node {v} outside [0, {c})")));
            }
            value -= w_l * lp[y];
            g[y] -= 1.0;
            g *= w_l;
        } else {
            let t = soft_labels.row(v);
            let mass = t.sum();
            value -= w_u * t.dot(&lp);
            // softmax · Σt − t, which is softmax − t on the simplex
            Zip::from(&mut g).and(&t).for_each(|g, &t| *g = w_u * (*g * mass - t));
            grad_targets.row_mut(v).assign(&(&lp * -w_u));
        }
    }
    Ok(LossOutput { value, grad_logits, grad_targets })
}
