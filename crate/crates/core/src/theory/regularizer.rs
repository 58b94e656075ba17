//! Smoothness regularizers whose explicit descent steps reproduce the
//! residual mixup operators.
//!
//! `F(H; A) = Σ_u ‖h_u − a_u‖² + β Σ_{(u,v)} e_uv ‖h_u − h_v‖²`, with the
//! edge sum over stored directed pairs. The anchor `A` is the current state
//! for the first form and the original features for the second.

use ndarray::Array2;

use crate::augment::{geomix1_step, geomix2_step, MixState, MixVariant};
use crate::error::{Error, Result};
use crate::graph::{normalize_adjacency, Graph, NormScheme, NormalizedWeights};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regularizer {
    /// Anchored at the current state; pairs with GeoMix-I.
    F1,
    /// Anchored at the original features; pairs with GeoMix-II.
    F2,
}

impl Regularizer {
    pub fn for_variant(variant: MixVariant) -> Result<Self> {
        match variant {
            MixVariant::GeoMixI => Ok(Regularizer::F1),
            MixVariant::GeoMixII => Ok(Regularizer::F2),
            other => Err(Error::invalid(format!("no regularizer form for variant {other}"))),
        }
    }
}

fn check_shapes(features: &Array2<f64>, anchor: &Array2<f64>, weights: &NormalizedWeights) -> Result<()> {
    if features.dim() != anchor.dim() {
        return Err(Error::dims("regularizer", format!("{:?}", features.dim()), format!("{:?}", anchor.dim())));
    }
    if features.nrows() != weights.num_nodes() {
        return Err(Error::dims("regularizer", format!("{} rows", weights.num_nodes()), features.nrows()));
    }
    Ok(())
}

fn sq_dist(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn regularizer_value(
    features: &Array2<f64>,
    anchor: &Array2<f64>,
    weights: &NormalizedWeights,
    beta: f64,
) -> Result<f64> {
    check_shapes(features, anchor, weights)?;
    let mut fit = 0.0;
    let mut smooth = 0.0;
    for u in 0..features.nrows() {
        fit += sq_dist(features.row(u), anchor.row(u));
        for (v, e) in weights.row(u) {
            smooth += e * sq_dist(features.row(u), features.row(v));
        }
    }
    Ok(fit + beta * smooth)
}

/// Per-node derivative `2(h_u − a_u) + 2β Σ_v e_uv (h_u − h_v)`.
///
/// This is the gradient of the node-local energy
/// `E_u = ‖h_u − a_u‖² + β Σ_v e_uv ‖h_u − h_v‖²` with the neighbors held
/// fixed; it equals the gradient of the total only when `e` is symmetric.
pub fn regularizer_gradient(
    features: &Array2<f64>,
    anchor: &Array2<f64>,
    weights: &NormalizedWeights,
    beta: f64,
) -> Result<Array2<f64>> {
    check_shapes(features, anchor, weights)?;
    let mut grad = (features - anchor) * 2.0;
    for u in 0..features.nrows() {
        let hu = features.row(u);
        let mut acc = ndarray::Array1::zeros(features.ncols());
        for (v, e) in weights.row(u) {
            acc.scaled_add(e, &(&hu - &features.row(v)));
        }
        grad.row_mut(u).scaled_add(2.0 * beta, &acc);
    }
    Ok(grad)
}

/// `H − τ ∇F(H)`.
pub fn gradient_step(
    features: &Array2<f64>,
    anchor: &Array2<f64>,
    weights: &NormalizedWeights,
    beta: f64,
    tau: f64,
) -> Result<Array2<f64>> {
    Ok(features - &(regularizer_gradient(features, anchor, weights, beta)? * tau))
}

/// `(τ, β)` making one descent step equal one mixup step with residual `alpha`.
pub fn step_parameters(alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha = {alpha} must lie strictly inside (0, 1)")));
    }
    Ok((alpha / 2.0, (1.0 - alpha) / alpha))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Theorem3Report {
    pub regularizer: Regularizer,
    pub alpha: f64,
    pub tau: f64,
    pub beta: f64,
    /// Max absolute elementwise gap between the two steps, per hop.
    pub per_hop: Vec<f64>,
}

impl Theorem3Report {
    pub fn max_deviation(&self) -> f64 {
        self.per_hop.iter().copied().fold(0.0, f64::max)
    }
}

pub const THEOREM3_TOLERANCE: f64 = 1e-9;
pub const THEOREM3_HOPS: usize = 3;

/// Runs `hops` mixup steps from the graph features and compares each with
/// one descent step on the matching regularizer taken from the same state.
pub fn verify_theorem3_hops(graph: &Graph, alpha: f64, variant: MixVariant, hops: usize) -> Result<Theorem3Report> {
    let regularizer = Regularizer::for_variant(variant)?;
    let (tau, beta) = step_parameters(alpha)?;
    let weights = normalize_adjacency(graph, NormScheme::RowNormalized, false);
    let x = graph.features().clone();
    let mut state = MixState::new(x.clone(), Array2::zeros((graph.num_nodes(), 1)))?;
    let mut per_hop = Vec::with_capacity(hops);
    for _ in 0..hops {
        let anchor = match regularizer {
            Regularizer::F1 => &state.features,
            Regularizer::F2 => &x,
        };
        let descent = gradient_step(&state.features, anchor, &weights, beta, tau)?;
        let next = match regularizer {
            Regularizer::F1 => geomix1_step(&state, &weights, alpha)?,
            Regularizer::F2 => geomix2_step(&state, &weights, alpha)?,
        };
        let gap = (&descent - &next.features).iter().fold(0.0f64, |m, d| m.max(d.abs()));
        per_hop.push(gap);
        state = next;
    }
    Ok(Theorem3Report { regularizer, alpha, tau, beta, per_hop })
}

pub fn verify_theorem3(graph: &Graph, alpha: f64, variant: MixVariant) -> Result<Theorem3Report> {
    verify_theorem3_hops(graph, alpha, variant, THEOREM3_HOPS)
}
