//! Learned all-pair mixup.
//!
//! Each hop projects the current features with a hop-specific pair
//! `(W_q, W_k)`, normalizes the projections to unit rows and mixes every
//! node with every other node using the kernel `κ(q, k) = 1 + qᵀk`:
//!
//! ```text
//! a_vu = κ(q_v, k_u) / Σ_w κ(q_v, k_w)
//! ```
//!
//! Because κ is linear in `k`, the aggregate factorizes as
//! `(Q (Kᵀ V) + 1 · 1ᵀV) / (Q (Kᵀ 1) + N)` and never forms the `N × N`
//! weight matrix. The all-pair result is blended with a residual (`alpha`)
//! and then with the graph aggregate (`eta`).

use ndarray::{Array1, Array2, Axis, Zip};
use rand::Rng;

use crate::augment::{check_unit, MixConfig, MixState};
use crate::error::{Error, Result};
use crate::graph::{aggregate, aggregate_transpose, NormalizedWeights};

/// Projected rows with a norm below this are treated as zero.
pub const NORM_FLOOR: f64 = 1e-12;
/// Kernel sums below this fall back to uniform weights.
pub const DENOM_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct HopProjection {
    pub query: Array2<f64>,
    pub key: Array2<f64>,
}

/// One `(W_q, W_k)` pair per hop, each `F × F'`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    hops: Vec<HopProjection>,
}

impl AttentionParams {
    pub fn new(hops: Vec<HopProjection>) -> Result<Self> {
        let first = hops.first().ok_or_else(|| Error::invalid("attention needs at least one hop"))?;
        let dim = first.query.dim();
        for (t, h) in hops.iter().enumerate() {
            if h.query.dim() != dim || h.key.dim() != dim {
                return Err(Error::dims("AttentionParams::new", format!("{dim:?}"), format!("hop {t}")));
            }
            if h.query.iter().chain(h.key.iter()).any(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("non-finite projection entry at hop {t}")));
            }
        }
        Ok(AttentionParams { hops })
    }

    /// Skips validation; used for gradients, which may legitimately be non-finite.
    pub(crate) fn from_parts(hops: Vec<HopProjection>) -> Self {
        AttentionParams { hops }
    }

    /// Entries uniform on `[-1/√F, 1/√F]`.
    pub fn init<R: Rng>(feature_dim: usize, projection_dim: usize, hops: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (feature_dim.max(1) as f64).sqrt();
        let mut draw = || Array2::from_shape_fn((feature_dim, projection_dim), |_| rng.random_range(-bound..=bound));
        let hops = (0..hops).map(|_| HopProjection { query: draw(), key: draw() }).collect();
        AttentionParams { hops }
    }

    pub fn num_hops(&self) -> usize {
        self.hops.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.hops[0].query.nrows()
    }

    pub fn projection_dim(&self) -> usize {
        self.hops[0].query.ncols()
    }

    pub fn hop(&self, t: usize) -> Result<&HopProjection> {
        self.hops
            .get(t)
            .ok_or_else(|| Error::invalid(format!("no attention parameters for hop {t} (have {})", self.hops.len())))
    }

    pub fn hops(&self) -> &[HopProjection] {
        &self.hops
    }

    pub fn hops_mut(&mut self) -> &mut [HopProjection] {
        &mut self.hops
    }
}

fn project_with_norms(features: &Array2<f64>, w: &Array2<f64>) -> (Array2<f64>, Vec<f64>) {
    let mut p = features.dot(w);
    let mut norms = Vec::with_capacity(p.nrows());
    for mut row in p.rows_mut() {
        let n = row.dot(&row).sqrt();
        if n < NORM_FLOOR {
            row.fill(0.0);
        } else {
            row /= n;
        }
        norms.push(n);
    }
    (p, norms)
}

/// Projects each row by `w` and rescales it to unit L2 norm.
pub fn project_normalize(features: &Array2<f64>, w: &Array2<f64>) -> Result<Array2<f64>> {
    if features.ncols() != w.nrows() {
        return Err(Error::dims(
            "project_normalize",
            format!("{} columns", w.nrows()),
            format!("{} columns", features.ncols()),
        ));
    }
    Ok(project_with_norms(features, w).0)
}

/// Intermediates of one factorized all-pair aggregation.
#[derive(Debug, Clone)]
struct PairCache {
    /// `Kᵀ V`, `F' × d`
    kv: Array2<f64>,
    /// `Kᵀ 1`
    ksum: Array1<f64>,
    denom: Array1<f64>,
    out: Array2<f64>,
}

impl PairCache {
    fn is_fallback(&self, v: usize) -> bool {
        self.denom[v] < DENOM_FLOOR
    }
}

fn allpair_cached(q: &Array2<f64>, k: &Array2<f64>, values: &Array2<f64>) -> PairCache {
    let n = values.nrows() as f64;
    let kv = k.t().dot(values);
    let ksum = k.sum_axis(Axis(0));
    let colsum = values.sum_axis(Axis(0));
    let denom = q.dot(&ksum) + n;
    let mut out = q.dot(&kv);
    for (v, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
        if denom[v] < DENOM_FLOOR {
            row.assign(&(&colsum / n));
        } else {
            row += &colsum;
            row /= denom[v];
        }
    }
    PairCache { kv, ksum, denom, out }
}

/// `out[v] = Σ_u a_vu · values[u]` with `a_vu ∝ 1 + q_vᵀ k_u`, in `O(N · F' · d)`.
pub fn allpair_aggregate(queries: &Array2<f64>, keys: &Array2<f64>, values: &Array2<f64>) -> Result<Array2<f64>> {
    if queries.dim() != keys.dim() {
        return Err(Error::dims("allpair_aggregate", format!("keys {:?}", queries.dim()), format!("{:?}", keys.dim())));
    }
    if values.nrows() != keys.nrows() {
        return Err(Error::dims("allpair_aggregate", format!("{} value rows", keys.nrows()), values.nrows()));
    }
    Ok(allpair_cached(queries, keys, values).out)
}

/// Everything the backward pass of one hop needs.
#[derive(Debug, Clone)]
pub struct Geomix3Tape {
    hop: usize,
    alpha: f64,
    eta: f64,
    features: Array2<f64>,
    labels: Array2<f64>,
    queries: Array2<f64>,
    keys: Array2<f64>,
    query_norms: Vec<f64>,
    key_norms: Vec<f64>,
    feature_pass: PairCache,
    label_pass: PairCache,
}

impl Geomix3Tape {
    pub fn hop(&self) -> usize {
        self.hop
    }
}

fn two_stage_blend(
    alpha: f64,
    eta: f64,
    current: &Array2<f64>,
    allpair: &Array2<f64>,
    graph_agg: Array2<f64>,
) -> Array2<f64> {
    let mut out = graph_agg;
    Zip::from(&mut out).and(current).and(allpair).for_each(|g, &h, &m| {
        let adaptive = alpha * h + (1.0 - alpha) * m;
        *g = (1.0 - eta) * adaptive + eta * *g;
    });
    out
}

pub fn geomix3_forward(
    state: &MixState,
    weights: &NormalizedWeights,
    params: &AttentionParams,
    alpha: f64,
    eta: f64,
) -> Result<(MixState, Geomix3Tape)> {
    check_unit("alpha", alpha)?;
    check_unit("eta", eta)?;
    let proj = params.hop(state.hop)?;
    if proj.query.nrows() != state.features.ncols() {
        return Err(Error::dims(
            "geomix3_step",
            format!("{} feature columns", proj.query.nrows()),
            state.features.ncols(),
        ));
    }
    let (queries, query_norms) = project_with_norms(&state.features, &proj.query);
    let (keys, key_norms) = project_with_norms(&state.features, &proj.key);
    let feature_pass = allpair_cached(&queries, &keys, &state.features);
    let label_pass = allpair_cached(&queries, &keys, &state.soft_labels);

    let h = two_stage_blend(alpha, eta, &state.features, &feature_pass.out, aggregate(weights, &state.features)?);
    let y = two_stage_blend(alpha, eta, &state.soft_labels, &label_pass.out, aggregate(weights, &state.soft_labels)?);
    let next = state.successor(h, y);
    let tape = Geomix3Tape {
        hop: state.hop,
        alpha,
        eta,
        features: state.features.clone(),
        labels: state.soft_labels.clone(),
        queries,
        keys,
        query_norms,
        key_norms,
        feature_pass,
        label_pass,
    };
    Ok((next, tape))
}

pub fn geomix3_step(
    state: &MixState,
    weights: &NormalizedWeights,
    params: &AttentionParams,
    alpha: f64,
    eta: f64,
) -> Result<MixState> {
    geomix3_forward(state, weights, params, alpha, eta).map(|(s, _)| s)
}

/// Gradients of one hop with respect to its projections and inputs.
#[derive(Debug, Clone)]
pub struct Geomix3Grads {
    pub query: Array2<f64>,
    pub key: Array2<f64>,
    pub features: Array2<f64>,
    pub labels: Array2<f64>,
}

/// Reverse pass through the factorized aggregation of one value set.
/// Accumulates into `d_queries`, `d_keys` and returns `∂/∂values`.
fn allpair_backward(
    cache: &PairCache,
    queries: &Array2<f64>,
    keys: &Array2<f64>,
    values: &Array2<f64>,
    d_out: &Array2<f64>,
    d_queries: &mut Array2<f64>,
    d_keys: &mut Array2<f64>,
) -> Array2<f64> {
    let n = values.nrows();
    let mut d_num = Array2::zeros(d_out.dim());
    let mut d_den = Array1::zeros(n);
    let mut d_colsum = Array1::<f64>::zeros(values.ncols());
    for v in 0..n {
        let g = d_out.row(v);
        if cache.is_fallback(v) {
            d_colsum.scaled_add(1.0 / n as f64, &g);
            continue;
        }
        let den = cache.denom[v];
        d_num.row_mut(v).assign(&(&g / den));
        d_den[v] = -g.dot(&cache.out.row(v)) / den;
    }
    // num = Q·KV + 1·colsumᵀ ; den = Q·ksum + N
    *d_queries += &d_num.dot(&cache.kv.t());
    for (mut row, &dd) in d_queries.rows_mut().into_iter().zip(d_den.iter()) {
        row.scaled_add(dd, &cache.ksum);
    }
    let d_kv = queries.t().dot(&d_num);
    let d_ksum = queries.t().dot(&d_den);
    d_colsum += &d_num.sum_axis(Axis(0));
    // KV = Kᵀ V ; ksum = Kᵀ 1 ; colsum = Vᵀ 1
    *d_keys += &values.dot(&d_kv.t());
    for mut row in d_keys.rows_mut() {
        row += &d_ksum;
    }
    let mut d_values = keys.dot(&d_kv);
    for mut row in d_values.rows_mut() {
        row += &d_colsum;
    }
    d_values
}

/// Reverse pass of `x / ‖x‖` followed by `x = H W`.
fn normalize_backward(
    unit: &Array2<f64>,
    norms: &[f64],
    d_unit: &Array2<f64>,
    features: &Array2<f64>,
    w: &Array2<f64>,
    d_features: &mut Array2<f64>,
) -> Array2<f64> {
    let mut d_proj = Array2::zeros(unit.dim());
    for v in 0..unit.nrows() {
        if norms[v] < NORM_FLOOR {
            continue;
        }
        let u = unit.row(v);
        let g = d_unit.row(v);
        let radial = u.dot(&g);
        let mut row = d_proj.row_mut(v);
        row.assign(&g);
        row.scaled_add(-radial, &u);
        row /= norms[v];
    }
    *d_features += &d_proj.dot(&w.t());
    features.t().dot(&d_proj)
}

/// Exact reverse-mode gradients of one hop.
pub fn geomix3_backward(
    tape: &Geomix3Tape,
    weights: &NormalizedWeights,
    params: &AttentionParams,
    grad_features: &Array2<f64>,
    grad_labels: &Array2<f64>,
) -> Result<Geomix3Grads> {
    let proj = params
        .hop(tape.hop)
        .map_err(|_| Error::Internal(format!("tape for hop {} has no matching parameters", tape.hop)))?;
    if proj.query.nrows() != tape.features.ncols() || proj.query.ncols() != tape.queries.ncols() {
        return Err(Error::Internal(format!("tape for hop {} does not match parameter shapes", tape.hop)));
    }
    if grad_features.dim() != tape.features.dim() || grad_labels.dim() != tape.labels.dim() {
        return Err(Error::Internal(format!("upstream gradient shape mismatch at hop {}", tape.hop)));
    }
    let (alpha, eta) = (tape.alpha, tape.eta);
    let mixed_scale = (1.0 - eta) * (1.0 - alpha);
    let mut d_queries = Array2::zeros(tape.queries.dim());
    let mut d_keys = Array2::zeros(tape.keys.dim());

    let mut pass = |values: &Array2<f64>, cache: &PairCache, g: &Array2<f64>| -> Result<Array2<f64>> {
        let mut d = aggregate_transpose(weights, g)? * eta;
        d.scaled_add((1.0 - eta) * alpha, g);
        let d_mixed = g * mixed_scale;
        d += &allpair_backward(cache, &tape.queries, &tape.keys, values, &d_mixed, &mut d_queries, &mut d_keys);
        Ok(d)
    };
    let mut d_features = pass(&tape.features, &tape.feature_pass, grad_features)?;
    let d_labels = pass(&tape.labels, &tape.label_pass, grad_labels)?;

    let query =
        normalize_backward(&tape.queries, &tape.query_norms, &d_queries, &tape.features, &proj.query, &mut d_features);
    let key = normalize_backward(&tape.keys, &tape.key_norms, &d_keys, &tape.features, &proj.key, &mut d_features);
    Ok(Geomix3Grads { query, key, features: d_features, labels: d_labels })
}

/// Runs all hops of GeoMix-III and keeps one tape per hop.
pub fn forward_hops(
    state: MixState,
    weights: &NormalizedWeights,
    params: &AttentionParams,
    config: &MixConfig,
) -> Result<(MixState, Vec<Geomix3Tape>)> {
    config.validate()?;
    let mut state = state;
    let mut tapes = Vec::with_capacity(config.hops);
    for _ in 0..config.hops {
        let (next, tape) = geomix3_forward(&state, weights, params, config.alpha, config.eta)?;
        tapes.push(tape);
        state = next;
    }
    Ok((state, tapes))
}

/// Gradients for every hop's projections, given the gradient of the final
/// mixed state. The hop-0 inputs are treated as constants.
pub fn backward_hops(
    tapes: &[Geomix3Tape],
    weights: &NormalizedWeights,
    params: &AttentionParams,
    grad_features: Array2<f64>,
    grad_labels: Array2<f64>,
) -> Result<Vec<HopProjection>> {
    let mut grads: Vec<Option<HopProjection>> = vec![None; params.num_hops()];
    let (mut gf, mut gl) = (grad_features, grad_labels);
    for tape in tapes.iter().rev() {
        let g = geomix3_backward(tape, weights, params, &gf, &gl)?;
        grads[tape.hop] = Some(HopProjection { query: g.query, key: g.key });
        gf = g.features;
        gl = g.labels;
    }
    let (f, fp) = (params.feature_dim(), params.projection_dim());
    Ok(grads
        .into_iter()
        .map(|g| g.unwrap_or_else(|| HopProjection { query: Array2::zeros((f, fp)), key: Array2::zeros((f, fp)) }))
        .collect())
}
