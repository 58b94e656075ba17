//! Monte Carlo checks of the expected mixed feature/label and their tail bounds.

use ndarray::Array1;
use rayon::prelude::*;

use super::synthetic::{
    expected_mixed_feature, expected_mixed_label, sample_feature, sample_labels, sample_soft_class, SyntheticSpec,
};
use crate::error::{Error, Result};
use crate::rng;

pub const MIN_TRIALS: usize = 10_000;
const BLOCK: usize = 4096;
/// Mean checks pass when every dimension is within this many standard errors.
pub const MEAN_Z: f64 = 4.0;
/// Tail checks allow this many binomial standard deviations of slack.
pub const TAIL_SIGMAS: f64 = 3.0;

/// Relative thresholds; multiplied by `B√F` for features and `√C` for labels.
pub const THRESHOLD_GRID: [f64; 4] = [0.1, 0.25, 0.5, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Feature,
    Label,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::Feature => "feature",
            Quantity::Label => "label",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub degree: usize,
    pub threshold: f64,
    /// Fraction of trials with `‖x − E[x]‖₂ ≥ threshold`.
    pub empirical: f64,
    pub bound: f64,
    pub trials: usize,
    pub slack: f64,
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanCheck {
    pub expected: Array1<f64>,
    pub empirical: Array1<f64>,
    pub std_err: Array1<f64>,
    /// Largest `|empirical − expected| / std_err` over dimensions.
    pub max_z: f64,
}

impl MeanCheck {
    pub fn passed(&self) -> bool {
        self.max_z <= MEAN_Z
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoremReport {
    pub quantity: Quantity,
    pub center_class: usize,
    pub mean: MeanCheck,
    pub bounds: Vec<BoundReport>,
}

impl TheoremReport {
    pub fn violations(&self) -> usize {
        self.bounds.iter().filter(|b| b.violated).count()
    }

    pub fn passed(&self) -> bool {
        self.mean.passed() && self.violations() == 0
    }
}

/// `2F exp(−d t² / (2B²F))`.
pub fn feature_tail_bound(dim: usize, degree: usize, bound: f64, t: f64) -> f64 {
    let f = dim as f64;
    2.0 * f * (-(degree as f64) * t * t / (2.0 * bound * bound * f)).exp()
}

/// `2C exp(−d t² / (2C))`.
pub fn label_tail_bound(classes: usize, degree: usize, t: f64) -> f64 {
    let c = classes as f64;
    2.0 * c * (-(degree as f64) * t * t / (2.0 * c)).exp()
}

#[derive(Debug, Clone)]
struct Tally {
    sum: Array1<f64>,
    sum_sq: Array1<f64>,
    exceed: Vec<usize>,
    trials: usize,
}

impl Tally {
    fn new(dim: usize, thresholds: usize) -> Self {
        Tally { sum: Array1::zeros(dim), sum_sq: Array1::zeros(dim), exceed: vec![0; thresholds], trials: 0 }
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.sum += &other.sum;
        self.sum_sq += &other.sum_sq;
        for (a, b) in self.exceed.iter_mut().zip(other.exceed) {
            *a += b;
        }
        self.trials += other.trials;
        self
    }
}

/// Mixed (neighbor-averaged) vector for one sampled neighborhood.
fn mixed_sample<R: rand::Rng>(
    spec: &SyntheticSpec,
    quantity: Quantity,
    center: usize,
    half: f64,
    rng: &mut R,
    labels: &mut Vec<usize>,
    out: &mut Array1<f64>,
) {
    sample_labels(spec, center, rng, labels);
    out.fill(0.0);
    let w = 1.0 / spec.degree as f64;
    for &y in labels.iter() {
        match quantity {
            Quantity::Feature => {
                for k in 0..out.len() {
                    out[k] += w * sample_feature(spec, y, k, half, rng);
                }
            }
            Quantity::Label => out[sample_soft_class(spec, y, rng)] += w,
        }
    }
}

fn run(spec: &SyntheticSpec, quantity: Quantity, center: usize, trials: usize) -> Result<TheoremReport> {
    spec.validate()?;
    if trials < MIN_TRIALS {
        return Err(Error::invalid(format!("at least {MIN_TRIALS} trials required, got {trials}")));
    }
    if center >= spec.num_classes {
        return Err(Error::invalid(format!("center class {center} outside [0, {})", spec.num_classes)));
    }
    let (expected, scale, dim) = match quantity {
        Quantity::Feature => {
            let f = spec.feature_dim();
            (expected_mixed_feature(spec, center), spec.feature_bound * (f as f64).sqrt(), f)
        }
        Quantity::Label => (expected_mixed_label(spec, center), (spec.num_classes as f64).sqrt(), spec.num_classes),
    };
    let thresholds: Vec<f64> = THRESHOLD_GRID.iter().map(|r| r * scale).collect();
    let half = spec.half_width();
    let stream = match quantity {
        Quantity::Feature => 2 * center as u64,
        Quantity::Label => 2 * center as u64 + 1,
    };
    let blocks = trials.div_ceil(BLOCK);
    // blocks are merged in index order so sums do not depend on scheduling
    let tally = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng::indexed_substream(spec.seed, rng::MONTE_CARLO, (stream << 32) | b as u64);
            let count = BLOCK.min(trials - b * BLOCK);
            let mut t = Tally::new(dim, thresholds.len());
            let mut labels = Vec::with_capacity(spec.degree);
            let mut x = Array1::zeros(dim);
            for _ in 0..count {
                mixed_sample(spec, quantity, center, half, &mut rng, &mut labels, &mut x);
                t.sum += &x;
                t.sum_sq += &x.mapv(|v| v * v);
                let dist = x.iter().zip(expected.iter()).map(|(a, e)| (a - e) * (a - e)).sum::<f64>().sqrt();
                for (i, &th) in thresholds.iter().enumerate() {
                    t.exceed[i] += usize::from(dist >= th);
                }
            }
            t.trials = count;
            t
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Tally::new(dim, thresholds.len()), Tally::merge);

    let n = tally.trials as f64;
    let empirical = &tally.sum / n;
    let var = (&tally.sum_sq / n - &empirical.mapv(|m| m * m)).mapv(|v| v.max(0.0)) * (n / (n - 1.0));
    let std_err = var.mapv(|v| (v / n).sqrt());
    let max_z = empirical
        .iter()
        .zip(expected.iter())
        .zip(std_err.iter())
        .map(|((m, e), s)| {
            let diff = (m - e).abs();
            if *s > 0.0 {
                diff / s
            } else if diff < 1e-12 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max);
    let bounds = thresholds
        .iter()
        .zip(&tally.exceed)
        .map(|(&t, &hits)| {
            let p = hits as f64 / n;
            let bound = match quantity {
                Quantity::Feature => feature_tail_bound(dim, spec.degree, spec.feature_bound, t),
                Quantity::Label => label_tail_bound(spec.num_classes, spec.degree, t),
            };
            let slack = TAIL_SIGMAS * (p * (1.0 - p) / n).sqrt();
            BoundReport {
                degree: spec.degree,
                threshold: t,
                empirical: p,
                bound,
                trials: tally.trials,
                slack,
                violated: p > bound + slack,
            }
        })
        .collect();
    Ok(TheoremReport {
        quantity,
        center_class: center,
        mean: MeanCheck { expected, empirical, std_err, max_z },
        bounds,
    })
}

/// Mixed-feature expectation and tail bound, center node of class 0.
pub fn verify_theorem1(spec: &SyntheticSpec, trials: usize) -> Result<TheoremReport> {
    run(spec, Quantity::Feature, 0, trials)
}

/// Mixed-label expectation and tail bound, center node of class 0.
pub fn verify_theorem2(spec: &SyntheticSpec, trials: usize) -> Result<TheoremReport> {
    run(spec, Quantity::Label, 0, trials)
}

/// Either check with an explicit center class.
pub fn verify_for_class(
    spec: &SyntheticSpec,
    quantity: Quantity,
    center: usize,
    trials: usize,
) -> Result<TheoremReport> {
    run(spec, quantity, center, trials)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn spec(p: f64, eps: f64) -> SyntheticSpec {
        SyntheticSpec {
            num_classes: 2,
            homophily: p,
            label_noise: eps,
            feature_bound: 1.5,
            class_means: array![[1.0, 0.5], [-1.0, 0.0]],
            degree: 8,
            nodes_per_class: 10,
            heterophilic: false,
            seed: 11,
        }
    }

    #[test]
    fn bound_formulas() {
        assert_abs_diff_eq!(feature_tail_bound(1, 1, 1.0, 0.0), 2.0);
        assert_abs_diff_eq!(feature_tail_bound(2, 4, 1.0, 1.0), 4.0 * (-1.0f64).exp());
        assert_abs_diff_eq!(label_tail_bound(2, 4, 1.0), 4.0 * (-1.0f64).exp());
    }

    #[test]
    fn perfect_homophily_mean_is_class_mean() {
        let r = verify_theorem1(&spec(1.0, 0.1), 20_000).unwrap();
        assert_abs_diff_eq!(r.mean.expected[0], 1.0, epsilon = 1e-12);
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn label_point_check() {
        let r = verify_theorem2(&spec(0.9, 0.1), 100_000).unwrap();
        assert_abs_diff_eq!(r.mean.expected[0], 0.82, epsilon = 1e-12);
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn noiseless_homophilic_labels_are_exact() {
        let r = verify_theorem2(&spec(1.0, 0.0), 10_000).unwrap();
        assert_eq!(r.mean.empirical.to_vec(), vec![1.0, 0.0]);
        assert_eq!(r.mean.max_z, 0.0);
    }

    #[test]
    fn too_few_trials() {
        assert!(verify_theorem1(&spec(0.9, 0.1), 999).is_err());
    }

    #[test]
    fn standard_error_halves_with_four_times_trials() {
        let a = verify_theorem1(&spec(0.7, 0.1), 20_000).unwrap();
        let b = verify_theorem1(&spec(0.7, 0.1), 80_000).unwrap();
        let ratio = a.mean.std_err[0] / b.mean.std_err[0];
        assert!((ratio - 2.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn reproducible() {
        let a = verify_theorem2(&spec(0.8, 0.2), 10_000).unwrap();
        let b = verify_theorem2(&spec(0.8, 0.2), 10_000).unwrap();
        assert_eq!(a, b);
    }
}
