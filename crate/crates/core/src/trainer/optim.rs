use ndarray::{ArrayD, Zip};

use super::gcn::ModelParams;

/// Adam with decoupled weight decay.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: Vec<ArrayD<f64>>,
    second: Vec<ArrayD<f64>>,
}

impl Adam {
    pub fn new(params: &ModelParams, learning_rate: f64, weight_decay: f64) -> Self {
        let zeros: Vec<ArrayD<f64>> = params.tensors().iter().map(|(_, t, _)| ArrayD::zeros(t.raw_dim())).collect();
        Adam {
            learning_rate,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn update(&mut self, params: &mut ModelParams, grads: &ModelParams) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps, lr) = (self.beta1, self.beta2, self.eps, self.learning_rate);
        let decay: Vec<bool> = params.tensors().iter().map(|(_, _, d)| *d).collect();
        let grads = grads.tensors();
        for (i, mut p) in params.tensors_mut().into_iter().enumerate() {
            let wd = if decay[i] { self.weight_decay } else { 0.0 };
            Zip::from(&mut p).and(&grads[i].1).and(&mut self.first[i]).and(&mut self.second[i]).for_each(
                |p, &g, m, v| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    let update = (*m / c1) / ((*v / c2).sqrt() + eps);
                    *p -= lr * (update + wd * *p);
                },
            );
        }
    }
}
