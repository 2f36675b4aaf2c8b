//! AdamW with decoupled weight decay and optional global-norm clipping.

use super::params::ParamSet;
use super::tensor::Tensor;

pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub max_grad_norm: Option<f64>,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamW {
    pub fn new(lr: f64, weight_decay: f64, max_grad_norm: Option<f64>, params: &ParamSet) -> Self {
        let m = params.iter().map(|t| vec![0.0; t.tensor.len()]).collect();
        let v = params.iter().map(|t| vec![0.0; t.tensor.len()]).collect();
        AdamW {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            max_grad_norm,
            step: 0,
            m,
            v,
        }
    }

    /// Apply one update. `grads` must be parallel to `params` (one tensor
    /// each, same shapes, declaration order).
    pub fn step(&mut self, params: &mut ParamSet, grads: &mut [Tensor]) {
        assert_eq!(grads.len(), params.len());
        if let Some(max_norm) = self.max_grad_norm {
            let sq: f64 = grads
                .iter()
                .map(|g| g.data().iter().map(|v| v * v).sum::<f64>())
                .sum();
            let norm = sq.sqrt();
            if norm > max_norm {
                let scale = max_norm / norm;
                for g in grads.iter_mut() {
                    g.scale_assign(scale);
                }
            }
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for (idx, grad) in grads.iter().enumerate() {
            let tensor = &mut params.get_mut(idx).tensor;
            debug_assert_eq!(tensor.len(), grad.len());
            let m = &mut self.m[idx];
            let v = &mut self.v[idx];
            let data = tensor.data_mut();
            for (i, &g) in grad.data().iter().enumerate() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                data[i] -= self.lr * (m_hat / (v_hat.sqrt() + self.eps) + self.weight_decay * data[i]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adamw_minimizes_a_quadratic() {
        // f(x) = sum (x - 3)^2
        let mut params = ParamSet::new();
        params.add("x", Tensor::from_vec(1, 4, vec![0.0, 1.0, -2.0, 10.0]));
        let mut opt = AdamW::new(0.1, 0.0, None, &params);
        for _ in 0..500 {
            let grads: Vec<Tensor> = params
                .iter()
                .map(|t| {
                    let g: Vec<f64> = t.tensor.data().iter().map(|&x| 2.0 * (x - 3.0)).collect();
                    Tensor::from_vec(1, 4, g)
                })
                .collect();
            let mut grads = grads;
            opt.step(&mut params, &mut grads);
        }
        for &x in params.get(0).tensor.data() {
            assert!((x - 3.0).abs() < 1e-3, "x = {x}");
        }
    }

    #[test]
    fn clipping_bounds_the_update() {
        let mut params = ParamSet::new();
        params.add("x", Tensor::from_vec(1, 2, vec![0.0, 0.0]));
        let mut opt = AdamW::new(0.1, 0.0, Some(1.0), &params);
        let mut grads = vec![Tensor::from_vec(1, 2, vec![300.0, 400.0])];
        opt.step(&mut params, &mut grads);
        // after clipping the gradient has norm 1.0
        let n: f64 = grads[0].data().iter().map(|v| v * v).sum::<f64>();
        assert!((n.sqrt() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let run = || {
            let mut params = ParamSet::new();
            params.add("x", Tensor::from_vec(1, 3, vec![0.3, -0.7, 2.0]));
            let mut opt = AdamW::new(0.05, 0.01, Some(1.0), &params);
            for step in 0..50 {
                let g: Vec<f64> = params
                    .get(0)
                    .tensor
                    .data()
                    .iter()
                    .map(|&x| (x + step as f64 * 0.01).sin())
                    .collect();
                let mut grads = vec![Tensor::from_vec(1, 3, g)];
                opt.step(&mut params, &mut grads);
            }
            params.content_hash()
        };
        assert_eq!(run(), run());
    }
}
