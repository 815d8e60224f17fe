use ndarray::{Array2, Zip};

use super::params::{GradBuffer, ParamStore};
use super::Tensor;

/// Bias-corrected Adam.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(params: &ParamStore, lr: f64) -> Self {
        let zeros: Vec<Tensor> = params
            .iter()
            .map(|(_, p)| {
                if p.trainable {
                    Array2::zeros(p.value.raw_dim())
                } else {
                    Array2::zeros((0, 0))
                }
            })
            .collect();
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// Apply one update to every trainable parameter.
    pub fn step(&mut self, params: &mut ParamStore, grads: &GradBuffer) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let ids: Vec<_> = params.ids().collect();
        for id in ids {
            if !params.param(id).trainable {
                continue;
            }
            let k = id.index();
            Zip::from(params.get_mut(id))
                .and(&mut self.m[k])
                .and(&mut self.v[k])
                .and(grads.get(id))
                .for_each(|w, m, v, &g| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    let m_hat = *m / c1;
                    let v_hat = *v / c2;
                    *w -= lr * m_hat / (v_hat.sqrt() + eps);
                });
        }
    }
}

#[cfg(test)]
mod tests {
    use ndarray::array;

    use super::*;

    fn store(values: Array2<f64>) -> ParamStore {
        let mut s = ParamStore::new();
        s.add("w", values, true).unwrap();
        s
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = store(array![[1.0, -2.0]]);
        let before = p.clone();
        let mut adam = AdamState::new(&p, 1e-3);
        let zero = GradBuffer::zeros_like(&p);
        adam.step(&mut p, &zero);
        assert_eq!(p, before);
        assert_eq!(adam.step, 1);
    }

    #[test]
    fn first_step_is_lr_times_sign() {
        let mut p = store(array![[1.0, -2.0, 0.5]]);
        let id = p.id("w").unwrap();
        let mut g = GradBuffer::zeros_like(&p);
        g.get_mut(id).assign(&array![[0.3, -7.0, 1e-4]]);
        let mut adam = AdamState::new(&p, 1e-3);
        adam.step(&mut p, &g);
        let delta = p.get(id) - &array![[1.0, -2.0, 0.5]];
        for (d, s) in delta.iter().zip([-1.0, 1.0, -1.0]) {
            assert!(d.abs() <= 1e-3 * (1.0 + 1e-8));
            assert!((d - s * 1e-3).abs() < 1e-6, "delta {d}");
        }
    }

    #[test]
    fn two_steps_reduce_a_quadratic() {
        // f(w) = 0.5 * |w - target|^2, gradient w - target.
        let target = array![[3.0, -1.0]];
        let mut p = store(array![[0.0, 0.0]]);
        let id = p.id("w").unwrap();
        let loss = |w: &Tensor| 0.5 * (w - &target).mapv(|x| x * x).sum();
        let start = loss(p.get(id));
        let mut adam = AdamState::new(&p, 0.1);
        for _ in 0..2 {
            let mut g = GradBuffer::zeros_like(&p);
            let step = p.get(id) - &target;
            g.get_mut(id).assign(&step);
            adam.step(&mut p, &g);
        }
        assert!(loss(p.get(id)) < start);
    }

    #[test]
    fn frozen_params_are_untouched() {
        let mut p = ParamStore::new();
        let id = p.add("frozen", array![[1.0]], false).unwrap();
        let mut adam = AdamState::new(&p, 1.0);
        let zero = GradBuffer::zeros_like(&p);
        adam.step(&mut p, &zero);
        assert_eq!(p.get(id)[[0, 0]], 1.0);
    }
}
