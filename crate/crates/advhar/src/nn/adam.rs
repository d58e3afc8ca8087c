use ndarray::ArrayD;

use super::Sequential;

/// Adam with the conventional defaults; one instance per network block so
/// frozen blocks keep their moment state untouched.
pub struct Adam {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
    t: u64,
    m: Vec<ArrayD<f32>>,
    v: Vec<ArrayD<f32>>,
}

impl Adam {
    pub fn new(lr: f32) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// Apply one update from the gradients accumulated in `net`.
    pub fn step(&mut self, net: &mut Sequential) {
        let mut params = net.params_mut();
        if self.m.is_empty() {
            self.m = params.iter().map(|p| ArrayD::zeros(p.w.raw_dim())).collect();
            self.v = params.iter().map(|p| ArrayD::zeros(p.w.raw_dim())).collect();
        }
        assert_eq!(self.m.len(), params.len(), "optimizer bound to another net");
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (i, p) in params.iter_mut().enumerate() {
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            ndarray::Zip::from(&mut p.w)
                .and(&p.g)
                .and(m)
                .and(v)
                .for_each(|w, &g, m, v| {
                    *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                    *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    *w -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
                });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layers::Linear;
    use crate::nn::{Mode, Tensor};
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_lr_leaves_params_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net = Sequential::new(vec![Box::new(Linear::new(3, 2, &mut rng))]);
        let before: Vec<f32> = net.params()[0].w.iter().copied().collect();
        let out = net.forward(Tensor::D2(Array2::ones((2, 3))), Mode::Train);
        net.backward(out);
        let mut opt = Adam::new(0.0);
        opt.step(&mut net);
        let after: Vec<f32> = net.params()[0].w.iter().copied().collect();
        assert_eq!(before, after);
    }

    #[test]
    fn first_step_moves_by_lr_sign() {
        // with a single positive gradient, the first bias-corrected Adam
        // step is -lr * g/|g| = -lr
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net = Sequential::new(vec![Box::new(Linear::new(1, 1, &mut rng))]);
        net.params_mut()[0].w.fill(1.0);
        net.params_mut()[0].g.fill(2.0);
        net.params_mut()[1].g.fill(2.0);
        let mut opt = Adam::new(0.1);
        opt.step(&mut net);
        let w = net.params()[0].w.first().copied().unwrap();
        assert!((w - (1.0 - 0.1)).abs() < 1e-5);
    }
}
