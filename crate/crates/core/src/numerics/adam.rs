use super::ParamStore;

/// Adam with bias correction; moments live on each `Parameter`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step(&self, store: &mut ParamStore) {
        for p in store.iter_mut() {
            p.step += 1;
            let t = p.step as f64;
            let c1 = 1.0 - libm::pow(self.beta1, t);
            let c2 = 1.0 - libm::pow(self.beta2, t);
            let g = p.grad.data();
            let m = p.adam_m.data_mut();
            let v = p.adam_v.data_mut();
            let theta = p.value.data_mut();
            for k in 0..g.len() {
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * g[k];
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * g[k] * g[k];
                let m_hat = m[k] / c1;
                let v_hat = v[k] / c2;
                theta[k] -= self.lr * m_hat / (libm::sqrt(v_hat) + self.eps);
            }
        }
    }
}
