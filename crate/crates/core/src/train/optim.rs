//! SGD with momentum and Adam, as slice-level steps and as optimizers over
//! a subset of a [`ParamStore`].

use crate::tensor::{Grads, ParamId, ParamStore};

/// `v ← μ·v + g; θ ← θ − lr·v`.
pub fn sgd_momentum_step(theta: &mut [f64], grad: &[f64], velocity: &mut [f64], lr: f64, momentum: f64) {
    for ((t, g), v) in theta.iter_mut().zip(grad).zip(velocity.iter_mut()) {
        *v = momentum * *v + g;
        *t -= lr * *v;
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

/// One bias-corrected Adam step; `t` is the 1-based step count after this
/// update.
pub fn adam_step(theta: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64], t: u64, h: AdamHyper) {
    let c1 = 1.0 - h.beta1.powf(t as f64);
    let c2 = 1.0 - h.beta2.powf(t as f64);
    for i in 0..theta.len() {
        let g = grad[i];
        m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g;
        v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        theta[i] -= h.lr * m_hat / (v_hat.sqrt() + h.eps);
    }
}

/// SGD with momentum over the listed parameters. Row-sparse gradients are
/// applied densely, so momentum keeps moving rows that got no gradient in
/// the current batch.
#[derive(Clone, Debug)]
pub struct Sgd {
    pub lr: f64,
    pub momentum: f64,
    params: Vec<(ParamId, Vec<f64>)>,
    scratch: Vec<f64>,
}

impl Sgd {
    pub fn new(store: &ParamStore, params: &[ParamId], lr: f64, momentum: f64) -> Self {
        let params = params.iter().map(|&id| (id, vec![0.0; store.get(id).len()])).collect();
        Sgd { lr, momentum, params, scratch: Vec::new() }
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &Grads) {
        for (id, vel) in &mut self.params {
            self.scratch.resize(vel.len(), 0.0);
            grads.get(*id).write_dense(&mut self.scratch);
            sgd_momentum_step(store.get_mut(*id).as_mut_slice(), &self.scratch, vel, self.lr, self.momentum);
        }
    }
}

#[derive(Clone, Debug)]
pub struct Adam {
    pub hyper: AdamHyper,
    t: u64,
    params: Vec<(ParamId, Vec<f64>, Vec<f64>)>,
    scratch: Vec<f64>,
}

impl Adam {
    pub fn new(store: &ParamStore, params: &[ParamId], hyper: AdamHyper) -> Self {
        let params = params
            .iter()
            .map(|&id| {
                let n = store.get(id).len();
                (id, vec![0.0; n], vec![0.0; n])
            })
            .collect();
        Adam { hyper, t: 0, params, scratch: Vec::new() }
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &Grads) {
        self.t += 1;
        for (id, m, v) in &mut self.params {
            self.scratch.resize(m.len(), 0.0);
            grads.get(*id).write_dense(&mut self.scratch);
            adam_step(store.get_mut(*id).as_mut_slice(), &self.scratch, m, v, self.t, self.hyper);
        }
    }
}
