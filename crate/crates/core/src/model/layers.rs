//! Layers with hand-written backward passes.
//!
//! Layers hold [`ParamId`]s, not tensors, so one layer definition evaluates
//! against any [`ParamStore`] with the same layout (the gradient checker
//! relies on this).

use crate::tensor::{
    matvec_acc, matvec_t_acc, outer_acc, sigmoid, Grads, ParamId, ParamStore, Rng, Tensor,
};

/// Uniform `[-1/√fan_in, 1/√fan_in]`.
fn init(shape: &[usize], fan_in: usize, rng: &mut Rng) -> Tensor {
    Tensor::uniform(shape, 1.0 / (fan_in.max(1) as f64).sqrt(), rng)
}

/// Fully connected layer `y = W x + b`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub output: usize,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, output: usize, rng: &mut Rng) -> Self {
        let w = store.add(format!("{name}.weight"), init(&[output, input], input, rng));
        let b = store.add(format!("{name}.bias"), init(&[output], input, rng));
        Linear { w, b, input, output }
    }

    pub fn forward(&self, p: &ParamStore, x: &[f64]) -> Vec<f64> {
        crate::tensor::linear(x, p.get(self.w), p.get(self.b).as_slice())
    }

    /// Accumulates parameter gradients and returns `dx`.
    pub fn backward(&self, p: &ParamStore, x: &[f64], dy: &[f64], grads: &mut Grads) -> Vec<f64> {
        outer_acc(grads.dense_mut(self.w), dy, x);
        crate::tensor::add_assign(grads.dense_mut(self.b).as_mut_slice(), dy);
        let mut dx = vec![0.0; self.input];
        matvec_t_acc(p.get(self.w), dy, &mut dx);
        dx
    }
}

/// Token lookup table; its gradient is row-sparse.
#[derive(Clone, Debug)]
pub struct Embedding {
    pub table: ParamId,
    pub dim: usize,
}

impl Embedding {
    pub fn new(store: &mut ParamStore, name: &str, vectors: Tensor) -> Self {
        let dim = vectors.cols();
        Embedding { table: store.add_row_sparse(name, vectors), dim }
    }

    pub fn lookup(&self, p: &ParamStore, id: usize) -> Vec<f64> {
        p.get(self.table).row(id).to_vec()
    }

    pub fn backward(&self, id: usize, d: &[f64], grads: &mut Grads) {
        crate::tensor::add_assign(grads.row_mut(self.table, id), d);
    }
}

/// One LSTM direction. The four gates are stacked row-wise in the order
/// input, forget, output, candidate: `w` is `4h × d_in`, `u` is `4h × h`,
/// `b` has length `4h`.
#[derive(Clone, Debug)]
pub struct LstmCell {
    pub w: ParamId,
    pub u: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub hidden: usize,
}

/// Everything one step needs for its backward pass.
#[derive(Clone, Debug)]
pub struct LstmStep {
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Activated gates `[i; f; o; g]`.
    pub gates: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

impl LstmCell {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut Rng) -> Self {
        let w = store.add(format!("{name}.w"), init(&[4 * hidden, input], input, rng));
        let u = store.add(format!("{name}.u"), init(&[4 * hidden, hidden], hidden, rng));
        let b = store.add(format!("{name}.b"), init(&[4 * hidden], hidden, rng));
        LstmCell { w, u, b, input, hidden }
    }

    /// `i, f, o = σ(·)`, `g = tanh(·)`, `c = f⊙c_prev + i⊙g`, `h = o⊙tanh(c)`.
    pub fn step(&self, p: &ParamStore, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> LstmStep {
        let h = self.hidden;
        assert_eq!(x.len(), self.input, "LSTM input width");
        assert_eq!(h_prev.len(), h);
        assert_eq!(c_prev.len(), h);
        let mut z = p.get(self.b).as_slice().to_vec();
        matvec_acc(p.get(self.w), x, &mut z);
        matvec_acc(p.get(self.u), h_prev, &mut z);
        for v in &mut z[..3 * h] {
            *v = sigmoid(*v);
        }
        for v in &mut z[3 * h..] {
            *v = v.tanh();
        }
        let mut c = vec![0.0; h];
        let mut tanh_c = vec![0.0; h];
        let mut hv = vec![0.0; h];
        for k in 0..h {
            c[k] = z[h + k] * c_prev[k] + z[k] * z[3 * h + k];
            tanh_c[k] = c[k].tanh();
            hv[k] = z[2 * h + k] * tanh_c[k];
        }
        LstmStep { h_prev: h_prev.to_vec(), c_prev: c_prev.to_vec(), gates: z, c, tanh_c, h: hv }
    }

    /// Backward through one step. `dh`/`dc` are the total gradients on this
    /// step's outputs; returns `(dx, dh_prev, dc_prev)`.
    pub fn step_backward(
        &self,
        p: &ParamStore,
        x: &[f64],
        s: &LstmStep,
        dh: &[f64],
        dc: &[f64],
        grads: &mut Grads,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let h = self.hidden;
        let g = &s.gates;
        let mut dz = vec![0.0; 4 * h];
        let mut dc_prev = vec![0.0; h];
        for k in 0..h {
            let (i, f, o, cand) = (g[k], g[h + k], g[2 * h + k], g[3 * h + k]);
            let dct = dc[k] + dh[k] * o * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
            dz[k] = dct * cand * i * (1.0 - i);
            dz[h + k] = dct * s.c_prev[k] * f * (1.0 - f);
            dz[2 * h + k] = dh[k] * s.tanh_c[k] * o * (1.0 - o);
            dz[3 * h + k] = dct * i * (1.0 - cand * cand);
            dc_prev[k] = dct * f;
        }
        outer_acc(grads.dense_mut(self.w), &dz, x);
        outer_acc(grads.dense_mut(self.u), &dz, &s.h_prev);
        crate::tensor::add_assign(grads.dense_mut(self.b).as_mut_slice(), &dz);
        let mut dx = vec![0.0; self.input];
        matvec_t_acc(p.get(self.w), &dz, &mut dx);
        let mut dh_prev = vec![0.0; h];
        matvec_t_acc(p.get(self.u), &dz, &mut dh_prev);
        (dx, dh_prev, dc_prev)
    }

    /// Runs the recurrence from a zero state, left to right or right to
    /// left. Steps are returned indexed by time, not by processing order.
    pub fn run(&self, p: &ParamStore, xs: &[Vec<f64>], reverse: bool) -> Vec<LstmStep> {
        let n = xs.len();
        let mut steps: Vec<Option<LstmStep>> = vec![None; n];
        let mut h = vec![0.0; self.hidden];
        let mut c = vec![0.0; self.hidden];
        for k in 0..n {
            let t = if reverse { n - 1 - k } else { k };
            let s = self.step(p, &xs[t], &h, &c);
            h.clone_from(&s.h);
            c.clone_from(&s.c);
            steps[t] = Some(s);
        }
        steps.into_iter().map(Option::unwrap).collect()
    }

    /// Backpropagation through time. `dhs[t]` is the gradient on `h_t` from
    /// outside the recurrence; returns the gradient on every input.
    pub fn run_backward(
        &self,
        p: &ParamStore,
        xs: &[Vec<f64>],
        steps: &[LstmStep],
        dhs: &[Vec<f64>],
        reverse: bool,
        grads: &mut Grads,
    ) -> Vec<Vec<f64>> {
        let n = xs.len();
        let mut dxs = vec![Vec::new(); n];
        let mut dh_next = vec![0.0; self.hidden];
        let mut dc_next = vec![0.0; self.hidden];
        for k in (0..n).rev() {
            let t = if reverse { n - 1 - k } else { k };
            let dh: Vec<f64> = dhs[t].iter().zip(&dh_next).map(|(a, b)| a + b).collect();
            let (dx, dh_prev, dc_prev) = self.step_backward(p, &xs[t], &steps[t], &dh, &dc_next, grads);
            dxs[t] = dx;
            dh_next = dh_prev;
            dc_next = dc_prev;
        }
        dxs
    }
}

/// Bidirectional layer: row `t` of the output is `[→h_t ; ←h_t]`.
#[derive(Clone, Debug)]
pub struct BiLstm {
    pub forward: LstmCell,
    pub backward: LstmCell,
}

#[derive(Clone, Debug)]
pub struct BiLstmTrace {
    pub inputs: Vec<Vec<f64>>,
    pub forward: Vec<LstmStep>,
    pub backward: Vec<LstmStep>,
    pub outputs: Vec<Vec<f64>>,
}

impl BiLstm {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut Rng) -> Self {
        BiLstm {
            forward: LstmCell::new(store, &format!("{name}.fwd"), input, hidden, rng),
            backward: LstmCell::new(store, &format!("{name}.bwd"), input, hidden, rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.forward.hidden
    }

    pub fn output_width(&self) -> usize {
        2 * self.forward.hidden
    }

    pub fn run(&self, p: &ParamStore, xs: Vec<Vec<f64>>) -> BiLstmTrace {
        assert!(!xs.is_empty(), "BiLSTM over an empty sequence");
        let fwd = self.forward.run(p, &xs, false);
        let bwd = self.backward.run(p, &xs, true);
        let outputs = fwd
            .iter()
            .zip(&bwd)
            .map(|(f, b)| crate::tensor::concat(&[&f.h, &b.h]))
            .collect();
        BiLstmTrace { inputs: xs, forward: fwd, backward: bwd, outputs }
    }

    pub fn backward(&self, p: &ParamStore, trace: &BiLstmTrace, d_out: &[Vec<f64>], grads: &mut Grads) -> Vec<Vec<f64>> {
        let h = self.hidden();
        let d_fwd: Vec<Vec<f64>> = d_out.iter().map(|d| d[..h].to_vec()).collect();
        let d_bwd: Vec<Vec<f64>> = d_out.iter().map(|d| d[h..].to_vec()).collect();
        let mut dx = self.forward.run_backward(p, &trace.inputs, &trace.forward, &d_fwd, false, grads);
        let dx_b = self.backward.run_backward(p, &trace.inputs, &trace.backward, &d_bwd, true, grads);
        for (a, b) in dx.iter_mut().zip(&dx_b) {
            crate::tensor::add_assign(a, b);
        }
        dx
    }
}
