//! Batched forward passes and their reverse-mode gradients.
//!
//! LSTM core, per step (gates ordered i, f, g, o, no peepholes):
//!
//! ```text
//! e = act(W_e x + b_e)
//! z = W_x e + W_h h' + b,  i, f, o = σ(z_i, z_f, z_o),  g = tanh(z_g)
//! c = f ⊙ c' + i ⊙ g,  h = o ⊙ tanh(c)
//! d = act(W_d h + b_d),  y = W_o d + b_o
//! ```
//!
//! The exported state is `[c; h]`. The context core replaces the recurrence by a
//! sliding window of the last `k` inputs followed by two hidden layers.

use super::heads::sigmoid;
use super::params::{Activation, ArchitectureConfig, Core, ParamSet};
use super::tensor::{gemm_nn, gemm_nt, gemm_tn, Matrix};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub arch: ArchitectureConfig,
    pub params: ParamSet,
}

/// Activations saved by one batched step, consumed by [`Network::backward`].
#[derive(Clone, Debug)]
pub enum StepCache {
    Lstm {
        x: Matrix,
        e: Matrix,
        c_prev: Matrix,
        h_prev: Matrix,
        /// Post-nonlinearity gates, `B × 4N`.
        gates: Matrix,
        tanh_c: Matrix,
        h: Matrix,
        d: Matrix,
    },
    Context {
        window: Matrix,
        hidden: Vec<Matrix>,
    },
}

/// `act(x Wᵀ + b)`, or linear when `act` is `None`.
pub fn dense(x: &Matrix, w: &Matrix, b: &Matrix, act: Option<Activation>) -> Matrix {
    let mut out = Matrix::zeros(x.rows, w.rows);
    gemm_nt(
        1.0,
        &x.data,
        &w.data,
        0.0,
        &mut out.data,
        x.rows,
        x.cols,
        w.rows,
    );
    out.add_row_vector(&b.data);
    if let Some(a) = act {
        for v in &mut out.data {
            *v = a.apply(*v);
        }
    }
    out
}

/// Backward through `dense`: accumulates parameter gradients and returns `∂/∂x` if requested.
pub fn dense_backward(
    x: &Matrix,
    out: &Matrix,
    dout: &mut Matrix,
    w: &Matrix,
    act: Option<Activation>,
    gw: &mut Matrix,
    gb: &mut Matrix,
    want_dx: bool,
) -> Option<Matrix> {
    if let Some(a) = act {
        for (d, &y) in dout.data.iter_mut().zip(&out.data) {
            *d *= a.grad_from_output(y);
        }
    }
    gemm_tn(
        1.0,
        &dout.data,
        &x.data,
        1.0,
        &mut gw.data,
        w.rows,
        x.rows,
        w.cols,
    );
    dout.sum_rows_into(&mut gb.data);
    want_dx.then(|| {
        let mut dx = Matrix::zeros(x.rows, w.cols);
        gemm_nn(
            1.0,
            &dout.data,
            &w.data,
            0.0,
            &mut dx.data,
            x.rows,
            w.rows,
            w.cols,
        );
        dx
    })
}

/// Dense stack: `layers` consecutive (w, b) pairs from `first`, activation on all but the last.
pub fn mlp_forward(
    params: &ParamSet,
    first: usize,
    layers: usize,
    x: &Matrix,
    act: Activation,
) -> Vec<Matrix> {
    let mut outs: Vec<Matrix> = Vec::with_capacity(layers);
    for l in 0..layers {
        let input = if l == 0 { x } else { &outs[l - 1] };
        let a = (l + 1 < layers).then_some(act);
        let o = dense(
            input,
            &params.tensors[first + 2 * l],
            &params.tensors[first + 2 * l + 1],
            a,
        );
        outs.push(o);
    }
    outs
}

pub fn mlp_backward(
    params: &ParamSet,
    first: usize,
    x: &Matrix,
    outs: &[Matrix],
    dy: &Matrix,
    act: Activation,
    grads: &mut ParamSet,
    want_dx: bool,
) -> Option<Matrix> {
    let layers = outs.len();
    let mut d = dy.clone();
    for l in (0..layers).rev() {
        let input = if l == 0 { x } else { &outs[l - 1] };
        let a = (l + 1 < layers).then_some(act);
        let (gw, gb) = pair_mut(grads, first + 2 * l);
        let need = l > 0 || want_dx;
        match dense_backward(
            input,
            &outs[l],
            &mut d,
            &params.tensors[first + 2 * l],
            a,
            gw,
            gb,
            need,
        ) {
            Some(dx) => d = dx,
            None => return None,
        }
    }
    Some(d)
}

fn pair_mut(p: &mut ParamSet, i: usize) -> (&mut Matrix, &mut Matrix) {
    let (a, b) = p.tensors.split_at_mut(i + 1);
    (&mut a[i], &mut b[0])
}

const ENC_W: usize = 0;
const ENC_B: usize = 1;
const LSTM_WX: usize = 2;
const LSTM_WH: usize = 3;
const LSTM_B: usize = 4;
const DEC_W: usize = 5;
const DEC_B: usize = 6;
const OUT_W: usize = 7;
const OUT_B: usize = 8;

impl Network {
    pub fn new(arch: ArchitectureConfig, params: ParamSet) -> Result<Self> {
        arch.validate()?;
        params.check_layout(&arch.layout())?;
        Ok(Self { arch, params })
    }

    pub fn state_dim(&self) -> usize {
        match self.arch.core {
            Core::Lstm => 2 * self.arch.width,
            Core::Context { context } => context * self.arch.input_dim,
        }
    }

    pub fn zero_state(&self, batch: usize) -> Matrix {
        Matrix::zeros(batch, self.state_dim())
    }

    /// One batched step. Returns outputs `B × O`, next state `B × S` and the cache for backward.
    pub fn forward(&self, x: &Matrix, state: &Matrix) -> Result<(Matrix, Matrix, StepCache)> {
        let b = x.rows;
        if x.cols != self.arch.input_dim || state.rows != b || state.cols != self.state_dim() {
            return Err(Error::contract(format!(
                "forward got input {}×{} and state {}×{} (expects ·×{} and ·×{})",
                x.rows,
                x.cols,
                state.rows,
                state.cols,
                self.arch.input_dim,
                self.state_dim()
            )));
        }
        let p = &self.params.tensors;
        let act = self.arch.activation;
        match self.arch.core {
            Core::Lstm => {
                let n = self.arch.width;
                let c_prev = state.columns(0, n);
                let h_prev = state.columns(n, n);
                let e = dense(x, &p[ENC_W], &p[ENC_B], Some(act));
                let mut gates = dense(&e, &p[LSTM_WX], &p[LSTM_B], None);
                gemm_nt(
                    1.0,
                    &h_prev.data,
                    &p[LSTM_WH].data,
                    1.0,
                    &mut gates.data,
                    b,
                    n,
                    4 * n,
                );
                let mut next = Matrix::zeros(b, 2 * n);
                let mut tanh_c = Matrix::zeros(b, n);
                let mut h = Matrix::zeros(b, n);
                for r in 0..b {
                    let g = gates.row_mut(r);
                    for j in 0..n {
                        g[j] = sigmoid(g[j]);
                        g[n + j] = sigmoid(g[n + j]);
                        g[2 * n + j] = g[2 * n + j].tanh();
                        g[3 * n + j] = sigmoid(g[3 * n + j]);
                    }
                    let (cp, g) = (c_prev.row(r), gates.row(r));
                    let s = next.row_mut(r);
                    for j in 0..n {
                        let c = g[n + j] * cp[j] + g[j] * g[2 * n + j];
                        let tc = c.tanh();
                        s[j] = c;
                        s[n + j] = g[3 * n + j] * tc;
                        tanh_c.data[r * n + j] = tc;
                        h.data[r * n + j] = s[n + j];
                    }
                }
                let d = dense(&h, &p[DEC_W], &p[DEC_B], Some(act));
                let y = dense(&d, &p[OUT_W], &p[OUT_B], None);
                let cache = StepCache::Lstm {
                    x: x.clone(),
                    e,
                    c_prev,
                    h_prev,
                    gates,
                    tanh_c,
                    h,
                    d,
                };
                Ok((y, next, cache))
            }
            Core::Context { .. } => {
                let i = self.arch.input_dim;
                let mut window = Matrix::zeros(b, state.cols);
                for r in 0..b {
                    let (src, dst) = (state.row(r), window.row_mut(r));
                    let k = src.len();
                    dst[..k - i].copy_from_slice(&src[i..]);
                    dst[k - i..].copy_from_slice(x.row(r));
                }
                let mut hidden = mlp_forward(&self.params, 0, 4, &window, act);
                let y = hidden.pop().expect("four layers");
                let cache = StepCache::Context {
                    window: window.clone(),
                    hidden,
                };
                Ok((y, window, cache))
            }
        }
    }

    /// Single-episode convenience wrapper.
    pub fn step(&self, x: &[f64], state: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let xm = Matrix::from_vec(1, x.len(), x.to_vec());
        let sm = Matrix::from_vec(1, state.len(), state.to_vec());
        let (y, s, _) = self.forward(&xm, &sm)?;
        Ok((y.data, s.data))
    }

    /// The output a post-transition state emits: `y = f(s)`.
    pub fn readout(&self, state: &[f64]) -> Result<Vec<f64>> {
        if state.len() != self.state_dim() {
            return Err(Error::contract(format!(
                "state of length {} (expects {})",
                state.len(),
                self.state_dim()
            )));
        }
        let p = &self.params.tensors;
        let act = self.arch.activation;
        Ok(match self.arch.core {
            Core::Lstm => {
                let n = self.arch.width;
                let h = Matrix::from_vec(1, n, state[n..].to_vec());
                let d = dense(&h, &p[DEC_W], &p[DEC_B], Some(act));
                dense(&d, &p[OUT_W], &p[OUT_B], None).data
            }
            Core::Context { .. } => {
                let w = Matrix::from_vec(1, state.len(), state.to_vec());
                mlp_forward(&self.params, 0, 4, &w, act)
                    .pop()
                    .expect("four layers")
                    .data
            }
        })
    }

    /// Reverse-mode gradients of `Σ_t ⟨dys[t], y_t⟩` over one window of cached steps,
    /// accumulated into `grads`. The state entering the window is treated as constant.
    pub fn backward(
        &self,
        caches: &[StepCache],
        dys: &[Matrix],
        grads: &mut ParamSet,
    ) -> Result<()> {
        if caches.len() != dys.len() {
            return Err(Error::contract(
                "backward needs one output gradient per cached step",
            ));
        }
        let p = &self.params;
        let act = self.arch.activation;
        let n = self.arch.width;
        let mut dh_next: Option<Matrix> = None;
        let mut dc_next: Option<Matrix> = None;
        for (cache, dy) in caches.iter().zip(dys).rev() {
            match cache {
                StepCache::Lstm {
                    x,
                    e,
                    c_prev,
                    h_prev,
                    gates,
                    tanh_c,
                    h,
                    d,
                } => {
                    let b = x.rows;
                    let mut dy = dy.clone();
                    let mut dd = {
                        let (gw, gb) = pair_mut(grads, OUT_W);
                        dense_backward(
                            d,
                            &Matrix::zeros(0, 0),
                            &mut dy,
                            &p.tensors[OUT_W],
                            None,
                            gw,
                            gb,
                            true,
                        )
                        .expect("requested")
                    };
                    let mut dh = {
                        let (gw, gb) = pair_mut(grads, DEC_W);
                        dense_backward(h, d, &mut dd, &p.tensors[DEC_W], Some(act), gw, gb, true)
                            .expect("requested")
                    };
                    if let Some(dn) = &dh_next {
                        for (a, v) in dh.data.iter_mut().zip(&dn.data) {
                            *a += v;
                        }
                    }
                    let mut dz = Matrix::zeros(b, 4 * n);
                    let mut dc_prev = Matrix::zeros(b, n);
                    for r in 0..b {
                        let g = gates.row(r);
                        for j in 0..n {
                            let k = r * n + j;
                            let (gi, gf, gg, go) = (g[j], g[n + j], g[2 * n + j], g[3 * n + j]);
                            let tc = tanh_c.data[k];
                            let dhv = dh.data[k];
                            let mut dc = dhv * go * (1.0 - tc * tc);
                            if let Some(dn) = &dc_next {
                                dc += dn.data[k];
                            }
                            let z = dz.row_mut(r);
                            z[j] = dc * gg * gi * (1.0 - gi);
                            z[n + j] = dc * c_prev.data[k] * gf * (1.0 - gf);
                            z[2 * n + j] = dc * gi * (1.0 - gg * gg);
                            z[3 * n + j] = dhv * tc * go * (1.0 - go);
                            dc_prev.data[k] = dc * gf;
                        }
                    }
                    gemm_tn(
                        1.0,
                        &dz.data,
                        &h_prev.data,
                        1.0,
                        &mut grads.tensors[LSTM_WH].data,
                        4 * n,
                        b,
                        n,
                    );
                    let mut dhp = Matrix::zeros(b, n);
                    gemm_nn(
                        1.0,
                        &dz.data,
                        &p.tensors[LSTM_WH].data,
                        0.0,
                        &mut dhp.data,
                        b,
                        4 * n,
                        n,
                    );
                    let mut de = {
                        let (left, right) = grads.tensors.split_at_mut(LSTM_B);
                        let (gw, gb) = (&mut left[LSTM_WX], &mut right[0]);
                        dense_backward(
                            e,
                            &Matrix::zeros(0, 0),
                            &mut dz,
                            &p.tensors[LSTM_WX],
                            None,
                            gw,
                            gb,
                            true,
                        )
                        .expect("requested")
                    };
                    let (gw, gb) = pair_mut(grads, ENC_W);
                    dense_backward(x, e, &mut de, &p.tensors[ENC_W], Some(act), gw, gb, false);
                    dh_next = Some(dhp);
                    dc_next = Some(dc_prev);
                }
                StepCache::Context { window, hidden } => {
                    // a linear output layer never reads its own activations, so a placeholder stands in
                    let mut outs = hidden.clone();
                    outs.push(Matrix::zeros(0, 0));
                    mlp_backward(p, 0, window, &outs, dy, act, grads, false);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural_core::heads::HeadKind;
    use crate::neural_core::params::init_params;
    use crate::seeding::rng_from;

    #[test]
    fn zero_weights_give_zero_outputs_and_state() {
        let arch = ArchitectureConfig::lstm(4, 2, HeadKind::CategoricalLogits);
        let net = Network::new(
            arch.clone(),
            crate::neural_core::ParamSet::zeros(&arch.layout()),
        )
        .unwrap();
        let (y, s) = net.step(&[1.0, 1.0], &[0.0; 8]).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
        assert!(s.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn batched_step_equals_single_steps_and_cell_moves_at_most_one() {
        let arch = ArchitectureConfig::lstm(5, 2, HeadKind::GaussianMeanLogprec);
        let net = Network::new(arch.clone(), init_params(&arch, &mut rng_from(&[3]))).unwrap();
        let xs = Matrix::from_vec(2, 2, vec![0.3, 1.0, -1.2, 1.0]);
        let mut state = net.zero_state(2);
        let mut singles = vec![vec![0.0; 10]; 2];
        for _ in 0..20 {
            let (y, next, _) = net.forward(&xs, &state).unwrap();
            for r in 0..2 {
                let (ys, ss) = net.step(xs.row(r), &singles[r]).unwrap();
                assert_eq!(ys, y.row(r));
                assert_eq!(ss, next.row(r));
                for j in 0..5 {
                    assert!((ss[j] - singles[r][j]).abs() <= 1.0);
                }
                singles[r] = ss;
            }
            state = next;
        }
    }

    #[test]
    fn context_window_pads_with_zeros() {
        let arch = ArchitectureConfig::context(4, 2, HeadKind::BernoulliLogp, 5);
        let net = Network::new(arch.clone(), init_params(&arch, &mut rng_from(&[4]))).unwrap();
        let mut s = vec![0.0; 10];
        for t in 0..3 {
            s = net.step(&[t as f64 + 1.0, 1.0], &s).unwrap().1;
        }
        assert_eq!(&s[..4], &[0.0; 4]);
        assert_eq!(&s[4..], &[1.0, 1.0, 2.0, 1.0, 3.0, 1.0]);
    }
}
