//! Single-step recurrent cells and their backward passes.
//!
//! Gate matrices act on the concatenation `[h_{t-1}, x_t]`, so each is
//! `hidden × (hidden + input)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{sigmoid, Matrix};
use super::NeuralError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Rnn,
    Gru,
    Lstm,
}

impl CellKind {
    pub const ALL: [CellKind; 3] = [CellKind::Rnn, CellKind::Gru, CellKind::Lstm];

    pub fn name(self) -> &'static str {
        match self {
            Self::Rnn => "rnn",
            Self::Gru => "gru",
            Self::Lstm => "lstm",
        }
    }

    /// Trainable scalars in one layer of `hidden` units fed `input` features.
    pub fn layer_param_count(self, hidden: usize, input: usize) -> usize {
        let gate = hidden * (hidden + input);
        match self {
            Self::Rnn => gate + hidden,
            Self::Gru => 3 * gate,
            Self::Lstm => 4 * (gate + hidden),
        }
    }
}

impl std::fmt::Display for CellKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Rnn => "RNN",
            Self::Gru => "GRU",
            Self::Lstm => "LSTM",
        })
    }
}

impl std::str::FromStr for CellKind {
    type Err = NeuralError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rnn" => Ok(Self::Rnn),
            "gru" => Ok(Self::Gru),
            "lstm" => Ok(Self::Lstm),
            _ => Err(NeuralError::InvalidConfig(format!("unknown cell kind {s:?}"))),
        }
    }
}

/// Weights of one recurrent layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CellParams {
    Rnn {
        w_hh: Matrix,
        w_xh: Matrix,
        b_h: Vec<f64>,
    },
    /// No biases: the update, reset and candidate maps are pure matrix products.
    Gru {
        w_z: Matrix,
        w_r: Matrix,
        w: Matrix,
    },
    Lstm {
        w_f: Matrix,
        b_f: Vec<f64>,
        w_i: Matrix,
        b_i: Vec<f64>,
        w_c: Matrix,
        b_c: Vec<f64>,
        w_o: Matrix,
        b_o: Vec<f64>,
    },
}

/// Activations kept from one forward step.
#[derive(Debug, Clone)]
pub(crate) enum StepCache {
    Rnn,
    Gru {
        z: Vec<f64>,
        r: Vec<f64>,
        rh: Vec<f64>,
        cand: Vec<f64>,
    },
    Lstm {
        f: Vec<f64>,
        i: Vec<f64>,
        o: Vec<f64>,
        g: Vec<f64>,
        tanh_c: Vec<f64>,
    },
}

pub(crate) struct StepOut {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    pub cache: StepCache,
}

fn check_gates(v: &[f64]) {
    debug_assert!(v.iter().all(|g| (0.0..=1.0).contains(g)), "gate out of range");
}

impl CellParams {
    pub fn zeros(kind: CellKind, hidden: usize, input: usize) -> Self {
        let m = || Matrix::zeros(hidden, hidden + input);
        let b = || vec![0.0; hidden];
        match kind {
            CellKind::Rnn => Self::Rnn {
                w_hh: Matrix::zeros(hidden, hidden),
                w_xh: Matrix::zeros(hidden, input),
                b_h: b(),
            },
            CellKind::Gru => Self::Gru {
                w_z: m(),
                w_r: m(),
                w: m(),
            },
            CellKind::Lstm => Self::Lstm {
                w_f: m(),
                b_f: b(),
                w_i: m(),
                b_i: b(),
                w_c: m(),
                b_c: b(),
                w_o: m(),
                b_o: b(),
            },
        }
    }

    /// Uniform `±1/√(hidden + input)` for every weight and bias.
    pub fn random<R: Rng>(kind: CellKind, hidden: usize, input: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(kind, hidden, input);
        let bound = 1.0 / ((hidden + input) as f64).sqrt();
        for t in p.tensors_mut() {
            for v in t {
                *v = rng.random_range(-bound..bound);
            }
        }
        p
    }

    pub fn kind(&self) -> CellKind {
        match self {
            Self::Rnn { .. } => CellKind::Rnn,
            Self::Gru { .. } => CellKind::Gru,
            Self::Lstm { .. } => CellKind::Lstm,
        }
    }

    pub fn hidden(&self) -> usize {
        match self {
            Self::Rnn { w_hh, .. } => w_hh.rows(),
            Self::Gru { w, .. } => w.rows(),
            Self::Lstm { w_c, .. } => w_c.rows(),
        }
    }

    pub fn input(&self) -> usize {
        match self {
            Self::Rnn { w_xh, .. } => w_xh.cols(),
            Self::Gru { w, .. } => w.cols() - w.rows(),
            Self::Lstm { w_c, .. } => w_c.cols() - w_c.rows(),
        }
    }

    /// Tensor names and `(rows, cols)` in the canonical visiting order.
    pub fn layout(&self) -> Vec<(&'static str, usize, usize)> {
        let (h, d) = (self.hidden(), self.input());
        let g = (h, h + d);
        match self {
            Self::Rnn { .. } => vec![("w_hh", h, h), ("w_xh", h, d), ("b_h", h, 1)],
            Self::Gru { .. } => vec![("w_z", g.0, g.1), ("w_r", g.0, g.1), ("w", g.0, g.1)],
            Self::Lstm { .. } => vec![
                ("w_f", g.0, g.1),
                ("b_f", h, 1),
                ("w_i", g.0, g.1),
                ("b_i", h, 1),
                ("w_c", g.0, g.1),
                ("b_c", h, 1),
                ("w_o", g.0, g.1),
                ("b_o", h, 1),
            ],
        }
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        match self {
            Self::Rnn { w_hh, w_xh, b_h } => vec![w_hh.as_slice(), w_xh.as_slice(), b_h],
            Self::Gru { w_z, w_r, w } => vec![w_z.as_slice(), w_r.as_slice(), w.as_slice()],
            Self::Lstm {
                w_f,
                b_f,
                w_i,
                b_i,
                w_c,
                b_c,
                w_o,
                b_o,
            } => vec![
                w_f.as_slice(),
                b_f,
                w_i.as_slice(),
                b_i,
                w_c.as_slice(),
                b_c,
                w_o.as_slice(),
                b_o,
            ],
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            Self::Rnn { w_hh, w_xh, b_h } => {
                vec![w_hh.as_mut_slice(), w_xh.as_mut_slice(), b_h]
            }
            Self::Gru { w_z, w_r, w } => {
                vec![w_z.as_mut_slice(), w_r.as_mut_slice(), w.as_mut_slice()]
            }
            Self::Lstm {
                w_f,
                b_f,
                w_i,
                b_i,
                w_c,
                b_c,
                w_o,
                b_o,
            } => vec![
                w_f.as_mut_slice(),
                b_f,
                w_i.as_mut_slice(),
                b_i,
                w_c.as_mut_slice(),
                b_c,
                w_o.as_mut_slice(),
                b_o,
            ],
        }
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn check(&self, h_prev: &[f64], x: &[f64]) -> Result<(), NeuralError> {
        if h_prev.len() != self.hidden() {
            return Err(NeuralError::ShapeMismatch {
                what: "hidden state",
                expected: self.hidden(),
                got: h_prev.len(),
            });
        }
        if x.len() != self.input() {
            return Err(NeuralError::ShapeMismatch {
                what: "cell input",
                expected: self.input(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// One forward step; `c_prev` is ignored except for LSTM.
    pub(crate) fn step(&self, h_prev: &[f64], c_prev: &[f64], x: &[f64]) -> StepOut {
        let hn = self.hidden();
        match self {
            Self::Rnn { w_hh, w_xh, b_h } => {
                let mut a = vec![0.0; hn];
                let mut ax = vec![0.0; hn];
                w_hh.matvec2(h_prev, &[], &mut a);
                w_xh.matvec2(&[], x, &mut ax);
                let h: Vec<f64> = a
                    .iter()
                    .zip(&ax)
                    .zip(b_h)
                    .map(|((p, q), b)| (p + q + b).tanh())
                    .collect();
                StepOut {
                    h,
                    c: Vec::new(),
                    cache: StepCache::Rnn,
                }
            }
            Self::Gru { w_z, w_r, w } => {
                let mut z = vec![0.0; hn];
                let mut r = vec![0.0; hn];
                w_z.matvec2(h_prev, x, &mut z);
                w_r.matvec2(h_prev, x, &mut r);
                z.iter_mut().for_each(|v| *v = sigmoid(*v));
                r.iter_mut().for_each(|v| *v = sigmoid(*v));
                check_gates(&z);
                check_gates(&r);
                let rh: Vec<f64> = r.iter().zip(h_prev).map(|(a, b)| a * b).collect();
                let mut cand = vec![0.0; hn];
                w.matvec2(&rh, x, &mut cand);
                cand.iter_mut().for_each(|v| *v = v.tanh());
                let h = (0..hn)
                    .map(|j| (1.0 - z[j]) * h_prev[j] + z[j] * cand[j])
                    .collect();
                StepOut {
                    h,
                    c: Vec::new(),
                    cache: StepCache::Gru { z, r, rh, cand },
                }
            }
            Self::Lstm {
                w_f,
                b_f,
                w_i,
                b_i,
                w_c,
                b_c,
                w_o,
                b_o,
            } => {
                let gate = |w: &Matrix, b: &[f64], act: fn(f64) -> f64| {
                    let mut v = vec![0.0; hn];
                    w.matvec2(h_prev, x, &mut v);
                    v.iter_mut().zip(b).for_each(|(v, b)| *v = act(*v + b));
                    v
                };
                let f = gate(w_f, b_f, sigmoid);
                let i = gate(w_i, b_i, sigmoid);
                let o = gate(w_o, b_o, sigmoid);
                let g = gate(w_c, b_c, f64::tanh);
                check_gates(&f);
                check_gates(&i);
                check_gates(&o);
                let c: Vec<f64> = (0..hn).map(|j| f[j] * c_prev[j] + i[j] * g[j]).collect();
                let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
                let h = o.iter().zip(&tanh_c).map(|(a, b)| a * b).collect();
                StepOut {
                    h,
                    c,
                    cache: StepCache::Lstm { f, i, o, g, tanh_c },
                }
            }
        }
    }

    /// Backward through one step. `dh` and `dc` are the gradients reaching
    /// this step's outputs; parameter gradients accumulate into `grads`.
    /// Returns `(dh_prev, dc_prev)`; the input gradient is added to `dx`.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn step_backward(
        &self,
        grads: &mut CellParams,
        cache: &StepCache,
        h_prev: &[f64],
        c_prev: &[f64],
        x: &[f64],
        h: &[f64],
        dh: &[f64],
        dc: &[f64],
        dx: &mut [f64],
    ) -> (Vec<f64>, Vec<f64>) {
        let hn = self.hidden();
        let mut dh_prev = vec![0.0; hn];
        match (self, grads, cache) {
            (Self::Rnn { w_hh, w_xh, .. }, Self::Rnn { w_hh: gw_hh, w_xh: gw_xh, b_h: gb }, StepCache::Rnn) => {
                let da: Vec<f64> = dh.iter().zip(h).map(|(d, h)| d * (1.0 - h * h)).collect();
                gw_hh.outer2_acc(&da, h_prev, &[]);
                gw_xh.outer2_acc(&da, &[], x);
                gb.iter_mut().zip(&da).for_each(|(g, d)| *g += d);
                w_hh.tmatvec2_acc(&da, &mut dh_prev, &mut []);
                w_xh.tmatvec2_acc(&da, &mut [], dx);
                (dh_prev, Vec::new())
            }
            (
                Self::Gru { w_z, w_r, w },
                Self::Gru {
                    w_z: gw_z,
                    w_r: gw_r,
                    w: gw,
                },
                StepCache::Gru { z, r, rh, cand },
            ) => {
                let mut da_z = vec![0.0; hn];
                let mut da_c = vec![0.0; hn];
                for j in 0..hn {
                    dh_prev[j] += dh[j] * (1.0 - z[j]);
                    let dz = dh[j] * (cand[j] - h_prev[j]);
                    da_z[j] = dz * z[j] * (1.0 - z[j]);
                    da_c[j] = dh[j] * z[j] * (1.0 - cand[j] * cand[j]);
                }
                gw.outer2_acc(&da_c, rh, x);
                let mut drh = vec![0.0; hn];
                w.tmatvec2_acc(&da_c, &mut drh, dx);
                let mut da_r = vec![0.0; hn];
                for j in 0..hn {
                    dh_prev[j] += drh[j] * r[j];
                    da_r[j] = drh[j] * h_prev[j] * r[j] * (1.0 - r[j]);
                }
                gw_z.outer2_acc(&da_z, h_prev, x);
                gw_r.outer2_acc(&da_r, h_prev, x);
                w_z.tmatvec2_acc(&da_z, &mut dh_prev, dx);
                w_r.tmatvec2_acc(&da_r, &mut dh_prev, dx);
                (dh_prev, Vec::new())
            }
            (
                Self::Lstm {
                    w_f, w_i, w_c, w_o, ..
                },
                Self::Lstm {
                    w_f: gw_f,
                    b_f: gb_f,
                    w_i: gw_i,
                    b_i: gb_i,
                    w_c: gw_c,
                    b_c: gb_c,
                    w_o: gw_o,
                    b_o: gb_o,
                },
                StepCache::Lstm { f, i, o, g, tanh_c },
            ) => {
                let mut dc_prev = vec![0.0; hn];
                let (mut da_f, mut da_i, mut da_o, mut da_g) =
                    (vec![0.0; hn], vec![0.0; hn], vec![0.0; hn], vec![0.0; hn]);
                for j in 0..hn {
                    let dct = dc[j] + dh[j] * o[j] * (1.0 - tanh_c[j] * tanh_c[j]);
                    da_o[j] = dh[j] * tanh_c[j] * o[j] * (1.0 - o[j]);
                    da_f[j] = dct * c_prev[j] * f[j] * (1.0 - f[j]);
                    da_i[j] = dct * g[j] * i[j] * (1.0 - i[j]);
                    da_g[j] = dct * i[j] * (1.0 - g[j] * g[j]);
                    dc_prev[j] = dct * f[j];
                }
                for (gw, gb, da, w) in [
                    (gw_f, gb_f, &da_f, w_f),
                    (gw_i, gb_i, &da_i, w_i),
                    (gw_c, gb_c, &da_g, w_c),
                    (gw_o, gb_o, &da_o, w_o),
                ] {
                    gw.outer2_acc(da, h_prev, x);
                    gb.iter_mut().zip(da).for_each(|(g, d)| *g += d);
                    w.tmatvec2_acc(da, &mut dh_prev, dx);
                }
                (dh_prev, dc_prev)
            }
            _ => unreachable!("gradient buffer and cache always match the cell kind"),
        }
    }
}

/// `h = tanh(W_hh·h_prev + W_xh·x + b_h)`
pub fn rnn_cell(params: &CellParams, h_prev: &[f64], x: &[f64]) -> Result<Vec<f64>, NeuralError> {
    expect_kind(params, CellKind::Rnn)?;
    params.check(h_prev, x)?;
    Ok(params.step(h_prev, &[], x).h)
}

pub fn gru_cell(params: &CellParams, h_prev: &[f64], x: &[f64]) -> Result<Vec<f64>, NeuralError> {
    expect_kind(params, CellKind::Gru)?;
    params.check(h_prev, x)?;
    Ok(params.step(h_prev, &[], x).h)
}

/// Returns `(h, c)`.
pub fn lstm_cell(
    params: &CellParams,
    h_prev: &[f64],
    c_prev: &[f64],
    x: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), NeuralError> {
    expect_kind(params, CellKind::Lstm)?;
    params.check(h_prev, x)?;
    if c_prev.len() != params.hidden() {
        return Err(NeuralError::ShapeMismatch {
            what: "cell state",
            expected: params.hidden(),
            got: c_prev.len(),
        });
    }
    let out = params.step(h_prev, c_prev, x);
    Ok((out.h, out.c))
}

fn expect_kind(params: &CellParams, kind: CellKind) -> Result<(), NeuralError> {
    if params.kind() == kind {
        Ok(())
    } else {
        Err(NeuralError::InvalidConfig(format!(
            "expected {kind} parameters, got {}",
            params.kind()
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn filled(kind: CellKind, h: usize, d: usize, v: f64) -> CellParams {
        let mut p = CellParams::zeros(kind, h, d);
        for t in p.tensors_mut() {
            t.fill(v);
        }
        p
    }

    #[test]
    fn rnn_zero_and_identity() {
        let p = CellParams::zeros(CellKind::Rnn, 3, 2);
        assert_eq!(rnn_cell(&p, &[0.3, -0.2, 0.9], &[1.0, 2.0]).unwrap(), vec![0.0; 3]);

        let mut p = CellParams::zeros(CellKind::Rnn, 1, 1);
        if let CellParams::Rnn { w_xh, .. } = &mut p {
            w_xh.set(0, 0, 1.0);
        }
        let h = rnn_cell(&p, &[0.7], &[0.5]).unwrap();
        assert!((h[0] - 0.5f64.tanh()).abs() < 1e-15);
        assert!((h[0] - 0.4621).abs() < 1e-4);
    }

    #[test]
    fn rnn_shape_mismatch() {
        let p = CellParams::zeros(CellKind::Rnn, 2, 1);
        assert!(matches!(
            rnn_cell(&p, &[0.0, 0.0], &[1.0, 2.0]),
            Err(NeuralError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn gru_cases() {
        let p = CellParams::zeros(CellKind::Gru, 2, 1);
        let h = gru_cell(&p, &[0.8, -0.4], &[3.0]).unwrap();
        assert_eq!(h, vec![0.4, -0.2]);

        // Constant input 1 with a large update weight saturates z.
        let mut p = CellParams::zeros(CellKind::Gru, 1, 1);
        if let CellParams::Gru { w_z, w, .. } = &mut p {
            w_z.set(0, 1, 50.0);
            w.set(0, 1, 0.3);
        }
        let h = gru_cell(&p, &[0.0], &[1.0]).unwrap();
        assert!((h[0] - 0.3f64.tanh()).abs() < 1e-6);

        let p = filled(CellKind::Gru, 1, 1, 1.0);
        let h = gru_cell(&p, &[0.0], &[1.0]).unwrap();
        let z = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((h[0] - z * 1.0f64.tanh()).abs() < 1e-15);
        assert!((h[0] - 0.5568).abs() < 1e-4);
    }

    #[test]
    fn lstm_cases() {
        let p = CellParams::zeros(CellKind::Lstm, 1, 1);
        let (h, c) = lstm_cell(&p, &[0.0], &[2.0], &[0.0]).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-15);
        assert!((h[0] - 0.5 * 1.0f64.tanh()).abs() < 1e-15);
        assert!((h[0] - 0.3808).abs() < 1e-4);

        // Forget gate open, input gate shut: the cell state carries over.
        let mut p = CellParams::zeros(CellKind::Lstm, 1, 1);
        if let CellParams::Lstm { b_f, b_i, .. } = &mut p {
            b_f[0] = 40.0;
            b_i[0] = -40.0;
        }
        let (_, c) = lstm_cell(&p, &[0.1], &[1.7], &[0.4]).unwrap();
        assert!((c[0] - 1.7).abs() < 1e-6);

        let mut p = filled(CellKind::Lstm, 1, 1, 0.5);
        for (name, t) in p.layout().into_iter().zip(p.tensors_mut()) {
            if name.0.starts_with('b') {
                t.fill(0.0);
            }
        }
        let (h, c) = lstm_cell(&p, &[0.0], &[0.0], &[1.0]).unwrap();
        let s = 1.0 / (1.0 + (-0.5f64).exp());
        let c_exp = s * 0.5f64.tanh();
        assert!((c[0] - c_exp).abs() < 1e-15);
        assert!((h[0] - s * c_exp.tanh()).abs() < 1e-15);
        assert!((c[0] - 0.2877).abs() < 1e-4 && (h[0] - 0.1743).abs() < 1e-4);
    }

    #[test]
    fn parameter_counts() {
        for (h, d) in [(1, 1), (4, 2), (64, 2), (64, 64)] {
            let gate = h * (h + d);
            let closed = [gate + h, 3 * gate, 4 * (gate + h)];
            for (kind, want) in CellKind::ALL.into_iter().zip(closed) {
                assert_eq!(CellParams::zeros(kind, h, d).param_count(), want);
                assert_eq!(kind.layer_param_count(h, d), want);
            }
        }
    }

    #[test]
    fn wrong_kind_rejected() {
        let p = CellParams::zeros(CellKind::Gru, 1, 1);
        assert!(rnn_cell(&p, &[0.0], &[0.0]).is_err());
    }
}
