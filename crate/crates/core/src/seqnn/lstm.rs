use ndarray::{s, Axis};
use rand_chacha::ChaCha8Rng;

use super::activation::sigmoid;
use super::tensor::{Layer, Mat, Param, Phase};
use crate::error::{Error, Result};

/// Single-layer LSTM returning the hidden state at every step.
///
/// Gate pre-activations are `x_t·W_x + h_{t-1}·W_h + b`, laid out in the
/// `4H` columns as input, forget, cell candidate, output. Initial hidden
/// and cell states are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Lstm {
    pub cin: usize,
    pub hidden: usize,
    pub w_x: Param,
    pub w_h: Param,
    pub bias: Param,
}

/// Values saved by [`Lstm::forward`] for backpropagation through time.
#[derive(Clone, Debug)]
pub struct LstmCache {
    x: Mat,
    /// Post-activation gates, `T × 4H`.
    gates: Mat,
    /// Cell states, `T × H`.
    cells: Mat,
    /// Hidden states, `T × H`.
    hidden: Mat,
}

impl Lstm {
    pub fn new(cin: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        if cin == 0 || hidden == 0 {
            return Err(Error::Config(format!(
                "lstm needs positive sizes, got {cin}->{hidden}"
            )));
        }
        let bound = 1.0 / (hidden as f64).sqrt();
        Ok(Lstm {
            cin,
            hidden,
            w_x: Param::uniform("w_x", cin, 4 * hidden, bound, rng),
            w_h: Param::uniform("w_h", hidden, 4 * hidden, bound, rng),
            bias: Param::uniform("bias", 1, 4 * hidden, bound, rng),
        })
    }

    pub fn zeros(cin: usize, hidden: usize) -> Self {
        Lstm {
            cin,
            hidden,
            w_x: Param::new("w_x", Mat::zeros((cin, 4 * hidden))),
            w_h: Param::new("w_h", Mat::zeros((hidden, 4 * hidden))),
            bias: Param::new("bias", Mat::zeros((1, 4 * hidden))),
        }
    }
}

impl Layer for Lstm {
    type Cache = LstmCache;

    fn params(&self) -> Vec<&Param> {
        vec![&self.w_x, &self.w_h, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.w_x, &mut self.w_h, &mut self.bias]
    }

    fn forward(&self, x: &Mat, _phase: &mut Phase<'_>) -> Result<(Mat, LstmCache)> {
        if x.ncols() != self.cin {
            return Err(Error::Config(format!(
                "lstm expects {} input channels, got {}",
                self.cin,
                x.ncols()
            )));
        }
        let t_len = x.nrows();
        let h = self.hidden;
        // Input contributions for all steps at once.
        let mut gates = x.dot(&self.w_x.value);
        gates += &self.bias.value;
        let mut cells = Mat::zeros((t_len, h));
        let mut hidden = Mat::zeros((t_len, h));
        let wh = self.w_h.value.as_standard_layout();
        let wh = wh.as_slice().expect("standard layout");
        let g4 = 4 * h;

        let mut h_prev = vec![0.0; h];
        let mut c_prev = vec![0.0; h];
        for t in 0..t_len {
            let mut row = gates.row_mut(t);
            let z = row.as_slice_mut().expect("rows are contiguous");
            for (k, &hk) in h_prev.iter().enumerate() {
                if hk != 0.0 {
                    for (zj, &w) in z.iter_mut().zip(&wh[k * g4..(k + 1) * g4]) {
                        *zj += hk * w;
                    }
                }
            }
            for j in 0..h {
                let i = sigmoid(z[j]);
                let f = sigmoid(z[h + j]);
                let g = z[2 * h + j].tanh();
                let o = sigmoid(z[3 * h + j]);
                z[j] = i;
                z[h + j] = f;
                z[2 * h + j] = g;
                z[3 * h + j] = o;
                let c = f * c_prev[j] + i * g;
                c_prev[j] = c;
                h_prev[j] = o * c.tanh();
            }
            cells.row_mut(t).assign(&ndarray::aview1(&c_prev));
            hidden.row_mut(t).assign(&ndarray::aview1(&h_prev));
        }
        let cache = LstmCache {
            x: x.clone(),
            gates,
            cells,
            hidden: hidden.clone(),
        };
        Ok((hidden, cache))
    }

    fn backward(&self, cache: &LstmCache, grad_out: &Mat, grads: &mut [Mat]) -> Mat {
        let t_len = cache.x.nrows();
        let h = self.hidden;
        let wh = self.w_h.value.as_standard_layout();
        let wh = wh.as_slice().expect("standard layout");
        let g4 = 4 * h;
        // Gradients of the gate pre-activations for every step.
        let mut dz = Mat::zeros((t_len, g4));
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        for t in (0..t_len).rev() {
            let gate = cache.gates.row(t);
            let c = cache.cells.row(t);
            let mut row = dz.row_mut(t);
            let dzt = row.as_slice_mut().expect("rows are contiguous");
            for j in 0..h {
                let (i, f, g, o) = (gate[j], gate[h + j], gate[2 * h + j], gate[3 * h + j]);
                let tc = c[j].tanh();
                let c_prev = if t > 0 { cache.cells[[t - 1, j]] } else { 0.0 };
                let dh = grad_out[[t, j]] + dh_next[j];
                let d_o = dh * tc;
                let dc = dh * o * (1.0 - tc * tc) + dc_next[j];
                dzt[j] = dc * g * i * (1.0 - i);
                dzt[h + j] = dc * c_prev * f * (1.0 - f);
                dzt[2 * h + j] = dc * i * (1.0 - g * g);
                dzt[3 * h + j] = d_o * o * (1.0 - o);
                dc_next[j] = dc * f;
            }
            for (k, dh) in dh_next.iter_mut().enumerate() {
                *dh = wh[k * g4..(k + 1) * g4]
                    .iter()
                    .zip(dzt.iter())
                    .map(|(w, d)| w * d)
                    .sum();
            }
        }
        grads[0] += &cache.x.t().dot(&dz);
        if t_len > 1 {
            let h_prev = cache.hidden.slice(s![..t_len - 1, ..]);
            grads[1] += &h_prev.t().dot(&dz.slice(s![1.., ..]));
        }
        grads[2] += &dz.sum_axis(Axis(0)).insert_axis(Axis(0));
        dz.dot(&self.w_x.value.t())
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;

    use super::*;

    #[test]
    fn zero_weights_give_zero_hidden() {
        let lstm = Lstm::zeros(3, 4);
        let x = Mat::zeros((6, 3));
        let (h, _) = lstm.forward(&x, &mut Phase::Eval).unwrap();
        assert!(h.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn output_shape_follows_hidden_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let lstm = Lstm::new(11, 128, &mut rng).unwrap();
        let x = Mat::from_elem((300, 11), 0.1);
        let (h, _) = lstm.forward(&x, &mut Phase::Eval).unwrap();
        assert_eq!(h.dim(), (300, 128));
        assert!(h.iter().all(|v| v.abs() < 1.0));
    }

    #[test]
    fn input_width_checked() {
        let lstm = Lstm::zeros(3, 4);
        assert!(matches!(
            lstm.forward(&Mat::zeros((2, 5)), &mut Phase::Eval),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn outputs_are_causal() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let lstm = Lstm::new(2, 3, &mut rng).unwrap();
        let x = Mat::from_shape_fn((10, 2), |(t, c)| (t as f64 * 0.3 + c as f64).sin());
        let (a, _) = lstm.forward(&x, &mut Phase::Eval).unwrap();
        let mut x2 = x.clone();
        x2[[6, 1]] += 1.0;
        let (b, _) = lstm.forward(&x2, &mut Phase::Eval).unwrap();
        assert_eq!(a.slice(s![..6, ..]), b.slice(s![..6, ..]));
        assert_ne!(a.row(6), b.row(6));
    }
}
