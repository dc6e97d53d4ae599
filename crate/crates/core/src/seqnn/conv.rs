use ndarray::{s, Axis};
use rand_chacha::ChaCha8Rng;

use super::tensor::{Layer, Mat, Param, Phase};
use crate::error::{Error, Result};

/// Causal dilated 1-D convolution over the time axis.
///
/// `output[t] = bias + Σ_j input[t - j·dilation] · W_j` for taps
/// `j = 0..kernel`, with rows before the start of the sequence treated as
/// zero. The output has the same length as the input, and row `t` never
/// depends on input rows after `t`.
///
/// The weight is stored as a `(kernel·cin) × cout` matrix whose `j`-th row
/// block is the tap applied at lag `j·dilation`.
#[derive(Clone, Debug, PartialEq)]
pub struct CausalConv1d {
    pub kernel: usize,
    pub dilation: usize,
    pub cin: usize,
    pub cout: usize,
    pub weight: Param,
    pub bias: Param,
}

impl CausalConv1d {
    pub fn new(
        cin: usize,
        cout: usize,
        kernel: usize,
        dilation: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if kernel == 0 || dilation == 0 || cin == 0 || cout == 0 {
            return Err(Error::Config(format!(
                "conv needs positive sizes, got cin={cin} cout={cout} k={kernel} q={dilation}"
            )));
        }
        let bound = 1.0 / ((cin * kernel) as f64).sqrt();
        Ok(CausalConv1d {
            kernel,
            dilation,
            cin,
            cout,
            weight: Param::uniform("weight", kernel * cin, cout, bound, rng),
            bias: Param::uniform("bias", 1, cout, bound, rng),
        })
    }

    /// Builds a convolution from explicit taps, `taps[j]` being `cin × cout`.
    pub fn from_taps(taps: &[Mat], bias: Mat, dilation: usize) -> Result<Self> {
        let Some(first) = taps.first() else {
            return Err(Error::Config("at least one tap required".into()));
        };
        let (cin, cout) = first.dim();
        if taps.iter().any(|t| t.dim() != (cin, cout)) || bias.dim() != (1, cout) {
            return Err(Error::Config("inconsistent tap or bias shapes".into()));
        }
        if dilation == 0 {
            return Err(Error::Config("dilation must be positive".into()));
        }
        let views: Vec<_> = taps.iter().map(|t| t.view()).collect();
        let weight = ndarray::concatenate(Axis(0), &views).expect("tap shapes checked");
        Ok(CausalConv1d {
            kernel: taps.len(),
            dilation,
            cin,
            cout,
            weight: Param::new("weight", weight),
            bias: Param::new("bias", bias),
        })
    }

    fn tap(&self, j: usize) -> ndarray::ArrayView2<'_, f64> {
        self.weight
            .value
            .slice(s![j * self.cin..(j + 1) * self.cin, ..])
    }
}

impl Layer for CausalConv1d {
    type Cache = Mat;

    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }

    fn forward(&self, x: &Mat, _phase: &mut Phase<'_>) -> Result<(Mat, Mat)> {
        if x.ncols() != self.cin {
            return Err(Error::Config(format!(
                "conv expects {} input channels, got {}",
                self.cin,
                x.ncols()
            )));
        }
        let t = x.nrows();
        let mut out = Mat::zeros((t, self.cout));
        out += &self.bias.value;
        for j in 0..self.kernel {
            let lag = j * self.dilation;
            if lag >= t {
                break;
            }
            let w = self.tap(j);
            let contrib = x.slice(s![..t - lag, ..]).dot(&w);
            let mut dst = out.slice_mut(s![lag.., ..]);
            dst += &contrib;
        }
        Ok((out, x.clone()))
    }

    fn backward(&self, x: &Mat, grad_out: &Mat, grads: &mut [Mat]) -> Mat {
        let t = x.nrows();
        let mut grad_in = Mat::zeros((t, self.cin));
        let (gw, rest) = grads.split_at_mut(1);
        let gw = &mut gw[0];
        let gb = &mut rest[0];
        *gb += &grad_out.sum_axis(Axis(0)).insert_axis(Axis(0));
        for j in 0..self.kernel {
            let lag = j * self.dilation;
            if lag >= t {
                break;
            }
            let g = grad_out.slice(s![lag.., ..]);
            let xs = x.slice(s![..t - lag, ..]);
            let mut gw_j = gw.slice_mut(s![j * self.cin..(j + 1) * self.cin, ..]);
            gw_j += &xs.t().dot(&g);
            let w = self.tap(j);
            let mut gi = grad_in.slice_mut(s![..t - lag, ..]);
            gi += &g.dot(&w.t());
        }
        grad_in
    }
}

/// Per-time-step affine map `x·W + b`, shared by 1×1 convolutions and
/// fully connected layers.
fn affine_forward(x: &Mat, w: &Mat, b: &Mat) -> Mat {
    let mut out = x.dot(w);
    out += b;
    out
}

fn affine_backward(x: &Mat, w: &Mat, grad_out: &Mat, grads: &mut [Mat]) -> Mat {
    grads[0] += &x.t().dot(grad_out);
    grads[1] += &grad_out.sum_axis(Axis(0)).insert_axis(Axis(0));
    grad_out.dot(&w.t())
}

/// 1×1 convolution: a channel-mixing affine map applied independently at
/// each time step.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv1x1 {
    pub cin: usize,
    pub cout: usize,
    pub weight: Param,
    pub bias: Param,
}

impl Conv1x1 {
    pub fn new(cin: usize, cout: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        if cin == 0 || cout == 0 {
            return Err(Error::Config(format!(
                "1x1 conv needs positive sizes, got {cin}->{cout}"
            )));
        }
        let bound = 1.0 / (cin as f64).sqrt();
        Ok(Conv1x1 {
            cin,
            cout,
            weight: Param::uniform("weight", cin, cout, bound, rng),
            bias: Param::uniform("bias", 1, cout, bound, rng),
        })
    }

    pub fn from_weights(weight: Mat, bias: Mat) -> Result<Self> {
        let (cin, cout) = weight.dim();
        if bias.dim() != (1, cout) {
            return Err(Error::Config("bias must be 1 x cout".into()));
        }
        Ok(Conv1x1 {
            cin,
            cout,
            weight: Param::new("weight", weight),
            bias: Param::new("bias", bias),
        })
    }
}

impl Layer for Conv1x1 {
    type Cache = Mat;

    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }

    fn forward(&self, x: &Mat, _phase: &mut Phase<'_>) -> Result<(Mat, Mat)> {
        if x.ncols() != self.cin {
            return Err(Error::Config(format!(
                "1x1 conv expects {} input channels, got {}",
                self.cin,
                x.ncols()
            )));
        }
        Ok((affine_forward(x, &self.weight.value, &self.bias.value), x.clone()))
    }

    fn backward(&self, x: &Mat, grad_out: &Mat, grads: &mut [Mat]) -> Mat {
        affine_backward(x, &self.weight.value, grad_out, grads)
    }
}

/// Fully connected layer. Inputs are `N × Din` row batches; a single vector
/// is a `1 × Din` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub din: usize,
    pub dout: usize,
    pub weight: Param,
    pub bias: Param,
}

impl Linear {
    pub fn new(din: usize, dout: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        if din == 0 || dout == 0 {
            return Err(Error::Config(format!(
                "linear layer needs positive sizes, got {din}->{dout}"
            )));
        }
        let bound = 1.0 / (din as f64).sqrt();
        Ok(Linear {
            din,
            dout,
            weight: Param::uniform("weight", din, dout, bound, rng),
            bias: Param::uniform("bias", 1, dout, bound, rng),
        })
    }

    pub fn from_weights(weight: Mat, bias: Mat) -> Result<Self> {
        let (din, dout) = weight.dim();
        if bias.dim() != (1, dout) {
            return Err(Error::Config("bias must be 1 x dout".into()));
        }
        Ok(Linear {
            din,
            dout,
            weight: Param::new("weight", weight),
            bias: Param::new("bias", bias),
        })
    }
}

impl Layer for Linear {
    type Cache = Mat;

    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }

    fn forward(&self, x: &Mat, _phase: &mut Phase<'_>) -> Result<(Mat, Mat)> {
        if x.ncols() != self.din {
            return Err(Error::Config(format!(
                "linear layer expects {} inputs, got {}",
                self.din,
                x.ncols()
            )));
        }
        Ok((affine_forward(x, &self.weight.value, &self.bias.value), x.clone()))
    }

    fn backward(&self, x: &Mat, grad_out: &Mat, grads: &mut [Mat]) -> Mat {
        affine_backward(x, &self.weight.value, grad_out, grads)
    }
}
