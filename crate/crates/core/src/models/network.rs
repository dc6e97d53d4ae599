use ndarray::{s, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{Arch, ModelConfig};
use super::tcn::{lstm_stack_backward, lstm_stack_forward, BlockCache, Tcn};
use crate::error::{Error, Result};
use crate::seqnn::{
    sigmoid, zero_grads, AvgPoolTime, Conv1x1, Layer, Linear, Lstm, LstmCache, Mat, Mode, Param,
    Phase, Relu, SeqTensor, UpsampleTime,
};

/// Dense layers with ReLU after every layer except, optionally, the last.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseStack {
    pub layers: Vec<Linear>,
    pub relu_last: bool,
}

#[derive(Clone, Debug)]
pub struct DenseCache {
    inputs: Vec<Mat>,
    relus: Vec<Option<Mat>>,
}

impl DenseStack {
    fn new(widths: &[usize], relu_last: bool, rng: &mut ChaCha8Rng) -> Result<Self> {
        let layers = widths
            .windows(2)
            .map(|w| Linear::new(w[0], w[1], rng))
            .collect::<Result<_>>()?;
        Ok(DenseStack { layers, relu_last })
    }

    fn params(&self) -> Vec<&Param> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    fn forward(&self, x: &Mat, phase: &mut Phase<'_>) -> Result<(Mat, DenseCache)> {
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut relus = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for (i, l) in self.layers.iter().enumerate() {
            let (y, c) = l.forward(&h, phase)?;
            inputs.push(c);
            if i < last || self.relu_last {
                let (y, r) = Relu.forward(&y, phase)?;
                relus.push(Some(r));
                h = y;
            } else {
                relus.push(None);
                h = y;
            }
        }
        Ok((h, DenseCache { inputs, relus }))
    }

    fn backward(&self, c: &DenseCache, grad_out: &Mat, grads: &mut [Mat]) -> Mat {
        let mut g = grad_out.clone();
        for (i, l) in self.layers.iter().enumerate().rev() {
            if let Some(r) = &c.relus[i] {
                g = Relu.backward(r, &g, &mut []);
            }
            g = l.backward(&c.inputs[i], &g, &mut grads[2 * i..2 * i + 2]);
        }
        g
    }
}

/// The six architectures. Field order is the parameter order used for
/// gradients, optimizer state and checkpoints.
#[derive(Clone, Debug, PartialEq)]
pub enum Network {
    TcnAe {
        tcn1: Tcn,
        conv1: Conv1x1,
        pool: AvgPoolTime,
        upsample: UpsampleTime,
        tcn2: Tcn,
        conv2: Conv1x1,
    },
    LstmAe {
        stages: Vec<Lstm>,
    },
    FfAe {
        dense: DenseStack,
    },
    TcnBc {
        tcn: Tcn,
        head: Linear,
    },
    LstmBc {
        stages: Vec<Lstm>,
        head: Linear,
    },
    FfBc {
        dense: DenseStack,
        head: Linear,
    },
}

/// Values recorded by a forward pass, consumed by the matching backward.
#[derive(Clone, Debug)]
pub enum Trace {
    TcnAe {
        tcn1: Vec<BlockCache>,
        conv1: Mat,
        tcn2: Vec<BlockCache>,
        conv2: Mat,
    },
    LstmAe {
        stages: Vec<LstmCache>,
    },
    FfAe {
        dense: DenseCache,
        steps: usize,
    },
    Classifier {
        body: ClassifierBody,
        head: Mat,
        prob: f64,
        steps: usize,
    },
}

#[derive(Clone, Debug)]
pub enum ClassifierBody {
    Tcn(Vec<BlockCache>),
    Lstm(Vec<LstmCache>),
    Dense(DenseCache),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Output {
    /// Autoencoder reconstruction, same shape as the input.
    Sequence(Mat),
    /// Classifier probability of disengagement.
    Probability(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub enum OutputGrad {
    Sequence(Mat),
    Probability(f64),
}

fn flatten(x: &Mat) -> Mat {
    let n = x.len();
    x.to_shape((1, n)).expect("contiguous").to_owned()
}

fn unflatten(g: &Mat, steps: usize) -> Mat {
    let n = g.len() / steps;
    g.to_shape((steps, n)).expect("contiguous").to_owned()
}

/// A built architecture together with its configuration and mode.
#[derive(Clone, Debug)]
pub struct Model {
    config: ModelConfig,
    net: Network,
    mode: Mode,
    last_trace: Option<Trace>,
}

impl Model {
    /// Builds the architecture named by `config.arch` with parameters drawn
    /// from a generator seeded by `seed`.
    pub fn build(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let rng = &mut ChaCha8Rng::seed_from_u64(seed);
        let c = &config;
        let encoder_widths = |input: usize| vec![input, 2 * c.bottleneck, c.bottleneck];
        let dense_input = if c.per_frame { c.n } else { c.t * c.n };
        let net = match c.arch {
            Arch::TcnAe => Network::TcnAe {
                tcn1: Tcn::new(c.n, c.hidden, c.levels, c.kernel, c.dropout, rng)?,
                conv1: Conv1x1::new(c.hidden, c.n, rng)?,
                pool: AvgPoolTime::new(c.pool)?,
                upsample: UpsampleTime::new(c.pool, c.upsample)?,
                tcn2: Tcn::new(c.n, c.hidden, c.levels, c.kernel, c.dropout, rng)?,
                conv2: Conv1x1::new(c.hidden, c.n, rng)?,
            },
            Arch::LstmAe => Network::LstmAe {
                stages: vec![
                    Lstm::new(c.n, c.hidden, rng)?,
                    Lstm::new(c.hidden, c.bottleneck, rng)?,
                    Lstm::new(c.bottleneck, c.hidden, rng)?,
                    Lstm::new(c.hidden, c.n, rng)?,
                ],
            },
            Arch::FfAe => {
                let mut widths = encoder_widths(dense_input);
                widths.extend([2 * c.bottleneck, dense_input]);
                Network::FfAe {
                    dense: DenseStack::new(&widths, false, rng)?,
                }
            }
            Arch::TcnBc => Network::TcnBc {
                tcn: Tcn::new(c.n, c.hidden, c.levels, c.kernel, c.dropout, rng)?,
                head: Linear::new(c.hidden, 1, rng)?,
            },
            Arch::LstmBc => Network::LstmBc {
                stages: vec![
                    Lstm::new(c.n, c.hidden, rng)?,
                    Lstm::new(c.hidden, c.bottleneck, rng)?,
                ],
                head: Linear::new(c.bottleneck, 1, rng)?,
            },
            Arch::FfBc => Network::FfBc {
                dense: DenseStack::new(&encoder_widths(dense_input), true, rng)?,
                head: Linear::new(c.bottleneck, 1, rng)?,
            },
        };
        Ok(Model {
            config,
            net,
            mode: Mode::Train,
            last_trace: None,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut Network {
        &mut self.net
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn is_autoencoder(&self) -> bool {
        self.config.arch.is_autoencoder()
    }

    pub fn params(&self) -> Vec<&Param> {
        match &self.net {
            Network::TcnAe {
                tcn1,
                conv1,
                tcn2,
                conv2,
                ..
            } => {
                let mut p = tcn1.params();
                p.extend(conv1.params());
                p.extend(tcn2.params());
                p.extend(conv2.params());
                p
            }
            Network::LstmAe { stages } => stages.iter().flat_map(|s| s.params()).collect(),
            Network::FfAe { dense } => dense.params(),
            Network::TcnBc { tcn, head } => {
                let mut p = tcn.params();
                p.extend(head.params());
                p
            }
            Network::LstmBc { stages, head } => {
                let mut p: Vec<_> = stages.iter().flat_map(|s| s.params()).collect();
                p.extend(head.params());
                p
            }
            Network::FfBc { dense, head } => {
                let mut p = dense.params();
                p.extend(head.params());
                p
            }
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        match &mut self.net {
            Network::TcnAe {
                tcn1,
                conv1,
                tcn2,
                conv2,
                ..
            } => {
                let mut p = tcn1.params_mut();
                p.extend(conv1.params_mut());
                p.extend(tcn2.params_mut());
                p.extend(conv2.params_mut());
                p
            }
            Network::LstmAe { stages } => {
                stages.iter_mut().flat_map(|s| s.params_mut()).collect()
            }
            Network::FfAe { dense } => dense.params_mut(),
            Network::TcnBc { tcn, head } => {
                let mut p = tcn.params_mut();
                p.extend(head.params_mut());
                p
            }
            Network::LstmBc { stages, head } => {
                let mut p: Vec<_> = stages.iter_mut().flat_map(|s| s.params_mut()).collect();
                p.extend(head.params_mut());
                p
            }
            Network::FfBc { dense, head } => {
                let mut p = dense.params_mut();
                p.extend(head.params_mut());
                p
            }
        }
    }

    /// Total number of trainable scalars.
    pub fn num_weights(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Zeroed buffers in parameter order, for [`Model::backward_trace`].
    pub fn zero_grads(&self) -> Vec<Mat> {
        zero_grads(&self.params())
    }

    pub fn zero_param_grads(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn check_input(&self, x: &Mat) -> Result<()> {
        let want = (self.config.t, self.config.n);
        if x.dim() != want {
            return Err(Error::Input(format!(
                "expected a {}x{} sequence, got {}x{}",
                want.0,
                want.1,
                x.nrows(),
                x.ncols()
            )));
        }
        Ok(())
    }

    /// Forward pass returning the trace needed for backpropagation.
    pub fn forward_trace(&self, x: &Mat, phase: &mut Phase<'_>) -> Result<(Output, Trace)> {
        self.check_input(x)?;
        let steps = x.nrows();
        match &self.net {
            Network::TcnAe {
                tcn1,
                conv1,
                pool,
                upsample,
                tcn2,
                conv2,
            } => {
                let (h, c_tcn1) = tcn1.forward(x, phase)?;
                let (h, c_conv1) = conv1.forward(&h, phase)?;
                let (h, ()) = pool.forward(&h, phase)?;
                let (h, ()) = upsample.forward(&h, phase)?;
                let (h, c_tcn2) = tcn2.forward(&h, phase)?;
                let (y, c_conv2) = conv2.forward(&h, phase)?;
                Ok((
                    Output::Sequence(y),
                    Trace::TcnAe {
                        tcn1: c_tcn1,
                        conv1: c_conv1,
                        tcn2: c_tcn2,
                        conv2: c_conv2,
                    },
                ))
            }
            Network::LstmAe { stages } => {
                let (y, caches) = lstm_stack_forward(stages, x, phase)?;
                Ok((Output::Sequence(y), Trace::LstmAe { stages: caches }))
            }
            Network::FfAe { dense } => {
                let input = if self.config.per_frame { x.clone() } else { flatten(x) };
                let (y, c) = dense.forward(&input, phase)?;
                let y = if self.config.per_frame { y } else { unflatten(&y, steps) };
                Ok((Output::Sequence(y), Trace::FfAe { dense: c, steps }))
            }
            Network::TcnBc { tcn, head } => {
                let (h, c) = tcn.forward(x, phase)?;
                let last = h.slice(s![steps - 1..steps, ..]).to_owned();
                self.classify(head, &last, ClassifierBody::Tcn(c), steps, phase)
            }
            Network::LstmBc { stages, head } => {
                let (h, c) = lstm_stack_forward(stages, x, phase)?;
                let last = h.slice(s![steps - 1..steps, ..]).to_owned();
                self.classify(head, &last, ClassifierBody::Lstm(c), steps, phase)
            }
            Network::FfBc { dense, head } => {
                if self.config.per_frame {
                    let (h, c) = dense.forward(x, phase)?;
                    let pooled = h.mean_axis(Axis(0)).expect("nonempty").insert_axis(Axis(0));
                    self.classify(head, &pooled, ClassifierBody::Dense(c), steps, phase)
                } else {
                    let (h, c) = dense.forward(&flatten(x), phase)?;
                    self.classify(head, &h, ClassifierBody::Dense(c), steps, phase)
                }
            }
        }
    }

    fn classify(
        &self,
        head: &Linear,
        features: &Mat,
        body: ClassifierBody,
        steps: usize,
        phase: &mut Phase<'_>,
    ) -> Result<(Output, Trace)> {
        let (logit, head_cache) = head.forward(features, phase)?;
        let prob = sigmoid(logit[[0, 0]]);
        Ok((
            Output::Probability(prob),
            Trace::Classifier {
                body,
                head: head_cache,
                prob,
                steps,
            },
        ))
    }

    /// Backpropagates `grad` through a recorded trace, accumulating parameter
    /// gradients into `grads` (parameter order) and returning the gradient
    /// with respect to the input sequence.
    pub fn backward_trace(&self, trace: &Trace, grad: &OutputGrad, grads: &mut [Mat]) -> Result<Mat> {
        let total = self.params().len();
        if grads.len() != total {
            return Err(Error::Usage(format!(
                "expected {total} gradient buffers, got {}",
                grads.len()
            )));
        }
        match (&self.net, trace, grad) {
            (
                Network::TcnAe {
                    tcn1,
                    conv1,
                    pool,
                    upsample,
                    tcn2,
                    conv2,
                },
                Trace::TcnAe {
                    tcn1: c_tcn1,
                    conv1: c_conv1,
                    tcn2: c_tcn2,
                    conv2: c_conv2,
                },
                OutputGrad::Sequence(g),
            ) => {
                let n1 = tcn1.num_params();
                let n2 = tcn2.num_params();
                let (g_tcn1, rest) = grads.split_at_mut(n1);
                let (g_conv1, rest) = rest.split_at_mut(2);
                let (g_tcn2, g_conv2) = rest.split_at_mut(n2);
                let h = conv2.backward(c_conv2, g, g_conv2);
                let h = tcn2.backward(c_tcn2, &h, g_tcn2);
                let h = upsample.backward(&(), &h, &mut []);
                let h = pool.backward(&(), &h, &mut []);
                let h = conv1.backward(c_conv1, &h, g_conv1);
                Ok(tcn1.backward(c_tcn1, &h, g_tcn1))
            }
            (Network::LstmAe { stages }, Trace::LstmAe { stages: caches }, OutputGrad::Sequence(g)) => {
                Ok(lstm_stack_backward(stages, caches, g, grads))
            }
            (Network::FfAe { dense }, Trace::FfAe { dense: c, steps }, OutputGrad::Sequence(g)) => {
                if self.config.per_frame {
                    Ok(dense.backward(c, g, grads))
                } else {
                    let gx = dense.backward(c, &flatten(g), grads);
                    Ok(unflatten(&gx, *steps))
                }
            }
            (
                net,
                Trace::Classifier {
                    body,
                    head: head_cache,
                    prob,
                    steps,
                },
                OutputGrad::Probability(dp),
            ) => {
                let dlogit = Mat::from_elem((1, 1), dp * prob * (1.0 - prob));
                let head_slot = total - 2;
                let (g_body, g_head) = grads.split_at_mut(head_slot);
                let steps = *steps;
                match (net, body) {
                    (Network::TcnBc { tcn, head }, ClassifierBody::Tcn(c)) => {
                        let gh = head.backward(head_cache, &dlogit, g_head);
                        let mut full = Mat::zeros((steps, tcn_width(tcn)));
                        full.row_mut(steps - 1).assign(&gh.row(0));
                        Ok(tcn.backward(c, &full, g_body))
                    }
                    (Network::LstmBc { stages, head }, ClassifierBody::Lstm(c)) => {
                        let gh = head.backward(head_cache, &dlogit, g_head);
                        let width = stages.last().expect("two stages").hidden;
                        let mut full = Mat::zeros((steps, width));
                        full.row_mut(steps - 1).assign(&gh.row(0));
                        Ok(lstm_stack_backward(stages, c, &full, g_body))
                    }
                    (Network::FfBc { dense, head }, ClassifierBody::Dense(c)) => {
                        let gh = head.backward(head_cache, &dlogit, g_head);
                        if self.config.per_frame {
                            let rows = Mat::from_shape_fn((steps, gh.ncols()), |(_, j)| {
                                gh[[0, j]] / steps as f64
                            });
                            Ok(dense.backward(c, &rows, g_body))
                        } else {
                            let gx = dense.backward(c, &gh, g_body);
                            Ok(unflatten(&gx, steps))
                        }
                    }
                    _ => Err(Error::Usage("trace does not belong to this model".into())),
                }
            }
            _ => Err(Error::Usage(
                "trace or gradient kind does not match this model".into(),
            )),
        }
    }

    /// Stateful forward: records the trace for a later [`Model::backward`].
    pub fn forward(&mut self, x: &Mat, phase: &mut Phase<'_>) -> Result<Output> {
        let (out, trace) = self.forward_trace(x, phase)?;
        self.last_trace = Some(trace);
        Ok(out)
    }

    /// Backpropagates through the trace recorded by the last
    /// [`Model::forward`], adding into each parameter's `grad`.
    pub fn backward(&mut self, grad: &OutputGrad) -> Result<Mat> {
        let trace = self
            .last_trace
            .take()
            .ok_or_else(|| Error::Usage("backward called without a recorded forward".into()))?;
        let mut grads = self.zero_grads();
        let gx = self.backward_trace(&trace, grad, &mut grads)?;
        for (p, g) in self.params_mut().into_iter().zip(&grads) {
            p.grad += g;
        }
        Ok(gx)
    }

    /// Deterministic reconstruction of `x` (autoencoders only).
    pub fn forward_ae(&self, x: &SeqTensor) -> Result<SeqTensor> {
        if !self.is_autoencoder() {
            return Err(Error::Usage(format!("{} is not an autoencoder", self.config.arch)));
        }
        match self.forward_trace(x, &mut Phase::Eval)?.0 {
            Output::Sequence(y) => SeqTensor::new(y),
            Output::Probability(_) => unreachable!("autoencoder output"),
        }
    }

    /// Deterministic disengagement probability (classifiers only).
    pub fn forward_bc(&self, x: &SeqTensor) -> Result<f64> {
        if self.is_autoencoder() {
            return Err(Error::Usage(format!("{} is not a classifier", self.config.arch)));
        }
        match self.forward_trace(x, &mut Phase::Eval)?.0 {
            Output::Probability(p) => Ok(p),
            Output::Sequence(_) => unreachable!("classifier output"),
        }
    }
}

fn tcn_width(tcn: &Tcn) -> usize {
    tcn.blocks.last().map_or(0, |b| b.conv2.cout)
}

/// Anomaly score of a reconstruction: the mean squared error.
pub fn reconstruction_error(x: &Mat, x_hat: &Mat) -> Result<f64> {
    crate::seqnn::mse(x, x_hat)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(arch: Arch) -> ModelConfig {
        ModelConfig {
            arch,
            n: 3,
            t: 16,
            levels: 2,
            hidden: 4,
            kernel: 3,
            dropout: 0.0,
            pool: 4,
            bottleneck: 5,
            upsample: Default::default(),
            per_frame: false,
        }
    }

    fn input(t: usize, n: usize) -> SeqTensor {
        SeqTensor::new(Mat::from_shape_fn((t, n), |(i, j)| ((i * 7 + j * 3) as f64).sin()))
            .unwrap()
    }

    #[test]
    fn every_arch_builds_and_keeps_shapes() {
        for arch in Arch::ALL {
            for per_frame in [false, true] {
                let cfg = ModelConfig {
                    per_frame,
                    ..small(arch)
                };
                let m = Model::build(cfg, 1).unwrap();
                let x = input(16, 3);
                if arch.is_autoencoder() {
                    assert_eq!(m.forward_ae(&x).unwrap().dim(), (16, 3), "{arch}");
                } else {
                    let p = m.forward_bc(&x).unwrap();
                    assert!(p > 0.0 && p < 1.0, "{arch}: {p}");
                }
            }
        }
    }

    #[test]
    fn full_ff_widths() {
        let m = Model::build(ModelConfig::full(Arch::FfAe, 11, 300), 0).unwrap();
        let Network::FfAe { dense } = m.network() else { panic!() };
        let widths: Vec<_> = dense.layers.iter().map(|l| (l.din, l.dout)).collect();
        assert_eq!(widths, vec![(3300, 128), (128, 64), (64, 128), (128, 3300)]);
    }

    #[test]
    fn full_lstm_ae_has_four_stages() {
        let m = Model::build(ModelConfig::full(Arch::LstmAe, 37, 20), 0).unwrap();
        let Network::LstmAe { stages } = m.network() else { panic!() };
        let dims: Vec<_> = stages.iter().map(|s| (s.cin, s.hidden)).collect();
        assert_eq!(dims, vec![(37, 128), (128, 64), (64, 128), (128, 37)]);
    }

    #[test]
    fn shape_mismatch_is_input_error() {
        let m = Model::build(small(Arch::TcnAe), 0).unwrap();
        assert!(matches!(m.forward_ae(&input(12, 3)), Err(Error::Input(_))));
        assert!(matches!(m.forward_ae(&input(16, 4)), Err(Error::Input(_))));
        assert!(matches!(m.forward_bc(&input(16, 3)), Err(Error::Usage(_))));
    }

    #[test]
    fn zero_weights_give_constant_output() {
        let mut ae = Model::build(small(Arch::TcnAe), 3).unwrap();
        for p in ae.params_mut() {
            p.value.fill(0.0);
        }
        let a = ae.forward_ae(&input(16, 3)).unwrap();
        let b = ae
            .forward_ae(&SeqTensor::new(Mat::from_elem((16, 3), 9.0)).unwrap())
            .unwrap();
        assert_eq!(a, b);

        let mut bc = Model::build(small(Arch::TcnBc), 3).unwrap();
        for p in bc.params_mut() {
            p.value.fill(0.0);
        }
        assert_eq!(bc.forward_bc(&input(16, 3)).unwrap(), 0.5);
    }

    #[test]
    fn backward_requires_forward() {
        let mut m = Model::build(small(Arch::TcnAe), 0).unwrap();
        let err = m
            .backward(&OutputGrad::Sequence(Mat::zeros((16, 3))))
            .unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
        m.forward(&input(16, 3), &mut Phase::Eval).unwrap();
        m.backward(&OutputGrad::Sequence(Mat::zeros((16, 3)))).unwrap();
        // A zero upstream gradient leaves every gradient at zero.
        assert!(m.params().iter().all(|p| p.grad.iter().all(|&g| g == 0.0)));
        assert!(m.backward(&OutputGrad::Sequence(Mat::zeros((16, 3)))).is_err());
    }

    #[test]
    fn tcn_encoder_and_decoder_are_independent() {
        let m = Model::build(small(Arch::TcnAe), 4).unwrap();
        let Network::TcnAe { tcn1, tcn2, .. } = m.network() else { panic!() };
        assert_ne!(tcn1, tcn2);
        let p1 = tcn1.params();
        let p2 = tcn2.params();
        assert_eq!(p1.len(), p2.len());
        for (a, b) in p1.iter().zip(&p2) {
            assert_eq!(a.value.dim(), b.value.dim());
            assert!(!std::ptr::eq(a.value.as_ptr(), b.value.as_ptr()));
        }
    }

    #[test]
    fn reconstruction_error_symmetric() {
        let a = input(4, 2);
        let b = SeqTensor::new(a.as_mat() * 2.0).unwrap();
        assert_eq!(reconstruction_error(&a, &a).unwrap(), 0.0);
        assert_eq!(
            reconstruction_error(&a, &b).unwrap(),
            reconstruction_error(&b, &a).unwrap()
        );
    }
}
