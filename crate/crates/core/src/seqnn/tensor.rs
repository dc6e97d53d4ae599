use std::ops::Deref;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Row-major time × channel matrix used between layers.
pub type Mat = Array2<f64>;

/// A validated `T × C` sequence: at least one step and one channel, all
/// values finite.
#[derive(Clone, Debug, PartialEq)]
pub struct SeqTensor(Mat);

impl SeqTensor {
    pub fn new(data: Mat) -> Result<Self> {
        let (t, c) = data.dim();
        if t == 0 || c == 0 {
            return Err(Error::Input(format!("empty sequence tensor {t}x{c}")));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!(
                "non-finite value at row {}, column {}",
                pos / c,
                pos % c
            )));
        }
        Ok(SeqTensor(data))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let t = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != c) {
            return Err(Error::Input("ragged rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let data = Array2::from_shape_vec((t, c), flat)
            .map_err(|e| Error::Input(e.to_string()))?;
        Self::new(data)
    }

    pub fn steps(&self) -> usize {
        self.0.nrows()
    }

    pub fn channels(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_mat(&self) -> &Mat {
        &self.0
    }

    pub fn into_inner(self) -> Mat {
        self.0
    }
}

impl Deref for SeqTensor {
    type Target = Mat;

    fn deref(&self) -> &Mat {
        &self.0
    }
}

/// One named trainable array with its gradient buffer.
///
/// Vectors (biases) are stored as `1 × C` matrices so every parameter has
/// the same rank.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: &'static str,
    pub value: Mat,
    pub grad: Mat,
}

impl Param {
    pub fn new(name: &'static str, value: Mat) -> Self {
        let grad = Mat::zeros(value.raw_dim());
        Param { name, value, grad }
    }

    /// Uniform in `[-bound, bound]`.
    pub fn uniform(
        name: &'static str,
        rows: usize,
        cols: usize,
        bound: f64,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let value = Mat::from_shape_simple_fn((rows, cols), || rng.gen_range(-bound..=bound));
        Self::new(name, value)
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

/// Zeroed gradient buffers matching a parameter list.
pub fn zero_grads(params: &[&Param]) -> Vec<Mat> {
    params.iter().map(|p| Mat::zeros(p.value.raw_dim())).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Eval,
}

/// Per-forward-pass context. Training carries the RNG that drives dropout.
pub enum Phase<'a> {
    Eval,
    Train(&'a mut ChaCha8Rng),
}

impl Phase<'_> {
    pub fn is_train(&self) -> bool {
        matches!(self, Phase::Train(_))
    }
}

/// A differentiable layer over `T × C` matrices.
///
/// `forward` returns the output together with whatever the layer needs to
/// run `backward`; gradients are accumulated into caller-owned buffers laid
/// out in `params()` order, so a layer can be shared read-only while many
/// samples are differentiated.
pub trait Layer {
    type Cache;

    fn params(&self) -> Vec<&Param>;
    fn params_mut(&mut self) -> Vec<&mut Param>;

    fn num_params(&self) -> usize {
        self.params().len()
    }

    fn forward(&self, x: &Mat, phase: &mut Phase<'_>) -> Result<(Mat, Self::Cache)>;

    /// Accumulates parameter gradients into `grads` and returns the gradient
    /// with respect to the layer input.
    fn backward(&self, cache: &Self::Cache, grad_out: &Mat, grads: &mut [Mat]) -> Mat;
}
