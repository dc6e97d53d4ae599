use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::seqnn::{CausalConv1d, Conv1x1, Dropout, Layer, LstmCache, Mat, Param, Phase, Relu};

/// One residual level: two causal dilated convolutions, each followed by
/// ReLU and dropout, plus a skip connection (through a 1×1 convolution when
/// the channel count changes) and a final ReLU.
#[derive(Clone, Debug, PartialEq)]
pub struct TemporalBlock {
    pub conv1: CausalConv1d,
    pub conv2: CausalConv1d,
    pub dropout: Dropout,
    pub downsample: Option<Conv1x1>,
}

#[derive(Clone, Debug)]
pub struct BlockCache {
    conv1: Mat,
    relu1: Mat,
    drop1: Option<Mat>,
    conv2: Mat,
    relu2: Mat,
    drop2: Option<Mat>,
    skip: Option<Mat>,
    out: Mat,
}

impl TemporalBlock {
    pub fn new(
        cin: usize,
        cout: usize,
        kernel: usize,
        dilation: usize,
        dropout: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let conv1 = CausalConv1d::new(cin, cout, kernel, dilation, rng)?;
        let conv2 = CausalConv1d::new(cout, cout, kernel, dilation, rng)?;
        let downsample = if cin != cout {
            Some(Conv1x1::new(cin, cout, rng)?)
        } else {
            None
        };
        Ok(TemporalBlock {
            conv1,
            conv2,
            dropout: Dropout::new(dropout)?,
            downsample,
        })
    }
}

impl Layer for TemporalBlock {
    type Cache = BlockCache;

    fn params(&self) -> Vec<&Param> {
        let mut p = self.conv1.params();
        p.extend(self.conv2.params());
        if let Some(ds) = &self.downsample {
            p.extend(ds.params());
        }
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.conv1.params_mut();
        p.extend(self.conv2.params_mut());
        if let Some(ds) = &mut self.downsample {
            p.extend(ds.params_mut());
        }
        p
    }

    fn num_params(&self) -> usize {
        if self.downsample.is_some() {
            6
        } else {
            4
        }
    }

    fn forward(&self, x: &Mat, phase: &mut Phase<'_>) -> Result<(Mat, BlockCache)> {
        let (h, conv1) = self.conv1.forward(x, phase)?;
        let (h, relu1) = Relu.forward(&h, phase)?;
        let (h, drop1) = self.dropout.forward(&h, phase)?;
        let (h, conv2) = self.conv2.forward(&h, phase)?;
        let (h, relu2) = Relu.forward(&h, phase)?;
        let (mut h, drop2) = self.dropout.forward(&h, phase)?;
        let skip = match &self.downsample {
            Some(ds) => {
                let (r, c) = ds.forward(x, phase)?;
                h += &r;
                Some(c)
            }
            None => {
                h += x;
                None
            }
        };
        let (y, out) = Relu.forward(&h, phase)?;
        Ok((
            y,
            BlockCache {
                conv1,
                relu1,
                drop1,
                conv2,
                relu2,
                drop2,
                skip,
                out,
            },
        ))
    }

    fn backward(&self, c: &BlockCache, grad_out: &Mat, grads: &mut [Mat]) -> Mat {
        let g = Relu.backward(&c.out, grad_out, &mut []);
        let (g_conv, g_skip) = grads.split_at_mut(4);
        let mut gx = match (&self.downsample, &c.skip) {
            (Some(ds), Some(cache)) => ds.backward(cache, &g, g_skip),
            _ => g.clone(),
        };
        let (g1, g2) = g_conv.split_at_mut(2);
        let h = self.dropout.backward(&c.drop2, &g, &mut []);
        let h = Relu.backward(&c.relu2, &h, &mut []);
        let h = self.conv2.backward(&c.conv2, &h, g2);
        let h = self.dropout.backward(&c.drop1, &h, &mut []);
        let h = Relu.backward(&c.relu1, &h, &mut []);
        gx += &self.conv1.backward(&c.conv1, &h, g1);
        gx
    }
}

/// Stack of residual levels with dilation `2^i` at level `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tcn {
    pub blocks: Vec<TemporalBlock>,
}

impl Tcn {
    pub fn new(
        cin: usize,
        hidden: usize,
        levels: usize,
        kernel: usize,
        dropout: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let blocks = (0..levels)
            .map(|i| {
                let c = if i == 0 { cin } else { hidden };
                TemporalBlock::new(c, hidden, kernel, 1 << i, dropout, rng)
            })
            .collect::<Result<_>>()?;
        Ok(Tcn { blocks })
    }
}

impl Layer for Tcn {
    type Cache = Vec<BlockCache>;

    fn params(&self) -> Vec<&Param> {
        self.blocks.iter().flat_map(|b| b.params()).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.blocks.iter_mut().flat_map(|b| b.params_mut()).collect()
    }

    fn num_params(&self) -> usize {
        self.blocks.iter().map(|b| b.num_params()).sum()
    }

    fn forward(&self, x: &Mat, phase: &mut Phase<'_>) -> Result<(Mat, Vec<BlockCache>)> {
        let mut caches = Vec::with_capacity(self.blocks.len());
        let mut h = x.clone();
        for b in &self.blocks {
            let (y, c) = b.forward(&h, phase)?;
            caches.push(c);
            h = y;
        }
        Ok((h, caches))
    }

    fn backward(&self, caches: &Vec<BlockCache>, grad_out: &Mat, grads: &mut [Mat]) -> Mat {
        let mut offsets = Vec::with_capacity(self.blocks.len());
        let mut acc = 0;
        for b in &self.blocks {
            offsets.push(acc);
            acc += b.num_params();
        }
        let mut g = grad_out.clone();
        for (i, b) in self.blocks.iter().enumerate().rev() {
            let slot = &mut grads[offsets[i]..offsets[i] + b.num_params()];
            g = b.backward(&caches[i], &g, slot);
        }
        g
    }
}

/// Sequence-to-sequence LSTM stack.
pub(crate) fn lstm_stack_forward(
    stages: &[crate::seqnn::Lstm],
    x: &Mat,
    phase: &mut Phase<'_>,
) -> Result<(Mat, Vec<LstmCache>)> {
    let mut caches = Vec::with_capacity(stages.len());
    let mut h = x.clone();
    for s in stages {
        let (y, c) = s.forward(&h, phase)?;
        caches.push(c);
        h = y;
    }
    Ok((h, caches))
}

pub(crate) fn lstm_stack_backward(
    stages: &[crate::seqnn::Lstm],
    caches: &[LstmCache],
    grad_out: &Mat,
    grads: &mut [Mat],
) -> Mat {
    let mut g = grad_out.clone();
    for (i, s) in stages.iter().enumerate().rev() {
        g = s.backward(&caches[i], &g, &mut grads[3 * i..3 * i + 3]);
    }
    g
}
