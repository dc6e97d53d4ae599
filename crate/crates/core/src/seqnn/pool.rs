use ndarray::s;
use serde::{Deserialize, Serialize};

use super::tensor::{Layer, Mat, Param, Phase};
use crate::error::{Error, Result};

/// Non-overlapping average pooling along time: row `i` of the output is the
/// mean of input rows `[i·d, i·d + d)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AvgPoolTime {
    pub factor: usize,
}

impl AvgPoolTime {
    pub fn new(factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::Config("pool factor must be positive".into()));
        }
        Ok(AvgPoolTime { factor })
    }
}

impl Layer for AvgPoolTime {
    type Cache = ();

    fn params(&self) -> Vec<&Param> {
        Vec::new()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        Vec::new()
    }

    fn forward(&self, x: &Mat, _phase: &mut Phase<'_>) -> Result<(Mat, ())> {
        let (t, c) = x.dim();
        let d = self.factor;
        if t % d != 0 {
            return Err(Error::Input(format!(
                "sequence length {t} is not divisible by pool factor {d}"
            )));
        }
        let mut out = Mat::zeros((t / d, c));
        for (i, mut row) in out.rows_mut().into_iter().enumerate() {
            let block = x.slice(s![i * d..(i + 1) * d, ..]);
            for r in block.rows() {
                row += &r;
            }
            row /= d as f64;
        }
        Ok((out, ()))
    }

    fn backward(&self, _cache: &(), grad_out: &Mat, _grads: &mut [Mat]) -> Mat {
        let d = self.factor;
        let (n, c) = grad_out.dim();
        let mut grad_in = Mat::zeros((n * d, c));
        for (t, mut row) in grad_in.rows_mut().into_iter().enumerate() {
            row.assign(&grad_out.row(t / d));
            row /= d as f64;
        }
        grad_in
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpsampleMode {
    /// Each row repeated `factor` times.
    #[default]
    Nearest,
    /// Linear interpolation between neighbouring rows with half-step
    /// alignment, edges clamped.
    Linear,
}

impl std::str::FromStr for UpsampleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nearest" => Ok(UpsampleMode::Nearest),
            "linear" => Ok(UpsampleMode::Linear),
            other => Err(Error::Config(format!("unknown upsampling mode '{other}'"))),
        }
    }
}

/// Restores the time resolution removed by [`AvgPoolTime`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UpsampleTime {
    pub factor: usize,
    pub mode: UpsampleMode,
}

impl UpsampleTime {
    pub fn new(factor: usize, mode: UpsampleMode) -> Result<Self> {
        if factor == 0 {
            return Err(Error::Config("upsample factor must be positive".into()));
        }
        Ok(UpsampleTime { factor, mode })
    }

    /// Source rows and weights feeding output row `t` (linear mode).
    fn linear_taps(&self, t: usize, len: usize) -> (usize, usize, f64) {
        let pos = (t as f64 + 0.5) / self.factor as f64 - 0.5;
        let pos = pos.clamp(0.0, (len - 1) as f64);
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(len - 1);
        (lo, hi, pos - lo as f64)
    }
}

impl Layer for UpsampleTime {
    type Cache = ();

    fn params(&self) -> Vec<&Param> {
        Vec::new()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        Vec::new()
    }

    fn forward(&self, x: &Mat, _phase: &mut Phase<'_>) -> Result<(Mat, ())> {
        let (n, c) = x.dim();
        let d = self.factor;
        let mut out = Mat::zeros((n * d, c));
        match self.mode {
            UpsampleMode::Nearest => {
                for (t, mut row) in out.rows_mut().into_iter().enumerate() {
                    row.assign(&x.row(t / d));
                }
            }
            UpsampleMode::Linear => {
                for (t, mut row) in out.rows_mut().into_iter().enumerate() {
                    let (lo, hi, w) = self.linear_taps(t, n);
                    row.assign(&(&x.row(lo) * (1.0 - w) + &x.row(hi) * w));
                }
            }
        }
        Ok((out, ()))
    }

    fn backward(&self, _cache: &(), grad_out: &Mat, _grads: &mut [Mat]) -> Mat {
        let d = self.factor;
        let (t, c) = grad_out.dim();
        let n = t / d;
        let mut grad_in = Mat::zeros((n, c));
        for (i, g) in grad_out.rows().into_iter().enumerate() {
            match self.mode {
                UpsampleMode::Nearest => {
                    let mut dst = grad_in.row_mut(i / d);
                    dst += &g;
                }
                UpsampleMode::Linear => {
                    let (lo, hi, w) = self.linear_taps(i, n);
                    let mut dst = grad_in.row_mut(lo);
                    dst.scaled_add(1.0 - w, &g);
                    let mut dst = grad_in.row_mut(hi);
                    dst.scaled_add(w, &g);
                }
            }
        }
        grad_in
    }
}

#[cfg(test)]
mod tests {
    use ndarray::array;

    use super::*;

    fn run<L: Layer>(layer: &L, x: &Mat) -> Mat {
        layer.forward(x, &mut Phase::Eval).unwrap().0
    }

    #[test]
    fn pool_means_blocks() {
        let pool = AvgPoolTime::new(2).unwrap();
        assert_eq!(run(&pool, &array![[1.0], [3.0], [5.0], [7.0]]), array![[2.0], [6.0]]);
        let pool4 = AvgPoolTime::new(4).unwrap();
        let constant = Mat::from_elem((300, 11), 0.7);
        let pooled = run(&pool4, &constant);
        assert_eq!(pooled.dim(), (75, 11));
        assert!(pooled.iter().all(|&v| v == 0.7));
    }

    #[test]
    fn pool_rejects_indivisible_length() {
        let pool = AvgPoolTime::new(4).unwrap();
        let err = pool.forward(&Mat::zeros((10, 2)), &mut Phase::Eval).unwrap_err();
        assert!(matches!(err, Error::Input(_)));
    }

    #[test]
    fn upsample_repeats_rows() {
        let up = UpsampleTime::new(2, UpsampleMode::Nearest).unwrap();
        assert_eq!(run(&up, &array![[2.0], [6.0]]), array![[2.0], [2.0], [6.0], [6.0]]);
        let id = UpsampleTime::new(1, UpsampleMode::Nearest).unwrap();
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        assert_eq!(run(&id, &x), x);
    }

    #[test]
    fn constant_round_trip_is_exact() {
        let x = Mat::from_elem((300, 11), -1.25);
        let pool = AvgPoolTime::new(4).unwrap();
        let up = UpsampleTime::new(4, UpsampleMode::Nearest).unwrap();
        assert_eq!(run(&up, &run(&pool, &x)), x);
    }

    #[test]
    fn linear_upsample_endpoints_and_constant() {
        let up = UpsampleTime::new(2, UpsampleMode::Linear).unwrap();
        let y = run(&up, &array![[0.0], [4.0]]);
        assert_eq!(y, array![[0.0], [1.0], [3.0], [4.0]]);
        let c = Mat::from_elem((5, 3), 2.5);
        assert!(run(&up, &c).iter().all(|&v| v == 2.5));
    }
}
