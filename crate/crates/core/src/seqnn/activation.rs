use rand::Rng;

use super::tensor::{Layer, Mat, Param, Phase};
use crate::error::{Error, Result};

/// Inverted dropout: in training each element is zeroed with probability
/// `p` and survivors are scaled by `1/(1-p)`; evaluation is the identity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dropout {
    pub p: f64,
}

impl Dropout {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Config(format!("dropout probability {p} outside [0, 1)")));
        }
        Ok(Dropout { p })
    }
}

impl Layer for Dropout {
    /// Scaled keep-mask, absent when the layer acted as the identity.
    type Cache = Option<Mat>;

    fn params(&self) -> Vec<&Param> {
        Vec::new()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        Vec::new()
    }

    fn forward(&self, x: &Mat, phase: &mut Phase<'_>) -> Result<(Mat, Option<Mat>)> {
        match phase {
            Phase::Train(rng) if self.p > 0.0 => {
                let scale = 1.0 / (1.0 - self.p);
                let mask = Mat::from_shape_simple_fn(x.raw_dim(), || {
                    if rng.gen::<f64>() < self.p {
                        0.0
                    } else {
                        scale
                    }
                });
                Ok((x * &mask, Some(mask)))
            }
            _ => Ok((x.clone(), None)),
        }
    }

    fn backward(&self, mask: &Option<Mat>, grad_out: &Mat, _grads: &mut [Mat]) -> Mat {
        match mask {
            Some(m) => grad_out * m,
            None => grad_out.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Relu;

impl Layer for Relu {
    type Cache = Mat;

    fn params(&self) -> Vec<&Param> {
        Vec::new()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        Vec::new()
    }

    fn forward(&self, x: &Mat, _phase: &mut Phase<'_>) -> Result<(Mat, Mat)> {
        let y = x.mapv(|v| v.max(0.0));
        Ok((y.clone(), y))
    }

    fn backward(&self, y: &Mat, grad_out: &Mat, _grads: &mut [Mat]) -> Mat {
        let mut g = grad_out.clone();
        g.zip_mut_with(y, |gi, &yi| {
            if yi <= 0.0 {
                *gi = 0.0;
            }
        });
        g
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Sigmoid;

impl Layer for Sigmoid {
    type Cache = Mat;

    fn params(&self) -> Vec<&Param> {
        Vec::new()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        Vec::new()
    }

    fn forward(&self, x: &Mat, _phase: &mut Phase<'_>) -> Result<(Mat, Mat)> {
        let y = x.mapv(sigmoid);
        Ok((y.clone(), y))
    }

    fn backward(&self, y: &Mat, grad_out: &Mat, _grads: &mut [Mat]) -> Mat {
        grad_out * &y.mapv(|p| p * (1.0 - p))
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn dropout_rejects_bad_probability() {
        assert!(Dropout::new(1.0).is_err());
        assert!(Dropout::new(-0.1).is_err());
        assert!(Dropout::new(f64::NAN).is_err());
        assert!(Dropout::new(0.0).is_ok());
    }

    #[test]
    fn dropout_identity_cases() {
        let x = Mat::from_shape_fn((7, 3), |(a, b)| a as f64 - b as f64 * 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d0 = Dropout::new(0.0).unwrap();
        assert_eq!(d0.forward(&x, &mut Phase::Train(&mut rng)).unwrap().0, x);
        assert_eq!(d0.forward(&x, &mut Phase::Eval).unwrap().0, x);
        let d = Dropout::new(0.05).unwrap();
        assert_eq!(d.forward(&x, &mut Phase::Eval).unwrap().0, x);
    }

    #[test]
    fn dropout_zero_fraction_tracks_p() {
        let d = Dropout::new(0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = Mat::ones((1000, 100));
        let (y, _) = d.forward(&x, &mut Phase::Train(&mut rng)).unwrap();
        let zeros = y.iter().filter(|&&v| v == 0.0).count() as f64 / y.len() as f64;
        assert!((zeros - 0.05).abs() <= 0.005, "zero fraction {zeros}");
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0);
        assert!(sigmoid(800.0) <= 1.0);
        assert!((sigmoid(2.0) + sigmoid(-2.0) - 1.0).abs() < 1e-15);
    }
}
