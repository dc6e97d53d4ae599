use super::tensor::Mat;
use crate::error::{Error, Result};

/// Probabilities are clamped to `[BCE_EPS, 1 - BCE_EPS]` before taking logs.
pub const BCE_EPS: f64 = 1e-7;

/// Mean squared error over all `T·C` elements, with its gradient with
/// respect to `x_hat`.
pub fn mse_loss(x: &Mat, x_hat: &Mat) -> Result<(f64, Mat)> {
    if x.dim() != x_hat.dim() {
        return Err(Error::Input(format!(
            "mse shape mismatch: {:?} vs {:?}",
            x.dim(),
            x_hat.dim()
        )));
    }
    let n = x.len() as f64;
    let diff = x_hat - x;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;
    Ok((loss, diff * (2.0 / n)))
}

/// Loss value only; same definition as [`mse_loss`].
pub fn mse(x: &Mat, x_hat: &Mat) -> Result<f64> {
    if x.dim() != x_hat.dim() {
        return Err(Error::Input(format!(
            "mse shape mismatch: {:?} vs {:?}",
            x.dim(),
            x_hat.dim()
        )));
    }
    let n = x.len() as f64;
    Ok(x.iter()
        .zip(x_hat.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n)
}

/// Weighted binary cross-entropy `-[w·y·ln p + (1-y)·ln(1-p)]` and its
/// derivative with respect to `p`, evaluated at the clamped probability.
/// `weight_pos = 1` is plain BCE.
pub fn bce_loss(p: f64, y: bool, weight_pos: f64) -> (f64, f64) {
    let pc = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
    if y {
        (-weight_pos * pc.ln(), -weight_pos / pc)
    } else {
        (-(1.0 - pc).ln(), 1.0 / (1.0 - pc))
    }
}

#[cfg(test)]
mod tests {
    use ndarray::array;

    use super::*;

    #[test]
    fn mse_basics() {
        let x = array![[0.0, 0.0]];
        let y = array![[1.0, 1.0]];
        assert_eq!(mse_loss(&x, &x).unwrap().0, 0.0);
        let (l, g) = mse_loss(&x, &y).unwrap();
        assert_eq!(l, 1.0);
        assert_eq!(g, array![[1.0, 1.0]]);
        assert_eq!(mse(&x, &y).unwrap(), mse(&y, &x).unwrap());
        assert!(mse_loss(&x, &array![[1.0]]).is_err());
    }

    #[test]
    fn bce_values() {
        let (l, _) = bce_loss(0.5, true, 1.0);
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(bce_loss(1.0 - 1e-12, true, 1.0).0 < 1e-6);
        assert!(bce_loss(0.0, true, 1.0).0.is_finite());
        assert!(bce_loss(1.0, false, 1.0).0.is_finite());
        let (lw, gw) = bce_loss(0.3, true, 20.69);
        let (l1, g1) = bce_loss(0.3, true, 1.0);
        assert!((lw - 20.69 * l1).abs() < 1e-12);
        assert!((gw - 20.69 * g1).abs() < 1e-12);
        // Weight only touches the positive term.
        assert_eq!(bce_loss(0.3, false, 20.69), bce_loss(0.3, false, 1.0));
    }
}
