use lvsnet_tensor::{Float, Tensor, Var};

use crate::error::{Error, Result};

/// Per-class weights and smoothing for [`dice_loss`].
#[derive(Clone, Debug, PartialEq)]
pub struct DiceLossParams {
    pub class_weights: Vec<f64>,
    pub smoothing: f64,
}

impl DiceLossParams {
    pub fn uniform(classes: usize) -> Self {
        Self {
            class_weights: vec![1.0 / classes as f64; classes],
            smoothing: 1e-6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.smoothing > 0.0) {
            return Err(Error::Config(format!("dice smoothing {} must be positive", self.smoothing)));
        }
        if self.class_weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::Config("dice class weights must be non-negative".into()));
        }
        let total: f64 = self.class_weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("dice class weights sum to {total}, not 1")));
        }
        Ok(())
    }
}

fn classes_of(shape: &[usize]) -> Result<(usize, usize, usize)> {
    match *shape {
        [n, k, h, w] => Ok((n, k, h * w)),
        _ => Err(Error::Shape(format!("dice loss expects [n, classes, h, w], got {shape:?}"))),
    }
}

fn check<T: Float>(pred: &Tensor<T>, truth: &Tensor<T>, params: &DiceLossParams) -> Result<(usize, usize, usize)> {
    params.validate()?;
    if pred.shape() != truth.shape() {
        return Err(Error::Shape(format!(
            "prediction {:?} vs truth {:?}",
            pred.shape(),
            truth.shape()
        )));
    }
    let dims = classes_of(pred.shape())?;
    if dims.1 != params.class_weights.len() {
        return Err(Error::Shape(format!(
            "{} class weights for {} classes",
            params.class_weights.len(),
            dims.1
        )));
    }
    if let Some(v) = truth.data().iter().find(|&&v| v != T::zero() && v != T::one()) {
        return Err(Error::Label(format!("dice truth must be binary, found {}", v.to_f64_lossy())));
    }
    Ok(dims)
}

/// Per-class sums `(sum S*G, sum S^2 + sum G^2)`; pixels of every batch item
/// are pooled per class.
fn class_sums<T: Float>(pred: &[T], truth: &[T], n: usize, k: usize, p: usize) -> Vec<(f64, f64)> {
    let mut sums = vec![(0.0, 0.0); k];
    for b in 0..n {
        for (c, s) in sums.iter_mut().enumerate() {
            let off = (b * k + c) * p;
            for (&sv, &gv) in pred[off..off + p].iter().zip(&truth[off..off + p]) {
                let (sv, gv) = (sv.to_f64_lossy(), gv.to_f64_lossy());
                s.0 += sv * gv;
                s.1 += sv * sv + gv * gv;
            }
        }
    }
    sums
}

/// Soft dice loss with squared-magnitude denominators:
/// `1 - sum_k w_k * 2 sum_j S G / (sum_j S^2 + sum_j G^2 + xi)`.
pub fn dice_loss<T: Float>(pred: &Tensor<T>, truth: &Tensor<T>, params: &DiceLossParams) -> Result<f64> {
    let (n, k, p) = check(pred, truth, params)?;
    let sums = class_sums(pred.data(), truth.data(), n, k, p);
    let overlap: f64 = sums
        .iter()
        .zip(&params.class_weights)
        .map(|(&(a, b), w)| w * 2.0 * a / (b + params.smoothing))
        .sum();
    Ok(1.0 - overlap)
}

/// Loss and its gradient with respect to `pred`:
/// `dL/dS = -w_k * (2 G B - 2 A * 2 S) / B^2` with `A = sum S G`,
/// `B = sum S^2 + sum G^2 + xi`.
pub fn dice_loss_grad<T: Float>(pred: &Tensor<T>, truth: &Tensor<T>, params: &DiceLossParams) -> Result<(f64, Tensor<T>)> {
    let (n, k, p) = check(pred, truth, params)?;
    let sums = class_sums(pred.data(), truth.data(), n, k, p);
    let mut grad = Tensor::zeros(pred.shape());
    let mut overlap = 0.0;
    for (c, (&(a, b0), &w)) in sums.iter().zip(&params.class_weights).enumerate() {
        let b = b0 + params.smoothing;
        overlap += w * 2.0 * a / b;
        for batch in 0..n {
            let off = (batch * k + c) * p;
            let (s, g) = (&pred.data()[off..off + p], &truth.data()[off..off + p]);
            for ((d, &sv), &gv) in grad.data_mut()[off..off + p].iter_mut().zip(s).zip(g) {
                let (sv, gv) = (sv.to_f64_lossy(), gv.to_f64_lossy());
                *d = T::lit(-w * (2.0 * gv * b - 2.0 * a * 2.0 * sv) / (b * b));
            }
        }
    }
    Ok((1.0 - overlap, grad))
}

/// The dice loss attached to the graph as a scalar node.
pub fn dice_loss_var<T: Float>(pred: &Var<T>, truth: &Tensor<T>, params: &DiceLossParams) -> Result<Var<T>> {
    let (loss, grad) = dice_loss_grad(pred.value(), truth, params)?;
    Ok(pred.external_scalar(T::lit(loss), grad)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_class(pred: Vec<f64>, truth: Vec<f64>) -> f64 {
        let n = pred.len();
        let s = Tensor::from_vec(&[1, 1, 1, n], pred).unwrap();
        let g = Tensor::from_vec(&[1, 1, 1, n], truth).unwrap();
        dice_loss(&s, &g, &DiceLossParams::uniform(1)).unwrap()
    }

    #[test]
    fn perfect_overlap_is_near_zero() {
        assert!(one_class(vec![1.0; 16], vec![1.0; 16]) <= 1e-6);
    }

    #[test]
    fn no_overlap_is_one() {
        assert_eq!(one_class(vec![0.0; 16], vec![1.0; 16]), 1.0);
    }

    #[test]
    fn half_prediction_on_sixteen_pixels() {
        // 1 - 2*8 / (16*0.25 + 16 + xi)
        assert!((one_class(vec![0.5; 16], vec![1.0; 16]) - 0.2).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = Tensor::<f64>::zeros(&[1, 1, 2, 2]);
        let g = Tensor::<f64>::full(&[1, 1, 2, 2], 0.5);
        assert!(matches!(dice_loss(&s, &g, &DiceLossParams::uniform(1)), Err(Error::Label(_))));
        let g = Tensor::<f64>::zeros(&[1, 1, 2, 3]);
        assert!(matches!(dice_loss(&s, &g, &DiceLossParams::uniform(1)), Err(Error::Shape(_))));
        let params = DiceLossParams {
            class_weights: vec![0.7],
            smoothing: 1e-6,
        };
        assert!(matches!(dice_loss(&s, &s, &params), Err(Error::Config(_))));
    }
}
