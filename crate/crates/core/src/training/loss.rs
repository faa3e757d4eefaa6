use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LossKind {
    /// Mean of `sqrt(d^2 + eps^2)`.
    Charbonnier { eps: f32 },
    /// Mean squared difference.
    L2,
}

impl LossKind {
    pub fn value(&self, pred: &Tensor, target: &Tensor) -> Result<f32> {
        match *self {
            LossKind::Charbonnier { eps } => charbonnier_loss(pred, target, eps),
            LossKind::L2 => l2_loss(pred, target),
        }
    }

    /// Gradient with respect to `pred`.
    pub fn backward(&self, pred: &Tensor, target: &Tensor) -> Result<Tensor> {
        match *self {
            LossKind::Charbonnier { eps } => charbonnier_backward(pred, target, eps),
            LossKind::L2 => l2_backward(pred, target),
        }
    }
}

fn check(pred: &Tensor, target: &Tensor, op: &'static str) -> Result<()> {
    if pred.shape() != target.shape() {
        return Err(Error::ShapeMismatch {
            op,
            left: pred.shape(),
            right: target.shape(),
        });
    }
    Ok(())
}

fn check_eps(eps: f32) -> Result<()> {
    if !(eps > 0.0) {
        return Err(Error::invalid("charbonnier_loss", format!("eps {eps} must be positive")));
    }
    Ok(())
}

pub fn charbonnier_loss(pred: &Tensor, target: &Tensor, eps: f32) -> Result<f32> {
    check(pred, target, "charbonnier_loss")?;
    check_eps(eps)?;
    let e2 = eps as f64 * eps as f64;
    let sum: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            let d = p as f64 - t as f64;
            (d * d + e2).sqrt()
        })
        .sum();
    Ok((sum / pred.numel() as f64) as f32)
}

pub fn charbonnier_backward(pred: &Tensor, target: &Tensor, eps: f32) -> Result<Tensor> {
    check(pred, target, "charbonnier_backward")?;
    check_eps(eps)?;
    let e2 = eps as f64 * eps as f64;
    let n = pred.numel() as f64;
    pred.zip_map(target, "charbonnier_backward", |p, t| {
        let d = p as f64 - t as f64;
        (d / (d * d + e2).sqrt() / n) as f32
    })
}

pub fn l2_loss(pred: &Tensor, target: &Tensor) -> Result<f32> {
    check(pred, target, "l2_loss")?;
    let sum: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            let d = p as f64 - t as f64;
            d * d
        })
        .sum();
    Ok((sum / pred.numel() as f64) as f32)
}

pub fn l2_backward(pred: &Tensor, target: &Tensor) -> Result<Tensor> {
    check(pred, target, "l2_backward")?;
    let n = pred.numel() as f64;
    pred.zip_map(target, "l2_backward", |p, t| (2.0 * (p as f64 - t as f64) / n) as f32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;

    fn s() -> Shape {
        Shape::new(1, 3, 4, 4).unwrap()
    }

    #[test]
    fn charbonnier_examples() {
        let a = Tensor::full(s(), 0.4);
        assert!((charbonnier_loss(&a, &a, 0.1).unwrap() - 0.1).abs() < 1e-7);
        let b = Tensor::full(s(), 0.1);
        let v = charbonnier_loss(&a, &b, 0.1).unwrap();
        assert!((v - 0.316_227_77).abs() < 1e-6);
        assert!(charbonnier_loss(&a, &Tensor::zeros(Shape::new(1, 1, 4, 4).unwrap()), 0.1).is_err());
        assert!(charbonnier_loss(&a, &b, 0.0).is_err());
    }

    #[test]
    fn l2_examples() {
        let a = Tensor::full(s(), 0.7);
        assert_eq!(l2_loss(&a, &a).unwrap(), 0.0);
        assert!((l2_loss(&a, &Tensor::full(s(), 0.2)).unwrap() - 0.25).abs() < 1e-7);
        assert!(l2_backward(&a, &a).unwrap().data().iter().all(|&g| g == 0.0));
    }
}
