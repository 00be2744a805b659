use ndarray::Array2;

use super::TrainingSample;
use crate::model::ModelNormalizers;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    pub total: f64,
    pub node: f64,
    pub object: f64,
}

pub fn normalized_targets(sample: &TrainingSample, normalizers: &ModelNormalizers) -> (Array2<f64>, Array2<f64>) {
    (normalizers.node_target.normalize(&sample.node_acc), normalizers.object_target.normalize(&sample.object_acc))
}

fn masked_mse(pred: &Array2<f64>, target: &Array2<f64>, mask: &[bool]) -> (f64, Array2<f64>) {
    assert_eq!(pred.dim(), target.dim(), "prediction and target shapes differ");
    assert_eq!(pred.nrows(), mask.len(), "mask length differs from row count");
    let mut grad = Array2::zeros(pred.dim());
    let n = mask.iter().filter(|&&m| m).count() * pred.ncols();
    if n == 0 {
        return (0.0, grad);
    }
    let mut sum = 0.0;
    for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
        for c in 0..pred.ncols() {
            let d = pred[[i, c]] - target[[i, c]];
            sum += d * d;
            grad[[i, c]] = 2.0 * d / n as f64;
        }
    }
    (sum / n as f64, grad)
}

/// `MSE(nodes) + λ·MSE(objects)` over masked rows, with the gradients with
/// respect to both predictions.
pub fn loss(
    pred_node: &Array2<f64>,
    pred_object: &Array2<f64>,
    target_node: &Array2<f64>,
    target_object: &Array2<f64>,
    node_mask: &[bool],
    object_mask: &[bool],
    lambda_obj: f64,
) -> (LossTerms, Array2<f64>, Array2<f64>) {
    let (node, g_node) = masked_mse(pred_node, target_node, node_mask);
    let (object, g_object) = masked_mse(pred_object, target_object, object_mask);
    (LossTerms { total: node + lambda_obj * object, node, object }, g_node, g_object * lambda_obj)
}
