use std::collections::BTreeMap;

use super::graph::bce;
use super::{ParamKind, ParamStore, Tensor};
use crate::error::{Error, Result};

/// `λ·Σ‖W‖²` over the weight tensors of `params`; embeddings and biases are
/// not penalized.
pub fn l2_penalty(params: &ParamStore, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    lambda
        * params
            .iter()
            .filter(|(_, p)| p.kind == ParamKind::Weight)
            .map(|(_, p)| p.value.sum_squares())
            .sum::<f64>()
}

/// Adds the gradient of [`l2_penalty`] into `grads`.
pub fn add_l2_grad(params: &ParamStore, lambda: f64, grads: &mut BTreeMap<String, Tensor>) {
    if lambda == 0.0 {
        return;
    }
    for (name, p) in params.iter() {
        if p.kind != ParamKind::Weight {
            continue;
        }
        let g = grads
            .entry(name.to_string())
            .or_insert_with(|| Tensor::zeros(p.value.shape()));
        for (gi, wi) in g.data_mut().iter_mut().zip(p.value.data()) {
            *gi += 2.0 * lambda * wi;
        }
    }
}

/// Mean clamped cross-entropy over a batch plus the L2 penalty.
pub fn loss(scores: &[f64], labels: &[f64], params: &ParamStore, lambda: f64) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let data = if scores.is_empty() {
        0.0
    } else {
        scores.iter().zip(labels).map(|(&p, &y)| bce(p, y)).sum::<f64>() / scores.len() as f64
    };
    Ok(data + l2_penalty(params, lambda))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_probability_costs_ln2() {
        let l = loss(&[0.5], &[1.0], &ParamStore::new(), 0.0).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn certain_prediction_is_clamped() {
        let l = loss(&[1.0], &[1.0], &ParamStore::new(), 0.0).unwrap();
        assert!(l > 0.0 && l < 1e-6);
        let wrong = loss(&[1.0], &[0.0], &ParamStore::new(), 0.0).unwrap();
        assert!(wrong.is_finite());
        assert!((wrong - -(1e-7f64).ln()).abs() < 1e-9);
    }

    #[test]
    fn l2_counts_weights_only() {
        let mut ps = ParamStore::new();
        ps.insert("fc.weight", Tensor::from_vec(vec![2.0])).unwrap();
        ps.insert("fc.bias", Tensor::from_vec(vec![3.0])).unwrap();
        ps.insert("msg.embedding", Tensor::new(vec![1, 1], vec![5.0]).unwrap()).unwrap();
        // Zero data loss is unreachable through BCE, so check the penalty directly.
        assert_eq!(l2_penalty(&ps, 1.0), 4.0);
        let mut grads = BTreeMap::new();
        add_l2_grad(&ps, 1.0, &mut grads);
        assert_eq!(grads["fc.weight"].data(), &[4.0]);
        assert!(!grads.contains_key("fc.bias"));
    }

    #[test]
    fn loss_bounded_below_by_penalty() {
        let mut ps = ParamStore::new();
        ps.insert("w", Tensor::from_vec(vec![0.3, -0.7])).unwrap();
        for &(p, y) in &[(0.1, 0.0), (0.9, 1.0), (0.5, 0.0)] {
            let l = loss(&[p], &[y], &ps, 0.5).unwrap();
            assert!(l >= l2_penalty(&ps, 0.5));
        }
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(loss(&[0.5, 0.5], &[1.0], &ParamStore::new(), 0.0).is_err());
    }
}
