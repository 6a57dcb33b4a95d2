use std::collections::BTreeMap;

use super::{ParamStore, Tensor};
use crate::error::{Error, Result};

/// Adam optimizer state: first/second moment estimates per parameter.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: BTreeMap<String, Vec<f64>>,
    v: BTreeMap<String, Vec<f64>>,
}

impl AdamState {
    pub fn new(learning_rate: f64) -> Self {
        AdamState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        }
    }

    /// One bias-corrected update of every parameter that has a gradient.
    pub fn step(&mut self, params: &mut ParamStore, grads: &BTreeMap<String, Tensor>) -> Result<()> {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (name, g) in grads {
            let p = params
                .get_mut(name)
                .ok_or_else(|| Error::Config(format!("gradient for unknown parameter {name}")))?;
            if p.shape() != g.shape() {
                return Err(Error::Shape(format!(
                    "gradient for {name} has shape {:?}, parameter {:?}",
                    g.shape(),
                    p.shape()
                )));
            }
            let n = p.len();
            let m = self.m.entry(name.clone()).or_insert_with(|| vec![0.0; n]);
            let v = self.v.entry(name.clone()).or_insert_with(|| vec![0.0; n]);
            for (((theta, &gi), mi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                let m_hat = *mi / c1;
                let v_hat = *vi / c2;
                *theta -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(v: f64) -> ParamStore {
        let mut ps = ParamStore::new();
        ps.insert("w", Tensor::from_vec(vec![v])).unwrap();
        ps
    }

    fn grad(v: f64) -> BTreeMap<String, Tensor> {
        BTreeMap::from([("w".to_string(), Tensor::from_vec(vec![v]))])
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut ps = store(0.25);
        let mut adam = AdamState::new(1e-4);
        for _ in 0..3 {
            adam.step(&mut ps, &grad(0.0)).unwrap();
        }
        assert_eq!(ps.get("w").unwrap().data(), &[0.25]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut ps = store(0.0);
        let mut adam = AdamState::new(1e-4);
        adam.step(&mut ps, &grad(1.0)).unwrap();
        let expected = -1e-4 / (1.0 + 1e-8);
        assert!((ps.get("w").unwrap().data()[0] - expected).abs() < 1e-18);
    }

    #[test]
    fn matches_scalar_reference() {
        // Hand-rolled scalar Adam as the reference.
        let (lr, b1, b2, eps) = (1e-3f64, 0.9f64, 0.999f64, 1e-8f64);
        let g = 0.37;
        let (mut theta, mut m, mut v) = (0.5f64, 0.0f64, 0.0f64);
        for t in 1..=2 {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t));
            let vh = v / (1.0 - b2.powi(t));
            theta -= lr * mh / (vh.sqrt() + eps);
        }
        let mut ps = store(0.5);
        let mut adam = AdamState::new(lr);
        adam.step(&mut ps, &grad(g)).unwrap();
        adam.step(&mut ps, &grad(g)).unwrap();
        assert!((ps.get("w").unwrap().data()[0] - theta).abs() < 1e-12);
    }

    #[test]
    fn unknown_parameter_is_an_error() {
        let mut ps = store(0.0);
        let mut adam = AdamState::new(1e-4);
        let g = BTreeMap::from([("nope".to_string(), Tensor::from_vec(vec![1.0]))]);
        assert!(adam.step(&mut ps, &g).is_err());
    }
}
