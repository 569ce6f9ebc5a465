use serde::{Deserialize, Serialize};

use super::layers::Param;
use super::tensor::Real;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate.is_finite()
            && self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon.is_finite()
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::param(format!("invalid Adam config {self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
}

impl<T: Real> AdamState<T> {
    /// Zero moments sized after `params`.
    pub fn new<'a>(config: AdamConfig, params: impl IntoIterator<Item = &'a Param<T>>) -> Result<Self> {
        config.validate()?;
        let (m, v) = params.into_iter().map(|p| (vec![T::zero(); p.len()], vec![T::zero(); p.len()])).unzip();
        Ok(Self { config, step: 0, m, v })
    }
}

/// One bias-corrected Adam update of every parameter from its `grad`.
pub fn adam_step<'a, T: Real>(
    params: impl IntoIterator<Item = &'a mut Param<T>>,
    state: &mut AdamState<T>,
) -> Result<()> {
    let params: Vec<&mut Param<T>> = params.into_iter().collect();
    if params.len() != state.m.len() || params.iter().zip(&state.m).any(|(p, m)| p.len() != m.len()) {
        return Err(Error::shape("Adam moments do not match the parameter list"));
    }
    state.step += 1;
    let c = state.config;
    let t = state.step as i32;
    let corr1 = 1.0 - c.beta1.powi(t);
    let corr2 = 1.0 - c.beta2.powi(t);
    let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
    let (one_b1, one_b2) = (T::lit(1.0 - c.beta1), T::lit(1.0 - c.beta2));
    // lr * m_hat / (sqrt(v_hat) + eps), with the corrections folded in
    let step_size = T::lit(c.learning_rate / corr1);
    let sqrt_corr2 = T::lit(corr2.sqrt());
    let eps = T::lit(c.epsilon);
    for ((p, m), v) in params.into_iter().zip(&mut state.m).zip(&mut state.v) {
        for i in 0..p.value.len() {
            let g = p.grad[i];
            m[i] = b1 * m[i] + one_b1 * g;
            v[i] = b2 * v[i] + one_b2 * g * g;
            p.value[i] -= step_size * m[i] / (v[i].sqrt() / sqrt_corr2 + eps);
        }
    }
    Ok(())
}
