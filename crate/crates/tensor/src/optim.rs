use std::collections::HashMap;

use crate::float::Float;
use crate::params::{ParamId, ParamKind, ParamStore};
use crate::var::Gradients;

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam<T> {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    moments: HashMap<ParamId, (Vec<T>, Vec<T>)>,
}

impl<T: Float> Adam<T> {
    pub fn new(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
            step: 0,
            moments: HashMap::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, store: &mut ParamStore<T>, grads: &Gradients<T>) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2) = (T::lit(self.beta1), T::lit(self.beta2));
        let lr = T::lit(self.learning_rate * bc2.sqrt() / bc1);
        let eps = T::lit(self.epsilon);
        let mut ids: Vec<_> = grads.params().map(|(id, _)| id).collect();
        ids.sort();
        for id in ids {
            if store.get(id).kind != ParamKind::Trainable {
                continue;
            }
            let g = grads.param(id).expect("listed gradient");
            let n = g.numel();
            let (m, v) = self
                .moments
                .entry(id)
                .or_insert_with(|| (vec![T::zero(); n], vec![T::zero(); n]));
            let w = store.value_mut(id).data_mut();
            for i in 0..n {
                let gi = g.data()[i];
                m[i] = b1 * m[i] + (T::one() - b1) * gi;
                v[i] = b2 * v[i] + (T::one() - b2) * gi * gi;
                w[i] -= lr * m[i] / (v[i].sqrt() + eps);
            }
        }
    }
}
