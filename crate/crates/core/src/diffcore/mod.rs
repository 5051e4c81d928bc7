//! Minimal reverse-mode differentiation over dense `f64` matrices, plus the
//! layers and optimizer the learners are built from.

mod nn;
mod optim;
mod params;
mod tape;
mod tensor;

pub use nn::{gru_cell, leaky_relu, linear, softmax, GruCell, Linear, DEFAULT_LEAKY_SLOPE};
pub use optim::{clip_global_norm, AdamConfig, AdamState};
pub use params::{Grads, ParamId, ParamStore};
pub use tape::{sigmoid, Tape, Var};
pub use tensor::Tensor2;

#[cfg(test)]
pub(crate) mod gradcheck {
    use super::*;
    use crate::error::Result;

    /// Largest relative error between analytic and central-difference
    /// gradients of `f` over every parameter entry.
    pub fn max_rel_error(store: &ParamStore, f: impl Fn(&ParamStore) -> Result<(Tape, Var)>) -> f64 {
        let (tape, out) = f(store).unwrap();
        let grads = tape.backward(out, store).unwrap();
        let h = 1e-5;
        let mut worst = 0.0f64;
        for id in store.ids() {
            for k in 0..store.get(id).len() {
                let mut plus = store.clone();
                plus.get_mut(id).data_mut()[k] += h;
                let mut minus = store.clone();
                minus.get_mut(id).data_mut()[k] -= h;
                let fp = eval(&plus, &f);
                let fm = eval(&minus, &f);
                let numeric = (fp - fm) / (2.0 * h);
                let analytic = grads.get(id).data()[k];
                let denom = analytic.abs().max(numeric.abs()).max(1e-6);
                worst = worst.max((analytic - numeric).abs() / denom);
            }
        }
        worst
    }

    fn eval(store: &ParamStore, f: &impl Fn(&ParamStore) -> Result<(Tape, Var)>) -> f64 {
        let (tape, out) = f(store).unwrap();
        tape.value(out).sum()
    }
}
