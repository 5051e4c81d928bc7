use super::params::{ParamId, ParamStore};
use super::tape::{softmax_in_place, Tape, Var};
use super::tensor::Tensor2;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Dense affine map `x·W + b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, in_dim: usize, out_dim: usize, rng: &mut Rng) -> Self {
        let weight = store.add_weight(format!("{name}.weight"), in_dim, out_dim, rng);
        let bias = store.add_bias(format!("{name}.bias"), out_dim);
        Self {
            weight,
            bias,
            in_dim,
            out_dim,
        }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let (_, cols) = tape.shape(x);
        if cols != self.in_dim {
            return Err(Error::dim("linear", tape.shape(x), store.get(self.weight).shape()));
        }
        let w = tape.param(store, self.weight);
        let b = tape.param(store, self.bias);
        let xw = tape.matmul(x, w)?;
        tape.add_row(xw, b)
    }
}

/// Gated recurrent unit cell with gates ordered (reset, update, candidate).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GruCell {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub b_ih: ParamId,
    pub b_hh: ParamId,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

impl GruCell {
    pub fn new(store: &mut ParamStore, name: &str, input_dim: usize, hidden_dim: usize, rng: &mut Rng) -> Self {
        let w_ih = store.add_weight(format!("{name}.w_ih"), input_dim, 3 * hidden_dim, rng);
        let w_hh = store.add_weight(format!("{name}.w_hh"), hidden_dim, 3 * hidden_dim, rng);
        let b_ih = store.add_bias(format!("{name}.b_ih"), 3 * hidden_dim);
        let b_hh = store.add_bias(format!("{name}.b_hh"), 3 * hidden_dim);
        Self {
            w_ih,
            w_hh,
            b_ih,
            b_hh,
            input_dim,
            hidden_dim,
        }
    }

    /// `h' = (1 - z)·n + z·h` over a batch of rows.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var, h: Var) -> Result<Var> {
        let hd = self.hidden_dim;
        if tape.shape(x).1 != self.input_dim {
            return Err(Error::dim("gru_cell input", tape.shape(x), (self.input_dim, 3 * hd)));
        }
        if tape.shape(h) != (tape.shape(x).0, hd) {
            return Err(Error::dim("gru_cell hidden", tape.shape(h), (tape.shape(x).0, hd)));
        }
        let w_ih = tape.param(store, self.w_ih);
        let w_hh = tape.param(store, self.w_hh);
        let b_ih = tape.param(store, self.b_ih);
        let b_hh = tape.param(store, self.b_hh);
        let gi = tape.matmul(x, w_ih)?;
        let gi = tape.add_row(gi, b_ih)?;
        let gh = tape.matmul(h, w_hh)?;
        let gh = tape.add_row(gh, b_hh)?;

        let i_rz = tape.slice_cols(gi, 0, 2 * hd)?;
        let h_rz = tape.slice_cols(gh, 0, 2 * hd)?;
        let rz = tape.add(i_rz, h_rz)?;
        let rz = tape.sigmoid(rz);
        let r = tape.slice_cols(rz, 0, hd)?;
        let z = tape.slice_cols(rz, hd, hd)?;

        let i_n = tape.slice_cols(gi, 2 * hd, hd)?;
        let h_n = tape.slice_cols(gh, 2 * hd, hd)?;
        let rh = tape.mul(r, h_n)?;
        let n = tape.add(i_n, rh)?;
        let n = tape.tanh(n);

        // n + z·(h - n)
        let diff = tape.sub(h, n)?;
        let zd = tape.mul(z, diff)?;
        tape.add(n, zd)
    }
}

/// Forward pass of a single linear map on plain matrices.
pub fn linear(store: &ParamStore, layer: &Linear, input: &Tensor2) -> Result<Tensor2> {
    let mut tape = Tape::new();
    let x = tape.constant(input.clone());
    let y = layer.forward(&mut tape, store, x)?;
    Ok(tape.value(y).clone())
}

/// One recurrence step of a GRU cell on plain vectors.
pub fn gru_cell(store: &ParamStore, cell: &GruCell, input: &[f64], hidden: &[f64]) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor2::row_vector(input.to_vec()));
    let h = tape.constant(Tensor2::row_vector(hidden.to_vec()));
    let y = cell.forward(&mut tape, store, x, h)?;
    Ok(tape.value(y).data().to_vec())
}

/// Numerically stable normalized exponential.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::Domain("softmax of an empty vector".into()));
    }
    if logits.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("softmax of non-finite logits".into()));
    }
    let mut out = logits.to_vec();
    softmax_in_place(&mut out);
    Ok(out)
}

pub fn leaky_relu(x: &[f64], slope: f64) -> Vec<f64> {
    x.iter().map(|&v| if v >= 0.0 { v } else { slope * v }).collect()
}

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.2;
