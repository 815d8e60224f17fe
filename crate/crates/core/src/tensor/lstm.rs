//! Stacked bidirectional LSTM built from [`Graph`] operations.

use nalgebra::DMatrix;
use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use super::graph::{Graph, Var};
use super::params::{ParamId, ParamStore};
use crate::error::{Error, Result};

/// Weights of one direction of one layer. Gate order is `i f g o`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DirectionParams {
    /// `input × 4h`
    pub w_ih: ParamId,
    /// `h × 4h`
    pub w_hh: ParamId,
    /// `1 × 4h`
    pub bias: ParamId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LstmParams {
    pub input_size: usize,
    pub hidden: usize,
    /// `[forward, backward]` per layer, bottom first.
    pub layers: Vec<[DirectionParams; 2]>,
}

/// Uniform fan-in initialization `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
pub fn uniform_fan_in<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    let bound = 1.0 / (rows.max(1) as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    Array2::from_shape_fn((rows, cols), |_| dist.sample(rng))
}

/// Random `n × n` orthogonal matrix (QR of a Gaussian matrix with the
/// sign of `R`'s diagonal folded into `Q`).
pub fn orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Array2<f64> {
    let gauss = DMatrix::<f64>::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    let qr = gauss.qr();
    let (q, r) = (qr.q(), qr.r());
    Array2::from_shape_fn((n, n), |(i, j)| {
        let sign = if r[(j, j)] < 0.0 { -1.0 } else { 1.0 };
        q[(i, j)] * sign
    })
}

impl LstmParams {
    /// Register freshly initialized weights under `prefix` in `store`.
    ///
    /// Input weights use uniform fan-in initialization, each gate's
    /// recurrent block is orthogonal, and the forget-gate bias starts at 1.
    pub fn register<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        input_size: usize,
        hidden: usize,
        layers: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if layers == 0 || hidden == 0 {
            return Err(Error::Config(format!(
                "{prefix}: LSTM needs at least one layer and a positive hidden size"
            )));
        }
        let mut out = Vec::with_capacity(layers);
        for l in 0..layers {
            let d_in = if l == 0 { input_size } else { 2 * hidden };
            let mut pair = Vec::with_capacity(2);
            for dir in ["fwd", "bwd"] {
                let name = |p: &str| format!("{prefix}.l{l}.{dir}.{p}");
                let w_ih = uniform_fan_in(d_in, 4 * hidden, rng);
                let mut w_hh = Array2::zeros((hidden, 4 * hidden));
                for gate in 0..4 {
                    w_hh.slice_mut(ndarray::s![.., gate * hidden..(gate + 1) * hidden])
                        .assign(&orthogonal(hidden, rng));
                }
                let mut bias = Array2::zeros((1, 4 * hidden));
                bias.slice_mut(ndarray::s![.., hidden..2 * hidden]).fill(1.0);
                pair.push(DirectionParams {
                    w_ih: store.add(name("w_ih"), w_ih, true)?,
                    w_hh: store.add(name("w_hh"), w_hh, true)?,
                    bias: store.add(name("b"), bias, true)?,
                });
            }
            out.push([pair[0], pair[1]]);
        }
        Ok(LstmParams {
            input_size,
            hidden,
            layers: out,
        })
    }

    pub fn output_size(&self) -> usize {
        2 * self.hidden
    }
}

/// Run a stacked BiLSTM over `xs` (`n × input_size`).
///
/// Row `i` of the result is the forward state at `i` followed by the
/// backward state at `i`. Each layer consumes the previous layer's full
/// output; when `training`, dropout with rate `dropout` is applied to the
/// input of every layer above the first.
pub fn bilstm_apply<R: Rng + ?Sized>(
    g: &mut Graph,
    params: &LstmParams,
    xs: Var,
    dropout: f64,
    training: bool,
    rng: &mut R,
) -> Result<Var> {
    let [n, d_in] = g.shape(xs);
    if n == 0 {
        return Err(Error::Invalid("BiLSTM over an empty sequence".into()));
    }
    if d_in != params.input_size {
        return Err(Error::Shape {
            op: "bilstm_apply",
            left: [n, d_in],
            right: [params.input_size, params.output_size()],
        });
    }
    let mut x = xs;
    for (l, layer) in params.layers.iter().enumerate() {
        if l > 0 && training {
            x = g.dropout(x, dropout, rng)?;
        }
        let mut outs = [x; 2];
        for (k, dir) in layer.iter().enumerate() {
            let w_ih = g.param(dir.w_ih);
            let w_hh = g.param(dir.w_hh);
            let b = g.param(dir.bias);
            let proj = g.matmul(x, w_ih)?;
            let xw = g.add_row(proj, b)?;
            outs[k] = g.lstm_recurrence(xw, w_hh, k == 1)?;
        }
        x = g.hcat(&outs)?;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn orthogonal_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = orthogonal(6, &mut rng);
        let qtq = q.t().dot(&q);
        for i in 0..6 {
            for j in 0..6 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((qtq[[i, j]] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn forget_bias_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::new();
        let p = LstmParams::register(&mut store, "x", 3, 2, 1, &mut rng).unwrap();
        let b = store.get(p.layers[0][0].bias);
        assert_eq!(b.row(0).to_vec(), vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }
}
