//! Dense matrices with reverse-mode differentiation, LSTM layers,
//! dropout, cross entropy and Adam.
//!
//! Everything computes in `f64`; gradient checks need the headroom.

mod adam;
mod gradcheck;
mod graph;
mod lstm;
mod params;

pub use adam::AdamState;
pub use gradcheck::{
    analytic_gradients, compare_gradients, grad_check, relative_error, GradCheckReport, ParamCheck,
    REL_ERROR_FLOOR,
};
pub use graph::{softmax_rows_of, Graph, Var};
pub use lstm::{bilstm_apply, orthogonal, uniform_fan_in, DirectionParams, LstmParams};
pub use params::{GradBuffer, Param, ParamId, ParamStore};

/// Row-major dense matrix. Vectors are `1 × n`, scalars `1 × 1`.
pub type Tensor = ndarray::Array2<f64>;

/// Finite-difference step used by the gradient suites.
pub const GRAD_CHECK_STEP: f64 = 1e-3;
/// Maximum tolerated relative gradient error.
pub const GRAD_CHECK_TOL: f64 = 1e-4;
