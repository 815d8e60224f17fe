//! Central finite-difference verification of recorded gradients.

use std::fmt;

use super::graph::{Graph, Var};
use super::params::{GradBuffer, ParamStore};
use crate::error::Result;

/// Denominator floor of the relative error, so entries whose true
/// gradient is (near) zero are compared absolutely.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

/// Relative discrepancy between an analytic and a numeric derivative.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamCheck {
    pub name: String,
    pub entries: usize,
    pub max_rel_error: f64,
    /// Flat index of the worst entry with its analytic and numeric values.
    pub worst: (usize, f64, f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub tol: f64,
    pub params: Vec<ParamCheck>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.params.iter().map(|p| p.max_rel_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.params.iter().all(|p| p.max_rel_error <= self.tol)
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.params {
            writeln!(
                f,
                "{:<32} n={:<6} max_rel={:.3e} worst[{}]: analytic={:.6e} numeric={:.6e}",
                p.name, p.entries, p.max_rel_error, p.worst.0, p.worst.1, p.worst.2
            )?;
        }
        write!(
            f,
            "{} (max {:.3e}, tol {:.1e})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.max_rel_error(),
            self.tol
        )
    }
}

/// Gradients of the scalar produced by `f` with respect to every
/// trainable parameter.
pub fn analytic_gradients<F>(params: &ParamStore, f: &F) -> Result<GradBuffer>
where
    F: Fn(&mut Graph) -> Result<Var>,
{
    let mut g = Graph::new(params);
    let out = f(&mut g)?;
    let mut grads = GradBuffer::zeros_like(params);
    g.backward(out, &mut grads)?;
    Ok(grads)
}

fn evaluate<F>(params: &ParamStore, f: &F) -> Result<f64>
where
    F: Fn(&mut Graph) -> Result<Var>,
{
    let mut g = Graph::new(params);
    let out = f(&mut g)?;
    Ok(g.scalar(out))
}

/// Compare `analytic` with central differences of `f`, perturbing every
/// trainable entry by `±step` and `±step/2` and combining the two quotients
/// by Richardson extrapolation, which cancels the `step²` truncation term.
/// `f` must be deterministic.
pub fn compare_gradients<F>(
    params: &ParamStore,
    analytic: &GradBuffer,
    step: f64,
    tol: f64,
    f: F,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph) -> Result<Var>,
{
    let mut probe = params.clone();
    let mut report = Vec::new();
    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        let p = params.param(id);
        if !p.trainable {
            continue;
        }
        let mut check = ParamCheck {
            name: p.name.clone(),
            entries: p.value.len(),
            max_rel_error: 0.0,
            worst: (0, 0.0, 0.0),
        };
        for k in 0..p.value.len() {
            let original = p.value.as_slice().expect("standard layout")[k];
            let mut central = |h: f64| -> Result<f64> {
                probe.get_mut(id).as_slice_mut().expect("standard layout")[k] = original + h;
                let plus = evaluate(&probe, &f)?;
                probe.get_mut(id).as_slice_mut().expect("standard layout")[k] = original - h;
                let minus = evaluate(&probe, &f)?;
                probe.get_mut(id).as_slice_mut().expect("standard layout")[k] = original;
                Ok((plus - minus) / (2.0 * h))
            };
            let (coarse, fine) = (central(step)?, central(step / 2.0)?);
            let numeric = (4.0 * fine - coarse) / 3.0;
            let a = analytic.get(id).as_slice().expect("standard layout")[k];
            let err = relative_error(a, numeric);
            if err > check.max_rel_error || k == 0 {
                check.max_rel_error = err;
                check.worst = (k, a, numeric);
            }
        }
        report.push(check);
    }
    Ok(GradCheckReport { tol, params: report })
}

/// Check the gradients recorded for `f` against central differences.
pub fn grad_check<F>(params: &ParamStore, step: f64, tol: f64, f: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph) -> Result<Var>,
{
    let analytic = analytic_gradients(params, &f)?;
    compare_gradients(params, &analytic, step, tol, f)
}
