//! Unpreconditioned conjugate gradients for symmetric positive definite
//! operators.

use super::sparse::{dot, norm, LinearOperator};
use crate::error::{Error, Result};

/// Relative residual used when no tolerance is given.
pub const DEFAULT_TOL: f64 = 1e-6;

/// Iteration cap `ceil(10 sqrt(n))`.
pub fn default_max_iter(n: usize) -> usize {
    ((10.0 * (n as f64).sqrt()).ceil() as usize).max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `||b - A x|| / ||b||` from the recursively updated residual.
    pub relative_residual: f64,
    pub converged: bool,
}

/// Solves `A x = b` starting from `x0` (zero when `None`).
///
/// Stops once `||r|| <= tol ||b||` or after `max_iter` iterations; hitting
/// the cap is reported through `converged`, not as an error.
pub fn cg_solve<A: LinearOperator + ?Sized>(
    a: &A,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome> {
    let n = a.dim();
    assert_eq!(b.len(), n, "right-hand side has wrong length");
    let b_norm = norm(b);
    if !b_norm.is_finite() {
        return Err(Error::Divergence { iterations: 0 });
    }
    if b_norm == 0.0 {
        return Ok(CgOutcome { x: vec![0.0; n], iterations: 0, relative_residual: 0.0, converged: true });
    }

    let mut x = match x0 {
        Some(x0) => {
            assert_eq!(x0.len(), n, "initial guess has wrong length");
            x0.to_vec()
        }
        None => vec![0.0; n],
    };
    let mut r = b.to_vec();
    let mut q = vec![0.0; n];
    if x0.is_some() {
        a.apply(&x, &mut q)?;
        for (ri, qi) in r.iter_mut().zip(&q) {
            *ri -= qi;
        }
    }
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let threshold = tol * b_norm;
    let mut iterations = 0;

    while rr.sqrt() > threshold && iterations < max_iter {
        a.apply(&p, &mut q)?;
        let curvature = dot(&p, &q);
        if !curvature.is_finite() {
            return Err(Error::Divergence { iterations });
        }
        if curvature <= 0.0 {
            return Err(Error::NotPositiveDefinite { iteration: iterations, curvature });
        }
        let alpha = rr / curvature;
        let mut rr_next = 0.0;
        for (((xi, ri), &pi), &qi) in x.iter_mut().zip(r.iter_mut()).zip(&p).zip(&q) {
            *xi += alpha * pi;
            *ri -= alpha * qi;
            rr_next += *ri * *ri;
        }
        if !rr_next.is_finite() {
            return Err(Error::Divergence { iterations });
        }
        let beta = rr_next / rr;
        for (pi, &ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rr = rr_next;
        iterations += 1;
    }

    let relative_residual = rr.sqrt() / b_norm;
    Ok(CgOutcome { x, iterations, relative_residual, converged: relative_residual <= tol })
}
