//! One-dimensional golden-section minimization.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum<T> {
    pub x: T,
    pub value: T,
    pub iterations: usize,
    /// The objective was constant over the bracket; `x` is its midpoint.
    pub flat: bool,
}

const FLAT_PROBES: usize = 17;

/// Minimizes a unimodal `f` on `[lo, hi]` until the bracket is narrower than `xtol`.
///
/// When `f` is constant across the bracket (checked on a probe grid), returns the midpoint.
pub fn golden_section<T: Real>(f: impl Fn(T) -> T, lo: T, hi: T, xtol: T) -> Result<Minimum<T>> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::invalid(format!("invalid bracket [{lo}, {hi}]")));
    }
    if !(xtol > T::zero()) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let width = hi - lo;
    let probes: Vec<T> = (0..FLAT_PROBES)
        .map(|k| f(lo + width * T::lit(k as f64 / (FLAT_PROBES - 1) as f64)))
        .collect();
    if probes.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("objective is not finite on the bracket".into()));
    }
    let (pmin, pmax) = probes.iter().fold((T::infinity(), T::neg_infinity()), |(a, b), &v| (a.min(v), b.max(v)));
    if pmax - pmin <= T::tol(1e-12) * pmax.abs().max(T::one()) {
        let mid = (lo + hi) * T::lit(0.5);
        return Ok(Minimum { x: mid, value: f(mid), iterations: 0, flat: true });
    }

    let inv_phi = (T::lit(5.0).sqrt() - T::one()) * T::lit(0.5);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut iterations = 0;
    while b - a > xtol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        iterations += 1;
        if iterations > 10_000 {
            return Err(Error::Numerical("golden section failed to shrink the bracket".into()));
        }
    }
    let x = (a + b) * T::lit(0.5);
    Ok(Minimum { x, value: f(x), iterations, flat: false })
}
