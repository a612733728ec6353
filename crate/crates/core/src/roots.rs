//! Scalar bisection with guarded bracket expansion, plus a small damped
//! 2-D Newton used to polish continuation solutions.

use crate::{Error, Result};

/// Bisection on `[lo, hi]`, requiring a sign change. Iterates until the
/// bracket shrinks below `rel_tol` relative to its midpoint.
pub fn bisect<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64, rel_tol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Solver(format!(
            "bisect: no sign change on [{lo}, {hi}] (f = {flo:e}, {fhi:e})"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= rel_tol * mid.abs().max(f64::MIN_POSITIVE) {
            return Ok(mid);
        }
        let fmid = f(mid);
        if fmid == 0.0 {
            return Ok(mid);
        }
        if fmid.signum() == flo.signum() {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Expand `[lo, hi]` upward by doubling `hi` until `f` changes sign, then
/// bisect. Intended for functions known to be eventually positive (or
/// negative) as the argument grows.
pub fn bisect_expanding<F: Fn(f64) -> f64>(f: &F, lo: f64, mut hi: f64, rel_tol: f64) -> Result<f64> {
    let flo = f(lo);
    let mut fhi = f(hi);
    let mut guard = 0;
    while flo.signum() == fhi.signum() {
        hi *= 2.0;
        fhi = f(hi);
        guard += 1;
        if guard > 2000 || !hi.is_finite() {
            return Err(Error::Solver("bisect_expanding: bracket expansion failed".into()));
        }
    }
    bisect(f, lo, hi, rel_tol)
}

/// Damped Newton iteration on a 2-D residual with finite-difference Jacobian.
/// Returns the refined point; gives the input back unchanged if no step
/// improves the residual norm (the caller treats this as "already converged").
pub fn newton2d<F: Fn(f64, f64) -> Option<(f64, f64)>>(
    f: &F,
    mut x: f64,
    mut y: f64,
    tol: f64,
    max_iter: usize,
) -> (f64, f64) {
    let norm = |(a, b): (f64, f64)| a.abs().max(b.abs());
    let Some(mut r) = f(x, y) else { return (x, y) };
    for _ in 0..max_iter {
        if norm(r) <= tol {
            break;
        }
        let hx = 1e-7 * x.abs().max(1e-12);
        let hy = 1e-7 * y.abs().max(1e-12);
        let (Some(rx), Some(ry)) = (f(x + hx, y), f(x, y + hy)) else { break };
        let j11 = (rx.0 - r.0) / hx;
        let j21 = (rx.1 - r.1) / hx;
        let j12 = (ry.0 - r.0) / hy;
        let j22 = (ry.1 - r.1) / hy;
        let det = j11 * j22 - j12 * j21;
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let dx = (r.0 * j22 - r.1 * j12) / det;
        let dy = (r.1 * j11 - r.0 * j21) / det;
        let mut damp = 1.0;
        let mut advanced = false;
        while damp >= 1.0 / 64.0 {
            let (xn, yn) = (x - damp * dx, y - damp * dy);
            if let Some(rn) = f(xn, yn) {
                if norm(rn) < norm(r) {
                    x = xn;
                    y = yn;
                    r = rn;
                    advanced = true;
                    break;
                }
            }
            damp *= 0.5;
        }
        if !advanced {
            break;
        }
    }
    (x, y)
}
