//! Second-order jets: values carrying exact first and second derivatives.
//!
//! All profile functions are finite sums of power laws, and everything built
//! from them (the fiber matrix `B`, `Φ = ḂB⁻¹`, residuals) is rational in
//! those sums. Propagating `(f, f', f'')` through `+ − × ÷` therefore yields
//! analytic derivatives with no discretization error.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Div, Mul, Neg, Sub};

/// A value together with its first and second derivatives w.r.t. one variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jet2 {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet2 {
    pub const ZERO: Jet2 = Jet2 { v: 0.0, d1: 0.0, d2: 0.0 };

    pub fn constant(v: f64) -> Self {
        Jet2 { v, d1: 0.0, d2: 0.0 }
    }

    /// The identity jet at `s`: f(s) = s.
    pub fn variable(s: f64) -> Self {
        Jet2 { v: s, d1: 1.0, d2: 0.0 }
    }

    pub fn scale(self, c: f64) -> Self {
        Jet2 { v: c * self.v, d1: c * self.d1, d2: c * self.d2 }
    }

    /// Multiplicative inverse 1/f with (1/f)' = −f'/f², (1/f)'' = (2f'² − ff'')/f³.
    pub fn recip(self) -> Self {
        let f = self.v;
        let inv = 1.0 / f;
        Jet2 {
            v: inv,
            d1: -self.d1 * inv * inv,
            d2: (2.0 * self.d1 * self.d1 - f * self.d2) * inv * inv * inv,
        }
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, o: Jet2) -> Jet2 {
        Jet2 { v: self.v + o.v, d1: self.d1 + o.d1, d2: self.d2 + o.d2 }
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, o: Jet2) -> Jet2 {
        Jet2 { v: self.v - o.v, d1: self.d1 - o.d1, d2: self.d2 - o.d2 }
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        Jet2 { v: -self.v, d1: -self.d1, d2: -self.d2 }
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v * o.v,
            d1: self.d1 * o.v + self.v * o.d1,
            d2: self.d2 * o.v + 2.0 * self.d1 * o.d1 + self.v * o.d2,
        }
    }
}

impl Div for Jet2 {
    type Output = Jet2;
    fn div(self, o: Jet2) -> Jet2 {
        self * o.recip()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn quotient_jets_match_hand_derivatives() {
        // f(s) = s² / (3 + s): f' = (s² + 6s)/(3+s)², f'' = 18/(3+s)³
        let s = 1.7;
        let f = (Jet2::variable(s) * Jet2::variable(s)) / (Jet2::constant(3.0) + Jet2::variable(s));
        let den = 3.0 + s;
        assert!(close(f.v, s * s / den, 1e-15));
        assert!(close(f.d1, (s * s + 6.0 * s) / (den * den), 1e-15));
        assert!(close(f.d2, 18.0 / (den * den * den), 1e-15));
    }
}
