//! Finite sums of integer power laws `Σ cₖ s^k` with exact term-wise derivatives.
//!
//! Every profile function of the metrics handled here lives in the span of
//! `{s², s, s^{1−n}, s^{−n}}`, so this representation is closed under the
//! operations the construction needs and carries no discretization error.

use crate::jet::Jet2;
use serde::{Deserialize, Serialize};

/// `Σ cₖ s^k` over integer exponents `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSum {
    /// `(coefficient, exponent)` pairs; zero coefficients are dropped.
    terms: Vec<(f64, i32)>,
}

impl PowerSum {
    pub fn new(terms: impl IntoIterator<Item = (f64, i32)>) -> Self {
        let mut kept: Vec<(f64, i32)> = Vec::new();
        for (c, k) in terms {
            if c == 0.0 {
                continue;
            }
            match kept.iter_mut().find(|(_, kk)| *kk == k) {
                Some(slot) => slot.0 += c,
                None => kept.push((c, k)),
            }
        }
        kept.sort_by_key(|&(_, k)| std::cmp::Reverse(k));
        PowerSum { terms: kept }
    }

    pub fn terms(&self) -> &[(f64, i32)] {
        &self.terms
    }

    /// Coefficient of `s^k` (0 if absent).
    pub fn coefficient(&self, k: i32) -> f64 {
        self.terms.iter().find(|&&(_, kk)| kk == k).map_or(0.0, |&(c, _)| c)
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.terms.iter().map(|&(c, k)| c * s.powi(k)).sum()
    }

    /// Value with exact first and second derivatives at `s`.
    pub fn eval_jet(&self, s: f64) -> Jet2 {
        let mut j = Jet2::ZERO;
        for &(c, k) in &self.terms {
            let kf = k as f64;
            j.v += c * s.powi(k);
            j.d1 += c * kf * s.powi(k - 1);
            j.d2 += c * kf * (kf - 1.0) * s.powi(k - 2);
        }
        j
    }

    /// `Σ |cₖ s^k|` — the natural scale for cancellation tolerances at `s`.
    pub fn magnitude(&self, s: f64) -> f64 {
        self.terms.iter().map(|&(c, k)| (c * s.powi(k)).abs()).sum()
    }

    pub fn scale(&self, f: f64) -> PowerSum {
        PowerSum::new(self.terms.iter().map(|&(c, k)| (c * f, k)))
    }
}
