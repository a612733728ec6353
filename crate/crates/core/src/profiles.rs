//! Closed-form metric profile functions and their analytic derivatives.
//!
//! With `β = κs` the radial profiles of every family are
//!
//! ```text
//! α(s) = −2ε/(n+1)·s² + 2p/(κ(n+1))·s + c₁ s^{1−n} + c₂ s^{−n}
//! Δ(s) = 2pκ/(n+1)·s + κ²c₂ s^{−n}
//! ```
//!
//! and, in the generic family (ψ ≠ 0),
//!
//! ```text
//! U₁(s) = 2κ/(ψ(n+1))·(p w₁ + n p q₂ κⁿ c₁ + q₂ ε κ^{n+1} c₂ (n+1))·s
//!         + κ²c₂/ψ·(w₁ − q₂ κⁿ c₁)·s^{−n}
//! U₂(s) = 2κ/(ψ(n+1))·(p w₂ − n p q₁ κⁿ c₁ − q₁ ε κ^{n+1} c₂ (n+1))·s
//!         + κ²c₂/ψ·(w₂ + q₁ κⁿ c₁)·s^{−n}
//! ```
//!
//! subject to the consistency identity ψ² = 2(n+1)κ^{2n+3}c₂(pc₁ + c₂εκ).
//! In the degenerate family ψ = 0 (with c₂ = 0) instead U₁ ≡ 0 and
//! U₂ = Δ/q₂. The fiber inner products recover from
//!
//! ```text
//! b₁₁ = (U₁² + q₂²α)/Δ,  b₁₂ = (U₁U₂ − q₁q₂α)/Δ,  b₂₂ = (U₂² + q₁²α)/Δ,
//! ```
//!
//! so that det B = α and q₁U₁ + q₂U₂ = Δ hold identically. Everything is a
//! finite sum of power laws; derivatives are exact term-wise.

use crate::jet::Jet2;
use crate::power::PowerSum;
use crate::quad;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Base and bundle data: complex dimension `n` and Einstein constant `p` of
/// the Fano Kähler-Einstein base `V` (Ric(h) = p·h, c₁(V) = p·a), the torus
/// bundle charges `(q1, q2)`, the Einstein constant `eps` of the total space,
/// and the base volume `Vol_h(V)` (only overall volume scales depend on it).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: u32,
    pub p: u32,
    pub q1: i64,
    pub q2: i64,
    pub eps: f64,
    pub vol_base: f64,
}

impl ModelParams {
    /// Default base volume: area of the round 2-sphere with Ric = 2h, the
    /// (n, p) = (1, 2) base. Volume ratios never depend on this choice.
    pub const DEFAULT_VOL_BASE: f64 = 2.0 * std::f64::consts::PI;

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidSpec("base dimension n must be positive".into()));
        }
        if self.p == 0 {
            return Err(Error::InvalidSpec("base Einstein constant p must be positive".into()));
        }
        if self.q1 == 0 && self.q2 == 0 {
            return Err(Error::InvalidSpec("(q1, q2) = (0, 0) is not a torus bundle charge".into()));
        }
        if !(self.vol_base > 0.0) {
            return Err(Error::InvalidSpec("vol_base must be positive".into()));
        }
        Ok(())
    }

    /// Dimension of the total space, 2n + 3.
    pub fn dim(&self) -> u32 {
        2 * self.n + 3
    }

    pub(crate) fn nf(&self) -> f64 {
        self.n as f64
    }

    pub(crate) fn pf(&self) -> f64 {
        self.p as f64
    }
}

/// Which branch of the exact solution a coefficient set belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProfileKind {
    /// ψ ≠ 0: both `U₁` and `U₂` are nontrivial power sums.
    GenericPsi,
    /// ψ = 0 (and c₂ = 0 for the families built here): U₁ ≡ 0, U₂ = Δ/q₂.
    PsiZero,
}

/// The closed-form constants defining all profile functions of one family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolutionCoefficients {
    pub kind: ProfileKind,
    /// Slope of β = κs.
    pub kappa: f64,
    pub c1: f64,
    pub c2: f64,
    pub w1: f64,
    pub w2: f64,
    /// ψ = q₁w₁ + q₂w₂.
    pub psi: f64,
}

impl SolutionCoefficients {
    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        if !(self.kappa > 0.0) {
            return Err(Error::InconsistentCoefficients("kappa must be positive".into()));
        }
        match self.kind {
            ProfileKind::GenericPsi if self.psi == 0.0 => Err(Error::InconsistentCoefficients(
                "GenericPsi coefficients require psi != 0".into(),
            )),
            ProfileKind::PsiZero if self.psi != 0.0 => Err(Error::InconsistentCoefficients(
                "PsiZero coefficients require psi = 0".into(),
            )),
            ProfileKind::PsiZero if params.q2 == 0 => Err(Error::InconsistentCoefficients(
                "PsiZero family requires q2 != 0".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// The power sums behind one coefficient set.
#[derive(Debug, Clone)]
pub struct ProfileSums {
    pub alpha: PowerSum,
    pub beta: PowerSum,
    pub delta: PowerSum,
    pub u1: PowerSum,
    pub u2: PowerSum,
}

/// Expand a coefficient set into explicit power sums.
pub fn profile_sums(params: &ModelParams, coeffs: &SolutionCoefficients) -> Result<ProfileSums> {
    params.validate()?;
    coeffs.validate(params)?;
    let n = params.nf();
    let p = params.pf();
    let eps = params.eps;
    let k = coeffs.kappa;
    let (c1, c2) = (coeffs.c1, coeffs.c2);
    let ni = params.n as i32;

    let alpha = PowerSum::new([
        (-2.0 * eps / (n + 1.0), 2),
        (2.0 * p / (k * (n + 1.0)), 1),
        (c1, 1 - ni),
        (c2, -ni),
    ]);
    let beta = PowerSum::new([(k, 1)]);
    let delta = PowerSum::new([(2.0 * p * k / (n + 1.0), 1), (k * k * c2, -ni)]);

    let (u1, u2) = match coeffs.kind {
        ProfileKind::GenericPsi => {
            let psi = coeffs.psi;
            let (w1, w2) = (coeffs.w1, coeffs.w2);
            let (q1, q2) = (params.q1 as f64, params.q2 as f64);
            let kn = k.powi(ni);
            let lin = 2.0 * k / (psi * (n + 1.0));
            let pow = k * k * c2 / psi;
            let u1 = PowerSum::new([
                (lin * (p * w1 + n * p * q2 * kn * c1 + q2 * eps * k * kn * c2 * (n + 1.0)), 1),
                (pow * (w1 - q2 * kn * c1), -ni),
            ]);
            let u2 = PowerSum::new([
                (lin * (p * w2 - n * p * q1 * kn * c1 - q1 * eps * k * kn * c2 * (n + 1.0)), 1),
                (pow * (w2 + q1 * kn * c1), -ni),
            ]);
            (u1, u2)
        }
        ProfileKind::PsiZero => {
            let u1 = PowerSum::new([]);
            let u2 = delta.scale(1.0 / params.q2 as f64);
            (u1, u2)
        }
    };

    Ok(ProfileSums { alpha, beta, delta, u1, u2 })
}

/// One radial sample: all profile functions with exact derivatives through
/// second order, plus the fiber matrix `B = (bᵢⱼ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileSample {
    pub s: f64,
    pub alpha: Jet2,
    pub beta: Jet2,
    pub delta: Jet2,
    pub u1: Jet2,
    pub u2: Jet2,
    /// Symmetric 2×2 fiber matrix, row-major; `b[0][1] == b[1][0]`.
    pub b: [[Jet2; 2]; 2],
}

impl ProfileSample {
    /// det B at the sample point.
    pub fn det_b(&self) -> f64 {
        self.b[0][0].v * self.b[1][1].v - self.b[0][1].v * self.b[0][1].v
    }

    /// B is positive-definite iff b₁₁ > 0 and det B > 0.
    pub fn b_positive_definite(&self) -> bool {
        self.b[0][0].v > 0.0 && self.det_b() > 0.0
    }
}

/// Evaluate all profile functions at `s > 0` with analytic derivatives.
///
/// Fails on `s ≤ 0`, on GenericPsi coefficients with ψ = 0, and where the
/// fiber form degenerates (Δ(s) ≤ 0 makes `B` undefined).
pub fn eval_profile(params: &ModelParams, coeffs: &SolutionCoefficients, s: f64) -> Result<ProfileSample> {
    let sums = profile_sums(params, coeffs)?;
    eval_from_sums(params, &sums, s)
}

pub(crate) fn eval_from_sums(params: &ModelParams, sums: &ProfileSums, s: f64) -> Result<ProfileSample> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("radial coordinate must be positive, got {s}")));
    }
    let alpha = sums.alpha.eval_jet(s);
    let beta = sums.beta.eval_jet(s);
    let delta = sums.delta.eval_jet(s);
    let u1 = sums.u1.eval_jet(s);
    let u2 = sums.u2.eval_jet(s);
    if !(delta.v > 0.0) {
        return Err(Error::DegenerateFiber(format!("Delta({s}) = {} is not positive", delta.v)));
    }
    let (q1, q2) = (params.q1 as f64, params.q2 as f64);
    let b11 = (u1 * u1 + alpha.scale(q2 * q2)) / delta;
    let b12 = (u1 * u2 - alpha.scale(q1 * q2)) / delta;
    let b22 = (u2 * u2 + alpha.scale(q1 * q1)) / delta;
    Ok(ProfileSample {
        s,
        alpha,
        beta,
        delta,
        u1,
        u2,
        b: [[b11, b12], [b12, b22]],
    })
}

/// The fiber matrix `B(s)` and whether it is positive-definite there.
pub fn b_matrix(params: &ModelParams, coeffs: &SolutionCoefficients, s: f64) -> Result<([[f64; 2]; 2], bool)> {
    let sample = eval_profile(params, coeffs, s)?;
    let b = [
        [sample.b[0][0].v, sample.b[0][1].v],
        [sample.b[1][0].v, sample.b[1][1].v],
    ];
    Ok((b, sample.b_positive_definite()))
}

/// Residual of the consistency identity ψ² − 2(n+1)κ^{2n+3}c₂(pc₁ + c₂εκ).
/// Builders must keep |residual| ≤ 1e−9·ψ².
pub fn psi_consistency(params: &ModelParams, coeffs: &SolutionCoefficients) -> Result<f64> {
    if coeffs.kind != ProfileKind::GenericPsi {
        return Err(Error::InconsistentCoefficients(
            "psi consistency identity applies to the GenericPsi family only".into(),
        ));
    }
    let n = params.nf();
    let k = coeffs.kappa;
    let rhs = 2.0 * (n + 1.0)
        * k.powi(2 * params.n as i32 + 3)
        * coeffs.c2
        * (params.pf() * coeffs.c1 + coeffs.c2 * params.eps * k);
    Ok(coeffs.psi * coeffs.psi - rhs)
}

/// α with its collapse roots divided out exactly.
///
/// `α(s)·sⁿ` is a polynomial `P` of degree n+2 that vanishes at the collapse
/// roots, so synthetic division gives `α = (s−s₁)·Q(s)/sⁿ` (one end) or
/// `α = (s−s₁)(s₂−s)·Q(s)/sⁿ` (two ends) with `Q` strictly positive across
/// the domain. Arc-length integrands built from this factorization have no
/// endpoint cancellation: the `|τ−root|^{−1/2}` singularities are removed by
/// explicit substitutions (`τ = s₁ + u²`, or `τ = s₁ + (s₂−s₁)sin²θ`).
#[derive(Debug, Clone)]
pub struct FactoredAlpha {
    /// Dense coefficients of Q, ascending powers.
    q: Vec<f64>,
    s1: f64,
    s2: Option<f64>,
    n: i32,
}

impl FactoredAlpha {
    pub fn new(params: &ModelParams, coeffs: &SolutionCoefficients, s1: f64, s2: Option<f64>) -> Result<Self> {
        params.validate()?;
        coeffs.validate(params)?;
        if !(s1 > 0.0) || s2.is_some_and(|s2| s2 <= s1) {
            return Err(Error::Domain(format!("need 0 < s1 < s2, got s1 = {s1}, s2 = {s2:?}")));
        }
        let n = params.n as usize;
        let nf = params.nf();
        let mut p = vec![0.0; n + 3];
        p[0] = coeffs.c2;
        p[1] = coeffs.c1;
        p[n + 1] = 2.0 * params.pf() / (coeffs.kappa * (nf + 1.0));
        p[n + 2] = -2.0 * params.eps / (nf + 1.0);
        let mut q = divide_out_root(&p, s1);
        if let Some(s2) = s2 {
            // (s − s₂) carries the sign flip into (s₂ − s)
            q = divide_out_root(&q, s2).iter().map(|c| -c).collect();
        }
        Ok(FactoredAlpha { q, s1, s2, n: params.n as i32 })
    }

    fn q_at(&self, s: f64) -> f64 {
        self.q.iter().rev().fold(0.0, |acc, &c| acc * s + c)
    }

    /// α reassembled from the factorization (agrees with the power sum away
    /// from the roots and is exact at them).
    pub fn alpha(&self, s: f64) -> f64 {
        let ends = match self.s2 {
            Some(s2) => (s - self.s1) * (s2 - s),
            None => s - self.s1,
        };
        ends * self.q_at(s) / s.powi(self.n)
    }

    /// Arc length t(s) = ∫_{s₁}^s α^{−1/2} dτ by adaptive quadrature in the
    /// desingularizing variable.
    pub fn t_of_s(&self, s: f64, quad_tol: f64) -> Result<f64> {
        if s < self.s1 || self.s2.is_some_and(|s2| s > s2) {
            return Err(Error::Domain(format!("s = {s} outside the family domain")));
        }
        if s == self.s1 {
            return Ok(0.0);
        }
        let nonpositive = std::cell::Cell::new(false);
        let x = match self.s2 {
            None => (s - self.s1).sqrt(),
            Some(_) => self.theta_at(s),
        };
        let t = quad::adaptive_simpson(&self.integrand(&nonpositive), 0.0, x, quad_tol)?;
        if nonpositive.get() {
            return Err(Error::Domain(format!("alpha is not positive inside ({}, {s})", self.s1)));
        }
        Ok(t)
    }

    /// Arc lengths along an increasing grid, accumulated pairwise so a sweep
    /// costs one pass.
    pub fn t_along_grid(&self, grid: &[f64], quad_tol: f64) -> Result<Vec<f64>> {
        let nonpositive = std::cell::Cell::new(false);
        let f = self.integrand(&nonpositive);
        let mut out = Vec::with_capacity(grid.len());
        let mut prev_x = 0.0; // in the substituted variable
        let mut t = 0.0;
        for (i, &s) in grid.iter().enumerate() {
            if s < self.s1 || (i > 0 && s < grid[i - 1]) || self.s2.is_some_and(|s2| s > s2) {
                return Err(Error::Domain("t_along_grid needs an increasing grid in the domain".into()));
            }
            let x = match self.s2 {
                None => (s - self.s1).sqrt(),
                Some(_) => self.theta_at(s),
            };
            t += quad::adaptive_simpson(&f, prev_x, x, quad_tol)?;
            prev_x = x;
            out.push(t);
        }
        if nonpositive.get() {
            return Err(Error::Domain("alpha is not positive inside the grid range".into()));
        }
        Ok(out)
    }

    /// dt in the desingularized variable: `2 τ^{n/2}/√Q(τ) dx` with
    /// τ = s₁ + x² (noncompact) or τ = s₁ + (s₂−s₁)sin²x (compact).
    fn integrand<'a>(&'a self, nonpositive: &'a std::cell::Cell<bool>) -> impl Fn(f64) -> f64 + 'a {
        move |x: f64| {
            let tau = match self.s2 {
                None => self.s1 + x * x,
                Some(s2) => {
                    let sn = x.sin();
                    self.s1 + (s2 - self.s1) * sn * sn
                }
            };
            let q = self.q_at(tau);
            if q <= 0.0 {
                nonpositive.set(true);
                return 0.0;
            }
            2.0 * tau.powi(self.n).sqrt() / q.sqrt()
        }
    }

    fn theta_at(&self, s: f64) -> f64 {
        let s2 = self.s2.expect("theta coordinate needs a compact domain");
        ((s - self.s1) / (s2 - self.s1)).sqrt().min(1.0).asin()
    }
}

/// Synthetic division: returns `q` with `p(s) = (s − r)·q(s) + p(r)`; the
/// remainder `p(r)` (the root-cancellation noise) is dropped.
fn divide_out_root(p: &[f64], r: f64) -> Vec<f64> {
    let deg = p.len() - 1;
    let mut q = vec![0.0; deg];
    let mut carry = p[deg];
    for k in (1..=deg).rev() {
        q[k - 1] = carry;
        carry = p[k - 1] + carry * r;
    }
    q
}

/// Arc length `t(s) = ∫_{s₁}^{s} α(τ)^{−1/2} dτ` for a family with left
/// collapse root `s₁` (and right root `s₂` if compact).
///
/// α vanishes simply at each root, giving the integrand an integrable
/// `|τ−root|^{−1/2}` singularity; the roots are divided out of α exactly and
/// removed by substitution, so the quadrature only ever sees a smooth
/// integrand. Fails if α ≤ 0 is detected strictly inside the domain.
pub fn t_of_s(
    params: &ModelParams,
    coeffs: &SolutionCoefficients,
    s1: f64,
    s2: Option<f64>,
    s: f64,
    quad_tol: f64,
) -> Result<f64> {
    FactoredAlpha::new(params, coeffs, s1, s2)?.t_of_s(s, quad_tol)
}

/// Arc lengths at every point of an increasing `s`-grid in one sweep.
pub fn t_along_grid(
    params: &ModelParams,
    coeffs: &SolutionCoefficients,
    s1: f64,
    s2: Option<f64>,
    grid: &[f64],
    quad_tol: f64,
) -> Result<Vec<f64>> {
    FactoredAlpha::new(params, coeffs, s1, s2)?.t_along_grid(grid, quad_tol)
}

/// Strictly increasing logarithmic grid on `[a, b]`.
pub fn log_grid(a: f64, b: f64, points: usize) -> Vec<f64> {
    assert!(a > 0.0 && b > a && points >= 2, "log_grid needs 0 < a < b and >= 2 points");
    let la = a.ln();
    let lb = b.ln();
    (0..points)
        .map(|i| (la + (lb - la) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn toy_psizero() -> (ModelParams, SolutionCoefficients) {
        // n=1, p=2, kappa=1, c2=0: Delta = 2pκ/(n+1)·s = 2s
        let params = ModelParams { n: 1, p: 2, q1: 1, q2: 1, eps: 0.0, vol_base: ModelParams::DEFAULT_VOL_BASE };
        let coeffs = SolutionCoefficients {
            kind: ProfileKind::PsiZero,
            kappa: 1.0,
            c1: -2.0, // collapse root at s1 = 1 for eps = 0: c1 = −2p/(κ(n+1))·s1^n
            c2: 0.0,
            w1: 2.0,  // −n q2 κⁿ c1
            w2: -2.0, // n q1 κⁿ c1
            psi: 0.0,
        };
        (params, coeffs)
    }

    #[test]
    fn psizero_delta_direct_substitution() {
        // Δ = 2pκs/(n+1) = 2·2·1·3/2 = 6 at s = 3
        let (params, coeffs) = toy_psizero();
        let sm = eval_profile(&params, &coeffs, 3.0).unwrap();
        assert_eq!(sm.delta.v, 6.0);
        assert_eq!(sm.u1.v, 0.0);
        assert_eq!(sm.u2.v, 6.0 / params.q2 as f64);
        assert_eq!(sm.beta.v, 3.0);
    }

    #[test]
    fn psizero_b_ratio_is_minus_q1_over_q2() {
        let (mut params, coeffs) = toy_psizero();
        params.q1 = 3;
        params.q2 = 2;
        for s in [1.5, 2.0, 7.0, 40.0] {
            let sm = eval_profile(&params, &coeffs, s).unwrap();
            let ratio = sm.b[0][1].v / sm.b[0][0].v;
            assert_eq!(ratio, -(params.q1 as f64) / params.q2 as f64);
        }
    }

    #[test]
    fn det_b_equals_alpha_and_delta_identity() {
        let (params, coeffs) = toy_psizero();
        for s in log_grid(1.0 + 1e-6, 1e3, 100) {
            let sm = eval_profile(&params, &coeffs, s).unwrap();
            let det = sm.det_b();
            assert!(
                (det - sm.alpha.v).abs() <= 1e-10 * (1.0 + sm.alpha.v.abs()),
                "det B != alpha at s = {s}"
            );
            let qu = params.q1 as f64 * sm.u1.v + params.q2 as f64 * sm.u2.v;
            assert!((qu - sm.delta.v).abs() <= 1e-10 * (1.0 + sm.delta.v.abs()));
        }
    }

    #[test]
    fn collapse_point_zeroes_b_row() {
        // At a point with α = 0 and U₁ = 0: b₁₁ = b₁₂ = 0 and b₂₂ = Δ/q₂².
        let (params, coeffs) = toy_psizero();
        let sm = eval_profile(&params, &coeffs, 1.0).unwrap();
        assert!(sm.alpha.v.abs() < 1e-15);
        assert!(sm.b[0][0].v.abs() < 1e-15);
        assert!(sm.b[0][1].v.abs() < 1e-15);
        let expected = sm.delta.v / (params.q2 as f64).powi(2);
        assert!((sm.b[1][1].v - expected).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (params, mut coeffs) = toy_psizero();
        assert!(matches!(eval_profile(&params, &coeffs, 0.0), Err(Error::Domain(_))));
        assert!(matches!(eval_profile(&params, &coeffs, -1.0), Err(Error::Domain(_))));
        coeffs.kind = ProfileKind::GenericPsi;
        // psi = 0 under GenericPsi is inconsistent
        assert!(matches!(
            eval_profile(&params, &coeffs, 2.0),
            Err(Error::InconsistentCoefficients(_))
        ));
    }

    #[test]
    fn eval_is_bitwise_deterministic() {
        let (params, coeffs) = toy_psizero();
        let a = eval_profile(&params, &coeffs, 2.34567).unwrap();
        let b = eval_profile(&params, &coeffs, 2.34567).unwrap();
        assert_eq!(a.alpha.v.to_bits(), b.alpha.v.to_bits());
        assert_eq!(a.b[0][1].d2.to_bits(), b.b[0][1].d2.to_bits());
        assert_eq!(a.u2.d1.to_bits(), b.u2.d1.to_bits());
    }

    #[test]
    fn t_vanishes_at_the_collapse_root() {
        let (params, coeffs) = toy_psizero();
        let t = t_of_s(&params, &coeffs, 1.0, None, 1.0, 1e-12).unwrap();
        assert_eq!(t, 0.0);
        let t_eps = t_of_s(&params, &coeffs, 1.0, None, 1.0 + 1e-12, 1e-12).unwrap();
        assert!(t_eps >= 0.0 && t_eps < 1e-5);
    }

    #[test]
    fn factored_alpha_matches_power_sum() {
        let (params, coeffs) = toy_psizero();
        let fa = FactoredAlpha::new(&params, &coeffs, 1.0, None).unwrap();
        let sums = profile_sums(&params, &coeffs).unwrap();
        for s in log_grid(1.0 + 1e-3, 1e5, 40) {
            let a = sums.alpha.eval(s);
            assert!((fa.alpha(s) - a).abs() <= 1e-12 * (1.0 + a.abs()));
        }
        assert_eq!(fa.alpha(1.0), 0.0);
    }
}
