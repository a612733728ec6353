//! Certification of built profiles: the reduced Einstein system, fixed-fiber
//! Ricci curvature, interior positivity, and the smooth-collapse boundary
//! conditions.
//!
//! In the radial coordinate `s` (with β = κs, `˙` = d/ds, Υ = det Ḃ and
//! Φ = ḂB⁻¹) the Einstein system reads
//!
//! ```text
//! (hh)  nα/(2s²) − nα̇/(2s) − α̈/2 + Υ/2 = ε
//! (se)  (α/2)(−(n/s)Φ − Φ̇) − (α̇/2)Φ + n/(2β²)·Uᵀq = ε·I₂
//! (ba)  −(α/2)(n−1)/s² − α̇/(2s) + p/β − Δ/(2β²) = ε
//! ```
//!
//! The builders impose only (se)–(ba) plus boundary conditions; equation (hh)
//! then holds for the extended metrics by a general principle about the
//! constraint equation of the Einstein flow, and the mixed equations
//! Ric(·, N) = 0 vanish identically for the ansatz. This module does not take
//! that on faith: `einstein_residual` evaluates all three displayed equations,
//! (hh) included, with analytic derivatives.

use crate::profiles::{self, ModelParams, SolutionCoefficients};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Ricci data of a fixed fiber metric `Σ bᵢⱼθⁱθʲ + c²π*h` on the bundle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberRicci {
    /// Eigenvalue nΔ/(2c⁴) along the collapsing direction ê₁.
    pub lambda_v1: f64,
    /// Eigenvalue along ê₂ (always 0).
    pub lambda_v2: f64,
    /// Horizontal eigenvalue p/c² − Δ/(2c⁴), multiplicity 2n.
    pub lambda_h: f64,
    /// Scalar curvature (2n/c²)(p − Δ/(4c²)).
    pub scalar: f64,
    /// U = (q₁b₁₁ + q₂b₁₂, q₁b₁₂ + q₂b₂₂).
    pub u: [f64; 2],
    /// Δ = q·U = qBqᵀ.
    pub delta: f64,
}

impl FiberRicci {
    /// Squared Frobenius norm of the Ricci endomorphism, Σ λᵢ² with multiplicity.
    pub fn ric_norm_sq(&self, n: u32) -> f64 {
        self.lambda_v1.powi(2) + self.lambda_v2.powi(2) + 2.0 * n as f64 * self.lambda_h.powi(2)
    }
}

/// Ricci eigenvalues and scalar curvature of the bundle metric with fiber
/// matrix `B` (symmetric positive-definite) and base scale `c`.
pub fn fiber_ricci(b: &[[f64; 2]; 2], c: f64, params: &ModelParams) -> Result<FiberRicci> {
    if !(c > 0.0) {
        return Err(Error::Domain("base scale c must be positive".into()));
    }
    let det = b[0][0] * b[1][1] - b[0][1] * b[1][0];
    if !(b[0][0] > 0.0 && det > 0.0) || b[0][1] != b[1][0] {
        return Err(Error::Domain("B must be symmetric positive-definite".into()));
    }
    let (q1, q2) = (params.q1 as f64, params.q2 as f64);
    let u = [q1 * b[0][0] + q2 * b[0][1], q1 * b[0][1] + q2 * b[1][1]];
    let delta = q1 * u[0] + q2 * u[1];
    let n = params.nf();
    let p = params.pf();
    let c2 = c * c;
    let c4 = c2 * c2;
    Ok(FiberRicci {
        lambda_v1: n * delta / (2.0 * c4),
        lambda_v2: 0.0,
        lambda_h: p / c2 - delta / (2.0 * c4),
        scalar: 2.0 * n / c2 * (p - delta / (4.0 * c2)),
        u,
        delta,
    })
}

/// Pointwise residuals of the three Einstein equations over a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub grid: Vec<f64>,
    /// Residual of the constraint equation (hh) per point.
    pub res_hh: Vec<f64>,
    /// Residual of the base equation (ba) per point.
    pub res_ba: Vec<f64>,
    /// Max-abs entry of the 2×2 matrix equation (se) per point.
    pub res_se: Vec<f64>,
    /// Grid points where B failed to be positive-definite (structural, not residual).
    pub structural_failures: Vec<f64>,
    pub max_abs: f64,
}

/// Evaluate the Einstein system on a grid strictly inside the family domain.
pub fn einstein_residual(
    params: &ModelParams,
    coeffs: &SolutionCoefficients,
    grid: &[f64],
) -> Result<ResidualReport> {
    let sums = profiles::profile_sums(params, coeffs)?;
    let n = params.nf();
    let p = params.pf();
    let eps = params.eps;
    let (q1, q2) = (params.q1 as f64, params.q2 as f64);
    let kappa = coeffs.kappa;

    let mut report = ResidualReport {
        grid: grid.to_vec(),
        res_hh: Vec::with_capacity(grid.len()),
        res_ba: Vec::with_capacity(grid.len()),
        res_se: Vec::with_capacity(grid.len()),
        structural_failures: Vec::new(),
        max_abs: 0.0,
    };

    for &s in grid {
        let sample = profiles::eval_from_sums(params, &sums, s)?;
        if !sample.b_positive_definite() {
            report.structural_failures.push(s);
            report.res_hh.push(f64::NAN);
            report.res_ba.push(f64::NAN);
            report.res_se.push(f64::NAN);
            continue;
        }
        let alpha = sample.alpha;
        let delta = sample.delta;
        let b = sample.b;

        // Υ = det Ḃ
        let upsilon = b[0][0].d1 * b[1][1].d1 - b[0][1].d1 * b[0][1].d1;

        // B⁻¹, Φ = ḂB⁻¹, Φ̇ = B̈B⁻¹ − Φ²
        let detb = sample.det_b();
        let binv = [
            [b[1][1].v / detb, -b[0][1].v / detb],
            [-b[0][1].v / detb, b[0][0].v / detb],
        ];
        let bdot = [[b[0][0].d1, b[0][1].d1], [b[0][1].d1, b[1][1].d1]];
        let bddot = [[b[0][0].d2, b[0][1].d2], [b[0][1].d2, b[1][1].d2]];
        let phi = mat_mul(&bdot, &binv);
        let phi_dot = mat_sub(&mat_mul(&bddot, &binv), &mat_mul(&phi, &phi));

        let hh = n * alpha.v / (2.0 * s * s) - n * alpha.d1 / (2.0 * s) - alpha.d2 / 2.0 + upsilon / 2.0 - eps;
        let ba = -(alpha.v / 2.0) * (n - 1.0) / (s * s) - alpha.d1 / (2.0 * s) + p / (kappa * s)
            - delta.v / (2.0 * kappa * kappa * s * s)
            - eps;

        let beta_sq = (kappa * s) * (kappa * s);
        let uq = [
            [sample.u1.v * q1, sample.u1.v * q2],
            [sample.u2.v * q1, sample.u2.v * q2],
        ];
        let mut se_max: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let val = 0.5 * alpha.v * (-(n / s) * phi[i][j] - phi_dot[i][j]) - 0.5 * alpha.d1 * phi[i][j]
                    + n / (2.0 * beta_sq) * uq[i][j]
                    - if i == j { eps } else { 0.0 };
                se_max = se_max.max(val.abs());
            }
        }

        report.res_hh.push(hh);
        report.res_ba.push(ba);
        report.res_se.push(se_max);
        report.max_abs = report.max_abs.max(hh.abs()).max(ba.abs()).max(se_max);
    }
    Ok(report)
}

fn mat_mul(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn mat_sub(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][j] - b[i][j];
        }
    }
    out
}

/// Which end of the radial interval a collapse check refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CollapseEnd {
    /// s₁: the circle dual to q₁a collapses; d/dt √b₁₁ must equal +1.
    Left,
    /// s₂ (positive families): the circle dual to q₂a collapses; d/dt √b₂₂ must equal −1.
    Right,
}

/// Outcome of a smooth-collapse boundary check at one end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapseReport {
    pub end: CollapseEnd,
    pub s_end: f64,
    pub alpha_at_end: f64,
    /// U₁(s₁) at the left end, U₂(s₂) at the right end.
    pub u_at_end: f64,
    /// d/dt of the collapsing √bᵢᵢ: |q₂|α̇/(2√Δ) at s₁, |q₁|α̇/(2√Δ) at s₂.
    pub slope: f64,
    pub pass: bool,
}

/// Verify the smooth-collapse conditions at `s_end`: α = 0, the corresponding
/// U component = 0, and unit slope (+1 left, −1 right) of the collapsing
/// √b-entry in the arc-length coordinate.
pub fn collapse_check(
    params: &ModelParams,
    coeffs: &SolutionCoefficients,
    end: CollapseEnd,
    s_end: f64,
    tol: f64,
) -> Result<CollapseReport> {
    let sums = profiles::profile_sums(params, coeffs)?;
    if !(s_end > 0.0) {
        return Err(Error::Domain("collapse end must be at positive s".into()));
    }
    let alpha = sums.alpha.eval_jet(s_end);
    let delta = sums.delta.eval(s_end);
    if !(delta > 0.0) {
        return Err(Error::DegenerateFiber(format!("Delta({s_end}) = {delta} at collapse end")));
    }
    let (q, u, target) = match end {
        CollapseEnd::Left => (params.q2, sums.u1.eval(s_end), 1.0),
        CollapseEnd::Right => (params.q1, sums.u2.eval(s_end), -1.0),
    };
    let slope = q.abs() as f64 * alpha.d1 / (2.0 * delta.sqrt());
    // cancellation scale of α at the end from its term magnitudes
    let alpha_scale = 1.0 + sums.alpha.magnitude(s_end);
    let u_scale = 1.0 + sums.u1.magnitude(s_end).max(sums.u2.magnitude(s_end));
    let pass = alpha.v.abs() <= tol * alpha_scale && u.abs() <= tol * u_scale && (slope - target).abs() <= tol;
    Ok(CollapseReport {
        end,
        s_end,
        alpha_at_end: alpha.v,
        u_at_end: u,
        slope,
        pass,
    })
}

/// One positivity violation found by `domain_scan`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanViolation {
    pub s: f64,
    pub what: String,
    pub value: f64,
}

/// Result of sampling positivity over an interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainScan {
    pub points: usize,
    pub alpha_positive: bool,
    pub delta_positive: bool,
    pub b_positive_definite: bool,
    /// For positive families: F(z) < c₂ < 0 across the interior (None otherwise).
    pub f_bound_ok: Option<bool>,
    pub violations: Vec<ScanViolation>,
}

impl DomainScan {
    pub fn pass(&self) -> bool {
        self.alpha_positive
            && self.delta_positive
            && self.b_positive_definite
            && self.f_bound_ok.unwrap_or(true)
    }
}

/// Sample α > 0, Δ > 0 and positive-definiteness of B over `npoints`
/// log-spaced points of `interval`; for ε > 0 additionally the bound
/// F(z) = 2ε/(n+1)·z^{n+2} − 2p/(κ(n+1))·z^{n+1} − c₁z < c₂ < 0. Failures
/// are collected, never thrown.
pub fn domain_scan(
    params: &ModelParams,
    coeffs: &SolutionCoefficients,
    interval: (f64, f64),
    npoints: usize,
) -> Result<DomainScan> {
    let sums = profiles::profile_sums(params, coeffs)?;
    if !(interval.0 > 0.0 && interval.1 > interval.0) {
        return Err(Error::Domain(format!("bad scan interval {interval:?}")));
    }
    let grid = profiles::log_grid(interval.0, interval.1, npoints.max(2));
    let mut scan = DomainScan {
        points: grid.len(),
        alpha_positive: true,
        delta_positive: true,
        b_positive_definite: true,
        f_bound_ok: if params.eps > 0.0 { Some(coeffs.c2 < 0.0) } else { None },
        violations: Vec::new(),
    };
    let n = params.nf();
    let p = params.pf();
    for &s in &grid {
        let alpha = sums.alpha.eval(s);
        let delta = sums.delta.eval(s);
        if alpha <= 0.0 {
            scan.alpha_positive = false;
            scan.violations.push(ScanViolation { s, what: "alpha".into(), value: alpha });
        }
        if delta <= 0.0 {
            scan.delta_positive = false;
            scan.violations.push(ScanViolation { s, what: "delta".into(), value: delta });
            continue; // B undefined here
        }
        let u1 = sums.u1.eval(s);
        let q2 = params.q2 as f64;
        let b11 = (u1 * u1 + q2 * q2 * alpha) / delta;
        let detb = alpha; // det B = α identically
        if !(b11 > 0.0 && detb > 0.0) {
            scan.b_positive_definite = false;
            scan.violations.push(ScanViolation { s, what: "b_spd".into(), value: b11.min(detb) });
        }
        if params.eps > 0.0 {
            let f = 2.0 * params.eps / (n + 1.0) * s.powi(params.n as i32 + 2)
                - 2.0 * p / (coeffs.kappa * (n + 1.0)) * s.powi(params.n as i32 + 1)
                - coeffs.c1 * s;
            if !(f < coeffs.c2) {
                scan.f_bound_ok = Some(false);
                scan.violations.push(ScanViolation { s, what: "f_bound".into(), value: f - coeffs.c2 });
            }
        }
    }
    Ok(scan)
}

/// Default residual grid for a family: `npoints` log-spaced points clipped
/// a relative `clip` inside the domain, with noncompact domains truncated at
/// `s₁·span`.
pub fn residual_grid(s1: f64, s2: Option<f64>, npoints: usize, clip: f64, span: f64) -> Vec<f64> {
    match s2 {
        Some(s2) => {
            let width = s2 - s1;
            profiles::log_grid(s1 + clip * width, s2 - clip * width, npoints)
        }
        None => profiles::log_grid(s1 * (1.0 + clip), s1 * span, npoints),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builders::{build_nonpositive, build_positive, NegativeSpec, PositiveSpec};

    fn neg_family(lambda: f64, eps: f64) -> crate::builders::Family {
        build_nonpositive(&NegativeSpec {
            n: 1,
            p: 2,
            q1: 1,
            q2: 1,
            s1: 1.0,
            lambda,
            eps,
            vol_base: ModelParams::DEFAULT_VOL_BASE,
            psi_sign: 1,
        })
        .unwrap()
    }

    fn pos_family(q1: i64, q2: i64) -> crate::builders::Family {
        build_positive(&PositiveSpec { n: 1, p: 2, q1, q2, vol_base: ModelParams::DEFAULT_VOL_BASE }).unwrap()
    }

    #[test]
    fn fiber_ricci_trace_identity_random_spd() {
        // scalar = λ_v1 + λ_v2 + 2n·λ_h for arbitrary SPD B
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let params = ModelParams { n: 2, p: 3, q1: 2, q2: -1, eps: 0.0, vol_base: 1.0 };
        for _ in 0..100 {
            // SPD via LLᵀ with positive diagonal
            let l11: f64 = rng.gen_range(0.1..2.0);
            let l21: f64 = rng.gen_range(-1.5..1.5);
            let l22: f64 = rng.gen_range(0.1..2.0);
            let b = [
                [l11 * l11, l11 * l21],
                [l11 * l21, l21 * l21 + l22 * l22],
            ];
            let c = rng.gen_range(0.2..3.0);
            let fr = fiber_ricci(&b, c, &params).unwrap();
            let trace = fr.lambda_v1 + fr.lambda_v2 + 2.0 * params.nf() * fr.lambda_h;
            assert!((trace - fr.scalar).abs() <= 1e-12 * (1.0 + fr.scalar.abs()));
        }
    }

    #[test]
    fn fiber_ricci_boundary_limit_values() {
        // n=1, p=2, Δ = pκ, c² = κ → eigenvalues (p/(2κ), 0, p/(2κ)) with the
        // horizontal one of multiplicity 2
        let params = ModelParams { n: 1, p: 2, q1: 0, q2: 1, eps: -4.0, vol_base: 1.0 };
        let kappa = 1.7;
        // q = (0, 1) with diagonal B: Δ = b₂₂, so choose b₂₂ = pκ
        let b = [[1.0, 0.0], [0.0, 2.0 * kappa]];
        let fr = fiber_ricci(&b, kappa.sqrt(), &params).unwrap();
        let expect = 2.0 / (2.0 * kappa);
        assert!((fr.lambda_v1 - expect).abs() < 1e-14);
        assert_eq!(fr.lambda_v2, 0.0);
        assert!((fr.lambda_h - expect).abs() < 1e-14);
        assert!((fr.scalar - 3.0 * expect).abs() < 1e-13);
    }

    #[test]
    fn fiber_ricci_vertical_component_vanishes_with_u1() {
        // q = (0, q₂) and diagonal B: U₁ = 0, so the Ric(ẽ₁, ẽ₁) = n/(2c⁴)U₁²
        // component is zero
        let params = ModelParams { n: 1, p: 2, q1: 0, q2: 3, eps: 0.0, vol_base: 1.0 };
        let b = [[0.7, 0.0], [0.0, 1.3]];
        let fr = fiber_ricci(&b, 1.0, &params).unwrap();
        assert_eq!(fr.u[0], 0.0);
        assert_eq!(fr.delta, 9.0 * 1.3);
    }

    #[test]
    fn fiber_ricci_rejects_non_spd() {
        let params = ModelParams { n: 1, p: 2, q1: 1, q2: 1, eps: 0.0, vol_base: 1.0 };
        assert!(fiber_ricci(&[[1.0, 2.0], [2.0, 1.0]], 1.0, &params).is_err());
        assert!(fiber_ricci(&[[-1.0, 0.0], [0.0, 1.0]], 1.0, &params).is_err());
    }

    #[test]
    fn einstein_residual_negative_family() {
        let family = neg_family(0.5, -4.0);
        let grid = residual_grid(family.domain.s1, None, 200, 1e-6, 1e3);
        let report = einstein_residual(&family.params, &family.coeffs, &grid).unwrap();
        assert!(report.structural_failures.is_empty());
        assert!(report.max_abs <= 1e-8, "max residual {}", report.max_abs);
    }

    #[test]
    fn einstein_residual_positive_family() {
        let family = pos_family(2, 1);
        let grid = residual_grid(family.domain.s1, family.domain.s2, 200, 1e-6, 1e3);
        let report = einstein_residual(&family.params, &family.coeffs, &grid).unwrap();
        assert!(report.structural_failures.is_empty());
        assert!(report.max_abs <= 1e-8, "max residual {}", report.max_abs);
    }

    #[test]
    fn einstein_residual_detects_corruption() {
        let family = neg_family(0.5, -4.0);
        let mut corrupt = family.coeffs;
        corrupt.kappa *= 1.01;
        let grid = residual_grid(family.domain.s1, None, 50, 1e-3, 1e2);
        let report = einstein_residual(&family.params, &corrupt, &grid).unwrap();
        assert!(report.max_abs > 1e-3, "corruption went unnoticed: {}", report.max_abs);
    }

    #[test]
    fn collapse_left_passes_for_both_families() {
        for lambda in [0.5, 1.0] {
            let family = neg_family(lambda, -4.0);
            let rep =
                collapse_check(&family.params, &family.coeffs, CollapseEnd::Left, family.domain.s1, 1e-9).unwrap();
            assert!(rep.pass, "left collapse failed for lambda = {lambda}: {rep:?}");
            assert!((rep.slope - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn collapse_both_ends_positive_family() {
        let family = pos_family(2, 1);
        let left =
            collapse_check(&family.params, &family.coeffs, CollapseEnd::Left, family.domain.s1, 1e-9).unwrap();
        let right = collapse_check(
            &family.params,
            &family.coeffs,
            CollapseEnd::Right,
            family.domain.s2.unwrap(),
            1e-9,
        )
        .unwrap();
        assert!(left.pass && right.pass);
        assert!((right.slope + 1.0).abs() <= 1e-9);
        // right-end quantization: q₁²·α̇(s₂)² = 4Δ(s₂) with α̇(s₂) < 0
        let sums = profiles::profile_sums(&family.params, &family.coeffs).unwrap();
        let s2 = family.domain.s2.unwrap();
        let ad = sums.alpha.eval_jet(s2).d1;
        assert!(ad < 0.0);
        let lhs = (family.params.q1 as f64).powi(2) * ad * ad;
        let rhs = 4.0 * sums.delta.eval(s2);
        assert!((lhs - rhs).abs() <= 1e-8 * rhs);
    }

    #[test]
    fn domain_scan_interior_positive() {
        let family = neg_family(0.5, -4.0);
        let scan = domain_scan(
            &family.params,
            &family.coeffs,
            (family.domain.s1 * (1.0 + 1e-9), 1e6),
            200,
        )
        .unwrap();
        assert!(scan.pass(), "{:?}", scan.violations);

        let pos = pos_family(2, 1);
        let (s1, s2) = (pos.domain.s1, pos.domain.s2.unwrap());
        let w = s2 - s1;
        let scan = domain_scan(&pos.params, &pos.coeffs, (s1 + 1e-9 * w, s2 - 1e-9 * w), 200).unwrap();
        assert!(scan.pass(), "{:?}", scan.violations);
        assert_eq!(scan.f_bound_ok, Some(true));
    }

    #[test]
    fn domain_scan_reports_alpha_sign_below_root() {
        let family = neg_family(0.5, -4.0);
        let s_bad = family.domain.s1 * 0.98;
        let scan = domain_scan(&family.params, &family.coeffs, (s_bad, family.domain.s1 * 0.999), 20).unwrap();
        assert!(!scan.alpha_positive);
        assert!(scan.violations.iter().any(|v| v.what == "alpha" && v.value < 0.0));
    }
}
