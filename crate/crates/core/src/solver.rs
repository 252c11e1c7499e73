//! Oscillation thresholds from the vanishing of the round-trip determinant.
//!
//! `det(I − M0 − p·M1)` is a polynomial of degree four in `p`, even because
//! `(A0, A1, A2) → (−A0, −A1, −A2)` maps steady states onto steady states.
//! It is therefore a quadratic in the intensity `I = p²`: the two roots are
//! the two oscillation regimes, the lower one being the threshold.

use serde::Serialize;
use thiserror::Error;

use crate::cavity::{Mat4, MirrorParams, OperatingPoint, Opo, RoundTripSystem};
use crate::crystal::CouplingConstants;

/// Odd coefficients above this fraction of the even ones reject the fit.
pub const EVENNESS_TOL: f64 = 1e-10;
/// Polished roots must satisfy `|det| ≤ RESIDUAL_TOL · s`, where `s` is the
/// larger of the maximum sampled `|det|` and the Hadamard bound at the root.
pub const RESIDUAL_TOL: f64 = 1e-9;
/// Relative discriminant below which two roots are merged into one.
/// Negative closed-form discriminants down to this value are rounding noise
/// around a double root.
pub const APPENDIX_V_TOL: f64 = 1e-12;
/// Interpolated coefficients below `COEFF_FLOOR · max sampled |det|` are
/// rounding noise.
pub const COEFF_FLOOR: f64 = 1e-12;
pub const REALITY_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("determinant interpolation is not even in the pump amplitude (odd/even = {ratio:e})")]
    FitDegenerate { ratio: f64 },
    #[error("polished root p = {p} leaves |det| = {residual:e} above tolerance {tolerance:e}")]
    ResidualTooLarge { p: f64, residual: f64, tolerance: f64 },
    #[error("negative discriminant v = {v:e}: point lies outside the locking zone")]
    NegativeDiscriminant { v: f64 },
    #[error("invalid normalization: {0}")]
    InvalidNormalization(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdStatus {
    NoOscillation,
    OneRoot,
    TwoRoots,
}

/// Normalized threshold intensities, ascending.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdResult {
    pub roots: Vec<f64>,
    pub det_residuals: Vec<f64>,
    pub status: ThresholdStatus,
}

impl ThresholdResult {
    pub fn no_oscillation() -> Self {
        Self {
            roots: Vec::new(),
            det_residuals: Vec::new(),
            status: ThresholdStatus::NoOscillation,
        }
    }

    /// The lower (physically selected) threshold.
    pub fn lower(&self) -> Option<f64> {
        self.roots.first().copied()
    }
}

/// Intracavity pump intensity of the standard OPO threshold, in `p²` units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalizationContext {
    pub sigma0_intensity: f64,
}

/// Determinant of a 4×4 matrix by Laplace expansion along the first two
/// rows (sum over complementary 2×2 minors).
pub fn det4(m: &Mat4) -> f64 {
    let minor = |r: usize, a: usize, b: usize| m[r][a] * m[r + 1][b] - m[r][b] * m[r + 1][a];
    let top = |a, b| minor(0, a, b);
    let bot = |a, b| minor(2, a, b);
    top(0, 1) * bot(2, 3) - top(0, 2) * bot(1, 3) + top(0, 3) * bot(1, 2) + top(1, 2) * bot(0, 3)
        - top(1, 3) * bot(0, 2)
        + top(2, 3) * bot(0, 1)
}

/// Hadamard bound `∏ ‖row‖` of `I − M0 − p·M1`, the magnitude of the
/// terms that cancel in its determinant.
fn det_scale(sys: &RoundTripSystem, p: f64) -> f64 {
    sys.fixed_point_matrix(p)
        .iter()
        .map(|row| row.iter().map(|v| v * v).sum::<f64>().sqrt())
        .product()
}

/// `det(I − M0 − p·M1)`.
pub fn det_at(sys: &RoundTripSystem, p: f64) -> f64 {
    det4(&sys.fixed_point_matrix(p))
}

/// Standard-OPO reference: the same cavity without the plate, on resonance,
/// oscillates at `r′(1 + p) = 1`. Expressed in the `p = |g′|A0` units of the
/// current coupling, so phase mismatch raises normalized thresholds by
/// `1/sinc²`.
pub fn standard_threshold(
    mp: &MirrorParams,
    coupling: &CouplingConstants,
) -> Result<NormalizationContext, SolverError> {
    let r = mp.effective_reflectivity();
    if !(r > 0.0 && r < 1.0) {
        return Err(SolverError::InvalidNormalization(format!(
            "effective reflectivity r' = {r} must lie in (0, 1)"
        )));
    }
    if !(coupling.g > 0.0) {
        return Err(SolverError::InvalidNormalization(format!(
            "coupling g = {} must be positive",
            coupling.g
        )));
    }
    let p0 = (1.0 - r) / r;
    let eff = coupling.efficiency();
    Ok(NormalizationContext {
        sigma0_intensity: p0 * p0 * eff * eff,
    })
}

/// Normalization with perfect phase matching.
pub fn matched_normalization(mp: &MirrorParams) -> Result<NormalizationContext, SolverError> {
    standard_threshold(mp, &CouplingConstants::new(1.0, 0.0))
}

/// Coefficients `c0..c4` of `det(p)` in the scaled variable `t = p / p_max`,
/// from exact interpolation at `t ∈ {0, ¼, ½, ¾, 1}`.
fn interpolate(sys: &RoundTripSystem, p_max: f64) -> ([f64; 5], f64) {
    let nodes = [0.0, 0.25, 0.5, 0.75, 1.0];
    let mut values = [0.0; 5];
    for (v, t) in values.iter_mut().zip(nodes.iter()) {
        *v = det_at(sys, t * p_max);
    }
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    // Newton divided differences.
    let mut dd = values;
    for k in 1..5 {
        for i in (k..5).rev() {
            dd[i] = (dd[i] - dd[i - 1]) / (nodes[i] - nodes[i - k]);
        }
    }
    // Expand the Newton form into monomials.
    let mut coeffs = [0.0; 5];
    coeffs[0] = dd[4];
    for (degree, k) in (0..4).rev().enumerate() {
        // coeffs ← coeffs·(t − nodes[k]) + dd[k]
        for i in (1..=degree + 1).rev() {
            coeffs[i] = coeffs[i - 1] - nodes[k] * coeffs[i];
        }
        coeffs[0] = -nodes[k] * coeffs[0] + dd[k];
    }
    (coeffs, scale)
}

/// Real non-negative roots of `a s² + b s + c`, ascending.
fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == 0.0 {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(2);
    if a.abs() <= 1e-13 * scale {
        if b != 0.0 {
            out.push(-c / b);
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc.abs() <= REALITY_TOL * b * b {
            // Merged pair: the split is below the rounding of the coefficients.
            out.push(-b / (2.0 * a));
        } else if disc > 0.0 {
            let q = -0.5 * (b + b.signum() * disc.sqrt());
            if q == 0.0 {
                out.push(0.0);
            } else {
                out.push(q / a);
                out.push(c / q);
            }
        }
    }
    out.retain(|s| s.is_finite() && *s >= 0.0);
    out.sort_by(|x, y| x.partial_cmp(y).unwrap());
    out
}

/// Even-polynomial fit on `[0, p_max]`, rescaled ×4 and retried once when
/// the odd coefficients do not vanish. Returns the intensity roots, the
/// final `p_max` and the maximum sampled `|det|`.
fn fit_intensity_roots(sys: &RoundTripSystem, mut p_max: f64) -> Result<(Vec<f64>, f64, f64), SolverError> {
    let mut last_ratio = 0.0;
    for _attempt in 0..2 {
        let (c, scale) = interpolate(sys, p_max);
        let even = c[0].abs().max(c[2].abs()).max(c[4].abs());
        let odd = c[1].abs().max(c[3].abs());
        last_ratio = if even > 0.0 { odd / even } else { f64::INFINITY };
        if odd <= EVENNESS_TOL * even {
            let floor = |v: f64| if v.abs() <= COEFF_FLOOR * scale { 0.0 } else { v };
            let roots = quadratic_roots(floor(c[4]), floor(c[2]), c[0])
                .into_iter()
                .map(|s| s * p_max * p_max)
                .collect();
            return Ok((roots, p_max, scale));
        }
        p_max *= 4.0;
    }
    Err(SolverError::FitDegenerate { ratio: last_ratio })
}

/// Intensity roots `I = p²` of the determinant, unpolished.
///
/// Roots beyond the sampled range are taken from a second fit whose range
/// ends just past them.
fn raw_intensity_roots(sys: &RoundTripSystem) -> Result<(Vec<f64>, f64, f64), SolverError> {
    let r = sys.reflectivity;
    let mut p_max = 4.0 * (1.0 - r) / r;
    if !(p_max > 0.0 && p_max.is_finite()) {
        p_max = 1.0;
    }
    let (roots, p_max, scale) = fit_intensity_roots(sys, p_max)?;
    let i_max = p_max * p_max;
    let far = roots.iter().copied().fold(0.0f64, f64::max);
    if far <= i_max {
        return Ok((roots, p_max, scale));
    }
    let mut merged: Vec<f64> = roots.into_iter().filter(|&i| i <= i_max).collect();
    if let Ok((refit, _, refit_scale)) = fit_intensity_roots(sys, 1.25 * far.sqrt()) {
        merged.extend(refit.into_iter().filter(|&i| i > i_max));
        merged.sort_by(|a, b| a.partial_cmp(b).unwrap());
        merged.truncate(2);
        return Ok((merged, p_max, scale.max(refit_scale)));
    }
    Ok((merged, p_max, scale))
}

/// Bisection on `det(p)` inside a bracket grown geometrically around `p`
/// up to the given limits. Returns `p` unchanged when no sign change is
/// found (merged roots).
fn polish(sys: &RoundTripSystem, p: f64, lo_limit: f64, hi_limit: f64) -> f64 {
    let hi_limit = hi_limit.min(2.0 * p + 1e-300);
    let mut width = (1e-6 * p).max(1e-300);
    let (mut lo, mut hi, mut f_lo, mut f_hi);
    loop {
        lo = (p - width).max(lo_limit);
        hi = (p + width).min(hi_limit);
        if !(lo < hi) {
            return p;
        }
        f_lo = det_at(sys, lo);
        f_hi = det_at(sys, hi);
        if f_lo == 0.0 {
            return lo;
        }
        if f_hi == 0.0 {
            return hi;
        }
        if f_lo.signum() != f_hi.signum() {
            break;
        }
        if lo <= lo_limit && hi >= hi_limit {
            return p;
        }
        width *= 8.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = det_at(sys, mid);
        if f_mid == 0.0 {
            return mid;
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Both threshold roots, polished by bisection and normalized.
pub fn threshold_roots(
    sys: &RoundTripSystem,
    norm: &NormalizationContext,
) -> Result<ThresholdResult, SolverError> {
    solve(sys, norm, true)
}

/// As [`threshold_roots`] but without the bisection polish; roots carry the
/// rounding of the interpolation only. Used inside scans.
pub fn threshold_roots_unpolished(
    sys: &RoundTripSystem,
    norm: &NormalizationContext,
) -> Result<ThresholdResult, SolverError> {
    solve(sys, norm, false)
}

fn solve(
    sys: &RoundTripSystem,
    norm: &NormalizationContext,
    polish_roots: bool,
) -> Result<ThresholdResult, SolverError> {
    if !(norm.sigma0_intensity > 0.0) {
        return Ok(ThresholdResult::no_oscillation());
    }
    let (intensities, _p_max, scale) = raw_intensity_roots(sys)?;
    let amplitudes: Vec<f64> = intensities.iter().map(|i| i.sqrt()).collect();
    let tolerance = RESIDUAL_TOL * scale;
    let mut roots = Vec::with_capacity(amplitudes.len());
    let mut residuals = Vec::with_capacity(amplitudes.len());
    for (k, &p) in amplitudes.iter().enumerate() {
        let p = if polish_roots {
            // Keep each bracket on its own side of the neighbouring root.
            let lo = if k > 0 { 0.5 * (amplitudes[k - 1] + p) } else { 0.0 };
            let hi = amplitudes
                .get(k + 1)
                .map(|q| 0.5 * (p + q))
                .unwrap_or(f64::INFINITY);
            polish(sys, p, lo, hi)
        } else {
            p
        };
        let residual = det_at(sys, p).abs();
        let tolerance = tolerance.max(RESIDUAL_TOL * det_scale(sys, p));
        if polish_roots && residual > tolerance {
            return Err(SolverError::ResidualTooLarge {
                p,
                residual,
                tolerance,
            });
        }
        roots.push(p * p / norm.sigma0_intensity);
        residuals.push(residual);
    }
    let status = match roots.len() {
        0 => ThresholdStatus::NoOscillation,
        1 => ThresholdStatus::OneRoot,
        _ => ThresholdStatus::TwoRoots,
    };
    Ok(ThresholdResult {
        roots,
        det_residuals: residuals,
        status,
    })
}

/// Closed-form lower threshold of the ring cavity, in intensity units
/// (`A0²`), for plate coupling magnitude `eps = |ε|`.
///
/// `I = (u − √v) / (g′² r′²)` with
///
/// ```text
/// u = |ε|² + r′² − 2r′α0 cos δ cos(θ/2 − ψ) + α0² cos(θ − 2ψ)
/// v = u² − 1 − r′⁴ − 2r′²α0²
///       − 2r′ { r′ cos 2δ + α0 [ r′α0 cos(θ − 2ψ) − 2(1 + r′²) cos δ cos(θ/2 − ψ) ] }
/// ```
#[allow(clippy::too_many_arguments)]
pub fn appendix_lower_threshold(
    alpha0: f64,
    psi: f64,
    eps: f64,
    r: f64,
    delta: f64,
    theta: f64,
    g_prime_mag: f64,
) -> Result<f64, SolverError> {
    let (u, v) = appendix_u_v(alpha0, psi, eps, r, delta, theta);
    if v < -APPENDIX_V_TOL {
        return Err(SolverError::NegativeDiscriminant { v });
    }
    Ok((u - v.max(0.0).sqrt()) / (g_prime_mag * g_prime_mag * r * r))
}

/// The `(u, v)` pair of the closed-form ring threshold.
pub fn appendix_u_v(alpha0: f64, psi: f64, eps: f64, r: f64, delta: f64, theta: f64) -> (f64, f64) {
    let cd = delta.cos();
    let half = (theta / 2.0 - psi).cos();
    let full = (theta - 2.0 * psi).cos();
    let r2 = r * r;
    let a2 = alpha0 * alpha0;
    let u = eps * eps + r2 - 2.0 * r * alpha0 * cd * half + a2 * full;
    let v = u * u
        - 1.0
        - r2 * r2
        - 2.0 * r2 * a2
        - 2.0
            * r
            * (r * (2.0 * delta).cos() + alpha0 * (r * alpha0 * full - 2.0 * (1.0 + r2) * cd * half));
    (u, v)
}

/// Threshold of a physical configuration at one operating point.
pub fn solve_point(opo: &Opo, op: &OperatingPoint) -> Result<ThresholdResult, SolverError> {
    solve_point_with(opo, op, true)
}

pub(crate) fn solve_point_with(
    opo: &Opo,
    op: &OperatingPoint,
    polish_roots: bool,
) -> Result<ThresholdResult, SolverError> {
    let coupling = opo.coupling(op);
    if coupling.g_prime.norm() == 0.0 {
        return Ok(ThresholdResult::no_oscillation());
    }
    let norm = standard_threshold(&opo.mirrors, &coupling)?;
    solve(&opo.system(op), &norm, polish_roots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cavity::{build_linear_system, build_ring_system, DerivedPhases};
    use crate::polarization::{waveplate_coeffs, Passes, WaveplateParams};
    use std::f64::consts::PI;

    fn ring(r: f64, dphi: f64, rho: f64, delta: f64, theta: f64) -> RoundTripSystem {
        let c = waveplate_coeffs(&WaveplateParams::new(dphi, rho), Passes::Single);
        build_ring_system(
            &DerivedPhases::from_coeffs(&c, delta, theta, None),
            &MirrorParams::new(r, 0.0),
        )
    }

    #[test]
    fn quadratic_root_cases() {
        assert_eq!(quadratic_roots(1.0, -3.0, 2.0), vec![1.0, 2.0]);
        assert!(quadratic_roots(1.0, 0.0, 1.0).is_empty());
        assert_eq!(quadratic_roots(0.0, 2.0, -4.0), vec![2.0]);
        assert_eq!(quadratic_roots(1.0, -2.0, 1.0), vec![1.0]);
        assert!(quadratic_roots(1.0, 3.0, 2.0).is_empty());
        // Slightly negative discriminant is a merged root.
        let r = quadratic_roots(1.0, -2.0, 1.0 + 1e-12);
        assert_eq!(r.len(), 1);
    }

    #[test]
    fn interpolation_reproduces_polynomial() {
        let sys = ring(0.93, 1.1, 0.3, 0.2, -0.4);
        let (c, _) = interpolate(&sys, 0.5);
        for t in [0.1, 0.33, 0.9, 1.7] {
            let poly = c.iter().rev().fold(0.0, |acc, ci| acc * t + ci);
            let direct = det_at(&sys, t * 0.5);
            assert!((poly - direct).abs() < 1e-13 * direct.abs().max(1e-3));
        }
    }

    #[test]
    fn standard_opo_threshold() {
        let sys = ring(0.9, 0.0, 0.0, 0.0, 0.0);
        let p_star = (1.0 - 0.9) / 0.9;
        assert!(det_at(&sys, p_star).abs() < 1e-12);
        let norm = matched_normalization(&MirrorParams::new(0.9, 0.0)).unwrap();
        assert!((norm.sigma0_intensity - 1.0 / 81.0).abs() < 1e-16);
        let res = threshold_roots(&sys, &norm).unwrap();
        assert!((res.roots[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn detuned_passive_cavity_has_positive_det() {
        let sys = ring(0.9, 0.0, 0.0, 0.3, 0.0);
        assert!(det_at(&sys, 0.0) > 0.0);
    }

    #[test]
    fn lossless_cavity_rejected() {
        let err = matched_normalization(&MirrorParams::new(1.0, 0.0)).unwrap_err();
        assert!(matches!(err, SolverError::InvalidNormalization(_)));
    }

    #[test]
    fn linear_cancelled_gain_never_oscillates() {
        let c = waveplate_coeffs(&WaveplateParams::new(0.0, 0.0), Passes::Double);
        let ph = DerivedPhases::from_coeffs(&c, 0.0, 0.0, Some(PI));
        let sys = build_linear_system(&ph, &MirrorParams::new(0.9, 0.0));
        let norm = matched_normalization(&MirrorParams::new(0.9, 0.0)).unwrap();
        let res = threshold_roots(&sys, &norm).unwrap();
        assert_eq!(res.status, ThresholdStatus::NoOscillation);
    }

    #[test]
    fn appendix_standard_reduction() {
        let r = 0.93;
        let (u, v) = appendix_u_v(1.0, 0.0, 0.0, r, 0.0, 0.0);
        assert!((u - (1.0 - r) * (1.0 - r)).abs() < 1e-15);
        assert!(v.abs() < 1e-14);
        let g = 0.37;
        let i = appendix_lower_threshold(1.0, 0.0, 0.0, r, 0.0, 0.0, g).unwrap();
        let expected = ((1.0 - r) / (g * r)).powi(2);
        assert!((i - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn appendix_rejects_outside_zone() {
        // Far-detuned weakly coupled ring point.
        let c = waveplate_coeffs(&WaveplateParams::new(PI, 0.01), Passes::Single);
        let (_, v) = appendix_u_v(c.alpha0, c.psi, c.eps.im, 0.9, 1.0, PI + 0.8);
        assert!(v < 0.0);
        let err = appendix_lower_threshold(c.alpha0, c.psi, c.eps.im, 0.9, 1.0, PI + 0.8, 1.0);
        assert!(matches!(err, Err(SolverError::NegativeDiscriminant { .. })));
    }

    #[test]
    fn det4_on_known_matrices() {
        let mut id = [[0.0; 4]; 4];
        for (i, row) in id.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        assert_eq!(det4(&id), 1.0);
        let m = [
            [2.0, 0.0, 1.0, 3.0],
            [1.0, -1.0, 0.0, 2.0],
            [0.0, 4.0, 1.0, -2.0],
            [3.0, 1.0, 0.0, 1.0],
        ];
        // Cofactors along the third column: 1·(−12) + 1·6.
        assert_eq!(det4(&m), -6.0);
        let swapped = [m[1], m[0], m[2], m[3]];
        assert!((det4(&m) + det4(&swapped)).abs() < 1e-12);
    }
}
