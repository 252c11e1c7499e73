//! Jones calculus for the intracavity waveplate.
//!
//! All matrices are expressed in the crystal-axis basis `(C1, C2)`: the first
//! component is the ordinary (signal) wave, the second the extraordinary
//! (idler) wave.

use std::f64::consts::PI;
use std::ops::Mul;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// A 2×2 complex Jones matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jones2 {
    pub m11: Complex64,
    pub m12: Complex64,
    pub m21: Complex64,
    pub m22: Complex64,
}

impl Jones2 {
    pub fn new(m11: Complex64, m12: Complex64, m21: Complex64, m22: Complex64) -> Self {
        Self { m11, m12, m21, m22 }
    }

    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Self::new(one, zero, zero, one)
    }

    pub fn diagonal(a: Complex64, b: Complex64) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        Self::new(a, zero, zero, b)
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::new(self.m11.conj(), self.m21.conj(), self.m12.conj(), self.m22.conj())
    }

    pub fn det(&self) -> Complex64 {
        self.m11 * self.m22 - self.m12 * self.m21
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::new(self.m11 * s, self.m12 * s, self.m21 * s, self.m22 * s)
    }

    /// Applies the matrix to the amplitude pair `(a1, a2)`.
    pub fn apply(&self, a1: Complex64, a2: Complex64) -> (Complex64, Complex64) {
        (self.m11 * a1 + self.m12 * a2, self.m21 * a1 + self.m22 * a2)
    }

    pub fn is_finite(&self) -> bool {
        [self.m11, self.m12, self.m21, self.m22].iter().all(|z| z.is_finite())
    }

    /// Largest entry-wise deviation of `U†U` from the identity.
    pub fn unitarity_defect(&self) -> f64 {
        let p = self.adjoint() * *self;
        let id = Self::identity();
        [
            p.m11 - id.m11,
            p.m12 - id.m12,
            p.m21 - id.m21,
            p.m22 - id.m22,
        ]
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
    }
}

impl Mul for Jones2 {
    type Output = Jones2;

    fn mul(self, rhs: Jones2) -> Jones2 {
        Jones2::new(
            self.m11 * rhs.m11 + self.m12 * rhs.m21,
            self.m11 * rhs.m12 + self.m12 * rhs.m22,
            self.m21 * rhs.m11 + self.m22 * rhs.m21,
            self.m21 * rhs.m12 + self.m22 * rhs.m22,
        )
    }
}

/// A birefringent plate whose neutral axes make the angle `angle` with the
/// crystal axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveplateParams {
    /// Birefringent phase shift between slow and fast axes, in radians.
    pub retardance: f64,
    /// Angle between plate axes and crystal axes, in radians.
    pub angle: f64,
    /// Mean of the slow and fast indices.
    pub mean_index: f64,
    /// Plate thickness in meters.
    pub thickness: f64,
}

impl WaveplateParams {
    pub fn new(retardance: f64, angle: f64) -> Self {
        Self {
            retardance,
            angle,
            mean_index: 1.54,
            thickness: 1.0e-3,
        }
    }

    /// Angle folded into `[0, π/2]` using the π-periodicity of the plate and
    /// the reflection `ρ → −ρ` (which only flips the sign of `ε`).
    pub fn canonical_angle(&self) -> f64 {
        let r = self.angle.rem_euclid(PI);
        if r > PI / 2.0 {
            PI - r
        } else {
            r
        }
    }
}

/// Number of traversals of the plate per round trip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Passes {
    Single,
    Double,
}

/// Waveplate coupling coefficients `α`, `ε` and the polar split of `α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveplateCoeffs {
    pub alpha: Complex64,
    pub eps: Complex64,
    /// `|α|`
    pub alpha0: f64,
    /// `arg α` in `(−π, π]`, zero when `α = 0`.
    pub psi: f64,
}

impl WaveplateCoeffs {
    /// The real amplitude of the purely imaginary `ε`.
    pub fn eps_imag(&self) -> f64 {
        self.eps.im
    }
}

/// Diagonal coefficient `α` and cross-coupling `ε` of the plate in the
/// crystal basis. A double pass replaces the half retardance by the full
/// retardance.
pub fn waveplate_coeffs(wp: &WaveplateParams, passes: Passes) -> WaveplateCoeffs {
    let half = match passes {
        Passes::Single => wp.retardance / 2.0,
        Passes::Double => wp.retardance,
    };
    let (s, c) = half.sin_cos();
    let two_rho = 2.0 * wp.angle;
    let alpha = Complex64::new(c, two_rho.cos() * s);
    let eps = Complex64::new(0.0, s * two_rho.sin());
    let (alpha0, psi) = polar_split(alpha);
    WaveplateCoeffs {
        alpha,
        eps,
        alpha0,
        psi,
    }
}

fn polar_split(z: Complex64) -> (f64, f64) {
    let r = z.norm();
    // Moduli at the rounding level of unit-magnitude inputs count as zero.
    if r <= 4.0 * f64::EPSILON {
        return (0.0, 0.0);
    }
    let mut arg = z.im.atan2(z.re);
    // atan2 returns [-π, π]; move -π onto the closed end of (−π, π].
    if arg <= -PI {
        arg += 2.0 * PI;
    }
    (r, arg)
}

/// Single-pass Jones matrix of the plate, including its mean propagation
/// phase `e^{ikne}` for wavenumber `k`.
pub fn waveplate_matrix(wp: &WaveplateParams, k: f64) -> Jones2 {
    let c = waveplate_coeffs(wp, Passes::Single);
    let phase = Complex64::from_polar(1.0, k * wp.mean_index * wp.thickness);
    Jones2::new(c.alpha, c.eps, c.eps, c.alpha.conj()).scale(phase)
}
