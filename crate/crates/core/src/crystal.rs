//! The χ⁽²⁾ crystal: coupling strength, phase mismatch and the
//! perturbative input/output maps for the three interacting envelopes.
//!
//! Envelopes are normalized so that `|A|²` is a photon flux; `A0` is the
//! pump, `A1` the ordinary (signal) wave and `A2` the extraordinary (idler)
//! wave. All maps are exact polynomials in the coupling `g` truncated at the
//! order stated on each function.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Vacuum permittivity, F/m.
pub const EPSILON_0: f64 = 8.854_187_818_8e-12;

/// Positive root of `sinc²(x) = 1/2`.
pub const SINC2_HALF_WIDTH: f64 = 1.391_557_378_251_510_2;

const SERIES_CUTOFF: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrystalParams {
    /// Crystal length in meters.
    pub length: f64,
    /// Pump index.
    pub n_pump: f64,
    /// Signal (ordinary) index.
    pub n_signal: f64,
    /// Idler (extraordinary) index.
    pub n_idler: f64,
    /// Effective second-order susceptibility in m/V.
    pub chi2: f64,
    /// Thermal slope of the signal index, 1/K.
    pub dn_signal_dt: f64,
    /// Thermal slope of the idler index, 1/K.
    pub dn_idler_dt: f64,
    /// Pump angular frequency in rad/s.
    pub pump_angular_frequency: f64,
}

impl CrystalParams {
    /// A 10 mm KTP-like crystal pumped at 531.7 nm.
    pub fn ktp_default() -> Self {
        Self {
            length: 10e-3,
            n_pump: 1.75,
            n_signal: 1.75,
            n_idler: 1.75,
            chi2: 6.0e-12,
            dn_signal_dt: 1.3e-5,
            dn_idler_dt: 1.6e-5,
            pump_angular_frequency: angular_frequency(531.7e-9),
        }
    }

    /// Degenerate signal angular frequency `ω0 / 2`.
    pub fn signal_angular_frequency(&self) -> f64 {
        self.pump_angular_frequency / 2.0
    }

    /// Vacuum wavelength of the degenerate signal.
    pub fn signal_wavelength(&self) -> f64 {
        2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / self.signal_angular_frequency()
    }

    /// Mean signal/idler index `(n1 + n2) / 2`.
    pub fn mean_index(&self) -> f64 {
        0.5 * (self.n_signal + self.n_idler)
    }

    /// Thermal slope of the mean signal/idler index.
    pub fn mean_dn_dt(&self) -> f64 {
        0.5 * (self.dn_signal_dt + self.dn_idler_dt)
    }

    /// Thermal slope of the crystal birefringence `n1 − n2`.
    pub fn birefringence_dn_dt(&self) -> f64 {
        self.dn_signal_dt - self.dn_idler_dt
    }
}

/// Angular frequency of light with the given vacuum wavelength.
pub fn angular_frequency(wavelength: f64) -> f64 {
    2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / wavelength
}

/// Linear-in-temperature phase-mismatch model, calibrated on the width of
/// the `sinc²` phase-matching curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseMatchModel {
    /// Temperature offset (from the degeneracy temperature) of perfect phase matching, K.
    pub t_pm: f64,
    /// Full width at half maximum of the `sinc²` curve, K.
    pub fwhm: f64,
    pub enabled: bool,
}

impl PhaseMatchModel {
    pub fn disabled() -> Self {
        Self {
            t_pm: 0.0,
            fwhm: 15.0,
            enabled: false,
        }
    }

    pub fn with_fwhm(fwhm: f64) -> Self {
        Self {
            t_pm: 0.0,
            fwhm,
            enabled: true,
        }
    }

    /// `d(Δk·l/2)/dT` in rad/K.
    pub fn slope(&self) -> f64 {
        2.0 * SINC2_HALF_WIDTH / self.fwhm
    }
}

impl Default for PhaseMatchModel {
    fn default() -> Self {
        Self::disabled()
    }
}

/// `g` and the mismatch-dressed `g′` for one crystal pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingConstants {
    pub g: f64,
    pub g_prime: Complex64,
}

impl CouplingConstants {
    pub fn new(g: f64, mismatch_half_phase: f64) -> Self {
        Self {
            g,
            g_prime: g_prime(g, mismatch_half_phase),
        }
    }

    /// `|g′| / g`, or 1 when `g = 0`.
    pub fn efficiency(&self) -> f64 {
        if self.g == 0.0 {
            1.0
        } else {
            self.g_prime.norm() / self.g
        }
    }
}

/// Single-pass nonlinear coupling coefficient at frequency degeneracy.
pub fn coupling_g(cp: &CrystalParams) -> f64 {
    let w0 = cp.pump_angular_frequency;
    let w1 = w0 / 2.0;
    let w2 = w0 / 2.0;
    let n = cp.n_pump * cp.n_signal * cp.n_idler;
    cp.length
        * cp.chi2
        * (HBAR * w0 * w1 * w2 / (2.0 * SPEED_OF_LIGHT.powi(3) * EPSILON_0 * n)).sqrt()
}

/// `sin(x) / x` with `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < SERIES_CUTOFF {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// `g′ = g e^{ix} sinc(x)` with `x = Δk·l/2`.
pub fn g_prime(g: f64, x: f64) -> Complex64 {
    Complex64::from_polar(1.0, x) * (g * sinc(x))
}

/// `f(x) = e^{ix}/(ix) · (e^{ix} − sinc x)`, continuous at zero.
pub fn second_order_f(x: f64) -> Complex64 {
    if x.abs() < SERIES_CUTOFF {
        // 1 + 4ix/3 − x² − 8ix³/15 + O(x⁴)
        let x2 = x * x;
        Complex64::new(1.0 - x2, 4.0 * x / 3.0 - 8.0 * x * x2 / 15.0)
    } else {
        let e = Complex64::from_polar(1.0, x);
        e / Complex64::new(0.0, x) * (e - sinc(x))
    }
}

/// Second-order self-coupling coefficient of the signal/idler lines obtained
/// by integrating the envelope equations with the first-order fields:
/// `e^{2ix} f*(x) = (e^{ix} sinc x − 1)/(ix)`. Equal to `f(x)` at `x = 0`.
pub fn envelope_second_order(x: f64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * x) * second_order_f(x).conj()
}

/// Crystal input/output relations to second order in `g`.
///
/// Returns `(A0(l), A1(l), A2(l))` for input envelopes at the entrance face
/// and mismatch half phase `x = Δk·l/2`.
pub fn propagate_crystal_full(
    a0: Complex64,
    a1: Complex64,
    a2: Complex64,
    g: f64,
    x: f64,
) -> (Complex64, Complex64, Complex64) {
    let first = Complex64::from_polar(1.0, x) * sinc(x) * g;
    let h = envelope_second_order(x) * (0.5 * g * g);
    let out0 = a0 - first.conj() * a1 * a2 - h.conj() * (a1.norm_sqr() + a2.norm_sqr()) * a0;
    let out1 = a1 + first * a0 * a2.conj() + h * (a0.norm_sqr() - a2.norm_sqr()) * a1;
    let out2 = a2 + first * a0 * a1.conj() + h * (a0.norm_sqr() - a1.norm_sqr()) * a2;
    (out0, out1, out2)
}

/// Signal/idler input/output relations with the pump taken at the crystal
/// center: `A1 + g′A0A2*`, `A2 + g′A0A1*`.
pub fn propagate_crystal_simple(
    a0_mid: Complex64,
    a1: Complex64,
    a2: Complex64,
    g_prime: Complex64,
) -> (Complex64, Complex64) {
    (
        a1 + g_prime * a0_mid * a2.conj(),
        a2 + g_prime * a0_mid * a1.conj(),
    )
}

/// Mismatch half phase `x = Δk·l/2` at temperature offset `dt` (K).
pub fn delta_k_of_t(pm: &PhaseMatchModel, dt: f64) -> f64 {
    if pm.enabled {
        pm.slope() * (dt - pm.t_pm)
    } else {
        0.0
    }
}
