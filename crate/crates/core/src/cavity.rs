//! Steady-state round-trip equations of the ring and linear cavities.
//!
//! The fixed-point equations contain the conjugated amplitudes, so they are
//! only real-linear in `(A1, A2)`. They are represented exactly as a real
//! 4×4 map on `x = (Re A1, Im A1, Re A2, Im A2)`:
//!
//! ```text
//! x = (M0 + p·M1) x
//! ```
//!
//! where `p = |g′|·A0 ≥ 0` is the real pump parameter. All constant phases of
//! the pump and of `g′` are gauged into the amplitudes.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::crystal::{coupling_g, delta_k_of_t, CouplingConstants, CrystalParams, PhaseMatchModel};
use crate::polarization::{waveplate_coeffs, Passes, WaveplateCoeffs, WaveplateParams};

pub type Mat4 = [[f64; 4]; 4];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CavityKind {
    Ring,
    Linear,
}

impl CavityKind {
    /// Plate traversals per round trip.
    pub fn passes(self) -> Passes {
        match self {
            CavityKind::Ring => Passes::Single,
            CavityKind::Linear => Passes::Double,
        }
    }

    /// Crystal traversals per round trip.
    pub fn crystal_passes(self) -> f64 {
        match self {
            CavityKind::Ring => 1.0,
            CavityKind::Linear => 2.0,
        }
    }
}

impl std::fmt::Display for CavityKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CavityKind::Ring => f.write_str("ring"),
            CavityKind::Linear => f.write_str("linear"),
        }
    }
}

/// Coupling mirror and intracavity losses. The amplitude reflectivity is
/// the same for signal and idler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MirrorParams {
    /// Amplitude reflectivity `r` of the coupling mirror.
    pub reflectivity: f64,
    /// Round-trip loss coefficient `μ`.
    pub loss: f64,
    /// Reflection phase shifts (pump, signal, idler), radians.
    pub zeta_pump: f64,
    pub zeta_signal: f64,
    pub zeta_idler: f64,
}

impl MirrorParams {
    pub fn new(reflectivity: f64, loss: f64) -> Self {
        Self {
            reflectivity,
            loss,
            zeta_pump: 0.0,
            zeta_signal: 0.0,
            zeta_idler: 0.0,
        }
    }

    /// Mirror with intensity reflectivity `big_r` and no extra loss.
    pub fn from_intensity(big_r: f64) -> Self {
        Self::new(big_r.sqrt(), 0.0)
    }

    /// `r′ = r(1 − μ)`.
    pub fn effective_reflectivity(&self) -> f64 {
        self.reflectivity * (1.0 - self.loss)
    }

    /// Cavity finesse `π r′ / (1 − r′²)`.
    pub fn finesse(&self) -> f64 {
        let r = self.effective_reflectivity();
        PI * r / (1.0 - r * r)
    }
}

/// Control coordinates, measured from the degenerate operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    /// Cavity length offset `δL`, meters.
    pub dl: f64,
    /// Crystal temperature offset `δT`, kelvin.
    pub dt: f64,
    /// Mirror/plate part of the linear-cavity phase `ξ`, radians. When
    /// absent it is computed from the element parameters.
    pub xi: Option<f64>,
    /// Pump level in units of the standard threshold.
    pub sigma: f64,
}

impl OperatingPoint {
    pub fn new(dl: f64, dt: f64) -> Self {
        Self {
            dl,
            dt,
            xi: None,
            sigma: 1.0,
        }
    }

    pub fn with_xi(mut self, xi: f64) -> Self {
        self.xi = Some(xi);
        self
    }
}

/// Phases entering the round-trip equations. Raw (unreduced) values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedPhases {
    /// Mean round-trip phase.
    pub delta: f64,
    /// Birefringent phase of crystal and mirrors.
    pub theta: f64,
    /// `θ − ψ`.
    pub delta_prime: f64,
    /// Pump/signal phase between the two crystal passes (linear cavity).
    pub xi: Option<f64>,
    pub alpha0: f64,
    pub psi: f64,
    /// Imaginary part of the purely imaginary plate coupling `ε`.
    pub eps: f64,
    /// Mismatch half phase `Δk·l/2`.
    pub mismatch: f64,
}

impl DerivedPhases {
    /// Phases from explicit values, bypassing the physical parameters.
    pub fn from_coeffs(c: &WaveplateCoeffs, delta: f64, theta: f64, xi: Option<f64>) -> Self {
        Self {
            delta,
            theta,
            delta_prime: theta - c.psi,
            xi,
            alpha0: c.alpha0,
            psi: c.psi,
            eps: c.eps_imag(),
            mismatch: 0.0,
        }
    }

    pub fn eps_complex(&self) -> Complex64 {
        Complex64::new(0.0, self.eps)
    }
}

/// The full physical description of one OPO.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Opo {
    pub crystal: CrystalParams,
    pub waveplate: WaveplateParams,
    pub mirrors: MirrorParams,
    pub phase_match: PhaseMatchModel,
    pub kind: CavityKind,
}

impl Opo {
    pub fn phases(&self, op: &OperatingPoint) -> DerivedPhases {
        derive_phases(
            &self.crystal,
            &self.waveplate,
            &self.mirrors,
            &self.phase_match,
            op,
            self.kind,
        )
    }

    pub fn coupling(&self, op: &OperatingPoint) -> CouplingConstants {
        CouplingConstants::new(coupling_g(&self.crystal), delta_k_of_t(&self.phase_match, op.dt))
    }

    pub fn system(&self, op: &OperatingPoint) -> RoundTripSystem {
        let phases = self.phases(op);
        match self.kind {
            CavityKind::Ring => build_ring_system(&phases, &self.mirrors),
            CavityKind::Linear => build_linear_system(&phases, &self.mirrors),
        }
    }

    /// Round-trip phase per unit length change, rad/m.
    pub fn delta_per_meter(&self) -> f64 {
        self.kind.crystal_passes() * signal_wavenumber(&self.crystal)
    }

    /// Cavity length change that advances `δ` by 2π.
    pub fn free_spectral_range(&self) -> f64 {
        2.0 * PI / self.delta_per_meter()
    }

    /// `dδ/dT` in rad/K.
    pub fn delta_per_kelvin(&self) -> f64 {
        self.delta_per_meter() * self.crystal.length * self.crystal.mean_dn_dt()
    }

    /// `dθ/dT` in rad/K.
    pub fn theta_per_kelvin(&self) -> f64 {
        signal_wavenumber(&self.crystal) * self.crystal.length * self.crystal.birefringence_dn_dt()
    }

    /// Length offset at which `δ ≡ 0` for temperature offset `dt`.
    pub fn resonant_dl(&self, dt: f64) -> f64 {
        -self.crystal.length * self.crystal.mean_dn_dt() * dt
    }
}

/// Vacuum wavenumber of the degenerate signal, `ω0 / 2c`.
pub fn signal_wavenumber(cp: &CrystalParams) -> f64 {
    cp.signal_angular_frequency() / crate::crystal::SPEED_OF_LIGHT
}

/// Round-trip phases at an operating point.
///
/// The origin `(δL, δT) = (0, 0)` is the degenerate point of the uncoupled
/// cavity (plate axes along the crystal axes): both polarizations are
/// resonant there, so `δ ≡ 0` and the crystal and mirror birefringence
/// cancels the plate's own birefringent phase. Mirror phases are absorbed in
/// that origin and only enter the linear-cavity `ξ`.
pub fn derive_phases(
    cp: &CrystalParams,
    wp: &WaveplateParams,
    mp: &MirrorParams,
    pm: &PhaseMatchModel,
    op: &OperatingPoint,
    kind: CavityKind,
) -> DerivedPhases {
    let ks = signal_wavenumber(cp);
    let coeffs = waveplate_coeffs(wp, kind.passes());
    let aligned = waveplate_coeffs(&WaveplateParams { angle: 0.0, ..*wp }, kind.passes());
    let mismatch = delta_k_of_t(pm, op.dt);
    let theta_shift = ks * cp.length * cp.birefringence_dn_dt() * op.dt;
    let path = op.dl + cp.length * cp.mean_dn_dt() * op.dt;

    let (delta, theta, xi) = match kind {
        CavityKind::Ring => (ks * path, 2.0 * aligned.psi + theta_shift, None),
        CavityKind::Linear => {
            let base = op.xi.unwrap_or_else(|| {
                ks * (2.0 * cp.n_pump - 2.0 * cp.mean_index()) * cp.length
                    - 2.0 * ks * wp.mean_index * 2.0 * wp.thickness
                    + mp.zeta_pump
                    - 2.0 * mp.zeta_idler
            });
            // Δk·l between the two passes adds to the mirror/plate phase.
            (2.0 * ks * path, aligned.psi + theta_shift, Some(base + 2.0 * mismatch))
        }
    };

    DerivedPhases {
        delta,
        theta,
        delta_prime: theta - coeffs.psi,
        xi,
        alpha0: coeffs.alpha0,
        psi: coeffs.psi,
        eps: coeffs.eps_imag(),
        mismatch,
    }
}

/// Real 4×4 representation of the round-trip fixed-point map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundTripSystem {
    /// Passive (linear) round trip.
    pub passive: Mat4,
    /// Parametric part, multiplied by `p`.
    pub gain: Mat4,
    pub kind: CavityKind,
    /// `r′`, used to scale the pump range.
    pub reflectivity: f64,
}

impl RoundTripSystem {
    /// Builds the system `A ↦ L·A + p·C·A*` from the complex 2×2 blocks `L`
    /// and `C`.
    pub fn from_complex(
        linear: [[Complex64; 2]; 2],
        conjugate: [[Complex64; 2]; 2],
        kind: CavityKind,
        reflectivity: f64,
    ) -> Self {
        let mut passive = [[0.0; 4]; 4];
        let mut gain = [[0.0; 4]; 4];
        for i in 0..2 {
            for j in 0..2 {
                put_block(&mut passive, i, j, mul_block(linear[i][j]));
                put_block(&mut gain, i, j, conj_mul_block(conjugate[i][j]));
            }
        }
        Self {
            passive,
            gain,
            kind,
            reflectivity,
        }
    }

    /// `M0 + p·M1`.
    pub fn map(&self, p: f64) -> Mat4 {
        let mut m = self.passive;
        for (row, g) in m.iter_mut().zip(self.gain.iter()) {
            for (v, gv) in row.iter_mut().zip(g.iter()) {
                *v += p * gv;
            }
        }
        m
    }

    /// `I − M0 − p·M1`; a nonzero kernel is a steady state.
    pub fn fixed_point_matrix(&self, p: f64) -> Mat4 {
        let mut m = self.map(p);
        for (i, row) in m.iter_mut().enumerate() {
            for v in row.iter_mut() {
                *v = -*v;
            }
            row[i] += 1.0;
        }
        m
    }

    pub fn apply(&self, p: f64, x: [f64; 4]) -> [f64; 4] {
        let m = self.map(p);
        let mut y = [0.0; 4];
        for (yi, row) in y.iter_mut().zip(m.iter()) {
            *yi = row.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
        }
        y
    }
}

fn mul_block(c: Complex64) -> [[f64; 2]; 2] {
    [[c.re, -c.im], [c.im, c.re]]
}

fn conj_mul_block(c: Complex64) -> [[f64; 2]; 2] {
    [[c.re, c.im], [c.im, -c.re]]
}

fn put_block(m: &mut Mat4, i: usize, j: usize, b: [[f64; 2]; 2]) {
    for (r, row) in b.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            m[2 * i + r][2 * j + c] = *v;
        }
    }
}

/// Ring cavity with the pump term at phase zero.
pub fn build_ring_system(phases: &DerivedPhases, mp: &MirrorParams) -> RoundTripSystem {
    build_ring_system_with_pump_phase(phases, mp, 0.0)
}

/// Ring cavity with pump term `p·e^{iφ_p}`.
pub fn build_ring_system_with_pump_phase(
    phases: &DerivedPhases,
    mp: &MirrorParams,
    pump_phase: f64,
) -> RoundTripSystem {
    let r = mp.effective_reflectivity();
    let (d, t, psi) = (phases.delta, phases.theta, phases.psi);
    let eps = phases.eps_complex();
    let k11 = Complex64::from_polar(r * phases.alpha0, d - t / 2.0 + psi);
    let k12 = eps * Complex64::from_polar(r, d + t / 2.0);
    let k22 = Complex64::from_polar(r * phases.alpha0, d + t / 2.0 - psi);
    let k21 = eps * Complex64::from_polar(r, d - t / 2.0);
    let pump = Complex64::from_polar(1.0, pump_phase);
    RoundTripSystem::from_complex(
        [[k11, k12], [k21, k22]],
        [[k12 * pump, k11 * pump], [k22 * pump, k21 * pump]],
        CavityKind::Ring,
        r,
    )
}

/// Linear cavity with the pump term at phase zero.
pub fn build_linear_system(phases: &DerivedPhases, mp: &MirrorParams) -> RoundTripSystem {
    build_linear_system_with_pump_phase(phases, mp, 0.0)
}

/// Linear cavity: two crystal passes separated by the relative phase `ξ`,
/// double-pass plate coefficients.
pub fn build_linear_system_with_pump_phase(
    phases: &DerivedPhases,
    mp: &MirrorParams,
    pump_phase: f64,
) -> RoundTripSystem {
    let r = mp.effective_reflectivity();
    let d = phases.delta;
    let dp = phases.delta_prime;
    let xi = Complex64::from_polar(1.0, phases.xi.unwrap_or(0.0));
    let plus = Complex64::new(1.0, 0.0) + xi;
    let minus = Complex64::new(1.0, 0.0) - xi;
    let k11 = Complex64::from_polar(r * phases.alpha0, d - dp);
    let k22 = Complex64::from_polar(r * phases.alpha0, d + dp);
    let k12 = phases.eps_complex() * Complex64::from_polar(r, d);
    let pump = Complex64::from_polar(1.0, pump_phase);
    RoundTripSystem::from_complex(
        [[k11, k12], [k12, k22]],
        [
            [k12 * minus * pump, k11 * plus * pump],
            [k22 * plus * pump, k12 * minus * pump],
        ],
        CavityKind::Linear,
        r,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polarization::WaveplateParams;

    fn opo(kind: CavityKind, wp: WaveplateParams) -> Opo {
        Opo {
            crystal: CrystalParams::ktp_default(),
            waveplate: wp,
            mirrors: MirrorParams::from_intensity(0.9),
            phase_match: PhaseMatchModel::disabled(),
            kind,
        }
    }

    #[test]
    fn origin_has_zero_phases() {
        let o = opo(CavityKind::Ring, WaveplateParams::new(0.0, 0.3));
        let ph = o.phases(&OperatingPoint::new(0.0, 0.0));
        assert_eq!(ph.delta, 0.0);
        assert_eq!(ph.theta, 0.0);
    }

    #[test]
    fn origin_compensates_plate_birefringence() {
        let o = opo(CavityKind::Ring, WaveplateParams::new(PI, 0.02));
        let ph = o.phases(&OperatingPoint::new(0.0, 0.0));
        assert_eq!(ph.delta, 0.0);
        // Aligned half-wave plate has ψ = π/2.
        assert!((ph.theta - PI).abs() < 1e-15);
        let lin = opo(CavityKind::Linear, WaveplateParams::new(PI / 4.0, 0.02));
        let ph = lin.phases(&OperatingPoint::new(0.0, 0.0));
        assert!((ph.theta - PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn half_wavelength_length_step_advances_delta_by_pi() {
        let o = opo(CavityKind::Ring, WaveplateParams::new(PI, 0.1));
        let lambda = o.crystal.signal_wavelength();
        let ph = o.phases(&OperatingPoint::new(lambda / 2.0, 0.0));
        assert!((ph.delta - PI).abs() < 1e-12);
        assert!((o.free_spectral_range() - lambda).abs() < 1e-20);
    }

    #[test]
    fn temperature_shift_of_theta() {
        let o = opo(CavityKind::Ring, WaveplateParams::new(0.0, 0.1));
        let ph = o.phases(&OperatingPoint::new(0.0, 0.2));
        let cp = o.crystal;
        // (ω0/2c)·l·(dn1/dT − dn2/dT)·δT evaluated from its factors
        let expected = (cp.pump_angular_frequency / (2.0 * 299_792_458.0))
            * 0.01
            * (1.3e-5 - 1.6e-5)
            * 0.2;
        assert!((ph.theta - expected).abs() < 1e-15 * expected.abs().max(1.0));
        // 2π/1063.4 nm · 0.01 m · (−3e-6 /K) · 0.2 K
        assert!((ph.theta - (-0.035_451_487_533_456)).abs() < 1e-12);
    }

    #[test]
    fn decoupled_ring_is_block_diagonal_in_conjugate_pairs() {
        let c = waveplate_coeffs(&WaveplateParams::new(0.0, 0.0), Passes::Single);
        let ph = DerivedPhases::from_coeffs(&c, 0.0, 0.0, None);
        let sys = build_ring_system(&ph, &MirrorParams::new(0.9, 0.0));
        // Passive part: A1 and A2 do not mix.
        for i in 0..2 {
            for j in 2..4 {
                assert_eq!(sys.passive[i][j], 0.0);
                assert_eq!(sys.passive[j][i], 0.0);
            }
        }
        // Gain part: A1 couples only to A2* and vice versa, with equal blocks.
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(sys.gain[i][j], 0.0);
                assert_eq!(sys.gain[i + 2][j + 2], 0.0);
                assert_eq!(sys.gain[i][j + 2], sys.gain[i + 2][j]);
            }
        }
    }

    #[test]
    fn mirror_finesse() {
        let m = MirrorParams::new(0.9, 0.0);
        assert!((m.finesse() - PI * 0.9 / 0.19).abs() < 1e-12);
        let lossy = MirrorParams::new(0.95, 0.02);
        assert!((lossy.effective_reflectivity() - 0.931).abs() < 1e-15);
    }
}
