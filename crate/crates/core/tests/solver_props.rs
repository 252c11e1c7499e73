use nalgebra::Matrix4;
use opolock::cavity::{
    build_linear_system_with_pump_phase, build_ring_system_with_pump_phase, DerivedPhases,
    MirrorParams, RoundTripSystem,
};
use opolock::polarization::{waveplate_coeffs, Passes, WaveplateParams};
use opolock::solver::{
    appendix_lower_threshold, appendix_u_v, det4, det_at, matched_normalization, threshold_roots,
    ThresholdStatus,
};
use proptest::prelude::*;
use std::f64::consts::PI;

fn lu_det(m: &[[f64; 4]; 4]) -> f64 {
    Matrix4::from_fn(|i, j| m[i][j]).determinant()
}

fn ring(ret: f64, ang: f64, delta: f64, theta: f64, r: f64, pump: f64) -> (DerivedPhases, RoundTripSystem) {
    let c = waveplate_coeffs(&WaveplateParams::new(ret, ang), Passes::Single);
    let ph = DerivedPhases::from_coeffs(&c, delta, theta, None);
    (ph, build_ring_system_with_pump_phase(&ph, &MirrorParams::new(r, 0.0), pump))
}

fn linear(ret: f64, ang: f64, delta: f64, theta: f64, xi: f64, r: f64, pump: f64) -> RoundTripSystem {
    let c = waveplate_coeffs(&WaveplateParams::new(ret, ang), Passes::Double);
    let ph = DerivedPhases::from_coeffs(&c, delta, theta, Some(xi));
    build_linear_system_with_pump_phase(&ph, &MirrorParams::new(r, 0.0), pump)
}

/// Coefficients of the quartic `det(p)` by least squares on many samples,
/// independent of the solver's five-point interpolation.
fn quartic_lsq(sys: &RoundTripSystem, p_max: f64) -> [f64; 5] {
    let n = 41;
    let a = nalgebra::DMatrix::from_fn(n, 5, |i, k| (i as f64 / (n - 1) as f64).powi(k as i32));
    let b = nalgebra::DVector::from_fn(n, |i, _| det_at(sys, p_max * i as f64 / (n - 1) as f64));
    let x = a.svd(true, true).solve(&b, 1e-15).unwrap();
    [x[0], x[1], x[2], x[3], x[4]]
}

proptest! {
    #[test]
    fn cofactor_determinant_matches_lu(entries in proptest::collection::vec(-3.0..3.0f64, 16)) {
        let mut m = [[0.0; 4]; 4];
        for (k, v) in entries.iter().enumerate() {
            m[k / 4][k % 4] = *v;
        }
        let scale: f64 = m.iter().map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt()).product();
        prop_assert!((det4(&m) - lu_det(&m)).abs() <= 1e-13 * scale.max(1.0));
    }

    #[test]
    fn determinant_is_even_in_pump_amplitude(
        ret in 0.0..PI, ang in 0.0..1.5f64, delta in -3.0..3.0f64, theta in -3.0..3.0f64,
        xi in -3.0..3.0f64, r in 0.8..0.99f64, pump in -3.0..3.0f64, linear_cavity in any::<bool>(),
    ) {
        let sys = if linear_cavity {
            linear(ret, ang, delta, theta, xi, r, pump)
        } else {
            ring(ret, ang, delta, theta, r, pump).1
        };
        let c = quartic_lsq(&sys, 4.0 * (1.0 - r) / r);
        let even = c[0].abs().max(c[2].abs()).max(c[4].abs());
        let odd = c[1].abs().max(c[3].abs());
        prop_assert!(odd <= 1e-10 * even, "odd {odd} even {even}");
        for p in [0.01, 0.1, 0.3] {
            let (a, b) = (det_at(&sys, p), det_at(&sys, -p));
            prop_assert!((a - b).abs() <= 1e-13 * a.abs().max(1.0));
        }
    }

    #[test]
    fn roots_are_ordered_and_vanish(
        ret in 0.0..PI, ang in 0.0..1.5f64, delta in -0.3..0.3f64, theta in -3.0..3.0f64,
        xi in -3.0..3.0f64, r in 0.85..0.99f64, linear_cavity in any::<bool>(),
    ) {
        let sys = if linear_cavity {
            linear(ret, ang, delta, theta, xi, r, 0.0)
        } else {
            ring(ret, ang, delta, theta, r, 0.0).1
        };
        let norm = matched_normalization(&MirrorParams::new(r, 0.0)).unwrap();
        let res = threshold_roots(&sys, &norm).unwrap();
        prop_assert_eq!(res.roots.len(), res.det_residuals.len());
        prop_assert!(res.roots.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(res.roots.iter().all(|s| *s >= 0.0 && s.is_finite()));
        let expected = match res.roots.len() {
            0 => ThresholdStatus::NoOscillation,
            1 => ThresholdStatus::OneRoot,
            _ => ThresholdStatus::TwoRoots,
        };
        prop_assert_eq!(res.status, expected);
    }

    #[test]
    fn lower_root_matches_closed_form(
        ret in 0.0..PI, ang in 0.0..(PI / 4.0), delta in -PI..PI, theta in -PI..PI, r in 0.85..0.99f64,
    ) {
        let (ph, sys) = ring(ret, ang, delta, theta, r, 0.0);
        let (_, v) = appendix_u_v(ph.alpha0, ph.psi, ph.eps.abs(), r, delta, theta);
        prop_assume!(v > 1e-12);
        let norm = matched_normalization(&MirrorParams::new(r, 0.0)).unwrap();
        let res = threshold_roots(&sys, &norm).unwrap();
        let closed = appendix_lower_threshold(ph.alpha0, ph.psi, ph.eps.abs(), r, delta, theta, 1.0).unwrap();
        prop_assume!(closed > 0.0);
        let closed = closed / norm.sigma0_intensity;
        let lower = res.lower().expect("v > 0 implies a root");
        prop_assert!((lower - closed).abs() <= 1e-9 * closed, "{lower} vs {closed}");
    }

    #[test]
    fn pump_phase_is_a_gauge(
        ret in 0.0..PI, ang in 0.0..1.5f64, delta in -0.3..0.3f64, theta in -3.0..3.0f64,
        xi in -3.0..3.0f64, r in 0.85..0.99f64, pump in -PI..PI, linear_cavity in any::<bool>(),
    ) {
        let build = |phi| if linear_cavity {
            linear(ret, ang, delta, theta, xi, r, phi)
        } else {
            ring(ret, ang, delta, theta, r, phi).1
        };
        let norm = matched_normalization(&MirrorParams::new(r, 0.0)).unwrap();
        let a = threshold_roots(&build(0.0), &norm).unwrap();
        let b = threshold_roots(&build(pump), &norm).unwrap();
        prop_assert_eq!(a.roots.len(), b.roots.len());
        for (x, y) in a.roots.iter().zip(&b.roots) {
            prop_assert!((x - y).abs() <= 1e-10 * x.max(1e-12), "{x} vs {y}");
        }
    }
}
