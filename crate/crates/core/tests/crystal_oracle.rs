use num_complex::Complex64;
use opolock::crystal::{
    g_prime, propagate_crystal_full, propagate_crystal_simple, sinc,
};

type Fields = [Complex64; 3];

/// Envelope equations over a unit-length crystal with `Δk = 2x`:
/// `A0' = −g A1 A2 e^{−iΔk z}`, `A1' = g A0 A2* e^{iΔk z}`,
/// `A2' = g A0 A1* e^{iΔk z}`, integrated with classical RK4.
fn rk4(a: Fields, g: f64, x: f64, steps: usize) -> Fields {
    let dk = 2.0 * x;
    let rhs = |z: f64, a: &Fields| -> Fields {
        let e = Complex64::from_polar(1.0, dk * z);
        [
            -a[1] * a[2] * e.conj() * g,
            a[0] * a[2].conj() * e * g,
            a[0] * a[1].conj() * e * g,
        ]
    };
    let axpy = |a: &Fields, h: f64, k: &Fields| -> Fields {
        [a[0] + k[0] * h, a[1] + k[1] * h, a[2] + k[2] * h]
    };
    let h = 1.0 / steps as f64;
    let mut a = a;
    for s in 0..steps {
        let z = s as f64 * h;
        let k1 = rhs(z, &a);
        let k2 = rhs(z + h / 2.0, &axpy(&a, h / 2.0, &k1));
        let k3 = rhs(z + h / 2.0, &axpy(&a, h / 2.0, &k2));
        let k4 = rhs(z + h, &axpy(&a, h, &k3));
        for i in 0..3 {
            a[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0);
        }
    }
    a
}

fn input() -> Fields {
    [
        Complex64::new(0.8, 0.3),
        Complex64::new(0.5, -0.2),
        Complex64::new(-0.3, 0.6),
    ]
}

fn full(a: Fields, g: f64, x: f64) -> Fields {
    let (o0, o1, o2) = propagate_crystal_full(a[0], a[1], a[2], g, x);
    [o0, o1, o2]
}

fn max_diff(a: &Fields, b: &Fields) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max)
}

#[test]
fn second_order_map_error_is_third_order_in_g() {
    for &x in &[0.0, 0.3, 1.2, 2.5, -1.7] {
        let gs = [0.02, 0.01, 0.005];
        let errs: Vec<f64> = gs
            .iter()
            .map(|&g| max_diff(&rk4(input(), g, x, 2000), &full(input(), g, x)))
            .collect();
        for w in errs.windows(2) {
            let slope = (w[0] / w[1]).log2();
            assert!((slope - 3.0).abs() < 0.05, "x = {x}: slope {slope}");
        }
    }
}

#[test]
fn first_order_term_is_sinc_weighted() {
    // Below second order the signal gain is g·e^{ix}·sinc(x)·A0·A2*.
    let g = 1e-4;
    for &x in &[0.4, 2.0] {
        let a = input();
        let out = rk4(a, g, x, 1000);
        let gain = (out[1] - a[1]) / (a[0] * a[2].conj());
        let expected = g_prime(g, x);
        assert!((gain - expected).norm() < 5.0 * g * g, "x = {x}");
        assert!((expected.norm() - g * sinc(x).abs()).abs() < 1e-18);
    }
}

#[test]
fn simple_map_is_second_order_from_full_map() {
    // With the pump held at its mid-crystal value the signal/idler map drops
    // only O(g²) terms.
    let x = 0.7;
    let a = input();
    let errs: Vec<f64> = [0.02, 0.01, 0.005]
        .iter()
        .map(|&g| {
            let f = full(a, g, x);
            let (s1, s2) = propagate_crystal_simple(a[0], a[1], a[2], g_prime(g, x));
            (f[1] - s1).norm().max((f[2] - s2).norm())
        })
        .collect();
    for w in errs.windows(2) {
        let slope = (w[0] / w[1]).log2();
        assert!((slope - 2.0).abs() < 0.05, "slope {slope}");
    }
}

#[test]
fn manley_rowe_invariants() {
    let a = input();
    let n = |f: &Fields| [f[0].norm_sqr() + f[1].norm_sqr(), f[0].norm_sqr() + f[2].norm_sqr()];
    let before = n(&a);
    let exact = rk4(a, 0.3, 0.9, 4000);
    let after = n(&exact);
    for k in 0..2 {
        assert!((after[k] - before[k]).abs() < 1e-12);
    }
    // The truncated map conserves them up to its own order.
    let g = 0.01;
    let approx = n(&full(a, g, 0.9));
    for k in 0..2 {
        assert!((approx[k] - before[k]).abs() < 10.0 * g.powi(3));
    }
}
