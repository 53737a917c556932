//! Shared oracles for the integration and acceptance suites. Everything
//! here is independent of the library's implementation paths: exhaustive
//! enumeration, quadrature, and direct search.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use reachkin::quat::Quaternion;

/// Standard normal via Box-Muller.
pub fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(1e-12..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn random_unit_quat(rng: &mut ChaCha8Rng) -> Quaternion {
    loop {
        let q = Quaternion::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        if q.norm() > 0.1 {
            return q.normalize().unwrap();
        }
    }
}

/// Smooth random rotation walk (joint-motion-like).
pub fn random_quat_walk(rng: &mut ChaCha8Rng, len: usize, step: f64) -> Vec<Quaternion> {
    let mut q = Quaternion::identity();
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let axis = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        q = q.multiply(&Quaternion::from_axis_angle(axis, rng.gen_range(0.0..step)));
        out.push(q);
    }
    out
}

/// Exhaustive warp-path enumeration: the minimal summed sign-invariant
/// distance over every valid path. Only feasible for tiny series.
pub fn brute_force_dtw_cost(a: &[Quaternion], b: &[Quaternion]) -> f64 {
    fn recurse(a: &[Quaternion], b: &[Quaternion], i: usize, j: usize, acc: f64, best: &mut f64) {
        let acc = acc + Quaternion::dist(&a[i], &b[j]);
        if acc >= *best {
            return;
        }
        if i == a.len() - 1 && j == b.len() - 1 {
            *best = acc;
            return;
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            recurse(a, b, i + 1, j + 1, acc, best);
        }
        if i + 1 < a.len() {
            recurse(a, b, i + 1, j, acc, best);
        }
        if j + 1 < b.len() {
            recurse(a, b, i, j + 1, acc, best);
        }
    }
    let mut best = f64::INFINITY;
    recurse(a, b, 0, 0, 0.0, &mut best);
    best
}

/// Log-gamma via the Lanczos approximation (g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 8] = [
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        // Reflection.
        return (std::f64::consts::PI / (std::f64::consts::PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = 0.99999999999980993;
    for (i, c) in COEFFS.iter().enumerate() {
        acc += c / (x + i as f64 + 1.0);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Student-t density with `df` degrees of freedom.
fn t_pdf(x: f64, df: f64) -> f64 {
    let ln_c = ln_gamma((df + 1.0) / 2.0)
        - ln_gamma(df / 2.0)
        - 0.5 * (df * std::f64::consts::PI).ln();
    (ln_c - (df + 1.0) / 2.0 * (1.0 + x * x / df).ln()).exp()
}

/// Adaptive Simpson on [a, b].
fn simpson<F: Fn(f64) -> f64 + Copy>(f: F, a: f64, b: f64, fa: f64, fb: f64, fm: f64, eps: f64, depth: u32) -> f64 {
    let m = (a + b) / 2.0;
    let lm = (a + m) / 2.0;
    let rm = (m + b) / 2.0;
    let flm = f(lm);
    let frm = f(rm);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if depth == 0 || (left + right - whole).abs() < 15.0 * eps {
        left + right + (left + right - whole) / 15.0
    } else {
        simpson(f, a, m, fa, fm, flm, eps / 2.0, depth - 1)
            + simpson(f, m, b, fm, fb, frm, eps / 2.0, depth - 1)
    }
}

/// Two-sided p-value of a paired t statistic by direct quadrature of the
/// t density: the tail integral maps onto [0, 1) with x = |t| + u/(1-u).
pub fn t_test_p_by_quadrature(t: f64, df: f64) -> f64 {
    let t = t.abs();
    let g = |u: f64| {
        if u >= 1.0 {
            return 0.0;
        }
        let x = t + u / (1.0 - u);
        t_pdf(x, df) / ((1.0 - u) * (1.0 - u))
    };
    let tail = simpson(g, 0.0, 0.999_999, g(0.0), g(0.999_999), g(0.4999995), 1e-12, 40);
    (2.0 * tail).min(1.0)
}

/// Golden-section search for the minimizer of `f` on [lo, hi].
pub fn golden_section<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - phi * (hi - lo);
    let mut e = lo + phi * (hi - lo);
    let mut fc = f(c);
    let mut fe = f(e);
    while (hi - lo) > tol {
        if fc < fe {
            hi = e;
            e = c;
            fe = fc;
            c = hi - phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = e;
            fc = fe;
            e = lo + phi * (hi - lo);
            fe = f(e);
        }
    }
    (lo + hi) / 2.0
}
