//! Bessel functions of the first kind `J_ν` for real order `ν > -1`.
//!
//! Ascending series for moderate arguments, Hankel's asymptotic expansion
//! beyond [`ASYMPTOTIC_FROM`].

use statrs::function::gamma::gamma;
use std::f64::consts::PI;

const ASYMPTOTIC_FROM: f64 = 17.0;

/// `(J_ν(z), J_ν'(z))` for `z > 0`.
pub fn bessel_j(nu: f64, z: f64) -> (f64, f64) {
    debug_assert!(z > 0.0);
    if z < ASYMPTOTIC_FROM {
        series(nu, z)
    } else {
        let j = asymptotic(nu, z);
        let j_prev = asymptotic(nu - 1.0, z);
        (j, j_prev - nu / z * j)
    }
}

fn series(nu: f64, z: f64) -> (f64, f64) {
    let half = 0.5 * z;
    let q = -half * half;
    let mut term = half.powf(nu) / gamma(nu + 1.0);
    let mut j = term;
    let mut dj = term * nu / z;
    let mut largest = term.abs();
    for k in 1..500 {
        let kf = k as f64;
        term *= q / (kf * (kf + nu));
        j += term;
        dj += term * (2.0 * kf + nu) / z;
        largest = largest.max(term.abs());
        if term.abs() < 1e-17 * largest && kf > half {
            break;
        }
    }
    (j, dj)
}

fn asymptotic(nu: f64, z: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut prev = f64::INFINITY;
    for k in 1..60 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        term *= (mu - odd * odd) / (kf * 8.0 * z);
        if term.abs() > prev {
            break;
        }
        prev = term.abs();
        // a_k / z^k alternates between Q (odd k) and P (even k), signs (-1)^{floor(k/2)}.
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    let chi = z - (0.5 * nu + 0.25) * PI;
    (2.0 / (PI * z)).sqrt() * (p * chi.cos() - q * chi.sin())
}
