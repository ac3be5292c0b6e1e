//! Bessel functions of order zero and the outgoing 2D free-space Green's
//! function `(i/4) H0⁽¹⁾(kr)`.

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Argument above which the asymptotic expansion is used.
const ASYMPTOTIC_FROM: f64 = 12.0;

/// `J0(x)` and `Y0(x)` for `x > 0`.
pub fn bessel_j0_y0(x: f64) -> (f64, f64) {
    assert!(x > 0.0, "bessel_j0_y0 needs x > 0, got {x}");
    if x < ASYMPTOTIC_FROM {
        series(x)
    } else {
        asymptotic(x)
    }
}

/// Ascending series; `Y0` through the harmonic-number form.
fn series(x: f64) -> (f64, f64) {
    let z = 0.25 * x * x;
    let (mut term, mut j0, mut y_sum, mut harmonic) = (1.0, 1.0, 0.0, 0.0);
    for k in 1..200 {
        let kf = k as f64;
        term *= -z / (kf * kf);
        harmonic += 1.0 / kf;
        j0 += term;
        // (-1)^{k+1} H_k z^k / (k!)^2 = -H_k · term
        y_sum -= harmonic * term;
        if term.abs() < 1e-18 * j0.abs().max(1e-300) && k > 5 {
            break;
        }
    }
    let y0 = 2.0 / PI * ((0.5 * x).ln() + EULER_GAMMA) * j0 + 2.0 / PI * y_sum;
    (j0, y0)
}

/// Hankel's asymptotic expansion with terms taken until they stop shrinking.
fn asymptotic(x: f64) -> (f64, f64) {
    let (mut p, mut q) = (1.0, 0.0);
    // a_k = ((1)(9)(25)...((2k-1)^2)) / (k! 8^k)
    let mut a = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..40 {
        let kf = k as f64;
        a *= (2.0 * kf - 1.0).powi(2) / (kf * 8.0 * x);
        if a.abs() >= last {
            break;
        }
        last = a.abs();
        match k % 4 {
            1 => q -= a,
            2 => p -= a,
            3 => q += a,
            _ => p += a,
        }
    }
    let amp = (2.0 / (PI * x)).sqrt();
    let phase = x - FRAC_PI_4;
    (
        amp * (p * phase.cos() - q * phase.sin()),
        amp * (p * phase.sin() + q * phase.cos()),
    )
}

/// `H0⁽¹⁾(x) = J0(x) + i Y0(x)`.
pub fn hankel1_0(x: f64) -> Complex64 {
    let (j, y) = bessel_j0_y0(x);
    Complex64::new(j, y)
}

/// Outgoing solution of `[∇² + k²] G = -δ` in 2D, `(i/4) H0⁽¹⁾(k r)`.
pub fn free_space_green(k: f64, r: f64) -> Complex64 {
    Complex64::new(0.0, 0.25) * hankel1_0(k * r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        // Abramowitz & Stegun table 9.1.
        let cases = [
            (1.0, 0.765_197_686_557_966_6, 0.088_256_964_215_676_96),
            (2.5, -0.048_383_776_468_197_99, 0.498_070_359_615_232_9),
            (10.0, -0.245_935_764_451_348_3, 0.055_671_167_283_599_39),
            (20.0, 0.167_024_664_340_583_4, 0.062_640_596_809_383_94),
        ];
        for (x, j, y) in cases {
            let (jj, yy) = bessel_j0_y0(x);
            assert!((jj - j).abs() < 1e-10, "J0({x}) = {jj}");
            assert!((yy - y).abs() < 1e-10, "Y0({x}) = {yy}");
        }
        let g = free_space_green(1.0, 1.0);
        let expect = Complex64::new(0.0, 0.25) * Complex64::new(0.76520, 0.08826);
        assert!((g - expect).norm() < 1e-5);
    }

    /// Both branches agree where they overlap, and J0 matches its integral form.
    #[test]
    fn branches_agree_and_match_integral() {
        for &x in &[12.0, 13.5, 16.0] {
            let (js, ys) = series(x);
            let (ja, ya) = asymptotic(x);
            assert!((js - ja).abs() < 1e-9 && (ys - ya).abs() < 1e-9, "x = {x}");
        }
        for &x in &[0.3, 4.0, 11.0, 30.0, 55.0] {
            let n = 400;
            let integral: f64 = (0..n)
                .map(|m| (x * (PI * (m as f64 + 0.5) / n as f64).sin()).cos())
                .sum::<f64>()
                / n as f64;
            assert!((bessel_j0_y0(x).0 - integral).abs() < 1e-12, "x = {x}");
        }
    }
}
