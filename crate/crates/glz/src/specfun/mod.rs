//! Closed-form analytic layer: complex log-Gamma, the Gamma phase chi, the
//! instantaneous-kick transition probability and its asymptotics, the
//! general kick amplitude, the exact parabolic-cylinder propagator of the
//! bare crossing, and the Gaussian-averaged crossing formula.

mod dd;
mod pcf;

pub use pcf::{pcf_lz_propagator, PCF_T_MAX};

use num_complex::Complex64;

use crate::pauli::PauliVector;
use crate::{GlzError, Result};

/// Lanczos coefficients, g = 607/128, 15 terms. Relative accuracy around
/// 1e-14 on the right half-plane.
const LANCZOS_G: f64 = 607.0 / 128.0;
#[allow(clippy::excessive_precision)]
const LANCZOS_C: [f64; 15] = [
    0.999_999_999_999_997_09e0,
    57.156_235_665_862_923_5,
    -59.597_960_355_475_491_2,
    14.136_097_974_741_747_2,
    -0.491_913_816_097_620_2,
    0.339_946_499_848_118_887e-4,
    0.465_236_289_270_485_757e-4,
    -0.983_744_753_048_795_647e-4,
    0.158_088_703_224_912_489e-3,
    -0.210_264_441_724_104_883e-3,
    0.217_439_618_115_212_643e-3,
    -0.164_318_106_536_763_890e-3,
    0.844_182_239_838_527_433e-4,
    -0.261_908_384_015_814_087e-4,
    0.368_991_826_595_316_227e-5,
];

fn lanczos_log_gamma(z: Complex64) -> Complex64 {
    // valid for Re z >= 0.5
    let mut acc = Complex64::new(LANCZOS_C[0], 0.0);
    for (k, c) in LANCZOS_C.iter().enumerate().skip(1) {
        acc += c / (z + (k as f64 - 1.0));
    }
    let w = z + (LANCZOS_G - 0.5);
    (z - 0.5) * w.ln() - w + (2.0 * std::f64::consts::PI).sqrt().ln() + acc.ln()
}

/// Complex log-Gamma.
///
/// Lanczos on the right half-plane (Re z >= 0.5), reflection otherwise.
/// Values on the left half-plane are exp-accurate: the imaginary part may
/// differ from the principal analytic continuation by a multiple of 2 pi.
/// On the right half-plane the imaginary part is the continuous arg Gamma,
/// which is what the phase formulas here consume.
pub fn log_gamma(z: Complex64) -> Result<Complex64> {
    if z.im == 0.0 && z.re <= 0.0 && z.re.fract() == 0.0 {
        return Err(GlzError::InvalidParam(format!(
            "log_gamma pole at non-positive integer {}",
            z.re
        )));
    }
    if z.re >= 0.5 {
        Ok(lanczos_log_gamma(z))
    } else {
        // Gamma(z) Gamma(1-z) = pi / sin(pi z)
        let pi = std::f64::consts::PI;
        let s = (pi * z).sin();
        Ok(Complex64::new(pi, 0.0).ln() - s.ln() - lanczos_log_gamma(Complex64::new(1.0, 0.0) - z))
    }
}

/// Gamma function via exp(log_gamma).
pub fn gamma(z: Complex64) -> Result<Complex64> {
    Ok(log_gamma(z)?.exp())
}

fn nu_of(gap: f64) -> Complex64 {
    Complex64::new(0.0, 0.5 * gap * gap)
}

/// Gamma phase chi(a) = pi/4 + arg Gamma((1-nu)/2) - arg Gamma((2-nu)/2)
/// with nu = i a^2/2.
///
/// Even in `a`; pi/4 at a = 0; increases monotonically towards pi/2, the
/// leading deficit being 1/(2 a^2).
pub fn chi(gap: f64) -> f64 {
    let nu = nu_of(gap);
    let half = Complex64::new(0.5, 0.0);
    let one = Complex64::new(1.0, 0.0);
    // both arguments sit on Re >= 0.5 where arg Gamma is principal
    let g1 = log_gamma(half * (one - nu)).expect("no pole on this strip");
    let g2 = log_gamma(one - 0.5 * nu).expect("no pole on this strip");
    std::f64::consts::FRAC_PI_4 + g1.im - g2.im
}

/// Closed-form transition probability of the instantaneously kicked
/// crossing: (1 - e^{-pi a^2}) cos^2(chi(a) - phi).
pub fn p_infinity(gap: f64, angle: f64) -> f64 {
    let lz = (-std::f64::consts::PI * gap * gap).exp();
    let c = (chi(gap) - angle).cos();
    (1.0 - lz) * c * c
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsymptoticRegime {
    /// Validity documented for |a| <= 0.3.
    SmallGap,
    /// Validity documented for |a| >= 3.
    LargeGap,
}

/// Truncated asymptotic expansions of [`p_infinity`].
pub fn p_infinity_asymptotic(gap: f64, angle: f64, regime: AsymptoticRegime) -> f64 {
    use std::f64::consts::{FRAC_PI_4, PI};
    match regime {
        AsymptoticRegime::SmallGap => {
            let a2 = gap * gap;
            let c = (angle - FRAC_PI_4).cos();
            PI * a2 * c * c
                - 0.5 * PI * a2 * a2 * (std::f64::consts::LN_2 * (2.0 * angle).cos() + PI * c * c)
        }
        AsymptoticRegime::LargeGap => {
            let a2 = gap * gap;
            let s = angle.sin();
            s * s + (2.0 * angle).sin() / (2.0 * a2) + (2.0 * angle).cos() / (4.0 * a2 * a2)
        }
    }
}

/// Closed-form amplitude of the crossing interrupted by a general
/// instantaneous rotation exp(-i n.sigma), with n the Pauli coefficients of
/// the kick (trace part ignored).
///
/// Reduces to [`p_infinity`] in modulus squared when
/// n = (pi/2)(cos phi, sin phi, 0).
pub fn delta_amplitude_general(gap: f64, n: &PauliVector) -> Complex64 {
    let lz_half = (-0.5 * std::f64::consts::PI * gap * gap).exp();
    let r = n.norm();
    if r == 0.0 {
        return Complex64::new(lz_half, 0.0);
    }
    let (sin, cos) = r.sin_cos();
    let x = chi(gap);
    let transfer = (1.0 - lz_half * lz_half).max(0.0).sqrt();
    Complex64::new(lz_half * cos, 0.0)
        - Complex64::new(0.0, n.n3 / r * sin)
        - gap.signum()
            * transfer
            * sin
            * (n.n1 / r * x.cos() + n.n2 / r * x.sin())
            * Complex64::new(1.0, 0.0)
}

/// Gaussian average of the bare crossing probability e^{-pi a^2} over
/// a ~ N(mu, sigma^2), in closed form:
/// exp(-pi mu^2 / (1 + 2 pi sigma^2)) / sqrt(1 + 2 pi sigma^2).
pub fn avg_plz(mu: f64, sigma: f64) -> Result<f64> {
    if !(sigma >= 0.0) {
        return Err(GlzError::InvalidParam(format!(
            "standard deviation must be nonnegative, got {sigma}"
        )));
    }
    let d = 1.0 + 2.0 * std::f64::consts::PI * sigma * sigma;
    Ok((-std::f64::consts::PI * mu * mu / d).exp() / d.sqrt())
}
