//! Scalar special functions: complex log-Gamma, the dilogarithm on the
//! non-positive axis, the antiderivative of `ln Γ(1 + i s/ħ)`, an overflow-safe
//! `ln sinh`, and a log-polar complex type.

use crate::error::{Result, TodaError};
use crate::quad;
use num_complex::Complex64;
use std::f64::consts::PI;
use std::ops::{Div, Mul, Neg};

/// A nonzero complex number stored as `exp(log_mag + i * phase)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LogComplex {
    pub log_mag: f64,
    pub phase: f64,
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_phase(phase: f64) -> f64 {
    let mut p = phase.rem_euclid(2.0 * PI);
    if p > PI {
        p -= 2.0 * PI;
    }
    p
}

impl LogComplex {
    pub const ONE: LogComplex = LogComplex { log_mag: 0.0, phase: 0.0 };

    pub fn new(log_mag: f64, phase: f64) -> Self {
        LogComplex {
            log_mag,
            phase: wrap_phase(phase),
        }
    }

    /// Builds `exp(w)` for a complex exponent `w`.
    pub fn exp(w: Complex64) -> Self {
        Self::new(w.re, w.im)
    }

    pub fn from_complex(z: Complex64) -> Result<Self> {
        if z == Complex64::new(0.0, 0.0) || !z.is_finite() {
            return Err(TodaError::Domain(format!("cannot represent {z} in log-polar form")));
        }
        Ok(Self::new(z.norm().ln(), z.arg()))
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::from_polar(self.log_mag.exp(), self.phase)
    }

    /// The exponent `log_mag + i * phase` (phase taken canonically).
    pub fn ln(self) -> Complex64 {
        Complex64::new(self.log_mag, self.phase)
    }

    pub fn inv(self) -> Self {
        Self::new(-self.log_mag, -self.phase)
    }

    pub fn powi(self, n: i32) -> Self {
        Self::new(n as f64 * self.log_mag, n as f64 * self.phase)
    }

    /// `self + other`, computed relative to the larger magnitude; fails on exact cancellation.
    pub fn try_add(self, other: Self) -> Result<Self> {
        let (big, small) = if self.log_mag >= other.log_mag {
            (self, other)
        } else {
            (other, self)
        };
        let ratio = (small / big).to_complex();
        let one_plus = Complex64::new(1.0, 0.0) + ratio;
        Ok(big * LogComplex::from_complex(one_plus)?)
    }

    pub fn try_sub(self, other: Self) -> Result<Self> {
        self.try_add(-other)
    }
}

impl Neg for LogComplex {
    type Output = LogComplex;
    fn neg(self) -> Self {
        Self::new(self.log_mag, self.phase + PI)
    }
}

impl Mul for LogComplex {
    type Output = LogComplex;
    fn mul(self, rhs: Self) -> Self {
        LogComplex::new(self.log_mag + rhs.log_mag, self.phase + rhs.phase)
    }
}

impl Div for LogComplex {
    type Output = LogComplex;
    fn div(self, rhs: Self) -> Self {
        LogComplex::new(self.log_mag - rhs.log_mag, self.phase - rhs.phase)
    }
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

fn lanczos_log_gamma(z: Complex64) -> Complex64 {
    let w = z - 1.0;
    let mut series = Complex64::new(LANCZOS_COEF[0], 0.0);
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        series += *c / (w + i as f64);
    }
    let t = w + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (w + 0.5) * t.ln() - t + series.ln()
}

/// Principal-branch `ln Γ(z)`, analytic off the non-positive real axis and
/// satisfying `ln Γ(z + 1) = ln Γ(z) + ln z` with the principal `ln z`.
pub fn log_gamma(z: Complex64) -> Result<Complex64> {
    if !z.is_finite() {
        return Err(TodaError::Domain(format!("log_gamma of non-finite {z}")));
    }
    if z.im == 0.0 && z.re <= 0.0 && z.re.fract() == 0.0 {
        return Err(TodaError::GammaPole { z });
    }
    if z.re >= 0.5 {
        return Ok(lanczos_log_gamma(z));
    }
    let shift = (0.5 - z.re).ceil() as usize;
    let correction: Complex64 = (0..shift).map(|j| (z + j as f64).ln()).sum();
    Ok(lanczos_log_gamma(z + shift as f64) - correction)
}

// B_{2j} / (2j + 1)! for j = 1..10
const DILOG_SERIES: [f64; 10] = [
    1.0 / 36.0,
    -1.0 / 3_600.0,
    1.0 / 211_680.0,
    -1.0 / 10_886_400.0,
    1.0 / 526_901_760.0,
    -4.064_761_645_144_226e-11,
    8.921_691_020_456_453e-13,
    -1.993_929_586_072_108e-14,
    4.518_980_029_619_919e-16,
    -1.035_651_761_218_125e-17,
];

fn dilog_small(x: f64) -> f64 {
    let y = -(-x).ln_1p();
    let y2 = y * y;
    let mut term = y * y2;
    let mut acc = y - 0.25 * y2;
    for c in DILOG_SERIES {
        acc += c * term;
        term *= y2;
    }
    acc
}

/// Standard dilogarithm `Li₂(x) = -∫₀ˣ ln(1 - t)/t dt` for `x <= 0`.
pub fn dilog(x: f64) -> Result<f64> {
    if x.is_nan() || x > 0.0 {
        return Err(TodaError::Domain(format!("dilog is only provided for x <= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x >= -1.0 {
        return Ok(dilog_small(x));
    }
    let l = (-x).ln();
    Ok(-PI * PI / 6.0 - 0.5 * l * l - dilog_small(1.0 / x))
}

/// `ϖ(λ) = ∫₀^λ ln Γ(1 + i s/ħ) ds`.
pub fn varpi(lambda: f64, hbar: f64) -> Complex64 {
    let (value, _) = quad::integrate(|s| lanczos_log_gamma(Complex64::new(1.0, s / hbar)), 0.0, lambda, 1e-14, 1e-14);
    value
}

/// `sinh(z)` in log-polar form, safe for `|Re z|` far beyond the `f64` exponent range.
pub fn log_sinh_scaled(z: Complex64) -> Result<LogComplex> {
    // sinh z = ±e^{±z}/2 · (1 - e^{∓2z}) with the sign chosen so the exponential decays
    let (lead, rest) = if z.re >= 0.0 {
        (z, -2.0 * z)
    } else {
        (-z + Complex64::new(0.0, PI), 2.0 * z)
    };
    let nearest = Complex64::new(0.0, PI * (z.im / PI).round());
    let distance = (z - nearest).norm();
    if distance < 1e-300 {
        return Err(TodaError::SinhZero { z, distance });
    }
    let factor = LogComplex::from_complex(-rest.exp_m1()).map_err(|_| TodaError::SinhZero { z, distance })?;
    Ok(LogComplex::exp(lead - 2f64.ln()) * factor)
}

trait ExpM1 {
    fn exp_m1(self) -> Self;
}

impl ExpM1 for Complex64 {
    fn exp_m1(self) -> Complex64 {
        // e^{a+ib} - 1 = (e^a - 1) cos b + (cos b - 1) + i e^a sin b
        let em1 = self.re.exp_m1();
        let cosm1 = -2.0 * (0.5 * self.im).sin().powi(2);
        Complex64::new(em1 * self.im.cos() + cosm1, self.re.exp() * self.im.sin())
    }
}
