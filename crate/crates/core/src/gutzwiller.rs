//! Fundamental solutions of the Baxter equation built from `K±`, their Wronskian,
//! the combination `q` whose entirety encodes quantization, and `Y` from determinants.

use crate::determinants::{hill, k_minus, k_plus};
use crate::error::{Result, TodaError};
use crate::model::{HillZeros, ModelParams, SpectralPolynomial, TruncationConfig};
use crate::par::Exec;
use crate::specfun::{log_gamma, log_sinh_scaled, LogComplex};
use num_complex::Complex64;
use std::f64::consts::PI;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Which member of a fundamental pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

/// `ħ^{±iNλ/ħ} e^{-Nπλ/ħ} g^{∓iNλ} / Π Γ(1 ∓ i(λ - x_k)/ħ)`, i.e. everything but `K±` and `κ^{-iλ}`.
///
/// Shared by the determinant-built and the integral-built Q functions; `roots` are
/// the `τ`s or the `δ`s respectively.
pub fn q_frame(lambda: Complex64, roots: &[Complex64], params: &ModelParams, branch: Branch) -> Result<LogComplex> {
    let n = params.n_particles() as f64;
    let hbar = params.hbar();
    let phase_rate = n * (hbar.ln() / hbar - params.g().ln());
    let sign = match branch {
        Branch::Plus => 1.0,
        Branch::Minus => -1.0,
    };
    let mut ln = sign * I * lambda * phase_rate - n * PI * lambda / hbar;
    for x in roots {
        ln -= log_gamma(1.0 - sign * I * (lambda - x) / hbar)?;
    }
    Ok(LogComplex::exp(ln))
}

/// `κ^{-iλ}`; undefined for the open chain.
pub fn kappa_twist(lambda: Complex64, params: &ModelParams) -> Result<LogComplex> {
    if params.kappa() == 0.0 {
        return Err(TodaError::Domain("the twist factor kappa^{-i lambda} needs kappa > 0".into()));
    }
    Ok(LogComplex::exp(-I * lambda * params.kappa().ln()))
}

/// `κ^ħ`, zero for the open chain.
pub(crate) fn kappa_weight(params: &ModelParams) -> f64 {
    if params.kappa() == 0.0 {
        0.0
    } else {
        params.kappa().powf(params.hbar())
    }
}

/// The pair `Q_t±` for a fixed spectral polynomial.
#[derive(Debug, Clone)]
pub struct QPair {
    pub t: SpectralPolynomial,
    pub params: ModelParams,
    pub cfg: TruncationConfig,
}

impl QPair {
    pub fn new(t: SpectralPolynomial, params: ModelParams, cfg: TruncationConfig) -> Self {
        QPair { t, params, cfg }
    }

    /// `Q+` without `κ^{-iλ}`; well defined for every `κ`, including 0.
    pub fn plus_stripped(&self, lambda: Complex64) -> Result<LogComplex> {
        let kp = k_plus(lambda, &self.t, &self.params, &self.cfg)?;
        Ok(q_frame(lambda, self.t.roots(), &self.params, Branch::Plus)? * LogComplex::from_complex(kp)?)
    }

    pub fn plus(&self, lambda: Complex64) -> Result<LogComplex> {
        Ok(kappa_twist(lambda, &self.params)? * self.plus_stripped(lambda)?)
    }

    pub fn minus(&self, lambda: Complex64) -> Result<LogComplex> {
        let km = k_minus(lambda, &self.t, &self.params, &self.cfg)?;
        Ok(q_frame(lambda, self.t.roots(), &self.params, Branch::Minus)? * LogComplex::from_complex(km)?)
    }

    /// `Q̃+(λ)Q-(λ+iħ) - κ^ħ Q-(λ)Q̃+(λ+iħ)`, the Wronskian with `κ^{-iλ}` removed.
    pub fn wronskian_stripped(&self, lambda: Complex64) -> Result<LogComplex> {
        stripped_wronskian(lambda, &self.params, |z| self.plus_stripped(z), |z| self.minus(z))
    }

    /// Closed form `g^{-Nħ} e^{-2Nπλ/ħ} Π (ħ/iπ) sinh(π(λ-τ)/ħ) · H(λ)` of the stripped Wronskian.
    pub fn wronskian_closed_form_stripped(&self, lambda: Complex64) -> Result<LogComplex> {
        let h = hill(lambda, &self.t, &self.params, &self.cfg)?;
        Ok(wronskian_frame(lambda, self.t.roots(), &self.params)? * LogComplex::from_complex(h)?)
    }
}

/// `g^{-Nħ} e^{-2Nπλ/ħ} Π (ħ/iπ) sinh(π(λ-x)/ħ)`.
pub(crate) fn wronskian_frame(lambda: Complex64, roots: &[Complex64], params: &ModelParams) -> Result<LogComplex> {
    let n = params.n_particles() as f64;
    let hbar = params.hbar();
    let mut acc = LogComplex::exp(Complex64::from(-n * hbar * params.g().ln()) - 2.0 * n * PI * lambda / hbar);
    let factor = LogComplex::new((hbar / PI).ln(), -0.5 * PI);
    for x in roots {
        acc = acc * factor * log_sinh_scaled(PI * (lambda - x) / hbar)?;
    }
    Ok(acc)
}

pub(crate) fn stripped_wronskian<P, M>(lambda: Complex64, params: &ModelParams, plus: P, minus: M) -> Result<LogComplex>
where
    P: Fn(Complex64) -> Result<LogComplex>,
    M: Fn(Complex64) -> Result<LogComplex>,
{
    let up = lambda + I * params.hbar();
    let first = plus(lambda)? * minus(up)?;
    let kw = kappa_weight(params);
    if kw == 0.0 {
        return Ok(first);
    }
    let second = LogComplex::new(kw.ln(), 0.0) * minus(lambda)? * plus(up)?;
    first.try_sub(second)
}

pub fn q_big_plus(lambda: Complex64, t: &SpectralPolynomial, params: &ModelParams, cfg: &TruncationConfig) -> Result<LogComplex> {
    QPair::new(t.clone(), *params, *cfg).plus(lambda)
}

pub fn q_big_minus(lambda: Complex64, t: &SpectralPolynomial, params: &ModelParams, cfg: &TruncationConfig) -> Result<LogComplex> {
    QPair::new(t.clone(), *params, *cfg).minus(lambda)
}

/// Coefficients of the shifted terms in `t(λ)Q(λ) = a Q(λ+iħ) + b Q(λ-iħ)`.
#[derive(Debug, Clone, Copy)]
pub struct BaxterCoefficients {
    pub up: Complex64,
    pub down: Complex64,
}

impl BaxterCoefficients {
    /// `a = i^N g^{Nħ}`, `b = κ^ħ (-i)^N g^{Nħ}`.
    pub fn standard(params: &ModelParams) -> Self {
        let n = params.n_particles() as i32;
        let gn = params.g().powf(n as f64 * params.hbar());
        BaxterCoefficients {
            up: I.powi(n) * gn,
            down: (-I).powi(n) * gn * kappa_weight(params),
        }
    }

    /// Coefficients obeyed by `Q̃+ = κ^{iλ} Q+`.
    pub fn stripped_plus(params: &ModelParams) -> Self {
        let n = params.n_particles() as i32;
        let gn = params.g().powf(n as f64 * params.hbar());
        BaxterCoefficients {
            up: I.powi(n) * gn * kappa_weight(params),
            down: (-I).powi(n) * gn,
        }
    }
}

/// `|t Q(λ) - a Q(λ+iħ) - b Q(λ-iħ)| / |t(λ) Q(λ)|`.
pub fn baxter_residual<F>(lambda: Complex64, t_value: Complex64, hbar: f64, coef: BaxterCoefficients, q: F) -> Result<f64>
where
    F: Fn(Complex64) -> Result<LogComplex>,
{
    let center = LogComplex::from_complex(t_value)? * q(lambda)?;
    let mut residual = Complex64::new(1.0, 0.0);
    for (c, shift) in [(coef.up, 1.0), (coef.down, -1.0)] {
        if c != Complex64::new(0.0, 0.0) {
            let term = LogComplex::from_complex(c)? * q(lambda + I * (shift * hbar))?;
            residual -= (term / center).to_complex();
        }
    }
    Ok(residual.norm())
}

/// Relative mismatch of the Wronskian against its closed form.
pub fn wronskian_residual(lambda: Complex64, qp: &QPair) -> Result<f64> {
    let lhs = qp.wronskian_stripped(lambda)?;
    let rhs = qp.wronskian_closed_form_stripped(lambda)?;
    Ok(((lhs / rhs).to_complex() - 1.0).norm())
}

/// `q(λ) = e^{Nπλ/ħ} (Q+(λ) - ζ Q-(λ)) / Π sinh(π(λ-δ_k)/ħ)` with `ζ = e^{i·zeta_phase}`.
///
/// Within `1e-4 ħ` of a zero `δ_k` the value is recovered from Cauchy's formula on a
/// surrounding circle, which is exact when the residue vanishes.
pub fn q_small(lambda: Complex64, qp: &QPair, zeta_phase: f64, deltas: &HillZeros) -> Result<LogComplex> {
    let hbar = qp.params.hbar();
    let near = deltas.deltas().iter().position(|d| (lambda - d).norm() < 1e-4 * hbar);
    let Some(index) = near else {
        return q_small_direct(lambda, qp, zeta_phase, deltas);
    };
    let center = deltas.deltas()[index];
    let res = q_residue(index, qp, zeta_phase, deltas)?;
    if lambda == center && res.relative > 1e-7 {
        return Err(TodaError::Pole { residue: res.absolute });
    }
    let radius = 1e-2 * hbar;
    let m = 32;
    let samples = (0..m)
        .map(|j| {
            let w = center + radius * Complex64::from_polar(1.0, 2.0 * PI * j as f64 / m as f64);
            q_small_direct(w, qp, zeta_phase, deltas).map(|v| (w, v))
        })
        .collect::<Result<Vec<_>>>()?;
    let scale = samples[0].1;
    let acc: Complex64 = samples
        .iter()
        .map(|(w, v)| (*v / scale).to_complex() * (w - center) / (w - lambda))
        .sum();
    Ok(scale * LogComplex::from_complex(acc / m as f64)?)
}

fn q_small_direct(lambda: Complex64, qp: &QPair, zeta_phase: f64, deltas: &HillZeros) -> Result<LogComplex> {
    let hbar = qp.params.hbar();
    let n = qp.params.n_particles() as f64;
    let plus = qp.plus(lambda)?;
    let minus = LogComplex::new(0.0, zeta_phase) * qp.minus(lambda)?;
    let mut acc = LogComplex::exp(n * PI * lambda / hbar) * plus.try_sub(minus)?;
    for d in deltas.deltas() {
        acc = acc / log_sinh_scaled(PI * (lambda - d) / hbar)?;
    }
    Ok(acc)
}

/// Residue of `q` at a zero `δ_k`, absolute and relative to the size of its `Q+` term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residue {
    pub absolute: f64,
    pub relative: f64,
}

pub fn q_residue(index: usize, qp: &QPair, zeta_phase: f64, deltas: &HillZeros) -> Result<Residue> {
    let hbar = qp.params.hbar();
    let n = qp.params.n_particles() as f64;
    let d = deltas.deltas()[index];
    let plus = qp.plus(d)?;
    let minus = LogComplex::new(0.0, zeta_phase) * qp.minus(d)?;
    let relative = (1.0 - (minus / plus).to_complex()).norm();
    let mut scale = LogComplex::exp(n * PI * d / hbar) * plus * LogComplex::new((hbar / PI).ln(), 0.0);
    for (j, other) in deltas.deltas().iter().enumerate() {
        if j != index {
            scale = scale / log_sinh_scaled(PI * (d - other) / hbar)?;
        }
    }
    Ok(Residue {
        absolute: relative * scale.log_mag.exp(),
        relative,
    })
}

/// `Y` on the real line assembled from `K±`, `H`, `ϑ` and `t`.
pub fn y_from_determinants(
    lambda: f64,
    t: &SpectralPolynomial,
    deltas: &HillZeros,
    params: &ModelParams,
    cfg: &TruncationConfig,
) -> Result<f64> {
    let half = 0.5 * params.hbar();
    let above = Complex64::new(lambda, half);
    let below = Complex64::new(lambda, -half);
    let kp = k_plus(above, t, params, cfg)?;
    let h = hill(below, t, params, cfg)?;
    let ratio = deltas.theta(below) / t.eval(below);
    let y = kp.norm_sqr() * ratio.norm_sqr() / h;
    if h.re <= 0.0 || y.im.abs() > 1e-8 * y.re.abs() {
        return Err(TodaError::Consistency {
            check: "Y from determinants is real and positive".into(),
            residual: y.im.abs(),
            tol: 1e-8 * y.re.abs(),
        });
    }
    Ok(y.re)
}

/// [`y_from_determinants`] over many points.
pub fn y_from_determinants_grid(
    nodes: &[f64],
    t: &SpectralPolynomial,
    deltas: &HillZeros,
    params: &ModelParams,
    cfg: &TruncationConfig,
    exec: Exec,
) -> Result<Vec<f64>> {
    exec.try_map_range(nodes.len(), |i| y_from_determinants(nodes[i], t, deltas, params, cfg))
}
