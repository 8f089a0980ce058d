//! Physical parameters and the polynomial data shared by every module.

use crate::error::{validation, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Chain size and couplings. `rho = kappa * g^(2N)` is always recomputed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    n_particles: usize,
    hbar: f64,
    g: f64,
    kappa: f64,
}

impl ModelParams {
    pub fn new(n_particles: usize, hbar: f64, g: f64, kappa: f64) -> Result<Self> {
        if n_particles < 2 {
            return Err(validation("n_particles", format!("need at least 2 particles, got {n_particles}")));
        }
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(validation("hbar", format!("must be positive and finite, got {hbar}")));
        }
        if !(g > 0.0 && g.is_finite()) {
            return Err(validation("g", format!("must be positive and finite, got {g}")));
        }
        if !(0.0..=1.0).contains(&kappa) {
            return Err(validation("kappa", format!("must lie in [0, 1], got {kappa}")));
        }
        Ok(ModelParams {
            n_particles,
            hbar,
            g,
            kappa,
        })
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }
    pub fn hbar(&self) -> f64 {
        self.hbar
    }
    pub fn g(&self) -> f64 {
        self.g
    }
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Returns a copy with a different `kappa` (used by continuation in the coupling).
    pub fn with_kappa(&self, kappa: f64) -> Result<Self> {
        Self::new(self.n_particles, self.hbar, self.g, kappa)
    }

    pub fn rho(&self) -> f64 {
        self.kappa * self.g.powi(2 * self.n_particles as i32)
    }

    /// `rho^hbar`, the weight multiplying every off-diagonal coupling.
    pub fn rho_weight(&self) -> f64 {
        if self.kappa == 0.0 {
            0.0
        } else {
            (self.hbar * self.rho().ln()).exp()
        }
    }
}

fn is_self_conjugate(values: &[Complex64], tol: f64) -> bool {
    let mut unused: Vec<Complex64> = values.to_vec();
    for v in values {
        let target = v.conj();
        let scale = tol * v.norm().max(1.0);
        match unused.iter().position(|u| (u - target).norm() <= scale) {
            Some(i) => {
                unused.swap_remove(i);
            }
            None => return false,
        }
    }
    true
}

/// Replaces near-real entries by real ones and averages conjugate partners.
pub(crate) fn symmetrize_conjugates(values: &mut [Complex64], real_tol: f64) {
    for v in values.iter_mut() {
        if v.im.abs() <= real_tol {
            v.im = 0.0;
        }
    }
    let n = values.len();
    let mut paired = vec![false; n];
    for i in 0..n {
        if paired[i] || values[i].im == 0.0 {
            continue;
        }
        let partner = (0..n)
            .filter(|&j| j != i && !paired[j] && values[j].im * values[i].im < 0.0)
            .min_by(|&a, &b| {
                (values[a] - values[i].conj())
                    .norm()
                    .total_cmp(&(values[b] - values[i].conj()).norm())
            });
        if let Some(j) = partner {
            let re = 0.5 * (values[i].re + values[j].re);
            let im = 0.5 * (values[i].im.abs() + values[j].im.abs());
            values[i] = Complex64::new(re, im.copysign(values[i].im));
            values[j] = values[i].conj();
            paired[i] = true;
            paired[j] = true;
        }
    }
}

/// Monic polynomial `t(λ) = Π (λ - τ_k)` with self-conjugate roots in the strip `|Im τ| < ħ/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralPolynomial {
    roots: Vec<Complex64>,
    coefficients: Vec<f64>,
}

impl SpectralPolynomial {
    pub fn new(roots: Vec<Complex64>, hbar: f64) -> Result<Self> {
        if roots.is_empty() {
            return Err(validation("tau", "at least one root is required"));
        }
        if let Some(r) = roots.iter().find(|r| !r.is_finite() || r.im.abs() >= 0.5 * hbar) {
            return Err(validation("tau", format!("root {r} violates |Im tau| < hbar/2")));
        }
        if !is_self_conjugate(&roots, 1e-12) {
            return Err(validation("tau", "root multiset is not closed under conjugation"));
        }
        let coefficients = monic_coefficients(&roots);
        Ok(SpectralPolynomial { roots, coefficients })
    }

    /// Rebuilds the polynomial from its elementary symmetric functions `e_1..e_N`
    /// (so that `t(λ) = λ^N - e_1 λ^{N-1} + e_2 λ^{N-2} - ...`).
    pub fn from_elementary(elementary: &[f64], hbar: f64) -> Result<Self> {
        let n = elementary.len();
        // coefficients in descending order: c_k = (-1)^k e_k
        let desc: Vec<f64> = std::iter::once(1.0)
            .chain(elementary.iter().enumerate().map(|(k, e)| if k % 2 == 0 { -e } else { *e }))
            .collect();
        let mut companion = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            companion[(0, j)] = -desc[j + 1];
        }
        for i in 1..n {
            companion[(i, i - 1)] = 1.0;
        }
        let mut roots: Vec<Complex64> = companion.complex_eigenvalues().iter().copied().collect();
        for r in roots.iter_mut() {
            for _ in 0..50 {
                let (mut p, mut dp) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
                for c in &desc[1..] {
                    dp = dp * *r + p;
                    p = p * *r + c;
                }
                if dp.norm() == 0.0 {
                    break;
                }
                let step = p / dp;
                *r -= step;
                if step.norm() <= 1e-16 * r.norm().max(1.0) {
                    break;
                }
            }
        }
        let scale = roots.iter().map(|r| r.norm()).fold(1.0, f64::max);
        symmetrize_conjugates(&mut roots, 1e-9 * scale);
        roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        let mut poly = Self::new(roots, hbar)?;
        poly.coefficients = desc.into_iter().rev().collect();
        Ok(poly)
    }

    pub fn degree(&self) -> usize {
        self.roots.len()
    }

    pub fn roots(&self) -> &[Complex64] {
        &self.roots
    }

    /// Coefficients in ascending powers of `λ`; the last entry is exactly 1.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn eval(&self, lambda: Complex64) -> Complex64 {
        self.roots.iter().map(|r| lambda - r).product()
    }

    /// `t'(λ)/t(λ)`.
    pub fn log_derivative(&self, lambda: Complex64) -> Complex64 {
        self.roots.iter().map(|r| (lambda - r).inv()).sum()
    }

    /// Root sum, which equals the total momentum.
    pub fn root_sum(&self) -> Complex64 {
        self.roots.iter().sum()
    }

    pub fn power_sum(&self, k: u32) -> Complex64 {
        self.roots.iter().map(|r| r.powu(k)).sum()
    }
}

fn monic_coefficients(roots: &[Complex64]) -> Vec<f64> {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
        for (i, ci) in c.iter().enumerate() {
            next[i + 1] += ci;
            next[i] -= ci * r;
        }
        c = next;
    }
    c.into_iter().map(|z| z.re).collect()
}

/// The strip zeros `δ_k` of the Hill determinant, repeated by multiplicity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HillZeros {
    deltas: Vec<Complex64>,
    total_momentum: f64,
}

impl HillZeros {
    pub fn new(deltas: Vec<Complex64>, hbar: f64) -> Result<Self> {
        if deltas.is_empty() {
            return Err(validation("delta", "at least one zero is required"));
        }
        if let Some(d) = deltas.iter().find(|d| !d.is_finite() || d.im.abs() >= 0.5 * hbar) {
            return Err(validation("delta", format!("zero {d} violates |Im delta| < hbar/2")));
        }
        if !is_self_conjugate(&deltas, 1e-9) {
            return Err(validation("delta", "zero multiset is not closed under conjugation"));
        }
        let total_momentum = deltas.iter().map(|d| d.re).sum();
        Ok(HillZeros { deltas, total_momentum })
    }

    /// Real zeros from plain numbers.
    pub fn real(deltas: &[f64], hbar: f64) -> Result<Self> {
        Self::new(deltas.iter().map(|&d| Complex64::new(d, 0.0)).collect(), hbar)
    }

    pub fn deltas(&self) -> &[Complex64] {
        &self.deltas
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    pub fn total_momentum(&self) -> f64 {
        self.total_momentum
    }

    /// `ϑ(λ) = Π (λ - δ_k)`.
    pub fn theta(&self, lambda: Complex64) -> Complex64 {
        self.deltas.iter().map(|d| lambda - d).product()
    }

    pub fn all_real(&self) -> bool {
        self.deltas.iter().all(|d| d.im == 0.0)
    }
}

/// Depth of the truncated half-infinite determinants and the accepted truncation error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationConfig {
    pub depth: usize,
    pub tail_tol: f64,
}

impl TruncationConfig {
    pub fn new(depth: usize, tail_tol: f64, params: &ModelParams) -> Result<Self> {
        if depth < 2 * params.n_particles() {
            return Err(validation("depth", format!("must be at least 2N = {}", 2 * params.n_particles())));
        }
        if !(1e-15..1.0).contains(&tail_tol) {
            return Err(validation("tail_tol", format!("must lie in [1e-15, 1), got {tail_tol}")));
        }
        Ok(TruncationConfig { depth, tail_tol })
    }

    pub fn default_for(params: &ModelParams) -> Self {
        TruncationConfig {
            depth: (4 * params.n_particles()).max(64),
            tail_tol: 1e-12,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn params_derived_quantities() {
        let p = ModelParams::new(3, 0.7, 1.3, 0.4).unwrap();
        assert_eq!(p.rho(), 0.4 * 1.3f64.powi(6));
        assert!((p.rho_weight() - p.rho().powf(0.7)).abs() < 1e-15);
        let open = ModelParams::new(3, 0.7, 1.3, 0.0).unwrap();
        assert_eq!(open.rho_weight(), 0.0);
        assert!(ModelParams::new(2, 1.0, 1.0, 2.0).is_err());
        assert!(ModelParams::new(1, 1.0, 1.0, 1.0).is_err());
        assert!(ModelParams::new(2, -1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn polynomial_invariants() {
        let t = SpectralPolynomial::new(vec![c(1.0, 0.2), c(1.0, -0.2), c(-3.0, 0.0)], 1.0).unwrap();
        assert_eq!(*t.coefficients().last().unwrap(), 1.0);
        let z = c(0.3, 0.8);
        let horner = t.coefficients().iter().rev().fold(c(0.0, 0.0), |acc, a| acc * z + a);
        assert!((horner - t.eval(z)).norm() < 1e-13);
        assert!(SpectralPolynomial::new(vec![c(1.0, 0.2), c(-1.0, 0.0)], 1.0).is_err());
        assert!(SpectralPolynomial::new(vec![c(1.0, 0.6), c(1.0, -0.6)], 1.0).is_err());
    }

    #[test]
    fn elementary_round_trip() {
        let roots = vec![c(-2.1, 0.0), c(0.4, 0.3), c(0.4, -0.3)];
        let t = SpectralPolynomial::new(roots.clone(), 1.0).unwrap();
        let co = t.coefficients();
        let e: Vec<f64> = (1..=3).map(|k| if k % 2 == 1 { -co[3 - k] } else { co[3 - k] }).collect();
        let back = SpectralPolynomial::from_elementary(&e, 1.0).unwrap();
        for r in roots {
            assert!(back.roots().iter().any(|b| (b - r).norm() < 1e-12));
        }
    }
}
