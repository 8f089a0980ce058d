//! Half-infinite determinants `K±`, the Hill determinant `H`, and its strip zeros.
//!
//! `K+` is the limit of the leading minors of a tridiagonal matrix whose
//! couplings decay like `k^{-2N}`, so minors obey the three-term recurrence
//! `D_k = D_{k-1} - c_k D_{k-2}` with `c_k = ρ^ħ / (t(λ + i(k-1)ħ) t(λ + ikħ))`.
//! The truncation error is a power series in `1/M` starting at `M^{1-2N}`,
//! which is removed by Richardson extrapolation over depths `M, 2M, 4M, 8M`.

use crate::error::{Result, TodaError};
use crate::model::{symmetrize_conjugates, HillZeros, ModelParams, SpectralPolynomial, TruncationConfig};
use crate::par::Exec;
use crate::quad::gauss_legendre;
use crate::specfun::{log_sinh_scaled, LogComplex};
use num_complex::Complex64;
use std::f64::consts::PI;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const MAX_DEPTH: usize = 1 << 15;

/// A certified determinant value with its `λ`-derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: Complex64,
    pub derivative: Complex64,
    /// Difference between the two most accurate extrapolants.
    pub truncation_delta: f64,
    /// Base depth `M` that met the tolerance.
    pub depth: usize,
}

impl Evaluation {
    fn conj(self) -> Self {
        Evaluation {
            value: self.value.conj(),
            derivative: self.derivative.conj(),
            ..self
        }
    }
}

#[derive(Clone, Copy)]
struct Dual {
    v: Complex64,
    d: Complex64,
}

impl Dual {
    const ONE: Dual = Dual {
        v: Complex64 { re: 1.0, im: 0.0 },
        d: Complex64 { re: 0.0, im: 0.0 },
    };
}

/// Coupling `c_k` and its derivative from the polynomial values at consecutive shifts.
struct Coupling<'a> {
    t: &'a SpectralPolynomial,
    weight: f64,
    lambda: Complex64,
    step: Complex64,
}

impl Coupling<'_> {
    fn shifted(&self, k: i64) -> (Complex64, Complex64) {
        let z = self.lambda + self.step * k as f64;
        (self.t.eval(z), self.t.log_derivative(z))
    }
}

/// Runs the minor recurrence over `k_first..=k_last`, snapshotting after each listed count.
fn minor_recurrence(cp: &Coupling<'_>, k_first: i64, snapshots: &[usize]) -> Vec<Dual> {
    let mut out = Vec::with_capacity(snapshots.len());
    let (mut prev2, mut prev1) = (Dual::ONE, Dual::ONE);
    let (mut t_prev, mut l_prev) = cp.shifted(k_first - 1);
    let last = *snapshots.last().expect("at least one snapshot");
    let mut next_snapshot = snapshots.iter().peekable();
    for steps in 1..=last {
        let k = k_first + steps as i64 - 1;
        let (t_k, l_k) = cp.shifted(k);
        let c = cp.weight / (t_prev * t_k);
        let dc = -c * (l_prev + l_k);
        let cur = Dual {
            v: prev1.v - c * prev2.v,
            d: prev1.d - dc * prev2.v - c * prev2.d,
        };
        prev2 = prev1;
        prev1 = cur;
        t_prev = t_k;
        l_prev = l_k;
        if next_snapshot.peek() == Some(&&steps) {
            out.push(cur);
            next_snapshot.next();
        }
    }
    out
}

/// Three-level Richardson extrapolation for errors `Σ_j a_j M^{-(p+j)}` sampled at `M·2^i`.
fn richardson(samples: &[Complex64; 4], p: i32) -> (Complex64, f64) {
    let step = |a: &[Complex64], q: i32| -> Vec<Complex64> {
        let f = 2f64.powi(q) - 1.0;
        a.windows(2).map(|w| w[1] + (w[1] - w[0]) / f).collect()
    };
    let l1 = step(samples, p);
    let l2 = step(&l1, p + 1);
    let l3 = step(&l2, p + 2);
    (l3[0], (l3[0] - l2[1]).norm())
}

fn extrapolate(duals: &[Dual], p: i32) -> (Complex64, Complex64, f64) {
    let vals = [duals[0].v, duals[1].v, duals[2].v, duals[3].v];
    let ders = [duals[0].d, duals[1].d, duals[2].d, duals[3].d];
    let (v, dv) = richardson(&vals, p);
    let (d, _) = richardson(&ders, p);
    (v, d, dv)
}

fn pole_guard(lambda: Complex64, t: &SpectralPolynomial, hbar: f64, direction: f64) -> Result<()> {
    for tau in t.roots() {
        let k = (direction * (tau.im - lambda.im) / hbar).round();
        if k >= 1.0 {
            let dist = (lambda + I * (direction * k * hbar) - tau).norm();
            if dist < 1e-12 * hbar {
                return Err(TodaError::Domain(format!(
                    "{lambda} lies within {dist:e} of a pole of the half-infinite determinant"
                )));
            }
        }
    }
    Ok(())
}

fn initial_depth(lambda: Complex64, hbar: f64, cfg: &TruncationConfig) -> usize {
    let scale = (4.0 * lambda.norm() / hbar).ceil() as usize;
    cfg.depth.max(scale).next_power_of_two().min(MAX_DEPTH)
}

/// `K+(λ)` with derivative and truncation certificate.
pub fn k_plus_eval(lambda: Complex64, t: &SpectralPolynomial, params: &ModelParams, cfg: &TruncationConfig) -> Result<Evaluation> {
    let weight = params.rho_weight();
    if weight == 0.0 {
        return Ok(Evaluation {
            value: Complex64::new(1.0, 0.0),
            derivative: Complex64::new(0.0, 0.0),
            truncation_delta: 0.0,
            depth: 0,
        });
    }
    let hbar = params.hbar();
    pole_guard(lambda, t, hbar, 1.0)?;
    let cp = Coupling {
        t,
        weight,
        lambda,
        step: I * hbar,
    };
    let p = 2 * t.degree() as i32 - 1;
    let mut depth = initial_depth(lambda, hbar, cfg);
    loop {
        // leading minor D_M uses couplings k = 2..=M, i.e. M - 1 recurrence steps
        let snaps: Vec<usize> = (0..4).map(|j| (depth << j) - 1).collect();
        let duals = minor_recurrence(&cp, 2, &snaps);
        let (value, derivative, delta) = extrapolate(&duals, p);
        if delta <= cfg.tail_tol * value.norm().max(1.0) {
            return Ok(Evaluation {
                value,
                derivative,
                truncation_delta: delta,
                depth,
            });
        }
        if depth >= MAX_DEPTH {
            return Err(TodaError::Truncation {
                depth,
                delta,
                tol: cfg.tail_tol,
            });
        }
        depth *= 2;
    }
}

pub fn k_plus(lambda: Complex64, t: &SpectralPolynomial, params: &ModelParams, cfg: &TruncationConfig) -> Result<Complex64> {
    k_plus_eval(lambda, t, params, cfg).map(|e| e.value)
}

/// `K-(λ) = conj K+(conj λ)`.
pub fn k_minus_eval(lambda: Complex64, t: &SpectralPolynomial, params: &ModelParams, cfg: &TruncationConfig) -> Result<Evaluation> {
    k_plus_eval(lambda.conj(), t, params, cfg).map(Evaluation::conj)
}

pub fn k_minus(lambda: Complex64, t: &SpectralPolynomial, params: &ModelParams, cfg: &TruncationConfig) -> Result<Complex64> {
    k_minus_eval(lambda, t, params, cfg).map(|e| e.value)
}

/// Hill determinant through the `K±` factorization, with derivative.
pub fn hill_eval(lambda: Complex64, t: &SpectralPolynomial, params: &ModelParams, cfg: &TruncationConfig) -> Result<Evaluation> {
    let weight = params.rho_weight();
    if weight == 0.0 {
        return k_plus_eval(lambda, t, params, cfg);
    }
    let ih = I * params.hbar();
    let kp = k_plus_eval(lambda, t, params, cfg)?;
    let km_up = k_minus_eval(lambda + ih, t, params, cfg)?;
    let kp_up = k_plus_eval(lambda + ih, t, params, cfg)?;
    let km = k_minus_eval(lambda, t, params, cfg)?;
    let tt = t.eval(lambda) * t.eval(lambda + ih);
    if tt.norm() == 0.0 {
        return Err(TodaError::Domain(format!("t(λ)t(λ+iħ) vanishes at {lambda}")));
    }
    let ll = t.log_derivative(lambda) + t.log_derivative(lambda + ih);
    let cross = kp_up.value * km.value;
    let cross_d = kp_up.derivative * km.value + kp_up.value * km.derivative;
    let value = kp.value * km_up.value - weight * cross / tt;
    let derivative = kp.derivative * km_up.value + kp.value * km_up.derivative - weight * (cross_d - cross * ll) / tt;
    let truncation_delta = kp.truncation_delta * km_up.value.norm()
        + km_up.truncation_delta * kp.value.norm()
        + weight * (kp_up.truncation_delta * km.value.norm() + km.truncation_delta * kp_up.value.norm()) / tt.norm();
    Ok(Evaluation {
        value,
        derivative,
        truncation_delta,
        depth: kp.depth.max(km_up.depth).max(kp_up.depth).max(km.depth),
    })
}

pub fn hill(lambda: Complex64, t: &SpectralPolynomial, params: &ModelParams, cfg: &TruncationConfig) -> Result<Complex64> {
    hill_eval(lambda, t, params, cfg).map(|e| e.value)
}

/// Hill determinant from a central `(2w+1)`-row truncation of the doubly-infinite matrix,
/// extrapolated over windows `w, 2w, 4w, 8w`. Independent of the `K±` route.
pub fn hill_brute_eval(lambda: Complex64, t: &SpectralPolynomial, params: &ModelParams, window: usize) -> Result<(Complex64, f64)> {
    let n = t.degree();
    if window < 2 * n {
        return Err(crate::error::validation("window", format!("must be at least 2N = {}", 2 * n)));
    }
    let weight = params.rho_weight();
    if weight == 0.0 {
        return Ok((Complex64::new(1.0, 0.0), 0.0));
    }
    let hbar = params.hbar();
    for tau in t.roots() {
        let k = ((tau.im - lambda.im) / hbar).round();
        if (lambda + I * k * hbar - tau).norm() < 1e-12 * hbar {
            return Err(TodaError::Domain(format!("{lambda} is a pole of the Hill determinant")));
        }
    }
    let cp = Coupling {
        t,
        weight,
        lambda,
        step: I * hbar,
    };
    let mut samples = [Complex64::new(0.0, 0.0); 4];
    for (j, s) in samples.iter_mut().enumerate() {
        let w = window << j;
        // rows -w..=w couple through k = -w+1..=w
        *s = minor_recurrence(&cp, -(w as i64) + 1, &[2 * w])[0].v;
    }
    // both ends truncated: error starts at w^{1-2N}
    Ok(richardson(&samples, 2 * n as i32 - 1))
}

pub fn hill_brute(lambda: Complex64, t: &SpectralPolynomial, params: &ModelParams, window: usize) -> Result<Complex64> {
    hill_brute_eval(lambda, t, params, window).map(|(v, _)| v)
}

/// `Π sinh(π(λ-δ)/ħ) / sinh(π(λ-τ)/ħ)` in log-polar form.
pub fn sinh_ratio(lambda: Complex64, zeros: &HillZeros, t: &SpectralPolynomial, hbar: f64) -> Result<LogComplex> {
    let scale = PI / hbar;
    let mut acc = LogComplex::ONE;
    for (d, tau) in zeros.deltas().iter().zip(t.roots()) {
        acc = acc * log_sinh_scaled((lambda - d) * scale)? / log_sinh_scaled((lambda - tau) * scale)?;
    }
    Ok(acc)
}

fn coth(z: Complex64) -> Complex64 {
    let (w, sign) = if z.re >= 0.0 { (z, 1.0) } else { (-z, -1.0) };
    let e = (-2.0 * w).exp();
    sign * (1.0 + e) / (1.0 - e)
}

/// Diagnostics attached to a zero search.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroCertificate {
    pub zeros: HillZeros,
    /// Contour estimate of the number of strip zeros.
    pub contour_count: f64,
    pub max_residual: f64,
    pub momentum_defect: f64,
    pub multiplicities: Vec<usize>,
}

/// Strip zeros of `H`, see [`hill_zeros_certified`].
pub fn hill_zeros(t: &SpectralPolynomial, params: &ModelParams, cfg: &TruncationConfig) -> Result<HillZeros> {
    hill_zeros_certified(t, params, cfg, Exec::default()).map(|c| c.zeros)
}

/// Locates the `N` zeros of `H` in `|Im λ| < ħ/2`.
///
/// `F(λ) = H(λ) Π sinh(π(λ-τ)/ħ)` is analytic in the strip with zeros exactly at the
/// `δ`s, so contour moments `(1/2πi)∮ λ^j F'/F` over a long rectangle give the power
/// sums of the zeros. Their polynomial roots are polished by Newton on `H`.
pub fn hill_zeros_certified(t: &SpectralPolynomial, params: &ModelParams, cfg: &TruncationConfig, exec: Exec) -> Result<ZeroCertificate> {
    let n = params.n_particles();
    if t.degree() != n {
        return Err(crate::error::validation("tau", format!("expected {n} roots, got {}", t.degree())));
    }
    let hbar = params.hbar();
    if params.rho_weight() == 0.0 {
        return Ok(ZeroCertificate {
            zeros: HillZeros::new(t.roots().to_vec(), hbar)?,
            contour_count: n as f64,
            max_residual: 0.0,
            momentum_defect: 0.0,
            multiplicities: vec![1; n],
        });
    }
    let moments = contour_moments(t, params, cfg, exec)?;
    let count = moments[0].re;
    if (moments[0] - n as f64).norm() > 0.05 {
        return Err(TodaError::ZeroCount { expected: n, count });
    }
    // Newton's identities: k e_k = Σ_{i=1..k} (-1)^{i-1} e_{k-i} p_i
    let mut elementary = vec![1.0];
    for k in 1..=n {
        let s: f64 = (1..=k)
            .map(|i| if i % 2 == 1 { 1.0 } else { -1.0 } * elementary[k - i] * moments[i].re)
            .sum();
        elementary.push(s / k as f64);
    }
    let guesses = SpectralPolynomial::from_elementary(&elementary[1..], f64::INFINITY)?;
    let mut roots: Vec<Complex64> = guesses.roots().iter().map(|&g| polish(g, t, params, cfg)).collect::<Result<_>>()?;

    // merge clusters that Newton cannot separate
    let mut multiplicities = vec![1usize; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if multiplicities[j] > 0 && multiplicities[i] > 0 && (roots[i] - roots[j]).norm() < 1e-6 * hbar {
                let mean = (roots[i] * multiplicities[i] as f64 + roots[j]) / (multiplicities[i] + 1) as f64;
                roots[i] = mean;
                multiplicities[i] += 1;
                multiplicities[j] = 0;
            }
        }
    }
    let mut deltas = Vec::with_capacity(n);
    let mut mult_out = Vec::new();
    for (r, &m) in roots.iter().zip(&multiplicities) {
        if m > 0 {
            deltas.extend(std::iter::repeat_n(*r, m));
            mult_out.push(m);
        }
    }
    symmetrize_conjugates(&mut deltas, 1e-10 * hbar);
    deltas.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let zeros = HillZeros::new(deltas, hbar)?;

    let max_residual = zeros
        .deltas()
        .iter()
        .map(|&d| hill(d, t, params, cfg).map(|h| h.norm()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let momentum_defect = (zeros.deltas().iter().sum::<Complex64>() - t.root_sum()).norm();
    if momentum_defect > 1e-8 {
        return Err(TodaError::Consistency {
            check: "sum of Hill zeros equals sum of polynomial roots".into(),
            residual: momentum_defect,
            tol: 1e-8,
        });
    }
    Ok(ZeroCertificate {
        zeros,
        contour_count: count,
        max_residual,
        momentum_defect,
        multiplicities: mult_out,
    })
}

fn polish(mut z: Complex64, t: &SpectralPolynomial, params: &ModelParams, cfg: &TruncationConfig) -> Result<Complex64> {
    let hbar = params.hbar();
    for _ in 0..100 {
        let h = hill_eval(z, t, params, cfg)?;
        if h.derivative.norm() == 0.0 {
            break;
        }
        let mut step = h.value / h.derivative;
        if step.norm() > 0.25 * hbar {
            step *= 0.25 * hbar / step.norm();
        }
        z -= step;
        if step.norm() <= 1e-15 * z.norm().max(hbar) {
            break;
        }
    }
    Ok(z)
}

/// `(1/2πi)∮ λ^j F'/F dλ` for `j = 0..=N` over the strip rectangle.
fn contour_moments(t: &SpectralPolynomial, params: &ModelParams, cfg: &TruncationConfig, exec: Exec) -> Result<Vec<Complex64>> {
    let n = params.n_particles();
    let hbar = params.hbar();
    let max_re = t.roots().iter().map(|r| r.re.abs()).fold(0.0, f64::max);
    let max_im = t.roots().iter().map(|r| r.im.abs()).fold(0.0, f64::max);
    let half_len = max_re + 5.0 * hbar;
    let eps = (1e-3 * hbar).min(0.5 * (0.5 * hbar - max_im));
    let half_h = 0.5 * hbar - eps;
    let corners = [
        Complex64::new(-half_len, -half_h),
        Complex64::new(half_len, -half_h),
        Complex64::new(half_len, half_h),
        Complex64::new(-half_len, half_h),
    ];
    let (gx, gw) = gauss_legendre(16);
    let panel = 0.25 * hbar;
    let mut nodes: Vec<(Complex64, Complex64)> = Vec::new();
    for side in 0..4 {
        let (a, b) = (corners[side], corners[(side + 1) % 4]);
        let pieces = ((b - a).norm() / panel).ceil().max(1.0) as usize;
        for p in 0..pieces {
            let lo = a + (b - a) * (p as f64 / pieces as f64);
            let hi = a + (b - a) * ((p + 1) as f64 / pieces as f64);
            let mid = 0.5 * (lo + hi);
            let half = 0.5 * (hi - lo);
            for (x, w) in gx.iter().zip(&gw) {
                nodes.push((mid + half * x, half * w));
            }
        }
    }
    let scale = PI / hbar;
    let integrand = exec.try_map_range(nodes.len(), |i| {
        let (z, dz) = nodes[i];
        let h = hill_eval(z, t, params, cfg)?;
        let sinh_part: Complex64 = t.roots().iter().map(|tau| scale * coth((z - tau) * scale)).sum();
        Ok::<_, TodaError>((h.derivative / h.value + sinh_part) * dz)
    })?;
    let mut moments = vec![Complex64::new(0.0, 0.0); n + 1];
    for ((z, _), f) in nodes.iter().zip(&integrand) {
        let mut zp = Complex64::new(1.0, 0.0);
        for m in moments.iter_mut() {
            *m += zp * f;
            zp *= z;
        }
    }
    Ok(moments.into_iter().map(|m| m / (2.0 * PI * I)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn setup(tau: &[f64], kappa: f64) -> (SpectralPolynomial, ModelParams, TruncationConfig) {
        let params = ModelParams::new(tau.len(), 1.0, 1.0, kappa).unwrap();
        let t = SpectralPolynomial::new(tau.iter().map(|&x| c(x, 0.0)).collect(), 1.0).unwrap();
        let cfg = TruncationConfig::default_for(&params);
        (t, params, cfg)
    }

    #[test]
    fn open_chain_is_trivial() {
        let (t, p, cfg) = setup(&[0.3, -0.3], 0.0);
        for z in [c(1.0, 0.0), c(-2.0, 0.4)] {
            assert_eq!(k_plus(z, &t, &p, &cfg).unwrap(), c(1.0, 0.0));
            assert_eq!(k_minus(z, &t, &p, &cfg).unwrap(), c(1.0, 0.0));
            assert_eq!(hill(z, &t, &p, &cfg).unwrap(), c(1.0, 0.0));
            assert_eq!(hill_brute(z, &t, &p, 8).unwrap(), c(1.0, 0.0));
        }
        let zeros = hill_zeros(&t, &p, &cfg).unwrap();
        assert_eq!(zeros.deltas(), t.roots());
    }

    #[test]
    fn k_plus_recurrence_residual() {
        let (t, p, cfg) = setup(&[1.5, -1.5], 1.0);
        let w = p.rho_weight();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let z = c(rng.gen_range(-4.0..4.0), rng.gen_range(-0.45..0.45));
            let up = c(0.0, 1.0);
            let res = k_plus(z - up, &t, &p, &cfg).unwrap() - k_plus(z, &t, &p, &cfg).unwrap()
                + w * k_plus(z + up, &t, &p, &cfg).unwrap() / (t.eval(z) * t.eval(z + up));
            assert!(res.norm() < 10.0 * cfg.tail_tol, "{z}: {res}");
            let res_m = k_minus(z + up, &t, &p, &cfg).unwrap() - k_minus(z, &t, &p, &cfg).unwrap()
                + w * k_minus(z - up, &t, &p, &cfg).unwrap() / (t.eval(z) * t.eval(z - up));
            assert!(res_m.norm() < 10.0 * cfg.tail_tol, "{z}: {res_m}");
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let (t, p, cfg) = setup(&[1.2, -0.4, -0.8], 1.0);
        let z = c(0.7, 0.2);
        let h = 1e-5;
        let e = k_plus_eval(z, &t, &p, &cfg).unwrap();
        let fd = (k_plus(z + h, &t, &p, &cfg).unwrap() - k_plus(z - h, &t, &p, &cfg).unwrap()) / (2.0 * h);
        assert!((e.derivative - fd).norm() < 1e-8);
        let he = hill_eval(z, &t, &p, &cfg).unwrap();
        let fd = (hill(z + h, &t, &p, &cfg).unwrap() - hill(z - h, &t, &p, &cfg).unwrap()) / (2.0 * h);
        assert!((he.derivative - fd).norm() < 1e-8 * fd.norm().max(1.0));
    }

    #[test]
    fn hill_properties() {
        let (t, p, cfg) = setup(&[1.5, -1.5], 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let z = c(rng.gen_range(-4.0..4.0), rng.gen_range(-0.45..0.45));
            let h = hill(z, &t, &p, &cfg).unwrap();
            let periodic = hill(z + c(0.0, 1.0), &t, &p, &cfg).unwrap();
            assert!((h - periodic).norm() < 10.0 * cfg.tail_tol * h.norm().max(1.0));
            assert!((hill(z.conj(), &t, &p, &cfg).unwrap().conj() - h).norm() < 1e-12 * h.norm().max(1.0));
            let brute = hill_brute(z, &t, &p, 64).unwrap();
            assert!((brute - h).norm() < 1e-8 * h.norm().max(1.0), "{z}: {h} vs {brute}");
        }
        for x in [-3.0, -0.2, 0.0, 0.9, 2.5] {
            let h = hill(c(x, -0.5), &t, &p, &cfg).unwrap();
            assert!(h.re > 0.0 && h.im.abs() < 1e-12 * h.re);
        }
    }

    #[test]
    fn brute_self_convergence() {
        let (t, p, _) = setup(&[1.5, -1.5], 1.0);
        let z = c(0.4, 0.1);
        let a = hill_brute(z, &t, &p, 32).unwrap();
        let b = hill_brute(z, &t, &p, 64).unwrap();
        assert!((a - b).norm() < 1e-10);
    }

    #[test]
    fn zeros_reproduce_factorization() {
        let (t, p, cfg) = setup(&[1.5, -1.5], 1.0);
        let cert = hill_zeros_certified(&t, &p, &cfg, Exec::Sequential).unwrap();
        let d = cert.zeros.deltas();
        assert!((d[1].re - 1.422_131_674_720_125_6).abs() < 1e-9, "{d:?}");
        assert!((cert.contour_count - 2.0).abs() < 1e-6);
        assert!(cert.momentum_defect < 1e-8);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let z = c(rng.gen_range(-4.0..4.0), rng.gen_range(-0.45..0.45));
            let h = hill(z, &t, &p, &cfg).unwrap();
            let f = sinh_ratio(z, &cert.zeros, &t, 1.0).unwrap().to_complex();
            assert!((h - f).norm() < 1e-8 * h.norm().max(1.0), "{z}: {h} vs {f}");
        }
    }

    #[test]
    fn decay_bound_and_zero_freeness() {
        let (t, p, cfg) = setup(&[1.5, -1.5], 1.0);
        let w = p.rho_weight();
        for x in (-25..=25).map(|i| i as f64 * 0.3) {
            let z = c(x, 0.0);
            let u: f64 = (1..200_000).map(|k| t.eval(z + c(0.0, k as f64)).norm().recip()).sum();
            let kp = k_plus(z, &t, &p, &cfg).unwrap();
            assert!((kp - 1.0).norm() <= (u * (1.0 + w)).exp() - 1.0);
            let lower = c(x, -0.5);
            let ratio = k_plus(lower, &t, &p, &cfg).unwrap().norm_sqr() / hill(lower, &t, &p, &cfg).unwrap().re;
            assert!(ratio >= 1.0 - 1e-12, "x={x}: {ratio}");
        }
    }
}
