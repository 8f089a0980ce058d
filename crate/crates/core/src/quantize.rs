//! Quantization conditions on the zeros `δ`, Yang's potential, and spectrum reconstruction.
//!
//! Unknowns are the real zeros `δ_1..δ_N` and the phase `φ` of `ζ = e^{iφ}`; equations are
//! the `N` conditions `F_k = 0` plus `Σ δ = P`.

use crate::error::{validation, Result, TodaError};
use crate::model::{HillZeros, ModelParams, SpectralPolynomial};
use crate::nlie::{solve_nlie_with, Grid, NlieOptions, NlieSolution};
use crate::par::Exec;
use crate::specfun::{dilog, log_gamma, varpi};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantizationProblem {
    pub params: ModelParams,
    pub quantum_numbers: Vec<i64>,
    pub total_momentum: f64,
}

impl QuantizationProblem {
    pub fn new(params: ModelParams, quantum_numbers: Vec<i64>, total_momentum: f64) -> Result<Self> {
        if quantum_numbers.len() != params.n_particles() {
            return Err(validation(
                "n",
                format!("expected {} quantum numbers, got {}", params.n_particles(), quantum_numbers.len()),
            ));
        }
        if params.rho_weight() == 0.0 {
            return Err(validation(
                "kappa",
                "quantization needs rho > 0; the open chain has no discrete spectrum",
            ));
        }
        if !total_momentum.is_finite() {
            return Err(validation("P", "must be finite"));
        }
        Ok(QuantizationProblem {
            params,
            quantum_numbers,
            total_momentum,
        })
    }

    fn n(&self) -> usize {
        self.params.n_particles()
    }

    /// Coefficient of `δ_k` in the integral-free part: `2N ln ħ/ħ - ln ρ`.
    fn linear_coefficient(&self) -> f64 {
        let p = &self.params;
        2.0 * p.n_particles() as f64 * p.hbar().ln() / p.hbar() - p.rho().ln()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantizationCandidate {
    pub deltas: HillZeros,
    /// `ζ = e^{i·zeta_phase}`, phase in `(-π, π]`.
    pub zeta_phase: f64,
    /// The phase entering the conditions is `zeta_phase + 2π·phase_branch`; a shift of the
    /// branch is equivalent to shifting every `n_k` by one.
    pub phase_branch: i64,
    pub residuals: Vec<f64>,
    pub converged: bool,
}

impl QuantizationCandidate {
    pub fn new(deltas: HillZeros, phase: f64, residuals: Vec<f64>, converged: bool) -> Self {
        let zeta_phase = crate::specfun::wrap_phase(phase);
        QuantizationCandidate {
            deltas,
            zeta_phase,
            phase_branch: ((phase - zeta_phase) / (2.0 * PI)).round() as i64,
            residuals,
            converged,
        }
    }

    /// Phase on the branch used by the conditions.
    pub fn unwrapped_phase(&self) -> f64 {
        self.zeta_phase + 2.0 * PI * self.phase_branch as f64
    }

    fn real_deltas(&self) -> Vec<f64> {
        self.deltas.deltas().iter().map(|d| d.re).collect()
    }
}

/// `2 Σ_p Im ln Γ(1 + i(δ_k - δ_p)/ħ)` for each `k`, with the imaginary leftover of the
/// full complex expression.
fn gamma_coupling(deltas: &[Complex64], hbar: f64) -> Result<Vec<Complex64>> {
    deltas
        .iter()
        .map(|dk| {
            deltas.iter().try_fold(Complex64::new(0.0, 0.0), |acc, dp| {
                let u = Complex64::new(0.0, 1.0) * (dk - dp) / hbar;
                Ok(acc - Complex64::new(0.0, 1.0) * (log_gamma(1.0 + u)? - log_gamma(1.0 - u)?))
            })
        })
        .collect()
}

/// `F_k` without the integral: `-2π n_k + (2N ln ħ/ħ - ln ρ) δ_k - φ + 2 Σ_p Im ln Γ(1 + i(δ_k - δ_p)/ħ)`.
fn integral_free(deltas: &[Complex64], zeta_phase: f64, problem: &QuantizationProblem) -> Result<Vec<Complex64>> {
    let c = problem.linear_coefficient();
    let coupling = gamma_coupling(deltas, problem.params.hbar())?;
    Ok(deltas
        .iter()
        .zip(&problem.quantum_numbers)
        .zip(coupling)
        .map(|((d, n), g)| -2.0 * PI * *n as f64 + c * d - zeta_phase + g)
        .collect())
}

/// Residuals `F_k` of the quantization conditions at `candidate.deltas`, using a solution
/// of the integral equation for those zeros.
pub fn quantization_residual(candidate: &QuantizationCandidate, problem: &QuantizationProblem, sol: &NlieSolution) -> Result<Vec<f64>> {
    if candidate.deltas != sol.deltas {
        return Err(validation("sol", "integral-equation solution was computed for different zeros"));
    }
    let hbar = problem.params.hbar();
    let half = Complex64::new(0.0, 0.5 * hbar);
    let base = integral_free(candidate.deltas.deltas(), candidate.unwrapped_phase(), problem)?;
    base.into_iter()
        .zip(candidate.deltas.deltas())
        .map(|(b, d)| {
            let integral = (sol.cauchy(d + half)? + sol.cauchy(d - half)?) / (2.0 * PI);
            let f = b + integral;
            if f.im.abs() > 1e-9 {
                return Err(TodaError::Consistency {
                    check: "quantization residual is real".into(),
                    residual: f.im.abs(),
                    tol: 1e-9,
                });
            }
            Ok(f.re)
        })
        .collect()
}

/// `n_k` recovered from the right-hand side; integers at a solution.
pub fn recovered_quantum_numbers(candidate: &QuantizationCandidate, problem: &QuantizationProblem, sol: &NlieSolution) -> Result<Vec<f64>> {
    let f = quantization_residual(candidate, problem, sol)?;
    Ok(f.iter()
        .zip(&problem.quantum_numbers)
        .map(|(f, n)| (f + 2.0 * PI * *n as f64) / (2.0 * PI))
        .collect())
}

#[derive(Debug, Clone, Copy)]
pub struct QuantizeOptions {
    /// Target for `max |F_k|` and `|Σ δ - P|`.
    pub tol: f64,
    pub max_iter: usize,
    pub nlie: NlieOptions,
    /// Forward-difference step in units of `ħ`.
    pub fd_step: f64,
}

impl Default for QuantizeOptions {
    fn default() -> Self {
        QuantizeOptions {
            tol: 1e-8,
            max_iter: 60,
            nlie: NlieOptions {
                tol: 1e-13,
                ..NlieOptions::default()
            },
            fd_step: 1e-6,
        }
    }
}

/// A solved candidate together with the integral-equation solution at its zeros.
#[derive(Debug, Clone)]
pub struct Quantized {
    pub candidate: QuantizationCandidate,
    pub solution: NlieSolution,
    /// `max` of the residual vector after each Newton step.
    pub history: Vec<f64>,
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn split(x: &[f64]) -> (&[f64], f64) {
    let (d, phi) = x.split_at(x.len() - 1);
    (d, phi[0])
}

fn zeros_of(deltas: &[f64], hbar: f64) -> Result<HillZeros> {
    HillZeros::real(deltas, hbar)
}

/// Residuals of the unknowns, optionally warm-started, with the state they were computed from.
type ResidualMap<'a, S> = dyn Fn(&[f64], Option<&S>) -> Result<(Vec<f64>, S)> + Sync + 'a;

struct NewtonRun<S> {
    x: Vec<f64>,
    residual: Vec<f64>,
    state: S,
    history: Vec<f64>,
}

/// Newton's method with forward-difference Jacobian and backtracking on the sup-norm.
/// The last unknown is the phase, whose column is known exactly.
struct Newton<'a, S> {
    eval: &'a ResidualMap<'a, S>,
    step: f64,
    exec: Exec,
}

impl<S: Sync> Newton<'_, S> {
    fn jacobian(&self, x: &[f64], r: &[f64], state: &S) -> Result<DMatrix<f64>> {
        let m = x.len();
        let columns = self.exec.try_map_range(m - 1, |j| {
            let mut shifted = x.to_vec();
            shifted[j] += self.step;
            let (rs, _) = (self.eval)(&shifted, Some(state))?;
            Ok::<_, TodaError>(rs.iter().zip(r).map(|(a, b)| (a - b) / self.step).collect::<Vec<f64>>())
        })?;
        let mut jac = DMatrix::<f64>::zeros(m, m);
        for (j, col) in columns.iter().enumerate() {
            for i in 0..m {
                jac[(i, j)] = col[i];
            }
        }
        for i in 0..m - 1 {
            jac[(i, m - 1)] = -1.0;
        }
        Ok(jac)
    }

    /// Iterates until `target`; stops early at a stall once below `accept`.
    fn solve(&self, x0: Vec<f64>, target: f64, accept: f64, max_iter: usize, warm: Option<&S>) -> Result<NewtonRun<S>> {
        let (mut r, mut state) = (self.eval)(&x0, warm)?;
        let mut x = x0;
        let mut history = vec![sup(&r)];
        for _ in 0..max_iter {
            let now = sup(&r);
            let stalled = history.len() > 1 && now > 0.5 * history[history.len() - 2];
            if now <= target || (stalled && now <= accept) {
                return Ok(NewtonRun {
                    x,
                    residual: r,
                    state,
                    history,
                });
            }
            let jac = self.jacobian(&x, &r, &state)?;
            let rhs = -DVector::from_column_slice(&r);
            let Some(dx) = jac.clone().lu().solve(&rhs) else {
                let svd = jac.svd(false, true);
                let v_t = svd.v_t.expect("requested");
                let (k, _) = svd
                    .singular_values
                    .iter()
                    .enumerate()
                    .fold((0, f64::INFINITY), |(bk, bv), (k, v)| if *v < bv { (k, *v) } else { (bk, bv) });
                let direction: Vec<f64> = v_t.row(k).iter().copied().collect();
                return Err(TodaError::Solver {
                    message: format!("singular Jacobian; degenerate direction {direction:?}"),
                });
            };
            let current = sup(&r);
            let mut t = 1.0;
            loop {
                let trial: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a + t * d).collect();
                match (self.eval)(&trial, Some(&state)) {
                    Ok((rt, st)) if sup(&rt) < (1.0 - 1e-4 * t) * current || t < 1.0 / 64.0 => {
                        x = trial;
                        r = rt;
                        state = st;
                        break;
                    }
                    Err(e) if t < 1.0 / 64.0 => return Err(e),
                    _ => t *= 0.5,
                }
            }
            history.push(sup(&r));
            log::debug!("newton step {}: damping {t}, residual {:.3e}", history.len() - 1, sup(&r));
            // no progress over the last few steps: at the noise floor
            if let [.., before, _, _, _, last] = history[..] {
                if last >= 0.999 * before {
                    break;
                }
            }
        }
        if sup(&r) <= accept {
            return Ok(NewtonRun {
                x,
                residual: r,
                state,
                history,
            });
        }
        Err(TodaError::Solver {
            message: format!(
                "no convergence after {} of at most {max_iter} Newton steps; best unknowns {x:?}, residual history {history:?}",
                history.len() - 1
            ),
        })
    }
}

/// Solution of the integral-free system, reached by continuation from `ρ → 0⁺`:
/// the coefficient of `δ_k` is raised by `s` and `s` is lowered from 40 to 0.
pub fn small_coupling_start(problem: &QuantizationProblem) -> Result<QuantizationCandidate> {
    let n = problem.n();
    let hbar = problem.params.hbar();
    let c = problem.linear_coefficient();
    let big = 40.0 / hbar;
    let phi0 = (problem.total_momentum * (c + big) - 2.0 * PI * problem.quantum_numbers.iter().sum::<i64>() as f64) / n as f64;
    let mut x: Vec<f64> = problem
        .quantum_numbers
        .iter()
        .map(|k| (2.0 * PI * *k as f64 + phi0) / (c + big))
        .collect();
    x.push(phi0);
    let steps = 40;
    for j in 0..=steps {
        let extra = big * (1.0 - j as f64 / steps as f64).powi(2);
        let eval = |x: &[f64], _: Option<&()>| -> Result<(Vec<f64>, ())> {
            let (d, phi) = split(x);
            let cd: Vec<Complex64> = d.iter().map(|v| Complex64::new(*v, 0.0)).collect();
            let mut r: Vec<f64> = integral_free(&cd, phi, problem)?
                .iter()
                .zip(d)
                .map(|(f, d)| f.re + extra * d)
                .collect();
            r.push(d.iter().sum::<f64>() - problem.total_momentum);
            Ok((r, ()))
        };
        let newton = Newton {
            eval: &eval,
            step: 1e-7 * hbar,
            exec: Exec::Sequential,
        };
        x = newton.solve(x, 1e-12, 1e-10, 60, None)?.x;
    }
    let (d, phi) = split(&x);
    let deltas = zeros_of(d, hbar)?;
    let cd = deltas.deltas().to_vec();
    let residuals = integral_free(&cd, phi, problem)?.iter().map(|f| f.re).collect();
    Ok(QuantizationCandidate::new(deltas, phi, residuals, false))
}

/// Solves the quantization conditions, re-solving the integral equation at every trial point.
pub fn solve_quantization(
    problem: &QuantizationProblem,
    init: Option<&QuantizationCandidate>,
    opts: &QuantizeOptions,
) -> Result<Quantized> {
    let hbar = problem.params.hbar();
    let start = match init {
        Some(c) => {
            if c.deltas.len() != problem.n() || !c.deltas.all_real() {
                return Err(validation("init", "initial candidate needs N real zeros"));
            }
            c.clone()
        }
        None => small_coupling_start(problem)?,
    };
    // one grid for the whole solve so residuals are smooth in the unknowns
    let reach = start.deltas.deltas().iter().map(|d| d.re.abs()).fold(0.0, f64::max);
    let probe = Grid::for_zeros(&start.deltas, &problem.params);
    let grid = Grid::new(reach + 45.0 * hbar, probe.spacing())?;
    let nlie_opts = NlieOptions {
        exec: Exec::Sequential,
        ..opts.nlie
    };
    let eval = |x: &[f64], warm: Option<&NlieSolution>| -> Result<(Vec<f64>, NlieSolution)> {
        let (d, phi) = split(x);
        let deltas = zeros_of(d, hbar)?;
        let sol = solve_nlie_with(&deltas, &problem.params, &grid, &nlie_opts, warm)?;
        let cand = QuantizationCandidate::new(deltas, phi, Vec::new(), false);
        let mut r = quantization_residual(&cand, problem, &sol)?;
        r.push(d.iter().sum::<f64>() - problem.total_momentum);
        Ok((r, sol))
    };
    let newton = Newton {
        eval: &eval,
        step: opts.fd_step * hbar,
        exec: opts.nlie.exec,
    };
    let mut x = start.real_deltas();
    x.push(start.unwrapped_phase());
    // aim two digits below the target so the result survives re-evaluation on a finer grid
    let NewtonRun {
        x,
        residual: r,
        state: solution,
        history,
    } = newton.solve(x, 1e-2 * opts.tol, opts.tol, opts.max_iter, None)?;
    let (d, phi) = split(&x);
    let candidate = QuantizationCandidate::new(zeros_of(d, hbar)?, phi, r[..problem.n()].to_vec(), true);
    Ok(Quantized {
        candidate,
        solution,
        history,
    })
}

/// `w = Im W`: the potential whose gradient in `δ_k` (with `Y` re-solved, `ζ` and `n` fixed) is `F_k`.
pub fn yang_potential(candidate: &QuantizationCandidate, problem: &QuantizationProblem, sol: &NlieSolution) -> Result<f64> {
    if candidate.deltas != sol.deltas {
        return Err(validation("sol", "integral-equation solution was computed for different zeros"));
    }
    if !candidate.deltas.all_real() {
        return Err(validation("delta", "Yang's potential is evaluated for real zeros"));
    }
    let hbar = problem.params.hbar();
    let d = candidate.real_deltas();
    let c = problem.linear_coefficient();
    let mut w: f64 = d
        .iter()
        .zip(&problem.quantum_numbers)
        .map(|(d, n)| -2.0 * PI * *n as f64 * d + 0.5 * c * d * d - candidate.unwrapped_phase() * d)
        .sum();
    for a in &d {
        for b in &d {
            w += varpi(a - b, hbar).im;
        }
    }
    // the dilogarithm argument -ρ^ħ Y/|ϑ|² is never positive
    let inst = sol.integrate_profile(|_, ln_y, log_term, weight| dilog(-weight * ln_y.exp()).unwrap_or(f64::NAN) + 0.5 * ln_y * log_term);
    if !inst.is_finite() {
        return Err(TodaError::Domain("non-finite Yang potential integrand".into()));
    }
    Ok(w + inst / (2.0 * PI))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumResult {
    pub tau: Vec<Complex64>,
    /// `e_1..e_N` of the reconstructed `t(λ)`.
    pub elementary_symmetric: Vec<f64>,
    /// `E = P²/2 - e_2`.
    pub energy: f64,
    pub yang_value: f64,
}

/// Elementary symmetric polynomials from power sums by Newton's identities.
pub fn elementary_from_power_sums(p: &[f64]) -> Vec<f64> {
    let mut e = vec![1.0];
    for k in 1..=p.len() {
        let s: f64 = (1..=k)
            .map(|i| {
                let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
                sign * e[k - i] * p[i - 1]
            })
            .sum();
        e.push(s / k as f64);
    }
    e.split_off(1)
}

/// Power sums of `t` from the solution, then `e_k`, the roots `τ`, and the energy.
pub fn reconstruct_spectrum(
    candidate: &QuantizationCandidate,
    problem: &QuantizationProblem,
    sol: &NlieSolution,
) -> Result<SpectrumResult> {
    if !candidate.converged {
        return Err(validation("candidate", "spectrum reconstruction needs a converged candidate"));
    }
    let sums = sol.newton_sums(problem.n())?;
    let e = elementary_from_power_sums(&sums);
    let t = SpectralPolynomial::from_elementary(&e, problem.params.hbar())?;
    let p = problem.total_momentum;
    Ok(SpectrumResult {
        tau: t.roots().to_vec(),
        energy: 0.5 * p * p - e[1],
        elementary_symmetric: e,
        yang_value: yang_potential(candidate, problem, sol)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(n: Vec<i64>) -> QuantizationProblem {
        QuantizationProblem::new(ModelParams::new(2, 1.0, 1.0, 1.0).unwrap(), n, 0.0).unwrap()
    }

    #[test]
    fn newton_identities() {
        // roots 1, 2, 3: p = 6, 14, 36; e = 6, 11, 6
        let e = elementary_from_power_sums(&[6.0, 14.0, 36.0]);
        for (a, b) in e.iter().zip([6.0, 11.0, 6.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn open_chain_rejected() {
        let p = ModelParams::new(2, 1.0, 1.0, 0.0).unwrap();
        assert!(matches!(
            QuantizationProblem::new(p, vec![0, -1], 0.0),
            Err(TodaError::Validation { .. })
        ));
    }

    #[test]
    fn residual_permutes_with_zeros() {
        let pr = QuantizationProblem::new(ModelParams::new(3, 1.0, 1.0, 1.0).unwrap(), vec![0, 0, 0], 0.0).unwrap();
        let a = integral_free(&[Complex64::from(-1.3), Complex64::from(0.2), Complex64::from(1.1)], 0.3, &pr).unwrap();
        let b = integral_free(&[Complex64::from(1.1), Complex64::from(-1.3), Complex64::from(0.2)], 0.3, &pr).unwrap();
        for (i, j) in [(0, 1), (1, 2), (2, 0)] {
            assert!((a[i] - b[j]).norm() < 1e-14);
        }
    }

    #[test]
    fn start_satisfies_integral_free_system() {
        let pr = problem(vec![1, -1]);
        let s = small_coupling_start(&pr).unwrap();
        assert!(sup(&s.residuals) < 1e-10);
        assert!(s.deltas.total_momentum().abs() < 1e-12);
        assert!(s.deltas.deltas()[0].re > s.deltas.deltas()[1].re);
    }

    #[test]
    fn integral_term_is_second_order_small() {
        // dropping the integral changes F by O(ρ^ħ); against the full residual at a fixed point
        let gap = |kappa: f64| {
            let params = ModelParams::new(2, 1.0, 1.0, kappa).unwrap();
            let pr = QuantizationProblem::new(params, vec![0, -1], 0.0).unwrap();
            let zeros = HillZeros::real(&[1.2, -1.2], 1.0).unwrap();
            let grid = Grid::for_zeros(&zeros, &params);
            let sol = solve_nlie_with(&zeros, &params, &grid, &NlieOptions::default(), None).unwrap();
            let cand = QuantizationCandidate::new(zeros.clone(), PI, vec![], false);
            let full = quantization_residual(&cand, &pr, &sol).unwrap();
            let free = integral_free(zeros.deltas(), PI, &pr).unwrap();
            (full[0] - free[0].re).abs()
        };
        let ratio = gap(2e-3) / gap(1e-3);
        assert!((ratio - 2.0).abs() < 0.05, "{ratio}");
    }
}
