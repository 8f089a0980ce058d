//! The nonlinear integral equation for `Y`, the Cauchy-transform factors `v↑`/`v↓`,
//! the integral-built Q functions, and Newton sums of the spectral polynomial.
//!
//! Discretization: trapezoid rule with Gregory end corrections on a symmetric
//! uniform grid `[-Λ, Λ]`. Beyond the grid, `ln Y(μ) ≈ ln Y(±Λ) (Λ/μ)²` and the
//! log-term is integrated with Gauss panels followed by the map `μ = B/u`.
//! Off-grid and complex evaluations of `ln Y` use the Nyström formula, i.e. the
//! right-hand side of the equation itself.

use crate::error::{validation, Result, TodaError};
use crate::gutzwiller::{kappa_twist, kappa_weight, q_frame, stripped_wronskian, wronskian_frame, Branch};
use crate::model::{HillZeros, ModelParams};
use crate::par::Exec;
use crate::quad::gauss_legendre;
use crate::specfun::LogComplex;
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Symmetric uniform grid on `[-Λ, Λ]` with Gregory end-corrected trapezoid weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    lambda_max: f64,
    spacing: f64,
}

impl Grid {
    /// `Λ` is rounded to a whole number of spacings.
    pub fn new(lambda_max: f64, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0 && lambda_max > spacing) {
            return Err(validation(
                "grid",
                format!("need 0 < spacing < lambda_max, got {spacing}, {lambda_max}"),
            ));
        }
        let half = (lambda_max / spacing).round() as i64;
        let nodes: Vec<f64> = (-half..=half).map(|j| j as f64 * spacing).collect();
        if nodes.len() < 7 {
            return Err(validation("grid", "need at least 7 nodes"));
        }
        let mut weights = vec![spacing; nodes.len()];
        let last = nodes.len() - 1;
        for (k, c) in GREGORY.iter().enumerate() {
            weights[k] = c * spacing;
            weights[last - k] = c * spacing;
        }
        Ok(Grid {
            nodes,
            weights,
            lambda_max: half as f64 * spacing,
            spacing,
        })
    }

    /// Default grid: `Λ = max|Re δ| + 40ħ`, spacing resolving the log-term's nearest singularity.
    pub fn for_zeros(zeros: &HillZeros, params: &ModelParams) -> Self {
        let hbar = params.hbar();
        let reach = zeros.deltas().iter().map(|d| d.re.abs()).fold(0.0, f64::max);
        let spacing = (hbar / 16.0).min(0.1 * singularity_distance(zeros, hbar));
        Grid::new(reach + 40.0 * hbar, spacing).expect("positive spacing")
    }

    pub fn check(&self, zeros: &HillZeros, params: &ModelParams) -> Result<()> {
        let hbar = params.hbar();
        let reach = zeros.deltas().iter().map(|d| d.re.abs()).fold(0.0, f64::max);
        if self.spacing > hbar / 8.0 {
            return Err(validation("grid_points", format!("spacing {} exceeds hbar/8", self.spacing)));
        }
        if self.lambda_max < reach + 10.0 * hbar {
            return Err(validation(
                "lambda_max",
                format!("must be at least max|Re delta| + 10 hbar = {}", reach + 10.0 * hbar),
            ));
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn count(&self) -> usize {
        self.nodes.len()
    }
    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn halved(&self) -> Grid {
        Grid::new(self.lambda_max, 0.5 * self.spacing).expect("valid grid")
    }

    pub fn extended(&self, extra: f64) -> Grid {
        Grid::new(self.lambda_max + extra, self.spacing).expect("valid grid")
    }
}

/// Distance from the real axis to the nearest pole of `1/(ϑ(μ-iħ/2)ϑ(μ+iħ/2))`.
fn singularity_distance(zeros: &HillZeros, hbar: f64) -> f64 {
    let max_im = zeros.deltas().iter().map(|d| d.im.abs()).fold(0.0, f64::max);
    0.5 * hbar - max_im
}

const GREGORY: [f64; 3] = [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0];

fn kernel(x: Complex64, hbar: f64) -> Complex64 {
    hbar / (PI * (x * x + hbar * hbar))
}

fn kernel_derivative(x: Complex64, hbar: f64) -> Complex64 {
    let d = x * x + hbar * hbar;
    -2.0 * hbar * x / (PI * d * d)
}

/// Quadrature for `|μ| > Λ`; `decay` holds `(Λ/μ)²` used to extrapolate `ln Y`.
#[derive(Debug, Clone)]
struct TailRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    decay: Vec<f64>,
    right: Vec<bool>,
}

fn tail_rule(lambda_max: f64, hbar: f64) -> TailRule {
    let (gx, gw) = gauss_legendre(16);
    let (ux, uw) = gauss_legendre(24);
    let panels = 16;
    let width = 0.5 * hbar;
    let outer = lambda_max + panels as f64 * width;
    let mut half_nodes = Vec::new();
    let mut half_weights = Vec::new();
    for p in 0..panels {
        let mid = lambda_max + (p as f64 + 0.5) * width;
        for (x, w) in gx.iter().zip(&gw) {
            half_nodes.push(mid + 0.5 * width * x);
            half_weights.push(0.5 * width * w);
        }
    }
    for (x, w) in ux.iter().zip(&uw) {
        let u = 0.5 * (x + 1.0);
        half_nodes.push(outer / u);
        half_weights.push(0.5 * w * outer / (u * u));
    }
    let mut rule = TailRule {
        nodes: Vec::new(),
        weights: Vec::new(),
        decay: Vec::new(),
        right: Vec::new(),
    };
    for sign in [1.0, -1.0] {
        for (m, w) in half_nodes.iter().zip(&half_weights) {
            rule.nodes.push(sign * m);
            rule.weights.push(*w);
            rule.decay.push((lambda_max / m).powi(2));
            rule.right.push(sign > 0.0);
        }
    }
    rule
}

/// Options for [`solve_nlie_with`].
#[derive(Debug, Clone, Copy)]
pub struct NlieOptions {
    /// Target accuracy of `ln Y` in sup-norm (estimated distance to the fixed point).
    pub tol: f64,
    pub max_iter: usize,
    pub exec: Exec,
}

impl Default for NlieOptions {
    fn default() -> Self {
        NlieOptions {
            tol: 1e-12,
            max_iter: 20_000,
            exec: Exec::default(),
        }
    }
}

/// How the fixed point was reached.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// `ρ^ħ / inf |ϑ(λ - iħ/2)|²`.
    pub weight_ratio: f64,
    /// True when the weight ratio is below one and every Picard step was checked against the bound.
    pub contraction_certified: bool,
    pub contraction_checks: usize,
    /// Largest observed `d_{k+1} / (q d_k)`; at most 1 when the certificate holds.
    pub worst_contraction_ratio: f64,
    pub continuation_steps: usize,
    pub anderson_steps: usize,
}

/// Converged solution of the integral equation for fixed zeros.
#[derive(Debug, Clone)]
pub struct NlieSolution {
    pub grid: Grid,
    pub ln_y: Vec<f64>,
    pub deltas: HillZeros,
    pub params: ModelParams,
    /// Sup-norm of the equation mismatch on the nodes.
    pub residual: f64,
    pub report: SolveReport,
    log_term: Vec<f64>,
    tail: TailRule,
    tail_log_term: Vec<f64>,
    subtract_below: f64,
}

struct Discretization {
    grid: Grid,
    tail: TailRule,
    weight_nodes: Vec<f64>,
    weight_tail: Vec<f64>,
    toeplitz: Vec<f64>,
    tail_matrix: Vec<f64>,
    exec: Exec,
}

/// `ρ^ħ / |ϑ(μ - iħ/2)|²` on the real line.
fn log_term_weight(mu: f64, zeros: &HillZeros, params: &ModelParams) -> f64 {
    let half = 0.5 * params.hbar();
    let d = zeros.theta(Complex64::new(mu, -half)) * zeros.theta(Complex64::new(mu, half));
    params.rho_weight() / d.re
}

impl Discretization {
    fn new(grid: &Grid, zeros: &HillZeros, params: &ModelParams, exec: Exec) -> Self {
        let hbar = params.hbar();
        let tail = tail_rule(grid.lambda_max(), hbar);
        let n = grid.count();
        let toeplitz: Vec<f64> = (0..n)
            .map(|d| kernel(Complex64::from(d as f64 * grid.spacing()), hbar).re)
            .collect();
        let q = tail.nodes.len();
        let rows = exec.map_range(n, |i| {
            (0..q)
                .map(|k| tail.weights[k] * kernel(Complex64::from(grid.nodes()[i] - tail.nodes[k]), hbar).re)
                .collect::<Vec<f64>>()
        });
        Discretization {
            weight_nodes: grid.nodes().iter().map(|&m| log_term_weight(m, zeros, params)).collect(),
            weight_tail: tail.nodes.iter().map(|&m| log_term_weight(m, zeros, params)).collect(),
            tail_matrix: rows.concat(),
            toeplitz,
            tail,
            grid: grid.clone(),
            exec,
        }
    }

    fn log_terms(&self, ln_y: &[f64], scale: f64) -> (Vec<f64>, Vec<f64>) {
        let nodes = ln_y
            .iter()
            .zip(&self.weight_nodes)
            .map(|(l, a)| (scale * a * l.exp()).ln_1p())
            .collect();
        let (left, right) = (ln_y[0], *ln_y.last().unwrap());
        let tail = (0..self.tail.nodes.len())
            .map(|k| {
                let edge = if self.tail.right[k] { right } else { left };
                (scale * self.weight_tail[k] * (edge * self.tail.decay[k]).exp()).ln_1p()
            })
            .collect();
        (nodes, tail)
    }

    /// One application of the integral operator.
    fn apply(&self, ln_y: &[f64], scale: f64) -> Vec<f64> {
        let (nodes, tail) = self.log_terms(ln_y, scale);
        let weighted: Vec<f64> = nodes.iter().zip(self.grid.weights()).map(|(l, w)| l * w).collect();
        let q = tail.len();
        self.exec.map_range(ln_y.len(), |i| {
            let bulk: f64 = weighted.iter().enumerate().map(|(j, wl)| self.toeplitz[i.abs_diff(j)] * wl).sum();
            let row = &self.tail_matrix[i * q..(i + 1) * q];
            bulk + row.iter().zip(&tail).map(|(k, l)| k * l).sum::<f64>()
        })
    }

    fn max_weight(&self) -> f64 {
        self.weight_nodes.iter().chain(&self.weight_tail).fold(0.0, |a, b| a.max(*b))
    }
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn sup(a: &[f64]) -> f64 {
    a.iter().fold(f64::NEG_INFINITY, |m, x| m.max(*x))
}

/// Depth-2 Anderson mixing on the fixed-point residual.
#[derive(Default)]
struct Anderson {
    xs: Vec<Vec<f64>>,
    fs: Vec<Vec<f64>>,
}

impl Anderson {
    fn step(&mut self, x: &[f64], gx: &[f64]) -> Vec<f64> {
        let f: Vec<f64> = gx.iter().zip(x).map(|(g, x)| g - x).collect();
        self.xs.push(x.to_vec());
        self.fs.push(f.clone());
        if self.xs.len() > 3 {
            self.xs.remove(0);
            self.fs.remove(0);
        }
        let m = self.xs.len() - 1;
        if m == 0 {
            return gx.to_vec();
        }
        let diff = |v: &Vec<Vec<f64>>, j: usize| -> Vec<f64> { v[j + 1].iter().zip(&v[j]).map(|(a, b)| a - b).collect() };
        let df: Vec<Vec<f64>> = (0..m).map(|j| diff(&self.fs, j)).collect();
        let dx: Vec<Vec<f64>> = (0..m).map(|j| diff(&self.xs, j)).collect();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let mut gram = nalgebra::DMatrix::<f64>::zeros(m, m);
        let mut rhs = nalgebra::DVector::<f64>::zeros(m);
        for a in 0..m {
            for b in 0..m {
                gram[(a, b)] = dot(&df[a], &df[b]);
            }
            gram[(a, a)] *= 1.0 + 1e-10;
            rhs[a] = dot(&df[a], &f);
        }
        let Some(gamma) = gram.lu().solve(&rhs) else {
            self.xs.clear();
            self.fs.clear();
            return gx.to_vec();
        };
        let mut next = gx.to_vec();
        for j in 0..m {
            for (i, v) in next.iter_mut().enumerate() {
                *v -= gamma[j] * (dx[j][i] + df[j][i]);
            }
        }
        next
    }

    fn reset(&mut self) {
        self.xs.clear();
        self.fs.clear();
    }
}

/// Solves the equation with default options.
pub fn solve_nlie(deltas: &HillZeros, params: &ModelParams, grid: &Grid, tol: f64) -> Result<NlieSolution> {
    solve_nlie_with(
        deltas,
        params,
        grid,
        &NlieOptions {
            tol,
            ..NlieOptions::default()
        },
        None,
    )
}

struct PicardOutcome {
    ln_y: Vec<f64>,
    iterations: usize,
    checks: usize,
    worst_ratio: f64,
    anderson_steps: usize,
}

fn iterate(disc: &Discretization, start: Vec<f64>, scale: f64, opts: &NlieOptions, certify: bool) -> Option<PicardOutcome> {
    let max_weight = scale * disc.max_weight();
    let mut x = start;
    let mut gx = disc.apply(&x, scale);
    let mut d = sup_distance(&gx, &x);
    let mut out = PicardOutcome {
        ln_y: Vec::new(),
        iterations: 0,
        checks: 0,
        worst_ratio: 0.0,
        anderson_steps: 0,
    };
    let mut anderson = Anderson::default();
    let mut measured = 0.0;
    for it in 0..opts.max_iter {
        out.iterations = it + 1;
        // local Lipschitz bound of the operator between the current iterates:
        // ρ^ħ e^M / (J + ρ^ħ e^M) with M the largest ln Y seen
        let peak = max_weight * sup(&x).max(sup(&gx)).exp();
        let bound = peak / (1.0 + peak);
        let q = bound.max(measured).min(0.9999);
        log::trace!("picard {it}: scale {scale:.4}, step {d:.3e}, rate {q:.4}");
        if d <= opts.tol * (1.0 - q) || d == 0.0 {
            log::debug!("picard converged in {} steps at scale {scale:.4}", it + 1);
            out.ln_y = gx;
            return Some(out);
        }
        let use_anderson = !certify && measured > 0.9;
        let next = if use_anderson {
            out.anderson_steps += 1;
            anderson.step(&x, &gx)
        } else {
            anderson.reset();
            gx.clone()
        };
        let g_next = disc.apply(&next, scale);
        let d_next = sup_distance(&g_next, &next);
        if !d_next.is_finite() {
            return None;
        }
        if !use_anderson {
            if certify {
                // successive-iterate distances shrink at least by the bound
                out.checks += 1;
                let ratio = if d > 0.0 { d_next / (bound * d) } else { 0.0 };
                out.worst_ratio = out.worst_ratio.max(ratio);
            }
            measured = if d > 0.0 { d_next / d } else { 0.0 };
        } else if d_next > 2.0 * d {
            anderson.reset();
            measured = 0.0;
        }
        x = next;
        gx = g_next;
        d = d_next;
    }
    None
}

/// Solves the equation, optionally warm-started from another solution.
///
/// With `ρ^ħ/J < 1` plain Picard iteration is used and each step is checked against
/// the contraction bound. Otherwise the coupling is ramped as `ρ^ħ (j/m)²`,
/// `j = 1..m`, starting from `m = 8` and doubling after a failed ramp.
pub fn solve_nlie_with(
    deltas: &HillZeros,
    params: &ModelParams,
    grid: &Grid,
    opts: &NlieOptions,
    warm: Option<&NlieSolution>,
) -> Result<NlieSolution> {
    if deltas.len() != params.n_particles() {
        return Err(validation(
            "delta",
            format!("expected {} zeros, got {}", params.n_particles(), deltas.len()),
        ));
    }
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(validation("tol", "must be positive"));
    }
    grid.check(deltas, params)?;
    let disc = Discretization::new(grid, deltas, params, opts.exec);
    // ρ^ħ / inf|ϑ|² is the largest tabulated weight
    let weight_ratio = disc.max_weight();
    let certified = weight_ratio < 1.0;
    let start: Vec<f64> = match warm {
        Some(w) => grid
            .nodes()
            .iter()
            .map(|&m| w.ln_y_at(Complex64::from(m)).map(|v| v.re))
            .collect::<Result<_>>()?,
        None => vec![0.0; grid.count()],
    };

    let mut report = SolveReport {
        iterations: 0,
        weight_ratio,
        contraction_certified: certified,
        contraction_checks: 0,
        worst_contraction_ratio: 0.0,
        continuation_steps: 0,
        anderson_steps: 0,
    };
    let ln_y = if certified || warm.is_some() {
        let run = iterate(&disc, start.clone(), 1.0, opts, certified);
        match run {
            Some(r) => {
                report.iterations = r.iterations;
                report.contraction_checks = r.checks;
                report.worst_contraction_ratio = r.worst_ratio;
                report.anderson_steps = r.anderson_steps;
                Some(r.ln_y)
            }
            None if certified => {
                return Err(TodaError::Solver {
                    message: format!("Picard iteration did not reach {:e} in {} steps", opts.tol, opts.max_iter),
                })
            }
            None => None,
        }
    } else {
        None
    };
    let ln_y = match ln_y {
        Some(v) => v,
        None => continuation(&disc, opts, &mut report)?,
    };
    if certified && report.worst_contraction_ratio > 1.0 + 1e-9 {
        return Err(TodaError::Consistency {
            check: "contraction factor bound".into(),
            residual: report.worst_contraction_ratio,
            tol: 1.0,
        });
    }
    let residual = sup_distance(&disc.apply(&ln_y, 1.0), &ln_y);
    let (log_term, tail_log_term) = disc.log_terms(&ln_y, 1.0);
    Ok(NlieSolution {
        grid: grid.clone(),
        ln_y,
        deltas: deltas.clone(),
        params: *params,
        residual,
        report,
        log_term,
        tail: disc.tail,
        tail_log_term,
        subtract_below: 0.5 * singularity_distance(deltas, params.hbar()),
    })
}

fn continuation(disc: &Discretization, opts: &NlieOptions, report: &mut SolveReport) -> Result<Vec<f64>> {
    let mut steps = 8usize;
    let mut last_good: f64 = 0.0;
    while steps <= 1024 {
        let mut x = vec![0.0; disc.grid.count()];
        let mut ok = true;
        let mut iterations = 0;
        let mut anderson_steps = 0;
        for j in 1..=steps {
            let scale = (j as f64 / steps as f64).powi(2);
            match iterate(disc, x.clone(), scale, opts, false) {
                Some(r) => {
                    iterations += r.iterations;
                    anderson_steps += r.anderson_steps;
                    x = r.ln_y;
                    last_good = last_good.max(scale);
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            report.iterations = iterations;
            report.continuation_steps = steps;
            report.anderson_steps = anderson_steps;
            return Ok(x);
        }
        log::debug!("continuation with {steps} ramp steps failed; doubling");
        steps *= 2;
    }
    Err(TodaError::Solver {
        message: format!("continuation in the coupling broke down; last converged fraction of rho^hbar: {last_good}"),
    })
}

/// Self-convergence of a solution under grid refinement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridCertificate {
    /// Sup change of `ln Y` on shared nodes when the spacing is halved.
    pub spacing_delta: f64,
    /// Sup change on shared nodes when `Λ` grows by `10ħ`.
    pub extent_delta: f64,
    pub tol: f64,
}

/// Re-solves on a halved and on an extended grid; fails if either moves `ln Y` by more than `10·tol`.
pub fn certify(sol: &NlieSolution, opts: &NlieOptions) -> Result<GridCertificate> {
    let fine = solve_nlie_with(&sol.deltas, &sol.params, &sol.grid.halved(), opts, Some(sol))?;
    let spacing_delta = sol
        .ln_y
        .iter()
        .enumerate()
        .map(|(i, v)| (v - fine.ln_y[2 * i]).abs())
        .fold(0.0, f64::max);
    let extra = (10.0 * sol.params.hbar() / sol.grid.spacing()).round() * sol.grid.spacing();
    let wide = solve_nlie_with(&sol.deltas, &sol.params, &sol.grid.extended(extra), opts, Some(sol))?;
    let offset = (wide.grid.count() - sol.grid.count()) / 2;
    let extent_delta = sol
        .ln_y
        .iter()
        .enumerate()
        .map(|(i, v)| (v - wide.ln_y[i + offset]).abs())
        .fold(0.0, f64::max);
    let allowed = 10.0 * opts.tol;
    let worst = spacing_delta.max(extent_delta);
    if worst > allowed {
        return Err(TodaError::Discretization { delta: worst, allowed });
    }
    Ok(GridCertificate {
        spacing_delta,
        extent_delta,
        tol: opts.tol,
    })
}

impl NlieSolution {
    fn hbar(&self) -> f64 {
        self.params.hbar()
    }

    /// `(1 + ρ^ħ Y/|ϑ|²)` log-term on the nodes.
    pub fn log_term(&self) -> &[f64] {
        &self.log_term
    }

    /// `ln Y(z)` for `|Im z| < ħ`, from the right-hand side of the equation.
    pub fn ln_y_at(&self, z: Complex64) -> Result<Complex64> {
        let hbar = self.hbar();
        if z.im.abs() >= hbar {
            return Err(TodaError::Domain(format!("ln Y is only continued to |Im z| < hbar, got {z}")));
        }
        Ok(self.convolve(z, |x| kernel(x, hbar)))
    }

    fn convolve<F: Fn(Complex64) -> Complex64>(&self, z: Complex64, k: F) -> Complex64 {
        let bulk: Complex64 = self
            .grid
            .nodes()
            .iter()
            .zip(self.grid.weights())
            .zip(&self.log_term)
            .map(|((m, w), l)| k(z - m) * (w * l))
            .sum();
        let tail: Complex64 = self
            .tail
            .nodes
            .iter()
            .zip(&self.tail.weights)
            .zip(&self.tail_log_term)
            .map(|((m, w), l)| k(z - m) * (w * l))
            .sum();
        bulk + tail
    }

    fn theta_pair(&self, z: Complex64) -> Complex64 {
        let half = I * (0.5 * self.hbar());
        self.deltas.theta(z - half) * self.deltas.theta(z + half)
    }

    /// Log-term `ln(1 + ρ^ħ Y(z) / (ϑ(z-iħ/2)ϑ(z+iħ/2)))` continued off the real line.
    pub fn log_term_at(&self, z: Complex64) -> Result<Complex64> {
        let w = self.params.rho_weight();
        if w == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let tp = self.theta_pair(z);
        if tp.norm() == 0.0 {
            return Err(TodaError::Domain(format!("log-term is singular at {z}")));
        }
        Ok((1.0 + w * self.ln_y_at(z)?.exp() / tp).ln())
    }

    fn log_term_derivative(&self, z: Complex64) -> Result<Complex64> {
        let w = self.params.rho_weight();
        if w == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let hbar = self.hbar();
        let half = I * (0.5 * hbar);
        let ay = w * self.ln_y_at(z)?.exp() / self.theta_pair(z);
        let log_a_prime: Complex64 = -self
            .deltas
            .deltas()
            .iter()
            .map(|d| (z - half - d).inv() + (z + half - d).inv())
            .sum::<Complex64>();
        let ln_y_prime = self.convolve(z, |x| kernel_derivative(x, hbar));
        Ok(ay * (log_a_prime + ln_y_prime) / (1.0 + ay))
    }

    /// `∫ L(μ)/(z - μ) dμ` over the real line; the principal value when `z` is real.
    pub fn cauchy(&self, z: Complex64) -> Result<Complex64> {
        let tail: Complex64 = self
            .tail
            .nodes
            .iter()
            .zip(&self.tail.weights)
            .zip(&self.tail_log_term)
            .map(|((m, w), l)| (w * l) / (z - m))
            .sum();
        if z.im.abs() >= self.subtract_below {
            let bulk: Complex64 = self
                .grid
                .nodes()
                .iter()
                .zip(self.grid.weights())
                .zip(&self.log_term)
                .map(|((m, w), l)| (w * l) / (z - m))
                .sum();
            return Ok(bulk + tail);
        }
        if z.re.abs() > self.grid.lambda_max() - 4.0 * self.hbar() {
            return Err(TodaError::Domain(format!(
                "{z} is too close to the grid edge for a near-axis Cauchy transform"
            )));
        }
        // subtract the value at z so the trapezoid sees a smooth integrand
        let lz = self.log_term_at(z)?;
        let h = self.grid.spacing();
        let mut bulk = Complex64::new(0.0, 0.0);
        for ((m, w), l) in self.grid.nodes().iter().zip(self.grid.weights()).zip(&self.log_term) {
            let gap = z - m;
            if gap.norm() < 1e-9 * h {
                bulk -= w * self.log_term_derivative(z)?;
            } else {
                bulk += w * (l - lz) / gap;
            }
        }
        let big = self.grid.lambda_max();
        let exact = if z.im == 0.0 {
            Complex64::from(((z.re + big) / (big - z.re)).ln())
        } else {
            (z + big).ln() - (z - big).ln()
        };
        // end error of the rule on the subtracted 1/(z - μ) piece: Euler-Maclaurin for the
        // plain trapezoid plus the Gregory weight changes
        let d1 = |m: f64| (z - m).powi(-2);
        let d3 = |m: f64| 6.0 * (z - m).powi(-4);
        let mut em = h * h / 12.0 * (d1(big) - d1(-big)) - h.powi(4) / 720.0 * (d3(big) - d3(-big));
        for (k, c) in GREGORY.iter().enumerate() {
            let plain = if k == 0 { 0.5 } else { 1.0 };
            let m = big - k as f64 * h;
            em += (c - plain) * h * ((z - m).inv() + (z + m).inv());
        }
        Ok(bulk + lz * (exact + em) + tail)
    }

    fn ln_v_up_raw(&self, lambda: Complex64) -> Result<Complex64> {
        let z = lambda + I * (0.5 * self.hbar());
        if self.params.rho_weight() == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let base = -self.cauchy(z)? / (2.0 * PI * I);
        Ok(if z.im > 0.0 {
            base
        } else if z.im == 0.0 {
            base + 0.5 * self.log_term_at(z)?
        } else {
            base + self.log_term_at(z)?
        })
    }

    fn ln_v_down_raw(&self, lambda: Complex64) -> Result<Complex64> {
        let z = lambda + I * (0.5 * self.hbar());
        if self.params.rho_weight() == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let base = self.cauchy(z)? / (2.0 * PI * I);
        Ok(if z.im < 0.0 {
            base
        } else if z.im == 0.0 {
            base + 0.5 * self.log_term_at(z)?
        } else {
            base + self.log_term_at(z)?
        })
    }

    /// `ln v↑(λ)`, continued meromorphically below `Im λ = -ħ/2`; on the line itself
    /// the boundary value from above.
    pub fn ln_v_up(&self, lambda: Complex64) -> Result<Complex64> {
        self.ln_v_up_raw(lambda)
    }

    /// `ln v↓(λ)`, continued above `Im λ = -ħ/2`; on the line the boundary value from below.
    pub fn ln_v_down(&self, lambda: Complex64) -> Result<Complex64> {
        self.ln_v_down_raw(lambda)
    }

    /// `v↑(λ)` from its defining integral, `Im λ > -ħ/2 + 1e-6`.
    pub fn v_up(&self, lambda: Complex64) -> Result<Complex64> {
        if lambda.im <= -0.5 * self.hbar() + 1e-6 {
            return Err(TodaError::Domain(format!("v_up integral needs Im lambda > -hbar/2, got {lambda}")));
        }
        Ok(self.ln_v_up(lambda)?.exp())
    }

    /// `v↓(λ)` from its defining integral, `Im λ < -ħ/2 - 1e-6`.
    pub fn v_down(&self, lambda: Complex64) -> Result<Complex64> {
        if lambda.im >= -0.5 * self.hbar() - 1e-6 {
            return Err(TodaError::Domain(format!(
                "v_down integral needs Im lambda < -hbar/2, got {lambda}"
            )));
        }
        Ok(self.ln_v_down(lambda)?.exp())
    }

    /// Boundary values `v↑(x - iħ/2 + i0)` and `v↓(x - iħ/2 - i0)`.
    pub fn plemelj_boundary(&self, x: f64) -> Result<(Complex64, Complex64)> {
        let lambda = Complex64::new(x, -0.5 * self.hbar());
        Ok((self.ln_v_up(lambda)?.exp(), self.ln_v_down(lambda)?.exp()))
    }

    /// `Q_δ±` without the `κ^{-iλ}` factor.
    pub fn q_delta_stripped(&self, lambda: Complex64, branch: Branch) -> Result<LogComplex> {
        let frame = q_frame(lambda, self.deltas.deltas(), &self.params, branch)?;
        let ln_v = match branch {
            Branch::Plus => self.ln_v_up(lambda)?,
            Branch::Minus => self.ln_v_down(lambda - I * self.hbar())?,
        };
        Ok(frame * LogComplex::exp(ln_v))
    }

    /// `Q_δ±(λ)`; needs `κ > 0` for the plus member.
    pub fn q_delta(&self, lambda: Complex64, branch: Branch) -> Result<LogComplex> {
        let q = self.q_delta_stripped(lambda, branch)?;
        match branch {
            Branch::Plus => Ok(kappa_twist(lambda, &self.params)? * q),
            Branch::Minus => Ok(q),
        }
    }

    /// Relative mismatch of the quantum Wronskian at `x - iħ/2` against its closed form.
    pub fn quantum_wronskian_residual(&self, x: f64) -> Result<f64> {
        let lambda = Complex64::new(x, -0.5 * self.hbar());
        let lhs = stripped_wronskian(
            lambda,
            &self.params,
            |z| self.q_delta_stripped(z, Branch::Plus),
            |z| self.q_delta_stripped(z, Branch::Minus),
        )?;
        let rhs = wronskian_frame(lambda, self.deltas.deltas(), &self.params)?;
        Ok(((lhs / rhs).to_complex() - 1.0).norm())
    }

    /// `t_δ(λ)` from the Baxter equation solved for `t`, using continued `v` factors.
    pub fn t_delta(&self, lambda: Complex64) -> Result<Complex64> {
        let hbar = self.hbar();
        if let Some(d) = self.deltas.deltas().iter().find(|d| (lambda - *d).norm() < 1e-4 * hbar) {
            return Err(TodaError::Domain(format!(
                "t_delta at {lambda} is too close to the zero {d}; use the Newton-sum route"
            )));
        }
        let n = self.params.n_particles() as i32;
        let up = lambda + I * hbar;
        let down = lambda - I * hbar;
        let plus = |z| self.q_delta_stripped(z, Branch::Plus);
        let minus = |z| self.q_delta_stripped(z, Branch::Minus);
        let kw = kappa_weight(&self.params);
        let mut numerator = plus(down)? * minus(up)?;
        if kw > 0.0 {
            numerator = numerator.try_sub(LogComplex::new(2.0 * kw.ln(), 0.0) * minus(down)? * plus(up)?)?;
        }
        let denominator = stripped_wronskian(lambda, &self.params, plus, minus)?;
        let coefficient = (-I).powi(n) * self.params.g().powf(n as f64 * hbar);
        Ok(coefficient * (numerator / denominator).to_complex())
    }

    /// `∫ f(μ) L(μ) dμ` over the real line (nodes plus modelled tails).
    pub fn integrate_log_term<F: Fn(f64) -> f64>(&self, f: F) -> (f64, f64) {
        let bulk: f64 = self
            .grid
            .nodes()
            .iter()
            .zip(self.grid.weights())
            .zip(&self.log_term)
            .map(|((m, w), l)| f(*m) * w * l)
            .sum();
        let tail: f64 = self
            .tail
            .nodes
            .iter()
            .zip(&self.tail.weights)
            .zip(&self.tail_log_term)
            .map(|((m, w), l)| f(*m) * w * l)
            .sum();
        (bulk + tail, tail)
    }

    /// Quadrature over nodes and tail points of an arbitrary function of `(μ, ln Y(μ), L(μ), weight)`,
    /// where `weight = ρ^ħ/|ϑ(μ - iħ/2)|²`.
    pub fn integrate_profile<F: Fn(f64, f64, f64, f64) -> f64>(&self, f: F) -> f64 {
        let bulk: f64 = self
            .grid
            .nodes()
            .iter()
            .zip(self.grid.weights())
            .zip(self.ln_y.iter().zip(&self.log_term))
            .map(|((m, w), (ly, l))| w * f(*m, *ly, *l, log_term_weight(*m, &self.deltas, &self.params)))
            .sum();
        let (left, right) = (self.ln_y[0], *self.ln_y.last().unwrap());
        let tail: f64 = (0..self.tail.nodes.len())
            .map(|k| {
                let m = self.tail.nodes[k];
                let ly = if self.tail.right[k] { right } else { left } * self.tail.decay[k];
                self.tail.weights[k] * f(m, ly, self.tail_log_term[k], log_term_weight(m, &self.deltas, &self.params))
            })
            .sum();
        bulk + tail
    }

    /// Power sums `Σ τ^k`, `k = 1..=k_max`, of the polynomial encoded by the solution.
    pub fn newton_sums(&self, k_max: usize) -> Result<Vec<f64>> {
        if k_max > self.params.n_particles() {
            return Err(validation("k_max", "power sums beyond N are not determined"));
        }
        let half = 0.5 * self.hbar();
        let edge = self.ln_y[0].abs().max(self.ln_y.last().unwrap().abs());
        (1..=k_max)
            .map(|k| {
                let base: Complex64 = self.deltas.deltas().iter().map(|d| d.powu(k as u32)).sum();
                if k == 1 {
                    return Ok(base.re);
                }
                let (integral, tail) = self.integrate_log_term(|m| Complex64::new(m, half).powu(k as u32 - 1).im);
                // the tail model is exact up to the Y ≈ 1 correction
                if (tail * edge).abs() > 1e-8 {
                    return Err(TodaError::GridTooSmall {
                        tail: (tail * edge).abs(),
                        tol: 1e-8,
                    });
                }
                Ok(base.re + k as f64 / PI * integral)
            })
            .collect()
    }
}
