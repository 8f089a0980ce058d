//! Reference values computed without the determinant or integral-equation machinery.
//!
//! Two particles: with `X = x₁ - x₂` and total momentum `P`, the Hamiltonian
//! `p₁²/2 + p₂²/2 + g^{2ħ} e^{x₁-x₂} + κ^ħ g^{2ħ} e^{x₂-x₁}` separates into
//! `P²/4 + ε`, where `ε` is an eigenvalue of `-ħ² d²/dX² + B e^{X} + A e^{-X}` with
//! `A = (κ g²)^ħ` and `B = g^{2ħ}`. Since `A e^{-X} + B e^{X} = 2√(AB) cosh(X - X₀)`,
//! the spectrum depends on `A B` only.

use crate::error::{validation, Result, TodaError};
use crate::model::{ModelParams, SpectralPolynomial};
use num_complex::Complex64;
use serde::Serialize;

/// Three-point finite-difference operator `-ħ² d²/dy² + 2s cosh y` on `[-L, L]`, Dirichlet walls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiscretizedOperator {
    pub half_width: f64,
    pub points: usize,
    /// `√(AB)`.
    pub wall_strength: f64,
    pub hbar: f64,
}

impl DiscretizedOperator {
    fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.points + 1) as f64
    }

    fn diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        let h = self.spacing();
        let kinetic = 2.0 * self.hbar * self.hbar / (h * h);
        (1..=self.points).map(move |i| {
            let y = -self.half_width + i as f64 * h;
            kinetic + 2.0 * self.wall_strength * y.cosh()
        })
    }

    /// Number of eigenvalues below `x` (Sturm sequence of the `LDLᵀ` pivots).
    fn count_below(&self, x: f64) -> usize {
        let h = self.spacing();
        let off2 = (self.hbar * self.hbar / (h * h)).powi(2);
        let mut pivot = 1.0;
        let mut count = 0;
        for (i, d) in self.diagonal().enumerate() {
            pivot = if i == 0 { d - x } else { d - x - off2 / pivot };
            if pivot == 0.0 {
                pivot = -f64::EPSILON * (d.abs() + x.abs());
            }
            if pivot < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The lowest `count` eigenvalues by bisection.
    pub fn lowest(&self, count: usize) -> Vec<f64> {
        let floor = 2.0 * self.wall_strength;
        let mut upper = floor + 1.0;
        while self.count_below(upper) < count {
            upper = floor + 2.0 * (upper - floor);
        }
        (0..count)
            .map(|k| {
                let (mut lo, mut hi) = (floor, upper);
                while hi - lo > 1e-14 * hi.abs().max(1.0) {
                    let mid = 0.5 * (lo + hi);
                    if self.count_below(mid) > k {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                0.5 * (lo + hi)
            })
            .collect()
    }
}

/// Two-particle energies with their self-convergence certificate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSpectrum {
    /// Total energies `P²/4 + ε_k`, ascending.
    pub energies: Vec<f64>,
    /// Change of the extrapolated values when the grid spacing is halved.
    pub refinement_delta: f64,
    /// Change when the box grows by 4 on each side.
    pub width_delta: f64,
    pub operator: DiscretizedOperator,
}

fn sup_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn extrapolated(op: DiscretizedOperator, count: usize) -> Vec<f64> {
    // error is O(h²); one Richardson step
    let coarse = op.lowest(count);
    let fine = DiscretizedOperator {
        points: 2 * op.points + 1,
        ..op
    }
    .lowest(count);
    coarse.iter().zip(&fine).map(|(c, f)| (4.0 * f - c) / 3.0).collect()
}

/// Lowest `count` energies at total momentum `P`, self-converged to `1e-7`.
pub fn n2_relative_spectrum(params: &ModelParams, momentum: f64, count: usize) -> Result<OracleSpectrum> {
    const TOL: f64 = 1e-7;
    if params.n_particles() != 2 {
        return Err(validation("n_particles", "the diagonalization oracle is for two particles"));
    }
    if params.kappa() <= 0.0 {
        return Err(validation("kappa", "needs kappa > 0 for a confining relative potential"));
    }
    if count == 0 || count > 20 {
        return Err(validation("count", "between 1 and 20 eigenvalues"));
    }
    let hbar = params.hbar();
    let a = (params.kappa() * params.g().powi(2)).powf(hbar);
    let b = params.g().powf(2.0 * hbar);
    let strength = (a * b).sqrt();

    // box: walls well above the highest requested level
    let rough = DiscretizedOperator {
        half_width: 12.0,
        points: 2000,
        wall_strength: strength,
        hbar,
    }
    .lowest(count);
    let top = rough[count - 1];
    let mut half_width = (((top + 60.0 * hbar) / (2.0 * strength)).max(1.0)).acosh() + 4.0;
    let mut spacing = 0.01 * hbar.min(1.0);
    let op_for = |half_width: f64, spacing: f64| DiscretizedOperator {
        half_width,
        points: (2.0 * half_width / spacing).round() as usize,
        wall_strength: strength,
        hbar,
    };
    for _ in 0..6 {
        let base = extrapolated(op_for(half_width, spacing), count);
        let finer = extrapolated(op_for(half_width, 0.5 * spacing), count);
        let wider = extrapolated(op_for(half_width + 4.0, spacing), count);
        let refinement_delta = sup_gap(&base, &finer);
        let width_delta = sup_gap(&base, &wider);
        if refinement_delta <= TOL && width_delta <= TOL {
            let shift = 0.25 * momentum * momentum;
            return Ok(OracleSpectrum {
                energies: finer.iter().map(|e| e + shift).collect(),
                refinement_delta,
                width_delta,
                operator: op_for(half_width, 0.5 * spacing),
            });
        }
        if refinement_delta > TOL {
            spacing *= 0.5;
        }
        if width_delta > TOL {
            half_width += 4.0;
        }
    }
    Err(TodaError::Solver {
        message: "diagonalization oracle did not self-converge".into(),
    })
}

/// Partial Fredholm expansion of `K+` with term-wise Hadamard bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FredholmSeries {
    /// `1 + Σ_{n ≤ order} term_n`.
    pub value: Complex64,
    pub terms: Vec<Complex64>,
    /// `u^n (1 + ρ^ħ)^n / n!` with `u = Σ_k 1/|t(λ + ikħ)|`.
    pub hadamard_bounds: Vec<f64>,
    /// Bound on what the finite index windows left out, summed over orders.
    pub window_tail: f64,
    /// True when `window_tail` is below the requested tolerance.
    pub conclusive: bool,
}

/// Off-diagonal part of the half-infinite tridiagonal matrix behind `K+`, rows `k = 1, 2, ...`:
/// `A[k][k+1] = 1/t(λ+ikħ)`, `A[k+1][k] = ρ^ħ/t(λ+i(k+1)ħ)`.
struct OffDiagonal {
    upper: Vec<Complex64>,
    lower: Vec<Complex64>,
}

impl OffDiagonal {
    fn entry(&self, i: usize, j: usize) -> Complex64 {
        if j == i + 1 {
            self.upper[i]
        } else if i == j + 1 {
            self.lower[j]
        } else {
            Complex64::new(0.0, 0.0)
        }
    }
}

fn det(m: &[Vec<Complex64>]) -> Complex64 {
    match m.len() {
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        3 => {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        }
        _ => unreachable!("orders above 3 are rejected"),
    }
}

/// `det(1 + A) = 1 + Σ_n Σ_{|S| = n} det A_S` summed over principal minors inside index windows.
pub fn fredholm_series_k_plus(
    lambda: Complex64,
    t: &SpectralPolynomial,
    params: &ModelParams,
    order: usize,
    tol: f64,
) -> Result<FredholmSeries> {
    if order > 3 {
        return Err(validation("order", "at most 3"));
    }
    let hbar = params.hbar();
    let w = params.rho_weight();
    let windows = [0, 4000, 4000, 160];
    let size = windows[1..=order.max(1)].iter().max().copied().unwrap_or(0) + 2;
    let ti: Vec<Complex64> = (0..=size).map(|k| t.eval(lambda + Complex64::new(0.0, k as f64 * hbar))).collect();
    if ti.iter().skip(1).any(|v| v.norm() == 0.0) {
        return Err(TodaError::Domain(format!("t vanishes on the lattice above {lambda}")));
    }
    // indices 0.. stand for rows 1..
    let a = OffDiagonal {
        upper: (1..size).map(|k| 1.0 / ti[k]).collect(),
        lower: (1..size).map(|k| w / ti[k + 1]).collect(),
    };
    // row norms after balancing the similarity A -> D A D⁻¹, which leaves minors unchanged
    let balanced: Vec<f64> = (0..size - 1)
        .map(|k| {
            let left = if k > 0 {
                (a.upper[k - 1] * a.lower[k - 1]).norm().sqrt()
            } else {
                0.0
            };
            let right = (a.upper[k] * a.lower[k]).norm().sqrt();
            (left * left + right * right).sqrt()
        })
        .collect();
    let u: f64 = (1..=100_000)
        .map(|k| 1.0 / t.eval(lambda + Complex64::new(0.0, k as f64 * hbar)).norm())
        .sum();

    let mut terms = Vec::new();
    let mut bounds = Vec::new();
    let mut window_tail = 0.0;
    let mut factorial = 1.0;
    for (n, &width) in windows.iter().enumerate().take(order + 1).skip(1) {
        factorial *= n as f64;
        let mut sum = Complex64::new(0.0, 0.0);
        let mut idx: Vec<usize> = (0..n).collect();
        if width >= n {
            loop {
                let minor: Vec<Vec<Complex64>> = idx.iter().map(|&i| idx.iter().map(|&j| a.entry(i, j)).collect()).collect();
                sum += det(&minor);
                // next n-subset of 0..width in lexicographic order
                let mut p = n;
                while p > 0 && idx[p - 1] == width - n + p - 1 {
                    p -= 1;
                }
                if p == 0 {
                    break;
                }
                idx[p - 1] += 1;
                for q in p..n {
                    idx[q] = idx[q - 1] + 1;
                }
            }
        }
        terms.push(sum);
        bounds.push((u * (1.0 + w)).powi(n as i32) / factorial);
        // subsets reaching past the window: n · S_out · S^{n-1} / n!, with the
        // balanced row norms decaying like k^{-N}
        let inside: f64 = balanced[..width.min(balanced.len())].iter().sum();
        let last = balanced[width.min(balanced.len()) - 1];
        let outside = last * width as f64 / (params.n_particles() as f64 - 1.0);
        window_tail += n as f64 * outside * (inside + outside).powi(n as i32 - 1) / factorial;
    }
    Ok(FredholmSeries {
        value: terms.iter().fold(Complex64::new(1.0, 0.0), |acc, t| acc + t),
        terms,
        hadamard_bounds: bounds,
        window_tail,
        conclusive: window_tail <= tol,
    })
}
