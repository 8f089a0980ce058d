use num_complex::Complex64;
use toda_tba::determinants::hill_zeros;
use toda_tba::gutzwiller::{q_residue, QPair};
use toda_tba::model::{HillZeros, ModelParams, SpectralPolynomial, TruncationConfig};
use toda_tba::nlie::{solve_nlie_with, Grid, NlieOptions};
use toda_tba::oracle::n2_relative_spectrum;
use toda_tba::quantize::*;

fn unit() -> ModelParams {
    ModelParams::new(2, 1.0, 1.0, 1.0).unwrap()
}

/// `w` at real zeros with the integral equation re-solved there.
fn yang_at(deltas: &[f64], base: &QuantizationCandidate, problem: &QuantizationProblem, grid: &Grid) -> f64 {
    let zeros = HillZeros::real(deltas, 1.0).unwrap();
    let opts = NlieOptions {
        tol: 1e-14,
        ..NlieOptions::default()
    };
    let sol = solve_nlie_with(&zeros, &problem.params, grid, &opts, None).unwrap();
    let cand = QuantizationCandidate {
        deltas: zeros,
        ..base.clone()
    };
    yang_potential(&cand, problem, &sol).unwrap()
}

fn yang_gradient(at: &[f64], base: &QuantizationCandidate, problem: &QuantizationProblem, grid: &Grid) -> Vec<f64> {
    let h = 1e-4;
    (0..at.len())
        .map(|k| {
            let mut up = at.to_vec();
            let mut down = at.to_vec();
            up[k] += h;
            down[k] -= h;
            (yang_at(&up, base, problem, grid) - yang_at(&down, base, problem, grid)) / (2.0 * h)
        })
        .collect()
}

#[test]
fn three_lowest_states_agree_across_formulations() {
    let params = unit();
    let oracle = n2_relative_spectrum(&params, 0.0, 3).unwrap();
    let states = [(vec![0, -1], -1.0), (vec![1, -1], 1.0), (vec![1, -2], -1.0)];
    for ((n, zeta), reference) in states.iter().zip(&oracle.energies) {
        let problem = QuantizationProblem::new(params, n.clone(), 0.0).unwrap();
        let q = solve_quantization(&problem, None, &QuantizeOptions::default()).unwrap();
        let cand = &q.candidate;
        assert!(cand.converged);
        assert!((cand.zeta_phase.cos() - zeta).abs() < 1e-9);
        assert!(cand.deltas.total_momentum().abs() < 1e-10);

        // residuals re-evaluated on a halved grid
        let fine = solve_nlie_with(&cand.deltas, &params, &q.solution.grid.halved(), &NlieOptions::default(), None).unwrap();
        let f = quantization_residual(cand, &problem, &fine).unwrap();
        assert!(f.iter().all(|v| v.abs() <= 1e-8), "{n:?}: {f:?}");
        for (got, want) in recovered_quantum_numbers(cand, &problem, &fine).unwrap().iter().zip(n) {
            assert!((got - *want as f64).abs() < 1e-8);
        }

        let spec = reconstruct_spectrum(cand, &problem, &q.solution).unwrap();
        assert!(spec.elementary_symmetric[0].abs() < 1e-10);
        assert!(
            (spec.energy - reference).abs() <= 1e-5 * reference,
            "{n:?}: {} vs {reference}",
            spec.energy
        );

        // entire q: residues at every zero vanish for t from the reconstruction
        let t = SpectralPolynomial::new(spec.tau.clone(), 1.0).unwrap();
        let qp = QPair::new(t.clone(), params, TruncationConfig::default_for(&params));
        for k in 0..2 {
            let r = q_residue(k, &qp, cand.zeta_phase, &cand.deltas).unwrap();
            assert!(r.relative < 1e-7, "{n:?} residue {k}: {r:?}");
        }
        // the zeros of the reconstructed Hill function are the solved ones
        let back = hill_zeros(&t, &params, &TruncationConfig::default_for(&params)).unwrap();
        let mut a: Vec<f64> = back.deltas().iter().map(|d| d.re).collect();
        let mut b: Vec<f64> = cand.deltas.deltas().iter().map(|d| d.re).collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-7));

        // τ agrees with the roots of a polynomial fitted to t_δ
        let (x1, x2) = (0.37, -1.91);
        let (t1, t2) = (
            q.solution.t_delta(Complex64::from(x1)).unwrap().re,
            q.solution.t_delta(Complex64::from(x2)).unwrap().re,
        );
        // t = λ² + c₁λ + c₀
        let c1 = ((t1 - x1 * x1) - (t2 - x2 * x2)) / (x1 - x2);
        let c0 = t1 - x1 * x1 - c1 * x1;
        let fitted = SpectralPolynomial::from_elementary(&[-c1, c0], 1.0).unwrap();
        for (u, v) in fitted.roots().iter().zip(&spec.tau) {
            assert!((u - v).norm() < 1e-6);
        }
    }
}

#[test]
fn yang_potential_is_critical_at_solutions_only() {
    let params = unit();
    let problem = QuantizationProblem::new(params, vec![1, -1], 0.0).unwrap();
    let q = solve_quantization(&problem, None, &QuantizeOptions::default()).unwrap();
    let at: Vec<f64> = q.candidate.deltas.deltas().iter().map(|d| d.re).collect();
    let grid = q.solution.grid.clone();
    let grad = yang_gradient(&at, &q.candidate, &problem, &grid);
    assert!(grad.iter().all(|g| g.abs() <= 1e-5), "{grad:?}");

    let shifted = [at[0] + 0.1, at[1]];
    let grad = yang_gradient(&shifted, &q.candidate, &problem, &grid);
    assert!(grad.iter().map(|g| g.abs()).fold(0.0, f64::max) >= 1e-2, "{grad:?}");
    // and the gradient there is the residual vector
    let zeros = HillZeros::real(&shifted, 1.0).unwrap();
    let sol = solve_nlie_with(&zeros, &params, &grid, &NlieOptions::default(), None).unwrap();
    let cand = QuantizationCandidate {
        deltas: zeros,
        ..q.candidate.clone()
    };
    let f = quantization_residual(&cand, &problem, &sol).unwrap();
    for (g, f) in grad.iter().zip(&f) {
        assert!((g - f).abs() < 1e-6, "{g} vs {f}");
    }
}

#[test]
fn open_chain_limit_of_yang_instanton_part() {
    // with κ → 0⁺ the integral part of w vanishes
    let params = ModelParams::new(2, 1.0, 1.0, 1e-300).unwrap();
    let problem = QuantizationProblem::new(params, vec![0, -1], 0.0).unwrap();
    let zeros = HillZeros::real(&[1.5, -1.5], 1.0).unwrap();
    let grid = Grid::for_zeros(&zeros, &params);
    let sol = solve_nlie_with(&zeros, &params, &grid, &NlieOptions::default(), None).unwrap();
    let inst = sol.integrate_profile(|_, ln_y, l, w| toda_tba::specfun::dilog(-w * ln_y.exp()).unwrap() + 0.5 * ln_y * l);
    assert!(inst.abs() < 1e-250);
    let cand = QuantizationCandidate {
        deltas: zeros,
        zeta_phase: 0.0,
        phase_branch: 0,
        residuals: vec![],
        converged: false,
    };
    assert!(yang_potential(&cand, &problem, &sol).unwrap().is_finite());
}
