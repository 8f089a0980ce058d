//! End-to-end acceptance checks. Runs as a plain binary so every criterion prints
//! one PASS/FAIL line, then exits non-zero if any failed.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;
use toda_tba::determinants::{hill, hill_brute, hill_zeros, hill_zeros_certified, k_minus, k_plus, k_plus_eval, sinh_ratio};
use toda_tba::gutzwiller::{
    baxter_residual, q_residue, wronskian_residual, y_from_determinants, y_from_determinants_grid, BaxterCoefficients, Branch, QPair,
};
use toda_tba::model::{HillZeros, ModelParams, SpectralPolynomial, TruncationConfig};
use toda_tba::nlie::{certify, solve_nlie_with, Grid, NlieOptions, NlieSolution};
use toda_tba::oracle::n2_relative_spectrum;
use toda_tba::par::Exec;
use toda_tba::quantize::{
    quantization_residual, reconstruct_spectrum, recovered_quantum_numbers, solve_quantization, yang_potential, QuantizationCandidate,
    QuantizationProblem, QuantizeOptions, Quantized,
};
use toda_tba::Result;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Outcome of one criterion: pass flag plus a short measured summary.
struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn from(pass: bool, detail: String) -> Self {
        Verdict { pass, detail }
    }
}

/// A fixed `τ` configuration with everything derived from determinants.
struct Setup {
    t: SpectralPolynomial,
    params: ModelParams,
    cfg: TruncationConfig,
    zeros: HillZeros,
}

impl Setup {
    fn new(tau: &[f64], hbar: f64, g: f64, kappa: f64) -> Result<Self> {
        let params = ModelParams::new(tau.len(), hbar, g, kappa)?;
        let t = SpectralPolynomial::new(tau.iter().map(|&x| c(x, 0.0)).collect(), hbar)?;
        let cfg = TruncationConfig::default_for(&params);
        let zeros = hill_zeros(&t, &params, &cfg)?;
        Ok(Setup { t, params, cfg, zeros })
    }

    fn pair(&self) -> QPair {
        QPair::new(self.t.clone(), self.params, self.cfg)
    }

    fn solve(&self) -> Result<NlieSolution> {
        let grid = Grid::for_zeros(&self.zeros, &self.params);
        solve_nlie_with(&self.zeros, &self.params, &grid, &NlieOptions::default(), None)
    }
}

/// The two certified-contraction and two continuation configurations.
fn reference_setups() -> Result<Vec<Setup>> {
    Ok(vec![
        Setup::new(&[1.5, -1.5], 1.0, 1.0, 1.0)?,
        Setup::new(&[-2.1, 0.3, 1.9], 1.0, 1.0, 1.0)?,
        Setup::new(&[1.0, -1.0], 1.0, 0.97, 1.0)?,
        Setup::new(&[-1.2, 0.3, 0.8], 1.0, 0.8, 1.0)?,
    ])
}

fn strip_points(rng: &mut ChaCha8Rng, count: usize, hbar: f64) -> Vec<Complex64> {
    (0..count)
        .map(|_| c(rng.gen_range(-4.0..4.0), rng.gen_range(-0.45..0.45) * hbar))
        .collect()
}

/// Roots closed under conjugation, all inside `|Im| < ħ/2`.
fn self_conjugate_roots(rng: &mut ChaCha8Rng, n: usize, hbar: f64) -> Vec<Complex64> {
    let mut roots = Vec::with_capacity(n);
    while roots.len() < n {
        let re = rng.gen_range(-2.5..2.5);
        if n - roots.len() >= 2 && rng.gen_bool(0.5) {
            let im = rng.gen_range(0.05..0.4) * hbar;
            roots.push(c(re, im));
            roots.push(c(re, -im));
        } else {
            roots.push(c(re, 0.0));
        }
    }
    roots
}

fn relative(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm())
}

fn determinant_equivalence() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for n in [2, 3] {
        for kappa in [0.0, 1.0] {
            let params = ModelParams::new(n, 1.0, 1.0, kappa)?;
            let cfg = TruncationConfig::default_for(&params);
            let t = SpectralPolynomial::new(self_conjugate_roots(&mut rng, n, 1.0), 1.0)?;
            for z in strip_points(&mut rng, 20, 1.0) {
                let a = hill(z, &t, &params, &cfg)?;
                let b = hill_brute(z, &t, &params, 64)?;
                worst = worst.max(relative(a, b));
            }
        }
    }
    Ok(Verdict::from(worst < 1e-8, format!("max relative gap {worst:.2e}")))
}

fn factorization() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut residual, mut momentum): (f64, f64) = (0.0, 0.0);
    for s in reference_setups()? {
        let h = s.params.hbar();
        for z in strip_points(&mut rng, 20, h) {
            let direct = hill(z, &s.t, &s.params, &s.cfg)?;
            let factored = sinh_ratio(z, &s.zeros, &s.t, h)?.to_complex();
            residual = residual.max(relative(direct, factored));
        }
        momentum = momentum.max((s.zeros.deltas().iter().sum::<Complex64>() - s.t.root_sum()).norm());
    }
    Ok(Verdict::from(
        residual < 1e-8 && momentum < 1e-8,
        format!("factorization {residual:.2e}, momentum defect {momentum:.2e}"),
    ))
}

fn baxter() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (mut from_t, mut from_delta): (f64, f64) = (0.0, 0.0);
    for s in reference_setups()? {
        let h = s.params.hbar();
        let coef = BaxterCoefficients::standard(&s.params);
        let qp = s.pair();
        for z in strip_points(&mut rng, 20, h) {
            let tv = s.t.eval(z);
            from_t = from_t.max(baxter_residual(z, tv, h, coef, |l| qp.plus(l))?);
            from_t = from_t.max(baxter_residual(z, tv, h, coef, |l| qp.minus(l))?);
        }
        let sol = s.solve()?;
        for _ in 0..20 {
            let top = c(rng.gen_range(-3.0..3.0), rng.gen_range(0.55..0.95) * h);
            from_delta = from_delta.max(baxter_residual(top, s.t.eval(top), h, coef, |l| sol.q_delta(l, Branch::Plus))?);
            let bottom = top.conj();
            from_delta = from_delta.max(baxter_residual(bottom, s.t.eval(bottom), h, coef, |l| {
                sol.q_delta(l, Branch::Minus)
            })?);
        }
    }
    Ok(Verdict::from(
        from_t < 1e-7 && from_delta < 1e-7,
        format!("determinant Q {from_t:.2e}, integral Q {from_delta:.2e}"),
    ))
}

fn wronskians() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let (mut closed, mut quantum, mut periodic): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for s in reference_setups()? {
        let h = s.params.hbar();
        let qp = s.pair();
        let sign = if s.params.n_particles() % 2 == 0 { 1.0 } else { -1.0 };
        for z in strip_points(&mut rng, 20, h) {
            closed = closed.max(wronskian_residual(z, &qp)?);
            let ratio = (qp.wronskian_stripped(z + c(0.0, h))? / qp.wronskian_stripped(z)?).to_complex();
            periodic = periodic.max((ratio - sign).norm());
        }
        let sol = s.solve()?;
        for _ in 0..20 {
            quantum = quantum.max(sol.quantum_wronskian_residual(rng.gen_range(-3.0..3.0))?);
        }
    }
    Ok(Verdict::from(
        closed < 1e-7 && quantum < 1e-7 && periodic < 1e-8,
        format!("closed form {closed:.2e}, quantum {quantum:.2e}, quasi-periodicity {periodic:.2e}"),
    ))
}

fn nlie_cross_check() -> Result<Verdict> {
    let mut parts = Vec::new();
    let mut pass = true;
    for s in reference_setups()? {
        let sol = s.solve()?;
        let y = y_from_determinants_grid(sol.grid.nodes(), &s.t, &s.zeros, &s.params, &s.cfg, Exec::default())?;
        let gap = sol.ln_y.iter().zip(&y).map(|(l, y)| (l.exp() - y).abs()).fold(0.0, f64::max);
        pass &= gap <= 1e-7;
        parts.push(format!(
            "N={} ratio {:.2}: {gap:.2e}",
            s.params.n_particles(),
            sol.report.weight_ratio
        ));
    }
    Ok(Verdict::from(pass, parts.join("; ")))
}

fn newton_round_trip() -> Result<Verdict> {
    let mut worst: f64 = 0.0;
    for s in reference_setups()? {
        let n = s.params.n_particles();
        let sums = s.solve()?.newton_sums(n)?;
        for (k, got) in sums.iter().enumerate() {
            worst = worst.max((got - s.t.power_sum(k as u32 + 1).re).abs());
        }
    }
    Ok(Verdict::from(worst <= 1e-6, format!("max power-sum error {worst:.2e}")))
}

fn yang_gradient(at: &[f64], base: &QuantizationCandidate, problem: &QuantizationProblem, grid: &Grid) -> Result<Vec<f64>> {
    let step = 1e-4;
    let opts = NlieOptions {
        tol: 1e-14,
        ..NlieOptions::default()
    };
    let value = |deltas: &[f64]| -> Result<f64> {
        let zeros = HillZeros::real(deltas, problem.params.hbar())?;
        let sol = solve_nlie_with(&zeros, &problem.params, grid, &opts, None)?;
        yang_potential(
            &QuantizationCandidate {
                deltas: zeros,
                ..base.clone()
            },
            problem,
            &sol,
        )
    };
    (0..at.len())
        .map(|k| {
            let mut up = at.to_vec();
            let mut down = at.to_vec();
            up[k] += step;
            down[k] -= step;
            Ok((value(&up)? - value(&down)?) / (2.0 * step))
        })
        .collect()
}

fn quantization_equivalence(states: &[Quantized], problems: &[QuantizationProblem]) -> Result<Verdict> {
    let params = problems[0].params;
    let oracle = n2_relative_spectrum(&params, 0.0, states.len())?;
    let (mut residual, mut residue, mut gradient, mut energy, mut integrality): (f64, f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((q, problem), reference) in states.iter().zip(problems).zip(&oracle.energies) {
        let cand = &q.candidate;
        let fine = solve_nlie_with(&cand.deltas, &params, &q.solution.grid.halved(), &NlieOptions::default(), None)?;
        residual = quantization_residual(cand, problem, &fine)?
            .iter()
            .fold(residual, |m, f| m.max(f.abs()));
        for (got, want) in recovered_quantum_numbers(cand, problem, &fine)?
            .iter()
            .zip(&problem.quantum_numbers)
        {
            integrality = integrality.max((got - *want as f64).abs());
        }
        let spec = reconstruct_spectrum(cand, problem, &q.solution)?;
        energy = energy.max((spec.energy - reference).abs() / reference.abs());
        let t = SpectralPolynomial::new(spec.tau.clone(), params.hbar())?;
        let qp = QPair::new(t, params, TruncationConfig::default_for(&params));
        for k in 0..cand.deltas.len() {
            residue = residue.max(q_residue(k, &qp, cand.zeta_phase, &cand.deltas)?.relative);
        }
        let at: Vec<f64> = cand.deltas.deltas().iter().map(|d| d.re).collect();
        gradient = yang_gradient(&at, cand, problem, &q.solution.grid)?
            .iter()
            .fold(gradient, |m, g| m.max(g.abs()));
    }
    Ok(Verdict::from(
        residual <= 1e-8 && integrality <= 1e-8 && residue <= 1e-7 && gradient <= 1e-5 && energy <= 1e-5,
        format!(
            "{} states: residual {residual:.2e}, q-residue {residue:.2e}, Yang gradient {gradient:.2e}, energy vs oracle {energy:.2e}",
            states.len()
        ),
    ))
}

fn trivial_limit() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let mut worst: f64 = 0.0;
    let one = c(1.0, 0.0);
    for tau in [vec![1.5, -1.5], vec![-2.1, 0.3, 1.9]] {
        let s = Setup::new(&tau, 1.0, 1.0, 0.0)?;
        for z in strip_points(&mut rng, 10, 1.0) {
            worst = worst
                .max((k_plus(z, &s.t, &s.params, &s.cfg)? - one).norm())
                .max((k_minus(z, &s.t, &s.params, &s.cfg)? - one).norm())
                .max((hill(z, &s.t, &s.params, &s.cfg)? - one).norm())
                .max((y_from_determinants(z.re, &s.t, &s.zeros, &s.params, &s.cfg)? - 1.0).abs());
        }
        for (d, t) in s.zeros.deltas().iter().zip(s.t.roots()) {
            worst = worst.max((d - t).norm());
        }
        let sol = s.solve()?;
        worst = sol.ln_y.iter().fold(worst, |m, l| m.max((l.exp() - 1.0).abs()));
        for x in [-2.0, 0.1, 1.7] {
            worst = worst
                .max((sol.v_up(c(x, 0.0))? - one).norm())
                .max((sol.v_down(c(x, -1.0))? - one).norm());
        }
        for (k, e) in sol.newton_sums(tau.len())?.iter().enumerate() {
            let direct: f64 = tau.iter().map(|x| x.powi(k as i32 + 1)).sum();
            worst = worst.max((e - direct).abs());
        }
    }
    Ok(Verdict::from(worst < 1e-12, format!("max deviation from closed forms {worst:.2e}")))
}

fn certificates(states: &[Quantized]) -> Result<Verdict> {
    let opts = NlieOptions::default();
    let mut grid_delta: f64 = 0.0;
    let mut truncation: f64 = 0.0;
    let mut contraction = true;
    let mut zero_count: f64 = 0.0;
    for s in reference_setups()? {
        let sol = s.solve()?;
        let cert = certify(&sol, &opts)?;
        grid_delta = grid_delta.max(cert.spacing_delta.max(cert.extent_delta) / cert.tol);
        if sol.report.weight_ratio < 1.0 {
            contraction &=
                sol.report.contraction_certified && sol.report.contraction_checks > 0 && sol.report.worst_contraction_ratio <= 1.0;
        }
        for x in [-3.0, 0.0, 2.5] {
            let e = k_plus_eval(c(x, 0.3), &s.t, &s.params, &s.cfg)?;
            truncation = truncation.max(e.truncation_delta / s.cfg.tail_tol);
        }
        let zc = hill_zeros_certified(&s.t, &s.params, &s.cfg, Exec::default())?;
        zero_count = zero_count.max((zc.contour_count - s.params.n_particles() as f64).abs());
    }
    for q in states {
        let cert = certify(&q.solution, &QuantizeOptions::default().nlie)?;
        grid_delta = grid_delta.max(cert.spacing_delta.max(cert.extent_delta) / cert.tol);
    }
    let oracle = n2_relative_spectrum(&ModelParams::new(2, 1.0, 1.0, 1.0)?, 0.0, 3)?;
    let oracle_delta = oracle.refinement_delta.max(oracle.width_delta);
    Ok(Verdict::from(
        grid_delta <= 10.0 && truncation <= 10.0 && contraction && zero_count < 1e-6 && oracle_delta <= 1e-6,
        format!(
            "grid delta/tol {grid_delta:.2}, truncation delta/tol {truncation:.2}, contraction {}, oracle delta {oracle_delta:.2e}",
            if contraction { "monotone" } else { "violated" }
        ),
    ))
}

fn lowest_states() -> Result<(Vec<Quantized>, Vec<QuantizationProblem>)> {
    let params = ModelParams::new(2, 1.0, 1.0, 1.0)?;
    let mut states = Vec::new();
    let mut problems = Vec::new();
    for n in [vec![0, -1], vec![1, -1], vec![1, -2]] {
        let problem = QuantizationProblem::new(params, n, 0.0)?;
        states.push(solve_quantization(&problem, None, &QuantizeOptions::default())?);
        problems.push(problem);
    }
    Ok((states, problems))
}

type Check<'a> = Box<dyn Fn() -> Result<Verdict> + 'a>;

fn main() {
    // libtest flags such as --nocapture are accepted and ignored
    let start = Instant::now();
    let solved = lowest_states();
    let run: Vec<(u8, &str, Check<'_>)> = vec![
        (1, "determinant equivalence", Box::new(determinant_equivalence)),
        (2, "factorization", Box::new(factorization)),
        (3, "Baxter residuals", Box::new(baxter)),
        (4, "Wronskian identities", Box::new(wronskians)),
        (5, "integral equation vs determinants", Box::new(nlie_cross_check)),
        (6, "Newton-sum round trip", Box::new(newton_round_trip)),
        (
            7,
            "quantization equivalence",
            Box::new(|| match &solved {
                Ok((states, problems)) => quantization_equivalence(states, problems),
                Err(e) => Err(e.clone()),
            }),
        ),
        (8, "trivial limit", Box::new(trivial_limit)),
        (
            9,
            "numerical certificates",
            Box::new(|| match &solved {
                Ok((states, _)) => certificates(states),
                Err(e) => Err(e.clone()),
            }),
        ),
    ];
    let mut failures = 0;
    for (id, name, check) in &run {
        let t0 = Instant::now();
        let (pass, detail) = match check() {
            Ok(v) => (v.pass, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failures += usize::from(!pass);
        println!(
            "criterion {id}: {} - {name}: {detail} [{:.1}s]",
            if pass { "PASS" } else { "FAIL" },
            t0.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {}/{} passed in {:.1}s",
        run.len() - failures,
        run.len(),
        start.elapsed().as_secs_f64()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
