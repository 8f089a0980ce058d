//! Mode dispatch and the result document.

use crate::config::{Mode, RunConfig};
use crate::error::{CliError, ExitStatus};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};
use toda_tba::determinants::{hill, hill_brute, hill_zeros_certified, k_plus_eval, sinh_ratio};
use toda_tba::gutzwiller::{baxter_residual, q_residue, wronskian_residual, y_from_determinants_grid, BaxterCoefficients, Branch, QPair};
use toda_tba::model::{ModelParams, SpectralPolynomial, TruncationConfig};
use toda_tba::nlie::{certify, solve_nlie_with, GridCertificate, NlieOptions, NlieSolution, SolveReport};
use toda_tba::oracle::n2_relative_spectrum;
use toda_tba::par::Exec;
use toda_tba::quantize::{
    quantization_residual, reconstruct_spectrum, recovered_quantum_numbers, solve_quantization, QuantizationProblem, QuantizeOptions,
    Quantized,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
const SAMPLES: usize = 20;
const BRUTE_WINDOW: usize = 64;
const ORACLE_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Serialize)]
pub struct Residual {
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Residual {
    fn new(name: &'static str, value: f64, threshold: f64) -> Self {
        Residual {
            name,
            value,
            threshold,
            pass: value <= threshold,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GridSection {
    pub nodes: usize,
    pub lambda_max: f64,
    pub spacing: f64,
    #[serde(flatten)]
    pub deltas: GridCertificate,
}

#[derive(Debug, Clone, Serialize)]
pub struct TruncationSection {
    pub depth: usize,
    pub tail_tol: f64,
    /// Largest doubling delta over the sampled determinant evaluations.
    pub max_delta: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ZeroSection {
    pub contour_count: f64,
    pub max_residual: f64,
    pub momentum_defect: f64,
    pub multiplicities: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleSection {
    pub refinement_delta: f64,
    pub width_delta: f64,
    pub tol: f64,
    pub half_width: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Certificates {
    pub grid: Option<GridSection>,
    pub truncation: Option<TruncationSection>,
    pub contraction: Option<SolveReport>,
    pub zeros: Option<ZeroSection>,
    pub oracle: Option<OracleSection>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorSection {
    pub kind: &'static str,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResultDocument {
    pub version: &'static str,
    pub mode: &'static str,
    pub status: &'static str,
    pub exit_code: i32,
    pub config: RunConfig,
    pub residuals: Vec<Residual>,
    pub certificates: Certificates,
    pub result: Value,
    pub error: Option<ErrorSection>,
}

/// Everything a mode produces besides the envelope.
#[derive(Default)]
pub struct Outcome {
    pub residuals: Vec<Residual>,
    pub certificates: Certificates,
    pub result: Value,
    pub profile: Option<(Vec<f64>, Vec<f64>)>,
}

impl Outcome {
    pub fn status(&self) -> ExitStatus {
        if self.residuals.iter().all(|r| r.pass) {
            ExitStatus::Success
        } else {
            ExitStatus::Consistency
        }
    }
}

pub fn document(mode: Mode, config: &RunConfig, outcome: Result<&Outcome, &CliError>) -> ResultDocument {
    let (status, exit, residuals, certificates, result, error) = match outcome {
        Ok(o) => {
            let s = o.status();
            let label = if s == ExitStatus::Success { "ok" } else { "consistency_failure" };
            (label, s, o.residuals.clone(), o.certificates.clone(), o.result.clone(), None)
        }
        Err(e) => (
            e.kind(),
            e.status(),
            Vec::new(),
            Certificates::default(),
            Value::Null,
            Some(ErrorSection {
                kind: e.kind(),
                message: e.to_string(),
            }),
        ),
    };
    ResultDocument {
        version: VERSION,
        mode: mode.name(),
        status,
        exit_code: exit as i32,
        config: config.clone(),
        residuals,
        certificates,
        result,
        error,
    }
}

pub fn run(mode: Mode, config: &RunConfig) -> Result<Outcome, CliError> {
    config.check_mode(mode)?;
    let params = config.params()?;
    log::info!(
        "mode {} for N = {}, rho^hbar = {:e}",
        mode.name(),
        params.n_particles(),
        params.rho_weight()
    );
    match mode {
        Mode::Check => check(config, &params),
        Mode::Nlie => nlie(config, &params),
        Mode::Quantize => quantize(config, &params, false),
        Mode::Spectrum => quantize(config, &params, true),
        Mode::OracleN2 => oracle(config, &params),
    }
}

fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

fn sup(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

/// Fixed, spread-out points inside `|Im λ| < 0.45ħ`.
fn strip_samples(hbar: f64) -> Vec<Complex64> {
    (0..SAMPLES)
        .map(|j| {
            let x = -3.8 + 7.6 * (j as f64 + 0.5) / SAMPLES as f64;
            Complex64::new(x, 0.4 * hbar * (2.3 * j as f64 + 0.7).sin())
        })
        .collect()
}

/// Points above the strip where the integral-built `Q_δ+` is evaluated.
fn upper_samples(hbar: f64) -> Vec<Complex64> {
    (0..SAMPLES)
        .map(|j| {
            let s = (j as f64 + 0.5) / SAMPLES as f64;
            Complex64::new(-3.0 + 6.0 * s, (0.55 + 0.4 * ((5.0 * s).fract())) * hbar)
        })
        .collect()
}

fn relative(a: Complex64, b: Complex64) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

fn nlie_options(config: &RunConfig, default_tol: f64) -> Result<NlieOptions, CliError> {
    Ok(NlieOptions {
        tol: config.tolerance(default_tol)?,
        exec: config.numerics.exec,
        ..NlieOptions::default()
    })
}

fn grid_section(sol: &NlieSolution, opts: &NlieOptions) -> Result<GridSection, CliError> {
    let deltas = certify(sol, opts)?;
    Ok(GridSection {
        nodes: sol.grid.count(),
        lambda_max: sol.grid.lambda_max(),
        spacing: sol.grid.spacing(),
        deltas,
    })
}

fn truncation_section(
    points: &[Complex64],
    t: &SpectralPolynomial,
    params: &ModelParams,
    cfg: &TruncationConfig,
    exec: Exec,
) -> Result<TruncationSection, CliError> {
    let deltas = exec.try_map_range(points.len(), |i| k_plus_eval(points[i], t, params, cfg).map(|e| e.truncation_delta))?;
    Ok(TruncationSection {
        depth: cfg.depth,
        tail_tol: cfg.tail_tol,
        max_delta: sup(deltas),
        samples: points.len(),
    })
}

fn check(config: &RunConfig, params: &ModelParams) -> Result<Outcome, CliError> {
    let t = config.tau(params)?;
    let cfg = config.truncation(params)?;
    let exec = config.numerics.exec;
    let hbar = params.hbar();
    let open = params.kappa() == 0.0;
    let qp = QPair::new(t.clone(), *params, cfg);
    let points = strip_samples(hbar);

    let zc = hill_zeros_certified(&t, params, &cfg, exec)?;
    let zeros = zc.zeros.clone();
    log::info!("hill zeros {:?}", zeros.deltas());

    let brute = exec.try_map_range(SAMPLES, |i| {
        let z = points[i];
        Ok::<_, toda_tba::TodaError>(relative(hill(z, &t, params, &cfg)?, hill_brute(z, &t, params, BRUTE_WINDOW)?))
    })?;
    let factor = exec.try_map_range(SAMPLES, |i| {
        let z = points[i];
        Ok::<_, toda_tba::TodaError>(relative(hill(z, &t, params, &cfg)?, sinh_ratio(z, &zeros, &t, hbar)?.to_complex()))
    })?;
    let momentum = (zeros.deltas().iter().sum::<Complex64>() - t.root_sum()).norm();

    let standard = BaxterCoefficients::standard(params);
    let stripped = BaxterCoefficients::stripped_plus(params);
    let baxter_t = exec.try_map_range(SAMPLES, |i| {
        let z = points[i];
        let tv = t.eval(z);
        let plus = if open {
            baxter_residual(z, tv, hbar, stripped, |l| qp.plus_stripped(l))?
        } else {
            baxter_residual(z, tv, hbar, standard, |l| qp.plus(l))?
        };
        Ok::<_, toda_tba::TodaError>(plus.max(baxter_residual(z, tv, hbar, standard, |l| qp.minus(l))?))
    })?;
    let wronskian = exec.try_map_range(SAMPLES, |i| wronskian_residual(points[i], &qp))?;
    let sign = if params.n_particles().is_multiple_of(2) { 1.0 } else { -1.0 };
    let periodic = exec.try_map_range(SAMPLES, |i| {
        let z = points[i];
        let ratio = (qp.wronskian_stripped(z + Complex64::new(0.0, hbar))? / qp.wronskian_stripped(z)?).to_complex();
        Ok::<_, toda_tba::TodaError>((ratio - sign).norm())
    })?;

    let opts = nlie_options(config, 1e-12)?;
    let grid = config.grid(&zeros, params)?;
    let sol = solve_nlie_with(&zeros, params, &grid, &opts, None)?;
    let y_det = y_from_determinants_grid(sol.grid.nodes(), &t, &zeros, params, &cfg, exec)?;
    let y_gap = sup(sol.ln_y.iter().zip(&y_det).map(|(l, y)| (l.exp() - y).abs()));
    let quantum = exec.try_map_range(SAMPLES, |i| sol.quantum_wronskian_residual(points[i].re))?;
    let upper = upper_samples(hbar);
    let baxter_delta = exec.try_map_range(SAMPLES, |i| {
        let top = upper[i];
        let bottom = top.conj();
        let plus = if open {
            baxter_residual(top, t.eval(top), hbar, stripped, |l| sol.q_delta_stripped(l, Branch::Plus))?
        } else {
            baxter_residual(top, t.eval(top), hbar, standard, |l| sol.q_delta(l, Branch::Plus))?
        };
        let minus = baxter_residual(bottom, t.eval(bottom), hbar, standard, |l| sol.q_delta(l, Branch::Minus))?;
        Ok::<_, toda_tba::TodaError>(plus.max(minus))
    })?;
    let sums = sol.newton_sums(params.n_particles())?;
    let direct: Vec<f64> = (1..=params.n_particles() as u32).map(|k| t.power_sum(k).re).collect();
    let newton = sup(sums.iter().zip(&direct).map(|(a, b)| (a - b).abs()));

    let residuals = vec![
        Residual::new("hill_vs_brute", sup(brute), 1e-8),
        Residual::new("factorization", sup(factor), 1e-8),
        Residual::new("momentum", momentum, 1e-8),
        Residual::new("baxter_q_t", sup(baxter_t), 1e-7),
        Residual::new("baxter_q_delta", sup(baxter_delta), 1e-7),
        Residual::new("wronskian", sup(wronskian), 1e-7),
        Residual::new("quasi_periodicity", sup(periodic), 1e-8),
        Residual::new("quantum_wronskian", sup(quantum), 1e-7),
        Residual::new("nlie_vs_determinants", y_gap, 1e-7),
        Residual::new("newton_sums", newton, 1e-6),
    ];
    let certificates = Certificates {
        grid: Some(grid_section(&sol, &opts)?),
        truncation: Some(truncation_section(&points, &t, params, &cfg, exec)?),
        contraction: Some(sol.report.clone()),
        zeros: Some(ZeroSection {
            contour_count: zc.contour_count,
            max_residual: zc.max_residual,
            momentum_defect: zc.momentum_defect,
            multiplicities: zc.multiplicities.clone(),
        }),
        oracle: None,
    };
    let result = json!({
        "tau": t.roots().iter().copied().map(pair).collect::<Vec<_>>(),
        "deltas": zeros.deltas().iter().copied().map(pair).collect::<Vec<_>>(),
        "newton_sums": sums,
        "power_sums": direct,
    });
    Ok(Outcome {
        residuals,
        certificates,
        result,
        profile: Some((sol.grid.nodes().to_vec(), sol.ln_y.clone())),
    })
}

fn nlie(config: &RunConfig, params: &ModelParams) -> Result<Outcome, CliError> {
    let zeros = config.deltas(params)?;
    let opts = nlie_options(config, 1e-12)?;
    let grid = config.grid(&zeros, params)?;
    let sol = solve_nlie_with(&zeros, params, &grid, &opts, None)?;
    let quantum = opts.exec.try_map_range(SAMPLES, |i| {
        sol.quantum_wronskian_residual(-3.8 + 7.6 * (i as f64 + 0.5) / SAMPLES as f64)
    })?;
    let sums = sol.newton_sums(params.n_particles())?;
    let residuals = vec![
        Residual::new("fixed_point", sol.residual, 10.0 * opts.tol),
        Residual::new("quantum_wronskian", sup(quantum), 1e-7),
    ];
    let certificates = Certificates {
        grid: Some(grid_section(&sol, &opts)?),
        contraction: Some(sol.report.clone()),
        ..Certificates::default()
    };
    let result = json!({
        "deltas": zeros.deltas().iter().copied().map(pair).collect::<Vec<_>>(),
        "newton_sums": sums,
        "lambda": sol.grid.nodes(),
        "ln_y": sol.ln_y,
    });
    Ok(Outcome {
        residuals,
        certificates,
        result,
        profile: Some((sol.grid.nodes().to_vec(), sol.ln_y.clone())),
    })
}

fn quantize(config: &RunConfig, params: &ModelParams, spectrum: bool) -> Result<Outcome, CliError> {
    let problem = QuantizationProblem::new(*params, config.quantum_numbers()?, config.momentum).map_err(|e| match e {
        toda_tba::TodaError::Validation { field, message } => CliError::Validation {
            field: match field.as_str() {
                "quantum_numbers" | "momentum" => field,
                _ => format!("model.{field}"),
            },
            message,
        },
        other => CliError::Core(other),
    })?;
    let mut opts = QuantizeOptions {
        tol: config.tolerance(QuantizeOptions::default().tol)?,
        ..QuantizeOptions::default()
    };
    opts.nlie.exec = config.numerics.exec;
    let Quantized {
        candidate,
        solution,
        history,
    } = solve_quantization(&problem, None, &opts)?;
    if !candidate.converged {
        return Err(CliError::Core(toda_tba::TodaError::Solver {
            message: format!(
                "residual {:e} above {:e}",
                sup(candidate.residuals.iter().map(|r| r.abs())),
                opts.tol
            ),
        }));
    }
    log::info!("quantized zeros {:?}", candidate.deltas.deltas());

    let fine = solve_nlie_with(&candidate.deltas, params, &solution.grid.halved(), &opts.nlie, Some(&solution))?;
    let halved = quantization_residual(&candidate, &problem, &fine)?;
    let recovered = recovered_quantum_numbers(&candidate, &problem, &fine)?;
    let integrality = sup(recovered.iter().zip(&problem.quantum_numbers).map(|(g, n)| (g - *n as f64).abs()));
    let momentum = (candidate.deltas.total_momentum() - problem.total_momentum).abs();
    let mut residuals = vec![
        Residual::new("quantization", sup(candidate.residuals.iter().map(|r| r.abs())), opts.tol),
        Residual::new("quantization_halved_grid", sup(halved.iter().map(|r| r.abs())), opts.tol),
        Residual::new("momentum", momentum, opts.tol),
        Residual::new("quantum_number_integrality", integrality, 1e-6),
    ];
    let mut result = json!({
        "deltas": candidate.deltas.deltas().iter().map(|d| d.re).collect::<Vec<_>>(),
        "zeta_phase": candidate.zeta_phase,
        "phase_branch": candidate.phase_branch,
        "unwrapped_phase": candidate.unwrapped_phase(),
        "residuals": candidate.residuals,
        "converged": candidate.converged,
        "newton_history": history,
        "recovered_quantum_numbers": recovered,
    });
    let mut truncation = None;
    if spectrum {
        let spec = reconstruct_spectrum(&candidate, &problem, &solution)?;
        let t = SpectralPolynomial::new(spec.tau.clone(), params.hbar())?;
        let cfg = config.truncation(params)?;
        let qp = QPair::new(t.clone(), *params, cfg);
        let residues: Vec<f64> = (0..candidate.deltas.len())
            .map(|k| q_residue(k, &qp, candidate.zeta_phase, &candidate.deltas).map(|r| r.relative))
            .collect::<Result<_, _>>()?;
        residuals.push(Residual::new("q_residue", sup(residues.iter().copied()), 1e-7));
        truncation = Some(truncation_section(candidate.deltas.deltas(), &t, params, &cfg, opts.nlie.exec)?);
        let extra = json!({
            "tau": spec.tau.iter().copied().map(pair).collect::<Vec<_>>(),
            "elementary_symmetric": spec.elementary_symmetric,
            "energy": spec.energy,
            "yang_value": spec.yang_value,
            "q_residues": residues,
        });
        if let (Value::Object(base), Value::Object(more)) = (&mut result, extra) {
            base.extend(more);
        }
    }
    let certificates = Certificates {
        grid: Some(grid_section(&solution, &opts.nlie)?),
        truncation,
        contraction: Some(solution.report.clone()),
        ..Certificates::default()
    };
    Ok(Outcome {
        residuals,
        certificates,
        result,
        profile: Some((solution.grid.nodes().to_vec(), solution.ln_y.clone())),
    })
}

fn oracle(config: &RunConfig, params: &ModelParams) -> Result<Outcome, CliError> {
    let count = config.states.unwrap_or(3);
    let spec = n2_relative_spectrum(params, config.momentum, count).map_err(|e| match e {
        toda_tba::TodaError::Validation { field, message } => CliError::Validation {
            field: if field == "count" {
                "states".into()
            } else {
                format!("model.{field}")
            },
            message,
        },
        other => CliError::Core(other),
    })?;
    let residuals = vec![
        Residual::new("oracle_refinement", spec.refinement_delta, ORACLE_TOL),
        Residual::new("oracle_width", spec.width_delta, ORACLE_TOL),
    ];
    let certificates = Certificates {
        oracle: Some(OracleSection {
            refinement_delta: spec.refinement_delta,
            width_delta: spec.width_delta,
            tol: ORACLE_TOL,
            half_width: spec.operator.half_width,
            points: spec.operator.points,
        }),
        ..Certificates::default()
    };
    Ok(Outcome {
        residuals,
        certificates,
        result: json!({ "momentum": config.momentum, "energies": spec.energies }),
        profile: None,
    })
}
