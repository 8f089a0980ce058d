use num_complex::Complex64;
use proptest::prelude::*;
use toda_tba::determinants::hill;
use toda_tba::model::{ModelParams, SpectralPolynomial, TruncationConfig};
use toda_tba::specfun::{dilog, log_gamma, wrap_phase, LogComplex};

fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
    (a - b).norm() <= tol * b.norm().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn log_gamma_recurrence(re in -30.0..30.0f64, im in 0.05..40.0f64) {
        let z = Complex64::new(re, im);
        let lhs = log_gamma(z + 1.0).unwrap();
        let rhs = log_gamma(z).unwrap() + z.ln();
        // equal modulo 2πi
        let d = lhs - rhs;
        prop_assert!(d.re.abs() < 1e-11 * lhs.norm().max(1.0), "{z}: {d}");
        prop_assert!(wrap_phase(d.im).abs() < 1e-10, "{z}: {d}");
    }

    #[test]
    fn log_gamma_conjugation(re in -30.0..30.0f64, im in 0.01..40.0f64) {
        let z = Complex64::new(re, im);
        let up = log_gamma(z).unwrap();
        let down = log_gamma(z.conj()).unwrap();
        prop_assert!(close(down, up.conj(), 1e-13), "{z}");
    }

    #[test]
    fn dilog_derivative(x in -200.0..-1e-3f64) {
        // d/dx Li₂(x) = -ln(1 - x)/x, across both evaluation branches
        let h = 1e-4 * x.abs().min(1.0);
        let fd = (dilog(x + h).unwrap() - dilog(x - h).unwrap()) / (2.0 * h);
        let exact = -(1.0 - x).ln() / x;
        prop_assert!((fd - exact).abs() < 1e-6 * exact.abs(), "{x}: {fd} vs {exact}");
    }

    #[test]
    fn log_complex_round_trip(re in -1e3..1e3f64, im in -1e3..1e3f64) {
        prop_assume!(re.abs() + im.abs() > 1e-6);
        let z = Complex64::new(re, im);
        let back = LogComplex::from_complex(z).unwrap().to_complex();
        prop_assert!(close(back, z, 1e-14));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hill_conjugation_symmetry(a in -2.5..2.5f64, b in -2.5..2.5f64, x in -4.0..4.0f64, y in -0.45..0.45f64, kappa in 0.0..1.0f64) {
        let params = ModelParams::new(2, 1.0, 1.0, kappa).unwrap();
        let t = SpectralPolynomial::new(vec![Complex64::from(a), Complex64::from(b)], 1.0).unwrap();
        let cfg = TruncationConfig::default_for(&params);
        let z = Complex64::new(x, y);
        let h = hill(z, &t, &params, &cfg).unwrap();
        let hc = hill(z.conj(), &t, &params, &cfg).unwrap();
        prop_assert!(close(hc.conj(), h, 1e-12), "{z}: {h} vs {hc}");
    }
}
