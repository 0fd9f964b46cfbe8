//! Higher-order trace equivalents against values frozen from an independent
//! operator-valued (block-resolvent) computation of the same resolvent chains.

use num_complex::Complex64;
use rzf_secrecy::rmt::{solve_leave_one_out, FixedPointOptions, FunctionalTable};
use rzf_secrecy::scenario::Spectrum;
use rzf_secrecy::second_order::HighOrderFunctionals;
use rzf_secrecy::CMatrix;

fn toeplitz(m: usize, r: f64, phase: f64) -> CMatrix {
    CMatrix::from_fn(m, m, |i, j| {
        let lag = i as f64 - j as f64;
        Complex64::from_polar(r.powf(lag.abs()), phase * lag)
    })
}

const T: [f64; 7] = [1.0, 0.8, 0.8, 0.5, 1.3, 0.7, 0.9];
const P: [f64; 7] = [1.2, 1.0, 0.9, 1.1, 0.6, 1.3, 0.9];

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn chain_oracle_instance() {
    let m = 12;
    let r = toeplitz(m, 0.6, 0.4);
    let c = toeplitz(m, 0.45, -0.25);
    let spec = Spectrum::of_psd(&r).unwrap();
    let c_rot = spec.rotate(&c);
    let sol = solve_leave_one_out(&spec.values, &T, 0.35, 0, FixedPointOptions::default()).unwrap();
    let table = FunctionalTable::new(&sol).unwrap();
    let hof = HighOrderFunctionals::compute(&table, &c_rot, &P[1..]).unwrap();

    let frozen = [
        ("delta", table.delta, 1.5831669834595024),
        ("delta_tilde", table.delta_tilde, 0.17610798206863368),
        ("Gamma(C)", hof.gamma_c, 14.061193501366796),
        ("kappa(P)", hof.kappa_p, 0.8142961037801957),
        ("kappa(I)", hof.kappa_i, 0.8248726480576077),
        ("chi(C,C)", hof.chi_cc, 52.753526477753304),
        ("Pi(P)", hof.pi_p, 0.3299546611338805),
        ("Pi(I)", hof.pi_i, 0.33110076956930645),
        ("beta(P,C)", hof.beta_pc, 2.0652979875682584),
        ("beta(P,I)", hof.beta_pi, 1.3965312445655687),
        ("beta(I,C)", hof.beta_ic, 2.0834941030624283),
    ];
    for (name, got, want) in frozen {
        assert!(rel(got, want) < 1e-10, "{name}: {got} vs {want}");
    }
    let c_diag: Vec<f64> = (0..m).map(|i| c_rot[(i, i)].re).collect();
    let trqrqc = table.gamma_w(&c_diag) / table.stability;
    assert!(rel(trqrqc, 4.111426802831281) < 1e-10);
}
