use lyapunov_core::potential::PotentialKind;
use lyapunov_core::{gamma, SolverOptions, TorusPotential};
use proptest::prelude::*;

fn opts() -> SolverOptions {
    SolverOptions {
        grid_n: 256,
        ..SolverOptions::default()
    }
}

fn g(v: &TorusPotential, y: f64) -> f64 {
    gamma(v, y, &opts()).unwrap().gamma
}

/// Growth rate per period of `ψ'' = 2Vψ` on the line: the logarithm of the
/// largest Floquet multiplier, computed by RK4 on the monodromy matrix.
fn floquet_rate(v: &TorusPotential) -> f64 {
    let steps = 4000;
    let h = 1.0 / steps as f64;
    let rhs = |x: f64, z: [f64; 2]| [z[1], 2.0 * v.eval(x) * z[0]];
    let mut cols = [[1.0, 0.0], [0.0, 1.0]];
    for z in cols.iter_mut() {
        for i in 0..steps {
            let x = i as f64 * h;
            let k1 = rhs(x, *z);
            let k2 = rhs(x + h / 2.0, [z[0] + h / 2.0 * k1[0], z[1] + h / 2.0 * k1[1]]);
            let k3 = rhs(x + h / 2.0, [z[0] + h / 2.0 * k2[0], z[1] + h / 2.0 * k2[1]]);
            let k4 = rhs(x + h, [z[0] + h * k3[0], z[1] + h * k3[1]]);
            for j in 0..2 {
                z[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
        }
    }
    // unit determinant, so the multipliers are roots of μ² − tr μ + 1
    let tr = cols[0][0] + cols[1][1];
    ((tr + (tr * tr - 4.0).sqrt()) / 2.0).ln()
}

fn trig_strategy() -> impl Strategy<Value = TorusPotential> {
    (0.5f64..3.0, prop::collection::vec((-0.4f64..0.4, -0.4f64..0.4), 1..4))
        .prop_map(|(lo, modes)| {
            let (cos, sin): (Vec<f64>, Vec<f64>) = modes.into_iter().unzip();
            let amp: f64 = cos.iter().chain(&sin).map(|c| c.abs()).sum();
            TorusPotential::trig(lo + amp, cos, sin).unwrap()
        })
}

#[test]
fn matches_floquet_exponent() {
    let cases = [
        TorusPotential::trig(2.0, vec![1.0], vec![0.0]).unwrap(),
        TorusPotential::trig(2.0, vec![0.9, 0.0], vec![0.0, 0.3]).unwrap(),
        TorusPotential::trig(1.0, vec![0.0, 0.0, 0.5], vec![0.2, 0.0, 0.0]).unwrap(),
        TorusPotential::constant(3.0).unwrap(),
    ];
    for v in &cases {
        let exact = floquet_rate(v);
        let got = gamma(v, 1.0, &SolverOptions::default()).unwrap().gamma;
        assert!((got - exact).abs() < 1e-5 * exact, "{:?}: {got} vs {exact}", v.kind());
    }
}

#[test]
fn two_plus_cos_is_below_but_close_to_two() {
    let v = TorusPotential::trig(2.0, vec![1.0], vec![0.0]).unwrap();
    let got = gamma(&v, 1.0, &SolverOptions::default()).unwrap().gamma;
    assert!(got < 2.0);
    assert!((got - 1.9909468).abs() < 1e-6, "{got}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn floquet_agreement_random_trig(v in trig_strategy()) {
        let exact = floquet_rate(&v);
        prop_assert!((g(&v, 1.0) - exact).abs() < 1e-4 * exact);
    }

    #[test]
    fn between_min_and_mean_bounds(v in trig_strategy()) {
        let gv = g(&v, 1.0);
        prop_assert!(gv <= (2.0 * v.mean()).sqrt() * (1.0 + 1e-9));
        prop_assert!(gv >= (2.0 * v.v_min()).sqrt() * (1.0 - 1e-6));
    }

    #[test]
    fn homogeneous_in_y(v in trig_strategy(), y in -3.0f64..3.0) {
        prop_assert!((g(&v, y) - y.abs() * g(&v, 1.0)).abs() <= 1e-9 * (1.0 + g(&v, 1.0)));
    }

    #[test]
    fn monotone_in_v(v in trig_strategy(), add in 0.0f64..1.0) {
        let w = v.shifted(add).unwrap();
        prop_assert!(g(&v, 1.0) <= g(&w, 1.0) * (1.0 + 1e-6));
    }

    #[test]
    fn scaling_sandwich(v in trig_strategy(), c in 1.0f64..4.0) {
        let gv = g(&v, 1.0);
        let gc = g(&v.scaled(c).unwrap(), 1.0);
        prop_assert!(gv <= gc * (1.0 + 1e-6));
        prop_assert!(gc <= c.sqrt() * gv * (1.0 + 1e-6));
    }

    #[test]
    fn square_is_concave(a in trig_strategy(), b in trig_strategy()) {
        let n = 512;
        let mid = TorusPotential::combination(&[0.5, 0.5], &[a.clone(), b.clone()], n).unwrap();
        prop_assert!(!matches!(mid.kind(), PotentialKind::Grid(_)));
        let lhs = g(&mid, 1.0).powi(2);
        let rhs = 0.5 * (g(&a, 1.0).powi(2) + g(&b, 1.0).powi(2));
        prop_assert!(lhs >= rhs * (1.0 - 1e-6));
    }
}
