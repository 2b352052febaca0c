use num_complex::Complex64;
use proptest::prelude::*;

use onebit_mimo::bussgang::{
    compute_statistics, evaluate_sindr, mmse_combiners, mse, quantize, quantize_1bit, sindr_closed_form, sindr_general,
    OperatingPoint,
};
use onebit_mimo::harness::oracle::{check_instance, OracleOptions};
use onebit_mimo::linalg::hermitian_eigenvalues;
use onebit_mimo::testing::{random_instance, random_point};

fn point_from(powers_db: &[f64], noise_db: &[f64]) -> OperatingPoint {
    OperatingPoint::new(
        powers_db.iter().map(|p| 10f64.powf(p / 10.0)).collect(),
        noise_db.iter().map(|s| 10f64.powf(s / 10.0)).collect(),
    )
}

fn instance() -> impl Strategy<Value = (usize, usize, usize, u64, Vec<f64>, Vec<f64>)> {
    (1usize..=3, 1usize..=4, 0usize..=4, any::<u64>()).prop_flat_map(|(nb, m, nk, seed)| {
        (
            Just(nb),
            Just(m),
            Just(nk),
            Just(seed),
            prop::collection::vec(-20.0..20.0f64, nk),
            prop::collection::vec(-10.0..10.0f64, nb),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn quantizer_alphabet_and_scale(re in -1e3..1e3f64, im in -1e3..1e3f64, c in 1e-6..1e6f64) {
        let a = Complex64::new(re, im);
        let q = quantize(a);
        prop_assert_eq!(q.re.abs(), std::f64::consts::FRAC_1_SQRT_2);
        prop_assert_eq!(q.im.abs(), std::f64::consts::FRAC_1_SQRT_2);
        prop_assert_eq!(quantize(a * c), q);
        prop_assert_eq!(quantize_1bit(&[a, a * c]), vec![q, q]);
    }

    #[test]
    fn statistics_invariants((nb, m, nk, seed, p_db, s_db) in instance(), log_c in -3.0..3.0f64) {
        let ch = random_instance(nb, m, nk, seed);
        let point = point_from(&p_db, &s_db);
        let st = compute_statistics(&ch, &point).unwrap();
        let n = nb * m;
        for i in 0..n {
            prop_assert_eq!(st.c_r[(i, i)], Complex64::new(1.0, 0.0));
            for j in 0..n {
                prop_assert!(st.c_r[(i, j)].re.abs() <= 1.0 && st.c_r[(i, j)].im.abs() <= 1.0);
                prop_assert_eq!(st.c_r[(i, j)], st.c_r[(j, i)].conj());
            }
        }
        let eig = hermitian_eigenvalues(&st.c_q);
        let norm = eig.iter().fold(0.0f64, |a, e| a.max(e.abs()));
        prop_assert!(eig.min() >= -1e-9 * norm, "{eig}");

        let base = evaluate_sindr(&ch, &point).unwrap();
        prop_assert!(base.x.iter().all(|x| (0.0..1.0).contains(x)));
        let c = 10f64.powf(log_c);
        let scaled = evaluate_sindr(&ch, &point.scaled(c)).unwrap();
        for (a, b) in base.sindr.iter().zip(&scaled.sindr) {
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-300), "{a} vs {b}");
        }
    }

    #[test]
    fn mmse_identities((nb, m, nk, seed, p_db, s_db) in instance()) {
        prop_assume!(nk > 0);
        let ch = random_instance(nb, m, nk, seed);
        let point = point_from(&p_db, &s_db);
        let st = compute_statistics(&ch, &point).unwrap();
        let w = mmse_combiners(&ch, &point, &st).unwrap().w;
        for k in 0..nk {
            let closed = sindr_closed_form(k, &ch, &point, &st).unwrap();
            let e = mse(k, &ch, &point, &st).unwrap();
            prop_assert!(((1.0 - e) / e - closed).abs() <= 1e-9 * closed.max(1e-12));
            let general = sindr_general(k, &w.column(k).into_owned(), &ch, &point, &st).unwrap();
            prop_assert!((general - closed).abs() <= 1e-8 * closed.max(1e-12), "{general} vs {closed}");
        }
    }
}

#[test]
fn monte_carlo_matches_closed_form_statistics() {
    let ch = random_instance(2, 4, 2, 21);
    let point = random_point(&ch, 22);
    let options = OracleOptions {
        draws: 1_000_000,
        seed: 23,
        gain_scale: 1.0,
    };
    let inst = check_instance(&ch, &point, &options, 0).unwrap();
    assert!(inst.passed(), "{inst:?}");
}

#[test]
fn low_snr_single_link_follows_two_over_pi() {
    let ch = random_instance(1, 8, 1, 31);
    let g: f64 = ch.h.column(0).norm_squared();
    let s = 1.0;
    let rho = 1e-3 * s / g;
    let sindr = evaluate_sindr(&ch, &OperatingPoint::new(vec![rho], vec![s]))
        .unwrap()
        .sindr[0];
    let approx = 2.0 / std::f64::consts::PI * rho * g / s;
    assert!((sindr / approx - 1.0).abs() < 0.02, "{sindr} vs {approx}");
}
