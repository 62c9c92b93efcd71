//! Monte Carlo estimators against exact enumeration at small n, within 4σ
//! normal bands.

use num_rational::BigRational;
use rwlocal::gamma::taboo_survival;
use rwlocal::mass::rational_to_f64;
use rwlocal::oracle::{enumerate, exact_return_law, exact_zn_law};
use rwlocal::path::{l_alpha, q_histogram, sample_visited_local_time, simulate_with_rng, DEFAULT_KEY_BUDGET};
use rwlocal::seed::replica_rng;
use rwlocal::steps::{bernoulli, drifted_srw, srw};
use rwlocal::theory::expected_qj_all;
use rwlocal::StepLaw;

const M: u64 = 100_000;
const N: usize = 8;

fn within(name: &str, samples: &[f64], exact: f64) {
    let m = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / m;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    let se = (var / m).sqrt();
    assert!(
        (mean - exact).abs() <= 4.0 * se + 1e-12,
        "{name}: mc {mean} exact {exact} se {se}"
    );
}

fn check_law(law: &StepLaw, seed: u64) {
    let exact = enumerate(law, N, &[2, 3]).unwrap();
    let zn = exact_zn_law(&exact);
    let mut q1 = Vec::new();
    let mut q2 = Vec::new();
    let mut l2 = Vec::new();
    let mut l3 = Vec::new();
    let mut z_is_1 = Vec::new();
    for r in 0..M {
        let mut rng = replica_rng(seed, r);
        let field = simulate_with_rng(law, N as u64, &mut rng, DEFAULT_KEY_BUDGET).unwrap();
        let h = q_histogram(&field);
        q1.push(h.get(1) as f64);
        q2.push(h.get(2) as f64);
        l2.push(l_alpha(&field, 2.0));
        l3.push(l_alpha(&field, 3.0));
        z_is_1.push(f64::from(sample_visited_local_time(&field, &mut rng, 1)[0] == 1));
    }
    within("Q1", &q1, rational_to_f64(&exact.expected_q(1)));
    within("Q2", &q2, rational_to_f64(&exact.expected_q(2)));
    within("L2", &l2, rational_to_f64(&exact.expected_l[0]));
    within("L3", &l3, rational_to_f64(&exact.expected_l[1]));
    within("P(Z=1)", &z_is_1, rational_to_f64(&zn[&1]));
}

#[test]
fn monte_carlo_matches_oracle_bernoulli() {
    check_law(&bernoulli(0.7).unwrap(), 1);
}

#[test]
fn monte_carlo_matches_oracle_srw2() {
    check_law(&srw(2), 2);
}

#[test]
fn monte_carlo_matches_oracle_drifted() {
    check_law(&drifted_srw(2, 0.5).unwrap(), 3);
}

#[test]
fn dp_and_formula_match_oracle_exactly() {
    for law in [srw(2), drifted_srw(2, 0.25).unwrap(), bernoulli(0.9).unwrap()] {
        let dp = taboo_survival::<BigRational>(&law, 7).unwrap();
        assert_eq!(dp.gammas(), exact_return_law(&law, 7).unwrap().gammas());
        for n in 0..=7 {
            let s = enumerate(&law, n, &[]).unwrap();
            let f = expected_qj_all(&dp, n).unwrap();
            assert_eq!(f, s.expected_q);
            assert_eq!(s.gammas[..], dp.gammas()[..=n]);
        }
    }
}
