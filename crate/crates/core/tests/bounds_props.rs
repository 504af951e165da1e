use corpca::bounds::{bound_l1, bound_l1l1, bound_nl1, compute_alpha_eta, noisy_from, BoundInputs};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sparse_signal(n: usize, s: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let mut x = DVector::zeros(n);
    for i in sample(rng, n, s) {
        x[i] = if rng.random_bool(0.5) { 1.0 } else { -1.0 } * rng.random_range(0.5..2.0);
    }
    x
}

/// Recounts the ℓ1-ℓ1 sets with explicit index lists.
fn l1l1_oracle(n: usize, x: &DVector<f64>, z: &DVector<f64>) -> f64 {
    let nz = |v: f64| v.abs() > 1e-12;
    let support: Vec<usize> = (0..n).filter(|&i| nz(x[i])).collect();
    let off_support_disagree: Vec<usize> = (0..n).filter(|&i| !nz(x[i]) && nz(z[i] - x[i])).collect();
    let on_support_agree: Vec<usize> = support.iter().copied().filter(|&i| !nz(z[i] - x[i])).collect();
    let positive_above: Vec<usize> = (0..n).filter(|&i| x[i] > 1e-12 && x[i] - z[i] > 1e-12).collect();
    let negative_below: Vec<usize> = (0..n).filter(|&i| x[i] < -1e-12 && z[i] - x[i] > 1e-12).collect();
    let mut h: Vec<usize> = positive_above.into_iter().chain(negative_below).collect();
    h.sort_unstable();
    h.dedup();
    let xi = off_support_disagree.len() as f64 - on_support_agree.len() as f64;
    let eff = support.len() as f64 + xi / 2.0;
    2.0 * h.len() as f64 * (n as f64 / eff).ln() + 1.4 * eff + 1.0
}

#[test]
fn l1l1_matches_set_counting_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    for _ in 0..20 {
        let x = sparse_signal(500, 30, &mut rng);
        let mut z = x.clone();
        let support: Vec<usize> = (0..500).filter(|&i| x[i] != 0.0).collect();
        for k in sample(&mut rng, support.len(), 10) {
            z[support[k]] += rng.random_range(-0.5..0.5);
        }
        for i in sample(&mut rng, 500, 5) {
            if x[i] == 0.0 {
                z[i] = rng.random_range(-1.0..1.0);
            }
        }
        let got = bound_l1l1(500, &x, &z).unwrap();
        assert!((got - l1l1_oracle(500, &x, &z)).abs() <= 1e-9);
    }
}

#[test]
fn bounds_grow_with_sparsity() {
    let n = 500usize;
    let top = (n as f64 / std::f64::consts::E).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut prev = (0.0, 0.0, 0.0);
    for s in 1..=top {
        let l1 = bound_l1(n as f64, s as f64).unwrap();
        let nl1 = bound_nl1(
            &BoundInputs {
                n,
                s: vec![s],
                beta: vec![1.0],
                w: vec![vec![1.0; s]],
                eps: 1.0,
                eta_hat: 1.0,
                rho: 0.5,
            },
            false,
        )
        .unwrap();
        let x = sparse_signal(n, s, &mut rng);
        let l1l1 = bound_l1l1(n, &x, &DVector::zeros(n)).unwrap();
        assert!(l1 >= prev.0 && nl1 >= prev.1 && l1l1 >= prev.2, "decrease at s = {s}");
        prev = (l1, nl1, l1l1);
    }
}

#[test]
fn nl1_bound_is_continuous_in_epsilon() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 500;
    let x = sparse_signal(n, 20, &mut rng);
    let z = vec![&x + sparse_signal(n, 5, &mut rng)];
    let beta = [0.3, 0.7];
    let at = |eps: f64| bound_nl1(&BoundInputs::from_signal(&x, &z, &beta, eps, 0.5).unwrap(), false).unwrap();
    let mut prev = at(0.05);
    let mut eps = 0.05;
    while eps < 3.0 {
        let next_eps = eps + 1e-3;
        let next = at(next_eps);
        assert!((next - prev).abs() <= 0.05 * prev.max(1.0), "jump at ε = {eps}: {prev} -> {next}");
        prev = next;
        eps = next_eps;
    }
}

proptest! {
    #[test]
    fn noisy_and_noiseless_forms_are_related(n in 50usize..2000, s in 1usize..40, j in 0usize..3, rho in 0.01f64..0.99, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = sparse_signal(n, s, &mut rng);
        let z: Vec<DVector<f64>> = (0..j).map(|_| &x + sparse_signal(n, 3, &mut rng)).collect();
        let beta = vec![1.0 / (j + 1) as f64; j + 1];
        let inp = BoundInputs::from_signal(&x, &z, &beta, 0.8, rho).unwrap();
        let clean = bound_nl1(&inp, false).unwrap();
        let noisy = bound_nl1(&inp, true).unwrap();
        prop_assert!((noisy - (clean - 1.0) / rho - 1.5 / rho).abs() <= 1e-9 * noisy.abs().max(1.0));
        prop_assert!((noisy_from(clean, rho).unwrap() - noisy).abs() <= 1e-9 * noisy.abs().max(1.0));
    }

    #[test]
    fn alpha_eta_satisfies_its_definitions(n in 2usize..200, s in 1usize..20, eps in 0.01f64..3.0, seed in any::<u64>()) {
        let s = s.min(n - 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = sparse_signal(n, s, &mut rng);
        let q = compute_alpha_eta(&x, &[], &[1.0], eps).unwrap();
        let eta = n as f64 / x.iter().map(|v| 1.0 / (v.abs() + eps)).sum::<f64>();
        prop_assert!((q.eta_hat - eta).abs() <= 1e-12 * eta);
        prop_assert_eq!(q.s[0], s);
        let sum_sq: f64 = x.iter().filter(|v| **v != 0.0).map(|v| (eta / (v.abs() + eps)).powi(2)).sum();
        prop_assert!((q.alpha - (eps / eta).powi(2) * sum_sq).abs() <= 1e-9 * q.alpha.max(1.0));
    }

    #[test]
    fn perfect_prior_beats_plain_recovery(s0 in 1usize..60, factor in 10usize..30) {
        let n = s0 * factor;
        let mut rng = ChaCha8Rng::seed_from_u64(s0 as u64);
        let x = sparse_signal(n, s0, &mut rng);
        // all weight on the perfect prior would leave s̄ = 0, so the zero
        // prior keeps a sliver
        let beta = [1e-6, 1.0 - 1e-6];
        let inp = BoundInputs::from_signal(&x, &[x.clone()], &beta, 0.8, 0.5).unwrap();
        prop_assert!(bound_nl1(&inp, false).unwrap() < bound_l1(n as f64, s0 as f64).unwrap());
    }
}

#[test]
fn noisy_limit_near_unit_rho() {
    let inp = BoundInputs {
        n: 500,
        s: vec![10],
        beta: vec![1.0],
        w: vec![vec![1.0; 10]],
        eps: 1.0,
        eta_hat: 1.0,
        rho: 1.0 - 1e-9,
    };
    let expected = 2.0 * 10.0 * 50f64.ln() + 14.0 + 1.5;
    assert!((bound_nl1(&inp, true).unwrap() - expected).abs() <= 1e-5);
}
