use corpca::experiments::{roc_auc, roc_eval_slice, run_phase_grid, Method, PhaseConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_grid(n: usize, s0: usize, m_list: Vec<usize>, trials: usize, seed: u64) -> PhaseConfig {
    let mut cfg = PhaseConfig::new(n, vec![s0], m_list, trials, seed);
    cfg.template.q = 8;
    cfg.template.cap = 5;
    cfg
}

#[test]
fn full_observation_always_succeeds() {
    let cfg = small_grid(200, 10, vec![200], 10, 41);
    let grid = run_phase_grid(&cfg).unwrap();
    let cell = grid.cell(Method::Nl1, 10, 200).unwrap();
    assert_eq!(cell.successes, cell.trials);
}

/// Spearman correlation of two samples, average ranks for ties.
fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        let mut k = 0;
        while k < idx.len() {
            let mut e = k;
            while e + 1 < idx.len() && v[idx[e + 1]] == v[idx[k]] {
                e += 1;
            }
            for &i in &idx[k..=e] {
                r[i] = (k + e) as f64 / 2.0;
            }
            k = e + 1;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let mean = (a.len() - 1) as f64 / 2.0;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - mean) * (y - mean)).sum();
    let va: f64 = ra.iter().map(|x| (x - mean).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mean).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn success_rises_with_measurements() {
    let m_list = vec![10, 25, 40, 55, 70, 85];
    let cfg = small_grid(120, 6, m_list.clone(), 20, 7);
    let grid = run_phase_grid(&cfg).unwrap();
    let rates: Vec<f64> = m_list.iter().map(|&m| grid.cell(Method::Nl1, 6, m).unwrap().rate()).collect();
    let ms: Vec<f64> = m_list.iter().map(|&m| m as f64).collect();
    let rho = spearman(&ms, &rates);
    assert!(rho >= 0.8, "Spearman {rho} for rates {rates:?}");
}

/// Probability that a random positive outranks a random negative, ties
/// counted half.
fn mann_whitney(scores: &[f64], mask: &[bool]) -> f64 {
    let pos: Vec<f64> = scores.iter().zip(mask).filter(|(_, &m)| m).map(|(s, _)| *s).collect();
    let mut neg: Vec<f64> = scores.iter().zip(mask).filter(|(_, &m)| !m).map(|(s, _)| *s).collect();
    neg.sort_by(f64::total_cmp);
    let mut wins = 0.0;
    for p in &pos {
        let below = neg.partition_point(|v| v < p);
        let not_above = neg.partition_point(|v| v <= p);
        wins += below as f64 + 0.5 * (not_above - below) as f64;
    }
    wins / (pos.len() * neg.len()) as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn roc_area_matches_rank_statistic(len in 2usize..300, levels in 2u32..50, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mask: Vec<bool> = (0..len).map(|_| rng.random_bool(0.3)).collect();
        mask[0] = true;
        mask[1] = false;
        // coarse levels force ties
        let scores: Vec<f64> = mask
            .iter()
            .map(|&m| (rng.random_range(0..levels) + if m { levels / 3 } else { 0 }) as f64 / levels as f64)
            .collect();
        let mut thresholds = scores.clone();
        thresholds.push(-1.0);
        let pts = roc_eval_slice(&scores, &mask, &thresholds).unwrap();
        prop_assert!((roc_auc(&pts) - mann_whitney(&scores, &mask)).abs() <= 1e-9);
    }
}
