use proptest::prelude::*;
use seps::estimation::{discounted_return, gae_advantages, normalize};

/// `A_t = Σ_l (γλ)^l δ_{t+l}` summed directly up to the end of the segment.
fn quadratic_gae(r: &[f64], v: &[f64], nv: &[f64], dones: &[bool], ends: &[bool], g: f64, lam: f64) -> Vec<f64> {
    let n = r.len();
    let delta: Vec<f64> = (0..n).map(|t| r[t] + if dones[t] { 0.0 } else { g * nv[t] } - v[t]).collect();
    (0..n)
        .map(|t| {
            let mut total = 0.0;
            let mut w = 1.0;
            for k in t..n {
                total += w * delta[k];
                if ends[k] {
                    break;
                }
                w *= g * lam;
            }
            total
        })
        .collect()
}

fn segments(lengths: &[usize], terminal: &[bool]) -> (Vec<bool>, Vec<bool>) {
    let (mut dones, mut ends) = (Vec::new(), Vec::new());
    for (&len, &term) in lengths.iter().zip(terminal) {
        for i in 0..len {
            let last = i + 1 == len;
            ends.push(last);
            dones.push(last && term);
        }
    }
    (dones, ends)
}

#[test]
fn lambda_one_with_zero_values_is_reward_to_go() {
    let r = [1.0f64, 2.0, 3.0, 4.0];
    let z = [0.0; 4];
    let (dones, ends) = segments(&[4], &[true]);
    let adv = gae_advantages(&r, &z, &z, &dones, &ends, 0.5, 1.0).unwrap();
    for t in 0..4 {
        assert!((adv[t] - discounted_return(&r[t..], 0.5)).abs() < 1e-12);
    }
}

#[test]
fn lambda_zero_is_one_step_td_error() {
    let r = [1.0f64, -1.0, 0.5];
    let v = [0.2, 0.4, 0.6];
    let nv = [0.4, 0.6, 9.0];
    let (dones, ends) = segments(&[3], &[false]);
    let adv = gae_advantages(&r, &v, &nv, &dones, &ends, 0.9, 0.0).unwrap();
    for t in 0..3 {
        assert!((adv[t] - (r[t] + 0.9 * nv[t] - v[t])).abs() < 1e-12);
    }
}

#[test]
fn terminal_step_must_end_segment() {
    let z = [0.0; 2];
    assert!(gae_advantages(&z, &z, &z, &[true, false], &[false, true], 0.9, 0.9).is_err());
    assert!(gae_advantages(&z, &z, &z[..1], &[false, false], &[false, true], 0.9, 0.9).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn recursion_matches_direct_sum(
        lengths in proptest::collection::vec(1usize..12, 1..5),
        terminal in proptest::collection::vec(any::<bool>(), 5),
        seed in proptest::collection::vec(-2.0f64..2.0, 60 * 3),
        gamma in 0.5f64..1.0,
        lam in 0.0f64..=1.0,
    ) {
        let n: usize = lengths.iter().sum();
        let (dones, ends) = segments(&lengths, &terminal);
        let (r, rest) = seed.split_at(60);
        let (v, nv) = rest.split_at(60);
        let fast = gae_advantages(&r[..n], &v[..n], &nv[..n], &dones, &ends, gamma, lam).unwrap();
        let slow = quadratic_gae(&r[..n], &v[..n], &nv[..n], &dones, &ends, gamma, lam);
        for (a, b) in fast.iter().zip(&slow) {
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn normalize_gives_zero_mean_unit_variance(mut x in proptest::collection::vec(-50.0f64..50.0, 2..40)) {
        let spread = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - x.iter().cloned().fold(f64::INFINITY, f64::min);
        normalize(&mut x);
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        prop_assert!(mean.abs() <= 1e-10);
        if spread > 1e-6 {
            let var = x.iter().map(|v| v * v).sum::<f64>() / n;
            prop_assert!((var - 1.0).abs() <= 1e-10);
        }
    }
}
