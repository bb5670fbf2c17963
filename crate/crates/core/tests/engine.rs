use seps::engine::{eps_objective_rewards, kl_within_bound, train, AlgoConfig, Algorithm, Branch};
use seps::env::{seeded_rng, TabularCmdp};
use seps::estimation::collect;
use seps::policy::Policy;
use seps::SoftmaxPolicy;

fn short(algorithm: Algorithm) -> AlgoConfig {
    let mut algo = AlgoConfig::new(algorithm).with_limits(Some(0.8), Some(0.1));
    algo.epochs = 4;
    algo.steps_per_epoch = 300;
    algo
}

fn silent_env() -> TabularCmdp {
    let zeros = vec![vec![vec![0.0; 2]; 2]; 2];
    let moves = vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]; 2];
    TabularCmdp::new(moves, zeros.clone(), zeros.clone(), vec![zeros], vec![1.0, 0.0], vec![false; 2], 0.9, 10, vec![0.0, 1.0])
        .unwrap()
}

#[test]
fn zero_rewards_leave_the_policy_unchanged() {
    let start = SoftmaxPolicy::from_logit_table(&[vec![0.3, -0.2], vec![1.0, 0.0]]).unwrap();
    let mut algo = short(Algorithm::Hum);
    algo.steps_per_epoch = 100;
    let out = train(&silent_env(), start.clone(), &algo, 0).unwrap();
    assert_eq!(out.policy.params(), start.params());
    assert!(out.reports.iter().all(|r| r.step_norm == 0.0 && r.kl == 0.0));
    assert!(out.halted.is_none());
}

#[test]
fn same_seed_same_trajectory() {
    let env = TabularCmdp::chain_fixture();
    let algo = short(Algorithm::Seps);
    let a = train(&env, SoftmaxPolicy::uniform(5, 2), &algo, 7).unwrap();
    let b = train(&env, SoftmaxPolicy::uniform(5, 2), &algo, 7).unwrap();
    assert_eq!(a.reports, b.reports);
    assert_eq!(a.policy.params(), b.policy.params());
    let c = train(&env, SoftmaxPolicy::uniform(5, 2), &algo, 8).unwrap();
    assert_ne!(a.reports, c.reports);
}

#[test]
fn unconstrained_variants_never_see_surpluses() {
    let env = TabularCmdp::chain_fixture();
    for algorithm in [Algorithm::Agt, Algorithm::Hum, Algorithm::Eps] {
        let out = train(&env, SoftmaxPolicy::uniform(5, 2), &short(algorithm), 1).unwrap();
        for r in &out.reports {
            assert_eq!(r.surpluses, [None, None]);
            assert_eq!(r.branch, Branch::Feasible);
        }
    }
    let out = train(&env, SoftmaxPolicy::uniform(5, 2), &short(Algorithm::SepsNoC0), 1).unwrap();
    assert!(out.reports.iter().all(|r| r.surpluses[0].is_none() && r.surpluses[1].is_some()));
}

#[test]
fn accepted_steps_respect_the_kl_bound() {
    let env = TabularCmdp::chain_fixture();
    let algo = short(Algorithm::Seps);
    let out = train(&env, SoftmaxPolicy::uniform(5, 2), &algo, 2).unwrap();
    assert!(kl_within_bound(&out.reports, &algo));
    for r in out.reports.iter().filter(|r| r.accepted) {
        assert!(r.kl <= algo.kl_accept_factor * algo.delta);
    }
}

#[test]
fn eps_without_reconciliation_is_the_task_reward() {
    let env = TabularCmdp::chain_fixture();
    let policy = SoftmaxPolicy::from_logit_table(&vec![vec![0.4, -0.4]; 5]).unwrap();
    let batch = collect(&env, &policy, 200, &mut seeded_rng(3)).unwrap();
    assert_eq!(eps_objective_rewards(&batch, &policy, 0.0, 0.5).unwrap(), batch.reward_a);
    let shaped = eps_objective_rewards(&batch, &policy, 2.0, 0.0).unwrap();
    for t in 0..batch.len() {
        assert!((shaped[t] - batch.reward_a[t] - 2.0 * batch.reward_u[t]).abs() < 1e-12);
    }
}

#[test]
fn missing_limit_is_a_config_error() {
    let algo = AlgoConfig::new(Algorithm::Seps).with_limits(Some(0.0), None);
    let err = train(&TabularCmdp::chain_fixture(), SoftmaxPolicy::uniform(5, 2), &algo, 0).unwrap_err();
    assert!(matches!(err, seps::Error::Config(_)));
}
