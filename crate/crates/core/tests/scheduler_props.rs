use proptest::prelude::*;
use tactile_rig::config::DemoConfig;
use tactile_rig::scheduler::{Presentation, Scheduler, TrialLabel};

fn young() -> DemoConfig {
    DemoConfig::young()
}

proptest! {
    #[test]
    fn quotas_are_conserved(
        seed in any::<u64>(),
        n in 1usize..=10,
        presentations in 1u32..=12,
        training in 0u32..=5,
        index in 1u32..=5,
    ) {
        let mut cfg = DemoConfig::elderly();
        cfg.smposes.truncate(n);
        cfg.experiment.number_presentations = presentations;
        cfg.experiment.number_training_trials = training;
        cfg.experiment.training_index = index;
        let distances = cfg.distances();
        let mut s = Scheduler::new(&cfg.experiment, &distances, seed).unwrap();
        prop_assert_eq!(s.total_trials(), training + presentations * n as u32);

        let mut served = vec![0u32; n];
        let mut count = 0;
        let mut max_at_index = None;
        while let Some(plan) = s.next_trial() {
            count += 1;
            let i = distances.iter().position(|d| *d == plan.distance).unwrap();
            match plan.label {
                TrialLabel::Training => {
                    prop_assert_eq!(plan.index, count);
                    if plan.index == index {
                        max_at_index = Some(plan.distance);
                    }
                }
                TrialLabel::Trial => {
                    prop_assert_eq!(plan.index, count - training);
                    served[i] += 1;
                }
            }
            for (q, done) in s.remaining_quota().iter().zip(&served) {
                prop_assert_eq!(q.presented, *done);
                prop_assert_eq!(q.presented + q.remaining, presentations);
            }
        }
        prop_assert_eq!(count, s.total_trials());
        prop_assert!(served.iter().all(|&c| c == presentations));
        prop_assert!(s.remaining_quota().iter().all(|q| q.remaining == 0));
        if index <= training {
            let max = distances.iter().copied().fold(f64::MIN, f64::max);
            prop_assert_eq!(max_at_index, Some(max));
        }
    }

    #[test]
    fn same_seed_same_sequence(seed in any::<u64>()) {
        let cfg = young();
        let a: Vec<_> = Scheduler::new(&cfg.experiment, &cfg.distances(), seed).unwrap().collect();
        let b: Vec<_> = Scheduler::new(&cfg.experiment, &cfg.distances(), seed).unwrap().collect();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn first_real_trial_is_uniform() {
    let cfg = young();
    let distances = cfg.distances();
    let runs = 10_000u32;
    let mut counts = vec![0u32; distances.len()];
    for seed in 0..runs as u64 {
        let plan = Scheduler::new(&cfg.experiment, &distances, seed)
            .unwrap()
            .find(|p| p.label == TrialLabel::Trial)
            .unwrap();
        counts[distances.iter().position(|d| *d == plan.distance).unwrap()] += 1;
    }
    let p = 1.0 / distances.len() as f64;
    let mean = runs as f64 * p;
    let sigma = (runs as f64 * p * (1.0 - p)).sqrt();
    for (d, c) in distances.iter().zip(&counts) {
        assert!(
            (*c as f64 - mean).abs() <= 3.0 * sigma,
            "{d}: {c} vs {mean} ± {}",
            3.0 * sigma
        );
    }
}

#[test]
fn presentation_coin_is_fair() {
    let cfg = young();
    let mut two_first = 0u32;
    let mut total = 0u32;
    for seed in 0..1000u64 {
        for plan in Scheduler::new(&cfg.experiment, &cfg.distances(), seed).unwrap() {
            total += 1;
            two_first += (plan.presentation == Presentation::TwoPinsFirst) as u32;
        }
    }
    let mean = total as f64 / 2.0;
    let sigma = (total as f64 * 0.25).sqrt();
    assert!((two_first as f64 - mean).abs() <= 3.0 * sigma, "{two_first} of {total}");
}

#[test]
fn different_seeds_differ() {
    let cfg = young();
    let a: Vec<_> = Scheduler::new(&cfg.experiment, &cfg.distances(), 1).unwrap().collect();
    let b: Vec<_> = Scheduler::new(&cfg.experiment, &cfg.distances(), 2).unwrap().collect();
    assert_ne!(a, b);
}
