use proptest::prelude::*;
use rand::Rng as _;
use v2xbench::game::{EnvConfig, Task, TopologySource};
use v2xbench::marl::*;
use v2xbench::oracle::{topology_bounds, BoundsSettings};
use v2xbench::rng;
use v2xbench::topology::{generate_initial_topology, DistanceLevel, HighwayConfig};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn vdn_is_additive(qs in prop::collection::vec(-50.0f32..50.0, 12), shift in -5.0f32..5.0, agent in 0usize..4) {
        let vdn = VdnMixer { num_agents: 4 };
        let tot = vdn.forward(&qs, &[], 3, false).unwrap();
        for (b, row) in qs.chunks(4).enumerate() {
            prop_assert_eq!(tot[b], row.iter().sum::<f32>());
        }
        let mut shifted = qs.clone();
        for row in shifted.chunks_mut(4) {
            row[agent] += shift;
        }
        let moved = vdn.forward(&shifted, &[], 3, false).unwrap();
        for (a, b) in moved.iter().zip(&tot) {
            prop_assert!((a - b - shift).abs() <= 1e-4 * (1.0 + b.abs()));
        }
    }
}

#[test]
fn qmix_is_monotone_at_random_probes() {
    let (n, state_dim) = (4, 6);
    let mut r = rng::seeded(17, 0);
    let mut mixer = QmixMixer::new(n, state_dim, 8, 1e-3, &mut r);
    let h = 1e-2f32;
    for _ in 0..100 {
        let qs: Vec<f32> = (0..n).map(|_| r.random_range(-10.0..10.0)).collect();
        let s: Vec<f32> = (0..state_dim).map(|_| r.random_range(-2.0..2.0)).collect();
        let base = mixer.forward(&qs, &s, 1, false).unwrap()[0];
        let mut dq = vec![0.0; n];
        mixer.backward(&qs, &s, 1, &[1.0], &mut dq).unwrap();
        for i in 0..n {
            let mut up = qs.clone();
            up[i] += h;
            let fd = (mixer.forward(&up, &s, 1, false).unwrap()[0] - base) / h;
            assert!(fd >= -1e-8, "finite difference {fd} for agent {i}");
            assert!(dq[i] >= 0.0);
        }
    }
}

fn tiny_setup(algorithm: Algorithm, seed: u64) -> TrainSetup {
    let topo = generate_initial_topology(&HighwayConfig::default(), 2, 4, DistanceLevel::Mid, 4).unwrap();
    let env = EnvConfig::new(Task::Nfig);
    let bounds = topology_bounds(&env, &topo, &BoundsSettings::default()).unwrap();
    let hyper = Hyperparameters {
        hidden: 16,
        episodes: 150,
        anneal_episodes: 100,
        warmup: 16,
        batch_size: 16,
        mixer_embed: 8,
        ..Hyperparameters::defaults(algorithm, Task::Nfig)
    };
    TrainSetup {
        algorithm,
        hyper,
        env,
        source: TopologySource::Fixed(topo.clone()),
        eval_topologies: vec![topo; 9],
        bounds,
        seed,
        evaluations: 100,
    }
}

fn strip(records: &[EvalRecord]) -> Vec<EvalRecord> {
    records.iter().map(|r| EvalRecord { elapsed_s: 0.0, ..r.clone() }).collect()
}

#[test]
fn every_algorithm_emits_hundred_nine_episode_records() {
    for algo in Algorithm::ALL {
        let out = train(&tiny_setup(algo, 3)).unwrap();
        assert_eq!(out.records.len(), 100, "{algo}");
        for (k, r) in out.records.iter().enumerate() {
            assert_eq!(r.eval_index, k);
            assert_eq!(r.returns.len(), 9);
            assert!(r.normalized_return <= 1.0 + 1e-9, "{algo}: {}", r.normalized_return);
        }
        assert_eq!(out.records.last().unwrap().episode, 150);
        assert_eq!(out.env_steps, 150);
    }
}

#[test]
fn identical_seeds_reproduce_records() {
    for algo in [Algorithm::Qmix, Algorithm::Mappo, Algorithm::Ia2c, Algorithm::HysIdqn] {
        let a = train(&tiny_setup(algo, 5)).unwrap();
        let b = train(&tiny_setup(algo, 5)).unwrap();
        assert_eq!(strip(&a.records), strip(&b.records), "{algo}");
        let pa = a.learner.networks();
        let pb = b.learner.networks();
        assert_eq!(pa.len(), pb.len());
        for ((na, a), (nb, b)) in pa.iter().zip(&pb) {
            assert_eq!(na, nb);
            assert!(a.params().iter().zip(b.params()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}

#[test]
fn eval_points_cover_the_budget() {
    for budget in [1, 7, 99, 100, 101, 1000, 12345] {
        let p = eval_points(budget, 100);
        assert_eq!(p.len(), 100);
        assert_eq!(*p.last().unwrap(), budget);
        assert!(p.windows(2).all(|w| w[0] <= w[1]));
    }
}
