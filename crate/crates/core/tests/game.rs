use proptest::prelude::*;
use rand::Rng as _;
use v2xbench::channel::{ChannelParams, ChannelRealization};
use v2xbench::game::*;
use v2xbench::rng;
use v2xbench::topology::{generate_initial_topology, DistanceLevel, HighwayConfig};

fn realization(l: usize, m: usize, seed: u64) -> ChannelRealization<f64> {
    let mut r = rng::seeded(seed, 77);
    let mut draw = |n: usize| (0..n).map(|_| 10f64.powf(r.random_range(-14.0..-6.0))).collect::<Vec<_>>();
    let direct = draw(l * m);
    let mut cross = draw(l * l * m);
    for i in 0..l {
        for k in 0..m {
            cross[(i * l + i) * m + k] = direct[i * m + k];
        }
    }
    ChannelRealization { num_v2v: l, num_v2i: m, direct, cross, to_bs: draw(l * m), from_v2i: draw(l * m), v2i: draw(m) }
}

fn joint(l: usize, m: usize, seed: u64) -> Vec<Action> {
    let mut r = rng::seeded(seed, 78);
    (0..l).map(|_| Action { subchannel: r.random_range(0..m), power: r.random_range(0..4) }).collect()
}

fn powers() -> Powers<f64> {
    Powers::from_params(&ChannelParams::default())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn interference_matches_pairwise_sum(seed in any::<u64>(), l in 1usize..9, m in 1usize..5) {
        let g = realization(l, m, seed);
        let a = joint(l, m, seed);
        let p = powers();
        let fast = interference(&a, &g, &p);
        for i in 0..l {
            for k in 0..m {
                let mut brute = p.v2i * g.from_v2i[i * m + k];
                for j in 0..l {
                    if j != i && a[j].subchannel == k {
                        brute += p.v2v[a[j].power] * g.cross[(j * l + i) * m + k];
                    }
                }
                let got = fast[i * m + k];
                prop_assert!((got - brute).abs() <= 1e-12 * brute.abs(), "{got} vs {brute}");
            }
        }
        let total: f64 = fast.iter().sum();
        let mut brute_total = 0.0;
        for i in 0..l {
            for k in 0..m {
                brute_total += p.v2i * g.from_v2i[i * m + k];
                for j in (0..l).filter(|&j| j != i && a[j].subchannel == k) {
                    brute_total += p.v2v[a[j].power] * g.cross[(j * l + i) * m + k];
                }
            }
        }
        prop_assert!((total - brute_total).abs() <= 1e-12 * brute_total);
    }

    #[test]
    fn silencing_one_agent_never_hurts_others(seed in any::<u64>(), l in 2usize..9, m in 1usize..5, victim in 0usize..8) {
        let g = realization(l, m, seed);
        let p = powers();
        let a = joint(l, m, seed);
        let k = victim % l;
        let mut quiet = a.clone();
        quiet[k].power = p.num_levels() - 1;
        let (before, _) = sinr_v2v(&a, &g, &p);
        let (after, _) = sinr_v2v(&quiet, &g, &p);
        for i in (0..l).filter(|&i| i != k) {
            prop_assert!(after[i] >= before[i]);
        }
        let v2i_before = sinr_v2i(&a, &g, &p);
        let v2i_after = sinr_v2i(&quiet, &g, &p);
        for (x, y) in v2i_after.iter().zip(&v2i_before) {
            prop_assert!(x >= y);
        }
    }

    #[test]
    fn queue_safety(rates in prop::collection::vec(prop::collection::vec(0.0f64..3000.0, 3), 1..60)) {
        let mut q = QueueState::<f64>::new(3);
        prop_assert!(q.q.iter().all(|&x| x == 1.0));
        let mut prev = q.q.clone();
        for (t, r) in rates.iter().enumerate() {
            q.step(r, 1e-3);
            prop_assert!(q.q.iter().all(|&x| x >= 0.0));
            if t == 0 {
                prop_assert!(q.q.iter().all(|&x| x == 1.0));
            } else {
                prop_assert!(q.q.iter().zip(&prev).all(|(a, b)| a <= b));
            }
            prev.clone_from(&q.q);
        }
    }
}

fn topo(seed: u64) -> v2xbench::topology::TopologySnapshot {
    generate_initial_topology(&HighwayConfig::default(), 4, 4, DistanceLevel::Close, seed).unwrap()
}

#[test]
fn env_queues_stay_safe_in_episodes() {
    for task in [Task::SigSlNff, Task::SigSlFf, Task::Posig] {
        let mut env = Env::new(EnvConfig::new(task), TopologySource::Fixed(topo(1)), 5).unwrap();
        let mut policy = RandomPolicy::new(9);
        let mut actions = Vec::new();
        for _ in 0..5 {
            env.reset().unwrap();
            assert!(env.queue().q.iter().all(|&q| q == 1.0));
            let mut prev = env.queue().q.clone();
            while !env.is_done() {
                policy.act(&env, &mut actions);
                let out = env.step(&actions).unwrap();
                assert!(out.reward.is_finite());
                let q = &env.queue().q;
                assert!(q.iter().zip(&prev).all(|(a, b)| *a >= 0.0 && a <= b));
                prev.clone_from(q);
            }
            assert_eq!(env.t(), env.horizon());
        }
    }
}

#[test]
fn nff_step_depends_only_on_state_and_action() {
    let cfg = EnvConfig::new(Task::SigSlNff);
    let mut a = Env::new(cfg.clone(), TopologySource::Fixed(topo(3)), 1).unwrap();
    let mut b = Env::new(cfg, TopologySource::Fixed(topo(3)), 999).unwrap();
    let mut policy = RandomPolicy::new(4);
    let mut actions = Vec::new();
    while !a.is_done() {
        policy.act(&a, &mut actions);
        assert_eq!(a.step(&actions).unwrap(), b.step(&actions).unwrap());
        assert_eq!(a.queue(), b.queue());
    }
    assert!(b.is_done());
}

#[test]
fn reward_is_common_and_matches_peek() {
    let mut env = Env::new(EnvConfig::new(Task::SigSlFf), TopologySource::Fixed(topo(8)), 2).unwrap();
    let mut policy = RandomPolicy::new(1);
    let mut actions = Vec::new();
    while !env.is_done() {
        policy.act(&env, &mut actions);
        let peek = env.peek_reward(&actions);
        let out = env.step(&actions).unwrap();
        assert_eq!(peek.to_bits(), out.reward.to_bits());
    }
}
