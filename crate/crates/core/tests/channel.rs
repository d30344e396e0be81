use proptest::prelude::*;
use v2xbench::channel::*;
use v2xbench::rng;
use v2xbench::topology::*;

fn snapshot(seed: u64, l: usize, m: usize, dl: usize) -> TopologySnapshot {
    generate_initial_topology(&HighwayConfig::default(), l, m, DistanceLevel::ALL[dl % 3], seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gains_positive_and_finite(seed in any::<u64>(), l in 1usize..7, m in 1usize..5, dl in 0usize..3, fast in any::<bool>()) {
        let snap = snapshot(seed, l, m, dl);
        let p = ChannelParams::default();
        let mut r = rng::seeded(seed, 42);
        let shadow = ShadowState::draw(l, m, &p, &mut r);
        let mode = if fast { FadingMode::Fast } else { FadingMode::None };
        let g = realize::<f64>(&snap, &p, &shadow, mode, &mut r);
        prop_assert!(g.all_positive_finite());
        prop_assert_eq!(g.direct.len(), l * m);
        prop_assert_eq!(g.cross.len(), l * l * m);
        prop_assert_eq!(g.to_bs.len(), l * m);
        prop_assert_eq!(g.from_v2i.len(), l * m);
        prop_assert_eq!(g.v2i.len(), m);
    }

    #[test]
    fn nff_constant_across_subchannels(seed in any::<u64>(), l in 1usize..6, m in 2usize..5) {
        let snap = snapshot(seed, l, m, 1);
        let p = ChannelParams::default();
        let mut r = rng::seeded(seed, 1);
        let shadow = ShadowState::draw(l, m, &p, &mut r);
        let g = realize::<f64>(&snap, &p, &shadow, FadingMode::None, &mut r);
        for i in 0..l {
            for k in 1..m {
                prop_assert_eq!(g.g_direct(i, k), g.g_direct(i, 0));
                prop_assert_eq!(g.g_to_bs(i, k), g.g_to_bs(i, 0));
                for j in 0..l {
                    prop_assert_eq!(g.g_cross(j, i, k), g.g_cross(j, i, 0));
                }
            }
        }
    }

    #[test]
    fn moving_receiver_away_never_raises_gain(seed in any::<u64>(), shift in 1.0f64..400.0) {
        let snap = snapshot(seed, 2, 2, 1);
        let p = ChannelParams::default();
        let shadow = ShadowState::draw(2, 2, &p, &mut rng::seeded(seed, 3));
        let before = large_scale_gains::<f64>(&snap, &p, &shadow);
        let mut far = snap.clone();
        let tx = far.vehicles[0].x;
        let rx = &mut far.vehicles[1];
        rx.x = if rx.x >= tx { rx.x + shift } else { rx.x - shift };
        let after = large_scale_gains::<f64>(&far, &p, &shadow);
        prop_assert!(after.direct(0) <= before.direct(0));
    }

    #[test]
    fn path_loss_monotone(d in 0.0f64..3000.0, step in 0.0f64..500.0, f in 1.0f64..6.0) {
        prop_assert!(path_loss_v2v(d + step, f) >= path_loss_v2v(d, f));
        prop_assert!(path_loss_v2i(d + step) >= path_loss_v2i(d));
    }
}

#[test]
fn fading_has_unit_mean() {
    let mut r = rng::seeded(2024, 11);
    let n = 200_000;
    let mean = (0..n).map(|_| fast_fading::<f64>(&mut r)).sum::<f64>() / n as f64;
    assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
}
