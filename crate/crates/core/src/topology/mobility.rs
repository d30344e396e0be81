use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::{HighwayConfig, TopologySnapshot};
use crate::rng::Rng;

/// A group of vehicles that moves and changes lanes together: a V2V pair
/// or a single V2I vehicle.
#[derive(Debug, Clone)]
struct Unit {
    members: Vec<usize>,
}

fn units(snapshot: &TopologySnapshot) -> Vec<Unit> {
    let l = snapshot.num_v2v;
    let mut out: Vec<Unit> = (0..l).map(|i| Unit { members: vec![2 * i, 2 * i + 1] }).collect();
    out.extend((0..snapshot.num_v2i).map(|m| Unit { members: vec![2 * l + m] }));
    out
}

/// Advances every vehicle by one control interval.
///
/// Each unit's speed follows a clamped Gaussian random walk around the
/// nominal speed. A vehicle never closes within `min_gap` of the vehicle
/// ahead in its lane (positions are capped against the leader's previous
/// position, which only moves forward). Units leaving the road re-enter at
/// the opposite end of the same carriageway when there is room; otherwise
/// they wait at the exit boundary. Lane changes move a whole unit to an
/// adjacent lane of the same direction and are skipped when they would
/// violate `min_gap`.
pub fn step_mobility(snapshot: &TopologySnapshot, config: &HighwayConfig, dt: f64, rng: &mut Rng) -> TopologySnapshot {
    let mut next = snapshot.clone();
    if dt == 0.0 {
        return next;
    }
    let params = config.mobility;
    let nominal = config.nominal_speed();
    let sigma = params.speed_noise * nominal;
    let (vmin, vmax) = (params.min_speed_ratio * nominal, params.max_speed_ratio * nominal);
    let groups = units(snapshot);

    for unit in &groups {
        let z: f64 = StandardNormal.sample(rng);
        let v = (snapshot.vehicles[unit.members[0]].speed + sigma * z).clamp(vmin, vmax);
        for &k in &unit.members {
            next.vehicles[k].speed = v;
        }
    }

    let gap = config.min_gap;
    let old = &snapshot.vehicles;
    for k in 0..old.len() {
        let me = &old[k];
        let dir = config.direction(me.lane);
        let along = me.x * dir;
        let mut target = along + next.vehicles[k].speed * dt;
        let leader = old
            .iter()
            .enumerate()
            .filter(|(j, o)| *j != k && o.lane == me.lane && o.x * dir > along)
            .map(|(_, o)| o.x * dir)
            .fold(f64::INFINITY, f64::min);
        if leader.is_finite() {
            target = target.min(leader - gap);
        }
        next.vehicles[k].x = target.max(along) * dir;
    }

    for unit in &groups {
        let front = unit.members.iter().copied().max_by(|&a, &b| {
            let dir = config.direction(next.vehicles[a].lane);
            (next.vehicles[a].x * dir).total_cmp(&(next.vehicles[b].x * dir))
        });
        let front = front.expect("non-empty unit");
        let lane = next.vehicles[front].lane;
        let dir = config.direction(lane);
        let exit = if dir > 0.0 { config.road_length } else { 0.0 };
        let overflow = (next.vehicles[front].x - exit) * dir;
        if overflow <= 0.0 {
            continue;
        }
        reenter_or_wait(&mut next, config, unit, lane, overflow);
    }

    if params.lane_change_prob > 0.0 {
        for unit in &groups {
            if rng.random::<f64>() >= params.lane_change_prob {
                continue;
            }
            let lane = next.vehicles[unit.members[0]].lane;
            let per_dir = config.lanes_per_direction;
            let base = if lane < per_dir { 0 } else { per_dir };
            let offset = lane - base;
            let mut options = Vec::with_capacity(2);
            if offset > 0 {
                options.push(lane - 1);
            }
            if offset + 1 < per_dir {
                options.push(lane + 1);
            }
            if options.is_empty() {
                continue;
            }
            let target = options[rng.random_range(0..options.len())];
            let xs: Vec<f64> = unit.members.iter().map(|&k| next.vehicles[k].x).collect();
            if lane_has_room(&next, target, &xs, &unit.members, gap) {
                for &k in &unit.members {
                    next.vehicles[k].lane = target;
                    next.vehicles[k].y = config.lane_y(target);
                }
            }
        }
    }
    next
}

fn lane_has_room(snapshot: &TopologySnapshot, lane: usize, xs: &[f64], exclude: &[usize], gap: f64) -> bool {
    snapshot
        .vehicles
        .iter()
        .enumerate()
        .filter(|(j, v)| v.lane == lane && !exclude.contains(j))
        .all(|(_, v)| xs.iter().all(|x| (v.x - x).abs() >= gap))
}

fn reenter_or_wait(next: &mut TopologySnapshot, config: &HighwayConfig, unit: &Unit, lane: usize, overflow: f64) {
    let dir = config.direction(lane);
    let entry = if dir > 0.0 { 0.0 } else { config.road_length };
    let exit = config.road_length - entry;
    // Offsets of each member behind the front, measured along travel.
    let front_along = unit.members.iter().map(|&k| next.vehicles[k].x * dir).fold(f64::NEG_INFINITY, f64::max);
    let rear_along = unit.members.iter().map(|&k| next.vehicles[k].x * dir).fold(f64::INFINITY, f64::min);
    let span = front_along - rear_along;
    let rear_pos = overflow.min(config.road_length - span).max(0.0);
    let placed: Vec<f64> =
        unit.members.iter().map(|&k| entry + dir * (rear_pos + (next.vehicles[k].x * dir - rear_along))).collect();

    let per_dir = config.lanes_per_direction;
    let base = if lane < per_dir { 0 } else { per_dir };
    let candidates = std::iter::once(lane).chain((base..base + per_dir).filter(|&ln| ln != lane));
    for cand in candidates {
        if lane_has_room(next, cand, &placed, &unit.members, config.min_gap) {
            for (&k, &x) in unit.members.iter().zip(&placed) {
                let v = &mut next.vehicles[k];
                v.x = x.clamp(0.0, config.road_length);
                v.lane = cand;
                v.y = config.lane_y(cand);
            }
            return;
        }
    }
    // No room at the entry: hold the unit so its front sits on the exit line.
    let shift = overflow;
    for &k in &unit.members {
        let v = &mut next.vehicles[k];
        v.x = (v.x - dir * shift).clamp(0.0, config.road_length);
    }
    debug_assert!(unit.members.iter().any(|&k| (next.vehicles[k].x - exit).abs() < 1e-6));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::topology::{generate_initial_topology, DensityLevel, DistanceLevel, MobilityParams, Point2, Role, Vehicle};

    fn lone_vehicle(speed_kmh: f64) -> (TopologySnapshot, HighwayConfig) {
        let mut cfg = HighwayConfig::for_level(DensityLevel::Medium);
        cfg.speed_kmh = speed_kmh;
        cfg.custom_density = true;
        cfg.mobility = MobilityParams { speed_noise: 0.0, lane_change_prob: 0.0, ..Default::default() };
        let v = |id, x, role| Vehicle { id, x, y: cfg.lane_y(0), lane: 0, speed: speed_kmh / 3.6, role };
        let snap = TopologySnapshot {
            vehicles: vec![v(0, 100.0, Role::V2vTx(0)), v(1, 150.0, Role::V2vRx(0))],
            num_v2v: 1,
            num_v2i: 0,
            bs_position: Point2 { x: 1000.0, y: -35.0 },
            sample_id: 0,
            density: 123.0,
            distance_level: DistanceLevel::Mid,
        };
        (snap, cfg)
    }

    #[test]
    fn constant_speed_advance() {
        let (snap, cfg) = lone_vehicle(70.0);
        let mut r = rng::seeded(0, 0);
        let next = step_mobility(&snap, &cfg, 0.1, &mut r);
        let dx = next.vehicles[0].x - snap.vehicles[0].x;
        assert!((dx - 70.0 / 3.6 * 0.1).abs() < 1e-12);
        assert!((dx - 1.944).abs() < 1e-3);
    }

    #[test]
    fn zero_dt_is_identity() {
        let cfg = HighwayConfig::default();
        let snap = generate_initial_topology(&cfg, 4, 4, DistanceLevel::Mid, 9).unwrap();
        let mut r = rng::seeded(0, 0);
        assert_eq!(step_mobility(&snap, &cfg, 0.0, &mut r), snap);
    }

    #[test]
    fn long_rollouts_conserve_invariants() {
        for level in DensityLevel::ALL {
            let cfg = HighwayConfig::for_level(level);
            let mut snap = generate_initial_topology(&cfg, 4, 4, DistanceLevel::Far, 21).unwrap();
            let mut r = rng::seeded(21, 9);
            for step in 0..10_000 {
                snap = step_mobility(&snap, &cfg, 0.1, &mut r);
                if step % 97 == 0 {
                    snap.validate(&cfg).unwrap_or_else(|e| panic!("{level:?} step {step}: {e}"));
                }
            }
            snap.validate(&cfg).unwrap();
            assert_eq!(snap.vehicles.len(), 12);
        }
    }

    #[test]
    fn wrap_keeps_vehicle_on_road() {
        let (mut snap, cfg) = lone_vehicle(250.0);
        snap.vehicles[0].x = 1990.0;
        snap.vehicles[1].x = 1999.0;
        let mut r = rng::seeded(0, 0);
        let next = step_mobility(&snap, &cfg, 0.1, &mut r);
        next.validate(&cfg).unwrap();
        assert!(next.vehicles[1].x < 100.0, "rx re-entered: {:?}", next.vehicles);
        assert!(next.vehicles[1].x > next.vehicles[0].x);
    }
}
