use rand::seq::SliceRandom;
use rand_distr::{Distribution, Exp};

use super::{DistanceLevel, HighwayConfig, Role, TopologySnapshot, Vehicle};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

const POSITION_ATTEMPTS: usize = 200;
const ASSIGNMENT_ATTEMPTS: usize = 20;

/// Places `2L + M` vehicles by a 1-D Poisson process at one road end, pairs
/// the V2V links and shifts the cluster to the requested BS distance level.
pub fn generate_initial_topology(
    config: &HighwayConfig,
    num_v2v: usize,
    num_v2i: usize,
    distance_level: DistanceLevel,
    seed: u64,
) -> Result<TopologySnapshot> {
    let mut rng = rng::seeded(seed, rng::stream::TRAIN_DATASET);
    generate_initial_topology_with_rng(config, num_v2v, num_v2i, distance_level, &mut rng)
}

pub fn generate_initial_topology_with_rng(
    config: &HighwayConfig,
    num_v2v: usize,
    num_v2i: usize,
    distance_level: DistanceLevel,
    rng: &mut Rng,
) -> Result<TopologySnapshot> {
    config.validate()?;
    if num_v2v == 0 {
        return Err(Error::Config("at least one V2V link is required".into()));
    }
    let n = 2 * num_v2v + num_v2i;
    let spacing = config.mean_spacing();
    let scatter = scatter_distance(config, n);
    let slots_per_lane = (scatter / config.min_gap).floor() + 1.0;
    if (n as f64) > config.lane_count() as f64 * slots_per_lane {
        return Err(Error::Infeasible(format!(
            "{n} vehicles cannot keep a {} m gap on {} lanes within {scatter:.1} m",
            config.min_gap,
            config.lane_count()
        )));
    }

    let gaps = Exp::new(1.0 / spacing).expect("positive rate");
    for _ in 0..POSITION_ATTEMPTS {
        let mut xs = Vec::with_capacity(n);
        let mut x = 0.0;
        for _ in 0..n {
            x += gaps.sample(rng);
            xs.push(x);
        }
        if x > config.road_length {
            continue;
        }
        for _ in 0..ASSIGNMENT_ATTEMPTS {
            if let Some(mut vehicles) = assign_roles(&xs, num_v2v, num_v2i, config, rng) {
                let shift = distance_shift(&vehicles, config, distance_level.target_distance());
                for v in &mut vehicles {
                    v.x = (v.x + shift).clamp(0.0, config.road_length);
                }
                return Ok(TopologySnapshot {
                    vehicles,
                    num_v2v,
                    num_v2i,
                    bs_position: config.bs_position,
                    sample_id: 0,
                    density: config.density,
                    distance_level,
                });
            }
        }
    }
    Err(Error::Infeasible(format!(
        "no placement of {n} vehicles at {} veh/km satisfied min_gap {} m after {} attempts",
        config.density,
        config.min_gap,
        POSITION_ATTEMPTS * ASSIGNMENT_ATTEMPTS
    )))
}

/// Expected extent of the initial cluster: vehicle count times the mean
/// Poisson spacing, clamped to the road.
pub fn scatter_distance(config: &HighwayConfig, vehicles: usize) -> f64 {
    (vehicles as f64 * config.mean_spacing()).min(config.road_length)
}

fn fits(occupied: &[f64], x: f64, gap: f64) -> bool {
    occupied.iter().all(|o| (o - x).abs() >= gap)
}

fn assign_roles(xs: &[f64], num_v2v: usize, num_v2i: usize, config: &HighwayConfig, rng: &mut Rng) -> Option<Vec<Vehicle>> {
    let n = xs.len();
    let gap = config.min_gap;
    let mut free = vec![true; n];
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut lanes: Vec<Vec<f64>> = vec![Vec::new(); config.lane_count()];
    let mut lane_order: Vec<usize> = (0..config.lane_count()).collect();
    let speed = config.nominal_speed();
    let mut vehicles = Vec::with_capacity(n);

    for link in 0..num_v2v {
        let a = *order.iter().find(|&&k| free[k])?;
        free[a] = false;
        // Nearest free partner that keeps the safety gap.
        let b = (0..n)
            .filter(|&k| free[k] && (xs[k] - xs[a]).abs() >= gap)
            .min_by(|&p, &q| (xs[p] - xs[a]).abs().total_cmp(&(xs[q] - xs[a]).abs()))?;
        free[b] = false;
        lane_order.shuffle(rng);
        let lane = *lane_order.iter().find(|&&ln| fits(&lanes[ln], xs[a], gap) && fits(&lanes[ln], xs[b], gap))?;
        lanes[lane].push(xs[a]);
        lanes[lane].push(xs[b]);
        let (lo, hi) = if xs[a] < xs[b] { (xs[a], xs[b]) } else { (xs[b], xs[a]) };
        let (tx, rx) = if config.direction(lane) > 0.0 { (lo, hi) } else { (hi, lo) };
        let y = config.lane_y(lane);
        vehicles.push(Vehicle { id: 2 * link, x: tx, y, lane, speed, role: Role::V2vTx(link) });
        vehicles.push(Vehicle { id: 2 * link + 1, x: rx, y, lane, speed, role: Role::V2vRx(link) });
    }

    let singles: Vec<usize> = order.iter().copied().filter(|&k| free[k]).collect();
    debug_assert_eq!(singles.len(), num_v2i);
    for (m, &k) in singles.iter().enumerate() {
        lane_order.shuffle(rng);
        let lane = *lane_order.iter().find(|&&ln| fits(&lanes[ln], xs[k], gap))?;
        lanes[lane].push(xs[k]);
        vehicles.push(Vehicle { id: 2 * num_v2v + m, x: xs[k], y: config.lane_y(lane), lane, speed, role: Role::V2i(m) });
    }
    Some(vehicles)
}

/// Longitudinal shift that brings the mean horizontal vehicle-to-BS distance
/// to `target`, keeping the cluster on the road. The mean distance is convex
/// in the shift, so the feasible interval splits into a decreasing and an
/// increasing branch around its minimizer; the downstream branch is tried
/// first and the closest reachable value is used when the target lies
/// outside the achievable range.
pub(crate) fn distance_shift(vehicles: &[Vehicle], config: &HighwayConfig, target: f64) -> f64 {
    let min_x = vehicles.iter().map(|v| v.x).fold(f64::INFINITY, f64::min);
    let max_x = vehicles.iter().map(|v| v.x).fold(f64::NEG_INFINITY, f64::max);
    let lo = -min_x;
    let hi = config.road_length - max_x;
    let b = config.bs_position;
    let n = vehicles.len() as f64;
    let mean =
        |s: f64| -> f64 { vehicles.iter().map(|v| ((v.x + s - b.x).powi(2) + (v.y - b.y).powi(2)).sqrt()).sum::<f64>() / n };
    let slope = |s: f64| -> f64 {
        vehicles
            .iter()
            .map(|v| {
                let dx = v.x + s - b.x;
                let d = (dx * dx + (v.y - b.y).powi(2)).sqrt();
                if d > 0.0 {
                    dx / d
                } else {
                    0.0
                }
            })
            .sum::<f64>()
    };

    let argmin = if slope(lo) >= 0.0 {
        lo
    } else if slope(hi) <= 0.0 {
        hi
    } else {
        bisect(lo, hi, |s| slope(s) >= 0.0)
    };
    if target <= mean(argmin) {
        return argmin;
    }
    if mean(hi) >= target {
        return bisect(argmin, hi, |s| mean(s) >= target);
    }
    if mean(lo) >= target {
        // Decreasing branch: find the largest shift still at or above target.
        return bisect(lo, argmin, |s| mean(s) < target);
    }
    if mean(hi) >= mean(lo) {
        hi
    } else {
        lo
    }
}

/// Smallest point in `[lo, hi]` where the monotone predicate turns true.
fn bisect(mut lo: f64, mut hi: f64, pred: impl Fn(f64) -> bool) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-9 {
            break;
        }
    }
    hi
}
