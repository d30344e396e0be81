//! Highway vehicle topologies: initial placement, mobility and datasets.

mod dataset;
mod mobility;
mod placement;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dataset::{
    generate_dataset, load_dataset, save_dataset, test_topologies, Dataset, DatasetSpec, SamplingMode, TopologySampler,
};
pub use mobility::step_mobility;
pub use placement::{generate_initial_topology, generate_initial_topology_with_rng};

/// Offset added to test-topology sample ids so they never collide with
/// training samples.
pub const TEST_ID_BASE: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

/// The three density/speed pairs of the highway scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DensityLevel {
    Low,
    Medium,
    High,
}

impl DensityLevel {
    pub const ALL: [DensityLevel; 3] = [DensityLevel::Low, DensityLevel::Medium, DensityLevel::High];

    /// Vehicles per km.
    pub fn density(self) -> f64 {
        match self {
            DensityLevel::Low => 35.0,
            DensityLevel::Medium => 123.0,
            DensityLevel::High => 500.0,
        }
    }

    /// Nominal speed in km/h.
    pub fn speed_kmh(self) -> f64 {
        match self {
            DensityLevel::Low => 250.0,
            DensityLevel::Medium => 70.0,
            DensityLevel::High => 50.0,
        }
    }

    pub fn from_density(density: f64) -> Option<Self> {
        Self::ALL.into_iter().find(|l| (l.density() - density).abs() < 1e-9)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DistanceLevel {
    Close,
    Mid,
    Far,
}

impl DistanceLevel {
    pub const ALL: [DistanceLevel; 3] = [DistanceLevel::Close, DistanceLevel::Mid, DistanceLevel::Far];

    /// Target mean vehicle-to-BS distance in meters.
    pub fn target_distance(self) -> f64 {
        match self {
            DistanceLevel::Close => 100.0,
            DistanceLevel::Mid => 500.0,
            DistanceLevel::Far => 1000.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DistanceLevel::Close => "close",
            DistanceLevel::Mid => "mid",
            DistanceLevel::Far => "far",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.name() == s)
    }
}

/// Speed perturbation and lane-change behaviour of the mobility model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MobilityParams {
    /// Standard deviation of the per-step speed perturbation as a fraction
    /// of the nominal speed.
    pub speed_noise: f64,
    /// Speed is clamped to `[min_speed_ratio, max_speed_ratio] * nominal`.
    pub min_speed_ratio: f64,
    pub max_speed_ratio: f64,
    /// Probability of attempting a lane change per control interval.
    pub lane_change_prob: f64,
}

impl Default for MobilityParams {
    fn default() -> Self {
        MobilityParams { speed_noise: 0.05, min_speed_ratio: 0.8, max_speed_ratio: 1.2, lane_change_prob: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HighwayConfig {
    /// Meters.
    pub road_length: f64,
    pub lanes_per_direction: usize,
    /// Meters.
    pub lane_width: f64,
    pub bs_position: Point2,
    /// Vehicles per km.
    pub density: f64,
    /// Nominal speed, km/h.
    pub speed_kmh: f64,
    /// Minimum same-lane spacing, meters.
    pub min_gap: f64,
    /// Permits density/speed values outside the three scenario pairs.
    pub custom_density: bool,
    pub mobility: MobilityParams,
}

impl Default for HighwayConfig {
    fn default() -> Self {
        HighwayConfig::for_level(DensityLevel::Medium)
    }
}

impl HighwayConfig {
    pub fn for_level(level: DensityLevel) -> Self {
        HighwayConfig {
            road_length: 2000.0,
            lanes_per_direction: 3,
            lane_width: 4.0,
            bs_position: Point2 { x: 1000.0, y: -35.0 },
            density: level.density(),
            speed_kmh: level.speed_kmh(),
            min_gap: 2.5,
            custom_density: false,
            mobility: MobilityParams::default(),
        }
    }

    /// Same geometry with the density/speed pair of `level`.
    pub fn with_level(&self, level: DensityLevel) -> Self {
        HighwayConfig { density: level.density(), speed_kmh: level.speed_kmh(), ..self.clone() }
    }

    pub fn lane_count(&self) -> usize {
        2 * self.lanes_per_direction
    }

    /// Lateral coordinate of the lane center.
    pub fn lane_y(&self, lane: usize) -> f64 {
        (lane as f64 + 0.5) * self.lane_width
    }

    /// `+1.0` for lanes travelling toward `+x`, `-1.0` otherwise.
    pub fn direction(&self, lane: usize) -> f64 {
        if lane < self.lanes_per_direction {
            1.0
        } else {
            -1.0
        }
    }

    pub fn nominal_speed(&self) -> f64 {
        self.speed_kmh / 3.6
    }

    /// Mean Poisson spacing in meters.
    pub fn mean_spacing(&self) -> f64 {
        1000.0 / self.density
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.road_length > 0.0) {
            return Err(Error::Config("road_length must be positive".into()));
        }
        if !(self.min_gap > 0.0) {
            return Err(Error::Config("min_gap must be positive".into()));
        }
        if self.lanes_per_direction == 0 {
            return Err(Error::Config("lanes_per_direction must be at least 1".into()));
        }
        if !(self.density > 0.0) || !(self.speed_kmh > 0.0) {
            return Err(Error::Config("density and speed must be positive".into()));
        }
        if !self.custom_density {
            match DensityLevel::from_density(self.density) {
                Some(level) if (level.speed_kmh() - self.speed_kmh).abs() < 1e-9 => {}
                _ => {
                    return Err(Error::Config(format!(
                        "density {} veh/km with speed {} km/h is not one of the scenario pairs \
                         (35/250, 123/70, 500/50); set custom_density to override",
                        self.density, self.speed_kmh
                    )))
                }
            }
        }
        let m = &self.mobility;
        if m.speed_noise < 0.0
            || !(m.min_speed_ratio > 0.0)
            || m.max_speed_ratio < m.min_speed_ratio
            || !(0.0..=1.0).contains(&m.lane_change_prob)
        {
            return Err(Error::Config("invalid mobility parameters".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    V2vTx(usize),
    V2vRx(usize),
    V2i(usize),
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::V2vTx(_) => "v2v_tx",
            Role::V2vRx(_) => "v2v_rx",
            Role::V2i(_) => "v2i",
        }
    }

    pub fn link(self) -> usize {
        match self {
            Role::V2vTx(i) | Role::V2vRx(i) | Role::V2i(i) => i,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub id: usize,
    /// Meters along the road.
    pub x: f64,
    /// Lateral lane-center coordinate, meters.
    pub y: f64,
    pub lane: usize,
    /// m/s, always non-negative; direction follows the lane.
    pub speed: f64,
    pub role: Role,
}

/// Positions of all vehicles at one 100 ms sample.
///
/// Vehicles are stored as `[tx_0, rx_0, tx_1, rx_1, ..., v2i_0, ..., v2i_{M-1}]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologySnapshot {
    pub vehicles: Vec<Vehicle>,
    pub num_v2v: usize,
    pub num_v2i: usize,
    pub bs_position: Point2,
    pub sample_id: u64,
    /// Vehicles per km of the generating scenario.
    pub density: f64,
    pub distance_level: DistanceLevel,
}

impl TopologySnapshot {
    pub fn tx(&self, link: usize) -> &Vehicle {
        &self.vehicles[2 * link]
    }

    pub fn rx(&self, link: usize) -> &Vehicle {
        &self.vehicles[2 * link + 1]
    }

    pub fn v2i(&self, link: usize) -> &Vehicle {
        &self.vehicles[2 * self.num_v2v + link]
    }

    pub fn density_level(&self) -> Option<DensityLevel> {
        DensityLevel::from_density(self.density)
    }

    /// Label such as `123_mid`.
    pub fn label(&self) -> String {
        format!("{}_{}", self.density.round() as i64, self.distance_level.name())
    }

    /// Mean horizontal distance from all vehicles to the base station.
    pub fn mean_bs_distance(&self) -> f64 {
        let b = self.bs_position;
        let n = self.vehicles.len().max(1) as f64;
        self.vehicles.iter().map(|v| ((v.x - b.x).powi(2) + (v.y - b.y).powi(2)).sqrt()).sum::<f64>() / n
    }

    /// Checks the structural invariants: counts, roles, lanes, road bounds,
    /// same-lane gaps and pair orientation.
    pub fn validate(&self, config: &HighwayConfig) -> Result<()> {
        let l = self.num_v2v;
        let m = self.num_v2i;
        if self.vehicles.len() != 2 * l + m {
            return Err(Error::Config(format!(
                "snapshot {} holds {} vehicles, expected 2L+M = {}",
                self.sample_id,
                self.vehicles.len(),
                2 * l + m
            )));
        }
        for (k, v) in self.vehicles.iter().enumerate() {
            let expected = if k < 2 * l {
                if k % 2 == 0 {
                    Role::V2vTx(k / 2)
                } else {
                    Role::V2vRx(k / 2)
                }
            } else {
                Role::V2i(k - 2 * l)
            };
            if v.role != expected {
                return Err(Error::Config(format!(
                    "snapshot {}: vehicle {} has role {:?}, expected {:?}",
                    self.sample_id, k, v.role, expected
                )));
            }
            if v.lane >= config.lane_count() {
                return Err(Error::Config(format!("vehicle {} on invalid lane {}", v.id, v.lane)));
            }
            if !(0.0..=config.road_length).contains(&v.x) {
                return Err(Error::Config(format!("vehicle {} off road at x={}", v.id, v.x)));
            }
        }
        for i in 0..l {
            let (tx, rx) = (self.tx(i), self.rx(i));
            if tx.lane != rx.lane {
                return Err(Error::Config(format!("link {i}: tx and rx in different lanes")));
            }
            let ahead = (rx.x - tx.x) * config.direction(tx.lane);
            if !(ahead > 0.0) {
                return Err(Error::Config(format!("link {i}: rx not downstream of tx")));
            }
        }
        if let Some(gap) = min_same_lane_gap(&self.vehicles, config.lane_count()) {
            // Tolerance absorbs rounding in the mobility update.
            if gap < config.min_gap - 1e-9 {
                return Err(Error::Config(format!("same-lane gap {gap:.3} m below min_gap {}", config.min_gap)));
            }
        }
        Ok(())
    }
}

/// Smallest spacing between consecutive vehicles sharing a lane.
pub fn min_same_lane_gap(vehicles: &[Vehicle], lanes: usize) -> Option<f64> {
    let mut best: Option<f64> = None;
    for lane in 0..lanes {
        let mut xs: Vec<f64> = vehicles.iter().filter(|v| v.lane == lane).map(|v| v.x).collect();
        xs.sort_by(f64::total_cmp);
        for w in xs.windows(2) {
            let g = w[1] - w[0];
            best = Some(best.map_or(g, |b: f64| b.min(g)));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_pairs_validate() {
        for level in DensityLevel::ALL {
            HighwayConfig::for_level(level).validate().unwrap();
        }
        let mut cfg = HighwayConfig { speed_kmh: 250.0, ..HighwayConfig::default() };
        assert!(cfg.validate().is_err());
        cfg.custom_density = true;
        cfg.validate().unwrap();
        cfg.min_gap = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn lane_geometry() {
        let cfg = HighwayConfig::default();
        assert_eq!(cfg.lane_count(), 6);
        assert_eq!(cfg.direction(2), 1.0);
        assert_eq!(cfg.direction(3), -1.0);
        assert_eq!(cfg.lane_y(0), 2.0);
        assert_eq!(cfg.lane_y(5), 22.0);
    }
}
