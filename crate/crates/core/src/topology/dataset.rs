use std::fs;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{
    generate_initial_topology_with_rng, step_mobility, DensityLevel, DistanceLevel, HighwayConfig, Point2, Role,
    TopologySnapshot, Vehicle, TEST_ID_BASE,
};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

const MAGIC: &str = "# v2xbench-dataset v1";
const HEADER: [&str; 10] = ["sample_id", "vehicle_id", "role", "link_id", "x", "y", "lane", "speed", "density", "distance_level"];

/// Order in which training episodes draw topologies from a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    #[default]
    Random,
    Consecutive,
    /// Random start, then ten consecutive samples.
    Batches10,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSpec {
    pub n_samples: usize,
    pub sampling_mode: SamplingMode,
    pub seed: u64,
    /// Samples taken from each mobility rollout before a fresh initial
    /// topology is drawn.
    pub rollout_len: usize,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec { n_samples: 15_000, sampling_mode: SamplingMode::Random, seed: 0, rollout_len: 100 }
    }
}

impl DatasetSpec {
    /// Sample counts used for the 4-agent and 8/16-agent tasks.
    pub fn for_agents(num_v2v: usize) -> Self {
        let n_samples = if num_v2v <= 4 { 15_000 } else { 60_000 };
        DatasetSpec { n_samples, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::Config("n_samples must be positive".into()));
        }
        if self.rollout_len == 0 {
            return Err(Error::Config("rollout_len must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub num_v2v: usize,
    pub num_v2i: usize,
    pub bs_position: Point2,
    pub samples: Vec<TopologySnapshot>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Mobility rollouts evenly split across the three density/speed pairs,
/// sampled every 100 ms.
pub fn generate_dataset(config: &HighwayConfig, num_v2v: usize, num_v2i: usize, spec: &DatasetSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = rng::seeded(spec.seed, rng::stream::TRAIN_DATASET);
    let mut samples = Vec::with_capacity(spec.n_samples);
    let per_level = spec.n_samples / 3;
    let extra = spec.n_samples % 3;
    for (k, level) in DensityLevel::ALL.into_iter().enumerate() {
        let cfg = config.with_level(level);
        let target = per_level + usize::from(k < extra);
        let mut produced = 0;
        while produced < target {
            let dl = DistanceLevel::ALL[rng.random_range(0..3)];
            let mut snap = generate_initial_topology_with_rng(&cfg, num_v2v, num_v2i, dl, &mut rng)?;
            for _ in 0..spec.rollout_len.min(target - produced) {
                let mut s = snap.clone();
                s.sample_id = samples.len() as u64;
                samples.push(s);
                produced += 1;
                snap = step_mobility(&snap, &cfg, 0.1, &mut rng);
            }
        }
    }
    Ok(Dataset { num_v2v, num_v2i, bs_position: config.bs_position, samples })
}

/// The 3x3 grid of density levels by BS distance levels, ordered density
/// major then close/mid/far. Drawn from a stream disjoint from training
/// datasets.
pub fn test_topologies(config: &HighwayConfig, num_v2v: usize, num_v2i: usize, seed: u64) -> Result<Vec<TopologySnapshot>> {
    let mut rng = rng::seeded(seed, rng::stream::TEST_TOPOLOGIES);
    let mut out = Vec::with_capacity(9);
    for level in DensityLevel::ALL {
        let cfg = config.with_level(level);
        for dl in DistanceLevel::ALL {
            let mut snap = generate_initial_topology_with_rng(&cfg, num_v2v, num_v2i, dl, &mut rng)?;
            snap.sample_id = TEST_ID_BASE + out.len() as u64;
            out.push(snap);
        }
    }
    Ok(out)
}

/// Draws dataset indices for successive training episodes.
#[derive(Debug, Clone)]
pub struct TopologySampler {
    mode: SamplingMode,
    cursor: usize,
    remaining_in_batch: usize,
}

impl TopologySampler {
    pub fn new(mode: SamplingMode) -> Self {
        TopologySampler { mode, cursor: 0, remaining_in_batch: 0 }
    }

    pub fn next_index(&mut self, len: usize, rng: &mut Rng) -> usize {
        assert!(len > 0);
        match self.mode {
            SamplingMode::Random => rng.random_range(0..len),
            SamplingMode::Consecutive => {
                let k = self.cursor % len;
                self.cursor = k + 1;
                k
            }
            SamplingMode::Batches10 => {
                if self.remaining_in_batch == 0 {
                    self.cursor = rng.random_range(0..len);
                    self.remaining_in_batch = 10;
                }
                let k = self.cursor % len;
                self.cursor = k + 1;
                self.remaining_in_batch -= 1;
                k
            }
        }
    }
}

fn fmt_role(role: Role) -> (&'static str, usize) {
    (role.name(), role.link())
}

pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut buf = format!(
        "{MAGIC} num_v2v={} num_v2i={} bs_x={} bs_y={}\n",
        dataset.num_v2v, dataset.num_v2i, dataset.bs_position.x, dataset.bs_position.y
    )
    .into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let io = |e: csv::Error| Error::io(path, std::io::Error::other(e));
        w.write_record(HEADER).map_err(io)?;
        for s in &dataset.samples {
            for v in &s.vehicles {
                let (role, link) = fmt_role(v.role);
                w.write_record([
                    s.sample_id.to_string(),
                    v.id.to_string(),
                    role.to_string(),
                    link.to_string(),
                    v.x.to_string(),
                    v.y.to_string(),
                    v.lane.to_string(),
                    v.speed.to_string(),
                    s.density.to_string(),
                    s.distance_level.name().to_string(),
                ])
                .map_err(io)?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&bytes)
}

fn parse_error(line: u64, byte: u64, msg: impl Into<String>) -> Error {
    Error::Parse { line, byte, msg: msg.into() }
}

pub(crate) fn parse_dataset(bytes: &[u8]) -> Result<Dataset> {
    let first_end = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| parse_error(1, bytes.len() as u64, "missing dataset header line"))?;
    let first = std::str::from_utf8(&bytes[..first_end]).map_err(|_| parse_error(1, 0, "header is not UTF-8"))?;
    let rest = first.strip_prefix(MAGIC).ok_or_else(|| parse_error(1, 0, format!("expected header starting with '{MAGIC}'")))?;
    let mut num_v2v = None;
    let mut num_v2i = None;
    let mut bs_x = None;
    let mut bs_y = None;
    for kv in rest.split_whitespace() {
        let (k, v) = kv.split_once('=').ok_or_else(|| parse_error(1, 0, format!("malformed header field '{kv}'")))?;
        let bad = || parse_error(1, 0, format!("bad value for {k}: '{v}'"));
        match k {
            "num_v2v" => num_v2v = Some(v.parse::<usize>().map_err(|_| bad())?),
            "num_v2i" => num_v2i = Some(v.parse::<usize>().map_err(|_| bad())?),
            "bs_x" => bs_x = Some(v.parse::<f64>().map_err(|_| bad())?),
            "bs_y" => bs_y = Some(v.parse::<f64>().map_err(|_| bad())?),
            _ => return Err(parse_error(1, 0, format!("unknown header field '{k}'"))),
        }
    }
    let missing = |name: &str| parse_error(1, 0, format!("header lacks {name}"));
    let num_v2v = num_v2v.ok_or_else(|| missing("num_v2v"))?;
    let num_v2i = num_v2i.ok_or_else(|| missing("num_v2i"))?;
    let bs_position = Point2 { x: bs_x.ok_or_else(|| missing("bs_x"))?, y: bs_y.ok_or_else(|| missing("bs_y"))? };
    let per_sample = 2 * num_v2v + num_v2i;

    let offset = first_end as u64 + 1;
    let body = &bytes[first_end + 1..];
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(body);
    let locate = |pos: Option<&csv::Position>| -> (u64, u64) { pos.map_or((0, offset), |p| (p.line() + 1, p.byte() + offset)) };
    {
        let header = reader.headers().map_err(|e| {
            let (line, byte) = locate(e.position());
            parse_error(line, byte, e.to_string())
        })?;
        if header.iter().ne(HEADER.iter().copied()) {
            return Err(parse_error(2, offset, format!("expected columns {}", HEADER.join(","))));
        }
    }

    let mut samples: Vec<TopologySnapshot> = Vec::new();
    let mut record = csv::StringRecord::new();
    let mut last = (2, offset);
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                let (line, byte) = locate(e.position());
                return Err(parse_error(line, byte, e.to_string()));
            }
        }
        let (line, byte) = locate(record.position());
        last = (line, byte);
        let field = |k: usize| record.get(k).unwrap_or("");
        let num = |k: usize| -> Result<f64> {
            field(k)
                .parse::<f64>()
                .map_err(|_| parse_error(line, byte, format!("column {} is not a number: '{}'", HEADER[k], field(k))))
        };
        let int = |k: usize| -> Result<u64> {
            field(k)
                .parse::<u64>()
                .map_err(|_| parse_error(line, byte, format!("column {} is not an integer: '{}'", HEADER[k], field(k))))
        };
        let sample_id = int(0)?;
        let vehicle_id = int(1)? as usize;
        let link = int(3)? as usize;
        let role = match field(2) {
            "v2v_tx" => Role::V2vTx(link),
            "v2v_rx" => Role::V2vRx(link),
            "v2i" => Role::V2i(link),
            other => return Err(parse_error(line, byte, format!("unknown role '{other}'"))),
        };
        let vehicle = Vehicle { id: vehicle_id, x: num(4)?, y: num(5)?, lane: int(6)? as usize, speed: num(7)?, role };
        let density = num(8)?;
        let distance_level = DistanceLevel::parse(field(9))
            .ok_or_else(|| parse_error(line, byte, format!("unknown distance level '{}'", field(9))))?;

        let start_new = samples.last().is_none_or(|s| s.sample_id != sample_id);
        if start_new {
            if let Some(prev) = samples.last() {
                if prev.vehicles.len() != per_sample {
                    return Err(parse_error(
                        line,
                        byte,
                        format!("sample {} has {} vehicles, expected {per_sample}", prev.sample_id, prev.vehicles.len()),
                    ));
                }
            }
            samples.push(TopologySnapshot {
                vehicles: Vec::with_capacity(per_sample),
                num_v2v,
                num_v2i,
                bs_position,
                sample_id,
                density,
                distance_level,
            });
        }
        let snap = samples.last_mut().expect("pushed above");
        let k = snap.vehicles.len();
        let expected = if k < 2 * num_v2v {
            if k.is_multiple_of(2) {
                Role::V2vTx(k / 2)
            } else {
                Role::V2vRx(k / 2)
            }
        } else {
            Role::V2i(k.wrapping_sub(2 * num_v2v))
        };
        if k >= per_sample || vehicle.role != expected || vehicle.id != k {
            return Err(parse_error(
                line,
                byte,
                format!("sample {sample_id}: unexpected vehicle {} with role {:?}", vehicle.id, vehicle.role),
            ));
        }
        snap.vehicles.push(vehicle);
    }
    if let Some(prev) = samples.last() {
        if prev.vehicles.len() != per_sample {
            return Err(parse_error(
                last.0,
                bytes.len() as u64,
                format!("truncated sample {}: {} of {per_sample} vehicles", prev.sample_id, prev.vehicles.len()),
            ));
        }
    }
    Ok(Dataset { num_v2v, num_v2i, bs_position, samples })
}
