//! Random cell scenarios and JSON persistence of instances.
//!
//! Users are dropped uniformly over an annulus around the base station. The
//! channel gain follows `128.1 + 37.6·log10(d_km)` dB of path loss plus
//! log-normal shadowing. Every user draws from its own ChaCha8 stream so an
//! instance does not depend on thread scheduling or on how many users come
//! before it.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::instance::{ProblemInstance, UserProfile};

/// Format version written into every instance file.
pub const INSTANCE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
    #[error("cannot access {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON at `{field}`: {message}")]
    Parse { field: String, message: String },
    #[error("unsupported instance format version {found} (expected {INSTANCE_FORMAT_VERSION})")]
    Version { found: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    /// k-th strongest user with k-th weakest.
    #[default]
    SortedExtremes,
    /// Uniformly random pairs, strong user first within each pair.
    Random,
}

/// Parameters of a random cell. Missing JSON fields take the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    pub n_users: usize,
    pub cell_radius_m: f64,
    pub min_distance_m: f64,
    pub shadowing_std_db: f64,
    pub bandwidth_hz: f64,
    pub noise_psd_dbm_hz: f64,
    pub data_bits_range: [f64; 2],
    pub cycles_per_bit_range: [f64; 2],
    pub local_capacity: f64,
    pub energy_per_cycle: f64,
    pub deadline_s: f64,
    pub cloud_capacity_cycles: f64,
    pub pairing: Pairing,
    pub seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            n_users: 30,
            cell_radius_m: 500.0,
            min_distance_m: 10.0,
            shadowing_std_db: 4.0,
            bandwidth_hz: 1e7,
            noise_psd_dbm_hz: -169.0,
            data_bits_range: [1e5, 5e5],
            cycles_per_bit_range: [500.0, 1500.0],
            local_capacity: 1e9,
            energy_per_cycle: 1e-10,
            deadline_s: 0.1,
            cloud_capacity_cycles: 6e9,
            pairing: Pairing::SortedExtremes,
            seed: 0,
        }
    }
}

impl ScenarioSpec {
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |msg: String| Err(ScenarioError::InvalidSpec(msg));
        if self.n_users == 0 || self.n_users % 2 != 0 {
            return bad(format!("n_users must be even and positive, got {}", self.n_users));
        }
        let positive = [
            ("cell_radius_m", self.cell_radius_m),
            ("min_distance_m", self.min_distance_m),
            ("bandwidth_hz", self.bandwidth_hz),
            ("local_capacity", self.local_capacity),
            ("deadline_s", self.deadline_s),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        let non_negative = [
            ("shadowing_std_db", self.shadowing_std_db),
            ("energy_per_cycle", self.energy_per_cycle),
            ("cloud_capacity_cycles", self.cloud_capacity_cycles),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if !self.noise_psd_dbm_hz.is_finite() {
            return bad("noise_psd_dbm_hz must be finite".into());
        }
        if self.min_distance_m > self.cell_radius_m {
            return bad("min_distance_m exceeds cell_radius_m".into());
        }
        for (name, [lo, hi], min) in [
            ("data_bits_range", self.data_bits_range, 0.0),
            ("cycles_per_bit_range", self.cycles_per_bit_range, f64::MIN_POSITIVE),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo >= min && lo <= hi) {
                return bad(format!("{name} must be a non-empty range, got [{lo}, {hi}]"));
            }
        }
        Ok(())
    }

    /// Noise power spectral density in W/Hz.
    pub fn noise_psd_w_per_hz(&self) -> f64 {
        10f64.powf((self.noise_psd_dbm_hz - 30.0) / 10.0)
    }
}

/// Linear gain for path loss `128.1 + 37.6·log10(d_km)` dB plus `shadow_db`.
pub fn channel_gain(distance_m: f64, shadow_db: f64) -> f64 {
    let loss_db = 128.1 + 37.6 * (distance_m / 1000.0).log10() + shadow_db;
    10f64.powf(-loss_db / 10.0)
}

fn draw_user(spec: &ScenarioSpec, index: usize) -> UserProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);
    let (r0, r1) = (spec.min_distance_m, spec.cell_radius_m);
    // Uniform over the annulus: the squared radius is uniform.
    let u: f64 = rng.random();
    let distance = (r0 * r0 + u * (r1 * r1 - r0 * r0)).sqrt();
    let shadow = Normal::new(0.0, spec.shadowing_std_db)
        .expect("validated shadowing std")
        .sample(&mut rng);
    let [rlo, rhi] = spec.data_bits_range;
    let [clo, chi] = spec.cycles_per_bit_range;
    UserProfile {
        data_bits: rng.random_range(rlo..=rhi),
        cycles_per_bit: rng.random_range(clo..=chi),
        energy_per_cycle: spec.energy_per_cycle,
        local_capacity: spec.local_capacity,
        channel_gain: channel_gain(distance, shadow),
    }
}

/// Draws one instance. Deterministic in `spec` including its seed.
pub fn generate(spec: &ScenarioSpec) -> Result<ProblemInstance, ScenarioError> {
    spec.validate()?;
    let n = spec.n_users;
    let users: Vec<UserProfile> = (0..n).map(|k| draw_user(spec, k)).collect();

    let mut order: Vec<usize> = (0..n).collect();
    let pairs: Vec<(usize, usize)> = match spec.pairing {
        Pairing::SortedExtremes => {
            order.sort_by(|&a, &b| users[b].channel_gain.total_cmp(&users[a].channel_gain).then(a.cmp(&b)));
            (0..n / 2).map(|k| (order[k], order[n - 1 - k])).collect()
        }
        Pairing::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(n as u64);
            order.shuffle(&mut rng);
            order.chunks_exact(2).map(|p| (p[0], p[1])).collect()
        }
    };
    let pairs = pairs
        .into_iter()
        .map(|(a, b)| {
            let (ua, ub) = (users[a], users[b]);
            if ua.channel_gain >= ub.channel_gain {
                (ua, ub)
            } else {
                (ub, ua)
            }
        })
        .collect();

    Ok(ProblemInstance::new(
        pairs,
        spec.bandwidth_hz,
        spec.noise_psd_w_per_hz(),
        spec.deadline_s,
        spec.cloud_capacity_cycles,
    ))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupFile {
    user1: UserProfile,
    user2: UserProfile,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    version: u32,
    bandwidth_hz: f64,
    noise_psd_w_per_hz: f64,
    deadline_s: f64,
    cloud_capacity_cycles: f64,
    groups: Vec<GroupFile>,
}

/// Pretty JSON with a version tag. Floats round-trip exactly.
pub fn instance_to_json(instance: &ProblemInstance) -> String {
    let file = InstanceFile {
        version: INSTANCE_FORMAT_VERSION,
        bandwidth_hz: instance.bandwidth(),
        noise_psd_w_per_hz: instance.noise_psd(),
        deadline_s: instance.deadline(),
        cloud_capacity_cycles: instance.cloud_capacity(),
        groups: instance
            .groups()
            .iter()
            .map(|g| GroupFile {
                user1: *g.user1(),
                user2: *g.user2(),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("instance serializes");
    s.push('\n');
    s
}

fn parse<T: serde::de::DeserializeOwned>(json: &str) -> Result<T, ScenarioError> {
    let de = &mut serde_json::Deserializer::from_str(json);
    serde_path_to_error::deserialize(de).map_err(|e| ScenarioError::Parse {
        field: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

/// Parses an instance. Errors carry the JSON path of the offending field.
pub fn instance_from_json(json: &str) -> Result<ProblemInstance, ScenarioError> {
    let file: InstanceFile = parse(json)?;
    if file.version != INSTANCE_FORMAT_VERSION {
        return Err(ScenarioError::Version { found: file.version });
    }
    Ok(ProblemInstance::new(
        file.groups.into_iter().map(|g| (g.user1, g.user2)).collect(),
        file.bandwidth_hz,
        file.noise_psd_w_per_hz,
        file.deadline_s,
        file.cloud_capacity_cycles,
    ))
}

pub fn scenario_from_json(json: &str) -> Result<ScenarioSpec, ScenarioError> {
    let spec: ScenarioSpec = parse(json)?;
    spec.validate()?;
    Ok(spec)
}

fn read(path: &Path) -> Result<String, ScenarioError> {
    std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn save(instance: &ProblemInstance, path: &Path) -> Result<(), ScenarioError> {
    std::fs::write(path, instance_to_json(instance)).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load(path: &Path) -> Result<ProblemInstance, ScenarioError> {
    instance_from_json(&read(path)?)
}

pub fn load_scenario(path: &Path) -> Result<ScenarioSpec, ScenarioError> {
    scenario_from_json(&read(path)?)
}

/// SHA-256 of the canonical JSON, hex encoded.
pub fn fingerprint(instance: &ProblemInstance) -> String {
    let digest = Sha256::digest(instance_to_json(instance).as_bytes());
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}
