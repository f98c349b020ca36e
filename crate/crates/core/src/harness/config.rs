use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::channel::{ArrayConfig, Blocker, Geometry, ReflectionModel, Room};
use crate::geom::Vec3;
use crate::session::{AngleNoiseModel, ClockModel};

pub const ISTA_LABEL: &str = "ista";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Visibility {
    Los,
    Nlos,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RstaSpec {
    pub label: String,
    pub position: Vec3,
    /// Expected propagation condition; reported, not used by the solver.
    pub visibility: Visibility,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AoaDistribution {
    /// Truncated Laplace with the configured scales.
    Laplace,
    /// Uniform over the full error envelope.
    Uniform,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// Arrival timestamp jitter.
    pub tof_jitter_sigma_ps: f64,
    pub aoa_error_max_deg_los: f64,
    pub aoa_error_max_deg_nlos: f64,
    pub aoa_distribution: AoaDistribution,
    pub aoa_scale_deg_los: f64,
    pub aoa_scale_deg_nlos: f64,
    /// `None` runs the channel noiseless.
    pub snr_db: Option<f64>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            tof_jitter_sigma_ps: 50.0,
            aoa_error_max_deg_los: 5.1,
            aoa_error_max_deg_nlos: 8.3,
            aoa_distribution: AoaDistribution::Laplace,
            aoa_scale_deg_los: 0.37,
            aoa_scale_deg_nlos: 0.60,
            snr_db: Some(25.0),
        }
    }
}

impl NoiseConfig {
    pub fn none() -> Self {
        Self {
            tof_jitter_sigma_ps: 0.0,
            aoa_distribution: AoaDistribution::None,
            snr_db: None,
            ..Self::default()
        }
    }

    pub fn snr(&self) -> f64 {
        self.snr_db.unwrap_or(f64::INFINITY)
    }

    pub fn clock(&self) -> ClockModel {
        ClockModel {
            timestamp_jitter_sigma_ps: self.tof_jitter_sigma_ps,
            ..ClockModel::default()
        }
    }

    /// Angle model for a path classified as LOS or not.
    pub fn angle_model(&self, los: bool) -> AngleNoiseModel {
        let (max_deg, scale_deg) = if los {
            (self.aoa_error_max_deg_los, self.aoa_scale_deg_los)
        } else {
            (self.aoa_error_max_deg_nlos, self.aoa_scale_deg_nlos)
        };
        match self.aoa_distribution {
            AoaDistribution::None => AngleNoiseModel::None,
            AoaDistribution::Uniform => AngleNoiseModel::Uniform { max_deg },
            AoaDistribution::Laplace => AngleNoiseModel::Laplace { scale_deg, max_deg },
        }
    }
}

fn default_tof_mismatch_sigma_cm() -> f64 {
    10.0
}

fn default_golay_length() -> usize {
    128
}

fn default_awv_group_size() -> u8 {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Room, blockers and reflection model. Station positions are filled in
    /// from `ista_position` and `rsta_specs`.
    pub geometry: Geometry,
    #[serde(default)]
    pub array: ArrayConfig,
    pub ista_position: Vec3,
    pub rsta_specs: Vec<RstaSpec>,
    #[serde(default)]
    pub noise: NoiseConfig,
    pub repetitions: usize,
    pub seed: u64,
    /// Draws range noise independently of the angle estimate.
    #[serde(default)]
    pub legacy_mismatch: bool,
    #[serde(default = "default_tof_mismatch_sigma_cm")]
    pub tof_mismatch_sigma_cm: f64,
    #[serde(default = "default_golay_length")]
    pub golay_length: usize,
    #[serde(default = "default_awv_group_size")]
    pub awv_group_size: u8,
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        path: path.into(),
        message: message.into(),
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            invalid(path, e.into_inner().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Geometry with the ISTA and every RSTA placed.
    pub fn placed_geometry(&self) -> Geometry {
        let mut g = self.geometry.clone().with_sta(ISTA_LABEL, self.ista_position);
        for spec in &self.rsta_specs {
            g = g.with_sta(&spec.label, spec.position);
        }
        g
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.repetitions == 0 {
            return Err(invalid("repetitions", "must be at least 1"));
        }
        if self.rsta_specs.is_empty() {
            return Err(invalid("rsta_specs", "at least one RSTA is required"));
        }
        if !self.golay_length.is_power_of_two() || self.golay_length < 2 {
            return Err(invalid("golay_length", "must be a power of two of at least 2"));
        }
        if self.awv_group_size == 0 {
            return Err(invalid("awv_group_size", "must be at least 1"));
        }
        self.array
            .validate()
            .map_err(|e| invalid("array", e.to_string()))?;
        let room = &self.geometry.room;
        if !room.strictly_contains(self.ista_position) {
            return Err(invalid("ista_position", "outside the room"));
        }
        for (i, spec) in self.rsta_specs.iter().enumerate() {
            if spec.label == ISTA_LABEL || spec.label.is_empty() {
                return Err(invalid(format!("rsta_specs[{i}].label"), "reserved or empty label"));
            }
            if self.rsta_specs[..i].iter().any(|s| s.label == spec.label) {
                return Err(invalid(format!("rsta_specs[{i}].label"), "duplicate label"));
            }
            if !room.strictly_contains(spec.position) {
                return Err(invalid(format!("rsta_specs[{i}].position"), "outside the room"));
            }
            if spec.position.distance(self.ista_position) == 0.0 {
                return Err(invalid(format!("rsta_specs[{i}].position"), "coincides with the ISTA"));
            }
        }
        let n = &self.noise;
        for (name, v) in [
            ("tof_jitter_sigma_ps", n.tof_jitter_sigma_ps),
            ("aoa_error_max_deg_los", n.aoa_error_max_deg_los),
            ("aoa_error_max_deg_nlos", n.aoa_error_max_deg_nlos),
            ("aoa_scale_deg_los", n.aoa_scale_deg_los),
            ("aoa_scale_deg_nlos", n.aoa_scale_deg_nlos),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(format!("noise.{name}"), "must be finite and non-negative"));
            }
        }
        if !(self.tof_mismatch_sigma_cm >= 0.0) {
            return Err(invalid("tof_mismatch_sigma_cm", "must be non-negative"));
        }
        Ok(())
    }
}

/// Six RSTAs 2, 4 and 8 m from the ISTA: three in line of sight, three
/// behind blockers and reached over the south wall. All stations 1 m high.
pub fn room_scenario() -> ScenarioConfig {
    let h = 1.0;
    let los = |label: &str, x, y| RstaSpec {
        label: label.into(),
        position: Vec3::new(x, y, h),
        visibility: Visibility::Los,
    };
    let nlos = |label: &str, x, y| RstaSpec {
        label: label.into(),
        position: Vec3::new(x, y, h),
        visibility: Visibility::Nlos,
    };
    let s2 = std::f64::consts::SQRT_2;
    let s3 = 3f64.sqrt();
    let geometry = Geometry {
        room: Room {
            width_m: 12.0,
            depth_m: 7.0,
            height_m: 3.0,
        },
        sta_positions: Default::default(),
        blockers: vec![
            Blocker {
                start: [1.5, 0.6],
                end: [1.5, 1.3],
            },
            Blocker {
                start: [3.5, 1.0],
                end: [3.5, 1.8],
            },
            Blocker {
                start: [7.0, 0.7],
                end: [7.0, 1.6],
            },
        ],
        reflection: ReflectionModel::default(),
    };
    // LOS targets at 45°, 75° and 30°; NLOS targets placed so the image of
    // the ISTA across the south wall (2, -1) lies 2, 4 and 8 m away.
    let (c75, s75) = (75f64.to_radians().cos(), 75f64.to_radians().sin());
    let dy8: f64 = 2.07;
    ScenarioConfig {
        geometry,
        array: ArrayConfig::default(),
        ista_position: Vec3::new(2.0, 1.0, h),
        rsta_specs: vec![
            los("los_2m", 2.0 + s2, 1.0 + s2),
            los("los_4m", 2.0 + 4.0 * c75, 1.0 + 4.0 * s75),
            los("los_8m", 2.0 + 4.0 * s3, 5.0),
            nlos("nlos_2m", 1.0, s3 - 1.0),
            nlos("nlos_4m", 2.0 + 2.0 * s2, 2.0 * s2 - 1.0),
            nlos("nlos_8m", 2.0 + (64.0 - dy8 * dy8).sqrt(), dy8 - 1.0),
        ],
        noise: NoiseConfig::default(),
        repetitions: 100,
        seed: 2024,
        legacy_mismatch: false,
        tof_mismatch_sigma_cm: default_tof_mismatch_sigma_cm(),
        golay_length: default_golay_length(),
        awv_group_size: default_awv_group_size(),
    }
}

pub const COMPARISON_DISTANCES_M: [f64; 5] = [7.0, 7.07, 9.0, 11.2, 14.2];

/// One LOS RSTA `distance_m` east of the ISTA in a room sized to fit.
pub fn comparison_scenario(distance_m: f64) -> ScenarioConfig {
    let geometry = Geometry {
        room: Room {
            width_m: distance_m + 4.0,
            depth_m: 6.0,
            height_m: 3.0,
        },
        sta_positions: Default::default(),
        blockers: Vec::new(),
        reflection: ReflectionModel::default(),
    };
    ScenarioConfig {
        geometry,
        rsta_specs: vec![RstaSpec {
            label: comparison_label(distance_m),
            position: Vec3::new(2.0 + distance_m, 3.0, 1.0),
            visibility: Visibility::Los,
        }],
        ista_position: Vec3::new(2.0, 3.0, 1.0),
        ..room_scenario()
    }
}

pub fn comparison_label(distance_m: f64) -> String {
    format!("los_{distance_m}m")
}
