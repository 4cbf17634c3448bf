//! Hardware descriptors, performance tables and task settings.
//!
//! Units are fixed at this boundary and never converted inside the crate:
//! meters, m/s, Hz, Wh, Wh/s and Wh/km². The UAV coefficient `alpha` already
//! absorbs the m²→km² factor, so `E / (alpha * h * v)` is Wh/km² directly.

use std::collections::HashSet;
use std::f64::consts::FRAC_PI_2;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: parse error: {source}", path.display())]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid `{field}`: {message}")]
    Invariant { field: String, message: String },
    #[error("`{field}` references unknown model `{model_id}`")]
    UnknownModel { field: String, model_id: String },
}

impl ProfileError {
    fn invariant(field: impl Into<String>, message: impl Into<String>) -> Self {
        ProfileError::Invariant {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Field path of the offending value, when the error is about one.
    pub fn field(&self) -> Option<&str> {
        match self {
            ProfileError::Invariant { field, .. } | ProfileError::UnknownModel { field, .. } => {
                Some(field)
            }
            _ => None,
        }
    }
}

pub type Result<T, E = ProfileError> = std::result::Result<T, E>;

fn positive(field: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ProfileError::invariant(field, format!("must be > 0, got {value}")))
    }
}

fn unit_interval(field: &str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(ProfileError::invariant(
            field,
            format!("must lie in [0, 1], got {value}"),
        ))
    }
}

/// Camera footprint coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraProfile {
    /// Ground footprint width per meter of altitude.
    pub theta: f64,
    /// Half shooting angle across track, radians.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_x: Option<f64>,
    /// Half shooting angle along track, radians.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_y: Option<f64>,
}

impl CameraProfile {
    pub fn new(theta: f64) -> Self {
        Self {
            theta,
            theta_x: None,
            theta_y: None,
        }
    }

    pub fn validate(&self, prefix: &str) -> Result<()> {
        positive(&format!("{prefix}.theta"), self.theta)?;
        for (name, angle) in [("theta_x", self.theta_x), ("theta_y", self.theta_y)] {
            if let Some(a) = angle {
                if !(a > 0.0 && a < FRAC_PI_2) {
                    return Err(ProfileError::invariant(
                        format!("{prefix}.{name}"),
                        format!("must lie in (0, pi/2), got {a}"),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavProfile {
    /// Fitted UAV coefficient; `benchmark_energy / (alpha * h * v)` is Wh/km².
    pub alpha: f64,
    /// Energy drawn during one endurance measurement, Wh.
    pub benchmark_energy: f64,
    /// Maximum flight speed, m/s.
    pub v_max: f64,
}

impl UavProfile {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        positive(&format!("{prefix}.alpha"), self.alpha)?;
        positive(&format!("{prefix}.benchmark_energy"), self.benchmark_energy)?;
        positive(&format!("{prefix}.v_max"), self.v_max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeModelProfile {
    pub model_id: String,
    /// Power while inferring, Wh/s.
    pub p_run: f64,
    /// Maximum inference frequency, Hz.
    pub r_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeDeviceProfile {
    /// Idle power, Wh/s.
    pub p_standby: f64,
    pub models: Vec<EdgeModelProfile>,
}

impl EdgeDeviceProfile {
    pub fn model(&self, model_id: &str) -> Option<&EdgeModelProfile> {
        self.models.iter().find(|m| m.model_id == model_id)
    }

    /// The model with the largest running power; ties keep the first listed.
    pub fn highest_power_model(&self) -> Option<&EdgeModelProfile> {
        self.models
            .iter()
            .fold(None, |best: Option<&EdgeModelProfile>, m| match best {
                Some(b) if b.p_run >= m.p_run => Some(b),
                _ => Some(m),
            })
    }

    pub fn validate(&self, prefix: &str) -> Result<()> {
        positive(&format!("{prefix}.p_standby"), self.p_standby)?;
        let mut seen = HashSet::new();
        for (i, m) in self.models.iter().enumerate() {
            let path = format!("{prefix}.models[{i}]");
            if m.model_id.is_empty() {
                return Err(ProfileError::invariant(
                    format!("{path}.model_id"),
                    "must not be empty",
                ));
            }
            if !seen.insert(m.model_id.as_str()) {
                return Err(ProfileError::invariant(
                    format!("{path}.model_id"),
                    format!("duplicate model id `{}`", m.model_id),
                ));
            }
            positive(&format!("{path}.p_run"), m.p_run)?;
            positive(&format!("{path}.r_max"), m.r_max)?;
            if self.p_standby >= m.p_run {
                return Err(ProfileError::invariant(
                    format!("{prefix}.p_standby"),
                    format!(
                        "must be below every model's p_run, but {} >= {} ({})",
                        self.p_standby, m.p_run, m.model_id
                    ),
                ));
            }
        }
        Ok(())
    }
}

/// One measured (score, sampling rate) pair at the benchmark speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePerf {
    pub perf: f64,
    /// Sampling rate r_s at the benchmark speed, Hz.
    pub rate: f64,
}

/// Measured task-completion scores for one model over an altitude grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPerfTable {
    pub model_id: String,
    /// Speed at which the (perf, rate) pairs were measured, m/s.
    pub benchmark_speed: f64,
    /// Altitude grid, strictly increasing, meters.
    pub altitudes: Vec<f64>,
    /// Best achievable score at each altitude.
    pub perf_max: Vec<f64>,
    /// Per altitude, every measured (score, rate) pair.
    pub perf_r: Vec<Vec<RatePerf>>,
}

impl ModelPerfTable {
    /// Checks the table's own invariants and its rates against `device`.
    /// Returns warnings for conditions that are accepted but suspicious.
    pub fn validate(&self, prefix: &str, device: &EdgeDeviceProfile) -> Result<Vec<String>> {
        let model = device
            .model(&self.model_id)
            .ok_or_else(|| ProfileError::UnknownModel {
                field: format!("{prefix}.model_id"),
                model_id: self.model_id.clone(),
            })?;
        positive(&format!("{prefix}.benchmark_speed"), self.benchmark_speed)?;
        if self.altitudes.is_empty() {
            return Err(ProfileError::invariant(
                format!("{prefix}.altitudes"),
                "must not be empty",
            ));
        }
        for (i, &h) in self.altitudes.iter().enumerate() {
            positive(&format!("{prefix}.altitudes[{i}]"), h)?;
            if i > 0 && h <= self.altitudes[i - 1] {
                return Err(ProfileError::invariant(
                    format!("{prefix}.altitudes[{i}]"),
                    "altitudes must be strictly increasing",
                ));
            }
        }
        if self.perf_max.len() != self.altitudes.len() {
            return Err(ProfileError::invariant(
                format!("{prefix}.perf_max"),
                format!(
                    "has {} entries for {} altitudes",
                    self.perf_max.len(),
                    self.altitudes.len()
                ),
            ));
        }
        if self.perf_r.len() != self.altitudes.len() {
            return Err(ProfileError::invariant(
                format!("{prefix}.perf_r"),
                format!(
                    "has {} rows for {} altitudes",
                    self.perf_r.len(),
                    self.altitudes.len()
                ),
            ));
        }
        for (i, &pm) in self.perf_max.iter().enumerate() {
            unit_interval(&format!("{prefix}.perf_max[{i}]"), pm)?;
        }
        for (i, row) in self.perf_r.iter().enumerate() {
            for (j, entry) in row.iter().enumerate() {
                let path = format!("{prefix}.perf_r[{i}][{j}]");
                unit_interval(&format!("{path}.perf"), entry.perf)?;
                if entry.perf > self.perf_max[i] {
                    return Err(ProfileError::invariant(
                        format!("{path}.perf"),
                        format!("{} exceeds perf_max {}", entry.perf, self.perf_max[i]),
                    ));
                }
                positive(&format!("{path}.rate"), entry.rate)?;
                if entry.rate > model.r_max {
                    return Err(ProfileError::invariant(
                        format!("{path}.rate"),
                        format!(
                            "{} exceeds r_max {} of `{}`",
                            entry.rate, model.r_max, model.model_id
                        ),
                    ));
                }
            }
        }
        let mut warnings = Vec::new();
        if self.perf_max.windows(2).any(|w| w[1] > w[0]) {
            warnings.push(format!(
                "{prefix}.perf_max increases with altitude; the h_max scan stops at the first failing altitude"
            ));
        }
        Ok(warnings)
    }
}

/// User-facing task settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub perf_min: f64,
    /// Energy tolerance, >= 1.
    pub beta: f64,
    /// Altitude selection range in grid steps; derived from the energy model
    /// when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
}

impl TaskSpec {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        unit_interval(&format!("{prefix}.perf_min"), self.perf_min)?;
        if !(self.beta >= 1.0 && self.beta.is_finite()) {
            return Err(ProfileError::invariant(
                format!("{prefix}.beta"),
                format!("must be >= 1, got {}", self.beta),
            ));
        }
        Ok(())
    }
}

/// Everything the planner needs about the hardware and the task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionProfiles {
    pub camera: CameraProfile,
    pub uav: UavProfile,
    pub edge: EdgeDeviceProfile,
    #[serde(default)]
    pub tables: Vec<ModelPerfTable>,
    pub task: TaskSpec,
}

impl MissionProfiles {
    /// Validates every invariant; the first violation is returned with its
    /// field path. Non-fatal findings come back as warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        self.camera.validate("camera")?;
        self.uav.validate("uav")?;
        self.edge.validate("edge")?;
        self.task.validate("task")?;
        let mut warnings = Vec::new();
        for (i, t) in self.tables.iter().enumerate() {
            warnings.extend(t.validate(&format!("tables[{i}]"), &self.edge)?);
        }
        Ok(warnings)
    }

    /// Appends externally loaded tables, validating them against the device.
    pub fn add_tables(&mut self, tables: Vec<ModelPerfTable>) -> Result<Vec<String>> {
        let offset = self.tables.len();
        let mut warnings = Vec::new();
        for (i, t) in tables.iter().enumerate() {
            warnings.extend(t.validate(&format!("tables[{}]", offset + i), &self.edge)?);
        }
        self.tables.extend(tables);
        Ok(warnings)
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| ProfileError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = read(path)?;
    serde_json::from_str(&text).map_err(|source| ProfileError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads and validates a profiles file. Warnings are logged.
pub fn load_profiles(path: impl AsRef<Path>) -> Result<MissionProfiles> {
    let profiles: MissionProfiles = parse(path.as_ref())?;
    for w in profiles.validate()? {
        log::warn!("profiles: {w}");
    }
    Ok(profiles)
}

pub fn save_profiles(path: impl AsRef<Path>, profiles: &MissionProfiles) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(profiles).expect("profiles serialize");
    fs::write(path, text + "\n").map_err(|source| ProfileError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses one performance table file. Validation against a device happens
/// in [`MissionProfiles::add_tables`].
pub fn load_table(path: impl AsRef<Path>) -> Result<ModelPerfTable> {
    parse(path.as_ref())
}

pub fn save_table(path: impl AsRef<Path>, table: &ModelPerfTable) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(table).expect("table serializes");
    fs::write(path, text + "\n").map_err(|source| ProfileError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads every `*.json` table in `dir`, sorted by file name.
pub fn load_tables_dir(dir: impl AsRef<Path>) -> Result<Vec<ModelPerfTable>> {
    let dir = dir.as_ref();
    let entries = fs::read_dir(dir).map_err(|source| ProfileError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    paths.sort();
    paths.iter().map(load_table).collect()
}
