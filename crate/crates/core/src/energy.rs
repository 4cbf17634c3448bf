//! Closed-form energy density model.
//!
//! Every energy here is a density in Wh/km²: UAV flight energy falls as
//! `1 / (h * v)`, and the edge device splits each second between running
//! (`r / r_max`) and standby.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decision::FlightParams;
use crate::profiles::{CameraProfile, EdgeDeviceProfile, MissionProfiles, UavProfile};

/// Square meters per square kilometer.
pub const M2_PER_KM2: f64 = 1.0e6;

#[derive(Debug, Error, PartialEq)]
pub enum EnergyError {
    #[error("`{field}` must be > 0, got {value}")]
    NonPositive { field: &'static str, value: f64 },
    #[error("footprint area needs camera.theta_x and camera.theta_y")]
    MissingAngles,
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("sampling rate {rate} Hz outside [0, {r_max}] for `{model_id}`")]
    RateOutOfRange {
        model_id: String,
        rate: f64,
        r_max: f64,
    },
    #[error("speed {v} m/s exceeds v_max {v_max}")]
    SpeedAboveMax { v: f64, v_max: f64 },
    #[error("altitude grid needs at least one altitude")]
    EmptyGrid,
}

pub type Result<T, E = EnergyError> = std::result::Result<T, E>;

fn require_positive(field: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(EnergyError::NonPositive { field, value })
    }
}

/// Per-component energy density for one set of flight parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub p_uav: f64,
    pub p_edge_run: f64,
    pub p_edge_standby: f64,
    pub p_system: f64,
}

impl EnergyBreakdown {
    pub fn p_edge(&self) -> f64 {
        self.p_edge_run + self.p_edge_standby
    }
}

/// Edge device energy density split into running and standby shares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeEnergy {
    pub run: f64,
    pub standby: f64,
}

impl EdgeEnergy {
    pub fn total(&self) -> f64 {
        self.run + self.standby
    }
}

/// Ground area imaged in one frame, m². Needs both shooting half-angles.
pub fn footprint_area(camera: &CameraProfile, h: f64) -> Result<f64> {
    require_positive("h", h)?;
    let (Some(tx), Some(ty)) = (camera.theta_x, camera.theta_y) else {
        return Err(EnergyError::MissingAngles);
    };
    Ok(4.0 * tx.tan() * ty.tan() * h * h)
}

/// Cross-track footprint width, meters.
pub fn footprint_width(camera: &CameraProfile, h: f64) -> Result<f64> {
    require_positive("h", h)?;
    Ok(camera.theta * h)
}

pub fn uav_energy(uav: &UavProfile, h: f64, v: f64) -> Result<f64> {
    require_positive("h", h)?;
    require_positive("v", v)?;
    Ok(uav.benchmark_energy / (uav.alpha * h * v))
}

/// Seconds of flight needed to sweep one km².
pub fn detection_seconds_per_km2(camera: &CameraProfile, h: f64, v: f64) -> Result<f64> {
    require_positive("h", h)?;
    require_positive("v", v)?;
    Ok(M2_PER_KM2 / (camera.theta * h * v))
}

pub fn edge_energy(
    camera: &CameraProfile,
    device: &EdgeDeviceProfile,
    model_id: &str,
    h: f64,
    v: f64,
    r: f64,
) -> Result<EdgeEnergy> {
    let model = device
        .model(model_id)
        .ok_or_else(|| EnergyError::UnknownModel(model_id.to_string()))?;
    if !(0.0..=model.r_max).contains(&r) {
        return Err(EnergyError::RateOutOfRange {
            model_id: model_id.to_string(),
            rate: r,
            r_max: model.r_max,
        });
    }
    let t = detection_seconds_per_km2(camera, h, v)?;
    let duty = r / model.r_max;
    Ok(EdgeEnergy {
        run: duty * t * model.p_run,
        standby: (1.0 - duty) * t * device.p_standby,
    })
}

pub fn system_energy(profiles: &MissionProfiles, params: &FlightParams) -> Result<EnergyBreakdown> {
    if params.v > profiles.uav.v_max {
        return Err(EnergyError::SpeedAboveMax {
            v: params.v,
            v_max: profiles.uav.v_max,
        });
    }
    let p_uav = uav_energy(&profiles.uav, params.h, params.v)?;
    let edge = edge_energy(
        &profiles.camera,
        &profiles.edge,
        &params.model_id,
        params.h,
        params.v,
        params.r,
    )?;
    Ok(EnergyBreakdown {
        p_uav,
        p_edge_run: edge.run,
        p_edge_standby: edge.standby,
        p_system: p_uav + edge.run + edge.standby,
    })
}

/// Numerator `k` of the full-standby system energy `k / (h * v)`.
pub fn standby_coefficient(profiles: &MissionProfiles) -> f64 {
    profiles.uav.benchmark_energy / profiles.uav.alpha
        + M2_PER_KM2 * profiles.edge.p_standby / profiles.camera.theta
}

/// Numerator `k` of the full-rate system energy `k / (h * v)` for a model
/// drawing `p_run`.
pub fn full_rate_coefficient(profiles: &MissionProfiles, p_run: f64) -> f64 {
    profiles.uav.benchmark_energy / profiles.uav.alpha + M2_PER_KM2 * p_run / profiles.camera.theta
}

/// Altitude at which an all-standby flight at speed `v` costs `p_target`.
pub fn equal_energy_altitude(profiles: &MissionProfiles, p_target: f64, v: f64) -> Result<f64> {
    require_positive("p_target", p_target)?;
    require_positive("v", v)?;
    Ok(standby_coefficient(profiles) / (p_target * v))
}

/// Result of [`derive_altitude_range`], with the intermediate values kept for
/// reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AltitudeRange {
    pub n: usize,
    pub p_target: f64,
    pub equal_energy_altitude: f64,
    pub spacing: f64,
    pub warnings: Vec<String>,
}

fn median_spacing(altitudes: &[f64]) -> Option<f64> {
    let mut gaps: Vec<f64> = altitudes.windows(2).map(|w| w[1] - w[0]).collect();
    if gaps.is_empty() {
        return None;
    }
    gaps.sort_by(f64::total_cmp);
    let mid = gaps.len() / 2;
    Some(if gaps.len() % 2 == 1 {
        gaps[mid]
    } else {
        0.5 * (gaps[mid - 1] + gaps[mid])
    })
}

/// Number of grid steps below the top altitude worth searching.
///
/// Without an explicit `p_target` the threshold is the full-rate system
/// energy of the most power-hungry model at the top altitude and `v_max`.
pub fn derive_altitude_range(
    profiles: &MissionProfiles,
    altitudes: &[f64],
    v_max: f64,
    p_target: Option<f64>,
) -> Result<AltitudeRange> {
    let &top = altitudes.last().ok_or(EnergyError::EmptyGrid)?;
    require_positive("v_max", v_max)?;
    let p_target = match p_target {
        Some(p) => p,
        None => {
            let p_run = profiles
                .edge
                .highest_power_model()
                .map(|m| m.p_run)
                .unwrap_or(profiles.edge.p_standby);
            full_rate_coefficient(profiles, p_run) / (top * v_max)
        }
    };
    let h_star = equal_energy_altitude(profiles, p_target, v_max)?;
    let mut warnings = Vec::new();

    let Some(spacing) = median_spacing(altitudes) else {
        warnings.push("single-altitude grid; using n = 1".to_string());
        return Ok(AltitudeRange {
            n: 1,
            p_target,
            equal_energy_altitude: h_star,
            spacing: 0.0,
            warnings,
        });
    };
    if altitudes
        .windows(2)
        .any(|w| ((w[1] - w[0]) - spacing).abs() > 1e-9 * spacing.max(1.0))
    {
        warnings.push(format!(
            "altitude grid is not uniform; using median spacing {spacing} m"
        ));
    }
    let n = if h_star > top {
        warnings.push(format!(
            "equal-energy altitude {h_star:.3} m lies above the grid top {top} m; using n = 1"
        ));
        1
    } else {
        (((top - h_star) / spacing).ceil() as usize).max(1)
    };
    Ok(AltitudeRange {
        n,
        p_target,
        equal_energy_altitude: h_star,
        spacing,
        warnings,
    })
}
