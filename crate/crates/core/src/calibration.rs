//! Least-squares calibration of the camera coefficient θ and the UAV
//! coefficient α from flight logs.
//!
//! Both relations pass through the origin (`l = θ h` and
//! `P = (E / α) / (h v)`), so each fit is a one-parameter regression
//! `k = Σ x y / Σ x²`.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::M2_PER_KM2;
use crate::profiles::CameraProfile;

/// Flight-time dispersion above which the constant-endurance assumption is
/// flagged.
pub const CV_WARN_THRESHOLD: f64 = 0.15;

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("sample {index}: `{field}` must be > 0, got {value}")]
    InvalidSample {
        index: usize,
        field: &'static str,
        value: f64,
    },
    #[error("all regressors are zero; slope undefined")]
    Degenerate,
    #[error("sample {index}: benchmark energy {found} differs from {expected}")]
    HeterogeneousEnergy {
        index: usize,
        expected: f64,
        found: f64,
    },
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("missing or wrong header: expected `{expected}`")]
    Header { expected: &'static str },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = CalibrationError> = std::result::Result<T, E>;

/// Measured ground width `l` of the footprint at altitude `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FootprintSample {
    #[serde(rename = "h_m")]
    pub h: f64,
    #[serde(rename = "l_m")]
    pub l: f64,
}

/// Straight-flight time `t` at `(h, v)` on benchmark energy `e`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnduranceSample {
    #[serde(rename = "h_m")]
    pub h: f64,
    #[serde(rename = "v_mps")]
    pub v: f64,
    #[serde(rename = "t_s")]
    pub t: f64,
    #[serde(rename = "E_wh")]
    pub e: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub value: f64,
    /// RMS residual in the units of the dependent variable.
    pub residual_rms: f64,
    pub sample_count: usize,
    /// Coefficient of variation of flight time (endurance fits only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cv: Option<f64>,
}

impl FitResult {
    pub fn cv_exceeds_threshold(&self) -> bool {
        self.cv.is_some_and(|cv| cv > CV_WARN_THRESHOLD)
    }
}

/// Slope and RMS residual of the through-origin fit `y ≈ k x`.
fn through_origin(points: impl Iterator<Item = (f64, f64)> + Clone) -> Result<(f64, f64)> {
    let (sxy, sxx, n) = points
        .clone()
        .fold((0.0, 0.0, 0usize), |(sxy, sxx, n), (x, y)| {
            (sxy + x * y, sxx + x * x, n + 1)
        });
    if sxx == 0.0 {
        return Err(CalibrationError::Degenerate);
    }
    let k = sxy / sxx;
    let ss: f64 = points.map(|(x, y)| (y - k * x).powi(2)).sum();
    Ok((k, (ss / n as f64).sqrt()))
}

fn check(index: usize, field: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(CalibrationError::InvalidSample {
            index,
            field,
            value,
        })
    }
}

/// Sample mean and (n - 1) standard deviation.
pub fn mean_and_stdev(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn coefficient_of_variation(values: &[f64]) -> f64 {
    let (mean, sd) = mean_and_stdev(values);
    sd / mean
}

pub fn fit_theta(samples: &[FootprintSample]) -> Result<FitResult> {
    if samples.len() < 2 {
        return Err(CalibrationError::TooFewSamples(samples.len()));
    }
    for (i, s) in samples.iter().enumerate() {
        if s.h == 0.0 {
            continue;
        }
        check(i, "h", s.h)?;
        check(i, "l", s.l)?;
    }
    let (theta, rms) = through_origin(samples.iter().map(|s| (s.h, s.l)))?;
    Ok(FitResult {
        value: theta,
        residual_rms: rms,
        sample_count: samples.len(),
        cv: None,
    })
}

/// Observed energy density `10⁶ E / (θ h v t)` of one endurance sample, Wh/km².
pub fn observed_energy_density(sample: &EnduranceSample, theta: f64) -> f64 {
    M2_PER_KM2 * sample.e / (theta * sample.h * sample.v * sample.t)
}

/// Fits α by regressing observed energy density on `1 / (h v)`.
pub fn fit_alpha(samples: &[EnduranceSample], camera: &CameraProfile) -> Result<FitResult> {
    if samples.len() < 2 {
        return Err(CalibrationError::TooFewSamples(samples.len()));
    }
    let e = samples[0].e;
    for (i, s) in samples.iter().enumerate() {
        check(i, "h", s.h)?;
        check(i, "v", s.v)?;
        check(i, "t", s.t)?;
        check(i, "E", s.e)?;
        if s.e != e {
            return Err(CalibrationError::HeterogeneousEnergy {
                index: i,
                expected: e,
                found: s.e,
            });
        }
    }
    let points = samples
        .iter()
        .map(|s| (1.0 / (s.h * s.v), observed_energy_density(s, camera.theta)));
    let (slope, rms) = through_origin(points)?;
    let times: Vec<f64> = samples.iter().map(|s| s.t).collect();
    Ok(FitResult {
        value: e / slope,
        residual_rms: rms,
        sample_count: samples.len(),
        cv: Some(coefficient_of_variation(&times)),
    })
}

const FOOTPRINT_HEADER: &str = "h_m,l_m";
const ENDURANCE_HEADER: &str = "h_m,v_mps,t_s,E_wh";

fn read_log<T, R>(reader: R, header: &'static str) -> Result<Vec<T>>
where
    T: for<'de> Deserialize<'de>,
    R: Read,
{
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let expected: Vec<&str> = header.split(',').collect();
    let found = rdr.headers()?.clone();
    if found.iter().collect::<Vec<_>>() != expected {
        return Err(CalibrationError::Header { expected: header });
    }
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| CalibrationError::Row {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row: T = record
            .deserialize(Some(&found))
            .map_err(|e| CalibrationError::Row {
                line,
                message: e.to_string(),
            })?;
        out.push(row);
    }
    Ok(out)
}

fn write_log<T: Serialize, W: Write>(writer: W, rows: &[T]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_footprint_log<R: Read>(reader: R) -> Result<Vec<FootprintSample>> {
    read_log(reader, FOOTPRINT_HEADER)
}

pub fn read_endurance_log<R: Read>(reader: R) -> Result<Vec<EnduranceSample>> {
    read_log(reader, ENDURANCE_HEADER)
}

pub fn load_footprint_log(path: impl AsRef<Path>) -> Result<Vec<FootprintSample>> {
    read_footprint_log(std::fs::File::open(path)?)
}

pub fn load_endurance_log(path: impl AsRef<Path>) -> Result<Vec<EnduranceSample>> {
    read_endurance_log(std::fs::File::open(path)?)
}

pub fn write_footprint_log<W: Write>(writer: W, rows: &[FootprintSample]) -> Result<()> {
    write_log(writer, rows)
}

pub fn write_endurance_log<W: Write>(writer: W, rows: &[EnduranceSample]) -> Result<()> {
    write_log(writer, rows)
}
