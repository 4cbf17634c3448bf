//! Energy savings of a recommended flight against measured alternatives.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ReportError {
    #[error("comparison `{0}` needs exactly one recommended flight, found {1}")]
    Recommended(String, usize),
    #[error("comparison `{name}`: flight `{label}` has non-positive energy {energy}")]
    Energy {
        name: String,
        label: String,
        energy: f64,
    },
}

/// One measured flight, as recorded in the field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasuredFlight {
    pub label: String,
    #[serde(default)]
    pub recommended: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub altitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recall: Option<f64>,
    /// Measured energy, Wh.
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub name: String,
    pub flights: Vec<MeasuredFlight>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Saving {
    pub label: String,
    pub energy: f64,
    /// `(energy - recommended) / energy`; negative when the alternative is
    /// cheaper.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavingsReport {
    pub name: String,
    pub recommended: String,
    pub recommended_energy: f64,
    pub savings: Vec<Saving>,
    /// Largest saving over any alternative.
    pub max_saving: Option<f64>,
}

pub fn savings(comparison: &Comparison) -> Result<SavingsReport, ReportError> {
    for f in &comparison.flights {
        if !(f.energy > 0.0) {
            return Err(ReportError::Energy {
                name: comparison.name.clone(),
                label: f.label.clone(),
                energy: f.energy,
            });
        }
    }
    let recommended: Vec<&MeasuredFlight> =
        comparison.flights.iter().filter(|f| f.recommended).collect();
    let [rec] = recommended[..] else {
        return Err(ReportError::Recommended(
            comparison.name.clone(),
            recommended.len(),
        ));
    };
    let savings: Vec<Saving> = comparison
        .flights
        .iter()
        .filter(|f| !f.recommended)
        .map(|f| Saving {
            label: f.label.clone(),
            energy: f.energy,
            ratio: (f.energy - rec.energy) / f.energy,
        })
        .collect();
    let max_saving = savings.iter().map(|s| s.ratio).reduce(f64::max);
    Ok(SavingsReport {
        name: comparison.name.clone(),
        recommended: rec.label.clone(),
        recommended_energy: rec.energy,
        savings,
        max_saving,
    })
}
