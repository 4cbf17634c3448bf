//! Energy-efficiency-oriented choice of model, altitude, speed and rate.
//!
//! Per model, the scan keeps the highest altitude prefix whose best score
//! meets `perf_min` and looks at most `n` grid steps below it. Each
//! qualifying (score, rate) pair is flown as fast as the UAV and the edge
//! device allow, with the rate scaled in proportion to the speed. Across
//! models, candidates within `beta` of the cheapest survive, and the best
//! score wins.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{self, EnergyError};
use crate::profiles::{MissionProfiles, ModelPerfTable, RatePerf, TaskSpec};

#[derive(Debug, Error, PartialEq)]
pub enum DecisionError {
    #[error("no performance tables supplied")]
    NoTables,
    #[error("table references unknown model `{0}`")]
    UnknownModel(String),
    #[error(
        "no flight parameters reach perf_min {perf_min}; best perf_max seen is {best_perf_max}"
    )]
    Infeasible { perf_min: f64, best_perf_max: f64 },
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

pub type Result<T, E = DecisionError> = std::result::Result<T, E>;

/// One point of the search space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightParams {
    pub model_id: String,
    /// Altitude, m.
    pub h: f64,
    /// Speed, m/s.
    pub v: f64,
    /// Sampling rate, Hz.
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub params: FlightParams,
    pub perf: f64,
    /// System energy density, Wh/km².
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub chosen: Candidate,
    pub candidates_considered: usize,
    pub energy_min: f64,
    /// Candidates dropped for exceeding `beta * energy_min`.
    pub filtered_by_beta: usize,
}

/// Total preference order among β-survivors: higher score, then lower
/// energy, higher altitude, lower rate, higher speed, model id.
pub fn preference(a: &Candidate, b: &Candidate) -> Ordering {
    b.perf
        .total_cmp(&a.perf)
        .then(a.energy.total_cmp(&b.energy))
        .then(b.params.h.total_cmp(&a.params.h))
        .then(a.params.r.total_cmp(&b.params.r))
        .then(b.params.v.total_cmp(&a.params.v))
        .then_with(|| a.params.model_id.cmp(&b.params.model_id))
}

/// Altitude selection range for `table`: the task's `n`, or the value derived
/// from the energy model.
pub fn altitude_range(
    profiles: &MissionProfiles,
    table: &ModelPerfTable,
    task: &TaskSpec,
) -> Result<usize> {
    match task.n {
        Some(n) => Ok(n),
        None => Ok(energy::derive_altitude_range(
            profiles,
            &table.altitudes,
            profiles.uav.v_max,
            None,
        )?
        .n),
    }
}

/// Flies a measured (score, rate) pair as fast as possible and prices it.
pub fn build_candidate(
    profiles: &MissionProfiles,
    table: &ModelPerfTable,
    altitude_index: usize,
    entry: &RatePerf,
) -> Result<Candidate> {
    let model = profiles
        .edge
        .model(&table.model_id)
        .ok_or_else(|| DecisionError::UnknownModel(table.model_id.clone()))?;
    let v_s = table.benchmark_speed;
    let v = profiles.uav.v_max.min(model.r_max / entry.rate * v_s);
    // Mathematically r <= r_max; the min absorbs rounding when the edge
    // device is the binding limit.
    let r = (v / v_s * entry.rate).min(model.r_max);
    let params = FlightParams {
        model_id: table.model_id.clone(),
        h: table.altitudes[altitude_index],
        v,
        r,
    };
    let energy = energy::system_energy(profiles, &params)?.p_system;
    Ok(Candidate {
        params,
        perf: entry.perf,
        energy,
    })
}

/// Index of the highest altitude before the first one whose best score
/// misses `perf_min`, scanning upward; `None` when the lowest already misses.
pub fn max_feasible_altitude(perf_max: &[f64], perf_min: f64) -> Option<usize> {
    let mut h_max: Option<usize> = None;
    for &perf in perf_max {
        if perf >= perf_min {
            h_max = Some(h_max.map_or(0, |i| i + 1));
        } else {
            break;
        }
    }
    h_max
}

/// All candidates one model contributes. Empty when no altitude qualifies.
pub fn decide_single_model(
    table: &ModelPerfTable,
    profiles: &MissionProfiles,
    task: &TaskSpec,
) -> Result<Vec<Candidate>> {
    let Some(h_max) = max_feasible_altitude(&table.perf_max, task.perf_min) else {
        return Ok(Vec::new());
    };
    let n = altitude_range(profiles, table, task)?;
    let mut out = Vec::new();
    for i in h_max.saturating_sub(n)..=h_max {
        for entry in &table.perf_r[i] {
            if entry.perf >= task.perf_min {
                out.push(build_candidate(profiles, table, i, entry)?);
            }
        }
    }
    Ok(out)
}

fn infeasible(tables: &[ModelPerfTable], task: &TaskSpec) -> DecisionError {
    DecisionError::Infeasible {
        perf_min: task.perf_min,
        best_perf_max: tables
            .iter()
            .flat_map(|t| t.perf_max.iter().copied())
            .fold(0.0, f64::max),
    }
}

pub fn decide(
    tables: &[ModelPerfTable],
    profiles: &MissionProfiles,
    task: &TaskSpec,
) -> Result<Recommendation> {
    if tables.is_empty() {
        return Err(DecisionError::NoTables);
    }
    let mut results = Vec::new();
    for table in tables {
        results.extend(decide_single_model(table, profiles, task)?);
    }
    select(&results, task.beta).ok_or_else(|| infeasible(tables, task))
}

/// Energy-tolerance cut followed by the preference order. `None` when
/// `candidates` is empty.
pub fn select(candidates: &[Candidate], beta: f64) -> Option<Recommendation> {
    let energy_min = candidates
        .iter()
        .map(|c| c.energy)
        .fold(f64::INFINITY, f64::min);
    let limit = beta * energy_min;
    let mut chosen: Option<&Candidate> = None;
    let mut filtered = 0;
    for c in candidates {
        if c.energy > limit {
            filtered += 1;
            continue;
        }
        if chosen.is_none_or(|best| preference(c, best) == Ordering::Less) {
            chosen = Some(c);
        }
    }
    Some(Recommendation {
        chosen: chosen?.clone(),
        candidates_considered: candidates.len(),
        energy_min,
        filtered_by_beta: filtered,
    })
}

/// Exhaustive reference for [`decide`].
///
/// With `prune` the same altitude window is enumerated (computed
/// independently); without it every altitude whose best score meets
/// `perf_min` is enumerated, which exposes the cost of the window.
pub fn brute_force_decide(
    tables: &[ModelPerfTable],
    profiles: &MissionProfiles,
    task: &TaskSpec,
    prune: bool,
) -> Result<Recommendation> {
    if tables.is_empty() {
        return Err(DecisionError::NoTables);
    }
    let mut all = Vec::new();
    for table in tables {
        let indices: Vec<usize> = if prune {
            let qualifying_prefix = table
                .perf_max
                .iter()
                .take_while(|&&p| p >= task.perf_min)
                .count();
            if qualifying_prefix == 0 {
                continue;
            }
            let n = altitude_range(profiles, table, task)?;
            let top = qualifying_prefix - 1;
            (0..table.altitudes.len())
                .filter(|&i| i <= top && i + n >= top)
                .collect()
        } else {
            (0..table.altitudes.len())
                .filter(|&i| table.perf_max[i] >= task.perf_min)
                .collect()
        };
        for i in indices {
            for entry in table.perf_r[i].iter().filter(|e| e.perf >= task.perf_min) {
                all.push(build_candidate(profiles, table, i, entry)?);
            }
        }
    }
    if all.is_empty() {
        return Err(infeasible(tables, task));
    }
    let mut by_energy: Vec<&Candidate> = all.iter().collect();
    by_energy.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    let energy_min = by_energy[0].energy;
    let (mut survivors, dropped): (Vec<&Candidate>, Vec<&Candidate>) = all
        .iter()
        .partition(|c| c.energy <= task.beta * energy_min);
    survivors.sort_by(|a, b| preference(a, b));
    Ok(Recommendation {
        chosen: survivors[0].clone(),
        candidates_considered: all.len(),
        energy_min,
        filtered_by_beta: dropped.len(),
    })
}

/// Windowed decision next to both exhaustive references.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub decision: Option<Recommendation>,
    pub brute_force_pruned: Option<Recommendation>,
    pub brute_force_unpruned: Option<Recommendation>,
    /// Windowed and pruned brute force agree field for field.
    pub oracle_agrees: bool,
    /// Energy of the windowed choice minus that of the unwindowed choice.
    pub regret_energy: Option<f64>,
    /// Score of the unwindowed choice minus that of the windowed choice.
    pub regret_perf: Option<f64>,
}

pub fn audit(
    tables: &[ModelPerfTable],
    profiles: &MissionProfiles,
    task: &TaskSpec,
) -> Result<AuditReport> {
    fn feasible(r: Result<Recommendation>) -> Result<Option<Recommendation>> {
        match r {
            Ok(rec) => Ok(Some(rec)),
            Err(DecisionError::Infeasible { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }
    let decision = feasible(decide(tables, profiles, task))?;
    let pruned = feasible(brute_force_decide(tables, profiles, task, true))?;
    let unpruned = feasible(brute_force_decide(tables, profiles, task, false))?;
    let (regret_energy, regret_perf) = match (&decision, &unpruned) {
        (Some(d), Some(u)) => (
            Some(d.chosen.energy - u.chosen.energy),
            Some(u.chosen.perf - d.chosen.perf),
        ),
        _ => (None, None),
    };
    Ok(AuditReport {
        oracle_agrees: decision == pruned,
        decision,
        brute_force_pruned: pruned,
        brute_force_unpruned: unpruned,
        regret_energy,
        regret_perf,
    })
}
