#![allow(dead_code)]

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use uavplan_core::profiles::RatePerf;
use uavplan_core::{
    CameraProfile, EdgeDeviceProfile, EdgeModelProfile, MissionProfiles, ModelPerfTable, TaskSpec,
    UavProfile,
};

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

/// Jetson Xavier NX figures: TensorRT-16bit models plus the TensorFlow
/// 1024 model whose running power appears in the closed-form constants.
pub fn table_v_profiles() -> MissionProfiles {
    let model = |id: &str, p_run: f64, r_max: f64| EdgeModelProfile {
        model_id: id.into(),
        p_run,
        r_max,
    };
    MissionProfiles {
        camera: CameraProfile::new(1.617),
        uav: UavProfile {
            alpha: 1.57e-4,
            benchmark_energy: 2.02,
            v_max: 10.0,
        },
        edge: EdgeDeviceProfile {
            p_standby: 0.00168,
            models: vec![
                model("m416", 0.00241, 18.232),
                model("m608", 0.00273, 6.379),
                model("m800", 0.00298, 3.921),
                model("m1024", 0.00257, 1.749),
                model("tf1024", 0.00537, 10.0),
            ],
        },
        tables: vec![],
        task: TaskSpec {
            perf_min: 0.8,
            beta: 1.05,
            n: Some(2),
        },
    }
}

/// A random decision problem.
#[derive(Debug, Clone)]
pub struct Problem {
    pub profiles: MissionProfiles,
    pub tables: Vec<ModelPerfTable>,
    pub task: TaskSpec,
}

fn coarse(rng: &mut ChaCha8Rng, steps: u32) -> f64 {
    rng.random_range(0..=steps) as f64 / steps as f64
}

/// Random profiles and tables. Scores and rates come from coarse grids so
/// that ties in score, energy and rate are frequent.
pub fn random_problem(rng: &mut ChaCha8Rng) -> Problem {
    let n_models = rng.random_range(1..=4);
    let v_max = *[5.0, 8.0, 10.0, 12.0].choose(rng).unwrap();
    let models: Vec<EdgeModelProfile> = (0..n_models)
        .map(|m| EdgeModelProfile {
            model_id: format!("model{m}"),
            p_run: *[0.00241, 0.00257, 0.00273, 0.00298, 0.004].choose(rng).unwrap(),
            r_max: *[2.0, 4.0, 8.0, 10.0].choose(rng).unwrap(),
        })
        .collect();
    let n_alt = rng.random_range(3..=9);
    let start = *[10.0, 20.0].choose(rng).unwrap();
    let step = *[5.0, 10.0].choose(rng).unwrap();
    let altitudes: Vec<f64> = (0..n_alt).map(|i| start + step * i as f64).collect();

    let tables = models
        .iter()
        .map(|m| {
            let benchmark_speed = *[2.0, 5.0, v_max].choose(rng).unwrap();
            let mut perf_max = Vec::new();
            let mut perf_r = Vec::new();
            let mut level = 1.0;
            for _ in &altitudes {
                // Mostly non-increasing, occasionally bumping back up.
                level = if rng.random_bool(0.15) {
                    coarse(rng, 20)
                } else {
                    level - coarse(rng, 20) * 0.3
                };
                level = level.clamp(0.0, 1.0);
                let k = rng.random_range(1..=8);
                let row: Vec<RatePerf> = (0..k)
                    .map(|_| RatePerf {
                        perf: (level - coarse(rng, 10) * 0.3).max(0.0),
                        rate: m.r_max * rng.random_range(1..=8) as f64 / 8.0,
                    })
                    .collect();
                perf_max.push(row.iter().map(|p| p.perf).fold(0.0, f64::max));
                perf_r.push(row);
            }
            ModelPerfTable {
                model_id: m.model_id.clone(),
                benchmark_speed,
                altitudes: altitudes.clone(),
                perf_max,
                perf_r,
            }
        })
        .collect();
    let task = TaskSpec {
        perf_min: coarse(rng, 20) * 0.9,
        beta: *[1.0, 1.02, 1.05, 1.2, 1.5].choose(rng).unwrap(),
        n: if rng.random_bool(0.2) {
            None
        } else {
            Some(rng.random_range(0..=4))
        },
    };
    let profiles = MissionProfiles {
        camera: CameraProfile::new(1.617),
        uav: UavProfile {
            alpha: 1.57e-4,
            benchmark_energy: 2.02,
            v_max,
        },
        edge: EdgeDeviceProfile {
            p_standby: 0.00168,
            models,
        },
        tables: vec![],
        task: task.clone(),
    };
    Problem {
        profiles,
        tables,
        task,
    }
}
