mod common;

use uavplan_core::simulator::{
    build_perf_table, detection_set, generate_scene, simulate_flight, ClassSpec, Detectability,
    DetectabilityModel, Scene, SceneSpec,
};
use uavplan_core::{FlightParams, MissionProfiles};

fn profiles() -> MissionProfiles {
    common::table_v_profiles()
}

fn detectability(p50: f64, steepness: f64) -> DetectabilityModel {
    DetectabilityModel {
        entries: ["car", "person"]
            .iter()
            .map(|class| Detectability {
                model_id: "m416".into(),
                class: class.to_string(),
                p50_altitude: if *class == "car" { p50 } else { 0.6 * p50 },
                steepness,
            })
            .collect(),
    }
}

fn scene(seed: u64) -> Scene {
    generate_scene(&SceneSpec {
        width_km: 0.15,
        length_km: 0.2,
        classes: vec![
            ClassSpec {
                class: "car".into(),
                density: 300.0,
                size_m: 4.5,
            },
            ClassSpec {
                class: "person".into(),
                density: 200.0,
                size_m: 0.8,
            },
        ],
        seed,
    })
    .unwrap()
}

fn params(h: f64, v: f64, r: f64) -> FlightParams {
    FlightParams {
        model_id: "m416".into(),
        h,
        v,
        r,
    }
}

#[test]
fn flights_are_reproducible() {
    let p = profiles();
    let d = detectability(60.0, 4.0);
    let s = scene(17);
    let a = simulate_flight(&s, &p, &d, &params(40.0, 4.0, 1.3)).unwrap();
    let b = simulate_flight(&scene(17), &p, &d, &params(40.0, 4.0, 1.3)).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
}

#[test]
fn perf_table_is_independent_of_thread_count() {
    let p = profiles();
    let d = detectability(60.0, 4.0);
    let scenes: Vec<Scene> = (0..4).map(scene).collect();
    let grid = [20.0, 40.0, 60.0];
    let rates = [0.5, 1.0, 2.0];
    let parallel = build_perf_table(&scenes, &p, &d, "m416", &grid, &rates, 5.0).unwrap();
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| build_perf_table(&scenes, &p, &d, "m416", &grid, &rates, 5.0).unwrap());
    assert_eq!(parallel, single);
}

#[test]
fn scaled_speed_and_rate_detect_the_same_objects() {
    let p = profiles();
    let d = detectability(60.0, 4.0);
    for seed in 0..20 {
        let s = scene(seed);
        let h = 20.0 + (seed % 5) as f64 * 10.0;
        let v = 1.0 + (seed % 4) as f64 * 0.7;
        let r = 0.3 + (seed % 3) as f64 * 0.45;
        let base = simulate_flight(&s, &p, &d, &params(h, v, r)).unwrap();
        let reference = detection_set(&base, &s);
        for c in [0.5, 2.0, 3.0] {
            let f = simulate_flight(&s, &p, &d, &params(h, c * v, c * r)).unwrap();
            assert_eq!(detection_set(&f, &s), reference, "seed {seed} c {c}");
            assert_eq!(f.trace.frames.len(), base.trace.frames.len());
        }
    }
}

#[test]
fn small_p50_makes_recall_fall_with_altitude() {
    let p = profiles();
    let d = detectability(40.0, 6.0);
    let scenes: Vec<Scene> = (0..8).map(scene).collect();
    let grid = [20.0, 40.0, 60.0, 80.0];
    let t = build_perf_table(&scenes, &p, &d, "m416", &grid, &[1.0, 4.0], 5.0).unwrap();
    for w in t.perf_max.windows(2) {
        assert!(w[1] < w[0], "{:?}", t.perf_max);
    }
}

#[test]
fn endurance_log_fits_back_to_alpha() {
    let p = profiles();
    let d = detectability(60.0, 4.0);
    let s = scene(1);
    let log: Vec<_> = [(20.0, 2.0), (50.0, 5.0), (80.0, 9.0), (100.0, 10.0)]
        .iter()
        .map(|&(h, v)| simulate_flight(&s, &p, &d, &params(h, v, 1.0)).unwrap().energy_log)
        .collect();
    let fit = uavplan_core::calibration::fit_alpha(&log, &p.camera).unwrap();
    assert!((fit.value / p.uav.alpha - 1.0).abs() < 5e-3);
}
