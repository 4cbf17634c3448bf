//! Deterministic lawnmower-scan mission simulator.
//!
//! A scene is a rectangle of static objects. The UAV sweeps parallel strips
//! one footprint wide, sampling every `1 / r` seconds. Whether an object in
//! the footprint is detected is a Bernoulli draw with a logistic probability
//! in altitude, and the draw is keyed to `(seed, object, quantized ground
//! position of the sample)`. Because the key never involves time, flying
//! `(c v, c r)` visits the same positions and yields the same detections as
//! `(v, r)`.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::{EnduranceSample, FootprintSample};
use crate::decision::FlightParams;
use crate::energy::M2_PER_KM2;
use crate::metrics::{
    self, BBox, Detection, DetectionTrace, GroundTruthTracks, TraceFrame, TruthFrame, TruthObject,
};
use crate::profiles::{CameraProfile, MissionProfiles, ModelPerfTable, RatePerf};

/// Ground quantization used for sample positions and randomness keys, m.
pub const CELL_M: f64 = 0.1;
/// Width of a simulated frame, px. Height follows the footprint aspect.
pub const IMAGE_WIDTH_PX: f64 = 1000.0;

const M_PER_KM: f64 = 1000.0;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("`{field}` must be > 0, got {value}")]
    NonPositive { field: String, value: f64 },
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("no detectability entry for model `{model_id}` and class `{class}`")]
    MissingDetectability { model_id: String, class: String },
    #[error("rate {rate} Hz exceeds r_max {r_max} of `{model_id}`")]
    RateAboveMax {
        model_id: String,
        rate: f64,
        r_max: f64,
    },
    #[error("speed {v} m/s exceeds v_max {v_max}")]
    SpeedAboveMax { v: f64, v_max: f64 },
    #[error("need at least one scene")]
    NoScenes,
    #[error(transparent)]
    Metrics(#[from] metrics::MetricsError),
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;

fn positive(field: impl Into<String>, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(SimError::NonPositive {
            field: field.into(),
            value,
        })
    }
}

fn default_size() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub class: String,
    /// Objects per km².
    pub density: f64,
    /// Edge length of the object's square ground box, m.
    #[serde(default = "default_size")]
    pub size_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    /// Cross-track extent, km.
    pub width_km: f64,
    /// Along-track extent, km.
    pub length_km: f64,
    pub classes: Vec<ClassSpec>,
    pub seed: u64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        positive("width_km", self.width_km)?;
        positive("length_km", self.length_km)?;
        for (i, c) in self.classes.iter().enumerate() {
            if !(c.density >= 0.0 && c.density.is_finite()) {
                return Err(SimError::NonPositive {
                    field: format!("classes[{i}].density"),
                    value: c.density,
                });
            }
            positive(format!("classes[{i}].size_m"), c.size_m)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: u64,
    pub class: String,
    /// Cross-track position, m.
    pub x: f64,
    /// Along-track position, m.
    pub y: f64,
    pub size_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub spec: SceneSpec,
    pub objects: Vec<SceneObject>,
}

/// Places a Poisson number of objects per class uniformly over the scene.
pub fn generate_scene(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let area = spec.width_km * spec.length_km;
    let (w, l) = (spec.width_km * M_PER_KM, spec.length_km * M_PER_KM);
    let mut objects = Vec::new();
    let mut next_id = 1;
    for c in &spec.classes {
        let mean = c.density * area;
        let count = if mean > 0.0 {
            Poisson::new(mean).expect("positive mean").sample(&mut rng) as u64
        } else {
            0
        };
        for _ in 0..count {
            objects.push(SceneObject {
                id: next_id,
                class: c.class.clone(),
                x: rng.random_range(0.0..w),
                y: rng.random_range(0.0..l),
                size_m: c.size_m,
            });
            next_id += 1;
        }
    }
    Ok(Scene {
        spec: spec.clone(),
        objects,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detectability {
    pub model_id: String,
    pub class: String,
    /// Altitude of 50% per-sample detection probability, m.
    pub p50_altitude: f64,
    pub steepness: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectabilityModel {
    pub entries: Vec<Detectability>,
}

impl DetectabilityModel {
    pub fn validate(&self) -> Result<()> {
        for (i, e) in self.entries.iter().enumerate() {
            positive(format!("entries[{i}].p50_altitude"), e.p50_altitude)?;
            if !(e.steepness > 0.0) {
                return Err(SimError::NonPositive {
                    field: format!("entries[{i}].steepness"),
                    value: e.steepness,
                });
            }
        }
        Ok(())
    }

    pub fn entry(&self, model_id: &str, class: &str) -> Option<&Detectability> {
        self.entries
            .iter()
            .find(|e| e.model_id == model_id && e.class == class)
    }

    /// Per-sample detection probability at altitude `h`.
    pub fn probability(&self, model_id: &str, class: &str, h: f64) -> Result<f64> {
        let e = self
            .entry(model_id, class)
            .ok_or_else(|| SimError::MissingDetectability {
                model_id: model_id.to_string(),
                class: class.to_string(),
            })?;
        Ok(logistic(e.steepness * (e.p50_altitude - h) / e.p50_altitude))
    }
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform draw in [0, 1) determined by the key alone.
fn keyed_uniform(seed: u64, object: u64, x_cell: i64, y_cell: i64) -> f64 {
    let mut h = splitmix(seed);
    h = splitmix(h ^ object);
    h = splitmix(h ^ x_cell as u64);
    h = splitmix(h ^ y_cell as u64);
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Footprint dimensions at altitude `h`: cross-track width (also the strip
/// spacing) and along-track depth.
pub fn footprint_dims(camera: &CameraProfile, h: f64) -> (f64, f64) {
    let width = camera.theta * h;
    let depth = match (camera.theta_x, camera.theta_y) {
        (Some(_), Some(ty)) => 2.0 * h * ty.tan(),
        _ => width,
    };
    (width, depth)
}

/// Lawnmower geometry in quantized cells.
#[derive(Debug, Clone, Copy)]
struct Sweep {
    strip_width: f64,
    depth: f64,
    strips: i64,
    strip_cells: i64,
}

impl Sweep {
    fn new(scene: &SceneSpec, camera: &CameraProfile, h: f64) -> Self {
        let (strip_width, depth) = footprint_dims(camera, h);
        let strips = ((scene.width_km * M_PER_KM) / strip_width).ceil().max(1.0) as i64;
        let strip_cells = ((scene.length_km * M_PER_KM) / CELL_M).round().max(1.0) as i64;
        Self {
            strip_width,
            depth,
            strips,
            strip_cells,
        }
    }

    fn total_cells(&self) -> i64 {
        self.strips * self.strip_cells
    }

    /// Strip index and along-track cell of path cell `s`.
    fn locate(&self, s: i64) -> (i64, i64) {
        let strip = (s / self.strip_cells).min(self.strips - 1);
        let along = s - strip * self.strip_cells;
        let y = if strip % 2 == 0 {
            along
        } else {
            self.strip_cells - along
        };
        (strip, y)
    }

    fn strip_center(&self, strip: i64) -> f64 {
        (strip as f64 + 0.5) * self.strip_width
    }

    /// Path cell at which the UAV is abreast of along-track cell `y` in `strip`.
    fn abreast(&self, strip: i64, y: i64) -> i64 {
        let along = if strip % 2 == 0 {
            y
        } else {
            self.strip_cells - y
        };
        strip * self.strip_cells + along
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedFlight {
    pub params: FlightParams,
    pub trace: DetectionTrace,
    pub truth: GroundTruthTracks,
    pub energy_log: EnduranceSample,
}

struct Frame<'a> {
    objects: Vec<&'a SceneObject>,
    x_cell: i64,
    y_cell: i64,
    x_center: f64,
    y_center: f64,
}

fn pixel_box(obj: &SceneObject, frame: &Frame, sweep: &Sweep) -> BBox {
    let scale = IMAGE_WIDTH_PX / sweep.strip_width;
    let left = frame.x_center - 0.5 * sweep.strip_width;
    let top = frame.y_center - 0.5 * sweep.depth;
    let half = 0.5 * obj.size_m;
    BBox::new(
        (obj.x - half - left) * scale,
        (obj.y - half - top) * scale,
        (obj.x + half - left) * scale,
        (obj.y + half - top) * scale,
    )
}

/// Objects bucketed by the strip whose footprint column contains them,
/// sorted along track.
fn bucket_objects<'a>(scene: &'a Scene, sweep: &Sweep) -> Vec<Vec<&'a SceneObject>> {
    let mut buckets: Vec<Vec<&SceneObject>> = vec![Vec::new(); sweep.strips as usize];
    for o in &scene.objects {
        let k = ((o.x / sweep.strip_width).floor() as i64).clamp(0, sweep.strips - 1);
        buckets[k as usize].push(o);
    }
    for b in &mut buckets {
        b.sort_by(|a, b| a.y.total_cmp(&b.y).then(a.id.cmp(&b.id)));
    }
    buckets
}

fn frame_at<'a>(buckets: &[Vec<&'a SceneObject>], sweep: &Sweep, s: i64) -> Frame<'a> {
    let (strip, y_cell) = sweep.locate(s);
    let x_center = sweep.strip_center(strip);
    let y_center = y_cell as f64 * CELL_M;
    let bucket = &buckets[strip as usize];
    let lo = y_center - 0.5 * sweep.depth;
    let hi = y_center + 0.5 * sweep.depth;
    let start = bucket.partition_point(|o| o.y < lo);
    let end = bucket.partition_point(|o| o.y < hi);
    Frame {
        objects: bucket[start..end].to_vec(),
        x_cell: (x_center / CELL_M).round() as i64,
        y_cell,
        x_center,
        y_center,
    }
}

fn truth_frame(timestamp: f64, frame: &Frame, sweep: &Sweep) -> TruthFrame {
    TruthFrame {
        timestamp,
        objects: frame
            .objects
            .iter()
            .map(|o| TruthObject {
                track_id: o.id,
                class: o.class.clone(),
                bbox: pixel_box(o, frame, sweep),
            })
            .collect(),
    }
}

const SPACING_GRID: f64 = (1u64 << 20) as f64;

/// Ground distance between consecutive samples in cells, snapped to a dyadic
/// grid so that `v / r` and `(c v) / (c r)` agree bit for bit and `j` times
/// the spacing is exact.
fn sample_spacing_cells(v: f64, r: f64) -> f64 {
    (v / r / CELL_M * SPACING_GRID).round() / SPACING_GRID
}

/// Noiseless endurance measurement implied by the UAV profile.
pub fn modeled_endurance(profiles: &MissionProfiles, h: f64, v: f64) -> EnduranceSample {
    EnduranceSample {
        h,
        v,
        t: M2_PER_KM2 * profiles.uav.alpha / profiles.camera.theta,
        e: profiles.uav.benchmark_energy,
    }
}

pub fn simulate_flight(
    scene: &Scene,
    profiles: &MissionProfiles,
    detectability: &DetectabilityModel,
    params: &FlightParams,
) -> Result<SimulatedFlight> {
    positive("h", params.h)?;
    positive("v", params.v)?;
    positive("r", params.r)?;
    let model = profiles
        .edge
        .model(&params.model_id)
        .ok_or_else(|| SimError::UnknownModel(params.model_id.clone()))?;
    if params.r > model.r_max {
        return Err(SimError::RateAboveMax {
            model_id: model.model_id.clone(),
            rate: params.r,
            r_max: model.r_max,
        });
    }
    if params.v > profiles.uav.v_max {
        return Err(SimError::SpeedAboveMax {
            v: params.v,
            v_max: profiles.uav.v_max,
        });
    }
    let mut probability = BTreeMap::new();
    for c in &scene.spec.classes {
        probability.insert(
            c.class.as_str(),
            detectability.probability(&params.model_id, &c.class, params.h)?,
        );
    }

    let sweep = Sweep::new(&scene.spec, &profiles.camera, params.h);
    let buckets = bucket_objects(scene, &sweep);
    let spacing_cells = sample_spacing_cells(params.v, params.r);
    let seed = scene.spec.seed;

    let mut trace_frames = Vec::new();
    let mut truth_frames: BTreeMap<i64, TruthFrame> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    let mut j = 0u64;
    loop {
        let s = (j as f64 * spacing_cells).round() as i64;
        if s > sweep.total_cells() {
            break;
        }
        let timestamp = j as f64 / params.r;
        let frame = frame_at(&buckets, &sweep, s);
        let detections = frame
            .objects
            .iter()
            .filter(|o| {
                keyed_uniform(seed, o.id, frame.x_cell, frame.y_cell) < probability[o.class.as_str()]
            })
            .map(|o| Detection {
                class: o.class.clone(),
                bbox: pixel_box(o, &frame, &sweep),
            })
            .collect();
        seen.extend(frame.objects.iter().map(|o| o.id));
        trace_frames.push(TraceFrame {
            timestamp,
            detections,
        });
        truth_frames.insert(s, truth_frame(timestamp, &frame, &sweep));
        j += 1;
    }

    // Objects never inside a sampled footprint still belong to the task:
    // annotate them where the UAV passes abreast.
    for (strip, bucket) in buckets.iter().enumerate() {
        for o in bucket {
            if seen.contains(&o.id) {
                continue;
            }
            let y_cell = ((o.y / CELL_M).round() as i64).clamp(0, sweep.strip_cells);
            let s = sweep.abreast(strip as i64, y_cell);
            if truth_frames.contains_key(&s) {
                continue;
            }
            let frame = frame_at(&buckets, &sweep, s);
            let timestamp = s as f64 * CELL_M / params.v;
            truth_frames.insert(s, truth_frame(timestamp, &frame, &sweep));
        }
    }
    // Sampled path cells strictly increase with j, so ordering by cell keeps
    // timestamps increasing for both kinds of frame.
    let mut truth = GroundTruthTracks {
        frames: truth_frames.into_values().collect(),
    };
    dedupe_timestamps(&mut truth);

    Ok(SimulatedFlight {
        params: params.clone(),
        trace: DetectionTrace {
            frames: trace_frames,
        },
        truth,
        energy_log: modeled_endurance(profiles, params.h, params.v),
    })
}

/// Drops abreast frames whose timestamp collides with or precedes a
/// neighbour after rounding.
fn dedupe_timestamps(truth: &mut GroundTruthTracks) {
    let mut last = f64::NEG_INFINITY;
    truth.frames.retain(|f| {
        let keep = f.timestamp > last;
        if keep {
            last = f.timestamp;
        }
        keep
    });
}

/// Track-level recall of one simulated flight.
pub fn flight_recall(flight: &SimulatedFlight) -> Result<f64> {
    Ok(metrics::evaluate(&flight.trace, &flight.truth, metrics::DEFAULT_IOU_THRESHOLD)?.recall)
}

/// Set of `(sample index, object id)` detections in a flight.
pub fn detection_set(flight: &SimulatedFlight, scene: &Scene) -> BTreeSet<(usize, u64)> {
    // Detection boxes coincide with truth boxes, so ids can be recovered
    // through the truth frame at the same timestamp.
    let mut out = BTreeSet::new();
    for (j, frame) in flight.trace.frames.iter().enumerate() {
        let Some(tf) = flight.truth.frame_at(frame.timestamp) else {
            continue;
        };
        for d in &frame.detections {
            if let Some(o) = tf.objects.iter().find(|o| o.bbox == d.bbox && o.class == d.class) {
                out.insert((j, o.track_id));
            }
        }
    }
    debug_assert!(out.iter().all(|(_, id)| scene.objects.iter().any(|o| o.id == *id)));
    out
}

/// Mean recall over `scenes` at altitude `h`, speed `v` and rate `r`.
pub fn mean_recall(
    scenes: &[Scene],
    profiles: &MissionProfiles,
    detectability: &DetectabilityModel,
    model_id: &str,
    h: f64,
    v: f64,
    r: f64,
) -> Result<f64> {
    let recalls: Vec<f64> = scenes
        .par_iter()
        .map(|scene| {
            let params = FlightParams {
                model_id: model_id.to_string(),
                h,
                v,
                r,
            };
            flight_recall(&simulate_flight(scene, profiles, detectability, &params)?)
        })
        .collect::<Result<_>>()?;
    Ok(recalls.iter().sum::<f64>() / recalls.len() as f64)
}

/// Measures a performance table over a scene ensemble: for every altitude
/// and every rate in `rates`, the mean recall at benchmark speed `v_s`.
pub fn build_perf_table(
    scenes: &[Scene],
    profiles: &MissionProfiles,
    detectability: &DetectabilityModel,
    model_id: &str,
    altitudes: &[f64],
    rates: &[f64],
    v_s: f64,
) -> Result<ModelPerfTable> {
    if scenes.is_empty() {
        return Err(SimError::NoScenes);
    }
    let model = profiles
        .edge
        .model(model_id)
        .ok_or_else(|| SimError::UnknownModel(model_id.to_string()))?;
    for &r in rates {
        if r > model.r_max {
            return Err(SimError::RateAboveMax {
                model_id: model_id.to_string(),
                rate: r,
                r_max: model.r_max,
            });
        }
    }
    let cells: Vec<(usize, usize)> = (0..altitudes.len())
        .flat_map(|i| (0..rates.len()).map(move |k| (i, k)))
        .collect();
    let means: Vec<f64> = cells
        .par_iter()
        .map(|&(i, k)| {
            mean_recall(
                scenes,
                profiles,
                detectability,
                model_id,
                altitudes[i],
                v_s,
                rates[k],
            )
        })
        .collect::<Result<_>>()?;

    let mut perf_r = vec![Vec::new(); altitudes.len()];
    for (&(i, k), &perf) in cells.iter().zip(&means) {
        perf_r[i].push(RatePerf {
            perf,
            rate: rates[k],
        });
    }
    let perf_max = perf_r
        .iter()
        .map(|row| row.iter().map(|p| p.perf).fold(0.0, f64::max))
        .collect();
    Ok(ModelPerfTable {
        model_id: model_id.to_string(),
        benchmark_speed: v_s,
        altitudes: altitudes.to_vec(),
        perf_max,
        perf_r,
    })
}

/// Footprint-width log `l = θ h`, with optional multiplicative Gaussian
/// noise of relative standard deviation `noise`.
pub fn synthetic_footprint_log(
    camera: &CameraProfile,
    altitudes: &[f64],
    repeats: usize,
    noise: f64,
    seed: u64,
) -> Vec<FootprintSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut out = Vec::with_capacity(altitudes.len() * repeats);
    for _ in 0..repeats {
        for &h in altitudes {
            let eps: f64 = normal.sample(&mut rng);
            out.push(FootprintSample {
                h,
                l: camera.theta * h * (1.0 + noise * eps),
            });
        }
    }
    out
}

/// Endurance log over an altitude × speed grid; flight times carry
/// multiplicative Gaussian noise of relative standard deviation `noise`.
pub fn synthetic_endurance_log(
    profiles: &MissionProfiles,
    altitudes: &[f64],
    speeds: &[f64],
    noise: f64,
    seed: u64,
) -> Vec<EnduranceSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut out = Vec::with_capacity(altitudes.len() * speeds.len());
    for &h in altitudes {
        for &v in speeds {
            let mut s = modeled_endurance(profiles, h, v);
            let eps: f64 = normal.sample(&mut rng);
            s.t *= 1.0 + noise * eps;
            out.push(s);
        }
    }
    out
}
