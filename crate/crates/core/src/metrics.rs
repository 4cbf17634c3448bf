//! Task-completion metrics for detection traces.
//!
//! Precision is frame-level: every emitted detection is either correct
//! (same class, IoU above the threshold with an unclaimed truth box) or a
//! false positive. Recall is track-level: a ground-truth object counts as
//! found once it has been detected correctly in any sampled frame.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("{what}: box [{x_min}, {y_min}, {x_max}, {y_max}] has no area")]
    InvalidBox {
        what: String,
        x_min: f64,
        y_min: f64,
        x_max: f64,
        y_max: f64,
    },
    #[error("{what}: timestamps must be strictly increasing (frame {index})")]
    Timestamps { what: &'static str, index: usize },
    #[error("truth frame {timestamp}: track {track_id} annotated twice")]
    DuplicateTrack { timestamp: f64, track_id: u64 },
    #[error("trace frame at t={0} s has no ground-truth annotation entry")]
    MissingTruthFrame(f64),
    #[error("iou threshold {0} outside [0, 1]")]
    Threshold(f64),
    #[error("{}: {source}", path.display())]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: parse error: {source}", path.display())]
    Parse {
        path: std::path::PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T, E = MetricsError> = std::result::Result<T, E>;

/// Axis-aligned box in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Self {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }

    fn validate(&self, what: impl FnOnce() -> String) -> Result<()> {
        if self.x_min < self.x_max && self.y_min < self.y_max {
            Ok(())
        } else {
            Err(MetricsError::InvalidBox {
                what: what(),
                x_min: self.x_min,
                y_min: self.y_min,
                x_max: self.x_max,
                y_max: self.y_max,
            })
        }
    }
}

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let w = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let h = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = w * h;
    if inter == 0.0 {
        return 0.0;
    }
    inter / (a.area() + b.area() - inter)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub class: String,
    #[serde(rename = "box")]
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFrame {
    pub timestamp: f64,
    pub detections: Vec<Detection>,
}

/// Detections emitted at each sampled frame.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectionTrace {
    pub frames: Vec<TraceFrame>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthObject {
    pub track_id: u64,
    pub class: String,
    #[serde(rename = "box")]
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFrame {
    pub timestamp: f64,
    pub objects: Vec<TruthObject>,
}

/// Identity-tracked ground truth, stored frame by frame.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthTracks {
    pub frames: Vec<TruthFrame>,
}

fn strictly_increasing(ts: impl Iterator<Item = f64>, what: &'static str) -> Result<()> {
    let mut prev = f64::NEG_INFINITY;
    for (index, t) in ts.enumerate() {
        if t.is_nan() || t <= prev {
            return Err(MetricsError::Timestamps { what, index });
        }
        prev = t;
    }
    Ok(())
}

impl DetectionTrace {
    pub fn validate(&self) -> Result<()> {
        strictly_increasing(self.frames.iter().map(|f| f.timestamp), "trace")?;
        for f in &self.frames {
            for (i, d) in f.detections.iter().enumerate() {
                d.bbox
                    .validate(|| format!("trace t={} detection {i}", f.timestamp))?;
            }
        }
        Ok(())
    }

    pub fn detection_count(&self) -> usize {
        self.frames.iter().map(|f| f.detections.len()).sum()
    }

    /// Frames that a sampler running at `rate` Hz would have kept: for each
    /// tick `t0 + k / rate` the nearest recorded frame, each frame at most
    /// once.
    pub fn subsample(&self, rate: f64) -> DetectionTrace {
        let Some(first) = self.frames.first() else {
            return DetectionTrace::default();
        };
        let t0 = first.timestamp;
        let end = self.frames.last().map_or(t0, |f| f.timestamp);
        let period = 1.0 / rate;
        let mut picked = BTreeSet::new();
        let mut k = 0u64;
        loop {
            let tick = t0 + k as f64 * period;
            if tick > end {
                break;
            }
            let idx = self
                .frames
                .partition_point(|f| f.timestamp < tick)
                .min(self.frames.len() - 1);
            let best = if idx > 0
                && (tick - self.frames[idx - 1].timestamp) <= (self.frames[idx].timestamp - tick)
            {
                idx - 1
            } else {
                idx
            };
            picked.insert(best);
            k += 1;
        }
        DetectionTrace {
            frames: picked.into_iter().map(|i| self.frames[i].clone()).collect(),
        }
    }
}

impl GroundTruthTracks {
    pub fn validate(&self) -> Result<()> {
        strictly_increasing(self.frames.iter().map(|f| f.timestamp), "truth")?;
        for f in &self.frames {
            let mut seen = BTreeSet::new();
            for o in &f.objects {
                if !seen.insert(o.track_id) {
                    return Err(MetricsError::DuplicateTrack {
                        timestamp: f.timestamp,
                        track_id: o.track_id,
                    });
                }
                o.bbox
                    .validate(|| format!("truth t={} track {}", f.timestamp, o.track_id))?;
            }
        }
        Ok(())
    }

    /// Every annotated track with its occurrences, keyed by id.
    pub fn tracks(&self) -> BTreeMap<u64, Vec<(f64, &TruthObject)>> {
        let mut out: BTreeMap<u64, Vec<(f64, &TruthObject)>> = BTreeMap::new();
        for f in &self.frames {
            for o in &f.objects {
                out.entry(o.track_id).or_default().push((f.timestamp, o));
            }
        }
        out
    }

    pub fn track_ids(&self) -> BTreeSet<u64> {
        self.frames
            .iter()
            .flat_map(|f| f.objects.iter().map(|o| o.track_id))
            .collect()
    }

    pub fn frame_at(&self, timestamp: f64) -> Option<&TruthFrame> {
        let tol = 1e-9 * timestamp.abs().max(1.0);
        let idx = self
            .frames
            .partition_point(|f| f.timestamp < timestamp - tol);
        self.frames
            .get(idx)
            .filter(|f| (f.timestamp - timestamp).abs() <= tol)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub tp1: usize,
    pub fp: usize,
    pub tp2: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    /// False when no detections were emitted; `precision` is then 1.0.
    pub precision_defined: bool,
    /// False when no tracks were annotated; `recall` is then 1.0.
    pub recall_defined: bool,
}

/// Greedy one-to-one matching of detections to same-class truth boxes by
/// descending IoU. Only pairs with IoU strictly above `threshold` match.
/// Returns `(detection index, truth index)` pairs.
pub fn match_frame(
    detections: &[Detection],
    truth: &[TruthObject],
    threshold: f64,
) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for (di, d) in detections.iter().enumerate() {
        for (ti, t) in truth.iter().enumerate() {
            if d.class != t.class {
                continue;
            }
            let score = iou(&d.bbox, &t.bbox);
            if score > threshold {
                pairs.push((score, di, ti));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut det_used = vec![false; detections.len()];
    let mut truth_used = vec![false; truth.len()];
    let mut out = Vec::new();
    for (_, di, ti) in pairs {
        if !det_used[di] && !truth_used[ti] {
            det_used[di] = true;
            truth_used[ti] = true;
            out.push((di, ti));
        }
    }
    out
}

pub fn evaluate(
    trace: &DetectionTrace,
    truth: &GroundTruthTracks,
    iou_threshold: f64,
) -> Result<MetricReport> {
    if !(0.0..=1.0).contains(&iou_threshold) {
        return Err(MetricsError::Threshold(iou_threshold));
    }
    trace.validate()?;
    truth.validate()?;

    let mut tp1 = 0;
    let mut fp = 0;
    let mut found = BTreeSet::new();
    for frame in &trace.frames {
        let annotated = truth
            .frame_at(frame.timestamp)
            .ok_or(MetricsError::MissingTruthFrame(frame.timestamp))?;
        let matches = match_frame(&frame.detections, &annotated.objects, iou_threshold);
        tp1 += matches.len();
        fp += frame.detections.len() - matches.len();
        found.extend(matches.iter().map(|&(_, ti)| annotated.objects[ti].track_id));
    }
    let total = truth.track_ids().len();
    let tp2 = found.len();
    let fn_ = total - tp2;
    let precision_defined = tp1 + fp > 0;
    let recall_defined = total > 0;
    Ok(MetricReport {
        tp1,
        fp,
        tp2,
        fn_,
        precision: if precision_defined {
            tp1 as f64 / (tp1 + fp) as f64
        } else {
            1.0
        },
        recall: if recall_defined {
            tp2 as f64 / total as f64
        } else {
            1.0
        },
        precision_defined,
        recall_defined,
    })
}

fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|source| MetricsError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| MetricsError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<DetectionTrace> {
    let trace: DetectionTrace = load_json(path.as_ref())?;
    trace.validate()?;
    Ok(trace)
}

pub fn load_truth(path: impl AsRef<Path>) -> Result<GroundTruthTracks> {
    let truth: GroundTruthTracks = load_json(path.as_ref())?;
    truth.validate()?;
    Ok(truth)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(class: &str, b: BBox) -> Detection {
        Detection {
            class: class.into(),
            bbox: b,
        }
    }

    fn obj(id: u64, class: &str, b: BBox) -> TruthObject {
        TruthObject {
            track_id: id,
            class: class.into(),
            bbox: b,
        }
    }

    #[test]
    fn iou_basic_cases() {
        let a = BBox::new(0.0, 0.0, 2.0, 2.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &BBox::new(5.0, 5.0, 6.0, 6.0)), 0.0);
        assert_eq!(iou(&a, &BBox::new(2.0, 0.0, 3.0, 2.0)), 0.0);
        let b = BBox::new(1.0, 0.0, 3.0, 2.0);
        assert!((iou(&a, &b) - 1.0 / 3.0).abs() < 1e-15);
    }

    // Truth box 10x10; detection shifted by dx along x has IoU (10-dx)/(10+dx).
    fn shifted(dx: f64) -> BBox {
        BBox::new(dx, 0.0, 10.0 + dx, 10.0)
    }

    #[test]
    fn found_once_counts_for_recall() {
        let truth_box = BBox::new(0.0, 0.0, 10.0, 10.0);
        // IoU 0.8 -> dx = 10/9
        let d = shifted(10.0 / 9.0);
        assert!((iou(&d, &truth_box) - 0.8).abs() < 1e-12);
        let truth = GroundTruthTracks {
            frames: vec![
                TruthFrame {
                    timestamp: 0.0,
                    objects: vec![obj(1, "car", truth_box)],
                },
                TruthFrame {
                    timestamp: 1.0,
                    objects: vec![obj(1, "car", truth_box)],
                },
            ],
        };
        let trace = DetectionTrace {
            frames: vec![
                TraceFrame {
                    timestamp: 0.0,
                    detections: vec![det("car", d)],
                },
                TraceFrame {
                    timestamp: 1.0,
                    detections: vec![],
                },
            ],
        };
        let r = evaluate(&trace, &truth, 0.5).unwrap();
        assert_eq!((r.tp1, r.fp, r.tp2, r.fn_), (1, 0, 1, 0));
        assert_eq!((r.precision, r.recall), (1.0, 1.0));
    }

    #[test]
    fn low_iou_is_false_positive() {
        let truth_box = BBox::new(0.0, 0.0, 10.0, 10.0);
        // IoU 0.4 -> dx = 30/7
        let d = shifted(30.0 / 7.0);
        assert!((iou(&d, &truth_box) - 0.4).abs() < 1e-12);
        let truth = GroundTruthTracks {
            frames: vec![TruthFrame {
                timestamp: 0.0,
                objects: vec![obj(7, "person", truth_box)],
            }],
        };
        let trace = DetectionTrace {
            frames: vec![TraceFrame {
                timestamp: 0.0,
                detections: vec![det("person", d)],
            }],
        };
        let r = evaluate(&trace, &truth, 0.5).unwrap();
        assert_eq!((r.tp1, r.fp, r.tp2, r.fn_), (0, 1, 0, 1));
        assert_eq!((r.precision, r.recall), (0.0, 0.0));
    }

    #[test]
    fn empty_trace_flags_precision() {
        let b = BBox::new(0.0, 0.0, 1.0, 1.0);
        let truth = GroundTruthTracks {
            frames: vec![TruthFrame {
                timestamp: 0.0,
                objects: vec![obj(1, "car", b), obj(2, "car", b), obj(3, "car", b)],
            }],
        };
        let r = evaluate(&DetectionTrace::default(), &truth, 0.5).unwrap();
        assert_eq!((r.tp2, r.fn_), (0, 3));
        assert_eq!(r.recall, 0.0);
        assert_eq!(r.precision, 1.0);
        assert!(!r.precision_defined);
        assert!(r.recall_defined);
    }

    #[test]
    fn iou_exactly_at_threshold_is_incorrect() {
        let truth_box = BBox::new(0.0, 0.0, 10.0, 10.0);
        // dx = 10/3 -> IoU = (20/3)/(40/3) = 0.5
        let d = BBox::new(0.0, 0.0, 5.0, 10.0);
        assert_eq!(iou(&d, &truth_box), 0.5);
        let truth = [obj(1, "car", truth_box)];
        assert!(match_frame(&[det("car", d)], &truth, 0.5).is_empty());
    }

    #[test]
    fn class_match_is_case_sensitive() {
        let b = BBox::new(0.0, 0.0, 1.0, 1.0);
        assert!(match_frame(&[det("Car", b)], &[obj(1, "car", b)], 0.5).is_empty());
    }

    #[test]
    fn one_truth_claimed_once() {
        let b = BBox::new(0.0, 0.0, 10.0, 10.0);
        let m = match_frame(
            &[det("car", shifted(1.0)), det("car", b)],
            &[obj(1, "car", b)],
            0.5,
        );
        assert_eq!(m, vec![(1, 0)]);
    }

    #[test]
    fn missing_truth_frame_is_error() {
        let trace = DetectionTrace {
            frames: vec![TraceFrame {
                timestamp: 2.0,
                detections: vec![],
            }],
        };
        assert!(matches!(
            evaluate(&trace, &GroundTruthTracks::default(), 0.5),
            Err(MetricsError::MissingTruthFrame(_))
        ));
    }

    #[test]
    fn rejects_bad_inputs() {
        let trace = DetectionTrace {
            frames: vec![
                TraceFrame {
                    timestamp: 1.0,
                    detections: vec![],
                },
                TraceFrame {
                    timestamp: 1.0,
                    detections: vec![],
                },
            ],
        };
        assert!(matches!(
            trace.validate(),
            Err(MetricsError::Timestamps { index: 1, .. })
        ));
        let bad = DetectionTrace {
            frames: vec![TraceFrame {
                timestamp: 0.0,
                detections: vec![det("car", BBox::new(1.0, 0.0, 1.0, 2.0))],
            }],
        };
        assert!(matches!(bad.validate(), Err(MetricsError::InvalidBox { .. })));
    }

    #[test]
    fn subsample_picks_nearest_frames() {
        let trace = DetectionTrace {
            frames: (0..10)
                .map(|i| TraceFrame {
                    timestamp: i as f64 * 0.5,
                    detections: vec![],
                })
                .collect(),
        };
        let ts: Vec<f64> = trace.subsample(1.0).frames.iter().map(|f| f.timestamp).collect();
        assert_eq!(ts, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(trace.subsample(100.0).frames.len(), 10);
    }
}
