//! Pose data ingestion: frame records, labels, sliding windows, and
//! per-window coordinate normalization.
//!
//! Two on-disk layouts are supported. The native layout is CSV, one row per
//! (frame, person):
//!
//! ```text
//! video_id,frame_id,person_id,x1,y1,...,x17,y17[,c1..c17]
//! ```
//!
//! with labels in a second CSV of `video_id,frame_id,label` rows. The
//! `poselift` adapter instead reads a directory of `<video_id>.json` files in
//! the common pose-tracking dump format (person id → frame id → keypoint
//! triplets), plus a `labels.csv` in the same directory; it is the single
//! point of coupling to that dataset's layout.
//!
//! Keypoint confidences, when present, are parsed and discarded: the model
//! consumes (x, y) only.

use std::collections::BTreeMap;
use std::path::Path;

use numkit::Array;
use serde::Deserialize;

use crate::{Error, Result};

/// Keypoints per skeleton in all input files (COCO17 layout).
pub const KEYPOINTS: usize = 17;

/// Joint indices used to synthesize the virtual center node: both shoulders
/// and both hips.
pub const CENTER_JOINTS: [usize; 4] = [5, 6, 11, 12];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
}

/// One tracked person in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseFrame {
    pub video_id: String,
    pub frame_index: u64,
    pub person_id: i64,
    pub keypoints: Vec<Keypoint>,
}

/// Ground-truth label for one frame of one video (0 normal, 1 shoplifting).
#[derive(Debug, Clone, PartialEq)]
pub struct FrameLabel {
    pub video_id: String,
    pub frame_index: u64,
    pub label: u8,
}

/// `n` consecutive frames of one tracked person.
#[derive(Debug, Clone)]
pub struct PoseWindow {
    pub video_id: String,
    pub person_id: i64,
    pub start_frame: u64,
    pub frames: Vec<PoseFrame>,
}

impl PoseWindow {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// A record that could not be ingested, with its source location.
#[derive(Debug, Clone)]
pub struct RecordError {
    pub location: String,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    NativeCsv,
    PoseLift,
}

impl DataFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(DataFormat::NativeCsv),
            "poselift" => Ok(DataFormat::PoseLift),
            other => Err(Error::Config(format!(
                "unknown data format '{other}' (expected 'csv' or 'poselift')"
            ))),
        }
    }
}

/// Load pose frames (and, for the poselift layout, co-located labels).
pub fn load_poses(path: &Path, format: DataFormat) -> Result<(Vec<PoseFrame>, Vec<RecordError>)> {
    match format {
        DataFormat::NativeCsv => load_pose_csv(path),
        DataFormat::PoseLift => load_poselift_dir(path),
    }
}

/// Native CSV reader. Malformed rows are collected as [`RecordError`]s with
/// line numbers; an unreadable file is fatal.
pub fn load_pose_csv(path: &Path) -> Result<(Vec<PoseFrame>, Vec<RecordError>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Io(format!("cannot open {}: {e}", path.display())))?;
    let mut frames = Vec::new();
    let mut errors = Vec::new();
    let mut seen: BTreeMap<(String, u64, i64), ()> = BTreeMap::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 1;
        let location = format!("{}:{line}", path.display());
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                errors.push(RecordError {
                    location,
                    message: format!("unparseable row: {e}"),
                });
                continue;
            }
        };
        match parse_pose_record(&record) {
            Ok(frame) => {
                let key = (frame.video_id.clone(), frame.frame_index, frame.person_id);
                if seen.insert(key, ()).is_some() {
                    errors.push(RecordError {
                        location,
                        message: format!(
                            "duplicate record for video '{}', frame {}, person {}",
                            frame.video_id, frame.frame_index, frame.person_id
                        ),
                    });
                } else {
                    frames.push(frame);
                }
            }
            Err(message) => errors.push(RecordError { location, message }),
        }
    }
    Ok((frames, errors))
}

fn parse_pose_record(record: &csv::StringRecord) -> std::result::Result<PoseFrame, String> {
    let n = record.len();
    let coord_fields = n.saturating_sub(3);
    // 2 coords per keypoint, optionally followed by one confidence each.
    if coord_fields != 2 * KEYPOINTS && coord_fields != 3 * KEYPOINTS {
        let got = coord_fields / 2;
        return Err(format!(
            "expected {KEYPOINTS} keypoints ({} or {} fields), got {got} keypoints ({n} fields)",
            3 + 2 * KEYPOINTS,
            3 + 3 * KEYPOINTS,
        ));
    }
    let video_id = record[0].trim().to_string();
    if video_id.is_empty() {
        return Err("empty video_id".into());
    }
    let frame_index: u64 = record[1]
        .trim()
        .parse()
        .map_err(|_| format!("bad frame_id '{}'", &record[1]))?;
    let person_id: i64 = record[2]
        .trim()
        .parse()
        .map_err(|_| format!("bad person_id '{}'", &record[2]))?;
    let mut keypoints = Vec::with_capacity(KEYPOINTS);
    for k in 0..KEYPOINTS {
        let x: f64 = record[3 + 2 * k]
            .trim()
            .parse()
            .map_err(|_| format!("bad x{} '{}'", k + 1, &record[3 + 2 * k]))?;
        let y: f64 = record[4 + 2 * k]
            .trim()
            .parse()
            .map_err(|_| format!("bad y{} '{}'", k + 1, &record[4 + 2 * k]))?;
        if !x.is_finite() || !y.is_finite() {
            return Err(format!("non-finite keypoint {}", k + 1));
        }
        keypoints.push(Keypoint { x, y });
    }
    // Trailing confidences (if any) are validated as numbers and discarded.
    for k in 0..coord_fields.saturating_sub(2 * KEYPOINTS) {
        let field = &record[3 + 2 * KEYPOINTS + k];
        field
            .trim()
            .parse::<f64>()
            .map_err(|_| format!("bad confidence '{field}'"))?;
    }
    Ok(PoseFrame {
        video_id,
        frame_index,
        person_id,
        keypoints,
    })
}

/// Label CSV reader (`video_id,frame_id,label` rows).
pub fn load_labels_csv(path: &Path) -> Result<(Vec<FrameLabel>, Vec<RecordError>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Io(format!("cannot open {}: {e}", path.display())))?;
    let mut labels = Vec::new();
    let mut errors = Vec::new();
    let mut seen: BTreeMap<(String, u64), u8> = BTreeMap::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 1;
        let location = format!("{}:{line}", path.display());
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                errors.push(RecordError {
                    location,
                    message: format!("unparseable row: {e}"),
                });
                continue;
            }
        };
        if record.len() != 3 {
            errors.push(RecordError {
                location,
                message: format!("expected 3 fields, got {}", record.len()),
            });
            continue;
        }
        let video_id = record[0].trim().to_string();
        let frame_index: u64 = match record[1].trim().parse() {
            Ok(v) => v,
            Err(_) => {
                errors.push(RecordError {
                    location,
                    message: format!("bad frame_id '{}'", &record[1]),
                });
                continue;
            }
        };
        let label: u8 = match record[2].trim().parse() {
            Ok(v @ (0 | 1)) => v,
            _ => {
                errors.push(RecordError {
                    location,
                    message: format!("bad label '{}' (expected 0 or 1)", &record[2]),
                });
                continue;
            }
        };
        if seen.insert((video_id.clone(), frame_index), label).is_some() {
            errors.push(RecordError {
                location,
                message: format!("duplicate label for video '{video_id}', frame {frame_index}"),
            });
            continue;
        }
        labels.push(FrameLabel {
            video_id,
            frame_index,
            label,
        });
    }
    Ok((labels, errors))
}

#[derive(Deserialize)]
struct PoseLiftEntry {
    keypoints: Vec<f64>,
}

/// PoseLift-layout adapter: a directory of `<video_id>.json` files, each
/// mapping person id → frame id → keypoint triplets.
pub fn load_poselift_dir(dir: &Path) -> Result<(Vec<PoseFrame>, Vec<RecordError>)> {
    if !dir.is_dir() {
        return Err(Error::Io(format!(
            "poselift path {} is not a directory",
            dir.display()
        )));
    }
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::Io(format!("cannot list {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    paths.sort();
    let mut frames = Vec::new();
    let mut errors = Vec::new();
    for path in paths {
        let video_id = path
            .file_stem()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_default();
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::Io(format!("cannot read {}: {e}", path.display())))?;
        let parsed: BTreeMap<String, BTreeMap<String, PoseLiftEntry>> =
            match serde_json::from_str(&text) {
                Ok(p) => p,
                Err(e) => {
                    errors.push(RecordError {
                        location: path.display().to_string(),
                        message: format!("invalid json: {e}"),
                    });
                    continue;
                }
            };
        for (person_key, per_frame) in parsed {
            let Ok(person_id) = parse_int_like(&person_key) else {
                errors.push(RecordError {
                    location: format!("{}:{person_key}", path.display()),
                    message: format!("bad person id '{person_key}'"),
                });
                continue;
            };
            for (frame_key, entry) in per_frame {
                let location = format!("{}:{person_key}:{frame_key}", path.display());
                let Ok(frame_index) = parse_int_like(&frame_key) else {
                    errors.push(RecordError {
                        location,
                        message: format!("bad frame id '{frame_key}'"),
                    });
                    continue;
                };
                let vals = &entry.keypoints;
                // x, y, confidence triplets or bare x, y pairs.
                let stride = if vals.len() == 3 * KEYPOINTS {
                    3
                } else if vals.len() == 2 * KEYPOINTS {
                    2
                } else {
                    errors.push(RecordError {
                        location,
                        message: format!(
                            "expected {KEYPOINTS} keypoints, got {} values",
                            vals.len()
                        ),
                    });
                    continue;
                };
                let keypoints: Vec<Keypoint> = (0..KEYPOINTS)
                    .map(|k| Keypoint {
                        x: vals[k * stride],
                        y: vals[k * stride + 1],
                    })
                    .collect();
                if keypoints.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
                    errors.push(RecordError {
                        location,
                        message: "non-finite keypoint".into(),
                    });
                    continue;
                }
                frames.push(PoseFrame {
                    video_id: video_id.clone(),
                    frame_index: frame_index as u64,
                    person_id,
                    keypoints,
                });
            }
        }
    }
    Ok((frames, errors))
}

fn parse_int_like(s: &str) -> std::result::Result<i64, ()> {
    let s = s.trim();
    if let Ok(v) = s.parse::<i64>() {
        return Ok(v);
    }
    // Tolerate "12.0"-style keys that some exporters produce.
    if let Ok(v) = s.parse::<f64>() {
        if v.fract() == 0.0 {
            return Ok(v as i64);
        }
    }
    Err(())
}

/// Path to the label file the poselift adapter expects next to its json files.
pub fn poselift_labels_path(dir: &Path) -> std::path::PathBuf {
    dir.join("labels.csv")
}

/// Cut each person's track into sliding windows of length `n` with the given
/// stride. Tracks are split at missing frames, never interpolated: every
/// maximal gap-free run of length L yields `floor((L-n)/stride)+1` windows
/// (none if L < n).
pub fn extract_windows(frames: &[PoseFrame], n: usize, stride: usize) -> Result<Vec<PoseWindow>> {
    if n < 1 || stride < 1 {
        return Err(Error::Config(format!(
            "window size {n} and stride {stride} must both be >= 1"
        )));
    }
    let mut by_track: BTreeMap<(&str, i64), Vec<&PoseFrame>> = BTreeMap::new();
    for f in frames {
        by_track
            .entry((f.video_id.as_str(), f.person_id))
            .or_default()
            .push(f);
    }
    let mut windows = Vec::new();
    for ((video_id, person_id), mut track) in by_track {
        track.sort_by_key(|f| f.frame_index);
        // Split into gap-free runs.
        let mut run_start = 0;
        for i in 1..=track.len() {
            let broken =
                i == track.len() || track[i].frame_index != track[i - 1].frame_index + 1;
            if !broken {
                continue;
            }
            let run = &track[run_start..i];
            if run.len() >= n {
                for start in (0..=run.len() - n).step_by(stride) {
                    windows.push(PoseWindow {
                        video_id: video_id.to_string(),
                        person_id,
                        start_frame: run[start].frame_index,
                        frames: run[start..start + n].iter().map(|&f| f.clone()).collect(),
                    });
                }
            }
            run_start = i;
        }
    }
    Ok(windows)
}

/// Convert a window into the model input layout `[2, n, V]` (channel order
/// x, y). With `v == 18` a virtual center node — the centroid of shoulders
/// and hips — is appended to each frame. When `normalize` is set the window
/// is centered on its mean (x, y) and divided by the population standard
/// deviation of all coordinates (floored at 1e-6).
pub fn window_array(window: &PoseWindow, v: usize, normalize: bool) -> Result<Array> {
    if v != KEYPOINTS && v != KEYPOINTS + 1 {
        return Err(Error::Config(format!(
            "unsupported node count {v} (expected {KEYPOINTS} or {})",
            KEYPOINTS + 1
        )));
    }
    let n = window.frames.len();
    if n == 0 {
        return Err(Error::data("empty window"));
    }
    let mut xs = vec![0.0; n * v];
    let mut ys = vec![0.0; n * v];
    for (t, frame) in window.frames.iter().enumerate() {
        if frame.keypoints.len() != KEYPOINTS {
            return Err(Error::data(format!(
                "frame {} has {} keypoints, expected {KEYPOINTS}",
                frame.frame_index,
                frame.keypoints.len()
            )));
        }
        for (j, kp) in frame.keypoints.iter().enumerate() {
            xs[t * v + j] = kp.x;
            ys[t * v + j] = kp.y;
        }
        if v == KEYPOINTS + 1 {
            let cx = CENTER_JOINTS.iter().map(|&j| frame.keypoints[j].x).sum::<f64>() / 4.0;
            let cy = CENTER_JOINTS.iter().map(|&j| frame.keypoints[j].y).sum::<f64>() / 4.0;
            xs[t * v + KEYPOINTS] = cx;
            ys[t * v + KEYPOINTS] = cy;
        }
    }
    if normalize {
        let count = (n * v) as f64;
        let mx = xs.iter().sum::<f64>() / count;
        let my = ys.iter().sum::<f64>() / count;
        for x in &mut xs {
            *x -= mx;
        }
        for y in &mut ys {
            *y -= my;
        }
        let var = (xs.iter().map(|a| a * a).sum::<f64>() + ys.iter().map(|a| a * a).sum::<f64>())
            / (2.0 * count);
        let sd = var.sqrt().max(1e-6);
        for x in &mut xs {
            *x /= sd;
        }
        for y in &mut ys {
            *y /= sd;
        }
    }
    let mut data = Vec::with_capacity(2 * n * v);
    data.extend_from_slice(&xs);
    data.extend_from_slice(&ys);
    Array::from_vec(vec![2, n, v], data).map_err(Error::from)
}

/// Normalized model input for a window (see [`window_array`]).
pub fn normalize_window(window: &PoseWindow, v: usize) -> Result<Array> {
    window_array(window, v, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn kp(x: f64, y: f64) -> Keypoint {
        Keypoint { x, y }
    }

    fn frame(video: &str, t: u64, person: i64, base: f64) -> PoseFrame {
        PoseFrame {
            video_id: video.into(),
            frame_index: t,
            person_id: person,
            keypoints: (0..KEYPOINTS)
                .map(|k| kp(base + k as f64, base - k as f64))
                .collect(),
        }
    }

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    fn pose_row(video: &str, t: u64, person: i64) -> String {
        let coords: Vec<String> = (0..KEYPOINTS)
            .flat_map(|k| vec![format!("{}", 10 + k), format!("{}", 20 + k)])
            .collect();
        format!("{video},{t},{person},{}", coords.join(","))
    }

    #[test]
    fn empty_file_is_empty_dataset() {
        let f = write_temp("");
        let (frames, errors) = load_pose_csv(f.path()).unwrap();
        assert!(frames.is_empty());
        assert!(errors.is_empty());
    }

    #[test]
    fn well_formed_record_parses() {
        let f = write_temp(&pose_row("v1", 3, 7));
        let (frames, errors) = load_pose_csv(f.path()).unwrap();
        assert!(errors.is_empty());
        assert_eq!(frames.len(), 1);
        assert_eq!(frames[0].video_id, "v1");
        assert_eq!(frames[0].frame_index, 3);
        assert_eq!(frames[0].person_id, 7);
        assert_eq!(frames[0].keypoints.len(), KEYPOINTS);
    }

    #[test]
    fn short_record_is_rejected_with_line_number() {
        // 16 keypoints only.
        let coords: Vec<String> = (0..16).flat_map(|k| vec![format!("{k}"), "0".into()]).collect();
        let bad = format!("v1,0,0,{}", coords.join(","));
        let content = format!("{}\n{bad}\n", pose_row("v1", 0, 1));
        let f = write_temp(&content);
        let (frames, errors) = load_pose_csv(f.path()).unwrap();
        assert_eq!(frames.len(), 1);
        assert_eq!(errors.len(), 1);
        assert!(errors[0].location.ends_with(":2"), "{}", errors[0].location);
        assert!(errors[0].message.contains("expected 17"), "{}", errors[0].message);
    }

    #[test]
    fn confidences_are_parsed_and_discarded() {
        let coords: Vec<String> = (0..KEYPOINTS)
            .flat_map(|k| vec![format!("{k}"), format!("{k}")])
            .collect();
        let confs: Vec<String> = (0..KEYPOINTS).map(|_| "0.9".into()).collect();
        let f = write_temp(&format!("v1,0,0,{},{}", coords.join(","), confs.join(",")));
        let (frames, errors) = load_pose_csv(f.path()).unwrap();
        assert!(errors.is_empty());
        assert_eq!(frames.len(), 1);
        assert_eq!(frames[0].keypoints[3], kp(3.0, 3.0));
    }

    #[test]
    fn unreadable_file_is_fatal() {
        assert!(load_pose_csv(Path::new("/nonexistent/poses.csv")).is_err());
    }

    #[test]
    fn window_counts_match_formula() {
        // L=15, n=12, stride=1 → 4 windows.
        let frames: Vec<PoseFrame> = (0..15).map(|t| frame("v", t, 0, t as f64)).collect();
        assert_eq!(extract_windows(&frames, 12, 1).unwrap().len(), 4);
        // L=11 < n=12 → none.
        let frames: Vec<PoseFrame> = (0..11).map(|t| frame("v", t, 0, 0.0)).collect();
        assert!(extract_windows(&frames, 12, 1).unwrap().is_empty());
    }

    #[test]
    fn gap_splits_track_into_runs() {
        // 24 frames with index 12 missing: two runs of 12 → 2 windows.
        let frames: Vec<PoseFrame> = (0..24)
            .filter(|&t| t != 12)
            .map(|t| frame("v", t, 0, 0.0))
            .collect();
        let windows = extract_windows(&frames, 12, 1).unwrap();
        assert_eq!(windows.len(), 2);
        assert_eq!(windows[0].start_frame, 0);
        assert_eq!(windows[1].start_frame, 13);
    }

    #[test]
    fn windows_are_per_person_and_consecutive() {
        let mut frames: Vec<PoseFrame> = (0..13).map(|t| frame("v", t, 0, 0.0)).collect();
        frames.extend((0..12).map(|t| frame("v", t, 1, 0.0)));
        let windows = extract_windows(&frames, 12, 1).unwrap();
        assert_eq!(windows.len(), 3);
        for w in &windows {
            assert!(w.frames.iter().all(|f| f.person_id == w.person_id));
            for (i, f) in w.frames.iter().enumerate() {
                assert_eq!(f.frame_index, w.start_frame + i as u64);
            }
        }
    }

    #[test]
    fn constant_window_normalizes_to_zeros() {
        let frames: Vec<PoseFrame> = (0..4)
            .map(|t| PoseFrame {
                video_id: "v".into(),
                frame_index: t,
                person_id: 0,
                keypoints: vec![kp(5.0, -3.0); KEYPOINTS],
            })
            .collect();
        let w = PoseWindow {
            video_id: "v".into(),
            person_id: 0,
            start_frame: 0,
            frames,
        };
        let arr = normalize_window(&w, 17).unwrap();
        assert!(arr.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn normalization_is_translation_invariant() {
        let mk = |dx: f64, dy: f64| {
            let frames: Vec<PoseFrame> = (0..4)
                .map(|t| PoseFrame {
                    video_id: "v".into(),
                    frame_index: t,
                    person_id: 0,
                    keypoints: (0..KEYPOINTS)
                        .map(|k| kp(dx + (t * 17 + k) as f64, dy + ((k * 3) % 7) as f64))
                        .collect(),
                })
                .collect();
            PoseWindow {
                video_id: "v".into(),
                person_id: 0,
                start_frame: 0,
                frames,
            }
        };
        let a = normalize_window(&mk(0.0, 0.0), 18).unwrap();
        let b = normalize_window(&mk(100.0, 100.0), 18).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-9);
    }

    #[test]
    fn zero_mean_unit_std_window_is_a_fixed_point() {
        // Build a window, normalize it, rebuild a window from the result, and
        // check normalize is the identity on it.
        let frames: Vec<PoseFrame> = (0..3)
            .map(|t| PoseFrame {
                video_id: "v".into(),
                frame_index: t,
                person_id: 0,
                keypoints: (0..KEYPOINTS)
                    .map(|k| kp((t as f64) * 1.3 + k as f64, (k as f64) * 0.7 - t as f64))
                    .collect(),
            })
            .collect();
        let w = PoseWindow {
            video_id: "v".into(),
            person_id: 0,
            start_frame: 0,
            frames,
        };
        let first = normalize_window(&w, 17).unwrap();
        let n = 3;
        let rebuilt = PoseWindow {
            video_id: "v".into(),
            person_id: 0,
            start_frame: 0,
            frames: (0..n)
                .map(|t| PoseFrame {
                    video_id: "v".into(),
                    frame_index: t as u64,
                    person_id: 0,
                    keypoints: (0..KEYPOINTS)
                        .map(|k| kp(first.at3(0, t, k), first.at3(1, t, k)))
                        .collect(),
                })
                .collect(),
        };
        let second = normalize_window(&rebuilt, 17).unwrap();
        assert!(first.max_abs_diff(&second) < 1e-12);
    }

    #[test]
    fn poselift_adapter_reads_json_directory() {
        let dir = tempfile::tempdir().unwrap();
        let triplets: Vec<String> = (0..KEYPOINTS)
            .flat_map(|k| vec![format!("{}.0", 10 + k), format!("{}.0", 20 + k), "0.9".into()])
            .collect();
        let json = format!(
            "{{\"1\": {{\"4\": {{\"keypoints\": [{}]}}, \"5\": {{\"keypoints\": [{}]}}}}}}",
            triplets.join(","),
            triplets.join(",")
        );
        std::fs::write(dir.path().join("clip_a.json"), json).unwrap();
        let (frames, errors) = load_poselift_dir(dir.path()).unwrap();
        assert!(errors.is_empty(), "{errors:?}");
        assert_eq!(frames.len(), 2);
        assert_eq!(frames[0].video_id, "clip_a");
        assert_eq!(frames[0].person_id, 1);
        assert_eq!(frames[0].frame_index, 4);
        assert_eq!(frames[0].keypoints[2], kp(12.0, 22.0));
    }

    proptest! {
        /// Window counts match a brute-force enumerator over random tracks
        /// with random gaps.
        #[test]
        fn window_count_matches_brute_force(
            seed in any::<u64>(),
            n in 1usize..6,
            stride in 1usize..4,
            len in 0usize..40,
            gap_mask in any::<u64>(),
        ) {
            let mut indices: Vec<u64> = Vec::new();
            for t in 0..len {
                if gap_mask >> (t % 64) & 1 == 0 || t % 7 == (seed % 7) as usize {
                    indices.push(t as u64);
                }
            }
            let frames: Vec<PoseFrame> =
                indices.iter().map(|&t| frame("v", t, 0, 0.0)).collect();
            let got = extract_windows(&frames, n, stride).unwrap().len();

            // Brute force: try every start index, accept iff all n frames exist
            // consecutively AND the start aligns with the stride grid of its run.
            let mut expected = 0usize;
            let set: std::collections::BTreeSet<u64> = indices.iter().copied().collect();
            for &t0 in &indices {
                let complete = (0..n as u64).all(|d| set.contains(&(t0 + d)));
                if !complete {
                    continue;
                }
                // Distance from the start of the maximal run containing t0.
                let mut run_start = t0;
                while run_start > 0 && set.contains(&(run_start - 1)) {
                    run_start -= 1;
                }
                if ((t0 - run_start) as usize) % stride == 0 {
                    // The stride grid also requires the window to fit before the
                    // run ends, which `complete` already guarantees.
                    expected += 1;
                }
            }
            prop_assert_eq!(got, expected);
        }

        /// Normalization is invariant under global translation and positive scaling.
        #[test]
        fn normalize_invariance(scale in 0.1f64..10.0, dx in -500.0f64..500.0,
                                dy in -500.0f64..500.0, seed in any::<u64>()) {
            let mut rng = numkit::Prng::new(seed);
            let base: Vec<(f64, f64)> = (0..2 * KEYPOINTS)
                .map(|_| (rng.uniform(-50.0, 50.0), rng.uniform(-80.0, 80.0)))
                .collect();
            let mk = |s: f64, dx: f64, dy: f64| {
                let frames: Vec<PoseFrame> = (0..2)
                    .map(|t| PoseFrame {
                        video_id: "v".into(),
                        frame_index: t,
                        person_id: 0,
                        keypoints: (0..KEYPOINTS)
                            .map(|k| {
                                let (x, y) = base[t as usize * KEYPOINTS + k];
                                kp(s * x + dx, s * y + dy)
                            })
                            .collect(),
                    })
                    .collect();
                PoseWindow { video_id: "v".into(), person_id: 0, start_frame: 0, frames }
            };
            let a = normalize_window(&mk(1.0, 0.0, 0.0), 18).unwrap();
            let b = normalize_window(&mk(scale, dx, dy), 18).unwrap();
            prop_assert!(a.max_abs_diff(&b) < 1e-9);
        }
    }
}
