use std::fs;
use std::path::Path;

use super::{FrameInfo, Prediction, Tracker};
use crate::dataset::io_support::{lines, parse_box, read_text};
use crate::dataset::Sequence;
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::protocols::{Direction, TrackRun};

pub const RESULTS_FILE: &str = "results.txt";
pub const TIMES_FILE: &str = "times.txt";

/// Loads `<dir>/<sequence>/results.txt` (one `x,y,w,h` line per frame) and
/// the optional `times.txt` next to it.
pub fn load_recorded(dir: &Path, seq: &Sequence) -> Result<TrackRun> {
    let seq_dir = dir.join(&seq.name);
    let results = seq_dir.join(RESULTS_FILE);
    let text = read_text(&results)?;
    let raw = lines(&text);
    if raw.len() != seq.len() {
        return Err(Error::Invalid(format!(
            "{}: {} boxes for a {}-frame sequence",
            results.display(),
            raw.len(),
            seq.len()
        )));
    }
    let boxes = raw
        .iter()
        .enumerate()
        .map(|(i, line)| parse_box(&results, i + 1, line))
        .collect::<Result<Vec<_>>>()?;

    let times_path = seq_dir.join(TIMES_FILE);
    let latencies = if times_path.exists() {
        Some(read_times(&times_path, seq.len())?)
    } else {
        None
    };
    Ok(TrackRun {
        start_frame: 0,
        direction: Direction::Forward,
        boxes,
        latencies,
    })
}

/// Reads a per-frame latency file of non-negative seconds.
pub(crate) fn read_times(path: &Path, expected: usize) -> Result<Vec<f64>> {
    let text = read_text(path)?;
    let raw = lines(&text);
    if raw.len() != expected {
        return Err(Error::Invalid(format!(
            "{}: {} latencies for {expected} frames",
            path.display(),
            raw.len()
        )));
    }
    raw.iter()
        .enumerate()
        .map(|(i, line)| {
            line.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| Error::parse(path, i + 1, format!("invalid latency {line:?}")))
        })
        .collect()
}

pub(crate) fn write_lines<T: ToString>(path: &Path, items: &[T]) -> Result<()> {
    let mut out = String::new();
    for item in items {
        out.push_str(&item.to_string());
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes a run's boxes (in feed order) and, when present, its latencies.
pub fn write_recorded(run: &TrackRun, results: &Path, times: Option<&Path>) -> Result<()> {
    if let Some(parent) = results.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    write_lines(results, &run.boxes)?;
    if let (Some(path), Some(latencies)) = (times, &run.latencies) {
        write_lines(path, latencies)?;
    }
    Ok(())
}

/// Replays a recorded forward run frame by frame, ignoring initialization.
pub struct RecordedTracker {
    boxes: Vec<BoundingBox>,
}

impl RecordedTracker {
    pub fn new(run: TrackRun) -> Self {
        Self { boxes: run.boxes }
    }
}

impl Tracker for RecordedTracker {
    fn init(&mut self, _frame: &FrameInfo, _bbox: BoundingBox) -> Result<()> {
        Ok(())
    }

    fn update(&mut self, frame: &FrameInfo) -> Result<Prediction> {
        self.boxes
            .get(frame.index)
            .copied()
            .map(Prediction::from)
            .ok_or_else(|| Error::Tracker(format!("no recorded box for frame {}", frame.index)))
    }
}
