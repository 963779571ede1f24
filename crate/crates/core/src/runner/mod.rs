//! The tracker interface and the machinery that drives trackers over
//! sequences: builtin baselines, external processes speaking the line
//! protocol, and pre-recorded result directories.

mod external;
pub(crate) mod recorded;

use std::path::PathBuf;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::baselines::Baseline;
use crate::dataset::{DetectionSet, Sequence};
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::protocols::{Direction, TrackRun};

pub use external::{ExternalTracker, CLIENT_BANNER, PROTOCOL_VERSION};
pub use recorded::{load_recorded, write_recorded, RecordedTracker, RESULTS_FILE, TIMES_FILE};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

/// What a tracker is told about the frame it must process.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameInfo {
    pub index: usize,
    pub frame_ref: String,
}

impl FrameInfo {
    pub fn of(seq: &Sequence, index: usize) -> Self {
        Self {
            index,
            frame_ref: seq.frame_ref(index),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub bbox: BoundingBox,
    /// Optional tracker-reported confidence that the target is present.
    pub confidence: Option<f64>,
}

impl From<BoundingBox> for Prediction {
    fn from(bbox: BoundingBox) -> Self {
        Self {
            bbox,
            confidence: None,
        }
    }
}

/// A single-object tracker instance, driven strictly request-response.
pub trait Tracker: Send {
    fn init(&mut self, frame: &FrameInfo, bbox: BoundingBox) -> Result<()>;

    fn update(&mut self, frame: &FrameInfo) -> Result<Prediction>;

    /// Called once after the last frame of a run.
    fn finish(&mut self) -> Result<()> {
        Ok(())
    }
}

/// Everything a tracker instance may be built from for one sequence.
#[derive(Debug, Clone, Copy)]
pub struct SequenceContext<'a> {
    pub sequence: &'a Sequence,
    pub detections: Option<&'a DetectionSet>,
}

/// Creates a fresh tracker instance per run.
pub trait TrackerFactory: Sync {
    fn name(&self) -> &str;

    fn create(&self, ctx: &SequenceContext<'_>) -> Result<Box<dyn Tracker>>;

    /// Pre-recorded results cannot be re-initialized, so they only make
    /// sense under protocols that start from the first frame.
    fn replays_recorded_results(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrackerKind {
    Builtin(Baseline),
    External { command: String, timeout: Duration },
    Recorded(PathBuf),
}

/// A named tracker source, parsed from `[NAME=]SPEC` where SPEC is
/// `baseline:<name>[:args]`, `external:<command line>` or `recorded:<dir>`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackerHandle {
    pub name: String,
    pub spec: String,
    pub kind: TrackerKind,
}

impl TrackerHandle {
    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        if let TrackerKind::External { timeout: t, .. } = &mut self.kind {
            *t = timeout;
        }
        self
    }
}

fn slug(spec: &str) -> String {
    spec.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

impl FromStr for TrackerHandle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, spec) = match s.split_once('=') {
            Some((name, spec)) if !name.contains(':') && !name.is_empty() => {
                (Some(name.to_string()), spec)
            }
            _ => (None, s),
        };
        let (scheme, rest) = spec
            .split_once(':')
            .ok_or_else(|| Error::Invalid(format!("tracker spec {spec:?} has no scheme")))?;
        let kind = match scheme {
            "baseline" => TrackerKind::Builtin(rest.parse()?),
            "external" if !rest.trim().is_empty() => TrackerKind::External {
                command: rest.to_string(),
                timeout: DEFAULT_TIMEOUT,
            },
            "recorded" if !rest.is_empty() => TrackerKind::Recorded(PathBuf::from(rest)),
            _ => return Err(Error::Invalid(format!("unsupported tracker spec {spec:?}"))),
        };
        Ok(Self {
            name: name.unwrap_or_else(|| slug(spec)),
            spec: spec.to_string(),
            kind,
        })
    }
}

impl TrackerFactory for TrackerHandle {
    fn name(&self) -> &str {
        &self.name
    }

    fn create(&self, ctx: &SequenceContext<'_>) -> Result<Box<dyn Tracker>> {
        match &self.kind {
            TrackerKind::Builtin(baseline) => baseline.create(ctx),
            TrackerKind::External { command, timeout } => {
                Ok(Box::new(ExternalTracker::spawn(command, *timeout)?))
            }
            TrackerKind::Recorded(dir) => {
                let run = load_recorded(dir, ctx.sequence)?;
                Ok(Box::new(RecordedTracker::new(run)))
            }
        }
    }

    fn replays_recorded_results(&self) -> bool {
        matches!(self.kind, TrackerKind::Recorded(_))
    }
}

/// Frame indices visited by a run of `span` frames starting at `start`.
pub fn frame_order(start: usize, direction: Direction, span: usize) -> Vec<usize> {
    match direction {
        Direction::Forward => (start..start + span).collect(),
        Direction::Backward => (0..span).map(|k| start - k).collect(),
    }
}

/// Initializes `tracker` on `start` with `init_box`, then feeds the
/// remaining `span - 1` frames in `direction`, timing every exchange.
pub fn session(
    tracker: &mut dyn Tracker,
    seq: &Sequence,
    start: usize,
    init_box: BoundingBox,
    direction: Direction,
    span: usize,
) -> Result<TrackRun> {
    let in_range = match direction {
        Direction::Forward => start + span <= seq.len(),
        Direction::Backward => span <= start + 1,
    };
    if span == 0 || !in_range {
        return Err(Error::Invalid(format!(
            "run of {span} frames from {start} ({direction:?}) exceeds sequence {} of {} frames",
            seq.name,
            seq.len()
        )));
    }
    let order = frame_order(start, direction, span);
    let mut boxes = Vec::with_capacity(span);
    let mut latencies = Vec::with_capacity(span);

    let clock = Instant::now();
    tracker.init(&FrameInfo::of(seq, start), init_box)?;
    latencies.push(clock.elapsed().as_secs_f64());
    boxes.push(init_box);

    for &frame in &order[1..] {
        let clock = Instant::now();
        let prediction = tracker.update(&FrameInfo::of(seq, frame))?;
        latencies.push(clock.elapsed().as_secs_f64());
        boxes.push(prediction.bbox);
    }
    tracker.finish()?;

    Ok(TrackRun {
        start_frame: start,
        direction,
        boxes,
        latencies: Some(latencies),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_tracker_specs() {
        let h: TrackerHandle = "baseline:oracle".parse().unwrap();
        assert_eq!(h.name, "baseline_oracle");
        assert_eq!(h.kind, TrackerKind::Builtin(Baseline::Oracle));

        let h: TrackerHandle = "mine=external:python3 client.py --x=1".parse().unwrap();
        assert_eq!(h.name, "mine");
        assert!(matches!(h.kind, TrackerKind::External { ref command, .. } if command == "python3 client.py --x=1"));

        let h: TrackerHandle = "recorded:/tmp/results".parse().unwrap();
        assert!(h.replays_recorded_results());

        assert!("nothing".parse::<TrackerHandle>().is_err());
        assert!("baseline:unknown".parse::<TrackerHandle>().is_err());
        assert!("external:".parse::<TrackerHandle>().is_err());
    }

    #[test]
    fn frame_orders() {
        assert_eq!(frame_order(3, Direction::Forward, 3), vec![3, 4, 5]);
        assert_eq!(frame_order(3, Direction::Backward, 4), vec![3, 2, 1, 0]);
    }
}
