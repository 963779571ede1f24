use serde::{Deserialize, Serialize};

use super::{Direction, TrackRun};
use crate::dataset::{Detection, DetectionSet, Sequence};
use crate::error::{Error, Result};
use crate::geometry::iou;
use crate::metrics::{score_run, Evaluation, Scores};
use crate::runner::{session, SequenceContext, TrackerFactory};

/// Minimum overlap for a detection to count as a valid initialization.
pub const DETECTION_IOU: f64 = 0.5;

/// One-pass evaluation: initialize on frame 0 with the ground truth and
/// run forward to the last frame.
pub fn run_ope(factory: &dyn TrackerFactory, ctx: &SequenceContext<'_>) -> Result<(TrackRun, Evaluation)> {
    let run = execute_ope(factory, ctx)?;
    let evaluation = score_run(&run, ctx.sequence)?;
    Ok((run, evaluation))
}

pub(crate) fn execute_ope(factory: &dyn TrackerFactory, ctx: &SequenceContext<'_>) -> Result<TrackRun> {
    let seq = ctx.sequence;
    let init = seq
        .target(0)
        .ok_or_else(|| Error::Invalid(format!("{}: first frame has no target", seq.name)))?;
    let mut tracker = factory.create(ctx)?;
    session(tracker.as_mut(), seq, 0, init, Direction::Forward, seq.len())
}

/// Signed per-metric difference, detector initialization minus ground-truth
/// initialization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreDelta {
    pub ss: f64,
    pub nps: f64,
    pub gsr: f64,
}

impl ScoreDelta {
    pub fn between(detector: &Scores, ground_truth: &Scores) -> Self {
        Self {
            ss: detector.ss - ground_truth.ss,
            nps: detector.nps - ground_truth.nps,
            gsr: detector.gsr - ground_truth.gsr,
        }
    }
}

/// The earliest frame holding an object detection with `iou >= 0.5` against
/// the ground truth; among several such detections the highest score wins
/// (the first listed on equal scores).
pub fn first_valid_detection(seq: &Sequence, dets: &DetectionSet) -> Option<(usize, Detection)> {
    (0..seq.len()).find_map(|frame| {
        let gt = seq.target(frame)?;
        dets.objects(frame)
            .filter(|d| iou(&d.bbox, &gt) >= DETECTION_IOU)
            .fold(None::<&Detection>, |best, d| match best {
                Some(b) if b.score >= d.score => Some(b),
                _ => Some(d),
            })
            .map(|d| (frame, *d))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpeDRecord {
    /// Frames between the sequence start and the first valid detection.
    pub delay: usize,
    pub detection: crate::geometry::BoundingBox,
    pub detector_run: TrackRun,
    pub ground_truth_run: TrackRun,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OpeDOutcome {
    Valid {
        record: OpeDRecord,
        detector: Evaluation,
        ground_truth: Evaluation,
        delta: ScoreDelta,
    },
    /// No frame offers a valid initialization (or nothing is left to
    /// evaluate after it).
    Skipped { reason: String },
}

impl OpeDOutcome {
    pub fn delay(&self) -> Option<usize> {
        match self {
            OpeDOutcome::Valid { record, .. } => Some(record.delay),
            OpeDOutcome::Skipped { .. } => None,
        }
    }
}

pub(crate) fn execute_ope_d(
    factory: &dyn TrackerFactory,
    ctx: &SequenceContext<'_>,
) -> Result<Option<OpeDRecord>> {
    let seq = ctx.sequence;
    let dets = ctx
        .detections
        .ok_or_else(|| Error::Invalid(format!("{}: OPE-D needs detections", seq.name)))?;
    let Some((frame, detection)) = first_valid_detection(seq, dets) else {
        return Ok(None);
    };
    let gt = seq.target(frame).expect("valid detections only on annotated frames");
    let span = seq.len() - frame;
    let mut tracker = factory.create(ctx)?;
    let detector_run = session(tracker.as_mut(), seq, frame, detection.bbox, Direction::Forward, span)?;
    let mut tracker = factory.create(ctx)?;
    let ground_truth_run = session(tracker.as_mut(), seq, frame, gt, Direction::Forward, span)?;
    Ok(Some(OpeDRecord {
        delay: frame,
        detection: detection.bbox,
        detector_run,
        ground_truth_run,
    }))
}

pub fn score_ope_d(record: Option<&OpeDRecord>, seq: &Sequence) -> Result<OpeDOutcome> {
    let Some(record) = record else {
        return Ok(OpeDOutcome::Skipped {
            reason: "no detection with IoU >= 0.5 against the ground truth".into(),
        });
    };
    let detector = match score_run(&record.detector_run, seq) {
        Ok(e) => e,
        Err(Error::EmptyInput(_)) => {
            return Ok(OpeDOutcome::Skipped {
                reason: format!("no annotated frame after the valid detection at frame {}", record.delay),
            })
        }
        Err(e) => return Err(e),
    };
    let ground_truth = score_run(&record.ground_truth_run, seq)?;
    let delta = ScoreDelta::between(&detector.scores, &ground_truth.scores);
    Ok(OpeDOutcome::Valid {
        record: record.clone(),
        detector,
        ground_truth,
        delta,
    })
}

/// OPE initialized from the first valid detection, paired with a
/// ground-truth-initialized run from the same frame.
pub fn run_ope_d(factory: &dyn TrackerFactory, ctx: &SequenceContext<'_>) -> Result<OpeDOutcome> {
    let record = execute_ope_d(factory, ctx)?;
    score_ope_d(record.as_ref(), ctx.sequence)
}
