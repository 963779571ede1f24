//! Real-time evaluation on a simulated clock.
//!
//! Frame `i` becomes available at `i / fps`. A tracker that finishes frame
//! `j` at time `T` is next handed the most recent available frame,
//! `max(j + 1, floor(T * fps))`, waiting for it if it is not out yet.
//! Frames passed over in between keep the last box the tracker produced.
//! Initialization is not charged to the clock.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{Direction, TrackRun};
use crate::dataset::Sequence;
use crate::error::{Error, Result};
use crate::metrics::{score_run, Evaluation};
use crate::runner::{FrameInfo, SequenceContext, TrackerFactory};

/// Tolerance, in frames, when converting a finishing time to a frame index.
const FRAME_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum LatencyModel {
    /// Every frame takes this many seconds.
    Constant(f64),
    /// Seconds per frame, indexed by frame number.
    Trace(Vec<f64>),
    /// Wall-clock time of each tracker exchange.
    Live,
}

impl LatencyModel {
    fn validate(&self, frames: usize) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        match self {
            LatencyModel::Constant(v) if !ok(*v) => {
                Err(Error::Invalid(format!("latency {v} must be a non-negative number of seconds")))
            }
            LatencyModel::Trace(t) if t.len() != frames => Err(Error::Invalid(format!(
                "latency trace has {} entries for {frames} frames",
                t.len()
            ))),
            LatencyModel::Trace(t) if !t.iter().all(|v| ok(*v)) => {
                Err(Error::Invalid("latency trace holds a negative or non-finite value".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RteRecord {
    /// One box per frame of the sequence, held boxes included; latencies
    /// hold the charged seconds (zero for the initialization and for
    /// frames the tracker never saw).
    pub run: TrackRun,
    /// Frames actually handed to the tracker after initialization.
    pub processed: Vec<usize>,
    /// Simulated time at which the last processed frame finished.
    pub simulated_seconds: f64,
}

impl RteRecord {
    /// Processed frames per simulated second; zero when nothing ran.
    pub fn fps(&self) -> f64 {
        if self.simulated_seconds > 0.0 {
            self.processed.len() as f64 / self.simulated_seconds
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RteOutcome {
    pub record: RteRecord,
    pub evaluation: Evaluation,
    pub fps: f64,
}

pub(crate) fn execute_rte(
    factory: &dyn TrackerFactory,
    ctx: &SequenceContext<'_>,
    latency: &LatencyModel,
) -> Result<RteRecord> {
    let seq: &Sequence = ctx.sequence;
    let n = seq.len();
    latency.validate(n)?;
    let init = seq
        .target(0)
        .ok_or_else(|| Error::Invalid(format!("{}: first frame has no target", seq.name)))?;

    let mut tracker = factory.create(ctx)?;
    tracker.init(&FrameInfo::of(seq, 0), init)?;

    let mut boxes = vec![init; n];
    let mut charged = vec![0.0; n];
    let mut processed = Vec::new();
    // Simulated clock in frame periods.
    let mut clock = 0.0_f64;
    let mut next = 1;
    while next < n {
        let start = clock.max(next as f64);
        let frame = FrameInfo::of(seq, next);
        let timer = Instant::now();
        let prediction = tracker.update(&frame)?;
        let seconds = match latency {
            LatencyModel::Constant(v) => *v,
            LatencyModel::Trace(t) => t[next],
            LatencyModel::Live => timer.elapsed().as_secs_f64(),
        };
        boxes[next] = prediction.bbox;
        charged[next] = seconds;
        processed.push(next);
        clock = start + seconds * seq.fps;

        let available = (clock + FRAME_EPSILON).floor() as usize;
        let following = available.max(next + 1);
        for held in boxes.iter_mut().take(following.min(n)).skip(next + 1) {
            *held = prediction.bbox;
        }
        next = following;
    }
    tracker.finish()?;

    Ok(RteRecord {
        run: TrackRun {
            start_frame: 0,
            direction: Direction::Forward,
            boxes,
            latencies: Some(charged),
        },
        processed,
        simulated_seconds: clock / seq.fps,
    })
}

pub fn score_rte(record: &RteRecord, seq: &Sequence) -> Result<Evaluation> {
    score_run(&record.run, seq)
}

pub fn run_rte(
    factory: &dyn TrackerFactory,
    ctx: &SequenceContext<'_>,
    latency: &LatencyModel,
) -> Result<RteOutcome> {
    let record = execute_rte(factory, ctx, latency)?;
    let evaluation = score_rte(&record, ctx.sequence)?;
    let fps = record.fps();
    Ok(RteOutcome {
        record,
        evaluation,
        fps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::Baseline;
    use crate::metrics::Scores;
    use crate::protocols::fixtures::moving_sequence;
    use crate::protocols::run_ope;

    #[test]
    fn frame_period_latency_matches_ope() {
        for fps in [30.0, 60.0, 29.97] {
            let seq = moving_sequence(90, fps, 3.0, &[7]);
            let ctx = SequenceContext { sequence: &seq, detections: None };
            let rte = run_rte(&Baseline::DelayedOracle { delay: 2 }, &ctx, &LatencyModel::Constant(1.0 / fps)).unwrap();
            let (ope, eval) = run_ope(&Baseline::DelayedOracle { delay: 2 }, &ctx).unwrap();
            assert_eq!(rte.record.run.boxes, ope.boxes);
            assert_eq!(rte.evaluation, eval);
            assert_eq!(rte.record.processed, (1..90).collect::<Vec<_>>());
        }
    }

    #[test]
    fn double_latency_processes_odd_frames() {
        let seq = moving_sequence(12, 30.0, 3.0, &[]);
        let ctx = SequenceContext { sequence: &seq, detections: None };
        let out = run_rte(&Baseline::Oracle, &ctx, &LatencyModel::Constant(2.0 / 30.0)).unwrap();
        assert_eq!(out.record.processed, vec![1, 3, 5, 7, 9, 11]);
        let boxes = &out.record.run.boxes;
        for even in (2..12).step_by(2) {
            assert_eq!(boxes[even], seq.target(even - 1).unwrap());
        }
        for odd in (1..12).step_by(2) {
            assert_eq!(boxes[odd], seq.target(odd).unwrap());
        }
    }

    #[test]
    fn zero_latency_runs_every_frame() {
        let seq = moving_sequence(31, 30.0, 1.0, &[]);
        let ctx = SequenceContext { sequence: &seq, detections: None };
        let out = run_rte(&Baseline::Oracle, &ctx, &LatencyModel::Constant(0.0)).unwrap();
        assert_eq!(out.record.processed.len(), 30);
        assert_eq!(out.evaluation.scores, Scores::PERFECT);
        assert!(out.fps <= 30.0 + 1e-9);
    }

    #[test]
    fn trace_latency_skips_where_slow() {
        let seq = moving_sequence(8, 10.0, 1.0, &[]);
        let ctx = SequenceContext { sequence: &seq, detections: None };
        // Frame 2 takes 0.35 s: finishes at 0.55 s, so frames 3 and 4 are skipped.
        let trace = vec![0.0, 0.1, 0.35, 0.1, 0.1, 0.1, 0.1, 0.1];
        let out = run_rte(&Baseline::Oracle, &ctx, &LatencyModel::Trace(trace)).unwrap();
        assert_eq!(out.record.processed, vec![1, 2, 5, 6, 7]);
        assert!((out.record.simulated_seconds - 0.85).abs() < 1e-12);
        assert!(run_rte(&Baseline::Oracle, &ctx, &LatencyModel::Trace(vec![0.1])).is_err());
        assert!(run_rte(&Baseline::Oracle, &ctx, &LatencyModel::Constant(-1.0)).is_err());
    }
}
