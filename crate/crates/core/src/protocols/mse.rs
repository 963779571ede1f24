//! Multi-start evaluation: runs from anchors spaced two seconds apart,
//! each toward the longer side of the sequence, averaged by run length.

use serde::{Deserialize, Serialize};

use super::{Direction, TrackRun};
use crate::dataset::Sequence;
use crate::error::{Error, Result};
use crate::metrics::{score_run, weighted_mean, Evaluation};
use crate::runner::{session, SequenceContext, TrackerFactory};

const ANCHOR_SECONDS: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Anchor {
    pub frame: usize,
    pub direction: Direction,
    /// Frames in the generated sub-sequence, anchor included.
    pub span: usize,
}

impl Anchor {
    /// Orients an anchor toward the longer side; ties go forward.
    pub fn at(frame: usize, frame_count: usize) -> Self {
        let forward = frame_count - frame;
        let backward = frame + 1;
        if forward >= backward {
            Self {
                frame,
                direction: Direction::Forward,
                span: forward,
            }
        } else {
            Self {
                frame,
                direction: Direction::Backward,
                span: backward,
            }
        }
    }
}

pub fn anchor_spacing(fps: f64) -> usize {
    ((ANCHOR_SECONDS * fps).round() as usize).max(1)
}

/// Anchors for a sequence: candidates every two seconds plus the last
/// frame. Inner candidates on absent frames move forward to the next
/// annotated frame and are dropped if that reaches the next candidate; an
/// absent last frame moves backward to the last annotated one.
pub fn mse_anchors(seq: &Sequence) -> Vec<Anchor> {
    let n = seq.len();
    let last = n - 1;
    let spacing = anchor_spacing(seq.fps);
    let candidates: Vec<usize> = (0..last).step_by(spacing).collect();

    let mut frames = Vec::with_capacity(candidates.len() + 1);
    for (k, &c) in candidates.iter().enumerate() {
        let limit = candidates.get(k + 1).copied().unwrap_or(last);
        if let Some(f) = (c..limit).find(|&f| seq.is_present(f)) {
            frames.push(f);
        }
    }
    if let Some(f) = (0..=last).rev().find(|&f| seq.is_present(f)) {
        frames.push(f);
    }
    frames.sort_unstable();
    frames.dedup();
    frames.into_iter().map(|f| Anchor::at(f, n)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorRun {
    pub anchor: Anchor,
    pub run: TrackRun,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MseOutcome {
    pub runs: Vec<AnchorRun>,
    pub evaluation: Evaluation,
}

pub(crate) fn execute_mse(
    factory: &dyn TrackerFactory,
    ctx: &SequenceContext<'_>,
    anchors: &[Anchor],
) -> Result<Vec<AnchorRun>> {
    let seq = ctx.sequence;
    anchors
        .iter()
        .map(|&anchor| {
            let init = seq.target(anchor.frame).ok_or_else(|| {
                Error::Invalid(format!("{}: anchor {} has no target", seq.name, anchor.frame))
            })?;
            let mut tracker = factory.create(ctx)?;
            let run = session(tracker.as_mut(), seq, anchor.frame, init, anchor.direction, anchor.span)?;
            Ok(AnchorRun { anchor, run })
        })
        .collect()
}

/// Span-weighted mean over the anchor runs. Runs with nothing to evaluate
/// (only unannotated frames after the anchor) carry no weight.
pub fn score_mse(runs: &[AnchorRun], seq: &Sequence) -> Result<Evaluation> {
    let mut scored = Vec::with_capacity(runs.len());
    for r in runs {
        match score_run(&r.run, seq) {
            Ok(e) => scored.push((e, r.anchor.span as f64)),
            Err(Error::EmptyInput(_)) => {}
            Err(e) => return Err(e),
        }
    }
    let items: Vec<(&Evaluation, f64)> = scored.iter().map(|(e, w)| (e, *w)).collect();
    weighted_mean(&items).ok_or(Error::EmptyInput("no anchor run with an annotated frame"))
}

pub fn run_mse_with_anchors(
    factory: &dyn TrackerFactory,
    ctx: &SequenceContext<'_>,
    anchors: &[Anchor],
) -> Result<MseOutcome> {
    let runs = execute_mse(factory, ctx, anchors)?;
    let evaluation = score_mse(&runs, ctx.sequence)?;
    Ok(MseOutcome { runs, evaluation })
}

pub fn run_mse(factory: &dyn TrackerFactory, ctx: &SequenceContext<'_>) -> Result<MseOutcome> {
    run_mse_with_anchors(factory, ctx, &mse_anchors(ctx.sequence))
}
