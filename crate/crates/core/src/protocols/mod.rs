//! Evaluation protocols. Each protocol has an execution step that drives
//! tracker instances and produces a serializable record of the runs, and a
//! scoring step that reduces a record against the annotations. Keeping the
//! two apart lets reports be regenerated from stored runs alone.

mod breakdown;
mod driver;
mod hoi;
mod mse;
mod ope;
mod rte;

use serde::{Deserialize, Serialize};

use crate::geometry::BoundingBox;

pub use breakdown::{aggregate_breakdowns, Averageable, BreakdownItem, BreakdownReport, Group};
pub use driver::{
    execute, score, LatencySpec, ProtocolConfig, ProtocolId, SequenceRecord, SequenceResult,
};
pub use hoi::{
    hands_valid, interaction_segments, run_hoi, score_hoi, valid_hoi_detection, HoiOutcome,
    HoiSegmentRecord, HoiSegmentScore, HOI_IOU,
};
pub use mse::{
    anchor_spacing, mse_anchors, run_mse, run_mse_with_anchors, score_mse, Anchor, AnchorRun,
    MseOutcome,
};
pub use ope::{
    first_valid_detection, run_ope, run_ope_d, score_ope_d, OpeDOutcome, OpeDRecord, ScoreDelta,
    DETECTION_IOU,
};
pub use rte::{run_rte, score_rte, LatencyModel, RteOutcome, RteRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

/// A tracker's output over a contiguous frame range, in feed order.
///
/// `boxes[0]` is the initialization box given on `start_frame`; the run
/// then covers `boxes.len()` frames moving in `direction`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRun {
    pub start_frame: usize,
    pub direction: Direction,
    pub boxes: Vec<BoundingBox>,
    /// Seconds spent per frame, aligned with `boxes`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latencies: Option<Vec<f64>>,
}

impl TrackRun {
    /// Frame indices in feed order.
    pub fn frames(&self) -> impl Iterator<Item = usize> + '_ {
        let start = self.start_frame;
        let dir = self.direction;
        (0..self.boxes.len()).map(move |k| match dir {
            Direction::Forward => start + k,
            Direction::Backward => start - k,
        })
    }

    pub fn span(&self) -> usize {
        self.boxes.len()
    }

    /// The same run without timing information.
    pub fn without_latencies(mut self) -> Self {
        self.latencies = None;
        self
    }
}
