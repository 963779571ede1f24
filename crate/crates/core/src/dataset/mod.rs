//! Sequence annotations, detections and their on-disk formats.

mod attributes;
mod io;
mod stats;
pub mod synthetic;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

pub use attributes::{computed_attributes, validate_attributes, AttributeMismatch};
pub use io::{
    format_detections, load_dataset, load_detections, load_sequence, parse_detections,
    write_detections, write_sequence, DATASET_METADATA_FILE, DETECTIONS_FILE,
};
pub(crate) mod io_support {
    pub(crate) use super::io::{lines, parse_box, read_text};
}
pub use stats::{dataset_stats, Histogram, SequenceMotion, StatsReport};

/// Hand-object contact label of a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Interaction {
    #[serde(rename = "NONE")]
    None,
    /// Left hand in contact with the target.
    #[serde(rename = "LHI")]
    Left,
    #[serde(rename = "RHI")]
    Right,
    #[serde(rename = "BHI")]
    Both,
}

impl Interaction {
    pub fn token(self) -> &'static str {
        match self {
            Interaction::None => "NONE",
            Interaction::Left => "LHI",
            Interaction::Right => "RHI",
            Interaction::Both => "BHI",
        }
    }

    pub fn needs_left(self) -> bool {
        matches!(self, Interaction::Left | Interaction::Both)
    }

    pub fn needs_right(self) -> bool {
        matches!(self, Interaction::Right | Interaction::Both)
    }
}

impl FromStr for Interaction {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "NONE" => Ok(Interaction::None),
            "LHI" => Ok(Interaction::Left),
            "RHI" => Ok(Interaction::Right),
            "BHI" => Ok(Interaction::Both),
            other => Err(format!("unknown interaction label {other:?}")),
        }
    }
}

/// The closed set of sequence attribute codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Attribute {
    SC,
    ARC,
    IV,
    SOB,
    RIG,
    DEF,
    ROT,
    POC,
    FOC,
    OUT,
    MB,
    FM,
    LR,
    HR,
    HM,
    #[serde(rename = "1H")]
    OneHand,
    #[serde(rename = "2H")]
    TwoHands,
}

impl Attribute {
    pub const ALL: [Attribute; 17] = [
        Attribute::SC,
        Attribute::ARC,
        Attribute::IV,
        Attribute::SOB,
        Attribute::RIG,
        Attribute::DEF,
        Attribute::ROT,
        Attribute::POC,
        Attribute::FOC,
        Attribute::OUT,
        Attribute::MB,
        Attribute::FM,
        Attribute::LR,
        Attribute::HR,
        Attribute::HM,
        Attribute::OneHand,
        Attribute::TwoHands,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Attribute::SC => "SC",
            Attribute::ARC => "ARC",
            Attribute::IV => "IV",
            Attribute::SOB => "SOB",
            Attribute::RIG => "RIG",
            Attribute::DEF => "DEF",
            Attribute::ROT => "ROT",
            Attribute::POC => "POC",
            Attribute::FOC => "FOC",
            Attribute::OUT => "OUT",
            Attribute::MB => "MB",
            Attribute::FM => "FM",
            Attribute::LR => "LR",
            Attribute::HR => "HR",
            Attribute::HM => "HM",
            Attribute::OneHand => "1H",
            Attribute::TwoHands => "2H",
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Attribute {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Attribute::ALL
            .into_iter()
            .find(|a| a.code() == s)
            .ok_or_else(|| format!("unknown attribute code {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameAnnotation {
    /// `None` when the target is fully occluded or out of view.
    pub target: Option<BoundingBox>,
    pub left_hand: Option<BoundingBox>,
    pub right_hand: Option<BoundingBox>,
    pub interaction: Interaction,
}

impl FrameAnnotation {
    pub fn with_target(target: Option<BoundingBox>) -> Self {
        Self {
            target,
            left_hand: None,
            right_hand: None,
            interaction: Interaction::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub name: String,
    pub fps: f64,
    pub frame_width: u32,
    pub frame_height: u32,
    pub frames: Vec<FrameAnnotation>,
    pub frame_paths: Option<Vec<String>>,
    pub attributes: BTreeSet<Attribute>,
    pub verb: String,
    pub noun: String,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn target(&self, frame: usize) -> Option<BoundingBox> {
        self.frames.get(frame).and_then(|f| f.target)
    }

    pub fn is_present(&self, frame: usize) -> bool {
        self.target(frame).is_some()
    }

    /// Opaque frame token sent to trackers: the image path when frames
    /// exist on disk, `frame:<index>` otherwise.
    pub fn frame_ref(&self, frame: usize) -> String {
        match &self.frame_paths {
            Some(paths) => paths[frame].clone(),
            None => format!("frame:{frame}"),
        }
    }

    pub fn frame_period(&self) -> f64 {
        1.0 / self.fps
    }

    /// Checks every structural invariant a loaded sequence must satisfy.
    pub fn validate(&self) -> Result<()> {
        let fail = |message: String| {
            Err(Error::InvalidSequence {
                sequence: self.name.clone(),
                message,
            })
        };
        if self.name.is_empty() {
            return fail("empty name".into());
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return fail(format!("fps must be positive, got {}", self.fps));
        }
        if self.frame_width == 0 || self.frame_height == 0 {
            return fail("frame size must be positive".into());
        }
        if self.frames.is_empty() {
            return fail("no frames".into());
        }
        if self.frames[0].target.is_none() {
            return fail("target absent in the first frame".into());
        }
        if let Some(paths) = &self.frame_paths {
            if paths.len() != self.frames.len() {
                return fail(format!(
                    "{} frame paths for {} frames",
                    paths.len(),
                    self.frames.len()
                ));
            }
        }
        for (i, frame) in self.frames.iter().enumerate() {
            if frame.interaction.needs_left() && frame.left_hand.is_none() {
                return fail(format!(
                    "frame {i}: {} without a left-hand box",
                    frame.interaction.token()
                ));
            }
            if frame.interaction.needs_right() && frame.right_hand.is_none() {
                return fail(format!(
                    "frame {i}: {} without a right-hand box",
                    frame.interaction.token()
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DetectionKind {
    Object,
    LeftHand,
    RightHand,
}

impl DetectionKind {
    pub fn token(self) -> &'static str {
        match self {
            DetectionKind::Object => "obj",
            DetectionKind::LeftHand => "lh",
            DetectionKind::RightHand => "rh",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub bbox: BoundingBox,
    pub score: f64,
    pub kind: DetectionKind,
    /// Predicted hand-object contact state, when the detector provides one.
    pub contact: Option<bool>,
}

impl Detection {
    pub fn object(bbox: BoundingBox, score: f64) -> Self {
        Self {
            bbox,
            score,
            kind: DetectionKind::Object,
            contact: None,
        }
    }
}

/// Per-frame detector outputs for one sequence.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectionSet {
    pub frames: Vec<Vec<Detection>>,
}

impl DetectionSet {
    pub fn empty(frame_count: usize) -> Self {
        Self {
            frames: vec![Vec::new(); frame_count],
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame(&self, index: usize) -> &[Detection] {
        self.frames.get(index).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn objects(&self, index: usize) -> impl Iterator<Item = &Detection> {
        self.frame(index)
            .iter()
            .filter(|d| d.kind == DetectionKind::Object)
    }
}
