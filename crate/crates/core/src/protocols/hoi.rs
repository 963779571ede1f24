//! Hand-object interaction evaluation: detect a valid interaction in each
//! labelled run of frames, initialize the tracker on the detected object
//! and count the frames where detection plus tracking match the labels.

use serde::{Deserialize, Serialize};

use super::{Direction, TrackRun};
use crate::dataset::{DetectionKind, DetectionSet, Interaction, Sequence};
use crate::error::{Error, Result};
use crate::geometry::{iou, BoundingBox};
use crate::runner::{session, SequenceContext, TrackerFactory};

/// Overlap required for hands, the detected object and the tracked box.
pub const HOI_IOU: f64 = 0.5;

/// Maximal runs `(first, last, label)` of one interaction label other than `NONE`.
pub fn interaction_segments(seq: &Sequence) -> Vec<(usize, usize, Interaction)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < seq.len() {
        let label = seq.frames[i].interaction;
        let mut j = i;
        while j + 1 < seq.len() && seq.frames[j + 1].interaction == label {
            j += 1;
        }
        if label != Interaction::None {
            out.push((i, j, label));
        }
        i = j + 1;
    }
    out
}

/// Every hand named by `label` is detected in contact with `iou >= 0.5`
/// against its annotation.
pub fn hands_valid(seq: &Sequence, dets: &DetectionSet, frame: usize, label: Interaction) -> bool {
    let annotation = &seq.frames[frame];
    let matches = |kind: DetectionKind, gt: Option<BoundingBox>| {
        gt.is_some_and(|gt| {
            dets.frame(frame)
                .iter()
                .any(|d| d.kind == kind && d.contact == Some(true) && iou(&d.bbox, &gt) >= HOI_IOU)
        })
    };
    (!label.needs_left() || matches(DetectionKind::LeftHand, annotation.left_hand))
        && (!label.needs_right() || matches(DetectionKind::RightHand, annotation.right_hand))
}

/// The object box of a valid interaction detection on `frame`, if any:
/// hands valid and an object detection with `iou >= 0.5` against the target
/// (highest score first).
pub fn valid_hoi_detection(
    seq: &Sequence,
    dets: &DetectionSet,
    frame: usize,
    label: Interaction,
) -> Option<BoundingBox> {
    let gt = seq.target(frame)?;
    if !hands_valid(seq, dets, frame, label) {
        return None;
    }
    dets.objects(frame)
        .filter(|d| iou(&d.bbox, &gt) >= HOI_IOU)
        .fold(None::<(f64, BoundingBox)>, |best, d| match best {
            Some((s, _)) if s >= d.score => best,
            _ => Some((d.score, d.bbox)),
        })
        .map(|(_, b)| b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoiSegmentRecord {
    pub first: usize,
    pub last: usize,
    pub label: Interaction,
    /// Tracker run from the initialization frame to `last`; `None` when no
    /// valid detection appeared in the segment.
    pub run: Option<TrackRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HoiSegmentScore {
    pub first: usize,
    pub last: usize,
    pub label: Interaction,
    pub init_frame: Option<usize>,
    pub matched: usize,
    /// Annotated frames of the segment.
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoiOutcome {
    pub segments: Vec<HoiSegmentScore>,
    pub matched: usize,
    pub frames: usize,
    /// `None` when the sequence has no interaction segment to evaluate.
    pub recall: Option<f64>,
}

pub(crate) fn execute_hoi(
    factory: &dyn TrackerFactory,
    ctx: &SequenceContext<'_>,
    oracle_init: bool,
) -> Result<Vec<HoiSegmentRecord>> {
    let seq = ctx.sequence;
    let dets = ctx
        .detections
        .ok_or_else(|| Error::Invalid(format!("{}: HOI evaluation needs detections", seq.name)))?;
    interaction_segments(seq)
        .into_iter()
        .map(|(first, last, label)| {
            let init = if oracle_init {
                (first..=last).find_map(|f| seq.target(f).map(|gt| (f, gt)))
            } else {
                (first..=last).find_map(|f| valid_hoi_detection(seq, dets, f, label).map(|b| (f, b)))
            };
            let run = match init {
                Some((frame, bbox)) => {
                    let mut tracker = factory.create(ctx)?;
                    Some(session(tracker.as_mut(), seq, frame, bbox, Direction::Forward, last - frame + 1)?)
                }
                None => None,
            };
            Ok(HoiSegmentRecord {
                first,
                last,
                label,
                run,
            })
        })
        .collect()
}

pub fn score_hoi(records: &[HoiSegmentRecord], seq: &Sequence, dets: &DetectionSet) -> HoiOutcome {
    let segments: Vec<HoiSegmentScore> = records
        .iter()
        .map(|r| {
            let frames = (r.first..=r.last).filter(|&f| seq.is_present(f)).count();
            let matched = r.run.as_ref().map_or(0, |run| {
                run.frames()
                    .zip(&run.boxes)
                    .filter(|(f, b)| {
                        seq.target(*f).is_some_and(|gt| {
                            hands_valid(seq, dets, *f, r.label) && iou(b, &gt) >= HOI_IOU
                        })
                    })
                    .count()
            });
            HoiSegmentScore {
                first: r.first,
                last: r.last,
                label: r.label,
                init_frame: r.run.as_ref().map(|run| run.start_frame),
                matched,
                frames,
            }
        })
        .collect();
    let matched: usize = segments.iter().map(|s| s.matched).sum();
    let frames: usize = segments.iter().map(|s| s.frames).sum();
    HoiOutcome {
        recall: (frames > 0).then(|| matched as f64 / frames as f64),
        segments,
        matched,
        frames,
    }
}

/// Runs the interaction pipeline over every labelled segment. With
/// `oracle_init` the tracker starts from the ground truth on the first
/// annotated frame of each segment instead of waiting for a detection.
pub fn run_hoi(
    factory: &dyn TrackerFactory,
    ctx: &SequenceContext<'_>,
    oracle_init: bool,
) -> Result<HoiOutcome> {
    let records = execute_hoi(factory, ctx, oracle_init)?;
    let dets = ctx.detections.expect("checked by execute_hoi");
    Ok(score_hoi(&records, ctx.sequence, dets))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::Baseline;
    use crate::dataset::Detection;
    use crate::protocols::fixtures::moving_sequence;

    fn labelled(n: usize, label: Interaction, range: std::ops::Range<usize>) -> Sequence {
        let mut seq = moving_sequence(n, 30.0, 2.0, &[]);
        for f in 0..n {
            let t = seq.target(f).unwrap();
            seq.frames[f].left_hand = Some(t.translated(-20.0, 20.0));
            seq.frames[f].right_hand = Some(t.translated(20.0, 20.0));
            if range.contains(&f) {
                seq.frames[f].interaction = label;
            }
        }
        seq
    }

    /// Perfect hands/object detections from `from` on.
    fn detector(seq: &Sequence, from: usize) -> DetectionSet {
        let mut dets = DetectionSet::empty(seq.len());
        for f in from..seq.len() {
            let a = &seq.frames[f];
            let contact = a.interaction != Interaction::None;
            dets.frames[f].push(Detection { bbox: a.left_hand.unwrap(), score: 0.9, kind: DetectionKind::LeftHand, contact: Some(contact) });
            dets.frames[f].push(Detection { bbox: a.right_hand.unwrap(), score: 0.9, kind: DetectionKind::RightHand, contact: Some(contact) });
            dets.frames[f].push(Detection::object(a.target.unwrap(), 0.9));
        }
        dets
    }

    #[test]
    fn segments_split_on_label_change() {
        let mut seq = labelled(10, Interaction::Left, 2..5);
        seq.frames[5].interaction = Interaction::Both;
        seq.frames[6].interaction = Interaction::Both;
        assert_eq!(
            interaction_segments(&seq),
            vec![(2, 4, Interaction::Left), (5, 6, Interaction::Both)]
        );
    }

    #[test]
    fn oracle_everything_is_perfect() {
        let seq = labelled(40, Interaction::Both, 5..30);
        let dets = detector(&seq, 0);
        let ctx = SequenceContext { sequence: &seq, detections: Some(&dets) };
        let out = run_hoi(&Baseline::Oracle, &ctx, false).unwrap();
        assert_eq!(out.recall, Some(1.0));
        assert_eq!(out.segments[0].init_frame, Some(5));
    }

    #[test]
    fn delayed_detector_closed_form() {
        let seq = labelled(40, Interaction::Right, 10..30);
        for k in 0..=20 {
            let dets = detector(&seq, 10 + k);
            let ctx = SequenceContext { sequence: &seq, detections: Some(&dets) };
            let out = run_hoi(&Baseline::Oracle, &ctx, false).unwrap();
            assert_eq!(out.recall, Some((20 - k) as f64 / 20.0), "k={k}");
        }
    }

    #[test]
    fn only_the_labelled_hand_must_match() {
        let seq = labelled(20, Interaction::Left, 0..20);
        let mut dets = detector(&seq, 0);
        for f in dets.frames.iter_mut() {
            f.retain(|d| d.kind != DetectionKind::RightHand);
        }
        assert!(hands_valid(&seq, &dets, 3, Interaction::Left));
        assert!(!hands_valid(&seq, &dets, 3, Interaction::Both));
        // Contact must be predicted.
        for f in dets.frames.iter_mut() {
            for d in f.iter_mut() {
                d.contact = Some(false);
            }
        }
        let ctx = SequenceContext { sequence: &seq, detections: Some(&dets) };
        assert_eq!(run_hoi(&Baseline::Oracle, &ctx, false).unwrap().recall, Some(0.0));
    }

    #[test]
    fn never_valid_and_no_segments() {
        let seq = labelled(20, Interaction::Left, 3..9);
        let dets = DetectionSet::empty(20);
        let ctx = SequenceContext { sequence: &seq, detections: Some(&dets) };
        let out = run_hoi(&Baseline::Oracle, &ctx, false).unwrap();
        assert_eq!(out.recall, Some(0.0));
        assert_eq!(out.segments[0].init_frame, None);

        let plain = moving_sequence(20, 30.0, 1.0, &[]);
        let ctx = SequenceContext { sequence: &plain, detections: Some(&dets) };
        assert_eq!(run_hoi(&Baseline::Oracle, &ctx, false).unwrap().recall, None);
    }

    #[test]
    fn oracle_init_starts_on_first_frame() {
        let seq = labelled(30, Interaction::Left, 4..14);
        let dets = detector(&seq, 9);
        let ctx = SequenceContext { sequence: &seq, detections: Some(&dets) };
        let out = run_hoi(&Baseline::Oracle, &ctx, true).unwrap();
        assert_eq!(out.segments[0].init_frame, Some(4));
        // Hands are only detected from frame 9 on.
        assert_eq!(out.recall, Some(0.5));
    }
}
