use crate::dataset::{Detection, DetectionSet};
use crate::error::Result;
use crate::geometry::{iou, BoundingBox};
use crate::runner::{FrameInfo, Prediction, Tracker};

/// The memorized target box of tracking-by-detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TbydState {
    pub memorized: BoundingBox,
}

/// Index of the object detection overlapping `reference` the most, if any
/// overlaps at all. Earlier detections win ties.
pub(crate) fn best_overlap<'a>(
    reference: &BoundingBox,
    dets: impl IntoIterator<Item = &'a Detection>,
) -> Option<(f64, &'a Detection)> {
    dets.into_iter()
        .filter(|d| d.kind == crate::dataset::DetectionKind::Object)
        .map(|d| (iou(&d.bbox, reference), d))
        .filter(|(v, _)| *v > 0.0)
        .fold(None, |best, (v, d)| match best {
            Some((bv, _)) if bv >= v => best,
            _ => Some((v, d)),
        })
}

/// Outputs the object detection with the largest IoU against the memorized
/// box and memorizes it; without any overlapping detection the memorized
/// box is output unchanged.
pub fn tbyd_step(state: &mut TbydState, dets: &[Detection]) -> BoundingBox {
    if let Some((_, d)) = best_overlap(&state.memorized, dets) {
        state.memorized = d.bbox;
    }
    state.memorized
}

pub struct TbydTracker {
    detections: DetectionSet,
    state: Option<TbydState>,
}

impl TbydTracker {
    pub fn new(detections: DetectionSet) -> Self {
        Self {
            detections,
            state: None,
        }
    }
}

impl Tracker for TbydTracker {
    fn init(&mut self, _frame: &FrameInfo, bbox: BoundingBox) -> Result<()> {
        self.state = Some(TbydState { memorized: bbox });
        Ok(())
    }

    fn update(&mut self, frame: &FrameInfo) -> Result<Prediction> {
        let state = self.state.as_mut().expect("initialized before update");
        Ok(tbyd_step(state, self.detections.frame(frame.index)).into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::DetectionKind;
    use proptest::prelude::*;

    fn bb(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox::new(x, y, w, h).unwrap()
    }

    #[test]
    fn picks_largest_overlap_not_score() {
        let mut s = TbydState { memorized: bb(0.0, 0.0, 10.0, 10.0) };
        let dets = [
            Detection::object(bb(1.0, 1.0, 10.0, 10.0), 0.9),
            Detection::object(bb(20.0, 20.0, 5.0, 5.0), 0.99),
        ];
        assert_eq!(tbyd_step(&mut s, &dets), bb(1.0, 1.0, 10.0, 10.0));
        assert_eq!(s.memorized, bb(1.0, 1.0, 10.0, 10.0));
    }

    #[test]
    fn falls_back_to_memorized() {
        let m = bb(0.0, 0.0, 10.0, 10.0);
        let mut s = TbydState { memorized: m };
        assert_eq!(tbyd_step(&mut s, &[]), m);
        let far = [Detection::object(bb(50.0, 50.0, 10.0, 10.0), 1.0)];
        assert_eq!(tbyd_step(&mut s, &far), m);
        // Hand detections are not candidates.
        let hand = [Detection { kind: DetectionKind::LeftHand, ..Detection::object(m, 1.0) }];
        assert_eq!(tbyd_step(&mut s, &hand), m);
    }

    proptest! {
        #[test]
        fn output_overlaps_memorized_or_equals_it(
            dets in proptest::collection::vec((0.0..100.0f64, 0.0..100.0f64, 1.0..40.0f64, 1.0..40.0f64, 0.0..=1.0f64), 0..8)
        ) {
            let m = bb(40.0, 40.0, 20.0, 20.0);
            let dets: Vec<_> = dets.into_iter().map(|(x, y, w, h, s)| Detection::object(bb(x, y, w, h), s)).collect();
            let mut s1 = TbydState { memorized: m };
            let mut s2 = TbydState { memorized: m };
            let out = tbyd_step(&mut s1, &dets);
            prop_assert_eq!(out, tbyd_step(&mut s2, &dets));
            prop_assert!(out == m || iou(&out, &m) > 0.0);
        }
    }
}
