//! Attributes whose definitions are computable from the box annotations.

use std::collections::BTreeSet;

use serde::Serialize;

use super::{Attribute, Sequence};
use crate::geometry::BoundingBox;

const RATIO_RANGE: (f64, f64) = (0.5, 2.0);
const LOW_RESOLUTION_AREA: f64 = 1000.0;
const HIGH_RESOLUTION_AREA: f64 = 250_000.0;

/// The attributes that can be recomputed: SC, ARC, LR, HR, FM.
pub const COMPUTABLE: [Attribute; 5] = [
    Attribute::SC,
    Attribute::ARC,
    Attribute::LR,
    Attribute::HR,
    Attribute::FM,
];

fn outside_ratio_range(r: f64) -> bool {
    r < RATIO_RANGE.0 || r > RATIO_RANGE.1
}

/// Fast motion between two adjacent frames: the center moves further than
/// the side of a square with the earlier box's area.
pub(crate) fn is_fast_motion(prev: &BoundingBox, next: &BoundingBox) -> bool {
    let (px, py) = prev.center();
    let (nx, ny) = next.center();
    (nx - px).hypot(ny - py) > prev.area().sqrt()
}

/// Recomputes SC, ARC, LR, HR and FM from the target annotations.
pub fn computed_attributes(seq: &Sequence) -> BTreeSet<Attribute> {
    let mut out = BTreeSet::new();
    let Some(first) = seq.target(0) else {
        return out;
    };
    let present: Vec<BoundingBox> = seq.frames.iter().filter_map(|f| f.target).collect();
    if present
        .iter()
        .any(|b| outside_ratio_range(b.area() / first.area()))
    {
        out.insert(Attribute::SC);
    }
    if present
        .iter()
        .any(|b| outside_ratio_range(b.aspect_ratio() / first.aspect_ratio()))
    {
        out.insert(Attribute::ARC);
    }
    if present.iter().any(|b| b.area() < LOW_RESOLUTION_AREA) {
        out.insert(Attribute::LR);
    }
    if present.iter().any(|b| b.area() > HIGH_RESOLUTION_AREA) {
        out.insert(Attribute::HR);
    }
    let fast = seq.frames.windows(2).any(|w| match (w[0].target, w[1].target) {
        (Some(a), Some(b)) => is_fast_motion(&a, &b),
        _ => false,
    });
    if fast {
        out.insert(Attribute::FM);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AttributeMismatch {
    pub sequence: String,
    pub attribute: Attribute,
    pub declared: bool,
    pub computed: bool,
}

/// Lists every computable attribute whose declared presence disagrees with
/// the annotations.
pub fn validate_attributes(seq: &Sequence) -> Vec<AttributeMismatch> {
    let computed = computed_attributes(seq);
    COMPUTABLE
        .iter()
        .filter_map(|&attribute| {
            let declared = seq.attributes.contains(&attribute);
            let computed = computed.contains(&attribute);
            (declared != computed).then(|| AttributeMismatch {
                sequence: seq.name.clone(),
                attribute,
                declared,
                computed,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FrameAnnotation;

    fn seq_of(boxes: &[Option<(f64, f64, f64, f64)>], attrs: &[Attribute]) -> Sequence {
        Sequence {
            name: "t".into(),
            fps: 30.0,
            frame_width: 1920,
            frame_height: 1080,
            frames: boxes
                .iter()
                .map(|b| {
                    FrameAnnotation::with_target(
                        b.map(|(x, y, w, h)| BoundingBox::new(x, y, w, h).unwrap()),
                    )
                })
                .collect(),
            frame_paths: None,
            attributes: attrs.iter().copied().collect(),
            verb: "v".into(),
            noun: "n".into(),
        }
    }

    #[test]
    fn thresholds() {
        // area 1600 -> 3300 (ratio 2.06): SC, no LR.
        let s = seq_of(&[Some((0.0, 0.0, 40.0, 40.0)), Some((0.0, 0.0, 55.0, 60.0))], &[]);
        assert_eq!(computed_attributes(&s), [Attribute::SC].into());

        // ratio exactly 2 is inside the range.
        let s = seq_of(&[Some((0.0, 0.0, 40.0, 40.0)), Some((0.0, 0.0, 80.0, 40.0))], &[]);
        assert!(computed_attributes(&s).is_empty());

        // aspect 1 -> 2.22 at nearly constant area.
        let s = seq_of(&[Some((0.0, 0.0, 40.0, 40.0)), Some((0.0, 0.0, 60.0, 27.0))], &[]);
        assert_eq!(computed_attributes(&s), [Attribute::ARC].into());

        let s = seq_of(&[Some((0.0, 0.0, 30.0, 30.0))], &[]);
        assert_eq!(computed_attributes(&s), [Attribute::LR].into());

        let s = seq_of(&[Some((0.0, 0.0, 501.0, 500.0))], &[]);
        assert_eq!(computed_attributes(&s), [Attribute::HR].into());
    }

    #[test]
    fn fast_motion_needs_adjacent_present_frames() {
        let s = seq_of(
            &[Some((0.0, 0.0, 40.0, 40.0)), None, Some((500.0, 0.0, 40.0, 40.0))],
            &[],
        );
        assert!(!computed_attributes(&s).contains(&Attribute::FM));
        let s = seq_of(&[Some((0.0, 0.0, 40.0, 40.0)), Some((41.0, 0.0, 40.0, 40.0))], &[]);
        assert!(computed_attributes(&s).contains(&Attribute::FM));
    }

    #[test]
    fn validator_flags_contradictions() {
        let s = seq_of(&[Some((0.0, 0.0, 40.0, 40.0))], &[Attribute::HR, Attribute::MB]);
        let m = validate_attributes(&s);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].attribute, Attribute::HR);
        assert!(m[0].declared && !m[0].computed);
    }
}
