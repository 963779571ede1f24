//! Seeded synthetic datasets: a box drifting across the frame with hands,
//! interaction runs, occlusion gaps and a noisy detector.

use std::collections::BTreeSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    computed_attributes, write_detections, DETECTIONS_FILE, write_sequence, Attribute, Detection, DetectionKind,
    DetectionSet, FrameAnnotation, Interaction, Sequence,
};
use crate::error::Result;
use crate::geometry::BoundingBox;

const VERBS: [&str; 5] = ["take", "put", "open", "wash", "cut"];
const NOUNS: [&str; 5] = ["cup", "knife", "plate", "bottle", "sponge"];

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub sequences: usize,
    pub seed: u64,
    pub min_frames: usize,
    pub max_frames: usize,
    pub frame_width: u32,
    pub frame_height: u32,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            sequences: 10,
            seed: 0,
            min_frames: 60,
            max_frames: 240,
            frame_width: 1280,
            frame_height: 720,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticSequence {
    pub sequence: Sequence,
    pub detections: DetectionSet,
}

fn jitter(rng: &mut ChaCha8Rng, b: &BoundingBox, scale: f64) -> BoundingBox {
    let mut d = || (rng.random::<f64>() - 0.5) * 2.0 * scale;
    let w = (b.w + d()).max(1.0);
    let h = (b.h + d()).max(1.0);
    BoundingBox::new(b.x + d(), b.y + d(), w, h).expect("positive jittered box")
}

fn generate_one(cfg: &SyntheticConfig, index: usize, rng: &mut ChaCha8Rng) -> SyntheticSequence {
    let n = rng.random_range(cfg.min_frames..=cfg.max_frames);
    let fps = if index.is_multiple_of(2) { 60.0 } else { 30.0 };
    let fw = f64::from(cfg.frame_width);
    let fh = f64::from(cfg.frame_height);

    let (mut w, mut h) = (rng.random_range(50.0..120.0), rng.random_range(50.0..120.0));
    let (mut cx, mut cy) = (
        rng.random_range(0.3 * fw..0.7 * fw),
        rng.random_range(0.3 * fh..0.7 * fh),
    );
    let (mut vx, mut vy) = (rng.random_range(-4.0..4.0), rng.random_range(-3.0..3.0));
    let growth: f64 = rng.random_range(-0.002..0.002);

    // One occlusion gap in roughly half of the sequences.
    let gap = rng.random_bool(0.5).then(|| {
        let start = rng.random_range(n / 4..n / 2);
        (start, start + rng.random_range(3..9))
    });

    // Interaction runs: a one-hand run then a two-hand run.
    let a = rng.random_range(n / 8..n / 3);
    let b = a + rng.random_range(10..n / 4 + 11).min(n - a - 1);
    let c = (b + rng.random_range(2..10)).min(n - 1);
    let d = (c + rng.random_range(10..n / 4 + 11)).min(n);
    let one_hand = if rng.random_bool(0.5) {
        Interaction::Left
    } else {
        Interaction::Right
    };

    let detection_delay = if index % 3 == 1 { rng.random_range(1..12) } else { 0 };

    let mut frames = Vec::with_capacity(n);
    let mut detections = Vec::with_capacity(n);
    for i in 0..n {
        let target = BoundingBox::from_center(cx, cy, w, h).expect("positive target");
        let present = !gap.is_some_and(|(s, e)| (s..e).contains(&i));
        let left = BoundingBox::new(target.x - 0.4 * w, target.bottom() - 0.3 * h, 0.5 * w, 0.5 * h)
            .expect("positive hand");
        let right = BoundingBox::new(target.right() - 0.1 * w, target.bottom() - 0.3 * h, 0.5 * w, 0.5 * h)
            .expect("positive hand");
        let interaction = if !present {
            Interaction::None
        } else if (a..b).contains(&i) {
            one_hand
        } else if (c..d).contains(&i) {
            Interaction::Both
        } else {
            Interaction::None
        };
        frames.push(FrameAnnotation {
            target: present.then_some(target),
            left_hand: Some(left),
            right_hand: Some(right),
            interaction,
        });

        let mut dets = Vec::new();
        if present && i >= detection_delay && rng.random_bool(0.92) {
            dets.push(Detection::object(jitter(rng, &target, 2.0), rng.random_range(0.6..0.98)));
        }
        if rng.random_bool(0.5) {
            let dw = rng.random_range(30.0..100.0);
            let dh = rng.random_range(30.0..100.0);
            let distractor = BoundingBox::new(
                rng.random_range(0.0..fw - dw),
                rng.random_range(0.0..fh - dh),
                dw,
                dh,
            )
            .expect("positive distractor");
            dets.push(Detection::object(distractor, rng.random_range(0.1..0.9)));
        }
        for (kind, hand, active) in [
            (DetectionKind::LeftHand, left, interaction.needs_left()),
            (DetectionKind::RightHand, right, interaction.needs_right()),
        ] {
            dets.push(Detection {
                bbox: jitter(rng, &hand, 1.0),
                score: rng.random_range(0.7..0.99),
                kind,
                contact: Some(active),
            });
        }
        detections.push(dets);

        cx += vx;
        cy += vy;
        w *= 1.0 + growth;
        h *= 1.0 + growth;
        if cx - w < 0.0 || cx + w > fw {
            vx = -vx;
        }
        if cy - h < 0.0 || cy + h > fh {
            vy = -vy;
        }
    }

    let mut sequence = Sequence {
        name: format!("synth_{index:03}"),
        fps,
        frame_width: cfg.frame_width,
        frame_height: cfg.frame_height,
        frames,
        frame_paths: None,
        attributes: BTreeSet::new(),
        verb: VERBS[rng.random_range(0..VERBS.len())].to_string(),
        noun: NOUNS[rng.random_range(0..NOUNS.len())].to_string(),
    };
    let mut attributes = computed_attributes(&sequence);
    if gap.is_some() {
        attributes.insert(Attribute::FOC);
    }
    if sequence.frames.iter().any(|f| matches!(f.interaction, Interaction::Left | Interaction::Right)) {
        attributes.insert(Attribute::OneHand);
    }
    if sequence.frames.iter().any(|f| f.interaction == Interaction::Both) {
        attributes.insert(Attribute::TwoHands);
    }
    sequence.attributes = attributes;

    SyntheticSequence {
        sequence,
        detections: DetectionSet { frames: detections },
    }
}

pub fn generate(cfg: &SyntheticConfig) -> Vec<SyntheticSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.sequences)
        .map(|i| generate_one(cfg, i, &mut rng))
        .collect()
}

/// Writes `<dir>/<name>/` sequence directories, each with a `detections.txt`.
pub fn write_dataset(items: &[SyntheticSequence], dir: &Path) -> Result<()> {
    for item in items {
        let seq_dir = dir.join(&item.sequence.name);
        write_sequence(&item.sequence, &seq_dir)?;
        write_detections(&item.detections, &seq_dir.join(DETECTIONS_FILE))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::validate_attributes;

    #[test]
    fn deterministic_and_valid() {
        let cfg = SyntheticConfig::default();
        let a = generate(&cfg);
        let b = generate(&cfg);
        assert_eq!(a.len(), 10);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.sequence, y.sequence);
            assert_eq!(x.detections, y.detections);
            x.sequence.validate().unwrap();
            assert!(validate_attributes(&x.sequence).is_empty());
            assert_eq!(x.detections.len(), x.sequence.len());
        }
        assert!(a
            .iter()
            .any(|s| s.sequence.frames.iter().any(|f| f.interaction != Interaction::None)));
    }
}
