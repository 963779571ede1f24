use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::Sequence;
use crate::error::Result;
use crate::geometry::BoundingBox;
use crate::runner::{FrameInfo, Prediction, Tracker};

fn targets(seq: &Sequence) -> Vec<Option<BoundingBox>> {
    seq.frames.iter().map(|f| f.target).collect()
}

pub struct OracleTracker {
    targets: Vec<Option<BoundingBox>>,
    last: Option<BoundingBox>,
}

impl OracleTracker {
    pub fn new(seq: &Sequence) -> Self {
        Self {
            targets: targets(seq),
            last: None,
        }
    }
}

impl Tracker for OracleTracker {
    fn init(&mut self, _frame: &FrameInfo, bbox: BoundingBox) -> Result<()> {
        self.last = Some(bbox);
        Ok(())
    }

    fn update(&mut self, frame: &FrameInfo) -> Result<Prediction> {
        let b = self.targets[frame.index]
            .or(self.last)
            .expect("oracle initialized before update");
        self.last = Some(b);
        Ok(b.into())
    }
}

#[derive(Default)]
pub struct StaticTracker {
    init: Option<BoundingBox>,
}

impl Tracker for StaticTracker {
    fn init(&mut self, _frame: &FrameInfo, bbox: BoundingBox) -> Result<()> {
        self.init = Some(bbox);
        Ok(())
    }

    fn update(&mut self, _frame: &FrameInfo) -> Result<Prediction> {
        Ok(self.init.expect("static tracker initialized before update").into())
    }
}

/// 64-bit FNV-1a; stable across platforms and releases.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Ground truth perturbed per frame. The noise of a frame depends only on
/// the seed, the sequence name and the frame index, so every protocol sees
/// the same perturbation for the same frame.
pub struct NoisyOracleTracker {
    targets: Vec<Option<BoundingBox>>,
    sigma: f64,
    stream: u64,
    last: Option<BoundingBox>,
}

impl NoisyOracleTracker {
    pub fn new(seq: &Sequence, sigma: f64, seed: u64) -> Self {
        Self {
            targets: targets(seq),
            sigma,
            stream: seed ^ fnv1a(seq.name.as_bytes()),
            last: None,
        }
    }

    fn jitter(&self, frame: usize, b: &BoundingBox) -> BoundingBox {
        let mut rng = ChaCha8Rng::seed_from_u64(self.stream.wrapping_add(fnv1a(&frame.to_le_bytes())));
        let mut n = || -> f64 { StandardNormal.sample(&mut rng) };
        let (dx, dy, sw, sh) = (n(), n(), n(), n());
        BoundingBox {
            x: b.x + self.sigma * b.w * dx,
            y: b.y + self.sigma * b.h * dy,
            w: b.w * (self.sigma * sw).exp(),
            h: b.h * (self.sigma * sh).exp(),
        }
    }
}

impl Tracker for NoisyOracleTracker {
    fn init(&mut self, _frame: &FrameInfo, bbox: BoundingBox) -> Result<()> {
        self.last = Some(bbox);
        Ok(())
    }

    fn update(&mut self, frame: &FrameInfo) -> Result<Prediction> {
        let b = match self.targets[frame.index] {
            Some(gt) => self.jitter(frame.index, &gt),
            None => self.last.expect("initialized before update"),
        };
        self.last = Some(b);
        Ok(b.into())
    }
}

pub struct DelayedOracleTracker {
    targets: Vec<Option<BoundingBox>>,
    delay: usize,
    fed: Vec<usize>,
    init: Option<BoundingBox>,
    last: Option<BoundingBox>,
}

impl DelayedOracleTracker {
    pub fn new(seq: &Sequence, delay: usize) -> Self {
        Self {
            targets: targets(seq),
            delay,
            fed: Vec::new(),
            init: None,
            last: None,
        }
    }
}

impl Tracker for DelayedOracleTracker {
    fn init(&mut self, frame: &FrameInfo, bbox: BoundingBox) -> Result<()> {
        self.fed = vec![frame.index];
        self.init = Some(bbox);
        self.last = Some(bbox);
        Ok(())
    }

    fn update(&mut self, frame: &FrameInfo) -> Result<Prediction> {
        self.fed.push(frame.index);
        let position = self.fed.len() - 1;
        // Position 0 is the initialization frame: echo the given box there.
        let b = match position.checked_sub(self.delay) {
            None | Some(0) => self.init,
            Some(lagged) => self.targets[self.fed[lagged]].or(self.last),
        }
        .expect("initialized before update");
        self.last = Some(b);
        Ok(b.into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::fixtures::moving_sequence;
    use crate::protocols::Direction;
    use crate::runner::session;

    #[test]
    fn noisy_oracle_is_reproducible() {
        let seq = moving_sequence(20, 30.0, 2.0, &[5]);
        let run = |seed| {
            let mut t = NoisyOracleTracker::new(&seq, 0.1, seed);
            session(&mut t, &seq, 0, seq.target(0).unwrap(), Direction::Forward, 20).unwrap().boxes
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3), run(4));
        // Absent frame holds the previous output.
        let boxes = run(3);
        assert_eq!(boxes[5], boxes[4]);
    }

    #[test]
    fn delayed_oracle_lags_in_feed_order() {
        let seq = moving_sequence(10, 30.0, 1.0, &[]);
        let mut t = DelayedOracleTracker::new(&seq, 2);
        let run = session(&mut t, &seq, 9, seq.target(9).unwrap(), Direction::Backward, 10).unwrap();
        // Frames fed: 9, 8, 7, 6, ... ; output at 7 is gt of 9.
        assert_eq!(run.boxes[1], seq.target(9).unwrap());
        assert_eq!(run.boxes[2], seq.target(9).unwrap());
        assert_eq!(run.boxes[3], seq.target(8).unwrap());
        assert_eq!(run.boxes[9], seq.target(2).unwrap());
    }
}
