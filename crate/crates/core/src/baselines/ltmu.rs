use crate::dataset::{DetectionKind, DetectionSet};
use crate::error::{Error, Result};
use crate::geometry::{iou, BoundingBox};
use crate::runner::{FrameInfo, Prediction, Tracker};

pub const DEFAULT_CONFIDENCE_THRESHOLD: f64 = 0.5;
pub const DEFAULT_CANDIDATES: usize = 10;

/// Estimates the probability that a box contains the target.
pub trait Verifier: Send {
    fn confidence(&mut self, frame: &FrameInfo, bbox: &BoundingBox) -> Result<f64>;

    /// Online-update hook, called with every confidently localized box.
    fn observe(&mut self, _frame: &FrameInfo, _bbox: &BoundingBox) -> Result<()> {
        Ok(())
    }
}

/// Whole-frame candidate source, returning (box, score) pairs.
pub trait Redetector: Send {
    fn candidates(&mut self, frame: &FrameInfo) -> Result<Vec<(BoundingBox, f64)>>;
}

/// How the short-term tracker's own presence signal (its prediction
/// confidence, when reported) combines with the verifier. A tracker that
/// reports no presence signal is judged by the verifier alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PresenceRule {
    #[default]
    VerifierOnly,
    And,
    Or,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LtmuConfig {
    pub confidence_threshold: f64,
    pub candidates: usize,
    pub presence: PresenceRule,
}

impl Default for LtmuConfig {
    fn default() -> Self {
        Self {
            confidence_threshold: DEFAULT_CONFIDENCE_THRESHOLD,
            candidates: DEFAULT_CANDIDATES,
            presence: PresenceRule::default(),
        }
    }
}

/// Observable state between frames.
#[derive(Debug, Clone, PartialEq)]
pub struct LtmuState {
    /// Last box localized with confidence at least the threshold.
    pub last_position: BoundingBox,
    pub redetections: usize,
}

/// Short-term tracking verified every frame; low confidence triggers
/// whole-frame re-detection and re-initialization on the best verified
/// candidate.
pub struct LtmuTracker {
    short_term: Box<dyn Tracker>,
    verifier: Box<dyn Verifier>,
    redetector: Box<dyn Redetector>,
    config: LtmuConfig,
    state: Option<LtmuState>,
}

impl LtmuTracker {
    pub fn new(
        short_term: Box<dyn Tracker>,
        verifier: Box<dyn Verifier>,
        redetector: Box<dyn Redetector>,
        config: LtmuConfig,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&config.confidence_threshold) {
            return Err(Error::Invalid(format!(
                "confidence threshold {} outside [0, 1]",
                config.confidence_threshold
            )));
        }
        if config.candidates == 0 {
            return Err(Error::Invalid("candidate cap must be at least 1".into()));
        }
        Ok(Self {
            short_term,
            verifier,
            redetector,
            config,
            state: None,
        })
    }

    pub fn state(&self) -> Option<&LtmuState> {
        self.state.as_ref()
    }

    fn accepts(&self, verified: f64, presence: Option<f64>) -> bool {
        let tau = self.config.confidence_threshold;
        let verified = verified >= tau;
        match (self.config.presence, presence) {
            (PresenceRule::VerifierOnly, _) | (_, None) => verified,
            (PresenceRule::And, Some(p)) => verified && p >= tau,
            (PresenceRule::Or, Some(p)) => verified || p >= tau,
        }
    }
}

impl Tracker for LtmuTracker {
    fn init(&mut self, frame: &FrameInfo, bbox: BoundingBox) -> Result<()> {
        self.short_term.init(frame, bbox)?;
        self.verifier.observe(frame, &bbox)?;
        self.state = Some(LtmuState {
            last_position: bbox,
            redetections: 0,
        });
        Ok(())
    }

    fn update(&mut self, frame: &FrameInfo) -> Result<Prediction> {
        let short = self.short_term.update(frame)?;
        let c = self.verifier.confidence(frame, &short.bbox)?;
        if self.accepts(c, short.confidence) {
            self.verifier.observe(frame, &short.bbox)?;
            self.state.as_mut().expect("initialized before update").last_position = short.bbox;
            return Ok(Prediction {
                bbox: short.bbox,
                confidence: Some(c),
            });
        }

        let mut candidates = self.redetector.candidates(frame)?;
        candidates.sort_by(|a, b| b.1.total_cmp(&a.1));
        candidates.truncate(self.config.candidates);
        let state = self.state.as_mut().expect("initialized before update");
        state.redetections += 1;
        let mut best = (state.last_position, f64::NEG_INFINITY);
        if candidates.is_empty() {
            best.1 = self.verifier.confidence(frame, &best.0)?;
        }
        for (bbox, _) in candidates {
            let v = self.verifier.confidence(frame, &bbox)?;
            if v > best.1 {
                best = (bbox, v);
            }
        }
        let (bbox, confidence) = best;
        if confidence >= self.config.confidence_threshold {
            state.last_position = bbox;
            self.verifier.observe(frame, &bbox)?;
        }
        self.short_term.init(frame, bbox)?;
        Ok(Prediction {
            bbox,
            confidence: Some(confidence),
        })
    }

    fn finish(&mut self) -> Result<()> {
        self.short_term.finish()
    }
}

/// Verifier over precomputed object detections: the best IoU-weighted
/// score among the frame's detections, 0 without any.
pub struct DetectionVerifier {
    detections: DetectionSet,
}

impl DetectionVerifier {
    pub fn new(detections: DetectionSet) -> Self {
        Self { detections }
    }
}

impl Verifier for DetectionVerifier {
    fn confidence(&mut self, frame: &FrameInfo, bbox: &BoundingBox) -> Result<f64> {
        Ok(self
            .detections
            .objects(frame.index)
            .map(|d| iou(bbox, &d.bbox) * d.score)
            .fold(0.0, f64::max))
    }
}

/// Object detections of the frame as candidates. With `hands`, candidates
/// exist only on frames where a hand is detected in contact.
pub struct DetectionRedetector {
    detections: DetectionSet,
    hands: bool,
}

impl DetectionRedetector {
    pub fn new(detections: DetectionSet, hands: bool) -> Self {
        Self { detections, hands }
    }
}

impl Redetector for DetectionRedetector {
    fn candidates(&mut self, frame: &FrameInfo) -> Result<Vec<(BoundingBox, f64)>> {
        let dets = self.detections.frame(frame.index);
        if self.hands
            && !dets
                .iter()
                .any(|d| d.kind != DetectionKind::Object && d.contact == Some(true))
        {
            return Ok(Vec::new());
        }
        Ok(self.detections.objects(frame.index).map(|d| (d.bbox, d.score)).collect())
    }
}
