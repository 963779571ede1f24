use nalgebra::{SMatrix, SVector};

use crate::dataset::DetectionSet;
use crate::error::{Error, Result};
use crate::geometry::{iou, BoundingBox};
use crate::runner::{FrameInfo, Prediction, Tracker};

use super::tbyd::best_overlap;

type State = SVector<f64, 7>;
type Cov = SMatrix<f64, 7, 7>;
type Meas = SVector<f64, 4>;

/// Minimum IoU between the predicted box and a detection for association.
pub const SORT_IOU_GATE: f64 = 0.3;

const MIN_EXTENT: f64 = 1e-6;

/// Diagonal noise model of the constant-velocity filter over (u, v, s, r).
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanParams {
    pub initial_cov: [f64; 7],
    pub process_noise: [f64; 7],
    pub measurement_noise: [f64; 4],
}

impl KalmanParams {
    /// The constants of the reference SORT implementation.
    pub fn sort_defaults() -> Self {
        Self {
            initial_cov: [10.0, 10.0, 10.0, 10.0, 1e4, 1e4, 1e4],
            process_noise: [1.0, 1.0, 1.0, 1.0, 0.01, 0.01, 1e-4],
            measurement_noise: [1.0, 1.0, 10.0, 10.0],
        }
    }

    /// Noise-free filter: exact detections are reproduced exactly.
    pub fn noiseless() -> Self {
        Self {
            process_noise: [0.0; 7],
            measurement_noise: [0.0; 4],
            ..Self::sort_defaults()
        }
    }
}

impl Default for KalmanParams {
    fn default() -> Self {
        Self::sort_defaults()
    }
}

/// Box to measurement (center x, center y, area, aspect ratio w/h).
pub fn box_to_state(b: &BoundingBox) -> [f64; 4] {
    let (u, v) = b.center();
    [u, v, b.area(), b.aspect_ratio()]
}

pub fn state_to_box(z: &[f64]) -> Option<BoundingBox> {
    let (s, r) = (z[2].max(MIN_EXTENT), z[3].max(MIN_EXTENT));
    let w = (s * r).sqrt();
    BoundingBox::from_center(z[0], z[1], w, s / w).ok()
}

/// Single-target Kalman track; its id is always 0.
#[derive(Debug, Clone)]
pub struct KalmanTrack {
    x: State,
    p: Cov,
    q: Cov,
    r: SMatrix<f64, 4, 4>,
}

fn transition() -> Cov {
    let mut f = Cov::identity();
    f[(0, 4)] = 1.0;
    f[(1, 5)] = 1.0;
    f[(2, 6)] = 1.0;
    f
}

fn observation() -> SMatrix<f64, 4, 7> {
    SMatrix::<f64, 4, 7>::identity()
}

impl KalmanTrack {
    pub fn new(init: &BoundingBox, params: &KalmanParams) -> Self {
        let z = box_to_state(init);
        let mut x = State::zeros();
        x.fixed_rows_mut::<4>(0).copy_from_slice(&z);
        Self {
            x,
            p: Cov::from_diagonal(&State::from(params.initial_cov)),
            q: Cov::from_diagonal(&State::from(params.process_noise)),
            r: SMatrix::from_diagonal(&Meas::from(params.measurement_noise)),
        }
    }

    pub const fn id(&self) -> u32 {
        0
    }

    pub fn state(&self) -> [f64; 7] {
        self.x.into()
    }

    pub fn covariance(&self) -> [[f64; 7]; 7] {
        self.p.into()
    }

    /// Rates of (u, v, s).
    pub fn velocity(&self) -> [f64; 3] {
        [self.x[4], self.x[5], self.x[6]]
    }

    pub fn to_box(&self) -> Result<BoundingBox> {
        state_to_box(self.x.as_slice())
            .ok_or_else(|| Error::Tracker(format!("kalman state {:?} is not a box", self.state())))
    }

    fn clamp(&mut self) {
        self.x[2] = self.x[2].max(MIN_EXTENT);
        self.x[3] = self.x[3].max(MIN_EXTENT);
    }

    fn check(&self) -> Result<()> {
        if self.x.iter().chain(self.p.iter()).all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Tracker("kalman filter diverged".into()))
        }
    }

    pub fn predict(&mut self) -> Result<BoundingBox> {
        if self.x[2] + self.x[6] <= 0.0 {
            self.x[6] = 0.0;
        }
        let f = transition();
        self.x = f * self.x;
        self.p = f * self.p * f.transpose() + self.q;
        self.clamp();
        self.check()?;
        self.to_box()
    }

    pub fn update(&mut self, detection: &BoundingBox) -> Result<BoundingBox> {
        let h = observation();
        let z = Meas::from(box_to_state(detection));
        let s = h * self.p * h.transpose() + self.r;
        // Zero-noise filters make S singular along converged components.
        let eps = 1e-10 * s.abs().max().max(f64::MIN_POSITIVE);
        let s_inv = s.pseudo_inverse(eps).map_err(|e| Error::Tracker(e.into()))?;
        let k = self.p * h.transpose() * s_inv;
        self.x += k * (z - h * self.x);
        // Joseph form keeps the covariance symmetric positive semi-definite.
        let a = Cov::identity() - k * h;
        let p = a * self.p * a.transpose() + k * self.r * k.transpose();
        self.p = (p + p.transpose()) * 0.5;
        self.clamp();
        self.check()?;
        self.to_box()
    }
}

/// One SORT step for the target track: predict, then correct with the
/// selected detection if any. Returns the resulting state box.
pub fn sort_step(track: &mut KalmanTrack, selected: Option<&BoundingBox>) -> Result<BoundingBox> {
    let predicted = track.predict()?;
    match selected {
        Some(det) => track.update(det),
        None => Ok(predicted),
    }
}

/// SORT reduced to a single never-deleted track: each frame the object
/// detection with the largest IoU against the predicted box is associated
/// when it reaches the gate.
pub struct SortTracker {
    detections: DetectionSet,
    params: KalmanParams,
    track: Option<KalmanTrack>,
}

impl SortTracker {
    pub fn new(detections: DetectionSet, params: KalmanParams) -> Self {
        Self {
            detections,
            params,
            track: None,
        }
    }
}

impl Tracker for SortTracker {
    fn init(&mut self, _frame: &FrameInfo, bbox: BoundingBox) -> Result<()> {
        self.track = Some(KalmanTrack::new(&bbox, &self.params));
        Ok(())
    }

    fn update(&mut self, frame: &FrameInfo) -> Result<Prediction> {
        let track = self.track.as_mut().expect("initialized before update");
        let predicted = track.predict()?;
        let matched = self
            .detections
            .objects(frame.index)
            .map(|d| (iou(&d.bbox, &predicted), d))
            .filter(|(v, _)| *v >= SORT_IOU_GATE)
            .fold(None, |best: Option<(f64, _)>, (v, d)| match best {
                Some((bv, _)) if bv >= v => best,
                _ => Some((v, d)),
            });
        Ok(match matched {
            Some((_, d)) => track.update(&d.bbox)?,
            None => predicted,
        }
        .into())
    }
}

/// TbyD selection feeding a Kalman filter: the detection overlapping the
/// memorized box most is refined by the filter, and the refined box is
/// memorized. Without a candidate the filter only predicts and the
/// memorized box is output.
pub struct TbydSortTracker {
    detections: DetectionSet,
    params: KalmanParams,
    track: Option<(KalmanTrack, BoundingBox)>,
}

impl TbydSortTracker {
    pub fn new(detections: DetectionSet, params: KalmanParams) -> Self {
        Self {
            detections,
            params,
            track: None,
        }
    }
}

impl Tracker for TbydSortTracker {
    fn init(&mut self, _frame: &FrameInfo, bbox: BoundingBox) -> Result<()> {
        self.track = Some((KalmanTrack::new(&bbox, &self.params), bbox));
        Ok(())
    }

    fn update(&mut self, frame: &FrameInfo) -> Result<Prediction> {
        let (track, memorized) = self.track.as_mut().expect("initialized before update");
        let selected = best_overlap(memorized, self.detections.frame(frame.index)).map(|(_, d)| d.bbox);
        let refined = sort_step(track, selected.as_ref())?;
        if selected.is_some() {
            *memorized = refined;
        }
        Ok((*memorized).into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bb(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox::new(x, y, w, h).unwrap()
    }

    #[test]
    fn stationary_detections_converge() {
        let b = bb(100.0, 50.0, 40.0, 20.0);
        let mut t = KalmanTrack::new(&b, &KalmanParams::sort_defaults());
        let mut out = b;
        for _ in 0..50 {
            out = sort_step(&mut t, Some(&b)).unwrap();
        }
        assert!(iou(&out, &b) > 1.0 - 1e-9);
        assert!(t.velocity().iter().all(|v| v.abs() < 1e-3));
    }

    #[test]
    fn constant_velocity_is_tracked() {
        let mut t = KalmanTrack::new(&bb(0.0, 0.0, 30.0, 30.0), &KalmanParams::sort_defaults());
        for i in 1..=40 {
            let det = bb(2.0 * i as f64, 0.0, 30.0, 30.0);
            let predicted = t.predict().unwrap();
            if i > 20 {
                assert!((predicted.center().0 - det.center().0).abs() < 1.0, "frame {i}");
            }
            t.update(&det).unwrap();
        }
    }

    #[test]
    fn missing_detection_continues_along_velocity() {
        let mut t = KalmanTrack::new(&bb(0.0, 0.0, 30.0, 30.0), &KalmanParams::sort_defaults());
        for i in 1..=30 {
            sort_step(&mut t, Some(&bb(3.0 * i as f64, 0.0, 30.0, 30.0))).unwrap();
        }
        let before = t.to_box().unwrap().center().0;
        let after = sort_step(&mut t, None).unwrap().center().0;
        assert!((after - before - 3.0).abs() < 0.5);
    }

    #[test]
    fn noiseless_filter_reproduces_detections() {
        // Detections consistent with the model: linear center and area,
        // constant aspect ratio.
        let det = |i: usize| {
            let s = 200.0 + 10.0 * i as f64;
            let w = (2.0 * s).sqrt();
            BoundingBox::from_center(20.0 + 1.5 * i as f64, 15.0 - 0.5 * i as f64, w, s / w).unwrap()
        };
        let mut t = KalmanTrack::new(&det(0), &KalmanParams::noiseless());
        for i in 1..30 {
            let det = det(i);
            let out = sort_step(&mut t, Some(&det)).unwrap();
            for (a, b) in box_to_state(&out).iter().zip(box_to_state(&det)) {
                assert!((a - b).abs() < 1e-6 * b.abs().max(1.0), "frame {i}: {out} vs {det}");
            }
        }
    }

    #[test]
    fn tbyd_sort_holds_memorized_without_candidates() {
        let init = bb(0.0, 0.0, 10.0, 10.0);
        let mut dets = DetectionSet::empty(3);
        dets.frames[1].push(crate::dataset::Detection::object(bb(1.0, 0.0, 10.0, 10.0), 0.9));
        let mut t = TbydSortTracker::new(dets, KalmanParams::sort_defaults());
        t.init(&FrameInfo { index: 0, frame_ref: "0".into() }, init).unwrap();
        let refined = t.update(&FrameInfo { index: 1, frame_ref: "1".into() }).unwrap().bbox;
        assert!(refined.x > 0.0 && refined.x < 1.0 + 1e-9);
        let held = t.update(&FrameInfo { index: 2, frame_ref: "2".into() }).unwrap().bbox;
        assert_eq!(held, refined);
    }

    proptest! {
        #[test]
        fn covariance_stays_symmetric_positive_definite(
            steps in proptest::collection::vec(proptest::option::of((-20.0..20.0f64, -20.0..20.0f64, 5.0..60.0f64, 5.0..60.0f64)), 1..40)
        ) {
            let mut t = KalmanTrack::new(&bb(100.0, 100.0, 30.0, 30.0), &KalmanParams::sort_defaults());
            for step in steps {
                let det = step.map(|(dx, dy, w, h)| bb(100.0 + dx, 100.0 + dy, w, h));
                sort_step(&mut t, det.as_ref()).unwrap();
                let s = t.state();
                prop_assert!(s[2] > 0.0 && s[3] > 0.0);
                let p = SMatrix::<f64, 7, 7>::from(t.covariance());
                prop_assert!((p - p.transpose()).abs().max() < 1e-9 * p.abs().max().max(1.0));
                prop_assert!(p.cholesky().is_some());
            }
        }
    }
}
