use serde::Serialize;

use super::Sequence;

/// Counts per half-open bin `[edges[i], edges[i+1])`; values beyond the
/// last edge land in the last bin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    fn new(edges: &[f64]) -> Self {
        Self {
            edges: edges.to_vec(),
            counts: vec![0; edges.len() - 1],
        }
    }

    fn add(&mut self, value: f64) {
        let bins = self.counts.len();
        let bin = self
            .edges
            .windows(2)
            .position(|e| value < e[1])
            .unwrap_or(bins - 1);
        self.counts[bin] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

const AREA_EDGES: [f64; 8] = [0.0, 100.0, 1000.0, 10_000.0, 100_000.0, 250_000.0, 1_000_000.0, f64::MAX];
const RATIO_EDGES: [f64; 10] = [0.0, 0.125, 0.25, 0.5, 0.75, 1.333_333_333_333_333_3, 2.0, 4.0, 8.0, f64::MAX];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceMotion {
    pub name: String,
    pub pairs: usize,
    /// Mean width-normalized center motion, `None` without any adjacent present pair.
    pub mean_motion: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub sequences: usize,
    pub frames: usize,
    pub present_frames: usize,
    /// Mean over all adjacent present-target frame pairs of the center
    /// displacement divided by the frame width.
    pub fast_motion: f64,
    pub motion_pairs: usize,
    pub per_sequence: Vec<SequenceMotion>,
    pub box_area: Histogram,
    /// Box area relative to the first frame's box.
    pub area_ratio: Histogram,
    /// Aspect ratio relative to the first frame's box.
    pub aspect_ratio_ratio: Histogram,
}

pub fn dataset_stats(sequences: &[Sequence]) -> StatsReport {
    let mut box_area = Histogram::new(&AREA_EDGES);
    let mut area_ratio = Histogram::new(&RATIO_EDGES);
    let mut aspect_ratio_ratio = Histogram::new(&RATIO_EDGES);
    let mut per_sequence = Vec::with_capacity(sequences.len());
    let mut motion_sum = 0.0;
    let mut motion_pairs = 0;
    let mut frames = 0;
    let mut present_frames = 0;

    for seq in sequences {
        frames += seq.len();
        let width = f64::from(seq.frame_width);
        let mut seq_sum = 0.0;
        let mut seq_pairs = 0;
        for w in seq.frames.windows(2) {
            if let (Some(a), Some(b)) = (w[0].target, w[1].target) {
                let (ax, ay) = a.center();
                let (bx, by) = b.center();
                seq_sum += (bx - ax).hypot(by - ay) / width;
                seq_pairs += 1;
            }
        }
        motion_sum += seq_sum;
        motion_pairs += seq_pairs;
        per_sequence.push(SequenceMotion {
            name: seq.name.clone(),
            pairs: seq_pairs,
            mean_motion: (seq_pairs > 0).then(|| seq_sum / seq_pairs as f64),
        });

        if let Some(first) = seq.target(0) {
            for b in seq.frames.iter().filter_map(|f| f.target) {
                present_frames += 1;
                box_area.add(b.area());
                area_ratio.add(b.area() / first.area());
                aspect_ratio_ratio.add(b.aspect_ratio() / first.aspect_ratio());
            }
        }
    }

    StatsReport {
        sequences: sequences.len(),
        frames,
        present_frames,
        fast_motion: if motion_pairs > 0 {
            motion_sum / motion_pairs as f64
        } else {
            0.0
        },
        motion_pairs,
        per_sequence,
        box_area,
        area_ratio,
        aspect_ratio_ratio,
    }
}
