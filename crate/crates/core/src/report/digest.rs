use serde_json::Value;
use sha2::{Digest, Sha256};

use super::artifacts::RunEntry;
use crate::dataset::{format_detections, DetectionSet, Sequence};

fn finish(hasher: Sha256) -> String {
    format!("sha256:{}", hex::encode(hasher.finalize()))
}

fn feed(hasher: &mut Sha256, part: &str) {
    hasher.update((part.len() as u64).to_le_bytes());
    hasher.update(part.as_bytes());
}

/// Digest of the loaded annotations, independent of where they are stored.
/// Stable for a given toolkit version.
pub fn dataset_digest(sequences: &[Sequence]) -> String {
    let mut h = Sha256::new();
    for seq in sequences {
        feed(&mut h, &format!("{seq:?}"));
    }
    finish(h)
}

/// Digest of the detection files' content in dataset order; `None` when no
/// sequence has detections.
pub fn detections_digest(detections: &[Option<DetectionSet>]) -> Option<String> {
    if detections.iter().all(Option::is_none) {
        return None;
    }
    let mut h = Sha256::new();
    for d in detections {
        match d {
            Some(d) => feed(&mut h, &format_detections(d)),
            None => feed(&mut h, "-"),
        }
    }
    Some(finish(h))
}

fn strip_latencies(value: &mut Value) {
    match value {
        Value::Object(map) => {
            map.remove("latencies");
            map.values_mut().for_each(strip_latencies);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_latencies),
        _ => {}
    }
}

/// Digest of the runs a report was computed from. Wall-clock latencies are
/// left out; simulated real-time bookkeeping is covered.
pub fn records_digest(runs: &[RunEntry]) -> String {
    let mut value = serde_json::to_value(runs).expect("runs serialize");
    strip_latencies(&mut value);
    let mut h = Sha256::new();
    feed(&mut h, &value.to_string());
    finish(h)
}
