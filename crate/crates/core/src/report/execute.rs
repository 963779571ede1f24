use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::artifacts::{check_name, RunEntry, RunOutcome};
use crate::dataset::{load_dataset, load_detections, DetectionSet, Sequence, DETECTIONS_FILE};
use crate::error::{Error, Result};
use crate::protocols::{execute, ProtocolConfig, ProtocolId};
use crate::runner::{SequenceContext, TrackerFactory, TrackerHandle};

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "TREKBENCH_WORKERS";

/// Annotations and detections of one dataset, in dataset order.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub sequences: Vec<Sequence>,
    pub detections: Vec<Option<DetectionSet>>,
}

impl Inputs {
    pub fn context(&self, index: usize) -> SequenceContext<'_> {
        SequenceContext {
            sequence: &self.sequences[index],
            detections: self.detections[index].as_ref(),
        }
    }
}

/// Loads a dataset with its detections. With `detections_dir`, every
/// sequence needs `<detections_dir>/<name>.txt`; otherwise an optional
/// `detections.txt` inside each sequence directory is used.
pub fn load_inputs(dataset: &Path, detections_dir: Option<&Path>) -> Result<Inputs> {
    let sequences = load_dataset(dataset)?;
    let detections = sequences
        .iter()
        .map(|seq| {
            let path: PathBuf = match detections_dir {
                Some(dir) => dir.join(format!("{}.txt", seq.name)),
                None => {
                    let p = dataset.join(&seq.name).join(DETECTIONS_FILE);
                    if !p.exists() {
                        return Ok(None);
                    }
                    p
                }
            };
            load_detections(&path, seq.len()).map(Some)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Inputs {
        sequences,
        detections,
    })
}

/// Worker count from the environment, else the available parallelism.
pub fn default_workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Configuration errors that would make every run fail the same way.
pub fn check_setup(config: &ProtocolConfig, trackers: &[TrackerHandle], inputs: &Inputs) -> Result<()> {
    if trackers.is_empty() {
        return Err(Error::Invalid("no tracker given".into()));
    }
    for (i, t) in trackers.iter().enumerate() {
        check_name(&t.name)?;
        if trackers[..i].iter().any(|o| o.name == t.name) {
            return Err(Error::Invalid(format!("tracker name {} given twice", t.name)));
        }
        if t.replays_recorded_results() && !matches!(config.protocol, ProtocolId::Ope | ProtocolId::Rte) {
            return Err(Error::Invalid(format!(
                "recorded tracker {} cannot run under {}",
                t.name, config.protocol
            )));
        }
    }
    if matches!(config.protocol, ProtocolId::Oped | ProtocolId::Hoi) {
        if let Some(i) = inputs.detections.iter().position(Option::is_none) {
            return Err(Error::Invalid(format!(
                "protocol {} needs detections; none for sequence {}",
                config.protocol, inputs.sequences[i].name
            )));
        }
    }
    Ok(())
}

/// Runs every tracker on every sequence, `workers` runs at a time. Runs
/// that fail are recorded as such; the result order is tracker-major in
/// the given order, then dataset order, whatever the scheduling.
pub fn execute_all(
    config: &ProtocolConfig,
    trackers: &[TrackerHandle],
    inputs: &Inputs,
    workers: usize,
) -> Result<Vec<RunEntry>> {
    check_setup(config, trackers, inputs)?;
    let jobs: Vec<(usize, usize)> = (0..trackers.len())
        .flat_map(|t| (0..inputs.sequences.len()).map(move |s| (t, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Invalid(format!("worker pool: {e}")))?;
    Ok(pool.install(|| {
        jobs.par_iter()
            .map(|&(t, s)| {
                let tracker = &trackers[t];
                let outcome = match execute(config, tracker, &inputs.context(s)) {
                    Ok(record) => RunOutcome::Record(record),
                    Err(e) => RunOutcome::Failed(e.to_string()),
                };
                RunEntry {
                    tracker: tracker.name.clone(),
                    sequence: inputs.sequences[s].name.clone(),
                    outcome,
                }
            })
            .collect()
    }))
}
