//! Reduction of stored runs into rankings, curves and breakdowns, and the
//! on-disk layout of runs and reports.

mod artifacts;
mod digest;
mod execute;

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{DetectionSet, Sequence};
use crate::error::{Error, Result};
use crate::metrics::{weighted_mean, Curves, Evaluation, Scores};
use crate::protocols::{
    aggregate_breakdowns, score, Averageable, BreakdownItem, BreakdownReport, OpeDOutcome,
    ProtocolConfig, ProtocolId, ScoreDelta, SequenceRecord, SequenceResult,
};

pub use artifacts::{
    check_name, read_runs, write_runs, RunEntry, RunManifest, RunOutcome, TrackerEntry,
    MANIFEST_FILE, RUNS_DIR,
};
pub use digest::{dataset_digest, detections_digest, records_digest};
pub use execute::{check_setup, default_workers, execute_all, load_inputs, Inputs, WORKERS_ENV};

pub const TOOLKIT: &str = concat!("trekbench ", env!("CARGO_PKG_VERSION"));
pub const REPORT_FILE: &str = "report.json";
pub const CURVES_DIR: &str = "curves";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub rank: usize,
    pub tracker: String,
    pub value: f64,
}

/// Orders trackers by descending value, breaking exact ties by name.
pub fn rank_by(values: &[(String, f64)]) -> Vec<RankEntry> {
    let mut sorted: Vec<&(String, f64)> = values.iter().collect();
    sorted.sort_by(|a, b| match b.1.total_cmp(&a.1) {
        Ordering::Equal => a.0.cmp(&b.0),
        o => o,
    });
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, (tracker, value))| RankEntry {
            rank: i + 1,
            tracker: tracker.clone(),
            value: *value,
        })
        .collect()
}

/// Ranks by the mean of SS, NPS and GSR.
pub fn rank(scores: &[(String, Scores)]) -> Vec<RankEntry> {
    let means: Vec<(String, f64)> = scores.iter().map(|(n, s)| (n.clone(), s.mean())).collect();
    rank_by(&means)
}

/// Per-sequence result line. Which fields are set depends on the protocol.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SequenceRow {
    pub sequence: String,
    /// Weight of the sequence in the tracker's aggregate.
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Scores>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<Scores>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<ScoreDelta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recall: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matched: Option<usize>,
    pub frames: usize,
    /// Why the sequence does not contribute, when it does not.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Dataset-level aggregate of one tracker.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    /// Sequences that contributed.
    pub sequences: usize,
    pub frames: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Scores>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curves: Option<Curves>,
    /// Processed frames per simulated second, pooled over sequences.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<Scores>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<ScoreDelta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_delay: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recall: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matched: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Breakdowns {
    Scores(BreakdownReport<Scores>),
    Delta(BreakdownReport<ScoreDelta>),
    Recall(BreakdownReport<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerReport {
    pub name: String,
    pub spec: String,
    pub summary: Summary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub breakdowns: Option<Breakdowns>,
    pub sequences: Vec<SequenceRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureNote {
    pub tracker: String,
    pub sequence: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigests {
    pub dataset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detections: Option<String>,
    pub runs: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub toolkit: String,
    pub protocol: ProtocolConfig,
    pub inputs: InputDigests,
    /// Trackers with an aggregate, best first.
    pub ranking: Vec<RankEntry>,
    pub trackers: Vec<TrackerReport>,
    /// Failed or unscorable runs; these are excluded, never imputed.
    pub failures: Vec<FailureNote>,
}

/// Per-tracker accumulation of scored sequences.
#[derive(Default)]
struct Accumulator<'a> {
    rows: Vec<SequenceRow>,
    evaluations: Vec<(Evaluation, f64, &'a Sequence)>,
    ground_truth: Vec<Scores>,
    deltas: Vec<ScoreDelta>,
    delays: Vec<usize>,
    rte_time: (usize, f64),
    recall: Vec<(f64, usize, usize, &'a Sequence)>,
}

impl<'a> Accumulator<'a> {
    fn add(&mut self, protocol: ProtocolId, seq: &'a Sequence, record: &SequenceRecord, result: SequenceResult) {
        let mut row = SequenceRow {
            sequence: seq.name.clone(),
            ..SequenceRow::default()
        };
        match result {
            SequenceResult::Ope(e) | SequenceResult::Mse(e) => {
                row.weight = if protocol == ProtocolId::Mse { seq.len() as f64 } else { 1.0 };
                row.scores = Some(e.scores);
                row.frames = e.frames;
                self.evaluations.push((e, row.weight, seq));
            }
            SequenceResult::Rte { evaluation, fps } => {
                if let SequenceRecord::Rte(r) = record {
                    self.rte_time.0 += r.processed.len();
                    self.rte_time.1 += r.simulated_seconds;
                }
                row.weight = 1.0;
                row.scores = Some(evaluation.scores);
                row.fps = Some(fps);
                row.frames = evaluation.frames;
                self.evaluations.push((evaluation, 1.0, seq));
            }
            SequenceResult::Oped(OpeDOutcome::Valid {
                record,
                detector,
                ground_truth,
                delta,
            }) => {
                row.weight = 1.0;
                row.scores = Some(detector.scores);
                row.ground_truth = Some(ground_truth.scores);
                row.delta = Some(delta);
                row.delay = Some(record.delay);
                row.frames = detector.frames;
                self.ground_truth.push(ground_truth.scores);
                self.deltas.push(delta);
                self.delays.push(record.delay);
                self.evaluations.push((detector, 1.0, seq));
            }
            SequenceResult::Oped(OpeDOutcome::Skipped { reason }) => row.note = Some(reason),
            SequenceResult::Hoi(outcome) => {
                row.matched = Some(outcome.matched);
                row.frames = outcome.frames;
                row.recall = outcome.recall;
                match outcome.recall {
                    Some(r) => {
                        row.weight = outcome.frames as f64;
                        self.recall.push((r, outcome.matched, outcome.frames, seq));
                    }
                    None => row.note = Some("no interaction segment".into()),
                }
            }
        }
        self.rows.push(row);
    }

    fn finish(self, protocol: ProtocolId) -> (Summary, Option<Breakdowns>) {
        let mut summary = Summary::default();
        if protocol == ProtocolId::Hoi {
            let matched: usize = self.recall.iter().map(|r| r.1).sum();
            let frames: usize = self.recall.iter().map(|r| r.2).sum();
            summary.sequences = self.recall.len();
            summary.frames = frames;
            if frames > 0 {
                summary.recall = Some(matched as f64 / frames as f64);
                summary.matched = Some(matched);
            }
            let items: Vec<_> = self
                .recall
                .iter()
                .map(|(r, _, frames, seq)| BreakdownItem {
                    sequence: seq,
                    value: *r,
                    weight: *frames as f64,
                })
                .collect();
            let breakdowns = (!items.is_empty()).then(|| Breakdowns::Recall(aggregate_breakdowns(&items)));
            return (summary, breakdowns);
        }

        let items: Vec<(&Evaluation, f64)> = self.evaluations.iter().map(|(e, w, _)| (e, *w)).collect();
        summary.sequences = items.len();
        if let Some(total) = weighted_mean(&items) {
            summary.frames = total.frames;
            summary.scores = Some(total.scores);
            summary.curves = Some(total.curves);
        }
        if protocol == ProtocolId::Rte && !items.is_empty() {
            let (processed, seconds) = self.rte_time;
            summary.fps = Some(if seconds > 0.0 { processed as f64 / seconds } else { 0.0 });
        }
        if protocol == ProtocolId::Oped {
            let ground_truth: Vec<(&Scores, f64)> = self.ground_truth.iter().map(|s| (s, 1.0)).collect();
            summary.ground_truth = Scores::weighted_mean(&ground_truth);
            let deltas: Vec<(&ScoreDelta, f64)> = self.deltas.iter().map(|d| (d, 1.0)).collect();
            summary.delta = ScoreDelta::weighted_mean(&deltas);
            if !self.delays.is_empty() {
                summary.mean_delay =
                    Some(self.delays.iter().sum::<usize>() as f64 / self.delays.len() as f64);
            }
            let items: Vec<_> = self
                .evaluations
                .iter()
                .zip(&self.deltas)
                .map(|((_, w, seq), d)| BreakdownItem {
                    sequence: seq,
                    value: *d,
                    weight: *w,
                })
                .collect();
            let breakdowns = (!items.is_empty()).then(|| Breakdowns::Delta(aggregate_breakdowns(&items)));
            return (summary, breakdowns);
        }
        let items: Vec<_> = self
            .evaluations
            .iter()
            .map(|(e, w, seq)| BreakdownItem {
                sequence: seq,
                value: e.scores,
                weight: *w,
            })
            .collect();
        let breakdowns = (!items.is_empty()).then(|| Breakdowns::Scores(aggregate_breakdowns(&items)));
        (summary, breakdowns)
    }
}

/// Builds the report of a set of stored runs. A pure function of its
/// inputs: no paths, clocks or environment are consulted.
pub fn build_report(
    protocol: &ProtocolConfig,
    trackers: &[TrackerEntry],
    runs: &[RunEntry],
    sequences: &[Sequence],
    detections: &[Option<DetectionSet>],
) -> EvaluationReport {
    let index: HashMap<&str, usize> = sequences
        .iter()
        .enumerate()
        .map(|(i, s)| (s.name.as_str(), i))
        .collect();
    let mut failures = Vec::new();
    let mut reports = Vec::new();
    for tracker in trackers {
        let mut acc = Accumulator::default();
        for run in runs.iter().filter(|r| r.tracker == tracker.name) {
            let fail = |message: String| FailureNote {
                tracker: tracker.name.clone(),
                sequence: run.sequence.clone(),
                message,
            };
            let Some(&i) = index.get(run.sequence.as_str()) else {
                failures.push(fail("sequence not in the dataset".into()));
                continue;
            };
            let record = match &run.outcome {
                RunOutcome::Record(r) => r,
                RunOutcome::Failed(message) => {
                    failures.push(fail(message.clone()));
                    continue;
                }
            };
            let ctx = crate::runner::SequenceContext {
                sequence: &sequences[i],
                detections: detections.get(i).and_then(Option::as_ref),
            };
            match score(record, &ctx) {
                Ok(result) => acc.add(protocol.protocol, &sequences[i], record, result),
                Err(e) => failures.push(fail(format!("not scorable: {e}"))),
            }
        }
        let rows = std::mem::take(&mut acc.rows);
        let (summary, breakdowns) = acc.finish(protocol.protocol);
        reports.push(TrackerReport {
            name: tracker.name.clone(),
            spec: tracker.spec.clone(),
            summary,
            breakdowns,
            sequences: rows,
        });
    }
    let values: Vec<(String, f64)> = reports
        .iter()
        .filter_map(|r| {
            let value = match protocol.protocol {
                ProtocolId::Hoi => r.summary.recall,
                _ => r.summary.scores.map(|s| s.mean()),
            };
            value.map(|v| (r.name.clone(), v))
        })
        .collect();
    EvaluationReport {
        toolkit: TOOLKIT.to_string(),
        protocol: protocol.clone(),
        inputs: InputDigests {
            dataset: dataset_digest(sequences),
            detections: detections_digest(detections),
            runs: records_digest(runs),
        },
        ranking: rank_by(&values),
        trackers: reports,
        failures,
    }
}

/// Regenerates the report of a run directory from its manifest, the
/// dataset and the detections.
pub fn report_from_runs(dir: &Path) -> Result<EvaluationReport> {
    let manifest = read_runs(dir)?;
    let inputs = load_inputs(&manifest.dataset, manifest.detections.as_deref())?;
    Ok(build_report(
        &manifest.protocol,
        &manifest.trackers,
        &manifest.runs,
        &inputs.sequences,
        &inputs.detections,
    ))
}

fn json_error(path: &Path, source: serde_json::Error) -> Error {
    Error::Json {
        path: path.to_path_buf(),
        source,
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes the report to `path` and its aggregate curves as
/// `curves/<tracker>.<success|precision|robustness>.csv` next to it.
pub fn emit(report: &EvaluationReport, path: &Path) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut text = serde_json::to_string_pretty(report).map_err(|e| json_error(path, e))?;
    text.push('\n');
    write(path, &text)?;
    let curves_dir = dir.join(CURVES_DIR);
    if curves_dir.exists() {
        fs::remove_dir_all(&curves_dir).map_err(|e| Error::io(&curves_dir, e))?;
    }
    for tracker in &report.trackers {
        let Some(curves) = &tracker.summary.curves else {
            continue;
        };
        check_name(&tracker.name)?;
        fs::create_dir_all(&curves_dir).map_err(|e| Error::io(&curves_dir, e))?;
        for (kind, curve) in [
            ("success", &curves.success),
            ("precision", &curves.precision),
            ("robustness", &curves.robustness),
        ] {
            write(&curves_dir.join(format!("{}.{kind}.csv", tracker.name)), &curve.to_csv())?;
        }
    }
    Ok(())
}

pub fn load_report(path: &Path) -> Result<EvaluationReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| json_error(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synthetic::{generate, SyntheticConfig};
    use crate::runner::TrackerHandle;

    fn names(r: &[RankEntry]) -> Vec<&str> {
        r.iter().map(|e| e.tracker.as_str()).collect()
    }

    #[test]
    fn ranking_rules() {
        let s = |a, b, c| Scores { ss: a, nps: b, gsr: c };
        assert_eq!(names(&rank(&[("only".into(), s(0.1, 0.1, 0.1))])), ["only"]);
        let r = rank(&[("B".into(), s(0.6, 0.6, 0.0)), ("A".into(), s(0.5, 0.5, 0.5))]);
        assert_eq!(names(&r), ["A", "B"]);
        assert_eq!(r[1].rank, 2);
        let r = rank(&[("zeta".into(), s(0.3, 0.3, 0.3)), ("alpha".into(), s(0.3, 0.3, 0.3))]);
        assert_eq!(names(&r), ["alpha", "zeta"]);
    }

    fn synthetic_inputs(n: usize) -> Inputs {
        let items = generate(&SyntheticConfig { sequences: n, ..SyntheticConfig::default() });
        Inputs {
            sequences: items.iter().map(|i| i.sequence.clone()).collect(),
            detections: items.into_iter().map(|i| Some(i.detections)).collect(),
        }
    }

    fn handles(specs: &[&str]) -> Vec<TrackerHandle> {
        specs.iter().map(|s| s.parse().unwrap()).collect()
    }

    #[test]
    fn report_covers_every_protocol() {
        let inputs = synthetic_inputs(3);
        let trackers = handles(&["oracle=baseline:oracle", "static=baseline:static", "tbyd=baseline:tbyd"]);
        let entries: Vec<TrackerEntry> =
            trackers.iter().map(|t| TrackerEntry { name: t.name.clone(), spec: t.spec.clone() }).collect();
        for protocol in [ProtocolId::Ope, ProtocolId::Oped, ProtocolId::Mse, ProtocolId::Rte, ProtocolId::Hoi] {
            let config = ProtocolConfig::new(protocol);
            let runs = execute_all(&config, &trackers, &inputs, 2).unwrap();
            assert_eq!(runs.len(), 9);
            let report = build_report(&config, &entries, &runs, &inputs.sequences, &inputs.detections);
            assert!(report.failures.is_empty(), "{protocol}: {:?}", report.failures);
            assert_eq!(report.ranking.len(), 3, "{protocol}");
            if protocol != ProtocolId::Hoi {
                assert_eq!(report.ranking[0].tracker, "oracle", "{protocol}");
            }
            if matches!(protocol, ProtocolId::Ope | ProtocolId::Mse) {
                assert_eq!(report.ranking[0].value, 1.0);
            }
            let again = execute_all(&config, &trackers, &inputs, 1).unwrap();
            let same = build_report(&config, &entries, &again, &inputs.sequences, &inputs.detections);
            assert_eq!(serde_json::to_string(&same).unwrap(), serde_json::to_string(&report).unwrap());
        }
    }

    #[test]
    fn failures_are_noted_not_imputed() {
        let inputs = synthetic_inputs(2);
        let config = ProtocolConfig::new(ProtocolId::Ope);
        let entries = vec![TrackerEntry { name: "t".into(), spec: "baseline:oracle".into() }];
        let mut runs = execute_all(&config, &handles(&["t=baseline:oracle"]), &inputs, 1).unwrap();
        runs[1].outcome = RunOutcome::Failed("boom".into());
        let report = build_report(&config, &entries, &runs, &inputs.sequences, &inputs.detections);
        assert_eq!(report.failures.len(), 1);
        assert_eq!(report.trackers[0].summary.sequences, 1);
        assert_eq!(report.trackers[0].summary.scores, Some(Scores::PERFECT));
    }

    #[test]
    fn emit_round_trip_and_stability() {
        let inputs = synthetic_inputs(2);
        let config = ProtocolConfig::new(ProtocolId::Ope);
        let trackers = handles(&["s=baseline:static"]);
        let entries = vec![TrackerEntry { name: "s".into(), spec: trackers[0].spec.clone() }];
        let runs = execute_all(&config, &trackers, &inputs, 1).unwrap();
        let report = build_report(&config, &entries, &runs, &inputs.sequences, &inputs.detections);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(REPORT_FILE);
        emit(&report, &path).unwrap();
        let first = fs::read(&path).unwrap();
        emit(&report, &path).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);
        assert_eq!(load_report(&path).unwrap(), report);
        let csv = fs::read_to_string(dir.path().join("curves/s.success.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1 + 101);
    }

    #[test]
    fn setup_errors() {
        let inputs = synthetic_inputs(1);
        let ope = ProtocolConfig::new(ProtocolId::Ope);
        assert!(check_setup(&ope, &handles(&["a=baseline:oracle", "a=baseline:static"]), &inputs).is_err());
        let mse = ProtocolConfig::new(ProtocolId::Mse);
        assert!(check_setup(&mse, &handles(&["recorded:/nowhere"]), &inputs).is_err());
        let mut no_dets = inputs.clone();
        no_dets.detections[0] = None;
        assert!(check_setup(&ProtocolConfig::new(ProtocolId::Hoi), &handles(&["baseline:oracle"]), &no_dets).is_err());
    }
}
