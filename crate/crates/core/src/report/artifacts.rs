use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::dataset::io_support::{lines, parse_box, read_text};
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::protocols::{ProtocolConfig, SequenceRecord};
use crate::runner::recorded::{read_times, write_lines};
use crate::runner::{RESULTS_FILE, TIMES_FILE};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RUNS_DIR: &str = "runs";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerEntry {
    pub name: String,
    pub spec: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunOutcome {
    Record(SequenceRecord),
    /// The run aborted; the message is kept for the report.
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub tracker: String,
    pub sequence: String,
    pub outcome: RunOutcome,
}

/// Everything needed to regenerate a report: the protocol, where the
/// annotations and detections came from, and every per-sequence run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub toolkit: String,
    pub protocol: ProtocolConfig,
    pub dataset: PathBuf,
    /// `None` selects the `detections.txt` inside each sequence directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detections: Option<PathBuf>,
    pub trackers: Vec<TrackerEntry>,
    pub runs: Vec<RunEntry>,
}

/// Tracker names become directory names, so they must be plain tokens.
pub fn check_name(name: &str) -> Result<()> {
    let ok = !name.is_empty()
        && name != "."
        && name != ".."
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.' | '+'));
    if ok {
        Ok(())
    } else {
        Err(Error::Invalid(format!(
            "tracker name {name:?} must use only letters, digits and -_.+"
        )))
    }
}

fn json_error(path: &Path, source: serde_json::Error) -> Error {
    Error::Json {
        path: path.to_path_buf(),
        source,
    }
}

/// Moves every `boxes` array (and its `latencies`) of a record into text
/// files under `dir`, leaving `boxes_file`/`times_file` references relative
/// to `root`. A single OPE run is stored as `results.txt`/`times.txt`, so
/// `runs/<tracker>` can be replayed as a recorded-results directory.
fn externalize(value: &mut Value, root: &Path, rel: &str, single: bool, counter: &mut usize) -> Result<()> {
    match value {
        Value::Object(map) => {
            if let Some(Value::Array(boxes)) = map.remove("boxes") {
                let (results, times) = if single {
                    (RESULTS_FILE.to_string(), TIMES_FILE.to_string())
                } else {
                    (format!("run_{counter}.txt"), format!("run_{counter}.times.txt"))
                };
                *counter += 1;
                let parsed: Vec<BoundingBox> = serde_json::from_value(Value::Array(boxes))
                    .map_err(|e| Error::Invalid(format!("record boxes: {e}")))?;
                let seq_dir = root.join(rel);
                fs::create_dir_all(&seq_dir).map_err(|e| Error::io(&seq_dir, e))?;
                write_lines(&seq_dir.join(&results), &parsed)?;
                map.insert("boxes_file".into(), Value::String(format!("{rel}/{results}")));
                if let Some(latencies) = map.remove("latencies") {
                    let values: Vec<f64> = serde_json::from_value(latencies)
                        .map_err(|e| Error::Invalid(format!("record latencies: {e}")))?;
                    write_lines(&seq_dir.join(&times), &values)?;
                    map.insert("times_file".into(), Value::String(format!("{rel}/{times}")));
                }
            }
            for v in map.values_mut() {
                externalize(v, root, rel, single, counter)?;
            }
        }
        Value::Array(items) => {
            for v in items {
                externalize(v, root, rel, single, counter)?;
            }
        }
        _ => {}
    }
    Ok(())
}

fn take_path(map: &mut Map<String, Value>, key: &str, root: &Path) -> Result<Option<PathBuf>> {
    match map.remove(key) {
        None => Ok(None),
        Some(Value::String(rel)) if !rel.contains("..") => Ok(Some(root.join(rel))),
        Some(other) => Err(Error::Invalid(format!("bad {key} reference {other}"))),
    }
}

fn internalize(value: &mut Value, root: &Path) -> Result<()> {
    match value {
        Value::Object(map) => {
            if let Some(path) = take_path(map, "boxes_file", root)? {
                let text = read_text(&path)?;
                let boxes = lines(&text)
                    .iter()
                    .enumerate()
                    .map(|(i, l)| parse_box(&path, i + 1, l))
                    .collect::<Result<Vec<_>>>()?;
                let count = boxes.len();
                map.insert("boxes".into(), serde_json::to_value(boxes).expect("boxes serialize"));
                if let Some(times) = take_path(map, "times_file", root)? {
                    let latencies = read_times(&times, count)?;
                    map.insert("latencies".into(), serde_json::to_value(latencies).expect("floats serialize"));
                }
            }
            for v in map.values_mut() {
                internalize(v, root)?;
            }
        }
        Value::Array(items) => {
            for v in items {
                internalize(v, root)?;
            }
        }
        _ => {}
    }
    Ok(())
}

/// Writes `<dir>/manifest.json` and the per-run box files under `<dir>/runs`.
pub fn write_runs(manifest: &RunManifest, dir: &Path) -> Result<()> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let mut value = serde_json::to_value(manifest).map_err(|e| json_error(&manifest_path, e))?;
    let runs_dir = dir.join(RUNS_DIR);
    if runs_dir.exists() {
        fs::remove_dir_all(&runs_dir).map_err(|e| Error::io(&runs_dir, e))?;
    }
    let entries = value["runs"].as_array_mut().expect("runs serialize as an array");
    for (entry, run) in entries.iter_mut().zip(&manifest.runs) {
        check_name(&run.tracker)?;
        let rel = format!("{RUNS_DIR}/{}/{}", run.tracker, run.sequence);
        let single = matches!(run.outcome, RunOutcome::Record(SequenceRecord::Ope(_)));
        let mut counter = 0;
        externalize(&mut entry["outcome"], dir, &rel, single, &mut counter)?;
    }
    let mut text = serde_json::to_string_pretty(&value).map_err(|e| json_error(&manifest_path, e))?;
    text.push('\n');
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    fs::write(&manifest_path, text).map_err(|e| Error::io(&manifest_path, e))
}

/// Reads a directory written by [`write_runs`].
pub fn read_runs(dir: &Path) -> Result<RunManifest> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = read_text(&manifest_path)?;
    let mut value: Value = serde_json::from_str(&text).map_err(|e| json_error(&manifest_path, e))?;
    if let Some(entries) = value.get_mut("runs").and_then(Value::as_array_mut) {
        for entry in entries {
            internalize(entry, dir)?;
        }
    }
    serde_json::from_value(value).map_err(|e| json_error(&manifest_path, e))
}
