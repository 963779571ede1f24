use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::hoi::execute_hoi;
use super::mse::{execute_mse, mse_anchors, score_mse, AnchorRun};
use super::ope::{execute_ope, execute_ope_d, score_ope_d, OpeDOutcome, OpeDRecord};
use super::rte::{execute_rte, score_rte, LatencyModel, RteRecord};
use super::{score_hoi, HoiOutcome, HoiSegmentRecord, TrackRun};
use crate::dataset::Sequence;
use crate::error::{Error, Result};
use crate::metrics::{score_run, Evaluation};
use crate::runner::{recorded::read_times, SequenceContext, TrackerFactory, TIMES_FILE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolId {
    Ope,
    Oped,
    Mse,
    Rte,
    Hoi,
}

impl ProtocolId {
    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolId::Ope => "ope",
            ProtocolId::Oped => "oped",
            ProtocolId::Mse => "mse",
            ProtocolId::Rte => "rte",
            ProtocolId::Hoi => "hoi",
        }
    }
}

impl fmt::Display for ProtocolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProtocolId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ope" => Ok(ProtocolId::Ope),
            "oped" | "ope-d" => Ok(ProtocolId::Oped),
            "mse" => Ok(ProtocolId::Mse),
            "rte" => Ok(ProtocolId::Rte),
            "hoi" => Ok(ProtocolId::Hoi),
            _ => Err(Error::Invalid(format!("unknown protocol {s:?}"))),
        }
    }
}

/// How the real-time protocol charges time, as given on the command line:
/// `const:SECONDS`, `period:K` (K frame periods of each sequence),
/// `trace:DIR` (`DIR/<sequence>/times.txt`) or `live`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum LatencySpec {
    Constant(f64),
    Periods(f64),
    Trace(PathBuf),
    Live,
}

impl LatencySpec {
    pub fn resolve(&self, seq: &Sequence) -> Result<LatencyModel> {
        Ok(match self {
            LatencySpec::Constant(v) => LatencyModel::Constant(*v),
            LatencySpec::Periods(k) => LatencyModel::Constant(k / seq.fps),
            LatencySpec::Trace(dir) => {
                LatencyModel::Trace(read_times(&dir.join(&seq.name).join(TIMES_FILE), seq.len())?)
            }
            LatencySpec::Live => LatencyModel::Live,
        })
    }
}

impl FromStr for LatencySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let number = |v: &str| {
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite() && *x >= 0.0)
                .ok_or_else(|| Error::Invalid(format!("invalid latency value {v:?}")))
        };
        match s.split_once(':') {
            None if s == "live" => Ok(LatencySpec::Live),
            Some(("const", v)) => Ok(LatencySpec::Constant(number(v)?)),
            Some(("period", v)) => Ok(LatencySpec::Periods(number(v)?)),
            Some(("trace", dir)) if !dir.is_empty() => Ok(LatencySpec::Trace(PathBuf::from(dir))),
            _ => Err(Error::Invalid(format!("unknown latency model {s:?}"))),
        }
    }
}

impl fmt::Display for LatencySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LatencySpec::Constant(v) => write!(f, "const:{v}"),
            LatencySpec::Periods(k) => write!(f, "period:{k}"),
            LatencySpec::Trace(dir) => write!(f, "trace:{}", dir.display()),
            LatencySpec::Live => f.write_str("live"),
        }
    }
}

impl TryFrom<String> for LatencySpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<LatencySpec> for String {
    fn from(l: LatencySpec) -> Self {
        l.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub protocol: ProtocolId,
    /// Real-time protocol only; defaults to one frame period.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency: Option<LatencySpec>,
    /// Interaction protocol only: start trackers from the ground truth.
    #[serde(default)]
    pub oracle_init: bool,
}

impl ProtocolConfig {
    pub fn new(protocol: ProtocolId) -> Self {
        Self {
            protocol,
            latency: None,
            oracle_init: false,
        }
    }

    pub fn latency_spec(&self) -> LatencySpec {
        self.latency.clone().unwrap_or(LatencySpec::Periods(1.0))
    }
}

/// The raw runs one protocol produced on one sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SequenceRecord {
    Ope(TrackRun),
    Oped(Option<OpeDRecord>),
    Mse(Vec<AnchorRun>),
    Rte(RteRecord),
    Hoi(Vec<HoiSegmentRecord>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SequenceResult {
    Ope(Evaluation),
    Oped(OpeDOutcome),
    Mse(Evaluation),
    Rte { evaluation: Evaluation, fps: f64 },
    Hoi(HoiOutcome),
}

/// Runs `factory` on one sequence under `config`.
pub fn execute(
    config: &ProtocolConfig,
    factory: &dyn TrackerFactory,
    ctx: &SequenceContext<'_>,
) -> Result<SequenceRecord> {
    if factory.replays_recorded_results()
        && !matches!(config.protocol, ProtocolId::Ope | ProtocolId::Rte)
    {
        return Err(Error::Invalid(format!(
            "recorded results cannot be re-initialized for the {} protocol",
            config.protocol
        )));
    }
    Ok(match config.protocol {
        ProtocolId::Ope => SequenceRecord::Ope(execute_ope(factory, ctx)?),
        ProtocolId::Oped => SequenceRecord::Oped(execute_ope_d(factory, ctx)?),
        ProtocolId::Mse => SequenceRecord::Mse(execute_mse(factory, ctx, &mse_anchors(ctx.sequence))?),
        ProtocolId::Rte => {
            let latency = config.latency_spec().resolve(ctx.sequence)?;
            SequenceRecord::Rte(execute_rte(factory, ctx, &latency)?)
        }
        ProtocolId::Hoi => SequenceRecord::Hoi(execute_hoi(factory, ctx, config.oracle_init)?),
    })
}

/// Reduces a stored record against the annotations.
pub fn score(record: &SequenceRecord, ctx: &SequenceContext<'_>) -> Result<SequenceResult> {
    let seq = ctx.sequence;
    Ok(match record {
        SequenceRecord::Ope(run) => SequenceResult::Ope(score_run(run, seq)?),
        SequenceRecord::Oped(r) => SequenceResult::Oped(score_ope_d(r.as_ref(), seq)?),
        SequenceRecord::Mse(runs) => SequenceResult::Mse(score_mse(runs, seq)?),
        SequenceRecord::Rte(r) => SequenceResult::Rte {
            evaluation: score_rte(r, seq)?,
            fps: r.fps(),
        },
        SequenceRecord::Hoi(segments) => {
            let dets = ctx.detections.ok_or_else(|| {
                Error::Invalid(format!("{}: HOI scoring needs detections", seq.name))
            })?;
            SequenceResult::Hoi(score_hoi(segments, seq, dets))
        }
    })
}
