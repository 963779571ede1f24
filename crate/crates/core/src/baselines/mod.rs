//! Builtin trackers: deterministic fixtures (oracle, static, noisy and
//! delayed oracles) and the detection-driven baselines (TbyD, SORT, their
//! combination, and the verifier/re-detector long-term scheme).

mod fixtures;
mod kalman;
mod ltmu;
mod tbyd;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::runner::{SequenceContext, Tracker, TrackerFactory};

pub use fixtures::{DelayedOracleTracker, NoisyOracleTracker, OracleTracker, StaticTracker};
pub use kalman::{
    box_to_state, sort_step, state_to_box, KalmanParams, KalmanTrack, SortTracker, TbydSortTracker,
    SORT_IOU_GATE,
};
pub use ltmu::{
    DetectionRedetector, DetectionVerifier, LtmuConfig, LtmuState, LtmuTracker, PresenceRule,
    Redetector, Verifier, DEFAULT_CANDIDATES, DEFAULT_CONFIDENCE_THRESHOLD,
};
pub use tbyd::{tbyd_step, TbydState, TbydTracker};

/// A builtin tracker, addressed on the command line as `baseline:<spec>`.
#[derive(Debug, Clone, PartialEq)]
pub enum Baseline {
    /// Echoes the ground truth (holding the last box on absent frames).
    Oracle,
    /// Repeats the initialization box.
    Static,
    /// Ground truth jittered by seeded Gaussian noise of relative scale `sigma`.
    NoisyOracle { sigma: f64, seed: u64 },
    /// Ground truth of the frame fed `delay` steps earlier.
    DelayedOracle { delay: usize },
    Tbyd,
    TbydSort,
    Sort,
    /// Long-term scheme over object detections; `hands` restricts
    /// re-detection candidates to frames with a hand in contact.
    Ltmu { threshold: f64, hands: bool },
}

impl Baseline {
    pub fn create(&self, ctx: &SequenceContext<'_>) -> Result<Box<dyn Tracker>> {
        let seq = ctx.sequence;
        let detections = || {
            ctx.detections.cloned().ok_or_else(|| {
                Error::Invalid(format!("baseline {self} needs detections for {}", seq.name))
            })
        };
        Ok(match self {
            Baseline::Oracle => Box::new(OracleTracker::new(seq)),
            Baseline::Static => Box::new(StaticTracker::default()),
            Baseline::NoisyOracle { sigma, seed } => {
                Box::new(NoisyOracleTracker::new(seq, *sigma, *seed))
            }
            Baseline::DelayedOracle { delay } => Box::new(DelayedOracleTracker::new(seq, *delay)),
            Baseline::Tbyd => Box::new(TbydTracker::new(detections()?)),
            Baseline::TbydSort => {
                Box::new(TbydSortTracker::new(detections()?, KalmanParams::sort_defaults()))
            }
            Baseline::Sort => Box::new(SortTracker::new(detections()?, KalmanParams::sort_defaults())),
            Baseline::Ltmu { threshold, hands } => {
                let dets = detections()?;
                let config = LtmuConfig {
                    confidence_threshold: *threshold,
                    ..LtmuConfig::default()
                };
                Box::new(LtmuTracker::new(
                    Box::new(TbydTracker::new(dets.clone())),
                    Box::new(DetectionVerifier::new(dets.clone())),
                    Box::new(DetectionRedetector::new(dets, *hands)),
                    config,
                )?)
            }
        })
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Baseline::Oracle => f.write_str("oracle"),
            Baseline::Static => f.write_str("static"),
            Baseline::NoisyOracle { sigma, seed } => write!(f, "noisy_oracle:{sigma}:{seed}"),
            Baseline::DelayedOracle { delay } => write!(f, "delayed_oracle:{delay}"),
            Baseline::Tbyd => f.write_str("tbyd"),
            Baseline::TbydSort => f.write_str("tbyd+sort"),
            Baseline::Sort => f.write_str("sort"),
            Baseline::Ltmu { threshold, hands } => {
                write!(f, "{}:{threshold}", if *hands { "ltmu-h" } else { "ltmu" })
            }
        }
    }
}

impl FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Invalid(format!("unknown baseline {s:?}"));
        let mut parts = s.split(':');
        let name = parts.next().unwrap_or_default();
        let args: Vec<&str> = parts.collect();
        let num = |i: usize, default: f64| -> Result<f64> {
            args.get(i)
                .map_or(Ok(default), |v| v.parse::<f64>().map_err(|_| bad()))
                .and_then(|v| if v.is_finite() && v >= 0.0 { Ok(v) } else { Err(bad()) })
        };
        let max_args = match name {
            "noisy_oracle" => 2,
            "delayed_oracle" | "ltmu" | "ltmu-h" => 1,
            _ => 0,
        };
        if args.len() > max_args {
            return Err(bad());
        }
        Ok(match name {
            "oracle" => Baseline::Oracle,
            "static" => Baseline::Static,
            "noisy_oracle" => Baseline::NoisyOracle {
                sigma: num(0, 0.05)?,
                seed: args.get(1).map_or(Ok(0), |v| v.parse().map_err(|_| bad()))?,
            },
            "delayed_oracle" => Baseline::DelayedOracle {
                delay: args.first().map_or(Ok(1), |v| v.parse().map_err(|_| bad()))?,
            },
            "tbyd" => Baseline::Tbyd,
            "tbyd+sort" => Baseline::TbydSort,
            "sort" => Baseline::Sort,
            "ltmu" | "ltmu-h" => {
                let threshold = num(0, DEFAULT_CONFIDENCE_THRESHOLD)?;
                if threshold > 1.0 {
                    return Err(bad());
                }
                Baseline::Ltmu {
                    threshold,
                    hands: name == "ltmu-h",
                }
            }
            _ => return Err(bad()),
        })
    }
}

impl TrackerFactory for Baseline {
    fn name(&self) -> &str {
        match self {
            Baseline::Oracle => "oracle",
            Baseline::Static => "static",
            Baseline::NoisyOracle { .. } => "noisy_oracle",
            Baseline::DelayedOracle { .. } => "delayed_oracle",
            Baseline::Tbyd => "tbyd",
            Baseline::TbydSort => "tbyd+sort",
            Baseline::Sort => "sort",
            Baseline::Ltmu { hands: false, .. } => "ltmu",
            Baseline::Ltmu { hands: true, .. } => "ltmu-h",
        }
    }

    fn create(&self, ctx: &SequenceContext<'_>) -> Result<Box<dyn Tracker>> {
        Baseline::create(self, ctx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn specs_round_trip() {
        for spec in [
            "oracle",
            "static",
            "noisy_oracle:0.1:7",
            "delayed_oracle:3",
            "tbyd",
            "tbyd+sort",
            "sort",
            "ltmu:0.5",
            "ltmu-h:0.3",
        ] {
            let b: Baseline = spec.parse().unwrap();
            assert_eq!(b.to_string(), spec);
        }
        assert_eq!("ltmu".parse::<Baseline>().unwrap(), Baseline::Ltmu { threshold: 0.5, hands: false });
        for bad in ["", "kcf", "ltmu:1.5", "oracle:1", "noisy_oracle:x", "delayed_oracle:-1"] {
            assert!(bad.parse::<Baseline>().is_err(), "{bad}");
        }
    }

    #[test]
    fn detection_baselines_need_detections() {
        let seq = crate::protocols::fixtures::moving_sequence(3, 30.0, 1.0, &[]);
        let ctx = SequenceContext { sequence: &seq, detections: None };
        assert!(Baseline::Tbyd.create(&ctx).is_err());
        assert!(Baseline::Oracle.create(&ctx).is_ok());
    }
}
