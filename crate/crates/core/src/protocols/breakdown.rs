use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ScoreDelta;
use crate::dataset::Sequence;
use crate::metrics::{weighted_average, Scores};

/// Values that can be averaged with per-item weights.
pub trait Averageable: Sized + Clone {
    fn weighted_mean(items: &[(&Self, f64)]) -> Option<Self>;
}

fn total(items: &[(impl Sized, f64)]) -> Option<f64> {
    let t: f64 = items.iter().map(|(_, w)| w).sum();
    (!items.is_empty() && t > 0.0).then_some(t)
}

impl Averageable for f64 {
    fn weighted_mean(items: &[(&Self, f64)]) -> Option<Self> {
        let t = total(items)?;
        Some(weighted_average(items.iter().map(|(v, w)| (**v, *w)), t))
    }
}

impl Averageable for Scores {
    fn weighted_mean(items: &[(&Self, f64)]) -> Option<Self> {
        let t = total(items)?;
        let avg = |f: fn(&Scores) -> f64| weighted_average(items.iter().map(|(v, w)| (f(v), *w)), t);
        Some(Scores {
            ss: avg(|s| s.ss),
            nps: avg(|s| s.nps),
            gsr: avg(|s| s.gsr),
        })
    }
}

impl Averageable for ScoreDelta {
    fn weighted_mean(items: &[(&Self, f64)]) -> Option<Self> {
        let t = total(items)?;
        let avg = |f: fn(&ScoreDelta) -> f64| weighted_average(items.iter().map(|(v, w)| (f(v), *w)), t);
        Some(ScoreDelta {
            ss: avg(|s| s.ss),
            nps: avg(|s| s.nps),
            gsr: avg(|s| s.gsr),
        })
    }
}

/// One sequence's result with the weight its protocol assigns to it.
#[derive(Debug, Clone)]
pub struct BreakdownItem<'a, T> {
    pub sequence: &'a Sequence,
    pub value: T,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Group<T> {
    pub value: T,
    pub sequences: usize,
    pub weight: f64,
}

/// Results grouped by attribute code, action verb and object noun.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownReport<T> {
    pub attributes: BTreeMap<String, Group<T>>,
    pub verbs: BTreeMap<String, Group<T>>,
    pub nouns: BTreeMap<String, Group<T>>,
}

fn reduce<T: Averageable>(groups: BTreeMap<String, Vec<(&T, f64)>>) -> BTreeMap<String, Group<T>> {
    groups
        .into_iter()
        .filter_map(|(key, members)| {
            let value = T::weighted_mean(&members)?;
            Some((
                key,
                Group {
                    value,
                    sequences: members.len(),
                    weight: members.iter().map(|(_, w)| w).sum(),
                },
            ))
        })
        .collect()
}

/// Groups per-sequence results; a sequence contributes to every attribute
/// it carries. Groups without positive weight are left out.
pub fn aggregate_breakdowns<T: Averageable>(items: &[BreakdownItem<'_, T>]) -> BreakdownReport<T> {
    let mut attributes: BTreeMap<String, Vec<(&T, f64)>> = BTreeMap::new();
    let mut verbs: BTreeMap<String, Vec<(&T, f64)>> = BTreeMap::new();
    let mut nouns: BTreeMap<String, Vec<(&T, f64)>> = BTreeMap::new();
    for item in items {
        for a in &item.sequence.attributes {
            attributes
                .entry(a.code().to_string())
                .or_default()
                .push((&item.value, item.weight));
        }
        verbs
            .entry(item.sequence.verb.clone())
            .or_default()
            .push((&item.value, item.weight));
        nouns
            .entry(item.sequence.noun.clone())
            .or_default()
            .push((&item.value, item.weight));
    }
    BreakdownReport {
        attributes: reduce(attributes),
        verbs: reduce(verbs),
        nouns: reduce(nouns),
    }
}
