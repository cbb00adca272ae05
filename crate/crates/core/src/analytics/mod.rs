//! Questionnaire scoring and the condition comparison pipeline.

pub mod stats;

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::session::Condition;

pub use stats::{fdr_adjust, friedman, midranks, wilcoxon_signed_rank, TestResult};

pub const N_ITEMS: usize = 21;
pub const LIKERT_MAX: u8 = 4;
/// Adjusted p below this is reported as a tendency.
pub const TENDENCY_P: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subscale {
    Empathy,
    NegativeFeelings,
    BehavioralEngagement,
}

impl Subscale {
    pub const ALL: [Subscale; 3] = [Subscale::Empathy, Subscale::NegativeFeelings, Subscale::BehavioralEngagement];

    pub fn as_str(self) -> &'static str {
        match self {
            Subscale::Empathy => "empathy",
            Subscale::NegativeFeelings => "negative_feelings",
            Subscale::BehavioralEngagement => "behavioral_engagement",
        }
    }
}

impl fmt::Display for Subscale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Subscale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Subscale::ALL
            .into_iter()
            .find(|x| x.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown subscale {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpgqResponse {
    pub group: String,
    pub participant: String,
    pub condition: Condition,
    pub items: [u8; N_ITEMS],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingEntry {
    /// 1-based item number.
    pub item: usize,
    pub subscale: Subscale,
    pub reversed: bool,
}

/// Assignment of every item to one subscale.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpgqMapping {
    entries: Vec<MappingEntry>,
    description: String,
}

impl SpgqMapping {
    pub fn new(mut entries: Vec<MappingEntry>, description: impl Into<String>) -> Result<Self> {
        let mut seen = [false; N_ITEMS];
        for e in &entries {
            if !(1..=N_ITEMS).contains(&e.item) {
                return Err(Error::Config(format!("mapping item {} outside 1..={N_ITEMS}", e.item)));
            }
            if std::mem::replace(&mut seen[e.item - 1], true) {
                return Err(Error::Config(format!("item {} mapped more than once", e.item)));
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::Config(format!("item {} has no subscale", missing + 1)));
        }
        if let Some(empty) = Subscale::ALL.iter().find(|s| !entries.iter().any(|e| e.subscale == **s)) {
            return Err(Error::Config(format!("subscale {empty} has no items")));
        }
        entries.sort_by_key(|e| e.item);
        Ok(SpgqMapping { entries, description: description.into() })
    }

    /// NON-CANONICAL placeholder: items 1-7 empathy, 8-13 negative
    /// feelings, 14-21 behavioural engagement, nothing reversed. Not the
    /// validated instrument's key; supply a mapping file for real data.
    pub fn placeholder() -> Self {
        let entries = (1..=N_ITEMS)
            .map(|item| MappingEntry {
                item,
                subscale: match item {
                    1..=7 => Subscale::Empathy,
                    8..=13 => Subscale::NegativeFeelings,
                    _ => Subscale::BehavioralEngagement,
                },
                reversed: false,
            })
            .collect();
        SpgqMapping::new(entries, "NON-CANONICAL placeholder mapping (items 1-7, 8-13, 14-21; no reversals)")
            .expect("placeholder mapping is complete")
    }

    pub fn entries(&self) -> &[MappingEntry] {
        &self.entries
    }

    pub fn description(&self) -> &str {
        &self.description
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubscaleScores {
    pub empathy: f64,
    pub negative_feelings: f64,
    pub behavioral_engagement: f64,
}

impl SubscaleScores {
    pub fn get(&self, s: Subscale) -> f64 {
        match s {
            Subscale::Empathy => self.empathy,
            Subscale::NegativeFeelings => self.negative_feelings,
            Subscale::BehavioralEngagement => self.behavioral_engagement,
        }
    }
}

/// Mean item score per subscale, reversed items scored `4 - v`.
pub fn score_spgq(resp: &SpgqResponse, mapping: &SpgqMapping) -> Result<SubscaleScores> {
    if let Some(i) = resp.items.iter().position(|v| *v > LIKERT_MAX) {
        return Err(Error::Precondition(format!(
            "item {} of participant {} is {}, outside 0..={LIKERT_MAX}",
            i + 1,
            resp.participant,
            resp.items[i]
        )));
    }
    let mut sums = [0u32; 3];
    let mut counts = [0u32; 3];
    for e in mapping.entries() {
        let v = resp.items[e.item - 1];
        let v = if e.reversed { LIKERT_MAX - v } else { v };
        let k = Subscale::ALL.iter().position(|s| *s == e.subscale).expect("known subscale");
        sums[k] += v as u32;
        counts[k] += 1;
    }
    let mean = |k: usize| sums[k] as f64 / counts[k] as f64;
    Ok(SubscaleScores { empathy: mean(0), negative_feelings: mean(1), behavioral_engagement: mean(2) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Descriptive {
    pub condition: Condition,
    pub mean: f64,
    /// Sample standard deviation (n - 1).
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseComparison {
    pub a: Condition,
    pub b: Condition,
    /// `None` when every paired difference is zero.
    pub test: Option<TestResult>,
    pub tendency: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubscaleReport {
    pub subscale: Subscale,
    pub descriptives: Vec<Descriptive>,
    pub friedman: TestResult,
    pub pairwise: Vec<PairwiseComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub mapping: String,
    pub n_participants: usize,
    pub subscales: Vec<SubscaleReport>,
}

const PAIRS: [(Condition, Condition); 3] = [
    (Condition::HrAll, Condition::HrOthers),
    (Condition::HrAll, Condition::HrNone),
    (Condition::HrOthers, Condition::HrNone),
];

/// Descriptives, Friedman omnibus and BH-adjusted pairwise signed-rank
/// tests per subscale. Adjustment runs over the three comparisons of each
/// subscale.
pub fn condition_report(responses: &[SpgqResponse], mapping: &SpgqMapping) -> Result<ConditionReport> {
    let mut by_participant: BTreeMap<(&str, &str), [Option<SubscaleScores>; 3]> = BTreeMap::new();
    for r in responses {
        let slot = by_participant.entry((r.group.as_str(), r.participant.as_str())).or_default();
        let c = Condition::ALL.iter().position(|c| *c == r.condition).expect("known condition");
        if slot[c].replace(score_spgq(r, mapping)?).is_some() {
            return Err(Error::IncompleteDesign(format!(
                "participant {} of group {} answered {} more than once",
                r.participant, r.group, r.condition
            )));
        }
    }
    let mut scores: Vec<[SubscaleScores; 3]> = Vec::with_capacity(by_participant.len());
    for ((group, participant), slot) in &by_participant {
        match slot {
            [Some(a), Some(b), Some(c)] => scores.push([*a, *b, *c]),
            _ => {
                let missing: Vec<&str> = Condition::ALL
                    .iter()
                    .zip(slot)
                    .filter(|(_, s)| s.is_none())
                    .map(|(c, _)| c.as_str())
                    .collect();
                return Err(Error::IncompleteDesign(format!(
                    "participant {participant} of group {group} has no response for {}",
                    missing.join(", ")
                )));
            }
        }
    }
    if scores.len() < 2 {
        return Err(Error::IncompleteDesign(format!("need at least 2 participants, got {}", scores.len())));
    }

    let mut subscales = Vec::new();
    for sub in Subscale::ALL {
        let rows: Vec<Vec<f64>> = scores.iter().map(|row| row.iter().map(|s| s.get(sub)).collect()).collect();
        let column = |c: usize| rows.iter().map(|r| r[c]).collect::<Vec<f64>>();
        let descriptives = (0..3)
            .map(|c| {
                let (mean, sd) = mean_sd(&column(c));
                Descriptive { condition: Condition::ALL[c], mean, sd }
            })
            .collect();
        let friedman = friedman(&rows)?;

        let mut pairwise = Vec::new();
        for (a, b) in PAIRS {
            let ia = Condition::ALL.iter().position(|c| *c == a).unwrap();
            let ib = Condition::ALL.iter().position(|c| *c == b).unwrap();
            let test = match wilcoxon_signed_rank(&column(ia), &column(ib)) {
                Ok(mut t) => {
                    t.label = format!("{a} vs {b}");
                    Some(t)
                }
                Err(Error::DegeneratePairs(_)) => None,
                Err(e) => return Err(e),
            };
            pairwise.push(PairwiseComparison { a, b, test, tendency: false });
        }
        let raw: Vec<f64> = pairwise.iter().filter_map(|p| p.test.as_ref().map(|t| t.p_raw)).collect();
        let mut adjusted = fdr_adjust(&raw)?.into_iter();
        for p in pairwise.iter_mut() {
            if let Some(t) = p.test.as_mut() {
                let q = adjusted.next().expect("one adjusted value per test");
                t.p_adjusted = Some(q);
                p.tendency = q < TENDENCY_P;
            }
        }
        subscales.push(SubscaleReport { subscale: sub, descriptives, friedman, pairwise });
    }
    Ok(ConditionReport { mapping: mapping.description().to_string(), n_participants: scores.len(), subscales })
}

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl ConditionReport {
    pub fn descriptive(&self, sub: Subscale, c: Condition) -> Option<&Descriptive> {
        self.subscales
            .iter()
            .find(|s| s.subscale == sub)?
            .descriptives
            .iter()
            .find(|d| d.condition == c)
    }

    /// Plain-text table. Pairwise rows read `a vs b  m_a vs m_b (SD: s_a vs s_b)`,
    /// with `+` marking a tendency.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "mapping: {}", self.mapping).unwrap();
        writeln!(out, "participants: {}", self.n_participants).unwrap();
        for s in &self.subscales {
            writeln!(out).unwrap();
            writeln!(out, "[{}]", s.subscale).unwrap();
            for d in &s.descriptives {
                writeln!(out, "  {:<10} mean {:.2}  SD {:.2}", d.condition.as_str(), d.mean, d.sd).unwrap();
            }
            writeln!(
                out,
                "  friedman   chi2 = {:.3}, p = {:.4}",
                s.friedman.statistic, s.friedman.p_raw
            )
            .unwrap();
            for p in &s.pairwise {
                let da = s.descriptives.iter().find(|d| d.condition == p.a).unwrap();
                let db = s.descriptives.iter().find(|d| d.condition == p.b).unwrap();
                let summary = format!("{:.2} vs {:.2} (SD: {:.2} vs {:.2})", da.mean, db.mean, da.sd, db.sd);
                let test = match &p.test {
                    Some(t) => format!(
                        "W = {}, p = {:.4}, p_adj = {:.4}",
                        t.statistic,
                        t.p_raw,
                        t.p_adjusted.unwrap_or(f64::NAN)
                    ),
                    None => "no nonzero differences".to_string(),
                };
                let flag = if p.tendency { " +" } else { "" };
                writeln!(out, "  {} vs {}: {summary}  {test}{flag}", p.a, p.b).unwrap();
            }
        }
        out
    }
}
