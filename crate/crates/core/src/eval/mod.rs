//! Open-set metrics over a completed run.
//!
//! Only outcomes that queried the gallery (matched or newly enrolled) are
//! probes. A global id is owned by the ground-truth person whose probe created
//! it, for the whole lifetime of that id. A probe is a *target* when its person
//! owns at least one live gallery identity at probe time, otherwise it is a
//! *non-target*:
//!
//! | class      | outcome                       | verdict   |
//! |------------|-------------------------------|-----------|
//! | target     | matched an id it owns         | `t2t`     |
//! | target     | matched someone else's id     | `t2wrong` |
//! | target     | enrolled as new               | `t2nt`    |
//! | non-target | matched any id                | `nt2t`    |
//! | non-target | enrolled as new               | `nt2new`  |
//!
//! `TTR = N_t2t / N_t` and `FTR = N_nt2t / N_nt`. Precision is
//! `t2t / (t2t + t2wrong + nt2t)` over attempted matches and accuracy is
//! `(t2t + nt2new) / probes`. Ratios with a zero denominator are absent.

mod sweep;

pub use sweep::{
    evaluate_stream, format_table, operating_point, spearman, sweep_th_emb, sweep_th_score, OperatingPoint,
    SweepRow, ThresholdGrid,
};

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::orchestrator::{AssignmentOutcome, Decision, OrchestratorError};
use crate::sim::SimError;
use crate::types::{DetectionEvent, GlobalId};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{outcomes} outcomes but {labels} ground-truth labels")]
    LengthMismatch { outcomes: usize, labels: usize },
    #[error("outcome {index} does not echo ground-truth event {index}")]
    Misaligned { index: usize },
    #[error("outcome {index} has no ground-truth label")]
    MissingLabel { index: usize },
    #[error("outcome {index} matched global id {gid}, which is not live")]
    UnknownIdentity { index: usize, gid: GlobalId },
    #[error("need at least 2 thresholds, got {0}")]
    TooFewThresholds(usize),
    #[error("target FTR must be in (0, 1], got {0}")]
    BadTarget(f64),
    #[error("no threshold reaches FTR ≤ {target}: smallest grid value gives {achieved}")]
    Unreachable { target: f64, achieved: f64 },
    #[error("threshold grid is empty")]
    EmptyGrid,
    #[error(transparent)]
    Run(#[from] OrchestratorError),
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct EventKey {
    camera_id: String,
    frame_index: u64,
    track_id: u64,
    timestamp_ms: u64,
}

/// Ground-truth labels aligned with a stream, keyed for alignment checks.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    entries: Vec<(Option<EventKey>, Option<String>)>,
}

impl GroundTruth {
    pub fn from_events(events: &[DetectionEvent]) -> Self {
        Self {
            entries: events
                .iter()
                .map(|e| {
                    let key = EventKey {
                        camera_id: e.camera_id.clone(),
                        frame_index: e.frame_index,
                        track_id: e.track_id,
                        timestamp_ms: e.timestamp_ms,
                    };
                    (Some(key), e.gt_identity.clone())
                })
                .collect(),
        }
    }

    /// Labels echoed inside the outcomes themselves.
    pub fn from_outcomes(outcomes: &[AssignmentOutcome]) -> Self {
        Self {
            entries: outcomes.iter().map(|o| (None, o.gt_identity.clone())).collect(),
        }
    }

    /// Bare labels with no alignment keys.
    pub fn from_labels<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Self {
        Self {
            entries: labels.into_iter().map(|l| (None, Some(l.into()))).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeClass {
    Target,
    NonTarget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    T2t,
    T2nt,
    T2wrong,
    Nt2t,
    Nt2new,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeJudgment {
    /// Position of the outcome in the run.
    pub index: usize,
    pub gt_identity: String,
    pub decision: Decision,
    pub probe_class: ProbeClass,
    pub verdict: Verdict,
}

/// Classifies every probe in a run against ground truth.
pub fn judge(
    outcomes: &[AssignmentOutcome],
    ground_truth: &GroundTruth,
) -> Result<Vec<ProbeJudgment>, EvalError> {
    if outcomes.len() != ground_truth.len() {
        return Err(EvalError::LengthMismatch {
            outcomes: outcomes.len(),
            labels: ground_truth.len(),
        });
    }
    let mut owner: BTreeMap<GlobalId, &str> = BTreeMap::new();
    let mut live_owned: HashMap<&str, usize> = HashMap::new();
    let mut judgments = Vec::new();

    for (index, (outcome, (key, label))) in outcomes.iter().zip(&ground_truth.entries).enumerate() {
        if let Some(key) = key {
            let echo_matches = key.camera_id == outcome.camera_id
                && key.frame_index == outcome.frame_index
                && key.track_id == outcome.track_id
                && key.timestamp_ms == outcome.timestamp_ms;
            if !echo_matches {
                return Err(EvalError::Misaligned { index });
            }
        }
        for gid in &outcome.expired {
            if let Some(person) = owner.remove(gid) {
                *live_owned.get_mut(person).expect("owned ids are counted") -= 1;
            }
        }
        if !outcome.decision.is_probe() {
            continue;
        }
        let person = label.as_deref().ok_or(EvalError::MissingLabel { index })?;
        let is_target = live_owned.get(person).copied().unwrap_or(0) > 0;
        let probe_class = if is_target { ProbeClass::Target } else { ProbeClass::NonTarget };

        let verdict = match outcome.decision {
            Decision::NewIdentity { gid } => {
                owner.insert(gid, person);
                *live_owned.entry(person).or_insert(0) += 1;
                if is_target { Verdict::T2nt } else { Verdict::Nt2new }
            }
            Decision::Matched { gid, .. } => {
                let matched_owner = *owner
                    .get(&gid)
                    .ok_or(EvalError::UnknownIdentity { index, gid })?;
                match (is_target, matched_owner == person) {
                    (true, true) => Verdict::T2t,
                    (true, false) => Verdict::T2wrong,
                    (false, _) => Verdict::Nt2t,
                }
            }
            Decision::Filtered | Decision::Maintained { .. } => unreachable!("not a probe"),
        };
        judgments.push(ProbeJudgment {
            index,
            gt_identity: person.to_owned(),
            decision: outcome.decision,
            probe_class,
            verdict,
        });
    }
    Ok(judgments)
}

/// Parameters the report was produced under, when known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub th_score: f64,
    pub th_emb: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_t: usize,
    pub n_nt: usize,
    pub n_t2t: usize,
    pub n_nt2t: usize,
    pub n_t2nt: usize,
    pub n_t2wrong: usize,
    pub n_nt2new: usize,
    pub ttr: Option<f64>,
    pub ftr: Option<f64>,
    pub precision: Option<f64>,
    pub accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<ReportConfig>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn report(judgments: &[ProbeJudgment]) -> MetricsReport {
    let count = |v: Verdict| judgments.iter().filter(|j| j.verdict == v).count();
    let (t2t, t2nt, t2wrong, nt2t, nt2new) = (
        count(Verdict::T2t),
        count(Verdict::T2nt),
        count(Verdict::T2wrong),
        count(Verdict::Nt2t),
        count(Verdict::Nt2new),
    );
    let n_t = t2t + t2nt + t2wrong;
    let n_nt = nt2t + nt2new;
    MetricsReport {
        n_t,
        n_nt,
        n_t2t: t2t,
        n_nt2t: nt2t,
        n_t2nt: t2nt,
        n_t2wrong: t2wrong,
        n_nt2new: nt2new,
        ttr: ratio(t2t, n_t),
        ftr: ratio(nt2t, n_nt),
        precision: ratio(t2t, t2t + t2wrong + nt2t),
        accuracy: ratio(t2t + nt2new, n_t + n_nt),
        config: None,
    }
}

impl MetricsReport {
    pub fn with_config(mut self, th_score: f64, th_emb: f64) -> Self {
        self.config = Some(ReportConfig { th_score, th_emb });
        self
    }

    /// Aligned human-readable summary.
    pub fn to_text(&self) -> String {
        let f = |v: Option<f64>| v.map_or_else(|| "-".to_owned(), |x| format!("{x:.3}"));
        let mut s = String::new();
        if let Some(c) = self.config {
            s.push_str(&format!("th_score   {:.3}\nth_emb     {:.3}\n", c.th_score, c.th_emb));
        }
        s.push_str(&format!(
            "N_t        {}\nN_nt       {}\nN_t2t      {}\nN_nt2t     {}\n\
             TTR        {}\nFTR        {}\nPrecision  {}\nAccuracy   {}\n",
            self.n_t,
            self.n_nt,
            self.n_t2t,
            self.n_nt2t,
            f(self.ttr),
            f(self.ftr),
            f(self.precision),
            f(self.accuracy)
        ));
        s
    }
}
