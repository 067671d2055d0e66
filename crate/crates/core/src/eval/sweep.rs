use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{judge, report, EvalError, GroundTruth, MetricsReport};
use crate::config::SystemConfig;
use crate::orchestrator::run_stream;
use crate::types::DetectionEvent;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub report: MetricsReport,
}

/// Runs the full pipeline on `events` under `cfg` and scores it.
pub fn evaluate_stream(
    events: &[DetectionEvent],
    ground_truth: &GroundTruth,
    cfg: &SystemConfig,
) -> Result<MetricsReport, EvalError> {
    let cfg = cfg.clone().validate()?;
    let (outcomes, _) = run_stream(events, &cfg)?;
    let judgments = judge(&outcomes, ground_truth)?;
    Ok(report(&judgments).with_config(cfg.th_score, cfg.th_emb))
}

fn sweep(
    events: &[DetectionEvent],
    cfg: &SystemConfig,
    thresholds: &[f64],
    parallel: bool,
    apply: fn(&mut SystemConfig, f64),
) -> Result<Vec<SweepRow>, EvalError> {
    let gt = GroundTruth::from_events(events);
    let point = |&threshold: &f64| -> Result<SweepRow, EvalError> {
        let mut c = cfg.clone();
        apply(&mut c, threshold);
        Ok(SweepRow {
            threshold,
            report: evaluate_stream(events, &gt, &c)?,
        })
    };
    let mut rows = if parallel {
        thresholds.par_iter().map(point).collect::<Result<Vec<_>, _>>()?
    } else {
        thresholds.iter().map(point).collect::<Result<Vec<_>, _>>()?
    };
    rows.sort_by(|a, b| b.threshold.total_cmp(&a.threshold));
    Ok(rows)
}

/// One independent run per `th_score` value on the same stream, `th_emb` held
/// at its configured value. Rows come back in descending threshold order.
pub fn sweep_th_score(
    events: &[DetectionEvent],
    cfg: &SystemConfig,
    thresholds: &[f64],
    parallel: bool,
) -> Result<Vec<SweepRow>, EvalError> {
    if thresholds.len() < 2 {
        return Err(EvalError::TooFewThresholds(thresholds.len()));
    }
    sweep(events, cfg, thresholds, parallel, |c, t| c.th_score = t)
}

/// Same as [`sweep_th_score`] but varying `th_emb`.
pub fn sweep_th_emb(
    events: &[DetectionEvent],
    cfg: &SystemConfig,
    thresholds: &[f64],
    parallel: bool,
) -> Result<Vec<SweepRow>, EvalError> {
    if thresholds.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    sweep(events, cfg, thresholds, parallel, |c, t| c.th_emb = t)
}

/// Evenly spaced `th_emb` candidates `0, step, 2·step, …, max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdGrid {
    pub max: f64,
    pub step: f64,
}

impl Default for ThresholdGrid {
    fn default() -> Self {
        Self { max: 100.0, step: 0.5 }
    }
}

impl ThresholdGrid {
    pub fn len(&self) -> usize {
        if !(self.step > 0.0) || !(self.max >= 0.0) {
            return 0;
        }
        (self.max / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn value(&self, i: usize) -> f64 {
        i as f64 * self.step
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.value(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub th_emb: f64,
    pub grid_index: usize,
    /// Measured metrics at the returned threshold.
    pub report: MetricsReport,
    /// Every grid point that was actually run, as (th_emb, FTR).
    pub evaluations: Vec<(f64, f64)>,
}

/// Largest grid `th_emb` whose measured FTR stays within `target_ftr`.
///
/// Bisection keeps a satisfying lower index and a violating upper index, so
/// the result always satisfies the target and the next grid step up does not.
/// Runs with no non-target probes count as FTR 0.
pub fn operating_point(
    events: &[DetectionEvent],
    cfg: &SystemConfig,
    target_ftr: f64,
    grid: ThresholdGrid,
) -> Result<OperatingPoint, EvalError> {
    if !(target_ftr > 0.0 && target_ftr <= 1.0) {
        return Err(EvalError::BadTarget(target_ftr));
    }
    if grid.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    let gt = GroundTruth::from_events(events);
    let mut evaluations = Vec::new();
    let mut measure = |i: usize| -> Result<MetricsReport, EvalError> {
        let c = SystemConfig { th_emb: grid.value(i), ..cfg.clone() };
        let r = evaluate_stream(events, &gt, &c)?;
        evaluations.push((grid.value(i), r.ftr.unwrap_or(0.0)));
        Ok(r)
    };
    let ok = |r: &MetricsReport| r.ftr.unwrap_or(0.0) <= target_ftr;

    let last = grid.len() - 1;
    let top = measure(last)?;
    if ok(&top) {
        return Ok(OperatingPoint { th_emb: grid.value(last), grid_index: last, report: top, evaluations });
    }
    let bottom = measure(0)?;
    if !ok(&bottom) {
        return Err(EvalError::Unreachable {
            target: target_ftr,
            achieved: bottom.ftr.unwrap_or(0.0),
        });
    }
    let (mut lo, mut hi, mut lo_report) = (0, last, bottom);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let r = measure(mid)?;
        if ok(&r) {
            lo = mid;
            lo_report = r;
        } else {
            hi = mid;
        }
    }
    Ok(OperatingPoint { th_emb: grid.value(lo), grid_index: lo, report: lo_report, evaluations })
}

fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties. `None` when either
/// side is constant or the lengths differ.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let (rx, ry) = (average_ranks(xs), average_ranks(ys));
    let n = xs.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let (mut vx, mut vy) = (0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mx) * (b - my);
        vx += (a - mx).powi(2);
        vy += (b - my).powi(2);
    }
    (vx > 0.0 && vy > 0.0).then(|| cov / (vx * vy).sqrt())
}

/// Threshold / Precision / Accuracy / TTR table, one row per sweep point.
pub fn format_table(header: &str, rows: &[SweepRow]) -> String {
    let f = |v: Option<f64>| v.map_or_else(|| "-".to_owned(), |x| format!("{x:.3}"));
    let mut out = format!("{header:>8}  {:>9}  {:>8}  {:>6}\n", "Precision", "Accuracy", "TTR");
    for row in rows {
        out.push_str(&format!(
            "{:>8.2}  {:>9}  {:>8}  {:>6}\n",
            row.threshold,
            f(row.report.precision),
            f(row.report.accuracy),
            f(row.report.ttr)
        ));
    }
    out
}
