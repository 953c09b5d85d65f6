//! System-level and sentence-level meta-evaluation: Pearson r, Spearman
//! rho, pairwise Accuracy, Kendall tau, consecutive-window analysis, and
//! report assembly.
//!
//! Tie conventions, pinned and labeled in every report: Accuracy counts
//! agreement over all pairs including human ties; tau is computed over
//! human non-tie pairs only, with metric ties on those pairs counted as
//! discordant. Undefined correlations (zero variance, no decisive pairs)
//! are reported as absent values, never as zero.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{PairwiseJudgment, SubsetName, Verdict};
use crate::error::{Error, Result};

/// Which human judgment source a cell was computed against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dataset {
    SeedaE,
    SeedaS,
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dataset::SeedaE => write!(f, "seeda_e"),
            Dataset::SeedaS => write!(f, "seeda_s"),
        }
    }
}

/// One row of the meta-evaluation table: a metric evaluated against one
/// (dataset, subset) pair. Absent values mean the correlation was
/// undefined or the metric lacks that granularity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub dataset: Dataset,
    pub subset: SubsetName,
    pub metric_name: String,
    pub r: Option<f64>,
    pub rho: Option<f64>,
    pub acc: Option<f64>,
    pub tau: Option<f64>,
}

/// One point of the consecutive-window analysis. The point is labeled by
/// the window's last rank: 12 systems with window 4 yield x = 4..=12.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowPoint {
    pub start_rank: usize,
    pub window: usize,
    pub r: Option<f64>,
    pub rho: Option<f64>,
}

impl WindowPoint {
    /// The x-axis label: the window's maximum rank.
    pub fn x(&self) -> usize {
        self.start_rank + self.window - 1
    }
}

/// Product-moment correlation. Errors on length mismatch, n < 2, or zero
/// variance in either input.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::validation(format!(
            "pearson: length mismatch {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::UndefinedCorrelation(
            "pearson needs at least two points".into(),
        ));
    }
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        let dx = xi - mean_x;
        let dy = yi - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Err(Error::UndefinedCorrelation(
            "zero variance input".into(),
        ));
    }
    Ok(cov / (var_x * var_y).sqrt())
}

/// Fractional (average) ranks, ties share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // Positions i..=j (0-based) share the average 1-based rank.
        let shared = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = shared;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation: Pearson over average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::validation(format!(
            "spearman: length mismatch {} vs {}",
            x.len(),
            y.len()
        )));
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Sentence-level agreement of metric scores with human pairwise
/// judgments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairwiseAgreement {
    /// Fraction of all pairs where the metric relation (win/tie/loss under
    /// `tie_eps`) equals the human verdict.
    pub acc: f64,
    /// (concordant - discordant) / (concordant + discordant) over human
    /// non-tie pairs; metric ties count as discordant. Absent when no
    /// decisive pair exists.
    pub tau: Option<f64>,
    pub pairs: usize,
}

/// Per-(system, sentence) metric scores used for sentence-level
/// comparison.
pub type ScoreTable = BTreeMap<(String, String), f64>;

fn metric_relation(score_a: f64, score_b: f64, tie_eps: f64) -> Verdict {
    let delta = score_a - score_b;
    if delta.abs() <= tie_eps {
        Verdict::Tie
    } else if delta > 0.0 {
        Verdict::AWins
    } else {
        Verdict::BWins
    }
}

/// Accuracy and Kendall tau of a score table against human judgments.
pub fn kendall_pairwise(
    judgments: &[PairwiseJudgment],
    scores: &ScoreTable,
    tie_eps: f64,
) -> Result<PairwiseAgreement> {
    if judgments.is_empty() {
        return Err(Error::UndefinedCorrelation(
            "kendall_pairwise: no judgments".into(),
        ));
    }
    let lookup = |system: &str, sentence: &str| {
        scores
            .get(&(system.to_string(), sentence.to_string()))
            .copied()
            .ok_or_else(|| {
                Error::validation(format!(
                    "no metric score for system {system} on sentence {sentence}"
                ))
            })
    };
    let mut agree = 0usize;
    let mut concordant = 0usize;
    let mut discordant = 0usize;
    for j in judgments {
        let a = lookup(&j.system_a, &j.sentence_id)?;
        let b = lookup(&j.system_b, &j.sentence_id)?;
        let relation = metric_relation(a, b, tie_eps);
        if relation == j.verdict {
            agree += 1;
        }
        match j.verdict {
            Verdict::Tie => {}
            human => {
                if relation == human {
                    concordant += 1;
                } else {
                    discordant += 1;
                }
            }
        }
    }
    let tau = if concordant + discordant == 0 {
        None
    } else {
        Some((concordant as f64 - discordant as f64) / (concordant + discordant) as f64)
    };
    Ok(PairwiseAgreement {
        acc: agree as f64 / judgments.len() as f64,
        tau,
        pairs: judgments.len(),
    })
}

/// Pearson and Spearman between aligned per-system score maps.
pub fn system_level_eval(
    human_scores: &BTreeMap<String, f64>,
    metric_scores: &BTreeMap<String, f64>,
) -> Result<(f64, f64)> {
    let human_keys: BTreeSet<&String> = human_scores.keys().collect();
    let metric_keys: BTreeSet<&String> = metric_scores.keys().collect();
    if human_keys != metric_keys {
        let only_human: Vec<&&String> = human_keys.difference(&metric_keys).collect();
        let only_metric: Vec<&&String> = metric_keys.difference(&human_keys).collect();
        return Err(Error::validation(format!(
            "system sets differ: human-only {only_human:?}, metric-only {only_metric:?}"
        )));
    }
    let x: Vec<f64> = human_scores.values().copied().collect();
    let y: Vec<f64> = human_scores.keys().map(|k| metric_scores[k]).collect();
    Ok((pearson(&x, &y)?, spearman(&x, &y)?))
}

/// Correlations over every window of `window` consecutive systems in the
/// human ranking (best first). A zero-variance window yields a point with
/// the affected value absent rather than an error.
pub fn window_analysis(
    human_ranking: &[String],
    metric_scores: &BTreeMap<String, f64>,
    human_scores: &BTreeMap<String, f64>,
    window: usize,
) -> Result<Vec<WindowPoint>> {
    let n = human_ranking.len();
    if window == 0 || window > n {
        return Err(Error::validation(format!(
            "window {window} does not fit {n} systems"
        )));
    }
    for system in human_ranking {
        if !metric_scores.contains_key(system) || !human_scores.contains_key(system) {
            return Err(Error::validation(format!(
                "window_analysis: missing scores for system {system}"
            )));
        }
    }
    let mut points = Vec::with_capacity(n - window + 1);
    for start in 0..=(n - window) {
        let slice = &human_ranking[start..start + window];
        let x: Vec<f64> = slice.iter().map(|s| human_scores[s]).collect();
        let y: Vec<f64> = slice.iter().map(|s| metric_scores[s]).collect();
        let r = match pearson(&x, &y) {
            Ok(v) => Some(v),
            Err(Error::UndefinedCorrelation(_)) => None,
            Err(e) => return Err(e),
        };
        let rho = match spearman(&x, &y) {
            Ok(v) => Some(v),
            Err(Error::UndefinedCorrelation(_)) => None,
            Err(e) => return Err(e),
        };
        points.push(WindowPoint {
            start_rank: start + 1,
            window,
            r,
            rho,
        });
    }
    Ok(points)
}

fn format_opt(value: Option<f64>) -> String {
    value.map(|v| format!("{v:.6}")).unwrap_or_default()
}

/// Renders report cells as CSV, one row per (metric, dataset, subset),
/// sorted by key. Duplicate keys are an error; absent values stay empty.
pub fn report_csv(cells: &[CorrelationReport]) -> Result<String> {
    let mut seen = BTreeSet::new();
    let mut sorted: Vec<&CorrelationReport> = cells.iter().collect();
    sorted.sort_by(|a, b| {
        (&a.metric_name, a.dataset, a.subset).cmp(&(&b.metric_name, b.dataset, b.subset))
    });
    let mut out = String::from("metric,dataset,subset,r,rho,acc,tau\n");
    for cell in sorted {
        let key = (cell.metric_name.clone(), cell.dataset, cell.subset);
        if !seen.insert(key) {
            return Err(Error::validation(format!(
                "duplicate report cell: {} {} {}",
                cell.metric_name, cell.dataset, cell.subset
            )));
        }
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            cell.metric_name,
            cell.dataset,
            cell.subset,
            format_opt(cell.r),
            format_opt(cell.rho),
            format_opt(cell.acc),
            format_opt(cell.tau),
        ));
    }
    Ok(out)
}

/// Renders window points as CSV suitable for plotting: one row per
/// (metric, x).
pub fn window_csv(points: &BTreeMap<String, Vec<WindowPoint>>) -> String {
    let mut out = String::from("x,metric,r,rho\n");
    for (metric, pts) in points {
        for p in pts {
            out.push_str(&format!(
                "{},{},{},{}\n",
                p.x(),
                metric,
                format_opt(p.r),
                format_opt(p.rho),
            ));
        }
    }
    out
}
