//! Pairwise judgments to system scores and rankings: two-player TrueSkill
//! with draws, Expected Wins, bootstrap rank ranges, and cluster
//! assignment.
//!
//! The update follows the standard two-player derivation. With
//! c² = 2·beta² + sigma_a² + sigma_b² and t = (mu_winner − mu_loser)/c:
//!
//! * win:  mu += (sigma²/c)·v(t, eps/c) with v(t, e) = pdf(t−e)/cdf(t−e),
//!   and sigma² *= 1 − (sigma²/c²)·w where w = v·(v + t − e);
//! * draw: v and w use the two-sided truncated-Gaussian moments over
//!   [−eps−t, eps−t].
//!
//! Defaults (mu0 = 0, sigma0 = 0.5, beta = 0.25, tau = 0) follow the
//! WMT-style adaptation of TrueSkill to human evaluation campaigns. The
//! draw margin can be fixed or derived from the observed tie fraction.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::LazyLock;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::corpus::{PairwiseJudgment, Verdict};
use crate::error::{Error, Result};

static STD_NORMAL: LazyLock<Normal> = LazyLock::new(|| Normal::new(0.0, 1.0).unwrap());

fn pdf(x: f64) -> f64 {
    STD_NORMAL.pdf(x)
}

fn cdf(x: f64) -> f64 {
    STD_NORMAL.cdf(x)
}

fn inverse_cdf(p: f64) -> f64 {
    STD_NORMAL.inverse_cdf(p)
}

/// A system's skill estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rating {
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DrawMargin {
    /// Fixed margin eps >= 0.
    Fixed(f64),
    /// Derive eps so the prior draw probability matches the observed tie
    /// fraction.
    Auto(AutoTag),
}

/// Serde helper so `"auto"` round-trips as a plain string in configs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoTag {
    Auto,
}

impl DrawMargin {
    pub const AUTO: DrawMargin = DrawMargin::Auto(AutoTag::Auto);
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatingConfig {
    pub mu0: f64,
    pub sigma0: f64,
    pub perf_beta: f64,
    pub dynamics_tau: f64,
    pub draw_margin_eps: DrawMargin,
    pub passes: usize,
    pub shuffle_seed: u64,
}

impl Default for RatingConfig {
    fn default() -> Self {
        RatingConfig {
            mu0: 0.0,
            sigma0: 0.5,
            perf_beta: 0.25,
            dynamics_tau: 0.0,
            draw_margin_eps: DrawMargin::AUTO,
            passes: 2,
            shuffle_seed: 0,
        }
    }
}

impl RatingConfig {
    fn initial_rating(&self) -> Rating {
        Rating {
            mu: self.mu0,
            sigma: self.sigma0,
        }
    }

    /// Margin eps such that two prior-rated systems draw with probability
    /// `tie_fraction`: 2·cdf(eps/c) − 1 = p with c² = 2·beta² + 2·sigma0².
    pub fn auto_draw_margin(&self, tie_fraction: f64) -> f64 {
        let p = tie_fraction.clamp(0.0, 0.9999);
        let c = (2.0 * self.perf_beta * self.perf_beta + 2.0 * self.sigma0 * self.sigma0).sqrt();
        c * inverse_cdf(0.5 * (p + 1.0))
    }

    /// The concrete margin used by a run over `judgments`.
    pub fn resolve_draw_margin(&self, judgments: &[PairwiseJudgment]) -> f64 {
        match self.draw_margin_eps {
            DrawMargin::Fixed(eps) => eps,
            DrawMargin::Auto(_) => {
                if judgments.is_empty() {
                    return 0.0;
                }
                let ties = judgments.iter().filter(|j| j.verdict == Verdict::Tie).count();
                self.auto_draw_margin(ties as f64 / judgments.len() as f64)
            }
        }
    }
}

// Truncated-Gaussian moment ratios. Guards mirror the usual reference
// implementations: when the normalizer underflows, fall back to the limit
// values so updates stay finite.
const NORM_FLOOR: f64 = 1e-158;

fn v_win(t: f64, eps: f64) -> f64 {
    let x = t - eps;
    let norm = cdf(x);
    if norm < NORM_FLOOR {
        -x
    } else {
        pdf(x) / norm
    }
}

fn w_win(t: f64, eps: f64) -> f64 {
    let x = t - eps;
    let norm = cdf(x);
    if norm < NORM_FLOOR {
        return if x < 0.0 { 1.0 } else { 0.0 };
    }
    let v = v_win(t, eps);
    v * (v + x)
}

fn v_draw(t: f64, eps: f64) -> f64 {
    let ta = t.abs();
    let norm = cdf(eps - ta) - cdf(-eps - ta);
    if norm < NORM_FLOOR {
        return if t < 0.0 { -t - eps } else { -t + eps };
    }
    let x = pdf(-eps - ta) - pdf(eps - ta);
    if t < 0.0 {
        -x / norm
    } else {
        x / norm
    }
}

fn w_draw(t: f64, eps: f64) -> f64 {
    let ta = t.abs();
    let norm = cdf(eps - ta) - cdf(-eps - ta);
    if norm < NORM_FLOOR {
        return 1.0;
    }
    let v = v_draw(t, eps);
    v * v + ((eps - ta) * pdf(eps - ta) + (eps + ta) * pdf(ta + eps)) / norm
}

/// One two-player update. `eps` is the resolved draw margin.
pub fn trueskill_update(
    a: Rating,
    b: Rating,
    verdict: Verdict,
    eps: f64,
    cfg: &RatingConfig,
) -> (Rating, Rating) {
    let tau2 = cfg.dynamics_tau * cfg.dynamics_tau;
    let var_a = a.sigma * a.sigma + tau2;
    let var_b = b.sigma * b.sigma + tau2;
    let c2 = 2.0 * cfg.perf_beta * cfg.perf_beta + var_a + var_b;
    let c = c2.sqrt();
    let e = eps / c;

    let updated = |mu: f64, var: f64, direction: f64, v: f64, w: f64| Rating {
        mu: mu + direction * (var / c) * v,
        sigma: (var * (1.0 - (var / c2) * w)).sqrt(),
    };

    match verdict {
        Verdict::Tie => {
            let t = (a.mu - b.mu) / c;
            let v = v_draw(t, e);
            let w = w_draw(t, e);
            (
                updated(a.mu, var_a, 1.0, v, w),
                updated(b.mu, var_b, -1.0, v, w),
            )
        }
        Verdict::AWins | Verdict::BWins => {
            let (winner, loser, var_w, var_l) = match verdict {
                Verdict::AWins => (a, b, var_a, var_b),
                _ => (b, a, var_b, var_a),
            };
            let t = (winner.mu - loser.mu) / c;
            let v = v_win(t, e);
            let w = w_win(t, e);
            let new_winner = updated(winner.mu, var_w, 1.0, v, w);
            let new_loser = updated(loser.mu, var_l, -1.0, v, w);
            match verdict {
                Verdict::AWins => (new_winner, new_loser),
                _ => (new_loser, new_winner),
            }
        }
    }
}

fn check_coverage(judgments: &[PairwiseJudgment], systems: &[String]) -> Result<()> {
    if systems.is_empty() {
        return Err(Error::validation("run_trueskill: empty system list"));
    }
    let known: BTreeSet<&str> = systems.iter().map(String::as_str).collect();
    if known.len() != systems.len() {
        return Err(Error::validation("run_trueskill: duplicate system names"));
    }
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for j in judgments {
        for name in [&j.system_a, &j.system_b] {
            if !known.contains(name.as_str()) {
                return Err(Error::validation(format!(
                    "judgment references system {name} outside the rated set"
                )));
            }
            seen.insert(name);
        }
    }
    for name in &known {
        if !seen.contains(name) {
            return Err(Error::validation(format!(
                "system {name} appears in no judgment"
            )));
        }
    }
    Ok(())
}

fn run_with_rng(
    judgments: &[PairwiseJudgment],
    systems: &[String],
    cfg: &RatingConfig,
    eps: f64,
    rng: &mut ChaCha8Rng,
) -> BTreeMap<String, Rating> {
    let mut ratings: BTreeMap<&str, Rating> = systems
        .iter()
        .map(|s| (s.as_str(), cfg.initial_rating()))
        .collect();
    let mut order: Vec<usize> = (0..judgments.len()).collect();
    for _ in 0..cfg.passes.max(1) {
        order.shuffle(rng);
        for &idx in &order {
            let j = &judgments[idx];
            let a = ratings[j.system_a.as_str()];
            let b = ratings[j.system_b.as_str()];
            let (new_a, new_b) = trueskill_update(a, b, j.verdict, eps, cfg);
            ratings.insert(&j.system_a, new_a);
            ratings.insert(&j.system_b, new_b);
        }
    }
    ratings
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
}

/// Sequential TrueSkill over a seeded shuffle of the judgments, repeated
/// for `cfg.passes`. Deterministic given the config seed.
pub fn run_trueskill(
    judgments: &[PairwiseJudgment],
    systems: &[String],
    cfg: &RatingConfig,
) -> Result<BTreeMap<String, Rating>> {
    check_coverage(judgments, systems)?;
    let eps = cfg.resolve_draw_margin(judgments);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.shuffle_seed);
    Ok(run_with_rng(judgments, systems, cfg, eps, &mut rng))
}

/// Mean win rate against each opponent, ties excluded. Opponents with no
/// decisive pair are skipped; a system with no decisive pair at all is an
/// error.
pub fn expected_wins(judgments: &[PairwiseJudgment]) -> Result<BTreeMap<String, f64>> {
    let mut systems: BTreeSet<&str> = BTreeSet::new();
    // (winner, loser) -> decisive count
    let mut wins: BTreeMap<(&str, &str), u64> = BTreeMap::new();
    for j in judgments {
        systems.insert(&j.system_a);
        systems.insert(&j.system_b);
        match j.verdict {
            Verdict::AWins => *wins.entry((&j.system_a, &j.system_b)).or_insert(0) += 1,
            Verdict::BWins => *wins.entry((&j.system_b, &j.system_a)).or_insert(0) += 1,
            Verdict::Tie => {}
        }
    }
    let mut out = BTreeMap::new();
    for &system in &systems {
        let mut total = 0.0;
        let mut opponents = 0usize;
        for &other in &systems {
            if other == system {
                continue;
            }
            let won = wins.get(&(system, other)).copied().unwrap_or(0);
            let lost = wins.get(&(other, system)).copied().unwrap_or(0);
            if won + lost == 0 {
                continue;
            }
            total += won as f64 / (won + lost) as f64;
            opponents += 1;
        }
        if opponents == 0 {
            return Err(Error::validation(format!(
                "expected_wins: system {system} has only ties"
            )));
        }
        out.insert(system.to_string(), total / opponents as f64);
    }
    Ok(out)
}

/// One row of a ranking table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingEntry {
    pub system: String,
    /// Final TrueSkill mu from the full run.
    pub score: f64,
    pub rank: usize,
    pub range_low: usize,
    pub range_high: usize,
    pub cluster: usize,
}

/// Ranks systems by mu (descending; names break exact ties) and returns
/// each system's 1-based rank.
fn point_ranks(ratings: &BTreeMap<String, Rating>) -> BTreeMap<String, usize> {
    let mut order: Vec<(&String, f64)> = ratings.iter().map(|(k, v)| (k, v.mu)).collect();
    order.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap().then_with(|| x.0.cmp(y.0)));
    order
        .into_iter()
        .enumerate()
        .map(|(i, (name, _))| (name.clone(), i + 1))
        .collect()
}

fn rank_quantile(sorted: &[usize], q: f64) -> usize {
    let n = sorted.len();
    let idx = ((q * n as f64).ceil() as usize).clamp(1, n) - 1;
    sorted[idx]
}

/// Bootstrap over judgments: resample with replacement, re-run TrueSkill,
/// and report each system's central `confidence` rank interval. Clusters
/// split where consecutive systems have non-overlapping ranges.
///
/// Per-resample RNG streams derive from the config seed, so results do
/// not depend on the parallel schedule. `resamples == 1` degenerates to
/// the full data set and the point ranks.
pub fn bootstrap_rank_ranges(
    judgments: &[PairwiseJudgment],
    systems: &[String],
    cfg: &RatingConfig,
    resamples: usize,
    confidence: f64,
) -> Result<Vec<RankingEntry>> {
    if !(0.0..=1.0).contains(&confidence) {
        return Err(Error::validation("confidence must lie in [0, 1]"));
    }
    check_coverage(judgments, systems)?;
    let eps = cfg.resolve_draw_margin(judgments);
    let full = run_trueskill(judgments, systems, cfg)?;
    let ranks = point_ranks(&full);

    let resamples = resamples.max(1);
    let rank_samples: Vec<BTreeMap<String, usize>> = if resamples == 1 {
        vec![ranks.clone()]
    } else {
        (0..resamples)
            .into_par_iter()
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.shuffle_seed);
                rng.set_stream(r as u64 + 1);
                let sample: Vec<PairwiseJudgment> = (0..judgments.len())
                    .map(|_| judgments[rng.gen_range(0..judgments.len())].clone())
                    .collect();
                // A resample can drop a system entirely; such systems keep
                // their prior and rank by mu0 among themselves.
                let ratings = run_with_rng(&sample, systems, cfg, eps, &mut rng);
                point_ranks(&ratings)
            })
            .collect()
    };

    let half_tail = (1.0 - confidence) / 2.0;
    let mut entries: Vec<RankingEntry> = systems
        .iter()
        .map(|system| {
            let mut collected: Vec<usize> = rank_samples.iter().map(|s| s[system]).collect();
            collected.sort_unstable();
            let rank = ranks[system];
            let low = rank_quantile(&collected, half_tail).min(rank);
            let high = rank_quantile(&collected, 1.0 - half_tail).max(rank);
            RankingEntry {
                system: system.clone(),
                score: full[system].mu,
                rank,
                range_low: low,
                range_high: high,
                cluster: 0,
            }
        })
        .collect();
    entries.sort_by_key(|e| e.rank);

    let mut cluster = 0usize;
    let mut prev_high = 0usize;
    for entry in &mut entries {
        if cluster == 0 || entry.range_low > prev_high {
            cluster += 1;
        }
        prev_high = prev_high.max(entry.range_high);
        entry.cluster = cluster;
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Granularity;

    fn judgment(a: &str, b: &str, verdict: Verdict) -> PairwiseJudgment {
        PairwiseJudgment {
            sentence_id: "s".into(),
            granularity: Granularity::SentenceBased,
            annotator_id: 0,
            system_a: a.into(),
            system_b: b.into(),
            verdict,
        }
    }

    fn names(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn tie_between_equal_priors_is_symmetric() {
        let cfg = RatingConfig::default();
        let prior = Rating { mu: 0.0, sigma: 0.5 };
        let (a, b) = trueskill_update(prior, prior, Verdict::Tie, 0.05, &cfg);
        assert_eq!(a.mu, b.mu);
        assert_eq!(a.mu, 0.0);
        assert!(a.sigma < prior.sigma);
        assert_eq!(a.sigma, b.sigma);
    }

    #[test]
    fn win_from_equal_priors_moves_quarter_point() {
        let cfg = RatingConfig::default();
        let prior = Rating { mu: 0.0, sigma: 0.5 };
        let (a, b) = trueskill_update(prior, prior, Verdict::AWins, 0.0, &cfg);
        // c = sqrt(0.625); v(0,0) = pdf(0)/cdf(0); mu = (0.25/c)·v ≈ 0.2523.
        assert!((a.mu - 0.2523).abs() < 1e-3, "mu_a = {}", a.mu);
        assert!((a.mu + b.mu).abs() < 1e-12);
        assert!(a.sigma < prior.sigma && b.sigma < prior.sigma);
    }

    #[test]
    fn confident_winner_barely_moves() {
        let cfg = RatingConfig::default();
        let confident = Rating { mu: 0.0, sigma: 0.01 };
        let uncertain = Rating { mu: 0.0, sigma: 0.5 };
        let (a, b) = trueskill_update(confident, uncertain, Verdict::AWins, 0.0, &cfg);
        assert!((a.mu - confident.mu).abs() < (b.mu - uncertain.mu).abs() / 10.0);
    }

    #[test]
    fn total_order_is_recovered() {
        let systems = names(&["s1", "s2", "s3", "s4"]);
        let mut judgments = Vec::new();
        for _ in 0..50 {
            for i in 0..systems.len() {
                for j in (i + 1)..systems.len() {
                    judgments.push(judgment(&systems[i], &systems[j], Verdict::AWins));
                }
            }
        }
        let cfg = RatingConfig::default();
        let ratings = run_trueskill(&judgments, &systems, &cfg).unwrap();
        assert!(ratings["s1"].mu > ratings["s2"].mu);
        assert!(ratings["s2"].mu > ratings["s3"].mu);
        assert!(ratings["s3"].mu > ratings["s4"].mu);
    }

    #[test]
    fn all_ties_stay_symmetric() {
        let systems = names(&["a", "b", "c"]);
        let mut judgments = Vec::new();
        for _ in 0..30 {
            judgments.push(judgment("a", "b", Verdict::Tie));
            judgments.push(judgment("b", "c", Verdict::Tie));
            judgments.push(judgment("a", "c", Verdict::Tie));
        }
        let ratings = run_trueskill(&judgments, &systems, &RatingConfig::default()).unwrap();
        let mus: Vec<f64> = ratings.values().map(|r| r.mu).collect();
        for mu in &mus {
            assert!((mu - mus[0]).abs() < 1e-9);
        }
    }

    #[test]
    fn same_seed_is_bitwise_identical() {
        let systems = names(&["a", "b"]);
        let judgments = vec![
            judgment("a", "b", Verdict::AWins),
            judgment("a", "b", Verdict::BWins),
            judgment("a", "b", Verdict::Tie),
        ];
        let cfg = RatingConfig::default();
        let r1 = run_trueskill(&judgments, &systems, &cfg).unwrap();
        let r2 = run_trueskill(&judgments, &systems, &cfg).unwrap();
        for (k, v) in &r1 {
            assert_eq!(v.mu.to_bits(), r2[k].mu.to_bits());
            assert_eq!(v.sigma.to_bits(), r2[k].sigma.to_bits());
        }
    }

    #[test]
    fn isolated_system_is_an_error() {
        let systems = names(&["a", "b", "ghost"]);
        let judgments = vec![judgment("a", "b", Verdict::AWins)];
        let err = run_trueskill(&judgments, &systems, &RatingConfig::default())
            .unwrap_err()
            .to_string();
        assert!(err.contains("ghost"), "{err}");
    }

    #[test]
    fn verdict_antisymmetry() {
        let systems = names(&["a", "b", "c"]);
        let judgments = vec![
            judgment("a", "b", Verdict::AWins),
            judgment("b", "c", Verdict::Tie),
            judgment("a", "c", Verdict::BWins),
            judgment("c", "b", Verdict::AWins),
        ];
        let flipped: Vec<PairwiseJudgment> = judgments
            .iter()
            .map(|j| PairwiseJudgment {
                system_a: j.system_b.clone(),
                system_b: j.system_a.clone(),
                verdict: j.verdict.flip(),
                ..j.clone()
            })
            .collect();
        let cfg = RatingConfig::default();
        let r1 = run_trueskill(&judgments, &systems, &cfg).unwrap();
        let r2 = run_trueskill(&flipped, &systems, &cfg).unwrap();
        for (k, v) in &r1 {
            assert_eq!(v.mu.to_bits(), r2[k].mu.to_bits(), "{k}");
            assert_eq!(v.sigma.to_bits(), r2[k].sigma.to_bits(), "{k}");
        }
    }

    #[test]
    fn label_invariance() {
        let systems = names(&["a", "b"]);
        let judgments = vec![
            judgment("a", "b", Verdict::AWins),
            judgment("a", "b", Verdict::Tie),
        ];
        let renamed: Vec<PairwiseJudgment> = judgments
            .iter()
            .map(|j| PairwiseJudgment {
                system_a: format!("x-{}", j.system_a),
                system_b: format!("x-{}", j.system_b),
                ..j.clone()
            })
            .collect();
        let cfg = RatingConfig::default();
        let r1 = run_trueskill(&judgments, &systems, &cfg).unwrap();
        let r2 = run_trueskill(&renamed, &names(&["x-a", "x-b"]), &cfg).unwrap();
        assert_eq!(r1["a"].mu.to_bits(), r2["x-a"].mu.to_bits());
        assert_eq!(r1["b"].mu.to_bits(), r2["x-b"].mu.to_bits());
    }

    #[test]
    fn auto_margin_grows_with_tie_fraction() {
        let cfg = RatingConfig::default();
        let few: Vec<PairwiseJudgment> = (0..10)
            .map(|i| judgment("a", "b", if i < 2 { Verdict::Tie } else { Verdict::AWins }))
            .collect();
        let many: Vec<PairwiseJudgment> = (0..10)
            .map(|i| judgment("a", "b", if i < 8 { Verdict::Tie } else { Verdict::AWins }))
            .collect();
        assert!(cfg.resolve_draw_margin(&many) > cfg.resolve_draw_margin(&few));
        assert_eq!(cfg.resolve_draw_margin(&few[2..].to_vec()), 0.0);
    }

    #[test]
    fn expected_wins_boundaries_and_fixture() {
        let mut judgments = Vec::new();
        for _ in 0..3 {
            judgments.push(judgment("a", "b", Verdict::AWins));
            judgments.push(judgment("a", "c", Verdict::AWins));
        }
        judgments.push(judgment("b", "c", Verdict::AWins));
        judgments.push(judgment("b", "c", Verdict::BWins));
        let ew = expected_wins(&judgments).unwrap();
        assert_eq!(ew["a"], 1.0);
        // b: 0 of 3 vs a, 1 of 2 vs c -> (0 + 0.5)/2.
        assert!((ew["b"] - 0.25).abs() < 1e-12);
        assert!((ew["c"] - 0.25).abs() < 1e-12);

        let symmetric = vec![
            judgment("a", "b", Verdict::AWins),
            judgment("a", "b", Verdict::BWins),
            judgment("b", "c", Verdict::AWins),
            judgment("b", "c", Verdict::BWins),
            judgment("a", "c", Verdict::AWins),
            judgment("a", "c", Verdict::BWins),
        ];
        for v in expected_wins(&symmetric).unwrap().values() {
            assert!((v - 0.5).abs() < 1e-12);
        }

        let only_ties = vec![
            judgment("a", "b", Verdict::AWins),
            judgment("a", "c", Verdict::Tie),
            judgment("b", "c", Verdict::Tie),
        ];
        // c never has a decisive pair.
        assert!(expected_wins(&only_ties).is_err());
    }

    fn total_order_judgments(systems: &[String], repeats: usize) -> Vec<PairwiseJudgment> {
        let mut judgments = Vec::new();
        for _ in 0..repeats {
            for i in 0..systems.len() {
                for j in (i + 1)..systems.len() {
                    judgments.push(judgment(&systems[i], &systems[j], Verdict::AWins));
                }
            }
        }
        judgments
    }

    #[test]
    fn noiseless_bootstrap_collapses_ranges() {
        let systems = names(&["s1", "s2", "s3", "s4"]);
        let judgments = total_order_judgments(&systems, 40);
        let cfg = RatingConfig::default();
        let entries = bootstrap_rank_ranges(&judgments, &systems, &cfg, 50, 0.95).unwrap();
        for (i, e) in entries.iter().enumerate() {
            assert_eq!(e.rank, i + 1);
            assert_eq!(e.range_low, e.rank);
            assert_eq!(e.range_high, e.rank);
            assert_eq!(e.cluster, i + 1);
        }
    }

    #[test]
    fn duplicate_systems_share_a_cluster() {
        let systems = names(&["top", "twin1", "twin2"]);
        let mut judgments = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..120 {
            judgments.push(judgment("top", "twin1", Verdict::AWins));
            judgments.push(judgment("top", "twin2", Verdict::AWins));
            // Twins are indistinguishable: random outcomes both ways.
            let v = if rng.gen_bool(0.5) {
                Verdict::AWins
            } else {
                Verdict::BWins
            };
            judgments.push(judgment("twin1", "twin2", v));
        }
        let cfg = RatingConfig::default();
        let entries = bootstrap_rank_ranges(&judgments, &systems, &cfg, 100, 0.95).unwrap();
        let twin1 = entries.iter().find(|e| e.system == "twin1").unwrap();
        let twin2 = entries.iter().find(|e| e.system == "twin2").unwrap();
        assert_eq!(twin1.cluster, twin2.cluster);
        assert!(twin1.range_low <= twin2.range_high && twin2.range_low <= twin1.range_high);
    }

    #[test]
    fn single_resample_equals_point_ranks() {
        let systems = names(&["s1", "s2", "s3"]);
        let judgments = total_order_judgments(&systems, 10);
        let cfg = RatingConfig::default();
        let entries = bootstrap_rank_ranges(&judgments, &systems, &cfg, 1, 0.95).unwrap();
        for e in &entries {
            assert_eq!(e.range_low, e.rank);
            assert_eq!(e.range_high, e.rank);
        }
    }

    #[test]
    fn sigma_never_increases_without_dynamics() {
        let cfg = RatingConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..2000 {
            let a = Rating {
                mu: rng.gen_range(-2.0..2.0),
                sigma: rng.gen_range(0.05..1.0),
            };
            let b = Rating {
                mu: rng.gen_range(-2.0..2.0),
                sigma: rng.gen_range(0.05..1.0),
            };
            let verdict = match rng.gen_range(0..3) {
                0 => Verdict::AWins,
                1 => Verdict::Tie,
                _ => Verdict::BWins,
            };
            let eps = rng.gen_range(0.0..0.3);
            let (na, nb) = trueskill_update(a, b, verdict, eps, &cfg);
            assert!(na.sigma <= a.sigma + 1e-12);
            assert!(nb.sigma <= b.sigma + 1e-12);
            assert!(na.mu.is_finite() && nb.mu.is_finite());
        }
    }
}
