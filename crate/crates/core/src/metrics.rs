//! Reference-based GEC metrics computed from scratch: M²-style F-beta
//! over extracted edits, untuned GLEU with seeded reference sampling,
//! and the difficulty-weighted GoToScorer.
//!
//! Conventions pinned here:
//!
//! * Gold-edit matching is exact on (start, end, replacement); labels are
//!   ignored.
//! * Per sentence, the annotator maximizing sentence F-beta is selected
//!   (ties go to the lower annotator id).
//! * F-beta is 1.0 when tp = fp = fn = 0 (an error-free sentence left
//!   unchanged) and 0.0 whenever tp = 0 otherwise.
//! * Corpus-level edit-based scores micro-average: counts accumulate over
//!   sentences before one final F-beta.
//! * GLEU per iteration: p_n = max(0, sum_g min(c_H, c_R) -
//!   sum_g max(0, min(c_H, c_S) - min(c_H, c_R))) / sum_g c_H, the
//!   sentence score is BP * exp(mean_n log p_n) with
//!   BP = min(1, exp(1 - |R|/|H|)), and any p_n that is zero or undefined
//!   (no hypothesis n-grams) zeroes the iteration score. Reference
//!   sampling is seeded per sentence ordinal so results never depend on
//!   evaluation order.

use std::collections::{BTreeMap, HashMap};
use std::ops::AddAssign;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::align::Edit;
use crate::corpus::{ContextedSentence, GoldAnnotation, SystemOutput, Tokens};
use crate::error::{Error, Result};

/// True/false positive and false negative counts of one edit comparison.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl AddAssign for MatchCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.tp += rhs.tp;
        self.fp += rhs.fp;
        self.fn_ += rhs.fn_;
    }
}

/// Shared metric parameters. `beta` weights precision over recall in every
/// F computation; the GLEU fields control n-gram order and reference
/// sampling.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricConfig {
    pub beta: f64,
    pub gleu_max_n: usize,
    pub gleu_iterations: usize,
    pub rng_seed: u64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            beta: 0.5,
            gleu_max_n: 4,
            gleu_iterations: 500,
            rng_seed: 0,
        }
    }
}

/// Per-gold-edit correction difficulty: 1 minus the fraction of systems
/// that produced the edit exactly.
#[derive(Debug, Clone, Default)]
pub struct DifficultyTable {
    weights: BTreeMap<(String, usize, usize, Vec<String>), f64>,
    pub total_systems: usize,
}

impl DifficultyTable {
    pub fn weight(&self, sentence_id: &str, edit: &Edit) -> Result<f64> {
        self.weights
            .get(&(
                sentence_id.to_string(),
                edit.start,
                edit.end,
                edit.replacement.clone(),
            ))
            .copied()
            .ok_or_else(|| {
                Error::validation(format!(
                    "no difficulty weight for sentence {sentence_id} edit {}..{}",
                    edit.start, edit.end
                ))
            })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

fn f_from_reals(tp: f64, fp: f64, fn_: f64, beta: f64) -> f64 {
    if tp <= 0.0 {
        return if fp <= 0.0 && fn_ <= 0.0 { 1.0 } else { 0.0 };
    }
    let p = tp / (tp + fp);
    let r = tp / (tp + fn_);
    let b2 = beta * beta;
    (1.0 + b2) * p * r / (b2 * p + r)
}

/// F-beta with the pinned conventions: 1.0 on all-zero counts, 0.0 when
/// tp = 0 and anything was proposed or missed.
pub fn f_beta(counts: MatchCounts, beta: f64) -> f64 {
    f_from_reals(counts.tp as f64, counts.fp as f64, counts.fn_ as f64, beta)
}

fn edit_key(e: &Edit) -> (usize, usize, &[String]) {
    (e.start, e.end, &e.replacement)
}

fn counts_against(hyp_edits: &[Edit], gold: &[Edit]) -> MatchCounts {
    let gold_keys: std::collections::BTreeSet<_> = gold.iter().map(edit_key).collect();
    let tp = hyp_edits
        .iter()
        .filter(|e| gold_keys.contains(&edit_key(e)))
        .count() as u64;
    MatchCounts {
        tp,
        fp: hyp_edits.len() as u64 - tp,
        fn_: gold.len() as u64 - tp,
    }
}

/// Counts hypothesis edits against the annotator whose gold set gives the
/// best sentence F-beta (ties: lower annotator id).
pub fn m2_counts(
    hyp_edits: &[Edit],
    annotations: &[GoldAnnotation],
    beta: f64,
) -> Result<MatchCounts> {
    if annotations.is_empty() {
        return Err(Error::validation("m2_counts: no gold annotations"));
    }
    let mut sorted: Vec<&GoldAnnotation> = annotations.iter().collect();
    sorted.sort_by_key(|a| a.annotator_id);
    let mut best: Option<(f64, MatchCounts)> = None;
    for ann in sorted {
        let counts = counts_against(hyp_edits, &ann.edits);
        let f = f_beta(counts, beta);
        if best.map_or(true, |(best_f, _)| f > best_f) {
            best = Some((f, counts));
        }
    }
    Ok(best.unwrap().1)
}

fn f_from_weighted(&(tp, fp, fn_): &(f64, f64, f64), beta: f64) -> f64 {
    f_from_reals(tp, fp, fn_, beta)
}

/// The weighted (tp, fp, fn) triple behind [`gotoscorer`], exposed so
/// corpus-level scores can micro-average.
pub fn gotoscorer_weighted_counts(
    hyp_edits: &[Edit],
    annotations: &[GoldAnnotation],
    table: &DifficultyTable,
    beta: f64,
) -> Result<(f64, f64, f64)> {
    if annotations.is_empty() {
        return Err(Error::validation("gotoscorer: no gold annotations"));
    }
    let mut sorted: Vec<&GoldAnnotation> = annotations.iter().collect();
    sorted.sort_by_key(|a| a.annotator_id);
    let mut best: Option<(f64, (f64, f64, f64))> = None;
    for ann in sorted {
        let gold_keys: std::collections::BTreeSet<_> = ann.edits.iter().map(edit_key).collect();
        let mut wtp = 0.0;
        let mut wfn = 0.0;
        for gold_edit in &ann.edits {
            let w = table.weight(&ann.sentence_id, gold_edit)?;
            if hyp_edits.iter().any(|e| edit_key(e) == edit_key(gold_edit)) {
                wtp += w;
            } else {
                wfn += w;
            }
        }
        let fp = hyp_edits
            .iter()
            .filter(|e| !gold_keys.contains(&edit_key(e)))
            .count() as f64;
        let triple = (wtp, fp, wfn);
        let f = f_from_weighted(&triple, beta);
        if best.as_ref().map_or(true, |(best_f, _)| f > *best_f) {
            best = Some((f, triple));
        }
    }
    Ok(best.unwrap().1)
}

/// Difficulty-weighted F: matched gold edits add their weight to tp,
/// missed gold edits add their weight to fn, spurious hypothesis edits
/// count 1 toward fp. Annotator selection mirrors [`m2_counts`].
pub fn gotoscorer(
    hyp_edits: &[Edit],
    annotations: &[GoldAnnotation],
    table: &DifficultyTable,
    beta: f64,
) -> Result<f64> {
    let triple = gotoscorer_weighted_counts(hyp_edits, annotations, table, beta)?;
    Ok(f_from_weighted(&triple, beta))
}

/// Builds the difficulty table over every gold edit of every annotator:
/// weight = 1 - (systems producing the edit exactly) / (total systems).
pub fn build_difficulty_table(
    system_edits: &BTreeMap<String, BTreeMap<String, Vec<Edit>>>,
    annotations: &[GoldAnnotation],
) -> Result<DifficultyTable> {
    let total = system_edits.len();
    if total == 0 {
        return Err(Error::validation(
            "difficulty table needs at least one system",
        ));
    }
    let mut weights = BTreeMap::new();
    for ann in annotations {
        for edit in &ann.edits {
            let key = (
                ann.sentence_id.clone(),
                edit.start,
                edit.end,
                edit.replacement.clone(),
            );
            if weights.contains_key(&key) {
                continue;
            }
            let correcting = system_edits
                .values()
                .filter(|per_sentence| {
                    per_sentence
                        .get(&ann.sentence_id)
                        .is_some_and(|edits| edits.iter().any(|e| edit_key(e) == edit_key(edit)))
                })
                .count();
            weights.insert(key, 1.0 - correcting as f64 / total as f64);
        }
    }
    Ok(DifficultyTable {
        weights,
        total_systems: total,
    })
}

/// Arithmetic mean of sentence-level scores; the system-level stand-in
/// for metrics without a native corpus score.
pub fn system_score_from_sentences(sentence_scores: &BTreeMap<String, f64>) -> Result<f64> {
    if sentence_scores.is_empty() {
        return Err(Error::validation("no sentence scores to average"));
    }
    Ok(sentence_scores.values().sum::<f64>() / sentence_scores.len() as f64)
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], i64> {
    let mut counts: HashMap<&[String], i64> = HashMap::new();
    if n > 0 && tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// N-gram match statistics for one (hypothesis, reference) pair,
/// precomputed so iterations only combine integers.
struct PairStats {
    numer: Vec<i64>,
    denom: Vec<i64>,
    ref_len: usize,
}

fn pair_stats(
    source: &[String],
    hypothesis: &[String],
    reference: &[String],
    max_n: usize,
) -> PairStats {
    let mut numer = Vec::with_capacity(max_n);
    let mut denom = Vec::with_capacity(max_n);
    for n in 1..=max_n {
        let hyp_counts = ngram_counts(hypothesis, n);
        let ref_counts = ngram_counts(reference, n);
        let src_counts = ngram_counts(source, n);
        let mut matched = 0i64;
        let mut penalty = 0i64;
        for (gram, &c_hyp) in &hyp_counts {
            let c_ref = ref_counts.get(gram).copied().unwrap_or(0);
            let c_src = src_counts.get(gram).copied().unwrap_or(0);
            matched += c_hyp.min(c_ref);
            penalty += (c_hyp.min(c_src) - c_hyp.min(c_ref)).max(0);
        }
        numer.push((matched - penalty).max(0));
        denom.push(hyp_counts.values().sum());
    }
    PairStats {
        numer,
        denom,
        ref_len: reference.len(),
    }
}

fn iteration_score(numer: &[i64], denom: &[i64], hyp_len: usize, ref_len: usize) -> f64 {
    if hyp_len == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for (&num, &den) in numer.iter().zip(denom) {
        if num <= 0 || den <= 0 {
            return 0.0;
        }
        log_sum += (num as f64 / den as f64).ln();
    }
    let brevity = (1.0 - ref_len as f64 / hyp_len as f64).exp().min(1.0);
    brevity * (log_sum / numer.len() as f64).exp()
}

/// Seeded per-sentence reference draws. Every sentence gets its own RNG
/// stream derived from the config seed and the sentence ordinal, so
/// scores are reproducible and independent of evaluation order.
fn reference_draws(
    cfg: &MetricConfig,
    ordinal: u64,
    n_refs: usize,
    iterations: usize,
) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    rng.set_stream(ordinal);
    (0..iterations).map(|_| rng.gen_range(0..n_refs)).collect()
}

/// Sentence GLEU: the mean over seeded iterations, each sampling one
/// reference uniformly. With a single reference every iteration is
/// identical, so exactly one is run.
pub fn gleu_sentence(
    source: &[String],
    hypothesis: &[String],
    references: &[Tokens],
    cfg: &MetricConfig,
) -> Result<f64> {
    gleu_sentence_at(source, hypothesis, references, cfg, 0)
}

/// [`gleu_sentence`] with an explicit sentence ordinal selecting the RNG
/// stream; [`gleu_corpus`] uses this so a one-sentence corpus scores
/// identically to the standalone call.
pub fn gleu_sentence_at(
    source: &[String],
    hypothesis: &[String],
    references: &[Tokens],
    cfg: &MetricConfig,
    ordinal: u64,
) -> Result<f64> {
    if references.is_empty() {
        return Err(Error::validation("gleu: at least one reference required"));
    }
    if hypothesis.is_empty() {
        return Ok(0.0);
    }
    let stats: Vec<PairStats> = references
        .iter()
        .map(|r| pair_stats(source, hypothesis, r, cfg.gleu_max_n))
        .collect();
    let iterations = if references.len() == 1 {
        1
    } else {
        cfg.gleu_iterations.max(1)
    };
    let draws = reference_draws(cfg, ordinal, references.len(), iterations);
    let total: f64 = draws
        .iter()
        .map(|&r| {
            let s = &stats[r];
            iteration_score(&s.numer, &s.denom, hypothesis.len(), s.ref_len)
        })
        .sum();
    Ok(total / iterations as f64)
}

/// Corpus GLEU per system: within each iteration the n-gram counts are
/// summed over sentences before the geometric mean (BLEU-style), then the
/// iteration scores are averaged.
pub fn gleu_corpus(
    outputs: &[SystemOutput],
    corpus: &[ContextedSentence],
    references: &BTreeMap<String, Vec<Tokens>>,
    cfg: &MetricConfig,
) -> Result<BTreeMap<String, f64>> {
    if corpus.is_empty() {
        return Err(Error::validation("gleu_corpus: empty corpus"));
    }
    let ref_lists: Vec<&Vec<Tokens>> = corpus
        .iter()
        .map(|s| {
            references
                .get(&s.id)
                .filter(|r| !r.is_empty())
                .ok_or_else(|| {
                    Error::validation(format!("gleu_corpus: no reference for sentence {}", s.id))
                })
        })
        .collect::<Result<_>>()?;

    let iterations = if ref_lists.iter().all(|r| r.len() == 1) {
        1
    } else {
        cfg.gleu_iterations.max(1)
    };
    let draws: Vec<Vec<usize>> = ref_lists
        .iter()
        .enumerate()
        .map(|(ordinal, refs)| reference_draws(cfg, ordinal as u64, refs.len(), iterations))
        .collect();

    let mut out = BTreeMap::new();
    for output in outputs {
        let mut per_sentence: Vec<(usize, Vec<PairStats>)> = Vec::with_capacity(corpus.len());
        for (sentence, refs) in corpus.iter().zip(&ref_lists) {
            let hyp = output.hypothesis(&sentence.id)?;
            let stats = refs
                .iter()
                .map(|r| pair_stats(&sentence.source, hyp, r, cfg.gleu_max_n))
                .collect();
            per_sentence.push((hyp.len(), stats));
        }
        let mut total = 0.0;
        for iter in 0..iterations {
            let mut numer = vec![0i64; cfg.gleu_max_n];
            let mut denom = vec![0i64; cfg.gleu_max_n];
            let mut hyp_len = 0usize;
            let mut ref_len = 0usize;
            for (ordinal, (h_len, stats)) in per_sentence.iter().enumerate() {
                let chosen = &stats[draws[ordinal][iter]];
                for n in 0..cfg.gleu_max_n {
                    numer[n] += chosen.numer[n];
                    denom[n] += chosen.denom[n];
                }
                hyp_len += h_len;
                ref_len += chosen.ref_len;
            }
            total += iteration_score(&numer, &denom, hyp_len, ref_len);
        }
        out.insert(output.system_name.clone(), total / iterations as f64);
    }
    Ok(out)
}
