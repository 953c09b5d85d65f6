//! Loading, validation, and subsetting of evaluation inputs: contexted
//! sentences, per-system hypotheses, gold edit annotations in M² format,
//! human pairwise judgments, and externally computed metric scores.
//!
//! All inputs are pre-tokenized and whitespace-separated; nothing here
//! re-tokenizes. Loaders are strict: malformed rows fail with the file
//! and line number rather than being skipped.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::align::Edit;
use crate::error::{Error, Result};

pub type Tokens = Vec<String>;

fn tokenize(s: &str) -> Tokens {
    s.split_whitespace().map(str::to_string).collect()
}

/// A source sentence with its preceding/following essay sentences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextedSentence {
    pub id: String,
    pub previous: Tokens,
    pub source: Tokens,
    pub following: Tokens,
}

#[derive(Serialize, Deserialize)]
struct SentenceRow {
    id: String,
    #[serde(default)]
    previous: String,
    source: String,
    #[serde(default)]
    following: String,
}

/// One system's hypotheses, keyed by sentence id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemOutput {
    pub system_name: String,
    pub hypotheses: BTreeMap<String, Tokens>,
}

impl SystemOutput {
    pub fn hypothesis(&self, sentence_id: &str) -> Result<&Tokens> {
        self.hypotheses.get(sentence_id).ok_or_else(|| {
            Error::validation(format!(
                "system {}: no hypothesis for sentence {sentence_id}",
                self.system_name
            ))
        })
    }
}

/// One annotator's gold edit set for one sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldAnnotation {
    pub sentence_id: String,
    pub annotator_id: u32,
    pub edits: Vec<Edit>,
}

/// Which kind of human judgment a row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    EditBased,
    SentenceBased,
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Granularity::EditBased => write!(f, "edit_based"),
            Granularity::SentenceBased => write!(f, "sentence_based"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    AWins,
    Tie,
    BWins,
}

impl Verdict {
    pub fn flip(self) -> Self {
        match self {
            Verdict::AWins => Verdict::BWins,
            Verdict::Tie => Verdict::Tie,
            Verdict::BWins => Verdict::AWins,
        }
    }

    pub fn from_scores(a: i64, b: i64) -> Self {
        match a.cmp(&b) {
            std::cmp::Ordering::Greater => Verdict::AWins,
            std::cmp::Ordering::Equal => Verdict::Tie,
            std::cmp::Ordering::Less => Verdict::BWins,
        }
    }
}

/// The atom of both human data and judge output: one A-vs-B comparison
/// on one sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairwiseJudgment {
    pub sentence_id: String,
    pub granularity: Granularity,
    #[serde(rename = "annotator")]
    pub annotator_id: u32,
    pub system_a: String,
    pub system_b: String,
    pub verdict: Verdict,
}

#[derive(Deserialize)]
struct JudgmentRow {
    sentence_id: String,
    granularity: Granularity,
    #[serde(default)]
    annotator: u32,
    system_a: String,
    system_b: String,
    #[serde(default)]
    score_a: Option<i64>,
    #[serde(default)]
    score_b: Option<i64>,
    #[serde(default)]
    verdict: Option<Verdict>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsetName {
    Base,
    PlusFluent,
}

impl fmt::Display for SubsetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubsetName::Base => write!(f, "base"),
            SubsetName::PlusFluent => write!(f, "plus_fluent"),
        }
    }
}

/// A named, ordered system subset. The plus-fluent subset is always the
/// base subset plus exactly two extra systems.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetSpec {
    pub name: SubsetName,
    pub included_systems: Vec<String>,
}

impl SubsetSpec {
    pub fn base(systems: Vec<String>) -> Result<Self> {
        let unique: BTreeSet<&String> = systems.iter().collect();
        if unique.len() != systems.len() {
            return Err(Error::validation("base subset contains duplicate names"));
        }
        Ok(SubsetSpec {
            name: SubsetName::Base,
            included_systems: systems,
        })
    }

    pub fn plus_fluent(base: &SubsetSpec, fluent: [String; 2]) -> Result<Self> {
        if fluent[0] == fluent[1] {
            return Err(Error::validation("fluent extras must be distinct"));
        }
        for name in &fluent {
            if base.included_systems.contains(name) {
                return Err(Error::validation(format!(
                    "fluent extra {name} already in base subset"
                )));
            }
        }
        let mut included = base.included_systems.clone();
        included.extend(fluent);
        Ok(SubsetSpec {
            name: SubsetName::PlusFluent,
            included_systems: included,
        })
    }

    pub fn contains(&self, system: &str) -> bool {
        self.included_systems.iter().any(|s| s == system)
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Loads a JSONL corpus: one `{"id","previous","source","following"}`
/// object per line; `previous`/`following` may be empty strings.
pub fn load_corpus(path: &Path) -> Result<Vec<ContextedSentence>> {
    let text = read_to_string(path)?;
    let label = path.display().to_string();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let row: SentenceRow = serde_json::from_str(line)
            .map_err(|e| Error::parse(&label, lineno + 1, e.to_string()))?;
        let source = tokenize(&row.source);
        if source.is_empty() {
            return Err(Error::parse(&label, lineno + 1, "empty source sentence"));
        }
        if !seen.insert(row.id.clone()) {
            return Err(Error::parse(
                &label,
                lineno + 1,
                format!("duplicate sentence id {}", row.id),
            ));
        }
        out.push(ContextedSentence {
            id: row.id,
            previous: tokenize(&row.previous),
            source,
            following: tokenize(&row.following),
        });
    }
    Ok(out)
}

/// Writes a corpus back to JSONL; inverse of [`load_corpus`].
pub fn write_corpus(path: &Path, corpus: &[ContextedSentence]) -> Result<()> {
    let mut buf = String::new();
    for s in corpus {
        let row = SentenceRow {
            id: s.id.clone(),
            previous: s.previous.join(" "),
            source: s.source.join(" "),
            following: s.following.join(" "),
        };
        buf.push_str(&serde_json::to_string(&row)?);
        buf.push('\n');
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Loads one system's hypotheses: line i pairs with the i-th corpus
/// sentence. The system name is the file stem.
pub fn load_system_output(path: &Path, corpus: &[ContextedSentence]) -> Result<SystemOutput> {
    let text = read_to_string(path)?;
    let label = path.display().to_string();
    let system_name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::validation(format!("{label}: unusable file name")))?
        .to_string();
    let lines: Vec<&str> = text.lines().collect();
    if lines.len() != corpus.len() {
        return Err(Error::validation(format!(
            "{label}: {} hypothesis lines for {} corpus sentences",
            lines.len(),
            corpus.len()
        )));
    }
    let hypotheses = corpus
        .iter()
        .zip(&lines)
        .map(|(s, line)| (s.id.clone(), tokenize(line)))
        .collect();
    Ok(SystemOutput {
        system_name,
        hypotheses,
    })
}

/// Loads every `*.txt` file in `dir` as a system output, sorted by name.
pub fn load_system_outputs(dir: &Path, corpus: &[ContextedSentence]) -> Result<Vec<SystemOutput>> {
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "txt"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::validation(format!(
            "{}: no .txt system outputs found",
            dir.display()
        )));
    }
    paths.iter().map(|p| load_system_output(p, corpus)).collect()
}

/// Parses the standard M² text layout: an `S <tokens>` line opens a block,
/// followed by zero or more `A start end|||type|||repl|||...|||annotator`
/// lines. `noop` A-lines yield an empty edit list for their annotator.
fn parse_m2(text: &str, label: &str) -> Result<Vec<(Tokens, Vec<(u32, Vec<Edit>)>)>> {
    struct Block {
        source: Tokens,
        // Insertion-ordered so annotator 0 stays first.
        annotators: Vec<(u32, Vec<Edit>)>,
    }

    let mut blocks: Vec<Block> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("S ").or(if line == "S" {
            Some("")
        } else {
            None
        }) {
            blocks.push(Block {
                source: tokenize(rest),
                annotators: Vec::new(),
            });
        } else if let Some(rest) = line.strip_prefix("A ") {
            let block = blocks.last_mut().ok_or_else(|| {
                Error::parse(label, lineno + 1, "A-line before any S-line")
            })?;
            let fields: Vec<&str> = rest.split("|||").collect();
            if fields.len() < 3 {
                return Err(Error::parse(label, lineno + 1, "A-line needs span, type, and replacement"));
            }
            let span: Vec<&str> = fields[0].split_whitespace().collect();
            if span.len() != 2 {
                return Err(Error::parse(label, lineno + 1, "A-line span must be two integers"));
            }
            let start: i64 = span[0]
                .parse()
                .map_err(|_| Error::parse(label, lineno + 1, "non-integer span start"))?;
            let end: i64 = span[1]
                .parse()
                .map_err(|_| Error::parse(label, lineno + 1, "non-integer span end"))?;
            let kind = fields[1].trim();
            let annotator: u32 = match fields.get(5) {
                Some(f) => f.trim().parse().map_err(|_| {
                    Error::parse(label, lineno + 1, "non-integer annotator id")
                })?,
                None => 0,
            };
            let entry = match block.annotators.iter_mut().find(|(id, _)| *id == annotator) {
                Some((_, edits)) => edits,
                None => {
                    block.annotators.push((annotator, Vec::new()));
                    &mut block.annotators.last_mut().unwrap().1
                }
            };
            if kind.eq_ignore_ascii_case("noop") {
                continue;
            }
            if end < start {
                return Err(Error::parse(
                    label,
                    lineno + 1,
                    format!("edit end {end} before start {start}"),
                ));
            }
            if start < 0 {
                return Err(Error::parse(label, lineno + 1, "negative span on non-noop edit"));
            }
            let (start, end) = (start as usize, end as usize);
            if end > block.source.len() {
                return Err(Error::parse(
                    label,
                    lineno + 1,
                    format!(
                        "edit span {start}..{end} exceeds source length {}",
                        block.source.len()
                    ),
                ));
            }
            let repl_text = fields[2].trim();
            let replacement = if repl_text == crate::align::NONE_MARKER {
                Vec::new()
            } else {
                tokenize(repl_text)
            };
            let mut edit = Edit::new(start, end, replacement);
            edit.label = Some(kind.to_string()).filter(|k| !k.is_empty());
            if !edit.is_noop() {
                entry.push(edit);
            }
        } else {
            return Err(Error::parse(
                label,
                lineno + 1,
                format!("unrecognized line: {line}"),
            ));
        }
    }

    let mut out = Vec::with_capacity(blocks.len());
    for (idx, mut block) in blocks.into_iter().enumerate() {
        if block.annotators.is_empty() {
            block.annotators.push((0, Vec::new()));
        }
        for (annotator, edits) in &mut block.annotators {
            edits.sort_by(|a, b| (a.start, a.end).cmp(&(b.start, b.end)));
            for pair in edits.windows(2) {
                if pair[1].start < pair[0].end {
                    return Err(Error::validation(format!(
                        "{label}: block {idx} annotator {annotator}: overlapping edits \
                         {}..{} and {}..{}",
                        pair[0].start, pair[0].end, pair[1].start, pair[1].end
                    )));
                }
            }
        }
        out.push((block.source, block.annotators));
    }
    Ok(out)
}

/// Loads an M² file; sentence ids are the 0-based block indexes rendered
/// as strings. Use [`load_m2_for_corpus`] to key by corpus ids instead.
pub fn load_m2_file(path: &Path) -> Result<Vec<GoldAnnotation>> {
    let text = read_to_string(path)?;
    let blocks = parse_m2(&text, &path.display().to_string())?;
    Ok(blocks
        .into_iter()
        .enumerate()
        .flat_map(|(idx, (_, annotators))| {
            annotators.into_iter().map(move |(annotator_id, edits)| GoldAnnotation {
                sentence_id: idx.to_string(),
                annotator_id,
                edits,
            })
        })
        .collect())
}

/// Loads an M² file whose i-th block annotates the i-th corpus sentence;
/// block sources must match corpus sources token for token.
pub fn load_m2_for_corpus(
    path: &Path,
    corpus: &[ContextedSentence],
) -> Result<Vec<GoldAnnotation>> {
    let text = read_to_string(path)?;
    let label = path.display().to_string();
    let blocks = parse_m2(&text, &label)?;
    if blocks.len() != corpus.len() {
        return Err(Error::validation(format!(
            "{label}: {} S-blocks for {} corpus sentences",
            blocks.len(),
            corpus.len()
        )));
    }
    let mut out = Vec::new();
    for (sentence, (source, annotators)) in corpus.iter().zip(blocks) {
        if source != sentence.source {
            return Err(Error::validation(format!(
                "{label}: S-block tokens differ from corpus sentence {}",
                sentence.id
            )));
        }
        for (annotator_id, edits) in annotators {
            out.push(GoldAnnotation {
                sentence_id: sentence.id.clone(),
                annotator_id,
                edits,
            });
        }
    }
    Ok(out)
}

/// Serializes gold annotations back to M² text, grouped per sentence in
/// corpus order.
pub fn write_m2(
    path: &Path,
    corpus: &[ContextedSentence],
    annotations: &[GoldAnnotation],
) -> Result<()> {
    let mut by_sentence: BTreeMap<&str, Vec<&GoldAnnotation>> = BTreeMap::new();
    for ann in annotations {
        by_sentence.entry(&ann.sentence_id).or_default().push(ann);
    }
    let mut buf = String::new();
    for sentence in corpus {
        buf.push_str("S ");
        buf.push_str(&sentence.source.join(" "));
        buf.push('\n');
        for ann in by_sentence.get(sentence.id.as_str()).into_iter().flatten() {
            if ann.edits.is_empty() {
                buf.push_str(&format!(
                    "A -1 -1|||noop|||-NONE-|||REQUIRED|||-NONE-|||{}\n",
                    ann.annotator_id
                ));
                continue;
            }
            for e in &ann.edits {
                let label = e.label.as_deref().unwrap_or("UNK");
                let repl = if e.replacement.is_empty() {
                    crate::align::NONE_MARKER.to_string()
                } else {
                    e.replacement.join(" ")
                };
                buf.push_str(&format!(
                    "A {} {}|||{label}|||{repl}|||REQUIRED|||-NONE-|||{}\n",
                    e.start, e.end, ann.annotator_id
                ));
            }
        }
        buf.push('\n');
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Loads pairwise judgments from JSONL. Rows carry either an explicit
/// verdict or a `score_a`/`score_b` pair in 1..=5 (the verdict is then
/// derived by comparison). Systems must belong to `known_systems`.
pub fn load_judgments(
    path: &Path,
    known_systems: &BTreeSet<String>,
) -> Result<Vec<PairwiseJudgment>> {
    let text = read_to_string(path)?;
    let label = path.display().to_string();
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let row: JudgmentRow = serde_json::from_str(line)
            .map_err(|e| Error::parse(&label, lineno + 1, e.to_string()))?;
        for score in [row.score_a, row.score_b].into_iter().flatten() {
            if !(1..=5).contains(&score) {
                return Err(Error::parse(
                    &label,
                    lineno + 1,
                    format!("score {score} outside 1..=5"),
                ));
            }
        }
        let derived = match (row.score_a, row.score_b) {
            (Some(a), Some(b)) => Some(Verdict::from_scores(a, b)),
            (None, None) => None,
            _ => {
                return Err(Error::parse(
                    &label,
                    lineno + 1,
                    "score_a and score_b must be given together",
                ))
            }
        };
        let verdict = match (row.verdict, derived) {
            (Some(v), Some(d)) if v != d => {
                return Err(Error::parse(
                    &label,
                    lineno + 1,
                    "explicit verdict contradicts scores",
                ))
            }
            (Some(v), _) => v,
            (None, Some(d)) => d,
            (None, None) => {
                return Err(Error::parse(
                    &label,
                    lineno + 1,
                    "row needs a verdict or a score pair",
                ))
            }
        };
        if row.system_a == row.system_b {
            return Err(Error::parse(
                &label,
                lineno + 1,
                format!("system compared with itself: {}", row.system_a),
            ));
        }
        for system in [&row.system_a, &row.system_b] {
            if !known_systems.contains(system) {
                return Err(Error::parse(
                    &label,
                    lineno + 1,
                    format!("unknown system name {system}"),
                ));
            }
        }
        out.push(PairwiseJudgment {
            sentence_id: row.sentence_id,
            granularity: row.granularity,
            annotator_id: row.annotator,
            system_a: row.system_a,
            system_b: row.system_b,
            verdict,
        });
    }
    Ok(out)
}

/// Writes judgments to JSONL with explicit verdicts; inverse of
/// [`load_judgments`].
pub fn write_judgments(path: &Path, judgments: &[PairwiseJudgment]) -> Result<()> {
    let mut buf = String::new();
    for j in judgments {
        buf.push_str(&serde_json::to_string(j)?);
        buf.push('\n');
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Keeps only judgments whose systems are both in the subset, and only
/// the outputs of subset systems. Filtering is total: unknown names
/// simply match nothing.
pub fn select_subset(
    judgments: &[PairwiseJudgment],
    outputs: &[SystemOutput],
    spec: &SubsetSpec,
) -> (Vec<PairwiseJudgment>, Vec<SystemOutput>) {
    let judgments = judgments
        .iter()
        .filter(|j| spec.contains(&j.system_a) && spec.contains(&j.system_b))
        .cloned()
        .collect();
    let outputs = outputs
        .iter()
        .filter(|o| spec.contains(&o.system_name))
        .cloned()
        .collect();
    (judgments, outputs)
}

/// Loads per-(system, sentence) scores of an externally computed metric.
pub fn load_external_scores(path: &Path) -> Result<BTreeMap<(String, String), f64>> {
    #[derive(Deserialize)]
    struct Row {
        system: String,
        sentence_id: String,
        score: f64,
    }

    let text = read_to_string(path)?;
    let label = path.display().to_string();
    let mut out = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let row: Row = serde_json::from_str(line)
            .map_err(|e| Error::parse(&label, lineno + 1, e.to_string()))?;
        let key = (row.system, row.sentence_id);
        if let Some(prev) = out.get(&key) {
            if *prev != row.score {
                return Err(Error::parse(
                    &label,
                    lineno + 1,
                    format!(
                        "conflicting scores for ({}, {}): {prev} vs {}",
                        key.0, key.1, row.score
                    ),
                ));
            }
        }
        out.insert(key, row.score);
    }
    Ok(out)
}

/// Checks that every judgment's sentence id resolves to a corpus sentence.
pub fn validate_judgment_sentences(
    judgments: &[PairwiseJudgment],
    corpus: &[ContextedSentence],
) -> Result<()> {
    let ids: BTreeSet<&str> = corpus.iter().map(|s| s.id.as_str()).collect();
    for j in judgments {
        if !ids.contains(j.sentence_id.as_str()) {
            return Err(Error::validation(format!(
                "judgment references unknown sentence {}",
                j.sentence_id
            )));
        }
    }
    Ok(())
}
