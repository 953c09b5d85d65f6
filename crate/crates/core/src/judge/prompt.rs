//! Prompt construction and response parsing for the 1-5 scoring task.
//!
//! A prompt has four parts: the task paragraph (with an optional criterion
//! sentence appended), a `# context` block with the previous/source/
//! following sentences on one line each, a `# targets` block with one
//! correction per line (edit-based targets render their edits inline as
//! `[old->new]`), and a `# output format` block demanding a bare JSON
//! object `{"scores": [...]}`.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::align::{render_with_edits, Edit};
use crate::corpus::{ContextedSentence, Granularity, Tokens};
use crate::error::{Error, Result};

/// Evaluation focus appended to the task paragraph. Difficulty and impact
/// apply to edit-based prompts; grammaticality, fluency, and meaning
/// preservation to sentence-based ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    None,
    Difficulty,
    Impact,
    Grammaticality,
    Fluency,
    MeaningPreservation,
}

impl Criterion {
    /// The exact sentence appended to the end of the first paragraph.
    pub fn sentence(self) -> Option<&'static str> {
        match self {
            Criterion::None => None,
            Criterion::Difficulty => Some(
                "Please evaluate each edit in the target with a focus on the difficulty of corrections.",
            ),
            Criterion::Impact => Some(
                "Please evaluate each edit in the target with a focus on its impact on the sentence.",
            ),
            Criterion::Grammaticality => Some(
                "Please evaluate each target with a focus on the grammaticality of the sentence.",
            ),
            Criterion::Fluency => Some(
                "Please evaluate each target with a focus on the fluency of the sentence.",
            ),
            Criterion::MeaningPreservation => Some(
                "Please evaluate each target with a focus on preserving the meaning between each target and the source, which is the middle sentence in the context.",
            ),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Criterion::None => "none",
            Criterion::Difficulty => "difficulty",
            Criterion::Impact => "impact",
            Criterion::Grammaticality => "grammaticality",
            Criterion::Fluency => "fluency",
            Criterion::MeaningPreservation => "meaning_preservation",
        }
    }
}

/// Shape of one judging prompt: granularity, criterion, and score scale.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub granularity: Granularity,
    pub criterion: Criterion,
    pub max_targets: usize,
    pub score_min: i64,
    pub score_max: i64,
}

impl PromptSpec {
    pub fn new(granularity: Granularity, criterion: Criterion) -> Result<Self> {
        let spec = PromptSpec {
            granularity,
            criterion,
            max_targets: 5,
            score_min: 1,
            score_max: 5,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.criterion {
            Criterion::None => true,
            Criterion::Difficulty | Criterion::Impact => {
                self.granularity == Granularity::EditBased
            }
            Criterion::Grammaticality | Criterion::Fluency | Criterion::MeaningPreservation => {
                self.granularity == Granularity::SentenceBased
            }
        };
        if !ok {
            return Err(Error::validation(format!(
                "criterion {} does not apply to {} prompts",
                self.criterion.label(),
                self.granularity
            )));
        }
        if self.max_targets == 0 || self.max_targets > 5 {
            return Err(Error::validation("max_targets must lie in 1..=5"));
        }
        if self.score_min >= self.score_max {
            return Err(Error::validation("score_min must be below score_max"));
        }
        Ok(())
    }
}

/// One correction to score: the producing system, its hypothesis, and the
/// edits extracted against the source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTarget {
    pub system: String,
    pub hypothesis: Tokens,
    pub edits: Vec<Edit>,
}

/// Builds the full prompt text. Pure: identical inputs give byte-identical
/// prompts.
pub fn build_prompt(
    sentence: &ContextedSentence,
    targets: &[PromptTarget],
    spec: &PromptSpec,
) -> Result<String> {
    spec.validate()?;
    if targets.is_empty() {
        return Err(Error::validation("build_prompt: no targets"));
    }
    if targets.len() > spec.max_targets {
        return Err(Error::validation(format!(
            "build_prompt: {} targets exceed max_targets {}",
            targets.len(),
            spec.max_targets
        )));
    }

    let task_noun = match spec.granularity {
        Granularity::EditBased => "edits",
        Granularity::SentenceBased => "sentences",
    };
    let score_noun = match spec.granularity {
        Granularity::EditBased => "the quality of the edits",
        Granularity::SentenceBased => "the quality of the sentence",
    };

    let mut prompt = String::new();
    prompt.push_str(&format!(
        "The goal of this task is to rank the presented targets based on the quality of the {task_noun}.\n"
    ));
    prompt.push_str(
        "The context consists of three sentences from an essay written by an English learner.\n",
    );
    prompt.push_str(&format!(
        "After reading the context to understand the flow, please assign a score from a minimum of {} point to a maximum of {} points to each target based on {score_noun} (note that you can assign the same score multiple times).\n",
        spec.score_min, spec.score_max
    ));
    if let Some(line) = spec.criterion.sentence() {
        prompt.push_str(line);
        prompt.push('\n');
    }

    prompt.push_str("\n# context\n");
    prompt.push_str(&sentence.previous.join(" "));
    prompt.push('\n');
    prompt.push_str(&sentence.source.join(" "));
    prompt.push('\n');
    prompt.push_str(&sentence.following.join(" "));
    prompt.push('\n');

    prompt.push_str("\n# targets\n");
    for target in targets {
        let line = match spec.granularity {
            Granularity::EditBased => render_with_edits(&sentence.source, &target.edits)?,
            Granularity::SentenceBased => target.hypothesis.join(" "),
        };
        prompt.push_str(&line);
        prompt.push('\n');
    }

    prompt.push_str("\n# output format\n");
    prompt.push_str(&format!(
        "Return only a JSON object of the form {{\"scores\": [s1, ..., sN]}} where each si is an integer from {} to {}.\n",
        spec.score_min, spec.score_max
    ));
    Ok(prompt)
}

/// Hex SHA-256 of the prompt text; the cache and record key.
pub fn prompt_hash(prompt: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(prompt.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn integer_scores(value: &serde_json::Value) -> Option<Vec<i64>> {
    let array = value.as_array()?;
    let mut out = Vec::with_capacity(array.len());
    for item in array {
        let score = match (item.as_i64(), item.as_f64()) {
            (Some(i), _) => i,
            (None, Some(f)) if f.fract() == 0.0 => f as i64,
            _ => return None,
        };
        out.push(score);
    }
    Some(out)
}

/// Extracts the first JSON object containing a "scores" key and validates
/// arity and bounds. Surrounding prose is tolerated; wrong arity or
/// out-of-bounds values are errors so the caller can retry once, never
/// silently clamp.
pub fn parse_response(raw: &str, expected_n: usize, spec: &PromptSpec) -> Result<Vec<i64>> {
    for (idx, _) in raw.char_indices().filter(|(_, c)| *c == '{') {
        let mut stream =
            serde_json::Deserializer::from_str(&raw[idx..]).into_iter::<serde_json::Value>();
        let Some(Ok(value)) = stream.next() else {
            continue;
        };
        let Some(scores_value) = value.get("scores") else {
            continue;
        };
        let Some(scores) = integer_scores(scores_value) else {
            return Err(Error::Response(format!(
                "scores array holds non-integers: {scores_value}"
            )));
        };
        if scores.len() != expected_n {
            return Err(Error::Response(format!(
                "expected {expected_n} scores, got {}",
                scores.len()
            )));
        }
        for &s in &scores {
            if s < spec.score_min || s > spec.score_max {
                return Err(Error::Response(format!(
                    "score {s} outside {}..={}",
                    spec.score_min, spec.score_max
                )));
            }
        }
        return Ok(scores);
    }
    Err(Error::Response("no JSON object with a scores key".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Tokens {
        s.split_whitespace().map(str::to_string).collect()
    }

    fn spec(granularity: Granularity, criterion: Criterion) -> PromptSpec {
        PromptSpec::new(granularity, criterion).unwrap()
    }

    fn sentence() -> ContextedSentence {
        ContextedSentence {
            id: "s1".into(),
            previous: toks("These are the advantages that save works most of the time ."),
            source: toks(
                "In conclude , socia media benefits people in several ways but in the same time harms people .",
            ),
            following: toks("People should avoid the misuse of socia media and use it in the proper way ."),
        }
    }

    fn target(system: &str, hyp: &str, src: &Tokens) -> PromptTarget {
        let hypothesis = toks(hyp);
        let edits = crate::align::edits_between(src, &hypothesis);
        PromptTarget {
            system: system.into(),
            hypothesis,
            edits,
        }
    }

    #[test]
    fn criterion_pairing_is_enforced() {
        assert!(PromptSpec::new(Granularity::EditBased, Criterion::Difficulty).is_ok());
        assert!(PromptSpec::new(Granularity::EditBased, Criterion::Fluency).is_err());
        assert!(PromptSpec::new(Granularity::SentenceBased, Criterion::Impact).is_err());
        assert!(PromptSpec::new(Granularity::SentenceBased, Criterion::None).is_ok());
    }

    #[test]
    fn fluency_prompt_contains_exact_criterion_line() {
        let s = sentence();
        let t = vec![target(
            "sys",
            "In conclusion , social media benefits people in several ways but at the same time harms people .",
            &s.source,
        )];
        let prompt =
            build_prompt(&s, &t, &spec(Granularity::SentenceBased, Criterion::Fluency)).unwrap();
        assert!(prompt.contains(
            "Please evaluate each target with a focus on the fluency of the sentence.\n"
        ));
        assert!(prompt.contains("# context\n"));
        assert!(prompt.contains("# targets\n"));
        assert!(prompt.contains("# output format\n"));
    }

    #[test]
    fn edit_based_targets_carry_markers() {
        let s = sentence();
        let t = vec![target(
            "sys",
            "In conclusion , social media benefits people in several ways but at the same time harms people .",
            &s.source,
        )];
        let prompt =
            build_prompt(&s, &t, &spec(Granularity::EditBased, Criterion::None)).unwrap();
        assert!(prompt.contains("[conclude->conclusion]"), "{prompt}");
    }

    #[test]
    fn prompt_is_deterministic() {
        let s = sentence();
        let t = vec![target("sys", "In conclude , socia media benefits people in several ways but in the same time harms people .", &s.source)];
        let spec = spec(Granularity::SentenceBased, Criterion::None);
        let p1 = build_prompt(&s, &t, &spec).unwrap();
        let p2 = build_prompt(&s, &t, &spec).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(prompt_hash(&p1), prompt_hash(&p2));
    }

    #[test]
    fn zero_targets_is_an_error() {
        let s = sentence();
        assert!(build_prompt(&s, &[], &spec(Granularity::SentenceBased, Criterion::None)).is_err());
    }

    #[test]
    fn parse_clean_and_messy_responses() {
        let spec = spec(Granularity::SentenceBased, Criterion::None);
        // Hand-labeled messy response fixtures.
        let cases: Vec<(&str, usize, Option<Vec<i64>>)> = vec![
            (r#"{"scores":[5,3,3,4,1]}"#, 5, Some(vec![5, 3, 3, 4, 1])),
            (r#"Sure! {"scores":[2,2]}"#, 2, Some(vec![2, 2])),
            (r#"{"scores": [1, 2, 3]}"#, 3, Some(vec![1, 2, 3])),
            ("Here you go:\n```json\n{\"scores\": [4, 4]}\n```", 2, Some(vec![4, 4])),
            (r#"{"reasoning": "ok", "scores": [3]}"#, 1, Some(vec![3])),
            (r#"{"result": {"scores": [2, 5]}}"#, 2, Some(vec![2, 5])),
            (r#"{"scores": [4.0, 2.0]}"#, 2, Some(vec![4, 2])),
            (r#"The scores are {"scores":[1,1,1,1,1]} as requested."#, 5, Some(vec![1, 1, 1, 1, 1])),
            (r#"{} {"scores": [5]}"#, 1, Some(vec![5])),
            ("{\"scores\":\n  [3, 3]}", 2, Some(vec![3, 3])),
            (r#"{"Scores": [1]}"#, 1, None),
            (r#"{"scores":[9]}"#, 1, None),
            (r#"{"scores":[0]}"#, 1, None),
            (r#"{"scores":[2,3]}"#, 3, None),
            (r#"{"scores":"2,3"}"#, 2, None),
            (r#"{"scores":[2.5, 3]}"#, 2, None),
            ("no json at all", 1, None),
            ("{\"scores\": [", 1, None),
            (r#"[1, 2, 3]"#, 3, None),
            ("", 1, None),
        ];
        for (raw, n, expected) in cases {
            let got = parse_response(raw, n, &spec);
            match expected {
                Some(scores) => assert_eq!(got.unwrap(), scores, "raw = {raw:?}"),
                None => assert!(got.is_err(), "raw = {raw:?} parsed as {got:?}"),
            }
        }
    }

    #[test]
    fn nested_scores_object_is_found() {
        // The outer object has no "scores" key; scan continues to the
        // inner object.
        let spec = spec(Granularity::SentenceBased, Criterion::None);
        let raw = r#"{"outer": true, "inner": {"scores": [2, 4]}}"#;
        assert_eq!(parse_response(raw, 2, &spec).unwrap(), vec![2, 4]);
    }
}
