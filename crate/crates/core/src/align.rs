//! Token-level Levenshtein alignment between a source sentence and a
//! corrected hypothesis, plus extraction, application, and rendering of
//! the resulting edits.
//!
//! Costs are the plain Levenshtein ones: match 0, substitute/insert/delete 1.
//! The backtrace breaks ties by preferring match > substitute > delete >
//! insert, so edit extraction is deterministic. Maximal runs of consecutive
//! non-match operations are merged into single phrase edits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Marker used when rendering an empty side of an edit.
pub const NONE_MARKER: &str = "-NONE-";

/// A token-span replacement on the source sentence. `start..end` indexes
/// source tokens (end exclusive; `start == end` is an insertion point).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edit {
    pub start: usize,
    pub end: usize,
    pub replacement: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl Edit {
    pub fn new(start: usize, end: usize, replacement: Vec<String>) -> Self {
        Edit {
            start,
            end,
            replacement,
            label: None,
        }
    }

    /// True when the edit replaces nothing with nothing.
    pub fn is_noop(&self) -> bool {
        self.start == self.end && self.replacement.is_empty()
    }

    /// Matching key for gold-edit comparison: labels are ignored.
    pub fn key(&self) -> (usize, usize, &[String]) {
        (self.start, self.end, &self.replacement)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignOp {
    /// Source token `src` equals hypothesis token `hyp`.
    Match { src: usize, hyp: usize },
    /// Source token `src` replaced by hypothesis token `hyp`.
    Substitute { src: usize, hyp: usize },
    /// Hypothesis token `hyp` inserted before source position `src`.
    Insert { src: usize, hyp: usize },
    /// Source token `src` deleted.
    Delete { src: usize, hyp: usize },
}

impl AlignOp {
    fn is_match(self) -> bool {
        matches!(self, AlignOp::Match { .. })
    }

    fn cost(self) -> usize {
        if self.is_match() {
            0
        } else {
            1
        }
    }
}

/// An ordered operation sequence consuming the whole source and hypothesis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    pub ops: Vec<AlignOp>,
}

impl Alignment {
    /// Total edit cost (number of non-match operations).
    pub fn cost(&self) -> usize {
        self.ops.iter().map(|op| op.cost()).sum()
    }
}

/// Aligns `source` to `hypothesis` with minimal edit cost.
///
/// Deterministic: among cost-equal paths the backtrace prefers
/// match > substitute > delete > insert.
pub fn levenshtein_align(source: &[String], hypothesis: &[String]) -> Alignment {
    let n = source.len();
    let m = hypothesis.len();

    // dist[i][j] = cost of aligning source[..i] with hypothesis[..j].
    let mut dist = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in dist.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=m {
        dist[0][j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub_cost = usize::from(source[i - 1] != hypothesis[j - 1]);
            let diag = dist[i - 1][j - 1] + sub_cost;
            let del = dist[i - 1][j] + 1;
            let ins = dist[i][j - 1] + 1;
            dist[i][j] = diag.min(del).min(ins);
        }
    }

    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = dist[i][j];
        if i > 0 && j > 0 && source[i - 1] == hypothesis[j - 1] && dist[i - 1][j - 1] == here {
            ops.push(AlignOp::Match {
                src: i - 1,
                hyp: j - 1,
            });
            i -= 1;
            j -= 1;
        } else if i > 0 && j > 0 && dist[i - 1][j - 1] + 1 == here {
            ops.push(AlignOp::Substitute {
                src: i - 1,
                hyp: j - 1,
            });
            i -= 1;
            j -= 1;
        } else if i > 0 && dist[i - 1][j] + 1 == here {
            ops.push(AlignOp::Delete { src: i - 1, hyp: j });
            i -= 1;
        } else {
            ops.push(AlignOp::Insert { src: i, hyp: j - 1 });
            j -= 1;
        }
    }
    ops.reverse();
    Alignment { ops }
}

/// Merges maximal runs of non-match operations into phrase edits.
///
/// Applying the result to the aligned source reproduces the hypothesis.
pub fn extract_edits(alignment: &Alignment, hypothesis: &[String]) -> Vec<Edit> {
    // (src_start, src_end, hyp_start, hyp_end) of the current non-match run.
    let mut run: Option<(usize, usize, usize, usize)> = None;
    let mut edits: Vec<Edit> = Vec::new();
    let mut flush = |run: &mut Option<(usize, usize, usize, usize)>| {
        if let Some((s0, s1, h0, h1)) = run.take() {
            let edit = Edit::new(s0, s1, hypothesis[h0..h1].to_vec());
            if !edit.is_noop() {
                edits.push(edit);
            }
        }
    };

    for op in &alignment.ops {
        match *op {
            AlignOp::Match { .. } => flush(&mut run),
            AlignOp::Substitute { src, hyp } => {
                let r = run.get_or_insert((src, src, hyp, hyp));
                r.1 = src + 1;
                r.3 = hyp + 1;
            }
            AlignOp::Delete { src, hyp } => {
                let r = run.get_or_insert((src, src, hyp, hyp));
                r.1 = src + 1;
            }
            AlignOp::Insert { src, hyp } => {
                let r = run.get_or_insert((src, src, hyp, hyp));
                r.3 = hyp + 1;
            }
        }
    }
    flush(&mut run);
    edits
}

/// Validates that `edits` are sorted, non-overlapping, and in range.
fn check_edits(source_len: usize, edits: &[Edit]) -> Result<()> {
    let mut prev_end = 0usize;
    for (idx, e) in edits.iter().enumerate() {
        if e.start > e.end {
            return Err(Error::validation(format!(
                "edit {idx}: start {} > end {}",
                e.start, e.end
            )));
        }
        if e.end > source_len {
            return Err(Error::validation(format!(
                "edit {idx}: span {}..{} exceeds source length {source_len}",
                e.start, e.end
            )));
        }
        if idx > 0 && e.start < prev_end {
            return Err(Error::validation(format!(
                "edit {idx}: span {}..{} overlaps previous edit ending at {prev_end}",
                e.start, e.end
            )));
        }
        prev_end = e.end;
    }
    Ok(())
}

/// Rewrites `source` by applying sorted, non-overlapping edits.
pub fn apply_edits(source: &[String], edits: &[Edit]) -> Result<Vec<String>> {
    check_edits(source.len(), edits)?;
    let mut out = Vec::with_capacity(source.len());
    let mut cursor = 0usize;
    for e in edits {
        out.extend_from_slice(&source[cursor..e.start]);
        out.extend(e.replacement.iter().cloned());
        cursor = e.end;
    }
    out.extend_from_slice(&source[cursor..]);
    Ok(out)
}

/// Renders the corrected sentence with each edited region shown as
/// `[old->new]`, empty sides as `-NONE-`.
pub fn render_with_edits(source: &[String], edits: &[Edit]) -> Result<String> {
    check_edits(source.len(), edits)?;
    let mut parts: Vec<String> = Vec::new();
    let mut cursor = 0usize;
    for e in edits {
        parts.extend(source[cursor..e.start].iter().cloned());
        let old = if e.start == e.end {
            NONE_MARKER.to_string()
        } else {
            source[e.start..e.end].join(" ")
        };
        let new = if e.replacement.is_empty() {
            NONE_MARKER.to_string()
        } else {
            e.replacement.join(" ")
        };
        parts.push(format!("[{old}->{new}]"));
        cursor = e.end;
    }
    parts.extend(source[cursor..].iter().cloned());
    Ok(parts.join(" "))
}

/// Convenience: align, extract, and return the hypothesis edits.
pub fn edits_between(source: &[String], hypothesis: &[String]) -> Vec<Edit> {
    extract_edits(&levenshtein_align(source, hypothesis), hypothesis)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn identity_alignment_is_all_matches() {
        let a = levenshtein_align(&toks("a b c"), &toks("a b c"));
        assert_eq!(a.ops.len(), 3);
        assert!(a.ops.iter().all(|op| op.is_match()));
        assert_eq!(a.cost(), 0);
    }

    #[test]
    fn substitutions_in_learner_sentence() {
        let src = toks("In conclude , socia media");
        let hyp = toks("In conclusion , social media");
        let a = levenshtein_align(&src, &hyp);
        assert_eq!(a.cost(), 2);
        let edits = extract_edits(&a, &hyp);
        assert_eq!(
            edits,
            vec![
                Edit::new(1, 2, toks("conclusion")),
                Edit::new(3, 4, toks("social")),
            ]
        );
    }

    #[test]
    fn empty_source_yields_inserts() {
        let a = levenshtein_align(&[], &toks("x y"));
        assert_eq!(a.ops.len(), 2);
        assert!(a
            .ops
            .iter()
            .all(|op| matches!(op, AlignOp::Insert { .. })));
    }

    #[test]
    fn identity_extracts_no_edits() {
        let src = toks("a b c");
        assert!(edits_between(&src, &src).is_empty());
    }

    #[test]
    fn adjacent_delete_insert_merge_into_one_edit() {
        // "a b c" -> "a x y c": one merged span replacing "b".
        let src = toks("a b c");
        let hyp = toks("a x y c");
        let edits = edits_between(&src, &hyp);
        assert_eq!(edits, vec![Edit::new(1, 2, toks("x y"))]);
        assert_eq!(apply_edits(&src, &edits).unwrap(), hyp);
    }

    #[test]
    fn apply_identity_and_single_substitution() {
        let src = toks("a b");
        assert_eq!(apply_edits(&src, &[]).unwrap(), src);
        assert_eq!(
            apply_edits(&src, &[Edit::new(0, 1, toks("x"))]).unwrap(),
            toks("x b")
        );
    }

    #[test]
    fn apply_rejects_overlap_and_out_of_range() {
        let src = toks("a b c");
        let overlapping = vec![Edit::new(0, 2, toks("x")), Edit::new(1, 3, toks("y"))];
        assert!(apply_edits(&src, &overlapping).is_err());
        let out_of_range = vec![Edit::new(2, 4, toks("x"))];
        assert!(apply_edits(&src, &out_of_range).is_err());
    }

    #[test]
    fn render_plain_when_no_edits() {
        let src = toks("a b c");
        assert_eq!(render_with_edits(&src, &[]).unwrap(), "a b c");
    }

    #[test]
    fn render_marks_substitution() {
        let src = toks("In conclude , socia media benefits people");
        let edits = vec![Edit::new(1, 2, toks("conclusion"))];
        assert_eq!(
            render_with_edits(&src, &edits).unwrap(),
            "In [conclude->conclusion] , socia media benefits people"
        );
    }

    #[test]
    fn render_marks_deletion_with_none() {
        let src = toks("a x b");
        let edits = vec![Edit::new(1, 2, vec![])];
        assert_eq!(render_with_edits(&src, &edits).unwrap(), "a [x->-NONE-] b");
    }

    #[test]
    fn render_marks_insertion_with_none() {
        let src = toks("a b");
        let edits = vec![Edit::new(1, 1, toks("x"))];
        assert_eq!(render_with_edits(&src, &edits).unwrap(), "a [-NONE-->x] b");
    }

    #[test]
    fn extraction_round_trips_on_tricky_shapes() {
        let cases = [
            ("", "x y"),
            ("a b", ""),
            ("a b c d", "c d a b"),
            ("a a a", "a a"),
            ("x", "y z x"),
            ("the cat sat", "a cat sat down"),
        ];
        for (s, h) in cases {
            let src = toks(s);
            let hyp = toks(h);
            let edits = edits_between(&src, &hyp);
            assert_eq!(apply_edits(&src, &edits).unwrap(), hyp, "{s:?} -> {h:?}");
        }
    }
}
