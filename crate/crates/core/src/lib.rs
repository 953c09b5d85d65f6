//! Meta-evaluation toolkit for grammatical error correction (GEC).
//!
//! The pipeline:
//!
//! 1. [`corpus`] loads tokenized sentences with essay context, per-system
//!    hypotheses, gold edit annotations (M² format), human pairwise
//!    judgments, and externally computed metric scores.
//! 2. [`align`] extracts edits from hypotheses via token-level Levenshtein
//!    alignment.
//! 3. [`metrics`] scores hypotheses with M²-style F-beta, GLEU, and the
//!    difficulty-weighted GoToScorer.
//! 4. [`judge`] prompts a chat-completion model (or a deterministic mock)
//!    to score corrections 1-5 and turns the scores into pairwise judgments.
//! 5. [`rating`] converts pairwise judgments into TrueSkill ratings,
//!    Expected Wins, and bootstrap rank ranges.
//! 6. [`metaeval`] measures agreement between metric scores and human
//!    judgments: Pearson r and Spearman rho at the system level, Accuracy
//!    and Kendall tau at the sentence level, plus consecutive-window
//!    analysis.
//!
//! The `gecmeta` binary exposes all stages as subcommands; see [`cli`].

pub mod align;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod fixture;
pub mod judge;
pub mod metaeval;
pub mod metrics;
pub mod rating;

pub use error::{Error, Result};
