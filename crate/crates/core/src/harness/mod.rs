//! Problem generation and files, evaluation and lemma export.

mod evaluate;
mod generate;
mod lemmas;
mod problems;

pub use evaluate::{evaluate, EvalMode, EvalReport, ProblemOutcome, BUDGET_NOISE};
pub use generate::{generate_aim, generate_poly, generate_ra};
pub use lemmas::{emit_lemmas, verify_lemma, Lemma, TraceStep};
pub use problems::{ProblemEntry, ProblemSet};
