//! A workbench for the applied pi calculus: sorted signatures with equational
//! theories given by rewrite rules and permutative equations, processes with
//! active substitutions executed over configurations, frames with static
//! equivalence, and bounded labelled-bisimilarity checking.

pub mod config;
pub mod equivalence;
pub mod error;
pub mod frontend;
pub mod pretty;
pub mod process;
pub mod rewriting;
pub mod semantics;
pub mod statics;
pub mod terms;

#[cfg(test)]
pub(crate) mod testutil;

pub use config::{compose_subst, frame_of, to_config, Configuration, Frame};
pub use error::{Error, Result};
pub use frontend::{parse_model, parse_process_in, parse_term_in, Model, Query};
pub use process::{ExtendedProcess, Process, SortContext};
pub use rewriting::{
    check_convergence, critical_pairs, eq_mod, normalize, ConvergenceReport, PermEquation,
    RewriteRule, TheorySpec,
};
pub use semantics::{
    barb, internal_steps, labelled_steps_refined, labelled_steps_simple, resolve, Label,
    TransitionResult,
};
pub use statics::{
    deduce, enum_recipes, simplify_frame, static_equiv, test_holds, EquivVerdict, RecipeBudget,
};
pub use terms::{
    apply_subst, match_term, unify, FunSymbol, Name, Signature, Sort, Substitution, Term, Var,
};
pub use equivalence::{bisim, mac_translate, trace_search, BisimConfig, BisimVerdict, Trace};
