//! A satisfiability solver for a fragment of finite set theory: extensional
//! sets, binary relations and partial functions as sets of ordered pairs,
//! integer intervals, set cardinality, linear integer arithmetic and
//! restricted universal quantifiers.
//!
//! The fragment is expressive enough to encode arrays (`arr(A,n)` states
//! that `A` is a set of index/value pairs forming a function with domain
//! `[1,n]`), so the solver doubles as a decision procedure for a class of
//! array properties: verification conditions can be discharged by proving
//! their negations unsatisfiable, and ground solutions serve as test cases.
//!
//! Organization:
//! - [`term`]: the sorted term language and substitutions.
//! - [`formula`]: constraints, quantifiers, derived constraints, negation.
//! - [`eval`]: the ground-evaluation semantics (also the testing oracle).
//! - [`rewrite`]: set unification and the constraint rewriting engine.
//! - [`lia`]: the linear-integer-arithmetic sub-solver and the cardinality
//!   (Venn region) encoding.
//! - [`solver`]: the full solving pipeline and answer enumeration.
//! - [`parser`]: the concrete query syntax.
//! - [`cli`]: the interactive REPL and batch runner.

pub mod eval;
pub mod lia;
pub mod rewrite;
pub mod formula;
pub mod term;
