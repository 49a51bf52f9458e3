//! The solving pipeline: main rewriting loop with disequality elimination,
//! partition of irreducible stores, the cardinality/LIA decision at the end,
//! minimum-solution re-solving in the presence of quantifiers, answer
//! enumeration, solution checking and ground-solution generation.
//!
//! For an input formula Φ the solver computes
//!
//! ```text
//! Φ ← add 0 ≤ k for every size(·,k);
//! repeat Φ ← remove_neq(step_loop(Φ)) until fixpoint;   [main loop]
//! split Φ into Γ1 ∧ Γ2 ∧ Γ3;
//! if Γ3 is not true  → step_loop(solve_size_min(Γ1) ∧ Γ2 ∧ Γ3)
//! else               → solve_size(Γ1) ∧ Γ2
//! ```
//!
//! where Γ1 holds the integer constraints plus all `un`/`disj`/`size` atoms,
//! Γ2 the non-integer `∉`/`=`/`≠` residues, and Γ3 the quantifiers
//! (subset-of-interval constraints count as quantifiers via
//! `E ⊆ [k,m] ⟺ ∀x∈E: k ≤ x ≤ m`).
//!
//! Minimum-solution mode minimizes the sum of the cardinality variables,
//! binds every integer variable of Γ1 to its value at the optimum and
//! materializes each `size(E,k)` as a set of `k` pairwise-distinct fresh
//! elements. If the final loop then fails, the input is unsatisfiable: any
//! larger model would contain the minimal one, whose quantifier instances
//! already failed.

use crate::eval::{eval_ground, EvalError, Value};
use crate::formula::{
    check_formula_sorts, Atom, Binder, CmpOp, Formula, Library, QfFormula, Ruq, RuqBody,
};
use crate::lia::{
    encode, gen_size_leq, lia_decide_budget, lia_minimize_budget, LiaError, LiaResult, LinCon,
    LinOp, Objective, OptResult,
};
use crate::rewrite::{
    instantiate_ruq, remove_neq, step, store_irreducible, Budget, Ctx, RewriteError, Store,
    StepOutcome,
};
use crate::term::{IntLin, Sort, SortError, Substitution, Term, Var, VarGen};
use std::collections::BTreeSet;
use std::time::Duration;

/// Tunable limits and modes.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Rewrite steps across the whole search.
    pub step_budget: u64,
    /// Branch-and-bound nodes per LIA call.
    pub lia_node_budget: usize,
    /// Wall-clock limit.
    pub timeout: Option<Duration>,
    /// Ground witness search range for element values.
    pub ground_range: i64,
    /// Seed for randomized tie-breaking; the default strategy is fully
    /// deterministic and ignores it.
    pub seed: Option<u64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            step_budget: 4_000_000,
            lia_node_budget: 100_000,
            timeout: None,
            ground_range: 10,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SolveError {
    #[error("search budget exceeded")]
    Budget,
    #[error(transparent)]
    Sort(#[from] SortError),
    #[error(transparent)]
    Derived(#[from] crate::formula::DerivedError),
    #[error(transparent)]
    Lia(#[from] LiaError),
    #[error("quantifier body contains free set variable {0}")]
    RuqSetVar(String),
    #[error("answer completion failed: {0}")]
    Completion(String),
    #[error("ground witness search range exhausted (no witness with elements in -{0}..{0})")]
    GroundRangeExhausted(i64),
    #[error("evaluation error: {0}")]
    Eval(String),
}

impl From<RewriteError> for SolveError {
    fn from(e: RewriteError) -> Self {
        match e {
            RewriteError::Budget => SolveError::Budget,
            RewriteError::Derived(d) => SolveError::Derived(d),
        }
    }
}

/// One solution: bindings for the query variables plus the residual
/// irreducible constraints. Completing the residue (sets to ∅ or region
/// witnesses, integers to a LIA witness, elements to distinct constants)
/// yields a total solution of the original query.
#[derive(Debug, Clone)]
pub struct Answer {
    /// Query variables in input order with their solved terms; variables the
    /// solver left untouched are omitted.
    pub bindings: Vec<(Var, Term)>,
    /// Residual constraints, for display.
    pub residue: Vec<Formula>,
    /// The full irreducible store backing this answer.
    pub store: Store,
}

/// A solver instance: fresh-variable state, loaded library, options.
pub struct Solver {
    pub gen: VarGen,
    pub lib: Library,
    pub options: SolverOptions,
}

enum Frame {
    Main(Store),
    Post(Store),
}

/// Lazy depth-first answer stream.
pub struct Answers<'a> {
    solver: &'a mut Solver,
    stack: Vec<Frame>,
    budget: Budget,
    query_vars: Vec<Var>,
    poisoned: bool,
}

impl Solver {
    pub fn new(gen: VarGen, lib: Library, options: SolverOptions) -> Solver {
        Solver { gen, lib, options }
    }

    /// Solves a formula; `query_vars` are the variables whose bindings the
    /// answers report (typically the named variables of the query in input
    /// order).
    pub fn solve(&mut self, f: Formula, query_vars: Vec<Var>) -> Answers<'_> {
        let budget = Budget::new(self.options.step_budget, self.options.timeout);
        let mut stack = Vec::new();
        let mut poisoned = false;
        if let Err(e) = validate(&f) {
            // Surface the validation error as the first stream item.
            return Answers {
                solver: self,
                stack,
                budget,
                query_vars,
                poisoned: true,
            }
            .with_error(e);
        }
        let prepared = gen_size_leq(&f);
        stack.push(Frame::Main(Store::from_formula(prepared)));
        let _ = &mut poisoned;
        Answers {
            solver: self,
            stack,
            budget,
            query_vars,
            poisoned: false,
        }
    }
}

fn validate(f: &Formula) -> Result<(), SolveError> {
    check_formula_sorts(f)?;
    let mut ruqs = Vec::new();
    collect_ruqs(f, &mut ruqs);
    for r in ruqs {
        let mut body_vars = BTreeSet::new();
        match &r.body {
            RuqBody::Qf(q) => q.collect_vars(&mut body_vars),
            RuqBody::Nested(inner) => inner.collect_free_vars(&mut body_vars),
        }
        for v in r.binder.vars() {
            body_vars.remove(v);
        }
        for v in body_vars {
            if v.sort() == Some(Sort::Set) {
                return Err(SolveError::RuqSetVar(v.to_string()));
            }
        }
    }
    Ok(())
}

fn collect_ruqs<'a>(f: &'a Formula, out: &mut Vec<&'a Ruq>) {
    match f {
        Formula::Ruq(r) => out.push(r),
        Formula::And(ps) | Formula::Or(ps) => {
            for p in ps {
                collect_ruqs(p, out);
            }
        }
        _ => {}
    }
}

impl<'a> Answers<'a> {
    fn with_error(mut self, e: SolveError) -> Self {
        self.pending_error = Some(e);
        self
    }
}

impl<'a> Iterator for Answers<'a> {
    type Item = Result<Answer, SolveError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.poisoned {
            if let Some(e) = self.pending_error.take() {
                return Some(Err(e));
            }
            return None;
        }
        loop {
            let frame = self.stack.pop()?;
            match self.advance(frame) {
                Ok(Some(answer)) => return Some(Ok(answer)),
                Ok(None) => continue,
                Err(e) => {
                    self.poisoned = true;
                    return Some(Err(e));
                }
            }
        }
    }
}

impl<'a> Answers<'a> {
    fn ctx<'b>(gen: &'b mut VarGen, lib: &'b Library) -> Ctx<'b> {
        Ctx { gen, lib }
    }

    fn advance(&mut self, frame: Frame) -> Result<Option<Answer>, SolveError> {
        match frame {
            Frame::Main(store) => self.advance_main(store),
            Frame::Post(store) => self.advance_post(store),
        }
    }

    fn advance_main(&mut self, store: Store) -> Result<Option<Answer>, SolveError> {
        if store.failed {
            return Ok(None);
        }
        self.budget.tick()?;
        let mut ctx = Self::ctx(&mut self.solver.gen, &self.solver.lib);
        match step(&store, &mut ctx)? {
            StepOutcome::Applied { branches, .. } => {
                for b in branches.into_iter().rev() {
                    if !b.failed {
                        self.stack.push(Frame::Main(b));
                    }
                }
                Ok(None)
            }
            StepOutcome::Fixpoint => {
                // Disequality elimination may re-activate rewriting.
                if let Some(branches) = remove_neq(&store, &mut ctx) {
                    for b in branches.into_iter().rev() {
                        if !b.failed {
                            self.stack.push(Frame::Main(b));
                        }
                    }
                    return Ok(None);
                }
                debug_assert!(store_irreducible(&store));
                self.finish_main(store)
            }
        }
    }

    /// Handles an irreducible store at the end of the main loop.
    fn finish_main(&mut self, store: Store) -> Result<Option<Answer>, SolveError> {
        let mut store = store;
        route_integer_neqs(&mut store);
        if store.failed {
            return Ok(None);
        }
        let gamma3_empty = store.ruqs.is_empty()
            && !store.atoms.iter().any(|a| matches!(a, Atom::SubInt(..)));
        let set_atoms: Vec<Atom> = store
            .atoms
            .iter()
            .filter(|a| matches!(a, Atom::Un(..) | Atom::Disj(..) | Atom::Size(..)))
            .cloned()
            .collect();
        if gamma3_empty {
            // Pure decision: the cardinality encoding settles satisfiability.
            let (rows, _) = encode(&set_atoms, &store.lia, &mut self.solver.gen)?;
            match lia_decide_budget(&rows, self.solver.options.lia_node_budget)? {
                LiaResult::Unsat => Ok(None),
                LiaResult::Sat(_) => Ok(Some(self.make_answer(store))),
            }
        } else {
            // Minimum-solution mode.
            let (rows, _) = encode(&set_atoms, &store.lia, &mut self.solver.gen)?;
            let size_sum = store
                .atoms
                .iter()
                .filter_map(|a| match a {
                    Atom::Size(_, k) => Some(k.clone()),
                    _ => None,
                })
                .fold(IntLin::constant(0), |acc, k| acc.add_lin(&k));
            let opt = lia_minimize_budget(
                &rows,
                &Objective::Lin(size_sum),
                self.solver.options.lia_node_budget,
            )?;
            let assignment = match opt {
                OptResult::Unsat => return Ok(None),
                OptResult::Unbounded => {
                    // The objective is a sum of non-negative cardinalities.
                    return Err(SolveError::Lia(LiaError::Budget));
                }
                OptResult::Opt { assignment, .. } => assignment,
            };
            // Bind every integer variable of Γ1 to its value at the optimum.
            let mut post = store.clone();
            let mut gamma1_vars: BTreeSet<Var> = BTreeSet::new();
            for c in &store.lia {
                gamma1_vars.extend(c.lin.vars().cloned());
            }
            for a in &set_atoms {
                if let Atom::Size(_, k) = a {
                    gamma1_vars.extend(k.vars().cloned());
                }
            }
            for v in gamma1_vars {
                if let Some(val) = assignment.get(&v) {
                    post.bind(v, Term::int(*val));
                    if post.failed {
                        return Ok(None);
                    }
                }
            }
            materialize_sizes(&mut post, &mut self.solver.gen);
            if post.failed {
                return Ok(None);
            }
            convert_subint_to_ruqs(&mut post, &mut self.solver.gen);
            debug_assert!(
                !post
                    .atoms
                    .iter()
                    .any(|a| matches!(a, Atom::Size(e, _) if matches!(e, Term::Var(_)))),
                "size constraints must not survive into the final loop"
            );
            self.stack.push(Frame::Post(post));
            Ok(None)
        }
    }

    fn advance_post(&mut self, store: Store) -> Result<Option<Answer>, SolveError> {
        if store.failed {
            return Ok(None);
        }
        self.budget.tick()?;
        let mut ctx = Self::ctx(&mut self.solver.gen, &self.solver.lib);
        match step(&store, &mut ctx)? {
            StepOutcome::Applied { branches, .. } => {
                for b in branches.into_iter().rev() {
                    if !b.failed {
                        self.stack.push(Frame::Post(b));
                    }
                }
                Ok(None)
            }
            StepOutcome::Fixpoint => self.finish_post(store),
        }
    }

    /// Final feasibility check plus integer labeling of a store surviving
    /// the post-minimum loop.
    fn finish_post(&mut self, store: Store) -> Result<Option<Answer>, SolveError> {
        let mut store = store;
        route_integer_neqs(&mut store);
        if store.failed {
            return Ok(None);
        }
        match lia_decide_budget(&store.lia, self.solver.options.lia_node_budget)? {
            LiaResult::Unsat => Ok(None),
            LiaResult::Sat(witness) => {
                // Label the integer variables so answers print concrete
                // index values; re-normalize what the labels touched.
                let mut labeled = store.clone();
                for (v, val) in &witness {
                    labeled.bind(v.clone(), Term::int(*val));
                    if labeled.failed {
                        break;
                    }
                }
                if !labeled.failed {
                    let mut ctx = Self::ctx(&mut self.solver.gen, &self.solver.lib);
                    let mut budget = self.budget.clone();
                    if let Ok(mut stores) =
                        crate::rewrite::step_loop(labeled, &mut ctx, &mut budget)
                    {
                        self.budget = budget;
                        if let Some(first) = stores.drain(..).next() {
                            return Ok(Some(self.make_answer(first)));
                        }
                    }
                }
                // Labeling is a presentation step; fall back to the
                // unlabeled store rather than lose the answer.
                Ok(Some(self.make_answer(store)))
            }
        }
    }

    fn make_answer(&self, store: Store) -> Answer {
        let mut bindings = Vec::new();
        for v in &self.query_vars {
            let t = store.subst.apply(&Term::var(v.clone()));
            if t != Term::var(v.clone()) {
                bindings.push((v.clone(), t));
            }
        }
        let mut residue: Vec<Formula> = Vec::new();
        for a in &store.atoms {
            residue.push(Formula::Atom(a.clone()));
        }
        for c in &store.lia {
            let op = match c.op {
                LinOp::Le => CmpOp::Le,
                LinOp::Eq => CmpOp::Eq,
                LinOp::Ne => CmpOp::Ne,
            };
            residue.push(Formula::Atom(Atom::IntCmp(op, c.lin.clone())));
        }
        for r in &store.ruqs {
            residue.push(Formula::Ruq(r.clone()));
        }
        Answer {
            bindings,
            residue,
            store,
        }
    }
}

/// Disequalities between integer-viewable terms whose variables interact
/// with the linear partition belong in the linear partition.
fn route_integer_neqs(store: &mut Store) {
    let mut lia_vars: BTreeSet<Var> = BTreeSet::new();
    for c in &store.lia {
        lia_vars.extend(c.lin.vars().cloned());
    }
    for a in &store.atoms {
        if let Atom::Size(_, k) = a {
            lia_vars.extend(k.vars().cloned());
        }
    }
    let mut kept = Vec::with_capacity(store.atoms.len());
    let mut moved: Vec<IntLin> = Vec::new();
    for a in std::mem::take(&mut store.atoms) {
        if let Atom::Neq(x, y) = &a {
            if let (Some(lx), Some(ly)) = (x.as_int_lin(), y.as_int_lin()) {
                let d = lx.sub_lin(&ly);
                if d.vars().any(|v| lia_vars.contains(v)) {
                    moved.push(d);
                    continue;
                }
            }
        }
        kept.push(a);
    }
    store.atoms = kept;
    for d in moved {
        store.push_lia(CmpOp::Ne, d);
    }
}

/// Replaces each `size(E,k)` (with `k` now a constant) by `E = {n_1,…,n_k}`
/// with pairwise-distinct fresh elements.
fn materialize_sizes(store: &mut Store, gen: &mut VarGen) {
    loop {
        let target = store.atoms.iter().position(
            |a| matches!(a, Atom::Size(Term::Var(_), k) if k.as_constant().is_some()),
        );
        let Some(i) = target else { return };
        let Atom::Size(Term::Var(e), k) = store.atoms.remove(i) else {
            unreachable!()
        };
        let k = k.as_constant().unwrap();
        if k < 0 {
            store.fail();
            return;
        }
        let elems: Vec<Var> = (0..k).map(|_| gen.fresh(None)).collect();
        for (i, a) in elems.iter().enumerate() {
            for b in &elems[i + 1..] {
                store
                    .atoms
                    .push(Atom::Neq(Term::var(a.clone()), Term::var(b.clone())));
            }
        }
        let set = Term::set_from(elems.into_iter().map(Term::var).collect(), Term::EmptySet);
        store.bind(e, set);
        if store.failed {
            return;
        }
    }
}

/// `E ⊆ [k,m] ⟺ ∀x∈E: k ≤ x ≤ m`.
fn convert_subint_to_ruqs(store: &mut Store, gen: &mut VarGen) {
    let mut kept = Vec::with_capacity(store.atoms.len());
    for a in std::mem::take(&mut store.atoms) {
        if let Atom::SubInt(e, lo, hi) = a {
            let x = gen.fresh(Some(Sort::Int));
            let body = QfFormula::and(vec![
                QfFormula::Atom(Atom::le(lo.clone(), IntLin::var(x.clone()))),
                QfFormula::Atom(Atom::le(IntLin::var(x.clone()), hi.clone())),
            ]);
            match Ruq::new(Binder::Single(x), e, RuqBody::Qf(body)) {
                Ok(r) => store.ruqs.push(r),
                Err(_) => store.fail(),
            }
        } else {
            kept.push(a);
        }
    }
    store.atoms.extend(kept);
}

/// The Γ1/Γ2/Γ3 partition of an irreducible store, as used after the main
/// loop. Exposed for tests and diagnostics.
#[derive(Debug, Clone, Default)]
pub struct Partition {
    pub gamma1_atoms: Vec<Atom>,
    pub gamma1_lia: Vec<LinCon>,
    pub gamma2: Vec<Atom>,
    pub gamma3: Vec<Ruq>,
}

pub fn partition(store: &Store, gen: &mut VarGen) -> Partition {
    let mut out = Partition {
        gamma1_lia: store.lia.clone(),
        ..Partition::default()
    };
    for a in &store.atoms {
        match a {
            Atom::Un(..) | Atom::Disj(..) | Atom::Size(..) => out.gamma1_atoms.push(a.clone()),
            Atom::SubInt(e, lo, hi) => {
                let x = gen.fresh(Some(Sort::Int));
                let body = QfFormula::and(vec![
                    QfFormula::Atom(Atom::le(lo.clone(), IntLin::var(x.clone()))),
                    QfFormula::Atom(Atom::le(IntLin::var(x.clone()), hi.clone())),
                ]);
                out.gamma3
                    .push(Ruq::new(Binder::Single(x), e.clone(), RuqBody::Qf(body)).expect("fresh"));
            }
            other => out.gamma2.push(other.clone()),
        }
    }
    out.gamma3.extend(store.ruqs.iter().cloned());
    out
}

/// Completes an answer store to a total ground substitution:
/// region witnesses for sets under cardinality constraints, the empty set
/// for other set variables, a LIA witness for integer variables, and
/// pairwise-distinct fresh constants for the rest. Then the original
/// formula can be evaluated.
pub fn complete_answer(
    store: &Store,
    gen: &mut VarGen,
    lia_budget: usize,
    bound: Option<i64>,
) -> Result<Substitution, SolveError> {
    let mut sigma = store.subst.clone();
    let set_atoms: Vec<Atom> = store
        .atoms
        .iter()
        .filter(|a| matches!(a, Atom::Un(..) | Atom::Disj(..) | Atom::Size(..)))
        .cloned()
        .collect();
    let mut rows_base = store.lia.clone();
    // Disequalities over integer-viewable terms must be respected by the
    // integer witness.
    for a in &store.atoms {
        if let Atom::Neq(x, y) = a {
            if let (Some(lx), Some(ly)) = (x.as_int_lin(), y.as_int_lin()) {
                if let Ok(Some(c)) = LinCon::from_cmp(CmpOp::Ne, lx.sub_lin(&ly)) {
                    rows_base.push(c);
                }
            }
        }
    }
    let (rows, venn) = encode(&set_atoms, &rows_base, gen)?;
    let mut rows = rows;
    let mut int_vars: BTreeSet<Var> = BTreeSet::new();
    for c in &rows {
        int_vars.extend(c.lin.vars().cloned());
    }
    if let Some(b) = bound {
        // Restrict non-region variables to the ground search window.
        let region_vars: BTreeSet<Var> = venn
            .groups
            .iter()
            .flat_map(|g| g.regions.iter().map(|(_, v)| v.clone()))
            .collect();
        for v in &int_vars {
            if region_vars.contains(v) {
                continue;
            }
            rows.push(LinCon {
                op: LinOp::Le,
                lin: IntLin::var(v.clone()).add_const(-b),
            });
            rows.push(LinCon {
                op: LinOp::Le,
                lin: IntLin::var(v.clone()).scale(-1).add_const(-b),
            });
        }
    }
    let witness = match bound {
        // Ground mode prefers small-magnitude witnesses.
        Some(_) => {
            let targets: Vec<Var> = int_vars.iter().cloned().collect();
            match lia_minimize_budget(&rows, &Objective::AbsSum(targets), lia_budget)? {
                OptResult::Opt { assignment, .. } => assignment,
                OptResult::Unsat => {
                    // Distinguish window exhaustion from unsatisfiability.
                    return match lia_decide_budget(&rows_base, lia_budget)? {
                        LiaResult::Sat(_) => Err(SolveError::GroundRangeExhausted(
                            bound.unwrap_or_default(),
                        )),
                        LiaResult::Unsat => Err(SolveError::Completion(
                            "residual integer constraints unsatisfiable".into(),
                        )),
                    };
                }
                OptResult::Unbounded => {
                    return Err(SolveError::Completion("unbounded witness search".into()))
                }
            }
        }
        None => match lia_decide_budget(&rows, lia_budget)? {
            LiaResult::Sat(w) => w,
            LiaResult::Unsat => {
                return Err(SolveError::Completion(
                    "residual integer constraints unsatisfiable".into(),
                ))
            }
        },
    };
    // Materialize region witnesses with fresh distinct constants.
    let mut const_counter = 0usize;
    let mut fresh_const = || {
        const_counter += 1;
        Term::ur(&format!("e{}", const_counter), vec![])
    };
    let mut set_values: std::collections::BTreeMap<Var, Vec<Term>> = Default::default();
    for group in &venn.groups {
        for (pattern, rv) in &group.regions {
            let count = witness.get(rv).copied().unwrap_or(0).max(0);
            for _ in 0..count {
                let c = fresh_const();
                for (i, sv) in group.set_vars.iter().enumerate() {
                    if pattern & (1 << i) != 0 {
                        set_values.entry(sv.clone()).or_default().push(c.clone());
                    }
                }
            }
        }
    }
    let mut free: BTreeSet<Var> = store.constraint_vars();
    for v in store.subst.domain() {
        free.remove(v);
    }
    for v in free {
        if sigma.get(&v).is_some() {
            continue;
        }
        if let Some(elems) = set_values.get(&v) {
            sigma.bind(
                v.clone(),
                Term::set_from(elems.clone(), Term::EmptySet),
            );
        } else if let Some(val) = witness.get(&v) {
            sigma.bind(v.clone(), Term::int(*val));
        } else {
            match v.sort() {
                Some(Sort::Set) => sigma.bind(v.clone(), Term::EmptySet),
                Some(Sort::Int) => sigma.bind(v.clone(), Term::int(0)),
                Some(Sort::Pair) => {
                    let c = fresh_const();
                    sigma.bind(v.clone(), Term::pair(Term::int(0), c));
                }
                _ => {
                    let c = fresh_const();
                    sigma.bind(v.clone(), c);
                }
            }
        }
    }
    Ok(sigma)
}

/// Verifies an answer against the original formula: completes the residue
/// to a total ground valuation and evaluates.
pub fn check_solution(
    original: &Formula,
    answer: &Answer,
    gen: &mut VarGen,
    lia_budget: usize,
) -> Result<bool, SolveError> {
    let mut sigma = complete_answer(&answer.store, gen, lia_budget, None)?;
    // Bind any query variable the residue does not mention.
    for v in original.free_vars() {
        if sigma.get(&v).is_none() {
            bind_default(&mut sigma, &v);
        }
    }
    eval_ground(original, &sigma).map_err(|e| SolveError::Eval(e.to_string()))
}

fn bind_default(sigma: &mut Substitution, v: &Var) {
    match v.sort() {
        Some(Sort::Set) => sigma.bind(v.clone(), Term::EmptySet),
        Some(Sort::Int) => sigma.bind(v.clone(), Term::int(0)),
        Some(Sort::Pair) => sigma.bind(
            v.clone(),
            Term::pair(Term::int(0), Term::ur("d0", vec![])),
        ),
        _ => sigma.bind(v.clone(), Term::ur(&format!("d{}", v.id()), vec![])),
    }
}

/// A fully ground answer produced by the ground-solution mode.
#[derive(Debug, Clone)]
pub struct GroundAnswer {
    pub bindings: Vec<(Var, Term)>,
}

impl Solver {
    /// Ground-solution mode: post-processes each answer into a verified
    /// ground witness of the original formula.
    pub fn groundsol(
        &mut self,
        f: Formula,
        query_vars: Vec<Var>,
    ) -> impl Iterator<Item = Result<GroundAnswer, SolveError>> + '_ {
        let original = f.clone();
        let range = self.options.ground_range;
        let lia_budget = self.options.lia_node_budget;
        let vars = query_vars.clone();
        GroundAnswers {
            inner: Box::new(self.solve(f, query_vars)),
            original,
            vars,
            range,
            lia_budget,
        }
    }
}

struct GroundAnswers<'a> {
    inner: Box<Answers<'a>>,
    original: Formula,
    vars: Vec<Var>,
    range: i64,
    lia_budget: usize,
}

impl<'a> Iterator for GroundAnswers<'a> {
    type Item = Result<GroundAnswer, SolveError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let answer = match self.inner.next()? {
                Ok(a) => a,
                Err(e) => return Some(Err(e)),
            };
            // Completion needs fresh variables; borrow the solver through
            // the inner iterator.
            let gen = &mut self.inner.solver.gen;
            let sigma = match complete_answer(&answer.store, gen, self.lia_budget, Some(self.range))
            {
                Ok(s) => s,
                Err(SolveError::GroundRangeExhausted(r)) => {
                    return Some(Err(SolveError::GroundRangeExhausted(r)))
                }
                Err(e) => return Some(Err(e)),
            };
            let mut sigma = sigma;
            for v in self.original.free_vars() {
                if sigma.get(&v).is_none() {
                    bind_default(&mut sigma, &v);
                }
            }
            match eval_ground(&self.original, &sigma) {
                Ok(true) => {
                    let bindings = self
                        .vars
                        .iter()
                        .map(|v| (v.clone(), sigma.apply(&Term::var(v.clone()))))
                        .collect();
                    return Some(Ok(GroundAnswer { bindings }));
                }
                Ok(false) => {
                    return Some(Err(SolveError::Completion(
                        "completed answer does not satisfy the query".into(),
                    )))
                }
                Err(e) => return Some(Err(SolveError::Eval(e.to_string()))),
            }
        }
    }
}
