//! The constraint rewriting engine: set unification and the specialized
//! rewriting procedures for each constraint kind, irreducibility detection,
//! and the elimination of disequalities over set variables.
//!
//! A store holds one conjunction under rewriting: primitive atoms split by
//! kind, quantifiers, a linear-arithmetic partition, and the substitution
//! accumulated so far. `step` picks the highest-priority reducible
//! constraint and applies its rule, producing one successor store per
//! disjunct. Rules marked in the paper trail below:
//!
//! - equality: the four-way extensional split of set unification, binding
//!   of variables with occurs check, interval elimination;
//! - membership / non-membership over variables, extensional sets and
//!   intervals;
//! - union: the element-extraction rule for a variable result, its mirror,
//!   element distribution into an extensional result, and interval
//!   elimination from any argument;
//! - disjointness, cardinality, pair tests;
//! - quantifiers: iteration over extensional domains and materialization of
//!   interval domains.
//!
//! Constraint selection order: equalities first, then membership,
//! non-membership, pair tests, size, union, disjointness, subset-interval,
//! and quantifiers last (processing quantifiers last is what makes the
//! whole loop terminate).

use crate::formula::{
    Atom, Binder, CmpOp, Formula, Ruq, RuqBody,
};
use crate::lia::{bounds_feasible, LinCon, LinOp};
use crate::term::{occurs, sort_of, IntLin, Sort, Substitution, Term, Var, VarGen};
use std::collections::{BTreeSet, VecDeque};
use std::fmt;

/// Names of the implemented rewrite rules; the equisatisfiability suite
/// must cover every entry.
pub const RULE_NAMES: &[&str] = &[
    "eq_identical",
    "eq_bind_var",
    "eq_occurs_fail",
    "eq_ext_ext",
    "eq_ext_empty",
    "eq_interval_empty",
    "eq_interval_ext",
    "eq_interval_interval",
    "eq_pair_pair",
    "eq_ur_ur",
    "eq_int_lia",
    "eq_sort_clash",
    "in_empty",
    "in_ext",
    "in_interval",
    "in_var",
    "in_occurs",
    "nin_empty",
    "nin_ext",
    "nin_interval",
    "nin_var_occurs",
    "neq_identical",
    "neq_pair_pair",
    "neq_ur_ur",
    "neq_int_lia",
    "neq_sort_clash",
    "neq_var_occurs",
    "neq_set_split",
    "un_same_args",
    "un_empty_first",
    "un_empty_second",
    "un_empty_result",
    "un_interval_arg",
    "un_interval_result",
    "un_ext_result",
    "un_ext_first",
    "un_ext_second",
    "disj_empty",
    "disj_same",
    "disj_ext",
    "disj_interval",
    "size_empty",
    "size_zero",
    "size_negative",
    "size_ext",
    "size_interval",
    "subint_empty",
    "subint_ext",
    "subint_interval",
    "pair_pair",
    "pair_var",
    "pair_other",
    "npair_pair",
    "npair_var_sorted",
    "npair_other",
    "ruq_empty",
    "ruq_ext",
    "ruq_interval",
    "neq_remove",
];

/// A conjunction under rewriting.
#[derive(Debug, Clone, Default)]
pub struct Store {
    /// Formulas not yet ingested (conjunctions flatten, disjunctions split).
    pub pending: VecDeque<Formula>,
    /// Set-ish atoms: membership, union, disjointness, size, disequalities…
    pub atoms: Vec<Atom>,
    /// Restricted universal quantifiers.
    pub ruqs: Vec<Ruq>,
    /// Linear integer constraints.
    pub lia: Vec<LinCon>,
    /// Solved equalities.
    pub subst: Substitution,
    pub failed: bool,
}

/// Outcome of one `step`.
#[derive(Debug)]
pub enum StepOutcome {
    /// No rule applies; the store is irreducible.
    Fixpoint,
    /// A rule fired, producing the disjuncts in order.
    Applied {
        rule: &'static str,
        branches: Vec<Store>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RewriteError {
    #[error("rewrite budget exceeded")]
    Budget,
    #[error(transparent)]
    Derived(#[from] crate::formula::DerivedError),
}

impl Store {
    pub fn from_formula(f: Formula) -> Store {
        let mut s = Store::default();
        s.pending.push_back(f);
        s
    }

    pub fn fail(&mut self) {
        self.failed = true;
        self.pending.clear();
        self.atoms.clear();
        self.ruqs.clear();
        self.lia.clear();
    }

    /// All variables mentioned by the store's live constraints.
    pub fn constraint_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        for a in &self.atoms {
            a.collect_vars(&mut out);
        }
        for r in &self.ruqs {
            r.collect_free_vars(&mut out);
        }
        for c in &self.lia {
            out.extend(c.lin.vars().cloned());
        }
        for f in &self.pending {
            f.collect_free_vars(&mut out);
        }
        out
    }

    /// The store viewed as a formula (bindings become equalities). Used by
    /// tests to compare solution sets.
    pub fn to_formula(&self) -> Formula {
        if self.failed {
            return Formula::False;
        }
        let mut parts: Vec<Formula> = Vec::new();
        for (v, t) in self.subst.iter() {
            parts.push(Formula::Atom(Atom::Eq(Term::var(v.clone()), t.clone())));
        }
        parts.extend(self.atoms.iter().map(|a| Formula::Atom(a.clone())));
        parts.extend(self.ruqs.iter().map(|r| Formula::Ruq(r.clone())));
        for c in &self.lia {
            let op = match c.op {
                LinOp::Le => CmpOp::Le,
                LinOp::Eq => CmpOp::Eq,
                LinOp::Ne => CmpOp::Ne,
            };
            parts.push(Formula::Atom(Atom::IntCmp(op, c.lin.clone())));
        }
        parts.extend(self.pending.iter().cloned());
        Formula::and(parts)
    }

    /// Adds a linear constraint, with cheap infeasibility detection.
    pub fn push_lia(&mut self, op: CmpOp, lin: IntLin) {
        match LinCon::from_cmp(op, lin) {
            Ok(Some(c)) => {
                if !self.lia.contains(&c) {
                    self.lia.push(c);
                }
            }
            Ok(None) => {}
            Err(()) => self.fail(),
        }
    }

    /// Binds `v ↦ t` and rewrites the whole store. Fails the branch on an
    /// occurs-check violation or a sort conflict.
    pub fn bind(&mut self, v: Var, t: Term) {
        let t = self.subst.apply(&t);
        if let Term::Var(w) = &t {
            if *w == v {
                return;
            }
        }
        if occurs(&v, &t) {
            self.fail();
            return;
        }
        match (v.sort(), sort_of(&t)) {
            (_, Err(_)) => {
                self.fail();
                return;
            }
            (Some(vs), Ok(Some(ts))) if !crate::term::sort_compatible(vs, ts) => {
                self.fail();
                return;
            }
            _ => {}
        }
        // A variable used in integer expressions can only take an integer
        // value.
        if self.var_in_int_position(&v) && t.as_int_lin().is_none() {
            self.fail();
            return;
        }
        let mut single = Substitution::new();
        single.bind(v.clone(), t.clone());
        self.subst.bind(v, t);
        self.apply_single(&single);
    }

    fn var_in_int_position(&self, v: &Var) -> bool {
        let in_lin = |lin: &IntLin| lin.vars().any(|w| w == v);
        self.lia.iter().any(|c| in_lin(&c.lin))
            || self.atoms.iter().any(|a| match a {
                Atom::Size(_, n) => in_lin(n),
                Atom::SubInt(_, lo, hi) => in_lin(lo) || in_lin(hi),
                Atom::IntCmp(_, lin) => in_lin(lin),
                _ => false,
            })
    }

    fn apply_single(&mut self, s: &Substitution) {
        let atoms = std::mem::take(&mut self.atoms);
        let mut requeue: Vec<Atom> = Vec::with_capacity(atoms.len());
        for a in atoms {
            requeue.push(a.apply_subst(s));
        }
        for a in requeue {
            self.ingest_atom(a);
            if self.failed {
                return;
            }
        }
        let ruqs = std::mem::take(&mut self.ruqs);
        self.ruqs = ruqs.into_iter().map(|r| r.apply_subst(s)).collect();
        let lia = std::mem::take(&mut self.lia);
        for c in lia {
            // Substituting into a linear expression keeps it linear; a
            // non-integer binding was rejected in `bind`.
            let lin = s.apply_lin(&c.lin);
            let op = match c.op {
                LinOp::Le => CmpOp::Le,
                LinOp::Eq => CmpOp::Eq,
                LinOp::Ne => CmpOp::Ne,
            };
            self.push_lia(op, lin);
            if self.failed {
                return;
            }
        }
        let pending = std::mem::take(&mut self.pending);
        self.pending = pending.into_iter().map(|f| f.apply_subst(s)).collect();
    }

    /// Files an atom into the right partition without rewriting it.
    pub fn ingest_atom(&mut self, a: Atom) {
        match a {
            Atom::IntCmp(op, lin) => self.push_lia(op, lin),
            Atom::Size(e, k) => {
                // size arguments are never negative
                self.push_lia(CmpOp::Le, k.scale(-1));
                if !self.failed {
                    self.atoms.push(Atom::Size(e, k));
                }
            }
            other => self.atoms.push(other),
        }
    }

    /// Quick incremental feasibility test of the linear partition.
    pub fn lia_bounds_ok(&self) -> bool {
        bounds_feasible(&self.lia)
    }
}

/// Rule application context: fresh variables and the derived-constraint
/// library.
pub struct Ctx<'a> {
    pub gen: &'a mut VarGen,
    pub lib: &'a crate::formula::Library,
}

/// Applies one rewrite step: ingests pending formulas (splitting at the
/// first disjunction) or rewrites the highest-priority reducible constraint.
pub fn step(store: &Store, ctx: &mut Ctx) -> Result<StepOutcome, RewriteError> {
    debug_assert!(!store.failed);
    let mut s = store.clone();
    // Ingest pending work first.
    while let Some(f) = s.pending.pop_front() {
        match f {
            Formula::True => {}
            Formula::False => {
                s.fail();
                return Ok(applied("ingest", vec![s]));
            }
            Formula::And(ps) => {
                for p in ps.into_iter().rev() {
                    s.pending.push_front(p);
                }
            }
            Formula::Or(ps) => {
                let mut branches = Vec::with_capacity(ps.len());
                for p in ps {
                    let mut b = s.clone();
                    b.pending.push_front(p);
                    branches.push(b);
                }
                return Ok(applied("split_or", branches));
            }
            Formula::Derived(d) => {
                let expansion =
                    crate::formula::expand_derived(ctx.gen, ctx.lib, &d.name, &d.args)?;
                s.pending.push_front(expansion);
            }
            Formula::Ruq(r) => s.ruqs.push(r),
            Formula::Atom(a) => {
                s.ingest_atom(a);
                if s.failed {
                    return Ok(applied("ingest", vec![s]));
                }
            }
        }
    }
    if !s.lia_bounds_ok() {
        s.fail();
        return Ok(applied("lia_prune", vec![s]));
    }
    if s != *store {
        // Ingestion alone made progress.
        return Ok(applied("ingest", vec![s]));
    }

    // Priority: equalities, in, nin, pair/npair, size, un, disj, subset,
    // quantifiers last.
    let priority = |a: &Atom| match a {
        Atom::Eq(..) => 0,
        Atom::In(..) => 1,
        Atom::Nin(..) => 2,
        Atom::IsPair(..) | Atom::NoPair(..) => 3,
        Atom::Size(..) => 4,
        Atom::Un(..) => 5,
        Atom::Disj(..) => 6,
        Atom::Neq(..) => 7,
        Atom::SubInt(..) => 8,
        Atom::IntCmp(..) => unreachable!("integer atoms live in the lia partition"),
    };
    let mut order: Vec<usize> = (0..s.atoms.len()).collect();
    order.sort_by_key(|&i| (priority(&s.atoms[i]), i));
    for idx in order {
        let atom = s.atoms[idx].clone();
        if let Some((rule, branches)) = rewrite_atom(&s, idx, &atom, ctx) {
            return Ok(applied(rule, branches));
        }
    }
    for (i, r) in s.ruqs.iter().enumerate() {
        if let Some((rule, branches)) = rewrite_ruq(&s, i, r, ctx) {
            return Ok(applied(rule, branches));
        }
    }
    Ok(StepOutcome::Fixpoint)
}

fn applied(rule: &'static str, branches: Vec<Store>) -> StepOutcome {
    StepOutcome::Applied { rule, branches }
}

/// Store with atom `idx` removed, used as the base for rule output.
fn without_atom(s: &Store, idx: usize) -> Store {
    let mut out = s.clone();
    out.atoms.remove(idx);
    out
}

fn with_pending(mut base: Store, fs: Vec<Formula>) -> Store {
    for f in fs.into_iter().rev() {
        base.pending.push_front(f);
    }
    base
}

fn branch(s: &Store, idx: usize, fs: Vec<Formula>) -> Store {
    with_pending(without_atom(s, idx), fs)
}

fn failed_store(s: &Store) -> Store {
    let mut out = s.clone();
    out.fail();
    out
}

fn fresh_set(ctx: &mut Ctx) -> Term {
    Term::var(ctx.gen.fresh(Some(Sort::Set)))
}

fn atom_f(a: Atom) -> Formula {
    Formula::Atom(a)
}

/// `a ≤ b` over linear expressions.
fn le_f(a: IntLin, b: IntLin) -> Formula {
    Formula::Atom(Atom::le(a, b))
}

fn lt_f(a: IntLin, b: IntLin) -> Formula {
    Formula::Atom(Atom::lt(a, b))
}

fn rewrite_atom(
    s: &Store,
    idx: usize,
    atom: &Atom,
    ctx: &mut Ctx,
) -> Option<(&'static str, Vec<Store>)> {
    match atom {
        Atom::Eq(a, b) => rewrite_eq(s, idx, a, b, ctx),
        Atom::In(x, dom) => rewrite_in(s, idx, x, dom, ctx),
        Atom::Nin(x, dom) => rewrite_nin(s, idx, x, dom),
        Atom::Neq(a, b) => rewrite_neq(s, idx, a, b, ctx),
        Atom::Un(a, b, c) => rewrite_un(s, idx, a, b, c, ctx),
        Atom::Disj(a, b) => rewrite_disj(s, idx, a, b, ctx),
        Atom::Size(e, n) => rewrite_size(s, idx, e, n, ctx),
        Atom::SubInt(e, lo, hi) => rewrite_subint(s, idx, e, lo, hi),
        Atom::IsPair(t) => rewrite_pair(s, idx, t, ctx),
        Atom::NoPair(t) => rewrite_npair(s, idx, t),
        Atom::IntCmp(..) => unreachable!(),
    }
}

/// Sort compatibility of two terms for equality purposes; `None` entries
/// (unconstrained variables) are compatible with everything.
fn eq_sorts_clash(a: &Term, b: &Term) -> bool {
    match (sort_of(a), sort_of(b)) {
        (Ok(Some(sa)), Ok(Some(sb))) => {
            sa != sb && !matches!((sa, sb), (Sort::Pair, Sort::Ur) | (Sort::Ur, Sort::Pair))
        }
        (Err(_), _) | (_, Err(_)) => true,
        _ => false,
    }
}

fn rewrite_eq(
    s: &Store,
    idx: usize,
    a: &Term,
    b: &Term,
    ctx: &mut Ctx,
) -> Option<(&'static str, Vec<Store>)> {
    if a == b {
        return Some(("eq_identical", vec![without_atom(s, idx)]));
    }
    // Integer equalities route to the linear partition (or become a
    // binding through `Atom::eq` normalization on ingest; reaching here
    // with two int-able sides means neither had integer evidence).
    if let (Some(la), Some(lb)) = (a.as_int_lin(), b.as_int_lin()) {
        if definitely_int_term(a) || definitely_int_term(b) {
            let mut out = without_atom(s, idx);
            push_int_eq(&mut out, la.sub_lin(&lb));
            return Some(("eq_int_lia", vec![out]));
        }
    }
    // Variable binding, preferring to bind the less committed side.
    let (va, vb) = (as_var(a), as_var(b));
    match (va, vb) {
        (Some(v), _) | (_, Some(v)) => {
            let (v, t) = if let Some(v0) = va {
                match vb {
                    // Two variables: bind the one with the weaker sort
                    // commitment so commitments only tighten.
                    Some(v1) => {
                        if v0.sort().is_none() {
                            (v0.clone(), b.clone())
                        } else if v1.sort().is_none() {
                            (v1.clone(), a.clone())
                        } else {
                            (v0.clone(), b.clone())
                        }
                    }
                    None => (v0.clone(), b.clone()),
                }
            } else {
                (v.clone(), a.clone())
            };
            if occurs(&v, &t) {
                return Some(("eq_occurs_fail", vec![failed_store(s)]));
            }
            let mut out = without_atom(s, idx);
            out.bind(v, t);
            return Some(("eq_bind_var", vec![out]));
        }
        _ => {}
    }
    if eq_sorts_clash(a, b) {
        return Some(("eq_sort_clash", vec![failed_store(s)]));
    }
    match (a, b) {
        // {x ⊔ E} = {y ⊔ F}: the four-way split of set unification.
        (Term::SetCons(x, e), Term::SetCons(y, f)) => {
            let (x, e, y, f) = (
                x.as_ref().clone(),
                e.as_ref().clone(),
                y.as_ref().clone(),
                f.as_ref().clone(),
            );
            let n = fresh_set(ctx);
            let base = without_atom(s, idx);
            let b1 = with_pending(
                base.clone(),
                vec![
                    atom_f(Atom::eq(x.clone(), y.clone())),
                    atom_f(Atom::Eq(e.clone(), f.clone())),
                ],
            );
            let b2 = with_pending(
                base.clone(),
                vec![
                    atom_f(Atom::eq(x.clone(), y.clone())),
                    atom_f(Atom::Eq(a.clone(), f.clone())),
                ],
            );
            let b3 = with_pending(
                base.clone(),
                vec![
                    atom_f(Atom::eq(x.clone(), y.clone())),
                    atom_f(Atom::Eq(e.clone(), b.clone())),
                ],
            );
            let b4 = with_pending(
                base,
                vec![
                    atom_f(Atom::Eq(e, Term::set_cons(y, n.clone()))),
                    atom_f(Atom::Eq(Term::set_cons(x, n), f)),
                ],
            );
            Some(("eq_ext_ext", vec![b1, b2, b3, b4]))
        }
        (Term::SetCons(..), Term::EmptySet) | (Term::EmptySet, Term::SetCons(..)) => {
            Some(("eq_ext_empty", vec![failed_store(s)]))
        }
        (Term::Interval(lo, hi), Term::EmptySet) | (Term::EmptySet, Term::Interval(lo, hi)) => {
            let out = branch(s, idx, vec![lt_f(hi.clone(), lo.clone())]);
            Some(("eq_interval_empty", vec![out]))
        }
        // [k,m] = {y ⊔ E} ⟶ {y⊔E} ⊆ [k,m] ∧ size({y⊔E}, m−k+1)
        (Term::Interval(lo, hi), ext @ Term::SetCons(..))
        | (ext @ Term::SetCons(..), Term::Interval(lo, hi)) => {
            let width = hi.sub_lin(lo).add_const(1);
            let out = branch(
                s,
                idx,
                vec![
                    atom_f(Atom::SubInt(ext.clone(), lo.clone(), hi.clone())),
                    atom_f(Atom::Size(ext.clone(), width)),
                ],
            );
            Some(("eq_interval_ext", vec![out]))
        }
        (Term::Interval(lo1, hi1), Term::Interval(lo2, hi2)) => {
            let base = without_atom(s, idx);
            let both_empty = with_pending(
                base.clone(),
                vec![lt_f(hi1.clone(), lo1.clone()), lt_f(hi2.clone(), lo2.clone())],
            );
            let same = with_pending(
                base,
                vec![
                    le_f(lo1.clone(), hi1.clone()),
                    atom_f(Atom::IntCmp(CmpOp::Eq, lo1.sub_lin(lo2))),
                    atom_f(Atom::IntCmp(CmpOp::Eq, hi1.sub_lin(hi2))),
                ],
            );
            Some(("eq_interval_interval", vec![both_empty, same]))
        }
        (Term::Pair(a1, b1), Term::Pair(a2, b2)) => {
            let out = branch(
                s,
                idx,
                vec![
                    atom_f(Atom::eq(a1.as_ref().clone(), a2.as_ref().clone())),
                    atom_f(Atom::eq(b1.as_ref().clone(), b2.as_ref().clone())),
                ],
            );
            Some(("eq_pair_pair", vec![out]))
        }
        (Term::Ur(f1), Term::Ur(f2)) => {
            if f1.name != f2.name || f1.args.len() != f2.args.len() {
                return Some(("eq_ur_ur", vec![failed_store(s)]));
            }
            let eqs = f1
                .args
                .iter()
                .zip(&f2.args)
                .map(|(x, y)| atom_f(Atom::eq(x.clone(), y.clone())))
                .collect();
            Some(("eq_ur_ur", vec![branch(s, idx, eqs)]))
        }
        _ => Some(("eq_sort_clash", vec![failed_store(s)])),
    }
}

fn definitely_int_term(t: &Term) -> bool {
    crate::formula::definitely_int(t)
}

fn as_var(t: &Term) -> Option<&Var> {
    match t {
        Term::Var(v) => Some(v),
        _ => None,
    }
}

/// Routes an integer equality: a unit-coefficient variable is solved and
/// substituted, anything else joins the linear partition.
fn push_int_eq(out: &mut Store, lin: IntLin) {
    let solvable = lin
        .coeffs()
        .find(|(_, c)| c.abs() == 1)
        .map(|(v, c)| (v.clone(), c));
    match solvable {
        Some((v, c)) => {
            // lin = c·v + rest = 0  ⟹  v = −rest/c
            let rest = lin.subst_var(&v, &IntLin::constant(0));
            let rhs = rest.scale(-c); // c = ±1 so −rest/c = −c·rest
            out.bind(v, Term::int_lin(rhs));
        }
        None => out.push_lia(CmpOp::Eq, lin),
    }
}

fn rewrite_in(
    s: &Store,
    idx: usize,
    x: &Term,
    dom: &Term,
    ctx: &mut Ctx,
) -> Option<(&'static str, Vec<Store>)> {
    match dom {
        Term::EmptySet => Some(("in_empty", vec![failed_store(s)])),
        Term::SetCons(y, rest) => {
            let base = without_atom(s, idx);
            let b1 = with_pending(
                base.clone(),
                vec![atom_f(Atom::eq(x.clone(), y.as_ref().clone()))],
            );
            let b2 = with_pending(
                base,
                vec![atom_f(Atom::In(x.clone(), rest.as_ref().clone()))],
            );
            Some(("in_ext", vec![b1, b2]))
        }
        Term::Interval(lo, hi) => match x.as_int_lin() {
            Some(lx) => {
                let out = branch(
                    s,
                    idx,
                    vec![le_f(lo.clone(), lx.clone()), le_f(lx, hi.clone())],
                );
                Some(("in_interval", vec![out]))
            }
            None => Some(("in_interval", vec![failed_store(s)])),
        },
        Term::Var(e) => {
            if occurs(e, x) {
                // x ∈ E with E inside x contradicts well-foundedness.
                return Some(("in_occurs", vec![failed_store(s)]));
            }
            let n = fresh_set(ctx);
            let out = branch(
                s,
                idx,
                vec![
                    atom_f(Atom::Eq(
                        Term::var(e.clone()),
                        Term::set_cons(x.clone(), n.clone()),
                    )),
                    atom_f(Atom::Nin(x.clone(), n)),
                ],
            );
            Some(("in_var", vec![out]))
        }
        _ => Some(("in_empty", vec![failed_store(s)])),
    }
}

fn rewrite_nin(s: &Store, idx: usize, x: &Term, dom: &Term) -> Option<(&'static str, Vec<Store>)> {
    match dom {
        Term::EmptySet => Some(("nin_empty", vec![without_atom(s, idx)])),
        Term::SetCons(y, rest) => {
            let out = branch(
                s,
                idx,
                vec![
                    atom_f(Atom::neq(x.clone(), y.as_ref().clone())),
                    atom_f(Atom::Nin(x.clone(), rest.as_ref().clone())),
                ],
            );
            Some(("nin_ext", vec![out]))
        }
        Term::Interval(lo, hi) => match x.as_int_lin() {
            Some(lx) => {
                let base = without_atom(s, idx);
                let b1 = with_pending(base.clone(), vec![lt_f(lx.clone(), lo.clone())]);
                let b2 = with_pending(base, vec![lt_f(hi.clone(), lx)]);
                Some(("nin_interval", vec![b1, b2]))
            }
            None => Some(("nin_interval", vec![without_atom(s, idx)])),
        },
        Term::Var(e) => {
            if occurs(e, x) {
                // Well-foundedness makes x ∉ E vacuous when E occurs in x.
                Some(("nin_var_occurs", vec![without_atom(s, idx)]))
            } else {
                None // irreducible
            }
        }
        _ => Some(("nin_empty", vec![without_atom(s, idx)])),
    }
}

fn rewrite_neq(
    s: &Store,
    idx: usize,
    a: &Term,
    b: &Term,
    ctx: &mut Ctx,
) -> Option<(&'static str, Vec<Store>)> {
    if a == b {
        return Some(("neq_identical", vec![failed_store(s)]));
    }
    if let (Some(la), Some(lb)) = (a.as_int_lin(), b.as_int_lin()) {
        if definitely_int_term(a) || definitely_int_term(b) {
            let mut out = without_atom(s, idx);
            out.push_lia(CmpOp::Ne, la.sub_lin(&lb));
            return Some(("neq_int_lia", vec![out]));
        }
    }
    match (a, b) {
        (Term::Pair(a1, b1), Term::Pair(a2, b2)) => {
            let base = without_atom(s, idx);
            let left = with_pending(
                base.clone(),
                vec![atom_f(Atom::neq(a1.as_ref().clone(), a2.as_ref().clone()))],
            );
            let right = with_pending(
                base,
                vec![atom_f(Atom::neq(b1.as_ref().clone(), b2.as_ref().clone()))],
            );
            return Some(("neq_pair_pair", vec![left, right]));
        }
        (Term::Ur(f1), Term::Ur(f2)) => {
            if f1.name != f2.name || f1.args.len() != f2.args.len() {
                return Some(("neq_ur_ur", vec![without_atom(s, idx)]));
            }
            let base = without_atom(s, idx);
            let branches = f1
                .args
                .iter()
                .zip(&f2.args)
                .map(|(x, y)| {
                    with_pending(base.clone(), vec![atom_f(Atom::neq(x.clone(), y.clone()))])
                })
                .collect();
            return Some(("neq_ur_ur", branches));
        }
        _ => {}
    }
    let (va, vb) = (as_var(a), as_var(b));
    // X ≠ t where X occurs properly inside t: always true (well-founded).
    if let Some(v) = va {
        if vb.is_none() && occurs(v, b) {
            return Some(("neq_var_occurs", vec![without_atom(s, idx)]));
        }
    }
    if let Some(v) = vb {
        if va.is_none() && occurs(v, a) {
            return Some(("neq_var_occurs", vec![without_atom(s, idx)]));
        }
    }
    if eq_sorts_clash(a, b) {
        return Some(("neq_sort_clash", vec![without_atom(s, idx)]));
    }
    let is_set_shaped = |t: &Term| {
        matches!(
            t,
            Term::EmptySet | Term::SetCons(..) | Term::Interval(..)
        )
    };
    // Both sides non-variable set terms: split on a discriminating element.
    if is_set_shaped(a) && is_set_shaped(b) {
        let n = Term::var(ctx.gen.fresh(None));
        let base = without_atom(s, idx);
        let b1 = with_pending(
            base.clone(),
            vec![
                atom_f(Atom::In(n.clone(), a.clone())),
                atom_f(Atom::Nin(n.clone(), b.clone())),
            ],
        );
        let b2 = with_pending(
            base,
            vec![
                atom_f(Atom::In(n.clone(), b.clone())),
                atom_f(Atom::Nin(n, a.clone())),
            ],
        );
        return Some(("neq_set_split", vec![b1, b2]));
    }
    None // var ≠ term: irreducible here; remove_neq may still fire later
}

fn rewrite_un(
    s: &Store,
    idx: usize,
    a: &Term,
    b: &Term,
    c: &Term,
    ctx: &mut Ctx,
) -> Option<(&'static str, Vec<Store>)> {
    if a == b {
        let out = branch(s, idx, vec![atom_f(Atom::Eq(a.clone(), c.clone()))]);
        return Some(("un_same_args", vec![out]));
    }
    if matches!(a, Term::EmptySet) {
        let out = branch(s, idx, vec![atom_f(Atom::Eq(b.clone(), c.clone()))]);
        return Some(("un_empty_first", vec![out]));
    }
    if matches!(b, Term::EmptySet) {
        let out = branch(s, idx, vec![atom_f(Atom::Eq(a.clone(), c.clone()))]);
        return Some(("un_empty_second", vec![out]));
    }
    if matches!(c, Term::EmptySet) {
        let out = branch(
            s,
            idx,
            vec![
                atom_f(Atom::Eq(a.clone(), Term::EmptySet)),
                atom_f(Atom::Eq(b.clone(), Term::EmptySet)),
            ],
        );
        return Some(("un_empty_result", vec![out]));
    }
    // Intervals are eliminated: third argument via the reconstruction rule,
    // first/second by materializing the interval as a fresh set.
    if let Term::Interval(lo, hi) = c {
        let n = fresh_set(ctx);
        let base = without_atom(s, idx);
        let empty = with_pending(
            base.clone(),
            vec![
                lt_f(hi.clone(), lo.clone()),
                atom_f(Atom::Eq(a.clone(), Term::EmptySet)),
                atom_f(Atom::Eq(b.clone(), Term::EmptySet)),
            ],
        );
        let non_empty = with_pending(
            base,
            vec![
                le_f(lo.clone(), hi.clone()),
                atom_f(Atom::SubInt(n.clone(), lo.clone(), hi.clone())),
                atom_f(Atom::Size(n.clone(), hi.sub_lin(lo).add_const(1))),
                atom_f(Atom::Un(a.clone(), b.clone(), n)),
            ],
        );
        return Some(("un_interval_result", vec![empty, non_empty]));
    }
    for (pos, t) in [(0usize, a), (1, b)] {
        if let Term::Interval(lo, hi) = t {
            let n = fresh_set(ctx);
            let rest = |nt: Term| {
                if pos == 0 {
                    Atom::Un(nt, b.clone(), c.clone())
                } else {
                    Atom::Un(a.clone(), nt, c.clone())
                }
            };
            let base = without_atom(s, idx);
            let empty = with_pending(
                base.clone(),
                vec![lt_f(hi.clone(), lo.clone()), atom_f(rest(Term::EmptySet))],
            );
            let non_empty = with_pending(
                base,
                vec![
                    le_f(lo.clone(), hi.clone()),
                    atom_f(Atom::SubInt(n.clone(), lo.clone(), hi.clone())),
                    atom_f(Atom::Size(n.clone(), hi.sub_lin(lo).add_const(1))),
                    atom_f(rest(n)),
                ],
            );
            return Some(("un_interval_arg", vec![empty, non_empty]));
        }
    }
    // Element distribution into an extensional result.
    if let Term::SetCons(x, rest) = c {
        let (x, rest) = (x.as_ref().clone(), rest.as_ref().clone());
        let n = fresh_set(ctx);
        let n1 = fresh_set(ctx);
        let n2 = fresh_set(ctx);
        let base = branch(
            s,
            idx,
            vec![
                atom_f(Atom::Eq(
                    Term::set_cons(x.clone(), rest.clone()),
                    Term::set_cons(x.clone(), n.clone()),
                )),
                atom_f(Atom::Nin(x.clone(), n.clone())),
            ],
        );
        let b1 = with_pending(
            base.clone(),
            vec![
                atom_f(Atom::Eq(a.clone(), Term::set_cons(x.clone(), n1.clone()))),
                atom_f(Atom::Nin(x.clone(), n1.clone())),
                atom_f(Atom::Eq(b.clone(), Term::set_cons(x.clone(), n2.clone()))),
                atom_f(Atom::Nin(x.clone(), n2.clone())),
                atom_f(Atom::Un(n1.clone(), n2.clone(), n.clone())),
            ],
        );
        let b2 = with_pending(
            base.clone(),
            vec![
                atom_f(Atom::Eq(a.clone(), Term::set_cons(x.clone(), n1.clone()))),
                atom_f(Atom::Nin(x.clone(), n1.clone())),
                atom_f(Atom::Nin(x.clone(), b.clone())),
                atom_f(Atom::Un(n1, b.clone(), n.clone())),
            ],
        );
        let b3 = with_pending(
            base,
            vec![
                atom_f(Atom::Nin(x.clone(), a.clone())),
                atom_f(Atom::Eq(b.clone(), Term::set_cons(x.clone(), n2.clone()))),
                atom_f(Atom::Nin(x, n2.clone())),
                atom_f(Atom::Un(a.clone(), n2, n)),
            ],
        );
        return Some(("un_ext_result", vec![b1, b2, b3]));
    }
    // Element extraction: an extensional first (or second) argument with a
    // variable result.
    for (rule, first, second) in [("un_ext_first", a, b), ("un_ext_second", b, a)] {
        if let (Term::SetCons(x, e), Term::Var(_)) = (first, c) {
            let (x, e) = (x.as_ref().clone(), e.as_ref().clone());
            let n1 = fresh_set(ctx);
            let n = fresh_set(ctx);
            let n2 = fresh_set(ctx);
            let base = branch(
                s,
                idx,
                vec![
                    atom_f(Atom::Eq(
                        Term::set_cons(x.clone(), e.clone()),
                        Term::set_cons(x.clone(), n1.clone()),
                    )),
                    atom_f(Atom::Nin(x.clone(), n1.clone())),
                    atom_f(Atom::Eq(c.clone(), Term::set_cons(x.clone(), n.clone()))),
                ],
            );
            let without = with_pending(
                base.clone(),
                vec![
                    atom_f(Atom::Nin(x.clone(), second.clone())),
                    atom_f(if rule == "un_ext_first" {
                        Atom::Un(n1.clone(), second.clone(), n.clone())
                    } else {
                        Atom::Un(second.clone(), n1.clone(), n.clone())
                    }),
                ],
            );
            let with = with_pending(
                base,
                vec![
                    atom_f(Atom::Eq(
                        second.clone(),
                        Term::set_cons(x.clone(), n2.clone()),
                    )),
                    atom_f(Atom::Nin(x, n2.clone())),
                    atom_f(if rule == "un_ext_first" {
                        Atom::Un(n1, n2, n)
                    } else {
                        Atom::Un(n2, n1, n)
                    }),
                ],
            );
            return Some((rule, vec![without, with]));
        }
    }
    None
}

fn rewrite_disj(
    s: &Store,
    idx: usize,
    a: &Term,
    b: &Term,
    ctx: &mut Ctx,
) -> Option<(&'static str, Vec<Store>)> {
    if matches!(a, Term::EmptySet) || matches!(b, Term::EmptySet) {
        return Some(("disj_empty", vec![without_atom(s, idx)]));
    }
    if a == b {
        let out = branch(s, idx, vec![atom_f(Atom::Eq(a.clone(), Term::EmptySet))]);
        return Some(("disj_same", vec![out]));
    }
    for (first, second) in [(a, b), (b, a)] {
        if let Term::SetCons(x, rest) = first {
            let out = branch(
                s,
                idx,
                vec![
                    atom_f(Atom::Nin(x.as_ref().clone(), second.clone())),
                    atom_f(Atom::Disj(rest.as_ref().clone(), second.clone())),
                ],
            );
            return Some(("disj_ext", vec![out]));
        }
    }
    for (first, second) in [(a, b), (b, a)] {
        if let Term::Interval(lo, hi) = first {
            let n = fresh_set(ctx);
            let base = without_atom(s, idx);
            let empty = with_pending(base.clone(), vec![lt_f(hi.clone(), lo.clone())]);
            let non_empty = with_pending(
                base,
                vec![
                    le_f(lo.clone(), hi.clone()),
                    atom_f(Atom::SubInt(n.clone(), lo.clone(), hi.clone())),
                    atom_f(Atom::Size(n.clone(), hi.sub_lin(lo).add_const(1))),
                    atom_f(Atom::Disj(n, second.clone())),
                ],
            );
            return Some(("disj_interval", vec![empty, non_empty]));
        }
    }
    None
}

fn rewrite_size(
    s: &Store,
    idx: usize,
    e: &Term,
    n: &IntLin,
    ctx: &mut Ctx,
) -> Option<(&'static str, Vec<Store>)> {
    match e {
        Term::EmptySet => {
            let out = branch(s, idx, vec![atom_f(Atom::IntCmp(CmpOp::Eq, n.clone()))]);
            Some(("size_empty", vec![out]))
        }
        _ if n.as_constant() == Some(0) => {
            let out = branch(s, idx, vec![atom_f(Atom::Eq(e.clone(), Term::EmptySet))]);
            Some(("size_zero", vec![out]))
        }
        _ if n.as_constant().is_some_and(|k| k < 0) => {
            Some(("size_negative", vec![failed_store(s)]))
        }
        Term::SetCons(x, rest) => {
            let (x, rest) = (x.as_ref().clone(), rest.as_ref().clone());
            let m = ctx.gen.fresh(Some(Sort::Int));
            let nn = fresh_set(ctx);
            let base = without_atom(s, idx);
            let counted = with_pending(
                base.clone(),
                vec![
                    atom_f(Atom::Nin(x.clone(), rest.clone())),
                    atom_f(Atom::IntCmp(
                        CmpOp::Eq,
                        n.sub_lin(&IntLin::var(m.clone()).add_const(1)),
                    )),
                    le_f(IntLin::constant(0), IntLin::var(m.clone())),
                    atom_f(Atom::Size(rest.clone(), IntLin::var(m))),
                ],
            );
            let duplicate = with_pending(
                base,
                vec![
                    atom_f(Atom::Eq(rest, Term::set_cons(x.clone(), nn.clone()))),
                    atom_f(Atom::Nin(x, nn.clone())),
                    atom_f(Atom::Size(nn, n.clone())),
                ],
            );
            Some(("size_ext", vec![counted, duplicate]))
        }
        Term::Interval(lo, hi) => {
            let base = without_atom(s, idx);
            let empty = with_pending(
                base.clone(),
                vec![
                    lt_f(hi.clone(), lo.clone()),
                    atom_f(Atom::IntCmp(CmpOp::Eq, n.clone())),
                ],
            );
            let non_empty = with_pending(
                base,
                vec![
                    le_f(lo.clone(), hi.clone()),
                    atom_f(Atom::IntCmp(
                        CmpOp::Eq,
                        n.sub_lin(&hi.sub_lin(lo).add_const(1)),
                    )),
                ],
            );
            Some(("size_interval", vec![empty, non_empty]))
        }
        _ => None,
    }
}

fn rewrite_subint(
    s: &Store,
    idx: usize,
    e: &Term,
    lo: &IntLin,
    hi: &IntLin,
) -> Option<(&'static str, Vec<Store>)> {
    match e {
        Term::EmptySet => Some(("subint_empty", vec![without_atom(s, idx)])),
        Term::SetCons(x, rest) => match x.as_int_lin() {
            Some(lx) => {
                let out = branch(
                    s,
                    idx,
                    vec![
                        le_f(lo.clone(), lx.clone()),
                        le_f(lx, hi.clone()),
                        atom_f(Atom::SubInt(rest.as_ref().clone(), lo.clone(), hi.clone())),
                    ],
                );
                Some(("subint_ext", vec![out]))
            }
            None => Some(("subint_ext", vec![failed_store(s)])),
        },
        Term::Interval(a, b) => {
            let base = without_atom(s, idx);
            let empty = with_pending(base.clone(), vec![lt_f(b.clone(), a.clone())]);
            let nested = with_pending(
                base,
                vec![
                    le_f(a.clone(), b.clone()),
                    le_f(lo.clone(), a.clone()),
                    le_f(b.clone(), hi.clone()),
                ],
            );
            Some(("subint_interval", vec![empty, nested]))
        }
        _ => None,
    }
}

fn rewrite_pair(
    s: &Store,
    idx: usize,
    t: &Term,
    ctx: &mut Ctx,
) -> Option<(&'static str, Vec<Store>)> {
    match t {
        Term::Pair(..) => Some(("pair_pair", vec![without_atom(s, idx)])),
        Term::Var(v) => match v.sort() {
            Some(Sort::Int) | Some(Sort::Set) => Some(("pair_var", vec![failed_store(s)])),
            _ => {
                let a = ctx.gen.fresh(Some(Sort::Int));
                let b = ctx.gen.fresh(None);
                let out = branch(
                    s,
                    idx,
                    vec![atom_f(Atom::Eq(
                        t.clone(),
                        Term::pair(Term::var(a), Term::var(b)),
                    ))],
                );
                Some(("pair_var", vec![out]))
            }
        },
        _ => Some(("pair_other", vec![failed_store(s)])),
    }
}

fn rewrite_npair(s: &Store, idx: usize, t: &Term) -> Option<(&'static str, Vec<Store>)> {
    match t {
        Term::Pair(..) => Some(("npair_pair", vec![failed_store(s)])),
        Term::Var(v) => match v.sort() {
            Some(Sort::Int) | Some(Sort::Set) => {
                Some(("npair_var_sorted", vec![without_atom(s, idx)]))
            }
            _ => None, // satisfiable by a non-pair witness; irreducible
        },
        _ => Some(("npair_other", vec![without_atom(s, idx)])),
    }
}

fn rewrite_ruq(s: &Store, i: usize, r: &Ruq, ctx: &mut Ctx) -> Option<(&'static str, Vec<Store>)> {
    let without = |s: &Store| {
        let mut out = s.clone();
        out.ruqs.remove(i);
        out
    };
    match &r.domain {
        Term::EmptySet => Some(("ruq_empty", vec![without(s)])),
        Term::SetCons(t, rest) => {
            let instance = instantiate_ruq(ctx, &r.binder, t, &r.body);
            let remainder = Ruq {
                binder: r.binder.clone(),
                domain: rest.as_ref().clone(),
                body: r.body.clone(),
            };
            let mut out = without(s);
            out.ruqs.push(remainder);
            out.pending.push_front(instance);
            Some(("ruq_ext", vec![out]))
        }
        Term::Interval(lo, hi) => {
            let n = fresh_set(ctx);
            let base = without(s);
            let mut non_empty = with_pending(
                base.clone(),
                vec![
                    le_f(lo.clone(), hi.clone()),
                    atom_f(Atom::Size(n.clone(), hi.sub_lin(lo).add_const(1))),
                    atom_f(Atom::SubInt(n.clone(), lo.clone(), hi.clone())),
                ],
            );
            non_empty.ruqs.push(Ruq {
                binder: r.binder.clone(),
                domain: n,
                body: r.body.clone(),
            });
            let empty = with_pending(base, vec![lt_f(hi.clone(), lo.clone())]);
            Some(("ruq_interval", vec![non_empty, empty]))
        }
        Term::Var(_) => None, // irreducible
        _ => {
            // Ill-sorted domain: no element can belong to it.
            Some(("ruq_empty", vec![without(s)]))
        }
    }
}

/// Instantiates a quantifier body with one domain element.
///
/// For a pair binder the element may be a variable or ur-term; it is then
/// equated to a fresh pair, which preserves satisfiability because
/// quantifier bodies only constrain pair components.
pub fn instantiate_ruq(ctx: &mut Ctx, binder: &Binder, element: &Term, body: &RuqBody) -> Formula {
    let mut subst = Substitution::new();
    let mut prefix: Vec<Formula> = Vec::new();
    match binder {
        Binder::Single(v) => {
            subst.bind(v.clone(), element.clone());
        }
        Binder::Couple(x, y) => match element {
            Term::Pair(a, b) => {
                subst.bind(x.clone(), a.as_ref().clone());
                subst.bind(y.clone(), b.as_ref().clone());
            }
            _ => {
                let a = ctx.gen.fresh(Some(Sort::Int));
                let b = ctx.gen.fresh(None);
                prefix.push(atom_f(Atom::Eq(
                    element.clone(),
                    Term::pair(Term::var(a.clone()), Term::var(b.clone())),
                )));
                subst.bind(x.clone(), Term::var(a));
                subst.bind(y.clone(), Term::var(b));
            }
        },
    }
    let instantiated = match body {
        RuqBody::Qf(q) => q.apply_subst(&subst).to_formula(),
        RuqBody::Nested(inner) => Formula::Ruq(inner.apply_subst(&subst)),
    };
    prefix.push(instantiated);
    Formula::and(prefix)
}

/// Irreducibility per the solved forms: bindings, guarded disequalities,
/// non-membership in a variable, union and disjointness over variables,
/// quantifiers over a variable domain, subset of an interval, non-zero
/// size of a variable.
pub fn is_irreducible_atom(a: &Atom, s: &Store) -> bool {
    match a {
        Atom::Eq(..) => false,
        Atom::Neq(x, t) => match (as_var(x), as_var(t)) {
            (Some(v), _) => !occurs(v, t) && !neq_qualifies(v, s),
            (None, Some(v)) => !occurs(v, x) && !neq_qualifies(v, s),
            _ => {
                // Non-variable sides of different shapes: pairs and ur-terms
                // decompose, set terms split; reaching here means the neq is
                // between scalar-ish terms that no rule touches.
                !matches!(
                    (x, t),
                    (Term::SetCons(..) | Term::EmptySet | Term::Interval(..), _)
                        | (_, Term::SetCons(..) | Term::EmptySet | Term::Interval(..))
                )
            }
        },
        Atom::In(..) => false,
        Atom::Nin(x, e) => matches!(e, Term::Var(v) if !occurs(v, x)),
        Atom::Un(a, b, c) => {
            matches!((a, b, c), (Term::Var(va), Term::Var(vb), Term::Var(_)) if va != vb)
        }
        Atom::Disj(a, b) => {
            matches!((a, b), (Term::Var(va), Term::Var(vb)) if va != vb)
        }
        Atom::Size(e, n) => {
            matches!(e, Term::Var(_)) && n.as_constant() != Some(0) && !n.as_constant().is_some_and(|k| k < 0)
        }
        Atom::SubInt(e, _, _) => matches!(e, Term::Var(_)),
        Atom::IntCmp(..) => true,
        Atom::IsPair(..) => false,
        Atom::NoPair(t) => match t {
            Term::Var(v) => !matches!(v.sort(), Some(Sort::Int) | Some(Sort::Set) | Some(Sort::Pair)),
            _ => false,
        },
    }
}

pub fn is_irreducible_ruq(r: &Ruq) -> bool {
    matches!(r.domain, Term::Var(_))
}

/// True when a set variable on the left of a disequality is an argument of a
/// union or size constraint or the domain of a quantifier, which makes the
/// disequality eliminable.
fn neq_qualifies(v: &Var, s: &Store) -> bool {
    if v.sort().is_some() && v.sort() != Some(Sort::Set) {
        return false;
    }
    let var_term = |t: &Term| matches!(t, Term::Var(w) if w == v);
    s.atoms.iter().any(|a| match a {
        Atom::Un(x, y, z) => var_term(x) || var_term(y) || var_term(z),
        Atom::Size(x, _) => var_term(x),
        _ => false,
    }) || s.ruqs.iter().any(|r| var_term(&r.domain))
}

/// Eliminates qualifying disequalities: each `X ≠ t` with `X` an argument of
/// union/size or a quantifier domain splits on a fresh discriminating
/// element. Returns `None` when nothing qualifies.
pub fn remove_neq(s: &Store, ctx: &mut Ctx) -> Option<Vec<Store>> {
    let target = s.atoms.iter().position(|a| match a {
        Atom::Neq(x, t) => match (as_var(x), as_var(t)) {
            (Some(v), _) if neq_qualifies(v, s) => true,
            (_, Some(v)) if neq_qualifies(v, s) => true,
            _ => false,
        },
        _ => false,
    })?;
    let Atom::Neq(a, b) = s.atoms[target].clone() else {
        unreachable!()
    };
    let n = Term::var(ctx.gen.fresh(None));
    let base = without_atom(s, target);
    let b1 = with_pending(
        base.clone(),
        vec![
            atom_f(Atom::In(n.clone(), a.clone())),
            atom_f(Atom::Nin(n.clone(), b.clone())),
        ],
    );
    let b2 = with_pending(
        base,
        vec![
            atom_f(Atom::In(n.clone(), b)),
            atom_f(Atom::Nin(n, a)),
        ],
    );
    Some(vec![b1, b2])
}

/// True when every constraint in the store is in solved form.
pub fn store_irreducible(s: &Store) -> bool {
    s.pending.is_empty()
        && s.atoms.iter().all(|a| is_irreducible_atom(a, s))
        && s.ruqs.iter().all(is_irreducible_ruq)
}

/// Simple step/branch budget shared across one solving run.
#[derive(Debug, Clone)]
pub struct Budget {
    pub steps: u64,
    pub used: u64,
    pub deadline: Option<std::time::Instant>,
}

impl Budget {
    pub fn new(steps: u64, timeout: Option<std::time::Duration>) -> Budget {
        Budget {
            steps,
            used: 0,
            deadline: timeout.map(|d| std::time::Instant::now() + d),
        }
    }

    pub fn tick(&mut self) -> Result<(), RewriteError> {
        self.used += 1;
        if self.used > self.steps {
            return Err(RewriteError::Budget);
        }
        if self.used % 512 == 0 {
            if let Some(d) = self.deadline {
                if std::time::Instant::now() > d {
                    return Err(RewriteError::Budget);
                }
            }
        }
        Ok(())
    }
}

/// Rewrites to a set of irreducible stores by depth-first exploration.
/// Disjunctions split first; failed stores are dropped.
pub fn step_loop(
    start: Store,
    ctx: &mut Ctx,
    budget: &mut Budget,
) -> Result<Vec<Store>, RewriteError> {
    let mut done = Vec::new();
    let mut stack = vec![start];
    while let Some(store) = stack.pop() {
        if store.failed {
            continue;
        }
        budget.tick()?;
        match step(&store, ctx)? {
            StepOutcome::Fixpoint => done.push(store),
            StepOutcome::Applied { branches, .. } => {
                for b in branches.into_iter().rev() {
                    if !b.failed {
                        stack.push(b);
                    }
                }
            }
        }
    }
    Ok(done)
}

impl fmt::Display for Store {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_formula())
    }
}

impl PartialEq for Store {
    fn eq(&self, other: &Self) -> bool {
        self.failed == other.failed
            && self.pending == other.pending
            && self.atoms == other.atoms
            && self.ruqs == other.ruqs
            && self.lia == other.lia
            && self.subst == other.subst
    }
}
impl Eq for Store {}
