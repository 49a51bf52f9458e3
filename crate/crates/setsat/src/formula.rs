//! Constraints and formulas: primitive atoms, restricted universal
//! quantifiers, the derived-constraint library (intersection, difference,
//! relations, functions, domain restrictions, arrays, hashtables) and
//! constraint negation.
//!
//! Derived constraints stay unexpanded in a formula until the solver
//! processes them; negation must see them unexpanded because several derived
//! forms have dedicated complements that differ from the De Morgan dual of
//! their definitions.

use crate::term::{occurs, sort_of, IntLin, Sort, Substitution, Term, Var, VarGen};
use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

/// Comparison operator of a normalized integer constraint `lin ⋈ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CmpOp {
    /// `lin < 0`
    Lt,
    /// `lin ≤ 0`
    Le,
    /// `lin = 0`
    Eq,
    /// `lin ≠ 0`
    Ne,
}

/// A primitive constraint.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    Eq(Term, Term),
    Neq(Term, Term),
    /// `x ∈ S`
    In(Term, Term),
    /// `x ∉ S`
    Nin(Term, Term),
    /// `un(E,F,G)`: `G = E ∪ F`
    Un(Term, Term, Term),
    /// `disj(E,F)`: `E ∩ F = ∅`
    Disj(Term, Term),
    /// `size(E,n)`: `|E| = n`
    Size(Term, IntLin),
    /// `E ⊆ [lo,hi]` (generated while eliminating intervals)
    SubInt(Term, IntLin, IntLin),
    /// Normalized linear integer constraint `lin ⋈ 0`.
    IntCmp(CmpOp, IntLin),
    /// `pair(x)`: x is an ordered pair
    IsPair(Term),
    /// `npair(x)`
    NoPair(Term),
}

/// True when the term is committed to sort `Int` (constants, arithmetic
/// expressions, int-sorted variables). An uncommitted variable is not
/// evidence by itself.
pub fn definitely_int(t: &Term) -> bool {
    match t {
        Term::Int(_) => true,
        Term::Var(v) => v.sort() == Some(Sort::Int),
        _ => false,
    }
}

impl Atom {
    /// Equality, normalized to an integer constraint when either side is
    /// known to be an integer.
    pub fn eq(a: Term, b: Term) -> Atom {
        if definitely_int(&a) || definitely_int(&b) {
            if let (Some(la), Some(lb)) = (a.as_int_lin(), b.as_int_lin()) {
                return Atom::IntCmp(CmpOp::Eq, la.sub_lin(&lb));
            }
        }
        Atom::Eq(a, b)
    }

    /// Disequality, normalized like [`Atom::eq`].
    pub fn neq(a: Term, b: Term) -> Atom {
        if definitely_int(&a) || definitely_int(&b) {
            if let (Some(la), Some(lb)) = (a.as_int_lin(), b.as_int_lin()) {
                return Atom::IntCmp(CmpOp::Ne, la.sub_lin(&lb));
            }
        }
        Atom::Neq(a, b)
    }

    /// `a < b`
    pub fn lt(a: IntLin, b: IntLin) -> Atom {
        Atom::IntCmp(CmpOp::Lt, a.sub_lin(&b))
    }

    /// `a ≤ b`
    pub fn le(a: IntLin, b: IntLin) -> Atom {
        Atom::IntCmp(CmpOp::Le, a.sub_lin(&b))
    }

    pub fn apply_subst(&self, s: &Substitution) -> Atom {
        match self {
            Atom::Eq(a, b) => Atom::eq(s.apply(a), s.apply(b)),
            Atom::Neq(a, b) => Atom::neq(s.apply(a), s.apply(b)),
            Atom::In(a, b) => Atom::In(s.apply(a), s.apply(b)),
            Atom::Nin(a, b) => Atom::Nin(s.apply(a), s.apply(b)),
            Atom::Un(a, b, c) => Atom::Un(s.apply(a), s.apply(b), s.apply(c)),
            Atom::Disj(a, b) => Atom::Disj(s.apply(a), s.apply(b)),
            Atom::Size(a, n) => Atom::Size(s.apply(a), s.apply_lin(n)),
            Atom::SubInt(a, lo, hi) => Atom::SubInt(s.apply(a), s.apply_lin(lo), s.apply_lin(hi)),
            Atom::IntCmp(op, lin) => Atom::IntCmp(*op, s.apply_lin(lin)),
            Atom::IsPair(a) => Atom::IsPair(s.apply(a)),
            Atom::NoPair(a) => Atom::NoPair(s.apply(a)),
        }
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Atom::Eq(a, b) | Atom::Neq(a, b) | Atom::In(a, b) | Atom::Nin(a, b) | Atom::Disj(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Atom::Un(a, b, c) => {
                a.collect_vars(out);
                b.collect_vars(out);
                c.collect_vars(out);
            }
            Atom::Size(a, n) => {
                a.collect_vars(out);
                out.extend(n.vars().cloned());
            }
            Atom::SubInt(a, lo, hi) => {
                a.collect_vars(out);
                out.extend(lo.vars().cloned());
                out.extend(hi.vars().cloned());
            }
            Atom::IntCmp(_, lin) => out.extend(lin.vars().cloned()),
            Atom::IsPair(a) | Atom::NoPair(a) => a.collect_vars(out),
        }
    }

    /// Allowed inside quantifier bodies: equalities, disequalities, integer
    /// comparisons and pair tests only.
    pub fn is_qf_atom(&self) -> bool {
        matches!(
            self,
            Atom::Eq(..) | Atom::Neq(..) | Atom::IntCmp(..) | Atom::IsPair(..) | Atom::NoPair(..)
        )
    }
}

/// Quantifier-free formulas allowed as RUQ bodies.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum QfFormula {
    Atom(Atom),
    And(Vec<QfFormula>),
    Or(Vec<QfFormula>),
}

impl QfFormula {
    pub fn atom(a: Atom) -> QfFormula {
        debug_assert!(a.is_qf_atom(), "atom not allowed in a quantifier body");
        QfFormula::Atom(a)
    }

    pub fn and(parts: Vec<QfFormula>) -> QfFormula {
        match parts.len() {
            1 => parts.into_iter().next().unwrap(),
            _ => QfFormula::And(parts),
        }
    }

    pub fn or(parts: Vec<QfFormula>) -> QfFormula {
        match parts.len() {
            1 => parts.into_iter().next().unwrap(),
            _ => QfFormula::Or(parts),
        }
    }

    pub fn apply_subst(&self, s: &Substitution) -> QfFormula {
        match self {
            QfFormula::Atom(a) => QfFormula::Atom(a.apply_subst(s)),
            QfFormula::And(ps) => QfFormula::And(ps.iter().map(|p| p.apply_subst(s)).collect()),
            QfFormula::Or(ps) => QfFormula::Or(ps.iter().map(|p| p.apply_subst(s)).collect()),
        }
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            QfFormula::Atom(a) => a.collect_vars(out),
            QfFormula::And(ps) | QfFormula::Or(ps) => {
                for p in ps {
                    p.collect_vars(out);
                }
            }
        }
    }

    pub fn to_formula(&self) -> Formula {
        match self {
            QfFormula::Atom(a) => Formula::Atom(a.clone()),
            QfFormula::And(ps) => Formula::and(ps.iter().map(|p| p.to_formula()).collect()),
            QfFormula::Or(ps) => Formula::or(ps.iter().map(|p| p.to_formula()).collect()),
        }
    }
}

/// The quantified term of a RUQ: a variable or a pair of distinct variables.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Binder {
    Single(Var),
    Couple(Var, Var),
}

impl Binder {
    pub fn vars(&self) -> Vec<&Var> {
        match self {
            Binder::Single(v) => vec![v],
            Binder::Couple(a, b) => vec![a, b],
        }
    }
}

/// Body of a restricted universal quantifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RuqBody {
    Qf(QfFormula),
    Nested(Box<Ruq>),
}

/// A restricted universal quantifier `∀ c ∈ S : body`, read as
/// `∀c (c ∈ S ⟹ body)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ruq {
    pub binder: Binder,
    pub domain: Term,
    pub body: RuqBody,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RuqError {
    #[error("quantified pair components must be distinct variables")]
    BinderNotDistinct,
    #[error("binder variable occurs in the quantification domain")]
    BinderInDomain,
}

impl Ruq {
    pub fn new(binder: Binder, domain: Term, body: RuqBody) -> Result<Ruq, RuqError> {
        if let Binder::Couple(a, b) = &binder {
            if a == b {
                return Err(RuqError::BinderNotDistinct);
            }
        }
        for v in binder.vars() {
            if occurs(v, &domain) {
                return Err(RuqError::BinderInDomain);
            }
        }
        Ok(Ruq { binder, domain, body })
    }

    /// Applies a substitution to the domain and body. Binder variables are
    /// solver-local, so they are never in a substitution's domain.
    pub fn apply_subst(&self, s: &Substitution) -> Ruq {
        debug_assert!(self.binder.vars().iter().all(|v| s.get(v).is_none()));
        Ruq {
            binder: self.binder.clone(),
            domain: s.apply(&self.domain),
            body: match &self.body {
                RuqBody::Qf(q) => RuqBody::Qf(q.apply_subst(s)),
                RuqBody::Nested(r) => RuqBody::Nested(Box::new(r.apply_subst(s))),
            },
        }
    }

    /// Free variables: the domain's plus the body's minus binders.
    pub fn collect_free_vars(&self, out: &mut BTreeSet<Var>) {
        self.domain.collect_vars(out);
        let mut body_vars = BTreeSet::new();
        match &self.body {
            RuqBody::Qf(q) => q.collect_vars(&mut body_vars),
            RuqBody::Nested(r) => r.collect_free_vars(&mut body_vars),
        }
        for v in self.binder.vars() {
            body_vars.remove(v);
        }
        out.extend(body_vars);
    }
}

/// Names of the derived constraints shipped with the solver.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DerivedName {
    Leq,
    Gt,
    Geq,
    Inters,
    Diff,
    Subset,
    Rel,
    Pfun,
    Ipfun,
    DresPt,
    DresInt,
    DaresPt,
    DaresInt,
    Arr,
    Get,
    Upd,
    Sorted,
    SortedRange,
    Put,
    Remove,
    User(Arc<str>),
}

impl DerivedName {
    pub fn arity(&self) -> Option<usize> {
        Some(match self {
            DerivedName::Leq | DerivedName::Gt | DerivedName::Geq => 2,
            DerivedName::Inters | DerivedName::Diff => 3,
            DerivedName::Subset => 2,
            DerivedName::Rel | DerivedName::Pfun | DerivedName::Ipfun => 1,
            DerivedName::DresPt | DerivedName::DresInt => 3,
            DerivedName::DaresPt | DerivedName::DaresInt => 3,
            DerivedName::Arr => 2,
            DerivedName::Get => 3,
            DerivedName::Upd => 4,
            DerivedName::Sorted => 1,
            DerivedName::SortedRange => 4,
            DerivedName::Put => 4,
            DerivedName::Remove => 3,
            DerivedName::User(_) => return None,
        })
    }

    pub fn as_str(&self) -> &str {
        match self {
            DerivedName::Leq => "leq",
            DerivedName::Gt => "gt",
            DerivedName::Geq => "geq",
            DerivedName::Inters => "inters",
            DerivedName::Diff => "diff",
            DerivedName::Subset => "subset",
            DerivedName::Rel => "rel",
            DerivedName::Pfun => "pfun",
            DerivedName::Ipfun => "ipfun",
            DerivedName::DresPt | DerivedName::DresInt => "dres",
            DerivedName::DaresPt | DerivedName::DaresInt => "dares",
            DerivedName::Arr => "arr",
            DerivedName::Get => "get",
            DerivedName::Upd => "upd",
            DerivedName::Sorted => "sorted",
            DerivedName::SortedRange => "sorted",
            DerivedName::Put => "put",
            DerivedName::Remove => "remove",
            DerivedName::User(n) => n,
        }
    }
}

/// A call to a derived constraint, kept unexpanded until solving.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DerivedCall {
    pub name: DerivedName,
    pub args: Vec<Term>,
}

/// A formula: and/or tree over atoms, quantifiers and derived calls.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    True,
    False,
    Atom(Atom),
    Ruq(Ruq),
    Derived(DerivedCall),
    And(Vec<Formula>),
    Or(Vec<Formula>),
}

impl Formula {
    pub fn and(mut parts: Vec<Formula>) -> Formula {
        match parts.len() {
            0 => Formula::True,
            1 => parts.pop().unwrap(),
            _ => Formula::And(parts),
        }
    }

    pub fn or(mut parts: Vec<Formula>) -> Formula {
        match parts.len() {
            0 => Formula::False,
            1 => parts.pop().unwrap(),
            _ => Formula::Or(parts),
        }
    }

    pub fn apply_subst(&self, s: &Substitution) -> Formula {
        match self {
            Formula::True => Formula::True,
            Formula::False => Formula::False,
            Formula::Atom(a) => Formula::Atom(a.apply_subst(s)),
            Formula::Ruq(r) => Formula::Ruq(r.apply_subst(s)),
            Formula::Derived(d) => Formula::Derived(DerivedCall {
                name: d.name.clone(),
                args: d.args.iter().map(|t| s.apply(t)).collect(),
            }),
            Formula::And(ps) => Formula::And(ps.iter().map(|p| p.apply_subst(s)).collect()),
            Formula::Or(ps) => Formula::Or(ps.iter().map(|p| p.apply_subst(s)).collect()),
        }
    }

    pub fn collect_free_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(a) => a.collect_vars(out),
            Formula::Ruq(r) => r.collect_free_vars(out),
            Formula::Derived(d) => {
                for t in &d.args {
                    t.collect_vars(out);
                }
            }
            Formula::And(ps) | Formula::Or(ps) => {
                for p in ps {
                    p.collect_free_vars(out);
                }
            }
        }
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_free_vars(&mut out);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DerivedError {
    #[error("unknown derived constraint `{0}`")]
    UnknownDerived(String),
    #[error("`{name}` expects {expected} arguments, got {got}")]
    ArityError {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("`{name}` expects an integer interval as argument {pos}")]
    IntervalExpected { name: String, pos: usize },
}

/// User-defined derived constraints loaded from library files.
#[derive(Debug, Clone, Default)]
pub struct Library {
    defs: std::collections::BTreeMap<String, UserDef>,
}

#[derive(Debug, Clone)]
pub struct UserDef {
    pub params: Vec<Var>,
    pub body: Formula,
}

impl Library {
    pub fn new() -> Self {
        Library::default()
    }

    pub fn get(&self, name: &str) -> Option<&UserDef> {
        self.defs.get(name)
    }

    pub fn define(&mut self, name: String, def: UserDef) {
        self.defs.insert(name, def);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.defs.keys().map(|s| s.as_str())
    }
}

fn ruq1(x: Var, domain: Term, body: QfFormula) -> Formula {
    Formula::Ruq(Ruq::new(Binder::Single(x), domain, RuqBody::Qf(body)).expect("fresh binder"))
}

fn ruq_pair(x: Var, y: Var, domain: Term, body: QfFormula) -> Formula {
    Formula::Ruq(Ruq::new(Binder::Couple(x, y), domain, RuqBody::Qf(body)).expect("fresh binder"))
}

fn ruq_pair2(
    x1: Var,
    y1: Var,
    x2: Var,
    y2: Var,
    domain: Term,
    body: QfFormula,
) -> Formula {
    let inner = Ruq::new(Binder::Couple(x2, y2), domain.clone(), RuqBody::Qf(body))
        .expect("fresh binder");
    Formula::Ruq(
        Ruq::new(Binder::Couple(x1, y1), domain, RuqBody::Nested(Box::new(inner)))
            .expect("fresh binder"),
    )
}

/// `a ≤ b` as a quantifier-body atom.
fn qf_le(a: IntLin, b: IntLin) -> QfFormula {
    QfFormula::Atom(Atom::le(a, b))
}

fn qf_lt(a: IntLin, b: IntLin) -> QfFormula {
    QfFormula::Atom(Atom::lt(a, b))
}

fn lin_of(t: &Term) -> IntLin {
    t.as_int_lin().expect("integer argument expected")
}

/// Expands a derived constraint into its defining formula, issuing fresh
/// variables for the definition's existential variables.
pub fn expand_derived(
    gen: &mut VarGen,
    lib: &Library,
    name: &DerivedName,
    args: &[Term],
) -> Result<Formula, DerivedError> {
    if let Some(expected) = name.arity() {
        if args.len() != expected {
            return Err(DerivedError::ArityError {
                name: name.as_str().to_string(),
                expected,
                got: args.len(),
            });
        }
    }
    let f = match name {
        DerivedName::Leq => Formula::Atom(Atom::le(lin_of(&args[0]), lin_of(&args[1]))),
        DerivedName::Gt => Formula::Atom(Atom::lt(lin_of(&args[1]), lin_of(&args[0]))),
        DerivedName::Geq => Formula::Atom(Atom::le(lin_of(&args[1]), lin_of(&args[0]))),
        DerivedName::Inters => {
            // G = E ∩ F
            let (e, f, g) = (&args[0], &args[1], &args[2]);
            let n1 = Term::var(gen.fresh(Some(Sort::Set)));
            let n2 = Term::var(gen.fresh(Some(Sort::Set)));
            Formula::and(vec![
                Formula::Atom(Atom::Un(g.clone(), n1.clone(), e.clone())),
                Formula::Atom(Atom::Un(g.clone(), n2.clone(), f.clone())),
                Formula::Atom(Atom::Disj(n1, n2)),
            ])
        }
        DerivedName::Diff => {
            // G = E ∖ F
            let (e, f, g) = (&args[0], &args[1], &args[2]);
            let n1 = Term::var(gen.fresh(Some(Sort::Set)));
            Formula::and(vec![
                Formula::Atom(Atom::Un(e.clone(), g.clone(), e.clone())),
                Formula::Atom(Atom::Un(f.clone(), g.clone(), n1.clone())),
                Formula::Atom(Atom::Un(e.clone(), n1.clone(), n1)),
                Formula::Atom(Atom::Disj(f.clone(), g.clone())),
            ])
        }
        DerivedName::Subset => {
            Formula::Atom(Atom::Un(args[0].clone(), args[1].clone(), args[1].clone()))
        }
        DerivedName::Rel => {
            let x = gen.fresh(None);
            ruq1(
                x.clone(),
                args[0].clone(),
                QfFormula::Atom(Atom::IsPair(Term::var(x))),
            )
        }
        DerivedName::Pfun => {
            let (x1, y1) = (gen.fresh(Some(Sort::Int)), gen.fresh(None));
            let (x2, y2) = (gen.fresh(Some(Sort::Int)), gen.fresh(None));
            let body = QfFormula::or(vec![
                QfFormula::Atom(Atom::IntCmp(
                    CmpOp::Ne,
                    IntLin::var(x1.clone()).sub_lin(&IntLin::var(x2.clone())),
                )),
                QfFormula::Atom(Atom::Eq(Term::var(y1.clone()), Term::var(y2.clone()))),
            ]);
            ruq_pair2(x1, y1, x2, y2, args[0].clone(), body)
        }
        DerivedName::Ipfun => {
            let pfun = expand_derived(gen, lib, &DerivedName::Pfun, args)?;
            let (x1, y1) = (gen.fresh(Some(Sort::Int)), gen.fresh(None));
            let (x2, y2) = (gen.fresh(Some(Sort::Int)), gen.fresh(None));
            let body = QfFormula::or(vec![
                QfFormula::Atom(Atom::IntCmp(
                    CmpOp::Eq,
                    IntLin::var(x1.clone()).sub_lin(&IntLin::var(x2.clone())),
                )),
                QfFormula::Atom(Atom::Neq(Term::var(y1.clone()), Term::var(y2.clone()))),
            ]);
            Formula::and(vec![pfun, ruq_pair2(x1, y1, x2, y2, args[0].clone(), body)])
        }
        DerivedName::DresPt | DerivedName::DaresPt => {
            let (z, r, s) = (&args[0], &args[1], &args[2]);
            let n = Term::var(gen.fresh(Some(Sort::Set)));
            let (x1, y1) = (gen.fresh(Some(Sort::Int)), gen.fresh(None));
            let (x2, y2) = (gen.fresh(Some(Sort::Int)), gen.fresh(None));
            let eq_z = |x: &Var| QfFormula::Atom(Atom::eq(Term::var(x.clone()), z.clone()));
            let neq_z = |x: &Var| QfFormula::Atom(Atom::neq(Term::var(x.clone()), z.clone()));
            let (in_s, in_n) = if matches!(name, DerivedName::DresPt) {
                (eq_z(&x1), neq_z(&x2))
            } else {
                (neq_z(&x1), eq_z(&x2))
            };
            Formula::and(vec![
                Formula::Atom(Atom::Un(s.clone(), n.clone(), r.clone())),
                ruq_pair(x1, y1, s.clone(), in_s),
                ruq_pair(x2, y2, n, in_n),
            ])
        }
        DerivedName::DresInt | DerivedName::DaresInt => {
            let (lo, hi) = match &args[0] {
                Term::Interval(lo, hi) => (lo.clone(), hi.clone()),
                _ => {
                    return Err(DerivedError::IntervalExpected {
                        name: name.as_str().to_string(),
                        pos: 1,
                    })
                }
            };
            let (r, s) = (&args[1], &args[2]);
            let n = Term::var(gen.fresh(Some(Sort::Set)));
            let (x1, y1) = (gen.fresh(Some(Sort::Int)), gen.fresh(None));
            let (x2, y2) = (gen.fresh(Some(Sort::Int)), gen.fresh(None));
            let inside = |x: &Var| {
                QfFormula::and(vec![
                    qf_le(lo.clone(), IntLin::var(x.clone())),
                    qf_le(IntLin::var(x.clone()), hi.clone()),
                ])
            };
            let outside = |x: &Var| {
                QfFormula::or(vec![
                    qf_lt(IntLin::var(x.clone()), lo.clone()),
                    qf_lt(hi.clone(), IntLin::var(x.clone())),
                ])
            };
            let (in_s, in_n) = if matches!(name, DerivedName::DresInt) {
                (inside(&x1), outside(&x2))
            } else {
                (outside(&x1), inside(&x2))
            };
            Formula::and(vec![
                Formula::Atom(Atom::Un(s.clone(), n.clone(), r.clone())),
                ruq_pair(x1, y1, s.clone(), in_s),
                ruq_pair(x2, y2, n, in_n),
            ])
        }
        DerivedName::Arr => {
            let (a, m) = (&args[0], lin_of(&args[1]));
            let pfun = expand_derived(gen, lib, &DerivedName::Pfun, &[a.clone()])?;
            let (i, y) = (gen.fresh(Some(Sort::Int)), gen.fresh(None));
            let body = QfFormula::and(vec![
                qf_le(IntLin::constant(1), IntLin::var(i.clone())),
                qf_le(IntLin::var(i.clone()), m.clone()),
            ]);
            Formula::and(vec![
                pfun,
                Formula::Atom(Atom::Size(a.clone(), m)),
                ruq_pair(i, y, a.clone(), body),
            ])
        }
        DerivedName::Get => {
            let (a, i, y) = (&args[0], &args[1], &args[2]);
            let n = Term::var(gen.fresh(Some(Sort::Set)));
            let pair = Term::pair(i.clone(), y.clone());
            Formula::and(vec![
                Formula::Atom(Atom::Eq(a.clone(), Term::set_cons(pair.clone(), n.clone()))),
                Formula::Atom(Atom::Nin(pair, n)),
            ])
        }
        DerivedName::Upd => {
            let (a, i, y, b) = (&args[0], &args[1], &args[2], &args[3]);
            let n = Term::var(gen.fresh(Some(Sort::Set)));
            let old = Term::var(gen.fresh(None));
            let old_pair = Term::pair(i.clone(), old);
            let new_pair = Term::pair(i.clone(), y.clone());
            Formula::and(vec![
                Formula::Atom(Atom::Eq(a.clone(), Term::set_cons(old_pair.clone(), n.clone()))),
                Formula::Atom(Atom::Nin(old_pair, n.clone())),
                Formula::Atom(Atom::Eq(b.clone(), Term::set_cons(new_pair, n))),
            ])
        }
        DerivedName::Sorted => {
            let (i1, v1) = (gen.fresh(Some(Sort::Int)), gen.fresh(Some(Sort::Int)));
            let (i2, v2) = (gen.fresh(Some(Sort::Int)), gen.fresh(Some(Sort::Int)));
            // i1 ≤ i2 ⟹ v1 ≤ v2
            let body = QfFormula::or(vec![
                qf_lt(IntLin::var(i2.clone()), IntLin::var(i1.clone())),
                qf_le(IntLin::var(v1.clone()), IntLin::var(v2.clone())),
            ]);
            ruq_pair2(i1, v1, i2, v2, args[0].clone(), body)
        }
        DerivedName::SortedRange => {
            // sorted(A,n,k,m): vacuous unless 1 ≤ k ≤ m ≤ n, else the
            // restriction of A to [k,m] is sorted.
            let (a, n, k, m) = (&args[0], lin_of(&args[1]), lin_of(&args[2]), lin_of(&args[3]));
            let s = Term::var(gen.fresh(Some(Sort::Set)));
            let dres = expand_derived(
                gen,
                lib,
                &DerivedName::DresInt,
                &[
                    Term::Interval(k.clone(), m.clone()),
                    a.clone(),
                    s.clone(),
                ],
            )?;
            let sorted = expand_derived(gen, lib, &DerivedName::Sorted, &[s])?;
            Formula::or(vec![
                Formula::Atom(Atom::lt(k.clone(), IntLin::constant(1))),
                Formula::Atom(Atom::lt(m.clone(), k)),
                Formula::Atom(Atom::lt(n, m)),
                Formula::and(vec![dres, sorted]),
            ])
        }
        DerivedName::Put => {
            let (h, k, v, t) = (&args[0], &args[1], &args[2], &args[3]);
            let n = Term::var(gen.fresh(Some(Sort::Set)));
            let pair = Term::pair(k.clone(), v.clone());
            let dares = expand_derived(
                gen,
                lib,
                &DerivedName::DaresPt,
                &[k.clone(), h.clone(), n.clone()],
            )?;
            Formula::and(vec![
                Formula::Atom(Atom::Eq(t.clone(), Term::set_cons(pair.clone(), n.clone()))),
                dares,
                Formula::Atom(Atom::Nin(pair, n)),
            ])
        }
        DerivedName::Remove => expand_derived(gen, lib, &DerivedName::DaresPt, args)?,
        DerivedName::User(name_str) => {
            let def = lib
                .get(name_str)
                .ok_or_else(|| DerivedError::UnknownDerived(name_str.to_string()))?
                .clone();
            if def.params.len() != args.len() {
                return Err(DerivedError::ArityError {
                    name: name_str.to_string(),
                    expected: def.params.len(),
                    got: args.len(),
                });
            }
            freshen_with_args(gen, &def.body, &def.params, args)
        }
    };
    Ok(f)
}

/// Instantiates a clause body: parameters are replaced by the call arguments
/// and every other variable (including quantifier binders) is renamed fresh.
fn freshen_with_args(gen: &mut VarGen, body: &Formula, params: &[Var], args: &[Term]) -> Formula {
    let mut subst = Substitution::new();
    for (p, a) in params.iter().zip(args) {
        subst.bind(p.clone(), a.clone());
    }
    let mut locals = body.free_vars();
    let mut binders = BTreeSet::new();
    collect_binders(body, &mut binders);
    locals.extend(binders);
    for v in locals {
        if !params.contains(&v) {
            let fresh = gen.fresh(v.sort());
            subst.bind(v, Term::var(fresh));
        }
    }
    rename_formula(body, &subst)
}

fn collect_binders(f: &Formula, out: &mut BTreeSet<Var>) {
    match f {
        Formula::Ruq(r) => collect_ruq_binders(r, out),
        Formula::And(ps) | Formula::Or(ps) => {
            for p in ps {
                collect_binders(p, out);
            }
        }
        _ => {}
    }
}

fn collect_ruq_binders(r: &Ruq, out: &mut BTreeSet<Var>) {
    out.extend(r.binder.vars().into_iter().cloned());
    if let RuqBody::Nested(inner) = &r.body {
        collect_ruq_binders(inner, out);
    }
}

/// Like `apply_subst` but also renames quantifier binders (which
/// `apply_subst` deliberately leaves alone).
fn rename_formula(f: &Formula, s: &Substitution) -> Formula {
    match f {
        Formula::Ruq(r) => Formula::Ruq(rename_ruq(r, s)),
        Formula::And(ps) => Formula::And(ps.iter().map(|p| rename_formula(p, s)).collect()),
        Formula::Or(ps) => Formula::Or(ps.iter().map(|p| rename_formula(p, s)).collect()),
        other => other.apply_subst(s),
    }
}

fn rename_ruq(r: &Ruq, s: &Substitution) -> Ruq {
    let rename_var = |v: &Var| match s.get(v) {
        Some(Term::Var(w)) => w.clone(),
        _ => v.clone(),
    };
    let binder = match &r.binder {
        Binder::Single(v) => Binder::Single(rename_var(v)),
        Binder::Couple(a, b) => Binder::Couple(rename_var(a), rename_var(b)),
    };
    let body = match &r.body {
        RuqBody::Qf(q) => RuqBody::Qf(q.apply_subst(s)),
        RuqBody::Nested(inner) => RuqBody::Nested(Box::new(rename_ruq(inner, s))),
    };
    Ruq {
        binder,
        domain: s.apply(&r.domain),
        body,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NegateError {
    #[error("no negation is defined for `{0}`")]
    NotNegatable(String),
    #[error(transparent)]
    Derived(#[from] DerivedError),
}

/// Classical negation of a quantifier body, pushed to the literals.
pub fn negate_qf(q: &QfFormula) -> QfFormula {
    match q {
        QfFormula::And(ps) => QfFormula::or(ps.iter().map(negate_qf).collect()),
        QfFormula::Or(ps) => QfFormula::and(ps.iter().map(negate_qf).collect()),
        QfFormula::Atom(a) => QfFormula::Atom(negate_qf_atom(a)),
    }
}

fn negate_qf_atom(a: &Atom) -> Atom {
    match a {
        Atom::Eq(x, y) => Atom::Neq(x.clone(), y.clone()),
        Atom::Neq(x, y) => Atom::Eq(x.clone(), y.clone()),
        Atom::IntCmp(op, lin) => match op {
            CmpOp::Lt => Atom::IntCmp(CmpOp::Le, lin.scale(-1)),
            CmpOp::Le => Atom::IntCmp(CmpOp::Lt, lin.scale(-1)),
            CmpOp::Eq => Atom::IntCmp(CmpOp::Ne, lin.clone()),
            CmpOp::Ne => Atom::IntCmp(CmpOp::Eq, lin.clone()),
        },
        Atom::IsPair(t) => Atom::NoPair(t.clone()),
        Atom::NoPair(t) => Atom::IsPair(t.clone()),
        _ => unreachable!("atom not allowed in a quantifier body"),
    }
}

/// Negation of a formula, using the dedicated complement of each constraint.
/// Fails for derived constraints whose definitions introduce existential
/// variables and that have no dedicated complement.
pub fn negate(gen: &mut VarGen, lib: &Library, f: &Formula) -> Result<Formula, NegateError> {
    Ok(match f {
        Formula::True => Formula::False,
        Formula::False => Formula::True,
        Formula::And(ps) => Formula::or(
            ps.iter()
                .map(|p| negate(gen, lib, p))
                .collect::<Result<_, _>>()?,
        ),
        Formula::Or(ps) => Formula::and(
            ps.iter()
                .map(|p| negate(gen, lib, p))
                .collect::<Result<_, _>>()?,
        ),
        Formula::Atom(a) => negate_atom(gen, a),
        Formula::Ruq(r) => negate_ruq(gen, lib, r)?,
        Formula::Derived(d) => negate_derived(gen, lib, d)?,
    })
}

fn negate_atom(gen: &mut VarGen, a: &Atom) -> Formula {
    match a {
        Atom::Eq(x, y) => Formula::Atom(Atom::neq(x.clone(), y.clone())),
        Atom::Neq(x, y) => Formula::Atom(Atom::eq(x.clone(), y.clone())),
        Atom::In(x, s) => Formula::Atom(Atom::Nin(x.clone(), s.clone())),
        Atom::Nin(x, s) => Formula::Atom(Atom::In(x.clone(), s.clone())),
        Atom::IntCmp(..) | Atom::IsPair(..) | Atom::NoPair(..) => {
            Formula::Atom(negate_qf_atom(a))
        }
        Atom::Un(e, f, g) => {
            let n = Term::var(gen.fresh(None));
            Formula::or(vec![
                Formula::and(vec![
                    Formula::Atom(Atom::In(n.clone(), e.clone())),
                    Formula::Atom(Atom::Nin(n.clone(), g.clone())),
                ]),
                Formula::and(vec![
                    Formula::Atom(Atom::In(n.clone(), f.clone())),
                    Formula::Atom(Atom::Nin(n.clone(), g.clone())),
                ]),
                Formula::and(vec![
                    Formula::Atom(Atom::In(n.clone(), g.clone())),
                    Formula::Atom(Atom::Nin(n.clone(), e.clone())),
                    Formula::Atom(Atom::Nin(n, f.clone())),
                ]),
            ])
        }
        Atom::Disj(e, f) => {
            let n = Term::var(gen.fresh(None));
            Formula::and(vec![
                Formula::Atom(Atom::In(n.clone(), e.clone())),
                Formula::Atom(Atom::In(n, f.clone())),
            ])
        }
        Atom::Size(e, k) => {
            let n = gen.fresh(Some(Sort::Int));
            Formula::and(vec![
                Formula::Atom(Atom::Size(e.clone(), IntLin::var(n.clone()))),
                Formula::Atom(Atom::IntCmp(CmpOp::Ne, IntLin::var(n).sub_lin(k))),
            ])
        }
        Atom::SubInt(e, lo, hi) => {
            let n = gen.fresh(Some(Sort::Int));
            Formula::and(vec![
                Formula::Atom(Atom::In(Term::var(n.clone()), e.clone())),
                Formula::or(vec![
                    Formula::Atom(Atom::lt(IntLin::var(n.clone()), lo.clone())),
                    Formula::Atom(Atom::lt(hi.clone(), IntLin::var(n))),
                ]),
            ])
        }
    }
}

/// `¬(∀c∈E: φ)` is `n ∈ E ∧ ¬φ[c↦n]` with `n` fresh; a pair binder turns
/// into a fresh pair of variables.
fn negate_ruq(gen: &mut VarGen, lib: &Library, r: &Ruq) -> Result<Formula, NegateError> {
    let (witness, subst) = match &r.binder {
        Binder::Single(v) => {
            let n = gen.fresh(v.sort());
            let mut s = Substitution::new();
            s.bind(v.clone(), Term::var(n.clone()));
            (Term::var(n), s)
        }
        Binder::Couple(x, y) => {
            let nx = gen.fresh(Some(Sort::Int));
            let ny = gen.fresh(y.sort());
            let mut s = Substitution::new();
            s.bind(x.clone(), Term::var(nx.clone()));
            s.bind(y.clone(), Term::var(ny.clone()));
            (Term::pair(Term::var(nx), Term::var(ny)), s)
        }
    };
    let neg_body = match &r.body {
        RuqBody::Qf(q) => negate_qf(&q.apply_subst(&subst)).to_formula(),
        RuqBody::Nested(inner) => negate_ruq(gen, lib, &inner.apply_subst(&subst))?,
    };
    Ok(Formula::and(vec![
        Formula::Atom(Atom::In(witness, r.domain.clone())),
        neg_body,
    ]))
}

fn negate_derived(
    gen: &mut VarGen,
    lib: &Library,
    d: &DerivedCall,
) -> Result<Formula, NegateError> {
    let args = &d.args;
    match &d.name {
        DerivedName::Inters => {
            let n = Term::var(gen.fresh(None));
            let (e, f, g) = (&args[0], &args[1], &args[2]);
            Ok(Formula::or(vec![
                Formula::and(vec![
                    Formula::Atom(Atom::In(n.clone(), e.clone())),
                    Formula::Atom(Atom::In(n.clone(), f.clone())),
                    Formula::Atom(Atom::Nin(n.clone(), g.clone())),
                ]),
                Formula::and(vec![
                    Formula::Atom(Atom::In(n.clone(), g.clone())),
                    Formula::or(vec![
                        Formula::Atom(Atom::Nin(n.clone(), e.clone())),
                        Formula::Atom(Atom::Nin(n, f.clone())),
                    ]),
                ]),
            ]))
        }
        DerivedName::Diff => {
            let n = Term::var(gen.fresh(None));
            let (e, f, g) = (&args[0], &args[1], &args[2]);
            Ok(Formula::or(vec![
                Formula::and(vec![
                    Formula::Atom(Atom::In(n.clone(), e.clone())),
                    Formula::Atom(Atom::Nin(n.clone(), f.clone())),
                    Formula::Atom(Atom::Nin(n.clone(), g.clone())),
                ]),
                Formula::and(vec![
                    Formula::Atom(Atom::In(n.clone(), g.clone())),
                    Formula::or(vec![
                        Formula::Atom(Atom::Nin(n.clone(), e.clone())),
                        Formula::Atom(Atom::In(n, f.clone())),
                    ]),
                ]),
            ]))
        }
        DerivedName::Subset => {
            let n = Term::var(gen.fresh(None));
            Ok(Formula::and(vec![
                Formula::Atom(Atom::In(n.clone(), args[0].clone())),
                Formula::Atom(Atom::Nin(n, args[1].clone())),
            ]))
        }
        DerivedName::Get => {
            // get(A,i,y) holds exactly when (i,y) ∈ A.
            Ok(Formula::Atom(Atom::Nin(
                Term::pair(args[1].clone(), args[2].clone()),
                args[0].clone(),
            )))
        }
        name => {
            // Definitions whose expansions add no free (existential)
            // variables negate component-wise; quantifier binders are bound
            // and do not count.
            let expansion = expand_derived(gen, lib, name, args)?;
            let mut arg_vars = BTreeSet::new();
            for t in args {
                t.collect_vars(&mut arg_vars);
            }
            if expansion.free_vars().iter().any(|v| !arg_vars.contains(v)) {
                return Err(NegateError::NotNegatable(name.as_str().to_string()));
            }
            negate(gen, lib, &expansion)
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CmpOp::Lt => write!(f, "<"),
            CmpOp::Le => write!(f, "=<"),
            CmpOp::Eq => write!(f, "="),
            CmpOp::Ne => write!(f, "neq"),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Eq(a, b) => write!(f, "{} = {}", a, b),
            Atom::Neq(a, b) => write!(f, "{} neq {}", a, b),
            Atom::In(a, b) => write!(f, "{} in {}", a, b),
            Atom::Nin(a, b) => write!(f, "{} nin {}", a, b),
            Atom::Un(a, b, c) => write!(f, "un({},{},{})", a, b, c),
            Atom::Disj(a, b) => write!(f, "disj({},{})", a, b),
            Atom::Size(a, n) => write!(f, "size({},{})", a, n),
            Atom::SubInt(a, lo, hi) => write!(f, "subset({},int({},{}))", a, lo, hi),
            Atom::IntCmp(op, lin) => {
                let (pos, neg) = split_lin(lin);
                write!(f, "{} {} {}", pos, op, neg)
            }
            Atom::IsPair(a) => write!(f, "pair({})", a),
            Atom::NoPair(a) => write!(f, "npair({})", a),
        }
    }
}

/// Splits `lin ⋈ 0` into readable sides: positive part on the left, negated
/// negative part on the right.
fn split_lin(lin: &IntLin) -> (IntLin, IntLin) {
    let mut pos = IntLin::constant(0);
    let mut neg = IntLin::constant(0);
    for (v, c) in lin.coeffs() {
        if c > 0 {
            pos = pos.add_lin(&IntLin::var(v.clone()).scale(c));
        } else {
            neg = neg.add_lin(&IntLin::var(v.clone()).scale(-c));
        }
    }
    if lin.konst() > 0 {
        pos = pos.add_const(lin.konst());
    } else {
        neg = neg.add_const(-lin.konst());
    }
    (pos, neg)
}

impl fmt::Display for QfFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_formula())
    }
}

impl fmt::Display for Ruq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.binder {
            Binder::Single(v) => write!(f, "foreach({} in {}, ", v, self.domain)?,
            Binder::Couple(a, b) => write!(f, "foreach([{},{}] in {}, ", a, b, self.domain)?,
        }
        match &self.body {
            RuqBody::Qf(q) => write!(f, "{})", q),
            RuqBody::Nested(r) => write!(f, "{})", r),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => write!(f, "true"),
            Formula::False => write!(f, "false"),
            Formula::Atom(a) => write!(f, "{}", a),
            Formula::Ruq(r) => write!(f, "{}", r),
            Formula::Derived(d) => {
                write!(f, "{}(", d.name.as_str())?;
                for (i, a) in d.args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{}", a)?;
                }
                write!(f, ")")
            }
            Formula::And(ps) => {
                for (i, p) in ps.iter().enumerate() {
                    if i > 0 {
                        write!(f, " & ")?;
                    }
                    match p {
                        Formula::Or(_) => write!(f, "({})", p)?,
                        _ => write!(f, "{}", p)?,
                    }
                }
                Ok(())
            }
            Formula::Or(ps) => {
                for (i, p) in ps.iter().enumerate() {
                    if i > 0 {
                        write!(f, " or ")?;
                    }
                    match p {
                        Formula::And(_) | Formula::Or(_) => write!(f, "({})", p)?,
                        _ => write!(f, "{}", p)?,
                    }
                }
                Ok(())
            }
        }
    }
}

/// Well-sortedness check used before solving: argument sorts of every atom
/// and quantifier match the signature.
pub fn check_formula_sorts(f: &Formula) -> Result<(), crate::term::SortError> {
    match f {
        Formula::True | Formula::False => Ok(()),
        Formula::Atom(a) => check_atom_sorts(a),
        Formula::Ruq(r) => check_ruq_sorts(r),
        Formula::Derived(d) => {
            for t in &d.args {
                sort_of(t)?;
            }
            Ok(())
        }
        Formula::And(ps) | Formula::Or(ps) => {
            for p in ps {
                check_formula_sorts(p)?;
            }
            Ok(())
        }
    }
}

fn expect_set(context: &'static str, t: &Term) -> Result<(), crate::term::SortError> {
    match sort_of(t)? {
        None | Some(Sort::Set) => Ok(()),
        s => Err(crate::term::SortError {
            context,
            expected: "set",
            found: s.map(|s| s.to_string()).unwrap_or_default(),
            subterm: t.to_string(),
        }),
    }
}

fn check_atom_sorts(a: &Atom) -> Result<(), crate::term::SortError> {
    match a {
        Atom::Eq(x, y) | Atom::Neq(x, y) => {
            let (sx, sy) = (sort_of(x)?, sort_of(y)?);
            match (sx, sy) {
                (Some(a), Some(b))
                    if a != b
                        && !(matches!((a, b), (Sort::Pair, Sort::Ur) | (Sort::Ur, Sort::Pair))) =>
                {
                    Err(crate::term::SortError {
                        context: "equality",
                        expected: "same-sorted terms",
                        found: format!("{} vs {}", a, b),
                        subterm: format!("{} / {}", x, y),
                    })
                }
                _ => Ok(()),
            }
        }
        Atom::In(x, s) | Atom::Nin(x, s) => {
            sort_of(x)?;
            expect_set("membership domain", s)
        }
        Atom::Un(a, b, c) => {
            expect_set("un argument", a)?;
            expect_set("un argument", b)?;
            expect_set("un argument", c)
        }
        Atom::Disj(a, b) => {
            expect_set("disj argument", a)?;
            expect_set("disj argument", b)
        }
        Atom::Size(e, _) => expect_set("size argument", e),
        Atom::SubInt(e, _, _) => expect_set("subset argument", e),
        Atom::IntCmp(..) => Ok(()),
        Atom::IsPair(t) | Atom::NoPair(t) => {
            sort_of(t)?;
            Ok(())
        }
    }
}

fn check_ruq_sorts(r: &Ruq) -> Result<(), crate::term::SortError> {
    expect_set("quantification domain", &r.domain)?;
    match &r.body {
        RuqBody::Qf(q) => check_qf_sorts(q),
        RuqBody::Nested(inner) => check_ruq_sorts(inner),
    }
}

fn check_qf_sorts(q: &QfFormula) -> Result<(), crate::term::SortError> {
    match q {
        QfFormula::Atom(a) => check_atom_sorts(a),
        QfFormula::And(ps) | QfFormula::Or(ps) => {
            for p in ps {
                check_qf_sorts(p)?;
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (VarGen, Library) {
        (VarGen::new(), Library::new())
    }

    #[test]
    fn subset_expands_to_un() {
        let (mut g, lib) = setup();
        let e = Term::var(g.named("E", Some(Sort::Set)));
        let f = Term::var(g.named("F", Some(Sort::Set)));
        let out = expand_derived(&mut g, &lib, &DerivedName::Subset, &[e.clone(), f.clone()])
            .unwrap();
        assert_eq!(out, Formula::Atom(Atom::Un(e, f.clone(), f)));
    }

    #[test]
    fn get_expands_to_membership_shape() {
        let (mut g, lib) = setup();
        let a = Term::var(g.named("A", Some(Sort::Set)));
        let i = Term::var(g.named("I", Some(Sort::Int)));
        let y = Term::var(g.named("Y", None));
        let out = expand_derived(&mut g, &lib, &DerivedName::Get, &[a.clone(), i, y]).unwrap();
        match out {
            Formula::And(parts) => {
                assert_eq!(parts.len(), 2);
                assert!(matches!(&parts[0], Formula::Atom(Atom::Eq(lhs, rhs))
                    if *lhs == a && matches!(rhs, Term::SetCons(..))));
                assert!(matches!(&parts[1], Formula::Atom(Atom::Nin(..))));
            }
            other => panic!("unexpected expansion {other:?}"),
        }
    }

    #[test]
    fn arr_zero_expands_with_size_zero() {
        let (mut g, lib) = setup();
        let a = Term::var(g.named("A", Some(Sort::Set)));
        let out = expand_derived(&mut g, &lib, &DerivedName::Arr, &[a.clone(), Term::int(0)])
            .unwrap();
        let Formula::And(parts) = out else {
            panic!("expected conjunction")
        };
        assert!(parts
            .iter()
            .any(|p| matches!(p, Formula::Atom(Atom::Size(e, k)) if *e == a && k.as_constant() == Some(0))));
        assert!(parts.iter().any(|p| matches!(p, Formula::Ruq(_))));
    }

    #[test]
    fn arity_mismatch_is_reported() {
        let (mut g, lib) = setup();
        let err = expand_derived(&mut g, &lib, &DerivedName::Arr, &[Term::int(0)]).unwrap_err();
        assert!(matches!(err, DerivedError::ArityError { expected: 2, got: 1, .. }));
    }

    #[test]
    fn unknown_user_constraint() {
        let (mut g, lib) = setup();
        let err = expand_derived(
            &mut g,
            &lib,
            &DerivedName::User(Arc::from("nosuch")),
            &[],
        )
        .unwrap_err();
        assert!(matches!(err, DerivedError::UnknownDerived(_)));
    }

    #[test]
    fn negate_leq_is_strict_less() {
        let (mut g, lib) = setup();
        let i = g.named("I", Some(Sort::Int));
        let j = g.named("J", Some(Sort::Int));
        let leq = Formula::Derived(DerivedCall {
            name: DerivedName::Leq,
            args: vec![Term::var(i.clone()), Term::var(j.clone())],
        });
        let neg = negate(&mut g, &lib, &leq).unwrap();
        // ¬(i ≤ j) is j < i, i.e. j − i < 0.
        assert_eq!(
            neg,
            Formula::Atom(Atom::lt(IntLin::var(j), IntLin::var(i)))
        );
    }

    #[test]
    fn negate_ruq_produces_membership_witness() {
        let (mut g, lib) = setup();
        let e = Term::var(g.named("E", Some(Sort::Set)));
        let x = g.fresh(Some(Sort::Int));
        // ∀x∈E: 0 < x
        let r = Ruq::new(
            Binder::Single(x.clone()),
            e.clone(),
            RuqBody::Qf(QfFormula::Atom(Atom::lt(
                IntLin::constant(0),
                IntLin::var(x),
            ))),
        )
        .unwrap();
        let neg = negate(&mut g, &lib, &Formula::Ruq(r)).unwrap();
        let Formula::And(parts) = neg else {
            panic!("expected conjunction")
        };
        assert!(matches!(&parts[0], Formula::Atom(Atom::In(_, d)) if *d == e));
        // ¬(0 < n) is n ≤ 0.
        assert!(matches!(&parts[1], Formula::Atom(Atom::IntCmp(CmpOp::Le, _))));
    }

    #[test]
    fn negate_true_false() {
        let (mut g, lib) = setup();
        assert_eq!(negate(&mut g, &lib, &Formula::True).unwrap(), Formula::False);
        assert_eq!(negate(&mut g, &lib, &Formula::False).unwrap(), Formula::True);
    }

    #[test]
    fn negate_upd_is_rejected() {
        let (mut g, lib) = setup();
        let mut mk = |n: &str| Term::var(g.named(n, Some(Sort::Set)));
        let a = mk("A");
        let b = mk("B");
        let upd = Formula::Derived(DerivedCall {
            name: DerivedName::Upd,
            args: vec![a, Term::int(1), Term::int(2), b],
        });
        let err = negate(&mut g, &lib, &upd).unwrap_err();
        assert!(matches!(err, NegateError::NotNegatable(_)));
    }

    #[test]
    fn negate_arr_succeeds_componentwise() {
        let (mut g, lib) = setup();
        let a = Term::var(g.named("A", Some(Sort::Set)));
        let m = Term::var(g.named("M", Some(Sort::Int)));
        let arr = Formula::Derived(DerivedCall {
            name: DerivedName::Arr,
            args: vec![a, m],
        });
        let neg = negate(&mut g, &lib, &arr).unwrap();
        assert!(matches!(neg, Formula::Or(_)));
    }

    #[test]
    fn negate_qf_implication() {
        let (mut g, _) = setup();
        let x1 = g.fresh(Some(Sort::Int));
        let x2 = g.fresh(Some(Sort::Int));
        let y1 = g.fresh(None);
        let y2 = g.fresh(None);
        // x1 = x2 ⟹ y1 = y2, stored as (x1 ≠ x2) ∨ (y1 = y2)
        let q = QfFormula::or(vec![
            QfFormula::Atom(Atom::IntCmp(
                CmpOp::Ne,
                IntLin::var(x1.clone()).sub_lin(&IntLin::var(x2.clone())),
            )),
            QfFormula::Atom(Atom::Eq(Term::var(y1.clone()), Term::var(y2.clone()))),
        ]);
        let neg = negate_qf(&q);
        assert_eq!(
            neg,
            QfFormula::and(vec![
                QfFormula::Atom(Atom::IntCmp(
                    CmpOp::Eq,
                    IntLin::var(x1).sub_lin(&IntLin::var(x2)),
                )),
                QfFormula::Atom(Atom::Neq(Term::var(y1), Term::var(y2))),
            ])
        );
    }

    #[test]
    fn user_definition_expands_with_fresh_locals() {
        let (mut g, mut lib) = setup();
        let p = g.named("P", Some(Sort::Set));
        let local = g.named("L", Some(Sort::Set));
        // mypred(P) :- un(P, L, L).
        lib.define(
            "mypred".into(),
            UserDef {
                params: vec![p.clone()],
                body: Formula::Atom(Atom::Un(
                    Term::var(p),
                    Term::var(local.clone()),
                    Term::var(local.clone()),
                )),
            },
        );
        let arg = Term::var(g.named("X", Some(Sort::Set)));
        let out1 = expand_derived(
            &mut g,
            &lib,
            &DerivedName::User(Arc::from("mypred")),
            &[arg.clone()],
        )
        .unwrap();
        let out2 = expand_derived(
            &mut g,
            &lib,
            &DerivedName::User(Arc::from("mypred")),
            &[arg.clone()],
        )
        .unwrap();
        // The local variable is renamed fresh on each expansion.
        assert_ne!(out1, out2);
        let Formula::Atom(Atom::Un(a, l1, l2)) = &out1 else {
            panic!("unexpected shape")
        };
        assert_eq!(a, &arg);
        assert_eq!(l1, l2);
        assert_ne!(l1, &Term::var(local));
    }
}
