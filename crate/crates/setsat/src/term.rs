//! Sorted term language: variables, linear integer expressions, ordered
//! pairs, uninterpreted terms, extensional sets and integer intervals.
//!
//! Terms are immutable values; sharing them across threads is safe. All
//! solver-side mutation happens through [`Substitution`] composition and the
//! per-solver [`VarGen`] counter.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

/// The four sorts of the language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sort {
    /// Hereditarily finite sets.
    Set,
    /// Integers.
    Int,
    /// Ordered pairs `(i, x)` with `i` an integer and `x` an integer or
    /// ur-element.
    Pair,
    /// Uninterpreted (non-set, non-integer) elements. The pair domain is a
    /// subset of the ur-element domain, so `Pair` refines `Ur`.
    Ur,
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Set => write!(f, "set"),
            Sort::Int => write!(f, "int"),
            Sort::Pair => write!(f, "pair"),
            Sort::Ur => write!(f, "ur"),
        }
    }
}

/// Returns true when a variable committed to `var` may be bound to a term of
/// sort `term`. `Pair` refines `Ur`: both denote ur-elements.
pub fn sort_compatible(var: Sort, term: Sort) -> bool {
    var == term || (var == Sort::Ur && term == Sort::Pair)
}

/// A logical variable. Identity is the numeric id; the optional name is the
/// surface spelling (absent for solver-generated variables, which print as
/// `_N<id>`). The sort commitment is fixed at creation; `None` means the
/// variable is not yet constrained to a single sort.
#[derive(Debug, Clone)]
pub struct Var {
    id: u32,
    sort: Option<Sort>,
    name: Option<Arc<str>>,
}

impl Var {
    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn sort(&self) -> Option<Sort> {
        self.sort
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    /// True for variables issued by [`VarGen::fresh`] rather than named in a
    /// source query.
    pub fn is_fresh(&self) -> bool {
        self.name.is_none()
    }
}

impl PartialEq for Var {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}
impl Eq for Var {}
impl PartialOrd for Var {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Var {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.id.cmp(&other.id)
    }
}
impl std::hash::Hash for Var {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.id.hash(state);
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.name {
            Some(n) => write!(f, "{}", n),
            None => write!(f, "_N{}", self.id),
        }
    }
}

/// Issues variables with identifiers never repeated within one solver
/// instance. Fresh variables print as `_N<id>`.
#[derive(Debug, Default, Clone)]
pub struct VarGen {
    next: u32,
}

impl VarGen {
    pub fn new() -> Self {
        VarGen { next: 0 }
    }

    /// A fresh, unnamed variable of the given sort commitment.
    pub fn fresh(&mut self, sort: Option<Sort>) -> Var {
        let id = self.next;
        self.next += 1;
        Var { id, sort, name: None }
    }

    /// A named variable (used by the parser for source identifiers).
    pub fn named(&mut self, name: &str, sort: Option<Sort>) -> Var {
        let id = self.next;
        self.next += 1;
        Var {
            id,
            sort,
            name: Some(Arc::from(name)),
        }
    }
}

/// A linear integer expression: `konst + Σ coeff·var`. Kept canonical: no
/// zero coefficients, variables ordered by id.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct IntLin {
    coeffs: BTreeMap<Var, i64>,
    konst: i64,
}

fn mul(a: i64, b: i64) -> i64 {
    a.checked_mul(b).expect("integer coefficient overflow")
}
fn add(a: i64, b: i64) -> i64 {
    a.checked_add(b).expect("integer coefficient overflow")
}

impl IntLin {
    pub fn constant(k: i64) -> Self {
        IntLin {
            coeffs: BTreeMap::new(),
            konst: k,
        }
    }

    pub fn var(v: Var) -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(v, 1);
        IntLin { coeffs, konst: 0 }
    }

    pub fn konst(&self) -> i64 {
        self.konst
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (&Var, i64)> {
        self.coeffs.iter().map(|(v, c)| (v, *c))
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn as_constant(&self) -> Option<i64> {
        if self.coeffs.is_empty() {
            Some(self.konst)
        } else {
            None
        }
    }

    /// The single variable when the expression is exactly `1·v + 0`.
    pub fn as_var(&self) -> Option<&Var> {
        if self.konst == 0 && self.coeffs.len() == 1 {
            let (v, c) = self.coeffs.iter().next().unwrap();
            if *c == 1 {
                return Some(v);
            }
        }
        None
    }

    pub fn add_lin(&self, other: &IntLin) -> IntLin {
        let mut out = self.clone();
        out.konst = add(out.konst, other.konst);
        for (v, c) in &other.coeffs {
            let e = out.coeffs.entry(v.clone()).or_insert(0);
            *e = add(*e, *c);
        }
        out.coeffs.retain(|_, c| *c != 0);
        out
    }

    pub fn scale(&self, k: i64) -> IntLin {
        if k == 0 {
            return IntLin::constant(0);
        }
        IntLin {
            coeffs: self.coeffs.iter().map(|(v, c)| (v.clone(), mul(*c, k))).collect(),
            konst: mul(self.konst, k),
        }
    }

    pub fn sub_lin(&self, other: &IntLin) -> IntLin {
        self.add_lin(&other.scale(-1))
    }

    pub fn add_const(&self, k: i64) -> IntLin {
        let mut out = self.clone();
        out.konst = add(out.konst, k);
        out
    }

    pub fn vars(&self) -> impl Iterator<Item = &Var> {
        self.coeffs.keys()
    }

    /// Replace `v` by a linear expression.
    pub fn subst_var(&self, v: &Var, by: &IntLin) -> IntLin {
        match self.coeffs.get(v) {
            None => self.clone(),
            Some(&c) => {
                let mut rest = self.clone();
                rest.coeffs.remove(v);
                rest.add_lin(&by.scale(c))
            }
        }
    }
}

impl fmt::Display for IntLin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "{}", self.konst);
        }
        let mut first = true;
        for (v, c) in &self.coeffs {
            if first {
                match *c {
                    1 => write!(f, "{}", v)?,
                    -1 => write!(f, "-{}", v)?,
                    c => write!(f, "{}*{}", c, v)?,
                }
                first = false;
            } else if *c > 0 {
                if *c == 1 {
                    write!(f, "+{}", v)?;
                } else {
                    write!(f, "+{}*{}", c, v)?;
                }
            } else if *c == -1 {
                write!(f, "-{}", v)?;
            } else {
                write!(f, "{}*{}", c, v)?;
            }
        }
        if self.konst > 0 {
            write!(f, "+{}", self.konst)?;
        } else if self.konst < 0 {
            write!(f, "{}", self.konst)?;
        }
        Ok(())
    }
}

/// An uninterpreted functor application; arity 0 terms are constants.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Functor {
    pub name: Arc<str>,
    pub args: Vec<Term>,
}

/// The term language. Integer constants are `Int` with an empty coefficient
/// map; there is no separate constant constructor.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(Var),
    /// A linear integer expression. Never exactly `1·v + 0`; that form is
    /// normalized to `Var(v)` by [`Term::int_lin`].
    Int(IntLin),
    /// Ordered pair; first component of sort `Int`, second `Int` or `Ur`.
    Pair(Box<Term>, Box<Term>),
    /// Uninterpreted term of sort `Ur`.
    Ur(Functor),
    EmptySet,
    /// `{elem ⊔ rest}`: the set `{elem} ∪ rest`.
    SetCons(Box<Term>, Box<Term>),
    /// Integer interval `[lo, hi]`; empty when `hi < lo`.
    Interval(IntLin, IntLin),
}

impl Term {
    pub fn var(v: Var) -> Term {
        Term::Var(v)
    }

    pub fn int(k: i64) -> Term {
        Term::Int(IntLin::constant(k))
    }

    /// Canonical constructor for integer expressions: a bare `1·v` becomes
    /// `Var(v)` so each expression has a single representation.
    pub fn int_lin(lin: IntLin) -> Term {
        if let Some(v) = lin.as_var() {
            Term::Var(v.clone())
        } else {
            Term::Int(lin)
        }
    }

    pub fn pair(a: Term, b: Term) -> Term {
        Term::Pair(Box::new(a), Box::new(b))
    }

    pub fn ur(name: &str, args: Vec<Term>) -> Term {
        Term::Ur(Functor {
            name: Arc::from(name),
            args,
        })
    }

    pub fn set_cons(elem: Term, rest: Term) -> Term {
        Term::SetCons(Box::new(elem), Box::new(rest))
    }

    /// `{t1,…,tn ⊔ tail}` from a list of elements.
    pub fn set_from(elems: Vec<Term>, tail: Term) -> Term {
        elems
            .into_iter()
            .rev()
            .fold(tail, |acc, e| Term::set_cons(e, acc))
    }

    /// Views the term as a linear integer expression if it is int-sorted (or
    /// an uncommitted variable, which the context then treats as an integer).
    pub fn as_int_lin(&self) -> Option<IntLin> {
        match self {
            Term::Int(l) => Some(l.clone()),
            Term::Var(v) => match v.sort() {
                None | Some(Sort::Int) => Some(IntLin::var(v.clone())),
                _ => None,
            },
            _ => None,
        }
    }

    /// Iterates an extensional set term: returns the listed elements and the
    /// final tail (which is not `SetCons`).
    pub fn set_parts(&self) -> (Vec<&Term>, &Term) {
        let mut elems = Vec::new();
        let mut cur = self;
        while let Term::SetCons(e, rest) = cur {
            elems.push(e.as_ref());
            cur = rest.as_ref();
        }
        (elems, cur)
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::Int(l) => out.extend(l.vars().cloned()),
            Term::Pair(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Term::Ur(f) => {
                for a in &f.args {
                    a.collect_vars(out);
                }
            }
            Term::EmptySet => {}
            Term::SetCons(e, r) => {
                e.collect_vars(out);
                r.collect_vars(out);
            }
            Term::Interval(lo, hi) => {
                out.extend(lo.vars().cloned());
                out.extend(hi.vars().cloned());
            }
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{}", v),
            Term::Int(l) => write!(f, "{}", l),
            Term::Pair(a, b) => write!(f, "[{},{}]", a, b),
            Term::Ur(fun) => {
                write!(f, "{}", fun.name)?;
                if !fun.args.is_empty() {
                    write!(f, "(")?;
                    for (i, a) in fun.args.iter().enumerate() {
                        if i > 0 {
                            write!(f, ",")?;
                        }
                        write!(f, "{}", a)?;
                    }
                    write!(f, ")")?;
                }
                Ok(())
            }
            Term::EmptySet => write!(f, "{{}}"),
            Term::SetCons(..) => {
                let (elems, tail) = self.set_parts();
                write!(f, "{{")?;
                for (i, e) in elems.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{}", e)?;
                }
                match tail {
                    Term::EmptySet => write!(f, "}}"),
                    t => write!(f, "/{}}}", t),
                }
            }
            Term::Interval(lo, hi) => write!(f, "int({},{})", lo, hi),
        }
    }
}

/// Sort error: a constructor received an argument of the wrong sort.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("sort error: {context}: expected {expected}, found {found} in `{subterm}`")]
pub struct SortError {
    pub context: &'static str,
    pub expected: &'static str,
    pub found: String,
    pub subterm: String,
}

fn sort_err(context: &'static str, expected: &'static str, t: &Term, s: Option<Sort>) -> SortError {
    SortError {
        context,
        expected,
        found: match s {
            Some(s) => s.to_string(),
            None => "unconstrained variable".to_string(),
        },
        subterm: t.to_string(),
    }
}

/// The sort of a well-formed term, or the offending subterm. `Ok(None)` is
/// returned only for variables without a sort commitment.
pub fn sort_of(t: &Term) -> Result<Option<Sort>, SortError> {
    match t {
        Term::Var(v) => Ok(v.sort()),
        Term::Int(_) => Ok(Some(Sort::Int)),
        Term::Pair(a, b) => {
            let sa = sort_of(a)?;
            if !matches!(sa, None | Some(Sort::Int)) {
                return Err(sort_err("pair first component", "int", a, sa));
            }
            let sb = sort_of(b)?;
            if matches!(sb, Some(Sort::Set)) {
                return Err(sort_err("pair second component", "int or ur", b, sb));
            }
            Ok(Some(Sort::Pair))
        }
        Term::Ur(fun) => {
            for a in &fun.args {
                let sa = sort_of(a)?;
                if !matches!(sa, None | Some(Sort::Ur) | Some(Sort::Pair)) {
                    return Err(sort_err("ur-term argument", "ur", a, sa));
                }
            }
            Ok(Some(Sort::Ur))
        }
        Term::EmptySet => Ok(Some(Sort::Set)),
        Term::SetCons(e, rest) => {
            sort_of(e)?;
            let sr = sort_of(rest)?;
            if !matches!(sr, None | Some(Sort::Set)) {
                return Err(sort_err("set rest", "set", rest, sr));
            }
            Ok(Some(Sort::Set))
        }
        Term::Interval(..) => Ok(Some(Sort::Set)),
    }
}

/// True iff `v` appears anywhere in `t`.
pub fn occurs(v: &Var, t: &Term) -> bool {
    match t {
        Term::Var(w) => v == w,
        Term::Int(l) => l.vars().any(|w| w == v),
        Term::Pair(a, b) => occurs(v, a) || occurs(v, b),
        Term::Ur(f) => f.args.iter().any(|a| occurs(v, a)),
        Term::EmptySet => false,
        Term::SetCons(e, r) => occurs(v, e) || occurs(v, r),
        Term::Interval(lo, hi) => lo.vars().any(|w| w == v) || hi.vars().any(|w| w == v),
    }
}

/// An idempotent (triangular) substitution: no bound variable occurs in any
/// right-hand side.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Substitution {
    map: BTreeMap<Var, Term>,
}

impl Substitution {
    pub fn new() -> Self {
        Substitution::default()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(&self, v: &Var) -> Option<&Term> {
        self.map.get(v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &Term)> {
        self.map.iter()
    }

    pub fn domain(&self) -> impl Iterator<Item = &Var> {
        self.map.keys()
    }

    /// Binds `v ↦ t`, first applying the existing substitution to `t` and
    /// then rewriting existing right-hand sides, so the result stays
    /// idempotent. Panics if `v` occurs in the resolved `t`; callers perform
    /// the occurs check.
    pub fn bind(&mut self, v: Var, t: Term) {
        let t = self.apply(&t);
        assert!(!occurs(&v, &t), "substitution occurs check violated");
        let single = Substitution {
            map: BTreeMap::from([(v.clone(), t.clone())]),
        };
        for rhs in self.map.values_mut() {
            *rhs = single.apply(rhs);
        }
        self.map.insert(v, t);
    }

    /// Simultaneous replacement. Integer expressions are re-normalized, and
    /// binding a variable that occurs in an integer expression to a non-int
    /// term is a caller contract violation.
    pub fn apply(&self, t: &Term) -> Term {
        if self.map.is_empty() {
            return t.clone();
        }
        match t {
            Term::Var(v) => match self.map.get(v) {
                Some(t2) => t2.clone(),
                None => t.clone(),
            },
            Term::Int(l) => Term::int_lin(self.apply_lin(l)),
            Term::Pair(a, b) => Term::pair(self.apply(a), self.apply(b)),
            Term::Ur(f) => Term::Ur(Functor {
                name: f.name.clone(),
                args: f.args.iter().map(|a| self.apply(a)).collect(),
            }),
            Term::EmptySet => Term::EmptySet,
            Term::SetCons(e, r) => Term::set_cons(self.apply(e), self.apply(r)),
            Term::Interval(lo, hi) => Term::Interval(self.apply_lin(lo), self.apply_lin(hi)),
        }
    }

    /// Applies the substitution inside a linear expression. All bindings of
    /// variables occurring here must themselves be int-viewable.
    pub fn apply_lin(&self, l: &IntLin) -> IntLin {
        let mut out = l.clone();
        for (v, t) in &self.map {
            if out.coeffs.contains_key(v) {
                let by = t
                    .as_int_lin()
                    .expect("non-integer term substituted into integer expression");
                out = out.subst_var(v, &by);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> VarGen {
        VarGen::new()
    }

    #[test]
    fn sort_of_interval_is_set() {
        let t = Term::Interval(IntLin::constant(1), IntLin::constant(5));
        assert_eq!(sort_of(&t), Ok(Some(Sort::Set)));
    }

    #[test]
    fn sort_of_pair_with_ur_second() {
        let t = Term::pair(Term::int(1), Term::ur("a", vec![]));
        assert_eq!(sort_of(&t), Ok(Some(Sort::Pair)));
    }

    #[test]
    fn sort_of_rejects_int_as_set_rest() {
        let t = Term::set_cons(Term::int(1), Term::int(3));
        let err = sort_of(&t).unwrap_err();
        assert_eq!(err.context, "set rest");
        assert_eq!(err.expected, "set");
    }

    #[test]
    fn apply_subst_normalizes_arithmetic() {
        let mut g = ctx();
        let x = g.named("X", Some(Sort::Int));
        let mut s = Substitution::new();
        s.bind(x.clone(), Term::int(3));
        let t = Term::int_lin(IntLin::var(x).add_const(1));
        assert_eq!(s.apply(&t), Term::int(4));
    }

    #[test]
    fn apply_empty_subst_is_identity() {
        let mut g = ctx();
        let e = g.named("E", Some(Sort::Set));
        let t = Term::set_cons(Term::int(2), Term::var(e));
        assert_eq!(Substitution::new().apply(&t), t);
    }

    #[test]
    fn apply_subst_into_set_rest() {
        let mut g = ctx();
        let e = g.named("E", Some(Sort::Set));
        let mut s = Substitution::new();
        s.bind(e.clone(), Term::set_cons(Term::int(1), Term::EmptySet));
        let t = Term::set_cons(Term::int(2), Term::var(e));
        assert_eq!(
            s.apply(&t),
            Term::set_cons(
                Term::int(2),
                Term::set_cons(Term::int(1), Term::EmptySet)
            )
        );
    }

    #[test]
    fn occurs_checks() {
        let mut g = ctx();
        let x = g.named("X", None);
        let e = g.named("E", Some(Sort::Set));
        let k = g.named("K", Some(Sort::Int));
        let m = g.named("M", Some(Sort::Int));
        assert!(occurs(&x, &Term::set_cons(Term::var(x.clone()), Term::var(e.clone()))));
        assert!(!occurs(&x, &Term::EmptySet));
        let iv = Term::Interval(IntLin::var(k), IntLin::var(m));
        assert!(!occurs(&e, &iv));
    }

    #[test]
    fn fresh_vars_distinct_and_printed_as_underscore_n() {
        let mut g = ctx();
        let a = g.fresh(Some(Sort::Set));
        let b = g.fresh(Some(Sort::Set));
        assert_ne!(a, b);
        let shown = format!("{}", g.fresh(Some(Sort::Int)));
        assert!(shown.starts_with("_N"));
        assert!(shown[2..].chars().all(|c| c.is_ascii_digit()));
    }

    #[test]
    fn subst_idempotent_and_sort_preserving() {
        let mut g = ctx();
        let x = g.named("X", None);
        let e = g.named("E", Some(Sort::Set));
        let mut s = Substitution::new();
        s.bind(e.clone(), Term::set_cons(Term::int(1), Term::EmptySet));
        s.bind(x.clone(), Term::ur("a", vec![]));
        let t = Term::set_cons(Term::var(x), Term::var(e));
        let once = s.apply(&t);
        let twice = s.apply(&once);
        assert_eq!(once, twice);
        assert_eq!(sort_of(&once).unwrap(), sort_of(&t).unwrap());
    }

    #[test]
    fn int_lin_canonical_form() {
        let mut g = ctx();
        let x = g.named("X", Some(Sort::Int));
        let y = g.named("Y", Some(Sort::Int));
        // X + Y - X == Y, and the bare-variable form collapses to Var.
        let lin = IntLin::var(x.clone())
            .add_lin(&IntLin::var(y.clone()))
            .sub_lin(&IntLin::var(x));
        assert_eq!(Term::int_lin(lin), Term::var(y));
    }

    #[test]
    fn triangular_bind_rewrites_existing_rhs() {
        let mut g = ctx();
        let e = g.named("E", Some(Sort::Set));
        let f = g.named("F", Some(Sort::Set));
        let mut s = Substitution::new();
        s.bind(e.clone(), Term::set_cons(Term::int(1), Term::var(f.clone())));
        s.bind(f.clone(), Term::EmptySet);
        // E's binding must no longer mention F.
        let te = s.get(&e).unwrap();
        assert!(!occurs(&f, te));
    }
}
