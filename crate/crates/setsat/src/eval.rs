//! Ground evaluation: the interpretation of terms and formulas over
//! hereditarily finite sets, integers, ordered pairs and ur-elements.
//!
//! This is the semantic oracle the whole test suite is written against. It
//! is deliberately independent of the rewriting solver: sets are evaluated
//! extensionally, quantifiers by iteration, derived constraints by their
//! interpretation (`inters(E,F,G)` as `G = E ∩ F` and so on).

use crate::formula::{Atom, Binder, CmpOp, DerivedCall, DerivedName, Formula, QfFormula, Ruq, RuqBody};
use crate::term::{IntLin, Substitution, Term, Var};
use std::collections::{BTreeMap, BTreeSet};

/// A ground value of the interpretation domain.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Int(i64),
    /// Uninterpreted functor application.
    Ur(String, Vec<Value>),
    Pair(Box<Value>, Box<Value>),
    Set(BTreeSet<Value>),
}

impl Value {
    pub fn pair(a: Value, b: Value) -> Value {
        Value::Pair(Box::new(a), Box::new(b))
    }

    pub fn set<I: IntoIterator<Item = Value>>(elems: I) -> Value {
        Value::Set(elems.into_iter().collect())
    }

    pub fn as_set(&self) -> Option<&BTreeSet<Value>> {
        match self {
            Value::Set(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    /// The value rendered as a term (used when reporting ground answers).
    pub fn to_term(&self) -> Term {
        match self {
            Value::Int(i) => Term::int(*i),
            Value::Ur(name, args) => Term::ur(name, args.iter().map(|a| a.to_term()).collect()),
            Value::Pair(a, b) => Term::pair(a.to_term(), b.to_term()),
            Value::Set(elems) => {
                Term::set_from(elems.iter().map(|e| e.to_term()).collect(), Term::EmptySet)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("formula is not ground: variable {0} is unbound")]
    NonGround(String),
    #[error("ill-sorted ground formula: {0}")]
    IllSorted(String),
    #[error("interval too large to evaluate extensionally")]
    TooLarge,
    #[error("cannot evaluate `{0}`: definition introduces existential variables")]
    Existential(String),
}

const MAX_INTERVAL_WIDTH: i64 = 100_000;

/// Variable environment for evaluation.
pub type Env = BTreeMap<Var, Value>;

/// Evaluates a term under an environment binding every variable in it.
pub fn eval_term(t: &Term, env: &Env) -> Result<Value, EvalError> {
    match t {
        Term::Var(v) => env
            .get(v)
            .cloned()
            .ok_or_else(|| EvalError::NonGround(v.to_string())),
        Term::Int(lin) => Ok(Value::Int(eval_lin(lin, env)?)),
        Term::Pair(a, b) => Ok(Value::pair(eval_term(a, env)?, eval_term(b, env)?)),
        Term::Ur(f) => Ok(Value::Ur(
            f.name.to_string(),
            f.args
                .iter()
                .map(|a| eval_term(a, env))
                .collect::<Result<_, _>>()?,
        )),
        Term::EmptySet => Ok(Value::Set(BTreeSet::new())),
        Term::SetCons(e, rest) => {
            let ev = eval_term(e, env)?;
            match eval_term(rest, env)? {
                Value::Set(mut s) => {
                    s.insert(ev);
                    Ok(Value::Set(s))
                }
                other => Err(EvalError::IllSorted(format!(
                    "set rest evaluated to non-set {:?}",
                    other
                ))),
            }
        }
        Term::Interval(lo, hi) => {
            let lo = eval_lin(lo, env)?;
            let hi = eval_lin(hi, env)?;
            if hi >= lo && hi - lo > MAX_INTERVAL_WIDTH {
                return Err(EvalError::TooLarge);
            }
            Ok(Value::Set((lo..=hi).map(Value::Int).collect()))
        }
    }
}

pub fn eval_lin(lin: &IntLin, env: &Env) -> Result<i64, EvalError> {
    let mut acc = lin.konst();
    for (v, c) in lin.coeffs() {
        match env.get(v) {
            Some(Value::Int(i)) => {
                acc = c
                    .checked_mul(*i)
                    .and_then(|p| acc.checked_add(p))
                    .ok_or(EvalError::TooLarge)?;
            }
            Some(other) => {
                return Err(EvalError::IllSorted(format!(
                    "integer expression over non-integer value {:?}",
                    other
                )))
            }
            None => return Err(EvalError::NonGround(v.to_string())),
        }
    }
    Ok(acc)
}

/// Truth value of a ground formula under a substitution binding every free
/// variable to a ground term.
pub fn eval_ground(f: &Formula, sigma: &Substitution) -> Result<bool, EvalError> {
    let mut env = Env::new();
    let empty = Env::new();
    for (v, t) in sigma.iter() {
        env.insert(v.clone(), eval_term(t, &empty)?);
    }
    eval_formula(f, &env)
}

/// Truth value of a formula under a value environment.
pub fn eval_formula(f: &Formula, env: &Env) -> Result<bool, EvalError> {
    match f {
        Formula::True => Ok(true),
        Formula::False => Ok(false),
        Formula::Atom(a) => eval_atom(a, env),
        Formula::Ruq(r) => eval_ruq(r, env),
        Formula::Derived(d) => eval_derived(d, env),
        Formula::And(ps) => {
            for p in ps {
                if !eval_formula(p, env)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        Formula::Or(ps) => {
            for p in ps {
                if eval_formula(p, env)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
    }
}

fn set_arg(a: &Term, env: &Env, what: &str) -> Result<BTreeSet<Value>, EvalError> {
    match eval_term(a, env)? {
        Value::Set(s) => Ok(s),
        other => Err(EvalError::IllSorted(format!(
            "{} expects a set, got {:?}",
            what, other
        ))),
    }
}

fn eval_atom(a: &Atom, env: &Env) -> Result<bool, EvalError> {
    match a {
        // Values of distinct sorts live in disjoint domains, so a cross-sort
        // equality is simply false.
        Atom::Eq(x, y) => Ok(eval_term(x, env)? == eval_term(y, env)?),
        Atom::Neq(x, y) => Ok(eval_term(x, env)? != eval_term(y, env)?),
        Atom::In(x, s) => {
            let xv = eval_term(x, env)?;
            Ok(set_arg(s, env, "membership")?.contains(&xv))
        }
        Atom::Nin(x, s) => {
            let xv = eval_term(x, env)?;
            Ok(!set_arg(s, env, "membership")?.contains(&xv))
        }
        Atom::Un(e, f, g) => {
            let (e, f, g) = (
                set_arg(e, env, "un")?,
                set_arg(f, env, "un")?,
                set_arg(g, env, "un")?,
            );
            Ok(e.union(&f).cloned().collect::<BTreeSet<_>>() == g)
        }
        Atom::Disj(e, f) => {
            let (e, f) = (set_arg(e, env, "disj")?, set_arg(f, env, "disj")?);
            Ok(e.intersection(&f).next().is_none())
        }
        Atom::Size(e, n) => {
            let e = set_arg(e, env, "size")?;
            Ok(e.len() as i64 == eval_lin(n, env)?)
        }
        Atom::SubInt(e, lo, hi) => {
            let e = set_arg(e, env, "subset")?;
            let lo = eval_lin(lo, env)?;
            let hi = eval_lin(hi, env)?;
            Ok(e.iter().all(|v| matches!(v, Value::Int(i) if lo <= *i && *i <= hi)))
        }
        Atom::IntCmp(op, lin) => {
            let v = eval_lin(lin, env)?;
            Ok(match op {
                CmpOp::Lt => v < 0,
                CmpOp::Le => v <= 0,
                CmpOp::Eq => v == 0,
                CmpOp::Ne => v != 0,
            })
        }
        Atom::IsPair(t) => Ok(matches!(eval_term(t, env)?, Value::Pair(..))),
        Atom::NoPair(t) => Ok(!matches!(eval_term(t, env)?, Value::Pair(..))),
    }
}

fn eval_qf(q: &QfFormula, env: &Env) -> Result<bool, EvalError> {
    match q {
        QfFormula::Atom(a) => eval_atom(a, env),
        QfFormula::And(ps) => {
            for p in ps {
                if !eval_qf(p, env)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        QfFormula::Or(ps) => {
            for p in ps {
                if eval_qf(p, env)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
    }
}

/// `∀c∈S: φ` iterated over the finite denotation of `S`. A pair binder only
/// ranges over the pair-shaped members of the domain.
fn eval_ruq(r: &Ruq, env: &Env) -> Result<bool, EvalError> {
    let domain = set_arg(&r.domain, env, "quantification")?;
    for elem in domain {
        let mut inner = env.clone();
        match &r.binder {
            Binder::Single(v) => {
                inner.insert(v.clone(), elem);
            }
            Binder::Couple(x, y) => match elem {
                Value::Pair(a, b) => {
                    inner.insert(x.clone(), *a);
                    inner.insert(y.clone(), *b);
                }
                _ => continue,
            },
        }
        let holds = match &r.body {
            RuqBody::Qf(q) => eval_qf(q, &inner)?,
            RuqBody::Nested(nested) => eval_ruq(nested, &inner)?,
        };
        if !holds {
            return Ok(false);
        }
    }
    Ok(true)
}

fn pairs_of(s: &BTreeSet<Value>) -> impl Iterator<Item = (&Value, &Value)> {
    s.iter().filter_map(|v| match v {
        Value::Pair(a, b) => Some((a.as_ref(), b.as_ref())),
        _ => None,
    })
}

fn int_first_pairs(s: &BTreeSet<Value>) -> Vec<(i64, &Value)> {
    pairs_of(s)
        .filter_map(|(a, b)| a.as_int().map(|i| (i, b)))
        .collect()
}

fn is_pfun(s: &BTreeSet<Value>) -> bool {
    let pairs: Vec<_> = pairs_of(s).collect();
    for (i, (x1, y1)) in pairs.iter().enumerate() {
        for (x2, y2) in &pairs[i + 1..] {
            if x1 == x2 && y1 != y2 {
                return false;
            }
        }
    }
    true
}

fn is_sorted(pairs: &[(i64, &Value)]) -> Result<bool, EvalError> {
    for (i1, y1) in pairs {
        for (i2, y2) in pairs {
            if i1 <= i2 {
                match (y1, y2) {
                    (Value::Int(a), Value::Int(b)) => {
                        if a > b {
                            return Ok(false);
                        }
                    }
                    _ => {
                        return Err(EvalError::IllSorted(
                            "sorted compares non-integer values".into(),
                        ))
                    }
                }
            }
        }
    }
    Ok(true)
}

/// Domain restriction by predicate: `S` must contain exactly the pairs of
/// `R` whose first component satisfies `keep`, plus any non-pair members of
/// `R`, and nothing outside `R`.
fn dres_ok(
    r: &BTreeSet<Value>,
    s: &BTreeSet<Value>,
    keep: impl Fn(&Value) -> bool,
) -> bool {
    if !s.is_subset(r) {
        return false;
    }
    for v in s {
        if let Value::Pair(x, _) = v {
            if !keep(x) {
                return false;
            }
        }
    }
    for v in r.difference(s) {
        if let Value::Pair(x, _) = v {
            if keep(x) {
                return false;
            }
        }
    }
    true
}

fn eval_derived(d: &DerivedCall, env: &Env) -> Result<bool, EvalError> {
    let args = &d.args;
    let int = |i: usize| -> Result<i64, EvalError> {
        match eval_term(&args[i], env)? {
            Value::Int(v) => Ok(v),
            other => Err(EvalError::IllSorted(format!(
                "{} expects an integer, got {:?}",
                d.name.as_str(),
                other
            ))),
        }
    };
    let set = |i: usize| -> Result<BTreeSet<Value>, EvalError> { set_arg(&args[i], env, d.name.as_str()) };
    match &d.name {
        DerivedName::Leq => Ok(int(0)? <= int(1)?),
        DerivedName::Gt => Ok(int(0)? > int(1)?),
        DerivedName::Geq => Ok(int(0)? >= int(1)?),
        DerivedName::Inters => {
            let (e, f, g) = (set(0)?, set(1)?, set(2)?);
            Ok(e.intersection(&f).cloned().collect::<BTreeSet<_>>() == g)
        }
        DerivedName::Diff => {
            let (e, f, g) = (set(0)?, set(1)?, set(2)?);
            Ok(e.difference(&f).cloned().collect::<BTreeSet<_>>() == g)
        }
        DerivedName::Subset => Ok(set(0)?.is_subset(&set(1)?)),
        DerivedName::Rel => Ok(set(0)?.iter().all(|v| matches!(v, Value::Pair(..)))),
        DerivedName::Pfun => Ok(is_pfun(&set(0)?)),
        DerivedName::Ipfun => {
            let s = set(0)?;
            if !is_pfun(&s) {
                return Ok(false);
            }
            let pairs: Vec<_> = pairs_of(&s).collect();
            for (i, (x1, y1)) in pairs.iter().enumerate() {
                for (x2, y2) in &pairs[i + 1..] {
                    if x1 != x2 && y1 == y2 {
                        return Ok(false);
                    }
                }
            }
            Ok(true)
        }
        DerivedName::DresPt | DerivedName::DaresPt => {
            let z = eval_term(&args[0], env)?;
            let (r, s) = (set(1)?, set(2)?);
            let keep: Box<dyn Fn(&Value) -> bool> = if matches!(d.name, DerivedName::DresPt) {
                Box::new(move |x: &Value| *x == z)
            } else {
                Box::new(move |x: &Value| *x != z)
            };
            Ok(dres_ok(&r, &s, keep))
        }
        DerivedName::DresInt | DerivedName::DaresInt => {
            let (lo, hi) = match &args[0] {
                Term::Interval(lo, hi) => (eval_lin(lo, env)?, eval_lin(hi, env)?),
                _ => {
                    return Err(EvalError::IllSorted(
                        "domain restriction expects an interval".into(),
                    ))
                }
            };
            let (r, s) = (set(1)?, set(2)?);
            let inside =
                move |x: &Value| matches!(x, Value::Int(i) if lo <= *i && *i <= hi);
            if matches!(d.name, DerivedName::DresInt) {
                Ok(dres_ok(&r, &s, inside))
            } else {
                Ok(dres_ok(&r, &s, move |x| !inside(x)))
            }
        }
        DerivedName::Arr => {
            let a = set(0)?;
            let m = int(1)?;
            if a.len() as i64 != m || !is_pfun(&a) {
                return Ok(false);
            }
            let in_range = pairs_of(&a).all(|(x, _)| {
                matches!(x, Value::Int(i) if 1 <= *i && *i <= m)
            });
            Ok(in_range)
        }
        DerivedName::Get => {
            let a = set(0)?;
            let key = eval_term(&args[1], env)?;
            let val = eval_term(&args[2], env)?;
            Ok(a.contains(&Value::pair(key, val)))
        }
        DerivedName::Upd => {
            let a = set(0)?;
            let i = eval_term(&args[1], env)?;
            let y = eval_term(&args[2], env)?;
            let b = set(3)?;
            for v in &a {
                if let Value::Pair(x, _) = v {
                    if **x == i {
                        let mut expected = a.clone();
                        expected.remove(v);
                        expected.insert(Value::pair(i.clone(), y.clone()));
                        if expected == b {
                            return Ok(true);
                        }
                    }
                }
            }
            Ok(false)
        }
        DerivedName::Sorted => is_sorted(&int_first_pairs(&set(0)?)),
        DerivedName::SortedRange => {
            let (n, k, m) = (int(1)?, int(2)?, int(3)?);
            if !(1 <= k && k <= m && m <= n) {
                return Ok(true);
            }
            let a = set(0)?;
            let restricted: Vec<_> = int_first_pairs(&a)
                .into_iter()
                .filter(|(i, _)| k <= *i && *i <= m)
                .collect();
            is_sorted(&restricted)
        }
        DerivedName::Put => {
            let h = set(0)?;
            let k = eval_term(&args[1], env)?;
            let v = eval_term(&args[2], env)?;
            let t = set(3)?;
            // T = {(k,v)} ∪ N where N is H minus the pairs keyed k; the
            // non-pair members of H may or may not carry over.
            let mut core: BTreeSet<Value> = h
                .iter()
                .filter(|e| match e {
                    Value::Pair(x, _) => **x != k,
                    _ => false,
                })
                .cloned()
                .collect();
            core.insert(Value::pair(k, v));
            if !core.is_subset(&t) {
                return Ok(false);
            }
            Ok(t.difference(&core).all(|e| {
                !matches!(e, Value::Pair(..)) && h.contains(e)
            }))
        }
        DerivedName::Remove => {
            let k = eval_term(&args[1], env)?;
            let (h, t) = (set(0)?, set(2)?);
            Ok(dres_ok(&h, &t, move |x| *x != k))
        }
        DerivedName::User(name) => Err(EvalError::Existential(name.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::{Sort, VarGen};

    fn subst(bindings: Vec<(Var, Term)>) -> Substitution {
        let mut s = Substitution::new();
        for (v, t) in bindings {
            s.bind(v, t);
        }
        s
    }

    #[test]
    fn duplicate_and_order_insensitive_set_equality() {
        // {1,2} = {2,1,1}
        let lhs = Term::set_from(vec![Term::int(1), Term::int(2)], Term::EmptySet);
        let rhs = Term::set_from(
            vec![Term::int(2), Term::int(1), Term::int(1)],
            Term::EmptySet,
        );
        let f = Formula::Atom(Atom::Eq(lhs, rhs));
        assert_eq!(eval_ground(&f, &Substitution::new()), Ok(true));
    }

    #[test]
    fn empty_interval_quantification_is_true() {
        let mut g = VarGen::new();
        let x = g.fresh(Some(Sort::Int));
        let r = Ruq::new(
            Binder::Single(x),
            Term::Interval(IntLin::constant(1), IntLin::constant(0)),
            RuqBody::Qf(QfFormula::Atom(Atom::IntCmp(CmpOp::Lt, IntLin::constant(0)))),
        )
        .unwrap();
        assert_eq!(eval_ground(&Formula::Ruq(r), &Substitution::new()), Ok(true));
    }

    #[test]
    fn size_absorbs_duplicates() {
        let mut g = VarGen::new();
        let m = g.named("M", Some(Sort::Int));
        let f = Formula::Atom(Atom::Size(
            Term::set_from(vec![Term::int(5), Term::int(5)], Term::EmptySet),
            IntLin::var(m.clone()),
        ));
        let s = subst(vec![(m, Term::int(1))]);
        assert_eq!(eval_ground(&f, &s), Ok(true));
    }

    #[test]
    fn non_ground_is_reported() {
        let mut g = VarGen::new();
        let x = g.named("X", None);
        let f = Formula::Atom(Atom::Eq(Term::var(x), Term::int(1)));
        assert!(matches!(
            eval_ground(&f, &Substitution::new()),
            Err(EvalError::NonGround(_))
        ));
    }

    #[test]
    fn nested_sets_compare_hereditarily() {
        // {{1,2}} = {{2,1}}
        let inner1 = Term::set_from(vec![Term::int(1), Term::int(2)], Term::EmptySet);
        let inner2 = Term::set_from(vec![Term::int(2), Term::int(1)], Term::EmptySet);
        let f = Formula::Atom(Atom::Eq(
            Term::set_from(vec![inner1], Term::EmptySet),
            Term::set_from(vec![inner2], Term::EmptySet),
        ));
        assert_eq!(eval_ground(&f, &Substitution::new()), Ok(true));
    }

    #[test]
    fn pair_binder_skips_non_pairs() {
        let mut g = VarGen::new();
        let (x, y) = (g.fresh(Some(Sort::Int)), g.fresh(Some(Sort::Int)));
        // ∀(x,y)∈{7}: x < x, vacuously true since 7 is not a pair.
        let dom = Term::set_from(vec![Term::int(7)], Term::EmptySet);
        let r = Ruq::new(
            Binder::Couple(x.clone(), y),
            dom,
            RuqBody::Qf(QfFormula::Atom(Atom::lt(
                IntLin::var(x.clone()),
                IntLin::var(x),
            ))),
        )
        .unwrap();
        assert_eq!(eval_ground(&Formula::Ruq(r), &Substitution::new()), Ok(true));
    }

    #[test]
    fn derived_get_means_membership() {
        let a = Term::set_from(
            vec![Term::pair(Term::int(1), Term::int(9))],
            Term::EmptySet,
        );
        let f = Formula::Derived(DerivedCall {
            name: DerivedName::Get,
            args: vec![a, Term::int(1), Term::int(9)],
        });
        assert_eq!(eval_ground(&f, &Substitution::new()), Ok(true));
    }

    #[test]
    fn derived_arr_checks_indexes_and_size() {
        let ok = Term::set_from(
            vec![
                Term::pair(Term::int(1), Term::ur("a", vec![])),
                Term::pair(Term::int(2), Term::ur("b", vec![])),
            ],
            Term::EmptySet,
        );
        let f = Formula::Derived(DerivedCall {
            name: DerivedName::Arr,
            args: vec![ok, Term::int(2)],
        });
        assert_eq!(eval_ground(&f, &Substitution::new()), Ok(true));
        let bad = Term::set_from(
            vec![Term::pair(Term::int(3), Term::ur("a", vec![]))],
            Term::EmptySet,
        );
        let f = Formula::Derived(DerivedCall {
            name: DerivedName::Arr,
            args: vec![bad, Term::int(1)],
        });
        assert_eq!(eval_ground(&f, &Substitution::new()), Ok(false));
    }
}
