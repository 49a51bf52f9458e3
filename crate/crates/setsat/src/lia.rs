//! Linear integer arithmetic sub-solver and the cardinality encoding.
//!
//! Decides conjunctions of linear integer constraints together with the
//! irreducible `un`/`disj`/`size` constraints of a store:
//!
//! 1. Set variables linked by shared `un`/`disj`/`size` atoms are grouped
//!    into connected components. Each non-empty membership pattern over a
//!    group (a Venn region) gets a non-negative integer variable.
//! 2. `un`, `disj` and `size` become linear constraints over region
//!    variables; the remaining integer atoms are copied verbatim.
//! 3. The resulting pure LIA problem is decided by an exact-rational
//!    two-phase simplex with branch-and-bound on fractional variables;
//!    disequalities are split lazily around violating points.
//!
//! Minimum-solution mode minimizes the sum of all cardinality arguments,
//! which makes the optimum Pareto-minimal in each cardinality: no single
//! size value can be decreased while the others stay fixed.

use crate::formula::{Atom, CmpOp, Formula};
use crate::term::{IntLin, Sort, Term, Var, VarGen};
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::collections::{BTreeMap, BTreeSet};

/// A normalized linear constraint `lin ⋈ 0` with `⋈ ∈ {≤, =, ≠}`. Strict
/// inequalities are absorbed: over the integers `lin < 0` is `lin + 1 ≤ 0`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct LinCon {
    pub op: LinOp,
    pub lin: IntLin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum LinOp {
    Le,
    Eq,
    Ne,
}

impl std::fmt::Display for LinCon {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let op = match self.op {
            LinOp::Le => CmpOp::Le,
            LinOp::Eq => CmpOp::Eq,
            LinOp::Ne => CmpOp::Ne,
        };
        write!(f, "{}", Atom::IntCmp(op, self.lin.clone()))
    }
}

impl LinCon {
    /// Normalizes an atom-level comparison into `LinCon` form, applying gcd
    /// tightening. Returns `Ok(None)` for a trivially true constraint and
    /// `Err(())` for a trivially false one.
    pub fn from_cmp(op: CmpOp, lin: IntLin) -> Result<Option<LinCon>, ()> {
        let (op, lin) = match op {
            CmpOp::Lt => (LinOp::Le, lin.add_const(1)),
            CmpOp::Le => (LinOp::Le, lin),
            CmpOp::Eq => (LinOp::Eq, lin),
            CmpOp::Ne => (LinOp::Ne, lin),
        };
        if let Some(k) = lin.as_constant() {
            let holds = match op {
                LinOp::Le => k <= 0,
                LinOp::Eq => k == 0,
                LinOp::Ne => k != 0,
            };
            return if holds { Ok(None) } else { Err(()) };
        }
        Ok(Some(LinCon { op, lin }.tighten()?))
    }

    /// Divides by the gcd of the variable coefficients. For `≤` the constant
    /// rounds towards the feasible side; for `=` non-divisibility is
    /// infeasible; for `≠` non-divisibility makes the constraint vacuous.
    fn tighten(self) -> Result<LinCon, ()> {
        let g = self
            .lin
            .coeffs()
            .fold(0i64, |acc, (_, c)| acc.gcd(&c.abs()));
        if g <= 1 {
            return Ok(self);
        }
        let k = self.lin.konst();
        let mut scaled = IntLin::constant(0);
        for (v, c) in self.lin.coeffs() {
            scaled = scaled.add_lin(&IntLin::var(v.clone()).scale(c / g));
        }
        match self.op {
            LinOp::Le => Ok(LinCon {
                op: LinOp::Le,
                lin: scaled.add_const(Integer::div_ceil(&k, &g)),
            }),
            LinOp::Eq => {
                if k % g != 0 {
                    Err(())
                } else {
                    Ok(LinCon {
                        op: LinOp::Eq,
                        lin: scaled.add_const(k / g),
                    })
                }
            }
            LinOp::Ne => {
                if k % g != 0 {
                    // gcd divides all variable terms but not the constant:
                    // the equality can never hold, so the ≠ is vacuous.
                    Ok(LinCon {
                        op: LinOp::Ne,
                        lin: IntLin::constant(1),
                    })
                } else {
                    Ok(LinCon {
                        op: LinOp::Ne,
                        lin: scaled.add_const(k / g),
                    })
                }
            }
        }
    }

    pub fn is_vacuous(&self) -> bool {
        match self.lin.as_constant() {
            Some(k) => match self.op {
                LinOp::Le => k <= 0,
                LinOp::Eq => k == 0,
                LinOp::Ne => k != 0,
            },
            None => false,
        }
    }
}

/// Bounds known for a variable: `lo ≤ v ≤ hi` with `None` for unbounded.
type Bounds = BTreeMap<Var, (Option<i64>, Option<i64>)>;

/// Interval-arithmetic propagation over `≤`/`=` rows. Sound but incomplete:
/// `Some(false)` means definitely infeasible, `Some(true)` says nothing
/// beyond "not refuted by bounds".
pub fn bounds_feasible(cons: &[LinCon]) -> bool {
    let mut bounds: Bounds = BTreeMap::new();
    // A few rounds are enough for the chains that occur in practice;
    // completeness comes from the simplex check.
    for _ in 0..8 {
        let mut changed = false;
        for con in cons {
            match con.op {
                LinOp::Ne => continue,
                LinOp::Le => {
                    if !propagate_le(&con.lin, &mut bounds, &mut changed) {
                        return false;
                    }
                }
                LinOp::Eq => {
                    if !propagate_le(&con.lin, &mut bounds, &mut changed)
                        || !propagate_le(&con.lin.scale(-1), &mut bounds, &mut changed)
                    {
                        return false;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    // Disequalities refute only single-variable pinched bounds.
    for con in cons {
        if con.op == LinOp::Ne {
            let mut vars = con.lin.coeffs();
            if let (Some((v, c)), None) = (vars.next(), vars.next()) {
                if let Some((Some(lo), Some(hi))) = bounds.get(v).copied() {
                    if lo == hi && c as i128 * lo as i128 + con.lin.konst() as i128 == 0 {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// Tightens bounds using `lin ≤ 0`: for each variable, the extreme
/// contribution of the others yields a bound.
fn propagate_le(lin: &IntLin, bounds: &mut Bounds, changed: &mut bool) -> bool {
    let terms: Vec<(Var, i64)> = lin.coeffs().map(|(v, c)| (v.clone(), c)).collect();
    for (v, c) in &terms {
        // c·v ≤ -konst - Σ_{w≠v} min(c_w · w)
        let mut rhs: i128 = -(lin.konst() as i128);
        let mut unbounded = false;
        for (w, cw) in &terms {
            if w == v {
                continue;
            }
            let (lo, hi) = bounds.get(w).copied().unwrap_or((None, None));
            let contrib_min = if *cw > 0 {
                lo.map(|b| *cw as i128 * b as i128)
            } else {
                hi.map(|b| *cw as i128 * b as i128)
            };
            match contrib_min {
                Some(m) => rhs -= m,
                None => {
                    unbounded = true;
                    break;
                }
            }
        }
        if unbounded {
            continue;
        }
        let entry = bounds.entry(v.clone()).or_insert((None, None));
        if *c > 0 {
            let ub = Integer::div_floor(&rhs, &(*c as i128));
            let ub = ub.clamp(i64::MIN as i128, i64::MAX as i128) as i64;
            if entry.1.map_or(true, |old| ub < old) {
                entry.1 = Some(ub);
                *changed = true;
            }
        } else {
            let lb = Integer::div_ceil(&rhs, &(*c as i128));
            let lb = lb.clamp(i64::MIN as i128, i64::MAX as i128) as i64;
            if entry.0.map_or(true, |old| lb > old) {
                entry.0 = Some(lb);
                *changed = true;
            }
        }
        if let (Some(lo), Some(hi)) = *entry {
            if lo > hi {
                return false;
            }
        }
    }
    true
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LiaError {
    #[error("LIA search budget exceeded")]
    Budget,
    #[error("integer value out of representable range")]
    Overflow,
}

/// Result of a decision call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LiaResult {
    Sat(BTreeMap<Var, i64>),
    Unsat,
}

/// Result of a minimization call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OptResult {
    Opt { assignment: BTreeMap<Var, i64>, value: i64 },
    Unsat,
    Unbounded,
}

/// Objective of a minimization call.
#[derive(Debug, Clone)]
pub enum Objective {
    /// Minimize a linear expression.
    Lin(IntLin),
    /// Minimize the sum of absolute values of the given variables.
    AbsSum(Vec<Var>),
}

/// A LIA problem: conjunction of linear constraints, optional objective.
#[derive(Debug, Clone, Default)]
pub struct LiaProblem {
    pub cons: Vec<LinCon>,
    pub objective: Option<IntLin>,
}

impl LiaProblem {
    pub fn push_cmp(&mut self, op: CmpOp, lin: IntLin) -> Result<(), ()> {
        if let Some(c) = LinCon::from_cmp(op, lin)? {
            self.cons.push(c);
        }
        Ok(())
    }
}

const DEFAULT_NODE_BUDGET: usize = 200_000;

/// Complete decision procedure for conjunctions of linear integer
/// constraints. Exact rational simplex relaxation, branch-and-bound on the
/// most fractional variable (ties by lowest variable id), disequalities
/// split into the two strict sides lazily.
pub fn lia_decide(cons: &[LinCon]) -> Result<LiaResult, LiaError> {
    lia_decide_budget(cons, DEFAULT_NODE_BUDGET)
}

pub fn lia_decide_budget(cons: &[LinCon], budget: usize) -> Result<LiaResult, LiaError> {
    let mut solver = IlpSearch::new(cons, None, budget)?;
    match solver.run()? {
        Some((witness, _)) => Ok(LiaResult::Sat(witness)),
        None => Ok(LiaResult::Unsat),
    }
}

/// Minimizes the objective over the integer solutions.
pub fn lia_minimize(cons: &[LinCon], objective: &Objective) -> Result<OptResult, LiaError> {
    lia_minimize_budget(cons, objective, DEFAULT_NODE_BUDGET)
}

pub fn lia_minimize_budget(
    cons: &[LinCon],
    objective: &Objective,
    budget: usize,
) -> Result<OptResult, LiaError> {
    let mut solver = IlpSearch::new(cons, Some(objective.clone()), budget)?;
    if solver.relaxation_unbounded()? {
        return Ok(OptResult::Unbounded);
    }
    match solver.run()? {
        Some((assignment, value)) => Ok(OptResult::Opt { assignment, value }),
        None => Ok(OptResult::Unsat),
    }
}

/// Branch-and-bound search state.
struct IlpSearch {
    vars: Vec<Var>,
    base: Vec<LinCon>,
    nes: Vec<IntLin>,
    objective: Option<Objective>,
    budget: usize,
    nodes: usize,
    incumbent: Option<(BTreeMap<Var, i64>, i64)>,
    trivially_unsat: bool,
}

impl IlpSearch {
    fn new(cons: &[LinCon], objective: Option<Objective>, budget: usize) -> Result<Self, LiaError> {
        let mut vars: BTreeSet<Var> = BTreeSet::new();
        for c in cons {
            vars.extend(c.lin.vars().cloned());
        }
        if let Some(Objective::Lin(lin)) = &objective {
            vars.extend(lin.vars().cloned());
        }
        if let Some(Objective::AbsSum(vs)) = &objective {
            vars.extend(vs.iter().cloned());
        }
        let mut base = Vec::new();
        let mut nes = Vec::new();
        let mut trivially_unsat = false;
        for c in cons {
            // Re-normalize: callers may build constraints directly, and gcd
            // tightening is what keeps branch-and-bound away from integer-free
            // fractional corridors.
            let cmp = match c.op {
                LinOp::Le => CmpOp::Le,
                LinOp::Eq => CmpOp::Eq,
                LinOp::Ne => CmpOp::Ne,
            };
            match LinCon::from_cmp(cmp, c.lin.clone()) {
                Ok(Some(c)) => match c.op {
                    LinOp::Ne => nes.push(c.lin.clone()),
                    _ => base.push(c),
                },
                Ok(None) => {}
                Err(()) => trivially_unsat = true,
            }
        }
        Ok(IlpSearch {
            vars: vars.into_iter().collect(),
            base,
            nes,
            objective,
            budget,
            nodes: 0,
            incumbent: None,
            trivially_unsat,
        })
    }

    fn var_index(&self, v: &Var) -> usize {
        self.vars.binary_search(v).expect("variable registered")
    }

    /// Column layout: each integer variable v becomes p(v) − q(v) with two
    /// non-negative LP columns.
    fn columns(&self) -> usize {
        self.vars.len() * 2
    }

    fn lin_to_row(&self, lin: &IntLin) -> (Vec<BigRational>, BigRational) {
        let mut coefs = vec![BigRational::zero(); self.columns()];
        for (v, c) in lin.coeffs() {
            let j = self.var_index(v);
            coefs[2 * j] += BigRational::from_integer(BigInt::from(c));
            coefs[2 * j + 1] -= BigRational::from_integer(BigInt::from(c));
        }
        // lin ⋈ 0  ⟺  Σ c·x ⋈ −konst
        (coefs, BigRational::from_integer(BigInt::from(-lin.konst())))
    }

    fn objective_row(&self) -> Option<Vec<BigRational>> {
        match &self.objective {
            None => None,
            Some(Objective::Lin(lin)) => {
                let (row, _) = self.lin_to_row(lin);
                Some(row)
            }
            Some(Objective::AbsSum(vs)) => {
                let mut row = vec![BigRational::zero(); self.columns()];
                for v in vs {
                    let j = self.var_index(v);
                    row[2 * j] += BigRational::one();
                    row[2 * j + 1] += BigRational::one();
                }
                Some(row)
            }
        }
    }

    fn relaxation_unbounded(&mut self) -> Result<bool, LiaError> {
        let rows: Vec<LpRow> = self.base.iter().map(|c| self.to_lp_row(c)).collect();
        match solve_lp(self.columns(), &rows, self.objective_row().as_deref()) {
            LpOut::Unbounded => Ok(true),
            _ => Ok(false),
        }
    }

    fn to_lp_row(&self, c: &LinCon) -> LpRow {
        let (coefs, rhs) = self.lin_to_row(&c.lin);
        LpRow {
            coefs,
            rhs,
            eq: c.op == LinOp::Eq,
        }
    }

    fn run(&mut self) -> Result<Option<(BTreeMap<Var, i64>, i64)>, LiaError> {
        if self.trivially_unsat {
            return Ok(None);
        }
        let extras: Vec<LinCon> = Vec::new();
        self.node(&extras)?;
        Ok(self.incumbent.take())
    }

    /// Explores one node. Returns `true` when the search may stop (decide
    /// mode found a witness).
    fn node(&mut self, extras: &[LinCon]) -> Result<bool, LiaError> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(LiaError::Budget);
        }
        if !bounds_feasible_with(&self.base, extras) {
            return Ok(false);
        }
        let mut rows: Vec<LpRow> = self.base.iter().map(|c| self.to_lp_row(c)).collect();
        rows.extend(extras.iter().map(|c| self.to_lp_row(c)));
        let obj = self.objective_row();
        let out = solve_lp(self.columns(), &rows, obj.as_deref());
        let (solution, bound) = match out {
            LpOut::Infeasible => return Ok(false),
            LpOut::Unbounded => {
                // Objective unbounded on the relaxation; fall back to a
                // plain feasible vertex and keep branching (the solver's own
                // objectives are bounded below, so this is a corner case).
                match solve_lp(self.columns(), &rows, None) {
                    LpOut::Opt(sol, _) => (sol, None),
                    _ => return Ok(false),
                }
            }
            LpOut::Opt(sol, val) => (sol, Some(val)),
        };
        if let (Some((_, best)), Some(b)) = (&self.incumbent, &bound) {
            // The relaxation cannot beat the incumbent.
            if b >= &BigRational::from_integer(BigInt::from(*best)) {
                return Ok(false);
            }
        }
        // Most fractional variable, ties by lowest variable id.
        let mut branch: Option<(usize, BigRational)> = None;
        let mut best_score = BigRational::zero();
        for j in 0..self.vars.len() {
            let val = &solution[2 * j] - &solution[2 * j + 1];
            if !val.is_integer() {
                let frac = &val - val.floor();
                let half = BigRational::new(BigInt::one(), BigInt::from(2));
                let score = &half - (&frac - &half).abs();
                if branch.is_none() || score > best_score {
                    best_score = score.clone();
                    branch = Some((j, val.clone()));
                }
            }
        }
        if let Some((j, val)) = branch {
            let v = self.vars[j].clone();
            let fl = val.floor().to_integer().to_i64().ok_or(LiaError::Overflow)?;
            // v ≤ ⌊val⌋, then v ≥ ⌈val⌉.
            let mut left = extras.to_vec();
            left.push(LinCon {
                op: LinOp::Le,
                lin: IntLin::var(v.clone()).add_const(-fl),
            });
            if self.node(&left)? {
                return Ok(true);
            }
            let mut right = extras.to_vec();
            right.push(LinCon {
                op: LinOp::Le,
                lin: IntLin::var(v).scale(-1).add_const(fl + 1),
            });
            return self.node(&right);
        }
        // Integer point: check disequalities.
        let assignment = self.extract(&solution)?;
        for ne in &self.nes.clone() {
            if eval_lin_i128(ne, &assignment) == 0 {
                // Split lin ≤ −1 ∨ lin ≥ 1.
                let mut left = extras.to_vec();
                left.push(LinCon {
                    op: LinOp::Le,
                    lin: ne.add_const(1),
                });
                if self.node(&left)? {
                    return Ok(true);
                }
                let mut right = extras.to_vec();
                right.push(LinCon {
                    op: LinOp::Le,
                    lin: ne.scale(-1).add_const(1),
                });
                return self.node(&right);
            }
        }
        let value = match &self.objective {
            None => 0,
            Some(Objective::Lin(lin)) => eval_lin_i128(lin, &assignment)
                .try_into()
                .map_err(|_| LiaError::Overflow)?,
            Some(Objective::AbsSum(vs)) => vs
                .iter()
                .map(|v| assignment.get(v).copied().unwrap_or(0).abs())
                .sum(),
        };
        match &self.incumbent {
            Some((_, best)) if *best <= value => {}
            _ => self.incumbent = Some((assignment, value)),
        }
        // In decide mode the first witness suffices.
        Ok(self.objective.is_none())
    }

    fn extract(&self, solution: &[BigRational]) -> Result<BTreeMap<Var, i64>, LiaError> {
        let mut out = BTreeMap::new();
        for (j, v) in self.vars.iter().enumerate() {
            let val = &solution[2 * j] - &solution[2 * j + 1];
            debug_assert!(val.is_integer());
            out.insert(
                v.clone(),
                val.to_integer().to_i64().ok_or(LiaError::Overflow)?,
            );
        }
        Ok(out)
    }
}

fn bounds_feasible_with(base: &[LinCon], extras: &[LinCon]) -> bool {
    let mut all = base.to_vec();
    all.extend(extras.iter().cloned());
    bounds_feasible(&all)
}

fn eval_lin_i128(lin: &IntLin, assignment: &BTreeMap<Var, i64>) -> i128 {
    let mut acc = lin.konst() as i128;
    for (v, c) in lin.coeffs() {
        acc += c as i128 * assignment.get(v).copied().unwrap_or(0) as i128;
    }
    acc
}

struct LpRow {
    coefs: Vec<BigRational>,
    rhs: BigRational,
    eq: bool,
}

enum LpOut {
    Infeasible,
    Unbounded,
    /// Optimal solution over the structural columns plus objective value
    /// (zero when no objective was given).
    Opt(Vec<BigRational>, BigRational),
}

/// Two-phase primal simplex with Bland's rule, exact rational arithmetic.
/// Constraints are `coefs·x {≤,=} rhs` over `x ≥ 0`.
fn solve_lp(ncols: usize, rows: &[LpRow], objective: Option<&[BigRational]>) -> LpOut {
    let m = rows.len();
    let n_slack = rows.iter().filter(|r| !r.eq).count();
    let total = ncols + n_slack + m; // structural + slacks + artificials
    let mut tab: Vec<Vec<BigRational>> = Vec::with_capacity(m);
    let mut rhs: Vec<BigRational> = Vec::with_capacity(m);
    let mut basis: Vec<usize> = Vec::with_capacity(m);
    let mut slack_at = ncols;
    for (i, row) in rows.iter().enumerate() {
        let mut r = vec![BigRational::zero(); total];
        let mut b = row.rhs.clone();
        let flip = b.is_negative();
        for (j, c) in row.coefs.iter().enumerate() {
            r[j] = if flip { -c.clone() } else { c.clone() };
        }
        if flip {
            b = -b;
        }
        if !row.eq {
            r[slack_at] = if flip {
                -BigRational::one()
            } else {
                BigRational::one()
            };
            slack_at += 1;
        }
        let art = ncols + n_slack + i;
        r[art] = BigRational::one();
        basis.push(art);
        tab.push(r);
        rhs.push(b);
    }

    // Phase 1: minimize the sum of artificials.
    let mut cost = vec![BigRational::zero(); total];
    let mut cost_val = BigRational::zero();
    for j in 0..total {
        if j >= ncols + n_slack {
            continue;
        }
        let mut s = BigRational::zero();
        for row in tab.iter() {
            s += &row[j];
        }
        cost[j] = -s;
    }
    for b in &rhs {
        cost_val -= b;
    }
    let banned_from = ncols + n_slack;
    if !simplex_iterate(&mut tab, &mut rhs, &mut basis, &mut cost, &mut cost_val, total, usize::MAX)
    {
        // Phase 1 is always bounded; treat failure as infeasible.
        return LpOut::Infeasible;
    }
    if cost_val < BigRational::zero() {
        return LpOut::Infeasible;
    }
    // Drive artificials out of the basis where possible.
    for i in 0..m {
        if basis[i] >= banned_from {
            if let Some(j) = (0..banned_from).find(|&j| !tab[i][j].is_zero()) {
                pivot(&mut tab, &mut rhs, &mut basis, &mut cost, &mut cost_val, i, j);
            }
        }
    }

    // Phase 2.
    let obj: Vec<BigRational> = match objective {
        Some(o) => {
            let mut full = vec![BigRational::zero(); total];
            full[..o.len()].clone_from_slice(o);
            full
        }
        None => {
            let sol = read_solution(ncols, total, &tab, &rhs, &basis);
            return LpOut::Opt(sol, BigRational::zero());
        }
    };
    // Reduced costs for the new objective under the current basis.
    let mut cost2 = obj.clone();
    let mut cost_val2 = BigRational::zero();
    for (i, &bi) in basis.iter().enumerate() {
        if obj[bi].is_zero() {
            continue;
        }
        let cb = obj[bi].clone();
        for j in 0..total {
            let adj = &cb * &tab[i][j];
            cost2[j] -= adj;
        }
        cost_val2 -= &cb * &rhs[i];
    }
    // Artificials must not re-enter.
    if !simplex_iterate(
        &mut tab,
        &mut rhs,
        &mut basis,
        &mut cost2,
        &mut cost_val2,
        banned_from,
        usize::MAX,
    ) {
        return LpOut::Unbounded;
    }
    let sol = read_solution(ncols, total, &tab, &rhs, &basis);
    LpOut::Opt(sol, -cost_val2)
}

fn read_solution(
    ncols: usize,
    _total: usize,
    _tab: &[Vec<BigRational>],
    rhs: &[BigRational],
    basis: &[usize],
) -> Vec<BigRational> {
    let mut sol = vec![BigRational::zero(); ncols];
    for (i, &b) in basis.iter().enumerate() {
        if b < ncols {
            sol[b] = rhs[i].clone();
        }
    }
    sol
}

/// Runs simplex iterations until optimal. Returns false on unboundedness.
/// `enter_limit` restricts which columns may enter (bans artificials in
/// phase 2).
fn simplex_iterate(
    tab: &mut Vec<Vec<BigRational>>,
    rhs: &mut Vec<BigRational>,
    basis: &mut Vec<usize>,
    cost: &mut Vec<BigRational>,
    cost_val: &mut BigRational,
    enter_limit: usize,
    max_iters: usize,
) -> bool {
    let m = tab.len();
    for _ in 0..max_iters {
        // Bland: entering column = lowest index with negative reduced cost.
        let entering = (0..enter_limit.min(cost.len())).find(|&j| cost[j].is_negative());
        let Some(e) = entering else {
            return true;
        };
        // Ratio test; Bland tie-break on lowest basis variable.
        let mut leave: Option<(usize, BigRational)> = None;
        for i in 0..m {
            if tab[i][e].is_positive() {
                let ratio = &rhs[i] / &tab[i][e];
                match &leave {
                    None => leave = Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < *lr || (ratio == *lr && basis[i] < basis[*li]) {
                            leave = Some((i, ratio));
                        }
                    }
                }
            }
        }
        let Some((l, _)) = leave else {
            return false; // unbounded
        };
        pivot(tab, rhs, basis, cost, cost_val, l, e);
    }
    true
}

fn pivot(
    tab: &mut [Vec<BigRational>],
    rhs: &mut [BigRational],
    basis: &mut [usize],
    cost: &mut [BigRational],
    cost_val: &mut BigRational,
    l: usize,
    e: usize,
) {
    let p = tab[l][e].clone();
    for x in tab[l].iter_mut() {
        *x /= &p;
    }
    rhs[l] /= &p;
    let (pivot_row, pivot_rhs) = (tab[l].clone(), rhs[l].clone());
    for i in 0..tab.len() {
        if i == l || tab[i][e].is_zero() {
            continue;
        }
        let f = tab[i][e].clone();
        for j in 0..pivot_row.len() {
            let adj = &f * &pivot_row[j];
            tab[i][j] -= adj;
        }
        let adj = &f * &pivot_rhs;
        rhs[i] -= adj;
    }
    if !cost[e].is_zero() {
        let f = cost[e].clone();
        for j in 0..pivot_row.len() {
            let adj = &f * &pivot_row[j];
            cost[j] -= adj;
        }
        let adj = &f * &pivot_rhs;
        *cost_val -= adj;
    }
    basis[l] = e;
}

/// Venn-region encoding of a group of set variables.
#[derive(Debug, Clone)]
pub struct VennGroup {
    /// The group's set variables, in id order.
    pub set_vars: Vec<Var>,
    /// One integer variable per non-empty membership pattern; bit `i` of the
    /// pattern refers to `set_vars[i]`.
    pub regions: Vec<(u32, Var)>,
}

impl VennGroup {
    fn bit(&self, v: &Var) -> u32 {
        let i = self.set_vars.iter().position(|w| w == v).expect("var in group");
        1 << i
    }

    /// Region variables whose pattern contains `v`.
    pub fn regions_of(&self, v: &Var) -> Vec<Var> {
        let b = self.bit(v);
        self.regions
            .iter()
            .filter(|(p, _)| p & b != 0)
            .map(|(_, r)| r.clone())
            .collect()
    }
}

#[derive(Debug, Clone, Default)]
pub struct VennEncoding {
    pub groups: Vec<VennGroup>,
}

impl VennEncoding {
    pub fn group_of(&self, v: &Var) -> Option<&VennGroup> {
        self.groups.iter().find(|g| g.set_vars.contains(v))
    }
}

const MAX_GROUP_VARS: usize = 14;

/// Builds the LIA problem for a conjunction of irreducible `un`/`disj`/
/// `size` atoms (set arguments are variables) plus integer constraints.
pub fn encode(
    set_atoms: &[Atom],
    lia: &[LinCon],
    gen: &mut VarGen,
) -> Result<(Vec<LinCon>, VennEncoding), LiaError> {
    // Union-find over the set variables of the atoms.
    let mut parent: BTreeMap<Var, Var> = BTreeMap::new();
    fn find(parent: &mut BTreeMap<Var, Var>, v: &Var) -> Var {
        let p = parent.get(v).cloned().unwrap_or_else(|| v.clone());
        if &p == v {
            return p;
        }
        let root = find(parent, &p);
        parent.insert(v.clone(), root.clone());
        root
    }
    let atom_vars = |a: &Atom| -> Vec<Var> {
        let mut out = BTreeSet::new();
        match a {
            Atom::Un(x, y, z) => {
                for t in [x, y, z] {
                    t.collect_vars(&mut out);
                }
            }
            Atom::Disj(x, y) => {
                for t in [x, y] {
                    t.collect_vars(&mut out);
                }
            }
            Atom::Size(x, _) => x.collect_vars(&mut out),
            _ => unreachable!("only un/disj/size atoms are encoded"),
        }
        out.into_iter().collect()
    };
    for a in set_atoms {
        let vs = atom_vars(a);
        for w in vs.windows(2) {
            let (r0, r1) = (find(&mut parent, &w[0]), find(&mut parent, &w[1]));
            if r0 != r1 {
                parent.insert(r0, r1);
            }
        }
        if let Some(v) = vs.first() {
            find(&mut parent, v);
        }
    }
    let mut groups_map: BTreeMap<Var, BTreeSet<Var>> = BTreeMap::new();
    for a in set_atoms {
        for v in atom_vars(a) {
            let root = find(&mut parent, &v);
            groups_map.entry(root).or_default().insert(v);
        }
    }
    let mut encoding = VennEncoding::default();
    let mut cons: Vec<LinCon> = lia.to_vec();
    for (_, vars) in groups_map {
        let set_vars: Vec<Var> = vars.into_iter().collect();
        if set_vars.len() > MAX_GROUP_VARS {
            return Err(LiaError::Budget);
        }
        let count = (1usize << set_vars.len()) - 1;
        let mut regions = Vec::with_capacity(count);
        for pattern in 1..=count as u32 {
            let r = gen.fresh(Some(Sort::Int));
            // region ≥ 0
            cons.push(LinCon {
                op: LinOp::Le,
                lin: IntLin::var(r.clone()).scale(-1),
            });
            regions.push((pattern, r));
        }
        encoding.groups.push(VennGroup { set_vars, regions });
    }
    for a in set_atoms {
        match a {
            Atom::Un(e, f, g) => {
                let (e, f, g) = (expect_var(e), expect_var(f), expect_var(g));
                let grp = encoding.group_of(e).expect("grouped").clone();
                let (be, bf, bg) = (grp.bit(e), grp.bit(f), grp.bit(g));
                for (pattern, r) in &grp.regions {
                    let in_g = pattern & bg != 0;
                    let in_ef = pattern & (be | bf) != 0;
                    if in_g != in_ef {
                        cons.push(LinCon {
                            op: LinOp::Eq,
                            lin: IntLin::var(r.clone()),
                        });
                    }
                }
            }
            Atom::Disj(e, f) => {
                let (e, f) = (expect_var(e), expect_var(f));
                let grp = encoding.group_of(e).expect("grouped").clone();
                let (be, bf) = (grp.bit(e), grp.bit(f));
                for (pattern, r) in &grp.regions {
                    if pattern & be != 0 && pattern & bf != 0 {
                        cons.push(LinCon {
                            op: LinOp::Eq,
                            lin: IntLin::var(r.clone()),
                        });
                    }
                }
            }
            Atom::Size(e, k) => {
                let e = expect_var(e);
                let grp = encoding.group_of(e).expect("grouped").clone();
                let mut sum = IntLin::constant(0);
                for r in grp.regions_of(e) {
                    sum = sum.add_lin(&IntLin::var(r));
                }
                cons.push(LinCon {
                    op: LinOp::Eq,
                    lin: sum.sub_lin(k),
                });
            }
            _ => unreachable!(),
        }
    }
    Ok((cons, encoding))
}

fn expect_var(t: &Term) -> &Var {
    match t {
        Term::Var(v) => v,
        _ => panic!("irreducible set atom with non-variable argument"),
    }
}

/// Conjoins `0 ≤ k` for every `size(E,k)` atom in the formula.
pub fn gen_size_leq(f: &Formula) -> Formula {
    match f {
        Formula::Atom(Atom::Size(e, k)) => Formula::and(vec![
            Formula::Atom(Atom::Size(e.clone(), k.clone())),
            Formula::Atom(Atom::IntCmp(CmpOp::Le, k.scale(-1))),
        ]),
        Formula::And(ps) => Formula::And(ps.iter().map(gen_size_leq).collect()),
        Formula::Or(ps) => Formula::Or(ps.iter().map(gen_size_leq).collect()),
        other => other.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(gen: &mut VarGen, name: &str) -> Var {
        gen.named(name, Some(Sort::Int))
    }

    fn le(lin: IntLin) -> LinCon {
        LinCon { op: LinOp::Le, lin }
    }

    fn eq(lin: IntLin) -> LinCon {
        LinCon { op: LinOp::Eq, lin }
    }

    #[test]
    fn decide_simple_sat() {
        let mut g = VarGen::new();
        let x = var(&mut g, "X");
        let y = var(&mut g, "Y");
        // x + y = 3, x ≥ 0, y ≥ 0
        let cons = vec![
            eq(IntLin::var(x.clone()).add_lin(&IntLin::var(y.clone())).add_const(-3)),
            le(IntLin::var(x.clone()).scale(-1)),
            le(IntLin::var(y.clone()).scale(-1)),
        ];
        match lia_decide(&cons).unwrap() {
            LiaResult::Sat(a) => {
                assert_eq!(a[&x] + a[&y], 3);
                assert!(a[&x] >= 0 && a[&y] >= 0);
            }
            LiaResult::Unsat => panic!("expected SAT"),
        }
    }

    #[test]
    fn decide_parity_unsat() {
        let mut g = VarGen::new();
        let x = var(&mut g, "X");
        // 2x = 1
        let cons = vec![eq(IntLin::var(x).scale(2).add_const(-1))];
        assert_eq!(lia_decide(&cons).unwrap(), LiaResult::Unsat);
    }

    #[test]
    fn decide_scaled_window_unsat() {
        let mut g = VarGen::new();
        let x = var(&mut g, "X");
        let y = var(&mut g, "Y");
        // 1 ≤ 3x − 3y ≤ 2 has no integer solutions.
        let d = IntLin::var(x).sub_lin(&IntLin::var(y));
        let cons = vec![
            le(d.scale(-3).add_const(1)),
            le(d.scale(3).add_const(-2)),
        ];
        assert_eq!(lia_decide(&cons).unwrap(), LiaResult::Unsat);
    }

    #[test]
    fn disequality_split() {
        let mut g = VarGen::new();
        let x = var(&mut g, "X");
        // 0 ≤ x ≤ 1 ∧ x ≠ 0 ∧ x ≠ 1
        let cons = vec![
            le(IntLin::var(x.clone()).scale(-1)),
            le(IntLin::var(x.clone()).add_const(-1)),
            LinCon { op: LinOp::Ne, lin: IntLin::var(x.clone()) },
            LinCon { op: LinOp::Ne, lin: IntLin::var(x).add_const(-1) },
        ];
        assert_eq!(lia_decide(&cons).unwrap(), LiaResult::Unsat);
    }

    #[test]
    fn minimize_simple() {
        let mut g = VarGen::new();
        let k = var(&mut g, "K");
        // minimize k subject to k ≥ 2
        let cons = vec![le(IntLin::var(k.clone()).scale(-1).add_const(2))];
        match lia_minimize(&cons, &Objective::Lin(IntLin::var(k.clone()))).unwrap() {
            OptResult::Opt { assignment, value } => {
                assert_eq!(value, 2);
                assert_eq!(assignment[&k], 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn minimize_abs_prefers_small_magnitude() {
        let mut g = VarGen::new();
        let x = var(&mut g, "X");
        // x ≥ −5, x ≤ 5, x ≠ 0: minimal |x| is 1.
        let cons = vec![
            le(IntLin::var(x.clone()).scale(-1).add_const(-5)),
            le(IntLin::var(x.clone()).add_const(-5)),
            LinCon { op: LinOp::Ne, lin: IntLin::var(x.clone()) },
        ];
        match lia_minimize(&cons, &Objective::AbsSum(vec![x.clone()])).unwrap() {
            OptResult::Opt { assignment, value } => {
                assert_eq!(value, 1);
                assert_eq!(assignment[&x].abs(), 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn venn_cardinality_of_union_bounded_by_parts() {
        let mut g = VarGen::new();
        let e = g.named("E", Some(Sort::Set));
        let f = g.named("F", Some(Sort::Set));
        let gg = g.named("G", Some(Sort::Set));
        let (me, mf, mg) = (var(&mut g, "Me"), var(&mut g, "Mf"), var(&mut g, "Mg"));
        let atoms = vec![
            Atom::Un(Term::var(e.clone()), Term::var(f.clone()), Term::var(gg.clone())),
            Atom::Size(Term::var(e), IntLin::var(me.clone())),
            Atom::Size(Term::var(f), IntLin::var(mf.clone())),
            Atom::Size(Term::var(gg), IntLin::var(mg.clone())),
        ];
        // me + mf < mg is unsatisfiable: |E| + |F| ≥ |E ∪ F|.
        let lia = vec![le(IntLin::var(me)
            .add_lin(&IntLin::var(mf))
            .sub_lin(&IntLin::var(mg))
            .add_const(1))];
        let (cons, _) = encode(&atoms, &lia, &mut g).unwrap();
        assert_eq!(lia_decide(&cons).unwrap(), LiaResult::Unsat);
    }

    #[test]
    fn venn_single_size() {
        let mut g = VarGen::new();
        let e = g.named("E", Some(Sort::Set));
        let k = var(&mut g, "K");
        let atoms = vec![Atom::Size(Term::var(e), IntLin::var(k.clone()))];
        let (cons, enc) = encode(&atoms, &[], &mut g).unwrap();
        assert_eq!(enc.groups.len(), 1);
        assert_eq!(enc.groups[0].regions.len(), 1);
        match lia_decide(&cons).unwrap() {
            LiaResult::Sat(a) => assert!(a[&k] >= 0),
            LiaResult::Unsat => panic!("expected SAT"),
        }
    }

    #[test]
    fn bounds_propagation_catches_simple_cycles() {
        let mut g = VarGen::new();
        let x = var(&mut g, "X");
        let y = var(&mut g, "Y");
        // 1 ≤ x ≤ 5 ∧ x < y ∧ y < x is infeasible by propagation alone.
        let cons = vec![
            le(IntLin::var(x.clone()).scale(-1).add_const(1)),
            le(IntLin::var(x.clone()).add_const(-5)),
            le(IntLin::var(x.clone()).sub_lin(&IntLin::var(y.clone())).add_const(1)),
            le(IntLin::var(y).sub_lin(&IntLin::var(x)).add_const(1)),
        ];
        assert!(!bounds_feasible(&cons));
    }
}
