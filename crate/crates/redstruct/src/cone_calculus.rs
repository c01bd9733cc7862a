//! Exact integer-linear constraint systems for the cone sectors, their
//! translates, set differences, partitions and finiteness.
//!
//! All decisions are exact: rational Fourier–Motzkin elimination derives
//! variable bounds and settles rational (in)feasibility, and a depth-first
//! integer search settles integral feasibility. When a search would have to
//! scan an unbounded direction it widens a window a few times and then
//! returns an explicit `Inconclusive` — never a silently wrong answer.

use crate::ring::Rat;
use crate::root_datum::{CocharLattice, LinearForm, Point, SphericalPair};
use num::{BigInt, Signed, Zero};
use std::collections::BTreeSet;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConeError {
    #[error("sector `{0}` inconsistent with the pair's C_H")]
    SectorMismatch(String),
    #[error("dimension mismatch")]
    DimensionMismatch,
    #[error("rank {0} exceeds the guard limit 6")]
    RankGuard(usize),
    #[error("inconclusive: {0}")]
    Inconclusive(String),
    #[error("piece shift {0:?} violates the semigroup membership required by its context")]
    ShiftOutsideSemigroup(Point),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, PartialOrd, Ord, Hash)]
pub enum Rel {
    Ge,
    Eq,
    Le,
}

/// One integer-linear condition ⟨form, x⟩ rel bound. Strict inequalities are
/// normalized away at construction ("> b" is "≥ b+1").
#[derive(Clone, PartialEq, Eq, Debug, Hash, PartialOrd, Ord)]
pub struct Constraint {
    pub form: LinearForm,
    pub rel: Rel,
    pub bound: i64,
}

impl Constraint {
    pub fn ge(form: LinearForm, bound: i64) -> Self {
        Constraint {
            form,
            rel: Rel::Ge,
            bound,
        }
    }

    pub fn eq(form: LinearForm, bound: i64) -> Self {
        Constraint {
            form,
            rel: Rel::Eq,
            bound,
        }
    }

    pub fn le(form: LinearForm, bound: i64) -> Self {
        Constraint {
            form,
            rel: Rel::Le,
            bound,
        }
    }

    pub fn holds(&self, x: &[i64]) -> bool {
        let v = self.form.dot(x);
        match self.rel {
            Rel::Ge => v >= self.bound,
            Rel::Eq => v == self.bound,
            Rel::Le => v <= self.bound,
        }
    }

    /// Negation over ℤ; equalities split into two constraints (disjunction).
    pub fn negations(&self) -> Vec<Constraint> {
        match self.rel {
            Rel::Ge => vec![Constraint::le(self.form.clone(), self.bound - 1)],
            Rel::Le => vec![Constraint::ge(self.form.clone(), self.bound + 1)],
            Rel::Eq => vec![
                Constraint::le(self.form.clone(), self.bound - 1),
                Constraint::ge(self.form.clone(), self.bound + 1),
            ],
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rel = match self.rel {
            Rel::Ge => ">=",
            Rel::Eq => "=",
            Rel::Le => "<=",
        };
        write!(f, "{} {} {}", self.form, rel, self.bound)
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ConstraintSet {
    pub lattice: CocharLattice,
    pub constraints: Vec<Constraint>,
}

impl ConstraintSet {
    pub fn new(rank: usize, constraints: Vec<Constraint>) -> Self {
        ConstraintSet {
            lattice: CocharLattice::with_prefix("x", rank),
            constraints,
        }
    }

    pub fn rank(&self) -> usize {
        self.lattice.rank()
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        x.len() == self.rank() && self.constraints.iter().all(|c| c.holds(x))
    }

    pub fn and(&self, extra: &[Constraint]) -> ConstraintSet {
        let mut cs = self.clone();
        cs.constraints.extend(extra.iter().cloned());
        cs
    }
}

/// Which sector of which Θ_H-cone.
#[derive(Clone, Copy, PartialEq, Eq, Debug, PartialOrd, Ord, Hash)]
pub enum Sector {
    None,
    Plus,
    Zero,
    Minus,
}

impl Sector {
    pub fn label(self) -> &'static str {
        match self {
            Sector::None => "none",
            Sector::Plus => "plus",
            Sector::Zero => "zero",
            Sector::Minus => "minus",
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug, PartialOrd, Ord)]
pub struct StdConeId {
    /// Indices into the pair's Δ_H.
    pub theta_h: BTreeSet<usize>,
    pub sector: Sector,
}

impl StdConeId {
    pub fn new(theta_h: BTreeSet<usize>, sector: Sector) -> Self {
        StdConeId { theta_h, sector }
    }
}

/// The cone 𝒯^{--,*}_{Θ_H} as integer constraints on the H-lattice:
/// v_α = 0 on Θ_H, v_α ≥ 1 off Θ_H, and the sector condition on v_β.
pub fn std_cone(pair: &SphericalPair, id: &StdConeId) -> Result<ConstraintSet, ConeError> {
    let rank = pair.h_rank();
    let mut constraints = Vec::new();
    for (i, (_, alpha)) in pair.delta_h.iter().enumerate() {
        if id.theta_h.contains(&i) {
            constraints.push(Constraint::eq(alpha.clone(), 0));
        } else {
            constraints.push(Constraint::ge(alpha.clone(), 1));
        }
    }
    match (&pair.c_h, id.sector) {
        (None, Sector::None) => {}
        (Some((_, beta)), Sector::Plus) => constraints.push(Constraint::ge(beta.clone(), 1)),
        (Some((_, beta)), Sector::Zero) => constraints.push(Constraint::eq(beta.clone(), 0)),
        (Some((_, beta)), Sector::Minus) => constraints.push(Constraint::le(beta.clone(), -1)),
        (_, s) => return Err(ConeError::SectorMismatch(s.label().into())),
    }
    Ok(ConstraintSet::new(rank, constraints))
}

/// Shift the solution set by t: membership(x) ⇔ x − t in the original.
pub fn translate(cs: &ConstraintSet, t: &[i64]) -> Result<ConstraintSet, ConeError> {
    if t.len() != cs.rank() {
        return Err(ConeError::DimensionMismatch);
    }
    Ok(ConstraintSet {
        lattice: cs.lattice.clone(),
        constraints: cs
            .constraints
            .iter()
            .map(|c| Constraint {
                form: c.form.clone(),
                rel: c.rel,
                bound: c.bound + c.form.dot(t),
            })
            .collect(),
    })
}

/// Homogeneous version: all bounds to 0.
pub fn recession(cs: &ConstraintSet) -> ConstraintSet {
    ConstraintSet {
        lattice: cs.lattice.clone(),
        constraints: cs
            .constraints
            .iter()
            .map(|c| Constraint {
                form: c.form.clone(),
                rel: c.rel,
                bound: 0,
            })
            .collect(),
    }
}

/// A translated standard cone T_shift(𝒯^{--,*'}_{Θ'}).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ConePiece {
    pub shift: Point,
    pub body: StdConeId,
}

impl ConePiece {
    /// Creation enforces the semigroup membership the decomposition context
    /// demands: the shift must translate the context cone into itself, i.e.
    /// v_α(shift) = 0 on Θ_H, ≥ 0 off Θ_H, and — when a sector is split —
    /// v_β(shift) ≥ 0 (≤ 0 for minus) for same-sector bodies, strictly
    /// nonzero for sector-zero bodies inside a ± context.
    pub fn new(
        pair: &SphericalPair,
        context: &StdConeId,
        shift: Point,
        body: StdConeId,
    ) -> Result<Self, ConeError> {
        for (i, (_, alpha)) in pair.delta_h.iter().enumerate() {
            let v = alpha.dot(&shift);
            let ok = if context.theta_h.contains(&i) {
                v == 0
            } else {
                v >= 0
            };
            if !ok {
                return Err(ConeError::ShiftOutsideSemigroup(shift));
            }
        }
        if let Some((_, beta)) = &pair.c_h {
            let v = beta.dot(&shift);
            let ok = match (context.sector, body.sector) {
                (Sector::Plus, Sector::Plus) => v >= 0,
                (Sector::Plus, Sector::Zero) => v >= 1,
                (Sector::Minus, Sector::Minus) => v <= 0,
                (Sector::Minus, Sector::Zero) => v <= -1,
                (Sector::Zero, Sector::Zero) => v == 0,
                _ => false,
            };
            if !ok {
                return Err(ConeError::ShiftOutsideSemigroup(shift));
            }
        } else if body.sector != Sector::None || context.sector != Sector::None {
            return Err(ConeError::SectorMismatch(body.sector.label().into()));
        }
        Ok(ConePiece { shift, body })
    }

    pub fn resolve(&self, pair: &SphericalPair) -> Result<ConstraintSet, ConeError> {
        translate(&std_cone(pair, &self.body)?, &self.shift)
    }
}

/// Disjunctive normal form over constraint sets; disjuncts are pairwise
/// disjoint by construction (first-violation normal form).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SemilinearFormula {
    pub disjuncts: Vec<ConstraintSet>,
}

impl SemilinearFormula {
    pub fn contains(&self, x: &[i64]) -> bool {
        self.disjuncts.iter().any(|d| d.contains(x))
    }
}

/// cs ∧ ¬shifted in first-violation normal form: one disjunct per constraint
/// of `shifted` (two for an equality), keeping all earlier constraints of
/// `shifted` satisfied so the disjuncts are pairwise disjoint.
pub fn difference_formula(cs: &ConstraintSet, shifted: &ConstraintSet) -> SemilinearFormula {
    let mut disjuncts = Vec::new();
    for k in 0..shifted.constraints.len() {
        for neg in shifted.constraints[k].negations() {
            let mut constraints = cs.constraints.clone();
            constraints.extend(shifted.constraints[..k].iter().cloned());
            constraints.push(neg);
            disjuncts.push(ConstraintSet {
                lattice: cs.lattice.clone(),
                constraints,
            });
        }
    }
    SemilinearFormula { disjuncts }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Verdict {
    Pass,
    FailCover(Point),
    FailDisjoint(Point, usize, usize),
    FailFinite(Point),
    /// Deleting entry i keeps the constrained set finite, so the structure
    /// is not minimal.
    FailMinimal(usize),
    Inconclusive(String),
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Pass)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Pass => write!(f, "pass"),
            Verdict::FailCover(w) => write!(f, "fail-cover witness {w:?}"),
            Verdict::FailDisjoint(w, i, j) => {
                write!(f, "fail-disjoint witness {w:?} pieces {i},{j}")
            }
            Verdict::FailFinite(d) => write!(f, "fail-finite direction {d:?}"),
            Verdict::FailMinimal(i) => write!(f, "fail-minimal deletable entry {i}"),
            Verdict::Inconclusive(r) => write!(f, "inconclusive: {r}"),
        }
    }
}

// ---------------------------------------------------------------------------
// Rational core: Fourier–Motzkin elimination.

/// coeffs·x ≤ bound over ℚ.
#[derive(Clone, Debug)]
struct RIneq {
    coeffs: Vec<Rat>,
    bound: Rat,
}

fn to_rineqs(constraints: &[Constraint]) -> Vec<RIneq> {
    let mut out = Vec::new();
    for c in constraints {
        let co: Vec<Rat> = c.form.coeffs.iter().map(|&v| Rat::from(BigInt::from(v))).collect();
        let b = Rat::from(BigInt::from(c.bound));
        match c.rel {
            Rel::Le => out.push(RIneq {
                coeffs: co,
                bound: b,
            }),
            Rel::Ge => out.push(RIneq {
                coeffs: co.iter().map(|v| -v).collect(),
                bound: -b,
            }),
            Rel::Eq => {
                out.push(RIneq {
                    coeffs: co.clone(),
                    bound: b.clone(),
                });
                out.push(RIneq {
                    coeffs: co.iter().map(|v| -v).collect(),
                    bound: -b,
                });
            }
        }
    }
    out
}

/// Eliminate variable `var`; exact, may square the system size.
fn fm_eliminate(ineqs: &[RIneq], var: usize) -> Vec<RIneq> {
    let mut zero = Vec::new();
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for q in ineqs {
        if q.coeffs[var].is_zero() {
            zero.push(q.clone());
        } else if q.coeffs[var].is_positive() {
            pos.push(q.clone());
        } else {
            neg.push(q.clone());
        }
    }
    for p in &pos {
        for n in &neg {
            // p: a x_var + ... ≤ b (a>0); n: -c x_var + ... ≤ d (c>0).
            let a = p.coeffs[var].clone();
            let c = -n.coeffs[var].clone();
            let coeffs: Vec<Rat> = p
                .coeffs
                .iter()
                .zip(&n.coeffs)
                .map(|(pc, nc)| pc * &c + nc * &a)
                .collect();
            let bound = &p.bound * &c + &n.bound * &a;
            zero.push(RIneq { coeffs, bound });
        }
    }
    dedupe(zero)
}

fn dedupe(mut v: Vec<RIneq>) -> Vec<RIneq> {
    // Normalize each row so duplicates collapse; drop trivial rows.
    let mut out: Vec<RIneq> = Vec::new();
    v.retain(|q| q.coeffs.iter().any(|c| !c.is_zero()) || q.bound.is_negative());
    for q in v.drain(..) {
        let scale = q
            .coeffs
            .iter()
            .find(|c| !c.is_zero())
            .map(|c| c.abs())
            .unwrap_or_else(|| Rat::from(BigInt::from(1)));
        let nq = RIneq {
            coeffs: q.coeffs.iter().map(|c| c / &scale).collect(),
            bound: &q.bound / &scale,
        };
        let dominated = out.iter().any(|o| {
            o.coeffs == nq.coeffs && o.bound <= nq.bound
        });
        if !dominated {
            out.retain(|o| !(o.coeffs == nq.coeffs && o.bound >= nq.bound));
            out.push(nq);
        }
    }
    out
}

/// Exact rational feasibility by full elimination.
fn rational_feasible(ineqs: &[RIneq]) -> bool {
    if ineqs.is_empty() {
        return true;
    }
    let rank = ineqs[0].coeffs.len();
    let mut cur = dedupe(ineqs.to_vec());
    for var in 0..rank {
        cur = fm_eliminate(&cur, var);
        if cur
            .iter()
            .any(|q| q.coeffs.iter().all(|c| c.is_zero()) && q.bound.is_negative())
        {
            return false;
        }
    }
    cur.iter().all(|q| !q.bound.is_negative())
}

/// Exact rational feasibility of a constraint set.
pub fn rationally_feasible(cs: &ConstraintSet) -> bool {
    rational_feasible(&to_rineqs(&cs.constraints))
}

enum VarBounds {
    Infeasible,
    Range(Option<Rat>, Option<Rat>),
}

/// Rational bounds on variable `var` over the solution polyhedron.
fn var_bounds(ineqs: &[RIneq], var: usize) -> VarBounds {
    let rank = if ineqs.is_empty() {
        return VarBounds::Range(None, None);
    } else {
        ineqs[0].coeffs.len()
    };
    let mut cur = dedupe(ineqs.to_vec());
    for v in 0..rank {
        if v == var {
            continue;
        }
        cur = fm_eliminate(&cur, v);
    }
    let mut lo: Option<Rat> = None;
    let mut hi: Option<Rat> = None;
    for q in &cur {
        let a = &q.coeffs[var];
        if a.is_zero() {
            if q.bound.is_negative() {
                return VarBounds::Infeasible;
            }
        } else if a.is_positive() {
            let b = &q.bound / a;
            hi = Some(match hi {
                Some(h) if h <= b => h,
                _ => b,
            });
        } else {
            let b = &q.bound / a;
            lo = Some(match lo {
                Some(l) if l >= b => l,
                _ => b,
            });
        }
    }
    if let (Some(l), Some(h)) = (&lo, &hi) {
        if l > h {
            return VarBounds::Infeasible;
        }
    }
    VarBounds::Range(lo, hi)
}

fn rat_ceil(r: &Rat) -> i64 {
    i64::try_from(r.ceil().to_integer()).expect("bound overflow")
}

fn rat_floor(r: &Rat) -> i64 {
    i64::try_from(r.floor().to_integer()).expect("bound overflow")
}

fn substitute(ineqs: &[RIneq], var: usize, value: i64) -> Vec<RIneq> {
    let val = Rat::from(BigInt::from(value));
    ineqs
        .iter()
        .map(|q| {
            let mut coeffs = q.coeffs.clone();
            let moved = coeffs[var].clone() * &val;
            coeffs[var] = Rat::zero();
            RIneq {
                coeffs,
                bound: &q.bound - moved,
            }
        })
        .collect()
}

enum SearchOutcome {
    Found(Point),
    /// Search space exhausted and every explored range was complete.
    EmptyComplete,
    /// Exhausted, but some unbounded direction was clamped by the window.
    EmptyCapped,
}

fn dfs_search(
    ineqs: &[RIneq],
    rank: usize,
    depth: usize,
    partial: &mut Vec<i64>,
    window: i64,
) -> SearchOutcome {
    if depth == rank {
        return SearchOutcome::Found(partial.clone());
    }
    if !rational_feasible(ineqs) {
        return SearchOutcome::EmptyComplete;
    }
    let (lo, hi, capped) = match var_bounds(ineqs, depth) {
        VarBounds::Infeasible => return SearchOutcome::EmptyComplete,
        VarBounds::Range(lo, hi) => {
            let mut capped = false;
            let li = match &lo {
                Some(l) => rat_ceil(l),
                None => {
                    capped = true;
                    match &hi {
                        Some(h) => rat_floor(h) - window,
                        None => -window,
                    }
                }
            };
            let hi_i = match &hi {
                Some(h) => rat_floor(h),
                None => {
                    capped = true;
                    li + 2 * window
                }
            };
            (li, hi_i, capped)
        }
    };
    let mut saw_cap = capped;
    for v in lo..=hi {
        let sub = substitute(ineqs, depth, v);
        partial.push(v);
        match dfs_search(&sub, rank, depth + 1, partial, window) {
            SearchOutcome::Found(p) => return SearchOutcome::Found(p),
            SearchOutcome::EmptyCapped => saw_cap = true,
            SearchOutcome::EmptyComplete => {}
        }
        partial.pop();
    }
    if saw_cap {
        SearchOutcome::EmptyCapped
    } else {
        SearchOutcome::EmptyComplete
    }
}

/// Integer solvability of the linear system A x = b, by reducing each
/// equation to a single gcd pivot via unimodular column operations. Needed
/// because the window search cannot certify emptiness of unbounded regions
/// carved out by non-primitive forms (e.g. 2x = 1).
fn diophantine_solvable(eqs: &[(Vec<i64>, i64)]) -> bool {
    if eqs.is_empty() {
        return true;
    }
    let n = eqs[0].0.len();
    let mut a: Vec<Vec<i64>> = eqs.iter().map(|(f, _)| f.clone()).collect();
    let mut b: Vec<i64> = eqs.iter().map(|(_, v)| *v).collect();
    let mut pivot_col = 0;
    for r in 0..a.len() {
        if pivot_col >= n {
            // Remaining equations must already be trivial.
            if a[r][..].iter().any(|&x| x != 0) || b[r] != 0 {
                // Non-trivial row past the pivots: fall through to the
                // gcd reduction below with no free column, so just test it.
            } else {
                continue;
            }
        }
        // Zero out row r beyond one pivot column via column Euclid.
        loop {
            let nz: Vec<usize> = (pivot_col..n).filter(|&c| a[r][c] != 0).collect();
            match nz.len() {
                0 => break,
                1 => {
                    let c = nz[0];
                    for row in a.iter_mut() {
                        row.swap(pivot_col, c);
                    }
                    break;
                }
                _ => {
                    // Reduce the larger entry by the smaller one.
                    let (mut ci, mut cj) = (nz[0], nz[1]);
                    if a[r][ci].abs() > a[r][cj].abs() {
                        std::mem::swap(&mut ci, &mut cj);
                    }
                    let q = a[r][cj] / a[r][ci];
                    for row in a.iter_mut() {
                        row[cj] -= q * row[ci];
                    }
                }
            }
        }
        let g = if pivot_col < n { a[r][pivot_col] } else { 0 };
        if g == 0 {
            if b[r] != 0 {
                return false;
            }
            continue;
        }
        if b[r] % g != 0 {
            return false;
        }
        let y = b[r] / g;
        for rr in r + 1..a.len() {
            b[rr] -= a[rr][pivot_col] * y;
            a[rr][pivot_col] = 0;
        }
        pivot_col += 1;
    }
    true
}

/// Divide each constraint by the gcd of its coefficients, rounding bounds
/// toward the integer-feasible side; `None` when a row is unsatisfiable
/// over ℤ on its own (e.g. 2x = 1, or a constant row that fails).
fn tighten_constraints(cons: &[Constraint]) -> Option<Vec<Constraint>> {
    fn gcd(a: i64, b: i64) -> i64 {
        let (mut a, mut b) = (a.abs(), b.abs());
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a
    }
    let mut out = Vec::with_capacity(cons.len());
    for c in cons {
        let g = c.form.coeffs.iter().fold(0i64, |acc, &x| gcd(acc, x));
        if g == 0 {
            let ok = match c.rel {
                Rel::Ge => c.bound <= 0,
                Rel::Le => c.bound >= 0,
                Rel::Eq => c.bound == 0,
            };
            if !ok {
                return None;
            }
            continue;
        }
        let coeffs: Vec<i64> = c.form.coeffs.iter().map(|x| x / g).collect();
        let bound = match c.rel {
            // ceil(b/g) for ≥, floor(b/g) for ≤.
            Rel::Ge => -(-c.bound).div_euclid(g),
            Rel::Le => c.bound.div_euclid(g),
            Rel::Eq => {
                if c.bound % g != 0 {
                    return None;
                }
                c.bound / g
            }
        };
        out.push(Constraint {
            form: LinearForm::new(coeffs),
            rel: c.rel,
            bound,
        });
    }
    Some(out)
}

/// Find an integer point satisfying `cs`, or prove there is none.
///
/// Exact Fourier–Motzkin bounds plus depth-first integer search; unbounded
/// directions are explored inside growing windows, and exhaustion of a
/// clamped window yields `Inconclusive` rather than a wrong "empty".
pub fn integer_feasible(cs: &ConstraintSet) -> Result<Option<Point>, ConeError> {
    let rank = cs.rank();
    if rank > 6 {
        return Err(ConeError::RankGuard(rank));
    }
    // Integer tightening: divide each row by the gcd of its coefficients and
    // round the bound inward. Preserves the integer solution set and makes
    // lattice-empty rows like 2x ≥ 1 ∧ 2x ≤ 1 rationally infeasible.
    let Some(tight) = tighten_constraints(&cs.constraints) else {
        return Ok(None);
    };
    let ineqs = to_rineqs(&tight);
    if !rational_feasible(&ineqs) {
        return Ok(None);
    }
    let eqs: Vec<(Vec<i64>, i64)> = tight
        .iter()
        .filter(|c| c.rel == Rel::Eq)
        .map(|c| (c.form.coeffs.clone(), c.bound))
        .collect();
    if !diophantine_solvable(&eqs) {
        return Ok(None);
    }
    for window in [4i64, 32, 256] {
        let mut partial = Vec::new();
        match dfs_search(&ineqs, rank, 0, &mut partial, window) {
            SearchOutcome::Found(p) => {
                // Every returned point is re-verified by membership.
                assert!(cs.contains(&p), "search returned a non-member point");
                return Ok(Some(p));
            }
            SearchOutcome::EmptyComplete => return Ok(None),
            SearchOutcome::EmptyCapped => continue,
        }
    }
    Err(ConeError::Inconclusive(
        "integer search window exhausted on a rationally feasible system".into(),
    ))
}

/// Pass iff `pieces` is an exact disjoint cover of `lhs`.
pub fn verify_partition(
    lhs: &SemilinearFormula,
    pieces: &[ConePiece],
    pair: &SphericalPair,
) -> Result<Verdict, ConeError> {
    let resolved: Vec<ConstraintSet> = pieces
        .iter()
        .map(|p| p.resolve(pair))
        .collect::<Result<_, _>>()?;
    // Disjointness.
    for i in 0..resolved.len() {
        for j in (i + 1)..resolved.len() {
            let both = resolved[i].and(&resolved[j].constraints);
            if let Some(w) = integer_feasible(&both)? {
                return Ok(Verdict::FailDisjoint(w, i, j));
            }
        }
    }
    // Cover: each lhs disjunct minus all pieces must be empty.
    for d in &lhs.disjuncts {
        if let Some(w) = conjunction_minus_all(d, &resolved)? {
            return Ok(Verdict::FailCover(w));
        }
    }
    // Containment: each piece minus all lhs disjuncts must be empty.
    for p in &resolved {
        if let Some(w) = conjunction_minus_all(p, &lhs.disjuncts)? {
            return Ok(Verdict::FailCover(w));
        }
    }
    Ok(Verdict::Pass)
}

/// Is base ∧ ¬(s₁ ∨ s₂ ∨ …) nonempty? Returns a witness if so.
fn conjunction_minus_all(
    base: &ConstraintSet,
    subtracted: &[ConstraintSet],
) -> Result<Option<Point>, ConeError> {
    fn rec(
        base: &ConstraintSet,
        rest: &[ConstraintSet],
    ) -> Result<Option<Point>, ConeError> {
        if !rational_feasible(&to_rineqs(&base.constraints)) {
            return Ok(None);
        }
        // Only sets that can still meet the base need subtracting; the base
        // gains constraints as the recursion deepens, so a set that misses
        // it now misses it in every branch below.
        let hit = rest
            .iter()
            .position(|s| rational_feasible(&to_rineqs(&base.and(&s.constraints).constraints)));
        let Some(i) = hit else {
            return integer_feasible(base);
        };
        let (first, tail) = (&rest[i], &rest[i + 1..]);
        for k in 0..first.constraints.len() {
            for neg in first.constraints[k].negations() {
                let mut branch = base.clone();
                branch
                    .constraints
                    .extend(first.constraints[..k].iter().cloned());
                branch.constraints.push(neg);
                if let Some(w) = rec(&branch, tail)? {
                    return Ok(Some(w));
                }
            }
        }
        Ok(None)
    }
    rec(base, subtracted)
}

/// Finiteness of the integer solution set, decided via the recession cone:
/// finite iff no coordinate direction admits a nonzero rational ray.
pub fn is_finite(cs: &ConstraintSet) -> bool {
    let rec = recession(cs);
    let ineqs = to_rineqs(&rec.constraints);
    if !rational_feasible(&to_rineqs(&cs.constraints)) {
        return true;
    }
    for var in 0..cs.rank() {
        for dir in [1i64, -1] {
            let mut probe = ineqs.clone();
            let mut coeffs = vec![Rat::zero(); cs.rank()];
            coeffs[var] = Rat::from(BigInt::from(-dir));
            probe.push(RIneq {
                coeffs,
                bound: Rat::from(BigInt::from(-1)),
            });
            if rational_feasible(&probe) {
                return false;
            }
        }
    }
    true
}

/// A nonzero integer recession direction, when one exists.
pub fn recession_direction(cs: &ConstraintSet) -> Result<Option<Point>, ConeError> {
    let rec = recession(cs);
    for var in 0..cs.rank() {
        for dir in [1i64, -1] {
            let mut unit = vec![0i64; cs.rank()];
            unit[var] = dir;
            let probe = rec.and(&[Constraint::ge(
                LinearForm::new(unit),
                1,
            )]);
            if let Some(p) = integer_feasible(&probe)? {
                return Ok(Some(p));
            }
        }
    }
    Ok(None)
}

/// All integer solutions with every coordinate in [−B, B], lexicographic.
pub fn enumerate_box(cs: &ConstraintSet, b: i64) -> Vec<Point> {
    let rank = cs.rank();
    let mut out = Vec::new();
    let mut partial = Vec::with_capacity(rank);
    enumerate_rec(cs, b, &mut partial, &mut out);
    out
}

fn enumerate_rec(cs: &ConstraintSet, b: i64, partial: &mut Vec<i64>, out: &mut Vec<Point>) {
    let rank = cs.rank();
    let depth = partial.len();
    if depth == rank {
        out.push(partial.clone());
        return;
    }
    // Interval pruning: each constraint must stay satisfiable with the
    // remaining coordinates in [−B, B].
    'vals: for v in -b..=b {
        partial.push(v);
        for c in &cs.constraints {
            let fixed: i64 = c
                .form
                .coeffs
                .iter()
                .take(partial.len())
                .zip(partial.iter())
                .map(|(a, x)| a * x)
                .sum();
            let rest: i64 = c.form.coeffs[partial.len()..]
                .iter()
                .map(|a| a.abs() * b)
                .sum();
            let ok = match c.rel {
                Rel::Ge => fixed + rest >= c.bound,
                Rel::Le => fixed - rest <= c.bound,
                Rel::Eq => fixed - rest <= c.bound && fixed + rest >= c.bound,
            };
            if !ok {
                partial.pop();
                continue 'vals;
            }
        }
        enumerate_rec(cs, b, partial, out);
        partial.pop();
    }
}

/// Enumerate a provably bounded solution set exactly (error if unbounded).
pub fn enumerate_bounded(cs: &ConstraintSet) -> Result<Vec<Point>, ConeError> {
    if !is_finite(cs) {
        return Err(ConeError::Inconclusive(
            "enumerate_bounded called on an infinite set".into(),
        ));
    }
    let ineqs = to_rineqs(&cs.constraints);
    if !rational_feasible(&ineqs) {
        return Ok(Vec::new());
    }
    let mut b = 1i64;
    for var in 0..cs.rank() {
        match var_bounds(&ineqs, var) {
            VarBounds::Infeasible => return Ok(Vec::new()),
            VarBounds::Range(lo, hi) => {
                // A finite set with a feasible rational relaxation is still
                // finite in each coordinate; missing bounds can only happen
                // when the rational relaxation is unbounded, which is_finite
                // already excluded.
                let (Some(lo), Some(hi)) = (lo, hi) else {
                    return Err(ConeError::Inconclusive(
                        "unbounded coordinate on a finite set".into(),
                    ));
                };
                b = b.max(rat_ceil(&lo).abs()).max(rat_floor(&hi).abs());
            }
        }
    }
    Ok(enumerate_box(cs, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::root_datum::build_catalog_pair;

    fn one_var(constraints: Vec<Constraint>) -> ConstraintSet {
        ConstraintSet::new(1, constraints)
    }

    fn ge1(c: i64) -> Constraint {
        Constraint::ge(LinearForm::new(vec![1]), c)
    }

    fn le1(c: i64) -> Constraint {
        Constraint::le(LinearForm::new(vec![1]), c)
    }

    #[test]
    fn std_cone_examples() {
        let t = build_catalog_pair("triple", None).unwrap();
        let cone = std_cone(&t, &StdConeId::new(BTreeSet::new(), Sector::None)).unwrap();
        assert_eq!(cone.constraints, vec![ge1(1)]);
        let full = std_cone(
            &t,
            &StdConeId::new([0].into_iter().collect(), Sector::None),
        )
        .unwrap();
        assert_eq!(full.constraints, vec![Constraint::eq(LinearForm::new(vec![1]), 0)]);

        let w = build_catalog_pair("waldspurger", None).unwrap();
        let minus = std_cone(&w, &StdConeId::new(BTreeSet::new(), Sector::Minus)).unwrap();
        assert_eq!(minus.constraints, vec![le1(-1)]);
        assert!(std_cone(&w, &StdConeId::new(BTreeSet::new(), Sector::None)).is_err());
        assert!(std_cone(&t, &StdConeId::new(BTreeSet::new(), Sector::Plus)).is_err());
    }

    #[test]
    fn translate_examples() {
        let cs = one_var(vec![ge1(1)]);
        let shifted = translate(&cs, &[3]).unwrap();
        assert_eq!(shifted.constraints, vec![ge1(4)]);
        assert_eq!(translate(&cs, &[0]).unwrap(), cs);
        // Membership coherence.
        assert!(shifted.contains(&[4]) && !shifted.contains(&[3]));

        // gl4gl2: shifting {⟨β,x⟩ = 0} by s20 moves the bound by ⟨β,s20⟩ = 1.
        let p = build_catalog_pair("gl4gl2", None).unwrap();
        let beta = p.c_h.as_ref().unwrap().1.clone();
        assert_eq!(beta.dot(&[1, 1, 0]), 1);
        let cs = ConstraintSet::new(3, vec![Constraint::eq(beta.clone(), 0)]);
        let sh = translate(&cs, &[1, 1, 0]).unwrap();
        assert_eq!(sh.constraints, vec![Constraint::eq(beta, 1)]);
    }

    #[test]
    fn difference_formula_examples() {
        // {a ≥ 1} − {a ≥ n+1} = {1 ≤ a ≤ n}.
        let n = 4;
        let cs = one_var(vec![ge1(1)]);
        let sh = one_var(vec![ge1(n + 1)]);
        let f = difference_formula(&cs, &sh);
        assert_eq!(f.disjuncts.len(), 1);
        for a in -3..10 {
            assert_eq!(f.contains(&[a]), (1..=n).contains(&a), "a={a}");
        }
        // cs − cs is empty.
        let empty = difference_formula(&cs, &cs);
        for a in -3..10 {
            assert!(!empty.contains(&[a]));
        }
        // Two variables, first-violation expansion.
        let cs2 = ConstraintSet::new(
            2,
            vec![
                Constraint::ge(LinearForm::new(vec![1, 0]), 1),
                Constraint::ge(LinearForm::new(vec![0, 1]), 1),
            ],
        );
        let sh2 = translate(&cs2, &[3, 0]).unwrap();
        let f2 = difference_formula(&cs2, &sh2);
        for x in -2..8 {
            for y in -2..8 {
                let expect = (1..=3).contains(&x) && y >= 1;
                assert_eq!(f2.contains(&[x, y]), expect, "({x},{y})");
                // Disjointness of disjuncts.
                let hits = f2.disjuncts.iter().filter(|d| d.contains(&[x, y])).count();
                assert!(hits <= 1);
            }
        }
    }

    #[test]
    fn integer_feasible_examples() {
        assert_eq!(integer_feasible(&one_var(vec![ge1(1), le1(0)])).unwrap(), None);
        assert_eq!(integer_feasible(&one_var(vec![ge1(1)])).unwrap(), Some(vec![1]));
        // 2x = 1: rationally feasible, integrally infeasible.
        let parity = one_var(vec![Constraint::eq(LinearForm::new(vec![2]), 1)]);
        assert_eq!(integer_feasible(&parity).unwrap(), None);
        // Guard.
        assert!(matches!(
            integer_feasible(&ConstraintSet::new(7, vec![])),
            Err(ConeError::RankGuard(7))
        ));
    }

    #[test]
    fn recession_and_finiteness() {
        let cs = one_var(vec![ge1(1)]);
        assert_eq!(recession(&cs).constraints, vec![ge1(0)]);
        assert!(!is_finite(&cs));
        assert!(is_finite(&one_var(vec![ge1(1), le1(5)])));
        let tri = ConstraintSet::new(
            2,
            vec![
                Constraint::ge(LinearForm::new(vec![1, 0]), 1),
                Constraint::ge(LinearForm::new(vec![0, 1]), 1),
                Constraint::le(LinearForm::new(vec![1, 1]), 4),
            ],
        );
        assert!(is_finite(&tri));
        let dir = recession_direction(&one_var(vec![le1(-1)])).unwrap().unwrap();
        assert!(dir[0] <= -1);
    }

    #[test]
    fn enumerate_examples() {
        let cs = one_var(vec![ge1(1), le1(3)]);
        assert_eq!(enumerate_box(&cs, 10), vec![vec![1], vec![2], vec![3]]);
        assert!(enumerate_box(&one_var(vec![ge1(1), le1(0)]), 10).is_empty());
        let diag = ConstraintSet::new(
            2,
            vec![
                Constraint::eq(LinearForm::new(vec![1, -1]), 0),
                Constraint::ge(LinearForm::new(vec![1, 0]), 1),
            ],
        );
        assert_eq!(enumerate_box(&diag, 2), vec![vec![1, 1], vec![2, 2]]);
        assert_eq!(enumerate_bounded(&cs).unwrap().len(), 3);
        assert!(enumerate_bounded(&one_var(vec![ge1(1)])).is_err());
    }

    #[test]
    fn verify_partition_examples() {
        let t = build_catalog_pair("triple", None).unwrap();
        let ctx = StdConeId::new(BTreeSet::new(), Sector::None);
        let cone = std_cone(&t, &ctx).unwrap();
        let shifted = translate(&cone, &[3]).unwrap();
        let lhs = difference_formula(&cone, &shifted);
        let origin = StdConeId::new([0].into_iter().collect(), Sector::None);
        let mk = |s: i64| ConePiece::new(&t, &ctx, vec![s], origin.clone()).unwrap();
        let ok = verify_partition(&lhs, &[mk(1), mk(2), mk(3)], &t).unwrap();
        assert_eq!(ok, Verdict::Pass);
        let missing = verify_partition(&lhs, &[mk(1), mk(2)], &t).unwrap();
        assert_eq!(missing, Verdict::FailCover(vec![3]));
        let dup = verify_partition(&lhs, &[mk(1), mk(1)], &t).unwrap();
        assert!(matches!(dup, Verdict::FailDisjoint(_, 0, 1)));
    }

    #[test]
    fn cone_piece_shift_checks() {
        let w = build_catalog_pair("waldspurger", None).unwrap();
        let plus = StdConeId::new(BTreeSet::new(), Sector::Plus);
        let zero = StdConeId::new(BTreeSet::new(), Sector::Zero);
        // Same-sector shifts need v_β ≥ 0; zero bodies need v_β ≥ 1.
        assert!(ConePiece::new(&w, &plus, vec![2], plus.clone()).is_ok());
        assert!(ConePiece::new(&w, &plus, vec![-1], plus.clone()).is_err());
        assert!(ConePiece::new(&w, &plus, vec![0], zero.clone()).is_err());
        assert!(ConePiece::new(&w, &plus, vec![1], zero).is_ok());
    }
}
