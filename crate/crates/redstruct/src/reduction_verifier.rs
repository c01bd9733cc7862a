//! Machine verification of reduction structures: triple membership, the
//! cone-difference decomposition condition (F1), the finiteness condition
//! (F2), minimality, and the full catalog of shipped structures.

use crate::cone_calculus::{
    difference_formula, enumerate_box, integer_feasible, is_finite, rationally_feasible,
    recession, std_cone, translate, verify_partition, ConeError, ConePiece, Constraint,
    ConstraintSet, Rel, Sector, StdConeId, Verdict,
};
use crate::ring::Rat;
use crate::root_datum::{build_catalog_pair, weyl_apply, LinearForm, Point, SphericalPair};
use std::collections::BTreeSet;

/// One member (Θ, w, s) of a reduction structure. `theta` holds indices into
/// the pair's Δ_G, `w` names one of the pair's Weyl elements, `s` is a point
/// of the H-lattice.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Triple {
    pub theta: BTreeSet<usize>,
    pub w: String,
    pub s: Point,
}

/// One piece of an (F1) decomposition template. `Family` expands, for a
/// given n, to the shifts base + i·step for i = 1..n.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TemplateEntry {
    Fixed { shift: Point, body: StdConeId },
    Family { base: Point, step: Point, body: StdConeId },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct F1Template {
    pub entries: Vec<TemplateEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReductionStructure {
    /// Indices into the pair's Δ_H.
    pub theta_h: BTreeSet<usize>,
    pub sector: Sector,
    pub entries: Vec<(Triple, F1Template)>,
}

impl ReductionStructure {
    pub fn cone_id(&self) -> StdConeId {
        StdConeId::new(self.theta_h.clone(), self.sector)
    }
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub n_max: u32,
    pub m_list: Vec<i64>,
    pub b_list: Vec<i64>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            n_max: 4,
            m_list: vec![1, 3],
            b_list: vec![12, 24],
        }
    }
}

#[derive(Clone, Debug)]
pub struct Report {
    pub key: String,
    /// One verdict per triple.
    pub membership: Vec<Verdict>,
    /// One verdict per triple, aggregated over n = 1..n_max.
    pub f1: Vec<Verdict>,
    pub f2: Verdict,
    pub minimality: Verdict,
    pub elapsed_ms: u128,
}

impl Report {
    pub fn all_verdicts(&self) -> impl Iterator<Item = &Verdict> {
        self.membership
            .iter()
            .chain(self.f1.iter())
            .chain(std::iter::once(&self.f2))
            .chain(std::iter::once(&self.minimality))
    }

    pub fn passed(&self) -> bool {
        self.all_verdicts().all(Verdict::is_pass)
    }

    pub fn inconclusive(&self) -> bool {
        self.all_verdicts()
            .any(|v| matches!(v, Verdict::Inconclusive(_)))
    }

    pub fn status(&self) -> &'static str {
        if self.passed() {
            "pass"
        } else if self.inconclusive() {
            "inconclusive"
        } else {
            "fail"
        }
    }
}

// ---------------------------------------------------------------------------
// Triple membership.

/// Conditions for (Θ, w, s) to be a legal member over (Θ_H, sector):
/// (a) w·embed(s) vanishes on Θ and is dominant on Δ_G − Θ;
/// (b) s is dominant for Δ_H;
/// (c) s vanishes on Θ_H and its C_H sign is zero or the ambient sector;
/// (d) s ≠ 0.
pub fn check_triple_membership(
    pair: &SphericalPair,
    theta_h: &BTreeSet<usize>,
    sector: Sector,
    triple: &Triple,
) -> Verdict {
    if triple.s.len() != pair.h_rank() {
        return Verdict::Inconclusive("s has wrong dimension".into());
    }
    let Some(w) = pair.weyl_by_name(&triple.w) else {
        return Verdict::Inconclusive(format!("unknown weyl element `{}`", triple.w));
    };
    let wex = match weyl_apply(w, &pair.embed_point(&triple.s)) {
        Ok(v) => v,
        Err(e) => return Verdict::Inconclusive(e.to_string()),
    };
    for (i, (_, alpha)) in pair.delta_g.iter().enumerate() {
        let v = alpha.dot(&wex);
        let ok = if triple.theta.contains(&i) { v == 0 } else { v >= 0 };
        if !ok {
            return Verdict::FailCover(triple.s.clone());
        }
    }
    for (i, (_, alpha)) in pair.delta_h.iter().enumerate() {
        let v = alpha.dot(&triple.s);
        let ok = if theta_h.contains(&i) { v == 0 } else { v >= 0 };
        if !ok {
            return Verdict::FailCover(triple.s.clone());
        }
    }
    if let Some((_, beta)) = &pair.c_h {
        let v = beta.dot(&triple.s);
        let ok = match sector {
            Sector::Plus => v >= 0,
            Sector::Zero => v == 0,
            Sector::Minus => v <= 0,
            Sector::None => false,
        };
        if !ok {
            return Verdict::FailCover(triple.s.clone());
        }
    }
    if triple.s.iter().all(|&c| c == 0) {
        return Verdict::FailCover(triple.s.clone());
    }
    Verdict::Pass
}

// ---------------------------------------------------------------------------
// (F1): template derivation and checking.

/// A slice of the standard cone: one condition per basis form Δ_H ∪ C_H,
/// each an equality or a one-sided bound.
#[derive(Clone, Debug)]
struct Slice {
    /// (form, rel, bound); rel ∈ {Eq, Ge, Le}, in basis-form order.
    cons: Vec<(LinearForm, Rel, i64)>,
    h_len: usize,
}

impl Slice {
    fn to_constraint_set(&self, rank: usize) -> ConstraintSet {
        ConstraintSet::new(
            rank,
            self.cons
                .iter()
                .map(|(f, r, b)| Constraint {
                    form: f.clone(),
                    rel: *r,
                    bound: *b,
                })
                .collect(),
        )
    }

    fn body_id(&self) -> StdConeId {
        let theta: BTreeSet<usize> = (0..self.h_len)
            .filter(|&i| self.cons[i].1 == Rel::Eq)
            .collect();
        let sector = match self.cons.get(self.h_len) {
            None => Sector::None,
            Some((_, Rel::Ge, _)) => Sector::Plus,
            Some((_, Rel::Eq, _)) => Sector::Zero,
            Some((_, Rel::Le, _)) => Sector::Minus,
        };
        StdConeId::new(theta, sector)
    }
}

const LAYER_RANGE_CAP: i64 = 64;

/// Exactly decompose the integer points of a slice into translated standard
/// cones, greedily: pick an integer point t ∈ slice, carve out T_t(body),
/// and recurse into the first-violation layers (each with one more pinned
/// form). Terminates because every recursion adds an equality.
fn decompose_slice(
    pair: &SphericalPair,
    slice: &Slice,
    out: &mut Vec<(Point, StdConeId)>,
) -> Result<(), ConeError> {
    let rank = pair.h_rank();
    let cs = slice.to_constraint_set(rank);
    let Some(t) = integer_feasible(&cs)? else {
        return Ok(());
    };
    let body = slice.body_id();
    // The piece T_t(std_cone(body)) replaces each non-equality bound b by
    // the first-violation-free bound derived from t.
    let piece_bound = |f: &LinearForm, r: Rel| match r {
        Rel::Eq => f.dot(&t),
        Rel::Ge => 1 + f.dot(&t),
        Rel::Le => -1 + f.dot(&t),
    };
    out.push((t.clone(), body));
    for k in 0..slice.cons.len() {
        let (f, r, b) = &slice.cons[k];
        // Layers of slice − piece where constraint k is the first violated.
        let range: Vec<i64> = match r {
            Rel::Eq => continue,
            Rel::Ge => (*b..=piece_bound(f, Rel::Ge) - 1).collect(),
            Rel::Le => (piece_bound(f, Rel::Le) + 1..=*b).collect(),
        };
        if range.len() as i64 > LAYER_RANGE_CAP {
            return Err(ConeError::Inconclusive(
                "layer range exceeds cap during template derivation".into(),
            ));
        }
        for m in range {
            let mut sub = slice.clone();
            for j in 0..k {
                let (fj, rj, _) = sub.cons[j].clone();
                sub.cons[j].2 = piece_bound(&fj, rj);
            }
            sub.cons[k].1 = Rel::Eq;
            sub.cons[k].2 = m;
            decompose_slice(pair, &sub, out)?;
        }
    }
    Ok(())
}

/// Build the base slice for a context cone: Θ_H forms pinned to 0, the rest
/// bounded by 1, and the sector condition on the C_H form.
fn context_slice(pair: &SphericalPair, ctx: &StdConeId) -> Slice {
    let mut cons = Vec::new();
    for (i, (_, alpha)) in pair.delta_h.iter().enumerate() {
        if ctx.theta_h.contains(&i) {
            cons.push((alpha.clone(), Rel::Eq, 0));
        } else {
            cons.push((alpha.clone(), Rel::Ge, 1));
        }
    }
    if let Some((_, beta)) = &pair.c_h {
        let c = match ctx.sector {
            Sector::Plus => (beta.clone(), Rel::Ge, 1),
            Sector::Zero => (beta.clone(), Rel::Eq, 0),
            Sector::Minus => (beta.clone(), Rel::Le, -1),
            Sector::None => unreachable!("sector checked by std_cone"),
        };
        cons.push(c);
    }
    Slice {
        cons,
        h_len: pair.delta_h.len(),
    }
}

/// Reconstruct an (F1) template for one triple: decompose C − T_s C exactly
/// into translated standard cones and wrap each piece as a family whose
/// shifts telescope along s (C − T_{sⁿ}C = ⊔_{i<n} T_{sⁱ}(C − T_sC)).
pub fn derive_template(
    pair: &SphericalPair,
    ctx: &StdConeId,
    s: &Point,
) -> Result<F1Template, ConeError> {
    std_cone(pair, ctx)?; // validates the sector
    let base = context_slice(pair, ctx);
    let mut pieces = Vec::new();
    for k in 0..base.cons.len() {
        let (f, r, b) = &base.cons[k];
        let c = f.dot(s);
        let range: Vec<i64> = match r {
            Rel::Eq => {
                if c != 0 {
                    return Err(ConeError::Inconclusive(
                        "shift does not preserve a pinned form".into(),
                    ));
                }
                continue;
            }
            Rel::Ge => (*b..=*b + c - 1).collect(),
            Rel::Le => (*b + c + 1..=*b).collect(),
        };
        if range.len() as i64 > LAYER_RANGE_CAP {
            return Err(ConeError::Inconclusive(
                "shift step exceeds the layer cap".into(),
            ));
        }
        for m in range {
            let mut sub = base.clone();
            for j in 0..k {
                let (fj, _, bj) = sub.cons[j].clone();
                sub.cons[j].2 = bj + fj.dot(s);
            }
            sub.cons[k].1 = Rel::Eq;
            sub.cons[k].2 = m;
            decompose_slice(pair, &sub, &mut pieces)?;
        }
    }
    Ok(F1Template {
        entries: pieces
            .into_iter()
            .map(|(t, body)| TemplateEntry::Family {
                base: t.iter().zip(s).map(|(a, b)| a - b).collect(),
                step: s.clone(),
                body,
            })
            .collect(),
    })
}

/// Expand a template for a given n into concrete pieces (with the semigroup
/// membership of each shift enforced by `ConePiece::new`).
pub fn instantiate_template(
    pair: &SphericalPair,
    ctx: &StdConeId,
    template: &F1Template,
    n: u32,
) -> Result<Vec<ConePiece>, ConeError> {
    let mut out = Vec::new();
    for e in &template.entries {
        match e {
            TemplateEntry::Fixed { shift, body } => {
                out.push(ConePiece::new(pair, ctx, shift.clone(), body.clone())?);
            }
            TemplateEntry::Family { base, step, body } => {
                for i in 1..=i64::from(n) {
                    let shift: Point =
                        base.iter().zip(step).map(|(b, s)| b + i * s).collect();
                    out.push(ConePiece::new(pair, ctx, shift, body.clone())?);
                }
            }
        }
    }
    Ok(out)
}

/// Check (F1) for every triple of the structure and every n = 1..n_max:
/// the template pieces must exactly partition C − T_{n·s}C.
pub fn check_f1_triple(
    pair: &SphericalPair,
    ctx: &StdConeId,
    triple: &Triple,
    template: &F1Template,
    n_max: u32,
) -> Verdict {
    let cone = match std_cone(pair, ctx) {
        Ok(c) => c,
        Err(e) => return Verdict::Inconclusive(e.to_string()),
    };
    for n in 1..=n_max {
        let ns: Point = triple.s.iter().map(|&c| c * i64::from(n)).collect();
        let shifted = match translate(&cone, &ns) {
            Ok(s) => s,
            Err(e) => return Verdict::Inconclusive(e.to_string()),
        };
        let lhs = difference_formula(&cone, &shifted);
        let pieces = match instantiate_template(pair, ctx, template, n) {
            Ok(p) => p,
            Err(e) => return Verdict::Inconclusive(format!("template invariant: {e}")),
        };
        match verify_partition(&lhs, &pieces, pair) {
            Ok(Verdict::Pass) => {}
            Ok(v) => return v,
            Err(e) => return Verdict::Inconclusive(e.to_string()),
        }
    }
    Verdict::Pass
}

pub fn check_f1(pair: &SphericalPair, structure: &ReductionStructure, n_max: u32) -> Vec<Verdict> {
    let ctx = structure.cone_id();
    // The decomposition depends only on the shift and template, not on the
    // triple's (Θ, w); structures repeat shifts, so dedupe the work.
    let mut seen: Vec<(&Point, &F1Template, Verdict)> = Vec::new();
    structure
        .entries
        .iter()
        .map(|(t, tpl)| {
            if let Some((_, _, v)) = seen.iter().find(|(s, p, _)| **s == t.s && *p == tpl) {
                return v.clone();
            }
            let v = check_f1_triple(pair, &ctx, t, tpl, n_max);
            seen.push((&t.s, tpl, v.clone()));
            v
        })
        .collect()
}

// ---------------------------------------------------------------------------
// (F2): finiteness of the constrained region, and minimality.

/// The per-triple condition "if w·embed(x) is dominant then some root off Θ
/// is bounded", pulled back to linear forms on the H-lattice.
#[derive(Clone, Debug)]
struct TripleForms {
    /// ⟨α', w·embed(·)⟩ for every α' ∈ Δ_G (dominance-failure witnesses).
    dom: Vec<LinearForm>,
    /// ⟨α, w·embed(·)⟩ for α ∈ Δ_G − Θ (bounded-root witnesses).
    bounded: Vec<LinearForm>,
}

fn triple_forms(pair: &SphericalPair, t: &Triple) -> Result<TripleForms, ConeError> {
    let w = pair
        .weyl_by_name(&t.w)
        .ok_or_else(|| ConeError::Inconclusive(format!("unknown weyl element `{}`", t.w)))?;
    let dom: Vec<LinearForm> = pair
        .delta_g
        .iter()
        .map(|(_, f)| f.compose(&w.matrix).compose(&pair.embed))
        .collect();
    let bounded = pair
        .delta_g
        .iter()
        .enumerate()
        .filter(|(i, _)| !t.theta.contains(i))
        .map(|(_, (_, f))| f.compose(&w.matrix).compose(&pair.embed))
        .collect();
    Ok(TripleForms { dom, bounded })
}

/// Direction analysis: is the constrained region infinite for some bound M?
///
/// The condition expands into DNF branches (one witness choice per triple).
/// A branch is unbounded-for-large-M iff its M-free part (cone plus strict
/// dominance-failure witnesses) has an integer point and its recession cone
/// (cone and all chosen witnesses homogenized) has a nonzero ray.
///
/// Witness forms repeat heavily across triples, so the search works on
/// globally deduplicated rows: a triple already covered by a chosen row adds
/// nothing, and identical (depth, row-set) states are visited once. The
/// feasibility caches are keyed by chosen-row sets alone, so minimality's
/// one-deletion re-runs hit them almost everywhere.
struct Stage1 {
    cone: ConstraintSet,
    hom0: ConstraintSet,
    /// Strictly positive on every nonzero recession direction of the cone
    /// (the sum of all inequality forms of a basis-aligned cone), turning
    /// "nonzero ray" into the single inequality φ ≥ 1.
    phi: LinearForm,
    /// Deduplicated witness rows; `true` marks dominance-failure witnesses,
    /// which constrain the base point as well as the direction.
    rows: Vec<(LinearForm, bool)>,
    /// Per triple: rows it may add.
    choices: Vec<Vec<usize>>,
    /// Per triple: rows whose presence already satisfies it (a strict row
    /// subsumes the homogeneous part of the same-form bounded option).
    accepts: Vec<u128>,
    /// Free generators of the (simplicial) recession cone, when the cone is
    /// cut out by exactly one constraint per basis direction and has at most
    /// three free generators; enables the polygon-clipping fast path.
    gens: Option<Vec<Point>>,
    /// Per row: values on the free generators (parallel to `gens`).
    row_vals: Vec<Vec<i64>>,
    ray_ok: std::collections::HashMap<u128, bool>,
    strict_ok: std::collections::HashMap<u128, bool>,
}

/// Primitive integer generators of the recession cone of a basis-aligned
/// cone (one constraint per basis form): the signed, scaled columns of the
/// inverse form matrix, skipping pinned (equality) directions.
fn cone_generators(cone: &ConstraintSet) -> Option<Vec<Point>> {
    let n = cone.rank();
    if cone.constraints.len() != n {
        return None;
    }
    let mat: Vec<Vec<Rat>> = cone
        .constraints
        .iter()
        .map(|c| c.form.coeffs.iter().map(|&x| crate::ring::rat_int(x)).collect())
        .collect();
    let inv = crate::linalg::inverse(&mat)?;
    let mut gens = Vec::new();
    for (i, c) in cone.constraints.iter().enumerate() {
        let sign: i64 = match c.rel {
            Rel::Ge => 1,
            Rel::Le => -1,
            Rel::Eq => continue,
        };
        let col: Vec<Rat> = (0..n).map(|r| inv[r][i].clone()).collect();
        let lcm = col
            .iter()
            .fold(num::BigInt::from(1), |l, x| num::integer::lcm(l, x.denom().clone()));
        let ints: Vec<num::BigInt> = col.iter().map(|x| (x * &lcm).to_integer()).collect();
        let g = ints
            .iter()
            .fold(num::BigInt::from(0), |a, b| num::integer::gcd(a, b.clone()));
        let v: Vec<i64> = ints
            .iter()
            .map(|x| i64::try_from(x / &g).ok().map(|y| y * sign))
            .collect::<Option<_>>()?;
        gens.push(v);
    }
    Some(gens)
}

/// Clip a convex region (vertex cycle on the generator simplex, in the first
/// m barycentric coordinates) by the halfspace w·x ≤ rhs. Exact rational
/// Sutherland–Hodgman; handles degenerate 0/1/2-vertex regions.
fn dir_clip(verts: &[Vec<Rat>], w: &[Rat], rhs: &Rat) -> Vec<Vec<Rat>> {
    let side = |v: &[Rat]| -> Rat {
        let mut s = -rhs.clone();
        for (wi, vi) in w.iter().zip(v) {
            s += wi * vi;
        }
        s
    };
    let zero = crate::ring::rat_int(0);
    if verts.len() <= 1 {
        return verts
            .iter()
            .filter(|v| side(v) <= zero)
            .cloned()
            .collect();
    }
    let mut out: Vec<Vec<Rat>> = Vec::new();
    let n = verts.len();
    for i in 0..n {
        let p = &verts[i];
        let q = &verts[(i + 1) % n];
        let sp = side(p);
        let sq = side(q);
        if sp <= zero {
            if out.last() != Some(p) {
                out.push(p.clone());
            }
        }
        if (sp < zero && sq > zero) || (sp > zero && sq < zero) {
            let t = &sp / (&sp - &sq);
            let x: Vec<Rat> = p
                .iter()
                .zip(q)
                .map(|(pc, qc)| pc + &t * (qc - pc))
                .collect();
            if out.last() != Some(&x) {
                out.push(x);
            }
        }
    }
    if out.len() > 1 && out.first() == out.last() {
        out.pop();
    }
    out
}

impl Stage1 {
    fn new(cone: &ConstraintSet, forms: &[TripleForms]) -> Result<Self, ConeError> {
        let mut rows: Vec<(LinearForm, bool)> = Vec::new();
        let row_id = |f: &LinearForm, strict: bool, rows: &mut Vec<(LinearForm, bool)>| {
            match rows.iter().position(|(g, s)| g == f && *s == strict) {
                Some(i) => i,
                None => {
                    rows.push((f.clone(), strict));
                    rows.len() - 1
                }
            }
        };
        let mut choices: Vec<Vec<usize>> = Vec::new();
        let mut accepts: Vec<u128> = Vec::new();
        for tf in forms {
            let mut ch = Vec::new();
            let mut acc = 0u128;
            for f in &tf.dom {
                let id = row_id(f, true, &mut rows);
                if !ch.contains(&id) {
                    ch.push(id);
                }
                acc |= 1u128 << id;
            }
            for f in &tf.bounded {
                let id = row_id(f, false, &mut rows);
                if !ch.contains(&id) {
                    ch.push(id);
                }
                acc |= 1u128 << id;
                if let Some(d) = rows.iter().position(|(g, s)| g == f && *s) {
                    acc |= 1u128 << d;
                }
            }
            choices.push(ch);
            accepts.push(acc);
        }
        if rows.len() > 128 {
            return Err(ConeError::Inconclusive(format!(
                "too many distinct witness rows ({})",
                rows.len()
            )));
        }
        let mut phi = LinearForm::new(vec![0; cone.rank()]);
        for c in cone.constraints.iter() {
            match c.rel {
                Rel::Ge => phi = phi.add(&c.form),
                Rel::Le => phi = phi.add(&c.form.neg()),
                Rel::Eq => {}
            }
        }
        let gens = cone_generators(cone).filter(|g| g.len() <= 3);
        let row_vals = match &gens {
            Some(gs) => rows
                .iter()
                .map(|(f, _)| gs.iter().map(|g| f.dot(g)).collect())
                .collect(),
            None => Vec::new(),
        };
        Ok(Stage1 {
            cone: cone.clone(),
            hom0: recession(cone),
            phi,
            rows,
            choices,
            accepts,
            gens,
            row_vals,
            ray_ok: std::collections::HashMap::new(),
            strict_ok: std::collections::HashMap::new(),
        })
    }

    /// Halfspace (w, rhs) of row `id` on the generator simplex: with k free
    /// generators and barycentric coordinates c (last one implicit), the
    /// direction constraint f ≤ 0 becomes Σ (a_j − a_last)c_j ≤ −a_last.
    fn row_halfspace(&self, id: usize) -> (Vec<Rat>, Rat) {
        let a = &self.row_vals[id];
        let last = a[a.len() - 1];
        let w: Vec<Rat> = a[..a.len() - 1]
            .iter()
            .map(|&x| crate::ring::rat_int(x - last))
            .collect();
        (w, crate::ring::rat_int(-last))
    }

    /// An integer ray from a vertex of the clipped direction region.
    fn ray_from(&self, verts: &[Vec<Rat>]) -> Point {
        let gens = self.gens.as_ref().expect("fast path only");
        let v = &verts[0];
        let mut c: Vec<Rat> = v.clone();
        let mut rest = crate::ring::rat_int(1);
        for x in v {
            rest -= x;
        }
        c.push(rest);
        let lcm = c
            .iter()
            .fold(num::BigInt::from(1), |l, x| num::integer::lcm(l, x.denom().clone()));
        let scaled: Vec<num::BigInt> = c.iter().map(|x| (x * &lcm).to_integer()).collect();
        let rank = self.cone.rank();
        let mut r = vec![num::BigInt::from(0); rank];
        for (cj, g) in scaled.iter().zip(gens) {
            for (ri, &gi) in r.iter_mut().zip(g) {
                *ri += cj * num::BigInt::from(gi);
            }
        }
        let g = r
            .iter()
            .fold(num::BigInt::from(0), |a, b| num::integer::gcd(a, b.clone()));
        if num::Zero::is_zero(&g) {
            panic!("zero ray from nonempty direction region");
        }
        r.iter()
            .map(|x| i64::try_from(x / &g).expect("ray overflow"))
            .collect()
    }

    /// Polygon-clipping search: forward-checks every uncovered triple against
    /// the current direction region, propagates forced choices, and branches
    /// on the most constrained triple.
    fn dfs_clip(
        &mut self,
        active: &[bool],
        mut mask: u128,
        mut verts: Vec<Vec<Rat>>,
        visited: &mut std::collections::HashSet<u128>,
    ) -> Result<Option<Point>, ConeError> {
        loop {
            if verts.is_empty() {
                return Ok(None);
            }
            if !visited.insert(mask) {
                return Ok(None);
            }
            let smask = self.strict_mask(mask);
            if !self.strict_feasible(smask) {
                return Ok(None);
            }
            let uncovered: Vec<usize> = (0..self.choices.len())
                .filter(|&t| active[t] && self.accepts[t] & mask == 0)
                .collect();
            if uncovered.is_empty() {
                if integer_feasible(&self.strict(smask))?.is_none() {
                    return Ok(None);
                }
                return Ok(Some(self.ray_from(&verts)));
            }
            // Feasible options per uncovered triple under the current region.
            let mut best: Option<(Vec<(usize, Vec<Vec<Rat>>)>, usize)> = None;
            let mut forced: Option<(usize, Vec<Vec<Rat>>)> = None;
            for &t in &uncovered {
                let mut feas = Vec::new();
                for &id in &self.choices[t] {
                    let (w, rhs) = self.row_halfspace(id);
                    let cv = dir_clip(&verts, &w, &rhs);
                    if !cv.is_empty() {
                        feas.push((id, cv));
                    }
                }
                // Dominance: a bounded-row option whose halfspace contains
                // another option's clipped region imposes strictly weaker
                // conditions (no base-point constraint, larger direction
                // set), so the dominated option need not be explored.
                let hs: Vec<(Vec<Rat>, Rat)> =
                    feas.iter().map(|(id, _)| self.row_halfspace(*id)).collect();
                let inside = |b: usize, a: usize, feas: &[(usize, Vec<Vec<Rat>>)]| {
                    let (w, rhs) = &hs[b];
                    feas[a].1.iter().all(|v| {
                        let mut s = -rhs.clone();
                        for (wi, vi) in w.iter().zip(v) {
                            s += wi * vi;
                        }
                        s <= crate::ring::rat_int(0)
                    })
                };
                let mut keep = vec![true; feas.len()];
                for b in 0..feas.len() {
                    if self.rows[feas[b].0].1 || !keep[b] {
                        continue;
                    }
                    for a in 0..feas.len() {
                        if a == b || !keep[a] || !inside(b, a, &feas) {
                            continue;
                        }
                        // Mutual bounded containment: the earlier one wins.
                        if !self.rows[feas[a].0].1 && a < b && inside(a, b, &feas) {
                            continue;
                        }
                        keep[a] = false;
                    }
                }
                let mut ki = keep.iter();
                feas.retain(|_| *ki.next().unwrap());
                // Weaker (bounded) options first when branching.
                feas.sort_by_key(|(id, _)| self.rows[*id].1);
                match feas.len() {
                    0 => return Ok(None),
                    1 => {
                        forced = Some(feas.pop().unwrap());
                        break;
                    }
                    n => {
                        if best.as_ref().map_or(true, |(b, _)| n < b.len()) {
                            best = Some((feas, t));
                        }
                    }
                }
            }
            if let Some((id, cv)) = forced {
                mask |= 1u128 << id;
                verts = cv;
                continue;
            }
            let (options, _) = best.expect("uncovered implies options");
            for (id, cv) in options {
                if let Some(r) = self.dfs_clip(active, mask | 1u128 << id, cv, visited)? {
                    return Ok(Some(r));
                }
            }
            return Ok(None);
        }
    }

    /// The homogenized system of a row set, with the nonzero-ray functional.
    fn hom(&self, mask: u128) -> ConstraintSet {
        let mut cons: Vec<Constraint> = (0..self.rows.len())
            .filter(|&i| mask >> i & 1 == 1)
            .map(|i| Constraint::le(self.rows[i].0.clone(), 0))
            .collect();
        cons.push(Constraint::ge(self.phi.clone(), 1));
        self.hom0.and(&cons)
    }

    fn strict(&self, smask: u128) -> ConstraintSet {
        let cons: Vec<Constraint> = (0..self.rows.len())
            .filter(|&i| smask >> i & 1 == 1)
            .map(|i| Constraint::le(self.rows[i].0.clone(), -1))
            .collect();
        self.cone.and(&cons)
    }

    fn strict_mask(&self, mask: u128) -> u128 {
        (0..self.rows.len())
            .filter(|&i| self.rows[i].1)
            .fold(0u128, |m, i| m | 1u128 << i)
            & mask
    }

    fn ray_feasible(&mut self, mask: u128) -> bool {
        match self.ray_ok.get(&mask) {
            Some(&b) => b,
            None => {
                let b = rationally_feasible(&self.hom(mask));
                self.ray_ok.insert(mask, b);
                b
            }
        }
    }

    fn strict_feasible(&mut self, smask: u128) -> bool {
        match self.strict_ok.get(&smask) {
            Some(&b) => b,
            None => {
                let b = rationally_feasible(&self.strict(smask));
                self.strict_ok.insert(smask, b);
                b
            }
        }
    }

    fn dfs(
        &mut self,
        order: &[usize],
        depth: usize,
        mask: u128,
        visited: &mut std::collections::HashSet<(usize, u128)>,
    ) -> Result<Option<Point>, ConeError> {
        if !visited.insert((depth, mask)) {
            return Ok(None);
        }
        if !self.ray_feasible(mask) {
            return Ok(None);
        }
        let smask = self.strict_mask(mask);
        if !self.strict_feasible(smask) {
            return Ok(None);
        }
        let Some(&t) = order.get(depth) else {
            if integer_feasible(&self.strict(smask))?.is_none() {
                return Ok(None);
            }
            return integer_feasible(&self.hom(mask));
        };
        if self.accepts[t] & mask != 0 {
            return self.dfs(order, depth + 1, mask, visited);
        }
        for k in 0..self.choices[t].len() {
            let id = self.choices[t][k];
            if let Some(r) = self.dfs(order, depth + 1, mask | 1u128 << id, visited)? {
                return Ok(Some(r));
            }
        }
        Ok(None)
    }

    /// Search over the active triples; `Some(ray)` witnesses an infinite
    /// region, `None` proves finiteness for every bound M.
    fn decide(&mut self, active: &[bool]) -> Result<Option<Point>, ConeError> {
        let mut order: Vec<usize> = (0..self.choices.len())
            .filter(|&i| active[i])
            .collect();
        // A triple with no witnesses at all empties the region outright.
        if order.iter().any(|&i| self.choices[i].is_empty()) {
            return Ok(None);
        }
        if let Some(gens) = &self.gens {
            let ri = |x: i64| crate::ring::rat_int(x);
            let verts: Vec<Vec<Rat>> = match gens.len() {
                // No free directions: the cone is finite.
                0 => return Ok(None),
                1 => vec![vec![]],
                2 => vec![vec![ri(0)], vec![ri(1)]],
                _ => vec![vec![ri(1), ri(0)], vec![ri(0), ri(1)], vec![ri(0), ri(0)]],
            };
            let mut visited = std::collections::HashSet::new();
            return self.dfs_clip(active, 0, verts, &mut visited);
        }
        order.sort_by_key(|&i| self.choices[i].len());
        let mut visited = std::collections::HashSet::new();
        self.dfs(&order, 0, 0, &mut visited)
    }
}

enum F2Outcome {
    Finite,
    Infinite(Point),
}

/// Box enumerations of the ambient cone, shared across deletions.
struct EnumCache {
    per_b: Vec<(i64, Vec<Point>)>,
}

impl EnumCache {
    fn new(cone: &ConstraintSet, b_list: &[i64]) -> Self {
        EnumCache {
            per_b: b_list
                .iter()
                .map(|&b| (b, enumerate_box(cone, b)))
                .collect(),
        }
    }
}

fn f2_decide(
    st: &mut Stage1,
    active: &[bool],
    forms: &[TripleForms],
    m_list: &[i64],
    cache: &EnumCache,
) -> Result<F2Outcome, String> {
    let stage1 = st.decide(active).map_err(|e| e.to_string())?;
    let satisfies = |x: &[i64], m: i64| {
        forms
            .iter()
            .zip(active)
            .filter(|(_, a)| **a)
            .all(|(tf, _)| {
                tf.dom.iter().any(|f| f.dot(x) <= -1)
                    || tf.bounded.iter().any(|f| f.dot(x) <= m)
            })
    };
    // Stage 2: concrete counts inside growing boxes must agree with stage 1.
    for &m in m_list {
        let counts: Vec<usize> = cache
            .per_b
            .iter()
            .map(|(_, pts)| pts.iter().filter(|p| satisfies(p, m)).count())
            .collect();
        let stable = counts.windows(2).all(|w| w[0] == w[1]);
        if stage1.is_none() && !stable {
            return Err(format!(
                "direction analysis says finite but counts grow at M={m}: {counts:?}"
            ));
        }
    }
    match stage1 {
        None => Ok(F2Outcome::Finite),
        Some(ray) => {
            // Infinite claims must be corroborated by growth at some M.
            let grows = m_list.iter().any(|&m| {
                let counts: Vec<usize> = cache
                    .per_b
                    .iter()
                    .map(|(_, pts)| pts.iter().filter(|p| satisfies(p, m)).count())
                    .collect();
                counts.windows(2).any(|w| w[1] > w[0])
            });
            if grows {
                Ok(F2Outcome::Infinite(ray))
            } else {
                Err(format!(
                    "direction analysis found ray {ray:?} but no box growth at any M"
                ))
            }
        }
    }
}

/// The shared per-structure state behind (F2) and minimality.
fn f2_setup(
    pair: &SphericalPair,
    structure: &ReductionStructure,
    b_list: &[i64],
) -> Result<(Vec<TripleForms>, Stage1, EnumCache), ConeError> {
    let cone = std_cone(pair, &structure.cone_id())?;
    let forms: Vec<TripleForms> = structure
        .entries
        .iter()
        .map(|(t, _)| triple_forms(pair, t))
        .collect::<Result<_, _>>()?;
    let st = Stage1::new(&cone, &forms)?;
    let cache = EnumCache::new(&cone, b_list);
    Ok((forms, st, cache))
}

fn f2_verdict(
    st: &mut Stage1,
    forms: &[TripleForms],
    m_list: &[i64],
    cache: &EnumCache,
) -> Verdict {
    let active = vec![true; forms.len()];
    match f2_decide(st, &active, forms, m_list, cache) {
        Ok(F2Outcome::Finite) => Verdict::Pass,
        Ok(F2Outcome::Infinite(ray)) => Verdict::FailFinite(ray),
        Err(reason) => Verdict::Inconclusive(reason),
    }
}

fn minimality_verdict(
    st: &mut Stage1,
    forms: &[TripleForms],
    m_list: &[i64],
    cache: &EnumCache,
) -> Verdict {
    if forms.is_empty() {
        return Verdict::Pass;
    }
    for skip in 0..forms.len() {
        let active: Vec<bool> = (0..forms.len()).map(|i| i != skip).collect();
        match f2_decide(st, &active, forms, m_list, cache) {
            Ok(F2Outcome::Infinite(_)) => {}
            Ok(F2Outcome::Finite) => return Verdict::FailMinimal(skip),
            Err(reason) => return Verdict::Inconclusive(reason),
        }
    }
    Verdict::Pass
}

pub fn check_f2(
    pair: &SphericalPair,
    structure: &ReductionStructure,
    m_list: &[i64],
    b_list: &[i64],
) -> Verdict {
    match f2_setup(pair, structure, b_list) {
        Ok((forms, mut st, cache)) => f2_verdict(&mut st, &forms, m_list, &cache),
        Err(e) => Verdict::Inconclusive(e.to_string()),
    }
}

/// Minimality: deleting any single triple must leave an infinite region.
/// Single deletions suffice because the region is antitone in the triple
/// set; tests additionally spot-check a two-triple deletion.
pub fn check_minimality(
    pair: &SphericalPair,
    structure: &ReductionStructure,
    m_list: &[i64],
    b_list: &[i64],
) -> Verdict {
    match f2_setup(pair, structure, b_list) {
        Ok((forms, mut st, cache)) => minimality_verdict(&mut st, &forms, m_list, &cache),
        Err(e) => Verdict::Inconclusive(e.to_string()),
    }
}

/// Run all checks on one structure and aggregate the verdicts.
pub fn verify(
    pair: &SphericalPair,
    key: &str,
    structure: &ReductionStructure,
    opts: &VerifyOptions,
) -> Report {
    let start = std::time::Instant::now();
    let membership: Vec<Verdict> = structure
        .entries
        .iter()
        .map(|(t, _)| check_triple_membership(pair, &structure.theta_h, structure.sector, t))
        .collect();
    let f1 = check_f1(pair, structure, opts.n_max);
    // (F2) and minimality share the deduplicated-row state and caches.
    let (mut f2, minimality) = match f2_setup(pair, structure, &opts.b_list) {
        Ok((forms, mut st, cache)) => (
            f2_verdict(&mut st, &forms, &opts.m_list, &cache),
            minimality_verdict(&mut st, &forms, &opts.m_list, &cache),
        ),
        Err(e) => (
            Verdict::Inconclusive(e.to_string()),
            Verdict::Inconclusive(e.to_string()),
        ),
    };
    // Empty structures are legal only over finite cones.
    if structure.entries.is_empty() {
        if let Ok(cone) = std_cone(pair, &structure.cone_id()) {
            if !is_finite(&cone) {
                f2 = Verdict::FailFinite(vec![0; pair.h_rank()]);
            }
        }
    }
    Report {
        key: key.to_string(),
        membership,
        f1,
        f2,
        minimality,
        elapsed_ms: start.elapsed().as_millis(),
    }
}

// ---------------------------------------------------------------------------
// Catalog.

#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub key: String,
    pub pair: SphericalPair,
    pub structure: ReductionStructure,
}

fn theta_by_names(pair: &SphericalPair, names: &[&str]) -> BTreeSet<usize> {
    names
        .iter()
        .map(|n| {
            pair.delta_h_index(n)
                .unwrap_or_else(|| panic!("unknown Δ_H root `{n}`"))
        })
        .collect()
}

pub fn theta_label(pair: &SphericalPair, theta_h: &BTreeSet<usize>) -> String {
    if theta_h.is_empty() {
        "empty".into()
    } else if theta_h.len() == pair.delta_h.len() {
        "full".into()
    } else {
        theta_h
            .iter()
            .map(|&i| pair.delta_h[i].0.clone())
            .collect::<Vec<_>>()
            .join("")
    }
}

/// Triple from the roots deleted from Δ_G (the catalog tables all present
/// Θ as Δ_G minus a short list).
fn triple_minus(pair: &SphericalPair, minus: &[&str], w: &str, s: Point) -> Triple {
    let removed: BTreeSet<usize> = minus
        .iter()
        .map(|n| {
            pair.delta_g_index(n)
                .unwrap_or_else(|| panic!("unknown Δ_G root `{n}`"))
        })
        .collect();
    Triple {
        theta: (0..pair.delta_g.len()).filter(|i| !removed.contains(i)).collect(),
        w: w.to_string(),
        s,
    }
}

fn catalog_entry(
    prefix: &str,
    pair: &SphericalPair,
    theta_names: &[&str],
    sector: Sector,
    triples: Vec<Triple>,
) -> CatalogEntry {
    let theta_h = theta_by_names(pair, theta_names);
    let ctx = StdConeId::new(theta_h.clone(), sector);
    let entries = triples
        .into_iter()
        .map(|t| {
            let tpl = derive_template(pair, &ctx, &t.s).unwrap_or_else(|e| {
                panic!("template derivation failed for {prefix} triple {t:?}: {e}")
            });
            (t, tpl)
        })
        .collect();
    let sector_seg = match sector {
        Sector::None => String::new(),
        s => format!("{}/", s.label()),
    };
    CatalogEntry {
        key: format!("{prefix}/{sector_seg}{}", theta_label(pair, &theta_h)),
        pair: pair.clone(),
        structure: ReductionStructure {
            theta_h,
            sector,
            entries,
        },
    }
}

/// First i coordinates 1, rest 0 (the shift T(i, ϖ) of the gl/so cases).
fn t_of(i: usize, rank: usize) -> Point {
    (0..rank).map(|k| i64::from(k < i)).collect()
}

/// T(i, ϖ) scaled down by ϖ on every coordinate: first i zeros, rest −1.
fn t_inv_of(i: usize, rank: usize) -> Point {
    (0..rank).map(|k| if k < i { 0 } else { -1 }).collect()
}

fn gl_structures(out: &mut Vec<CatalogEntry>, n: usize) {
    let pair = build_catalog_pair("gl", Some(n as u32)).expect("gl pair");
    let prefix = format!("gl/n{n}");
    let h_roots: Vec<String> = (1..n).map(|i| format!("a{i}")).collect();
    // All Θ_H ⊆ {a_1..a_{n−1}}.
    for mask in 0..(1usize << (n - 1)) {
        let theta_names: Vec<&str> = (0..n - 1)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| h_roots[i].as_str())
            .collect();
        let in_theta = |i: usize| mask & (1 << (i - 1)) != 0; // i is 1-based
        let free: Vec<usize> = (1..n).filter(|&i| !in_theta(i)).collect();

        let zero: Vec<Triple> = free
            .iter()
            .map(|&i| {
                triple_minus(
                    &pair,
                    &[&format!("b{i}"), &format!("a{i}")],
                    "e",
                    t_of(i, n),
                )
            })
            .collect();
        let mut plus = zero.clone();
        plus.push(triple_minus(&pair, &[&format!("b{n}")], "e", t_of(n, n)));

        let mut minus: Vec<Triple> = Vec::new();
        for j in 2..=n {
            if in_theta(j - 1) {
                continue;
            }
            for &i in &free {
                if i + 1 <= j {
                    minus.push(triple_minus(
                        &pair,
                        &[&format!("b{i}"), &format!("a{i}")],
                        &format!("w{j}"),
                        t_of(i, n),
                    ));
                }
                if j <= i + 1 {
                    minus.push(triple_minus(
                        &pair,
                        &[&format!("b{}", i + 1), &format!("a{i}")],
                        &format!("w{j}"),
                        t_inv_of(i, n),
                    ));
                }
            }
        }
        for &i in &free {
            minus.push(triple_minus(
                &pair,
                &[&format!("b{}", i + 1), &format!("a{i}")],
                "w1",
                t_inv_of(i, n),
            ));
        }
        minus.push(triple_minus(&pair, &["b1"], "w1", t_inv_of(0, n)));

        out.push(catalog_entry(&prefix, &pair, &theta_names, Sector::Zero, zero));
        out.push(catalog_entry(&prefix, &pair, &theta_names, Sector::Plus, plus));
        out.push(catalog_entry(&prefix, &pair, &theta_names, Sector::Minus, minus));
    }
}

fn so_structures(out: &mut Vec<CatalogEntry>) {
    let so3 = build_catalog_pair("so", Some(3)).expect("so3 pair");
    out.push(catalog_entry(
        "so/n3",
        &so3,
        &[],
        Sector::None,
        vec![triple_minus(&so3, &["b1", "b2", "a1"], "e", vec![1])],
    ));
    out.push(catalog_entry("so/n3", &so3, &["a1"], Sector::None, vec![]));

    let so4 = build_catalog_pair("so", Some(4)).expect("so4 pair");
    out.push(catalog_entry(
        "so/n4",
        &so4,
        &[],
        Sector::None,
        vec![
            triple_minus(&so4, &["b1", "a1", "a2"], "e", vec![1, 0]),
            triple_minus(&so4, &["b1", "a1", "a2"], "w", vec![1, 0]),
            triple_minus(&so4, &["b2", "a2"], "e", vec![1, 1]),
            triple_minus(&so4, &["b2", "a1"], "w", vec![1, -1]),
        ],
    ));
    out.push(catalog_entry(
        "so/n4",
        &so4,
        &["a1"],
        Sector::None,
        vec![triple_minus(&so4, &["b2", "a2"], "e", vec![1, 1])],
    ));
    out.push(catalog_entry(
        "so/n4",
        &so4,
        &["a2"],
        Sector::None,
        vec![triple_minus(&so4, &["b2", "a1"], "w", vec![1, -1])],
    ));
    out.push(catalog_entry("so/n4", &so4, &["a1", "a2"], Sector::None, vec![]));
}

fn gl4gl2_structures(out: &mut Vec<CatalogEntry>) {
    let pair = build_catalog_pair("gl4gl2", None).expect("gl4gl2 pair");
    // s_{ij} = (a_i, a_j) upstairs, in quotient coordinates (t_k − t_4).
    let s = |i: usize, j: usize| -> Point {
        let mut up = vec![0i64; 4];
        for k in 0..i {
            up[k] = 1;
        }
        for k in 0..j {
            up[2 + k] = 1;
        }
        vec![up[0] - up[3], up[1] - up[3], up[2] - up[3]]
    };
    // Table for sectors 0/+ (all with the identity Weyl element w1234).
    let zero_rows: Vec<(&[&str], Vec<Triple>)> = vec![
        (&["a1", "a2"], vec![]),
        (
            &["a1"],
            vec![triple_minus(&pair, &["b3", "a"], "w1234", s(2, 1))],
        ),
        (&["a2"], vec![triple_minus(&pair, &["b1"], "w1234", s(1, 0))]),
        (
            &[],
            vec![
                triple_minus(&pair, &["b1"], "w1234", s(1, 0)),
                triple_minus(&pair, &["b3", "a"], "w1234", s(2, 1)),
            ],
        ),
    ];
    for (theta, triples) in zero_rows {
        let mut plus = vec![triple_minus(&pair, &["b2"], "w1234", s(2, 0))];
        plus.extend(triples.iter().cloned());
        out.push(catalog_entry("table1", &pair, theta, Sector::Zero, triples));
        out.push(catalog_entry("table1", &pair, theta, Sector::Plus, plus));
    }
    // Sector −.
    out.push(catalog_entry(
        "table2",
        &pair,
        &["a1", "a2"],
        Sector::Minus,
        vec![triple_minus(&pair, &["b2"], "w3412", s(0, 2))],
    ));
    out.push(catalog_entry(
        "table2",
        &pair,
        &["a1"],
        Sector::Minus,
        vec![
            triple_minus(&pair, &["b1", "a"], "w3124", s(0, 1)),
            triple_minus(&pair, &["b3", "a"], "w3124", s(2, 1)),
            triple_minus(&pair, &["b1", "a"], "w3412", s(0, 1)),
            triple_minus(&pair, &["b2"], "w3412", s(0, 2)),
        ],
    ));
    out.push(catalog_entry(
        "table2",
        &pair,
        &["a2"],
        Sector::Minus,
        vec![
            triple_minus(&pair, &["b1"], "w1342", s(1, 0)),
            triple_minus(&pair, &["b3"], "w1342", s(1, 2)),
            triple_minus(&pair, &["b3"], "w3412", s(1, 2)),
            triple_minus(&pair, &["b2"], "w3412", s(0, 2)),
        ],
    ));
    out.push(catalog_entry(
        "table2",
        &pair,
        &[],
        Sector::Minus,
        vec![
            triple_minus(&pair, &["b1"], "w1324", s(1, 0)),
            triple_minus(&pair, &["b2", "a"], "w1324", s(1, 1)),
            triple_minus(&pair, &["b3", "a"], "w1324", s(2, 1)),
            triple_minus(&pair, &["b1"], "w1342", s(1, 0)),
            triple_minus(&pair, &["b3"], "w1342", s(1, 2)),
            triple_minus(&pair, &["b2", "a"], "w1342", s(1, 1)),
            triple_minus(&pair, &["b1", "a"], "w3124", s(0, 1)),
            triple_minus(&pair, &["b2", "a"], "w3124", s(1, 1)),
            triple_minus(&pair, &["b3", "a"], "w3124", s(2, 1)),
            triple_minus(&pair, &["b1", "a"], "w3142", s(0, 1)),
            triple_minus(&pair, &["b2", "a"], "w3142", s(1, 1)),
            triple_minus(&pair, &["b3"], "w3142", s(1, 2)),
            triple_minus(&pair, &["b1", "a"], "w3412", s(0, 1)),
            triple_minus(&pair, &["b3"], "w3412", s(1, 2)),
            triple_minus(&pair, &["b2"], "w3412", s(0, 2)),
        ],
    ));
}

fn sp6sp4_structures(out: &mut Vec<CatalogEntry>) {
    let pair = build_catalog_pair("sp6sp4", None).expect("sp6sp4 pair");
    // s_{ij} = (a_i, ϖ^j) with a_0=(1,1), a_1=(ϖ,1), a_2=(ϖ,ϖ);
    // H-coordinates are (a_1, a_2, b).
    let s = |i: usize, j: i64| -> Point {
        vec![i64::from(i >= 1), i64::from(i >= 2), j]
    };
    // Rows with α₁ ∈ Θ_H: (Δ_G−{γ_i,β_i}, w₃, s_{i0}) for β_i ∉ Θ_H.
    for extra in [vec![], vec!["b1"], vec!["b2"], vec!["b1", "b2"]] {
        let mut theta: Vec<&str> = vec!["a1"];
        theta.extend(extra.iter());
        let triples: Vec<Triple> = [1usize, 2]
            .iter()
            .filter(|i| !extra.contains(&format!("b{i}").as_str()))
            .map(|&i| {
                triple_minus(
                    &pair,
                    &[&format!("g{i}"), &format!("b{i}")],
                    "w3",
                    s(i, 0),
                )
            })
            .collect();
        out.push(catalog_entry("table3", &pair, &theta, Sector::None, triples));
    }
    out.push(catalog_entry(
        "table3",
        &pair,
        &["b1", "b2"],
        Sector::None,
        vec![triple_minus(&pair, &["g1"], "e", s(0, 1))],
    ));
    out.push(catalog_entry(
        "table3",
        &pair,
        &["b1"],
        Sector::None,
        vec![
            triple_minus(&pair, &["g1"], "e", s(0, 1)),
            triple_minus(&pair, &["g3", "b2"], "e", s(2, 1)),
            triple_minus(&pair, &["g2", "b2"], "w3", s(2, 0)),
            triple_minus(&pair, &["g3", "b2"], "w3", s(2, 1)),
        ],
    ));
    out.push(catalog_entry(
        "table3",
        &pair,
        &["b2"],
        Sector::None,
        vec![
            triple_minus(&pair, &["g1"], "e", s(0, 1)),
            triple_minus(&pair, &["g2", "b1"], "e", s(1, 1)),
            triple_minus(&pair, &["g1", "b1"], "w2", s(1, 0)),
            triple_minus(&pair, &["g2", "b1"], "w2", s(1, 1)),
        ],
    ));
    out.push(catalog_entry(
        "table3",
        &pair,
        &[],
        Sector::None,
        vec![
            triple_minus(&pair, &["g1"], "e", s(0, 1)),
            triple_minus(&pair, &["g2", "b1"], "e", s(1, 1)),
            triple_minus(&pair, &["g3", "b2"], "e", s(2, 1)),
            triple_minus(&pair, &["g1", "b1"], "w2", s(1, 0)),
            triple_minus(&pair, &["g2", "b1"], "w2", s(1, 1)),
            triple_minus(&pair, &["g3", "b2"], "w2", s(2, 1)),
            triple_minus(&pair, &["g1", "b1"], "w3", s(1, 0)),
            triple_minus(&pair, &["g2", "b2"], "w3", s(2, 0)),
            triple_minus(&pair, &["g3", "b2"], "w3", s(2, 1)),
        ],
    ));
}

/// Every reduction structure shipped with the toolkit, with reconstructed
/// (F1) templates, addressable by stable keys.
pub fn catalog() -> Vec<CatalogEntry> {
    let mut out = Vec::new();

    let triple = build_catalog_pair("triple", None).expect("triple pair");
    out.push(catalog_entry(
        "triple",
        &triple,
        &[],
        Sector::None,
        vec![triple_minus(&triple, &["b1", "b2", "b3"], "e", vec![1])],
    ));
    out.push(catalog_entry("triple", &triple, &["a1"], Sector::None, vec![]));

    let wal = build_catalog_pair("waldspurger", None).expect("waldspurger pair");
    out.push(catalog_entry(
        "wal",
        &wal,
        &[],
        Sector::Plus,
        vec![triple_minus(&wal, &["a1"], "e", vec![1])],
    ));
    out.push(catalog_entry("wal", &wal, &[], Sector::Zero, vec![]));
    out.push(catalog_entry(
        "wal",
        &wal,
        &[],
        Sector::Minus,
        vec![triple_minus(&wal, &["a1"], "w", vec![-1])],
    ));

    gl_structures(&mut out, 2);
    gl_structures(&mut out, 3);
    so_structures(&mut out);
    gl4gl2_structures(&mut out);
    sp6sp4_structures(&mut out);
    out
}

pub fn catalog_lookup<'a>(entries: &'a [CatalogEntry], key: &str) -> Option<&'a CatalogEntry> {
    entries.iter().find(|e| e.key == key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone_calculus::Sector;

    fn wal() -> SphericalPair {
        build_catalog_pair("waldspurger", None).unwrap()
    }

    #[test]
    fn membership_examples() {
        let t = build_catalog_pair("triple", None).unwrap();
        let tri = triple_minus(&t, &["b1", "b2", "b3"], "e", vec![1]);
        assert_eq!(
            check_triple_membership(&t, &BTreeSet::new(), Sector::None, &tri),
            Verdict::Pass
        );
        let w = wal();
        let ok = triple_minus(&w, &["a1"], "w", vec![-1]);
        assert_eq!(
            check_triple_membership(&w, &BTreeSet::new(), Sector::Minus, &ok),
            Verdict::Pass
        );
        // Without the Weyl twist, s = −1 is not dominant upstairs.
        let bad = triple_minus(&w, &["a1"], "e", vec![-1]);
        assert!(matches!(
            check_triple_membership(&w, &BTreeSet::new(), Sector::Minus, &bad),
            Verdict::FailCover(_)
        ));
        // s = 0 is rejected.
        let zero = triple_minus(&w, &["a1"], "e", vec![0]);
        assert!(matches!(
            check_triple_membership(&w, &BTreeSet::new(), Sector::Plus, &zero),
            Verdict::FailCover(_)
        ));
    }

    #[test]
    fn f1_triple_example() {
        let t = build_catalog_pair("triple", None).unwrap();
        let ctx = StdConeId::new(BTreeSet::new(), Sector::None);
        let tpl = derive_template(&t, &ctx, &vec![1]).unwrap();
        // One family of point-translates along s.
        assert_eq!(tpl.entries.len(), 1);
        let tri = triple_minus(&t, &["b1", "b2", "b3"], "e", vec![1]);
        assert_eq!(check_f1_triple(&t, &ctx, &tri, &tpl, 3), Verdict::Pass);
    }

    #[test]
    fn f1_wal_minus_example() {
        let w = wal();
        let ctx = StdConeId::new(BTreeSet::new(), Sector::Minus);
        let tpl = derive_template(&w, &ctx, &vec![-1]).unwrap();
        let tri = triple_minus(&w, &["a1"], "w", vec![-1]);
        assert_eq!(check_f1_triple(&w, &ctx, &tri, &tpl, 2), Verdict::Pass);
        for e in &tpl.entries {
            let (TemplateEntry::Family { body, .. } | TemplateEntry::Fixed { body, .. }) = e;
            assert_eq!(body.sector, Sector::Zero);
        }
    }

    #[test]
    fn f1_corrupted_template_fails() {
        let t = build_catalog_pair("triple", None).unwrap();
        let ctx = StdConeId::new(BTreeSet::new(), Sector::None);
        let mut tpl = derive_template(&t, &ctx, &vec![1]).unwrap();
        for e in &mut tpl.entries {
            if let TemplateEntry::Family { step, .. } = e {
                step[0] *= 2;
            }
        }
        let tri = triple_minus(&t, &["b1", "b2", "b3"], "e", vec![1]);
        assert!(matches!(
            check_f1_triple(&t, &ctx, &tri, &tpl, 2),
            Verdict::FailCover(_)
        ));
    }

    #[test]
    fn f2_examples() {
        let opts = VerifyOptions::default();
        let t = build_catalog_pair("triple", None).unwrap();
        let s = ReductionStructure {
            theta_h: BTreeSet::new(),
            sector: Sector::None,
            entries: vec![(
                triple_minus(&t, &["b1", "b2", "b3"], "e", vec![1]),
                F1Template { entries: vec![] },
            )],
        };
        assert_eq!(check_f2(&t, &s, &opts.m_list, &opts.b_list), Verdict::Pass);

        // Wal plus with S = ∅: the cone {x ≥ 1} is infinite.
        let w = wal();
        let empty = ReductionStructure {
            theta_h: BTreeSet::new(),
            sector: Sector::Plus,
            entries: vec![],
        };
        assert!(matches!(
            check_f2(&w, &empty, &opts.m_list, &opts.b_list),
            Verdict::FailFinite(_)
        ));
    }

    #[test]
    fn minimality_examples() {
        let opts = VerifyOptions::default();
        let w = wal();
        let s = ReductionStructure {
            theta_h: BTreeSet::new(),
            sector: Sector::Plus,
            entries: vec![(
                triple_minus(&w, &["a1"], "e", vec![1]),
                F1Template { entries: vec![] },
            )],
        };
        assert_eq!(
            check_minimality(&w, &s, &opts.m_list, &opts.b_list),
            Verdict::Pass
        );
        // Pad with a redundant copy: deleting one leaves the set finite.
        let mut padded = s.clone();
        padded.entries.push(padded.entries[0].clone());
        assert!(matches!(
            check_minimality(&w, &padded, &opts.m_list, &opts.b_list),
            Verdict::FailMinimal(_)
        ));
    }

    #[test]
    fn catalog_lookup_examples() {
        let cat = catalog();
        assert_eq!(cat.len(), 49);
        let e = catalog_lookup(&cat, "table1/plus/a1").unwrap();
        assert_eq!(e.structure.entries.len(), 2);
        let b2 = e.pair.delta_g_index("b2").unwrap();
        assert!(e
            .structure
            .entries
            .iter()
            .any(|(t, _)| t.w == "w1234" && !t.theta.contains(&b2) && t.s == vec![1, 1, 0]));
        let e = catalog_lookup(&cat, "table3/b1b2").unwrap();
        assert_eq!(e.structure.entries.len(), 1);
        assert_eq!(e.structure.entries[0].0.s, vec![0, 0, 1]);
        let e = catalog_lookup(&cat, "gl/n2/minus/empty").unwrap();
        let b1 = e.pair.delta_g_index("b1").unwrap();
        assert!(e
            .structure
            .entries
            .iter()
            .any(|(t, _)| t.w == "w1" && !t.theta.contains(&b1) && t.s == vec![-1, -1]));
    }

    #[test]
    #[ignore = "several minutes; the acceptance suite runs the full catalog"]
    fn verify_entire_catalog() {
        let opts = VerifyOptions::default();
        for e in catalog() {
            let start = std::time::Instant::now();
            let r = verify(&e.pair, &e.key, &e.structure, &opts);
            println!(
                "{}: {} ({} ms)",
                e.key,
                r.status(),
                start.elapsed().as_millis()
            );
            assert!(r.passed(), "{}: {:?}", e.key, r);
        }
    }

    #[test]
    fn verify_small_structures() {
        let opts = VerifyOptions {
            n_max: 2,
            ..VerifyOptions::default()
        };
        let cat = catalog();
        for key in ["triple/empty", "triple/full", "wal/plus/empty", "wal/minus/empty"] {
            let e = catalog_lookup(&cat, key).unwrap();
            let r = verify(&e.pair, &e.key, &e.structure, &opts);
            assert!(r.passed(), "{key}: {:?}", r);
        }
    }
}
