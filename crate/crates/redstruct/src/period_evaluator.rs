//! Evaluation of the assembled series at S = 1: Cartan-cell volumes,
//! temperedness margins, order comparison at S = 1, and the toy local
//! period as a finite sum of closed forms, with a brute-force partial-sum
//! oracle for convergence checks.

use crate::cone_calculus::{Sector, StdConeId};
use crate::reduction_verifier::CatalogEntry;
use crate::ring::{rat_int, Coeff, Rat, RatFn};
use crate::series_engine::{
    cone_points_up_to, coeff_eval, reduce, specialize, ExponentMap, SeriesError, ToyModule,
};
use crate::root_datum::SphericalPair;
use num::{One, Signed};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum PeriodError {
    ZeroDenominator,
    Series(String),
    NotInCone,
    MissingEvalPoint,
    DegenerateAtPoint,
}

impl fmt::Display for PeriodError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PeriodError::ZeroDenominator => write!(f, "denominator vanishes identically"),
            PeriodError::Series(m) => write!(f, "series reduction failed: {m}"),
            PeriodError::NotInCone => write!(f, "point is not interior to the cell"),
            PeriodError::MissingEvalPoint => write!(f, "family ring needs an evaluation point"),
            PeriodError::DegenerateAtPoint => {
                write!(f, "a coefficient denominator vanishes at the evaluation point")
            }
        }
    }
}

impl std::error::Error for PeriodError {}

impl From<SeriesError> for PeriodError {
    fn from(e: SeriesError) -> Self {
        PeriodError::Series(e.to_string())
    }
}

/// A ring morphism to exact rationals: identity on ℚ, u ↦ u₀ on the family
/// ring.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalPoint {
    pub u0: Option<Rat>,
}

impl EvalPoint {
    pub fn identity() -> Self {
        EvalPoint { u0: None }
    }

    pub fn at(u0: Rat) -> Self {
        EvalPoint { u0: Some(u0) }
    }
}

/// Ring elements that can be pushed to ℚ along an EvalPoint.
pub trait Evaluable: Coeff {
    fn eval_at(&self, x: &EvalPoint) -> Result<Rat, PeriodError>;
}

impl Evaluable for Rat {
    fn eval_at(&self, _x: &EvalPoint) -> Result<Rat, PeriodError> {
        Ok(self.clone())
    }
}

impl Evaluable for RatFn {
    fn eval_at(&self, x: &EvalPoint) -> Result<Rat, PeriodError> {
        let u0 = x.u0.as_ref().ok_or(PeriodError::MissingEvalPoint)?;
        self.eval(u0).ok_or(PeriodError::DegenerateAtPoint)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PeriodResult {
    Value(Rat),
    /// Orders of the denominator and numerator at S = 1, with ord_P > ord_Q.
    Pole {
        ord_p: usize,
        ord_q: usize,
    },
}

impl PeriodResult {
    pub fn value(&self) -> Option<&Rat> {
        match self {
            PeriodResult::Value(v) => Some(v),
            PeriodResult::Pole { .. } => None,
        }
    }
}

impl fmt::Display for PeriodResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PeriodResult::Value(v) => write!(f, "{v}"),
            PeriodResult::Pole { ord_p, ord_q } => {
                write!(f, "pole at S=1 (denominator order {ord_p}, numerator order {ord_q})")
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct VolumeConfig {
    pub q: Rat,
    /// Θ_H (as a sorted index list) → C_{Θ_H}; unlisted subsets default to 1.
    pub constants: BTreeMap<Vec<usize>, Rat>,
}

impl VolumeConfig {
    /// All constants 1.
    pub fn trivial(q: Rat) -> Self {
        assert!(q > rat_int(1), "q must exceed 1");
        VolumeConfig {
            q,
            constants: BTreeMap::new(),
        }
    }

    /// Defaults for a catalog pair: C_∅ = 1 + q⁻¹ on the GL₂-type cells of
    /// the gl and triple pairs, everything else 1.
    pub fn for_pair(pair: &SphericalPair, q: Rat) -> Self {
        let mut cfg = Self::trivial(q.clone());
        if matches!(pair.name.as_str(), "triple" | "gl2" | "gl3") {
            cfg.constants
                .insert(Vec::new(), rat_int(1) + q.recip());
        }
        cfg
    }

    pub fn constant(&self, theta: &BTreeSet<usize>) -> Rat {
        let key: Vec<usize> = theta.iter().copied().collect();
        self.constants.get(&key).cloned().unwrap_or_else(|| rat_int(1))
    }
}

// ---------------------------------------------------------------------------
// Order comparison at S = 1.

/// Taylor coefficient of ε^r in p(1 + ε), for a dense S-polynomial.
fn shifted_coeff<R: Coeff>(p: &[R], r: usize) -> R {
    let mut acc = R::zero();
    for (k, c) in p.iter().enumerate() {
        if k < r {
            continue;
        }
        // C(k, r)
        let mut b = 1i64;
        for i in 0..r {
            b = b * (k - i) as i64 / (i as i64 + 1);
        }
        acc = acc.add(&c.mul(&R::from_rat(&Rat::from(num::BigInt::from(b)))));
    }
    acc
}

fn order_at_one<R: Coeff>(p: &[R]) -> Option<usize> {
    (0..p.len()).find(|&r| !shifted_coeff(p, r).is_zero())
}

/// Compare orders of Q and P at S = 1 and return the finite part or the
/// pole data. Exact: substitutes S = 1 + ε and extracts coefficients.
pub fn eval_at_one<R: Evaluable>(
    q_poly: &[R],
    p_poly: &[R],
    x: &EvalPoint,
) -> Result<PeriodResult, PeriodError> {
    let qx: Result<Vec<Rat>, _> = q_poly.iter().map(|c| c.eval_at(x)).collect();
    let px: Result<Vec<Rat>, _> = p_poly.iter().map(|c| c.eval_at(x)).collect();
    let (qx, px) = (qx?, px?);
    let r = order_at_one(&px).ok_or(PeriodError::ZeroDenominator)?;
    match order_at_one(&qx) {
        None => Ok(PeriodResult::Value(rat_int(0))),
        Some(oq) if oq >= r => {
            let b = shifted_coeff(&qx, r);
            let a = shifted_coeff(&px, r);
            Ok(PeriodResult::Value(b / a))
        }
        Some(oq) => Ok(PeriodResult::Pole { ord_p: r, ord_q: oq }),
    }
}

/// Family evaluation: detects when the denominator order at S = 1 at the
/// sample point differs from the generic order over the family ring.
#[derive(Clone, Debug, PartialEq)]
pub enum FamilyOutcome {
    Result(PeriodResult),
    OrderJump {
        generic_order: usize,
        special_order: usize,
    },
}

pub fn eval_family_at_one(
    q_poly: &[RatFn],
    p_poly: &[RatFn],
    u0: &Rat,
) -> Result<FamilyOutcome, PeriodError> {
    let generic = order_at_one(p_poly).ok_or(PeriodError::ZeroDenominator)?;
    let x = EvalPoint::at(u0.clone());
    let px: Result<Vec<Rat>, _> = p_poly.iter().map(|c| c.eval_at(&x)).collect();
    let special = order_at_one(&px?).ok_or(PeriodError::ZeroDenominator)?;
    if special != generic {
        return Ok(FamilyOutcome::OrderJump {
            generic_order: generic,
            special_order: special,
        });
    }
    Ok(FamilyOutcome::Result(eval_at_one(q_poly, p_poly, &x)?))
}

// ---------------------------------------------------------------------------
// Temperedness margin.

fn rat_abs_pow(base: &Rat, e: i64) -> Rat {
    let b = base.abs();
    if e >= 0 {
        num::pow::pow(b, e as usize)
    } else {
        num::pow::pow(b.recip(), (-e) as usize)
    }
}

/// Integer generators of the simplicial sector cones: the scaled dual basis
/// of Δ_H ∪ C_H, with the C_H dual taken with both signs or dropped per
/// sector.
fn sector_generators(pair: &SphericalPair) -> Vec<Vec<i64>> {
    let rank = pair.h_rank();
    let forms = pair.basis_forms();
    let m: Vec<Vec<Rat>> = forms
        .iter()
        .map(|f| f.coeffs.iter().map(|&c| Rat::from(num::BigInt::from(c))).collect())
        .collect();
    let inv = crate::linalg::inverse(&m).expect("basis forms invertible");
    let mut gens = Vec::new();
    for col in 0..rank {
        // Scale the column to integers.
        let mut denom = num::BigInt::one();
        for row in &inv {
            denom = num::integer::lcm(denom, row[col].denom().clone());
        }
        let g: Vec<i64> = inv
            .iter()
            .map(|row| {
                let v = &row[col] * Rat::from(denom.clone());
                i64::try_from(v.to_integer()).expect("generator overflow")
            })
            .collect();
        let is_ch = col >= pair.delta_h.len();
        if is_ch {
            gens.push(g.iter().map(|&x| -x).collect());
        }
        gens.push(g);
    }
    gens
}

/// Convergence certificate: along every sector-cone generator g, each term's
/// |χ(g)|·q^{Σ N_α⟨α,g⟩} must be < 1; returns the minimal gap 1 − product.
pub fn temperedness_margin(
    module: &ToyModule<Rat>,
    q: &Rat,
) -> Option<Rat> {
    let pair = &module.pair;
    let mut margin: Option<Rat> = None;
    for g in sector_generators(pair) {
        let weight: i64 = pair
            .delta_h
            .iter()
            .zip(&pair.n_exp)
            .map(|((_, f), n)| n * f.dot(&g))
            .sum();
        for term in &module.coefficient.terms {
            let mut prod = rat_abs_pow(q, weight);
            for (c, &gi) in term.chi.iter().zip(&g) {
                prod *= rat_abs_pow(c, gi);
            }
            if prod >= rat_int(1) {
                return None;
            }
            let gap = rat_int(1) - prod;
            margin = Some(match margin {
                None => gap,
                Some(m) => m.min(gap),
            });
        }
    }
    margin
}

// ---------------------------------------------------------------------------
// Volumes and the assembled period.

/// Vol(K_H t K_H) = C_{Θ_H} · ∏_{α ∈ Δ_H − Θ_H} q^{N_α⟨α,t⟩} for t interior
/// to the Θ_H-cell.
pub fn cartan_volume(
    pair: &SphericalPair,
    theta: &BTreeSet<usize>,
    t: &[i64],
    cfg: &VolumeConfig,
) -> Result<Rat, PeriodError> {
    let mut vol = cfg.constant(theta);
    for (i, ((_, f), n)) in pair.delta_h.iter().zip(&pair.n_exp).enumerate() {
        let v = f.dot(t);
        let ok = if theta.contains(&i) { v == 0 } else { v >= 1 };
        if !ok {
            return Err(PeriodError::NotInCone);
        }
        vol *= rat_abs_pow(&cfg.q, n * v);
    }
    Ok(vol)
}

fn sectors_for(pair: &SphericalPair) -> Vec<Sector> {
    if pair.c_h.is_some() {
        vec![Sector::Plus, Sector::Zero, Sector::Minus]
    } else {
        vec![Sector::None]
    }
}

fn all_thetas(pair: &SphericalPair) -> Vec<BTreeSet<usize>> {
    let n = pair.delta_h.len();
    (0..(1usize << n))
        .map(|mask| (0..n).filter(|i| mask & (1 << i) != 0).collect())
        .collect()
}

#[derive(Clone, Debug)]
pub struct PeriodBreakdown {
    /// Per-(Θ_H, sector) volume constant and evaluated summand.
    pub summands: Vec<(Vec<usize>, Sector, Rat, PeriodResult)>,
    pub margin: Option<Rat>,
    pub total: PeriodResult,
}

/// I(v, ṽ) = Σ_{Θ_H, sector} C_{Θ_H} · F_{Θ_H,sector}(S)|_{S=1}, each series
/// evaluated through its rational closed form.
pub fn assemble_period(
    module: &ToyModule<Rat>,
    cfg: &VolumeConfig,
    structures: &[CatalogEntry],
) -> Result<PeriodBreakdown, PeriodError> {
    let pair = &module.pair;
    let x = EvalPoint::identity();
    let mut summands = Vec::new();
    let mut total = rat_int(0);
    let mut pole: Option<PeriodResult> = None;
    for theta in all_thetas(pair) {
        let c = cfg.constant(&theta);
        for sector in sectors_for(pair) {
            let rs = reduce(module, &theta, sector, structures)?;
            let (q_poly, p_poly) = specialize(&rs, &cfg.q, &pair.n_exp);
            let r = eval_at_one(&q_poly, &p_poly, &x)?;
            match &r {
                PeriodResult::Value(v) => total += &c * v,
                PeriodResult::Pole { .. } => {
                    if pole.is_none() {
                        pole = Some(r.clone());
                    }
                }
            }
            summands.push((theta.iter().copied().collect(), sector, c.clone(), r));
        }
    }
    Ok(PeriodBreakdown {
        summands,
        margin: temperedness_margin(module, &cfg.q),
        total: pole.unwrap_or(PeriodResult::Value(total)),
    })
}

/// Partial sums of the defining series: Σ c(t)·C_{Θ_H}·δ⁻¹(t) over all cells
/// up to exponent degree n. The convergence oracle for assemble_period.
pub fn brute_force_period(
    module: &ToyModule<Rat>,
    cfg: &VolumeConfig,
    n: i64,
) -> Result<Rat, PeriodError> {
    let pair = &module.pair;
    let mut total = rat_int(0);
    for theta in all_thetas(pair) {
        let c = cfg.constant(&theta);
        for sector in sectors_for(pair) {
            let emap = ExponentMap::new(pair, sector);
            let id = StdConeId::new(theta.clone(), sector);
            for t in cone_points_up_to(pair, &id, &emap, n)? {
                let weight: i64 = pair
                    .delta_h
                    .iter()
                    .zip(&pair.n_exp)
                    .map(|((_, f), ne)| ne * f.dot(&t))
                    .sum();
                total += &c * coeff_eval(&module.coefficient, &t)? * rat_abs_pow(&cfg.q, weight);
            }
        }
    }
    Ok(total)
}
