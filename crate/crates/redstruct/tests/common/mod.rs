//! Shared helpers for the integration suites: seeded random modules and
//! pointwise re-derivations of the verifier's regions.
#![allow(dead_code)] // each test binary uses its own subset

use num::BigInt;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use redstruct::cone_calculus::{std_cone, Sector};
use redstruct::reduction_verifier::{ReductionStructure, Triple};
use redstruct::ring::{rat_int, Rat};
use redstruct::root_datum::{LinearForm, SphericalPair};
use redstruct::series_engine::{ExpPoly, ExpPolyTerm, MultiPoly, ToyModule};
use std::collections::BTreeSet;

pub fn rat_rng(rng: &mut ChaCha8Rng, num_range: std::ops::RangeInclusive<i64>, den_range: std::ops::RangeInclusive<i64>) -> Rat {
    let n = rng.gen_range(num_range);
    let d = rng.gen_range(den_range);
    Rat::new(BigInt::from(n), BigInt::from(d))
}

fn nonzero_rat(rng: &mut ChaCha8Rng) -> Rat {
    loop {
        let v = rat_rng(rng, -3..=3, 1..=3);
        if v != rat_int(0) {
            return v;
        }
    }
}

/// Random exponential-polynomial module: 1..=3 terms, unit eigenvalues,
/// polynomial degree ≤ 1.
pub fn random_module(pair: &SphericalPair, rng: &mut ChaCha8Rng) -> ToyModule<Rat> {
    let dim = pair.h_rank();
    let nterms = rng.gen_range(1..=3);
    let mut terms = Vec::new();
    for _ in 0..nterms {
        let lambda = rat_rng(rng, -4..=4, 1..=3);
        let chi: Vec<Rat> = (0..dim).map(|_| nonzero_rat(rng)).collect();
        let mut poly = MultiPoly::constant(dim, rat_rng(rng, -3..=3, 1..=2));
        if rng.gen_bool(0.5) && dim > 0 {
            let var = rng.gen_range(0..dim);
            let mut e = vec![0u32; dim];
            e[var] = 1;
            poly.add_term(e, nonzero_rat(rng));
        }
        terms.push(ExpPolyTerm { lambda, chi, poly });
    }
    let coeff = ExpPoly::new(dim, terms).expect("unit eigenvalues by construction");
    ToyModule::new(pair.clone(), coeff).expect("valid module")
}

/// Random tempered module (rejection sampling on the margin certificate):
/// small eigenvalues, constant polynomials.
pub fn random_tempered_module(
    pair: &SphericalPair,
    rng: &mut ChaCha8Rng,
    q: &Rat,
    min_margin: &Rat,
) -> ToyModule<Rat> {
    loop {
        let dim = pair.h_rank();
        let nterms = rng.gen_range(1..=2);
        let mut terms = Vec::new();
        for _ in 0..nterms {
            let lambda = rat_rng(rng, -4..=4, 1..=3);
            let chi: Vec<Rat> = (0..dim)
                .map(|_| {
                    let sign = if rng.gen_bool(0.5) { 1 } else { -1 };
                    Rat::new(BigInt::from(sign), BigInt::from(rng.gen_range(12..=40)))
                })
                .collect();
            let poly = MultiPoly::constant(dim, rat_int(1));
            terms.push(ExpPolyTerm { lambda, chi, poly });
        }
        let coeff = ExpPoly::new(dim, terms).expect("unit eigenvalues");
        let m = ToyModule::new(pair.clone(), coeff).expect("valid module");
        match redstruct::period_evaluator::temperedness_margin(&m, q) {
            Some(mg) if &mg >= min_margin => return m,
            _ => continue,
        }
    }
}

/// The per-triple escape condition of (F2) at bound M, re-derived from the
/// public pair data (independent of the verifier's internals).
pub fn triple_condition_holds(pair: &SphericalPair, t: &Triple, x: &[i64], m: i64) -> bool {
    let w = pair.weyl_by_name(&t.w).expect("catalog weyl element");
    let pulled = |f: &LinearForm| f.compose(&w.matrix).compose(&pair.embed);
    let dom_fails = pair
        .delta_g
        .iter()
        .any(|(_, f)| pulled(f).dot(x) <= -1);
    let bounded = pair
        .delta_g
        .iter()
        .enumerate()
        .filter(|(i, _)| !t.theta.contains(i))
        .any(|(_, (_, f))| pulled(f).dot(x) <= m);
    dom_fails || bounded
}

/// Is x in the (F2) region of the structure restricted to `keep`, at bound M?
pub fn in_f2_region(
    pair: &SphericalPair,
    structure: &ReductionStructure,
    keep: &[bool],
    x: &[i64],
    m: i64,
) -> bool {
    let cone = std_cone(pair, &structure.cone_id()).expect("catalog cone");
    if !cone.contains(x) {
        return false;
    }
    structure
        .entries
        .iter()
        .zip(keep)
        .filter(|(_, k)| **k)
        .all(|((t, _), _)| triple_condition_holds(pair, t, x, m))
}

/// The sectors a pair's series splits into.
pub fn sectors_for(pair: &SphericalPair) -> Vec<Sector> {
    if pair.c_h.is_some() {
        vec![Sector::Plus, Sector::Zero, Sector::Minus]
    } else {
        vec![Sector::None]
    }
}

/// All Θ_H subsets of a pair.
pub fn all_thetas(pair: &SphericalPair) -> Vec<BTreeSet<usize>> {
    let n = pair.delta_h.len();
    (0u32..(1 << n))
        .map(|mask| (0..n).filter(|i| mask & (1 << i) != 0).collect())
        .collect()
}
