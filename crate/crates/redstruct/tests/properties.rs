//! Property suites: randomized invariants for the cone calculus, the
//! verifier's region analysis, and the series engine, plus deterministic
//! pointwise soundness checks over the shipped catalog.

mod common;

use common::{all_thetas, in_f2_region, random_module, sectors_for};
use proptest::collection::vec;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use redstruct::cone_calculus::{
    difference_formula, enumerate_bounded, enumerate_box, integer_feasible, is_finite,
    recession_direction, std_cone, translate, Constraint, ConstraintSet, Sector, Verdict,
};
use redstruct::period_evaluator::{cartan_volume, VolumeConfig};
use redstruct::reduction_verifier::{
    catalog, check_f1_triple, check_f2, check_triple_membership, instantiate_template, verify,
    VerifyOptions,
};
use redstruct::ring::{rat_int, Coeff, Rat, RatFn, UPoly};
use redstruct::root_datum::{build_catalog_pair, LinearForm};
use redstruct::series_engine::{
    annihilator, coeff_eval, expand, reduce, specialize, truncate, ExpPoly, ExpPolyTerm,
    LaurentPoly, MultiPoly, ToyModule,
};
use std::collections::BTreeSet;

// ---------------------------------------------------------------------------
// Random constraint systems.

fn arb_form(rank: usize) -> impl Strategy<Value = LinearForm> {
    vec(-3i64..=3, rank).prop_map(LinearForm::new)
}

fn arb_constraint(rank: usize) -> impl Strategy<Value = Constraint> {
    (arb_form(rank), 0u8..3, -3i64..=3).prop_map(|(f, rel, b)| match rel {
        0 => Constraint::ge(f, b),
        1 => Constraint::le(f, b),
        _ => Constraint::eq(f, b),
    })
}

fn arb_cs(rank: usize) -> impl Strategy<Value = ConstraintSet> {
    vec(arb_constraint(rank), 1..=4).prop_map(move |cs| ConstraintSet::new(rank, cs))
}

/// Constraint systems that contain the origin (bounds pushed to the feasible
/// side), so finiteness questions have witnesses inside small boxes.
fn arb_cs_with_origin(rank: usize) -> impl Strategy<Value = ConstraintSet> {
    vec((arb_form(rank), 0u8..3, 0i64..=3), 1..=4).prop_map(move |rows| {
        let cs = rows
            .into_iter()
            .map(|(f, rel, b)| match rel {
                0 => Constraint::ge(f, -b),
                1 => Constraint::le(f, b),
                _ => Constraint::eq(f, 0),
            })
            .collect();
        ConstraintSet::new(rank, cs)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn membership_translate_coherence(
        cs in arb_cs(3),
        t in vec(-5i64..=5, 3),
        x in vec(-6i64..=6, 3),
    ) {
        let shifted = translate(&cs, &t).unwrap();
        let back: Vec<i64> = x.iter().zip(&t).map(|(a, b)| a - b).collect();
        prop_assert_eq!(shifted.contains(&x), cs.contains(&back));
    }

    #[test]
    fn integer_feasible_returns_members(cs in arb_cs(3)) {
        if let Some(p) = integer_feasible(&cs).unwrap() {
            prop_assert!(cs.contains(&p), "witness {:?} outside the system", p);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn difference_formula_exact_on_box(
        cs in arb_cs(2),
        t in vec(-4i64..=4, 2),
    ) {
        let shifted = translate(&cs, &t).unwrap();
        let formula = difference_formula(&cs, &shifted);
        for x0 in -8i64..=8 {
            for x1 in -8i64..=8 {
                let x = [x0, x1];
                let want = cs.contains(&x) && !shifted.contains(&x);
                prop_assert_eq!(formula.contains(&x), want, "at {:?}", x);
                let hits = formula.disjuncts.iter().filter(|d| d.contains(&x)).count();
                prop_assert!(hits <= 1, "disjuncts overlap at {:?}", x);
            }
        }
    }

    #[test]
    fn finiteness_agrees_with_enumeration(cs in arb_cs_with_origin(2)) {
        let c1 = enumerate_box(&cs, 16).len();
        let c2 = enumerate_box(&cs, 32).len();
        prop_assert!(c2 >= c1);
        if is_finite(&cs) {
            let all = enumerate_bounded(&cs).unwrap();
            prop_assert!(all.iter().all(|p| cs.contains(p)));
            if all.iter().all(|p| p.iter().all(|c| c.abs() <= 16)) {
                prop_assert_eq!(c1, all.len());
                prop_assert_eq!(c2, all.len());
            }
        } else {
            // The origin is in the system and some integer direction recedes,
            // so counts must strictly grow once the box can hold it.
            let r = recession_direction(&cs).unwrap().expect("infinite system has a direction");
            prop_assert!(cs.contains(&r.iter().map(|c| c * 0).collect::<Vec<_>>()));
            if r.iter().all(|c| c.abs() <= 16) {
                prop_assert!(c2 > c1, "direction {:?} did not grow the box count", r);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Catalog-wide pointwise soundness.

/// Whenever an (F1) check passes, the pieces partition the difference set
/// pointwise on enumeration boxes.
#[test]
fn partition_pointwise_on_catalog() {
    for e in catalog() {
        if e.pair.h_rank() > 2 {
            continue; // rank-3 boxes are covered by the direct checks below
        }
        let ctx = e.structure.cone_id();
        let cone = std_cone(&e.pair, &ctx).unwrap();
        for (t, tpl) in &e.structure.entries {
            for n in 1..=2u32 {
                let ns: Vec<i64> = t.s.iter().map(|c| c * i64::from(n)).collect();
                let shifted = translate(&cone, &ns).unwrap();
                let lhs = difference_formula(&cone, &shifted);
                let pieces = instantiate_template(&e.pair, &ctx, tpl, n).unwrap();
                let resolved: Vec<ConstraintSet> =
                    pieces.iter().map(|p| p.resolve(&e.pair).unwrap()).collect();
                for b in [6i64, 12] {
                    for x in enumerate_box(&cone, b) {
                        let in_lhs = lhs.contains(&x);
                        let hits = resolved.iter().filter(|r| r.contains(&x)).count();
                        assert_eq!(
                            in_lhs,
                            hits == 1,
                            "{} triple {:?} n={n} at {:?}: lhs={in_lhs} hits={hits}",
                            e.key,
                            t.s,
                            x
                        );
                        assert!(hits <= 1, "{} overlapping pieces at {:?}", e.key, x);
                    }
                }
            }
        }
    }
}

/// Rank-3 structures: same pointwise check on a smaller box, for a sample of
/// triples (the full loop is covered by verify_partition's exact reasoning).
#[test]
fn partition_pointwise_rank3_sample() {
    for key in ["gl/n3/zero/a1", "so/n4/a1", "table3/b1b2", "table1/zero/a2"] {
        let cat = catalog();
        let e = redstruct::reduction_verifier::catalog_lookup(&cat, key).unwrap();
        let ctx = e.structure.cone_id();
        let cone = std_cone(&e.pair, &ctx).unwrap();
        for (t, tpl) in e.structure.entries.iter().take(2) {
            let shifted = translate(&cone, &t.s).unwrap();
            let lhs = difference_formula(&cone, &shifted);
            let pieces = instantiate_template(&e.pair, &ctx, tpl, 1).unwrap();
            let resolved: Vec<ConstraintSet> =
                pieces.iter().map(|p| p.resolve(&e.pair).unwrap()).collect();
            for x in enumerate_box(&cone, 6) {
                let in_lhs = lhs.contains(&x);
                let hits = resolved.iter().filter(|r| r.contains(&x)).count();
                assert_eq!(in_lhs, hits == 1, "{key} at {x:?}");
            }
        }
    }
}

/// Region antitonicity: deleting a triple can only grow the (F2) region.
#[test]
fn f2_region_antitone_under_deletion() {
    for e in catalog() {
        let n = e.structure.entries.len();
        if n == 0 || n > 8 || e.pair.h_rank() > 2 {
            continue;
        }
        let cone = std_cone(&e.pair, &e.structure.cone_id()).unwrap();
        let full = vec![true; n];
        for x in enumerate_box(&cone, 12) {
            let in_full = in_f2_region(&e.pair, &e.structure, &full, &x, 1);
            for d in 0..n {
                let mut keep = full.clone();
                keep[d] = false;
                let in_del = in_f2_region(&e.pair, &e.structure, &keep, &x, 1);
                assert!(
                    !in_full || in_del,
                    "{} deletion {d} shrank the region at {:?}",
                    e.key,
                    x
                );
            }
        }
    }
}

/// Each catalog structure is sensitive to mutation: zeroing a shift breaks
/// membership, and deleting a triple breaks finiteness.
#[test]
fn mutation_sensitivity() {
    for e in catalog() {
        if e.structure.entries.is_empty() {
            continue;
        }
        // s → 0 flips membership.
        let (t0, _) = &e.structure.entries[0];
        let mut zeroed = t0.clone();
        zeroed.s = vec![0; e.pair.h_rank()];
        let v = check_triple_membership(&e.pair, &e.structure.theta_h, e.structure.sector, &zeroed);
        assert!(!v.is_pass(), "{}: zero shift accepted", e.key);
        // Deleting the first triple flips (F2).
        let mut st = e.structure.clone();
        st.entries.remove(0);
        let v = check_f2(&e.pair, &st, &[1, 3], &[12, 24]);
        assert!(
            matches!(v, Verdict::FailFinite(_)),
            "{}: deletion kept the region finite ({v})",
            e.key
        );
    }
}

/// Aggregated verify flips to fail on a corrupted structure.
#[test]
fn verify_flips_on_corruption() {
    let cat = catalog();
    let e = redstruct::reduction_verifier::catalog_lookup(&cat, "wal/minus/empty").unwrap();
    let mut st = e.structure.clone();
    let (t, _) = &mut st.entries[0];
    t.w = "e".into(); // the catalog uses w ≠ e here
    let opts = VerifyOptions { n_max: 2, ..VerifyOptions::default() };
    let r = verify(&e.pair, "mutated", &st, &opts);
    assert!(!r.passed(), "identity Weyl element accepted in the minus sector");
}

// ---------------------------------------------------------------------------
// Series engine.

/// The annihilator kills the coefficient along every shift direction.
#[test]
fn annihilator_kills_coefficient() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for name in ["triple", "waldspurger", "gl2"] {
        let pair = match name {
            "gl2" => build_catalog_pair("gl", Some(2)).unwrap(),
            n => build_catalog_pair(n, None).unwrap(),
        };
        for _ in 0..5 {
            let m = random_module(&pair, &mut rng);
            let s: Vec<i64> = (0..pair.h_rank()).map(|_| rng.gen_range(-2i64..=2)).collect();
            let p = annihilator(&m, &s).unwrap();
            for _ in 0..100 {
                let t: Vec<i64> = (0..pair.h_rank()).map(|_| rng.gen_range(-6i64..=6)).collect();
                let mut acc = rat_int(0);
                for (i, a) in p.coeffs.iter().enumerate() {
                    let shifted: Vec<i64> =
                        t.iter().zip(&s).map(|(x, d)| x + (i as i64) * d).collect();
                    acc += a * coeff_eval(&m.coefficient, &shifted).unwrap();
                }
                assert!(num::Zero::is_zero(&acc), "annihilator residue {acc} on {name}");
            }
        }
    }
}

/// Small-sample oracle: the closed form expands to the brute truncation.
/// (The full 20-modules-per-context run is the acceptance suite.)
#[test]
fn reduce_matches_truncation_sample() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let cat = catalog();
    for name in ["triple", "waldspurger", "so3"] {
        let pair = match name {
            "so3" => build_catalog_pair("so", Some(3)).unwrap(),
            n => build_catalog_pair(n, None).unwrap(),
        };
        for theta in all_thetas(&pair) {
            for sector in sectors_for(&pair) {
                for _ in 0..3 {
                    let m = random_module(&pair, &mut rng);
                    let rs = reduce(&m, &theta, sector, &cat).unwrap();
                    let direct = truncate(&m, &theta, sector, 25).unwrap();
                    assert_eq!(expand(&rs, 25), direct, "{name} {theta:?} {sector:?}");
                }
            }
        }
    }
}

/// Family/specialization commutation: evaluating u ↦ u₀ before or after the
/// reduction gives the same expansion and the same specialized (Q, P) data.
#[test]
fn family_specialization_commutes() {
    let pair = build_catalog_pair("triple", None).unwrap();
    let cat = catalog();
    let u = RatFn::var();
    let fam_chi = RatFn::new(UPoly::monomial(rat_int(1), 1), UPoly::constant(rat_int(10)));
    let coeff = ExpPoly::new(
        1,
        vec![ExpPolyTerm {
            lambda: RatFn::one(),
            chi: vec![fam_chi.clone()],
            poly: MultiPoly::constant(1, u.clone()),
        }],
    )
    .unwrap();
    let fam = ToyModule::new(pair.clone(), coeff).unwrap();
    let theta = BTreeSet::new();
    let rs_fam = reduce(&fam, &theta, Sector::None, &cat).unwrap();
    let q = rat_int(3);
    let (qf, pf) = specialize(&rs_fam, &q, &pair.n_exp);
    for u0 in [rat_int(1), rat_int(2), rat_int(3), rat_int(-1), redstruct::ring::rat(1, 2)] {
        // Specialize the module first.
        let chi0 = fam_chi.eval(&u0).unwrap();
        let exact = ExpPoly::new(
            1,
            vec![ExpPolyTerm {
                lambda: rat_int(1),
                chi: vec![chi0],
                poly: MultiPoly::constant(1, u0.clone()),
            }],
        )
        .unwrap();
        let m0 = ToyModule::new(pair.clone(), exact).unwrap();
        let rs0 = reduce(&m0, &theta, Sector::None, &cat).unwrap();
        // Expansions agree after evaluating the family coefficients.
        let ex_fam: LaurentPoly<RatFn> = expand(&rs_fam, 20);
        let mut evaluated = LaurentPoly::zero(ex_fam.nvars);
        for (e, c) in &ex_fam.terms {
            evaluated.insert(e.clone(), c.eval(&u0).unwrap());
        }
        assert_eq!(evaluated, expand(&rs0, 20), "expansion at u0 = {u0}");
        // Specializations agree coefficientwise.
        let (q0, p0) = specialize(&rs0, &q, &pair.n_exp);
        let evf = |v: &[RatFn]| -> Vec<Rat> { v.iter().map(|c| c.eval(&u0).unwrap()).collect() };
        assert_eq!(evf(&qf), q0, "Q at u0 = {u0}");
        assert_eq!(evf(&pf), p0, "P at u0 = {u0}");
    }
}

// ---------------------------------------------------------------------------
// Volumes.

/// δ⁻¹ is a semigroup character: volumes multiply across interior cell sums
/// up to one factor of the constant.
#[test]
fn volume_multiplicative_on_cells() {
    for (name, n) in [("triple", None), ("gl", Some(2))] {
        let pair = build_catalog_pair(name, n).unwrap();
        let cfg = VolumeConfig::for_pair(&pair, rat_int(3));
        let theta: BTreeSet<usize> = BTreeSet::new();
        let cone = std_cone(&pair, &redstruct::cone_calculus::StdConeId::new(theta.clone(), if pair.c_h.is_some() { Sector::Plus } else { Sector::None })).unwrap();
        let pts: Vec<Vec<i64>> = enumerate_box(&cone, 4);
        let c = cfg.constant(&theta);
        for t1 in pts.iter().take(8) {
            for t2 in pts.iter().take(8) {
                let sum: Vec<i64> = t1.iter().zip(t2).map(|(a, b)| a + b).collect();
                let v1 = cartan_volume(&pair, &theta, t1, &cfg).unwrap();
                let v2 = cartan_volume(&pair, &theta, t2, &cfg).unwrap();
                let vs = cartan_volume(&pair, &theta, &sum, &cfg).unwrap();
                assert_eq!(&vs * &c, v1 * v2, "{name} at {t1:?} + {t2:?}");
            }
        }
    }
}

// ---------------------------------------------------------------------------
// (F1) checks on randomized shifts: verdicts are conclusive and match the
// pointwise oracle on failures.

#[test]
fn f1_check_rejects_wrong_template() {
    // A template for a different shift must fail the partition check.
    let cat = catalog();
    let e = redstruct::reduction_verifier::catalog_lookup(&cat, "triple/empty").unwrap();
    let ctx = e.structure.cone_id();
    let (t, tpl) = &e.structure.entries[0];
    let mut wrong = t.clone();
    wrong.s = vec![2];
    let v = check_f1_triple(&e.pair, &ctx, &wrong, tpl, 3);
    assert!(!v.is_pass(), "template for s=1 accepted for s=2");
}

/// Membership checks on perturbed triples stay conclusive.
#[test]
fn membership_conclusive_on_perturbations() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for e in catalog() {
        for (t, _) in &e.structure.entries {
            let mut p = t.clone();
            let i = rng.gen_range(0..p.s.len());
            p.s[i] += rng.gen_range(-2i64..=2);
            let v = check_triple_membership(&e.pair, &e.structure.theta_h, e.structure.sector, &p);
            assert!(
                !matches!(v, Verdict::Inconclusive(_)),
                "{}: inconclusive membership on perturbation",
                e.key
            );
        }
    }
}
