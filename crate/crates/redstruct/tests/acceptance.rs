//! Acceptance gate: one test per criterion, each printing a single
//! `ACCEPTANCE n (<name>): pass` line on success.

mod common;

use common::{all_thetas, random_module, random_tempered_module, sectors_for};
use num::Signed;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use redstruct::cone_calculus::{
    enumerate_bounded, enumerate_box, is_finite, std_cone, Sector, StdConeId, Verdict,
};
use redstruct::period_evaluator::{
    assemble_period, brute_force_period, cartan_volume, eval_at_one, eval_family_at_one,
    temperedness_margin, EvalPoint, FamilyOutcome, PeriodError, PeriodResult, VolumeConfig,
};
use redstruct::reduction_verifier::{
    catalog, check_f2, check_minimality, verify, CatalogEntry, VerifyOptions,
};
use redstruct::ring::{rat, rat_int, Coeff, Rat, RatFn, UPoly};
use redstruct::root_datum::build_catalog_pair;
use redstruct::series_engine::{
    coeff_eval, expand, reduce, specialize, truncate, ExpPoly, ExpPolyTerm, MultiPoly, ToyModule,
};
use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

// ---------------------------------------------------------------------------
// 1. Catalog verification.

#[test]
fn criterion_1_catalog_verification() {
    let start = Instant::now();
    let cat = catalog();
    let opts = VerifyOptions::default();
    assert_eq!(opts.n_max, 4);
    let mut failures = Vec::new();
    for e in &cat {
        let r = verify(&e.pair, &e.key, &e.structure, &opts);
        if !r.passed() {
            failures.push(format!("{}: {}", e.key, r.status()));
        }
    }
    let elapsed = start.elapsed();
    assert!(failures.is_empty(), "failing structures: {failures:?}");
    assert!(
        elapsed.as_secs() < 60,
        "catalog verification took {elapsed:?} (budget 60 s)"
    );
    println!(
        "ACCEPTANCE 1 (catalog verification): pass ({} structures, {:?})",
        cat.len(),
        elapsed
    );
}

// ---------------------------------------------------------------------------
// 2. Minimality sharpness.

#[test]
fn criterion_2_minimality_sharpness() {
    let cat = catalog();
    let m_list = [1i64, 3];
    let b_list = [12i64, 24];
    let mut checked = 0usize;
    for e in &cat {
        if e.structure.entries.is_empty() {
            continue;
        }
        let v = check_minimality(&e.pair, &e.structure, &m_list, &b_list);
        assert!(v.is_pass(), "{} not minimal: {v}", e.key);
        checked += 1;
    }
    // Injected redundancy: duplicating a triple must be flagged.
    let mut injected = 0usize;
    for key in ["triple/empty", "wal/plus/empty", "gl/n2/minus/empty", "table3/b1"] {
        let e = cat.iter().find(|e| e.key == key).unwrap();
        let mut st = e.structure.clone();
        let dup = st.entries[0].clone();
        st.entries.push(dup);
        let v = check_minimality(&e.pair, &st, &m_list, &b_list);
        assert!(
            matches!(v, Verdict::FailMinimal(_)),
            "{key} with duplicated triple not flagged: {v}"
        );
        injected += 1;
    }
    assert!(injected >= 3);
    println!(
        "ACCEPTANCE 2 (minimality sharpness): pass ({checked} structures sharp, {injected} redundant fixtures flagged)"
    );
}

// ---------------------------------------------------------------------------
// 3. Volume reproduction.

#[test]
fn criterion_3_volume_reproduction() {
    let pair = build_catalog_pair("triple", None).unwrap();
    for qn in [2i64, 3, 5] {
        let q = rat_int(qn);
        let cfg = VolumeConfig::for_pair(&pair, q.clone());
        for a in 1i64..=5 {
            let got = cartan_volume(&pair, &BTreeSet::new(), &[a], &cfg).unwrap();
            let want = (rat_int(1) + q.recip()) * num::pow::pow(q.clone(), a as usize);
            assert_eq!(got, want, "q={qn} a={a}");
        }
        let full: BTreeSet<usize> = [0].into();
        assert_eq!(cartan_volume(&pair, &full, &[0], &cfg).unwrap(), rat_int(1), "q={qn} a=0");
    }
    println!("ACCEPTANCE 3 (volume reproduction): pass (q ∈ {{2,3,5}}, exact)");
}

// ---------------------------------------------------------------------------
// 4. Series oracle.

#[test]
fn criterion_4_series_oracle() {
    let start = Instant::now();
    let cat = catalog();
    let next = AtomicUsize::new(0);
    let errors = std::sync::Mutex::new(Vec::<String>::new());
    let workers = std::thread::available_parallelism().map_or(4, |n| n.get().min(8));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= cat.len() {
                    return;
                }
                let e = &cat[i];
                let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0004 + i as u64);
                for _ in 0..20 {
                    let m = random_module(&e.pair, &mut rng);
                    let rs = match reduce(&m, &e.structure.theta_h, e.structure.sector, &cat) {
                        Ok(rs) => rs,
                        Err(err) => {
                            errors.lock().unwrap().push(format!("{}: reduce: {err}", e.key));
                            return;
                        }
                    };
                    let direct =
                        truncate(&m, &e.structure.theta_h, e.structure.sector, 40).unwrap();
                    if expand(&rs, 40) != direct {
                        errors.lock().unwrap().push(format!("{}: oracle mismatch", e.key));
                        return;
                    }
                }
            });
        }
    });
    let errors = errors.into_inner().unwrap();
    assert!(errors.is_empty(), "{errors:?}");
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 120, "series oracle took {elapsed:?} (budget 120 s)");
    println!(
        "ACCEPTANCE 4 (series oracle): pass ({} contexts × 20 modules @40, {:?})",
        cat.len(),
        elapsed
    );
}

// ---------------------------------------------------------------------------
// 5 & 6. Period oracle and regularity at S = 1.

/// Independent closed form: every (Θ_H, sector) cell of a rank-1 pair is
/// either {0} or a single progression {k·g : k ≥ 1}; sum each module term
/// geometrically.
fn closed_form_period(m: &ToyModule<Rat>, cfg: &VolumeConfig) -> Rat {
    let pair = &m.pair;
    let mut total = rat_int(0);
    for theta in all_thetas(pair) {
        let c = cfg.constant(&theta);
        for sector in sectors_for(pair) {
            let cone = std_cone(pair, &StdConeId::new(theta.clone(), sector)).unwrap();
            if is_finite(&cone) {
                for t in enumerate_bounded(&cone).unwrap() {
                    let w: i64 = pair
                        .delta_h
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| !theta.contains(i))
                        .map(|(i, (_, f))| pair.n_exp[i] * f.dot(&t))
                        .sum();
                    total += &c
                        * coeff_eval(&m.coefficient, &t).unwrap()
                        * num::pow::pow(cfg.q.clone(), usize::try_from(w).unwrap());
                }
                continue;
            }
            // Find the progression generator: the nonzero box point of
            // minimal ∞-norm; all others must be its multiples.
            let pts: Vec<Vec<i64>> = enumerate_box(&cone, 12)
                .into_iter()
                .filter(|p| p.iter().any(|&x| x != 0))
                .collect();
            let g = pts
                .iter()
                .min_by_key(|p| p.iter().map(|x| x.abs()).max().unwrap())
                .unwrap()
                .clone();
            for p in &pts {
                let k = (0..g.len())
                    .find_map(|i| (g[i] != 0).then(|| p[i] / g[i]))
                    .unwrap();
                assert_eq!(p, &g.iter().map(|x| x * k).collect::<Vec<_>>(), "cell is not a progression");
            }
            let w: i64 = pair
                .delta_h
                .iter()
                .enumerate()
                .filter(|(i, _)| !theta.contains(i))
                .map(|(i, (_, f))| pair.n_exp[i] * f.dot(&g))
                .sum();
            let qw = if w >= 0 {
                num::pow::pow(cfg.q.clone(), w as usize)
            } else {
                num::pow::pow(cfg.q.recip(), (-w) as usize)
            };
            for term in &m.coefficient.terms {
                // Constant polynomial by construction of the tempered sampler.
                let chi_g: Rat = term
                    .chi
                    .iter()
                    .zip(&g)
                    .map(|(x, &gi)| {
                        if gi >= 0 {
                            num::pow::pow(x.clone(), gi as usize)
                        } else {
                            num::pow::pow(x.recip(), (-gi) as usize)
                        }
                    })
                    .product();
                let poly_c = term.poly.eval(&g); // constant, independent of t
                let u = chi_g * &qw;
                total += &c * &term.lambda * poly_c * &u / (rat_int(1) - &u);
            }
        }
    }
    total
}

#[test]
fn criterion_5_period_oracle() {
    let cat = catalog();
    let q = rat_int(3);
    let min_margin = rat(1, 10);
    for name in ["triple", "waldspurger"] {
        let pair = build_catalog_pair(name, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0005);
        for i in 0..10 {
            let m = random_tempered_module(&pair, &mut rng, &q, &min_margin);
            let cfg = VolumeConfig::for_pair(&pair, q.clone());
            let bd = assemble_period(&m, &cfg, &cat).unwrap();
            let PeriodResult::Value(v) = &bd.total else {
                panic!("{name} #{i}: tempered module hit a pole");
            };
            let want = closed_form_period(&m, &cfg);
            assert_eq!(v, &want, "{name} #{i}: closed form disagrees");
            let brute = brute_force_period(&m, &cfg, 200).unwrap();
            let diff = (v - &brute).abs();
            assert!(diff < rat(1, 1_000_000), "{name} #{i}: |diff| = {diff}");
        }
    }
    println!("ACCEPTANCE 5 (period oracle): pass (2 pairs × 10 tempered modules, exact + brute @200)");
}

#[test]
fn criterion_6_regularity_at_one() {
    let cat = catalog();
    let q = rat_int(3);
    let min_margin = rat(1, 10);
    let mut summands = 0usize;
    for name in ["triple", "waldspurger"] {
        let pair = build_catalog_pair(name, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0005); // same modules as criterion 5
        for i in 0..10 {
            let m = random_tempered_module(&pair, &mut rng, &q, &min_margin);
            let cfg = VolumeConfig::for_pair(&pair, q.clone());
            assert!(temperedness_margin(&m, &q).is_some());
            let bd = assemble_period(&m, &cfg, &cat).unwrap();
            for (theta, sector, _, r) in &bd.summands {
                assert!(
                    matches!(r, PeriodResult::Value(_)),
                    "{name} #{i}: pole in summand {theta:?}/{sector:?}"
                );
                summands += 1;
            }
        }
    }
    println!("ACCEPTANCE 6 (regularity at S=1): pass ({summands} summands, no poles)");
}

// ---------------------------------------------------------------------------
// 7. Family interpolation.

#[test]
fn criterion_7_family_interpolation() {
    let pair = build_catalog_pair("triple", None).unwrap();
    let cat = catalog();
    let q = rat_int(3);
    // Eigenvalue λ(u) = u/10.
    let lam_u = RatFn::new(UPoly::monomial(rat_int(1), 1), UPoly::constant(rat_int(10)));
    let coeff = ExpPoly::new(
        1,
        vec![ExpPolyTerm {
            lambda: RatFn::one(),
            chi: vec![lam_u.clone()],
            poly: MultiPoly::constant(1, RatFn::one()),
        }],
    )
    .unwrap();
    let fam = ToyModule::new(pair.clone(), coeff).unwrap();
    let theta = BTreeSet::new();
    let rs = reduce(&fam, &theta, Sector::None, &cat).unwrap();
    let (qf, pf) = specialize(&rs, &q, &pair.n_exp);
    for u0 in [rat_int(1), rat_int(2), rat_int(3), rat_int(-1), rat(1, 2)] {
        // Family route: evaluate after the reduction.
        let FamilyOutcome::Result(fam_res) = eval_family_at_one(&qf, &pf, &u0).unwrap() else {
            panic!("unexpected order jump at u0 = {u0}");
        };
        // Direct route: specialize the module, then reduce and evaluate.
        let exact = ExpPoly::new(
            1,
            vec![ExpPolyTerm {
                lambda: rat_int(1),
                chi: vec![lam_u.eval(&u0).unwrap()],
                poly: MultiPoly::constant(1, rat_int(1)),
            }],
        )
        .unwrap();
        let m0 = ToyModule::new(pair.clone(), exact).unwrap();
        let rs0 = reduce(&m0, &theta, Sector::None, &cat).unwrap();
        let (q0, p0) = specialize(&rs0, &q, &pair.n_exp);
        let direct = eval_at_one(&q0, &p0, &EvalPoint::identity()).unwrap();
        assert_eq!(fam_res, direct, "routes disagree at u0 = {u0}");
    }
    // Engineered jump: P(S) = 1 − (3u/10)·S has order 0 at S = 1 generically
    // but order 1 at u0 = 10/3.
    let jump = eval_family_at_one(&qf, &pf, &rat(10, 3)).unwrap();
    assert!(
        matches!(jump, FamilyOutcome::OrderJump { .. }),
        "expected an order jump at u0 = 10/3, got {jump:?}"
    );
    // A vanishing denominator at the sample point is an error, not a value.
    let bad = RatFn::new(
        UPoly::constant(rat_int(1)),
        UPoly(vec![rat_int(-2), rat_int(1)]), // u − 2
    );
    assert_eq!(bad.eval(&rat_int(2)), None);
    let r = eval_family_at_one(&[bad], &[RatFn::one()], &rat_int(2));
    assert!(matches!(r, Err(PeriodError::DegenerateAtPoint)));
    println!("ACCEPTANCE 7 (family interpolation): pass (5 sample points + order jump at u0 = 10/3)");
}

// ---------------------------------------------------------------------------
// 8. (F2) cross-validation.

#[test]
fn criterion_8_f2_cross_validation() {
    let cat = catalog();
    let m_list = [1i64, 3];
    let b_list = [12i64, 24];
    // Catalog: the Stage-2 box enumeration runs inside check_f2 and any
    // stage disagreement surfaces as Inconclusive.
    for e in &cat {
        let v = check_f2(&e.pair, &e.structure, &m_list, &b_list);
        assert!(
            !matches!(v, Verdict::Inconclusive(_)),
            "{}: stages disagree or search exhausted ({v})",
            e.key
        );
        if !e.structure.entries.is_empty() {
            assert!(v.is_pass(), "{}: {v}", e.key);
        }
    }
    // Perturbed structures: deletions and duplications stay conclusive.
    let mut perturbed = 0usize;
    let with_triples: Vec<&CatalogEntry> =
        cat.iter().filter(|e| !e.structure.entries.is_empty()).collect();
    for (i, e) in with_triples.iter().enumerate() {
        if perturbed >= 20 {
            break;
        }
        let mut st = e.structure.clone();
        if i % 2 == 0 && st.entries.len() >= 2 {
            st.entries.remove(st.entries.len() - 1);
        } else {
            let dup = st.entries[i % st.entries.len()].clone();
            st.entries.push(dup);
        }
        let v = check_f2(&e.pair, &st, &m_list, &b_list);
        assert!(
            !matches!(v, Verdict::Inconclusive(_)),
            "{} perturbed: {v}",
            e.key
        );
        perturbed += 1;
    }
    assert!(perturbed >= 20, "only {perturbed} perturbations available");
    println!("ACCEPTANCE 8 (F2 cross-validation): pass (catalog + {perturbed} perturbed structures, zero disagreements)");
}
