use redstruct::root_datum::build_catalog_pair;

fn main() {
    for (name, n) in [
        ("triple", None),
        ("waldspurger", None),
        ("gl", Some(2)),
        ("gl", Some(3)),
        ("so", Some(3)),
        ("so", Some(4)),
        ("gl4gl2", None),
        ("sp6sp4", None),
    ] {
        let p = build_catalog_pair(name, n).unwrap();
        let forms: Vec<Vec<i64>> = p.basis_forms().iter().map(|f| f.coeffs.clone()).collect();
        println!(
            "{} n={:?}: h_rank={} delta_h={} c_h={} n_exp={:?} forms={:?}",
            name,
            n,
            p.h_rank(),
            p.delta_h.len(),
            p.c_h.is_some(),
            p.n_exp,
            forms
        );
    }
}
