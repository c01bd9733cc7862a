//! Cone-supported series with exponential-polynomial coefficients, their
//! annihilator polynomials, and the reduction recursion that turns each
//! series into a structured rational closed form.
//!
//! All series over a context (Θ_H, sector) use one global variable set:
//! one T-variable per Δ_H root plus one for the C_H form when present.
//! Exponents are the basis-form values of the lattice point, with the C_H
//! value negated in the minus sector so exponents stay nonnegative on the
//! cone. Variables attached to Θ_H roots simply never occur.

use crate::cone_calculus::{
    enumerate_bounded, std_cone, ConeError, Constraint, Sector, StdConeId,
};
use crate::reduction_verifier::{instantiate_template, CatalogEntry, ReductionStructure};
use crate::ring::{Coeff, Rat};
use crate::root_datum::{LinearForm, Point, SphericalPair};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SeriesError {
    NonUnitEigenvalue,
    MissingStructure(String),
    Cone(String),
    Dimension(String),
}

impl fmt::Display for SeriesError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeriesError::NonUnitEigenvalue => write!(f, "eigenvalue is not a ring unit"),
            SeriesError::MissingStructure(k) => write!(f, "no reduction structure for {k}"),
            SeriesError::Cone(m) => write!(f, "cone computation failed: {m}"),
            SeriesError::Dimension(m) => write!(f, "dimension mismatch: {m}"),
        }
    }
}

impl std::error::Error for SeriesError {}

impl From<ConeError> for SeriesError {
    fn from(e: ConeError) -> Self {
        SeriesError::Cone(e.to_string())
    }
}

// ---------------------------------------------------------------------------
// Exponential-polynomial coefficients.

/// Sparse polynomial in the lattice coordinates, exponents per coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiPoly<R: Coeff> {
    pub dim: usize,
    /// exponent vector (one entry per lattice coordinate) → coefficient.
    pub terms: BTreeMap<Vec<u32>, R>,
}

impl<R: Coeff> MultiPoly<R> {
    pub fn zero(dim: usize) -> Self {
        MultiPoly {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, c: R) -> Self {
        let mut p = Self::zero(dim);
        if !c.is_zero() {
            p.terms.insert(vec![0; dim], c);
        }
        p
    }

    /// The coordinate function t ↦ t_i.
    pub fn coordinate(dim: usize, i: usize) -> Self {
        let mut e = vec![0u32; dim];
        e[i] = 1;
        let mut p = Self::zero(dim);
        p.terms.insert(e, R::one());
        p
    }

    pub fn add_term(&mut self, exp: Vec<u32>, c: R) {
        assert_eq!(exp.len(), self.dim);
        let entry = self.terms.entry(exp.clone()).or_insert_with(R::zero);
        *entry = entry.add(&c);
        if entry.is_zero() {
            self.terms.remove(&exp);
        }
    }

    pub fn total_degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.iter().sum())
            .max()
            .unwrap_or(0)
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut out = Self::zero(self.dim);
        for (e1, c1) in &self.terms {
            for (e2, c2) in &o.terms {
                let e: Vec<u32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                out.add_term(e, c1.mul(c2));
            }
        }
        out
    }

    /// Substitute t ↦ m·t: p'(t) = p(m t) for an integer matrix m.
    pub fn compose_linear(&self, m: &[Vec<i64>]) -> Self {
        let rows: Vec<MultiPoly<R>> = m
            .iter()
            .map(|row| {
                let mut l = Self::zero(self.dim);
                for (j, &c) in row.iter().enumerate() {
                    if c != 0 {
                        let mut e = vec![0u32; self.dim];
                        e[j] = 1;
                        l.add_term(e, R::from_rat(&Rat::from(num::BigInt::from(c))));
                    }
                }
                l
            })
            .collect();
        let mut out = Self::zero(self.dim);
        for (e, c) in &self.terms {
            let mut term = Self::constant(self.dim, c.clone());
            for (i, &ei) in e.iter().enumerate() {
                for _ in 0..ei {
                    term = term.mul(&rows[i]);
                }
            }
            for (te, tc) in term.terms {
                out.add_term(te, tc);
            }
        }
        out
    }

    pub fn eval(&self, t: &[i64]) -> R {
        let mut acc = R::zero();
        for (e, c) in &self.terms {
            let mut m = c.clone();
            for (xi, &ei) in t.iter().zip(e) {
                if ei == 0 {
                    continue;
                }
                let p = R::from_rat(&Rat::from(num::BigInt::from(*xi)))
                    .pow_i(i64::from(ei))
                    .expect("nonnegative power");
                m = m.mul(&p);
            }
            acc = acc.add(&m);
        }
        acc
    }
}

/// One term λ · χ(t) · p(t); χ given by its unit values on the lattice basis.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpPolyTerm<R: Coeff> {
    pub lambda: R,
    pub chi: Vec<R>,
    pub poly: MultiPoly<R>,
}

/// A finite sum of exponential-polynomial terms on the H-lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpPoly<R: Coeff> {
    pub dim: usize,
    pub terms: Vec<ExpPolyTerm<R>>,
}

impl<R: Coeff> ExpPoly<R> {
    pub fn new(dim: usize, terms: Vec<ExpPolyTerm<R>>) -> Result<Self, SeriesError> {
        for t in &terms {
            if t.chi.len() != dim || t.poly.dim != dim {
                return Err(SeriesError::Dimension(
                    "term dimension differs from lattice rank".into(),
                ));
            }
            if t.chi.iter().any(|c| !c.is_unit()) {
                return Err(SeriesError::NonUnitEigenvalue);
            }
        }
        Ok(ExpPoly { dim, terms })
    }

    /// χ(t) = ∏ χ_iᵗⁱ for one term.
    fn chi_at(chi: &[R], t: &[i64]) -> Result<R, SeriesError> {
        let mut acc = R::one();
        for (c, &ti) in chi.iter().zip(t) {
            acc = acc.mul(&c.pow_i(ti).ok_or(SeriesError::NonUnitEigenvalue)?);
        }
        Ok(acc)
    }
}

/// Evaluate the coefficient function at a lattice point.
pub fn coeff_eval<R: Coeff>(c: &ExpPoly<R>, t: &[i64]) -> Result<R, SeriesError> {
    if t.len() != c.dim {
        return Err(SeriesError::Dimension("point dimension".into()));
    }
    let mut acc = R::zero();
    for term in &c.terms {
        let v = term
            .lambda
            .mul(&ExpPoly::<R>::chi_at(&term.chi, t)?)
            .mul(&term.poly.eval(t));
        acc = acc.add(&v);
    }
    Ok(acc)
}

/// A synthetic module: a spherical pair together with the values of the
/// matrix coefficient ⟨π(t)v, ṽ⟩ as an exponential-polynomial.
#[derive(Clone, Debug)]
pub struct ToyModule<R: Coeff> {
    pub pair: SphericalPair,
    pub coefficient: ExpPoly<R>,
}

impl<R: Coeff> ToyModule<R> {
    pub fn new(pair: SphericalPair, coefficient: ExpPoly<R>) -> Result<Self, SeriesError> {
        if coefficient.dim != pair.h_rank() {
            return Err(SeriesError::Dimension(
                "coefficient dimension differs from H-rank".into(),
            ));
        }
        Ok(ToyModule { pair, coefficient })
    }
}

// ---------------------------------------------------------------------------
// Laurent polynomials in the T-variables.

#[derive(Clone, Debug, PartialEq)]
pub struct LaurentPoly<R: Coeff> {
    pub nvars: usize,
    pub terms: BTreeMap<Vec<i64>, R>,
}

impl<R: Coeff> LaurentPoly<R> {
    pub fn zero(nvars: usize) -> Self {
        LaurentPoly {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: R) -> Self {
        let mut p = Self::zero(nvars);
        p.insert(vec![0; nvars], c);
        p
    }

    pub fn monomial(exp: Vec<i64>, c: R) -> Self {
        let mut p = Self::zero(exp.len());
        p.insert(exp, c);
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn insert(&mut self, exp: Vec<i64>, c: R) {
        assert_eq!(exp.len(), self.nvars);
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(exp.clone()).or_insert_with(R::zero);
        *entry = entry.add(&c);
        if entry.is_zero() {
            self.terms.remove(&exp);
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        assert_eq!(self.nvars, o.nvars);
        let mut out = self.clone();
        for (e, c) in &o.terms {
            out.insert(e.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(&R::one().neg()))
    }

    pub fn scale(&self, c: &R) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e, v) in &self.terms {
            out.insert(e.clone(), v.mul(c));
        }
        out
    }

    pub fn mul_monomial(&self, exp: &[i64]) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e, v) in &self.terms {
            out.insert(e.iter().zip(exp).map(|(a, b)| a + b).collect(), v.clone());
        }
        out
    }

    pub fn mul(&self, o: &Self) -> Self {
        self.mul_trunc(o, None)
    }

    /// Product, optionally dropping terms of total degree above the cutoff.
    pub fn mul_trunc(&self, o: &Self, cutoff: Option<i64>) -> Self {
        assert_eq!(self.nvars, o.nvars);
        let mut out = Self::zero(self.nvars);
        for (e1, c1) in &self.terms {
            for (e2, c2) in &o.terms {
                let e: Vec<i64> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                if let Some(n) = cutoff {
                    if e.iter().sum::<i64>() > n {
                        continue;
                    }
                }
                out.insert(e, c1.mul(c2));
            }
        }
        out
    }

    /// Drop terms of total degree above n.
    pub fn truncated(&self, n: i64) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            if e.iter().sum::<i64>() <= n {
                out.insert(e.clone(), c.clone());
            }
        }
        out
    }
}

impl<R: Coeff> fmt::Display for LaurentPoly<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({c})")?;
            for (i, &ei) in e.iter().enumerate() {
                if ei != 0 {
                    write!(f, "*T{i}^{ei}")?;
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Annihilators and rational series.

/// P(X) = a_0 + a_1 X + … + a_N X^N with a_0, a_N ring units, such that the
/// shift-by-s operator P(Shift_s) kills the coefficient function.
#[derive(Clone, Debug, PartialEq)]
pub struct AnnihilatorPoly<R: Coeff> {
    pub coeffs: Vec<R>,
}

impl<R: Coeff> AnnihilatorPoly<R> {
    pub fn new(coeffs: Vec<R>) -> Result<Self, SeriesError> {
        let first = coeffs.first().ok_or(SeriesError::NonUnitEigenvalue)?;
        let last = coeffs.last().unwrap();
        if !first.is_unit() || !last.is_unit() {
            return Err(SeriesError::NonUnitEigenvalue);
        }
        Ok(AnnihilatorPoly { coeffs })
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }
}

impl<R: Coeff> fmt::Display for AnnihilatorPoly<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if i == 0 {
                write!(f, "{c}")?;
            } else {
                write!(f, "({c})*X^{i}")?;
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

/// P(X) = ∏ over distinct eigenvalues χ_j(s) of (X − χ_j(s))^{1 + max deg}.
pub fn annihilator<R: Coeff>(
    module: &ToyModule<R>,
    s: &[i64],
) -> Result<AnnihilatorPoly<R>, SeriesError> {
    let mut roots: Vec<(R, u32)> = Vec::new();
    for term in &module.coefficient.terms {
        let ev = ExpPoly::<R>::chi_at(&term.chi, s)?;
        if !ev.is_unit() {
            return Err(SeriesError::NonUnitEigenvalue);
        }
        let mult = 1 + term.poly.total_degree();
        match roots.iter_mut().find(|(r, _)| *r == ev) {
            Some((_, m)) => *m = (*m).max(mult),
            None => roots.push((ev, mult)),
        }
    }
    if roots.is_empty() {
        // The zero function is killed by the trivial shift identity.
        return AnnihilatorPoly::new(vec![R::one().neg(), R::one()]);
    }
    let mut coeffs = vec![R::one()];
    for (ev, mult) in roots {
        for _ in 0..mult {
            // Multiply by (X − ev).
            let mut next = vec![R::zero(); coeffs.len() + 1];
            for (i, c) in coeffs.iter().enumerate() {
                next[i + 1] = next[i + 1].add(c);
                next[i] = next[i].sub(&c.mul(&ev));
            }
            coeffs = next;
        }
    }
    AnnihilatorPoly::new(coeffs)
}

/// N(T) / (M(T) · ∏ P_k(T^{−v_k})), where M is the single monomial
/// T^{Σ_k deg(P_k)·v_k} that clears every factor's negative exponents.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalSeries<R: Coeff> {
    pub nvars: usize,
    pub numerator: LaurentPoly<R>,
    pub monomial: Vec<i64>,
    pub denom_factors: Vec<(AnnihilatorPoly<R>, Vec<i64>)>,
}

impl<R: Coeff> RationalSeries<R> {
    pub fn zero(nvars: usize) -> Self {
        RationalSeries {
            nvars,
            numerator: LaurentPoly::zero(nvars),
            monomial: vec![0; nvars],
            denom_factors: Vec::new(),
        }
    }

    pub fn from_poly(p: LaurentPoly<R>) -> Self {
        RationalSeries {
            nvars: p.nvars,
            numerator: p,
            monomial: vec![0; 0],
            denom_factors: Vec::new(),
        }
        .fix_monomial()
    }

    fn fix_monomial(mut self) -> Self {
        if self.monomial.len() != self.nvars {
            self.monomial = vec![0; self.nvars];
        }
        self
    }

    /// T^{deg·v} · P(T^{−v}) expanded; unit constant term by construction.
    fn factor_poly(p: &AnnihilatorPoly<R>, v: &[i64], nvars: usize) -> LaurentPoly<R> {
        let n = p.degree() as i64;
        let mut out = LaurentPoly::zero(nvars);
        for (i, a) in p.coeffs.iter().enumerate() {
            let e: Vec<i64> = v.iter().map(|&x| x * (n - i as i64)).collect();
            out.insert(e, a.clone());
        }
        out
    }

    pub fn scale(&self, c: &R) -> Self {
        RationalSeries {
            nvars: self.nvars,
            numerator: self.numerator.scale(c),
            monomial: self.monomial.clone(),
            denom_factors: self.denom_factors.clone(),
        }
    }

    pub fn mul_monomial(&self, exp: &[i64]) -> Self {
        RationalSeries {
            nvars: self.nvars,
            numerator: self.numerator.mul_monomial(exp),
            monomial: self.monomial.clone(),
            denom_factors: self.denom_factors.clone(),
        }
    }

    /// Divide by T^{deg(P)·v}·P(T^{−v}).
    pub fn div_factor(&self, p: AnnihilatorPoly<R>, v: Vec<i64>) -> Self {
        let n = p.degree() as i64;
        let mut out = self.clone();
        for (m, &x) in out.monomial.iter_mut().zip(&v) {
            *m += n * x;
        }
        out.denom_factors.push((p, v));
        out
    }

    /// Sum with common denominator factors cancelled rather than duplicated.
    pub fn add(&self, o: &Self) -> Self {
        assert_eq!(self.nvars, o.nvars);
        if self.numerator.is_zero() {
            return o.clone();
        }
        if o.numerator.is_zero() {
            return self.clone();
        }
        // Multiset intersection of factors.
        let mut common: Vec<(AnnihilatorPoly<R>, Vec<i64>)> = Vec::new();
        let mut b_rest: Vec<(AnnihilatorPoly<R>, Vec<i64>)> = o.denom_factors.clone();
        let mut a_rest: Vec<(AnnihilatorPoly<R>, Vec<i64>)> = Vec::new();
        for f in &self.denom_factors {
            if let Some(pos) = b_rest.iter().position(|g| g == f) {
                common.push(b_rest.remove(pos));
            } else {
                a_rest.push(f.clone());
            }
        }
        // Work with net monomials μ = monomial − Σ deg(P)·v: each series is
        // N·T^{−μ} over the product of its expanded factor polynomials.
        let net = |rs: &Self| -> Vec<i64> {
            let mut m = rs.monomial.clone();
            for (p, v) in &rs.denom_factors {
                for (mi, &x) in m.iter_mut().zip(v) {
                    *mi -= p.degree() as i64 * x;
                }
            }
            m
        };
        let mu_a = net(self);
        let mu_b = net(o);
        let top: Vec<i64> = mu_a.iter().zip(&mu_b).map(|(a, b)| *a.max(b)).collect();
        let expand_list = |fs: &[(AnnihilatorPoly<R>, Vec<i64>)]| {
            let mut acc = LaurentPoly::constant(self.nvars, R::one());
            for (p, v) in fs {
                acc = acc.mul(&Self::factor_poly(p, v, self.nvars));
            }
            acc
        };
        let a_shift: Vec<i64> = top.iter().zip(&mu_a).map(|(t, m)| t - m).collect();
        let b_shift: Vec<i64> = top.iter().zip(&mu_b).map(|(t, m)| t - m).collect();
        let num = self
            .numerator
            .mul(&expand_list(&b_rest))
            .mul_monomial(&a_shift)
            .add(&o.numerator.mul(&expand_list(&a_rest)).mul_monomial(&b_shift));
        let mut denom_factors = common;
        denom_factors.extend(a_rest);
        denom_factors.extend(b_rest);
        let mut monomial = top;
        for (p, v) in &denom_factors {
            for (mi, &x) in monomial.iter_mut().zip(v) {
                *mi += p.degree() as i64 * x;
            }
        }
        RationalSeries {
            nvars: self.nvars,
            numerator: num,
            monomial,
            denom_factors,
        }
    }
}

impl<R: Coeff> fmt::Display for RationalSeries<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.numerator)?;
        if self.monomial.iter().any(|&m| m != 0) {
            write!(f, " / T^{:?}", self.monomial)?;
        }
        for (p, v) in &self.denom_factors {
            write!(f, " / ({})(T^-{:?})", p, v)?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// The exponent map and cone enumeration.

/// Exponent of T^{|v(t)|}: all Δ_H values, then the C_H value, negated in
/// the minus sector so cone points always have nonnegative exponents.
pub struct ExponentMap {
    forms: Vec<LinearForm>,
}

impl ExponentMap {
    pub fn new(pair: &SphericalPair, sector: Sector) -> Self {
        let mut forms: Vec<LinearForm> = pair.delta_h.iter().map(|(_, f)| f.clone()).collect();
        if let Some((_, b)) = &pair.c_h {
            forms.push(if sector == Sector::Minus { b.neg() } else { b.clone() });
        }
        ExponentMap { forms }
    }

    pub fn nvars(&self) -> usize {
        self.forms.len()
    }

    pub fn exponent(&self, t: &[i64]) -> Vec<i64> {
        self.forms.iter().map(|f| f.dot(t)).collect()
    }

    /// Σ of all exponent coordinates, as one linear form.
    fn degree_form(&self) -> LinearForm {
        let dim = self.forms[0].dim();
        let mut acc = LinearForm::new(vec![0; dim]);
        for f in &self.forms {
            acc = acc.add(f);
        }
        acc
    }
}

/// All cone points of total exponent degree ≤ n (finite because the basis
/// forms span the dual).
pub fn cone_points_up_to(
    pair: &SphericalPair,
    id: &StdConeId,
    emap: &ExponentMap,
    n: i64,
) -> Result<Vec<Point>, SeriesError> {
    // Enumeration is pure but not cheap, and oracle comparisons hit the same
    // (pair, context, order) many times in a row; keep a per-thread cache.
    type Key = (String, usize, Vec<usize>, Sector, i64);
    thread_local! {
        static CACHE: std::cell::RefCell<BTreeMap<Key, Vec<Point>>> =
            std::cell::RefCell::new(BTreeMap::new());
    }
    let key: Key = (
        pair.name.clone(),
        pair.g_rank(),
        id.theta_h.iter().copied().collect(),
        id.sector,
        n,
    );
    if let Some(pts) = CACHE.with(|c| c.borrow().get(&key).cloned()) {
        return Ok(pts);
    }
    let cone = std_cone(pair, id)?;
    let cut = cone.and(&[Constraint::le(emap.degree_form(), n)]);
    let pts = enumerate_bounded(&cut)?;
    CACHE.with(|c| c.borrow_mut().insert(key, pts.clone()));
    Ok(pts)
}

/// Brute-force truncation of the series: Σ c(t)·T^{|v(t)|} over cone points
/// of degree ≤ n. The oracle every closed form is tested against.
pub fn truncate<R: Coeff>(
    module: &ToyModule<R>,
    theta_h: &BTreeSet<usize>,
    sector: Sector,
    n: i64,
) -> Result<LaurentPoly<R>, SeriesError> {
    let pair = &module.pair;
    let emap = ExponentMap::new(pair, sector);
    let id = StdConeId::new(theta_h.clone(), sector);
    let mut out = LaurentPoly::zero(emap.nvars());
    let pts = cone_points_up_to(pair, &id, &emap, n)?;
    if pts.is_empty() {
        return Ok(out);
    }
    // χ(t) would cost a bignum power per coordinate per point; tabulate the
    // powers over each coordinate's range instead.
    let dim = module.coefficient.dim;
    let mut lo = vec![i64::MAX; dim];
    let mut hi = vec![i64::MIN; dim];
    for t in &pts {
        for i in 0..dim {
            lo[i] = lo[i].min(t[i]);
            hi[i] = hi[i].max(t[i]);
        }
    }
    let mut tables: Vec<Vec<Vec<R>>> = Vec::new();
    for term in &module.coefficient.terms {
        let mut per = Vec::with_capacity(dim);
        for i in 0..dim {
            let base = term.chi[i]
                .pow_i(lo[i])
                .ok_or(SeriesError::NonUnitEigenvalue)?;
            let mut v = vec![base];
            for _ in lo[i]..hi[i] {
                let next = v.last().unwrap().mul(&term.chi[i]);
                v.push(next);
            }
            per.push(v);
        }
        tables.push(per);
    }
    // λ·∏_{i<dim−1} χ_iᵗⁱ repeats across the last coordinate; memoize it so
    // each point costs one table product.
    let mut memos: Vec<BTreeMap<Vec<i64>, R>> =
        vec![BTreeMap::new(); module.coefficient.terms.len()];
    for t in pts {
        let mut acc = R::zero();
        for ((term, per), memo) in module
            .coefficient
            .terms
            .iter()
            .zip(&tables)
            .zip(&mut memos)
        {
            let chi_v = if dim == 0 {
                term.lambda.clone()
            } else {
                let prefix = memo.entry(t[..dim - 1].to_vec()).or_insert_with(|| {
                    let mut p = term.lambda.clone();
                    for i in 0..dim - 1 {
                        p = p.mul(&per[i][(t[i] - lo[i]) as usize]);
                    }
                    p
                });
                prefix.mul(&per[dim - 1][(t[dim - 1] - lo[dim - 1]) as usize])
            };
            acc = acc.add(&chi_v.mul(&term.poly.eval(&t)));
        }
        out.insert(emap.exponent(&t), acc);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// The reduction recursion.

fn binom(n: u32, k: u32) -> i64 {
    let mut acc = 1i64;
    for i in 0..k {
        acc = acc * i64::from(n - i) / i64::from(i + 1);
    }
    acc
}

struct Reducer<'a, R: Coeff> {
    pair: &'a SphericalPair,
    emap: ExponentMap,
    structures: BTreeMap<(Vec<usize>, Sector), &'a ReductionStructure>,
    /// (theta, sector, χ values, monomial) → closed form of Σ χ(t)tᵐT^{E(t)}.
    cache: Vec<((Vec<usize>, Sector, Vec<R>, Vec<u32>), RationalSeries<R>)>,
}

impl<'a, R: Coeff> Reducer<'a, R> {
    fn structure(
        &self,
        theta: &BTreeSet<usize>,
        sector: Sector,
    ) -> Result<&'a ReductionStructure, SeriesError> {
        let key = (theta.iter().copied().collect::<Vec<_>>(), sector);
        self.structures.get(&key).copied().ok_or_else(|| {
            SeriesError::MissingStructure(format!(
                "{} theta {:?} sector {}",
                self.pair.name,
                theta,
                sector.label()
            ))
        })
    }

    /// Closed form of the elementary series Σ_{t ∈ cone} χ(t)·tᵐ·T^{E(t)}.
    fn elem(
        &mut self,
        theta: &BTreeSet<usize>,
        sector: Sector,
        chi: &[R],
        mono: &[u32],
    ) -> Result<RationalSeries<R>, SeriesError> {
        let key = (
            theta.iter().copied().collect::<Vec<_>>(),
            sector,
            chi.to_vec(),
            mono.to_vec(),
        );
        if let Some((_, v)) = self.cache.iter().find(|(k, _)| *k == key) {
            return Ok(v.clone());
        }
        let structure = self.structure(theta, sector)?;
        let id = StdConeId::new(theta.clone(), sector);
        let result = if structure.entries.is_empty() {
            // Finite ground case: sum the cone directly.
            let cone = std_cone(self.pair, &id)?;
            let pts = enumerate_bounded(&cone)?;
            let mut num = LaurentPoly::zero(self.emap.nvars());
            for t in pts {
                let c = ExpPoly::<R>::chi_at(chi, &t)?.mul(&mono_eval::<R>(mono, &t));
                num.insert(self.emap.exponent(&t), c);
            }
            RationalSeries::from_poly(num)
        } else {
            let (triple, template) = &structure.entries[0];
            let s = &triple.s;
            let ev = ExpPoly::<R>::chi_at(chi, s)?;
            if !ev.is_unit() {
                return Err(SeriesError::NonUnitEigenvalue);
            }
            let deg: u32 = mono.iter().sum();
            let n = 1 + deg;
            // P(X) = (X − ev)^n.
            let mut coeffs = vec![R::zero(); n as usize + 1];
            for (i, c) in coeffs.iter_mut().enumerate() {
                let sign = if (n as usize - i) % 2 == 1 {
                    R::one().neg()
                } else {
                    R::one()
                };
                *c = R::from_rat(&Rat::from(num::BigInt::from(binom(n, i as u32))))
                    .mul(&sign)
                    .mul(&ev.pow_i(i64::from(n) - i as i64).unwrap());
            }
            let p = AnnihilatorPoly::new(coeffs)?;
            let pieces = instantiate_template(self.pair, &id, template, 1)?;
            let mut acc = RationalSeries::zero(self.emap.nvars());
            for j in 1..=i64::from(n) {
                let a_nj = p.coeffs[(i64::from(n) - j) as usize].clone();
                if a_nj.is_zero() {
                    continue;
                }
                for ip in 0..j {
                    for piece in &pieces {
                        let front: Point = piece
                            .shift
                            .iter()
                            .zip(s)
                            .map(|(a, b)| a + ip * b)
                            .collect();
                        let u: Point = front.iter().zip(s).map(|(a, b)| a - j * b).collect();
                        let sub = self.translated_elem(
                            &piece.body.theta_h,
                            piece.body.sector,
                            chi,
                            mono,
                            &u,
                        )?;
                        let contrib = sub
                            .mul_monomial(&self.emap.exponent(&front))
                            .scale(&a_nj.neg());
                        acc = acc.add(&contrib);
                    }
                }
            }
            acc.div_factor(p, self.emap.exponent(s))
        };
        self.cache.push((key, result.clone()));
        Ok(result)
    }

    /// Closed form of Σ_{t ∈ cone} χ(t+u)·(t+u)ᵐ·T^{E(t)}: expand the
    /// binomials and recurse on elementary series.
    fn translated_elem(
        &mut self,
        theta: &BTreeSet<usize>,
        sector: Sector,
        chi: &[R],
        mono: &[u32],
        u: &[i64],
    ) -> Result<RationalSeries<R>, SeriesError> {
        let chi_u = ExpPoly::<R>::chi_at(chi, u)?;
        let mut acc = RationalSeries::zero(self.emap.nvars());
        let mut stack: Vec<(Vec<u32>, i64)> = vec![(Vec::new(), 1)];
        for (d, &md) in mono.iter().enumerate() {
            let mut next = Vec::new();
            for (prefix, coef) in stack {
                for k in 0..=md {
                    let mut e = prefix.clone();
                    e.push(k);
                    let c = coef
                        * binom(md, k)
                        * u[d].pow(md - k);
                    next.push((e, c));
                }
            }
            stack = next;
        }
        for (m2, coef) in stack {
            if coef == 0 {
                continue;
            }
            let sub = self.elem(theta, sector, chi, &m2)?;
            let c = chi_u.mul(&R::from_rat(&Rat::from(num::BigInt::from(coef))));
            acc = acc.add(&sub.scale(&c));
        }
        Ok(acc)
    }
}

fn mono_eval<R: Coeff>(mono: &[u32], t: &[i64]) -> R {
    let mut acc = R::one();
    for (&e, &x) in mono.iter().zip(t) {
        for _ in 0..e {
            acc = acc.mul(&R::from_rat(&Rat::from(num::BigInt::from(x))));
        }
    }
    acc
}

/// Assemble the rational closed form of the full series over (Θ_H, sector)
/// via the reduction recursion grounded in the verified structures.
pub fn reduce<R: Coeff>(
    module: &ToyModule<R>,
    theta_h: &BTreeSet<usize>,
    sector: Sector,
    structures: &[CatalogEntry],
) -> Result<RationalSeries<R>, SeriesError> {
    let pair = &module.pair;
    let mut by_ctx: BTreeMap<(Vec<usize>, Sector), &ReductionStructure> = BTreeMap::new();
    for e in structures {
        if e.pair.name == pair.name {
            by_ctx.insert(
                (
                    e.structure.theta_h.iter().copied().collect(),
                    e.structure.sector,
                ),
                &e.structure,
            );
        }
    }
    let mut red = Reducer {
        pair,
        emap: ExponentMap::new(pair, sector),
        structures: by_ctx,
        cache: Vec::new(),
    };
    let mut acc = RationalSeries::zero(red.emap.nvars());
    for term in &module.coefficient.terms {
        for (mono, c) in &term.poly.terms {
            let sub = red.elem(theta_h, sector, &term.chi, mono)?;
            acc = acc.add(&sub.scale(&term.lambda.mul(c)));
        }
    }
    Ok(acc)
}

/// Power-series expansion of a rational closed form to total degree ≤ n.
pub fn expand<R: Coeff>(rs: &RationalSeries<R>, n: i64) -> LaurentPoly<R> {
    // Each expanded factor already carries the clearing power T^{deg(P)·v};
    // only the part of the monomial beyond those powers still needs shifting.
    let mut net: Vec<i64> = rs.monomial.clone();
    for (p, v) in &rs.denom_factors {
        for (m, &x) in net.iter_mut().zip(v) {
            *m -= p.degree() as i64 * x;
        }
    }
    let shift: i64 = net.iter().sum();
    let cutoff = n + shift.max(0);
    let acc = rs.numerator.truncated(cutoff);
    let neg_m: Vec<i64> = net.iter().map(|x| -x).collect();
    if rs.denom_factors.is_empty() || acc.is_zero() {
        return acc.mul_monomial(&neg_m).truncated(n);
    }
    let factors: Vec<LaurentPoly<R>> = rs
        .denom_factors
        .iter()
        .map(|(p, v)| RationalSeries::factor_poly(p, v, rs.nvars))
        .collect();
    // Each factor has a unit constant term and its other terms have positive
    // total degree, so d·x = num can be solved coefficientwise in graded
    // order. The quotient supports all live inside the closure of the
    // numerator support under adding any factor exponent; index that closure
    // once so every division is array arithmetic.
    let zero_e = vec![0i64; rs.nvars];
    let mut step_set: BTreeSet<Vec<i64>> = BTreeSet::new();
    for d in &factors {
        for e in d.terms.keys().filter(|e| **e != zero_e) {
            debug_assert!(e.iter().sum::<i64>() > 0, "factor term of nonpositive degree");
            step_set.insert(e.clone());
        }
    }
    let graded = |e: &Vec<i64>| (e.iter().sum::<i64>(), e.clone());
    let mut support: BTreeSet<(i64, Vec<i64>)> = acc.terms.keys().map(&graded).collect();
    let mut frontier: Vec<Vec<i64>> = acc.terms.keys().cloned().collect();
    while let Some(e) = frontier.pop() {
        for f in &step_set {
            let ne: Vec<i64> = e.iter().zip(f).map(|(a, b)| a + b).collect();
            if ne.iter().sum::<i64>() <= cutoff && support.insert(graded(&ne)) {
                frontier.push(ne);
            }
        }
    }
    let support: Vec<Vec<i64>> = support.into_iter().map(|(_, e)| e).collect();
    let index: BTreeMap<&Vec<i64>, usize> =
        support.iter().enumerate().map(|(i, e)| (e, i)).collect();
    // step exponent → index of e − step for each support position.
    let mut preds: BTreeMap<&Vec<i64>, Vec<usize>> = BTreeMap::new();
    for f in &step_set {
        let p = support
            .iter()
            .map(|e| {
                let pe: Vec<i64> = e.iter().zip(f).map(|(a, b)| a - b).collect();
                index.get(&pe).copied().unwrap_or(usize::MAX)
            })
            .collect();
        preds.insert(f, p);
    }
    let mut vals: Vec<R> = support
        .iter()
        .map(|e| acc.terms.get(e).cloned().unwrap_or_else(R::zero))
        .collect();
    for d in &factors {
        let c = d.terms.get(&zero_e).cloned().unwrap_or_else(R::zero);
        let cinv = c.inv().expect("unit constant term");
        let steps: Vec<(&Vec<usize>, &R)> = d
            .terms
            .iter()
            .filter(|(e, _)| **e != zero_e)
            .map(|(e, a)| (&preds[e], a))
            .collect();
        for i in 0..vals.len() {
            let mut v = vals[i].clone();
            let mut touched = !v.is_zero();
            for (pred, a) in &steps {
                let p = pred[i];
                if p != usize::MAX && !vals[p].is_zero() {
                    v = v.sub(&a.mul(&vals[p]));
                    touched = true;
                }
            }
            // Zero in, zero out: skip the unit division on untouched slots.
            if touched {
                vals[i] = v.mul(&cinv);
            }
        }
    }
    let mut out = LaurentPoly::zero(rs.nvars);
    for (e, v) in support.into_iter().zip(vals) {
        out.insert(e, v);
    }
    out.mul_monomial(&neg_m).truncated(n)
}

/// Substitute T_α ↦ q^{N_α}·S and T_β ↦ S; returns dense S-polynomials
/// (Q, P) with F = Q/P and unit first/last coefficients of P.
pub fn specialize<R: Coeff>(
    rs: &RationalSeries<R>,
    q: &Rat,
    n_exp: &[i64],
) -> (Vec<R>, Vec<R>) {
    let weight = |e: &[i64]| -> (i64, i64) {
        // (S-degree, q-exponent)
        let deg: i64 = e.iter().sum();
        let qe: i64 = e.iter().zip(n_exp).map(|(x, n)| x * n).sum();
        (deg, qe)
    };
    let qp = |e: i64| -> R {
        R::from_rat(q)
            .pow_i(e)
            .expect("positive rational base")
    };
    // Numerator, times each factor's clearing monomial T^{deg(P)·v}.
    let mut extra_deg = 0i64;
    let mut extra_q = 0i64;
    for (p, v) in &rs.denom_factors {
        let (d, w) = weight(v);
        extra_deg += p.degree() as i64 * d;
        extra_q += p.degree() as i64 * w;
    }
    let mut qpoly: BTreeMap<i64, R> = BTreeMap::new();
    for (e, c) in &rs.numerator.terms {
        let (d, w) = weight(e);
        let entry = qpoly.entry(d + extra_deg).or_insert_with(R::zero);
        *entry = entry.add(&c.mul(&qp(w + extra_q)));
    }
    // Denominator: monomial times the cleared factors.
    let (md, mw) = weight(&rs.monomial);
    let mut ppoly: BTreeMap<i64, R> = BTreeMap::new();
    ppoly.insert(md, qp(mw));
    for (p, v) in &rs.denom_factors {
        let (d, w) = weight(v);
        let n = p.degree() as i64;
        let mut next: BTreeMap<i64, R> = BTreeMap::new();
        for (deg0, c0) in &ppoly {
            for (i, a) in p.coeffs.iter().enumerate() {
                let dd = deg0 + (n - i as i64) * d;
                let cc = c0.mul(a).mul(&qp((n - i as i64) * w));
                let entry = next.entry(dd).or_insert_with(R::zero);
                *entry = entry.add(&cc);
            }
        }
        next.retain(|_, c| !c.is_zero());
        ppoly = next;
    }
    qpoly.retain(|_, c| !c.is_zero());
    // Cancel the common power of S and normalize P's trailing coefficient.
    let qmin = qpoly.keys().next().copied().unwrap_or(0);
    let pmin = ppoly.keys().next().copied().unwrap_or(0);
    let cancel = qmin.min(pmin);
    let to_vec = |m: &BTreeMap<i64, R>| -> Vec<R> {
        let hi = m.keys().next_back().copied().unwrap_or(cancel);
        let mut v = vec![R::zero(); (hi - cancel + 1) as usize];
        for (d, c) in m {
            v[(d - cancel) as usize] = c.clone();
        }
        v
    };
    let mut qv = to_vec(&qpoly);
    let mut pv = to_vec(&ppoly);
    if let Some(lead) = pv.iter().find(|c| !c.is_zero()) {
        let inv = lead.inv().expect("unit leading denominator coefficient");
        qv = qv.iter().map(|c| c.mul(&inv)).collect();
        pv = pv.iter().map(|c| c.mul(&inv)).collect();
    }
    while qv.last().map_or(false, |c| c.is_zero()) {
        qv.pop();
    }
    while pv.last().map_or(false, |c| c.is_zero()) {
        pv.pop();
    }
    if qv.is_empty() {
        qv.push(R::zero());
    }
    (qv, pv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduction_verifier::catalog;
    use crate::ring::{rat, rat_int, RatFn, UPoly};
    use crate::root_datum::build_catalog_pair;

    fn geometric(pair: &str, lam: Rat) -> ToyModule<Rat> {
        let pair = build_catalog_pair(pair, None).unwrap();
        let dim = pair.h_rank();
        let coeff = ExpPoly::new(
            dim,
            vec![ExpPolyTerm {
                lambda: rat_int(1),
                chi: vec![lam; dim],
                poly: MultiPoly::constant(dim, rat_int(1)),
            }],
        )
        .unwrap();
        ToyModule::new(pair, coeff).unwrap()
    }

    #[test]
    fn coeff_eval_examples() {
        let lam = rat(1, 5);
        let m = geometric("triple", lam.clone());
        assert_eq!(coeff_eval(&m.coefficient, &[3]).unwrap(), rat(1, 125));
        // p(t) = t, trivial χ, t = 4 → 4λ.
        let mut poly = MultiPoly::zero(1);
        poly.add_term(vec![1], rat_int(1));
        let c = ExpPoly::new(
            1,
            vec![ExpPolyTerm {
                lambda: rat(1, 5),
                chi: vec![rat_int(1)],
                poly,
            }],
        )
        .unwrap();
        assert_eq!(coeff_eval(&c, &[4]).unwrap(), rat(4, 5));
    }

    #[test]
    fn annihilator_examples() {
        let m = geometric("triple", rat(1, 5));
        let p = annihilator(&m, &[1]).unwrap();
        assert_eq!(p.coeffs, vec![rat(-1, 5), rat_int(1)]);
        // t·λᵗ → (X − λ)².
        let mut poly = MultiPoly::zero(1);
        poly.add_term(vec![1], rat_int(1));
        let m2 = ToyModule::new(
            build_catalog_pair("triple", None).unwrap(),
            ExpPoly::new(
                1,
                vec![ExpPolyTerm {
                    lambda: rat_int(1),
                    chi: vec![rat(1, 5)],
                    poly,
                }],
            )
            .unwrap(),
        )
        .unwrap();
        let p2 = annihilator(&m2, &[1]).unwrap();
        assert_eq!(p2.coeffs, vec![rat(1, 25), rat(-2, 5), rat_int(1)]);
        // Annihilation identity: Σ a_i c(t + i·s) = 0.
        for t in -3i64..6 {
            let mut acc = rat_int(0);
            for (i, a) in p2.coeffs.iter().enumerate() {
                acc += a * coeff_eval(&m2.coefficient, &[t + i as i64]).unwrap();
            }
            assert_eq!(acc, rat_int(0));
        }
    }

    #[test]
    fn truncate_examples() {
        let lam = rat(1, 5);
        let m = geometric("triple", lam.clone());
        let f = truncate(&m, &BTreeSet::new(), Sector::None, 2).unwrap();
        let mut want = LaurentPoly::zero(1);
        want.insert(vec![1], lam.clone());
        want.insert(vec![2], &lam * &lam);
        assert_eq!(f, want);
        // Θ_H = Δ_H: the constant c(0).
        let full: BTreeSet<usize> = [0].into();
        let f = truncate(&m, &full, Sector::None, 4).unwrap();
        assert_eq!(f, LaurentPoly::constant(1, rat_int(1)));
    }

    #[test]
    fn reduce_geometric_closed_form() {
        let lam = rat(1, 5);
        let m = geometric("triple", lam.clone());
        let cat = catalog();
        let rs = reduce(&m, &BTreeSet::new(), Sector::None, &cat).unwrap();
        // λT/(1 − λT): numerator λT, one linear factor at shift 1.
        assert_eq!(rs.denom_factors.len(), 1);
        assert_eq!(rs.denom_factors[0].1, vec![1]);
        assert_eq!(rs.denom_factors[0].0.coeffs, vec![-lam.clone(), rat_int(1)]);
        assert_eq!(expand(&rs, 6), truncate(&m, &BTreeSet::new(), Sector::None, 6).unwrap());
    }

    #[test]
    fn reduce_waldspurger_sectors() {
        let pair = build_catalog_pair("waldspurger", None).unwrap();
        let coeff = ExpPoly::new(
            1,
            vec![ExpPolyTerm {
                lambda: rat_int(1),
                chi: vec![rat(1, 3)],
                poly: MultiPoly::constant(1, rat_int(1)),
            }],
        )
        .unwrap();
        let m = ToyModule::new(pair, coeff).unwrap();
        let cat = catalog();
        for sector in [Sector::Plus, Sector::Zero, Sector::Minus] {
            let rs = reduce(&m, &BTreeSet::new(), sector, &cat).unwrap();
            assert_eq!(
                expand(&rs, 8),
                truncate(&m, &BTreeSet::new(), sector, 8).unwrap(),
                "sector {}",
                sector.label()
            );
        }
    }

    #[test]
    fn expand_multiplicativity() {
        // Product of two factors agrees with convolving their expansions.
        let lam = rat(1, 2);
        let mu = rat(1, 3);
        let one = |l: &Rat| RationalSeries {
            nvars: 1,
            numerator: LaurentPoly::constant(1, rat_int(1)),
            monomial: vec![1],
            denom_factors: vec![(
                AnnihilatorPoly::new(vec![-l.clone(), rat_int(1)]).unwrap(),
                vec![1],
            )],
        };
        let a = one(&lam);
        let b = one(&mu);
        let prod = RationalSeries {
            nvars: 1,
            numerator: LaurentPoly::constant(1, rat_int(1)),
            monomial: vec![2],
            denom_factors: vec![
                a.denom_factors[0].clone(),
                b.denom_factors[0].clone(),
            ],
        };
        assert_eq!(
            expand(&prod, 10),
            expand(&a, 10).mul(&expand(&b, 10)).truncated(10)
        );
    }

    #[test]
    fn specialize_examples() {
        let lam = rat(1, 5);
        let m = geometric("triple", lam.clone());
        let cat = catalog();
        let rs = reduce(&m, &BTreeSet::new(), Sector::None, &cat).unwrap();
        let (qv, pv) = specialize(&rs, &rat_int(3), &m.pair.n_exp);
        // λ·3·S / (1 − 3λS) = (3/5)S / (1 − (3/5)S).
        assert_eq!(qv, vec![rat_int(0), rat(3, 5)]);
        assert_eq!(pv, vec![rat_int(1), rat(-3, 5)]);
    }

    #[test]
    fn family_ring_reduce() {
        // λ(u) = u/10 over ℚ(u): reduce, then evaluate, equals evaluating
        // the module first.
        let pair = build_catalog_pair("triple", None).unwrap();
        let lam_u = RatFn::new(UPoly::var().mul(&UPoly::constant(rat(1, 10))), UPoly::constant(rat_int(1)));
        let coeff = ExpPoly::new(
            1,
            vec![ExpPolyTerm {
                lambda: RatFn::one(),
                chi: vec![lam_u.clone()],
                poly: MultiPoly::constant(1, RatFn::one()),
            }],
        )
        .unwrap();
        let m = ToyModule::new(pair, coeff).unwrap();
        let cat = catalog();
        let rs = reduce(&m, &BTreeSet::new(), Sector::None, &cat).unwrap();
        let (qv, pv) = specialize(&rs, &rat_int(3), &m.pair.n_exp);
        for u0 in [rat_int(1), rat_int(2), rat(1, 2)] {
            let lam0 = lam_u.eval(&u0).unwrap();
            let m0 = geometric("triple", lam0.clone());
            let rs0 = reduce(&m0, &BTreeSet::new(), Sector::None, &cat).unwrap();
            let (q0, p0) = specialize(&rs0, &rat_int(3), &m0.pair.n_exp);
            let qe: Vec<Rat> = qv.iter().map(|c| c.eval(&u0).unwrap()).collect();
            let pe: Vec<Rat> = pv.iter().map(|c| c.eval(&u0).unwrap()).collect();
            assert_eq!(qe, q0);
            assert_eq!(pe, p0);
        }
    }

    #[test]
    fn reduce_matches_oracle_on_gl2() {
        let pair = build_catalog_pair("gl", Some(2)).unwrap();
        let coeff = ExpPoly::new(
            2,
            vec![ExpPolyTerm {
                lambda: rat_int(1),
                chi: vec![rat(1, 2), rat(1, 3)],
                poly: MultiPoly::constant(2, rat_int(1)),
            }],
        )
        .unwrap();
        let m = ToyModule::new(pair, coeff).unwrap();
        let cat = catalog();
        for sector in [Sector::Plus, Sector::Zero, Sector::Minus] {
            for theta in [BTreeSet::new(), [0usize].into()] {
                let rs = reduce(&m, &theta, sector, &cat).unwrap();
                assert_eq!(
                    expand(&rs, 10),
                    truncate(&m, &theta, sector, 10).unwrap(),
                    "theta {:?} sector {}",
                    theta,
                    sector.label()
                );
            }
        }
    }
}
