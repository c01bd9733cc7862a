//! Integer models of the split groups, tori, root forms, Weyl elements and
//! the H ↪ G embedding on cocharacter lattices.
//!
//! All cones and series live intrinsically in the cocharacter lattice of the
//! relevant maximal split torus, identified with A(F)/A(𝒪) in additive
//! valuation coordinates: |α(a)| ≤ 1 becomes ⟨α, v(a)⟩ ≥ 0 and |α(a)| < 1
//! becomes ⟨α, v(a)⟩ ≥ 1. Central quotients are realized as genuine quotient
//! lattices via a chosen unimodular complement basis, so every model is a
//! torsion-free ℤ-lattice and all pairings are exact integers.

use crate::linalg;
use crate::ring::Rat;
use num::{BigInt, Zero};
use std::fmt;
use thiserror::Error;

pub type Point = Vec<i64>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RootDatumError {
    #[error("unknown catalog pair `{0}`")]
    UnknownPair(String),
    #[error("unsupported rank parameter {0} for pair `{1}`")]
    UnsupportedRank(u32, String),
    #[error("dimension mismatch: form/point of length {0} vs lattice rank {1}")]
    DimensionMismatch(usize, usize),
    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CocharLattice {
    pub labels: Vec<String>,
}

impl CocharLattice {
    pub fn new(labels: Vec<String>) -> Self {
        CocharLattice { labels }
    }

    pub fn with_prefix(prefix: &str, rank: usize) -> Self {
        CocharLattice {
            labels: (1..=rank).map(|i| format!("{prefix}{i}")).collect(),
        }
    }

    pub fn rank(&self) -> usize {
        self.labels.len()
    }
}

/// An integer linear form on a cocharacter lattice; models the additive
/// valuation of a rational character.
#[derive(Clone, PartialEq, Eq, Debug, Hash, PartialOrd, Ord)]
pub struct LinearForm {
    pub coeffs: Vec<i64>,
}

impl LinearForm {
    pub fn new(coeffs: Vec<i64>) -> Self {
        LinearForm { coeffs }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn neg(&self) -> Self {
        LinearForm::new(self.coeffs.iter().map(|c| -c).collect())
    }

    pub fn add(&self, o: &Self) -> Self {
        LinearForm::new(self.coeffs.iter().zip(&o.coeffs).map(|(a, b)| a + b).collect())
    }

    /// Unchecked dot product; use `pairing` at API boundaries.
    pub fn dot(&self, x: &[i64]) -> i64 {
        debug_assert_eq!(self.coeffs.len(), x.len());
        self.coeffs.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Pullback along a matrix: (self ∘ m)(x) = self(m·x), i.e. coeffs·m.
    pub fn compose(&self, m: &[Vec<i64>]) -> Self {
        let cols = m[0].len();
        LinearForm::new(
            (0..cols)
                .map(|j| self.coeffs.iter().zip(m).map(|(c, row)| c * row[j]).sum())
                .collect(),
        )
    }
}

impl fmt::Display for LinearForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({})",
            self.coeffs
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(",")
        )
    }
}

/// Exact dot product with a dimension check.
pub fn pairing(f: &LinearForm, x: &[i64]) -> Result<i64, RootDatumError> {
    if f.coeffs.len() != x.len() {
        return Err(RootDatumError::DimensionMismatch(f.coeffs.len(), x.len()));
    }
    Ok(f.dot(x))
}

/// Split group shapes whose root data the tool can synthesize.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum GroupSpec {
    GL(u32),
    /// Split special orthogonal group of an n-dimensional quadratic space,
    /// Witt index ⌊n/2⌋, anisotropic kernel of dimension n mod 2.
    SplitSO(u32),
    /// Sp(2m), rank m, with the long root 2t_m.
    Sp(u32),
    Torus(u32),
    Product(Vec<GroupSpec>),
    CentralQuotient {
        inner: Box<GroupSpec>,
        central: Vec<Point>,
    },
}

impl GroupSpec {
    pub fn rank(&self) -> usize {
        match self {
            GroupSpec::GL(n) => *n as usize,
            GroupSpec::SplitSO(n) => (*n as usize) / 2,
            GroupSpec::Sp(two_m) => (*two_m as usize) / 2,
            GroupSpec::Torus(r) => *r as usize,
            GroupSpec::Product(parts) => parts.iter().map(|p| p.rank()).sum(),
            GroupSpec::CentralQuotient { inner, central } => inner.rank() - central.len(),
        }
    }

    fn raw_positive_roots(&self) -> Vec<LinearForm> {
        let r = self.rank();
        let unit = |i: usize| -> Vec<i64> {
            let mut v = vec![0i64; r];
            v[i] = 1;
            v
        };
        match self {
            GroupSpec::GL(n) => {
                let n = *n as usize;
                let mut out = Vec::new();
                for i in 0..n {
                    for j in (i + 1)..n {
                        let mut v = vec![0i64; n];
                        v[i] = 1;
                        v[j] = -1;
                        out.push(LinearForm::new(v));
                    }
                }
                out
            }
            GroupSpec::SplitSO(n) => {
                let odd = n % 2 == 1;
                let mut out = Vec::new();
                for i in 0..r {
                    for j in (i + 1)..r {
                        let mut v = unit(i);
                        v[j] = -1;
                        out.push(LinearForm::new(v));
                        let mut w = unit(i);
                        w[j] = 1;
                        out.push(LinearForm::new(w));
                    }
                }
                if odd {
                    for i in 0..r {
                        out.push(LinearForm::new(unit(i)));
                    }
                }
                out
            }
            GroupSpec::Sp(_) => {
                let mut out = Vec::new();
                for i in 0..r {
                    for j in (i + 1)..r {
                        let mut v = unit(i);
                        v[j] = -1;
                        out.push(LinearForm::new(v));
                        let mut w = unit(i);
                        w[j] = 1;
                        out.push(LinearForm::new(w));
                    }
                    let mut l = unit(i);
                    l[i] = 2;
                    out.push(LinearForm::new(l));
                }
                out
            }
            GroupSpec::Torus(_) => Vec::new(),
            GroupSpec::Product(parts) => {
                let mut out = Vec::new();
                let mut offset = 0usize;
                for p in parts {
                    let pr = p.rank();
                    for f in p.raw_positive_roots() {
                        let mut v = vec![0i64; r];
                        v[offset..offset + pr].copy_from_slice(&f.coeffs);
                        out.push(LinearForm::new(v));
                    }
                    offset += pr;
                }
                out
            }
            GroupSpec::CentralQuotient { .. } => unreachable!("handled by positive_roots"),
        }
    }

    fn raw_simple_roots(&self) -> Vec<LinearForm> {
        let r = self.rank();
        match self {
            GroupSpec::GL(n) => {
                let n = *n as usize;
                (0..n.saturating_sub(1))
                    .map(|i| {
                        let mut v = vec![0i64; n];
                        v[i] = 1;
                        v[i + 1] = -1;
                        LinearForm::new(v)
                    })
                    .collect()
            }
            GroupSpec::SplitSO(n) => {
                let odd = n % 2 == 1;
                let mut out = Vec::new();
                for i in 0..r.saturating_sub(1) {
                    let mut v = vec![0i64; r];
                    v[i] = 1;
                    v[i + 1] = -1;
                    out.push(LinearForm::new(v));
                }
                if r >= 1 && odd {
                    let mut v = vec![0i64; r];
                    v[r - 1] = 1;
                    out.push(LinearForm::new(v));
                } else if r >= 2 {
                    let mut v = vec![0i64; r];
                    v[r - 2] = 1;
                    v[r - 1] = 1;
                    out.push(LinearForm::new(v));
                }
                out
            }
            GroupSpec::Sp(_) => {
                let mut out = Vec::new();
                for i in 0..r.saturating_sub(1) {
                    let mut v = vec![0i64; r];
                    v[i] = 1;
                    v[i + 1] = -1;
                    out.push(LinearForm::new(v));
                }
                if r >= 1 {
                    let mut v = vec![0i64; r];
                    v[r - 1] = 2;
                    out.push(LinearForm::new(v));
                }
                out
            }
            GroupSpec::Torus(_) => Vec::new(),
            GroupSpec::Product(parts) => {
                let mut out = Vec::new();
                let mut offset = 0usize;
                for p in parts {
                    let pr = p.rank();
                    for f in p.raw_simple_roots() {
                        let mut v = vec![0i64; r];
                        v[offset..offset + pr].copy_from_slice(&f.coeffs);
                        out.push(LinearForm::new(v));
                    }
                    offset += pr;
                }
                out
            }
            GroupSpec::CentralQuotient { .. } => unreachable!("handled by simple_roots"),
        }
    }

    pub fn simple_roots(&self) -> Result<Vec<LinearForm>, RootDatumError> {
        match self {
            GroupSpec::CentralQuotient { inner, central } => {
                let model = QuotientModel::new(inner.rank(), central)?;
                inner
                    .simple_roots()?
                    .iter()
                    .map(|f| model.descend_form(f))
                    .collect()
            }
            other => Ok(other.raw_simple_roots()),
        }
    }

    pub fn positive_roots(&self) -> Result<Vec<LinearForm>, RootDatumError> {
        match self {
            GroupSpec::CentralQuotient { inner, central } => {
                let model = QuotientModel::new(inner.rank(), central)?;
                inner
                    .positive_roots()?
                    .iter()
                    .map(|f| model.descend_form(f))
                    .collect()
            }
            other => Ok(other.raw_positive_roots()),
        }
    }

    pub fn all_roots(&self) -> Result<Vec<LinearForm>, RootDatumError> {
        let pos = self.positive_roots()?;
        let mut all = pos.clone();
        all.extend(pos.iter().map(|f| f.neg()));
        Ok(all)
    }
}

/// Quotient of ℤ^n by a saturated central sublattice, with a chosen
/// complement basis made of standard basis vectors.
pub struct QuotientModel {
    pub inner_rank: usize,
    pub central: Vec<Point>,
    /// Indices of the standard basis vectors chosen as complement.
    pub complement: Vec<usize>,
    /// Inverse of the (central | complement) basis matrix, rational.
    basis_inv: Vec<Vec<Rat>>,
}

impl QuotientModel {
    pub fn new(inner_rank: usize, central: &[Point]) -> Result<Self, RootDatumError> {
        let c = central.len();
        if central.iter().any(|v| v.len() != inner_rank) {
            return Err(RootDatumError::InternalInconsistency(
                "central vector dimension mismatch".into(),
            ));
        }
        // Greedily extend the central vectors by standard basis vectors.
        let mut basis: Vec<Point> = central.to_vec();
        let mut complement = Vec::new();
        for i in 0..inner_rank {
            if basis.len() == inner_rank {
                break;
            }
            let mut cand = vec![0i64; inner_rank];
            cand[i] = 1;
            let mut trial = basis.clone();
            trial.push(cand.clone());
            if linalg::rank(&linalg::rat_mat(&trial)) == trial.len() {
                basis.push(cand);
                complement.push(i);
            }
        }
        if basis.len() != inner_rank {
            return Err(RootDatumError::InternalInconsistency(
                "central vectors dependent".into(),
            ));
        }
        // Columns of the basis matrix are central then complement vectors.
        let mat: Vec<Vec<Rat>> = (0..inner_rank)
            .map(|row| {
                basis
                    .iter()
                    .map(|v| Rat::from(BigInt::from(v[row])))
                    .collect()
            })
            .collect();
        let d = linalg::det(&mat);
        let dv = if d.is_integer() {
            d.to_integer()
        } else {
            BigInt::from(0)
        };
        if dv != BigInt::from(1) && dv != BigInt::from(-1) {
            return Err(RootDatumError::InternalInconsistency(format!(
                "central sublattice not saturated or complement not unimodular (det {d})"
            )));
        }
        let basis_inv = linalg::inverse(&mat).ok_or_else(|| {
            RootDatumError::InternalInconsistency("basis matrix singular".into())
        })?;
        let _ = c;
        Ok(QuotientModel {
            inner_rank,
            central: central.to_vec(),
            complement,
            basis_inv,
        })
    }

    pub fn quotient_rank(&self) -> usize {
        self.complement.len()
    }

    /// Push a form that kills the central sublattice down to the quotient.
    pub fn descend_form(&self, f: &LinearForm) -> Result<LinearForm, RootDatumError> {
        for z in &self.central {
            if f.dot(z) != 0 {
                return Err(RootDatumError::InternalInconsistency(format!(
                    "form {f} does not vanish on central vector"
                )));
            }
        }
        Ok(LinearForm::new(
            self.complement.iter().map(|&i| f.coeffs[i]).collect(),
        ))
    }

    /// Coordinates of the class of an inner lattice point in the complement
    /// basis.
    pub fn descend_point(&self, x: &[i64]) -> Point {
        let b: Vec<Rat> = x.iter().map(|&v| Rat::from(BigInt::from(v))).collect();
        let coords: Vec<Rat> = self
            .basis_inv
            .iter()
            .map(|row| row.iter().zip(&b).map(|(a, v)| a * v).sum())
            .collect();
        let c = self.central.len();
        coords[c..]
            .iter()
            .map(|v| {
                assert!(v.is_integer(), "non-integral quotient coordinate");
                i64::try_from(v.to_integer()).expect("coordinate overflow")
            })
            .collect()
    }

    /// Descend an inner-lattice endomorphism that preserves the central
    /// sublattice.
    pub fn descend_matrix(&self, m: &[Vec<i64>]) -> Result<Vec<Vec<i64>>, RootDatumError> {
        for z in &self.central {
            let img = linalg::mat_vec_i64(m, z);
            if self.descend_point(&img).iter().any(|&v| v != 0) {
                return Err(RootDatumError::InternalInconsistency(
                    "matrix does not preserve the central sublattice".into(),
                ));
            }
        }
        // Columns: image of each complement basis vector, descended.
        let q = self.quotient_rank();
        let mut cols = Vec::with_capacity(q);
        for &i in &self.complement {
            let mut e = vec![0i64; self.inner_rank];
            e[i] = 1;
            cols.push(self.descend_point(&linalg::mat_vec_i64(m, &e)));
        }
        Ok((0..q)
            .map(|row| (0..q).map(|col| cols[col][row]).collect())
            .collect())
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct WeylElement {
    pub name: String,
    pub matrix: Vec<Vec<i64>>,
}

impl WeylElement {
    pub fn identity(rank: usize) -> Self {
        WeylElement {
            name: "e".into(),
            matrix: (0..rank)
                .map(|i| (0..rank).map(|j| i64::from(i == j)).collect())
                .collect(),
        }
    }

    pub fn inverse(&self) -> Option<WeylElement> {
        Some(WeylElement {
            name: format!("{}^-1", self.name),
            matrix: linalg::int_inverse(&self.matrix)?,
        })
    }
}

/// Matrix–vector action of a Weyl element on the G-lattice.
pub fn weyl_apply(w: &WeylElement, x: &[i64]) -> Result<Point, RootDatumError> {
    if w.matrix.len() != x.len() {
        return Err(RootDatumError::DimensionMismatch(w.matrix.len(), x.len()));
    }
    Ok(linalg::mat_vec_i64(&w.matrix, x))
}

/// A spherical pair (G, H) at the level of split-torus cocharacter lattices.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SphericalPair {
    pub name: String,
    pub g: GroupSpec,
    pub h: GroupSpec,
    pub g_lattice: CocharLattice,
    pub h_lattice: CocharLattice,
    /// g_rank × h_rank matrix of the embedding on cocharacter lattices.
    pub embed: Vec<Vec<i64>>,
    pub delta_g: Vec<(String, LinearForm)>,
    pub delta_h: Vec<(String, LinearForm)>,
    pub c_h: Option<(String, LinearForm)>,
    /// Modulus exponents N_α, parallel to delta_h.
    pub n_exp: Vec<i64>,
    pub weyl: Vec<WeylElement>,
}

impl SphericalPair {
    pub fn h_rank(&self) -> usize {
        self.h_lattice.rank()
    }

    pub fn g_rank(&self) -> usize {
        self.g_lattice.rank()
    }

    pub fn embed_point(&self, x: &[i64]) -> Point {
        linalg::mat_vec_i64(&self.embed, x)
    }

    pub fn weyl_by_name(&self, name: &str) -> Option<&WeylElement> {
        self.weyl.iter().find(|w| w.name == name)
    }

    pub fn delta_g_index(&self, name: &str) -> Option<usize> {
        self.delta_g.iter().position(|(n, _)| n == name)
    }

    pub fn delta_h_index(&self, name: &str) -> Option<usize> {
        self.delta_h.iter().position(|(n, _)| n == name)
    }

    /// The forms Δ_H ∪ C_H in order; a ℚ-basis of the dual of the H-lattice.
    pub fn basis_forms(&self) -> Vec<&LinearForm> {
        let mut v: Vec<&LinearForm> = self.delta_h.iter().map(|(_, f)| f).collect();
        if let Some((_, b)) = &self.c_h {
            v.push(b);
        }
        v
    }

    /// Valuation coordinates (v_α(x) for α ∈ Δ_H, then v_β(x)).
    pub fn v_coords(&self, x: &[i64]) -> Vec<i64> {
        self.basis_forms().iter().map(|f| f.dot(x)).collect()
    }

    /// The lattice involution that fixes every Δ_H form and negates the C_H
    /// form, i.e. the reflection through the v_β = 0 wall in valuation
    /// coordinates. `None` when the pair has no C_H direction. Integral on
    /// every built-in pair; coefficient evaluation on the minus sector goes
    /// through this map.
    pub fn minus_fold(&self) -> Option<Vec<Vec<i64>>> {
        self.c_h.as_ref()?;
        let forms = self.basis_forms();
        let n = forms.len();
        let b: Vec<Vec<Rat>> = forms
            .iter()
            .map(|f| f.coeffs.iter().map(|&c| Rat::from(BigInt::from(c))).collect())
            .collect();
        let inv = linalg::inverse(&b).expect("basis forms invertible");
        let mut out = vec![vec![0i64; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = Rat::zero();
                for k in 0..n {
                    let sign: i64 = if k + 1 == n { -1 } else { 1 };
                    acc += &inv[i][k] * Rat::from(BigInt::from(sign * forms[k].coeffs[j]));
                }
                assert!(acc.is_integer(), "minus fold is not integral");
                out[i][j] = i64::try_from(acc.to_integer()).expect("fold entry overflow");
            }
        }
        Some(out)
    }

    /// Structural validation; every catalog pair must pass.
    pub fn validate(&self) -> Result<(), RootDatumError> {
        let (gr, hr) = (self.g_rank(), self.h_rank());
        if self.embed.len() != gr || self.embed.iter().any(|r| r.len() != hr) {
            return Err(RootDatumError::InternalInconsistency(
                "embed matrix shape mismatch".into(),
            ));
        }
        // embed injective.
        let cols: Vec<Vec<Rat>> = (0..hr)
            .map(|j| {
                (0..gr)
                    .map(|i| Rat::from(BigInt::from(self.embed[i][j])))
                    .collect()
            })
            .collect();
        if linalg::rank(&cols) != hr {
            return Err(RootDatumError::InternalInconsistency(
                "embed not injective".into(),
            ));
        }
        // Δ_H ∪ C_H is a ℚ-basis of the dual of the H-lattice.
        let forms = self.basis_forms();
        if forms.len() != hr {
            return Err(RootDatumError::InternalInconsistency(format!(
                "Δ_H ∪ C_H has {} forms but H-rank is {}",
                forms.len(),
                hr
            )));
        }
        let fm: Vec<Vec<Rat>> = forms
            .iter()
            .map(|f| f.coeffs.iter().map(|&c| Rat::from(BigInt::from(c))).collect())
            .collect();
        if linalg::det(&fm).is_zero() {
            return Err(RootDatumError::InternalInconsistency(
                "Δ_H ∪ C_H not linearly independent".into(),
            ));
        }
        if self.delta_h.iter().any(|(_, f)| f.dim() != hr)
            || self.delta_g.iter().any(|(_, f)| f.dim() != gr)
        {
            return Err(RootDatumError::InternalInconsistency(
                "root form dimension mismatch".into(),
            ));
        }
        // N_α recomputation.
        let n = modulus_exponents(self)?;
        if n != self.n_exp {
            return Err(RootDatumError::InternalInconsistency(format!(
                "stored nExp {:?} disagrees with recomputation {:?}",
                self.n_exp, n
            )));
        }
        // Weyl elements: unimodular and permuting the G-roots up to sign.
        let g_roots = self.g.all_roots()?;
        for w in &self.weyl {
            if linalg::int_inverse(&w.matrix).is_none() {
                return Err(RootDatumError::InternalInconsistency(format!(
                    "weyl `{}` not unimodular",
                    w.name
                )));
            }
            for (_, f) in &self.delta_g {
                let img = f.compose(&w.matrix);
                if !g_roots.contains(&img) {
                    return Err(RootDatumError::InternalInconsistency(format!(
                        "weyl `{}` maps simple root {f} outside the root system",
                        w.name
                    )));
                }
            }
        }
        if self.weyl.first().map(|w| w.name.as_str()) != Some("e") {
            return Err(RootDatumError::InternalInconsistency(
                "first weyl element must be the identity `e`".into(),
            ));
        }
        Ok(())
    }
}

/// Coefficients N_α of the sum of positive H-roots in the basis Δ_H ∪ C_H.
/// The C_H coefficient must vanish.
pub fn modulus_exponents(pair: &SphericalPair) -> Result<Vec<i64>, RootDatumError> {
    let hr = pair.h_rank();
    let mut total = vec![0i64; hr];
    for f in pair.h.positive_roots()? {
        for (t, c) in total.iter_mut().zip(&f.coeffs) {
            *t += c;
        }
    }
    let forms = pair.basis_forms();
    // Solve Σ_k x_k · form_k = total, i.e. Aᵀ x = total with rows = coords.
    let a: Vec<Vec<Rat>> = (0..hr)
        .map(|coord| {
            forms
                .iter()
                .map(|f| Rat::from(BigInt::from(f.coeffs[coord])))
                .collect()
        })
        .collect();
    let b: Vec<Rat> = total.iter().map(|&v| Rat::from(BigInt::from(v))).collect();
    let x = linalg::solve(&a, &b).ok_or_else(|| {
        RootDatumError::InternalInconsistency("Δ_H ∪ C_H basis singular".into())
    })?;
    let mut out = Vec::new();
    for (k, v) in x.iter().enumerate() {
        if !v.is_integer() {
            return Err(RootDatumError::InternalInconsistency(
                "non-integral modulus exponent".into(),
            ));
        }
        let vi = i64::try_from(v.to_integer()).expect("exponent overflow");
        if k < pair.delta_h.len() {
            if vi <= 0 {
                return Err(RootDatumError::InternalInconsistency(
                    "non-positive modulus exponent".into(),
                ));
            }
            out.push(vi);
        } else if vi != 0 {
            return Err(RootDatumError::InternalInconsistency(
                "sum of positive H-roots does not lie in span of Δ_H".into(),
            ));
        }
    }
    Ok(out)
}

fn identity_matrix(n: usize) -> Vec<Vec<i64>> {
    (0..n)
        .map(|i| (0..n).map(|j| i64::from(i == j)).collect())
        .collect()
}

/// Matrix whose row k picks old coordinate perm[k] (conjugation action
/// sending (t_1,…) to (t_{perm[0]+1},…)) on the first `m` coordinates,
/// identity on the rest.
fn perm_matrix(perm: &[usize], total: usize) -> Vec<Vec<i64>> {
    let mut m = identity_matrix(total);
    for (k, &p) in perm.iter().enumerate() {
        for j in 0..total {
            m[k][j] = i64::from(j == p);
        }
    }
    m
}

fn unit_col(rank: usize, i: usize) -> Vec<i64> {
    let mut v = vec![0i64; rank];
    v[i] = 1;
    v
}

/// Descend an embedding defined between the inner lattices of two central
/// quotients; the upstairs map must send H-central vectors into the span of
/// the G-central vectors.
fn quotient_embed(
    h_model: &QuotientModel,
    g_model: &QuotientModel,
    upstairs: &[Vec<i64>],
) -> Result<Vec<Vec<i64>>, RootDatumError> {
    for z in &h_model.central {
        let img = linalg::mat_vec_i64(upstairs, z);
        if g_model.descend_point(&img).iter().any(|&v| v != 0) {
            return Err(RootDatumError::InternalInconsistency(
                "embedding does not respect central sublattices".into(),
            ));
        }
    }
    let cols: Vec<Point> = h_model
        .complement
        .iter()
        .map(|&i| {
            let e = unit_col(h_model.inner_rank, i);
            g_model.descend_point(&linalg::mat_vec_i64(upstairs, &e))
        })
        .collect();
    let gq = g_model.quotient_rank();
    Ok((0..gq)
        .map(|row| cols.iter().map(|c| c[row]).collect())
        .collect())
}

fn finish_pair(
    name: &str,
    g: GroupSpec,
    h: GroupSpec,
    embed: Vec<Vec<i64>>,
    delta_g_names: Vec<&str>,
    delta_h_names: Vec<&str>,
    c_h: Option<(String, LinearForm)>,
    weyl: Vec<WeylElement>,
) -> Result<SphericalPair, RootDatumError> {
    let dg = g.simple_roots()?;
    let dh = h.simple_roots()?;
    assert_eq!(dg.len(), delta_g_names.len());
    assert_eq!(dh.len(), delta_h_names.len());
    let mut pair = SphericalPair {
        name: name.into(),
        g_lattice: CocharLattice::with_prefix("x", embed.len()),
        h_lattice: CocharLattice::with_prefix("y", embed.first().map_or(0, |r| r.len())),
        g,
        h,
        embed,
        delta_g: delta_g_names
            .into_iter()
            .map(str::to_string)
            .zip(dg)
            .collect(),
        delta_h: delta_h_names
            .into_iter()
            .map(str::to_string)
            .zip(dh)
            .collect(),
        c_h,
        n_exp: Vec::new(),
        weyl,
    };
    pair.n_exp = modulus_exponents(&pair)?;
    pair.validate()?;
    Ok(pair)
}

/// Construct one of the catalog spherical pairs.
///
/// Names: `triple`, `waldspurger`, `gl` (n ∈ {2,3}), `so` (n ∈ {3,4}),
/// `gl4gl2`, `sp6sp4`. The rank parameter is only meaningful for `gl`/`so`.
pub fn build_catalog_pair(name: &str, n: Option<u32>) -> Result<SphericalPair, RootDatumError> {
    match name {
        "triple" => {
            let h_inner = GroupSpec::GL(2);
            let g_inner = GroupSpec::Product(vec![
                GroupSpec::GL(2),
                GroupSpec::GL(2),
                GroupSpec::GL(2),
            ]);
            let h_model = QuotientModel::new(2, &[vec![1, 1]])?;
            let g_model = QuotientModel::new(6, &[vec![1; 6]])?;
            // Diagonal GL2 → GL2³ upstairs.
            let upstairs: Vec<Vec<i64>> = (0..6)
                .map(|row| unit_col(2, row % 2))
                .collect();
            let embed = quotient_embed(&h_model, &g_model, &upstairs)?;
            finish_pair(
                "triple",
                GroupSpec::CentralQuotient {
                    inner: Box::new(g_inner),
                    central: vec![vec![1; 6]],
                },
                GroupSpec::CentralQuotient {
                    inner: Box::new(h_inner),
                    central: vec![vec![1, 1]],
                },
                embed,
                vec!["b1", "b2", "b3"],
                vec!["a1"],
                None,
                vec![WeylElement::identity(5)],
            )
        }
        "waldspurger" => {
            let g = GroupSpec::CentralQuotient {
                inner: Box::new(GroupSpec::GL(2)),
                central: vec![vec![1, 1]],
            };
            let g_model = QuotientModel::new(2, &[vec![1, 1]])?;
            let w = WeylElement {
                name: "w".into(),
                matrix: g_model.descend_matrix(&[vec![0, 1], vec![1, 0]])?,
            };
            finish_pair(
                "waldspurger",
                g,
                GroupSpec::Torus(1),
                vec![vec![1]],
                vec!["a1"],
                vec![],
                Some(("beta".into(), LinearForm::new(vec![1]))),
                vec![WeylElement::identity(1), w],
            )
        }
        "gl" => {
            let n = n.ok_or_else(|| RootDatumError::UnknownPair("gl needs n".into()))? as usize;
            if !(2..=3).contains(&n) {
                return Err(RootDatumError::UnsupportedRank(n as u32, "gl".into()));
            }
            let gr = 2 * n + 1;
            let mut embed = Vec::new();
            for i in 0..n {
                embed.push(unit_col(n, i));
            }
            embed.push(vec![0; n]);
            for i in 0..n {
                embed.push(unit_col(n, i));
            }
            let mut weyl = vec![WeylElement::identity(gr)];
            // w_j inserts t_{n+1} at position j in the first factor.
            for j in 1..=n {
                let mut perm: Vec<usize> = Vec::new();
                for k in 1..=(n + 1) {
                    perm.push(if k < j {
                        k - 1
                    } else if k == j {
                        n
                    } else {
                        k - 2
                    });
                }
                weyl.push(WeylElement {
                    name: format!("w{j}"),
                    matrix: perm_matrix(&perm, gr),
                });
            }
            let mut beta = vec![0i64; n];
            beta[n - 1] = 1;
            let dg_names: Vec<String> = (1..=n)
                .map(|i| format!("b{i}"))
                .chain((1..n).map(|i| format!("a{i}")))
                .collect();
            let dh_names: Vec<String> = (1..n).map(|i| format!("a{i}")).collect();
            finish_pair(
                &format!("gl{n}"),
                GroupSpec::Product(vec![GroupSpec::GL(n as u32 + 1), GroupSpec::GL(n as u32)]),
                GroupSpec::GL(n as u32),
                embed,
                dg_names.iter().map(String::as_str).collect(),
                dh_names.iter().map(String::as_str).collect(),
                Some(("beta".into(), LinearForm::new(beta))),
                weyl,
            )
        }
        "so" => {
            let n = n.ok_or_else(|| RootDatumError::UnknownPair("so needs n".into()))? as usize;
            match n {
                3 => finish_pair(
                    "so3",
                    GroupSpec::Product(vec![GroupSpec::SplitSO(4), GroupSpec::SplitSO(3)]),
                    GroupSpec::SplitSO(3),
                    vec![vec![1], vec![0], vec![1]],
                    vec!["b1", "b2", "a1"],
                    vec!["a1"],
                    None,
                    vec![WeylElement::identity(3)],
                ),
                4 => {
                    let mut wm = identity_matrix(4);
                    wm[1][1] = -1;
                    finish_pair(
                        "so4",
                        GroupSpec::Product(vec![GroupSpec::SplitSO(5), GroupSpec::SplitSO(4)]),
                        GroupSpec::SplitSO(4),
                        vec![
                            vec![1, 0],
                            vec![0, 1],
                            vec![1, 0],
                            vec![0, 1],
                        ],
                        vec!["b1", "b2", "a1", "a2"],
                        vec!["a1", "a2"],
                        None,
                        vec![
                            WeylElement::identity(4),
                            WeylElement {
                                name: "w".into(),
                                matrix: wm,
                            },
                        ],
                    )
                }
                _ => Err(RootDatumError::UnsupportedRank(n as u32, "so".into())),
            }
        }
        "gl4gl2" => {
            let h_model = QuotientModel::new(4, &[vec![1; 4]])?;
            let g_model = QuotientModel::new(6, &[vec![1; 6]])?;
            // (g1, g2) ↦ (diag{g1, g2}, g2) upstairs on torus coordinates.
            let upstairs = vec![
                unit_col(4, 0),
                unit_col(4, 1),
                unit_col(4, 2),
                unit_col(4, 3),
                unit_col(4, 2),
                unit_col(4, 3),
            ];
            let embed = quotient_embed(&h_model, &g_model, &upstairs)?;
            let mut weyl = vec![WeylElement::identity(5)];
            for perm in [
                [1, 2, 3, 4],
                [1, 3, 2, 4],
                [1, 3, 4, 2],
                [3, 1, 2, 4],
                [3, 1, 4, 2],
                [3, 4, 1, 2],
            ] {
                let mut up = identity_matrix(6);
                for (k, &p) in perm.iter().enumerate() {
                    for j in 0..6 {
                        up[k][j] = i64::from(j == p - 1);
                    }
                }
                weyl.push(WeylElement {
                    name: format!("w{}{}{}{}", perm[0], perm[1], perm[2], perm[3]),
                    matrix: g_model.descend_matrix(&up)?,
                });
            }
            // C_H: ((t1,t2),(t3,t4)) ↦ t2/t3, descended.
            let beta = h_model.descend_form(&LinearForm::new(vec![0, 1, -1, 0]))?;
            finish_pair(
                "gl4gl2",
                GroupSpec::CentralQuotient {
                    inner: Box::new(GroupSpec::Product(vec![
                        GroupSpec::GL(4),
                        GroupSpec::GL(2),
                    ])),
                    central: vec![vec![1; 6]],
                },
                GroupSpec::CentralQuotient {
                    inner: Box::new(GroupSpec::Product(vec![
                        GroupSpec::GL(2),
                        GroupSpec::GL(2),
                    ])),
                    central: vec![vec![1; 4]],
                },
                embed,
                vec!["b1", "b2", "b3", "a"],
                vec!["a1", "a2"],
                Some(("beta".into(), beta)),
                weyl,
            )
        }
        "sp6sp4" => {
            let embed = vec![
                vec![0, 0, 1],
                vec![1, 0, 0],
                vec![0, 1, 0],
                vec![1, 0, 0],
                vec![0, 1, 0],
            ];
            let w2 = WeylElement {
                name: "w2".into(),
                matrix: perm_matrix(&[1, 0, 2], 5),
            };
            let w3 = WeylElement {
                name: "w3".into(),
                matrix: perm_matrix(&[1, 2, 0], 5),
            };
            finish_pair(
                "sp6sp4",
                GroupSpec::Product(vec![GroupSpec::Sp(6), GroupSpec::Sp(4)]),
                GroupSpec::Product(vec![GroupSpec::Sp(4), GroupSpec::Sp(2)]),
                embed,
                vec!["g1", "g2", "g3", "b1", "b2"],
                vec!["b1", "b2", "a1"],
                None,
                vec![WeylElement::identity(5), w2, w3],
            )
        }
        other => Err(RootDatumError::UnknownPair(other.into())),
    }
}
