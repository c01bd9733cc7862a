//! Coefficient rings for series arithmetic: exact rationals, and the
//! one-parameter family ring modeled as rational functions in `u`.
//!
//! Everything downstream (annihilators, rational series, evaluation at S=1)
//! only needs field semantics: exact +, -, *, and inversion of nonzero
//! elements. Using the fraction field ℚ(u) instead of the bare polynomial
//! ring keeps eigenvalues like u/10 invertible, which is exactly what the
//! family recursion requires; denominators that degenerate at a sample point
//! u₀ surface as an explicit evaluation error, never as a wrong value.

use num::{BigInt, BigRational, Signed};
use std::fmt;

pub type Rat = BigRational;

fn rzero() -> Rat {
    num::Zero::zero()
}

fn rone() -> Rat {
    num::One::one()
}

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> Rat {
    Rat::from(BigInt::from(n))
}

/// Field operations shared by ℚ and ℚ(u).
pub trait Coeff: Clone + PartialEq + fmt::Debug + fmt::Display + Send + Sync + 'static {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    /// Multiplicative inverse; `None` on zero.
    fn inv(&self) -> Option<Self>;
    fn from_rat(r: &Rat) -> Self;
    fn is_unit(&self) -> bool {
        !self.is_zero()
    }
    fn pow_i(&self, e: i64) -> Option<Self> {
        let base = if e < 0 { self.inv()? } else { self.clone() };
        let mut acc = Self::one();
        for _ in 0..e.unsigned_abs() {
            acc = acc.mul(&base);
        }
        Some(acc)
    }
}

impl Coeff for Rat {
    fn zero() -> Self {
        rzero()
    }
    fn one() -> Self {
        rone()
    }
    fn is_zero(&self) -> bool {
        num::Zero::is_zero(self)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn inv(&self) -> Option<Self> {
        if num::Zero::is_zero(self) {
            None
        } else {
            Some(self.recip())
        }
    }
    fn from_rat(r: &Rat) -> Self {
        r.clone()
    }
}

/// Dense univariate polynomial over ℚ in the family variable `u`.
/// Invariant: no trailing zero coefficient (the zero polynomial is empty).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct UPoly(pub Vec<Rat>);

impl UPoly {
    pub fn zero() -> Self {
        UPoly(Vec::new())
    }

    pub fn constant(c: Rat) -> Self {
        let mut p = UPoly(vec![c]);
        p.trim();
        p
    }

    /// The monomial c·u^k.
    pub fn monomial(c: Rat, k: usize) -> Self {
        if num::Zero::is_zero(&c) {
            return Self::zero();
        }
        let mut v = vec![rzero(); k + 1];
        v[k] = c;
        UPoly(v)
    }

    pub fn var() -> Self {
        Self::monomial(rone(), 1)
    }

    fn trim(&mut self) {
        while self.0.last().map_or(false, |c| num::Zero::is_zero(c)) {
            self.0.pop();
        }
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    pub fn add(&self, o: &Self) -> Self {
        let n = self.0.len().max(o.0.len());
        let mut v = vec![rzero(); n];
        for (i, c) in self.0.iter().enumerate() {
            v[i] += c;
        }
        for (i, c) in o.0.iter().enumerate() {
            v[i] += c;
        }
        let mut p = UPoly(v);
        p.trim();
        p
    }

    pub fn neg(&self) -> Self {
        UPoly(self.0.iter().map(|c| -c).collect())
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Self) -> Self {
        if self.is_zero() || o.is_zero() {
            return Self::zero();
        }
        let mut v = vec![rzero(); self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate() {
                v[i + j] += a * b;
            }
        }
        let mut p = UPoly(v);
        p.trim();
        p
    }

    /// Euclidean division: (quotient, remainder).
    pub fn div_rem(&self, d: &Self) -> (Self, Self) {
        assert!(!d.is_zero(), "division by zero polynomial");
        let mut rem = self.clone();
        let mut quo = vec![rzero(); self.0.len().saturating_sub(d.0.len() - 1)];
        let dl = d.0.last().unwrap().clone();
        while !rem.is_zero() && rem.0.len() >= d.0.len() {
            let k = rem.0.len() - d.0.len();
            let c = rem.0.last().unwrap() / &dl;
            quo[k] = c.clone();
            let shifted = Self::monomial(c, k).mul(d);
            rem = rem.sub(&shifted);
        }
        let mut q = UPoly(quo);
        q.trim();
        (q, rem)
    }

    pub fn gcd(&self, o: &Self) -> Self {
        let (mut a, mut b) = (self.clone(), o.clone());
        while !b.is_zero() {
            let (_, r) = a.div_rem(&b);
            a = b;
            b = r;
        }
        // Normalize monic so gcd is canonical.
        if let Some(lead) = a.0.last().cloned() {
            let inv = lead.recip();
            a = UPoly(a.0.iter().map(|c| c * &inv).collect());
        }
        a
    }

    pub fn eval(&self, u: &Rat) -> Rat {
        let mut acc = rzero();
        for c in self.0.iter().rev() {
            acc = acc * u + c;
        }
        acc
    }
}

impl fmt::Display for UPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.0.iter().enumerate().rev() {
            if num::Zero::is_zero(c) {
                continue;
            }
            let mag = c.abs();
            if first {
                if Signed::is_negative(c) {
                    write!(f, "-")?;
                }
                first = false;
            } else if Signed::is_negative(c) {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let coef_is_one = num::One::is_one(&mag) && k > 0;
            if !coef_is_one {
                write!(f, "{}", mag)?;
            }
            if k > 0 {
                if !coef_is_one {
                    write!(f, "*")?;
                }
                if k == 1 {
                    write!(f, "u")?;
                } else {
                    write!(f, "u^{}", k)?;
                }
            }
        }
        Ok(())
    }
}

/// Reduced rational function num/den over ℚ, den monic and nonzero.
#[derive(Clone, Debug)]
pub struct RatFn {
    pub num: UPoly,
    pub den: UPoly,
}

impl RatFn {
    pub fn new(num: UPoly, den: UPoly) -> Self {
        assert!(!den.is_zero(), "zero denominator in rational function");
        let mut r = RatFn { num, den };
        r.reduce();
        r
    }

    pub fn from_poly(p: UPoly) -> Self {
        RatFn {
            num: p,
            den: UPoly::constant(rone()),
        }
    }

    pub fn var() -> Self {
        Self::from_poly(UPoly::var())
    }

    fn reduce(&mut self) {
        if self.num.is_zero() {
            self.den = UPoly::constant(rone());
            return;
        }
        let g = self.num.gcd(&self.den);
        if g.degree() > Some(0) {
            self.num = self.num.div_rem(&g).0;
            self.den = self.den.div_rem(&g).0;
        }
        // Make the denominator monic.
        let lead = self.den.0.last().unwrap().clone();
        if !num::One::is_one(&lead) {
            let inv = lead.recip();
            self.num = UPoly(self.num.0.iter().map(|c| c * &inv).collect());
            self.den = UPoly(self.den.0.iter().map(|c| c * &inv).collect());
        }
    }

    /// Evaluate at u = u₀; `None` when the denominator vanishes there.
    pub fn eval(&self, u0: &Rat) -> Option<Rat> {
        let d = self.den.eval(u0);
        if num::Zero::is_zero(&d) {
            return None;
        }
        Some(self.num.eval(u0) / d)
    }

    /// The element as a polynomial, when the reduced denominator is 1.
    pub fn as_poly(&self) -> Option<&UPoly> {
        if self.den == UPoly::constant(rone()) {
            Some(&self.num)
        } else {
            None
        }
    }
}

impl PartialEq for RatFn {
    fn eq(&self, o: &Self) -> bool {
        // Reduced and monic-denominator forms are canonical.
        self.num == o.num && self.den == o.den
    }
}

impl fmt::Display for RatFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.as_poly().is_some() {
            write!(f, "{}", self.num)
        } else {
            write!(f, "({})/({})", self.num, self.den)
        }
    }
}

impl Coeff for RatFn {
    fn zero() -> Self {
        Self::from_poly(UPoly::zero())
    }
    fn one() -> Self {
        Self::from_poly(UPoly::constant(rone()))
    }
    fn is_zero(&self) -> bool {
        self.num.is_zero()
    }
    fn add(&self, o: &Self) -> Self {
        Self::new(
            self.num.mul(&o.den).add(&o.num.mul(&self.den)),
            self.den.mul(&o.den),
        )
    }
    fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }
    fn mul(&self, o: &Self) -> Self {
        Self::new(self.num.mul(&o.num), self.den.mul(&o.den))
    }
    fn neg(&self) -> Self {
        RatFn {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }
    fn inv(&self) -> Option<Self> {
        if self.is_zero() {
            None
        } else {
            Some(Self::new(self.den.clone(), self.num.clone()))
        }
    }
    fn from_rat(r: &Rat) -> Self {
        Self::from_poly(UPoly::constant(r.clone()))
    }
}
