//! Exact arithmetic in Q and real quadratic fields Q(√d).
//!
//! Elements are stored over the integral basis {1, ω} with ω = √d when
//! d ≡ 2, 3 (mod 4) and ω = (1+√d)/2 when d ≡ 1 (mod 4). In both cases
//! ω² = t·ω + n for small integers (t, n), which is all the multiplication
//! needs. The embedding μ sends √d to the positive root, ν to the negative.

mod class;
mod ideal;
mod units;

pub use class::SearchOutcome;
pub use ideal::{IdealHNF, PrimeIdealData};
pub use units::{unit_image_mod, unit_image_mod_squarefree};

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_rational::Ratio;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::arith;
use crate::error::{Error, Result};

pub type Rational = Ratio<i128>;

/// Multiplication data of the order Z[ω]: ω² = t·ω + n.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Basis {
    pub d: i64,
    pub t: i128,
    pub n: i128,
}

impl Basis {
    pub fn is_rational(&self) -> bool {
        self.d == 1
    }

    /// (ω_μ, ω_ν) as floating point numbers.
    pub fn omega_embeddings(&self) -> (f64, f64) {
        if self.is_rational() {
            return (0.0, 0.0);
        }
        let root = ((self.t * self.t + 4 * self.n) as f64).sqrt();
        let t = self.t as f64;
        ((t + root) / 2.0, (t - root) / 2.0)
    }

    pub(crate) fn mul_int(&self, x: (i128, i128), y: (i128, i128)) -> (i128, i128) {
        let (x1, y1) = x;
        let (x2, y2) = y;
        let yy = y1 * y2;
        (x1 * x2 + self.n * yy, x1 * y2 + x2 * y1 + self.t * yy)
    }

    #[cfg(test)]
    pub(crate) fn checked_mul_int(&self, x: (i128, i128), y: (i128, i128)) -> Option<(i128, i128)> {
        let (x1, y1) = x;
        let (x2, y2) = y;
        let yy = y1.checked_mul(y2)?;
        let a = x1.checked_mul(x2)?.checked_add(self.n.checked_mul(yy)?)?;
        let b = x1.checked_mul(y2)?.checked_add(x2.checked_mul(y1)?)?.checked_add(self.t.checked_mul(yy)?)?;
        Some((a, b))
    }

    pub(crate) fn norm_int(&self, x: (i128, i128)) -> i128 {
        if self.is_rational() {
            return x.0;
        }
        let (a, b) = x;
        a * a + self.t * a * b - self.n * b * b
    }

    pub(crate) fn conj_int(&self, x: (i128, i128)) -> (i128, i128) {
        (x.0 + self.t * x.1, -x.1)
    }
}

/// An element a + b·ω of K with exact rational coordinates.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldElement {
    pub a: Rational,
    pub b: Rational,
    pub basis: Basis,
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) + ({})ω", self.a, self.b)
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.basis.is_rational() {
            write!(f, "{}", self.a)
        } else {
            write!(f, "{} + {}·ω", self.a, self.b)
        }
    }
}

impl FieldElement {
    pub fn from_int(basis: Basis, a: i128, b: i128) -> Self {
        Self { a: Rational::from_integer(a), b: Rational::from_integer(b), basis }
    }

    pub fn one(basis: Basis) -> Self {
        Self::from_int(basis, 1, 0)
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn is_integral(&self) -> bool {
        self.a.is_integer() && self.b.is_integer()
    }

    /// Integer coordinates when the element lies in O_K.
    pub fn to_int(&self) -> Option<(i128, i128)> {
        self.is_integral().then(|| (self.a.to_integer(), self.b.to_integer()))
    }

    pub fn norm(&self) -> Rational {
        if self.basis.is_rational() {
            return self.a;
        }
        let (t, n) = (Rational::from_integer(self.basis.t), Rational::from_integer(self.basis.n));
        self.a * self.a + t * self.a * self.b - n * self.b * self.b
    }

    pub fn trace(&self) -> Rational {
        if self.basis.is_rational() {
            return self.a;
        }
        Rational::from_integer(2) * self.a + Rational::from_integer(self.basis.t) * self.b
    }

    pub fn conj(&self) -> Self {
        Self { a: self.a + Rational::from_integer(self.basis.t) * self.b, b: -self.b, basis: self.basis }
    }

    pub fn inv(&self) -> Option<Self> {
        let nrm = self.norm();
        if nrm.is_zero() {
            return None;
        }
        if self.basis.is_rational() {
            return Some(Self { a: self.a.recip(), b: Rational::zero(), basis: self.basis });
        }
        let c = self.conj();
        Some(Self { a: c.a / nrm, b: c.b / nrm, basis: self.basis })
    }

    pub fn pow(&self, k: i64) -> Option<Self> {
        let base = if k < 0 { self.inv()? } else { self.clone() };
        let mut e = k.unsigned_abs();
        let mut acc = Self::one(self.basis);
        let mut b = base;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &b;
            }
            e >>= 1;
            if e > 0 {
                b = &b * &b;
            }
        }
        Some(acc)
    }

    /// Images under the two real embeddings (μ, ν). For Q both entries agree.
    pub fn embeddings(&self) -> (f64, f64) {
        let a = rat_to_f64(&self.a);
        if self.basis.is_rational() {
            return (a, a);
        }
        let b = rat_to_f64(&self.b);
        let (wm, wn) = self.basis.omega_embeddings();
        (a + b * wm, a + b * wn)
    }
}

pub fn rat_to_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

impl Add for &FieldElement {
    type Output = FieldElement;
    fn add(self, o: &FieldElement) -> FieldElement {
        debug_assert_eq!(self.basis, o.basis);
        FieldElement { a: self.a + o.a, b: self.b + o.b, basis: self.basis }
    }
}

impl Sub for &FieldElement {
    type Output = FieldElement;
    fn sub(self, o: &FieldElement) -> FieldElement {
        debug_assert_eq!(self.basis, o.basis);
        FieldElement { a: self.a - o.a, b: self.b - o.b, basis: self.basis }
    }
}

impl Neg for &FieldElement {
    type Output = FieldElement;
    fn neg(self) -> FieldElement {
        FieldElement { a: -self.a, b: -self.b, basis: self.basis }
    }
}

impl Mul for &FieldElement {
    type Output = FieldElement;
    fn mul(self, o: &FieldElement) -> FieldElement {
        debug_assert_eq!(self.basis, o.basis);
        let (t, n) = (Rational::from_integer(self.basis.t), Rational::from_integer(self.basis.n));
        let bb = self.b * o.b;
        FieldElement { a: self.a * o.a + n * bb, b: self.a * o.b + o.a * self.b + t * bb, basis: self.basis }
    }
}

/// The base field: Q (d = 1) or a real quadratic field Q(√d).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadField {
    pub d: i64,
    pub disc: i64,
    pub basis: Basis,
    pub fund_unit: Option<FieldElement>,
    pub regulator: f64,
    pub class_number: u64,
    pub num_real_places: usize,
    pub roots_of_unity: u64,
}

impl QuadField {
    pub fn new(d: i64) -> Result<Self> {
        if d < 1 {
            return Err(Error::Unsupported(format!("d = {d} < 1 (only Q and real quadratic fields)")));
        }
        if d > 1 && !arith::is_squarefree(d as u64) {
            return Err(Error::NonSquarefree(d));
        }
        if d > 1 && arith::is_square(d as i128) {
            return Err(Error::NonSquarefree(d));
        }
        let (disc, basis) = if d == 1 {
            (1, Basis { d, t: 0, n: 0 })
        } else if d % 4 == 1 {
            (d, Basis { d, t: 1, n: ((d - 1) / 4) as i128 })
        } else {
            (4 * d, Basis { d, t: 0, n: d as i128 })
        };
        let mut field = QuadField {
            d,
            disc,
            basis,
            fund_unit: None,
            regulator: 1.0,
            class_number: 1,
            num_real_places: if d == 1 { 1 } else { 2 },
            roots_of_unity: 2,
        };
        if d > 1 {
            let eps = units::fundamental_unit_cf(&field)?;
            field.regulator = eps.embeddings().0.ln();
            field.fund_unit = Some(eps);
            field.class_number = class::class_number_by_enumeration(&field)?;
        }
        Ok(field)
    }

    pub fn is_rational(&self) -> bool {
        self.d == 1
    }

    pub fn degree(&self) -> usize {
        if self.is_rational() {
            1
        } else {
            2
        }
    }

    pub fn elem(&self, a: i128, b: i128) -> FieldElement {
        assert!(!self.is_rational() || b == 0, "Q has no ω coordinate");
        FieldElement::from_int(self.basis, a, b)
    }

    pub fn elem_q(&self, a: Rational, b: Rational) -> FieldElement {
        FieldElement { a, b, basis: self.basis }
    }

    pub fn one(&self) -> FieldElement {
        FieldElement::one(self.basis)
    }

    pub fn fundamental_unit(&self) -> Result<FieldElement> {
        self.fund_unit.clone().ok_or(Error::NoUnits)
    }

    /// Integral element of K written in terms of √d (used for display).
    pub fn sqrt_d(&self) -> FieldElement {
        if self.basis.t == 1 {
            self.elem(-1, 2)
        } else {
            self.elem(0, 1)
        }
    }

    /// Residue of ζ_K at s = 1: 2^{r1} h R / (w √|D|). Equal to 1 for Q.
    pub fn zeta_residue(&self) -> f64 {
        if self.is_rational() {
            return 1.0;
        }
        4.0 * self.class_number as f64 * self.regulator / (self.roots_of_unity as f64 * (self.disc as f64).sqrt())
    }

    /// c_K = 1 / Res_{s=1} ζ_K(s).
    pub fn c_k(&self) -> f64 {
        1.0 / self.zeta_residue()
    }

    pub fn minkowski_bound(&self) -> f64 {
        if self.is_rational() {
            1.0
        } else {
            (self.disc as f64).sqrt() / 2.0
        }
    }

    pub fn factor_rational_prime(&self, p: u64) -> Result<Vec<PrimeIdealData>> {
        ideal::factor_rational_prime(self, p)
    }

    pub fn class_number(&self) -> u64 {
        self.class_number
    }

    pub fn is_principal(&self, ideal: &IdealHNF) -> Result<Option<FieldElement>> {
        match class::principal_generator(self, ideal, class::DEFAULT_SEARCH_BUDGET)? {
            SearchOutcome::Generator(g) => Ok(Some(g)),
            SearchOutcome::NotPrincipal => Ok(None),
        }
    }

    /// Random integral element with coordinates in [-bound, bound].
    pub fn random_integral<R: rand::Rng>(&self, rng: &mut R, bound: i128) -> FieldElement {
        let a = rng.gen_range(-bound..=bound);
        let b = if self.is_rational() { 0 } else { rng.gen_range(-bound..=bound) };
        self.elem(a, b)
    }

    /// Generators of O_K^×: -1 and, for real quadratic K, ε.
    pub fn unit_group_generators(&self) -> Vec<FieldElement> {
        let mut g = vec![self.elem(-1, 0)];
        if let Some(e) = &self.fund_unit {
            g.push(e.clone());
        }
        g
    }
}

impl PartialEq for QuadField {
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d
    }
}

#[cfg(test)]
pub(crate) fn abs_rat(r: &Rational) -> Rational {
    if num_traits::Signed::is_negative(r) {
        -r
    } else {
        *r
    }
}
