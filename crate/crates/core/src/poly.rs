//! Exact sparse multivariate polynomials and the Nullstellensatz polynomial
//!
//! `f(x) = ∏_{i<j} (x_i − x_j)(x_i − x_j + r_i − r_j) · ∏_{i≠j} (x_i − x_j − r_j)`
//!
//! whose nonzero evaluations over `F_p` are exactly the special services in
//! `Z_p`.

use std::collections::hash_map::Entry;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::group::{is_prime, GroupSpec};
use crate::service::{ServiceTriple, SpecialService};

/// Variables per monomial.
pub const MAX_VARS: usize = 16;
/// Largest exponent of a single variable.
pub const MAX_EXPONENT: u32 = 255;
/// Largest `m` for [`build_f`] with symbolic requests (`2m` variables).
pub const MAX_M_SYMBOLIC: usize = 4;
/// Largest `m` for [`build_f`] with concrete requests.
pub const MAX_M_CONCRETE: usize = 5;
/// Largest `∏|S_i|` scanned by [`find_nonzero_evaluation`].
pub const EVALUATION_BUDGET: u64 = 10_000_000;

/// Exponent vector packed one byte per variable, variable 0 in the most
/// significant byte, so that the derived order is lexicographic.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Monomial(u128);

impl Monomial {
    pub const ONE: Monomial = Monomial(0);

    pub fn new(exponents: &[u32]) -> Result<Self> {
        if exponents.len() > MAX_VARS {
            return Err(Error::InvalidInput(format!(
                "{} variables exceed the limit of {MAX_VARS}",
                exponents.len()
            )));
        }
        let mut packed = 0u128;
        for (i, &e) in exponents.iter().enumerate() {
            if e > MAX_EXPONENT {
                return Err(Error::InvalidInput(format!("exponent {e} exceeds {MAX_EXPONENT}")));
            }
            packed |= (e as u128) << shift(i);
        }
        Ok(Monomial(packed))
    }

    pub fn var(i: usize) -> Self {
        assert!(i < MAX_VARS);
        Monomial(1 << shift(i))
    }

    #[inline]
    pub fn exponent(self, i: usize) -> u32 {
        ((self.0 >> shift(i)) & 0xff) as u32
    }

    pub fn exponents(self, nvars: usize) -> Vec<u32> {
        (0..nvars).map(|i| self.exponent(i)).collect()
    }

    pub fn degree(self) -> u32 {
        self.0.to_be_bytes().iter().map(|&b| b as u32).sum()
    }

    /// Degree in the variables `0..n`.
    pub fn degree_in_first(self, n: usize) -> u32 {
        (0..n).map(|i| self.exponent(i)).sum()
    }

    /// Product; callers guarantee no exponent exceeds [`MAX_EXPONENT`].
    #[inline]
    fn mul(self, other: Monomial) -> Monomial {
        Monomial(self.0 + other.0)
    }

    fn without(self, i: usize) -> Monomial {
        Monomial(self.0 & !(0xff << shift(i)))
    }

    fn max_exponent(self) -> u32 {
        self.0.to_be_bytes().iter().map(|&b| b as u32).max().unwrap_or(0)
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = (0..MAX_VARS).rev().find(|&i| self.exponent(i) != 0).map_or(0, |i| i + 1);
        write!(f, "Monomial{:?}", self.exponents(n))
    }
}

#[inline]
fn shift(i: usize) -> u32 {
    (8 * (MAX_VARS - 1 - i)) as u32
}

fn check_arity(nvars: usize) -> Result<()> {
    if nvars > MAX_VARS {
        return Err(Error::InvalidInput(format!("{nvars} variables exceed the limit of {MAX_VARS}")));
    }
    Ok(())
}

fn max_exponent_of<'a>(monomials: impl Iterator<Item = &'a Monomial>) -> u32 {
    monomials.map(|m| m.max_exponent()).max().unwrap_or(0)
}

fn fmt_monomial(f: &mut fmt::Formatter<'_>, m: Monomial, nvars: usize, names: &dyn Fn(usize) -> String) -> fmt::Result {
    let mut first = true;
    for i in 0..nvars {
        let e = m.exponent(i);
        if e == 0 {
            continue;
        }
        if !first {
            write!(f, "*")?;
        }
        first = false;
        write!(f, "{}", names(i))?;
        if e > 1 {
            write!(f, "^{e}")?;
        }
    }
    if first {
        write!(f, "1")?;
    }
    Ok(())
}

fn default_name(i: usize) -> String {
    format!("v{}", i + 1)
}

/// Polynomial over the integers in `nvars` variables. Zero coefficients are
/// never stored.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SparsePolynomial {
    nvars: usize,
    terms: FxHashMap<Monomial, BigInt>,
}

impl SparsePolynomial {
    pub fn zero(nvars: usize) -> Result<Self> {
        check_arity(nvars)?;
        Ok(SparsePolynomial {
            nvars,
            terms: FxHashMap::default(),
        })
    }

    pub fn constant(nvars: usize, c: impl Into<BigInt>) -> Result<Self> {
        let mut p = Self::zero(nvars)?;
        p.add_term(Monomial::ONE, c.into());
        Ok(p)
    }

    pub fn one(nvars: usize) -> Result<Self> {
        Self::constant(nvars, 1)
    }

    pub fn var(nvars: usize, i: usize) -> Result<Self> {
        if i >= nvars {
            return Err(Error::InvalidInput(format!("variable {i} out of range for {nvars} variables")));
        }
        let mut p = Self::zero(nvars)?;
        p.add_term(Monomial::var(i), BigInt::one());
        Ok(p)
    }

    /// `constant + Σ c_i · v_i`.
    pub fn linear(nvars: usize, coeffs: &[(usize, i64)], constant: impl Into<BigInt>) -> Result<Self> {
        let mut p = Self::constant(nvars, constant)?;
        for &(i, c) in coeffs {
            if i >= nvars {
                return Err(Error::InvalidInput(format!("variable {i} out of range for {nvars} variables")));
            }
            p.add_term(Monomial::var(i), BigInt::from(c));
        }
        Ok(p)
    }

    pub fn from_terms(nvars: usize, terms: impl IntoIterator<Item = (Vec<u32>, BigInt)>) -> Result<Self> {
        let mut p = Self::zero(nvars)?;
        for (e, c) in terms {
            if e.len() != nvars {
                return Err(Error::DimensionMismatch {
                    expected: nvars,
                    found: e.len(),
                });
            }
            p.add_term(Monomial::new(&e)?, c);
        }
        Ok(p)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigInt)> {
        self.terms.iter()
    }

    /// Terms in decreasing lexicographic order of exponent vectors.
    pub fn sorted_terms(&self) -> Vec<(Vec<u32>, BigInt)> {
        let mut v: Vec<_> = self.terms.iter().collect();
        v.sort_by(|a, b| b.0.cmp(a.0));
        v.into_iter().map(|(m, c)| (m.exponents(self.nvars), c.clone())).collect()
    }

    fn add_term(&mut self, m: Monomial, c: BigInt) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
            Entry::Vacant(e) => {
                e.insert(c);
            }
        }
    }

    /// Coefficient of the monomial with the given exponents (0 if absent).
    pub fn coefficient(&self, exponents: &[u32]) -> Result<BigInt> {
        if exponents.len() != self.nvars {
            return Err(Error::DimensionMismatch {
                expected: self.nvars,
                found: exponents.len(),
            });
        }
        let m = Monomial::new(exponents)?;
        Ok(self.terms.get(&m).cloned().unwrap_or_default())
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|m| m.degree()).max()
    }

    /// Largest degree in the variables `0..n`; `None` for zero.
    pub fn degree_in_first(&self, n: usize) -> Option<u32> {
        self.terms.keys().map(|m| m.degree_in_first(n)).max()
    }

    /// Terms of maximal degree in the variables `0..n`, as a polynomial in
    /// those `n` variables. Fails if such a term involves a later variable.
    pub fn leading_form_in_first(&self, n: usize) -> Result<SparsePolynomial> {
        let mut out = SparsePolynomial::zero(n)?;
        let Some(d) = self.degree_in_first(n) else {
            return Ok(out);
        };
        for (m, c) in &self.terms {
            if m.degree_in_first(n) != d {
                continue;
            }
            if (n..self.nvars).any(|i| m.exponent(i) != 0) {
                return Err(Error::InvalidInput(
                    "the leading form involves variables outside the leading block".into(),
                ));
            }
            out.add_term(*m, c.clone());
        }
        Ok(out)
    }

    fn check_same_arity(&self, other: &Self) {
        assert_eq!(self.nvars, other.nvars, "polynomials over different variable sets");
    }

    pub fn add(&self, other: &Self) -> Self {
        self.check_same_arity(other);
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(*m, c.clone());
        }
        out
    }

    pub fn neg(&self) -> Self {
        SparsePolynomial {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(m, c)| (*m, -c)).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn scale(&self, k: &BigInt) -> Self {
        let mut out = SparsePolynomial {
            nvars: self.nvars,
            terms: FxHashMap::default(),
        };
        for (m, c) in &self.terms {
            out.add_term(*m, c * k);
        }
        out
    }

    /// Product. Fails if an exponent would exceed [`MAX_EXPONENT`].
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_same_arity(other);
        if max_exponent_of(self.terms.keys()) + max_exponent_of(other.terms.keys()) > MAX_EXPONENT {
            return Err(Error::InvalidInput(format!("product exponent exceeds {MAX_EXPONENT}")));
        }
        let (small, large) = if self.num_terms() <= other.num_terms() { (self, other) } else { (other, self) };
        let mut terms: FxHashMap<Monomial, BigInt> =
            FxHashMap::with_capacity_and_hasher(large.num_terms() * small.num_terms().min(8), Default::default());
        for (ms, cs) in &small.terms {
            for (ml, cl) in &large.terms {
                let c = cs * cl;
                match terms.entry(ms.mul(*ml)) {
                    Entry::Occupied(mut e) => *e.get_mut() += c,
                    Entry::Vacant(e) => {
                        e.insert(c);
                    }
                }
            }
        }
        terms.retain(|_, c| !c.is_zero());
        Ok(SparsePolynomial {
            nvars: self.nvars,
            terms,
        })
    }

    pub fn pow(&self, e: u32) -> Result<Self> {
        let mut out = Self::one(self.nvars)?;
        for _ in 0..e {
            out = out.mul(self)?;
        }
        Ok(out)
    }

    pub fn evaluate(&self, point: &[BigInt]) -> Result<BigInt> {
        if point.len() != self.nvars {
            return Err(Error::DimensionMismatch {
                expected: self.nvars,
                found: point.len(),
            });
        }
        let mut acc = BigInt::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (i, v) in point.iter().enumerate() {
                let e = m.exponent(i);
                if e > 0 {
                    t *= num_traits::pow(v.clone(), e as usize);
                }
            }
            acc += t;
        }
        Ok(acc)
    }

    /// Coefficients reduced into `0..p`.
    pub fn to_mod_p(&self, p: u64) -> Result<PolyModP> {
        let mut out = PolyModP::zero(self.nvars, p)?;
        let bp = BigInt::from(p);
        for (m, c) in &self.terms {
            let r = ((c % &bp) + &bp) % &bp;
            out.add_term(*m, r.to_u64().expect("residue fits"));
        }
        Ok(out)
    }
}

impl fmt::Display for SparsePolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut v: Vec<_> = self.terms.iter().collect();
        v.sort_by(|a, b| b.0.cmp(a.0));
        for (k, (m, c)) in v.into_iter().enumerate() {
            let neg = c.is_negative();
            match (k, neg) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            let a = c.abs();
            if *m == Monomial::ONE {
                write!(f, "{a}")?;
            } else {
                if !a.is_one() {
                    write!(f, "{a}*")?;
                }
                fmt_monomial(f, *m, self.nvars, &default_name)?;
            }
        }
        Ok(())
    }
}

/// Polynomial with coefficients in `F_p`, stored as residues in `0..p`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PolyModP {
    nvars: usize,
    p: u64,
    terms: FxHashMap<Monomial, u64>,
}

impl PolyModP {
    pub fn zero(nvars: usize, p: u64) -> Result<Self> {
        check_arity(nvars)?;
        if !is_prime(p) {
            return Err(Error::InvalidInput(format!("{p} is not prime")));
        }
        if p > u32::MAX as u64 {
            return Err(Error::InvalidInput(format!("modulus {p} exceeds 32 bits")));
        }
        Ok(PolyModP {
            nvars,
            p,
            terms: FxHashMap::default(),
        })
    }

    pub fn one(nvars: usize, p: u64) -> Result<Self> {
        let mut out = Self::zero(nvars, p)?;
        out.add_term(Monomial::ONE, 1);
        Ok(out)
    }

    /// `constant + Σ c_i · v_i` with integer coefficients reduced mod `p`.
    pub fn linear(nvars: usize, p: u64, coeffs: &[(usize, i64)], constant: i64) -> Result<Self> {
        let mut out = Self::zero(nvars, p)?;
        out.add_term(Monomial::ONE, reduce(constant, p));
        for &(i, c) in coeffs {
            if i >= nvars {
                return Err(Error::InvalidInput(format!("variable {i} out of range for {nvars} variables")));
            }
            out.add_term(Monomial::var(i), reduce(c, p));
        }
        Ok(out)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn modulus(&self) -> u64 {
        self.p
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, exponents: &[u32]) -> Result<u64> {
        if exponents.len() != self.nvars {
            return Err(Error::DimensionMismatch {
                expected: self.nvars,
                found: exponents.len(),
            });
        }
        Ok(self.terms.get(&Monomial::new(exponents)?).copied().unwrap_or(0))
    }

    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|m| m.degree()).max()
    }

    pub fn sorted_terms(&self) -> Vec<(Vec<u32>, u64)> {
        let mut v: Vec<_> = self.terms.iter().map(|(m, &c)| (*m, c)).collect();
        v.sort_by_key(|t| std::cmp::Reverse(t.0));
        v.into_iter().map(|(m, c)| (m.exponents(self.nvars), c)).collect()
    }

    fn sorted_terms_packed(&self) -> Vec<(Monomial, u64)> {
        let mut v: Vec<_> = self.terms.iter().map(|(m, &c)| (*m, c)).collect();
        v.sort_unstable();
        v
    }

    fn add_term(&mut self, m: Monomial, c: u64) {
        if c == 0 {
            return;
        }
        let p = self.p;
        match self.terms.entry(m) {
            Entry::Occupied(mut e) => {
                let v = (*e.get() + c) % p;
                if v == 0 {
                    e.remove();
                } else {
                    *e.get_mut() = v;
                }
            }
            Entry::Vacant(e) => {
                e.insert(c);
            }
        }
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        assert_eq!(self.nvars, other.nvars, "polynomials over different variable sets");
        assert_eq!(self.p, other.p, "polynomials over different fields");
        if max_exponent_of(self.terms.keys()) + max_exponent_of(other.terms.keys()) > MAX_EXPONENT {
            return Err(Error::InvalidInput(format!("product exponent exceeds {MAX_EXPONENT}")));
        }
        let p = self.p;
        let (small, large) = if self.num_terms() <= other.num_terms() { (self, other) } else { (other, self) };
        let mut terms: FxHashMap<Monomial, u64> =
            FxHashMap::with_capacity_and_hasher(large.num_terms() * small.num_terms().min(8), Default::default());
        // Residues are below 2^32, so reduce only when a sum could overflow.
        let spill = u64::MAX - (p - 1) * (p - 1);
        for (ms, &cs) in &small.terms {
            for (ml, &cl) in &large.terms {
                let e = terms.entry(ms.mul(*ml)).or_insert(0);
                if *e >= spill {
                    *e %= p;
                }
                *e += cs * cl;
            }
        }
        terms.retain(|_, c| {
            *c %= p;
            *c != 0
        });
        Ok(PolyModP {
            nvars: self.nvars,
            p,
            terms,
        })
    }

    /// Substitutes `v_i = value`, keeping the variable count.
    pub fn substitute(&self, i: usize, value: u64) -> PolyModP {
        let p = self.p;
        let value = value % p;
        let mut powers = vec![1u64];
        let mut out = PolyModP {
            nvars: self.nvars,
            p,
            terms: FxHashMap::with_capacity_and_hasher(self.num_terms(), Default::default()),
        };
        for (m, &c) in &self.terms {
            let e = m.exponent(i) as usize;
            while powers.len() <= e {
                let last = *powers.last().unwrap();
                powers.push(last * value % p);
            }
            out.add_term(m.without(i), c * powers[e] % p);
        }
        out
    }

    pub fn evaluate(&self, point: &[u64]) -> Result<u64> {
        if point.len() != self.nvars {
            return Err(Error::DimensionMismatch {
                expected: self.nvars,
                found: point.len(),
            });
        }
        let p = self.p;
        let mut acc = 0u64;
        for (m, &c) in &self.terms {
            let mut t = c;
            for (i, &v) in point.iter().enumerate() {
                t = t * pow_mod(v % p, m.exponent(i) as u64, p) % p;
            }
            acc = (acc + t) % p;
        }
        Ok(acc)
    }
}

impl fmt::Display for PolyModP {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (e, c)) in self.sorted_terms().into_iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            let m = Monomial::new(&e).expect("stored monomial");
            if m == Monomial::ONE {
                write!(f, "{c}")?;
            } else {
                if c != 1 {
                    write!(f, "{c}*")?;
                }
                fmt_monomial(f, m, self.nvars, &default_name)?;
            }
        }
        write!(f, " (mod {})", self.p)
    }
}

fn reduce(c: i64, p: u64) -> u64 {
    c.rem_euclid(p as i64) as u64
}

fn pow_mod(mut b: u64, mut e: u64, p: u64) -> u64 {
    let mut acc = 1 % p;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * b % p;
        }
        b = b * b % p;
        e >>= 1;
    }
    acc
}

/// How the requests `r_1..r_m` enter [`build_f`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RMode {
    /// Requests are the extra variables `m..2m`.
    Symbolic,
    Concrete(Vec<i64>),
}

/// The linear factors of `f` in multiplication order, each as
/// `(coefficients, constant)` over `x_0..x_{m−1}` and, when symbolic,
/// `r_0..r_{m−1}` at indices `m..2m`.
fn f_factors(m: usize, mode: &RMode) -> Vec<(Vec<(usize, i64)>, i64)> {
    let r = |i: usize| -> (Option<usize>, i64) {
        match mode {
            RMode::Symbolic => (Some(m + i), 0),
            RMode::Concrete(v) => (None, v[i]),
        }
    };
    let mut out = Vec::with_capacity(2 * m * m);
    for i in 0..m {
        for j in i + 1..m {
            out.push((vec![(i, 1), (j, -1)], 0));
            // x_i − x_j + r_i − r_j
            let mut coeffs = vec![(i, 1), (j, -1)];
            let mut constant = 0;
            for (idx, sign) in [(i, 1), (j, -1)] {
                match r(idx) {
                    (Some(v), _) => coeffs.push((v, sign)),
                    (None, c) => constant += sign * c,
                }
            }
            out.push((coeffs, constant));
        }
    }
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            // x_i − x_j − r_j
            let mut coeffs = vec![(i, 1), (j, -1)];
            let mut constant = 0;
            match r(j) {
                (Some(v), _) => coeffs.push((v, -1)),
                (None, c) => constant = -c,
            }
            out.push((coeffs, constant));
        }
    }
    out
}

fn check_f_arity(m: usize, mode: &RMode) -> Result<usize> {
    match mode {
        RMode::Symbolic if m > MAX_M_SYMBOLIC => Err(Error::Precondition(format!(
            "symbolic expansion supports m <= {MAX_M_SYMBOLIC}, got {m}"
        ))),
        RMode::Symbolic => Ok(2 * m),
        RMode::Concrete(_) if m > MAX_M_CONCRETE => Err(Error::Precondition(format!(
            "concrete expansion supports m <= {MAX_M_CONCRETE}, got {m}"
        ))),
        RMode::Concrete(r) if r.len() != m => Err(Error::DimensionMismatch {
            expected: m,
            found: r.len(),
        }),
        RMode::Concrete(_) => Ok(m),
    }
}

/// Fully expanded `f` over the integers. Variables `0..m` are `x_1..x_m`;
/// with [`RMode::Symbolic`] variables `m..2m` are `r_1..r_m`.
pub fn build_f(m: usize, mode: &RMode) -> Result<SparsePolynomial> {
    let nvars = check_f_arity(m, mode)?;
    let mut acc = SparsePolynomial::one(nvars)?;
    for (coeffs, constant) in f_factors(m, mode) {
        acc = acc.mul(&SparsePolynomial::linear(nvars, &coeffs, constant)?)?;
    }
    Ok(acc)
}

/// `f` for concrete requests, expanded directly over `F_p`.
pub fn build_f_mod_p(requests: &[i64], p: u64) -> Result<PolyModP> {
    let m = requests.len();
    let mode = RMode::Concrete(requests.to_vec());
    let nvars = check_f_arity(m, &mode)?;
    let mut acc: Vec<(Monomial, u64)> = vec![(Monomial::ONE, 1 % p)];
    for (coeffs, constant) in f_factors(m, &mode) {
        let factor = PolyModP::linear(nvars, p, &coeffs, constant)?;
        acc = mul_sorted_mod_p(&acc, &factor.sorted_terms_packed(), p);
    }
    let mut out = PolyModP::zero(nvars, p)?;
    out.terms = acc.into_iter().collect();
    Ok(out)
}

/// Product of an ascending term list with a short polynomial. Shifting
/// every key by the same monomial keeps the list sorted, so the product is
/// a merge of one shifted copy per term of `short`.
fn mul_sorted_mod_p(long: &[(Monomial, u64)], short: &[(Monomial, u64)], p: u64) -> Vec<(Monomial, u64)> {
    let mut acc: Vec<(Monomial, u64)> = Vec::new();
    for &(ms, cs) in short {
        let shifted = long.iter().map(|&(m, c)| (m.mul(ms), c * cs % p));
        acc = merge_sorted(&acc, shifted, p);
    }
    acc
}

fn merge_sorted(a: &[(Monomial, u64)], b: impl Iterator<Item = (Monomial, u64)>, p: u64) -> Vec<(Monomial, u64)> {
    let mut out = Vec::with_capacity(a.len() + b.size_hint().0);
    let mut a = a.iter().copied().peekable();
    let mut b = b.peekable();
    loop {
        let next = match (a.peek(), b.peek()) {
            (Some(&(ma, ca)), Some(&(mb, cb))) => match ma.cmp(&mb) {
                std::cmp::Ordering::Less => a.next().unwrap(),
                std::cmp::Ordering::Greater => b.next().unwrap(),
                std::cmp::Ordering::Equal => {
                    a.next();
                    b.next();
                    (ma, (ca + cb) % p)
                }
            },
            (Some(_), None) => a.next().unwrap(),
            (None, Some(_)) => b.next().unwrap(),
            (None, None) => break,
        };
        if next.1 != 0 {
            out.push(next);
        }
    }
    out
}

/// Total degree of `f` in `x`: `2m(m − 1)`.
pub fn f_degree(m: usize) -> u32 {
    (2 * m * m.saturating_sub(1)) as u32
}

/// `∏_{i<j} (x_i − x_j)^e` in `m` variables.
pub fn pairwise_difference_power(m: usize, e: u32) -> Result<SparsePolynomial> {
    let mut acc = SparsePolynomial::one(m)?;
    for i in 0..m {
        for j in i + 1..m {
            let d = SparsePolynomial::linear(m, &[(i, 1), (j, -1)], 0)?;
            for _ in 0..e {
                acc = acc.mul(&d)?;
            }
        }
    }
    Ok(acc)
}

/// Coefficient of `(x_1⋯x_m)^{2(m−1)}` in `∏_{i<j} (x_i − x_j)^4`, by
/// expansion.
pub fn dyson_balanced_coefficient(m: usize) -> Result<BigInt> {
    if m == 0 || m > 5 {
        return Err(Error::Precondition(format!("expansion supports 1 <= m <= 5, got {m}")));
    }
    let poly = pairwise_difference_power(m, 4)?;
    poly.coefficient(&vec![2 * (m as u32 - 1); m])
}

/// `(2m)! / 2^m`.
pub fn dyson_closed_form(m: usize) -> BigInt {
    let fact: BigInt = (1..=2 * m as u64).map(BigInt::from).product();
    fact >> m
}

/// `1·3⋯(2m − 1) · m!`.
pub fn odd_factorial_form(m: usize) -> BigInt {
    let odd: BigInt = (0..m as u64).map(|i| BigInt::from(2 * i + 1)).product();
    let fact: BigInt = (1..=m as u64).map(BigInt::from).product();
    odd * fact
}

/// Whether `(2m)!/2^m` is nonzero in `F_p`, from the odd-factorial form
/// reduced mod `p` (no big integers involved).
pub fn coefficient_mod_p_nonzero(m: usize, p: u64) -> Result<bool> {
    if !is_prime(p) {
        return Err(Error::InvalidInput(format!("{p} is not prime")));
    }
    let mut acc = 1 % p;
    for i in 0..m as u64 {
        acc = acc * ((2 * i + 1) % p) % p;
    }
    for i in 1..=m as u64 {
        acc = acc * (i % p) % p;
    }
    Ok(acc != 0)
}

/// Expansion of `∏_{i<j} (x_i − x_j)`.
pub fn vandermonde_expand(m: usize) -> Result<SparsePolynomial> {
    if m > 7 {
        return Err(Error::Precondition(format!("Vandermonde expansion supports m <= 7, got {m}")));
    }
    pairwise_difference_power(m, 1)
}

/// Relation between the top-degree part of `f` and `∏_{i<j} (x_i − x_j)^4`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LeadingFormRelation {
    pub m: usize,
    /// Coefficient of `(x_1⋯x_m)^{2(m−1)}` in `f`.
    pub balanced_in_f: BigInt,
    /// The same coefficient in `∏_{i<j} (x_i − x_j)^4`.
    pub balanced_in_power: BigInt,
    /// `s` with leading form of `f` `= s · ∏_{i<j} (x_i − x_j)^4`, if the
    /// two are proportional by ±1.
    pub sign: Option<i8>,
}

/// Compares the `x`-leading form of the symbolic `f` with
/// `∏_{i<j} (x_i − x_j)^4` term by term.
pub fn leading_form_relation(m: usize) -> Result<LeadingFormRelation> {
    if m == 0 {
        return Err(Error::Precondition("m must be positive".into()));
    }
    let lead = build_f(m, &RMode::Symbolic)?.leading_form_in_first(m)?;
    let power = pairwise_difference_power(m, 4)?;
    let balanced = vec![2 * (m as u32 - 1); m];
    let sign = if lead == power {
        Some(1)
    } else if lead == power.neg() {
        Some(-1)
    } else {
        None
    };
    Ok(LeadingFormRelation {
        m,
        balanced_in_f: lead.coefficient(&balanced)?,
        balanced_in_power: power.coefficient(&balanced)?,
        sign,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Char2Report {
    pub m: usize,
    /// Support of the `x`-leading form of `f` reduced mod 2, decreasing
    /// lexicographic order.
    pub support: Vec<Vec<u32>>,
    /// Whether the support is `{∏ x_{π(i)}^{4(m−i)} : π ∈ S_m}`.
    pub matches_permutation_form: bool,
    /// `4(m − 1) + 1`: the field size from which the Nullstellensatz bound
    /// applies in characteristic 2.
    pub threshold: u64,
}

/// Reduces the `x`-leading form of the symbolic `f` mod 2 and compares its
/// support with the fourth-power Vandermonde pattern.
pub fn char2_leading_form_check(m: usize) -> Result<Char2Report> {
    if m == 0 || m > MAX_M_SYMBOLIC {
        return Err(Error::Precondition(format!(
            "the check supports 1 <= m <= {MAX_M_SYMBOLIC}, got {m}"
        )));
    }
    let lead = build_f(m, &RMode::Symbolic)?.leading_form_in_first(m)?.to_mod_p(2)?;
    let support: Vec<Vec<u32>> = lead.sorted_terms().into_iter().map(|(e, _)| e).collect();
    let mut expected: Vec<Vec<u32>> = permutations(m)
        .into_iter()
        .map(|pi| {
            let mut e = vec![0u32; m];
            for (pos, &var) in pi.iter().enumerate() {
                e[var] = 4 * (m - 1 - pos) as u32;
            }
            e
        })
        .collect();
    expected.sort_by(|a, b| b.cmp(a));
    Ok(Char2Report {
        m,
        matches_permutation_form: support == expected,
        support,
        threshold: 4 * (m as u64 - 1) + 1,
    })
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    heap_permute(n, &mut cur, &mut out);
    out
}

fn heap_permute(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if k <= 1 {
        out.push(a.clone());
        return;
    }
    for i in 0..k {
        heap_permute(k - 1, a, out);
        let j = if k.is_multiple_of(2) { i } else { 0 };
        if i + 1 < k {
            a.swap(j, k - 1);
        }
    }
}

/// Depth-first scan of `S_1 × ⋯ × S_n` for a point where `poly` is
/// nonzero. After each partial substitution the branch is dropped if the
/// remaining polynomial is identically zero. Returns `None` when every
/// point evaluates to zero.
pub fn find_nonzero_evaluation(poly: &PolyModP, sets: &[Vec<u64>]) -> Result<Option<Vec<u64>>> {
    if sets.len() != poly.nvars() {
        return Err(Error::DimensionMismatch {
            expected: poly.nvars(),
            found: sets.len(),
        });
    }
    let size = sets
        .iter()
        .try_fold(1u64, |acc, s| acc.checked_mul(s.len() as u64))
        .unwrap_or(u64::MAX);
    if size > EVALUATION_BUDGET {
        return Err(Error::BudgetExceeded {
            budget: EVALUATION_BUDGET,
        });
    }

    fn go(poly: &PolyModP, sets: &[Vec<u64>], depth: usize, point: &mut Vec<u64>) -> bool {
        if poly.is_zero() {
            return false;
        }
        if depth == sets.len() {
            return true;
        }
        for &s in &sets[depth] {
            point.push(s);
            if go(&poly.substitute(depth, s), sets, depth + 1, point) {
                return true;
            }
            point.pop();
        }
        false
    }

    let mut point = Vec::with_capacity(sets.len());
    Ok(go(poly, sets, 0, &mut point).then_some(point))
}

/// Whether the Nullstellensatz applies with exponents `t`: `Σ t_i` equals
/// the degree, the monomial `∏ x_i^{t_i}` has a nonzero coefficient, and
/// `|S_i| > t_i` for all `i`.
pub fn cn_hypothesis_holds(poly: &PolyModP, t: &[u32], set_sizes: &[usize]) -> Result<bool> {
    if t.len() != poly.nvars() || set_sizes.len() != poly.nvars() {
        return Err(Error::DimensionMismatch {
            expected: poly.nvars(),
            found: t.len().max(set_sizes.len()),
        });
    }
    let Some(d) = poly.degree() else {
        return Ok(false);
    };
    Ok(t.iter().sum::<u32>() == d
        && poly.coefficient(t)? != 0
        && t.iter().zip(set_sizes).all(|(&ti, &s)| s as u64 > ti as u64))
}

/// Reads a point `x` of `F_p^m` as a service for `requests` in `Z_p`.
pub fn decode_special_service(p: u32, requests: &[u64], point: &[u64]) -> Result<SpecialService> {
    if requests.len() != point.len() {
        return Err(Error::DimensionMismatch {
            expected: requests.len(),
            found: point.len(),
        });
    }
    let g = GroupSpec::cyclic(p)?;
    let triples = point
        .iter()
        .zip(requests)
        .map(|(&x, &r)| Ok(ServiceTriple::from_x(&g, g.element(&[x])?, g.element(&[r])?)))
        .collect::<Result<Vec<_>>>()?;
    SpecialService::new(g, triples)
}
