//! Finite abelian groups presented as direct sums of cyclic groups.
//!
//! A [`GroupSpec`] `Z_{n_1} ⊕ … ⊕ Z_{n_d}` enumerates its elements in
//! mixed-radix order with the last coordinate varying fastest, and a
//! [`GroupElement`] is an element's position in that order. For `Z_2^k`
//! this position is the integer value of the bit string (coordinate 1 is
//! the most significant bit), and addition is a plain XOR.
//!
//! The residue-vector view is available through [`GroupSpec::coords`],
//! [`GroupSpec::element`] and the `*_coords` arithmetic.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Default bound on `|G|` for anything that enumerates the group.
pub const DEFAULT_ENUMERATION_CAP: usize = 1 << 20;

/// An element of a [`GroupSpec`], stored as its canonical index.
///
/// Elements only mean something relative to the group that produced them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupElement(u32);

impl GroupElement {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub(crate) fn from_index_unchecked(i: usize) -> Self {
        GroupElement(i as u32)
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GroupSpec {
    orders: Vec<u32>,
    strides: Vec<usize>,
    order: usize,
    elementary_2: bool,
}

impl GroupSpec {
    /// `Z_{orders[0]} ⊕ … ⊕ Z_{orders[d-1]}` with the default enumeration cap.
    pub fn new(orders: Vec<u32>) -> Result<Self> {
        Self::with_cap(orders, DEFAULT_ENUMERATION_CAP)
    }

    pub fn with_cap(orders: Vec<u32>, cap: usize) -> Result<Self> {
        if orders.is_empty() {
            return Err(Error::ParseGroup {
                text: String::new(),
                reason: "a group needs at least one cyclic factor".into(),
            });
        }
        let mut order: u128 = 1;
        for &n in &orders {
            if n < 2 {
                return Err(Error::FactorTooSmall(n as u64));
            }
            order = order.saturating_mul(n as u128);
        }
        if order > cap as u128 {
            return Err(Error::GroupTooLarge { order, cap });
        }
        let order = order as usize;
        let mut strides = vec![1usize; orders.len()];
        for i in (0..orders.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * orders[i + 1] as usize;
        }
        let elementary_2 = orders.iter().all(|&n| n == 2);
        Ok(GroupSpec {
            orders,
            strides,
            order,
            elementary_2,
        })
    }

    pub fn cyclic(n: u32) -> Result<Self> {
        Self::new(vec![n])
    }

    /// `Z_2^k`, the additive group of `F_2^k`.
    pub fn elementary_2(k: usize) -> Result<Self> {
        Self::new(vec![2; k])
    }

    /// Parses `Z<n>`, `Z<n>^<k>` and `x`-joined products such as `Z2xZ4`.
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with_cap(text, DEFAULT_ENUMERATION_CAP)
    }

    pub fn parse_with_cap(text: &str, cap: usize) -> Result<Self> {
        let bad = |reason: &str| Error::ParseGroup {
            text: text.to_string(),
            reason: reason.to_string(),
        };
        let trimmed = text.trim();
        if trimmed.is_empty() {
            return Err(bad("empty group spec"));
        }
        let mut orders = Vec::new();
        for term in trimmed.split('x') {
            let term = term.trim();
            let body = term
                .strip_prefix('Z')
                .ok_or_else(|| bad("each factor must look like Z<n> or Z<n>^<k>"))?;
            let (base, exp) = match body.split_once('^') {
                Some((b, e)) => (b, Some(e)),
                None => (body, None),
            };
            let n: u64 = parse_number(base).ok_or_else(|| bad("factor order is not a number"))?;
            let k: u64 = match exp {
                Some(e) => parse_number(e).ok_or_else(|| bad("exponent is not a number"))?,
                None => 1,
            };
            if k == 0 {
                return Err(bad("exponent must be at least 1"));
            }
            if n < 2 {
                return Err(Error::FactorTooSmall(n));
            }
            if n > u32::MAX as u64 || k > 64 {
                return Err(Error::GroupTooLarge {
                    order: (n as u128).saturating_pow(k as u32),
                    cap,
                });
            }
            orders.extend(std::iter::repeat_n(n as u32, k as usize));
        }
        Self::with_cap(orders, cap)
    }

    pub fn orders(&self) -> &[u32] {
        &self.orders
    }

    /// `|G|`.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.orders.len()
    }

    /// `Some(k)` when the group is presented as `Z_2^k`.
    pub fn elementary_2_dim(&self) -> Option<usize> {
        self.elementary_2.then_some(self.orders.len())
    }

    pub fn is_cyclic_of_prime_order(&self) -> bool {
        self.orders.len() == 1 && is_prime(self.orders[0] as u64)
    }

    #[inline]
    pub fn zero(&self) -> GroupElement {
        GroupElement(0)
    }

    #[inline]
    pub fn add(&self, a: GroupElement, b: GroupElement) -> GroupElement {
        debug_assert!(a.index() < self.order && b.index() < self.order);
        if self.elementary_2 {
            return GroupElement(a.0 ^ b.0);
        }
        if let [n] = self.orders[..] {
            return GroupElement((a.0 + b.0) % n);
        }
        let (mut a, mut b) = (a.index(), b.index());
        let mut out = 0;
        for (&n, &stride) in self.orders.iter().zip(&self.strides).rev() {
            let n = n as usize;
            let digit = (a % n + b % n) % n;
            out += digit * stride;
            a /= n;
            b /= n;
        }
        GroupElement(out as u32)
    }

    #[inline]
    pub fn neg(&self, a: GroupElement) -> GroupElement {
        debug_assert!(a.index() < self.order);
        if self.elementary_2 {
            return a;
        }
        if let [n] = self.orders[..] {
            return GroupElement((n - a.0) % n);
        }
        let mut a = a.index();
        let mut out = 0;
        for (&n, &stride) in self.orders.iter().zip(&self.strides).rev() {
            let n = n as usize;
            out += ((n - a % n) % n) * stride;
            a /= n;
        }
        GroupElement(out as u32)
    }

    #[inline]
    pub fn sub(&self, a: GroupElement, b: GroupElement) -> GroupElement {
        self.add(a, self.neg(b))
    }

    /// All elements in canonical order.
    pub fn enumerate(&self) -> impl ExactSizeIterator<Item = GroupElement> + '_ {
        (0..self.order).map(GroupElement::from_index_unchecked)
    }

    pub fn element_index(&self, a: GroupElement) -> usize {
        a.index()
    }

    pub fn index_element(&self, i: usize) -> Result<GroupElement> {
        if i < self.order {
            Ok(GroupElement::from_index_unchecked(i))
        } else {
            Err(Error::IndexOutOfRange {
                index: i,
                order: self.order,
            })
        }
    }

    /// The residue vector of `a`.
    pub fn coords(&self, a: GroupElement) -> Vec<u32> {
        let mut rest = a.index();
        let mut out = vec![0u32; self.orders.len()];
        for (slot, &n) in out.iter_mut().zip(&self.orders).rev() {
            *slot = (rest % n as usize) as u32;
            rest /= n as usize;
        }
        out
    }

    /// The element with residue vector `coords`; residues must already be reduced.
    pub fn element(&self, coords: &[u64]) -> Result<GroupElement> {
        if coords.len() != self.orders.len() {
            return Err(Error::DimensionMismatch {
                expected: self.orders.len(),
                found: coords.len(),
            });
        }
        let mut index = 0usize;
        for (i, (&c, (&n, &stride))) in coords
            .iter()
            .zip(self.orders.iter().zip(&self.strides))
            .enumerate()
        {
            if c >= n as u64 {
                return Err(Error::CoordinateOutOfRange {
                    index: i,
                    value: c,
                    modulus: n,
                });
            }
            index += c as usize * stride;
        }
        Ok(GroupElement(index as u32))
    }

    /// Componentwise sum of residue vectors.
    pub fn add_coords(&self, a: &[u32], b: &[u32]) -> Result<Vec<u32>> {
        self.check_dim(a)?;
        self.check_dim(b)?;
        Ok(a.iter()
            .zip(b)
            .zip(&self.orders)
            .map(|((&x, &y), &n)| ((x as u64 + y as u64) % n as u64) as u32)
            .collect())
    }

    pub fn neg_coords(&self, a: &[u32]) -> Result<Vec<u32>> {
        self.check_dim(a)?;
        Ok(a.iter()
            .zip(&self.orders)
            .map(|(&x, &n)| (n - x % n) % n)
            .collect())
    }

    pub fn sub_coords(&self, a: &[u32], b: &[u32]) -> Result<Vec<u32>> {
        let nb = self.neg_coords(b)?;
        self.add_coords(a, &nb)
    }

    fn check_dim(&self, a: &[u32]) -> Result<()> {
        if a.len() == self.orders.len() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.orders.len(),
                found: a.len(),
            })
        }
    }

    /// The sum of all elements of the group.
    ///
    /// Coordinate `i` sums to `(|G|/n_i) · n_i(n_i−1)/2 mod n_i`, which is
    /// `n_i/2` exactly when `n_i` is even and `|G|/n_i` is odd.
    pub fn sum_all(&self) -> GroupElement {
        let mut index = 0;
        for (&n, &stride) in self.orders.iter().zip(&self.strides) {
            let n = n as usize;
            let copies = self.order / n;
            if n.is_multiple_of(2) && copies % 2 == 1 {
                index += (n / 2) * stride;
            }
        }
        GroupElement(index as u32)
    }

    pub fn sum<I: IntoIterator<Item = GroupElement>>(&self, items: I) -> GroupElement {
        items.into_iter().fold(self.zero(), |acc, a| self.add(acc, a))
    }
}

impl fmt::Display for GroupSpec {
    /// Canonical text form; runs of equal orders collapse to `Z<n>^<k>`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        let mut i = 0;
        while i < self.orders.len() {
            let n = self.orders[i];
            let run = self.orders[i..].iter().take_while(|&&m| m == n).count();
            if !first {
                f.write_str("x")?;
            }
            first = false;
            if run > 1 {
                write!(f, "Z{n}^{run}")?;
            } else {
                write!(f, "Z{n}")?;
            }
            i += run;
        }
        Ok(())
    }
}

impl FromStr for GroupSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GroupSpec::parse(s)
    }
}

fn parse_number(s: &str) -> Option<u64> {
    let s = s.trim();
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn el(g: &GroupSpec, c: &[u64]) -> GroupElement {
        g.element(c).unwrap()
    }

    #[test]
    fn parse_examples() {
        let g = GroupSpec::parse("Z2^2").unwrap();
        assert_eq!((g.orders(), g.order()), (&[2, 2][..], 4));
        let g = GroupSpec::parse("Z5").unwrap();
        assert_eq!((g.orders(), g.order()), (&[5][..], 5));
        let g = GroupSpec::parse("Z2xZ4").unwrap();
        assert_eq!((g.orders(), g.order()), (&[2, 4][..], 8));
        let g = GroupSpec::parse("Z2^2xZ3").unwrap();
        assert_eq!(g.orders(), &[2, 2, 3]);
    }

    #[test]
    fn parse_rejects_malformed_and_oversized() {
        for text in ["", "Z", "2", "Zx", "Z2^", "Z2^0", "Y3", "Z2xx", "Z-3", "Z2 ^ a"] {
            assert!(GroupSpec::parse(text).is_err(), "{text:?} accepted");
        }
        assert_eq!(GroupSpec::parse("Z1"), Err(Error::FactorTooSmall(1)));
        assert_eq!(GroupSpec::parse("Z0xZ3"), Err(Error::FactorTooSmall(0)));
        assert!(matches!(
            GroupSpec::parse("Z2^21"),
            Err(Error::GroupTooLarge { .. })
        ));
        assert!(GroupSpec::parse("Z2^20").is_ok());
        assert!(GroupSpec::parse_with_cap("Z9", 8).is_err());
    }

    #[test]
    fn display_round_trips() {
        for text in ["Z2^3", "Z6", "Z2xZ4", "Z3xZ2^2xZ5"] {
            assert_eq!(GroupSpec::parse(text).unwrap().to_string(), text);
        }
    }

    #[test]
    fn arithmetic_examples() {
        let g = GroupSpec::parse("Z2^2").unwrap();
        assert_eq!(g.add(el(&g, &[0, 1]), el(&g, &[1, 0])), el(&g, &[1, 1]));
        let g = GroupSpec::cyclic(5).unwrap();
        assert_eq!(g.add(el(&g, &[3]), el(&g, &[4])), el(&g, &[2]));
        assert_eq!(g.neg(el(&g, &[2])), el(&g, &[3]));
        let g = GroupSpec::parse("Z2xZ4").unwrap();
        assert_eq!(g.add(el(&g, &[1, 3]), el(&g, &[1, 2])), el(&g, &[0, 1]));
        assert_eq!(g.sub(el(&g, &[0, 1]), el(&g, &[1, 3])), el(&g, &[1, 2]));
        let g = GroupSpec::elementary_2(3).unwrap();
        assert_eq!(g.neg(el(&g, &[1, 0, 1])), el(&g, &[1, 0, 1]));
    }

    #[test]
    fn coords_api_reports_dimension_errors() {
        let g = GroupSpec::parse("Z2xZ4").unwrap();
        assert_eq!(
            g.add_coords(&[1], &[1, 2]),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        );
        assert!(matches!(
            g.element(&[1, 4]),
            Err(Error::CoordinateOutOfRange { index: 1, .. })
        ));
        assert_eq!(g.sub_coords(&[0, 1], &[1, 3]).unwrap(), vec![1, 2]);
    }

    #[test]
    fn enumeration_is_mixed_radix_last_fastest() {
        let g = GroupSpec::parse("Z2^2").unwrap();
        let all: Vec<_> = g.enumerate().map(|a| g.coords(a)).collect();
        assert_eq!(all, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        let g = GroupSpec::cyclic(3).unwrap();
        assert_eq!(g.element_index(el(&g, &[2])), 2);
        let g = GroupSpec::parse("Z2xZ4").unwrap();
        assert_eq!(g.coords(g.index_element(5).unwrap()), vec![1, 1]);
        assert!(g.index_element(8).is_err());
    }

    #[test]
    fn sum_all_matches_enumeration() {
        for text in ["Z2", "Z3", "Z4", "Z2^2", "Z2^3", "Z6", "Z2xZ4", "Z4xZ2", "Z2xZ3", "Z3xZ3", "Z2xZ6"] {
            let g = GroupSpec::parse(text).unwrap();
            let brute = g.sum(g.enumerate());
            assert_eq!(g.sum_all(), brute, "{text}");
        }
        assert!(GroupSpec::elementary_2(5).unwrap().sum_all().is_zero());
        assert_eq!(GroupSpec::cyclic(4).unwrap().sum_all().index(), 2);
        assert_eq!(GroupSpec::cyclic(3).unwrap().sum_all().index(), 0);
        assert_eq!(GroupSpec::cyclic(2).unwrap().sum_all().index(), 1);
    }

    fn small_groups() -> Vec<GroupSpec> {
        ["Z2", "Z3", "Z4", "Z5", "Z2^2", "Z2^3", "Z6", "Z2xZ4", "Z4xZ2", "Z3xZ3", "Z2xZ3xZ2", "Z8", "Z2^6", "Z4^3", "Z7xZ9"]
            .iter()
            .map(|t| GroupSpec::parse(t).unwrap())
            .filter(|g| g.order() <= 64)
            .collect()
    }

    #[test]
    fn group_axioms_exhaustive_small() {
        for g in small_groups() {
            let z = g.zero();
            for a in g.enumerate() {
                assert_eq!(g.add(a, z), a);
                assert_eq!(g.add(a, g.neg(a)), z);
                for b in g.enumerate() {
                    assert_eq!(g.add(a, b), g.add(b, a));
                    let via_coords = g.add_coords(&g.coords(a), &g.coords(b)).unwrap();
                    assert_eq!(g.coords(g.add(a, b)), via_coords, "{g}");
                    for c in g.enumerate() {
                        assert_eq!(g.add(g.add(a, b), c), g.add(a, g.add(b, c)));
                    }
                }
            }
        }
    }

    #[test]
    fn index_is_bijection() {
        for text in ["Z2^12", "Z4^6", "Z3xZ5xZ7", "Z2xZ4xZ8"] {
            let g = GroupSpec::parse(text).unwrap();
            let mut seen = vec![false; g.order()];
            for i in 0..g.order() {
                let a = g.index_element(i).unwrap();
                let c: Vec<u64> = g.coords(a).into_iter().map(u64::from).collect();
                let back = g.element(&c).unwrap();
                assert_eq!(g.element_index(back), i);
                assert!(!seen[back.index()]);
                seen[back.index()] = true;
            }
        }
    }

    #[test]
    fn packed_path_agrees_with_residue_path() {
        for k in 1..=12 {
            let g = GroupSpec::elementary_2(k).unwrap();
            for a in g.enumerate() {
                let ca = g.coords(a);
                // Bit i of the index is coordinate k-1-i.
                let value = ca.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
                assert_eq!(value, a.index());
                assert_eq!(g.coords(g.neg(a)), g.neg_coords(&ca).unwrap());
                if k <= 7 {
                    for b in g.enumerate() {
                        let sum = g.add_coords(&ca, &g.coords(b)).unwrap();
                        assert_eq!(g.coords(g.add(a, b)), sum);
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn axioms_random(orders in proptest::collection::vec(2u32..9, 1..5), seeds in proptest::collection::vec(any::<u32>(), 3)) {
            let g = GroupSpec::new(orders).unwrap();
            let n = g.order() as u32;
            let [a, b, c] = [seeds[0] % n, seeds[1] % n, seeds[2] % n].map(|i| g.index_element(i as usize).unwrap());
            prop_assert_eq!(g.add(g.add(a, b), c), g.add(a, g.add(b, c)));
            prop_assert_eq!(g.add(a, b), g.add(b, a));
            prop_assert_eq!(g.sub(g.add(a, b), b), a);
            prop_assert_eq!(g.coords(g.add(a, b)), g.add_coords(&g.coords(a), &g.coords(b)).unwrap());
        }
    }
}
