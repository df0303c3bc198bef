//! The binary simplex code `G_k` and serving request sequences with
//! pairwise-disjoint column sets of size one or two.
//!
//! Vectors of `F_2^k` are elements of `Z_2^k` (see [`crate::group`]), so a
//! vector's canonical index is its integer value with position 1 as the most
//! significant bit. Column `i` of `G_k` (1-based) is the vector with value `i`.
//!
//! Requests outside a hyperplane `H = u^⊥` are served by pushing them
//! through a linear map `φ: F_2^k → F_2^{k−1}` that is one-to-one on `H` and
//! on its complement, solving a service (or numbering) problem in
//! `F_2^{k−1}` and lifting `x` back into the complement and `y` into `H`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{GroupElement, GroupSpec};
use crate::report::{VerificationReport, Violation};
use crate::service::{
    build_numbering_with_zero_anchor_stats, build_service_with_stats, BuildStats, ServiceTriple,
};

/// Largest `k` accepted for the simplex code (group enumeration cap).
pub const MAX_K: usize = 20;

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    if k > MAX_K {
        return Err(Error::Precondition(format!("k = {k} exceeds the supported maximum {MAX_K}")));
    }
    Ok(())
}

#[inline]
fn mask(bits: usize) -> u32 {
    if bits >= 32 {
        u32::MAX
    } else {
        (1u32 << bits) - 1
    }
}

/// Inner product over `F_2`.
#[inline]
pub fn dot(a: u32, b: u32) -> u32 {
    (a & b).count_ones() & 1
}

/// Hamming weight of a vector.
#[inline]
pub fn weight(v: GroupElement) -> u32 {
    (v.index() as u32).count_ones()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimplexCode {
    k: usize,
    space: GroupSpec,
}

impl SimplexCode {
    pub fn new(k: usize) -> Result<Self> {
        check_k(k)?;
        Ok(SimplexCode {
            k,
            space: GroupSpec::elementary_2(k)?,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `F_2^k` as a group.
    pub fn space(&self) -> &GroupSpec {
        &self.space
    }

    pub fn len(&self) -> usize {
        (1 << self.k) - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Column `i` (1-based) as a vector.
    pub fn column(&self, i: u64) -> Result<GroupElement> {
        if i == 0 || i > self.len() as u64 {
            return Err(Error::IndexOutOfRange {
                index: i as usize,
                order: self.len() + 1,
            });
        }
        self.space.index_element(i as usize)
    }

    pub fn column_index(&self, v: GroupElement) -> Option<u64> {
        (!v.is_zero() && v.index() < self.space.order()).then_some(v.index() as u64)
    }

    pub fn columns(&self) -> impl Iterator<Item = (u64, GroupElement)> + '_ {
        self.space.enumerate().skip(1).map(|v| (v.index() as u64, v))
    }
}

/// `H = u^⊥ = { h : ⟨h, u⟩ = 0 }` for a nonzero normal `u`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Hyperplane {
    k: usize,
    u: u32,
}

impl Hyperplane {
    pub fn new(k: usize, u: GroupElement) -> Result<Self> {
        check_k(k)?;
        if u.is_zero() {
            return Err(Error::InvalidInput("hyperplane normal u must be nonzero".into()));
        }
        if u.index() >> k != 0 {
            return Err(Error::InvalidInput(format!("u is not a vector of length {k}")));
        }
        Ok(Hyperplane { k, u: u.index() as u32 })
    }

    /// The even-weight vectors (`u` = all ones).
    pub fn even_weight(k: usize) -> Result<Self> {
        check_k(k)?;
        Ok(Hyperplane { k, u: mask(k) })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn normal(&self) -> GroupElement {
        GroupElement::from_index_unchecked(self.u as usize)
    }

    pub fn contains(&self, v: GroupElement) -> bool {
        dot(v.index() as u32, self.u) == 0
    }

    pub fn members(&self) -> impl Iterator<Item = GroupElement> + '_ {
        (0..1usize << self.k)
            .map(GroupElement::from_index_unchecked)
            .filter(|&v| self.contains(v))
    }
}

/// The linear map `φ: F_2^k → F_2^{k−1}` that deletes the pivot coordinate
/// on `H` and satisfies `φ(a + h) = φ(h)` for a fixed `a ∉ H`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PhiMap {
    hyperplane: Hyperplane,
    /// 1-based position of the first coordinate with `u_j = 1`.
    pivot: usize,
    a: u32,
}

impl PhiMap {
    pub fn hyperplane(&self) -> Hyperplane {
        self.hyperplane
    }

    pub fn pivot(&self) -> usize {
        self.pivot
    }

    pub fn coset_representative(&self) -> GroupElement {
        GroupElement::from_index_unchecked(self.a as usize)
    }

    fn shift(&self) -> usize {
        self.hyperplane.k - self.pivot
    }

    fn drop_pivot(&self, v: u32) -> u32 {
        let s = self.shift();
        ((v >> (s + 1)) << s) | (v & mask(s))
    }

    fn insert_pivot(&self, w: u32, bit: u32) -> u32 {
        let s = self.shift();
        ((w >> s) << (s + 1)) | (bit << s) | (w & mask(s))
    }

    /// `φ(v)`.
    pub fn apply(&self, v: GroupElement) -> GroupElement {
        let v = v.index() as u32;
        let h = if dot(v, self.hyperplane.u) == 0 { v } else { v ^ self.a };
        GroupElement::from_index_unchecked(self.drop_pivot(h) as usize)
    }

    /// The unique `h ∈ H` with `φ(h) = w`.
    pub fn lift_into_hyperplane(&self, w: GroupElement) -> GroupElement {
        let v0 = self.insert_pivot(w.index() as u32, 0);
        let bit = dot(v0, self.hyperplane.u);
        GroupElement::from_index_unchecked(self.insert_pivot(w.index() as u32, bit) as usize)
    }

    /// The unique `v ∉ H` with `φ(v) = w`.
    pub fn lift_outside(&self, w: GroupElement) -> GroupElement {
        let h = self.lift_into_hyperplane(w);
        GroupElement::from_index_unchecked((h.index() as u32 ^ self.a) as usize)
    }

    fn check_bijective(&self) -> Result<()> {
        let k = self.hyperplane.k;
        let mut hit_h = vec![false; 1 << (k - 1)];
        let mut hit_out = vec![false; 1 << (k - 1)];
        for v in 0..1usize << k {
            let v = GroupElement::from_index_unchecked(v);
            let seen = if self.hyperplane.contains(v) { &mut hit_h } else { &mut hit_out };
            let w = self.apply(v).index();
            if std::mem::replace(&mut seen[w], true) {
                return Err(Error::Internal(format!("phi is not injective at {w}")));
            }
        }
        Ok(())
    }
}

/// Builds `φ` for `H = u^⊥`; `a` defaults to `e_j` for the pivot `j`.
pub fn build_phi(k: usize, u: GroupElement, a: Option<GroupElement>) -> Result<PhiMap> {
    let hyperplane = Hyperplane::new(k, u)?;
    let u = hyperplane.u;
    let pivot = (1..=k).find(|&j| u >> (k - j) & 1 == 1).expect("u is nonzero");
    let a = match a {
        Some(a) => {
            if a.index() >> k != 0 {
                return Err(Error::InvalidInput(format!("a is not a vector of length {k}")));
            }
            if hyperplane.contains(a) {
                return Err(Error::InvalidInput("coset representative a lies in H".into()));
            }
            a.index() as u32
        }
        None => 1 << (k - pivot),
    };
    let phi = PhiMap { hyperplane, pivot, a };
    if k <= 12 {
        phi.check_bijective()?;
    }
    Ok(phi)
}

/// Column index sets `I_1, …, I_t`, one per request (1-based column indices).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ColumnAssignment {
    pub sets: Vec<Vec<u64>>,
}

impl ColumnAssignment {
    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn singletons(&self) -> usize {
        self.sets.iter().filter(|s| s.len() == 1).count()
    }
}

/// Serving result together with the extension counters of the underlying build.
#[derive(Clone, Debug)]
pub struct Served {
    pub assignment: ColumnAssignment,
    /// Service in `F_2^{k−1}` before lifting.
    pub reduced: Vec<ServiceTriple>,
    pub stats: BuildStats,
}

/// Serves up to `2^{k−1}` requests from the complement of `H = u^⊥`.
pub fn serve_affine_requests(
    k: usize,
    u: GroupElement,
    requests: &[GroupElement],
) -> Result<ColumnAssignment> {
    serve_affine_requests_traced(k, u, requests).map(|s| s.assignment)
}

pub fn serve_affine_requests_traced(
    k: usize,
    u: GroupElement,
    requests: &[GroupElement],
) -> Result<Served> {
    let phi = build_phi(k, u, None)?;
    serve_with_phi(&phi, requests)
}

pub fn serve_with_phi(phi: &PhiMap, requests: &[GroupElement]) -> Result<Served> {
    let h = phi.hyperplane();
    let k = h.k();
    let half = 1usize << (k - 1);
    if requests.len() > half {
        return Err(Error::Precondition(format!(
            "{} requests exceed 2^(k-1) = {half}",
            requests.len()
        )));
    }
    for (i, &r) in requests.iter().enumerate() {
        if r.index() >> k != 0 {
            return Err(Error::InvalidInput(format!("request {i} is not a vector of length {k}")));
        }
        if h.contains(r) {
            return Err(Error::InvalidInput(format!("request {i} lies in the hyperplane H")));
        }
    }
    let reduced: Vec<GroupElement> = requests.iter().map(|&r| phi.apply(r)).collect();
    let (triples, stats) = if k == 1 {
        // F_2^0 is the trivial group: every triple is (0, 0, 0).
        let zero = GroupElement::from_index_unchecked(0);
        let t = ServiceTriple { x: zero, y: zero, r: zero };
        (vec![t; reduced.len()], BuildStats::default())
    } else if reduced.len() < half {
        let g = GroupSpec::elementary_2(k - 1)?;
        let (s, stats) = build_service_with_stats(&g, &reduced)?;
        (s.into_triples(), stats)
    } else {
        let (s, stats) = build_numbering_with_zero_anchor_stats(k - 1, &reduced)?;
        (s.into_triples(), stats)
    };

    let mut sets = Vec::with_capacity(requests.len());
    for (t, &r) in triples.iter().zip(requests) {
        let x = phi.lift_outside(t.x);
        let y = phi.lift_into_hyperplane(t.y);
        if x.index() ^ r.index() != y.index() {
            return Err(Error::Internal("lifted triple does not satisfy x + r = y".into()));
        }
        let (x, y) = (x.index() as u64, y.index() as u64);
        sets.push(match y {
            0 => vec![x],
            _ => vec![x.min(y), x.max(y)],
        });
    }
    Ok(Served {
        assignment: ColumnAssignment { sets },
        reduced: triples,
        stats,
    })
}

/// Serves up to `2^{k−1}` odd-weight requests.
pub fn serve_odd_requests(k: usize, requests: &[GroupElement]) -> Result<ColumnAssignment> {
    serve_odd_requests_traced(k, requests).map(|s| s.assignment)
}

pub fn serve_odd_requests_traced(k: usize, requests: &[GroupElement]) -> Result<Served> {
    check_k(k)?;
    for (i, &r) in requests.iter().enumerate() {
        if r.index() >> k != 0 {
            return Err(Error::InvalidInput(format!("request {i} is not a vector of length {k}")));
        }
        if weight(r).is_multiple_of(2) {
            return Err(Error::InvalidInput(format!("request {i} has even weight")));
        }
    }
    let ones = GroupElement::from_index_unchecked(mask(k) as usize);
    serve_affine_requests_traced(k, ones, requests)
}

/// Serves up to `2^{k−1}` unit-vector requests.
pub fn serve_batch_requests(k: usize, requests: &[GroupElement]) -> Result<ColumnAssignment> {
    check_k(k)?;
    for (i, &r) in requests.iter().enumerate() {
        if r.index() >> k != 0 || weight(r) != 1 {
            return Err(Error::InvalidInput(format!("request {i} is not a unit vector of length {k}")));
        }
    }
    serve_odd_requests(k, requests)
}

/// Checks disjointness, per-set sums, set sizes (`max_size = None` means
/// unbounded) and the request count.
pub fn verify_assignment(
    k: usize,
    requests: &[GroupElement],
    assignment: &ColumnAssignment,
    max_size: Option<usize>,
) -> VerificationReport {
    let mut violations = Vec::new();
    if assignment.len() != requests.len() {
        violations.push(Violation::LengthMismatch {
            expected: requests.len(),
            found: assignment.len(),
        });
    }
    let n_cols: u64 = if (1..=MAX_K).contains(&k) { (1 << k) - 1 } else { 0 };
    let mut owner: std::collections::HashMap<u64, usize> = std::collections::HashMap::new();
    for (i, set) in assignment.sets.iter().enumerate() {
        if set.is_empty() {
            violations.push(Violation::EmptySet { index: i });
        }
        if let Some(max) = max_size {
            if set.len() > max {
                violations.push(Violation::SetTooLarge { index: i, size: set.len(), max });
            }
        }
        let mut sum = 0u64;
        let mut in_range = true;
        for (pos, &c) in set.iter().enumerate() {
            if c == 0 || c > n_cols {
                violations.push(Violation::ColumnOutOfRange { index: i, column: c });
                in_range = false;
                continue;
            }
            if set[..pos].contains(&c) {
                violations.push(Violation::RepeatedColumnInSet { index: i, column: c });
                continue;
            }
            sum ^= c;
            match owner.get(&c) {
                Some(&first) => violations.push(Violation::OverlappingColumn { column: c, first, second: i }),
                None => {
                    owner.insert(c, i);
                }
            }
        }
        if let Some(r) = requests.get(i) {
            if in_range && sum != r.index() as u64 {
                violations.push(Violation::SumMismatch { index: i });
            }
        }
    }
    VerificationReport::from_violations(violations)
}

/// Parses a bit array (position 1 first) into a vector of `F_2^k`.
pub fn vector_from_bits(k: usize, bits: &[u8]) -> Result<GroupElement> {
    if bits.len() != k {
        return Err(Error::DimensionMismatch { expected: k, found: bits.len() });
    }
    let mut v = 0usize;
    for (i, &b) in bits.iter().enumerate() {
        if b > 1 {
            return Err(Error::CoordinateOutOfRange { index: i, value: b as u64, modulus: 2 });
        }
        v = (v << 1) | b as usize;
    }
    Ok(GroupElement::from_index_unchecked(v))
}

pub fn vector_to_bits(k: usize, v: GroupElement) -> Vec<u8> {
    (0..k).map(|i| (v.index() >> (k - 1 - i) & 1) as u8).collect()
}
