//! Services and special services in a finite abelian group.
//!
//! A service for requests `r_1, …, r_m` is a list of triples `(x_i, y_i, r_i)`
//! with `x_i + r_i = y_i`, the `x_i` pairwise distinct and the `y_i` pairwise
//! distinct. A special service additionally requires every `r_i ≠ 0` and all
//! `2m` values `x_1, …, x_m, y_1, …, y_m` to be pairwise distinct.
//!
//! Services are grown one request at a time by the chain-rotation extension
//! in [`ServiceBuilder::extend`]. Any service of length `m ≤ |G| − 2` can be
//! extended by an arbitrary extra request, so every sequence of at most
//! `|G| − 1` requests has a service.

use serde::{Deserialize, Serialize};

use crate::bitset::BitSet;
use crate::error::{Error, Result};
use crate::group::{GroupElement, GroupSpec};
use crate::report::{VerificationReport, Violation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ServiceTriple {
    pub x: GroupElement,
    pub y: GroupElement,
    pub r: GroupElement,
}

impl ServiceTriple {
    /// The triple `(x, x + r, r)`.
    pub fn from_x(g: &GroupSpec, x: GroupElement, r: GroupElement) -> Self {
        ServiceTriple { x, y: g.add(x, r), r }
    }
}

/// A validated service together with its group.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Service {
    group: GroupSpec,
    triples: Vec<ServiceTriple>,
}

impl Service {
    /// Validates `triples` as a service for their own requests.
    pub fn new(group: GroupSpec, triples: Vec<ServiceTriple>) -> Result<Self> {
        let requests: Vec<_> = triples.iter().map(|t| t.r).collect();
        let report = verify_service(&group, &triples, &requests);
        if !report.valid {
            return Err(Error::InvalidInput(format!(
                "not a service: {:?}",
                report.violations
            )));
        }
        Ok(Service { group, triples })
    }

    pub fn empty(group: GroupSpec) -> Self {
        Service {
            group,
            triples: Vec::new(),
        }
    }

    pub fn group(&self) -> &GroupSpec {
        &self.group
    }

    pub fn triples(&self) -> &[ServiceTriple] {
        &self.triples
    }

    pub fn requests(&self) -> Vec<GroupElement> {
        self.triples.iter().map(|t| t.r).collect()
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn into_triples(self) -> Vec<ServiceTriple> {
        self.triples
    }

    pub fn to_wire(&self) -> Vec<WireTriple> {
        to_wire(&self.group, &self.triples)
    }
}

/// A validated special service together with its group.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpecialService {
    group: GroupSpec,
    triples: Vec<ServiceTriple>,
}

impl SpecialService {
    pub fn new(group: GroupSpec, triples: Vec<ServiceTriple>) -> Result<Self> {
        let requests: Vec<_> = triples.iter().map(|t| t.r).collect();
        let report = verify_special_service(&group, &triples, &requests);
        if !report.valid {
            return Err(Error::InvalidInput(format!(
                "not a special service: {:?}",
                report.violations
            )));
        }
        Ok(SpecialService { group, triples })
    }

    pub fn group(&self) -> &GroupSpec {
        &self.group
    }

    pub fn triples(&self) -> &[ServiceTriple] {
        &self.triples
    }

    pub fn requests(&self) -> Vec<GroupElement> {
        self.triples.iter().map(|t| t.r).collect()
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn into_triples(self) -> Vec<ServiceTriple> {
        self.triples
    }

    /// Every special service is in particular a service.
    pub fn as_service(&self) -> Service {
        Service {
            group: self.group.clone(),
            triples: self.triples.clone(),
        }
    }

    pub fn to_wire(&self) -> Vec<WireTriple> {
        to_wire(&self.group, &self.triples)
    }
}

/// JSON form of a triple: residue vectors for `x`, `y` and `r`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireTriple {
    pub x: Vec<u64>,
    pub y: Vec<u64>,
    pub r: Vec<u64>,
}

fn to_wire(g: &GroupSpec, triples: &[ServiceTriple]) -> Vec<WireTriple> {
    let c = |a| g.coords(a).into_iter().map(u64::from).collect();
    triples
        .iter()
        .map(|t| WireTriple {
            x: c(t.x),
            y: c(t.y),
            r: c(t.r),
        })
        .collect()
}

/// Decodes wire triples without checking any service condition.
pub fn triples_from_wire(g: &GroupSpec, wire: &[WireTriple]) -> Result<Vec<ServiceTriple>> {
    wire.iter()
        .map(|w| {
            Ok(ServiceTriple {
                x: g.element(&w.x)?,
                y: g.element(&w.y)?,
                r: g.element(&w.r)?,
            })
        })
        .collect()
}

fn common_violations(
    g: &GroupSpec,
    triples: &[ServiceTriple],
    requests: &[GroupElement],
    out: &mut Vec<Violation>,
) -> bool {
    if triples.len() != requests.len() {
        out.push(Violation::LengthMismatch {
            expected: requests.len(),
            found: triples.len(),
        });
    }
    let n = g.order();
    let mut in_range = true;
    for (i, t) in triples.iter().enumerate() {
        if t.x.index() >= n || t.y.index() >= n || t.r.index() >= n {
            out.push(Violation::ElementOutOfRange { index: i });
            in_range = false;
            continue;
        }
        if g.add(t.x, t.r) != t.y {
            out.push(Violation::SumMismatch { index: i });
        }
        if let Some(&req) = requests.get(i) {
            if req != t.r {
                out.push(Violation::RequestMismatch { index: i });
            }
        }
    }
    if !in_range {
        return false;
    }
    let mut first_x: Vec<Option<usize>> = vec![None; n];
    let mut first_y: Vec<Option<usize>> = vec![None; n];
    for (i, t) in triples.iter().enumerate() {
        match first_x[t.x.index()] {
            Some(first) => out.push(Violation::DuplicateX { first, second: i }),
            None => first_x[t.x.index()] = Some(i),
        }
        match first_y[t.y.index()] {
            Some(first) => out.push(Violation::DuplicateY { first, second: i }),
            None => first_y[t.y.index()] = Some(i),
        }
    }
    true
}

/// Checks that `triples` is a service for `requests`, in order.
pub fn verify_service(
    g: &GroupSpec,
    triples: &[ServiceTriple],
    requests: &[GroupElement],
) -> VerificationReport {
    let mut violations = Vec::new();
    common_violations(g, triples, requests, &mut violations);
    VerificationReport::from_violations(violations)
}

/// Checks the service conditions plus nonzero requests and `2m` distinct values.
pub fn verify_special_service(
    g: &GroupSpec,
    triples: &[ServiceTriple],
    requests: &[GroupElement],
) -> VerificationReport {
    let mut violations = Vec::new();
    for (i, r) in requests.iter().enumerate() {
        if r.is_zero() {
            violations.push(Violation::ZeroRequest { index: i });
        }
    }
    if common_violations(g, triples, requests, &mut violations) {
        let mut x_at: Vec<Option<usize>> = vec![None; g.order()];
        for (i, t) in triples.iter().enumerate() {
            x_at[t.x.index()].get_or_insert(i);
        }
        for (j, t) in triples.iter().enumerate() {
            if let Some(i) = x_at[t.y.index()] {
                if i != j {
                    violations.push(Violation::XYCollision { first: i, second: j });
                }
            }
        }
    }
    VerificationReport::from_violations(violations)
}

/// Counters accumulated by a [`ServiceBuilder`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct BuildStats {
    pub extensions: u64,
    /// Total number of chain-growth steps over all extensions.
    pub chain_steps: u64,
    /// Number of loop-invariant evaluations performed (all passed).
    pub invariant_checks: u64,
    pub longest_chain: usize,
}

impl BuildStats {
    pub fn merge(&mut self, other: &BuildStats) {
        self.extensions += other.extensions;
        self.chain_steps += other.chain_steps;
        self.invariant_checks += other.invariant_checks;
        self.longest_chain = self.longest_chain.max(other.longest_chain);
    }
}

#[derive(Clone, Copy, Debug)]
struct Slot {
    x: GroupElement,
    y: GroupElement,
    r: GroupElement,
    tag: usize,
}

const NO_SLOT: u32 = u32::MAX;

/// Incremental service construction by chain rotation.
///
/// Triples carry the position of their request in insertion order, so
/// [`ServiceBuilder::finish`] returns them aligned with the requests even
/// though extensions move requests between triples.
#[derive(Clone, Debug)]
pub struct ServiceBuilder<'g> {
    group: &'g GroupSpec,
    slots: Vec<Slot>,
    x_slot: Vec<u32>,
    y_used: BitSet,
    next_tag: usize,
    stats: BuildStats,
}

impl<'g> ServiceBuilder<'g> {
    pub fn new(group: &'g GroupSpec) -> Self {
        ServiceBuilder {
            group,
            slots: Vec::new(),
            x_slot: vec![NO_SLOT; group.order()],
            y_used: BitSet::new(group.order()),
            next_tag: 0,
            stats: BuildStats::default(),
        }
    }

    pub fn from_service(service: &'g Service) -> Self {
        let mut b = Self::new(&service.group);
        for (i, t) in service.triples.iter().enumerate() {
            b.x_slot[t.x.index()] = i as u32;
            b.y_used.insert(t.y.index());
            b.slots.push(Slot {
                x: t.x,
                y: t.y,
                r: t.r,
                tag: i,
            });
        }
        b.next_tag = service.len();
        b
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn stats(&self) -> BuildStats {
        self.stats
    }

    /// Adds request `r0`, rotating requests along a chain of existing
    /// triples. Returns the final chain length `t`.
    ///
    /// With anchors `y_{-1}, y_0` outside the current `y`-set,
    /// `x_0 = y_0 − r_0` and `c = x_0 + y_{-1}`, the chain keeps
    /// `x_j + y_{j−1} = c` and `x_j + r_{j−1} = y_{j−2}`. Each step looks at
    /// `x = y_{t−1} − r_t`: a fresh `x` closes the rotation, an `x` owned by
    /// an untouched triple grows the chain, and an `x` already on the chain
    /// is impossible.
    pub fn extend(&mut self, r0: GroupElement) -> Result<usize> {
        let g = self.group;
        let m = self.slots.len();
        if m + 2 > g.order() {
            return Err(Error::Precondition(format!(
                "a service of length {m} cannot be extended in a group of order {}",
                g.order()
            )));
        }
        let y_m1 = self
            .y_used
            .first_absent_from(0)
            .map(GroupElement::from_index_unchecked)
            .ok_or_else(|| Error::Internal("no free y anchor".into()))?;
        let y_0 = self
            .y_used
            .first_absent_from(y_m1.index() + 1)
            .map(GroupElement::from_index_unchecked)
            .ok_or_else(|| Error::Internal("no second free y anchor".into()))?;
        let x_0 = g.sub(y_0, r0);
        let c = g.add(x_0, y_m1);
        let tag0 = self.next_tag;

        // Chain triple j (1-based) lives in slot j-1.
        let y_at = |slots: &[Slot], j: isize| -> GroupElement {
            match j {
                -1 => y_m1,
                0 => y_0,
                _ => slots[j as usize - 1].y,
            }
        };
        let r_at = |slots: &[Slot], j: usize| -> (GroupElement, usize) {
            if j == 0 {
                (r0, tag0)
            } else {
                (slots[j - 1].r, slots[j - 1].tag)
            }
        };

        let mut t = 0usize;
        loop {
            let x = g.sub(y_at(&self.slots, t as isize - 1), r_at(&self.slots, t).0);
            let owner = self.x_slot[x.index()];
            if owner == NO_SLOT {
                self.rotate(t, x, y_m1, y_0, r0, tag0);
                self.next_tag += 1;
                self.stats.extensions += 1;
                self.stats.chain_steps += t as u64;
                self.stats.longest_chain = self.stats.longest_chain.max(t);
                return Ok(t);
            }
            let pos = owner as usize;
            if pos < t {
                return Err(Error::Internal(format!(
                    "extension reached x = x_{} already on the chain (t = {t})",
                    pos + 1
                )));
            }
            self.swap_slots(pos, t);
            t += 1;
            if t > m {
                return Err(Error::Internal(format!("chain length {t} exceeds m = {m}")));
            }
            let x_t = self.slots[t - 1].x;
            let holds_c = g.add(x_t, y_at(&self.slots, t as isize - 1)) == c;
            let holds_cross = g.add(x_t, r_at(&self.slots, t - 1).0) == y_at(&self.slots, t as isize - 2);
            self.stats.invariant_checks += 1;
            if !(holds_c && holds_cross) {
                return Err(Error::Internal(format!(
                    "chain invariant failed at t = {t} (x_t + y_(t-1) = c: {holds_c}, x_t + r_(t-1) = y_(t-2): {holds_cross})"
                )));
            }
        }
    }

    fn swap_slots(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        self.slots.swap(a, b);
        self.x_slot[self.slots[a].x.index()] = a as u32;
        self.x_slot[self.slots[b].x.index()] = b as u32;
    }

    /// Case 1: chain triple `j` takes `(x_j, y_{j−2}, r_{j−1})` and the fresh
    /// `x` takes `(x, y_{t−1}, r_t)`; `y_t` is released.
    fn rotate(
        &mut self,
        t: usize,
        x: GroupElement,
        y_m1: GroupElement,
        y_0: GroupElement,
        r0: GroupElement,
        tag0: usize,
    ) {
        let y_old = |slots: &[Slot], j: isize| match j {
            -1 => y_m1,
            0 => y_0,
            _ => slots[j as usize - 1].y,
        };
        let r_old = |slots: &[Slot], j: usize| {
            if j == 0 {
                (r0, tag0)
            } else {
                (slots[j - 1].r, slots[j - 1].tag)
            }
        };
        let (r_t, tag_t) = r_old(&self.slots, t);
        let last = Slot {
            x,
            y: y_old(&self.slots, t as isize - 1),
            r: r_t,
            tag: tag_t,
        };
        let released = (t >= 1).then(|| self.slots[t - 1].y);
        // Descending order: slot k reads only slots k-1 and k-2.
        for k in (0..t).rev() {
            let y = y_old(&self.slots, k as isize - 1);
            let (r, tag) = r_old(&self.slots, k);
            let s = &mut self.slots[k];
            s.y = y;
            s.r = r;
            s.tag = tag;
        }
        self.x_slot[x.index()] = self.slots.len() as u32;
        self.slots.push(last);
        self.y_used.insert(y_m1.index());
        if let Some(y_t) = released {
            self.y_used.insert(y_0.index());
            self.y_used.remove(y_t.index());
        }
    }

    /// The service, ordered by request insertion order.
    pub fn finish(self) -> Service {
        let mut slots = self.slots;
        slots.sort_unstable_by_key(|s| s.tag);
        Service {
            group: self.group.clone(),
            triples: slots
                .into_iter()
                .map(|s| ServiceTriple { x: s.x, y: s.y, r: s.r })
                .collect(),
        }
    }
}

/// Extends a service for `r_1, …, r_m` to one for `r_0, r_1, …, r_m`
/// (returned in that order). Requires `m ≤ |G| − 2`.
pub fn extend_service(service: &Service, r0: GroupElement) -> Result<Service> {
    let g = service.group();
    if r0.index() >= g.order() {
        return Err(Error::InvalidInput("request is not an element of the group".into()));
    }
    let mut b = ServiceBuilder::from_service(service);
    b.extend(r0)?;
    let mut out = b.finish();
    out.triples.rotate_right(1);
    Ok(out)
}

/// A service for `requests` by repeated extension from the empty service.
pub fn build_service(g: &GroupSpec, requests: &[GroupElement]) -> Result<Service> {
    build_service_with_stats(g, requests).map(|(s, _)| s)
}

pub fn build_service_with_stats(
    g: &GroupSpec,
    requests: &[GroupElement],
) -> Result<(Service, BuildStats)> {
    if requests.len() >= g.order() {
        return Err(Error::Precondition(format!(
            "{} requests exceed |G| - 1 = {}",
            requests.len(),
            g.order() - 1
        )));
    }
    check_members(g, requests)?;
    let mut b = ServiceBuilder::new(g);
    for &r in requests {
        b.extend(r)?;
    }
    let stats = b.stats();
    Ok((b.finish(), stats))
}

fn check_members(g: &GroupSpec, items: &[GroupElement]) -> Result<()> {
    match items.iter().position(|a| a.index() >= g.order()) {
        Some(i) => Err(Error::InvalidInput(format!("request {i} is not a group element"))),
        None => Ok(()),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FullServiceOutcome {
    /// `x`'s and `y`'s each run through the whole group.
    Service(Service),
    /// The requests do not sum to zero, so no bijective service exists.
    NoSolution { request_sum: GroupElement },
}

/// A service of length `|G|` (both sides bijective), which exists exactly
/// when the requests sum to zero.
pub fn build_full_service(g: &GroupSpec, requests: &[GroupElement]) -> Result<FullServiceOutcome> {
    build_full_service_with_stats(g, requests).map(|(o, _)| o)
}

pub fn build_full_service_with_stats(
    g: &GroupSpec,
    requests: &[GroupElement],
) -> Result<(FullServiceOutcome, BuildStats)> {
    let n = g.order();
    if requests.len() != n {
        return Err(Error::Precondition(format!(
            "a full service needs exactly |G| = {n} requests, got {}",
            requests.len()
        )));
    }
    check_members(g, requests)?;
    let request_sum = g.sum(requests.iter().copied());
    if !request_sum.is_zero() {
        return Ok((FullServiceOutcome::NoSolution { request_sum }, BuildStats::default()));
    }
    let (head, stats) = build_service_with_stats(g, &requests[..n - 1])?;
    let total = g.sum_all();
    let x_n = g.sub(total, g.sum(head.triples.iter().map(|t| t.x)));
    let y_n = g.sub(total, g.sum(head.triples.iter().map(|t| t.y)));
    let r_n = requests[n - 1];
    if g.add(x_n, r_n) != y_n {
        return Err(Error::Internal("completed triple does not satisfy x + r = y".into()));
    }
    let mut triples = head.triples;
    triples.push(ServiceTriple { x: x_n, y: y_n, r: r_n });
    Ok((
        FullServiceOutcome::Service(Service {
            group: g.clone(),
            triples,
        }),
        stats,
    ))
}

/// Shifts every `x` and `y` by `a`; requests are unchanged.
pub fn translate_service(service: &Service, a: GroupElement) -> Service {
    let g = &service.group;
    Service {
        group: g.clone(),
        triples: translate_triples(g, &service.triples, a),
    }
}

pub(crate) fn translate_triples(
    g: &GroupSpec,
    triples: &[ServiceTriple],
    a: GroupElement,
) -> Vec<ServiceTriple> {
    triples
        .iter()
        .map(|t| ServiceTriple {
            x: g.add(t.x, a),
            y: g.add(t.y, a),
            r: t.r,
        })
        .collect()
}

/// A numbering `x_1, …, x_{2^k}` of `F_2^k` whose nonzero sums
/// `y_i = x_i + r_i` are pairwise distinct.
///
/// Builds a service for the first `2^k − 1` requests, translates it by
/// `a = x_{2^k} + r_{2^k}` (where `x_{2^k}` is the unused element) and
/// appends `(r_{2^k}, 0, r_{2^k})`.
pub fn build_numbering_with_zero_anchor(k: usize, requests: &[GroupElement]) -> Result<Service> {
    build_numbering_with_zero_anchor_stats(k, requests).map(|(s, _)| s)
}

pub fn build_numbering_with_zero_anchor_stats(
    k: usize,
    requests: &[GroupElement],
) -> Result<(Service, BuildStats)> {
    let g = GroupSpec::elementary_2(k)?;
    let n = g.order();
    if requests.len() != n {
        return Err(Error::Precondition(format!(
            "a numbering of F_2^{k} needs {n} requests, got {}",
            requests.len()
        )));
    }
    check_members(&g, requests)?;
    let (head, stats) = build_service_with_stats(&g, &requests[..n - 1])?;
    let mut seen = BitSet::new(n);
    for t in head.triples() {
        seen.insert(t.x.index());
    }
    let missing = seen
        .first_absent_from(0)
        .map(GroupElement::from_index_unchecked)
        .ok_or_else(|| Error::Internal("no unused x after 2^k - 1 extensions".into()))?;
    let r_last = requests[n - 1];
    let a = g.add(missing, r_last);
    let mut triples = translate_triples(&g, head.triples(), a);
    triples.push(ServiceTriple {
        x: r_last,
        y: g.zero(),
        r: r_last,
    });
    Ok((Service { group: g, triples }, stats))
}

/// Chain state of the special-service extension at the point it stopped.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtensionState {
    /// Chain triples `(x_j, y_j, r_j)` for `j = 1, …, t`.
    pub chain: Vec<ServiceTriple>,
    pub y_minus1: GroupElement,
    pub y0: GroupElement,
    pub x0: GroupElement,
    pub c: GroupElement,
    /// The candidate `x = y_{t−1} + r_t` that closed no valid rotation.
    pub candidate: GroupElement,
}

impl ExtensionState {
    pub fn chain_len(&self) -> usize {
        self.chain.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SpecialExtension {
    /// Special service for `r_0, r_1, …, r_m`, in that order.
    Extended(SpecialService),
    /// The only reachable failure: `x = y_{−1}`, `y_t = x_0`, `t ≥ 1`.
    Obstructed(ExtensionState),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Role {
    Free,
    X(u32),
    Y(u32),
}

/// Runs the extension algorithm on a special service in `Z_2^k`.
///
/// Anchors are taken outside all `2m` used values. The untouched triples
/// are symmetric in `x` and `y` (since `x + y = r`), so hitting an untouched
/// `y` is handled by swapping that triple's sides. The algorithm either
/// closes a rotation (a special service of length `m + 1`) or stops with
/// `x = y_{−1}`; every other outcome is reported as an internal error.
pub fn try_extend_special_service(
    special: &SpecialService,
    r0: GroupElement,
) -> Result<SpecialExtension> {
    let g = special.group();
    let Some(_) = g.elementary_2_dim() else {
        return Err(Error::Precondition(
            "special-service extension is defined for Z_2^k only".into(),
        ));
    };
    let n = g.order();
    let m = special.len();
    if 2 * m + 2 > n {
        return Err(Error::Precondition(format!(
            "2m = {} exceeds |G| - 2 = {}",
            2 * m,
            n - 2
        )));
    }
    if r0.index() >= n {
        return Err(Error::InvalidInput("request is not a group element".into()));
    }
    if r0.is_zero() {
        return Err(Error::Precondition("special services need nonzero requests".into()));
    }

    let mut slots: Vec<Slot> = special
        .triples()
        .iter()
        .enumerate()
        .map(|(i, t)| Slot {
            x: t.x,
            y: t.y,
            r: t.r,
            tag: i + 1,
        })
        .collect();
    let mut role = vec![Role::Free; n];
    for (i, s) in slots.iter().enumerate() {
        role[s.x.index()] = Role::X(i as u32);
        role[s.y.index()] = Role::Y(i as u32);
    }
    let mut free = (0..n).filter(|&e| role[e] == Role::Free);
    let (Some(a), Some(b)) = (free.next(), free.next()) else {
        return Err(Error::Internal("fewer than two free anchors".into()));
    };
    let y_m1 = GroupElement::from_index_unchecked(a);
    let y_0 = GroupElement::from_index_unchecked(b);
    let x_0 = g.add(y_0, r0);
    let c = g.add(x_0, y_m1);

    let y_at = |slots: &[Slot], j: isize| match j {
        -1 => y_m1,
        0 => y_0,
        _ => slots[j as usize - 1].y,
    };
    let r_at = |slots: &[Slot], j: usize| if j == 0 { r0 } else { slots[j - 1].r };
    let set_roles = |role: &mut [Role], slots: &[Slot], i: usize| {
        role[slots[i].x.index()] = Role::X(i as u32);
        role[slots[i].y.index()] = Role::Y(i as u32);
    };

    let mut t = 0usize;
    loop {
        let x = g.add(y_at(&slots, t as isize - 1), r_at(&slots, t));
        // Position of x among the anchors and chain y's, as the index j of y_j.
        let chain_y = if x == y_m1 {
            Some(-1)
        } else if x == y_0 {
            Some(0)
        } else {
            match role[x.index()] {
                Role::Y(p) if (p as usize) < t => Some(p as isize + 1),
                _ => None,
            }
        };
        match (role[x.index()], chain_y) {
            (Role::X(p), _) if (p as usize) < t => {
                return Err(Error::Internal(format!(
                    "special extension reached x = x_{} already on the chain",
                    p + 1
                )));
            }
            (Role::X(p), _) | (Role::Y(p), None) => {
                let p = p as usize;
                if matches!(role[x.index()], Role::Y(_)) {
                    let s = &mut slots[p];
                    std::mem::swap(&mut s.x, &mut s.y);
                }
                slots.swap(p, t);
                set_roles(&mut role, &slots, p);
                set_roles(&mut role, &slots, t);
                t += 1;
                if g.add(slots[t - 1].x, y_at(&slots, t as isize - 1)) != c {
                    return Err(Error::Internal(format!("chain invariant failed at t = {t}")));
                }
            }
            (_, Some(-1)) => {
                // x + y_t = c = x_0 + y_{-1} with x = y_{-1} forces y_t = x_0.
                if t == 0 || y_at(&slots, t as isize) != x_0 {
                    return Err(Error::Internal(format!(
                        "x = y_-1 reached with t = {t} but y_t != x_0"
                    )));
                }
                return Ok(SpecialExtension::Obstructed(ExtensionState {
                    chain: slots[..t]
                        .iter()
                        .map(|s| ServiceTriple { x: s.x, y: s.y, r: s.r })
                        .collect(),
                    y_minus1: y_m1,
                    y0: y_0,
                    x0: x_0,
                    c,
                    candidate: x,
                }));
            }
            // x = y_t is released by the rotation; only t = 0 can reach it.
            (_, Some(j)) if j == t as isize && t == 0 => {
                return finish_special(g, slots, t, x, y_m1, y_0, r0);
            }
            (_, Some(j)) => {
                return Err(Error::Internal(format!(
                    "special extension reached x = y_{j} with t = {t}"
                )));
            }
            (Role::Free, None) => {
                return finish_special(g, slots, t, x, y_m1, y_0, r0);
            }
        }
    }
}

fn finish_special(
    g: &GroupSpec,
    mut slots: Vec<Slot>,
    t: usize,
    x: GroupElement,
    y_m1: GroupElement,
    y_0: GroupElement,
    r0: GroupElement,
) -> Result<SpecialExtension> {
    let y_old = |slots: &[Slot], j: isize| match j {
        -1 => y_m1,
        0 => y_0,
        _ => slots[j as usize - 1].y,
    };
    let r_old = |slots: &[Slot], j: usize| {
        if j == 0 {
            (r0, 0)
        } else {
            (slots[j - 1].r, slots[j - 1].tag)
        }
    };
    let (r_t, tag_t) = r_old(&slots, t);
    let last = Slot {
        x,
        y: y_old(&slots, t as isize - 1),
        r: r_t,
        tag: tag_t,
    };
    for k in (0..t).rev() {
        let y = y_old(&slots, k as isize - 1);
        let (r, tag) = r_old(&slots, k);
        let s = &mut slots[k];
        s.y = y;
        s.r = r;
        s.tag = tag;
    }
    slots.push(last);
    slots.sort_unstable_by_key(|s| s.tag);
    let triples: Vec<_> = slots
        .into_iter()
        .map(|s| ServiceTriple { x: s.x, y: s.y, r: s.r })
        .collect();
    SpecialService::new(g.clone(), triples)
        .map(SpecialExtension::Extended)
        .map_err(|e| Error::Internal(format!("rotation produced an invalid special service: {e}")))
}
