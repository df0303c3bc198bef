//! Acceptance suite: one line per criterion, nonzero exit on any failure
//! that is not listed in `KNOWN_FAILURES`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use batchcode::group::{GroupElement, GroupSpec};
use batchcode::poly::{
    build_f, build_f_mod_p, cn_hypothesis_holds, coefficient_mod_p_nonzero, decode_special_service,
    dyson_balanced_coefficient, find_nonzero_evaluation, RMode,
};
use batchcode::search::{
    check_conjecture_strong, check_hadamard_shape, find_snevily_numbering, greedy_special_service,
    oracle_can_serve, search_special_services, serve_via_special_service_traced, SearchOptions,
};
use batchcode::service::{build_full_service_with_stats, verify_service, verify_special_service, BuildStats, FullServiceOutcome};
use batchcode::simplex::{serve_affine_requests_traced, serve_odd_requests_traced, verify_assignment};
use batchcode::Error;

/// Criteria that cannot hold as stated, with the reason printed next to
/// the FAIL line. A listed criterion still fails the run if its failures
/// differ from the documented ones.
const KNOWN_FAILURES: &[(u32, &str)] = &[(
    6,
    "special services do not always exist for 2m <= |G| - 1: requests spanning a subgroup \
     H = Z2^2 of index 2 (m = 3, |G| = 8) or filling a subgroup of order 3 (m = 4, |G| = 9) \
     admit none; every failure below matches an independent exhaustive check",
)];

#[derive(Default)]
struct Ctx {
    stats: BuildStats,
    internal_errors: u64,
    runs: u64,
}

impl Ctx {
    /// Records the outcome of one chain-rotation run.
    fn track<T>(&mut self, r: Result<T, Error>) -> Result<T, String> {
        self.runs += 1;
        r.map_err(|e| {
            if matches!(e, Error::Internal(_)) {
                self.internal_errors += 1;
            }
            e.to_string()
        })
    }
}

enum Verdict {
    Pass(String),
    Fail(String),
    /// Failed in exactly the documented way.
    KnownFail(String),
}

fn elem(g: &GroupSpec, i: usize) -> GroupElement {
    g.index_element(i).unwrap()
}

fn sequences(n: usize, m: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..n.pow(m as u32)).map(move |mut code| {
        let mut v = vec![0; m];
        for slot in v.iter_mut().rev() {
            *slot = code % n;
            code /= n;
        }
        v
    })
}

fn odd_weight(k: usize) -> Vec<usize> {
    (1..1usize << k).filter(|v| v.count_ones() % 2 == 1).collect()
}

fn criterion_1(ctx: &mut Ctx) -> Verdict {
    let mut served = 0;
    for k in 1..=3usize {
        let g = GroupSpec::elementary_2(k).unwrap();
        let odd = odd_weight(k);
        let t = 1usize << (k - 1);
        for pick in sequences(odd.len(), t) {
            let rs: Vec<_> = pick.iter().map(|&i| elem(&g, odd[i])).collect();
            let s = match ctx.track(serve_odd_requests_traced(k, &rs)) {
                Ok(s) => s,
                Err(e) => return Verdict::Fail(format!("k={k} {pick:?}: {e}")),
            };
            ctx.stats.merge(&s.stats);
            if !verify_assignment(k, &rs, &s.assignment, Some(2)).is_valid() {
                return Verdict::Fail(format!("k={k} {pick:?}: assignment does not verify"));
            }
            if oracle_can_serve(k, &rs, Some(2)).unwrap().is_none() {
                return Verdict::Fail(format!("k={k} {pick:?}: oracle finds no assignment"));
            }
            served += 1;
        }
    }
    Verdict::Pass(format!("{served} sequences served, verified and confirmed by the oracle"))
}

fn criterion_2(ctx: &mut Ctx) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut total = 0;
    for k in 4..=10usize {
        let g = GroupSpec::elementary_2(k).unwrap();
        let odd = odd_weight(k);
        let t = 1usize << (k - 1);
        for _ in 0..10_000 {
            let rs: Vec<_> = (0..t).map(|_| elem(&g, odd[rng.gen_range(0..odd.len())])).collect();
            let s = match ctx.track(serve_odd_requests_traced(k, &rs)) {
                Ok(s) => s,
                Err(e) => return Verdict::Fail(format!("k={k}: {e}")),
            };
            ctx.stats.merge(&s.stats);
            if !verify_assignment(k, &rs, &s.assignment, Some(2)).is_valid() {
                return Verdict::Fail(format!("k={k}: assignment does not verify"));
            }
            total += 1;
        }
    }
    Verdict::Pass(format!("{total} random sequences (k = 4..10) served and verified"))
}

fn criterion_3(ctx: &mut Ctx) -> Verdict {
    let k = 3;
    let g = GroupSpec::elementary_2(k).unwrap();
    let mut total = 0;
    for u in 1..8usize {
        let outside: Vec<usize> = (1..8usize).filter(|v| (v & u).count_ones() % 2 == 1).collect();
        for pick in sequences(outside.len(), 4) {
            let rs: Vec<_> = pick.iter().map(|&i| elem(&g, outside[i])).collect();
            let s = match ctx.track(serve_affine_requests_traced(k, elem(&g, u), &rs)) {
                Ok(s) => s,
                Err(e) => return Verdict::Fail(format!("u={u:03b} {pick:?}: {e}")),
            };
            ctx.stats.merge(&s.stats);
            if !verify_assignment(k, &rs, &s.assignment, Some(2)).is_valid() {
                return Verdict::Fail(format!("u={u:03b} {pick:?}: assignment does not verify"));
            }
            total += 1;
        }
    }
    Verdict::Pass(format!("7 hyperplanes x 256 sequences = {total} served and verified"))
}

fn criterion_4(ctx: &mut Ctx) -> Verdict {
    let mut total = 0;
    for text in ["Z2", "Z3", "Z4", "Z2xZ2"] {
        let g = GroupSpec::parse(text).unwrap();
        let n = g.order();
        for seq in sequences(n, n) {
            let rs: Vec<_> = seq.iter().map(|&i| elem(&g, i)).collect();
            let sums_to_zero = g.sum(rs.iter().copied()).is_zero();
            let (outcome, stats) = match ctx.track(build_full_service_with_stats(&g, &rs)) {
                Ok(o) => o,
                Err(e) => return Verdict::Fail(format!("{text} {seq:?}: {e}")),
            };
            ctx.stats.merge(&stats);
            match outcome {
                FullServiceOutcome::Service(s) if sums_to_zero => {
                    if s.len() != n || !verify_service(&g, s.triples(), &rs).is_valid() {
                        return Verdict::Fail(format!("{text} {seq:?}: service does not verify"));
                    }
                }
                FullServiceOutcome::NoSolution { .. } if !sums_to_zero => {}
                _ => return Verdict::Fail(format!("{text} {seq:?}: outcome disagrees with the sum criterion")),
            }
            total += 1;
        }
    }
    Verdict::Pass(format!("{total} sequences, zero disagreements"))
}

fn criterion_5(ctx: &Ctx) -> Verdict {
    let s = &ctx.stats;
    let detail = format!(
        "{} runs, {} extensions, {} chain steps, {} invariant checks, longest chain {}, {} internal errors",
        ctx.runs, s.extensions, s.chain_steps, s.invariant_checks, s.longest_chain, ctx.internal_errors
    );
    if ctx.internal_errors == 0 && s.invariant_checks > 0 {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

/// Special-service existence by trying every x tuple.
fn special_exists(g: &GroupSpec, rs: &[GroupElement]) -> bool {
    let n = g.order();
    sequences(n, rs.len()).any(|xs| {
        let mut seen = vec![false; n];
        xs.iter().zip(rs).all(|(&x, &r)| {
            let y = g.add(elem(g, x), r).index();
            let fresh = !seen[x] && !seen[y];
            seen[x] = true;
            seen[y] = true;
            fresh
        })
    })
}

fn criterion_6() -> Verdict {
    let groups = [
        "Z2", "Z3", "Z4", "Z2xZ2", "Z5", "Z6", "Z2xZ3", "Z3xZ2", "Z7", "Z8", "Z2xZ4", "Z4xZ2", "Z9", "Z3xZ3",
    ];
    // Classes that fail: requests spanning an index-2 copy of Z2^2 (m = 3)
    // or lying in a subgroup of order 3 (m = 4).
    let documented = [("Z2xZ4", 3), ("Z4xZ2", 3), ("Z9", 4), ("Z3xZ3", 4)];
    let mut lines = Vec::new();
    let mut undocumented = Vec::new();
    let mut tested = 0;
    for text in groups {
        let g = GroupSpec::parse(text).unwrap();
        for m in 1..=(g.order() - 1) / 2 {
            let report = check_conjecture_strong(&g, m, SearchOptions::exhaustive()).unwrap();
            tested += report.tested;
            if report.failures.is_empty() {
                continue;
            }
            let confirmed = report.failures.iter().all(|rs| !special_exists(&g, rs));
            let sample: Vec<Vec<u32>> = report.failures[0].iter().map(|&a| g.coords(a)).collect();
            lines.push(format!(
                "{text} m={m}: {} of {} sequences fail (e.g. {sample:?}){}",
                report.failures.len(),
                report.tested,
                if confirmed { "" } else { " [NOT confirmed by oracle]" }
            ));
            if !confirmed || !documented.contains(&(text, m)) {
                undocumented.push(format!("{text} m={m}"));
            }
        }
    }
    let z22 = GroupSpec::parse("Z2xZ2").unwrap();
    let sharp = search_special_services(&z22, 2, SearchOptions::exhaustive()).unwrap();
    let expected: Vec<Vec<GroupElement>> = sequences(3, 2)
        .filter(|v| v[0] != v[1])
        .map(|v| vec![elem(&z22, v[0] + 1), elem(&z22, v[1] + 1)])
        .collect();
    let sharp_ok = sharp.failures == expected && sharp.failures.contains(&vec![elem(&z22, 1), elem(&z22, 2)]);
    if !sharp_ok {
        undocumented.push("Z2xZ2 m=2 failure class differs".into());
    }
    let z23 = GroupSpec::elementary_2(3).unwrap();
    let extra = check_conjecture_strong(&z23, 3, SearchOptions::exhaustive()).unwrap();
    lines.push(format!(
        "Z2^3 m=3 (three factors, outside the listed presentations): {} of {} sequences fail",
        extra.failures.len(),
        extra.tested
    ));
    let detail = format!(
        "{tested} sequences; Z2xZ2 m=2 failures = the 6 ordered pairs of distinct nonzero elements: {sharp_ok}\n    {}",
        lines.join("\n    ")
    );
    if lines.len() == 1 && sharp_ok {
        Verdict::Pass(detail)
    } else if undocumented.is_empty() {
        Verdict::KnownFail(detail)
    } else {
        Verdict::Fail(format!("undocumented: {undocumented:?}\n    {detail}"))
    }
}

fn groups_up_to(order: usize) -> Vec<GroupSpec> {
    fn extend(prefix: &mut Vec<u32>, product: usize, limit: usize, out: &mut Vec<Vec<u32>>) {
        if !prefix.is_empty() {
            out.push(prefix.clone());
        }
        for n in 2..=limit / product {
            prefix.push(n as u32);
            extend(prefix, product * n, limit, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    extend(&mut Vec::new(), 1, order, &mut out);
    out.into_iter().map(|o| GroupSpec::new(o).unwrap()).collect()
}

fn criterion_7() -> Verdict {
    let mut exhaustive = 0;
    for g in groups_up_to(11) {
        let n = g.order();
        for m in 1..=n.div_ceil(4) {
            for seq in sequences(n - 1, m) {
                let rs: Vec<_> = seq.iter().map(|&i| elem(&g, i + 1)).collect();
                match greedy_special_service(&g, &rs) {
                    Ok(s) if verify_special_service(&g, s.triples(), &rs).is_valid() => exhaustive += 1,
                    _ => return Verdict::Fail(format!("{g} {seq:?}")),
                }
            }
        }
    }
    let all = groups_up_to(64);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let g = &all[rng.gen_range(0..all.len())];
        let n = g.order();
        let m = rng.gen_range(1..=n.div_ceil(4));
        let rs: Vec<_> = (0..m).map(|_| elem(g, rng.gen_range(1..n))).collect();
        match greedy_special_service(g, &rs) {
            Ok(s) if verify_special_service(g, s.triples(), &rs).is_valid() => {}
            _ => return Verdict::Fail(format!("{g} {rs:?}")),
        }
    }
    Verdict::Pass(format!(
        "{exhaustive} exhaustive instances over {} presentations of order <= 11, 1000 random of order <= 64",
        groups_up_to(11).len()
    ))
}

fn criterion_8() -> Verdict {
    let g = GroupSpec::elementary_2(3).unwrap();
    let mut moved = 0;
    let mut singletons = [0usize; 3];
    for seq in sequences(7, 4) {
        let rs: Vec<_> = seq.iter().map(|&i| elem(&g, i + 1)).collect();
        match serve_via_special_service_traced(3, &rs) {
            Ok(Some((a, lone))) => {
                if !verify_assignment(3, &rs, &a, Some(2)).is_valid() || !check_hadamard_shape(&a) {
                    return Verdict::Fail(format!("{seq:?}: {a:?}"));
                }
                singletons[a.singletons()] += 1;
                if lone != 3 {
                    moved += 1;
                }
            }
            other => return Verdict::Fail(format!("{seq:?}: {other:?}")),
        }
    }
    Verdict::Pass(format!(
        "2401 sequences served with Hadamard shape (singleton counts 1/2: {}/{}); \
         {moved} needed a singleton other than the last request",
        singletons[1], singletons[2]
    ))
}

fn factorial(n: u64) -> BigInt {
    (1..=n).map(BigInt::from).product()
}

fn criterion_9() -> Verdict {
    for m in 1..=5usize {
        let c = dyson_balanced_coefficient(m).unwrap();
        let closed = factorial(2 * m as u64) >> m;
        let odd: BigInt = (0..m as u64).map(|i| BigInt::from(2 * i + 1)).product::<BigInt>() * factorial(m as u64);
        if c != closed || c != odd {
            return Verdict::Fail(format!("m={m}: expansion {c}, closed form {closed}, odd form {odd}"));
        }
        for p in (2..=31u64).filter(|&p| (2..p).all(|d| p % d != 0)) {
            let stated = m == 1 || p > 2 * m as u64;
            let got = coefficient_mod_p_nonzero(m, p).unwrap();
            let expanded = !(&c % BigInt::from(p)).is_zero();
            if got != stated || expanded != stated {
                return Verdict::Fail(format!("m={m} p={p}: criterion {stated}, computed {got}, expansion {expanded}"));
            }
        }
    }
    let f3 = build_f(3, &RMode::Symbolic).unwrap();
    let c3 = f3.coefficient(&[6, 5, 1, 0, 0, 0]).unwrap();
    let f4 = build_f(4, &RMode::Symbolic).unwrap();
    let c4 = f4.coefficient(&[8, 8, 7, 1, 0, 0, 0, 0]).unwrap();
    if c3 != BigInt::from(8) || c4 != BigInt::from(-72) {
        return Verdict::Fail(format!("x1^6 x2^5 x3 -> {c3}, x1^8 x2^8 x3^7 x4 -> {c4}"));
    }
    Verdict::Pass(format!(
        "balanced coefficients match both closed forms up to m=5 ({}); x1^6x2^5x3 -> 8, \
         x1^8x2^8x3^7x4 -> -72; mod-p criterion exact for m <= 5, p <= 31",
        dyson_balanced_coefficient(5).unwrap()
    ))
}

fn subsets(n: usize, m: usize) -> impl Iterator<Item = Vec<usize>> {
    (0u32..1 << n)
        .filter(move |mask| mask.count_ones() as usize == m)
        .map(move |mask| (0..n).filter(|i| mask >> i & 1 == 1).collect())
}

fn criterion_10() -> Verdict {
    let mut total = 0;
    for text in ["Z3", "Z5", "Z7", "Z9", "Z3xZ3"] {
        let g = GroupSpec::parse(text).unwrap();
        let n = g.order();
        for m in 1..=n {
            for xs in subsets(n, m) {
                let set: Vec<_> = xs.iter().map(|&i| elem(&g, i)).collect();
                for rs in subsets(n, m) {
                    let rs: Vec<_> = rs.iter().map(|&i| elem(&g, i)).collect();
                    if find_snevily_numbering(&g, &set, &rs).unwrap().is_none() {
                        return Verdict::Fail(format!("{text} X={xs:?} r={rs:?}"));
                    }
                    total += 1;
                }
            }
        }
    }
    let z4 = GroupSpec::cyclic(4).unwrap();
    let counter = find_snevily_numbering(&z4, &[elem(&z4, 0), elem(&z4, 2)], &[elem(&z4, 0), elem(&z4, 2)]).unwrap();
    if counter.is_some() {
        return Verdict::Fail(format!("Z4 X={{0,2}} r=[0,2] numbered as {counter:?}"));
    }
    Verdict::Pass(format!("{total} (X, r-set) pairs over odd orders 3..9 numbered; Z4 counterexample has none"))
}

fn criterion_11() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut total = 0;
    for p in [5u64, 7, 11] {
        for m in 1..=((p - 1) / 2) as usize {
            for _ in 0..100 {
                let r: Vec<u64> = (0..m).map(|_| rng.gen_range(1..p)).collect();
                let ri: Vec<i64> = r.iter().map(|&v| v as i64).collect();
                let f = build_f_mod_p(&ri, p).unwrap();
                let t = vec![2 * (m as u32 - 1); m];
                if !cn_hypothesis_holds(&f, &t, &vec![p as usize; m]).unwrap() {
                    return Verdict::Fail(format!("p={p} r={r:?}: balanced hypothesis fails"));
                }
                let sets = vec![(0..p).collect::<Vec<u64>>(); m];
                let Some(point) = find_nonzero_evaluation(&f, &sets).unwrap() else {
                    return Verdict::Fail(format!("p={p} r={r:?}: no nonzero evaluation"));
                };
                let g = GroupSpec::cyclic(p as u32).unwrap();
                let s = decode_special_service(p as u32, &r, &point).unwrap();
                if !verify_special_service(&g, s.triples(), &s.requests()).is_valid() {
                    return Verdict::Fail(format!("p={p} r={r:?}: point {point:?} is not a special service"));
                }
                total += 1;
            }
        }
    }
    Verdict::Pass(format!("{total} trials over (p, m) with 2m <= p - 1; every point decodes to a special service"))
}

fn main() -> ExitCode {
    let mut ctx = Ctx::default();
    type Run<'a> = Box<dyn FnOnce(&mut Ctx) -> Verdict + 'a>;
    let criteria: Vec<(u32, &str, u64, Run)> = vec![
        (1, "odd-batch serving, exhaustive k <= 3", 10, Box::new(criterion_1)),
        (2, "odd-batch serving, random k = 4..10", 300, Box::new(criterion_2)),
        (3, "affine serving, k = 3, all hyperplanes", 60, Box::new(criterion_3)),
        (4, "full-service sum criterion, |G| <= 4", 60, Box::new(criterion_4)),
        (5, "extension invariants never violated", 1, Box::new(|c: &mut Ctx| criterion_5(c))),
        (6, "special services for 2m <= |G| - 1, |G| <= 9", 120, Box::new(|_: &mut Ctx| criterion_6())),
        (7, "greedy special services when 4m <= |G| + 3", 60, Box::new(|_: &mut Ctx| criterion_7())),
        (8, "functional serving with Hadamard shape, k = 3", 120, Box::new(|_: &mut Ctx| criterion_8())),
        (9, "coefficient claims", 120, Box::new(|_: &mut Ctx| criterion_9())),
        (10, "Snevily numberings", 60, Box::new(|_: &mut Ctx| criterion_10())),
        (11, "Nullstellensatz evaluation bridge", 120, Box::new(|_: &mut Ctx| criterion_11())),
    ];
    let mut unexpected = 0;
    let mut known = 0;
    for (id, name, limit, run) in criteria {
        let start = Instant::now();
        let verdict = run(&mut ctx);
        let elapsed = start.elapsed();
        let over = elapsed > Duration::from_secs(limit);
        let time = format!("{:.2}s of {limit}s", elapsed.as_secs_f64());
        match verdict {
            Verdict::Pass(d) if !over => println!("[PASS] {id:>2} {name} ({time}): {d}"),
            Verdict::Pass(d) => {
                unexpected += 1;
                println!("[FAIL] {id:>2} {name} ({time}, over the time limit): {d}");
            }
            Verdict::Fail(d) => {
                unexpected += 1;
                println!("[FAIL] {id:>2} {name} ({time}): {d}");
            }
            Verdict::KnownFail(d) => {
                let documented = KNOWN_FAILURES.iter().find(|(k, _)| *k == id);
                match documented {
                    Some((_, why)) => {
                        known += 1;
                        println!("[FAIL] {id:>2} {name} ({time}) [documented: {why}]: {d}");
                    }
                    None => {
                        unexpected += 1;
                        println!("[FAIL] {id:>2} {name} ({time}): {d}");
                    }
                }
            }
        }
    }
    println!("acceptance: {unexpected} unexpected failure(s), {known} documented failure(s)");
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
