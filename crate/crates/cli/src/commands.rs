use std::io::Read;
use std::time::Instant;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde_json::{json, Value};

use batchcode::group::is_prime;
use batchcode::poly::{build_f, f_degree, RMode, MAX_M_SYMBOLIC};
use batchcode::search::{
    check_conjecture_strong, check_hadamard_shape, find_snevily_numbering, find_special_service_bruteforce,
    greedy_special_service_attempt, oracle_can_serve, search_special_services, serve_via_special_service_traced,
    SearchMode, SearchOptions, SearchReport,
};
use batchcode::service::{
    build_full_service, build_service, triples_from_wire, verify_service, verify_special_service, FullServiceOutcome,
    WireTriple,
};
use batchcode::simplex::{serve_affine_requests, serve_odd_requests, verify_assignment, ColumnAssignment};
use batchcode::{Error, GroupElement, GroupSpec, Result, VerificationReport};

use crate::input::{bit_vector, bit_vectors, bits_json, element_json, elements_json, group_elements, load_json, read_file};
use crate::{Command, GroupRequests, KRequests, Outcome, DEFAULT_SEED};

pub fn run(command: &Command) -> Result<Outcome> {
    match command {
        Command::ServeOdd(req) => serve(req, "serve-odd", None, serve_odd_requests),
        Command::ServeAffine { req, u } => {
            let u = bit_vector(req.k, &load_json(u)?)?;
            serve(req, "serve-affine", Some(u), |k, rs| serve_affine_requests(k, u, rs))
        }
        Command::ServeFunctional(req) => serve_functional(req),
        Command::GroupService { req, special } => group_service(req, *special),
        Command::FullService(req) => full_service(req),
        Command::CheckStrong {
            group,
            m,
            random,
            seed,
            force,
            witnesses,
        } => check_strong(group, *m, *random, *seed, *force, *witnesses),
        Command::Snevily { req, set } => snevily(req, set),
        Command::Oracle { req, max_size } => oracle(req, *max_size),
        Command::Coeff { m, monomial, modulus, r } => coeff(*m, monomial, *modulus, r.as_deref()),
        Command::Verify { input } => {
            let text = match input {
                Some(path) => read_file(path)?,
                None => {
                    let mut s = String::new();
                    std::io::stdin()
                        .read_to_string(&mut s)
                        .map_err(|e| Error::InvalidInput(format!("cannot read standard input: {e}")))?;
                    s
                }
            };
            let doc: Value =
                serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("malformed JSON: {e}")))?;
            verify(&doc)
        }
    }
}

fn parse_group(text: &str) -> Result<GroupSpec> {
    GroupSpec::parse(text)
}

/// Exit status 1 with the report when an emitted object fails its own check.
fn checked(mut body: Value, report: &VerificationReport) -> Outcome {
    body["verified"] = json!(report.is_valid());
    if report.is_valid() {
        Outcome::ok(body)
    } else {
        eprintln!("internal verification failed");
        body["violations"] = json!(report.violations);
        Outcome { body, code: 1 }
    }
}

fn serve(
    req: &KRequests,
    name: &str,
    u: Option<GroupElement>,
    server: impl Fn(usize, &[GroupElement]) -> Result<ColumnAssignment>,
) -> Result<Outcome> {
    let requests = bit_vectors(req.k, &load_json(&req.requests)?)?;
    let assignment = server(req.k, &requests)?;
    let report = verify_assignment(req.k, &requests, &assignment, Some(2));
    let mut body = json!({
        "command": name,
        "k": req.k,
        "requests": requests.iter().map(|&r| bits_json(req.k, r)).collect::<Vec<_>>(),
        "assignment": assignment,
    });
    if let Some(u) = u {
        body["u"] = bits_json(req.k, u);
    }
    Ok(checked(body, &report))
}

fn serve_functional(req: &KRequests) -> Result<Outcome> {
    let requests = bit_vectors(req.k, &load_json(&req.requests)?)?;
    let mut body = json!({
        "command": "serve-functional",
        "k": req.k,
        "requests": requests.iter().map(|&r| bits_json(req.k, r)).collect::<Vec<_>>(),
    });
    match serve_via_special_service_traced(req.k, &requests)? {
        None => {
            eprintln!("no special service found for any choice of singleton request");
            body["assignment"] = Value::Null;
            body["singleton_request"] = Value::Null;
            Ok(Outcome::ok(body))
        }
        Some((assignment, lone)) => {
            let report = verify_assignment(req.k, &requests, &assignment, Some(2));
            body["hadamard_shape"] = json!(check_hadamard_shape(&assignment));
            body["assignment"] = json!(assignment);
            body["singleton_request"] = json!(lone);
            Ok(checked(body, &report))
        }
    }
}

fn group_service(req: &GroupRequests, special: bool) -> Result<Outcome> {
    let g = parse_group(&req.group)?;
    let requests = group_elements(&g, &load_json(&req.requests)?)?;
    let mut body = json!({
        "command": "group-service",
        "group": g.to_string(),
        "special": special,
        "requests": elements_json(&g, &requests),
    });
    if !special {
        let s = build_service(&g, &requests)?;
        let report = verify_service(&g, s.triples(), &requests);
        body["triples"] = json!(s.to_wire());
        return Ok(checked(body, &report));
    }
    let found = match greedy_special_service_attempt(&g, &requests)? {
        Some(s) => Some(s),
        None => find_special_service_bruteforce(&g, &requests)?,
    };
    match found {
        None => {
            body["triples"] = Value::Null;
            Ok(Outcome::ok(body))
        }
        Some(s) => {
            let report = verify_special_service(&g, s.triples(), &requests);
            body["triples"] = json!(s.to_wire());
            Ok(checked(body, &report))
        }
    }
}

fn full_service(req: &GroupRequests) -> Result<Outcome> {
    let g = parse_group(&req.group)?;
    let requests = group_elements(&g, &load_json(&req.requests)?)?;
    let mut body = json!({
        "command": "full-service",
        "group": g.to_string(),
        "requests": elements_json(&g, &requests),
    });
    match build_full_service(&g, &requests)? {
        FullServiceOutcome::NoSolution { request_sum } => {
            body["triples"] = Value::Null;
            body["request_sum"] = element_json(&g, request_sum);
            Ok(Outcome::ok(body))
        }
        FullServiceOutcome::Service(s) => {
            let report = verify_service(&g, s.triples(), &requests);
            body["triples"] = json!(s.to_wire());
            Ok(checked(body, &report))
        }
    }
}

fn check_strong(
    group: &str,
    m: usize,
    random: Option<u64>,
    seed: Option<u64>,
    force: bool,
    witnesses: bool,
) -> Result<Outcome> {
    let g = parse_group(group)?;
    let mode = match random {
        Some(samples) => SearchMode::Random {
            samples,
            seed: seed.unwrap_or(DEFAULT_SEED),
        },
        None => SearchMode::Exhaustive { force },
    };
    if let SearchMode::Random { seed, .. } = mode {
        eprintln!("seed: {seed}");
    }
    let opts = SearchOptions {
        mode,
        store_witnesses: witnesses,
    };
    let report = if 2 * m < g.order() {
        check_conjecture_strong(&g, m, opts)?
    } else {
        eprintln!("2m > |G| - 1: outside the conjecture's range, failures are expected data");
        search_special_services(&g, m, opts)?
    };
    eprintln!(
        "tested {} sequences in {:.3}s, {} failures",
        report.tested,
        report.elapsed.as_secs_f64(),
        report.failures.len()
    );
    report_outcome(&report)
}

fn report_outcome(report: &SearchReport) -> Result<Outcome> {
    let g = &report.group;
    let mut body = json!({
        "command": "check-strong",
        "group": g.to_string(),
        "m": report.m,
        "tested": report.tested,
        "failure_count": report.failures.len(),
        "failures": report.failures.iter().map(|f| elements_json(g, f)).collect::<Vec<_>>(),
        "within_conjecture_range": report.within_conjecture_range,
        "claim_proven": report.claim_is_proven(),
    });
    match report.mode {
        SearchMode::Exhaustive { .. } => body["mode"] = json!("exhaustive"),
        SearchMode::Random { samples, seed } => {
            body["mode"] = json!("random");
            body["samples"] = json!(samples);
            body["seed"] = json!(seed);
        }
    }
    if let Some(ws) = &report.witnesses {
        let mut out = Vec::with_capacity(ws.len());
        for (rs, w) in ws {
            let check = verify_special_service(g, w.triples(), rs);
            if !check.is_valid() {
                return Err(Error::Internal(format!("witness for {rs:?} failed verification")));
            }
            out.push(json!({
                "requests": elements_json(g, rs),
                "x": w.triples().iter().map(|t| element_json(g, t.x)).collect::<Vec<_>>(),
            }));
        }
        body["witnesses"] = Value::Array(out);
    }
    let contradiction = !report.failures.is_empty() && report.claim_is_proven();
    if contradiction {
        eprintln!("failures in a size covered by a stated result; see the failures field");
    }
    Ok(Outcome {
        body,
        code: u8::from(contradiction),
    })
}

/// Whether Snevily-type results guarantee a numbering: odd order with
/// distinct requests, or `Z_{p^a}` / `Z_p^a` (odd prime `p`) with `m < p`.
fn numbering_guaranteed(g: &GroupSpec, requests: &[GroupElement]) -> bool {
    let m = requests.len();
    let mut distinct = requests.to_vec();
    distinct.sort();
    distinct.dedup();
    if g.order() % 2 == 1 && distinct.len() == m {
        return true;
    }
    let orders = g.orders();
    let prime_of = |n: u64| (3..=n).find(|&d| n.is_multiple_of(d) && is_prime(d));
    let p = match orders {
        [n] => prime_of(*n as u64).filter(|&p| {
            let mut q = *n as u64;
            while q.is_multiple_of(p) {
                q /= p;
            }
            q == 1
        }),
        _ if orders.iter().all(|&o| o == orders[0]) && is_prime(orders[0] as u64) && orders[0] > 2 => {
            Some(orders[0] as u64)
        }
        _ => None,
    };
    p.is_some_and(|p| (m as u64) < p)
}

fn snevily(req: &GroupRequests, set: &str) -> Result<Outcome> {
    let g = parse_group(&req.group)?;
    let requests = group_elements(&g, &load_json(&req.requests)?)?;
    let set = group_elements(&g, &load_json(set)?)?;
    let mut body = json!({
        "command": "snevily",
        "group": g.to_string(),
        "set": elements_json(&g, &set),
        "requests": elements_json(&g, &requests),
    });
    match find_snevily_numbering(&g, &set, &requests)? {
        Some(xs) => {
            let mut sums: Vec<_> = xs.iter().zip(&requests).map(|(&x, &r)| g.add(x, r)).collect();
            sums.sort();
            sums.dedup();
            let mut sorted_xs = xs.clone();
            sorted_xs.sort();
            let mut sorted_set = set.clone();
            sorted_set.sort();
            let ok = sums.len() == xs.len() && sorted_xs == sorted_set;
            body["numbering"] = elements_json(&g, &xs);
            body["verified"] = json!(ok);
            Ok(Outcome {
                body,
                code: u8::from(!ok),
            })
        }
        None => {
            body["numbering"] = Value::Null;
            let guaranteed = numbering_guaranteed(&g, &requests);
            if guaranteed {
                eprintln!("no numbering although one is guaranteed for this group and request set");
            }
            Ok(Outcome {
                body,
                code: u8::from(guaranteed),
            })
        }
    }
}

fn oracle(req: &KRequests, max_size: Option<usize>) -> Result<Outcome> {
    let requests = bit_vectors(req.k, &load_json(&req.requests)?)?;
    let mut body = json!({
        "command": "oracle",
        "k": req.k,
        "requests": requests.iter().map(|&r| bits_json(req.k, r)).collect::<Vec<_>>(),
        "max_size": max_size,
    });
    match oracle_can_serve(req.k, &requests, max_size)? {
        None => {
            body["assignment"] = Value::Null;
            Ok(Outcome::ok(body))
        }
        Some(a) => {
            let report = verify_assignment(req.k, &requests, &a, max_size);
            body["assignment"] = json!(a);
            Ok(checked(body, &report))
        }
    }
}

fn integer_json(c: &BigInt) -> Value {
    match c.to_i64() {
        Some(v) => json!(v),
        None => json!(c.to_string()),
    }
}

fn coeff(m: usize, monomial: &[u32], modulus: Option<u64>, r: Option<&[i64]>) -> Result<Outcome> {
    if monomial.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: monomial.len(),
        });
    }
    if m == 0 {
        return Err(Error::Precondition("m must be positive".into()));
    }
    if let Some(p) = modulus {
        if !is_prime(p) {
            return Err(Error::InvalidInput(format!("{p} is not prime")));
        }
    }
    let degree: u32 = monomial.iter().sum();
    let started = Instant::now();
    let coefficient = match r {
        Some(r) => build_f(m, &RMode::Concrete(r.to_vec()))?.coefficient(monomial)?,
        None if degree != f_degree(m) => {
            return Err(Error::Precondition(format!(
                "below the top degree {} the coefficient depends on the requests; pass --r",
                f_degree(m)
            )))
        }
        None if m <= MAX_M_SYMBOLIC => {
            let mut e = monomial.to_vec();
            e.resize(2 * m, 0);
            build_f(m, &RMode::Symbolic)?.coefficient(&e)?
        }
        // Top-degree coefficients do not depend on the requests.
        None => build_f(m, &RMode::Concrete(vec![1; m]))?.coefficient(monomial)?,
    };
    eprintln!("expanded f for m = {m} in {:.3}s", started.elapsed().as_secs_f64());
    let mut body = json!({
        "command": "coeff",
        "m": m,
        "monomial": monomial,
        "coefficient": integer_json(&coefficient),
    });
    if let Some(r) = r {
        body["r"] = json!(r);
    }
    if let Some(p) = modulus {
        let bp = BigInt::from(p);
        let red = ((&coefficient % &bp) + &bp) % &bp;
        body["mod"] = json!(p);
        body["mod_p"] = integer_json(&red);
    }
    Ok(Outcome::ok(body))
}

fn field<'a>(doc: &'a Value, name: &str) -> Result<&'a Value> {
    doc.get(name)
        .ok_or_else(|| Error::InvalidInput(format!("input has no \"{name}\" field")))
}

fn verify(doc: &Value) -> Result<Outcome> {
    let command = field(doc, "command")?
        .as_str()
        .ok_or_else(|| Error::InvalidInput("\"command\" must be a string".into()))?;
    let mut extra = Vec::new();
    let report = match command {
        "serve-odd" | "serve-affine" | "serve-functional" | "oracle" => {
            let k = field(doc, "k")?
                .as_u64()
                .ok_or_else(|| Error::InvalidInput("\"k\" must be an integer".into()))? as usize;
            let requests = bit_vectors(k, field(doc, "requests")?)?;
            let assignment_value = field(doc, "assignment")?;
            if assignment_value.is_null() {
                return Err(Error::InvalidInput("the input carries no assignment to verify".into()));
            }
            let assignment: ColumnAssignment = serde_json::from_value(assignment_value.clone())
                .map_err(|e| Error::InvalidInput(format!("malformed assignment: {e}")))?;
            let max = if command == "oracle" {
                doc.get("max_size").and_then(Value::as_u64).map(|v| v as usize)
            } else {
                Some(2)
            };
            if command == "serve-affine" {
                let u = bit_vector(k, field(doc, "u")?)?;
                let outside = requests
                    .iter()
                    .all(|r| (r.index() & u.index()).count_ones() % 2 == 1);
                extra.push(("requests_outside_hyperplane", outside));
            }
            if command == "serve-functional" {
                extra.push(("hadamard_shape", check_hadamard_shape(&assignment)));
            }
            verify_assignment(k, &requests, &assignment, max)
        }
        "group-service" | "full-service" => {
            let g = parse_group(
                field(doc, "group")?
                    .as_str()
                    .ok_or_else(|| Error::InvalidInput("\"group\" must be a string".into()))?,
            )?;
            let requests = group_elements(&g, field(doc, "requests")?)?;
            let triples_value = field(doc, "triples")?;
            if triples_value.is_null() {
                return Err(Error::InvalidInput("the input carries no service to verify".into()));
            }
            let wire: Vec<WireTriple> = serde_json::from_value(triples_value.clone())
                .map_err(|e| Error::InvalidInput(format!("malformed triples: {e}")))?;
            let triples = triples_from_wire(&g, &wire)?;
            if command == "full-service" {
                extra.push(("covers_group", triples.len() == g.order()));
            }
            if doc.get("special").and_then(Value::as_bool) == Some(true) {
                verify_special_service(&g, &triples, &requests)
            } else {
                verify_service(&g, &triples, &requests)
            }
        }
        other => return Err(Error::InvalidInput(format!("cannot verify output of \"{other}\""))),
    };
    let valid = report.is_valid() && extra.iter().all(|(_, ok)| *ok);
    let mut body = json!({
        "command": "verify",
        "verified_command": command,
        "valid": valid,
        "violations": report.violations,
    });
    for (name, ok) in extra {
        body[name] = json!(ok);
    }
    Ok(Outcome {
        body,
        code: u8::from(!valid),
    })
}
