use std::fs;
use std::path::Path;

use log::info;
use num::{BigRational, ToPrimitive, Zero};
use serde_json::{json, Map, Value};
use treeflag::certify::{round_solution, verify_certificate, RationalCertificate, RoundingOptions, VerifyOutcome};
use treeflag::hierarchy::{build_level, level_structure};
use treeflag::product::{downward, glue_product, min_level, product_strategy};
use treeflag::profiles::{anchor_slices, default_right_end, fmt7, outer_approximation, uniform_slices};
use treeflag::quantum::{format_rational, parse_rational};
use treeflag::sdp::sdpa::export_sdpa;
use treeflag::sdp::{assemble_bound_sdp, sdp_solver, SdpInstance, SolveStatus, SolverOptions};
use treeflag::tree::enumerate_trees;
use treeflag::{Error, QuantumFlag, Result, Tree};

use crate::{Cli, Command, SdpArgs, SolveArgs};

/// Runs one subcommand; `Ok(false)` means the computation finished without full success.
pub fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Enumerate { leaves } => enumerate(*leaves, cli.json),
        Command::Product { f1, f2, level, unlabel } => product(f1, f2, *level, *unlabel, cli.json),
        Command::Blocks { level, dump, products } => blocks(*level, dump.as_deref(), products, cli.json),
        Command::Inducibility {
            sdp,
            solve,
            round,
            cert_out,
            export,
        } => inducibility(sdp, solve, *round || cert_out.is_some(), cert_out.as_deref(), export.as_deref(), cli.json),
        Command::Verify { cert } => verify(cert, cli.json),
        Command::Profile {
            x,
            y,
            level,
            slices,
            anchors,
            anchor_width,
            out,
            svg,
            conjecture,
            solve,
        } => {
            let x = parse_unlabeled(x)?;
            let y = parse_unlabeled(y)?;
            let solver = sdp_solver(&solve.solver)?;
            let plan = if anchors.is_empty() {
                if *slices == 0 {
                    return Err(Error::Invalid("--slices must be positive".into()));
                }
                let hi = default_right_end(&x, *level, solver.as_ref())?;
                uniform_slices(&BigRational::zero(), &hi, *slices)
            } else {
                let points = anchors.iter().map(|a| parse_rational(a)).collect::<Result<Vec<_>>>()?;
                anchor_slices(&points, &parse_rational(anchor_width)?)
            };
            info!("{} slices at level {level}", plan.len());
            let prof = outer_approximation(&x, &y, *level, plan, &solve.solver)?;
            let csv = prof.to_csv(*conjecture);
            match out {
                Some(p) => fs::write(p, &csv)?,
                None if !cli.json => print!("{csv}"),
                None => {}
            }
            if let Some(p) = svg {
                fs::write(p, prof.to_svg())?;
            }
            let ok = prof
                .results
                .iter()
                .all(|r| r.upper.status != SolveStatus::NumericalFailure && r.lower.status != SolveStatus::NumericalFailure);
            if cli.json {
                let rows: Vec<Value> = prof
                    .results
                    .iter()
                    .map(|r| {
                        json!({
                            "slice_lo": format_rational(&r.lo),
                            "slice_hi": format_rational(&r.hi),
                            "lower_slope": num7(r.lower.slope),
                            "lower_intercept": num7(r.lower.intercept),
                            "upper_slope": num7(r.upper.slope),
                            "upper_intercept": num7(r.upper.intercept),
                            "status_lower": r.lower.status.to_string(),
                            "status_upper": r.upper.status.to_string(),
                        })
                    })
                    .collect();
                emit(&json!({"x": x.code(), "y": y.code(), "level": level, "slices": rows}));
            }
            Ok(ok)
        }
        Command::Export { sdp, out } => {
            let inst = instance(sdp)?;
            export_sdpa(&inst, out)?;
            let shape: Vec<usize> = inst.psd_blocks.clone();
            if cli.json {
                emit(&json!({
                    "path": out.display().to_string(),
                    "constraints": inst.constraint_count(),
                    "psd_blocks": shape,
                    "nonneg": inst.nonneg,
                    "free": inst.free,
                }));
            } else {
                println!(
                    "wrote {}: {} constraints, blocks {:?}, {} nonnegative, {} free",
                    out.display(),
                    inst.constraint_count(),
                    shape,
                    inst.nonneg,
                    inst.free
                );
            }
            Ok(true)
        }
    }
}

fn emit(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

/// A float rounded to seven significant digits, as a JSON number.
fn num7(v: f64) -> Value {
    fmt7(v)
        .parse::<f64>()
        .ok()
        .and_then(serde_json::Number::from_f64)
        .map(Value::Number)
        .unwrap_or(Value::Null)
}

fn parse_unlabeled(s: &str) -> Result<Tree> {
    let t = Tree::parse(s)?;
    if !t.is_unlabeled() {
        return Err(Error::Invalid(format!("{t} must be unlabeled")));
    }
    Ok(t)
}

fn enumerate(leaves: usize, as_json: bool) -> Result<bool> {
    if leaves == 0 || leaves > 64 {
        return Err(Error::Size(format!("--leaves must be between 1 and 64, got {leaves}")));
    }
    let trees = enumerate_trees(leaves);
    if as_json {
        let codes: Vec<&str> = trees.iter().map(Tree::code).collect();
        emit(&json!({"leaves": leaves, "count": trees.len(), "trees": codes}));
    } else {
        for t in &trees {
            println!("{t}");
        }
    }
    Ok(true)
}

fn quantum_json(q: &QuantumFlag) -> Value {
    let terms: Map<String, Value> = q
        .iter()
        .map(|(f, c)| (f.code().to_string(), Value::String(format_rational(c))))
        .collect();
    Value::Object(terms)
}

fn product(f1: &str, f2: &str, level: Option<usize>, unlabel: bool, as_json: bool) -> Result<bool> {
    let a = Tree::parse(f1)?;
    let b = Tree::parse(f2)?;
    let n = level.unwrap_or_else(|| min_level(&a, &b));
    let mut q = glue_product(&a, &b, n)?;
    if unlabel {
        q = downward(&q);
    }
    if as_json {
        emit(&json!({"f1": a.code(), "f2": b.code(), "level": n, "unlabeled": unlabel, "terms": quantum_json(&q)}));
    } else {
        println!("{q}");
    }
    Ok(true)
}

fn blocks(level: usize, dump: Option<&Path>, products: &str, as_json: bool) -> Result<bool> {
    if level < 2 {
        return Err(Error::Size(format!("--level must be at least 2, got {level}")));
    }
    let strategy = product_strategy(products)?;
    let h = if dump.is_some() {
        build_level(level, strategy.as_ref())?
    } else {
        level_structure(level)?
    };
    let sig = h.block_signature();
    if let Some(dir) = dump {
        fs::create_dir_all(dir)?;
        for (i, b) in h.blocks.iter().enumerate() {
            let Some(m) = &b.moment else { continue };
            let mut text = format!("# type {}\n# flags {}\n", b.sigma, b.flags.iter().map(Tree::code).collect::<Vec<_>>().join(" "));
            for r in 0..m.dim() {
                for c in 0..=r {
                    text.push_str(&format!("# entry {r} {c}\n"));
                    text.push_str(&m.entry(r, c).to_lines());
                }
            }
            fs::write(dir.join(format!("block_{i:04}.txt")), text)?;
        }
    }
    if as_json {
        let parts: Vec<Value> = sig.parts.iter().map(|(s, m)| json!({"size": s, "multiplicity": m})).collect();
        let list: Vec<Value> = h
            .blocks
            .iter()
            .map(|b| json!({"type": b.sigma.tree().code(), "size": b.dim()}))
            .collect();
        emit(&json!({"level": level, "signature": sig.to_string(), "parts": parts, "sum": sig.total(), "blocks": list}));
    } else {
        println!("{sig}");
        println!("sum {}", sig.total());
    }
    Ok(true)
}

fn instance(args: &SdpArgs) -> Result<SdpInstance> {
    let tree = parse_unlabeled(&args.tree)?;
    if tree.is_empty() || tree.leaf_count() > args.level || args.level < 2 {
        return Err(Error::Size(format!(
            "need 2 ≤ level and |tree| ≤ level, got |tree| = {} and level {}",
            tree.leaf_count(),
            args.level
        )));
    }
    let strategy = product_strategy(&args.products)?;
    info!("building level {} with {} products", args.level, strategy.name());
    let h = build_level(args.level, strategy.as_ref())?;
    assemble_bound_sdp(&h, &QuantumFlag::from_flag(tree))
}

fn options(s: &SolveArgs) -> SolverOptions {
    SolverOptions {
        tol: s.tol,
        feas_tol: s.tol,
        max_iter: s.max_iter,
        ..SolverOptions::default()
    }
}

fn inducibility(
    sdp: &SdpArgs,
    solve: &SolveArgs,
    round: bool,
    cert_out: Option<&Path>,
    export: Option<&Path>,
    as_json: bool,
) -> Result<bool> {
    let solver = sdp_solver(&solve.solver)?;
    let inst = instance(sdp)?;
    if let Some(p) = export {
        export_sdpa(&inst, p)?;
    }
    info!(
        "solving: blocks {:?}, {} scalars, {} constraints",
        inst.psd_blocks,
        inst.nonneg + inst.free,
        inst.constraint_count()
    );
    let sol = solver.solve(&inst, &options(solve))?;
    let objective = inst.report(sol.primal_objective);
    let optimal = sol.status == SolveStatus::Optimal;
    let rounded = if round && optimal {
        let r = round_solution(&inst, &sol, &RoundingOptions::default())?;
        if let Some(p) = cert_out {
            fs::write(p, r.certificate.to_json())?;
        }
        Some(r)
    } else {
        None
    };
    if as_json {
        let mut v = json!({
            "tree": Tree::parse(&sdp.tree)?.code(),
            "level": sdp.level,
            "solver": solver.name(),
            "objective": num7(objective),
            "gap": num7(sol.gap),
            "iterations": sol.iterations,
            "status": sol.status.to_string(),
        });
        if let Some(r) = &rounded {
            v["rigorous_bound"] = json!(format_rational(&r.bound));
            v["rigorous_bound_float"] = num7(r.bound.to_f64().unwrap_or(f64::NAN));
            v["rounding_error"] = num7(r.error.to_f64().unwrap_or(f64::NAN));
        }
        emit(&v);
    } else {
        println!("objective {}", fmt7(objective));
        println!("gap {}", fmt7(sol.gap));
        println!("iterations {}", sol.iterations);
        println!("status {}", sol.status);
        if let Some(r) = &rounded {
            println!("rigorous bound {} ≈ {}", format_rational(&r.bound), fmt7(r.bound.to_f64().unwrap_or(f64::NAN)));
        }
    }
    Ok(optimal && (rounded.is_some() || !round))
}

fn verify(path: &Path, as_json: bool) -> Result<bool> {
    let text = fs::read_to_string(path)?;
    let cert = RationalCertificate::from_json(&text)?;
    let outcome = verify_certificate(&cert)?;
    let ok = matches!(outcome, VerifyOutcome::Verified { .. });
    if as_json {
        let v = match &outcome {
            VerifyOutcome::Verified { bound } => json!({"verified": true, "bound": format_rational(bound)}),
            VerifyOutcome::Mismatch { tree, residual } => json!({
                "verified": false,
                "tree": tree.code(),
                "residual": format_rational(residual),
            }),
        };
        emit(&v);
    } else {
        println!("{outcome}");
    }
    Ok(ok)
}
