use std::fmt::Write;
use std::sync::Arc;

use freelie::density::{density_check, Mode};
use freelie::endo::{degree_five_identity, higher_degree_identity, kernel_identities, permutation_identity, verify_identity, NamedIdentity};
use freelie::lie::LieElement;
use freelie::obstruct::{certify, nested_check, Algebra, Outcome};
use freelie::parse::{parse_composition, parse_lie};
use freelie::quotient::{dims, second_derived_rank, Poly, QuotientContext};
use freelie::schur::{kernel_decomposition, kernel_from_lr, lr_tensor, second_derived_decomposition, verify_decomposition, ModuleExpr, Partition, Variant};
use freelie::selftest::{run_suite, Suite};
use freelie::Rat;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::{AlgebraArg, Cmd, Common, DecompSuite, Failure, FamilyArg, ModeArg, Report, VerifySuite};

type Out = Result<Report, Failure>;

const MAX_N: usize = 6;
const MAX_DEGREE: usize = 9;

fn usage(m: impl Into<String>) -> Failure {
    Failure::Usage(m.into())
}

/// Dimension of the degree-`d` part of the free Lie algebra of rank `n`.
fn witt(n: usize, d: usize) -> u128 {
    let mobius = |m: usize| -> i128 {
        let (mut m, mut sign, mut p) = (m, 1i128, 2);
        while p * p <= m {
            if m % p == 0 {
                m /= p;
                if m % p == 0 {
                    return 0;
                }
                sign = -sign;
            }
            p += 1;
        }
        if m > 1 {
            -sign
        } else {
            sign
        }
    };
    let s: i128 = (1..=d).filter(|e| d % e == 0).map(|e| mobius(e) * (n as i128).pow((d / e) as u32)).sum();
    (s / d as i128) as u128
}

fn caps(c: &Common, n: usize, degree: usize) -> Result<(), Failure> {
    if !c.allow_large {
        if n > MAX_N {
            return Err(usage(format!("--n {n} exceeds the cap of {MAX_N}; pass --allow-large to override")));
        }
        if degree > MAX_DEGREE {
            return Err(usage(format!("degree {degree} exceeds the cap of {MAX_DEGREE}; pass --allow-large to override")));
        }
    }
    let w = witt(n, degree);
    if w > 2000 {
        // Worst case: a dense elimination over the degree's basis.
        let mib = w * w * 16 / (1 << 20);
        eprintln!("note: degree {degree} of the free Lie algebra of rank {n} has dimension {w}; worst-case memory estimate {mib} MiB");
    }
    Ok(())
}

fn context(a: AlgebraArg, n: usize, maxdeg: usize) -> Result<Arc<QuotientContext>, Failure> {
    Ok(match a {
        AlgebraArg::Free => QuotientContext::free(n, maxdeg)?,
        AlgebraArg::Metabelian => QuotientContext::metabelian(n, maxdeg)?,
        AlgebraArg::Cn => QuotientContext::c_n(n, maxdeg)?,
        AlgebraArg::Rn => QuotientContext::r_n(n, maxdeg)?,
    })
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report serializes")
}

pub fn run(cmd: &Cmd, c: &Common) -> Out {
    match cmd {
        Cmd::Eval { expr, n, algebra, maxdeg } => eval(c, expr.as_deref(), *n, *algebra, *maxdeg),
        Cmd::Verify { suite, expr, n, k, m, maxdeg, algebra } => match (suite, expr) {
            (Some(_), Some(_)) => Err(usage("--suite and --expr are mutually exclusive")),
            (None, None) => Err(usage("verify needs --suite or --expr")),
            (Some(s), None) => verify_suite(c, *s, *n, *k, *m),
            (None, Some(e)) => verify_expr(c, e, *n, maxdeg.unwrap_or(6), *algebra),
        },
        Cmd::Density { n, k, mode } => density(c, *n, *k, *mode),
        Cmd::Decomp { suite, n, k, lambda, mu, det } => decomp(c, *suite, *n, *k, lambda.as_deref(), mu.as_deref(), *det),
        Cmd::Nontame { family, kappa, algebra } => nontame(*family, *kappa, *algebra),
        Cmd::Dims { n, maxdeg, algebra } => dims_cmd(c, *n, *maxdeg, *algebra),
    }
}

fn eval(c: &Common, expr: Option<&str>, n: usize, algebra: AlgebraArg, maxdeg: usize) -> Out {
    let expr = expr.ok_or_else(|| usage("eval needs --expr"))?;
    caps(c, n, maxdeg)?;
    let ctx = context(algebra, n, maxdeg)?;
    let v = parse_lie(expr, n)?.eval(&ctx)?;
    let mut coords = serde_json::Map::new();
    let mut text = format!("{v}\n");
    for d in v.degrees() {
        let cv = v.coords(d)?;
        let pairs: Vec<Value> = cv.iter().map(|(i, r)| json!([i, r.to_string()])).collect();
        writeln!(text, "  degree {d}: {} nonzero of {}", pairs.len(), cv.dim()).ok();
        coords.insert(d.to_string(), Value::Array(pairs));
    }
    let data = json!({ "n": n, "algebra": format!("{algebra:?}"), "maxdeg": maxdeg, "normal_form": v.to_string(), "coordinates": coords });
    Ok(Report { ok: true, text, data })
}

fn identity_entry(id: &NamedIdentity, text: &mut String) -> Result<(bool, Value), Failure> {
    let rep = id.verify()?;
    let status = if rep.holds { "holds" } else { "FAILS" };
    writeln!(text, "{}: {status}", id.name).ok();
    if let Some(d) = rep.fixed_discrepancy.as_ref().filter(|_| !rep.holds) {
        writeln!(text, "  {d}").ok();
    }
    Ok((rep.holds, json!({ "name": id.name, "n": id.n, "degree": id.degree, "lhs": id.lhs.to_string(), "rhs": id.rhs.to_string(), "report": to_value(&rep) })))
}

fn run_identities(ids: &[NamedIdentity]) -> Out {
    let mut text = String::new();
    let mut ok = true;
    let mut entries = Vec::new();
    for id in ids {
        let (h, v) = identity_entry(id, &mut text)?;
        ok &= h;
        entries.push(v);
    }
    Ok(Report { ok, text, data: json!({ "identities": entries }) })
}

fn verify_suite(c: &Common, suite: VerifySuite, n: usize, k: Option<usize>, m: Option<usize>) -> Out {
    match suite {
        VerifySuite::Kernel => {
            let k = k.unwrap_or(5);
            if k < 4 {
                return Err(usage("--k must be at least 4"));
            }
            caps(c, n, k + 1)?;
            let ids: Vec<NamedIdentity> = Poly::monomials(n, k as u32 - 4)
                .into_iter()
                .flat_map(|e| kernel_identities(n, &Poly::monomial(n, e, Rat::one())))
                .collect();
            run_identities(&ids)
        }
        VerifySuite::Permutation => {
            let d = k.unwrap_or(3);
            caps(c, n, d + 1)?;
            let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
            let mut ids = Vec::new();
            for _ in 0..20 {
                let mut rho: Vec<usize> = (1..=n).collect();
                rho.shuffle(&mut rng);
                let i = rng.gen_range(1..=n);
                let len = freelie::lie::basis_table(n, d).len();
                let coords: Vec<(usize, Rat)> = (0..3).map(|_| (rng.gen_range(0..len), Rat::from_int(rng.gen_range(1..=3)))).collect();
                ids.push(permutation_identity(&rho, i, &LieElement::from_coords(n, d, coords))?);
            }
            run_identities(&ids)
        }
        VerifySuite::DegreeFive => {
            caps(c, n, 6)?;
            run_identities(&[degree_five_identity(n)])
        }
        VerifySuite::HigherDegree => {
            let k = k.unwrap_or(6);
            if k < 6 {
                return Err(usage("--k must be at least 6 for this suite"));
            }
            caps(c, n, k + 1)?;
            run_identities(&[higher_degree_identity(n, k)])
        }
        VerifySuite::Nested => {
            let ms: Vec<usize> = m.map(|m| vec![m]).unwrap_or_else(|| (1..=5).collect());
            let mut text = String::new();
            let mut ok = true;
            let mut entries = Vec::new();
            for &m in &ms {
                caps(c, n, m + 4)?;
                for j in 2..=n {
                    let r = nested_check(n, m, j)?;
                    writeln!(text, "m={m} j={j}: expansion={} partial_j={} partial_1={}", r.expansion, r.partial_j, r.partial_1).ok();
                    ok &= r.holds();
                    entries.push(to_value(&r));
                }
            }
            Ok(Report { ok, text, data: json!({ "n": n, "checks": entries }) })
        }
    }
}

fn verify_expr(c: &Common, expr: &str, n: usize, maxdeg: usize, algebra: AlgebraArg) -> Out {
    let (l, r) = expr.split_once(" = ").ok_or_else(|| usage("--expr must have the form \"LHS = RHS\" with spaces around the middle `=`"))?;
    caps(c, n, maxdeg)?;
    let (lhs, rhs) = (parse_composition(l, n)?, parse_composition(r, n)?);
    let ctx = context(algebra, n, maxdeg)?;
    let rep = verify_identity(&lhs, &rhs, &ctx, maxdeg)?;
    let mut text = format!("{} = {}: {}\n", lhs, rhs, if rep.holds { "holds" } else { "FAILS" });
    if let Some(conv) = rep.convention {
        writeln!(text, "  reading: {conv:?}").ok();
    }
    for d in [&rep.fixed_discrepancy, &rep.reversed_discrepancy].into_iter().flatten() {
        writeln!(text, "  {d}").ok();
    }
    Ok(Report { ok: rep.holds, text, data: json!({ "lhs": lhs.to_string(), "rhs": rhs.to_string(), "degree": maxdeg, "report": to_value(&rep) }) })
}

fn density(c: &Common, n: usize, k: usize, mode: ModeArg) -> Out {
    if k < 4 || n < 4 {
        return Err(usage("density needs --n >= 4 and --k >= 4"));
    }
    caps(c, n, k)?;
    let mode = match mode {
        ModeArg::Group => Mode::Group,
        ModeArg::Lie => Mode::Lie,
        ModeArg::Both => Mode::Both,
    };
    let mut rep = density_check(n, k, mode)?;
    if c.reproducible {
        rep.elapsed_ms = 0;
    }
    let text = format!(
        "n={n} k={k} mode={mode}: closure {} of ambient {}{}\n  seeds: {}\n",
        rep.closure_dim,
        rep.ambient_dim,
        if mode == Mode::Both { format!(", modes agree: {}", rep.agreed) } else { String::new() },
        rep.seeds.join("; ")
    );
    Ok(Report { ok: rep.holds(), text, data: to_value(&rep) })
}

fn parse_partition(flag: &str, s: &str) -> Result<Partition, Failure> {
    s.parse().map_err(|e| usage(format!("{flag}: {e}")))
}

fn decomp(c: &Common, suite: Option<DecompSuite>, n: usize, k: Option<usize>, lambda: Option<&str>, mu: Option<&str>, det: i32) -> Out {
    match (suite, lambda) {
        (Some(_), Some(_)) => Err(usage("--suite and --lambda are mutually exclusive")),
        (None, None) => Err(usage("decomp needs --suite or --lambda")),
        (None, Some(l)) => {
            let l = parse_partition("--lambda", l)?;
            let expr = match mu {
                Some(m) => lr_tensor(&l, &parse_partition("--mu", m)?, n),
                None => ModuleExpr::single(l),
            }
            .twist(det);
            let dim = expr.dim(n);
            let text = format!("{expr}\n  dimension for GL_{n}: {dim}\n");
            Ok(Report { ok: true, text, data: json!({ "n": n, "expr": expr.to_string(), "terms": to_value(&expr), "dim": dim.to_string() }) })
        }
        (Some(DecompSuite::SecondDerived), None) => {
            let d = k.unwrap_or(5);
            if d < 4 {
                return Err(usage("--k must be at least 4"));
            }
            caps(c, n, d)?;
            let expr = second_derived_decomposition(d)?;
            let rank = second_derived_rank(n, d) as u128;
            let rep = verify_decomposition(&expr, rank, n);
            let lr_ok = d == 4 || lr_tensor(&Partition::new(vec![d as u32 - 3, 1])?, &Partition::new(vec![1, 1])?, n) == expr;
            let text = format!("degree {d}, n={n}: {expr}\n  schur total {} vs rank {rank}: {}\n  LR product agrees: {lr_ok}\n", rep.total_dim, rep.holds);
            Ok(Report { ok: rep.holds && lr_ok, text, data: json!({ "degree": d, "report": to_value(&rep), "lr_agrees": lr_ok }) })
        }
        (Some(DecompSuite::Kernel), None) => {
            let k = k.unwrap_or(4);
            if k < 4 || n < 4 {
                return Err(usage("needs --n >= 4 and --k >= 4"));
            }
            caps(c, n, k)?;
            let expected = n as u128 * second_derived_rank(n, k) as u128;
            let lr = kernel_from_lr(n, k)?.normalize(n);
            let variants: &[Variant] = if n >= 5 && k >= 5 { &[Variant::Printed, Variant::Corrected] } else { &[Variant::Corrected] };
            let mut text = format!("n={n} k={k}: expected dimension {expected}\n");
            let mut entries = Vec::new();
            let mut ok = true;
            for &v in variants {
                let expr = kernel_decomposition(n, k, v)?;
                let rep = verify_decomposition(&expr, expected, n);
                let lr_match = expr.normalize(n) == lr;
                writeln!(text, "  {v:?}: {expr}\n    total {}: {}; matches LR expansion: {lr_match}", rep.total_dim, if rep.holds { "passes" } else { "fails" }).ok();
                if v == Variant::Corrected {
                    ok = rep.holds;
                }
                entries.push(json!({ "variant": to_value(&v), "report": to_value(&rep), "lr_match": lr_match }));
            }
            Ok(Report { ok, text, data: json!({ "n": n, "k": k, "expected_dim": expected.to_string(), "variants": entries }) })
        }
    }
}

fn nontame(family: FamilyArg, kappa: Option<usize>, algebra: Option<AlgebraArg>) -> Out {
    let kappa = kappa.ok_or_else(|| usage("nontame needs --kappa"))?;
    let alg = match (family, algebra) {
        (FamilyArg::Phi, None | Some(AlgebraArg::Cn)) => Algebra::Cn,
        (FamilyArg::Omega, None | Some(AlgebraArg::Rn)) => Algebra::Rn,
        (_, Some(a)) => return Err(usage(format!("--algebra {a:?} does not match --family {family:?}"))),
    };
    let outcome = certify(alg, kappa)?;
    let (ok, text) = match &outcome {
        Outcome::Certified(cert) => {
            let mut t = format!("{:?}: {}\n", cert.kind, cert.verdict);
            for (key, v) in &cert.witness {
                writeln!(t, "  {key}: {v}").ok();
            }
            (true, t)
        }
        Outcome::External { reason } => (true, format!("{reason}\n")),
        Outcome::NotCertified { reason } => (alg == Algebra::Rn && kappa >= 4, format!("no certificate: {reason}\n")),
    };
    Ok(Report { ok, text, data: to_value(&outcome) })
}

fn dims_cmd(c: &Common, n: usize, maxdeg: usize, algebra: AlgebraArg) -> Out {
    caps(c, n, maxdeg)?;
    let ctx = context(algebra, n, maxdeg)?;
    let rows = dims(&ctx);
    let mut text = format!("{:>6} {:>10} {:>10} {:>10}\n", "degree", "free", "ideal", "quotient");
    for r in &rows {
        writeln!(text, "{:>6} {:>10} {:>10} {:>10}", r.degree, r.free_dim, r.ideal_rank, r.quotient_dim).ok();
    }
    Ok(Report { ok: true, text, data: json!({ "n": n, "algebra": format!("{algebra:?}"), "degrees": to_value(&rows) }) })
}

fn suites_for(cmd: &Cmd) -> &'static [Suite] {
    match cmd {
        Cmd::Eval { .. } => &[Suite::Ratlin, Suite::Assoc, Suite::Lie, Suite::Quotient],
        Cmd::Verify { .. } => &[Suite::Endo, Suite::Obstruct],
        Cmd::Density { .. } => &[Suite::Density],
        Cmd::Decomp { .. } => &[Suite::Schur],
        Cmd::Nontame { .. } => &[Suite::Obstruct, Suite::Assoc],
        Cmd::Dims { .. } => &[Suite::Quotient, Suite::Schur],
    }
}

pub fn selftest(cmd: &Cmd, c: &Common) -> Out {
    let mut text = String::new();
    let mut ok = true;
    let mut entries = Vec::new();
    for &s in suites_for(cmd) {
        for r in run_suite(s, c.cases, c.seed) {
            writeln!(text, "{} {}/{}: {} cases, {} failures", if r.holds() { "ok  " } else { "FAIL" }, r.suite, r.property, r.cases, r.failures).ok();
            if let Some(f) = &r.first_failure {
                writeln!(text, "     {f}").ok();
            }
            ok &= r.holds();
            entries.push(to_value(&r));
        }
    }
    Ok(Report { ok, text, data: json!({ "seed": c.seed, "properties": entries }) })
}
