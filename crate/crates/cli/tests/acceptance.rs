//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines always reach the output; exits non-zero on any FAIL.

use std::collections::BTreeMap;
use std::process::Command;

use estimand_lab::report::{parse_json, ReportDocument};
use estimand_lab::Threaded;
use estimand_lab_core::estimands::EffectsSummary;
use estimand_lab_core::expr::Expr;
use estimand_lab_core::mc::{RunSpec, Simulator};
use estimand_lab_core::rng::uniform;
use estimand_lab_core::scm::{paper_model, parse_model};
use estimand_lab_core::symbolic::{
    check_assumptions, differentiate, equal_by_sampling_default, linear_decompose, Decomposition, Verdict,
};

const BIN: &str = env!("CARGO_BIN_EXE_estimand-lab");

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

struct Run {
    stdout: String,
    stderr: String,
    code: i32,
}

fn cli(args: &[&str], threads: Option<&str>) -> Run {
    let mut cmd = Command::new(BIN);
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("ESTIMAND_LAB_THREADS", t),
        None => cmd.env_remove("ESTIMAND_LAB_THREADS"),
    };
    let out = cmd.output().expect("binary runs");
    Run {
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
        code: out.status.code().unwrap_or(-1),
    }
}

fn cli_json(args: &[&str]) -> Result<(ReportDocument, i32), String> {
    let mut full: Vec<&str> = args.to_vec();
    full.extend(["--format", "json"]);
    let r = cli(&full, None);
    let doc = parse_json(&r.stdout).map_err(|e| format!("{args:?}: exit {} {e}; stderr: {}", r.code, r.stderr))?;
    Ok((doc, r.code))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Deterministic stream of uniforms for building random cases.
struct Stream {
    seed: u64,
    at: u64,
}

impl Stream {
    fn new(seed: u64) -> Stream {
        Stream { seed, at: 0 }
    }
    fn unit(&mut self) -> f64 {
        self.at += 1;
        uniform(self.seed, self.at, 0)
    }
    fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }
    fn index(&mut self, n: usize) -> usize {
        ((self.unit() * n as f64) as usize).min(n - 1)
    }
    /// Constant in [-3, 3] rounded to 3 decimals, so the model text is exact.
    fn coef(&mut self) -> f64 {
        (self.range(-3.0, 3.0) * 1000.0).round() / 1000.0
    }
}

fn row<'a>(doc: &'a ReportDocument, quantity: &str) -> Result<&'a estimand_lab::report::ComparisonRow, String> {
    doc.comparison.iter().find(|r| r.quantity == quantity).ok_or_else(|| format!("no {quantity} row"))
}

fn criterion_1() -> Check {
    let (doc, code) = cli_json(&["reproduce-paper"])?;
    ensure(code == 0, || format!("reproduce-paper exited {code}"))?;
    let mut parts = Vec::new();
    for (quantity, want, tol) in [
        ("E[X]", 1.1, 0.01),
        ("ADE", 4.4, 0.05),
        ("E[beta_ZY]", 12.0, 0.05),
        ("E[dY/dZ]", 8.8, 0.05),
        ("beta_IV", 6.0, 0.05),
    ] {
        let r = row(&doc, quantity)?;
        ensure((r.computed - want).abs() <= tol, || format!("{quantity} = {} not within {tol} of {want}", r.computed))?;
        parts.push(format!("{quantity}={:.4}", r.computed));
    }
    let bzx = row(&doc, "E[beta_ZX]")?;
    ensure(bzx.computed == 2.0 && bzx.mc_se == 0.0, || {
        format!("E[beta_ZX] = {} (mc_se {}), expected exactly 2 with mc_se 0", bzx.computed, bzx.mc_se)
    })?;
    parts.push("E[beta_ZX]=2 (mc_se 0)".into());
    Ok(parts.join(", "))
}

fn criterion_2() -> Check {
    let (doc, _) = cli_json(&["reproduce-paper"])?;
    let g = doc.gap.ok_or("no gap summary")?;
    ensure((1.5..=1.7).contains(&g.gap), || format!("gap {} outside [1.5, 1.7]", g.gap))?;
    ensure(g.gap > 10.0 * g.combined_mc_se, || format!("gap {} <= 10 x combined mc_se {}", g.gap, g.combined_mc_se))?;
    Ok(format!("gap = {:.4}, combined mc_se = {:.4} ({:.0}x)", g.gap, g.combined_mc_se, g.gap / g.combined_mc_se))
}

fn random_dist(s: &mut Stream) -> String {
    match s.index(3) {
        0 => format!("Bernoulli({:.3})", s.range(0.1, 0.9)),
        1 => format!("Normal({}, {:.3})", s.coef(), s.range(0.2, 2.0)),
        _ => {
            let a = s.coef();
            format!("Uniform({a}, {})", a + (s.range(0.5, 3.0) * 1000.0).round() / 1000.0)
        }
    }
}

/// Homogeneous first stage, outcome linear in X with a unit-varying slope.
fn random_linear_model(s: &mut Stream) -> String {
    let mut c1 = s.coef();
    if c1.abs() < 0.5 {
        c1 += 1.0f64.copysign(c1);
    }
    format!(
        "Z ~ Bernoulli({:.3})\nU ~ {}\neX ~ {}\neY ~ {}\n\
         X = {c1}*Z + {}*U + {}*eX + {}*U*eX\n\
         Y = ({} + {}*U + {}*eY)*X + {}*U + {}*eY^2 + {}\n\
         @instrument Z\n@exposure X\n@outcome Y\n",
        s.range(0.2, 0.8),
        random_dist(s),
        random_dist(s),
        random_dist(s),
        s.coef(),
        s.coef(),
        s.coef(),
        s.coef(),
        s.coef(),
        s.coef(),
        s.coef(),
        s.coef(),
        s.coef(),
    )
}

fn criterion_3() -> Check {
    let exec = Threaded::from_setting(None)?;
    let mut s = Stream::new(3);
    let models = 25;
    let mut worst: f64 = 0.0;
    for k in 0..models {
        let text = random_linear_model(&mut s);
        let m = parse_model(&text).map_err(|d| format!("model {k} invalid: {d:?}\n{text}"))?;
        let a = check_assumptions(&m);
        ensure(a.homogeneity_zx.verdict == Verdict::Holds && a.linearity_yx.verdict == Verdict::Holds, || {
            format!("model {k} not in the linear family: {a:?}\n{text}")
        })?;
        let sum = EffectsSummary::compute(&m, RunSpec::new(200_000, 100 + k), &exec).map_err(|e| e.to_string())?;
        let wald = sum.wald_true().map_err(|e| e.to_string())?;
        let ade = sum.ade();
        let bound = 3.0 * wald.combined_se(&ade);
        let diff = (wald.value - ade.value).abs();
        ensure(diff <= bound, || format!("model {k}: |wald - ade| = {diff} > 3 combined se = {bound}\n{text}"))?;
        worst = worst.max(diff / bound);

        let sim = Simulator::new(&m);
        let mut draw = sim.new_draw();
        for unit in 0..2000 {
            sim.draw_into(unit, 7, &mut draw);
            let e = sim.unit_effects(&draw).map_err(|e| e.to_string())?;
            let prod = e.dydx * e.beta_zx;
            ensure((e.beta_zy - prod).abs() <= 1e-9 * e.beta_zy.abs().max(prod.abs()).max(1.0), || {
                format!("model {k} unit {unit}: beta_zy {} vs dydx*beta_zx {prod}\n{text}", e.beta_zy)
            })?;
        }
    }
    Ok(format!("{models} models, max |wald - ade| / (3 se) = {worst:.3}; per-unit identity on 2000 units each"))
}

const VARS: [&str; 3] = ["a", "b", "c"];

fn random_expr(s: &mut Stream, depth: u32) -> Expr {
    if depth == 0 || s.unit() < 0.25 {
        return if s.unit() < 0.6 {
            Expr::var(VARS[s.index(3)])
        } else {
            Expr::Const((s.range(-3.0, 3.0) * 8.0).round() / 8.0)
        };
    }
    let d = depth - 1;
    match s.index(9) {
        0 | 1 => Expr::add(random_expr(s, d), random_expr(s, d)),
        2 => Expr::sub(random_expr(s, d), random_expr(s, d)),
        3 | 4 => Expr::mul(random_expr(s, d), random_expr(s, d)),
        5 => Expr::div(random_expr(s, d), random_expr(s, d)),
        6 => Expr::pow(random_expr(s, d), [2.0, 3.0, -1.0, 0.5][s.index(4)]),
        7 => Expr::exp(random_expr(s, d)),
        _ => Expr::log(random_expr(s, d)),
    }
}

fn eval_at(e: &Expr, p: &[f64; 3]) -> Option<f64> {
    let env: BTreeMap<&str, f64> = VARS.iter().copied().zip(p.iter().copied()).collect();
    e.eval(&|v: &str| env.get(v).copied()).ok().filter(|v| v.abs() < 1e8)
}

fn criterion_4() -> Check {
    let mut s = Stream::new(4);
    let (mut compared, mut skipped, mut decomposed, mut attempts) = (0usize, 0usize, 0usize, 0usize);
    while compared < 400 {
        attempts += 1;
        if attempts > 20_000 {
            return Err(format!("only {compared} usable expression/point pairs"));
        }
        let e = random_expr(&mut s, 4);
        let k = s.index(3);
        let p = [s.range(-3.0, 3.0), s.range(-3.0, 3.0), s.range(-3.0, 3.0)];
        let d = differentiate(&e, VARS[k]);
        let at = |dx: f64| {
            let mut q = p;
            q[k] += dx;
            eval_at(&e, &q)
        };
        let h = 1e-4 * (1.0 + p[k].abs());
        let central = |h: f64| Some((at(h)? - at(-h)?) / (2.0 * h));
        let (Some(f1), Some(f2), Some(sym)) = (central(h), central(h / 2.0), eval_at(&d, &p)) else {
            continue;
        };
        // Richardson step removes the O(h^2) term of the central difference.
        let fd = (4.0 * f2 - f1) / 3.0;
        let scale = 1.0 + fd.abs().max(sym.abs());
        // Points where the two step sizes disagree sit next to a singularity.
        if (f1 - f2).abs() > 1e-3 * scale {
            skipped += 1;
            continue;
        }
        compared += 1;
        ensure((sym - fd).abs() <= 1e-6 * scale, || {
            format!("d/d{} {e} at {p:?}: symbolic {sym}, finite difference {fd}", VARS[k])
        })?;

        if let Ok(Decomposition::Linear(lin)) = linear_decompose(&e, "a") {
            decomposed += 1;
            let same = equal_by_sampling_default(&e, &lin.recompose()).map_err(|x| x.to_string())?;
            ensure(same, || format!("recomposition of {e} differs: {}", lin.recompose()))?;
        }
    }
    ensure(skipped * 10 < compared, || format!("{skipped} near-singular points skipped of {compared}"))?;
    let fy = Expr::mul(Expr::Const(2.0), Expr::pow(Expr::var("X"), 2.0));
    ensure(matches!(linear_decompose(&fy, "X"), Ok(Decomposition::NotLinear { .. })), || {
        "2*X^2 reported linear".into()
    })?;
    Ok(format!(
        "{compared} derivatives match (skipped {skipped} near-singular), {decomposed} recompositions verified, 2*X^2 NotLinear"
    ))
}

fn with_roles(body: &str) -> String {
    format!("Z ~ Bernoulli(0.5)\nU ~ Bernoulli(0.5)\neX ~ Normal(0, 1)\neY ~ Normal(0, 1)\n{body}\n@instrument Z\n@exposure X\n@outcome Y\n")
}

fn criterion_5() -> Check {
    let paper = check_assumptions(&paper_model());
    ensure(paper.homogeneity_zx.verdict == Verdict::Holds, || "built-in model: homogeneity not holds".into())?;
    ensure(paper.linearity_yx.verdict == Verdict::Fails, || "built-in model: linearity not fails".into())?;

    let het = check_assumptions(&parse_model(&with_roles("X = 2*Z + Z*U + eX\nY = X + eY")).unwrap());
    ensure(het.homogeneity_zx.verdict == Verdict::Fails, || format!("heterogeneous: {:?}", het.homogeneity_zx))?;
    ensure(!het.homogeneity_zx.witness.is_constant() && het.homogeneity_zx.witness.references("U"), || {
        format!("witness {} should vary with U", het.homogeneity_zx.witness)
    })?;

    let lin = check_assumptions(&parse_model(&with_roles("X = 2*Z + U + eX\nY = 3*X + eY")).unwrap());
    ensure(lin.homogeneity_zx.verdict == Verdict::Holds && lin.linearity_yx.verdict == Verdict::Holds, || {
        format!("linear model: {:?} / {:?}", lin.homogeneity_zx.verdict, lin.linearity_yx.verdict)
    })?;
    Ok(format!("built-in (holds, fails), 2Z+ZU witness {}, 3X (holds, holds)", het.homogeneity_zx.witness))
}

const SCAN_TEMPLATE: &str = "\
Z ~ Bernoulli(0.3)
U ~ Bernoulli(0.5)
eX ~ Normal(0, 1)
eY ~ Normal(0, 1)
X = 2*Z + U + eX
Y = a*X^2 + U + eY
@instrument Z
@exposure X
@outcome Y
";

fn criterion_6() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("family.scm");
    std::fs::write(&path, SCAN_TEMPLATE).map_err(|e| e.to_string())?;
    let (doc, code) = cli_json(&["scan", "--model", path.to_str().unwrap(), "--param", "a=0:2:0.5"])?;
    ensure(code == 0, || format!("scan exited {code}"))?;
    let gaps: Vec<_> = doc.estimates.iter().filter(|r| r.kind == "gap").collect();
    ensure(gaps.len() == 5, || format!("{} gap rows", gaps.len()))?;
    let mut parts = Vec::new();
    for (i, r) in gaps.iter().enumerate() {
        let a = r.params[0].value;
        ensure(a == 0.5 * i as f64, || format!("row {i} has a = {a}"))?;
        let (gap, se) = (r.value.ok_or("missing gap")?, r.mc_se.ok_or("missing se")?);
        ensure((gap - 0.8 * a).abs() <= 3.0 * se, || {
            format!("a = {a}: gap {gap} vs {} (3 se = {})", 0.8 * a, 3.0 * se)
        })?;
        parts.push(format!("a={a}: {gap:.4}"));
    }
    let top = gaps[4].value.unwrap();
    ensure((top - (6.0 - 4.4)).abs() < 0.05, || format!("a = 2 gap {top} vs 1.6"))?;
    Ok(parts.join(", "))
}

fn criterion_7() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("family.scm");
    std::fs::write(&path, SCAN_TEMPLATE).map_err(|e| e.to_string())?;
    let model = path.to_str().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["validate", "--builtin", "paper"],
        vec!["check", "--builtin", "paper"],
        vec![
            "estimate",
            "--builtin",
            "paper",
            "--n",
            "300000",
            "--seed",
            "11",
            "--estimand",
            "ade,wald,wald-obs,ace,reduced-form,diagnostics",
            "--ace-from",
            "0",
            "--ace-to",
            "1",
        ],
        vec!["reproduce-paper"],
        vec!["scan", "--model", model, "--param", "a=0:2:0.5", "--n", "200000", "--seed", "5"],
    ];
    for case in &cases {
        let mut args = case.clone();
        args.extend(["--format", "json"]);
        let base = cli(&args, None);
        ensure(base.code == 0 && !base.stdout.is_empty(), || {
            format!("{case:?} exited {}: {}", base.code, base.stderr)
        })?;
        for threads in [None, Some("1"), Some("3"), Some("8")] {
            let again = cli(&args, threads);
            ensure(again.stdout == base.stdout, || format!("{case:?} differs with threads {threads:?}"))?;
        }
    }
    Ok(format!("{} commands byte-identical across repeats and ESTIMAND_LAB_THREADS=unset/1/3/8", cases.len()))
}

fn ace_value(from: &str, to: &str) -> Result<(f64, f64), String> {
    let (doc, code) =
        cli_json(&["estimate", "--builtin", "paper", "--estimand", "ace", "--ace-from", from, "--ace-to", to])?;
    ensure(code == 0, || format!("estimate exited {code}"))?;
    let r = doc.estimates.iter().find(|r| r.kind == "ace").ok_or("no ace row")?;
    Ok((r.value.ok_or("no value")?, r.mc_se.ok_or("no se")?))
}

fn criterion_8() -> Check {
    let (a01, _) = ace_value("0", "1")?;
    ensure((a01 - 2.0).abs() <= 0.01, || format!("ACE(0,1) = {a01}"))?;
    let (a12, _) = ace_value("1", "2")?;
    ensure((a12 - 6.0).abs() <= 0.01, || format!("ACE(1,2) = {a12}"))?;
    for x in ["0.7", "-1.3", "0"] {
        let (v, se) = ace_value(x, x)?;
        ensure(v == 0.0 && se == 0.0, || format!("ACE({x},{x}) = {v} (mc_se {se})"))?;
    }
    Ok(format!("ACE(0,1) = {a01}, ACE(1,2) = {a12}, ACE(x,x) = 0 exactly"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("reference example reproduced", criterion_1),
        ("wald - ade gap", criterion_2),
        ("linear outcome family: wald = ade", criterion_3),
        ("symbolic derivatives and decompositions", criterion_4),
        ("assumption checker verdicts", criterion_5),
        ("scan gap = 0.8a", criterion_6),
        ("determinism", criterion_7),
        ("ACE spot checks", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS criterion {}: {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
