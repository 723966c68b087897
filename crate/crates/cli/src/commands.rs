use std::fmt::Write as _;
use std::path::Path;

use dsym_core::conservation::{
    integrability_check, parse_integrals, solve_integral_space, verify_integral, GradientQuad,
    IntegralCheckConfig, IntegralSpace, DEFAULT_INTEGRAL_SAMPLES,
};
use dsym_core::detsolve::{
    default_samples, parse_ansatz_file, symmetries, AnsatzBasis, SymmetrySpace,
};
use dsym_core::reduction::{parse_reduction, verify_reduction};
use dsym_core::expr::Component;
use dsym_core::slsc::{check_generator, CheckReport, parse_charpairs, DEFAULT_CHECK_SAMPLES};
use dsym_core::system::{DiffSystem, Termination};
use num_complex::Complex64;
use serde_json::{json, Value};

use crate::config::RunFlags;
use crate::failure::Failure;
use crate::output::{
    coefficient_lines, coefficients, complex, expr_or_null, format_complex, sci, to_json, verdict,
};

/// Result of one command, in both output formats.
pub struct Outcome {
    pub result: Value,
    pub text: String,
    pub passed: bool,
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))
}

pub fn load_system(path: &Path) -> Result<DiffSystem, Failure> {
    DiffSystem::from_text(&read(path)?)
        .map_err(|e| with_file(path, Failure::from(e)))
}

fn with_file(path: &Path, mut f: Failure) -> Failure {
    f.message = format!("{}: {}", path.display(), f.message);
    f
}

/// A preset name (`affine`, `loglinear`, `constant`) or an ansatz file.
pub fn load_ansatz(spec: &str) -> Result<AnsatzBasis, Failure> {
    if let Some(a) = AnsatzBasis::preset(spec) {
        return Ok(a);
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(Failure::input(format!(
            "'{spec}' is neither an ansatz preset (affine, loglinear, constant) nor a file"
        )));
    }
    let mut all = parse_ansatz_file(&read(path)?).map_err(|e| with_file(path, e.into()))?;
    match all.len() {
        1 => Ok(all.remove(0)),
        0 => Err(Failure::input(format!("{spec}: no ansatz block"))),
        k => Err(Failure::input(format!("{spec}: expected one ansatz block, found {k}"))),
    }
}

pub fn cmd_check(system: &Path) -> Result<Outcome, Failure> {
    let sys = load_system(system)?;
    let report = sys.validate()?;
    let mut text = String::new();
    writeln!(text, "system {} (order {}): valid", report.name, report.order).unwrap();
    for (i, c) in ["x", "y"].iter().enumerate() {
        let deps: Vec<&str> = ["x[n]", "y[n]"]
            .iter()
            .zip(report.depends_on_base[i])
            .filter_map(|(v, d)| d.then_some(*v))
            .collect();
        writeln!(
            text,
            "  {c}[n+{}] = {}    depends on {}",
            report.order,
            sys.rhs()[i],
            if deps.is_empty() { "-".to_string() } else { deps.join(", ") }
        )
        .unwrap();
    }
    if report.guards.is_empty() {
        writeln!(text, "guards: none").unwrap();
    } else {
        writeln!(text, "guards:").unwrap();
        for g in &report.guards {
            writeln!(text, "  {g} != 0").unwrap();
        }
    }
    let mut result = to_json(&report);
    result["rhs"] = json!(sys.rhs().iter().map(|e| e.to_string()).collect::<Vec<_>>());
    Ok(Outcome {
        result,
        text,
        passed: true,
    })
}

pub fn cmd_simulate(
    system: &Path,
    init: &str,
    steps: usize,
    start: i64,
) -> Result<Outcome, Failure> {
    let sys = load_system(system)?;
    let values = init
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::input(format!("initial values '{init}': {e}")))?;
    let [a, b, c, d] = <[f64; 4]>::try_from(values.as_slice()).map_err(|_| {
        Failure::input(format!(
            "initial values need four numbers x[n0],y[n0],x[n0+1],y[n0+1]; got {}",
            values.len()
        ))
    })?;
    let init = [a, b, c, d].map(|v| Complex64::new(v, 0.0));
    let t = sys.iterate(init, start, steps)?;
    let real = t.is_real();
    let value = |z: Complex64| if real { json!(z.re) } else { complex(z) };
    let points: Vec<Value> = t
        .points
        .iter()
        .enumerate()
        .map(|(k, p)| json!({ "n": t.index_of(k), "x": value(p[0]), "y": value(p[1]) }))
        .collect();
    let mut text = String::new();
    writeln!(text, "{:>6}  {:>24}  {:>24}", "n", "x", "y").unwrap();
    for (k, p) in t.points.iter().enumerate() {
        writeln!(
            text,
            "{:>6}  {:>24}  {:>24}",
            t.index_of(k),
            format_complex(p[0]),
            format_complex(p[1])
        )
        .unwrap();
    }
    match &t.termination {
        Termination::Completed => writeln!(text, "completed {} points", t.len()).unwrap(),
        Termination::GuardViolation { n, guard } => {
            writeln!(text, "stopped at n = {n}: guard {guard} vanishes").unwrap()
        }
    }
    let defect = t.relation_defect(&sys);
    writeln!(text, "relation defect {}", sci(defect)).unwrap();
    Ok(Outcome {
        result: json!({
            "system": sys.name(),
            "start": t.start,
            "points": points,
            "termination": to_json(&t.termination),
            "relation_defect": defect,
        }),
        text,
        passed: true,
    })
}

fn residual_text(r: &CheckReport) -> String {
    if r.symbolic_zero {
        "residual simplifies to zero".to_string()
    } else {
        format!("residual {} over {} samples", sci(r.max_residual), r.samples)
    }
}

fn space_json(space: &SymmetrySpace) -> Value {
    let elements: Vec<Value> = space
        .elements
        .iter()
        .map(|e| {
            json!({
                "name": e.name,
                "characteristic": e.closed.as_ref().map(|q| [q[0].to_string(), q[1].to_string()]),
                "coefficients": coefficients(&space.labels, &e.table, &e.closed_forms),
                "check": to_json(&e.report),
            })
        })
        .collect();
    json!({
        "system": space.system,
        "ansatz": space.ansatz,
        "window": [space.window.0, space.window.1],
        "labels": space.labels,
        "dimension": space.dimension(),
        "ranks": space.null.ranks,
        "nullities": space.null.nullities,
        "elements": elements,
    })
}

pub fn cmd_symmetries(flags: &RunFlags, system: &Path, ansatz: &str) -> Result<Outcome, Failure> {
    let sys = load_system(system)?;
    let ansatz = load_ansatz(ansatz)?;
    let cfg = flags.sample_config(Some(default_samples(ansatz.slots())));
    let space = symmetries(&sys, &ansatz, &cfg)?;
    let passed = space.elements.iter().all(|e| e.report.passed);
    let mut text = String::new();
    writeln!(
        text,
        "system {}, ansatz {}, window {}..{}",
        space.system, space.ansatz, space.window.0, space.window.1
    )
    .unwrap();
    writeln!(text, "dimension {}", space.dimension()).unwrap();
    for e in &space.elements {
        writeln!(text, "  {}  {}  {}", e.name, residual_text(&e.report), verdict(e.report.passed))
            .unwrap();
        if let Some(q) = &e.closed {
            writeln!(text, "    Q1 = {}", q[0]).unwrap();
            writeln!(text, "    Q2 = {}", q[1]).unwrap();
        } else {
            coefficient_lines(&mut text, &space.labels, &e.table, &e.closed_forms);
        }
    }
    Ok(Outcome {
        result: space_json(&space),
        text,
        passed,
    })
}

fn integral_space_json(space: &IntegralSpace) -> Value {
    let determining: Vec<Value> = space
        .determining
        .iter()
        .map(|d| {
            json!({
                "name": d.name,
                "coefficients": coefficients(&space.labels, &d.table, &d.closed_forms),
                "integrability": to_json(&d.integrability),
            })
        })
        .collect();
    let integrals: Vec<Value> = space
        .elements
        .iter()
        .map(|e| {
            json!({
                "name": e.name,
                "phi": e.integral.phi.to_string(),
                "closed_form": expr_or_null(e.closed.as_ref()),
                "index_term": e.integral.index_term,
                "gradient": e.quad.gradient().iter().map(|g| g.to_string()).collect::<Vec<_>>(),
                "coefficients": coefficients(&space.labels, &e.table, &e.closed_forms),
                "integrability": to_json(&e.integrability),
                "orbits": to_json(&e.report),
            })
        })
        .collect();
    json!({
        "system": space.system,
        "ansatz": space.ansatz,
        "window": [space.window.0, space.window.1],
        "labels": space.labels,
        "dimension": space.dimension(),
        "integrable_dimension": space.integrable_dimension(),
        "ranks": space.null.ranks,
        "determining": determining,
        "integrals": integrals,
    })
}

fn integral_check_config(flags: &RunFlags) -> IntegralCheckConfig {
    IntegralCheckConfig {
        tol: flags.tol,
        sample: flags.sample_config(None),
        ..IntegralCheckConfig::default()
    }
}

pub fn cmd_integrals(flags: &RunFlags, system: &Path, ansatz: &str) -> Result<Outcome, Failure> {
    let sys = load_system(system)?;
    let ansatz = load_ansatz(ansatz)?;
    let cfg = flags.sample_config(Some(default_samples(ansatz.slots())));
    let space = solve_integral_space(&sys, &ansatz, &cfg, &integral_check_config(flags))?;
    let passed = space
        .elements
        .iter()
        .all(|e| e.integrability.passed && e.report.passed);
    let mut text = String::new();
    writeln!(
        text,
        "system {}, ansatz {}, window {}..{}",
        space.system, space.ansatz, space.window.0, space.window.1
    )
    .unwrap();
    writeln!(text, "determining system dimension {}", space.dimension()).unwrap();
    for d in &space.determining {
        writeln!(
            text,
            "  {}  integrability {}  {}",
            d.name,
            sci(d.integrability.max_residual),
            if d.integrability.passed { "closed" } else { "not closed" }
        )
        .unwrap();
    }
    writeln!(text, "first integrals {}", space.integrable_dimension()).unwrap();
    for e in &space.elements {
        writeln!(
            text,
            "  {}  drift {} over {} orbits x {} steps  {}",
            e.name,
            sci(e.report.max_deviation),
            e.report.trials,
            e.report.steps,
            verdict(e.integrability.passed && e.report.passed)
        )
        .unwrap();
        writeln!(text, "    phi = {}", e.closed.as_ref().unwrap_or(&e.integral.phi)).unwrap();
        if !e.closed_forms.iter().all(Option::is_some) {
            coefficient_lines(&mut text, &space.labels, &e.table, &e.closed_forms);
        }
    }
    Ok(Outcome {
        result: integral_space_json(&space),
        text,
        passed,
    })
}

pub fn cmd_reduce(flags: &RunFlags, system: &Path, file: &Path) -> Result<Outcome, Failure> {
    let sys = load_system(system)?;
    let red = parse_reduction(&read(file)?).map_err(|e| with_file(file, e.into()))?;
    let mut cfg = red.config(&flags.sample_config(Some(DEFAULT_CHECK_SAMPLES)));
    cfg.tol = flags.tol;
    let report = verify_reduction(&sys, &red, &cfg)?;
    let mut text = String::new();
    writeln!(text, "reduction {} of system {}", red.name, sys.name()).unwrap();
    writeln!(text, "  u = {}", red.u.expr).unwrap();
    writeln!(text, "  v = {}", red.v.expr).unwrap();
    writeln!(text, "  u' = {}", red.map.gu).unwrap();
    writeln!(text, "  v' = {}", red.map.gv).unwrap();
    writeln!(
        text,
        "reduced map: {} checks on {} orbits from n = {}, worst relative deviation {}",
        report.checks,
        report.trials,
        red.start,
        sci(report.max_deviation)
    )
    .unwrap();
    if let Some([xu, xv]) = &report.invariance {
        writeln!(
            text,
            "invariance: X(u) {}, X(v) {}",
            sci(xu.max_residual),
            sci(xv.max_residual)
        )
        .unwrap();
    }
    writeln!(text, "{}", verdict(report.passed)).unwrap();
    let mut result = to_json(&report);
    result["u"] = json!(red.u.expr.to_string());
    result["v"] = json!(red.v.expr.to_string());
    result["map"] = json!([red.map.gu.to_string(), red.map.gv.to_string()]);
    Ok(Outcome {
        passed: report.passed,
        result,
        text,
    })
}

fn is_integral_file(src: &str) -> bool {
    src.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .any(|l| l.starts_with("integral ") || l == "integral")
}

pub fn cmd_verify(flags: &RunFlags, system: &Path, file: &Path) -> Result<Outcome, Failure> {
    let sys = load_system(system)?;
    let src = read(file)?;
    let mut text = String::new();
    let mut items = Vec::new();
    let mut passed = true;
    if is_integral_file(&src) {
        let integrals = parse_integrals(&src).map_err(|e| with_file(file, e.into()))?;
        let icfg = flags.sample_config(Some(DEFAULT_INTEGRAL_SAMPLES));
        let check = integral_check_config(flags);
        for f in &integrals {
            let quad = GradientQuad::of_integral(f);
            let closed = integrability_check(&quad, &icfg)?;
            let orbit = verify_integral(&sys, f, &check)?;
            let ok = closed.passed && orbit.passed;
            passed &= ok;
            writeln!(
                text,
                "{}  drift {} over {} orbits x {} steps, integrability {}  {}",
                f.name,
                sci(orbit.max_deviation),
                orbit.trials,
                orbit.steps,
                sci(closed.max_residual),
                verdict(ok)
            )
            .unwrap();
            items.push(json!({
                "name": f.name,
                "phi": f.phi.to_string(),
                "integrability": to_json(&closed),
                "orbits": to_json(&orbit),
                "passed": ok,
            }));
        }
        return Ok(Outcome {
            result: json!({ "kind": "integrals", "items": items }),
            text,
            passed,
        });
    }
    let pairs = parse_charpairs(&src).map_err(|e| with_file(file, e.into()))?;
    let cfg = flags.sample_config(Some(DEFAULT_CHECK_SAMPLES));
    for p in &pairs {
        let r = check_generator(&sys, p, &cfg)?;
        passed &= r.passed;
        writeln!(text, "{}  {}  {}", p.name, residual_text(&r), verdict(r.passed)).unwrap();
        items.push(json!({
            "name": p.name,
            "q1": p.component(Component::X).to_string(),
            "q2": p.component(Component::Y).to_string(),
            "check": to_json(&r),
        }));
    }
    Ok(Outcome {
        result: json!({ "kind": "generators", "items": items }),
        text,
        passed,
    })
}
