use febvp::geodesics::{check_klapka, geodesic_G, half_plane_geodesic, jensen_midpoint_check};
use febvp::laws::{check_angelesco, check_boundary, check_composition, check_extension, check_lemma1_equivalence};
use febvp::ode::integrate_ivp;
use febvp::reconstruction::reconstruct_points;
use febvp::shooting::{solve_integral, solve_neumann};
use febvp::{
    Config, Connection, DependenceEvaluator, Evaluator, Geodesics, Integral, LawReport, Neumann, Reconstruction,
    StatePoint,
};
use serde_json::{json, Value};

use crate::args::{parse_list, ConnectionKind, GeodesicArgs, ReconstructArgs, SolveArgs, VerifyArgs};
use crate::config::{
    require_ode, resolve_ode, sample_spec, shooting_config, Conditions, ResolvedOde, RunConfig,
};
use crate::error::CliError;
use crate::output::{columns, num, nums, Output};

/// Rendered output, plus the error to report after printing it when a
/// pass threshold was missed.
pub struct Outcome {
    pub output: Output,
    pub breach: Option<CliError>,
}

pub const LAWS: [&str; 7] = ["composition", "boundary", "extension", "lemma1", "klapka", "jensen", "angelesco"];

fn finite(name: &str, xs: &[f64]) -> Result<(), CliError> {
    match xs.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(CliError::config("invalid_value", format!("{name}: value {} is not finite", xs[i]))
            .with("argument", name)
            .with("index", i)),
        None => Ok(()),
    }
}

fn arity(name: &str, values: &[f64], expected: usize, layout: &str) -> Result<(), CliError> {
    if values.len() != expected {
        return Err(CliError::config(
            "invalid_conditions",
            format!("--{name} expects {expected} values ({layout}) for this equation, got {}", values.len()),
        )
        .with("argument", name)
        .with("expected", expected)
        .with("got", values.len()));
    }
    finite(name, values)
}

fn flag_conditions(args: &SolveArgs, n: usize) -> Result<Option<Conditions>, CliError> {
    if let Some(v) = &args.neumann {
        arity("neumann", v, 2 + 2 * n, "ALPHA BETA A.. B..")?;
        return Ok(Some(Conditions::Neumann {
            alpha: v[0],
            beta: v[1],
            a: v[2..2 + n].to_vec(),
            b: v[2 + n..].to_vec(),
        }));
    }
    if let Some(v) = &args.integral {
        arity("integral", v, 2 + 2 * n, "ALPHA BETA A.. V..")?;
        return Ok(Some(Conditions::Integral {
            alpha: v[0],
            beta: v[1],
            a: v[2..2 + n].to_vec(),
            v: v[2 + n..].to_vec(),
        }));
    }
    if let Some(v) = &args.cauchy {
        arity("cauchy", v, 1 + 2 * n, "ALPHA A.. V..")?;
        return Ok(Some(Conditions::Cauchy {
            alpha: v[0],
            a: v[1..1 + n].to_vec(),
            v: v[1 + n..].to_vec(),
        }));
    }
    Ok(None)
}

fn check_dim(name: &str, xs: &[f64], n: usize) -> Result<(), CliError> {
    if xs.len() != n {
        return Err(CliError::config(
            "dimension_mismatch",
            format!("{name} has {} components, the equation has {n}", xs.len()),
        )
        .with("argument", name)
        .with("expected", n)
        .with("got", xs.len()));
    }
    finite(name, xs)
}

fn state_rows(states: &[StatePoint<f64>], n: usize) -> Output {
    let mut header = vec!["tau".to_string()];
    header.extend(columns("x", n));
    header.extend(columns("v", n));
    let json = Value::Array(
        states
            .iter()
            .map(|s| json!({"tau": s.tau, "x": s.x, "v": s.v}))
            .collect(),
    );
    let mut out = Output::new(json, header);
    out.rows = states
        .iter()
        .map(|s| std::iter::once(num(s.tau)).chain(nums(&s.x)).chain(nums(&s.v)).collect())
        .collect();
    out
}

pub fn solve(args: &SolveArgs, file: &RunConfig) -> Result<Outcome, CliError> {
    let ode = require_ode(resolve_ode(file.ode.as_ref(), &args.ode)?)?;
    let cfg = shooting_config(&file.tolerances, &args.tolerances)?;
    let n = ode.dim();
    let conditions = match flag_conditions(args, n)? {
        Some(c) => c,
        None => file.conditions.clone().ok_or_else(|| {
            CliError::config("missing_conditions", "give one of --neumann, --integral or --cauchy")
        })?,
    };
    let mut taus = if args.tau.is_empty() {
        file.taus.clone().unwrap_or_default()
    } else {
        args.tau.clone()
    };
    if taus.is_empty() {
        return Err(CliError::config("missing_tau", "give at least one --tau"));
    }
    finite("tau", &taus)?;
    taus.sort_by(f64::total_cmp);

    let f = &ode.ode;
    let states = match conditions {
        Conditions::Neumann { alpha, beta, a, b } => {
            check_dim("a", &a, n)?;
            check_dim("b", &b, n)?;
            let res = solve_neumann(f, &Neumann::new(alpha, beta, a, b)?, &cfg, None)?;
            taus.iter()
                .map(|t| res.state_at(f, *t, &cfg.integrator))
                .collect::<Result<Vec<_>, _>>()?
        }
        Conditions::Integral { alpha, beta, a, v } => {
            check_dim("a", &a, n)?;
            check_dim("v", &v, n)?;
            let res = solve_integral(f, &Integral::new(alpha, beta, a, v)?, &cfg)?;
            taus.iter()
                .map(|t| res.state_at(f, *t, &cfg.integrator))
                .collect::<Result<Vec<_>, _>>()?
        }
        Conditions::Cauchy { alpha, a, v } => {
            check_dim("a", &a, n)?;
            check_dim("v", &v, n)?;
            finite("alpha", &[alpha])?;
            let start = StatePoint::new(alpha, a, v);
            taus.iter()
                .map(|t| integrate_ivp(f, &start, *t, &cfg.integrator).and_then(|tr| tr.eval(*t)))
                .collect::<Result<Vec<_>, _>>()?
        }
    };
    Ok(Outcome {
        output: state_rows(&states, n),
        breach: None,
    })
}

fn default_threshold(law: &str, closed: bool, connection: Option<ConnectionKind>) -> Option<f64> {
    let flat = connection == Some(ConnectionKind::Flat);
    Some(match law {
        "composition" if closed => 1e-10,
        "composition" => 1e-7,
        "boundary" if closed => 1e-9,
        "boundary" => 1e-8,
        "extension" => 1e-8,
        "lemma1" => 1e-9,
        "lemma1_quadrature" => 1e-8,
        "angelesco" if closed => 1e-10,
        "angelesco" => 1e-6,
        "klapka" | "jensen" if flat => 1e-12,
        "klapka" | "jensen" => 1e-6,
        _ => return None,
    })
}

fn threshold_keys() -> Vec<String> {
    let mut keys: Vec<String> = LAWS.iter().map(|s| s.to_string()).collect();
    keys.push("lemma1_quadrature".into());
    keys.extend(febvp::laws::DIAGONAL_EPS.iter().map(|e| format!("extension_diagonal_{e:e}")));
    keys
}

fn connection_of(kind: ConnectionKind, dim: Option<usize>) -> Result<Connection<f64>, CliError> {
    match (kind, dim) {
        (ConnectionKind::Flat, d) => {
            let d = d.unwrap_or(2);
            if d == 0 {
                return Err(CliError::config("invalid_dimension", "--dim must be at least 1"));
            }
            Ok(Connection::flat(d))
        }
        (ConnectionKind::HalfPlane, None | Some(2)) => Ok(Connection::poincare_half_plane()),
        (ConnectionKind::HalfPlane, Some(d)) => Err(CliError::config(
            "invalid_dimension",
            format!("the half-plane connection is 2-dimensional, got --dim {d}"),
        )),
    }
}

fn missing_connection() -> CliError {
    CliError::config("missing_connection", "klapka, jensen and geodesic need --connection flat|half_plane")
}

pub fn verify(args: &VerifyArgs, file: &RunConfig, seed: u64) -> Result<Outcome, CliError> {
    let ode = resolve_ode(file.ode.as_ref(), &args.ode)?;
    let connection = args.connection.or(file.connection);
    let dim = args.dim.or(file.dim);
    let closed = args.closed_form || file.closed_form.unwrap_or(false);
    let spec = sample_spec(file.sampling, &args.sampling, seed)?;
    let cfg = shooting_config(&file.tolerances, &args.tolerances)?;

    let mut laws: Vec<String> = if !args.laws.is_empty() {
        args.laws.iter().map(|s| s.trim().to_string()).collect()
    } else if let Some(l) = &file.laws {
        l.clone()
    } else if ode.is_some() {
        vec!["composition".into(), "boundary".into()]
    } else if connection.is_some() {
        vec!["klapka".into(), "jensen".into()]
    } else {
        return Err(CliError::config("missing_ode", "nothing to verify: give --catalog, --ode or --connection"));
    };
    let mut seen = Vec::new();
    laws.retain(|l| {
        let fresh = !seen.contains(l);
        seen.push(l.clone());
        fresh
    });
    if let Some(bad) = laws.iter().find(|l| !LAWS.contains(&l.as_str())) {
        return Err(CliError::config("unknown_law", format!("unknown law '{bad}'"))
            .with("law", bad.as_str())
            .with("available", LAWS.to_vec()));
    }

    let mut overrides = file.thresholds.clone();
    overrides.extend(args.threshold.iter().cloned());
    let keys = threshold_keys();
    if let Some(bad) = overrides.keys().find(|k| !keys.contains(k)) {
        return Err(CliError::config("unknown_law", format!("threshold for unknown law '{bad}'"))
            .with("law", bad.as_str())
            .with("available", keys));
    }

    let needs_ode = laws.iter().any(|l| !matches!(l.as_str(), "klapka" | "jensen"));
    let ode = if needs_ode { Some(require_ode(ode)?) } else { None };
    let evaluator: Option<Box<dyn DependenceEvaluator<f64>>> = match &ode {
        Some(o) if closed => Some(Box::new(o.closed_form()?.clone())),
        Some(o) => Some(Box::new(Evaluator::new(o.ode.clone(), cfg))),
        None => None,
    };
    let geodesics = match laws.iter().any(|l| matches!(l.as_str(), "klapka" | "jensen")) {
        true => Some(Geodesics::new(connection_of(connection.ok_or_else(missing_connection)?, dim)?, cfg)),
        false => None,
    };

    let mut reports: Vec<LawReport> = Vec::new();
    let mut breaches: Vec<Value> = Vec::new();
    for law in &laws {
        let f = || evaluator.as_deref().expect("evaluator for ODE laws");
        let g = || geodesics.as_ref().expect("connection for geodesic laws");
        match law.as_str() {
            "composition" => reports.push(check_composition(f(), &spec)?),
            "boundary" => reports.push(check_boundary(f(), &spec)?),
            "angelesco" => reports.push(check_angelesco(f(), &spec)?),
            "extension" => {
                let ext = check_extension(f(), &spec)?;
                if !ext.is_monotone() {
                    let maxima: Vec<f64> = ext.diagonal.iter().map(|(_, r)| r.max_residual).collect();
                    breaches.push(json!({"law": "extension_diagonal", "reason": "not strictly decreasing", "max_residuals": maxima}));
                }
                reports.extend(ext.reports());
            }
            "lemma1" => {
                let o = ode.as_ref().expect("ode for lemma1");
                reports.extend(check_lemma1_equivalence(&o.ode, &spec, &cfg)?.reports());
            }
            "klapka" => reports.push(check_klapka(g(), &spec)?),
            "jensen" => reports.push(jensen_midpoint_check(g(), &spec)?),
            _ => unreachable!("law names validated above"),
        }
    }

    let thresholds: Vec<Option<f64>> = reports
        .iter()
        .map(|r| overrides.get(&r.law).copied().or_else(|| default_threshold(&r.law, closed, connection)))
        .collect();
    let mut out = Output::new(
        serde_json::to_value(&reports).expect("reports serialize"),
        ["law", "samples", "max_residual", "mean_residual", "failures", "threshold", "status"]
            .map(String::from)
            .to_vec(),
    );
    for (r, thr) in reports.iter().zip(&thresholds) {
        let pass = r.within(thr.unwrap_or(f64::INFINITY));
        if !pass {
            breaches.push(json!({
                "law": r.law,
                "max_residual": r.max_residual,
                "threshold": thr,
                "failures": r.failures,
            }));
        }
        out.rows.push(vec![
            r.law.clone(),
            r.samples.to_string(),
            num(r.max_residual),
            num(r.mean_residual),
            r.failures.to_string(),
            thr.map_or("-".to_string(), num),
            if pass { "pass" } else { "fail" }.to_string(),
        ]);
    }
    let breach = (!breaches.is_empty()).then(|| {
        CliError::numeric(
            "threshold_exceeded",
            format!("{} law check(s) failed", breaches.len()),
        )
        .with("failed", breaches)
    });
    Ok(Outcome { output: out, breach })
}

fn parse_point(text: &str, n: usize) -> Result<(f64, Vec<f64>, Vec<f64>), CliError> {
    let bad = |msg: String| CliError::config("invalid_point", msg).with("input", text);
    let values = parse_list(text).map_err(|e| bad(format!("--point '{text}': {e}")))?;
    point_from(&values, n).map_err(|m| bad(format!("--point '{text}': {m}")))
}

fn point_from(values: &[f64], n: usize) -> Result<(f64, Vec<f64>, Vec<f64>), String> {
    if values.len() != 1 + 2 * n {
        return Err(format!("expected {} values (TAU,X..,V..), got {}", 1 + 2 * n, values.len()));
    }
    if values.iter().any(|x| !x.is_finite()) {
        return Err("values must be finite".into());
    }
    Ok((values[0], values[1..1 + n].to_vec(), values[1 + n..].to_vec()))
}

pub fn reconstruct(args: &ReconstructArgs, file: &RunConfig) -> Result<Outcome, CliError> {
    let ode: ResolvedOde = require_ode(resolve_ode(file.ode.as_ref(), &args.ode)?)?;
    let cfg = shooting_config(&file.tolerances, &args.tolerances)?;
    let closed = args.closed_form || file.closed_form.unwrap_or(false);
    let n = ode.dim();
    let points: Vec<(f64, Vec<f64>, Vec<f64>)> = if !args.point.is_empty() {
        args.point.iter().map(|p| parse_point(p, n)).collect::<Result<_, _>>()?
    } else {
        file.points
            .as_deref()
            .unwrap_or_default()
            .iter()
            .enumerate()
            .map(|(i, p)| {
                point_from(p, n).map_err(|m| CliError::config("invalid_point", format!("points[{i}]: {m}")).with("index", i))
            })
            .collect::<Result<_, _>>()?
    };
    if points.is_empty() {
        return Err(CliError::config("missing_points", "give at least one --point TAU,X..,V.."));
    }

    let mut rcfg = Reconstruction::default();
    if let Some(h) = args.fd_step.or(file.fd_step) {
        rcfg.fd_step = h;
    }
    rcfg.validate()?;
    let numeric = Evaluator::new(ode.ode.clone(), cfg).without_cache();
    let results = if closed {
        reconstruct_points(ode.closed_form()?, &points, &rcfg)
    } else {
        let solver_tol = cfg.newton_tol.max(cfg.integrator.rel_tol);
        reconstruct_points(&numeric, &points, &rcfg.with_step(rcfg.noise_aware_step(solver_tol)))
    };
    let threshold = args
        .threshold
        .or(file.threshold)
        .unwrap_or(if closed { 1e-8 } else { 1e-4 });

    let known = ode.catalog.is_some();
    let mut header = vec!["tau".to_string()];
    header.extend(columns("x", n));
    header.extend(columns("v", n));
    header.extend(columns("f_reconstructed", n));
    if known {
        header.extend(columns("f_true", n));
        header.push("abs_err".into());
    }
    let mut out = Output::new(Value::Null, header);
    let mut rows_json = Vec::new();
    let mut worst: Option<(usize, f64)> = None;
    for (i, ((tau, x, v), res)) in points.iter().zip(results).enumerate() {
        let got = res.map_err(|e| CliError::from(e).with("point", i))?;
        let mut row: Vec<String> = std::iter::once(num(*tau)).chain(nums(x)).chain(nums(v)).chain(nums(&got)).collect();
        let mut entry = json!({"tau": tau, "x": x, "v": v, "f_reconstructed": got});
        if known {
            let truth = ode.ode.eval_rhs(*tau, x, v)?;
            let err = got.iter().zip(&truth).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if worst.is_none_or(|(_, w)| err > w) {
                worst = Some((i, err));
            }
            row.extend(nums(&truth));
            row.push(num(err));
            entry["f_true"] = json!(truth);
            entry["abs_err"] = json!(err);
        }
        out.rows.push(row);
        rows_json.push(entry);
    }
    out.json = Value::Array(rows_json);
    let breach = match worst {
        Some((i, err)) if !(err <= threshold) => Some(
            CliError::numeric(
                "threshold_exceeded",
                format!("reconstruction error {err:e} exceeds {threshold:e}"),
            )
            .with("point", i)
            .with("abs_err", err)
            .with("threshold", threshold),
        ),
        _ => None,
    };
    Ok(Outcome { output: out, breach })
}

fn point_arg(name: &str, flag: &Option<String>, file: &Option<Vec<f64>>) -> Result<Vec<f64>, CliError> {
    let values = match (flag, file) {
        (Some(text), _) => parse_list(text).map_err(|e| {
            CliError::config("invalid_point", format!("--{name} '{text}': {e}")).with("argument", name)
        })?,
        (None, Some(v)) => v.clone(),
        (None, None) => return Err(CliError::config("missing_point", format!("--{name} is required"))),
    };
    finite(name, &values)?;
    Ok(values)
}

pub fn geodesic(args: &GeodesicArgs, file: &RunConfig) -> Result<Outcome, CliError> {
    let cfg: Config = shooting_config(&file.tolerances, &args.tolerances)?;
    let kind = args.connection.or(file.connection).ok_or_else(missing_connection)?;
    let conn = connection_of(kind, args.dim.or(file.dim))?;
    let n = conn.dim();
    let a = point_arg("a", &args.a, &file.a)?;
    let b = point_arg("b", &args.b, &file.b)?;
    check_dim("a", &a, n)?;
    check_dim("b", &b, n)?;
    if kind == ConnectionKind::HalfPlane && (a[1] <= 0.0 || b[1] <= 0.0) {
        return Err(CliError::config("invalid_point", "half-plane points need y > 0"));
    }
    let rho = if !args.rho.is_empty() {
        args.rho.clone()
    } else {
        file.rho.clone().unwrap_or_else(|| vec![0.0, 0.25, 0.5, 0.75, 1.0])
    };
    finite("rho", &rho)?;

    let gmap = Geodesics::new(conn, cfg);
    let oracle = kind == ConnectionKind::HalfPlane;
    let mut header = vec!["rho".to_string()];
    header.extend(columns("g", n));
    if oracle {
        header.extend(columns("semicircle", n));
        header.push("abs_err".into());
    }
    let mut out = Output::new(Value::Null, header);
    let mut rows_json = Vec::new();
    for r in &rho {
        let g = geodesic_G(&gmap, &a, &b, *r)?;
        let mut row: Vec<String> = std::iter::once(num(*r)).chain(nums(&g)).collect();
        let mut entry = json!({"rho": r, "g": g});
        if oracle {
            let want = half_plane_geodesic([a[0], a[1]], [b[0], b[1]], *r);
            let err = (g[0] - want[0]).abs().max((g[1] - want[1]).abs());
            row.extend(nums(&want));
            row.push(num(err));
            entry["semicircle"] = json!(want);
            entry["abs_err"] = json!(err);
        }
        out.rows.push(row);
        rows_json.push(entry);
    }
    out.json = Value::Array(rows_json);
    Ok(Outcome { output: out, breach: None })
}
