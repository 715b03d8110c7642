//! One function per subcommand; each returns the JSON result and, when it has one, a field.

use std::f64::consts::PI;
use std::sync::Arc;

use hypermetric::analysis_spaces::{green_energy_sup, littlewood_paley_check, solvability_integral, TrendOptions};
use hypermetric::analytic::{AnalyticMap, Polynomial};
use hypermetric::blaschke::{degree_by_winding, from_critical_points, from_critical_points_with, matching_distance, FiniteBlaschke, InverseOptions, MultiplicitySequence};
use hypermetric::disk_core::{pseudo_hyperbolic, GridField, PolarGrid};
use hypermetric::gauss_solver::{
    exhaustion_run, solve_dirichlet_fd, solve_dirichlet_green, solve_radial, CurvatureTag, DirichletProblem, ExhaustionOptions, FdOptions, GreenOptions, RadialOptions, Schedule,
};
use hypermetric::maximal::{boundary_integral_criterion, boundary_probe, perron_sweep, schwarz_pick_refinement, CoverOptions, ProbeVerdict, SweepConfig};
use hypermetric::metrics::{ahlfors_check, hyperbolic_pullback, sample_points, sk_check, SampleOptions, GUARD_RADIUS};
use hypermetric::{Error, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::render::Field;
use crate::parse::{format_complex, parse_complex, parse_curvature, parse_map, parse_points, parse_sequence};

pub struct Outcome {
    pub result: Value,
    pub field: Option<Field>,
    /// Reported after the JSON is written, for runs that produce a usable partial result.
    pub failure: Option<CliError>,
}

impl Outcome {
    fn ok(result: Value) -> Self {
        Outcome { result, field: None, failure: None }
    }
}

fn cz(z: C64) -> Value {
    Value::String(format_complex(z))
}

fn cz_list(zs: &[C64]) -> Value {
    Value::Array(zs.iter().map(|&z| cz(z)).collect())
}

fn sequence_json(s: &MultiplicitySequence) -> Value {
    Value::Array(s.entries().iter().map(|(p, m)| json!({ "point": cz(p.z()), "multiplicity": m })).collect())
}

fn wants_field(cfg: &RunConfig) -> bool {
    cfg.path("csv").is_some() || cfg.path("svg").is_some()
}

/// Samples a density on the output grid.
fn density_field(cfg: &RunConfig, f: impl Fn(C64) -> f64 + Sync) -> Result<Field, CliError> {
    let n_r = crate::parse::parse_usize("grid-n-r", cfg.output("grid-n-r"))?;
    let n_theta = crate::parse::parse_usize("grid-n-theta", cfg.output("grid-n-theta"))?;
    let r_max = crate::parse::parse_f64("grid-r-max", cfg.output("grid-r-max"))?;
    let grid = Arc::new(PolarGrid::uniform(C64::new(0.0, 0.0), r_max, n_r, n_theta)?);
    Ok(Field::from_grid(&GridField::sample(grid, f)?))
}

fn blaschke_json(b: &FiniteBlaschke) -> Result<Value, CliError> {
    let boundary_deviation = (0..512)
        .map(|j| (b.eval_any(C64::from_polar(1.0, 2.0 * PI * j as f64 / 512.0)).0.norm() - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(json!({
        "degree": b.degree(),
        "rotation": cz(b.rotation()),
        "zeros": sequence_json(b.zeros()),
        "critical_points": sequence_json(&b.critical_points()?),
        "winding_degree": degree_by_winding(b, 1.0)?,
        "boundary_modulus_deviation": boundary_deviation,
    }))
}

fn with_density(cfg: &RunConfig, b: &FiniteBlaschke, result: Value) -> Result<Outcome, CliError> {
    let field = if wants_field(cfg) { Some(density_field(cfg, |z| b.hyperbolic_density(z))?) } else { None };
    Ok(Outcome { result, field, failure: None })
}

pub fn blaschke_from_zeros(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let b = FiniteBlaschke::from_zeros(parse_sequence(cfg.get("zeros"))?, parse_complex(cfg.get("rotation"))?)?;
    let result = blaschke_json(&b)?;
    with_density(cfg, &b, result)
}

pub fn blaschke_from_critical(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let c = parse_sequence(cfg.get("points"))?;
    let opts = InverseOptions { r_max: cfg.f64("r-max")?, match_tol: cfg.f64("match-tol")?, max_newton: cfg.usize("max-newton")?, ..Default::default() };
    let (b, report) = from_critical_points_with(&c, &opts)?;
    let mut result = blaschke_json(&b)?;
    result["requested_critical_points"] = sequence_json(&c);
    result["residual"] = json!(report.residual);
    result["iterations"] = json!(report.iterations);
    result["homotopy_used"] = json!(report.homotopy_used);
    result["max_match_distance"] = json!(report.max_match_distance);
    result["max_derivative_at_targets"] = json!(report.max_derivative_at_targets);
    result["warnings"] = json!(report.warnings);
    with_density(cfg, &b, result)
}

fn hyperbolic_boundary(z: C64) -> f64 {
    -(-z.norm_sqr()).ln_1p()
}

pub fn solve_gauss(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let k = parse_curvature(cfg.get("k"))?;
    let radius = cfg.f64("radius")?;
    let center = parse_complex(cfg.get("center"))?;
    let hyperbolic = cfg.get("boundary") == "hyperbolic";
    let constant = if hyperbolic { None } else { Some(cfg.f64("boundary")?) };
    let exact = hyperbolic && matches!(k.tag(), CurvatureTag::Constant { value } if *value == 4.0);
    let (tol, max_newton) = (cfg.f64("tol")?, cfg.usize("max-newton")?);
    let problem = match constant {
        Some(c) => DirichletProblem::new(center, radius, k.clone(), move |_| c)?,
        None => DirichletProblem::new(center, radius, k.clone(), hyperbolic_boundary)?,
    };
    let method = cfg.get("method");
    let (report, field, summary) = match method {
        "fd" | "green" => {
            let (n_r, n_theta) = (cfg.usize("n-r")?, cfg.usize("n-theta")?);
            let sol = if method == "fd" {
                solve_dirichlet_fd(&problem, &FdOptions { n_r, n_theta, tol, max_newton })?
            } else {
                solve_dirichlet_green(&problem, &GreenOptions { n_r, n_theta, tol, ..Default::default() })?
            };
            let u = &sol.u;
            let g = u.grid();
            let mut err = 0.0f64;
            if exact {
                for i in 0..g.n_r() {
                    for j in 0..g.n_theta() {
                        err = err.max((u.at(i, j) - hyperbolic_boundary(g.point(i, j))).abs());
                    }
                }
            }
            let (lo, hi) = u.values().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            let summary = json!({ "n_r": n_r, "n_theta": n_theta, "center_value": sol.center_value(), "min": lo, "max": hi, "exact_max_error": exact.then_some(err) });
            (sol.report.clone(), Field::from_grid(u), summary)
        }
        "radial" => {
            if center != C64::new(0.0, 0.0) {
                return Err(CliError::Usage("method radial needs center 0+0j".into()));
            }
            let c = constant.unwrap_or_else(|| hyperbolic_boundary(C64::new(radius, 0.0)));
            let prof = solve_radial(&k, radius, c, &RadialOptions { per_unit: cfg.usize("per-unit")?, richardson: true, max_newton })?;
            let err = prof.radii().iter().zip(&prof.u).map(|(&r, &u)| (u - hyperbolic_boundary(C64::new(r, 0.0))).abs()).fold(0.0, f64::max);
            let summary = json!({ "nodes": prof.u.len(), "center_value": prof.center_value(), "exact_max_error": exact.then_some(err) });
            (prof.report.clone(), Field::from_profile(&prof), summary)
        }
        _ => return Err(CliError::Usage(format!("method must be fd, green or radial, got '{method}'"))),
    };
    let mut result = summary;
    result["method"] = json!(report.method);
    result["iterations"] = json!(report.iterations);
    result["linear_iterations"] = json!(report.linear_iterations);
    result["residual_history"] = json!(report.residual_history);
    result["final_residual"] = json!(report.final_residual());
    result["warnings"] = json!(report.warnings);
    result["curvature"] = json!(k.tag());
    Ok(Outcome { result, field: Some(field), failure: None })
}

fn parse_schedule(s: &str) -> Result<Schedule, CliError> {
    let (kind, arg) = s.split_once(':').ok_or_else(|| CliError::Usage(format!("schedule '{s}' needs a kind: prefix")))?;
    let list = |a: &str| a.split(';').map(|x| crate::parse::parse_f64("schedule", x)).collect::<Result<Vec<_>, _>>();
    let count = |a: &str| crate::parse::parse_usize("schedule", a).and_then(|n| u32::try_from(n).map_err(|_| CliError::Usage("schedule length out of range".into())));
    match kind {
        "depth-doubling" => Ok(Schedule::depth_doubling(count(arg)?)),
        "dyadic-radii" => Ok(Schedule::dyadic_radii(count(arg)?)),
        "radii" => Ok(Schedule::Radii(list(arg)?)),
        "depths" => Ok(Schedule::Depths(list(arg)?)),
        _ => Err(CliError::Usage(format!("unknown schedule kind '{kind}'"))),
    }
}

pub fn exhaustion(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let k = parse_curvature(cfg.get("k"))?;
    let schedule = parse_schedule(cfg.get("schedule"))?;
    let opts = ExhaustionOptions {
        c: cfg.f64("c")?,
        per_unit: cfg.usize("per-unit")?,
        n_r: cfg.usize("n-r")?,
        n_theta: cfg.usize("n-theta")?,
        ..Default::default()
    };
    let (iterates, report) = exhaustion_run(&k, &schedule, &opts)?;
    let field = iterates.last().map(|it| match it {
        hypermetric::gauss_solver::Iterate::Radial(p) => Field::from_profile(p),
        hypermetric::gauss_solver::Iterate::Grid(s) => Field::from_grid(&s.u),
    });
    let mut result = serde_json::to_value(&report).map_err(|e| CliError::Render(e.to_string()))?;
    result["schedule"] = json!(schedule);
    result["curvature"] = json!(k.tag());
    Ok(Outcome { result, field, failure: None })
}

pub fn check_solvability(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let k = parse_curvature(cfg.get("k"))?;
    let opts = TrendOptions::default();
    let integral = solvability_integral(&k, &opts);
    let n = cfg.usize("energy-samples")?;
    let energy = if n > 0 {
        let pts = sample_points(n, cfg.seed()?, 0.95);
        Some(green_energy_sup(&k, &pts, &opts)?)
    } else {
        None
    };
    Ok(Outcome::ok(json!({ "curvature": k.tag(), "solvability_integral": integral, "green_energy_sup": energy })))
}

fn random_point(rng: &mut ChaCha8Rng, r_max: f64) -> C64 {
    let r = r_max * rng.gen::<f64>().sqrt();
    C64::from_polar(r, 2.0 * PI * rng.gen::<f64>())
}

/// `n` points of modulus at most `r_max`, pairwise pseudohyperbolically at least 0.15 apart.
fn separated_points(rng: &mut ChaCha8Rng, n: usize, r_max: f64) -> Vec<C64> {
    let mut out: Vec<C64> = Vec::with_capacity(n);
    while out.len() < n {
        let z = random_point(rng, r_max);
        if out.iter().all(|&w| pseudo_hyperbolic(z, w) >= 0.15) {
            out.push(z);
        }
    }
    out
}

pub fn verify_identities(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let degree = cfg.usize("degree")?;
    let count = cfg.usize("count")?;
    let budget = cfg.usize("budget")?;
    let seed = cfg.seed()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if degree == 0 {
        return Err(Error::Parameter("degree must be at least 1".into()).into());
    }
    let suite = cfg.get("suite");
    let (cases, passed, summary) = match suite {
        "littlewood-paley" => {
            let mut maps: Vec<(String, Arc<dyn AnalyticMap>)> = vec![
                ("z".into(), Arc::new(Polynomial::monomial(1))),
                ("z^2".into(), Arc::new(Polynomial::monomial(2))),
            ];
            for i in 0..count {
                let d = 1 + i % degree;
                let coeffs: Vec<C64> = (0..=d).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
                maps.push((format!("polynomial:{}", coeffs.iter().map(|&c| format_complex(c)).collect::<Vec<_>>().join(",")), Arc::new(Polynomial::new(coeffs))));
                let zeros = separated_points(&mut rng, 1 + i % degree.min(4), 0.7);
                let b = FiniteBlaschke::from_zeros(MultiplicitySequence::from_points(&zeros)?, C64::new(1.0, 0.0))?;
                maps.push((format!("blaschke:{}", zeros.iter().map(|&c| format_complex(c)).collect::<Vec<_>>().join(",")), Arc::new(b)));
            }
            let rows: Vec<(String, f64, f64, f64)> = maps
                .iter()
                .map(|(name, f)| {
                    let lp = littlewood_paley_check(f.as_ref());
                    (name.clone(), lp.lhs, lp.rhs, lp.gap)
                })
                .collect();
            let max_gap = rows.iter().map(|r| r.3).fold(0.0, f64::max);
            let cases: Vec<Value> = rows.iter().map(|(m, l, r, g)| json!({ "map": m, "lhs": l, "rhs": r, "gap": g })).collect();
            (cases, max_gap <= 1e-6, json!({ "max_gap": max_gap }))
        }
        "sk-ahlfors" => {
            let mut cases = Vec::new();
            let (mut worst_sk, mut worst_ratio) = (f64::NEG_INFINITY, 0.0f64);
            let mut all = true;
            for i in 0..count {
                let pts = separated_points(&mut rng, 1 + i % degree, 0.8);
                let f = from_critical_points(&MultiplicitySequence::from_points(&pts)?)?;
                let lambda = hyperbolic_pullback(Arc::new(f))?;
                let opts = SampleOptions { budget, seed: seed.wrapping_add(i as u64), r_max: 0.999 };
                let sk = sk_check(&lambda, &opts);
                let ah = ahlfors_check(&lambda, &opts);
                worst_sk = worst_sk.max(sk.max_violation);
                worst_ratio = worst_ratio.max(ah.max_ratio);
                all &= sk.passed && ah.passed;
                cases.push(json!({
                    "critical_points": cz_list(&pts),
                    "sk_max_violation": sk.max_violation,
                    "sk_tolerance": sk.tolerance,
                    "sk_passed": sk.passed,
                    "ahlfors_max_ratio": ah.max_ratio,
                    "ahlfors_passed": ah.passed,
                }));
            }
            (cases, all, json!({ "max_sk_violation": worst_sk, "max_ahlfors_ratio": worst_ratio }))
        }
        "inverse-roundtrip" => {
            let mut cases = Vec::new();
            let mut worst = 0.0f64;
            let mut all = true;
            for i in 0..count {
                let n = 1 + i % degree;
                let pts = separated_points(&mut rng, n, 0.8);
                let b = from_critical_points(&MultiplicitySequence::from_points(&pts)?)?;
                let back = b.critical_points()?.expanded();
                let dist = matching_distance(&pts, &back);
                let winding = degree_by_winding(&b, 1.0)?;
                worst = worst.max(dist);
                let ok = dist <= 1e-8 && winding == n as i64 + 1;
                all &= ok;
                cases.push(json!({ "critical_points": cz_list(&pts), "match_distance": dist, "winding_degree": winding, "passed": ok }));
            }
            (cases, all, json!({ "max_match_distance": worst }))
        }
        _ => return Err(CliError::Usage(format!("unknown suite '{suite}'"))),
    };
    let mut result = summary;
    result["suite"] = json!(suite);
    result["cases"] = Value::Array(cases);
    result["passed"] = json!(passed);
    Ok(Outcome::ok(result))
}

pub fn maximal_metric(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let c = parse_sequence(cfg.get("zeros"))?;
    let cover = CoverOptions { r_max: cfg.f64("r-max")?, n_r: cfg.usize("n-r")?, n_theta: cfg.usize("n-theta")?, ..Default::default() };
    let mut sweep = SweepConfig::build(&c, &cover)?;
    sweep.rounds = cfg.usize("rounds")?;
    sweep.tol = cfg.f64("tol")?;
    let (state, report) = perron_sweep(&c, &sweep)?;
    let density = state.density();
    let budget = cfg.usize("budget")?;
    let opts = SampleOptions { budget, seed: cfg.seed()?, r_max: cover.r_max };
    let sk = sk_check(&density, &opts);
    let ah = ahlfors_check(&density, &opts);
    let integral = boundary_integral_criterion(&density, &[0.5, 0.7, 0.9, 0.95, 0.99])?;
    let oracle = if cfg.bool("oracle")? {
        let f = from_critical_points(&c)?;
        let pts: Vec<C64> = sample_points(budget, opts.seed, 0.9)
            .into_iter()
            .filter(|z| c.entries().iter().all(|(p, _)| (p.z() - z).norm() >= GUARD_RADIUS))
            .collect();
        let worst = pts.iter().map(|&z| (state.eval(z) / f.hyperbolic_density(z) - 1.0).abs()).fold(0.0, f64::max);
        Some(json!({ "max_relative_error": worst, "samples": pts.len(), "region_radius": 0.9, "zeros": sequence_json(f.zeros()) }))
    } else {
        None
    };
    let field = if wants_field(cfg) { Some(Field::from_grid(&GridField::sample(state.log_ratio().grid().clone(), |z| state.eval(z))?)) } else { None };
    let failure = (!report.converged).then(|| {
        CliError::Core(Error::NonConvergence { what: "Perron sweep".into(), iterations: report.rounds, residual: report.update_history.last().copied().unwrap_or(f64::NAN) })
    });
    let result = json!({
        "zeros": sequence_json(&c),
        "sweep": report,
        "zero_disks": sweep.zero_disks.iter().map(|d| json!({ "center": cz(d.center), "radius": d.radius })).collect::<Vec<_>>(),
        "sk_check": { "max_violation": sk.max_violation, "tolerance": sk.tolerance, "samples": sk.samples.len(), "passed": sk.passed },
        "ahlfors_check": { "max_ratio": ah.max_ratio, "argmax": cz(ah.argmax), "passed": ah.passed },
        "boundary_integral": integral,
        "oracle": oracle,
    });
    Ok(Outcome { result, field, failure })
}

pub fn boundary_probe_cmd(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let f = parse_map(cfg.get("map"))?;
    let zeta = parse_complex(cfg.get("zeta"))?;
    let r = boundary_probe(f.as_ref(), zeta, cfg.f64("delta")?, cfg.usize("count")?, cfg.f64("rho-min")?)?;
    let verdict = match r.verdict {
        ProbeVerdict::TendsToOne => json!({ "trend": "tends-to-one" }),
        ProbeVerdict::TendsToOther { limit } => json!({ "trend": "tends-to-other", "limit": limit }),
        ProbeVerdict::NoLimitDetected => json!({ "trend": "no-limit-detected" }),
    };
    let samples: Vec<Value> = r.samples.iter().map(|&(z, v)| json!({ "z": cz(z), "distance": 1.0 - z.norm(), "value": v })).collect();
    Ok(Outcome::ok(json!({ "map": f.describe(), "zeta": cz(r.zeta), "delta": r.delta, "samples": samples, "verdict": verdict })))
}

pub fn schwarz_pick(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let f = parse_map(cfg.get("map"))?;
    let c_star = MultiplicitySequence::from_points(&parse_points(cfg.get("critical"))?)?;
    let opts = SampleOptions { budget: cfg.usize("budget")?, seed: cfg.seed()?, r_max: cfg.f64("r-max")? };
    let r = schwarz_pick_refinement(f.as_ref(), &c_star, &opts, cfg.f64("tolerance")?)?;
    Ok(Outcome::ok(json!({
        "map": f.describe(),
        "critical_subset": sequence_json(&c_star),
        "max_ratio": r.max_ratio,
        "argmax": cz(r.argmax),
        "max_chain_ratio": r.max_chain_ratio,
        "samples": r.samples,
        "tolerance": r.tolerance,
        "passed": r.passed,
        "counterexample": r.counterexample.map(cz),
    })))
}

pub fn dispatch(cfg: &RunConfig) -> Result<Outcome, CliError> {
    match cfg.command {
        "blaschke-from-zeros" => blaschke_from_zeros(cfg),
        "blaschke-from-critical" => blaschke_from_critical(cfg),
        "solve-gauss" => solve_gauss(cfg),
        "exhaustion" => exhaustion(cfg),
        "check-solvability" => check_solvability(cfg),
        "verify-identities" => verify_identities(cfg),
        "maximal-metric" => maximal_metric(cfg),
        "boundary-probe" => boundary_probe_cmd(cfg),
        "schwarz-pick" => schwarz_pick(cfg),
        other => Err(CliError::Usage(format!("unknown command '{other}'"))),
    }
}
