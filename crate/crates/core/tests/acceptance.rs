//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero if any
//! criterion fails.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use hypermetric::analysis_spaces::{example33_k, kjgamma, littlewood_paley_check, solvability_integral, NormVerdict, TrendOptions};
use hypermetric::analytic::{hyperbolic_derivative, AnalyticMap, Automorphism, Composition, Polynomial};
use hypermetric::blaschke::{degree_by_winding, from_critical_points, matching_distance, FiniteBlaschke, MultiplicitySequence};
use hypermetric::disk_core::{pseudo_hyperbolic, GridField};
use hypermetric::gauss_solver::{
    exhaustion_run, solve_dirichlet_fd, solve_dirichlet_green, CurvatureFunction, Dichotomy, DirichletProblem, ExhaustionOptions, ExhaustionReport, FdOptions, GreenOptions, Method, Schedule,
};
use hypermetric::maximal::{boundary_probe, perron_sweep, schwarz_pick_refinement, ProbeVerdict, SweepConfig};
use hypermetric::metrics::{ahlfors_check, hyperbolic_pullback, sample_points, sk_check, ConformalDensity, SampleOptions, GUARD_RADIUS};
use hypermetric::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

/// Every density and Blaschke product built by the suite, for the global checks.
#[derive(Default)]
struct Ledger {
    densities: Vec<ConformalDensity>,
    products: Vec<FiniteBlaschke>,
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn random_point(rng: &mut ChaCha8Rng, r_max: f64) -> C64 {
    C64::from_polar(r_max * rng.gen::<f64>().sqrt(), 2.0 * PI * rng.gen::<f64>())
}

fn separated(rng: &mut ChaCha8Rng, n: usize, r_max: f64, sep: f64) -> Vec<C64> {
    let mut out: Vec<C64> = Vec::new();
    while out.len() < n {
        let z = random_point(rng, r_max);
        if out.iter().all(|&w| pseudo_hyperbolic(z, w) >= sep) {
            out.push(z);
        }
    }
    out
}

fn seq(points: &[C64]) -> MultiplicitySequence {
    MultiplicitySequence::from_points(points).unwrap()
}

fn max_abs_on_nodes(a: &GridField, exact: impl Fn(C64) -> f64) -> f64 {
    let g = a.grid();
    let mut e = 0.0f64;
    for i in 0..g.n_r() {
        for j in 0..g.n_theta() {
            e = e.max((a.at(i, j) - exact(g.point(i, j))).abs());
        }
    }
    e
}

/// `max |coarse − fine|` over the coarse nodes of an `(N, M)` and `(3N + 1, 3M)` grid pair,
/// whose nodes are nested.
fn nested_difference(coarse: &GridField, fine: &GridField) -> f64 {
    let (gc, gf) = (coarse.grid(), fine.grid());
    assert_eq!(gf.n_r(), 3 * gc.n_r() + 1);
    assert_eq!(gf.n_theta(), 3 * gc.n_theta());
    let mut d = 0.0f64;
    for i in 0..gc.n_r() {
        for j in 0..gc.n_theta() {
            assert!((gc.point(i, j) - gf.point(3 * i + 1, 3 * j)).norm() < 1e-13);
            d = d.max((coarse.at(i, j) - fine.at(3 * i + 1, 3 * j)).abs());
        }
    }
    d
}

fn exact_solution_solver() -> Verdict {
    let k = CurvatureFunction::constant(4.0).unwrap();
    let p = DirichletProblem::constant(0.9, k, -(1.0f64 - 0.81).ln()).unwrap();
    let exact = |z: C64| -(1.0 - z.norm_sqr()).ln();
    let errs: Vec<f64> = [64, 128, 256]
        .iter()
        .map(|&n| max_abs_on_nodes(&solve_dirichlet_fd(&p, &FdOptions::with_resolution(n, n)).unwrap().u, exact))
        .collect();
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let passed = errs[2] <= 1e-4 && orders.iter().all(|&o| o >= 1.8);
    verdict(passed, format!("max error at 256x256 {:.3e} (limit 1e-4); orders {:.3}, {:.3} (limit 1.8)", errs[2], orders[0], orders[1]))
}

fn cross_solver_oracle(rng: &mut ChaCha8Rng) -> Verdict {
    let mut worst = 0.0f64;
    let mut all = true;
    let mut picard = 0;
    for case in 0..10 {
        let radius: f64 = rng.gen_range(0.5..0.85);
        let center = random_point(rng, (0.95 - radius).min(0.1));
        let k = match case % 3 {
            0 => CurvatureFunction::constant(rng.gen_range(0.5..6.0)).unwrap(),
            1 => {
                let zeros = separated(rng, 1 + case % 2, 0.7, 0.2);
                let b = FiniteBlaschke::from_zeros(seq(&zeros), c(1.0, 0.0)).unwrap();
                let d = b.degree();
                CurvatureFunction::derivative_squared(b, d)
            }
            _ => kjgamma(1, rng.gen_range(1.5..3.0)).unwrap(),
        };
        let (a0, a1, a2, phi) = (rng.gen_range(-1.0..1.0), rng.gen_range(-0.5..0.5), rng.gen_range(-0.3..0.3), rng.gen_range(0.0..2.0 * PI));
        let p = DirichletProblem::new(center, radius, k, move |z| {
            let w = (z - center) / radius * C64::from_polar(1.0, phi);
            a0 + a1 * w.re + a2 * (w * w).im
        })
        .unwrap();
        let (n, m) = (32, 32);
        let fd = solve_dirichlet_fd(&p, &FdOptions::with_resolution(n, m)).unwrap();
        let fd_fine = solve_dirichlet_fd(&p, &FdOptions::with_resolution(3 * n + 1, 3 * m)).unwrap();
        let gr = solve_dirichlet_green(&p, &GreenOptions::with_resolution(n, m)).unwrap();
        let gr_fine = solve_dirichlet_green(&p, &GreenOptions::with_resolution(3 * n + 1, 3 * m)).unwrap();
        let tol_fd = 9.0 / 8.0 * nested_difference(&fd.u, &fd_fine.u);
        let tol_gr = 9.0 / 8.0 * nested_difference(&gr.u, &gr_fine.u);
        picard += usize::from(gr.report.method == Method::GreenPicard && gr_fine.report.method == Method::GreenPicard);
        let diff = fd.u.max_abs_diff(&gr.u).unwrap();
        let ratio = diff / (tol_fd + tol_gr);
        worst = worst.max(ratio);
        all &= ratio <= 2.0;
    }
    verdict(all, format!("10 problems, {picard} settled by Picard alone; worst |FD - Green| / combined tolerance {worst:.3} (limit 2)"))
}

fn exhaustion_runs() -> Vec<(&'static str, ExhaustionReport)> {
    let opts = ExhaustionOptions::default();
    let schedule = Schedule::default();
    let b = FiniteBlaschke::from_zeros(seq(&[c(0.3, 0.1)]), c(1.0, 0.0)).unwrap();
    let grid_k = CurvatureFunction::derivative_squared(b, 1);
    let grid_opts = ExhaustionOptions { n_r: 48, n_theta: 48, ..opts };
    vec![
        ("k=4", exhaustion_run(&CurvatureFunction::constant(4.0).unwrap(), &schedule, &opts).unwrap().1),
        ("k_1^2", exhaustion_run(&kjgamma(1, 2.0).unwrap(), &schedule, &opts).unwrap().1),
        ("k_1^1", exhaustion_run(&kjgamma(1, 1.0).unwrap(), &schedule, &opts).unwrap().1),
        ("4|B'|^2", exhaustion_run(&grid_k, &Schedule::Depths(vec![0.5, 1.0, 2.0]), &grid_opts).unwrap().1),
    ]
}

fn exhaustion_dichotomy(runs: &[(&str, ExhaustionReport)]) -> Verdict {
    let target = ((5f64.sqrt() - 1.0) / 2.0).ln();
    let four = &runs[0].1;
    let centers: Vec<f64> = four.steps.iter().map(|s| s.center_value).collect();
    let decreasing = centers.windows(2).all(|w| w[1] <= w[0]);
    let last = *centers.last().unwrap();
    let ok4 = decreasing && (last - target).abs() <= 1e-3 && four.dichotomy == Dichotomy::Converged;
    let d2 = runs[1].1.dichotomy;
    let d1 = runs[2].1.dichotomy;
    let passed = ok4 && d2 == Dichotomy::Converged && d1 == Dichotomy::DivergingToMinusInfinity;
    verdict(
        passed,
        format!("k=4: u_n(0) -> {last:.6} vs {target:.6} (limit 1e-3), decreasing {decreasing}; k_1^2 {d2:?}; k_1^1 {d1:?}"),
    )
}

fn monotone_sequences(runs: &[(&str, ExhaustionReport)]) -> Verdict {
    let worst = runs.iter().map(|(_, r)| r.max_rise).fold(f64::NEG_INFINITY, f64::max);
    let flags = runs.iter().all(|(_, r)| r.monotone_flag);
    let names: Vec<&str> = runs.iter().map(|(n, _)| *n).collect();
    verdict(flags && worst <= 1e-10, format!("runs {names:?}; largest rise {worst:.3e} (limit 1e-10)"))
}

fn blaschke_round_trip(rng: &mut ChaCha8Rng, ledger: &mut Ledger) -> Verdict {
    let mut worst = 0.0f64;
    let mut winding_ok = 0;
    for case in 0..100 {
        let n = 1 + case % 6;
        let pts = separated(rng, n, 0.85, 0.1);
        let f = from_critical_points(&seq(&pts)).unwrap();
        let back = f.critical_points().unwrap().expanded();
        worst = worst.max(matching_distance(&pts, &back));
        if degree_by_winding(&f, 1.0).unwrap() == n as i64 + 1 {
            winding_ok += 1;
        }
        ledger.products.push(f);
    }
    verdict(worst <= 1e-8 && winding_ok == 100, format!("100 sets, n <= 6; worst pseudohyperbolic mismatch {worst:.3e} (limit 1e-8); winding = n+1 in {winding_ok}/100"))
}

fn oracle_equivalence(ledger: &mut Ledger) -> Verdict {
    let fixtures: Vec<(&str, Vec<C64>)> = vec![
        ("{0}", vec![c(0.0, 0.0)]),
        ("{0,0}", vec![c(0.0, 0.0), c(0.0, 0.0)]),
        ("{0.4}", vec![c(0.4, 0.0)]),
        ("{0.3,-0.3i}", vec![c(0.3, 0.0), c(0.0, -0.3)]),
        ("{0,0,0}", vec![c(0.0, 0.0); 3]),
        ("{0.2+0.5i,-0.5+0.1i,0.3-0.4i}", vec![c(0.2, 0.5), c(-0.5, 0.1), c(0.3, -0.4)]),
        ("{0.5,0.5i,-0.5,-0.5i}", vec![c(0.5, 0.0), c(0.0, 0.5), c(-0.5, 0.0), c(0.0, -0.5)]),
        ("{0.6+0.2i (x2),-0.3,0.1-0.6i}", vec![c(0.6, 0.2), c(0.6, 0.2), c(-0.3, 0.0), c(0.1, -0.6)]),
    ];
    let mut parts = Vec::new();
    let mut all = true;
    for (name, pts) in fixtures {
        let cs = seq(&pts);
        let (state, report) = perron_sweep(&cs, &SweepConfig::for_zeros(&cs).unwrap()).unwrap();
        let f = from_critical_points(&cs).unwrap();
        let g = state.log_ratio().grid().clone();
        let nodes = (0..g.len()).map(|k| g.point(k / g.n_theta(), k % g.n_theta())).filter(|z| z.norm() <= 0.9);
        let worst = sample_points(2000, 17, 0.9)
            .into_iter()
            .chain(nodes)
            .filter(|z| pts.iter().all(|p| (p - z).norm() >= GUARD_RADIUS))
            .map(|z| (state.eval(z) / f.hyperbolic_density(z) - 1.0).abs())
            .fold(0.0, f64::max);
        all &= report.converged && worst <= 1e-3;
        parts.push(format!("{name} {worst:.2e}"));
        ledger.densities.push(state.density());
        ledger.products.push(f);
    }
    verdict(all, format!("relative error on |z| <= 0.9 (limit 1e-3): {}", parts.join(", ")))
}

fn littlewood_paley(rng: &mut ChaCha8Rng) -> Verdict {
    let mut maps: Vec<Arc<dyn AnalyticMap>> = vec![Arc::new(Polynomial::monomial(1)), Arc::new(Polynomial::monomial(2))];
    for d in 1..=8 {
        for _ in 0..2 {
            maps.push(Arc::new(Polynomial::new((0..=d).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect())));
        }
    }
    for d in 1..=4 {
        for _ in 0..3 {
            let zeros = separated(rng, d, 0.8, 0.1);
            maps.push(Arc::new(FiniteBlaschke::from_zeros(seq(&zeros), C64::from_polar(1.0, rng.gen_range(0.0..2.0 * PI))).unwrap()));
        }
    }
    let worst = maps.iter().map(|f| littlewood_paley_check(f.as_ref()).gap).fold(0.0, f64::max);
    verdict(worst <= 1e-6, format!("{} maps (z, z^2, 16 polynomials of degree <= 8, 12 Blaschke products of degree <= 4); worst gap {worst:.3e} (limit 1e-6)", maps.len()))
}

fn solvability_gauges() -> Verdict {
    let o = TrendOptions::default();
    let four = solvability_integral(&CurvatureFunction::constant(4.0).unwrap(), &o);
    let k12 = solvability_integral(&kjgamma(1, 2.0).unwrap(), &o);
    let k11 = solvability_integral(&kjgamma(1, 1.0).unwrap(), &o);
    let ex = solvability_integral(&example33_k(1.5).unwrap(), &o);
    let err = (four.value - 2.0 * PI).abs();
    let passed = err <= 1e-8
        && four.verdict == NormVerdict::Finite
        && k12.verdict == NormVerdict::Finite
        && k11.verdict == NormVerdict::DivergentTrend
        && ex.verdict == NormVerdict::DivergentTrend;
    verdict(passed, format!("k=4 integral error {err:.2e} (limit 1e-8); k_1^2 {:?}; k_1^1 {:?}; example k(1.5) {:?}", k12.verdict, k11.verdict, ex.verdict))
}

fn schwarz_pick(rng: &mut ChaCha8Rng, ledger: &mut Ledger) -> Verdict {
    let opts = SampleOptions { budget: 1000, seed: 29, r_max: 0.999 };
    let tol = 1e-6;
    let cube = schwarz_pick_refinement(&Polynomial::monomial(3), &seq(&[c(0.0, 0.0)]), &opts, tol).unwrap();
    let mut worst = cube.max_ratio;
    let mut all = cube.passed && cube.samples >= 990;
    let mut equality = 0.0f64;
    for case in 0..20 {
        let pts = separated(rng, 2 + case % 2, 0.7, 0.15);
        let big = from_critical_points(&seq(&pts)).unwrap();
        let outer_zeros = separated(rng, 1 + case % 2, 0.6, 0.1);
        let outer = FiniteBlaschke::from_zeros(seq(&outer_zeros), C64::from_polar(1.0, rng.gen_range(0.0..2.0 * PI))).unwrap();
        let f = Composition { outer: Arc::new(outer), inner: Arc::new(big.clone()) };
        let keep: Vec<C64> = pts.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
        let sub = if keep.is_empty() { vec![pts[0]] } else { keep };
        let r = schwarz_pick_refinement(&f, &seq(&sub), &SampleOptions { seed: 100 + case as u64, ..opts }, tol).unwrap();
        worst = worst.max(r.max_ratio);
        all &= r.passed && r.samples >= 990;

        let big_sub = from_critical_points(&seq(&sub)).unwrap();
        let t = Composition { outer: Arc::new(Automorphism::new(C64::from_polar(1.0, 0.7), random_point(rng, 0.5))), inner: Arc::new(big_sub.clone()) };
        for z in sample_points(1000, 200 + case as u64, 0.999) {
            if sub.iter().any(|p| (p - z).norm() < GUARD_RADIUS) {
                continue;
            }
            equality = equality.max((hyperbolic_derivative(&t, z) / big_sub.hyperbolic_density(z) - 1.0).abs());
        }
        ledger.products.push(big);
        ledger.products.push(big_sub);
    }
    let passed = all && worst <= 1.0 + tol && equality <= 1e-10;
    verdict(passed, format!("z^3 with {{0}} and 20 composed fixtures; worst ratio {worst:.12} (limit 1+1e-6); equality case |ratio-1| <= {equality:.2e} (limit 1e-10)"))
}

fn boundary_probes(ledger: &Ledger) -> Verdict {
    let mut worst = 0.0f64;
    let mut all = true;
    let mut probes = 0;
    for (i, f) in ledger.products.iter().enumerate() {
        for k in 0..3 {
            let zeta = C64::from_polar(1.0, 0.37 + 2.1 * k as f64 + 0.01 * i as f64);
            let r = boundary_probe(f, zeta, 0.3, 12, 1e-5).unwrap();
            let (z, v) = *r.samples.last().unwrap();
            let at_depth = ((1.0 - z.norm()) / 1e-5 - 1.0).abs() < 1e-6;
            worst = worst.max((v - 1.0).abs());
            all &= at_depth && (v - 1.0).abs() <= 1e-3 && r.verdict == ProbeVerdict::TendsToOne;
            probes += 1;
        }
    }
    verdict(all, format!("{} products, {probes} probes; worst |final - 1| {worst:.3e} at 1-|z| = 1e-5 (limit 1e-3)", ledger.products.len()))
}

fn ceiling_and_curvature(ledger: &mut Ledger) -> Verdict {
    for f in &ledger.products {
        ledger.densities.push(hyperbolic_pullback(Arc::new(f.clone())).unwrap());
    }
    let opts = SampleOptions::default();
    let mut worst_sk = f64::NEG_INFINITY;
    let mut worst_ratio = 0.0f64;
    let mut failures = 0;
    for d in &ledger.densities {
        let sk = sk_check(d, &opts);
        let ah = ahlfors_check(d, &opts);
        worst_sk = worst_sk.max(sk.max_violation - sk.tolerance);
        worst_ratio = worst_ratio.max(ah.max_ratio);
        if !(sk.passed && ah.passed && ah.max_ratio <= 1.0 + 1e-6) {
            failures += 1;
        }
    }
    verdict(
        failures == 0,
        format!("{} densities; worst curvature excess over tolerance {worst_sk:.3e} (must be <= 0); worst ratio to the ceiling {worst_ratio:.9} (limit 1+1e-6); failures {failures}", ledger.densities.len()),
    )
}

fn report(n: usize, name: &str, start: Instant, v: Verdict) -> bool {
    println!("criterion {n:>2} {name}: {} ({}) [{:.1}s]", if v.passed { "PASS" } else { "FAIL" }, v.detail, start.elapsed().as_secs_f64());
    v.passed
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(20240611);
    let mut ledger = Ledger::default();
    let mut ok = true;

    let t = Instant::now();
    ok &= report(1, "exact-solution solver", t, exact_solution_solver());
    let t = Instant::now();
    ok &= report(2, "FD-Newton vs Green-Picard", t, cross_solver_oracle(&mut rng));
    let t = Instant::now();
    let runs = exhaustion_runs();
    ok &= report(3, "exhaustion dichotomy", t, exhaustion_dichotomy(&runs));
    ok &= report(4, "monotone exhaustion iterates", t, monotone_sequences(&runs));
    let t = Instant::now();
    ok &= report(5, "Blaschke inversion round trip", t, blaschke_round_trip(&mut rng, &mut ledger));
    let t = Instant::now();
    ok &= report(6, "Perron sweep vs pullback oracle", t, oracle_equivalence(&mut ledger));
    let t = Instant::now();
    ok &= report(7, "Littlewood-Paley identity", t, littlewood_paley(&mut rng));
    let t = Instant::now();
    ok &= report(8, "solvability gauges", t, solvability_gauges());
    let t = Instant::now();
    ok &= report(9, "Schwarz-Pick refinement", t, schwarz_pick(&mut rng, &mut ledger));
    let t = Instant::now();
    ok &= report(10, "boundary probes", t, boundary_probes(&ledger));
    let t = Instant::now();
    ok &= report(11, "Ahlfors ceiling and curvature", t, ceiling_and_curvature(&mut ledger));

    if !ok {
        eprintln!("acceptance: at least one criterion failed");
        std::process::exit(1);
    }
}
