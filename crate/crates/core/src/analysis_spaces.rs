//! Norm gauges for the weighted Bergman space `A₁²` and the Hardy space `H²`, the
//! Littlewood–Paley identity, solvability integrals and Green potentials of curvature coefficients.
//!
//! Integrals over the disk are reported as traces of partial values over nested regions
//! approaching the circle. A trace whose last five refinements each grow by more than the
//! configured factor is labelled `divergent-trend`; quadrature cannot prove divergence.
//!
//! All area integrals are raw `∬ … dσ` values without a `1/2π` factor.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::analytic::AnalyticMap;
use crate::disk_core::{gauss_legendre, one_minus_abs2, C64};
use crate::error::{Error, Result};
use crate::gauss_solver::{CurvatureFunction, CurvatureTag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    A12Sq,
    H2Sq,
    LpLhs,
    LpRhs,
    SolvabilityIntegral,
    GreenEnergySup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormVerdict {
    Finite,
    DivergentTrend,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpaceNormReport {
    pub quantity: Quantity,
    pub value: f64,
    /// Partial values per refinement level.
    pub trace: Vec<f64>,
    pub verdict: NormVerdict,
}

/// Divergence trending thresholds.
#[derive(Debug, Clone, Copy)]
pub struct TrendOptions {
    pub growth_factor: f64,
    pub window: usize,
    /// Dyadic levels `|z| < 1 − 2^{−l}` for general integrands.
    pub radial_levels: usize,
    /// Depth-doubling levels `t < 2^l` for radial coefficients.
    pub depth_levels: usize,
}

impl Default for TrendOptions {
    fn default() -> Self {
        TrendOptions { growth_factor: 1.05, window: 5, radial_levels: 16, depth_levels: 12 }
    }
}

fn classify(trace: &[f64], opts: &TrendOptions) -> NormVerdict {
    let n = trace.len();
    if n <= opts.window {
        return NormVerdict::Finite;
    }
    let growing = trace[n - opts.window - 1..].windows(2).all(|w| w[0] > 0.0 && w[1] > opts.growth_factor * w[0]);
    if growing || trace.iter().any(|v| !v.is_finite()) {
        NormVerdict::DivergentTrend
    } else {
        NormVerdict::Finite
    }
}

fn report(quantity: Quantity, trace: Vec<f64>, opts: &TrendOptions) -> SpaceNormReport {
    SpaceNormReport { quantity, value: *trace.last().unwrap_or(&0.0), verdict: classify(&trace, opts), trace }
}

/// Periodic trapezoid rule in θ, doubled until the relative change falls below `1e-12`.
fn circle_mean<F: Fn(f64) -> f64>(f: F) -> f64 {
    let mut n = 32usize;
    let sample = |n: usize, offset: bool| {
        let s = if offset { 0.5 } else { 0.0 };
        (0..n).map(|j| f(2.0 * PI * (j as f64 + s) / n as f64)).sum::<f64>() / n as f64
    };
    let mut prev = sample(n, false);
    while n < 1 << 22 {
        let mid = sample(n, true);
        let next = 0.5 * (prev + mid);
        if (next - prev).abs() <= 1e-12 * next.abs().max(1e-300) {
            return next;
        }
        prev = next;
        n *= 2;
    }
    prev
}

/// `∫_a^b f` by composite Gauss–Legendre with `panels` equal panels.
fn gl_interval<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let (x, w) = gauss_legendre(10);
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let (m, s) = (a + (p as f64 + 0.5) * h, 0.5 * h);
            x.iter().zip(&w).map(|(x, w)| w * s * f(m + s * x)).sum::<f64>()
        })
        .sum()
}

/// Radii closing in on 0 geometrically: `∫_0^b f` with panels `[b 2^{−l−1}, b 2^{−l}]`.
fn gl_to_zero<F: Fn(f64) -> f64>(f: F, b: f64) -> f64 {
    (0..48).map(|l| gl_interval(&f, b * 0.5f64.powi(l + 1), b * 0.5f64.powi(l), 1)).sum()
}

/// Dyadic annuli `[1 − 2^{−l}, 1 − 2^{−l−1}]` from `r0`; `f(r, 1 − r²)` is the circle-integrated integrand.
fn radial_trace<F: Fn(f64, f64) -> f64>(f: F, r0: f64, head: f64, levels: usize) -> Vec<f64> {
    let mut acc = head;
    let mut trace = Vec::with_capacity(levels);
    let g = |r: f64| f(r, (1.0 - r) * (1.0 + r));
    let mut lo = r0;
    for l in 1..=levels {
        let hi = 1.0 - 0.5f64.powi(l as i32);
        if hi > lo {
            acc += gl_interval(&g, lo, hi, 2);
            lo = hi;
        }
        trace.push(acc);
    }
    trace
}

/// Depth levels `[2^{l−1}, 2^l]` in `t = −log(1 − r²)`, starting at `t0`.
fn depth_trace<F: Fn(f64) -> f64>(f: F, t0: f64, head: f64, levels: usize) -> Vec<f64> {
    let mut acc = head;
    let mut lo = t0;
    let mut trace = Vec::with_capacity(levels);
    for l in 0..=levels {
        let hi = 2f64.powi(l as i32);
        if hi > lo {
            acc += gl_interval(&f, lo, hi, 8);
            lo = hi;
        }
        trace.push(acc);
    }
    trace
}

/// `∬_D (1 − |z|²)|f(z)|² dσ`.
pub fn a12_norm_sq<F: Fn(C64) -> C64>(f: F, opts: &TrendOptions) -> SpaceNormReport {
    let ring = |r: f64, s: f64| 2.0 * PI * r * s * circle_mean(|t| f(C64::from_polar(r, t)).norm_sqr());
    let head = gl_interval(|r| ring(r, 1.0 - r * r), 0.0, 0.5, 4);
    report(Quantity::A12Sq, radial_trace(ring, 0.5, head, opts.radial_levels), opts)
}

/// Circle means `(1/2π)∫|φ(re^{it})|² dt` along `schedule`; the value is their supremum.
pub fn h2_norm_sq_boundary<F: Fn(C64) -> C64>(phi: F, schedule: &[f64], opts: &TrendOptions) -> Result<SpaceNormReport> {
    if schedule.iter().any(|&r| !(r >= 0.0 && r < 1.0)) {
        return Err(Error::Domain("H² schedule radii must lie in [0, 1)".into()));
    }
    let mut best = 0.0f64;
    let trace = schedule
        .iter()
        .map(|&r| {
            best = best.max(circle_mean(|t| phi(C64::from_polar(r, t)).norm_sqr()));
            best
        })
        .collect();
    Ok(report(Quantity::H2Sq, trace, opts))
}

/// Radii `1 − 2^{−l}` for `l = 1..=levels`.
pub fn dyadic_schedule(levels: usize) -> Vec<f64> {
    (1..=levels).map(|l| 1.0 - 0.5f64.powi(l as i32)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LittlewoodPaley {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

/// Both sides of `(1/2π)∫|φ(e^{it})|² dt = |φ(0)|² + (2/π)∬ log(1/|z|)|φ′|² dσ`
/// for `φ` continuous on the closed disk.
pub fn littlewood_paley_check(phi: &dyn AnalyticMap) -> LittlewoodPaley {
    let lhs = circle_mean(|t| phi.eval(C64::from_polar(1.0, t)).0.norm_sqr());
    let ring = |r: f64| 2.0 * PI * r * (1.0 / r).ln() * circle_mean(|t| phi.eval(C64::from_polar(r, t)).1.norm_sqr());
    let mut area = gl_to_zero(&ring, 0.5);
    for l in 1..48 {
        area += gl_interval(&ring, 1.0 - 0.5f64.powi(l), 1.0 - 0.5f64.powi(l + 1), 1);
    }
    let rhs = phi.eval(C64::new(0.0, 0.0)).0.norm_sqr() + 2.0 / PI * area;
    LittlewoodPaley { lhs, rhs, gap: (lhs - rhs).abs() }
}

/// `∬_D (1 − |ξ|²) k(ξ) dσ`.
///
/// Radial coefficients integrate `π∫q(t) dt = π∫(1 + t) q ds` over levels `s = log(1 + t) ∈ [2^{l−1}, 2^l]`,
/// which separates the iterated-logarithm families within a dozen levels.
pub fn solvability_integral(k: &CurvatureFunction, opts: &TrendOptions) -> SpaceNormReport {
    let trace = if k.is_radial() {
        depth_trace(|s| PI * k.log_depth_weight(s).unwrap(), 0.0, 0.0, opts.depth_levels)
    } else {
        let ring = |r: f64, s: f64| 2.0 * PI * r * s * circle_mean(|t| k.eval(C64::from_polar(r, t)));
        let head = gl_interval(|r| ring(r, 1.0 - r * r), 0.0, 0.5, 4);
        radial_trace(ring, 0.5, head, opts.radial_levels)
    };
    report(Quantity::SolvabilityIntegral, trace, opts)
}

/// `log1p(c e^{−t}) e^{t}` without overflow.
fn log1p_scaled(c: f64, t: f64) -> f64 {
    let a = c * (-t).exp();
    if a < 1e-6 {
        c * (1.0 - a / 2.0 + a * a / 3.0)
    } else {
        a.ln_1p() * t.exp()
    }
}

/// Green potential `∬_D g_D(z, ξ) k(ξ) dσ_ξ` with its refinement trace.
///
/// The disk `|ξ| < (1 + |z|)/2` is integrated in polar coordinates about `z`, which absorbs the
/// logarithmic singularity; the outer annulus follows the level scheme of the coefficient.
pub fn green_potential(k: &CurvatureFunction, z: C64, opts: &TrendOptions) -> Result<Vec<f64>> {
    if z.norm() >= 1.0 {
        return Err(Error::Domain(format!("green_potential needs |z| < 1, got {z}")));
    }
    let rho0 = 0.5 * (1.0 + z.norm());
    let mz = one_minus_abs2(z);
    // Green's function via g = ½ log(1 + (1 − |z|²)(1 − |ξ|²)/|z − ξ|²).
    let green = |xi: C64, s: f64| 0.5 * (mz * s / (z - xi).norm_sqr()).ln_1p();
    let inner = {
        // Ray from z in direction e^{iφ} leaves |ξ| < ρ₀ at s = −Re(z̄e^{iφ}) + sqrt(Re(z̄e^{iφ})² + ρ₀² − |z|²).
        let exit = |phi: f64| {
            let b = (z.conj() * C64::from_polar(1.0, phi)).re;
            -b + (b * b + rho0 * rho0 - z.norm_sqr()).sqrt()
        };
        circle_mean(|phi| {
            let dir = C64::from_polar(1.0, phi);
            let ray = |s: f64| {
                let xi = z + dir * s;
                s * green(xi, one_minus_abs2(xi)) * k.eval(xi)
            };
            2.0 * PI * gl_to_zero(ray, exit(phi))
        })
    };
    let trace = if k.is_radial() {
        let t0 = -(-rho0 * rho0).ln_1p();
        // dσ = ½ e^{−t} dt dθ and k = q e^{2t}, so the integrand is ¼ q(t) log1p(c e^{−t}) e^{t}.
        let f = |t: f64| {
            let r = (-(-t).exp_m1()).sqrt();
            let q = k.depth_weight(t).unwrap();
            2.0 * PI * circle_mean(|th| {
                let xi = C64::from_polar(r, th);
                0.25 * q * log1p_scaled(mz / (z - xi).norm_sqr(), t)
            })
        };
        depth_trace(f, t0, inner, opts.depth_levels)
    } else {
        let ring = |r: f64, s: f64| 2.0 * PI * r * circle_mean(|th| {
            let xi = C64::from_polar(r, th);
            green(xi, s) * k.eval(xi)
        });
        radial_trace(ring, rho0, inner, opts.radial_levels)
    };
    Ok(trace)
}

/// Largest Green potential over the sample points; a lower bound for the true supremum.
pub fn green_energy_sup(k: &CurvatureFunction, samples: &[C64], opts: &TrendOptions) -> Result<SpaceNormReport> {
    if samples.is_empty() {
        return Err(Error::Parameter("green_energy_sup needs at least one sample point".into()));
    }
    let traces = samples.iter().map(|&z| green_potential(k, z, opts)).collect::<Result<Vec<_>>>()?;
    let divergent = traces.iter().any(|t| classify(t, opts) == NormVerdict::DivergentTrend);
    let best = traces
        .into_iter()
        .max_by(|a, b| a.last().unwrap().total_cmp(b.last().unwrap()))
        .unwrap();
    let mut rep = report(Quantity::GreenEnergySup, best, opts);
    if divergent {
        rep.verdict = NormVerdict::DivergentTrend;
    }
    Ok(rep)
}

/// Nested logarithms `ℓ₁ = 1 + t`, `ℓ_{m+1} = 1 + log ℓ_m`, i.e. `ℓ₁ = log(e/(1 − |z|²))`.
fn nested_logs(j: u32, t: f64) -> Vec<f64> {
    let mut l = Vec::with_capacity(j as usize);
    l.push(1.0 + t);
    for m in 1..j as usize {
        let prev = l[m - 1];
        l.push(1.0 + prev.ln());
    }
    l
}

/// The coefficient family `k_j^γ(z) = (1 − |z|²)^{−2} ℓ₁^{−1} ⋯ ℓ_{j−1}^{−1} ℓ_j^{−γ}`.
pub fn kjgamma(j: u32, gamma: f64) -> Result<CurvatureFunction> {
    if j == 0 {
        return Err(Error::Parameter("k_j^γ needs j ≥ 1".into()));
    }
    if !(gamma >= 1.0) || !gamma.is_finite() {
        return Err(Error::Parameter(format!("k_j^γ needs γ ≥ 1, got {gamma}")));
    }
    let k = CurvatureFunction::from_depth_weight(CurvatureTag::Kjgamma { j, gamma }, move |t| {
        let l = nested_logs(j, t);
        let (last, rest) = l.split_last().unwrap();
        rest.iter().map(|x| 1.0 / x).product::<f64>() * last.powf(-gamma)
    });
    // ℓ₁ = e^s, so (1 + t) q = ℓ₁^{1−γ} for j = 1 and ℓ₂^{−1} ⋯ ℓ_j^{−γ} with ℓ₂ = 1 + s otherwise.
    Ok(k.with_log_depth_weight(move |s| {
        if j == 1 {
            return ((1.0 - gamma) * s).exp();
        }
        let mut l = 1.0 + s;
        let mut w = 1.0;
        for _ in 2..j {
            w /= l;
            l = 1.0 + l.ln();
        }
        w * l.powf(-gamma)
    }))
}

/// `k = 4|φ|²` with `φ(z) = (z − 1)^{−α}`.
pub fn example33_k(alpha: f64) -> Result<CurvatureFunction> {
    if !(alpha >= 1.5) || !alpha.is_finite() {
        return Err(Error::Parameter(format!("the (z − 1)^{{−α}} family needs α ≥ 3/2, got {alpha}")));
    }
    Ok(CurvatureFunction::custom(format!("4|z-1|^(-{})", 2.0 * alpha), move |z: C64| {
        4.0 * (z - 1.0).norm().powf(-2.0 * alpha)
    }))
}

/// `u_f = log(|f′|/((1 − |f|²)|φ|))`, a solution of `Δu = 4|φ|² e^{2u}` for locally univalent `f`.
pub fn example33_solution<'a>(alpha: f64, f: &'a dyn AnalyticMap) -> impl Fn(C64) -> f64 + 'a {
    move |z| alpha * (z - 1.0).norm().ln() + f.eval(z).1.norm().ln() - f.one_minus_abs2_at(z).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{Automorphism, Polynomial};
    use crate::blaschke::{FiniteBlaschke, MultiplicitySequence};

    #[test]
    fn a12_examples() {
        let o = TrendOptions::default();
        let one = a12_norm_sq(|_| C64::new(1.0, 0.0), &o);
        assert!((one.value - PI / 2.0).abs() < 1e-8 && one.verdict == NormVerdict::Finite);
        let two_z = a12_norm_sq(|z| 2.0 * z, &o);
        assert!((two_z.value - 2.0 * PI / 3.0).abs() < 1e-8);
        // |z − 1|^{−3} against the weight 1 − |z|² diverges at z = 1.
        let div = a12_norm_sq(|z: C64| (z - 1.0).powf(-1.5), &o);
        assert_eq!(div.verdict, NormVerdict::DivergentTrend);
    }

    #[test]
    fn h2_examples() {
        let o = TrendOptions::default();
        let s = dyadic_schedule(30);
        let z = h2_norm_sq_boundary(|z| z, &s, &o).unwrap();
        assert!((z.value - 1.0).abs() < 1e-8);
        let c = h2_norm_sq_boundary(|_| C64::new(0.6, -0.8), &s, &o).unwrap();
        assert!((c.value - 1.0).abs() < 1e-12);
        let lac = |z: C64| (1..=6).map(|k| z.powu(1 << k) / k as f64).sum::<C64>();
        let v = h2_norm_sq_boundary(lac, &s, &o).unwrap();
        let exact: f64 = (1..=6).map(|k| 1.0 / (k * k) as f64).sum();
        assert!((v.value - exact).abs() < 1e-6);
    }

    #[test]
    fn littlewood_paley_examples() {
        let z = littlewood_paley_check(&Polynomial::monomial(1));
        assert!((z.lhs - 1.0).abs() < 1e-12 && z.gap < 1e-8);
        let z2 = littlewood_paley_check(&Polynomial::monomial(2));
        assert!(z2.gap < 1e-8);
        let c = littlewood_paley_check(&Polynomial::new(vec![C64::new(0.3, 0.4)]));
        assert!(c.gap < 1e-14 && (c.lhs - 0.25).abs() < 1e-14);
        let t = littlewood_paley_check(&Automorphism::new(C64::new(1.0, 0.0), C64::new(0.5, 0.2)));
        assert!(t.gap < 1e-8);
        let zeros = MultiplicitySequence::from_points(&[C64::new(0.5, 0.1), C64::new(-0.2, 0.6), C64::new(0.0, 0.0)]).unwrap();
        let b = FiniteBlaschke::from_zeros(zeros, C64::new(1.0, 0.0)).unwrap();
        assert!(littlewood_paley_check(&b).gap < 1e-6);
    }

    #[test]
    fn solvability_examples() {
        let o = TrendOptions::default();
        let four = solvability_integral(&CurvatureFunction::constant(4.0).unwrap(), &o);
        assert!((four.value - 2.0 * PI).abs() < 1e-10);
        let k12 = solvability_integral(&kjgamma(1, 2.0).unwrap(), &o);
        assert_eq!(k12.verdict, NormVerdict::Finite);
        assert!((k12.value - PI).abs() < 1e-9);
        assert_eq!(solvability_integral(&kjgamma(1, 1.0).unwrap(), &o).verdict, NormVerdict::DivergentTrend);
        assert_eq!(solvability_integral(&kjgamma(2, 2.0).unwrap(), &o).verdict, NormVerdict::Finite);
        assert_eq!(solvability_integral(&kjgamma(2, 1.0).unwrap(), &o).verdict, NormVerdict::DivergentTrend);
        assert_eq!(solvability_integral(&example33_k(1.5).unwrap(), &o).verdict, NormVerdict::DivergentTrend);
    }

    #[test]
    fn kjgamma_values() {
        for j in 1..=4 {
            let k = kjgamma(j, 1.7).unwrap();
            assert!((k.eval(C64::new(0.0, 0.0)) - 1.0).abs() < 1e-15);
        }
        let k = kjgamma(1, 3.0).unwrap();
        assert!(k.eval(C64::new(0.999999, 0.0)) > 1e7);
        assert!(kjgamma(1, 0.9).is_err());
        for (j, g) in [(1, 2.0), (2, 1.0), (3, 1.5)] {
            let k = kjgamma(j, g).unwrap();
            for s in [0.0, 0.7, 3.0, 20.0] {
                let t = f64::exp_m1(s);
                let generic = k.depth_weight(t).unwrap() * (1.0 + t);
                assert!((k.log_depth_weight(s).unwrap() - generic).abs() < 1e-12 * generic);
            }
        }
        // Direct evaluation of the closed form away from the boundary.
        let z = C64::new(0.3, -0.5);
        let s = 1.0 - z.norm_sqr();
        let l1 = (std::f64::consts::E / s).ln();
        let l2 = (std::f64::consts::E * l1).ln();
        let direct = 1.0 / (s * s) / l1 / l2.powf(2.5);
        assert!((kjgamma(2, 2.5).unwrap().eval(z) - direct).abs() < 1e-12 * direct);
    }

    #[test]
    fn green_energy_examples() {
        let o = TrendOptions::default();
        let four = CurvatureFunction::constant(4.0).unwrap();
        let at0 = green_energy_sup(&four, &[C64::new(0.0, 0.0)], &o).unwrap();
        assert!((at0.value - 2.0 * PI).abs() < 1e-8, "{}", at0.value);
        // ∬ g(z, ξ) dσ = π(1 − |z|²)/2 for every z.
        let z = C64::new(0.4, 0.3);
        let gz = green_potential(&four, z, &o).unwrap();
        assert!((gz.last().unwrap() - 2.0 * PI * (1.0 - z.norm_sqr())).abs() < 1e-7);
        let custom = CurvatureFunction::custom("4", |_| 4.0);
        let gc = green_potential(&custom, z, &o).unwrap();
        assert!((gc.last().unwrap() - 2.0 * PI * (1.0 - z.norm_sqr())).abs() < 1e-7);
        let zero = green_energy_sup(&CurvatureFunction::constant(0.0).unwrap(), &[z], &o).unwrap();
        assert_eq!(zero.value, 0.0);
        let k11 = kjgamma(1, 1.0).unwrap();
        let d = green_energy_sup(&k11, &[C64::new(0.0, 0.0), C64::new(0.5, 0.0)], &o).unwrap();
        assert_eq!(d.verdict, NormVerdict::DivergentTrend);
        for z in [C64::new(0.0, 0.0), C64::new(-0.3, 0.6)] {
            assert_eq!(classify(&green_potential(&k11, z, &o).unwrap(), &o), NormVerdict::DivergentTrend);
        }
    }

    #[test]
    fn log_power_fixture_solves_the_equation() {
        let k = example33_k(1.5).unwrap();
        assert!((k.eval(C64::new(0.0, 0.0)) - 4.0).abs() < 1e-15);
        let id = Polynomial::monomial(1);
        let u = example33_solution(1.5, &id);
        let h = 1e-3;
        for z in [C64::new(0.2, 0.1), C64::new(-0.5, 0.4), C64::new(0.6, -0.2)] {
            let lap = (u(z + h) + u(z - h) + u(z + C64::new(0.0, h)) + u(z - C64::new(0.0, h)) - 4.0 * u(z)) / (h * h);
            let rhs = k.eval(z) * (2.0 * u(z)).exp();
            assert!((lap - rhs).abs() < 1e-4 * rhs.max(1.0), "{lap} {rhs}");
        }
    }
}
