//! Conformal densities, Gauss curvature, pullbacks and the comparison checks built on them.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::AnalyticMap;
use crate::blaschke::{FiniteBlaschke, MultiplicitySequence};
use crate::disk_core::{one_minus_abs2, DiskPoint, C64};
use crate::error::{Error, Result};
use crate::numeric::linear_fit;

type ScalarFn = dyn Fn(C64) -> f64 + Send + Sync;
type Predicate = dyn Fn(C64) -> bool + Send + Sync;

/// Nominal finite-difference step; the guard annulus around zeros is ten steps wide.
pub const FD_STEP: f64 = 1e-3;
pub const GUARD_RADIUS: f64 = 10.0 * FD_STEP;
pub const TOL_ANALYTIC: f64 = 1e-8;
pub const TOL_FD: f64 = 1e-4;
pub const TOL_GRID: f64 = 1e-3;
pub const TOL_AHLFORS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backing {
    ClosedForm,
    Grid,
}

/// Domain on which a density is a metric off its zeros.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensityDomain {
    Disk,
    /// The punctured disk `0 < |z| < 1`.
    PuncturedDisk,
}

/// A conformal density `λ(z)|dz|` on the disk.
#[derive(Clone)]
pub struct ConformalDensity {
    name: String,
    eval: Arc<ScalarFn>,
    log_laplacian: Option<Arc<ScalarFn>>,
    zero_set: MultiplicitySequence,
    backing: Backing,
    domain: DensityDomain,
    exclude: Option<Arc<Predicate>>,
    node_curvature: Option<Arc<Vec<(C64, f64)>>>,
    hyperbolic: bool,
}

impl fmt::Debug for ConformalDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConformalDensity")
            .field("name", &self.name)
            .field("backing", &self.backing)
            .field("zero_set", &self.zero_set)
            .finish()
    }
}

impl ConformalDensity {
    /// Closed-form density from an evaluator and an optional analytic `Δ log λ`.
    pub fn closed_form<F>(name: impl Into<String>, eval: F, log_laplacian: Option<Arc<ScalarFn>>, zero_set: MultiplicitySequence) -> Self
    where
        F: Fn(C64) -> f64 + Send + Sync + 'static,
    {
        ConformalDensity {
            name: name.into(),
            eval: Arc::new(eval),
            log_laplacian,
            zero_set,
            backing: Backing::ClosedForm,
            domain: DensityDomain::Disk,
            exclude: None,
            node_curvature: None,
            hyperbolic: false,
        }
    }

    /// Grid-backed density with curvature precomputed at grid nodes from the discrete Laplacian.
    pub fn grid_backed<F>(name: impl Into<String>, eval: F, zero_set: MultiplicitySequence, node_curvature: Vec<(C64, f64)>) -> Self
    where
        F: Fn(C64) -> f64 + Send + Sync + 'static,
    {
        ConformalDensity {
            name: name.into(),
            eval: Arc::new(eval),
            log_laplacian: None,
            zero_set,
            backing: Backing::Grid,
            domain: DensityDomain::Disk,
            exclude: None,
            node_curvature: Some(Arc::new(node_curvature)),
            hyperbolic: false,
        }
    }

    pub fn with_exclusion<P>(mut self, p: P) -> Self
    where
        P: Fn(C64) -> bool + Send + Sync + 'static,
    {
        self.exclude = Some(Arc::new(p));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn backing(&self) -> Backing {
        self.backing
    }
    pub fn domain(&self) -> DensityDomain {
        self.domain
    }
    pub fn zero_set(&self) -> &MultiplicitySequence {
        &self.zero_set
    }
    pub fn has_analytic_laplacian(&self) -> bool {
        self.log_laplacian.is_some()
    }
    pub fn node_curvature(&self) -> Option<&[(C64, f64)]> {
        self.node_curvature.as_deref().map(|v| v.as_slice())
    }

    pub fn eval(&self, z: C64) -> f64 {
        (self.eval)(z)
    }

    /// Whether `z` is excluded from curvature sampling (zeros, punctures, kinks).
    pub fn is_excluded(&self, z: C64) -> bool {
        if self.zero_set.entries().iter().any(|(p, _)| (p.z() - z).norm() < GUARD_RADIUS) {
            return true;
        }
        if self.domain == DensityDomain::PuncturedDisk && z.norm() < GUARD_RADIUS {
            return true;
        }
        self.exclude.as_ref().map_or(false, |p| p(z))
    }

    /// Curvature tolerance matching the backing.
    pub fn curvature_tolerance(&self) -> f64 {
        match (self.backing, self.log_laplacian.is_some()) {
            (Backing::Grid, _) => TOL_GRID,
            (Backing::ClosedForm, true) => TOL_ANALYTIC,
            (Backing::ClosedForm, false) => TOL_FD,
        }
    }
}

/// Hyperbolic density `λ_D = 1/(1 − |z|²)`.
pub fn poincare() -> ConformalDensity {
    let mut d = ConformalDensity::closed_form(
        "poincare",
        |z| 1.0 / one_minus_abs2(z),
        Some(Arc::new(|z: C64| 4.0 / one_minus_abs2(z).powi(2))),
        MultiplicitySequence::empty(),
    );
    d.hyperbolic = true;
    d
}

/// `c · λ_D`, curvature `−4/c²`.
pub fn scaled_poincare(c: f64) -> ConformalDensity {
    ConformalDensity::closed_form(
        format!("{c}*poincare"),
        move |z| c / one_minus_abs2(z),
        Some(Arc::new(|z: C64| 4.0 / one_minus_abs2(z).powi(2))),
        MultiplicitySequence::empty(),
    )
}

/// The flat density `λ ≡ 1`.
pub fn flat() -> ConformalDensity {
    ConformalDensity::closed_form("flat", |_| 1.0, Some(Arc::new(|_| 0.0)), MultiplicitySequence::empty())
}

/// `|B(z)| λ_D(z)`, an SK-metric vanishing on the zeros of `B`.
pub fn blaschke_weighted(b: &FiniteBlaschke) -> ConformalDensity {
    let bb = b.clone();
    ConformalDensity::closed_form(
        "blaschke-weighted poincare",
        move |z| bb.eval_any(z).0.norm() / one_minus_abs2(z),
        Some(Arc::new(|z: C64| 4.0 / one_minus_abs2(z).powi(2))),
        b.zeros().clone(),
    )
}

/// `λ_{D′}(w) = 1/(2|w| log(1/|w|))` on the punctured disk.
pub fn punctured_hyperbolic() -> ConformalDensity {
    let mut d = ConformalDensity::closed_form(
        "punctured hyperbolic",
        |w| {
            let r = w.norm();
            1.0 / (2.0 * r * (-r.ln()))
        },
        None,
        MultiplicitySequence::empty(),
    );
    d.domain = DensityDomain::PuncturedDisk;
    d
}

/// `λ_α(w) = (α + 1)|w|^{α} / (1 − |w|^{2(α+1)})` on the punctured disk, `α ∈ (−1, 0)`.
pub fn lambda_alpha(alpha: f64) -> Result<ConformalDensity> {
    if !(alpha > -1.0 && alpha < 0.0) {
        return Err(Error::Parameter(format!("λ_α needs α ∈ (−1, 0), got {alpha}")));
    }
    let b = alpha + 1.0;
    let mut d = ConformalDensity::closed_form(
        format!("lambda_alpha({alpha})"),
        move |w| {
            let r = w.norm();
            b * r.powf(alpha) / -(2.0 * b * r.ln()).exp_m1()
        },
        None,
        MultiplicitySequence::empty(),
    );
    d.domain = DensityDomain::PuncturedDisk;
    Ok(d)
}

/// Pointwise maximum; samples near the switching set are excluded from curvature checks.
pub fn max_density(a: &ConformalDensity, b: &ConformalDensity) -> ConformalDensity {
    let (ea, eb) = (a.eval.clone(), b.eval.clone());
    let eval = {
        let (ea, eb) = (ea.clone(), eb.clone());
        move |z: C64| ea(z).max(eb(z))
    };
    let log_laplacian: Option<Arc<ScalarFn>> = match (&a.log_laplacian, &b.log_laplacian) {
        (Some(la), Some(lb)) => {
            let (la, lb, ea, eb) = (la.clone(), lb.clone(), ea.clone(), eb.clone());
            Some(Arc::new(move |z| if ea(z) >= eb(z) { la(z) } else { lb(z) }))
        }
        _ => None,
    };
    let mut common = Vec::new();
    for (p, m) in a.zero_set.entries() {
        let mb = b.zero_set.multiplicity_at(p.z(), 1e-12);
        if mb > 0 {
            common.push((*p, (*m).min(mb)));
        }
    }
    let zero_set = MultiplicitySequence::new(common).unwrap_or_default();
    let (xa, xb) = (a.clone(), b.clone());
    let mut d = ConformalDensity::closed_form(format!("max({}, {})", a.name, b.name), eval, log_laplacian, zero_set);
    d.backing = if a.backing == Backing::Grid || b.backing == Backing::Grid { Backing::Grid } else { Backing::ClosedForm };
    d.exclude = Some(Arc::new(move |z| {
        let (va, vb) = (xa.eval(z), xb.eval(z));
        xa.is_excluded(z) || xb.is_excluded(z) || (va.ln() - vb.ln()).abs() < 1e-2
    }));
    d
}

/// Pullback `λ(f(z))|f′(z)|`; the zero set collects critical points of `f` and preimages of zeros of `λ`.
pub fn pullback(lambda: &ConformalDensity, f: Arc<dyn AnalyticMap>) -> Result<ConformalDensity> {
    let crit = match f.critical_set() {
        Some(c) => c?,
        None => MultiplicitySequence::empty(),
    };
    let mut entries: Vec<(C64, u32)> = crit.entries().iter().map(|(p, m)| (p.z(), *m)).collect();
    for (w, m) in lambda.zero_set.entries() {
        if let Some(pre) = f.preimages(w.z()) {
            for z in pre? {
                let d = crit.multiplicity_at(z, 1e-9) + 1;
                let order = m * d + d - 1;
                match entries.iter_mut().find(|(q, _)| (q - z).norm() < 1e-9) {
                    Some(e) => e.1 = order,
                    None => entries.push((z, order)),
                }
            }
        }
    }
    let zero_set = MultiplicitySequence::new(
        entries.into_iter().map(|(z, m)| DiskPoint::from_c64(z).map(|p| (p, m))).collect::<Result<Vec<_>>>()?,
    )?;
    let name = format!("pullback({}, {})", lambda.name, f.describe());
    let mut d = if lambda.hyperbolic {
        let ff = f.clone();
        let fl = f.clone();
        ConformalDensity::closed_form(
            name,
            move |z| ff.eval(z).1.norm() / ff.one_minus_abs2_at(z),
            Some(Arc::new(move |z| {
                let d = fl.eval(z).1.norm() / fl.one_minus_abs2_at(z);
                4.0 * d * d
            })),
            zero_set,
        )
    } else {
        let ff = f.clone();
        let lam = lambda.eval.clone();
        let ll = lambda.log_laplacian.clone().map(|ll| {
            let fl = f.clone();
            Arc::new(move |z: C64| {
                let (w, d) = fl.eval(z);
                d.norm_sqr() * ll(w)
            }) as Arc<ScalarFn>
        });
        ConformalDensity::closed_form(
            name,
            move |z| {
                let (w, d) = ff.eval(z);
                lam(w) * d.norm()
            },
            ll,
            zero_set,
        )
    };
    d.backing = lambda.backing;
    if lambda.domain == DensityDomain::PuncturedDisk || lambda.exclude.is_some() {
        let (lm, fx) = (lambda.clone(), f.clone());
        d.exclude = Some(Arc::new(move |z| {
            let w = fx.eval(z).0;
            lm.is_excluded(w) || (lm.domain == DensityDomain::PuncturedDisk && w.norm() < GUARD_RADIUS)
        }));
    }
    Ok(d)
}

/// Convenience: pullback of `λ_D` under an analytic self-map.
pub fn hyperbolic_pullback(f: Arc<dyn AnalyticMap>) -> Result<ConformalDensity> {
    pullback(&poincare(), f)
}

/// Fourth-order finite-difference Laplacian of `log λ` with step `h`.
pub fn log_laplacian_fd(lambda: &ConformalDensity, z: C64, h: f64) -> f64 {
    let l = |w: C64| lambda.eval(w).ln();
    let c = l(z);
    let dx = C64::new(h, 0.0);
    let dy = C64::new(0.0, h);
    let d2 = |d: C64| (-l(z + 2.0 * d) + 16.0 * l(z + d) - 30.0 * c + 16.0 * l(z - d) - l(z - 2.0 * d)) / (12.0 * h * h);
    d2(dx) + d2(dy)
}

/// Step adapted to the distance from the circle and from declared zeros.
pub fn adaptive_step(lambda: &ConformalDensity, z: C64) -> f64 {
    let mut dist = 1.0 - z.norm();
    for (p, _) in lambda.zero_set.entries() {
        dist = dist.min((p.z() - z).norm());
    }
    if lambda.domain == DensityDomain::PuncturedDisk {
        dist = dist.min(z.norm());
    }
    FD_STEP.min(0.05 * dist)
}

/// Gauss curvature `−Δ log λ / λ²`, analytic when available.
pub fn curvature_of(lambda: &ConformalDensity, z: C64) -> Result<f64> {
    if z.norm() >= 1.0 {
        return Err(Error::Domain(format!("curvature_of needs |z| < 1, got {z}")));
    }
    if lambda.zero_set.entries().iter().any(|(p, _)| (p.z() - z).norm() < GUARD_RADIUS) {
        return Err(Error::GuardedPoint(format!("{z} lies within the guard annulus of a zero")));
    }
    let v = lambda.eval(z);
    if !(v > 0.0) {
        return Err(Error::Domain(format!("density vanishes or is undefined at {z}")));
    }
    let lap = match &lambda.log_laplacian {
        Some(ll) => ll(z),
        None => log_laplacian_fd(lambda, z, adaptive_step(lambda, z)),
    };
    Ok(-lap / (v * v))
}

/// Curvature from the finite-difference Laplacian regardless of any analytic form.
pub fn curvature_fd(lambda: &ConformalDensity, z: C64) -> Result<f64> {
    let v = lambda.eval(z);
    if !(v > 0.0) {
        return Err(Error::Domain(format!("density vanishes or is undefined at {z}")));
    }
    Ok(-log_laplacian_fd(lambda, z, adaptive_step(lambda, z)) / (v * v))
}

/// Deterministic sample points: half area-uniform, half log-uniform in `1 − |z|` down to `1 − r_max`.
pub fn sample_points(budget: usize, seed: u64, r_max: f64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = (1.0 - r_max).ln();
    (0..budget)
        .map(|k| {
            let t = rng.gen::<f64>() * 2.0 * PI;
            let r = if k % 2 == 0 { r_max * rng.gen::<f64>().sqrt() } else { 1.0 - (lo * rng.gen::<f64>()).exp() };
            C64::from_polar(r, t)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvatureReport {
    pub density: String,
    pub backing: Backing,
    pub samples: Vec<(C64, f64)>,
    /// `max κ + 4`; the SK condition requires this to be at most the tolerance.
    pub max_violation: f64,
    /// `max |κ + 4|`, reported alongside for constant-curvature checks.
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Options shared by the sampling checks.
#[derive(Debug, Clone, Copy)]
pub struct SampleOptions {
    pub budget: usize,
    pub seed: u64,
    pub r_max: f64,
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions { budget: 1000, seed: 0x5eed, r_max: 0.999 }
    }
}

/// Samples `κ_λ + 4` away from zeros and kinks; passes when the maximum is within tolerance.
pub fn sk_check(lambda: &ConformalDensity, opts: &SampleOptions) -> CurvatureReport {
    let tolerance = lambda.curvature_tolerance();
    let samples: Vec<(C64, f64)> = match lambda.node_curvature() {
        Some(nodes) => {
            let kept: Vec<&(C64, f64)> = nodes.iter().filter(|(z, _)| !lambda.is_excluded(*z)).collect();
            let stride = (kept.len() / opts.budget.max(1)).max(1);
            kept.into_iter().step_by(stride).copied().collect()
        }
        None => sample_points(opts.budget, opts.seed, opts.r_max)
            .into_par_iter()
            .filter(|z| !lambda.is_excluded(*z))
            .filter_map(|z| curvature_of(lambda, z).ok().map(|k| (z, k)))
            .collect(),
    };
    let max_violation = samples.iter().fold(f64::NEG_INFINITY, |m, (_, k)| m.max(k + 4.0));
    let max_deviation = samples.iter().fold(0.0f64, |m, (_, k)| m.max((k + 4.0).abs()));
    CurvatureReport {
        density: lambda.name.clone(),
        backing: lambda.backing,
        passed: !samples.is_empty() && max_violation <= tolerance,
        samples,
        max_violation,
        max_deviation,
        tolerance,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AhlforsReport {
    pub density: String,
    /// `max λ/λ_ceiling`, the ceiling being `λ_D` (or `λ_{D′}` on the punctured disk).
    pub max_ratio: f64,
    pub argmax: C64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Maximum of `λ(z)(1 − |z|²)` over samples (ratio to `λ_{D′}` for punctured-disk densities).
pub fn ahlfors_check(lambda: &ConformalDensity, opts: &SampleOptions) -> AhlforsReport {
    let ceiling = punctured_hyperbolic();
    let mut pts = sample_points(opts.budget, opts.seed ^ 0xa11f, opts.r_max);
    if let Some(nodes) = lambda.node_curvature() {
        let stride = (nodes.len() / opts.budget.max(1)).max(1);
        pts.extend(nodes.iter().step_by(stride).map(|(z, _)| *z));
    }
    let (max_ratio, argmax) = pts
        .iter()
        .filter(|z| lambda.domain == DensityDomain::Disk || z.norm() > 1e-12)
        .map(|&z| {
            let ratio = match lambda.domain {
                DensityDomain::Disk => lambda.eval(z) * one_minus_abs2(z),
                DensityDomain::PuncturedDisk => lambda.eval(z) / ceiling.eval(z),
            };
            (ratio, z)
        })
        .fold((f64::NEG_INFINITY, C64::new(0.0, 0.0)), |a, b| if b.0 > a.0 { b } else { a });
    AhlforsReport {
        density: lambda.name.clone(),
        max_ratio,
        argmax,
        tolerance: TOL_AHLFORS,
        passed: max_ratio <= 1.0 + TOL_AHLFORS,
    }
}

/// Estimates the zero order `m₀` of `λ` at `z₀` and the limit of `λ(z)/|z − z₀|^{m₀}`.
pub fn zero_order_at(lambda: &ConformalDensity, z0: C64) -> Result<(u32, f64)> {
    let room = 1.0 - z0.norm();
    if !(room > 0.0) {
        return Err(Error::Domain(format!("zero_order_at needs |z₀| < 1, got {z0}")));
    }
    let k0 = 7.max((2.0 / room).log2().ceil() as i32);
    let n_ang = 16;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for k in k0..k0 + 10 {
        let rho = 0.5f64.powi(k);
        let mean = (0..n_ang)
            .map(|j| lambda.eval(z0 + C64::from_polar(rho, 2.0 * PI * (j as f64 + 0.5) / n_ang as f64)).ln())
            .sum::<f64>()
            / n_ang as f64;
        if !mean.is_finite() {
            return Err(Error::Domain(format!("density not positive near {z0}")));
        }
        xs.push(rho.ln());
        ys.push(mean);
    }
    let (slope, _) = linear_fit(&xs, &ys);
    let order = slope.round();
    if (slope - order).abs() > 0.1 || order < 0.0 {
        return Err(Error::IndeterminateOrder { slope });
    }
    let rho = 0.5f64.powi(k0 + 9);
    let limit = (0..n_ang)
        .map(|j| lambda.eval(z0 + C64::from_polar(rho, 2.0 * PI * (j as f64 + 0.5) / n_ang as f64)))
        .sum::<f64>()
        / n_ang as f64
        / rho.powf(order);
    Ok((order as u32, limit))
}

/// `max |λ − |f′|/(1 − |f|²)| / (1 + λ)` over samples.
pub fn developing_residual(lambda: &ConformalDensity, f: &dyn AnalyticMap, opts: &SampleOptions) -> f64 {
    sample_points(opts.budget, opts.seed ^ 0xdef, opts.r_max.min(0.99))
        .into_iter()
        .map(|z| {
            let l = lambda.eval(z);
            let (_, d) = f.eval(z);
            (l - d.norm() / f.one_minus_abs2_at(z)).abs() / (1.0 + l)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum EqualityVerdict {
    NotApplicable { reason: String },
    Equal { max_deviation: f64 },
    NotEqual { max_deviation: f64 },
}

/// Checks that `λ ≤ μ` with ratio 1 at `z₀` forces `λ ≡ μ` on the sample set.
pub fn equality_propagation_check(lambda: &ConformalDensity, mu: &ConformalDensity, z0: C64, opts: &SampleOptions) -> EqualityVerdict {
    let tol = 1e-6;
    let ratio_at = |z: C64| lambda.eval(z) / mu.eval(z);
    let rho = 1e-6;
    let r0 = (0..8).map(|j| ratio_at(z0 + C64::from_polar(rho, PI * j as f64 / 4.0 + 0.1))).sum::<f64>() / 8.0;
    if !((r0 - 1.0).abs() <= 1e-4) {
        return EqualityVerdict::NotApplicable { reason: format!("ratio at z₀ is {r0:.6}, not 1") };
    }
    let pts: Vec<C64> = sample_points(opts.budget, opts.seed ^ 0xe9, opts.r_max.min(0.99))
        .into_iter()
        .filter(|z| !lambda.is_excluded(*z) && !mu.is_excluded(*z))
        .collect();
    if pts.iter().any(|&z| ratio_at(z) > 1.0 + tol) {
        return EqualityVerdict::NotApplicable { reason: "λ ≤ μ fails on the sample set".into() };
    }
    for d in [lambda, mu] {
        let bad = pts.iter().take(64).filter_map(|&z| curvature_of(d, z).ok()).any(|k| (k + 4.0).abs() > 1e-3);
        if bad {
            return EqualityVerdict::NotApplicable { reason: format!("{} is not of curvature −4", d.name) };
        }
    }
    let max_deviation = pts.iter().map(|&z| (ratio_at(z) - 1.0).abs()).fold(0.0, f64::max);
    if max_deviation <= tol {
        EqualityVerdict::Equal { max_deviation }
    } else {
        EqualityVerdict::NotEqual { max_deviation }
    }
}
