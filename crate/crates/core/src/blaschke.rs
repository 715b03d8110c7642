//! Finite Blaschke products: construction, critical points and the inverse problem.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::analytic::AnalyticMap;
use crate::disk_core::{one_minus_abs2, pseudo_hyperbolic, DiskPoint, C64};
use crate::error::{Error, Result};
use crate::numeric::{
    dense_solve, linear_fit, min_cost_assignment, poly_add, poly_derivative, poly_eval, poly_eval_d, poly_mul,
    poly_roots, poly_trim, taylor_shift,
};

/// Points of the disk with positive multiplicities.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MultiplicitySequence {
    entries: Vec<(DiskPoint, u32)>,
}

impl MultiplicitySequence {
    pub fn new(entries: Vec<(DiskPoint, u32)>) -> Result<Self> {
        for (k, (p, m)) in entries.iter().enumerate() {
            if *m == 0 {
                return Err(Error::Contract("multiplicities must be positive".into()));
            }
            if entries[..k].iter().any(|(q, _)| (q.z() - p.z()).norm() <= 1e-14) {
                return Err(Error::Contract(format!("point {} listed twice", p.z())));
            }
        }
        Ok(MultiplicitySequence { entries })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a sequence from a point list, merging exact repeats into multiplicities.
    pub fn from_points(points: &[C64]) -> Result<Self> {
        let mut entries: Vec<(DiskPoint, u32)> = Vec::new();
        for &z in points {
            let p = DiskPoint::from_c64(z)?;
            match entries.iter_mut().find(|(q, _)| *q == p) {
                Some((_, m)) => *m += 1,
                None => entries.push((p, 1)),
            }
        }
        Ok(MultiplicitySequence { entries })
    }

    pub fn entries(&self) -> &[(DiskPoint, u32)] {
        &self.entries
    }
    pub fn len(&self) -> usize {
        self.entries.len()
    }
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
    /// Total count `n = Σ m_j`.
    pub fn total(&self) -> usize {
        self.entries.iter().map(|(_, m)| *m as usize).sum()
    }

    /// Points repeated according to multiplicity.
    pub fn expanded(&self) -> Vec<C64> {
        self.entries.iter().flat_map(|(p, m)| std::iter::repeat(p.z()).take(*m as usize)).collect()
    }

    pub fn multiplicity_at(&self, z: C64, tol: f64) -> u32 {
        self.entries.iter().filter(|(p, _)| (p.z() - z).norm() <= tol).map(|(_, m)| *m).sum()
    }
}

/// `rotation · Π_j [ (conj(a_j)/|a_j|) (a_j − z)/(1 − conj(a_j) z) ]^{m_j}`, with factor `z` for `a_j = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteBlaschke {
    rotation: C64,
    zeros: MultiplicitySequence,
}

impl FiniteBlaschke {
    pub fn from_zeros(zeros: MultiplicitySequence, rotation: C64) -> Result<Self> {
        if !((rotation.norm() - 1.0).abs() <= 1e-14) {
            return Err(Error::Parameter(format!("rotation {rotation} is not unimodular")));
        }
        Ok(FiniteBlaschke { rotation, zeros })
    }

    pub fn monomial(n: u32) -> Self {
        let zeros = if n == 0 {
            MultiplicitySequence::empty()
        } else {
            MultiplicitySequence { entries: vec![(DiskPoint::origin(), n)] }
        };
        FiniteBlaschke { rotation: C64::new(1.0, 0.0), zeros }
    }

    pub fn rotation(&self) -> C64 {
        self.rotation
    }
    pub fn zeros(&self) -> &MultiplicitySequence {
        &self.zeros
    }
    pub fn degree(&self) -> usize {
        self.zeros.total()
    }
    /// The empty product is a unimodular constant, not a self-map with zeros.
    pub fn is_degenerate(&self) -> bool {
        self.zeros.is_empty()
    }

    /// Value and derivative on the closed disk.
    pub fn evaluate(&self, z: C64) -> Result<(C64, C64)> {
        if !(z.norm() <= 1.0 + 1e-12) {
            return Err(Error::Domain(format!("Blaschke evaluation needs |z| ≤ 1, got {z}")));
        }
        Ok(self.eval_any(z))
    }

    /// Value and derivative anywhere off the poles, accumulated by the product rule.
    pub fn eval_any(&self, z: C64) -> (C64, C64) {
        let mut v = self.rotation;
        let mut d = C64::new(0.0, 0.0);
        for (p, m) in &self.zeros.entries {
            let (f, df) = factor(p.z(), z);
            for _ in 0..*m {
                d = d * f + v * df;
                v *= f;
            }
        }
        (v, d)
    }

    /// `1 − |B(z)|²` without cancellation near the circle.
    pub fn one_minus_abs2(&self, z: C64) -> f64 {
        let oz = one_minus_abs2(z);
        let mut log_mod2 = 0.0;
        for (p, m) in &self.zeros.entries {
            let a = p.z();
            let s = one_minus_abs2(a) * oz / (1.0 - a.conj() * z).norm_sqr();
            log_mod2 += *m as f64 * (-s).ln_1p();
        }
        -log_mod2.exp_m1()
    }

    /// `|B′(z)|/(1 − |B(z)|²)`.
    pub fn hyperbolic_density(&self, z: C64) -> f64 {
        self.eval_any(z).1.norm() / self.one_minus_abs2(z)
    }

    /// Solutions of `B(z) = w` in the disk, repeated by multiplicity.
    pub fn preimages(&self, w: C64) -> Result<Vec<C64>> {
        if w.norm() >= 1.0 {
            return Err(Error::Domain(format!("preimage target {w} is not in the disk")));
        }
        let mut num = vec![self.rotation];
        let mut den = vec![C64::new(1.0, 0.0)];
        for (p, m) in &self.zeros.entries {
            let a = p.z();
            let r = a.norm();
            for _ in 0..*m {
                if r == 0.0 {
                    num = poly_mul(&num, &[C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);
                } else {
                    num = poly_mul(&num, &[a.conj() / r * a, -a.conj() / r]);
                    den = poly_mul(&den, &[C64::new(1.0, 0.0), -a.conj()]);
                }
            }
        }
        let eq = poly_add(&num, &den.iter().map(|c| -c * w).collect::<Vec<_>>());
        let roots = poly_roots(&eq)?;
        Ok(roots.into_iter().filter(|z| z.norm() < 1.0).collect())
    }

    /// Polynomial `M` with `B′ = c·Π(zeros of multiplicity ≥2 factors)·M/Q²`; its roots in the disk are the
    /// critical points of `B` that are not zeros of `B`.
    fn critical_polynomial(&self) -> Vec<C64> {
        let pts: Vec<(C64, f64)> = self.zeros.entries.iter().map(|(p, m)| (p.z(), *m as f64)).collect();
        critical_polynomial_weighted(&pts)
    }

    /// Zeros of `B′` inside the disk with multiplicities; exactly `degree − 1` counted.
    pub fn critical_points(&self) -> Result<MultiplicitySequence> {
        let m = self.degree();
        if m == 0 {
            return Err(Error::Degenerate("constant Blaschke product has no critical set".into()));
        }
        let mut out: Vec<(DiskPoint, u32)> = self
            .zeros
            .entries
            .iter()
            .filter(|(_, k)| *k >= 2)
            .map(|(p, k)| (*p, k - 1))
            .collect();
        let d = self.zeros.len();
        if d >= 2 {
            let poly = self.critical_polynomial();
            let inside = interior_roots(&poly, d - 1)?;
            for (z, k) in inside {
                out.push((DiskPoint::from_c64(z)?, k));
            }
        }
        let seq = MultiplicitySequence::new(out)?;
        debug_assert_eq!(seq.total(), m - 1);
        Ok(seq)
    }
}

/// Paper-normalized factor and its derivative.
fn factor(a: C64, z: C64) -> (C64, C64) {
    let r = a.norm();
    if r == 0.0 {
        return (z, C64::new(1.0, 0.0));
    }
    let u = a.conj() / r;
    let den = 1.0 - a.conj() * z;
    (u * (a - z) / den, u * (r * r - 1.0) / (den * den))
}

/// `Σ_j w_j (|a_j|² − 1) Π_{k≠j} (1 − conj(a_k) z)(a_k − z)`.
fn critical_polynomial_weighted(pts: &[(C64, f64)]) -> Vec<C64> {
    let quad = |a: C64| vec![a, -(1.0 + a.norm_sqr()) * C64::new(1.0, 0.0), a.conj()];
    let mut total = vec![C64::new(0.0, 0.0)];
    for (j, (aj, wj)) in pts.iter().enumerate() {
        let mut term = vec![C64::new(wj * (aj.norm_sqr() - 1.0), 0.0)];
        for (k, (ak, _)) in pts.iter().enumerate() {
            if k != j {
                term = poly_mul(&term, &quad(*ak));
            }
        }
        total = poly_add(&total, &term);
    }
    total
}

/// Roots of `poly` inside the disk, clustered within pseudo-hyperbolic radius 1e−6.
fn interior_roots(poly: &[C64], expected: usize) -> Result<Vec<(C64, u32)>> {
    let roots = poly_roots(poly)?;
    let mut inside: Vec<C64> = roots.into_iter().filter(|z| z.norm() < 1.0).collect();
    if inside.len() != expected {
        let res = inside.iter().fold(0.0f64, |m, &z| m.max(poly_eval(poly, z).norm()));
        return Err(Error::NonConvergence {
            what: format!("critical point count: found {} of {expected}", inside.len()),
            iterations: 0,
            residual: res,
        });
    }
    let mut clusters: Vec<Vec<C64>> = Vec::new();
    for z in inside.drain(..) {
        match clusters.iter_mut().find(|c| c.iter().any(|w| pseudo_hyperbolic(z, *w) < 1e-6)) {
            Some(c) => c.push(z),
            None => clusters.push(vec![z]),
        }
    }
    let mut out = Vec::new();
    for c in clusters {
        let k = c.len();
        let mut z = c.iter().sum::<C64>() / k as f64;
        let mut dp = poly.to_vec();
        for _ in 1..k {
            dp = poly_derivative(&dp);
        }
        for _ in 0..4 {
            let (v, d) = poly_eval_d(&dp, z);
            if d.norm() == 0.0 {
                break;
            }
            let step = v / d;
            if !(step.norm() < 1e-7) {
                break;
            }
            z -= step;
        }
        out.push((z, k as u32));
    }
    Ok(out)
}

/// Diagnostics from [`from_critical_points_with`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InverseReport {
    pub iterations: usize,
    pub residual: f64,
    pub homotopy_used: bool,
    pub max_match_distance: f64,
    pub max_derivative_at_targets: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct InverseOptions {
    pub r_max: f64,
    pub match_tol: f64,
    pub homotopy_steps: usize,
    pub max_newton: usize,
}

impl Default for InverseOptions {
    fn default() -> Self {
        InverseOptions { r_max: 0.995, match_tol: 1e-8, homotopy_steps: 16, max_newton: 80 }
    }
}

/// Degree `n + 1` product with `F(0) = 0`, positive leading Taylor coefficient and critical set `C`.
pub fn from_critical_points(c: &MultiplicitySequence) -> Result<FiniteBlaschke> {
    from_critical_points_with(c, &InverseOptions::default()).map(|(b, _)| b)
}

pub fn from_critical_points_with(c: &MultiplicitySequence, opts: &InverseOptions) -> Result<(FiniteBlaschke, InverseReport)> {
    let mut warnings = Vec::new();
    for (p, _) in c.entries() {
        if p.abs() > opts.r_max {
            warnings.push(format!("critical point {} beyond R_max={}; result may be ill-conditioned", p.z(), opts.r_max));
        }
    }
    let m0 = c.multiplicity_at(C64::new(0.0, 0.0), 0.0) as usize;
    let targets: Vec<(C64, u32)> = c
        .entries()
        .iter()
        .filter(|(p, _)| p.z() != C64::new(0.0, 0.0))
        .map(|(p, m)| (p.z(), *m))
        .collect();
    let n_free: usize = targets.iter().map(|(_, m)| *m as usize).sum();
    let system = CriticalSystem { fixed_origin: m0 + 1, targets: targets.clone() };

    let mut homotopy_used = false;
    let mut total_iter = 0;
    let free = if n_free == 0 {
        Vec::new()
    } else {
        let guess = spread(&targets);
        match system.newton(guess, opts.max_newton) {
            Ok((z, it)) => {
                total_iter += it;
                z
            }
            Err(_) => {
                homotopy_used = true;
                let mut z = homotopy_seed(m0, &targets, 1.0 / opts.homotopy_steps as f64)?;
                let mut last = Err(Error::Degenerate("empty homotopy".into()));
                for step in 1..=opts.homotopy_steps {
                    let t = step as f64 / opts.homotopy_steps as f64;
                    let sys = CriticalSystem {
                        fixed_origin: m0 + 1,
                        targets: targets.iter().map(|(p, m)| (p * t, *m)).collect(),
                    };
                    last = sys.newton(z.clone(), opts.max_newton);
                    match &last {
                        Ok((zz, it)) => {
                            total_iter += it;
                            z = zz.clone();
                        }
                        Err(_) => break,
                    }
                }
                last?.0
            }
        }
    };
    let residual = system.normalized_residual(&free);
    let mut pts = vec![C64::new(0.0, 0.0); m0 + 1];
    pts.extend(free.iter().copied());
    let zeros = MultiplicitySequence::from_points(&pts)?;
    let b = FiniteBlaschke::from_zeros(zeros, C64::new(1.0, 0.0))?;

    let recomputed = b.critical_points()?.expanded();
    let wanted = c.expanded();
    let dist = matching_distance(&recomputed, &wanted);
    let max_derivative_at_targets = wanted.iter().fold(0.0f64, |m, z| m.max(b.eval_any(*z).1.norm()));
    if !(dist <= opts.match_tol) {
        return Err(Error::NonConvergence {
            what: format!("critical-point inversion (match distance {dist:.3e}, last zeros {free:?})"),
            iterations: total_iter,
            residual,
        });
    }
    let report = InverseReport {
        iterations: total_iter,
        residual,
        homotopy_used,
        max_match_distance: dist,
        max_derivative_at_targets,
        warnings,
    };
    Ok((b, report))
}

/// Largest pseudo-hyperbolic distance under the optimal matching of two equal-size point lists.
pub fn matching_distance(a: &[C64], b: &[C64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let cost: Vec<Vec<f64>> = a.iter().map(|x| b.iter().map(|y| pseudo_hyperbolic(*x, *y)).collect()).collect();
    let assign = min_cost_assignment(&cost);
    assign.iter().enumerate().fold(0.0f64, |m, (i, &j)| m.max(cost[i][j]))
}

/// Targets repeated by multiplicity; repeats are spread on a small circle to keep the Jacobian regular.
fn spread(targets: &[(C64, u32)]) -> Vec<C64> {
    let mut out = Vec::new();
    for (p, m) in targets {
        if *m == 1 {
            out.push(*p);
        } else {
            let rad = 0.05 * (1.0 - p.norm());
            for k in 0..*m {
                out.push(p + C64::from_polar(rad, 2.0 * PI * k as f64 / *m as f64 + 0.3));
            }
        }
    }
    out
}

/// Nonzero roots of `∫₀^ζ w^{m0} Π (w − c_j)^{m_j} dw`, scaled by `t`.
fn homotopy_seed(m0: usize, targets: &[(C64, u32)], t: f64) -> Result<Vec<C64>> {
    let mut p = vec![C64::new(1.0, 0.0)];
    for _ in 0..m0 {
        p = poly_mul(&p, &[C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);
    }
    for (c, m) in targets {
        for _ in 0..*m {
            p = poly_mul(&p, &[-c, C64::new(1.0, 0.0)]);
        }
    }
    // Integrate and divide by z^{m0+1}.
    let q: Vec<C64> = p.iter().enumerate().map(|(k, a)| a / (k + 1) as f64).skip(m0).collect();
    let mut roots = poly_roots(&q)?;
    for k in 0..roots.len() {
        for j in 0..k {
            if (roots[k] - roots[j]).norm() < 1e-6 {
                roots[k] += C64::from_polar(1e-3, 0.7 * k as f64);
            }
        }
    }
    let scale = roots.iter().fold(0.0f64, |m, r| m.max(r.norm()));
    let t = if scale * t >= 0.9 { 0.9 / scale } else { t };
    Ok(roots.into_iter().map(|r| r * t).collect())
}

/// Residual map from free zeros to Taylor coefficients of the critical polynomial at the targets.
struct CriticalSystem {
    fixed_origin: usize,
    targets: Vec<(C64, u32)>,
}

impl CriticalSystem {
    fn poly(&self, free: &[C64]) -> Vec<C64> {
        let mut pts: Vec<(C64, f64)> = vec![(C64::new(0.0, 0.0), self.fixed_origin as f64)];
        pts.extend(free.iter().map(|z| (*z, 1.0)));
        critical_polynomial_weighted(&pts)
    }

    fn residual(&self, free: &[C64]) -> Vec<C64> {
        let p = self.poly(free);
        let mut out = Vec::new();
        for (c, m) in &self.targets {
            let q = taylor_shift(&p, *c);
            out.extend(q.iter().take(*m as usize).copied());
        }
        out
    }

    fn normalized_residual(&self, free: &[C64]) -> f64 {
        let mut p = self.poly(free);
        poly_trim(&mut p);
        let scale = p.iter().fold(0.0f64, |m, c| m.max(c.norm())).max(1e-300);
        self.residual(free).iter().fold(0.0f64, |m, r| m.max(r.norm())) / scale
    }

    fn norm(r: &[C64]) -> f64 {
        r.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Damped Newton with a central-difference Jacobian in the real coordinates.
    fn newton(&self, mut z: Vec<C64>, max_iter: usize) -> Result<(Vec<C64>, usize)> {
        let n = z.len();
        let h = 1e-6;
        let mut r = self.residual(&z);
        let mut rn = Self::norm(&r);
        for it in 0..max_iter {
            if self.normalized_residual(&z) < 1e-15 {
                return Ok((z, it));
            }
            let mut jac = vec![vec![0.0; 2 * n]; 2 * n];
            for k in 0..2 * n {
                let dir = if k % 2 == 0 { C64::new(h, 0.0) } else { C64::new(0.0, h) };
                let mut zp = z.clone();
                let mut zm = z.clone();
                zp[k / 2] += dir;
                zm[k / 2] -= dir;
                let rp = self.residual(&zp);
                let rm = self.residual(&zm);
                for i in 0..n {
                    let d = (rp[i] - rm[i]) / (2.0 * h);
                    jac[2 * i][k] = d.re;
                    jac[2 * i + 1][k] = d.im;
                }
            }
            let rhs: Vec<f64> = r.iter().flat_map(|c| [-c.re, -c.im]).collect();
            let step = dense_solve(jac, rhs)?;
            let dz: Vec<C64> = (0..n).map(|i| C64::new(step[2 * i], step[2 * i + 1])).collect();
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let trial: Vec<C64> = z.iter().zip(&dz).map(|(a, d)| a + d * lambda).collect();
                if trial.iter().all(|a| a.norm() < 1.0 - 1e-12) {
                    let rt = self.residual(&trial);
                    let rtn = Self::norm(&rt);
                    if rtn < (1.0 - 1e-4 * lambda) * rn || (rtn <= rn && lambda < 1e-6) {
                        z = trial;
                        r = rt;
                        rn = rtn;
                        accepted = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            if !accepted {
                let nr = self.normalized_residual(&z);
                if nr < 1e-12 {
                    return Ok((z, it));
                }
                return Err(Error::NonConvergence { what: "critical-point Newton".into(), iterations: it, residual: nr });
            }
        }
        let nr = self.normalized_residual(&z);
        if nr < 1e-12 {
            Ok((z, max_iter))
        } else {
            Err(Error::NonConvergence { what: "critical-point Newton".into(), iterations: max_iter, residual: nr })
        }
    }
}

/// Trend verdict for a partial Blaschke sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SumVerdict {
    ConvergentSoFar,
    DivergentTrend,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlaschkeSumReport {
    pub partial: f64,
    pub terms: usize,
    /// Exponent `p` of the fitted tail `1 − |z_j| ≈ C j^{−p}`; absent for finite sequences.
    pub tail_exponent: Option<f64>,
    /// Partial sum plus the fitted tail, when the fit indicates convergence.
    pub extrapolated: Option<f64>,
    pub verdict: SumVerdict,
}

/// `Σ_{j ≤ horizon} (1 − |z_j|)` with an advisory tail verdict.
pub fn blaschke_sum<I>(points: I, horizon: usize) -> BlaschkeSumReport
where
    I: IntoIterator<Item = C64>,
{
    let terms: Vec<f64> = points.into_iter().take(horizon).map(|z| 1.0 - z.norm()).collect();
    let partial = crate::disk_core::pairwise_sum(&terms);
    let n = terms.len();
    if n < horizon || n < 16 {
        return BlaschkeSumReport { partial, terms: n, tail_exponent: None, extrapolated: Some(partial), verdict: SumVerdict::ConvergentSoFar };
    }
    let lo = n / 8;
    let (xs, ys): (Vec<f64>, Vec<f64>) = (lo..n)
        .filter(|&j| terms[j] > 0.0)
        .map(|j| (((j + 1) as f64).ln(), terms[j].ln()))
        .unzip();
    if xs.len() < 8 {
        return BlaschkeSumReport { partial, terms: n, tail_exponent: None, extrapolated: Some(partial), verdict: SumVerdict::ConvergentSoFar };
    }
    let (slope, intercept) = linear_fit(&xs, &ys);
    let p = -slope;
    if p > 1.1 {
        let tail = intercept.exp() * (n as f64 + 0.5).powf(1.0 - p) / (p - 1.0);
        BlaschkeSumReport { partial, terms: n, tail_exponent: Some(p), extrapolated: Some(partial + tail), verdict: SumVerdict::ConvergentSoFar }
    } else {
        BlaschkeSumReport { partial, terms: n, tail_exponent: Some(p), extrapolated: None, verdict: SumVerdict::DivergentTrend }
    }
}

/// Winding number of `t ↦ f(r e^{it})` about 0 with adaptive argument tracking.
pub fn degree_by_winding(f: &dyn AnalyticMap, r: f64) -> Result<i64> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::Parameter(format!("winding radius must lie in (0, 1], got {r}")));
    }
    let sample = |t: f64| -> Result<(C64, f64)> {
        let z = C64::from_polar(r, t);
        let (v, d) = f.eval(z);
        if !(v.norm() >= 1e-10) {
            return Err(Error::ZeroOnCircle { r });
        }
        Ok((v, (z * d / v).re))
    };
    fn wrap(x: f64) -> f64 {
        (x + PI).rem_euclid(2.0 * PI) - PI
    }
    let n0 = 64;
    let mut total = 0.0;
    let mut stack: Vec<(f64, f64, C64, f64, C64, f64, u32)> = Vec::new();
    let (mut v_prev, mut rate_prev) = sample(0.0)?;
    for k in 1..=n0 {
        let t0 = 2.0 * PI * (k - 1) as f64 / n0 as f64;
        let t1 = 2.0 * PI * k as f64 / n0 as f64;
        let (v1, rate1) = sample(t1)?;
        stack.push((t0, t1, v_prev, rate_prev, v1, rate1, 0));
        while let Some((a, b, va, ra, vb, rb, depth)) = stack.pop() {
            let d = wrap((vb / va).arg());
            let h = b - a;
            if depth >= 40 || (d.abs() < PI / 4.0 && ra.abs().max(rb.abs()) * h < PI / 2.0) {
                total += d;
            } else {
                let m = 0.5 * (a + b);
                let (vm, rm) = sample(m)?;
                stack.push((m, b, vm, rm, vb, rb, depth + 1));
                stack.push((a, m, va, ra, vm, rm, depth + 1));
            }
        }
        v_prev = v1;
        rate_prev = rate1;
    }
    Ok((total / (2.0 * PI)).round() as i64)
}

impl AnalyticMap for FiniteBlaschke {
    fn eval(&self, z: C64) -> (C64, C64) {
        self.eval_any(z)
    }

    fn one_minus_abs2_at(&self, z: C64) -> f64 {
        FiniteBlaschke::one_minus_abs2(self, z)
    }

    fn critical_set(&self) -> Option<Result<MultiplicitySequence>> {
        Some(self.critical_points())
    }

    fn preimages(&self, w: C64) -> Option<Result<Vec<C64>>> {
        Some(self.preimages(w))
    }

    fn describe(&self) -> String {
        format!("blaschke(degree {})", self.degree())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn seq(points: &[(f64, f64, u32)]) -> MultiplicitySequence {
        MultiplicitySequence::new(points.iter().map(|&(x, y, m)| (DiskPoint::new(x, y).unwrap(), m)).collect()).unwrap()
    }

    #[test]
    fn from_zeros_examples() {
        let b = FiniteBlaschke::from_zeros(seq(&[(0.0, 0.0, 1)]), c(1.0, 0.0)).unwrap();
        let z = c(0.3, -0.4);
        assert!((b.evaluate(z).unwrap().0 - z).norm() < 1e-16);
        let e = FiniteBlaschke::from_zeros(MultiplicitySequence::empty(), c(0.0, 1.0)).unwrap();
        assert!(e.is_degenerate());
        assert_eq!(e.evaluate(z).unwrap().0, c(0.0, 1.0));
        let h = FiniteBlaschke::from_zeros(seq(&[(0.5, 0.0, 1)]), c(1.0, 0.0)).unwrap();
        assert!(h.evaluate(c(0.5, 0.0)).unwrap().0.norm() < 1e-16);
        assert!((h.evaluate(c(0.0, 0.0)).unwrap().0 - 0.5).norm() < 1e-16);
        assert!(FiniteBlaschke::from_zeros(seq(&[(0.5, 0.0, 1)]), c(1.1, 0.0)).is_err());
    }

    #[test]
    fn evaluate_examples() {
        let b = FiniteBlaschke::monomial(2);
        let (v, d) = b.evaluate(c(0.5, 0.0)).unwrap();
        assert!((v - 0.25).norm() < 1e-16 && (d - 1.0).norm() < 1e-16);
        let h = FiniteBlaschke::from_zeros(seq(&[(0.5, 0.0, 1)]), c(1.0, 0.0)).unwrap();
        assert!((h.evaluate(c(0.5, 0.0)).unwrap().1.norm() - 4.0 / 3.0).abs() < 1e-15);
        let g = FiniteBlaschke::from_zeros(seq(&[(0.5, 0.2, 2), (-0.3, 0.6, 1)]), c(0.6, 0.8)).unwrap();
        for k in 0..64 {
            let z = C64::from_polar(1.0, 2.0 * PI * k as f64 / 64.0);
            assert!((g.evaluate(z).unwrap().0.norm() - 1.0).abs() < 1e-12);
        }
        assert!(g.evaluate(c(1.5, 0.0)).is_err());
    }

    #[test]
    fn stable_one_minus_modulus() {
        let g = FiniteBlaschke::from_zeros(seq(&[(0.5, 0.2, 2), (-0.3, 0.6, 1)]), c(1.0, 0.0)).unwrap();
        let z = c(0.3, 0.1);
        assert!((g.one_minus_abs2(z) - (1.0 - g.eval_any(z).0.norm_sqr())).abs() < 1e-14);
        let z = C64::from_polar(1.0 - 1e-9, 0.4);
        let s = g.one_minus_abs2(z);
        assert!(s > 0.0 && s < 1e-7);
    }

    #[test]
    fn critical_points_examples() {
        let c2 = FiniteBlaschke::monomial(2).critical_points().unwrap();
        assert_eq!(c2.entries(), &[(DiskPoint::origin(), 1)]);
        let c3 = FiniteBlaschke::monomial(3).critical_points().unwrap();
        assert_eq!(c3.entries(), &[(DiskPoint::origin(), 2)]);
        let phi2 = FiniteBlaschke::from_zeros(seq(&[(0.3, 0.0, 2)]), c(1.0, 0.0)).unwrap();
        let cp = phi2.critical_points().unwrap();
        assert_eq!(cp.total(), 1);
        assert!((cp.entries()[0].0.z() - 0.3).norm() < 1e-15);
        let g = FiniteBlaschke::from_zeros(seq(&[(0.5, 0.2, 2), (-0.3, 0.6, 1), (0.0, -0.7, 1)]), c(1.0, 0.0)).unwrap();
        let cp = g.critical_points().unwrap();
        assert_eq!(cp.total(), 3);
        for z in cp.expanded() {
            assert!(g.eval_any(z).1.norm() < 1e-12);
        }
    }

    #[test]
    fn inverse_examples() {
        let f = from_critical_points(&seq(&[(0.0, 0.0, 1)])).unwrap();
        assert!((f.eval_any(c(0.3, 0.2)).0 - c(0.3, 0.2).powi(2)).norm() < 1e-14);
        let f = from_critical_points(&seq(&[(0.0, 0.0, 2)])).unwrap();
        assert!((f.eval_any(c(0.3, 0.2)).0 - c(0.3, 0.2).powi(3)).norm() < 1e-14);
        let (f, rep) = from_critical_points_with(&seq(&[(0.4, 0.0, 1)]), &InverseOptions::default()).unwrap();
        assert!(f.eval_any(c(0.4, 0.0)).1.norm() < 1e-10);
        assert!(rep.max_match_distance < 1e-8);
        // φ_a² normalized by F(0)=0 has its second zero at 2a/(1+a²).
        let other = 0.8 / 1.16;
        assert!(f.zeros().expanded().iter().any(|z| (z - other).norm() < 1e-10));
        assert_eq!(degree_by_winding(&f, 0.99).unwrap(), 2);
    }

    #[test]
    fn inverse_with_multiple_targets() {
        let cset = seq(&[(0.3, 0.0, 1), (0.0, -0.3, 1), (-0.5, 0.4, 2), (0.0, 0.0, 1)]);
        let (f, rep) = from_critical_points_with(&cset, &InverseOptions::default()).unwrap();
        assert_eq!(f.degree(), 6);
        assert!(rep.max_match_distance < 1e-8, "{rep:?}");
        let lead = f.eval_any(c(1e-6, 0.0)).0 / 1e-12;
        assert!(lead.re > 0.0 && lead.im.abs() < 1e-4 * lead.re);
    }

    #[test]
    fn blaschke_sum_examples() {
        let conv = blaschke_sum((1..).map(|j: usize| c(1.0 - 1.0 / (j * j) as f64, 0.0)), 100_000);
        assert_eq!(conv.verdict, SumVerdict::ConvergentSoFar);
        assert!((conv.extrapolated.unwrap() - PI * PI / 6.0).abs() < 1e-6);
        let div = blaschke_sum((1..).map(|j: usize| c(1.0 - 1.0 / j as f64, 0.0)), 100_000);
        assert_eq!(div.verdict, SumVerdict::DivergentTrend);
        let fin = blaschke_sum([c(0.5, 0.0), c(0.0, 0.75)], 100);
        assert_eq!(fin.verdict, SumVerdict::ConvergentSoFar);
        assert!((fin.partial - 0.75).abs() < 1e-15);
    }

    #[test]
    fn preimages_solve_equation() {
        let g = FiniteBlaschke::from_zeros(seq(&[(0.5, 0.2, 2), (-0.3, 0.6, 1)]), c(0.6, 0.8)).unwrap();
        let w = c(0.1, -0.2);
        let pre = g.preimages(w).unwrap();
        assert_eq!(pre.len(), 3);
        for z in pre {
            assert!((g.eval_any(z).0 - w).norm() < 1e-12);
        }
    }

    #[test]
    fn winding_examples() {
        assert_eq!(degree_by_winding(&FiniteBlaschke::monomial(2), 0.9).unwrap(), 2);
        assert_eq!(degree_by_winding(&FiniteBlaschke::monomial(1), 0.5).unwrap(), 1);
        let b = FiniteBlaschke::from_zeros(seq(&[(0.5, 0.0, 1)]), c(1.0, 0.0)).unwrap();
        assert!(matches!(degree_by_winding(&b, 0.5), Err(Error::ZeroOnCircle { .. })));
        let g = FiniteBlaschke::from_zeros(seq(&[(0.95, 0.0, 3), (-0.99, 0.05, 2), (0.1, 0.98, 1)]), c(1.0, 0.0)).unwrap();
        assert_eq!(degree_by_winding(&g, 0.999).unwrap(), 6);
    }
}
