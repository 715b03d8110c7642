//! Integral-equation solver `u = h − (1/2π)∬ g k e^{2u} dσ` with Fourier-mode product integration.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use super::{DirichletProblem, Method, Solution, SolveReport};
use crate::disk_core::{GridField, PolarGrid, QuadratureRule, RuleKind, C64};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct GreenOptions {
    pub n_r: usize,
    pub n_theta: usize,
    /// Target for the fixed-point residual `max |u − h + P[k e^{2u}]|`.
    pub tol: f64,
    pub max_picard: usize,
    /// Switch to Newton–Krylov when Picard stops contracting instead of failing.
    pub newton_fallback: bool,
}

impl Default for GreenOptions {
    fn default() -> Self {
        GreenOptions { n_r: 128, n_theta: 128, tol: 1e-10, max_picard: 3000, newton_fallback: true }
    }
}

impl GreenOptions {
    pub fn with_resolution(n_r: usize, n_theta: usize) -> Self {
        GreenOptions { n_r, n_theta, ..Default::default() }
    }
}

fn forward_rows(values: &[f64], n_t: usize) -> Vec<Complex64> {
    let fft = FftPlanner::new().plan_fft_forward(n_t);
    let mut spec: Vec<Complex64> = values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    spec.par_chunks_mut(n_t).for_each(|row| fft.process(row));
    let s = 1.0 / n_t as f64;
    spec.iter_mut().for_each(|c| *c *= s);
    spec
}

fn inverse_rows(spec: &mut [Complex64], n_t: usize) -> Vec<f64> {
    let fft = FftPlanner::new().plan_fft_inverse(n_t);
    spec.par_chunks_mut(n_t).for_each(|row| fft.process(row));
    spec.iter().map(|c| c.re).collect()
}

fn mode_order(m: usize, n_t: usize) -> usize {
    m.min(n_t - m)
}

/// Harmonic function on the grid disk with the given ring values (trigonometric interpolation).
pub fn harmonic_extension(grid: &Arc<PolarGrid>, ring: &[f64]) -> Result<GridField> {
    let n_t = grid.n_theta();
    if ring.len() != n_t {
        return Err(Error::Contract("ring data length differs from n_theta".into()));
    }
    let g = forward_rows(ring, n_t);
    let r_max = grid.r_max();
    let mut spec: Vec<Complex64> = grid
        .radii()
        .iter()
        .flat_map(|&r| {
            let s = r / r_max;
            g.iter().enumerate().map(move |(m, c)| c * s.powi(mode_order(m, n_t) as i32)).collect::<Vec<_>>()
        })
        .collect();
    let values = inverse_rows(&mut spec, n_t);
    GridField::new(grid.clone(), values, ring.to_vec())
}

/// `P[f] = (1/2π)∬ g(z, ξ) f(ξ) dσ_ξ` at the interior nodes, for `f` piecewise constant in `r`
/// on the grid cells (ring values fill the outer annulus) and trigonometric in `θ`.
pub(crate) struct Potential {
    n_r: usize,
    n_t: usize,
    r: Vec<f64>,
    e: Vec<f64>,
    r_max: f64,
}

impl Potential {
    pub fn new(grid: &PolarGrid) -> Self {
        let n_r = grid.n_r();
        Potential {
            n_r,
            n_t: grid.n_theta(),
            r: grid.radii().to_vec(),
            e: (0..=n_r).map(|i| grid.face(i)).collect(),
            r_max: grid.r_max(),
        }
    }

    pub fn apply(&self, f: &[f64], f_ring: &[f64]) -> Vec<f64> {
        let (n_r, n_t) = (self.n_r, self.n_t);
        let mut all = f.to_vec();
        all.extend_from_slice(f_ring);
        let spec = forward_rows(&all, n_t);
        let cols: Vec<Vec<Complex64>> = (0..n_t)
            .into_par_iter()
            .map(|m| {
                let col: Vec<Complex64> = (0..=n_r).map(|i| spec[i * n_t + m]).collect();
                let n = mode_order(m, n_t);
                if n == 0 {
                    self.mode_zero(&col)
                } else {
                    self.mode(&col, n)
                }
            })
            .collect();
        let mut out = vec![Complex64::new(0.0, 0.0); n_r * n_t];
        for (m, col) in cols.iter().enumerate() {
            for i in 0..n_r {
                out[i * n_t + m] = col[i];
            }
        }
        inverse_rows(&mut out, n_t)
    }

    fn mode_zero(&self, f: &[Complex64]) -> Vec<Complex64> {
        let (n_r, big) = (self.n_r, self.r_max);
        let phi = |p: f64| if p == 0.0 { 0.0 } else { 0.5 * p * p * (big / p).ln() + 0.25 * p * p };
        let mass = |a: f64, b: f64| 0.5 * (b * b - a * a);
        let mut lower = vec![Complex64::new(0.0, 0.0); n_r];
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n_r {
            let prev = if i == 0 { 0.0 } else { self.r[i - 1] };
            if i > 0 {
                acc += f[i - 1] * mass(prev, self.e[i]);
            }
            acc += f[i] * mass(if i == 0 { 0.0 } else { self.e[i] }, self.r[i]);
            lower[i] = acc;
        }
        let mut upper = vec![Complex64::new(0.0, 0.0); n_r];
        let mut acc = f[n_r] * (phi(big) - phi(self.e[n_r]));
        for i in (0..n_r).rev() {
            let next = if i + 1 < n_r { self.r[i + 1] } else { self.e[n_r] };
            if i + 1 < n_r {
                acc += f[i + 1] * (phi(next) - phi(self.e[i + 1]));
            }
            acc += f[i] * (phi(self.e[i + 1]) - phi(self.r[i]));
            upper[i] = acc;
        }
        (0..n_r).map(|i| lower[i] * (big / self.r[i]).ln() + upper[i]).collect()
    }

    fn mode(&self, f: &[Complex64], n: usize) -> Vec<Complex64> {
        let (n_r, big) = (self.n_r, self.r_max);
        let nf = n as f64;
        let ni = n as i32;
        // s^{-n} ∫_a^b ρ^{n+1} dρ and s^{n} ∫_a^b ρ^{1-n} dρ, both with ratios bounded by one.
        let low = |a: f64, b: f64, s: f64| s * s * ((b / s).powi(ni + 2) - (a / s).powi(ni + 2)) / (nf + 2.0);
        let up = |a: f64, b: f64, s: f64| {
            if n == 2 {
                s * s * (b / a).ln()
            } else {
                s * s * ((s / a).powi(ni - 2) - (s / b).powi(ni - 2)) / (nf - 2.0)
            }
        };
        let mut lower = vec![Complex64::new(0.0, 0.0); n_r];
        lower[0] = f[0] * low(0.0, self.r[0], self.r[0]);
        for i in 0..n_r - 1 {
            let s = self.r[i + 1];
            lower[i + 1] = lower[i] * (self.r[i] / s).powi(ni)
                + f[i] * low(self.r[i], self.e[i + 1], s)
                + f[i + 1] * low(self.e[i + 1], s, s);
        }
        let last = n_r - 1;
        let total = lower[last] * (self.r[last] / big).powi(ni)
            + f[last] * low(self.r[last], self.e[n_r], big)
            + f[n_r] * low(self.e[n_r], big, big);
        let mut upper = vec![Complex64::new(0.0, 0.0); n_r];
        let s = self.r[last];
        upper[last] = f[last] * up(s, self.e[n_r], s) + f[n_r] * up(self.e[n_r], big, s);
        for i in (0..last).rev() {
            let s = self.r[i];
            upper[i] = upper[i + 1] * (s / self.r[i + 1]).powi(ni)
                + f[i] * up(s, self.e[i + 1], s)
                + f[i + 1] * up(self.e[i + 1], self.r[i + 1], s);
        }
        (0..n_r)
            .map(|i| (lower[i] + upper[i] - total * (self.r[i] / big).powi(ni)) / (2.0 * nf))
            .collect()
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

struct Setup {
    grid: Arc<PolarGrid>,
    pot: Potential,
    h: GridField,
    k: Vec<f64>,
    k_ring: Vec<f64>,
    ring: Vec<f64>,
}

impl Setup {
    fn source(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let f = u.iter().zip(&self.k).map(|(u, k)| k * (2.0 * u).exp()).collect();
        let fr = self.ring.iter().zip(&self.k_ring).map(|(u, k)| k * (2.0 * u).exp()).collect();
        (f, fr)
    }

    /// `T(u) = h − P[k e^{2u}]`.
    fn map(&self, u: &[f64]) -> Vec<f64> {
        let (f, fr) = self.source(u);
        let p = self.pot.apply(&f, &fr);
        self.h.values().iter().zip(p).map(|(h, p)| h - p).collect()
    }
}

/// Relaxed Picard iteration from the harmonic extension, with a Newton–Krylov fallback.
pub fn solve_dirichlet_green(p: &DirichletProblem, opts: &GreenOptions) -> Result<Solution> {
    let start = Instant::now();
    let grid = Arc::new(PolarGrid::uniform(p.center, p.radius, opts.n_r, opts.n_theta)?);
    let n_t = grid.n_theta();
    let ring: Vec<f64> = (0..n_t).map(|j| p.boundary(grid.ring_point(j))).collect();
    let k: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| p.k.checked(grid.point(i / n_t, i % n_t)))
        .collect::<Result<_>>()?;
    let k_ring = (0..n_t).map(|j| p.k.checked(grid.ring_point(j))).collect::<Result<Vec<_>>>()?;
    let h = harmonic_extension(&grid, &ring)?;
    let setup = Setup { pot: Potential::new(&grid), grid: grid.clone(), h, k, k_ring, ring: ring.clone() };

    // The linearized map −P[2k e^{2u} ·] is similar to a negative semidefinite operator; u ≤ h bounds
    // its spectrum by that of P[2k e^{2h} ·], whose top eigenvalue a short power iteration finds.
    let weight: Vec<f64> = setup.k.iter().zip(setup.h.values()).map(|(k, h)| 2.0 * k * (2.0 * h).exp()).collect();
    let zero_ring = vec![0.0; n_t];
    let mut v = vec![1.0; grid.len()];
    let mut lip = 0.0;
    for _ in 0..25 {
        let f: Vec<f64> = v.iter().zip(&weight).map(|(v, w)| v * w).collect();
        let pv = setup.pot.apply(&f, &zero_ring);
        let norm = pv.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if norm == 0.0 {
            break;
        }
        lip = norm / v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        v = pv.iter().map(|x| x / norm).collect();
    }
    let omega = 2.0 / (2.0 + 1.1 * lip);

    let mut report = SolveReport::new(Method::GreenPicard);
    let mut u = setup.h.values().to_vec();
    let mut rises = 0;
    let mut fallback = false;
    loop {
        let t = setup.map(&u);
        let res = max_diff(&t, &u);
        if let Some(&prev) = report.residual_history.last() {
            rises = if res > prev { rises + 1 } else { 0 };
        }
        report.residual_history.push(res);
        if !res.is_finite() {
            fallback = true;
            break;
        }
        if res <= opts.tol {
            break;
        }
        if rises >= 3 || report.iterations >= opts.max_picard {
            fallback = true;
            break;
        }
        report.iterations += 1;
        u.par_iter_mut().zip(&t).for_each(|(ui, ti)| *ui += omega * (ti - *ui));
    }
    if fallback {
        if !opts.newton_fallback {
            return Err(Error::NonConvergence {
                what: "Picard iteration stopped contracting; Newton fallback required".into(),
                iterations: report.iterations,
                residual: report.final_residual(),
            });
        }
        report.warnings.push(format!("Picard stopped contracting after {} iterations; switched to Newton", report.iterations));
        report.method = Method::GreenNewton;
        u = setup.h.values().to_vec();
        newton_krylov(&setup, &mut u, opts.tol, &mut report)?;
    }
    report.wall_time = start.elapsed();
    Ok(Solution { u: GridField::new(grid, u, ring)?, report })
}

/// Newton on `Φ(u) = u − h + P[k e^{2u}]` with unpreconditioned BiCGSTAB.
fn newton_krylov(s: &Setup, u: &mut Vec<f64>, tol: f64, report: &mut SolveReport) -> Result<()> {
    let zero_ring = vec![0.0; s.grid.n_theta()];
    let phi = |u: &[f64]| -> Vec<f64> { s.map(u).iter().zip(u).map(|(t, u)| u - t).collect() };
    let norm = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut r = phi(u);
    for _ in 0..60 {
        let res = norm(&r);
        report.residual_history.push(res);
        if res <= tol {
            return Ok(());
        }
        report.iterations += 1;
        let slope: Vec<f64> = u.iter().zip(&s.k).map(|(u, k)| 2.0 * k * (2.0 * u).exp()).collect();
        let jac = |v: &[f64]| -> Vec<f64> {
            let f: Vec<f64> = v.iter().zip(&slope).map(|(v, d)| v * d).collect();
            let p = s.pot.apply(&f, &zero_ring);
            v.iter().zip(p).map(|(v, p)| v + p).collect()
        };
        let rhs: Vec<f64> = r.iter().map(|x| -x).collect();
        let (delta, its) = bicgstab(&jac, &rhs, 1e-12, 500);
        report.linear_iterations += its;
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(u, d)| u + step * d).collect();
            let rt = phi(&trial);
            if norm(&rt).is_finite() && norm(&rt) <= (1.0 - 1e-4 * step) * res {
                *u = trial;
                r = rt;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Err(Error::NonConvergence { what: "Green Newton–Krylov".into(), iterations: report.iterations, residual: norm(&r) })
}

fn bicgstab<F: Fn(&[f64]) -> Vec<f64>>(a: &F, b: &[f64], rel_tol: f64, max_iter: usize) -> (Vec<f64>, usize) {
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let r0 = r.clone();
    let bn = dot(b, b).sqrt();
    if bn == 0.0 {
        return (x, 0);
    }
    let (mut rho, mut alpha, mut w) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    for it in 1..=max_iter {
        let rho_new = dot(&r0, &r);
        if rho_new == 0.0 {
            return (x, it);
        }
        let beta = (rho_new / rho) * (alpha / w);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - w * v[i]);
        }
        v = a(&p);
        alpha = rho / dot(&r0, &v);
        let s: Vec<f64> = r.iter().zip(&v).map(|(r, v)| r - alpha * v).collect();
        if dot(&s, &s).sqrt() <= rel_tol * bn {
            x.iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
            return (x, it);
        }
        let t = a(&s);
        w = dot(&t, &s) / dot(&t, &t);
        for i in 0..n {
            x[i] += alpha * p[i] + w * s[i];
            r[i] = s[i] - w * t[i];
        }
        if dot(&r, &r).sqrt() <= rel_tol * bn || w == 0.0 {
            return (x, it);
        }
    }
    (x, max_iter)
}

/// Sample nodes for the representation check: a lattice of grid nodes.
fn representation_samples(grid: &PolarGrid) -> Vec<(usize, usize)> {
    let (n_r, n_t) = (grid.n_r(), grid.n_theta());
    let rs = (n_r / 8).max(1);
    let ts = (n_t / 8).max(1);
    (0..n_r).step_by(rs).flat_map(|i| (0..n_t).step_by(ts).map(move |j| (i, j))).collect()
}

/// Max over sample nodes of `|u − h + (1/2π)∬ g k e^{2u} dσ|`, with the integral taken by `rule`
/// (singularity subtracted) and `h` the Poisson extension of the problem's boundary data.
pub fn verify_representation(u: &Solution, p: &DirichletProblem, rule: &QuadratureRule) -> Result<f64> {
    match rule.kind() {
        RuleKind::Area { center, radius } if (center - p.center).norm() < 1e-12 && (radius - p.radius).abs() < 1e-12 => {}
        _ => return Err(Error::Contract("quadrature rule must cover the problem disk".into())),
    }
    let grid = u.u.grid();
    if (grid.center() - p.center).norm() > 1e-12 || (grid.r_max() - p.radius).abs() > 1e-12 {
        return Err(Error::Contract("solution grid does not match the problem disk".into()));
    }
    let (c, big) = (p.center, p.radius);
    let n_b = 1024;
    let data: Vec<f64> = (0..n_b).map(|j| p.boundary(c + C64::from_polar(big, 2.0 * PI * j as f64 / n_b as f64))).collect();
    let coeffs = forward_rows(&data, n_b);
    let harmonic = |z: C64| {
        let w = (z - c) / big;
        let (s, t) = (w.norm(), w.arg());
        coeffs
            .iter()
            .enumerate()
            .map(|(m, a)| {
                let (n, sign) = if m <= n_b / 2 { (m as f64, 1.0) } else { ((n_b - m) as f64, -1.0) };
                (a * Complex64::from_polar(s.powf(n), sign * n * t)).re
            })
            .sum::<f64>()
    };
    let source: Vec<f64> = rule
        .nodes()
        .par_iter()
        .map(|&xi| Ok(p.k.checked(xi)? * (2.0 * u.u.interpolate(xi)?).exp()))
        .collect::<Result<_>>()?;
    let samples = representation_samples(grid);
    let dev = samples
        .par_iter()
        .map(|&(i, j)| {
            let z = grid.point(i, j);
            let fz = p.k.checked(z)? * (2.0 * u.u.at(i, j)).exp();
            let w = (z - c) / big;
            let mut acc = 0.0;
            for ((xi, wt), f) in rule.nodes().iter().zip(rule.weights()).zip(&source) {
                let o = (xi - c) / big;
                let d = (w - o).norm();
                if d < 1e-14 {
                    continue;
                }
                let g = (1.0 - o.conj() * w).norm().ln() - d.ln();
                acc += wt * g * (f - fz);
            }
            let rr = (z - c).norm_sqr();
            let integral = (acc + fz * PI * (big * big - rr) / 2.0) / (2.0 * PI);
            Ok((u.u.at(i, j) - harmonic(z) + integral).abs())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(dev.into_iter().fold(0.0, f64::max))
}
