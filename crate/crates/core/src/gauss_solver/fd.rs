//! Finite-volume Newton solver on polar grids.

use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use super::green::harmonic_extension;
use super::{DirichletProblem, Method, Solution, SolveReport};
use crate::disk_core::{GridField, PolarGrid};
use crate::error::{Error, Result};
use crate::numeric::tridiagonal_solve;

/// Right-hand side `F(u) = a e^{2u} − b` per interior node, with `a ≥ 0`.
#[derive(Debug, Clone)]
pub struct Nonlinearity {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl Nonlinearity {
    /// `F(u) = k e^{2u}`.
    pub fn pure(a: Vec<f64>) -> Self {
        let b = vec![0.0; a.len()];
        Nonlinearity { a, b }
    }

    fn value(&self, k: usize, u: f64) -> f64 {
        if self.a[k] == 0.0 {
            -self.b[k]
        } else {
            self.a[k] * (2.0 * u).exp() - self.b[k]
        }
    }

    fn slope(&self, k: usize, u: f64) -> f64 {
        if self.a[k] == 0.0 {
            0.0
        } else {
            2.0 * self.a[k] * (2.0 * u).exp()
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FdOptions {
    pub n_r: usize,
    pub n_theta: usize,
    /// Target for `max |Δ_h u − F(u)|`, raised node-wise to the rounding floor.
    pub tol: f64,
    pub max_newton: usize,
}

impl Default for FdOptions {
    fn default() -> Self {
        FdOptions { n_r: 128, n_theta: 128, tol: 1e-10, max_newton: 60 }
    }
}

impl FdOptions {
    pub fn with_resolution(n_r: usize, n_theta: usize) -> Self {
        FdOptions { n_r, n_theta, ..Default::default() }
    }
}

/// Symmetric five-point finite-volume Laplacian on a polar grid, times cell area.
pub(crate) struct PolarOperator {
    pub n_r: usize,
    pub n_t: usize,
    pub area: Vec<f64>,
    /// Coupling between rings `i` and `i + 1`; the last entry couples to the Dirichlet ring.
    pub rad: Vec<f64>,
    /// Coupling between angular neighbours on ring `i`.
    pub ang: Vec<f64>,
}

impl PolarOperator {
    pub fn new(grid: &PolarGrid) -> Self {
        let n_r = grid.n_r();
        let dt = grid.dtheta();
        let r = grid.radii();
        let outer = |i: usize| if i + 1 < n_r { r[i + 1] } else { grid.r_max() };
        PolarOperator {
            n_r,
            n_t: grid.n_theta(),
            area: (0..n_r).map(|i| grid.cell_area(i)).collect(),
            rad: (0..n_r).map(|i| grid.face(i + 1) * dt / (outer(i) - r[i])).collect(),
            ang: (0..n_r).map(|i| (grid.face(i + 1) - grid.face(i)) / (r[i] * dt)).collect(),
        }
    }

    fn diag(&self, i: usize) -> f64 {
        self.rad[i] + if i > 0 { self.rad[i - 1] } else { 0.0 } + 2.0 * self.ang[i]
    }

    /// `(L u)_k` with Dirichlet values `ring` beyond the last interior ring.
    fn apply_at(&self, u: &[f64], ring: &[f64], k: usize) -> f64 {
        let n = self.n_t;
        let (i, j) = (k / n, k % n);
        let c = u[k];
        let jp = if j + 1 == n { k + 1 - n } else { k + 1 };
        let jm = if j == 0 { k + n - 1 } else { k - 1 };
        let outer = if i + 1 < self.n_r { u[k + n] } else { ring[j] };
        let mut s = self.rad[i] * (outer - c) + self.ang[i] * (u[jp] + u[jm] - 2.0 * c);
        if i > 0 {
            s += self.rad[i - 1] * (u[k - n] - c);
        }
        s
    }
}

/// Residuals `G_k = (L u)_k − A_k F_k(u_k)` on `nodes`; other entries are left untouched.
fn residual(op: &PolarOperator, u: &[f64], ring: &[f64], nl: &Nonlinearity, nodes: &[usize], out: &mut [f64]) {
    let vals: Vec<f64> = nodes.par_iter().map(|&k| op.apply_at(u, ring, k) - op.area[k / op.n_t] * nl.value(k, u[k])).collect();
    for (&k, v) in nodes.iter().zip(vals) {
        out[k] = v;
    }
}

fn node_tolerance(op: &PolarOperator, u: &[f64], ring: &[f64], tol: f64, k: usize) -> f64 {
    let i = k / op.n_t;
    let scale = 1.0 + u[k].abs() + if i + 1 == op.n_r { ring[k % op.n_t].abs() } else { 0.0 };
    tol.max(64.0 * f64::EPSILON * op.diag(i) / op.area[i] * scale)
}

/// Mode-wise radial solves after an FFT in θ, using the ring-averaged reaction.
struct ModePreconditioner {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    diags: Vec<Vec<f64>>,
}

impl ModePreconditioner {
    fn new(op: &PolarOperator, reaction: &[f64]) -> Self {
        let (n_r, n_t) = (op.n_r, op.n_t);
        let mut planner = FftPlanner::new();
        let mean: Vec<f64> = (0..n_r)
            .map(|i| op.area[i] * reaction[i * n_t..(i + 1) * n_t].iter().sum::<f64>() / n_t as f64)
            .collect();
        let lower = (0..n_r).map(|i| if i > 0 { -op.rad[i - 1] } else { 0.0 }).collect();
        let upper = (0..n_r).map(|i| if i + 1 < n_r { -op.rad[i] } else { 0.0 }).collect();
        let diags = (0..n_t)
            .map(|m| {
                let lam = 2.0 - 2.0 * (2.0 * std::f64::consts::PI * m as f64 / n_t as f64).cos();
                (0..n_r)
                    .map(|i| op.rad[i] + if i > 0 { op.rad[i - 1] } else { 0.0 } + op.ang[i] * lam + mean[i])
                    .collect()
            })
            .collect();
        ModePreconditioner { fwd: planner.plan_fft_forward(n_t), inv: planner.plan_fft_inverse(n_t), lower, upper, diags }
    }

    fn apply(&self, r: &[f64], z: &mut [f64], n_r: usize, n_t: usize) {
        let mut spec: Vec<Complex64> = r.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        spec.par_chunks_mut(n_t).for_each(|row| self.fwd.process(row));
        let cols: Vec<Vec<Complex64>> = (0..n_t)
            .into_par_iter()
            .map(|m| {
                let mut col: Vec<Complex64> = (0..n_r).map(|i| spec[i * n_t + m]).collect();
                let mut scratch = Vec::new();
                tridiagonal_solve(&self.lower, &self.diags[m], &self.upper, &mut col, &mut scratch);
                col
            })
            .collect();
        for (m, col) in cols.iter().enumerate() {
            for i in 0..n_r {
                spec[i * n_t + m] = col[i];
            }
        }
        spec.par_chunks_mut(n_t).for_each(|row| self.inv.process(row));
        let s = 1.0 / n_t as f64;
        for (o, c) in z.iter_mut().zip(&spec) {
            *o = c.re * s;
        }
    }
}

/// Angular line solves over the active arcs of each ring.
struct LinePreconditioner {
    arcs: Vec<(usize, Vec<usize>)>,
    diag: Vec<f64>,
    ang: Vec<f64>,
}

impl LinePreconditioner {
    fn new(op: &PolarOperator, reaction: &[f64], active: &[bool], nodes: &[usize]) -> Self {
        let n = op.n_t;
        let mut arcs = Vec::new();
        let mut rows: Vec<usize> = nodes.iter().map(|k| k / n).collect();
        rows.dedup();
        for i in rows {
            let row = &active[i * n..(i + 1) * n];
            if row.iter().all(|&a| a) {
                arcs.push((i, (0..n).map(|j| i * n + j).collect()));
                continue;
            }
            let Some(start) = (0..n).find(|&j| !row[j]) else { continue };
            let mut cur: Vec<usize> = Vec::new();
            for s in 1..=n {
                let j = (start + s) % n;
                if row[j] {
                    cur.push(i * n + j);
                } else if !cur.is_empty() {
                    arcs.push((i, std::mem::take(&mut cur)));
                }
            }
        }
        let mut diag = vec![0.0; op.n_r * n];
        for &k in nodes {
            diag[k] = op.diag(k / n) + op.area[k / n] * reaction[k];
        }
        LinePreconditioner { arcs, diag, ang: op.ang.clone() }
    }

    /// Writes only the active entries of `z`.
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let mut scratch = Vec::new();
        for (i, arc) in &self.arcs {
            let a = -self.ang[*i];
            let m = arc.len();
            let lower: Vec<f64> = (0..m).map(|p| if p > 0 { a } else { 0.0 }).collect();
            let upper: Vec<f64> = (0..m).map(|p| if p + 1 < m { a } else { 0.0 }).collect();
            let diag: Vec<f64> = arc.iter().map(|&k| self.diag[k]).collect();
            let mut rhs: Vec<f64> = arc.iter().map(|&k| r[k]).collect();
            tridiagonal_solve(&lower, &diag, &upper, &mut rhs, &mut scratch);
            for (&k, v) in arc.iter().zip(rhs) {
                z[k] = v;
            }
        }
    }
}

enum Precond {
    Mode(ModePreconditioner),
    Line(LinePreconditioner),
}

/// Conjugate gradients on `M δ = g`, `M = −L + A·diag(reaction)` restricted to `nodes`.
fn pcg(op: &PolarOperator, reaction: &[f64], nodes: &[usize], pre: &Precond, g: &[f64], rel_tol: f64) -> (Vec<f64>, usize) {
    let len = g.len();
    let zero_ring = vec![0.0; op.n_t];
    let matvec = |v: &[f64], out: &mut [f64]| {
        let vals: Vec<f64> =
            nodes.par_iter().map(|&k| -op.apply_at(v, &zero_ring, k) + op.area[k / op.n_t] * reaction[k] * v[k]).collect();
        for (&k, x) in nodes.iter().zip(vals) {
            out[k] = x;
        }
    };
    let subset = nodes.len() < len;
    let precond = |r: &[f64], z: &mut [f64]| match pre {
        Precond::Mode(p) => p.apply(r, z, op.n_r, op.n_t),
        Precond::Line(p) => p.apply(r, z),
    };
    let dot = |a: &[f64], b: &[f64]| -> f64 {
        if subset {
            nodes.iter().map(|&k| a[k] * b[k]).sum()
        } else {
            // Fixed chunking keeps the reduction order, and so the bits, independent of the thread count.
            let parts: Vec<f64> = a.par_chunks(2048).zip(b.par_chunks(2048)).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum()).collect();
            parts.iter().sum()
        }
    };
    let axpy = |y: &mut [f64], a: f64, x: &[f64]| {
        if subset {
            nodes.iter().for_each(|&k| y[k] += a * x[k]);
        } else {
            y.par_iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
        }
    };
    let mut x = vec![0.0; len];
    let mut r = g.to_vec();
    let mut z = vec![0.0; len];
    let g_norm = dot(g, g).sqrt();
    if g_norm == 0.0 {
        return (x, 0);
    }
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; len];
    let max_iter = 4 * nodes.len().max(50);
    for it in 1..=max_iter {
        matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return (x, it);
        }
        let alpha = rz / pap;
        axpy(&mut x, alpha, &p);
        axpy(&mut r, -alpha, &ap);
        if dot(&r, &r).sqrt() <= rel_tol * g_norm {
            return (x, it);
        }
        precond(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for &k in nodes {
            p[k] = z[k] + beta * p[k];
        }
    }
    (x, max_iter)
}

/// Damped Newton for `L u = A F(u)` on the active nodes, other nodes held fixed.
pub(crate) fn newton(
    op: &PolarOperator,
    u: &mut [f64],
    ring: &[f64],
    nl: &Nonlinearity,
    active: Option<&[bool]>,
    tol: f64,
    max_newton: usize,
    report: &mut SolveReport,
) -> Result<()> {
    let len = u.len();
    let nodes: Vec<usize> = match active {
        None => (0..len).collect(),
        Some(m) => (0..len).filter(|&k| m[k]).collect(),
    };
    let mut g = vec![0.0; len];
    let mut trial_g = vec![0.0; len];
    let scaled_max = |g: &[f64], u: &[f64]| -> (f64, bool) {
        let mut worst = 0.0f64;
        let mut ok = true;
        for &k in &nodes {
            let a = op.area[k / op.n_t];
            let v = g[k].abs() / a;
            worst = worst.max(v);
            if v > node_tolerance(op, u, ring, tol, k) {
                ok = false;
            }
        }
        (worst, ok)
    };
    let l2 = |g: &[f64]| nodes.iter().map(|&k| g[k] * g[k]).sum::<f64>().sqrt();
    residual(op, u, ring, nl, &nodes, &mut g);
    let (mut res, mut done) = scaled_max(&g, u);
    report.residual_history.push(res);
    let mut reaction = vec![0.0; len];
    let mut stalls = 0;
    while !done {
        if report.iterations >= max_newton || stalls >= 3 {
            return Err(Error::NonConvergence { what: "finite-difference Newton".into(), iterations: report.iterations, residual: res });
        }
        report.iterations += 1;
        for &k in &nodes {
            reaction[k] = nl.slope(k, u[k]);
        }
        let pre = match active {
            None => Precond::Mode(ModePreconditioner::new(op, &reaction)),
            Some(m) => Precond::Line(LinePreconditioner::new(op, &reaction, m, &nodes)),
        };
        let (delta, its) = pcg(op, &reaction, &nodes, &pre, &g, 1e-12);
        report.linear_iterations += its;
        let norm0 = l2(&g);
        let mut step = 1.0;
        let mut trial = u.to_vec();
        let mut accepted = false;
        for _ in 0..=30 {
            for &k in &nodes {
                trial[k] = u[k] + step * delta[k];
            }
            residual(op, &trial, ring, nl, &nodes, &mut trial_g);
            let n1 = l2(&trial_g);
            if n1.is_finite() && n1 <= (1.0 - 1e-4 * step) * norm0 {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // No decrease within rounding: accept the full step only if the residual is already at its floor.
            stalls += 1;
            report.warnings.push(format!("line search failed at Newton step {}", report.iterations));
            for &k in &nodes {
                trial[k] = u[k] + delta[k];
            }
            residual(op, &trial, ring, nl, &nodes, &mut trial_g);
            if !l2(&trial_g).is_finite() {
                return Err(Error::NonConvergence { what: "finite-difference Newton".into(), iterations: report.iterations, residual: res });
            }
        }
        u.copy_from_slice(&trial);
        std::mem::swap(&mut g, &mut trial_g);
        let (r, d) = scaled_max(&g, u);
        res = r;
        done = d;
        report.residual_history.push(res);
    }
    Ok(())
}

/// Solves the problem on a polar grid of the given resolution by damped Newton from the harmonic extension.
pub fn solve_dirichlet_fd(p: &DirichletProblem, opts: &FdOptions) -> Result<Solution> {
    let start = Instant::now();
    let grid = Arc::new(PolarGrid::uniform(p.center, p.radius, opts.n_r, opts.n_theta)?);
    let ring: Vec<f64> = (0..grid.n_theta()).map(|j| p.boundary(grid.ring_point(j))).collect();
    if let Some((j, v)) = ring.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { node: j, value: *v });
    }
    let a: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|k| p.k.checked(grid.point(k / grid.n_theta(), k % grid.n_theta())))
        .collect::<Result<_>>()?;
    let nl = Nonlinearity::pure(a);
    let op = PolarOperator::new(&grid);
    let h = harmonic_extension(&grid, &ring)?;
    let mut u = h.values().to_vec();
    let mut report = SolveReport::new(Method::FdNewton);
    newton(&op, &mut u, &ring, &nl, None, opts.tol, opts.max_newton, &mut report)?;
    report.wall_time = start.elapsed();
    Ok(Solution { u: GridField::new(grid, u, ring)?, report })
}

/// Newton solve restricted to the nodes flagged in `active`; all other values act as Dirichlet data.
pub fn solve_dirichlet_subdomain(
    field: &mut GridField,
    nl: &Nonlinearity,
    active: &[bool],
    tol: f64,
    max_newton: usize,
) -> Result<SolveReport> {
    let start = Instant::now();
    let grid = field.grid().clone();
    if active.len() != grid.len() || nl.a.len() != grid.len() || nl.b.len() != grid.len() {
        return Err(Error::Contract("subdomain mask or coefficients do not match the grid".into()));
    }
    let op = PolarOperator::new(&grid);
    let mut u = field.values().to_vec();
    let ring = field.boundary().to_vec();
    let mut report = SolveReport::new(Method::FdNewton);
    newton(&op, &mut u, &ring, nl, Some(active), tol, max_newton, &mut report)?;
    *field = GridField::new(grid, u, ring)?;
    report.wall_time = start.elapsed();
    Ok(report)
}

/// Discrete `Δ_h u` at every interior node.
pub(crate) fn discrete_laplacian(field: &GridField) -> Vec<f64> {
    let op = PolarOperator::new(field.grid());
    (0..field.values().len())
        .into_par_iter()
        .map(|k| op.apply_at(field.values(), field.boundary(), k) / op.area[k / op.n_t])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disk_core::C64;
    use crate::gauss_solver::CurvatureFunction;

    #[test]
    fn operator_is_exact_on_quadratics_away_from_axis() {
        let grid = PolarGrid::uniform(C64::new(0.0, 0.0), 0.9, 64, 64).unwrap();
        let f = GridField::sample(Arc::new(grid), |z| z.norm_sqr()).unwrap();
        let lap = discrete_laplacian(&f);
        for v in lap {
            assert!((v - 4.0).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn harmonic_center_is_circle_mean() {
        let k = CurvatureFunction::constant(0.0).unwrap();
        let p = DirichletProblem::new(C64::new(0.1, 0.0), 0.8, k, |z| (3.0 * z.re).sin() + z.im * z.im).unwrap();
        let s = solve_dirichlet_fd(&p, &FdOptions::with_resolution(64, 64)).unwrap();
        let mean = (0..4096)
            .map(|j| {
                let z = C64::new(0.1, 0.0) + C64::from_polar(0.8, j as f64 * std::f64::consts::TAU / 4096.0);
                (3.0 * z.re).sin() + z.im * z.im
            })
            .sum::<f64>()
            / 4096.0;
        assert!((s.center_value() - mean).abs() < 1e-3);
    }

    #[test]
    fn residual_meets_tolerance() {
        let k = CurvatureFunction::constant(4.0).unwrap();
        let p = DirichletProblem::constant(0.9, k, -(0.19f64).ln()).unwrap();
        let s = solve_dirichlet_fd(&p, &FdOptions::with_resolution(48, 48)).unwrap();
        assert!(s.report.iterations > 0 && s.report.iterations < 20);
        let exact = |z: C64| -(1.0 - z.norm_sqr()).ln();
        let err = s.u.grid().radii().iter().map(|&r| (s.u.at(s.u.grid().radii().iter().position(|&x| x == r).unwrap(), 0) - exact(C64::new(r, 0.0))).abs()).fold(0.0, f64::max);
        assert!(err < 2e-3, "{err}");
    }

    #[test]
    fn subdomain_solve_keeps_outside_values() {
        let grid = Arc::new(PolarGrid::uniform(C64::new(0.0, 0.0), 0.9, 32, 32).unwrap());
        let mut f = GridField::sample(grid.clone(), |_| 0.0).unwrap();
        let before = f.values().to_vec();
        let active: Vec<bool> = (0..grid.len()).map(|k| (grid.point(k / 32, k % 32) - C64::new(0.3, 0.2)).norm() < 0.2).collect();
        let nl = Nonlinearity::pure(vec![4.0; grid.len()]);
        solve_dirichlet_subdomain(&mut f, &nl, &active, 1e-10, 40).unwrap();
        for k in 0..grid.len() {
            if active[k] {
                assert!(f.values()[k] < 0.0);
            } else {
                assert_eq!(f.values()[k].to_bits(), before[k].to_bits());
            }
        }
    }
}
