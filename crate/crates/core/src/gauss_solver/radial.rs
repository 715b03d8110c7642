//! Radial problems in the depth variable `t = −log(1 − r²)`.
//!
//! With `q(t) = (1 − r²)² k(r)` the equation `u″ + u′/r = k e^{2u}` becomes
//! `[(e^t − 1) u_t]_t = ¼ e^t q(t) e^{2u}`, whose flux vanishes at `t = 0`.
//! Rows are scaled by `e^{−t_i}` so large depths stay finite.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{CurvatureFunction, Method, SolveReport};
use crate::disk_core::gauss_legendre;
use crate::error::{Error, Result};
use crate::numeric::tridiagonal_solve;

type DepthFn = dyn Fn(f64) -> f64 + Send + Sync;

/// Vertex-centred mesh in depth, starting at `t = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthMesh {
    t: Vec<f64>,
}

impl DepthMesh {
    /// Uniform in `log(1 + t)` with `per_unit` nodes per unit, plus each depth in `marks` as an exact node.
    pub fn logarithmic(t_max: f64, per_unit: usize, marks: &[f64]) -> Result<Self> {
        if !(t_max > 0.0 && t_max.is_finite()) || per_unit == 0 {
            return Err(Error::Parameter(format!("depth mesh needs t_max > 0 and a positive density, got {t_max}")));
        }
        let s_max = t_max.ln_1p();
        let n = (s_max * per_unit as f64).ceil().max(4.0) as usize;
        let mut t: Vec<f64> = (0..=n).map(|i| (s_max * i as f64 / n as f64).exp_m1()).collect();
        *t.last_mut().unwrap() = t_max;
        let ds = s_max / n as f64;
        for &m in marks.iter().filter(|&&m| m > 0.0 && m < t_max) {
            let s = m.ln_1p();
            let pos = t.partition_point(|&x| x < m);
            if (t[pos].ln_1p() - s).abs() < 0.3 * ds {
                t[pos] = m;
            } else if (t[pos - 1].ln_1p() - s).abs() < 0.3 * ds && pos > 1 {
                t[pos - 1] = m;
            } else {
                t.insert(pos, m);
            }
        }
        Self::from_nodes(t)
    }

    pub fn from_nodes(t: Vec<f64>) -> Result<Self> {
        if t.len() < 3 || t[0] != 0.0 || t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parameter("depth mesh must start at 0 and increase strictly".into()));
        }
        Ok(DepthMesh { t })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.t
    }

    /// The prefix ending at the node equal to `depth`.
    pub fn prefix(&self, depth: f64) -> Result<DepthMesh> {
        let end = self
            .t
            .iter()
            .position(|&x| (x - depth).abs() <= 1e-12 * depth.max(1.0))
            .ok_or_else(|| Error::Parameter(format!("depth {depth} is not a mesh node")))?;
        Self::from_nodes(self.t[..=end].to_vec())
    }

    /// Every interval bisected in `log(1 + t)`, so both meshes come from the same mapping.
    pub fn refined(&self) -> DepthMesh {
        let mut t = Vec::with_capacity(2 * self.t.len());
        for w in self.t.windows(2) {
            t.push(w[0]);
            t.push((0.5 * (w[0].ln_1p() + w[1].ln_1p())).exp_m1());
        }
        t.push(*self.t.last().unwrap());
        DepthMesh { t }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RadialOptions {
    pub per_unit: usize,
    /// Combine the solution with one on the bisected mesh to cancel the leading error term.
    pub richardson: bool,
    pub max_newton: usize,
}

impl Default for RadialOptions {
    fn default() -> Self {
        RadialOptions { per_unit: 4000, richardson: true, max_newton: 100 }
    }
}

/// Radial solution `u(r)` sampled on a depth mesh.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadialProfile {
    pub t: Vec<f64>,
    pub u: Vec<f64>,
    pub report: SolveReport,
}

impl RadialProfile {
    pub fn center_value(&self) -> f64 {
        self.u[0]
    }

    pub fn radii(&self) -> Vec<f64> {
        self.t.iter().map(|&t| (-(-t).exp_m1()).sqrt()).collect()
    }

    /// Linear interpolation in depth.
    pub fn value_at(&self, r: f64) -> Result<f64> {
        let t = -(-r * r).ln_1p();
        let last = *self.t.last().unwrap();
        if !(t >= 0.0 && t <= last * (1.0 + 1e-12)) {
            return Err(Error::Domain(format!("radius {r} outside the profile")));
        }
        let i = self.t.partition_point(|&x| x <= t).clamp(1, self.t.len() - 1);
        let s = (t - self.t[i - 1]) / (self.t[i] - self.t[i - 1]);
        Ok(self.u[i - 1] * (1.0 - s) + self.u[i] * s)
    }
}

/// Scaled flux coefficients `A_{i+½} e^{−t_i}` and `A_{i+½} e^{−t_{i+1}}`, and scaled sources.
struct Discretization {
    up: Vec<f64>,
    down: Vec<f64>,
    src: Vec<f64>,
}

fn discretize<Q: Fn(f64) -> f64 + ?Sized>(q: &Q, t: &[f64]) -> Discretization {
    let n = t.len();
    let (gx, gw) = gauss_legendre(4);
    // ¼ ∫_a^b e^{s − t_i} q(s) ds
    let seg = |a: f64, b: f64, ti: f64| -> f64 {
        let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
        0.25 * h * gx.iter().zip(&gw).map(|(x, w)| {
            let s = m + h * x;
            w * (s - ti).exp() * q(s)
        }).sum::<f64>()
    };
    let scaled = |th: f64, ti: f64| if th < 1.0 { th.exp_m1() * (-ti).exp() } else { (th - ti).exp() - (-ti).exp() };
    let mut up = vec![0.0; n];
    let mut down = vec![0.0; n];
    let mut src = vec![0.0; n];
    for i in 0..n - 1 {
        let th = 0.5 * (t[i] + t[i + 1]);
        let d = t[i + 1] - t[i];
        up[i] = scaled(th, t[i]) / d;
        down[i + 1] = scaled(th, t[i + 1]) / d;
    }
    for i in 0..n - 1 {
        let lo = if i == 0 { 0.0 } else { 0.5 * (t[i - 1] + t[i]) };
        let hi = 0.5 * (t[i] + t[i + 1]);
        src[i] = if i == 0 { 0.0 } else { seg(lo, t[i], t[i]) } + seg(t[i], hi, t[i]);
    }
    Discretization { up, down, src }
}

/// Newton on the tridiagonal system with `u = c` at the last node.
pub(crate) fn solve_on_mesh<Q: Fn(f64) -> f64 + ?Sized>(q: &Q, mesh: &DepthMesh, c: f64, max_newton: usize) -> Result<RadialProfile> {
    let start = Instant::now();
    let t = mesh.nodes();
    let n = t.len();
    let d = discretize(q, t);
    let m = n - 1;
    let mut u = vec![c; n];
    let mut report = SolveReport::new(Method::RadialNewton);
    let residual = |u: &[f64], g: &mut [f64]| {
        for i in 0..m {
            let mut s = d.up[i] * (u[i + 1] - u[i]) - d.src[i] * (2.0 * u[i]).exp();
            if i > 0 {
                s -= d.down[i] * (u[i] - u[i - 1]);
            }
            g[i] = s;
        }
    };
    let scale: Vec<f64> = (0..m).map(|i| d.up[i] + d.down[i] + d.src[i]).collect();
    let norm = |g: &[f64], u: &[f64]| {
        (0..m).fold(0.0f64, |a, i| a.max(g[i].abs() / (scale[i] * (1.0 + (2.0 * u[i]).exp()))))
    };
    let mut g = vec![0.0; m];
    residual(&u, &mut g);
    report.residual_history.push(norm(&g, &u));
    let mut scratch = Vec::new();
    loop {
        let res = *report.residual_history.last().unwrap();
        if res <= 1e-14 {
            break;
        }
        if report.iterations >= max_newton || !res.is_finite() {
            return Err(Error::NonConvergence { what: "radial Newton".into(), iterations: report.iterations, residual: res });
        }
        report.iterations += 1;
        let mut lower = vec![0.0; m];
        let mut diag = vec![0.0; m];
        let mut upper = vec![0.0; m];
        for i in 0..m {
            diag[i] = -d.up[i] - d.down[i] - 2.0 * d.src[i] * (2.0 * u[i]).exp();
            if i > 0 {
                lower[i] = d.down[i];
            }
            if i + 1 < m {
                upper[i] = d.up[i];
            }
        }
        let mut delta: Vec<f64> = g.iter().map(|x| -x).collect();
        tridiagonal_solve(&lower, &diag, &upper, &mut delta, &mut scratch);
        let step_size = delta.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let mut step = 1.0;
        let mut trial = u.clone();
        let mut gt = vec![0.0; m];
        let mut accepted = false;
        let r0 = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        for _ in 0..=30 {
            for i in 0..m {
                trial[i] = u[i] + step * delta[i];
            }
            residual(&trial, &mut gt);
            let r1 = gt.iter().map(|x| x * x).sum::<f64>().sqrt();
            if r1.is_finite() && r1 <= (1.0 - 1e-4 * step) * r0 {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            if step_size < 1e-13 * (1.0 + c.abs()) {
                break;
            }
            return Err(Error::NonConvergence { what: "radial Newton line search".into(), iterations: report.iterations, residual: res });
        }
        u = trial;
        g = gt;
        report.residual_history.push(norm(&g, &u));
        if step == 1.0 && step_size < 1e-14 * (1.0 + u[0].abs()) {
            break;
        }
    }
    report.wall_time = start.elapsed();
    Ok(RadialProfile { t: t.to_vec(), u, report })
}

/// Solves the radial problem on `|z| < radius` with `u = c` on the circle.
pub fn solve_radial(k: &CurvatureFunction, radius: f64, c: f64, opts: &RadialOptions) -> Result<RadialProfile> {
    let q: Arc<DepthFn> = k.depth_fn().ok_or_else(|| Error::Parameter("solve_radial needs a radial curvature function".into()))?;
    if !(radius > 0.0 && radius < 1.0) {
        return Err(Error::Domain(format!("radius must lie in (0, 1), got {radius}")));
    }
    let t_max = -(-radius * radius).ln_1p();
    let mesh = DepthMesh::logarithmic(t_max, opts.per_unit, &[])?;
    let coarse = solve_on_mesh(&*q, &mesh, c, opts.max_newton)?;
    if !opts.richardson {
        return Ok(coarse);
    }
    let fine = solve_on_mesh(&*q, &mesh.refined(), c, opts.max_newton)?;
    let u = coarse.u.iter().enumerate().map(|(i, uc)| (4.0 * fine.u[2 * i] - uc) / 3.0).collect();
    let mut report = fine.report;
    report.iterations += coarse.report.iterations;
    report.wall_time += coarse.report.wall_time;
    Ok(RadialProfile { t: coarse.t, u, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_hyperbolic_coefficient() {
        let k = CurvatureFunction::constant(4.0).unwrap();
        let c = -(0.19f64).ln();
        let p = solve_radial(&k, 0.9, c, &RadialOptions::default()).unwrap();
        for (t, u) in p.t.iter().zip(&p.u) {
            assert!((u - t).abs() < 1e-8, "t={t} u={u}");
        }
    }

    #[test]
    fn zero_coefficient_is_constant() {
        let k = CurvatureFunction::constant(0.0).unwrap();
        let p = solve_radial(&k, 0.7, 1.25, &RadialOptions::default()).unwrap();
        assert!(p.u.iter().all(|&u| u == 1.25));
    }

    #[test]
    fn prefix_meshes_nest() {
        let m = DepthMesh::logarithmic(64.0, 50, &[2.0, 4.0, 8.0, 16.0, 32.0]).unwrap();
        let p = m.prefix(8.0).unwrap();
        assert_eq!(&m.nodes()[..p.nodes().len()], p.nodes());
        assert!(m.prefix(8.5).is_err());
    }
}
