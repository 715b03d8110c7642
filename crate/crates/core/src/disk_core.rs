//! Geometry, polar grids, quadrature and the Green's function of a disk.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Tolerance used to accept points on the unit circle.
pub const BOUNDARY_EPS: f64 = 1e-14;

/// A point of the open unit disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiskPoint {
    pub re: f64,
    pub im: f64,
}

impl DiskPoint {
    pub fn new(re: f64, im: f64) -> Result<Self> {
        let p = DiskPoint { re, im };
        if !(re.is_finite() && im.is_finite()) || re * re + im * im >= 1.0 {
            return Err(Error::Domain(format!("point {re}{im:+}j is not inside the unit disk")));
        }
        Ok(p)
    }

    pub fn from_c64(z: C64) -> Result<Self> {
        Self::new(z.re, z.im)
    }

    pub fn origin() -> Self {
        DiskPoint { re: 0.0, im: 0.0 }
    }

    pub fn z(&self) -> C64 {
        C64::new(self.re, self.im)
    }

    pub fn abs(&self) -> f64 {
        self.re.hypot(self.im)
    }
}

impl From<DiskPoint> for C64 {
    fn from(p: DiskPoint) -> C64 {
        p.z()
    }
}

/// A point of the unit circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub re: f64,
    pub im: f64,
}

impl BoundaryPoint {
    pub fn new(z: C64) -> Result<Self> {
        if !z.re.is_finite() || !z.im.is_finite() || (z.norm() - 1.0).abs() > BOUNDARY_EPS {
            return Err(Error::Domain(format!("{z} is not on the unit circle")));
        }
        Ok(BoundaryPoint { re: z.re, im: z.im })
    }

    pub fn from_angle(t: f64) -> Self {
        BoundaryPoint { re: t.cos(), im: t.sin() }
    }

    pub fn z(&self) -> C64 {
        C64::new(self.re, self.im)
    }
}

/// `(a − z)/(1 − conj(a) z)` for arbitrary complex arguments.
pub fn mobius(a: C64, z: C64) -> Result<C64> {
    let den = C64::new(1.0, 0.0) - a.conj() * z;
    if den.norm() < 1e-300 {
        return Err(Error::Degenerate(format!("Möbius denominator vanishes at a={a}, z={z}")));
    }
    Ok((a - z) / den)
}

/// Disk automorphism `(a − z)/(1 − conj(a) z)`; an involution.
pub fn mobius_automorphism(a: DiskPoint, z: DiskPoint) -> Result<DiskPoint> {
    DiskPoint::from_c64(mobius(a.z(), z.z())?)
}

/// Pseudo-hyperbolic distance `|z − w| / |1 − conj(w) z|`.
pub fn pseudo_hyperbolic(z: C64, w: C64) -> f64 {
    let den = (C64::new(1.0, 0.0) - w.conj() * z).norm();
    if den == 0.0 {
        return 1.0;
    }
    ((z - w).norm() / den).min(1.0)
}

/// Euclidean center and radius of the pseudo-hyperbolic disk `{z : ρ(z, c) < s}`.
pub fn pseudo_hyperbolic_disk(c: C64, s: f64) -> (C64, f64) {
    let a2 = c.norm_sqr();
    let den = 1.0 - s * s * a2;
    (c * ((1.0 - s * s) / den), s * (1.0 - a2) / den)
}

/// `1 − |z|²` computed without cancellation near the circle.
pub fn one_minus_abs2(z: C64) -> f64 {
    let r = z.norm();
    (1.0 - r) * (1.0 + r)
}

/// Poincaré density `1/(1 − |z|²)` of curvature −4.
pub fn poincare_density(z: C64) -> Result<f64> {
    let d = one_minus_abs2(z);
    if !(d > 0.0) {
        return Err(Error::Domain(format!("poincare_density needs |z| < 1, got {z}")));
    }
    Ok(1.0 / d)
}

/// Green's function of the disk with the given center and radius.
pub fn green_function_disk(center: DiskPoint, radius: f64, z: DiskPoint, xi: DiskPoint) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::Parameter(format!("disk radius must be positive, got {radius}")));
    }
    let zz = (z.z() - center.z()) / radius;
    let xx = (xi.z() - center.z()) / radius;
    if zz.norm() >= 1.0 || xx.norm() >= 1.0 {
        return Err(Error::Domain("green_function_disk: point outside the disk".into()));
    }
    Ok(green_unit(zz, xx)?)
}

/// Unit-disk Green's function `log|1 − conj(ξ) z| − log|z − ξ|`.
pub fn green_unit(z: C64, xi: C64) -> Result<f64> {
    let d = (z - xi).norm();
    if d < 1e-14 {
        return Err(Error::Singularity(format!("green function at z = ξ = {z}")));
    }
    Ok((C64::new(1.0, 0.0) - xi.conj() * z).norm().ln() - d.ln())
}

/// Tensor polar grid on a disk with a Dirichlet ring at `r_max`.
///
/// Interior nodes sit at `center + radii[i]·e^{iθ_j}`; each node owns the
/// finite-volume cell bounded by the midpoints between consecutive radii,
/// with the innermost face at 0 and the outermost face halfway to the ring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarGrid {
    center: C64,
    radii: Vec<f64>,
    r_max: f64,
    n_theta: usize,
}

impl PolarGrid {
    /// Uniform radii `(i + ½)h` with `h = r_max/(n_r + ½)`, so the ring is one step past the last node.
    pub fn uniform(center: C64, r_max: f64, n_r: usize, n_theta: usize) -> Result<Self> {
        if n_r == 0 {
            return Err(Error::Parameter("polar grid needs at least one ring".into()));
        }
        let h = r_max / (n_r as f64 + 0.5);
        let radii = (0..n_r).map(|i| (i as f64 + 0.5) * h).collect();
        Self::with_radii(center, radii, r_max, n_theta)
    }

    pub fn with_radii(center: C64, radii: Vec<f64>, r_max: f64, n_theta: usize) -> Result<Self> {
        if !(r_max > 0.0 && r_max < 1.0) {
            return Err(Error::Parameter(format!("R_max must lie in (0, 1), got {r_max}")));
        }
        if center.norm() + r_max >= 1.0 + 1e-15 {
            return Err(Error::Domain("grid disk must lie inside the unit disk".into()));
        }
        if n_theta < 4 || radii.is_empty() {
            return Err(Error::Parameter("polar grid needs n_theta ≥ 4 and at least one ring".into()));
        }
        if radii[0] <= 0.0 || radii.windows(2).any(|w| w[1] <= w[0]) || *radii.last().unwrap() >= r_max {
            return Err(Error::Parameter("radii must increase strictly inside (0, R_max)".into()));
        }
        Ok(PolarGrid { center, radii, r_max, n_theta })
    }

    pub fn center(&self) -> C64 {
        self.center
    }
    pub fn radii(&self) -> &[f64] {
        &self.radii
    }
    pub fn r_max(&self) -> f64 {
        self.r_max
    }
    pub fn n_r(&self) -> usize {
        self.radii.len()
    }
    pub fn n_theta(&self) -> usize {
        self.n_theta
    }
    pub fn len(&self) -> usize {
        self.radii.len() * self.n_theta
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn dtheta(&self) -> f64 {
        2.0 * PI / self.n_theta as f64
    }
    pub fn theta(&self, j: usize) -> f64 {
        j as f64 * self.dtheta()
    }
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_theta + j
    }
    pub fn point(&self, i: usize, j: usize) -> C64 {
        self.center + C64::from_polar(self.radii[i], self.theta(j))
    }
    pub fn ring_point(&self, j: usize) -> C64 {
        self.center + C64::from_polar(self.r_max, self.theta(j))
    }

    /// Cell face radius `i` for `i ∈ 0..=n_r`.
    pub fn face(&self, i: usize) -> f64 {
        let n = self.radii.len();
        if i == 0 {
            0.0
        } else if i == n {
            0.5 * (self.radii[n - 1] + self.r_max)
        } else {
            0.5 * (self.radii[i - 1] + self.radii[i])
        }
    }

    /// Area of one cell in ring `i`.
    pub fn cell_area(&self, i: usize) -> f64 {
        let (a, b) = (self.face(i), self.face(i + 1));
        0.5 * self.dtheta() * (b * b - a * a)
    }

    /// Area attributed to one Dirichlet ring node (the annulus between the last face and `r_max`).
    pub fn ring_cell_area(&self) -> f64 {
        let a = self.face(self.n_r());
        0.5 * self.dtheta() * (self.r_max * self.r_max - a * a)
    }

    /// Area rule over interior cells plus ring nodes; weights sum to `π r_max²`.
    pub fn area_rule(&self) -> QuadratureRule {
        let mut nodes = Vec::with_capacity(self.len() + self.n_theta);
        let mut weights = Vec::with_capacity(self.len() + self.n_theta);
        for i in 0..self.n_r() {
            let w = self.cell_area(i);
            for j in 0..self.n_theta {
                nodes.push(self.point(i, j));
                weights.push(w);
            }
        }
        let w = self.ring_cell_area();
        for j in 0..self.n_theta {
            nodes.push(self.ring_point(j));
            weights.push(w);
        }
        QuadratureRule {
            nodes,
            weights,
            kind: RuleKind::Area { center: self.center, radius: self.r_max },
        }
    }
}

/// Real samples on a polar grid: interior nodes plus the Dirichlet ring.
#[derive(Debug, Clone)]
pub struct GridField {
    grid: Arc<PolarGrid>,
    values: Vec<f64>,
    boundary: Vec<f64>,
}

impl GridField {
    pub fn new(grid: Arc<PolarGrid>, values: Vec<f64>, boundary: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() || boundary.len() != grid.n_theta() {
            return Err(Error::Contract("grid field size does not match its grid".into()));
        }
        if let Some((node, &value)) = values.iter().chain(boundary.iter()).enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { node, value });
        }
        Ok(GridField { grid, values, boundary })
    }

    /// Samples `f` at every interior and ring node.
    pub fn sample<F>(grid: Arc<PolarGrid>, f: F) -> Result<Self>
    where
        F: Fn(C64) -> f64 + Sync,
    {
        let values: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .map(|k| f(grid.point(k / grid.n_theta(), k % grid.n_theta())))
            .collect();
        let boundary = (0..grid.n_theta()).map(|j| f(grid.ring_point(j))).collect();
        Self::new(grid, values, boundary)
    }

    pub fn grid(&self) -> &Arc<PolarGrid> {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn boundary(&self) -> &[f64] {
        &self.boundary
    }
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn ring_mean(&self, i: usize) -> f64 {
        let n = self.grid.n_theta();
        self.values[i * n..(i + 1) * n].iter().sum::<f64>() / n as f64
    }

    /// Value at the grid center, extrapolated from the two innermost ring means
    /// assuming an even expansion `u₀ + a r² + O(r⁴)`.
    pub fn center_value(&self) -> f64 {
        let r = self.grid.radii();
        if r.len() < 2 {
            return self.ring_mean(0);
        }
        let (r1, r2) = (r[0] * r[0], r[1] * r[1]);
        (r2 * self.ring_mean(0) - r1 * self.ring_mean(1)) / (r2 - r1)
    }

    /// Bilinear interpolation in (r, θ); the axis uses [`Self::center_value`].
    /// Cubic Lagrange interpolation: periodic in angle; in radius over the rings, the Dirichlet
    /// ring, and the first two rings reflected through the center.
    pub fn interpolate(&self, z: C64) -> Result<f64> {
        let g = &*self.grid;
        let w = z - g.center();
        let r = w.norm();
        if r > g.r_max() * (1.0 + 1e-12) {
            return Err(Error::Domain(format!("{z} lies outside the grid disk")));
        }
        let n = g.n_theta();
        let nr = g.n_r();
        let t = w.im.atan2(w.re).rem_euclid(2.0 * PI) / g.dtheta();
        let angular = |row: &[f64], t: f64| {
            let j = t.floor();
            let f = t - j;
            let j = j as i64;
            let wts = [-f * (f - 1.0) * (f - 2.0) / 6.0, (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0, -(f + 1.0) * f * (f - 2.0) / 2.0, (f + 1.0) * f * (f - 1.0) / 6.0];
            (0..4).map(|k| wts[k] * row[(j - 1 + k as i64).rem_euclid(n as i64) as usize]).sum::<f64>()
        };
        if nr < 2 {
            let v0 = angular(&self.values, t);
            let s = r / g.r_max();
            return Ok(v0 * (1.0 - s) + angular(&self.boundary, t) * s);
        }
        let radii = g.radii();
        // Positions -r1, -r0, r0, …, r_{n−1}, R_max.
        let m = nr + 3;
        let pos = |k: usize| match k {
            0 => -radii[1],
            1 => -radii[0],
            k if k == m - 1 => g.r_max(),
            k => radii[k - 2],
        };
        let row = |k: usize| match k {
            0 => angular(&self.values[n..2 * n], t + 0.5 * n as f64),
            1 => angular(&self.values[..n], t + 0.5 * n as f64),
            k if k == m - 1 => angular(&self.boundary, t),
            k => angular(&self.values[(k - 2) * n..(k - 1) * n], t),
        };
        let k = (0..m - 1).rev().find(|&k| pos(k) <= r).unwrap_or(0);
        let lo = k.saturating_sub(1).min(m - 4);
        let xs: Vec<f64> = (lo..lo + 4).map(pos).collect();
        let mut acc = 0.0;
        for a in 0..4 {
            let mut wt = 1.0;
            for b in 0..4 {
                if a != b {
                    wt *= (r - xs[b]) / (xs[a] - xs[b]);
                }
            }
            acc += wt * row(lo + a);
        }
        Ok(acc)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Maximum absolute difference over interior nodes of two fields on the same grid.
    pub fn max_abs_diff(&self, other: &GridField) -> Result<f64> {
        if self.grid != other.grid && *self.grid != *other.grid {
            return Err(Error::Contract("fields live on different grids".into()));
        }
        Ok(self.values.iter().zip(&other.values).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RuleKind {
    Area { center: C64, radius: f64 },
    Circle { center: C64, radius: f64 },
}

/// Nodes and positive weights approximating area or arc-length measure.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    nodes: Vec<C64>,
    weights: Vec<f64>,
    kind: RuleKind,
}

impl QuadratureRule {
    /// Midpoint-in-r × trapezoid-in-θ on the disk `|z − center| < radius`.
    pub fn area_midpoint(center: C64, radius: f64, n_r: usize, n_theta: usize) -> Result<Self> {
        if n_r == 0 || n_theta == 0 || !(radius > 0.0) {
            return Err(Error::Parameter("area rule needs positive radius and node counts".into()));
        }
        let h = radius / n_r as f64;
        let dt = 2.0 * PI / n_theta as f64;
        let mut nodes = Vec::with_capacity(n_r * n_theta);
        let mut weights = Vec::with_capacity(n_r * n_theta);
        for i in 0..n_r {
            let r = (i as f64 + 0.5) * h;
            let w = 0.5 * dt * (((i + 1) as f64 * h).powi(2) - (i as f64 * h).powi(2));
            for j in 0..n_theta {
                nodes.push(center + C64::from_polar(r, j as f64 * dt));
                weights.push(w);
            }
        }
        Self::checked(nodes, weights, RuleKind::Area { center, radius })
    }

    /// Unit-disk rule with Gauss–Legendre radial panels refined geometrically toward `|z| = 1`.
    ///
    /// Panels are `[0, ½]` and `[1 − 2^{−L}, 1 − 2^{−L−1}]` for `L = 1..levels`,
    /// closed by `[1 − 2^{−levels}, 1]`.
    pub fn area_graded(levels: usize, order: usize, n_theta: usize) -> Result<Self> {
        if levels == 0 || order == 0 || n_theta == 0 {
            return Err(Error::Parameter("graded rule needs positive levels, order and n_theta".into()));
        }
        let mut edges = vec![0.0, 0.5];
        for l in 1..levels {
            edges.push(1.0 - 0.5f64.powi(l as i32 + 1));
        }
        edges.push(1.0);
        let (x, w) = gauss_legendre(order);
        let dt = 2.0 * PI / n_theta as f64;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for e in edges.windows(2) {
            let (a, b) = (e[0], e[1]);
            for (xk, wk) in x.iter().zip(&w) {
                let r = 0.5 * (a + b) + 0.5 * (b - a) * xk;
                let wr = 0.5 * (b - a) * wk * r * dt;
                for j in 0..n_theta {
                    nodes.push(C64::from_polar(r, j as f64 * dt));
                    weights.push(wr);
                }
            }
        }
        Self::checked(nodes, weights, RuleKind::Area { center: C64::new(0.0, 0.0), radius: 1.0 })
    }

    /// Trapezoid rule on the circle `|z − center| = r`, weights `r·2π/n`.
    pub fn circle(center: C64, r: f64, n: usize) -> Result<Self> {
        if n == 0 || !(r > 0.0) {
            return Err(Error::Parameter("circle rule needs r > 0 and n > 0".into()));
        }
        let dt = 2.0 * PI / n as f64;
        let nodes = (0..n).map(|j| center + C64::from_polar(r, j as f64 * dt)).collect();
        let weights = vec![r * dt; n];
        Self::checked(nodes, weights, RuleKind::Circle { center, radius: r })
    }

    fn checked(nodes: Vec<C64>, weights: Vec<f64>, kind: RuleKind) -> Result<Self> {
        if nodes.iter().any(|z| z.norm() >= 1.0) {
            return Err(Error::Domain("quadrature nodes must lie in the open unit disk".into()));
        }
        Ok(QuadratureRule { nodes, weights, kind })
    }

    pub fn nodes(&self) -> &[C64] {
        &self.nodes
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn kind(&self) -> RuleKind {
        self.kind
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    pub fn total_weight(&self) -> f64 {
        pairwise_sum(&self.weights)
    }
}

/// Deterministic pairwise summation.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 32 {
        return v.iter().sum();
    }
    let m = v.len() / 2;
    pairwise_sum(&v[..m]) + pairwise_sum(&v[m..])
}

/// Weighted sum of `f` over the rule nodes.
pub fn area_integrate<F>(f: F, rule: &QuadratureRule) -> Result<f64>
where
    F: Fn(C64) -> f64 + Sync,
{
    let terms: Vec<f64> = rule.nodes.par_iter().zip(rule.weights.par_iter()).map(|(z, w)| f(*z) * w).collect();
    if let Some((node, _)) = terms.iter().enumerate().find(|(_, t)| !t.is_finite()) {
        return Err(Error::NonFinite { node, value: f(rule.nodes[node]) });
    }
    Ok(pairwise_sum(&terms))
}

/// Trapezoid sum of `f(r e^{it}) dt` over `[0, 2π)`.
pub fn circle_integrate<F>(f: F, r: f64, n: usize) -> Result<f64>
where
    F: Fn(C64) -> f64,
{
    if !(r > 0.0 && r < 1.0) || n == 0 {
        return Err(Error::Parameter(format!("circle_integrate needs 0 < r < 1 and n > 0, got r={r}")));
    }
    let dt = 2.0 * PI / n as f64;
    let mut terms = Vec::with_capacity(n);
    for j in 0..n {
        let v = f(C64::from_polar(r, j as f64 * dt));
        if !v.is_finite() {
            return Err(Error::NonFinite { node: j, value: v });
        }
        terms.push(v * dt);
    }
    Ok(pairwise_sum(&terms))
}

/// True when `z` lies in the Stolz region of aperture `δ` at `ζ`.
pub fn in_stolz_region(zeta: BoundaryPoint, delta: f64, z: C64) -> bool {
    let w = zeta.z().conj() * z - 1.0;
    z.norm() < 1.0 && w.re <= -w.norm() * delta.sin() + 1e-15
}

/// Radial approach to `ζ`: points `ζ(1 − ρ_k)` with `ρ_k = 2^{−k}`.
pub fn stolz_sample(zeta: BoundaryPoint, delta: f64, count: usize) -> Result<Vec<DiskPoint>> {
    stolz_sample_at_angle(zeta, delta, PI, count)
}

/// Points `ζ(1 + ρ_k e^{iα})` with geometric `ρ_k` and `α ∈ [π/2 + δ, 3π/2 − δ]`.
pub fn stolz_sample_at_angle(zeta: BoundaryPoint, delta: f64, alpha: f64, count: usize) -> Result<Vec<DiskPoint>> {
    if !(delta > 0.0 && delta < PI / 2.0) {
        return Err(Error::Parameter(format!("Stolz aperture must lie in (0, π/2), got {delta}")));
    }
    if alpha < PI / 2.0 + delta - 1e-15 || alpha > 1.5 * PI - delta + 1e-15 {
        return Err(Error::Parameter(format!("approach angle {alpha} outside the Stolz sector")));
    }
    let rho0 = if (alpha - PI).abs() < 1e-15 { 0.5 } else { 0.5f64.min(delta.sin()) };
    let dir = C64::from_polar(1.0, alpha);
    (0..count)
        .map(|k| {
            let rho = rho0 * 0.5f64.powi(k as i32);
            DiskPoint::from_c64(zeta.z() * (1.0 + dir * rho))
        })
        .collect()
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut t = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, t);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = t;
                p0 = 1.0;
            }
            dp = n as f64 * (t * p1 - p0) / (t * t - 1.0);
            let dt = p1 / dp;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -t;
        x[n - 1 - i] = t;
        let wi = 2.0 / ((1.0 - t * t) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}
