//! Monotone exhaustion of the unit disk by concentric disks with constant boundary data.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::fd::{newton, Nonlinearity, PolarOperator};
use super::radial::{solve_on_mesh, DepthMesh, RadialProfile};
use super::{CurvatureFunction, Dichotomy, Method, Solution, SolveReport};
use crate::disk_core::{gauss_legendre, GridField, PolarGrid, C64};
use crate::error::{Error, Result};

/// Exhaustion schedule, by radius or by depth `t = −log(1 − r²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "values", rename_all = "kebab-case")]
pub enum Schedule {
    Radii(Vec<f64>),
    Depths(Vec<f64>),
}

impl Schedule {
    /// Depths `2, 4, …, 2^n`.
    pub fn depth_doubling(n: u32) -> Self {
        Schedule::Depths((1..=n).map(|k| 2f64.powi(k as i32)).collect())
    }

    /// Radii `1 − 2^{−k}` for `k = 1..=n`.
    pub fn dyadic_radii(n: u32) -> Self {
        Schedule::Radii((1..=n).map(|k| 1.0 - 0.5f64.powi(k as i32)).collect())
    }

    pub fn depths(&self) -> Result<Vec<f64>> {
        let d: Vec<f64> = match self {
            Schedule::Depths(d) => d.clone(),
            Schedule::Radii(r) => {
                if r.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
                    return Err(Error::Parameter("schedule radii must lie in (0, 1)".into()));
                }
                r.iter().map(|&r| -(-r * r).ln_1p()).collect()
            }
        };
        if d.is_empty() || d[0] <= 0.0 || d.windows(2).any(|w| w[1] <= w[0]) || d.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parameter("schedule must be strictly increasing toward the boundary".into()));
        }
        Ok(d)
    }
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::depth_doubling(9)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ExhaustionOptions {
    /// Boundary constant.
    pub c: f64,
    /// Mesh density for radial coefficients: nodes per unit of `log(1 + t)`.
    pub per_unit: usize,
    /// Grid for non-radial coefficients.
    pub n_r: usize,
    pub n_theta: usize,
    /// Allowed rise `u_{n+1} − u_n` on common nodes before reporting an inconsistency.
    pub monotone_tol: f64,
    /// `u_n(0) < c − floor` declares divergence outright.
    pub divergence_floor: f64,
    /// Increment ratios at or below this over the last two steps read as convergence.
    pub converge_ratio: f64,
    /// Increment ratios at or above this over the last two steps read as divergence.
    pub diverge_ratio: f64,
}

impl Default for ExhaustionOptions {
    fn default() -> Self {
        ExhaustionOptions {
            c: 0.0,
            per_unit: 1000,
            n_r: 128,
            n_theta: 64,
            monotone_tol: 1e-10,
            divergence_floor: 12.0,
            converge_ratio: 0.75,
            diverge_ratio: 0.85,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Iterate {
    Radial(RadialProfile),
    Grid(Solution),
}

impl Iterate {
    pub fn center_value(&self) -> f64 {
        match self {
            Iterate::Radial(p) => p.center_value(),
            Iterate::Grid(s) => s.center_value(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExhaustionStep {
    pub depth: f64,
    pub radius: f64,
    pub center_value: f64,
    /// `c − e^{2c}(1/2π)∬_{D_n} log(1/|ξ|) k dσ`, when it is finite and computable.
    pub lower_bound: Option<f64>,
    pub increment: Option<f64>,
    pub newton_iterations: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExhaustionReport {
    pub c: f64,
    pub steps: Vec<ExhaustionStep>,
    pub increment_ratios: Vec<f64>,
    pub monotone_flag: bool,
    pub max_rise: f64,
    pub lower_bound_holds: bool,
    pub dichotomy: Dichotomy,
    pub solve: SolveReport,
}

/// `(1/2π)∬_{|ξ|<r(t_max)} log(1/|ξ|) k dσ = ¼∫_0^{t_max} −log(1 − e^{−t}) e^t q(t) dt`.
fn green_energy_at_origin(q: &(dyn Fn(f64) -> f64 + Send + Sync), t: &[f64]) -> f64 {
    let (gx, gw) = gauss_legendre(8);
    let mut acc = 0.0;
    for w in t.windows(2) {
        let (m, h) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
        for (x, wt) in gx.iter().zip(&gw) {
            let s = m + h * x;
            acc += wt * h * (-(-(-s).exp()).ln_1p()) * s.exp() * q(s);
        }
    }
    0.25 * acc
}

fn verdict(values: &[f64], ratios: &[f64], opts: &ExhaustionOptions) -> Dichotomy {
    if values.iter().any(|&v| v < opts.c - opts.divergence_floor) {
        return Dichotomy::DivergingToMinusInfinity;
    }
    if ratios.len() < 2 {
        return Dichotomy::Undecided;
    }
    let last = &ratios[ratios.len() - 2..];
    if last.iter().all(|&r| r <= opts.converge_ratio) {
        Dichotomy::Converged
    } else if last.iter().all(|&r| r >= opts.diverge_ratio) {
        Dichotomy::DivergingToMinusInfinity
    } else {
        Dichotomy::Undecided
    }
}

/// Solves with constant boundary `c` on each disk of the schedule, checks that the iterates decrease
/// on common nodes and classifies the sequence `u_n(0)`.
pub fn exhaustion_run(k: &CurvatureFunction, schedule: &Schedule, opts: &ExhaustionOptions) -> Result<(Vec<Iterate>, ExhaustionReport)> {
    let depths = schedule.depths()?;
    let (iterates, lower, solve) = match k.depth_fn() {
        Some(q) => radial_run(&*q, &depths, opts)?,
        None => grid_run(k, &depths, opts)?,
    };
    let mut max_rise = f64::NEG_INFINITY;
    for w in iterates.windows(2) {
        max_rise = max_rise.max(rise(&w[0], &w[1]));
    }
    let monotone_flag = iterates.len() < 2 || max_rise <= opts.monotone_tol;
    if !monotone_flag {
        return Err(Error::SolverInconsistency(format!(
            "exhaustion iterates increased by {max_rise:.3e} on common nodes; refine the discretization"
        )));
    }
    let values: Vec<f64> = iterates.iter().map(Iterate::center_value).collect();
    let increments: Vec<f64> = values.windows(2).map(|w| w[0] - w[1]).collect();
    let ratios: Vec<f64> = increments
        .windows(2)
        .map(|w| if w[0] <= 1e-13 { 0.0 } else { w[1].max(0.0) / w[0] })
        .collect();
    let steps: Vec<ExhaustionStep> = depths
        .iter()
        .enumerate()
        .map(|(n, &t)| ExhaustionStep {
            depth: t,
            radius: (-(-t).exp_m1()).sqrt(),
            center_value: values[n],
            lower_bound: lower[n],
            increment: if n > 0 { Some(increments[n - 1]) } else { None },
            newton_iterations: match &iterates[n] {
                Iterate::Radial(p) => p.report.iterations,
                Iterate::Grid(s) => s.report.iterations,
            },
        })
        .collect();
    let lower_bound_holds = steps.iter().all(|s| s.lower_bound.map_or(true, |b| s.center_value >= b - 1e-9));
    let dichotomy = verdict(&values, &ratios, opts);
    let mut solve = solve;
    solve.monotone_flag = monotone_flag;
    solve.dichotomy = Some(dichotomy);
    Ok((
        iterates,
        ExhaustionReport {
            c: opts.c,
            steps,
            increment_ratios: ratios,
            monotone_flag,
            max_rise: max_rise.max(0.0),
            lower_bound_holds,
            dichotomy,
            solve,
        },
    ))
}

/// Largest value of `u_{n+1} − u_n` over the nodes of the smaller domain.
fn rise(a: &Iterate, b: &Iterate) -> f64 {
    match (a, b) {
        (Iterate::Radial(p), Iterate::Radial(q)) => p.u.iter().zip(&q.u).map(|(x, y)| y - x).fold(f64::NEG_INFINITY, f64::max),
        (Iterate::Grid(p), Iterate::Grid(q)) => {
            let pv = p.u.values();
            let qv = q.u.values();
            let ring_rise = p.u.boundary().iter().enumerate().map(|(j, x)| {
                let n_t = q.u.grid().n_theta();
                let i = p.u.grid().n_r();
                q.u.values()[i * n_t + j] - x
            });
            pv.iter().zip(qv).map(|(x, y)| y - x).chain(ring_rise).fold(f64::NEG_INFINITY, f64::max)
        }
        _ => f64::INFINITY,
    }
}

type RunParts = (Vec<Iterate>, Vec<Option<f64>>, SolveReport);

fn radial_run(q: &(dyn Fn(f64) -> f64 + Send + Sync), depths: &[f64], opts: &ExhaustionOptions) -> Result<RunParts> {
    let mesh = DepthMesh::logarithmic(*depths.last().unwrap(), opts.per_unit, depths)?;
    let mut iterates = Vec::new();
    let mut lower = Vec::new();
    let mut solve = SolveReport::new(Method::RadialNewton);
    for &t in depths {
        let sub = mesh.prefix(t)?;
        let p = solve_on_mesh(q, &sub, opts.c, 200)?;
        solve.iterations += p.report.iterations;
        solve.residual_history.push(p.report.final_residual());
        solve.wall_time += p.report.wall_time;
        let e = green_energy_at_origin(q, sub.nodes());
        lower.push(e.is_finite().then(|| opts.c - (2.0 * opts.c).exp() * e));
        iterates.push(Iterate::Radial(p));
    }
    Ok((iterates, lower, solve))
}

/// Nested polar grids: every disk's nodes are a prefix of the largest grid's rings.
fn grid_run(k: &CurvatureFunction, depths: &[f64], opts: &ExhaustionOptions) -> Result<RunParts> {
    let radii: Vec<f64> = depths.iter().map(|&t| (-(-t).exp_m1()).sqrt()).collect();
    let outer = *radii.last().unwrap();
    if outer >= 1.0 - 1e-9 {
        return Err(Error::Parameter("schedule reaches the circle in floating point; use smaller depths".into()));
    }
    let n = opts.n_r + 1;
    let h = outer / (n as f64 - 0.5);
    let all: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
    let mut iterates = Vec::new();
    let mut lower = Vec::new();
    let mut solve = SolveReport::new(Method::FdNewton);
    let mut last_count = 0;
    for &r in &radii {
        // Ring of each disk snaps to a node radius of the global grid.
        let count = all.iter().position(|&x| x >= r - 0.5 * h).unwrap_or(n - 1).max(2);
        if count <= last_count {
            return Err(Error::Parameter("schedule radii are closer than the grid spacing".into()));
        }
        last_count = count;
        let grid = Arc::new(PolarGrid::with_radii(C64::new(0.0, 0.0), all[..count].to_vec(), all[count], opts.n_theta)?);
        let a: Vec<f64> = (0..grid.len()).map(|i| k.checked(grid.point(i / opts.n_theta, i % opts.n_theta))).collect::<Result<_>>()?;
        let ring = vec![opts.c; opts.n_theta];
        let op = PolarOperator::new(&grid);
        let mut u = vec![opts.c; grid.len()];
        let mut report = SolveReport::new(Method::FdNewton);
        newton(&op, &mut u, &ring, &Nonlinearity::pure(a), None, 1e-11, 80, &mut report)?;
        solve.iterations += report.iterations;
        solve.residual_history.push(report.final_residual());
        solve.wall_time += report.wall_time;
        lower.push(None);
        iterates.push(Iterate::Grid(Solution { u: GridField::new(grid, u, ring)?, report }));
    }
    Ok((iterates, lower, solve))
}
