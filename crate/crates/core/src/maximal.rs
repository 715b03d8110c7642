//! Maximal conformal pseudometrics with prescribed zeros, built by Perron modification sweeps,
//! and boundary diagnostics for maximal metrics and their developing maps.
//!
//! Sweeps work with `V = log(λ/(|B| λ_D))`, where `B` is the Blaschke product on the prescribed
//! zeros. Curvature −4 for `λ` reads `ΔV = 4λ_D²(|B|² e^{2V} − 1)`, which is regular at the zeros:
//! a modification on a zero disk, `(|z − z_j|/r_j)^{m_j} e^w` with `w` solving the weighted
//! equation, and a modification on a plain disk are the same Dirichlet solve in `V`, and the
//! factor `|B|` keeps every zero order exact.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::AnalyticMap;
use crate::blaschke::{from_critical_points, FiniteBlaschke, MultiplicitySequence};
use crate::disk_core::{one_minus_abs2, pseudo_hyperbolic, BoundaryPoint, GridField, PolarGrid, C64};
use crate::error::{Error, Result};
use crate::gauss_solver::{discrete_laplacian, solve_dirichlet_subdomain, Nonlinearity};
use crate::metrics::{blaschke_weighted, sample_points, ConformalDensity, SampleOptions, GUARD_RADIUS};

/// `|B| λ_D`, the starting point of every sweep.
pub fn seed_metric(b: &FiniteBlaschke) -> ConformalDensity {
    blaschke_weighted(b)
}

/// Smallest `λ/λ_D` at which node curvatures of a sweep density are reported.
pub const NODE_RATIO_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: C64,
    pub radius: f64,
}

impl Disk {
    fn contains(&self, z: C64) -> bool {
        (z - self.center).norm() < self.radius
    }
}

/// Grid, disk cover and stopping rule of a Perron sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub r_max: f64,
    pub n_r: usize,
    pub n_theta: usize,
    /// Cover disks, swept in the listed order; a disk enclosing zeros is solved with their weights.
    pub cover: Vec<Disk>,
    /// One disk per distinct zero, in the order of the zero sequence.
    pub zero_disks: Vec<Disk>,
    pub overlap: f64,
    pub rounds: usize,
    /// Stop once a round raises `V` by at most this much anywhere.
    pub tol: f64,
    pub solve_tol: f64,
    pub max_newton: usize,
}

/// Parameters of the default cover.
#[derive(Debug, Clone, Copy)]
pub struct CoverOptions {
    pub r_max: f64,
    pub n_r: usize,
    pub n_theta: usize,
    pub cover_radius: f64,
    /// Radii of coarser hexagonal levels swept before the fine cover.
    pub coarse_radii: [f64; 2],
    pub overlap: f64,
    pub zero_radius_cap: f64,
}

impl Default for CoverOptions {
    fn default() -> Self {
        CoverOptions { r_max: 0.999, n_r: 64, n_theta: 96, cover_radius: 0.15, coarse_radii: [0.6, 0.3], overlap: 0.5, zero_radius_cap: 0.1 }
    }
}

impl SweepConfig {
    pub fn for_zeros(c: &MultiplicitySequence) -> Result<Self> {
        Self::build(c, &CoverOptions::default())
    }

    /// Hexagonal covers at two coarse radii followed by the fine radius, each shrunk near the
    /// circle; the fine level avoids the zero guards and is patched until every interior grid
    /// node lies in a fine or zero disk.
    pub fn build(c: &MultiplicitySequence, o: &CoverOptions) -> Result<Self> {
        let grid = PolarGrid::uniform(C64::new(0.0, 0.0), o.r_max, o.n_r, o.n_theta)?;
        let zeros: Vec<C64> = c.entries().iter().map(|(p, _)| p.z()).collect();
        let zero_disks: Vec<Disk> = zeros
            .iter()
            .enumerate()
            .map(|(j, &z)| {
                let sep = zeros
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != j)
                    .map(|(_, &w)| pseudo_hyperbolic(z, w))
                    .fold(f64::INFINITY, f64::min);
                let radius = (0.5 * sep).min(o.zero_radius_cap).min(0.6 * (o.r_max - z.norm()));
                Disk { center: z, radius }
            })
            .collect();
        // Fine disks stay clear of the zero guards; coarse disks may contain zeros well inside them.
        let fit = |center: C64, cap: f64, enclose: bool| -> f64 {
            let mut r = cap.min(0.6 * (o.r_max - center.norm()));
            while let Some(d) = zeros
                .iter()
                .map(|z| (z - center).norm())
                .filter(|&d| d < r + GUARD_RADIUS && !(enclose && d + GUARD_RADIUS <= r))
                .reduce(f64::min)
            {
                r = d - 1.5 * GUARD_RADIUS;
            }
            r
        };
        let mut cover = Vec::new();
        let mut fine = Vec::new();
        for (level, &rho) in o.coarse_radii.iter().chain([o.cover_radius].iter()).enumerate() {
            let coarse = level < o.coarse_radii.len();
            let spacing = 2.0 * rho * (1.0 - o.overlap);
            let n = (o.r_max / spacing).ceil() as i64 + 1;
            let mut layer = Vec::new();
            for a in -n..=n {
                for b in -n..=n {
                    let center = C64::new(spacing * (a as f64 + 0.5 * b as f64), spacing * 0.75f64.sqrt() * b as f64);
                    if center.norm() < o.r_max {
                        let radius = fit(center, rho, coarse);
                        if radius > 0.25 * rho {
                            layer.push(Disk { center, radius });
                        }
                    }
                }
            }
            layer.sort_by(|a, b| a.center.norm().total_cmp(&b.center.norm()));
            if coarse {
                cover.extend(layer);
            } else {
                fine = layer;
            }
        }
        let covered = |z: C64, fine: &[Disk]| fine.iter().chain(&zero_disks).any(|d| d.contains(z));
        for i in 0..grid.n_r() {
            for j in 0..grid.n_theta() {
                let z = grid.point(i, j);
                if !covered(z, &fine) {
                    let radius = fit(z, o.cover_radius, false);
                    if radius <= 0.0 {
                        return Err(Error::Configuration(format!("grid node {z} cannot be covered away from the zeros")));
                    }
                    fine.push(Disk { center: z, radius });
                }
            }
        }
        fine.sort_by(|a, b| a.center.norm().total_cmp(&b.center.norm()));
        cover.extend(fine);
        Ok(SweepConfig {
            r_max: o.r_max,
            n_r: o.n_r,
            n_theta: o.n_theta,
            cover,
            zero_disks,
            overlap: o.overlap,
            rounds: 200,
            tol: 1e-7,
            solve_tol: 1e-10,
            max_newton: 60,
        })
    }

    fn validate(&self, c: &MultiplicitySequence) -> Result<()> {
        if self.zero_disks.len() != c.len() {
            return Err(Error::Configuration("one zero disk per distinct zero is required".into()));
        }
        let zeros: Vec<C64> = c.entries().iter().map(|(p, _)| p.z()).collect();
        for (j, d) in self.zero_disks.iter().enumerate() {
            if (d.center - zeros[j]).norm() > 1e-12 {
                return Err(Error::Configuration(format!("zero disk {j} is not centred at its zero")));
            }
            if d.center.norm() + d.radius >= self.r_max {
                return Err(Error::Configuration(format!("zero disk {j} leaves the grid region")));
            }
            for (i, e) in self.zero_disks.iter().enumerate().skip(j + 1) {
                if (d.center - e.center).norm() < d.radius + e.radius {
                    return Err(Error::Configuration(format!("zero disks {j} and {i} overlap")));
                }
            }
        }
        for d in &self.cover {
            if d.center.norm() + d.radius > self.r_max || d.radius <= 0.0 {
                return Err(Error::Configuration(format!("cover disk at {} leaves the grid region", d.center)));
            }
            if zeros.iter().any(|&z| ((z - d.center).norm() - d.radius).abs() < GUARD_RADIUS) {
                return Err(Error::Configuration(format!("the boundary of cover disk at {} meets a zero guard", d.center)));
            }
        }
        Ok(())
    }
}

/// Current iterate of a Perron sweep.
#[derive(Debug, Clone)]
pub struct PerronState {
    blaschke: FiniteBlaschke,
    v: GridField,
    nl: Arc<Nonlinearity>,
    points: Arc<Vec<C64>>,
    pub sweep_round: usize,
    pub last_update_max: f64,
    solve_tol: f64,
    max_newton: usize,
}

impl PerronState {
    /// Seed `|B| λ_D` on the sweep grid; with no zeros the seed is `0.9 λ_D`, leaving room to rise.
    pub fn seed(c: &MultiplicitySequence, config: &SweepConfig) -> Result<Self> {
        config.validate(c)?;
        let blaschke = FiniteBlaschke::from_zeros(c.clone(), C64::new(1.0, 0.0))?;
        let grid = Arc::new(PolarGrid::uniform(C64::new(0.0, 0.0), config.r_max, config.n_r, config.n_theta)?);
        let start = if c.is_empty() { 0.9f64.ln() } else { 0.0 };
        let v = GridField::new(grid.clone(), vec![start; grid.len()], vec![0.0; grid.n_theta()])?;
        let points: Vec<C64> = (0..grid.len()).map(|k| grid.point(k / grid.n_theta(), k % grid.n_theta())).collect();
        let (a, b): (Vec<f64>, Vec<f64>) = points
            .iter()
            .map(|&z| {
                let l2 = 4.0 / one_minus_abs2(z).powi(2);
                (l2 * blaschke.eval_any(z).0.norm_sqr(), l2)
            })
            .unzip();
        Ok(PerronState {
            blaschke,
            v,
            nl: Arc::new(Nonlinearity { a, b }),
            points: Arc::new(points),
            sweep_round: 0,
            last_update_max: f64::INFINITY,
            solve_tol: config.solve_tol,
            max_newton: config.max_newton,
        })
    }

    pub fn zero_set(&self) -> &MultiplicitySequence {
        self.blaschke.zeros()
    }

    /// `V = log(λ/(|B| λ_D))` on the sweep grid.
    pub fn log_ratio(&self) -> &GridField {
        &self.v
    }

    /// Density `|B| λ_D e^V` at a point of the grid disk.
    pub fn eval(&self, z: C64) -> f64 {
        density_at(&self.blaschke, &self.v, z)
    }

    /// Grid-backed density with node curvatures from the discrete Laplacian of `V`.
    pub fn density(&self) -> ConformalDensity {
        let lap = discrete_laplacian(&self.v);
        let grid = self.v.grid().clone();
        // κ + 4 is the discrete residual divided by (λ/λ_D)²; where that ratio is below
        // NODE_RATIO_FLOOR the quotient measures rounding, not curvature.
        let node_curvature = (0..grid.len())
            .filter_map(|k| {
                let z = grid.point(k / grid.n_theta(), k % grid.n_theta());
                let (a, b) = (self.nl.a[k], self.nl.b[k]);
                let ae = a * (2.0 * self.v.values()[k]).exp();
                (ae >= NODE_RATIO_FLOOR * NODE_RATIO_FLOOR * b).then(|| (z, -4.0 * (lap[k] + b) / ae))
            })
            .filter(|(_, kappa)| kappa.is_finite())
            .collect();
        let (bl, v) = (self.blaschke.clone(), self.v.clone());
        ConformalDensity::grid_backed("perron maximal", move |z| density_at(&bl, &v, z), self.zero_set().clone(), node_curvature)
    }

    fn mask(&self, d: &Disk) -> Vec<bool> {
        self.points.iter().map(|&z| d.contains(z)).collect()
    }

    /// Replaces `V` on the nodes of `d` by the maximum of itself and the Dirichlet solution with
    /// the current values as boundary data; returns the largest increase.
    fn modify(&mut self, d: &Disk) -> Result<f64> {
        let mask = self.mask(d);
        if !mask.iter().any(|&m| m) {
            return Ok(0.0);
        }
        let mut solved = self.v.clone();
        solve_dirichlet_subdomain(&mut solved, &self.nl, &mask, self.solve_tol, self.max_newton)?;
        let mut values = self.v.values().to_vec();
        let mut rise = 0.0f64;
        for (k, (&m, s)) in mask.iter().zip(solved.values()).enumerate() {
            if m && *s > values[k] {
                rise = rise.max(s - values[k]);
                values[k] = *s;
            }
        }
        self.v = GridField::new(self.v.grid().clone(), values, self.v.boundary().to_vec())?;
        Ok(rise)
    }
}

fn density_at(b: &FiniteBlaschke, v: &GridField, z: C64) -> f64 {
    let base = b.eval_any(z).0.norm() / one_minus_abs2(z);
    match v.interpolate(z) {
        Ok(x) => base * x.exp(),
        Err(_) => base,
    }
}

/// Modification on a plain disk: the density becomes `max(λ, e^v)` on `K`, unchanged elsewhere.
pub fn modify_on_disk(state: &PerronState, k: Disk) -> Result<PerronState> {
    if k.center.norm() + k.radius >= state.v.grid().r_max() {
        return Err(Error::Contract("modification disk must lie inside the grid region".into()));
    }
    if state.zero_set().entries().iter().any(|(p, _)| (p.z() - k.center).norm() < k.radius + GUARD_RADIUS) {
        return Err(Error::Contract("plain modification disk meets a zero guard".into()));
    }
    let mut next = state.clone();
    next.last_update_max = next.modify(&k)?;
    Ok(next)
}

/// Modification on the zero disk `K_{r_j}(z_j)`; the zero order `m_j` is preserved.
pub fn modify_on_zero_disk(state: &PerronState, config: &SweepConfig, j: usize) -> Result<PerronState> {
    let d = *config
        .zero_disks
        .get(j)
        .ok_or_else(|| Error::Parameter(format!("no zero disk with index {j}")))?;
    config.validate(state.zero_set())?;
    let mut next = state.clone();
    next.last_update_max = next.modify(&d)?;
    Ok(next)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub rounds: usize,
    pub converged: bool,
    /// Largest rise of `V` per round.
    pub update_history: Vec<f64>,
    pub modifications: usize,
    pub cover_disks: usize,
}

/// Alternates zero-disk and cover modifications until a round changes `V` by at most `tol`.
///
/// Running out of rounds is not an error: the partial state is returned with `converged = false`.
pub fn perron_sweep(c: &MultiplicitySequence, config: &SweepConfig) -> Result<(PerronState, SweepReport)> {
    let mut state = PerronState::seed(c, config)?;
    let mut report = SweepReport {
        rounds: 0,
        converged: false,
        update_history: Vec::new(),
        modifications: 0,
        cover_disks: config.cover.len(),
    };
    for round in 1..=config.rounds {
        let mut rise = 0.0f64;
        for d in config.zero_disks.iter().chain(&config.cover) {
            rise = rise.max(state.modify(d)?);
            report.modifications += 1;
        }
        state.sweep_round = round;
        state.last_update_max = rise;
        report.rounds = round;
        report.update_history.push(rise);
        if rise <= config.tol {
            report.converged = true;
            break;
        }
    }
    Ok((state, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaximalityVerdict {
    MaximalConsistent,
    NotMaximal,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundaryIntegralReport {
    pub radii: Vec<f64>,
    /// `I(r) = ∫₀^{2π} log(λ(re^{it})/λ_D(re^{it})) dt`.
    pub values: Vec<f64>,
    pub verdict: MaximalityVerdict,
}

/// Circle integrals of `log(λ/λ_D)`; maximal-consistent when `|I(r)|` decreases to (near) zero.
pub fn boundary_integral_criterion(lambda: &ConformalDensity, radii: &[f64]) -> Result<BoundaryIntegralReport> {
    if radii.len() < 2 || radii.windows(2).any(|w| !(w[1] > w[0])) || radii.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
        return Err(Error::Parameter("boundary integral schedule must increase strictly inside (0, 1)".into()));
    }
    let n = 2048;
    let values: Vec<f64> = radii
        .iter()
        .map(|&r| {
            let s = one_minus_abs2(C64::new(r, 0.0));
            let logs: Vec<f64> = (0..n)
                .into_par_iter()
                .map(|j| (lambda.eval(C64::from_polar(r, 2.0 * PI * (j as f64 + 0.5) / n as f64)) * s).ln())
                .collect();
            logs.iter().sum::<f64>()
                * 2.0
                * PI
                / n as f64
        })
        .collect();
    let mags: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    let last = *mags.last().unwrap();
    let tail = &mags[mags.len().saturating_sub(3)..];
    let shrinking = tail.windows(2).all(|w| w[1] < w[0] || w[1] <= 1e-12);
    let small = last <= 1e-2 * mags[0].max(1.0) || last <= 1e-12;
    let verdict = if values.iter().all(|v| v.is_finite()) && shrinking && small {
        MaximalityVerdict::MaximalConsistent
    } else {
        MaximalityVerdict::NotMaximal
    };
    Ok(BoundaryIntegralReport { radii: radii.to_vec(), values, verdict })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DominanceReport {
    /// Largest `(|f′|/(1 − |f|²)) / (|F′|/(1 − |F|²))` over the samples.
    pub max_ratio: f64,
    pub argmax: C64,
    /// Largest `(|F′|/(1 − |F|²)) (1 − |z|²)`; strictly below 1 when `C*` is nonempty.
    pub max_chain_ratio: f64,
    pub samples: usize,
    pub tolerance: f64,
    pub passed: bool,
    /// Sample witnessing `ratio > 1 + tolerance`, if any.
    pub counterexample: Option<C64>,
}

/// Compares the hyperbolic derivative of `f` with that of the maximal function `F` of `C*`.
pub fn schwarz_pick_refinement(
    f: &dyn AnalyticMap,
    c_star: &MultiplicitySequence,
    opts: &SampleOptions,
    tolerance: f64,
) -> Result<DominanceReport> {
    if let Some(crit) = f.critical_set() {
        let crit = crit?;
        for (p, m) in c_star.entries() {
            if crit.multiplicity_at(p.z(), 1e-6) < *m {
                return Err(Error::Contract(format!("{} is not a critical point of f of order {m}", p.z())));
            }
        }
    }
    let big_f = from_critical_points(c_star)?;
    let pts: Vec<C64> = sample_points(opts.budget, opts.seed, opts.r_max)
        .into_iter()
        .filter(|z| c_star.entries().iter().all(|(p, _)| (p.z() - z).norm() >= GUARD_RADIUS))
        .collect();
    let rows: Vec<(C64, f64, f64)> = pts
        .par_iter()
        .map(|&z| {
            let small = f.eval(z).1.norm() / f.one_minus_abs2_at(z);
            let big = big_f.hyperbolic_density(z);
            (z, small / big, big * one_minus_abs2(z))
        })
        .collect();
    let (max_ratio, argmax) = rows.iter().fold((f64::NEG_INFINITY, C64::new(0.0, 0.0)), |a, r| if r.1 > a.0 { (r.1, r.0) } else { a });
    let max_chain_ratio = rows.iter().map(|r| r.2).fold(f64::NEG_INFINITY, f64::max);
    let passed = max_ratio <= 1.0 + tolerance && (c_star.is_empty() || max_chain_ratio < 1.0);
    Ok(DominanceReport {
        max_ratio,
        argmax,
        max_chain_ratio,
        samples: rows.len(),
        tolerance,
        passed,
        counterexample: (max_ratio > 1.0 + tolerance).then_some(argmax),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "trend", rename_all = "kebab-case")]
pub enum ProbeVerdict {
    TendsToOne,
    TendsToOther { limit: f64 },
    NoLimitDetected,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundaryProbeReport {
    pub zeta: C64,
    pub delta: f64,
    /// `(z, (1 − |z|²)|f′(z)|/(1 − |f(z)|²))` with `1 − |z|` decreasing.
    pub samples: Vec<(C64, f64)>,
    pub verdict: ProbeVerdict,
}

/// Evaluates `(1 − |z|²)|f′|/(1 − |f|²)` on `count` points of the Stolz angle at `ζ`, ending on the
/// radius at `1 − |z| = rho_min`; earlier points alternate between the radius and two
/// nontangential directions.
pub fn boundary_probe(f: &dyn AnalyticMap, zeta: C64, delta: f64, count: usize, rho_min: f64) -> Result<BoundaryProbeReport> {
    let bp = BoundaryPoint::new(zeta)?;
    if count < 4 || !(rho_min > 0.0 && rho_min < 0.5) {
        return Err(Error::Parameter("boundary probe needs count ≥ 4 and 0 < rho_min < 1/2".into()));
    }
    let beta = 0.5 * (PI / 2.0 - delta);
    let ratio = (rho_min / 0.5).powf(1.0 / (count - 1) as f64);
    let mut samples = Vec::with_capacity(count);
    for k in 0..count {
        let alpha = match (count - 1 - k) % 3 {
            0 => PI,
            1 => PI + beta,
            _ => PI - beta,
        };
        // A step ρ at angle α reaches depth 1 − |z| ≈ ρ|cos α|.
        let depth = 0.5 * ratio.powi(k as i32);
        let rho = depth / (-alpha.cos());
        let z = bp.z() * (1.0 + C64::from_polar(rho, alpha));
        let v = one_minus_abs2(z) * f.eval(z).1.norm() / f.one_minus_abs2_at(z);
        samples.push((z, v));
    }
    let radial: Vec<f64> = samples.iter().rev().step_by(3).map(|s| s.1).collect();
    let (v0, v1, v2) = (radial[0], radial[1], radial[2]);
    let verdict = if !(v0.is_finite() && v1.is_finite() && v2.is_finite()) {
        ProbeVerdict::NoLimitDetected
    } else if (v0 - 1.0).abs() <= 1e-3 && (v0 - 1.0).abs() <= (v1 - 1.0).abs() + 1e-12 {
        ProbeVerdict::TendsToOne
    } else if (v0 - v1).abs() <= 0.5 * (v1 - v2).abs() + 1e-12 {
        ProbeVerdict::TendsToOther { limit: v0 }
    } else {
        ProbeVerdict::NoLimitDetected
    };
    Ok(BoundaryProbeReport { zeta, delta, samples, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{Automorphism, FnMap, Polynomial};
    use crate::metrics::{ahlfors_check, poincare, scaled_poincare, sk_check, zero_order_at};

    fn pts(n: usize) -> MultiplicitySequence {
        MultiplicitySequence::from_points(&vec![C64::new(0.0, 0.0); n]).unwrap()
    }

    #[test]
    fn seed_is_blaschke_weighted() {
        let s = seed_metric(&FiniteBlaschke::monomial(1));
        let z = C64::new(0.3, 0.4);
        assert!((s.eval(z) - 0.5 / 0.75).abs() < 1e-15);
        assert_eq!(zero_order_at(&s, C64::new(0.0, 0.0)).unwrap().0, 1);
        assert!(sk_check(&s, &SampleOptions::default()).passed);
        assert!(ahlfors_check(&s, &SampleOptions::default()).passed);
    }

    #[test]
    fn default_cover_is_valid() {
        let c = MultiplicitySequence::from_points(&[C64::new(0.3, 0.0), C64::new(0.0, -0.3)]).unwrap();
        let cfg = SweepConfig::for_zeros(&c).unwrap();
        cfg.validate(&c).unwrap();
        let d = (cfg.zero_disks[0].center - cfg.zero_disks[1].center).norm();
        assert!(cfg.zero_disks[0].radius + cfg.zero_disks[1].radius < d);
    }

    #[test]
    fn modification_is_local_and_monotone() {
        let c = pts(1);
        let cfg = SweepConfig::for_zeros(&c).unwrap();
        let s0 = PerronState::seed(&c, &cfg).unwrap();
        let k = Disk { center: C64::new(0.5, 0.2), radius: 0.12 };
        let s1 = modify_on_disk(&s0, k).unwrap();
        let g = s0.log_ratio().grid().clone();
        let mut raised = false;
        for idx in 0..g.len() {
            let z = g.point(idx / g.n_theta(), idx % g.n_theta());
            let (a, b) = (s0.log_ratio().values()[idx], s1.log_ratio().values()[idx]);
            if k.contains(z) {
                assert!(b >= a);
                raised |= b > a + 1e-6;
            } else {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
        assert!(raised);
        assert!(modify_on_disk(&s0, Disk { center: C64::new(0.05, 0.0), radius: 0.1 }).is_err());
    }

    #[test]
    fn zero_disk_update_keeps_order() {
        let c = pts(1);
        let cfg = SweepConfig::for_zeros(&c).unwrap();
        let s0 = PerronState::seed(&c, &cfg).unwrap();
        let s1 = modify_on_zero_disk(&s0, &cfg, 0).unwrap();
        assert!(s1.last_update_max > 0.0);
        assert_eq!(s1.log_ratio().boundary(), s0.log_ratio().boundary());
        let d = s1.density();
        assert_eq!(zero_order_at(&d, C64::new(0.0, 0.0)).unwrap().0, 1);
        let z = C64::new(0.05, 0.02);
        assert!(d.eval(z) > s0.eval(z));
    }

    #[test]
    fn sweep_for_origin_matches_square_pullback() {
        let c = pts(1);
        let cfg = SweepConfig::for_zeros(&c).unwrap();
        let (state, report) = perron_sweep(&c, &cfg).unwrap();
        assert!(report.converged, "{:?}", &report.update_history[report.update_history.len().saturating_sub(5)..]);
        assert!(report.update_history.iter().all(|&r| r >= 0.0));
        let d = state.density();
        let mut worst = 0.0f64;
        for z in sample_points(400, 3, 0.9) {
            let exact = 2.0 * z.norm() / (1.0 - z.norm_sqr().powi(2));
            worst = worst.max((d.eval(z) / exact - 1.0).abs());
        }
        assert!(worst < 1e-3, "relative error {worst}");
        assert!(sk_check(&d, &SampleOptions::default()).passed);
        assert!(ahlfors_check(&d, &SampleOptions::default()).passed);
    }

    #[test]
    fn sweep_order_does_not_change_the_limit() {
        let c = MultiplicitySequence::from_points(&[C64::new(0.4, 0.1)]).unwrap();
        let o = CoverOptions { n_r: 32, n_theta: 48, ..Default::default() };
        let mut cfg = SweepConfig::build(&c, &o).unwrap();
        cfg.tol = 1e-10;
        let (a, _) = perron_sweep(&c, &cfg).unwrap();
        cfg.cover.reverse();
        let (b, rb) = perron_sweep(&c, &cfg).unwrap();
        assert!(rb.converged);
        let diff = a.log_ratio().max_abs_diff(b.log_ratio()).unwrap();
        assert!(diff < 1e-8, "{diff}");
    }

    #[test]
    fn empty_zero_set_sweeps_to_poincare() {
        let c = MultiplicitySequence::empty();
        let (state, report) = perron_sweep(&c, &SweepConfig::for_zeros(&c).unwrap()).unwrap();
        assert!(report.converged);
        let p = poincare();
        for z in sample_points(200, 5, 0.9) {
            assert!((state.eval(z) / p.eval(z) - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn boundary_integral_examples() {
        let radii: Vec<f64> = (1..=10).map(|l| 1.0 - 0.5f64.powi(l)).collect();
        let sq = crate::metrics::hyperbolic_pullback(Arc::new(Polynomial::monomial(2))).unwrap();
        let r = boundary_integral_criterion(&sq, &radii).unwrap();
        for (rad, v) in r.radii.iter().zip(&r.values) {
            let exact = 2.0 * PI * (2.0 * rad / (1.0 + rad * rad)).ln();
            assert!((v - exact).abs() < 1e-9, "{v} {exact}");
        }
        assert_eq!(r.verdict, MaximalityVerdict::MaximalConsistent);
        assert_eq!(boundary_integral_criterion(&poincare(), &radii).unwrap().verdict, MaximalityVerdict::MaximalConsistent);
        let half = boundary_integral_criterion(&scaled_poincare(0.5), &radii).unwrap();
        assert!((half.values[9] - 2.0 * PI * 0.5f64.ln()).abs() < 1e-9);
        assert_eq!(half.verdict, MaximalityVerdict::NotMaximal);
    }

    #[test]
    fn schwarz_pick_examples() {
        let opts = SampleOptions::default();
        let cube = Polynomial::monomial(3);
        let rep = schwarz_pick_refinement(&cube, &pts(1), &opts, 1e-6).unwrap();
        assert!(rep.passed && rep.max_ratio <= 1.0);
        // At z = 0.5: 0.75/(1 − 1/64) against 1/(1 − 1/16).
        let f_side = 0.75 / (1.0 - 1.0 / 64.0);
        let big_side = 1.0 / (1.0 - 1.0 / 16.0);
        assert!((f_side / big_side - 0.7619_f64 / 1.0667).abs() < 1e-4);
        let big = from_critical_points(&pts(2)).unwrap();
        let eq = schwarz_pick_refinement(&big, &pts(2), &opts, 1e-6).unwrap();
        assert!((eq.max_ratio - 1.0).abs() < 1e-10);
        assert!(schwarz_pick_refinement(&Polynomial::monomial(2), &pts(2), &opts, 1e-6).is_err());
    }

    #[test]
    fn boundary_probe_examples() {
        let one = C64::new(1.0, 0.0);
        let sq = boundary_probe(&Polynomial::monomial(2), one, 0.3, 18, 1e-5).unwrap();
        assert_eq!(sq.verdict, ProbeVerdict::TendsToOne);
        for (z, v) in &sq.samples {
            assert!(crate::disk_core::in_stolz_region(BoundaryPoint::new(one).unwrap(), 0.3, *z));
            let r = z.norm();
            if (z.im).abs() < 1e-14 {
                assert!((v - 2.0 * r / (1.0 + r * r)).abs() < 1e-12);
            }
        }
        assert!((1.0 - sq.samples.last().unwrap().0.norm() - 1e-5).abs() < 1e-12);
        let aut = Automorphism::new(C64::from_polar(1.0, 0.4), C64::new(0.3, -0.5));
        let rep = boundary_probe(&aut, C64::from_polar(1.0, 2.0), 0.2, 12, 1e-5).unwrap();
        assert!(rep.samples.iter().all(|(_, v)| (v - 1.0).abs() < 1e-9));
        let half = FnMap::new("(1+z)/2", |z: C64| ((1.0 + z) / 2.0, C64::new(0.5, 0.0)));
        let at_one = boundary_probe(&half, one, 0.3, 12, 1e-5).unwrap();
        let (z, v) = *at_one.samples.last().unwrap();
        assert!((v - 2.0 * (1.0 + z.re) / (3.0 + z.re)).abs() < 1e-9);
        let at_minus = boundary_probe(&half, -one, 0.3, 12, 1e-5).unwrap();
        assert!(matches!(at_minus.verdict, ProbeVerdict::TendsToOther { limit } if limit.abs() < 1e-4));
    }
}
