//! Dirichlet problems for `Δu = k(z) e^{2u}` on disks, the monotone exhaustion of the unit disk,
//! and the converged/diverging dichotomy of the resulting sequence.

mod exhaustion;
mod fd;
mod green;
mod radial;

use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::analytic::AnalyticMap;
use crate::disk_core::{one_minus_abs2, GridField, C64};
use crate::error::{Error, Result};

pub use exhaustion::{exhaustion_run, ExhaustionOptions, ExhaustionReport, ExhaustionStep, Iterate, Schedule};
pub(crate) use fd::discrete_laplacian;
pub use fd::{solve_dirichlet_fd, solve_dirichlet_subdomain, FdOptions, Nonlinearity};
pub use green::{harmonic_extension, solve_dirichlet_green, verify_representation, GreenOptions};
pub use radial::{solve_radial, DepthMesh, RadialOptions, RadialProfile};

type ScalarFn = dyn Fn(C64) -> f64 + Send + Sync;
type DepthFn = dyn Fn(f64) -> f64 + Send + Sync;

/// Provenance of a curvature function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CurvatureTag {
    Constant { value: f64 },
    BlaschkeSquared { degree: usize },
    Kjgamma { j: u32, gamma: f64 },
    Radial { name: String },
    Custom { name: String },
}

/// A nonnegative coefficient `k` in `Δu = k e^{2u}`.
///
/// Radial functions also carry the depth weight `q(t) = (1 − r²)² k(r)` with `t = −log(1 − r²)`,
/// which the one-dimensional solver integrates directly.
#[derive(Clone)]
pub struct CurvatureFunction {
    tag: CurvatureTag,
    eval: Arc<ScalarFn>,
    depth_weight: Option<Arc<DepthFn>>,
    log_depth_weight: Option<Arc<DepthFn>>,
}

impl fmt::Debug for CurvatureFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CurvatureFunction({:?})", self.tag)
    }
}

impl CurvatureFunction {
    pub fn constant(value: f64) -> Result<Self> {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(Error::Parameter(format!("curvature coefficient must be finite and ≥ 0, got {value}")));
        }
        Ok(CurvatureFunction {
            tag: CurvatureTag::Constant { value },
            eval: Arc::new(move |_| value),
            depth_weight: Some(Arc::new(move |t: f64| value * (-2.0 * t).exp())),
            log_depth_weight: None,
        })
    }

    /// `k = 4|g′|²` for an analytic `g`.
    pub fn derivative_squared<G: AnalyticMap + 'static>(g: G, degree: usize) -> Self {
        CurvatureFunction {
            tag: CurvatureTag::BlaschkeSquared { degree },
            eval: Arc::new(move |z| 4.0 * g.eval(z).1.norm_sqr()),
            depth_weight: None,
            log_depth_weight: None,
        }
    }

    /// Radial coefficient given through its depth weight `q(t)`.
    pub fn from_depth_weight<Q>(tag: CurvatureTag, q: Q) -> Self
    where
        Q: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let q = Arc::new(q);
        let qe = q.clone();
        CurvatureFunction {
            tag,
            eval: Arc::new(move |z| {
                let s = one_minus_abs2(z);
                qe(-s.ln()) / (s * s)
            }),
            depth_weight: Some(q),
            log_depth_weight: None,
        }
    }

    /// Radial coefficient from a profile `k(r)`.
    pub fn radial<K>(name: impl Into<String>, k: K) -> Self
    where
        K: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let k = Arc::new(k);
        let ke = k.clone();
        CurvatureFunction {
            tag: CurvatureTag::Radial { name: name.into() },
            eval: Arc::new(move |z| ke(z.norm())),
            depth_weight: Some(Arc::new(move |t: f64| {
                let s = (-t).exp();
                s * s * k((-(-t).exp_m1()).sqrt())
            })),
            log_depth_weight: None,
        }
    }

    pub fn custom<K>(name: impl Into<String>, k: K) -> Self
    where
        K: Fn(C64) -> f64 + Send + Sync + 'static,
    {
        CurvatureFunction { tag: CurvatureTag::Custom { name: name.into() }, eval: Arc::new(k), depth_weight: None, log_depth_weight: None }
    }

    pub fn tag(&self) -> &CurvatureTag {
        &self.tag
    }
    pub fn eval(&self, z: C64) -> f64 {
        (self.eval)(z)
    }
    pub fn is_radial(&self) -> bool {
        self.depth_weight.is_some()
    }
    /// `q(t) = (1 − r²)² k(r)` at depth `t = −log(1 − r²)`, for radial coefficients.
    pub fn depth_weight(&self, t: f64) -> Option<f64> {
        self.depth_weight.as_ref().map(|q| q(t))
    }
    /// Attaches a closed form for `(1 + t) q(t)` as a function of `s = log(1 + t)`, usable far beyond
    /// the depths where `t` itself is representable.
    pub fn with_log_depth_weight<W>(mut self, w: W) -> Self
    where
        W: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.log_depth_weight = Some(Arc::new(w));
        self
    }
    /// `(1 + t) q(t)` at `s = log(1 + t)`; `None` for non-radial coefficients.
    pub fn log_depth_weight(&self, s: f64) -> Option<f64> {
        if let Some(w) = &self.log_depth_weight {
            return Some(w(s));
        }
        let q = self.depth_weight.as_ref()?;
        let t = s.exp_m1();
        let v = q(t);
        Some(if v == 0.0 { 0.0 } else { v * (1.0 + t) })
    }
    pub(crate) fn depth_fn(&self) -> Option<Arc<DepthFn>> {
        self.depth_weight.clone()
    }

    /// Samples `k`, rejecting negative or non-finite values.
    pub fn checked(&self, z: C64) -> Result<f64> {
        let v = self.eval(z);
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::Contract(format!("curvature coefficient k({z}) = {v} is not a finite nonnegative number")));
        }
        Ok(v)
    }
}

type BoundaryFn = dyn Fn(C64) -> f64 + Send + Sync;

/// `Δu = k e^{2u}` on the disk `|z − center| < radius` with `u = boundary` on its circle.
#[derive(Clone)]
pub struct DirichletProblem {
    pub center: C64,
    pub radius: f64,
    pub k: CurvatureFunction,
    boundary: Arc<BoundaryFn>,
}

impl fmt::Debug for DirichletProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DirichletProblem")
            .field("center", &self.center)
            .field("radius", &self.radius)
            .field("k", &self.k)
            .finish()
    }
}

impl DirichletProblem {
    pub fn new<B>(center: C64, radius: f64, k: CurvatureFunction, boundary: B) -> Result<Self>
    where
        B: Fn(C64) -> f64 + Send + Sync + 'static,
    {
        if !(radius > 0.0) || center.norm() + radius >= 1.0 {
            return Err(Error::Domain(format!("disk |z − {center}| < {radius} is not inside the unit disk")));
        }
        Ok(DirichletProblem { center, radius, k, boundary: Arc::new(boundary) })
    }

    /// Constant boundary data `c` on a centered disk.
    pub fn constant(radius: f64, k: CurvatureFunction, c: f64) -> Result<Self> {
        Self::new(C64::new(0.0, 0.0), radius, k, move |_| c)
    }

    pub fn boundary(&self, z: C64) -> f64 {
        (self.boundary)(z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dichotomy {
    Converged,
    DivergingToMinusInfinity,
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    FdNewton,
    GreenPicard,
    GreenNewton,
    RadialNewton,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: Method,
    pub iterations: usize,
    /// Max-norm nonlinear residual after each iteration.
    pub residual_history: Vec<f64>,
    pub linear_iterations: usize,
    pub monotone_flag: bool,
    pub dichotomy: Option<Dichotomy>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl SolveReport {
    pub(crate) fn new(method: Method) -> Self {
        SolveReport {
            method,
            iterations: 0,
            residual_history: Vec::new(),
            linear_iterations: 0,
            monotone_flag: true,
            dichotomy: None,
            warnings: Vec::new(),
            wall_time: Duration::ZERO,
        }
    }

    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(f64::NAN)
    }
}

/// A grid solution together with its solver report.
#[derive(Debug, Clone)]
pub struct Solution {
    pub u: GridField,
    pub report: SolveReport,
}

impl Solution {
    pub fn center_value(&self) -> f64 {
        self.u.center_value()
    }
}
