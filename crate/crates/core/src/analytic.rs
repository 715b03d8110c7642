//! Analytic maps with derivatives.

use std::fmt;
use std::sync::Arc;

use crate::blaschke::MultiplicitySequence;
use crate::disk_core::{one_minus_abs2, C64};
use crate::error::Result;

/// An analytic function evaluated together with its derivative.
pub trait AnalyticMap: Send + Sync {
    fn eval(&self, z: C64) -> (C64, C64);

    /// `1 − |f(z)|²`; implementors may override with a cancellation-free form.
    fn one_minus_abs2_at(&self, z: C64) -> f64 {
        one_minus_abs2(self.eval(z).0)
    }

    /// Critical set inside the disk, when it can be computed.
    fn critical_set(&self) -> Option<Result<MultiplicitySequence>> {
        None
    }

    /// Solutions of `f(z) = w` inside the disk, when they can be computed.
    fn preimages(&self, _w: C64) -> Option<Result<Vec<C64>>> {
        None
    }

    fn describe(&self) -> String;
}

/// Hyperbolic derivative `|f′(z)|/(1 − |f(z)|²)`.
pub fn hyperbolic_derivative(f: &dyn AnalyticMap, z: C64) -> f64 {
    f.eval(z).1.norm() / f.one_minus_abs2_at(z)
}

/// `z ↦ rotation·(a − z)/(1 − conj(a) z)`.
#[derive(Debug, Clone, Copy)]
pub struct Automorphism {
    pub rotation: C64,
    pub a: C64,
}

impl Automorphism {
    pub fn new(rotation: C64, a: C64) -> Self {
        Automorphism { rotation: rotation / rotation.norm(), a }
    }
}

impl AnalyticMap for Automorphism {
    fn eval(&self, z: C64) -> (C64, C64) {
        let den = 1.0 - self.a.conj() * z;
        let v = (self.a - z) / den;
        let d = (self.a.norm_sqr() - 1.0) / (den * den);
        (self.rotation * v, self.rotation * d)
    }

    fn one_minus_abs2_at(&self, z: C64) -> f64 {
        let den = (1.0 - self.a.conj() * z).norm_sqr();
        one_minus_abs2(self.a) * one_minus_abs2(z) / den
    }

    fn critical_set(&self) -> Option<Result<MultiplicitySequence>> {
        Some(Ok(MultiplicitySequence::empty()))
    }

    fn describe(&self) -> String {
        format!("automorphism(a={}, rotation={})", self.a, self.rotation)
    }
}

/// Polynomial with coefficients in increasing degree order.
#[derive(Debug, Clone)]
pub struct Polynomial {
    pub coeffs: Vec<C64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<C64>) -> Self {
        Polynomial { coeffs }
    }

    pub fn monomial(n: usize) -> Self {
        let mut coeffs = vec![C64::new(0.0, 0.0); n + 1];
        coeffs[n] = C64::new(1.0, 0.0);
        Polynomial { coeffs }
    }
}

impl AnalyticMap for Polynomial {
    fn eval(&self, z: C64) -> (C64, C64) {
        crate::numeric::poly_eval_d(&self.coeffs, z)
    }

    fn critical_set(&self) -> Option<Result<MultiplicitySequence>> {
        let d = crate::numeric::poly_derivative(&self.coeffs);
        Some(crate::numeric::poly_roots(&d).and_then(|r| clustered_in_disk(r)))
    }

    fn preimages(&self, w: C64) -> Option<Result<Vec<C64>>> {
        let mut p = self.coeffs.clone();
        if p.is_empty() {
            return None;
        }
        p[0] -= w;
        Some(crate::numeric::poly_roots(&p).map(|r| r.into_iter().filter(|z| z.norm() < 1.0).collect()))
    }

    fn describe(&self) -> String {
        format!("polynomial(degree {})", self.coeffs.len().saturating_sub(1))
    }
}

/// Groups roots inside the disk that agree to 1e-6 into points with multiplicity.
fn clustered_in_disk(roots: Vec<C64>) -> Result<MultiplicitySequence> {
    let mut out: Vec<(C64, u32)> = Vec::new();
    for z in roots.into_iter().filter(|z| z.norm() < 1.0) {
        match out.iter_mut().find(|(w, _)| (w - z).norm() < 1e-6) {
            Some(e) => e.1 += 1,
            None => out.push((z, 1)),
        }
    }
    let entries = out
        .into_iter()
        .map(|(z, m)| crate::disk_core::DiskPoint::from_c64(z).map(|p| (p, m)))
        .collect::<Result<Vec<_>>>()?;
    MultiplicitySequence::new(entries)
}

/// `outer ∘ inner`.
#[derive(Clone)]
pub struct Composition {
    pub outer: Arc<dyn AnalyticMap>,
    pub inner: Arc<dyn AnalyticMap>,
}

impl AnalyticMap for Composition {
    fn eval(&self, z: C64) -> (C64, C64) {
        let (w, dw) = self.inner.eval(z);
        let (v, dv) = self.outer.eval(w);
        (v, dv * dw)
    }

    fn one_minus_abs2_at(&self, z: C64) -> f64 {
        self.outer.one_minus_abs2_at(self.inner.eval(z).0)
    }

    fn describe(&self) -> String {
        format!("{} ∘ {}", self.outer.describe(), self.inner.describe())
    }
}

type EvalFn = dyn Fn(C64) -> (C64, C64) + Send + Sync;

/// Analytic map given by a closure returning value and derivative.
#[derive(Clone)]
pub struct FnMap {
    name: String,
    f: Arc<EvalFn>,
}

impl FnMap {
    pub fn new<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(C64) -> (C64, C64) + Send + Sync + 'static,
    {
        FnMap { name: name.into(), f: Arc::new(f) }
    }
}

impl fmt::Debug for FnMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FnMap({})", self.name)
    }
}

impl AnalyticMap for FnMap {
    fn eval(&self, z: C64) -> (C64, C64) {
        (self.f)(z)
    }

    fn describe(&self) -> String {
        self.name.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composition_chain_rule() {
        let t = Automorphism::new(C64::new(0.0, 1.0), C64::new(0.3, -0.1));
        let p = Polynomial::monomial(2);
        let f = Composition { outer: Arc::new(t), inner: Arc::new(p) };
        let z = C64::new(0.2, 0.4);
        let h = 1e-6;
        let (v, d) = f.eval(z);
        let fd = (f.eval(z + h).0 - f.eval(z - h).0) / (2.0 * h);
        assert!((d - fd).norm() < 1e-8);
        assert!((f.one_minus_abs2_at(z) - (1.0 - v.norm_sqr())).abs() < 1e-14);
    }

    #[test]
    fn automorphism_is_isometry() {
        let t = Automorphism::new(C64::new(1.0, 0.0), C64::new(0.6, 0.2));
        for z in [C64::new(0.1, 0.2), C64::new(-0.7, 0.5), C64::new(0.0, 0.0)] {
            let lhs = hyperbolic_derivative(&t, z);
            assert!((lhs * one_minus_abs2(z) - 1.0).abs() < 1e-13);
        }
    }
}
