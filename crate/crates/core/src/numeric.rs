//! Small numerical kernels: polynomials, root finding, dense and tridiagonal solves, assignment.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Polynomial with coefficients in increasing degree order.
pub fn poly_mul(a: &[C64], b: &[C64]) -> Vec<C64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![C64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn poly_add(a: &[C64], b: &[C64]) -> Vec<C64> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| a.get(i).copied().unwrap_or_default() + b.get(i).copied().unwrap_or_default())
        .collect()
}

pub fn poly_scale(a: &[C64], s: C64) -> Vec<C64> {
    a.iter().map(|x| x * s).collect()
}

pub fn poly_eval(p: &[C64], z: C64) -> C64 {
    p.iter().rev().fold(C64::new(0.0, 0.0), |acc, c| acc * z + c)
}

/// Value and first derivative by Horner's scheme.
pub fn poly_eval_d(p: &[C64], z: C64) -> (C64, C64) {
    let mut v = C64::new(0.0, 0.0);
    let mut d = C64::new(0.0, 0.0);
    for c in p.iter().rev() {
        d = d * z + v;
        v = v * z + c;
    }
    (v, d)
}

pub fn poly_derivative(p: &[C64]) -> Vec<C64> {
    p.iter().enumerate().skip(1).map(|(k, c)| c * k as f64).collect()
}

/// Taylor coefficients of `p` about `c`: returns `q` with `p(z) = Σ q_l (z − c)^l`.
pub fn taylor_shift(p: &[C64], c: C64) -> Vec<C64> {
    let mut q = p.to_vec();
    let n = q.len();
    for i in 0..n {
        for j in (i..n.saturating_sub(1)).rev() {
            let t = q[j + 1] * c;
            q[j] += t;
        }
    }
    q
}

/// Drops trailing coefficients that are negligible relative to the largest one.
pub fn poly_trim(p: &mut Vec<C64>) {
    let scale = p.iter().fold(0.0f64, |m, c| m.max(c.norm()));
    while p.len() > 1 && p.last().map_or(false, |c| c.norm() <= 1e-15 * scale) {
        p.pop();
    }
}

/// All roots of a polynomial by the Aberth–Ehrlich iteration, each refined by Newton.
pub fn poly_roots(p: &[C64]) -> Result<Vec<C64>> {
    let mut p = p.to_vec();
    poly_trim(&mut p);
    let deg = p.len().saturating_sub(1);
    if deg == 0 {
        return Ok(Vec::new());
    }
    if p[deg].norm() == 0.0 {
        return Err(Error::Degenerate("zero polynomial has no well-defined roots".into()));
    }
    let lead = p[deg];
    let monic: Vec<C64> = p.iter().map(|c| c / lead).collect();
    // Cauchy bound on root moduli; initial points on a skewed circle, rotated on restart.
    let bound = 1.0 + monic[..deg].iter().fold(0.0f64, |m, c| m.max(c.norm()));
    let rad = (monic[0].norm().powf(1.0 / deg as f64)).clamp(1e-3, bound);
    let mut best: Option<(f64, Vec<C64>)> = None;
    for (phase, scale) in [(0.4, 1.0), (1.3, 0.5), (2.1, 2.0), (0.9, 0.25)] {
        let r0 = (rad * scale).clamp(1e-3, bound);
        let start: Vec<C64> = (0..deg)
            .map(|k| C64::from_polar(r0, 2.0 * std::f64::consts::PI * k as f64 / deg as f64 + phase))
            .collect();
        let (z, converged) = aberth(&monic, start);
        let err = z.iter().fold(0.0f64, |m, &r| m.max(backward_error(&monic, r)));
        if converged || err < 1e-12 {
            return Ok(polish(&monic, z));
        }
        if best.as_ref().map_or(true, |(e, _)| err < *e) {
            best = Some((err, z));
        }
    }
    let (err, z) = best.expect("at least one attempt");
    if err < 1e-10 {
        return Ok(polish(&monic, z));
    }
    Err(Error::NonConvergence { what: "Aberth root finder".into(), iterations: 2000, residual: err })
}

/// `|p(z)| / Σ |a_k| |z|^k`: the relative coefficient perturbation that makes `z` an exact root.
fn backward_error(p: &[C64], z: C64) -> f64 {
    let scale = p.iter().rev().fold(0.0f64, |acc, c| acc * z.norm() + c.norm());
    poly_eval(p, z).norm() / scale.max(f64::MIN_POSITIVE)
}

fn aberth(monic: &[C64], mut z: Vec<C64>) -> (Vec<C64>, bool) {
    let deg = z.len();
    let mut done = vec![false; deg];
    for _ in 0..500 {
        for k in 0..deg {
            if done[k] {
                continue;
            }
            let (v, d) = poly_eval_d(monic, z[k]);
            if v.norm() == 0.0 {
                done[k] = true;
                continue;
            }
            let ratio = v / d;
            let s: C64 = (0..deg).filter(|&j| j != k).map(|j| 1.0 / (z[k] - z[j])).sum();
            let step = ratio / (1.0 - ratio * s);
            if step.re.is_finite() && step.im.is_finite() {
                z[k] -= step;
                if step.norm() <= 1e-14 * (1.0 + z[k].norm()) {
                    done[k] = true;
                }
            }
        }
        if done.iter().all(|&d| d) {
            return (z, true);
        }
    }
    (z, false)
}

fn polish(monic: &[C64], mut z: Vec<C64>) -> Vec<C64> {
    for r in z.iter_mut() {
        for _ in 0..3 {
            let (v, d) = poly_eval_d(monic, *r);
            if d.norm() == 0.0 {
                break;
            }
            let step = v / d;
            if !(step.norm() < 1e-6 * (1.0 + r.norm())) {
                break;
            }
            *r -= step;
        }
    }
    z
}

/// Solves a dense real system by Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if a[piv][col].abs() < 1e-300 {
            return Err(Error::Degenerate("singular linear system".into()));
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Ok(x)
}

/// Thomas algorithm for `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`.
pub fn tridiagonal_solve<T>(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [T], scratch: &mut Vec<f64>)
where
    T: Copy + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let n = diag.len();
    scratch.clear();
    scratch.resize(n, 0.0);
    let mut beta = diag[0];
    rhs[0] = rhs[0] * (1.0 / beta);
    for i in 1..n {
        scratch[i] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * scratch[i];
        rhs[i] = (rhs[i] - rhs[i - 1] * lower[i]) * (1.0 / beta);
    }
    for i in (0..n - 1).rev() {
        rhs[i] = rhs[i] - rhs[i + 1] * scratch[i + 1];
    }
}

/// Minimum-cost perfect assignment (Hungarian algorithm); returns `col_of_row`.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of_row = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            col_of_row[p[j] - 1] = j - 1;
        }
    }
    col_of_row
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}
