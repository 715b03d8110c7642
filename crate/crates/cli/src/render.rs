//! Polar fields as columnar CSV and SVG heatmaps.
//!
//! CSV: header `r,theta,value`, one row per node, rings outward and angles counterclockwise
//! from the positive real axis; the Dirichlet ring, when present, comes last at `r = R_max`.
//!
//! SVG: a `RASTER`×`RASTER` square of unit rectangles covering the disk of radius `R_max`
//! (each pixel takes the value of the nearest node), followed by a vertical legend.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use hypermetric::disk_core::GridField;
use hypermetric::gauss_solver::RadialProfile;

use crate::error::CliError;

pub const RASTER: usize = 256;
const LEGEND_STEPS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log,
}

impl Scale {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "linear" => Ok(Scale::Linear),
            "log" => Ok(Scale::Log),
            _ => Err(CliError::Usage(format!("scale must be linear or log, got '{s}'"))),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Scale::Linear => "linear",
            Scale::Log => "log",
        }
    }
}

/// Values on rings `radii` (row-major, `n_theta` per ring) plus an optional outer ring at `r_max`.
#[derive(Debug, Clone)]
pub struct Field {
    pub radii: Vec<f64>,
    pub n_theta: usize,
    pub values: Vec<f64>,
    pub r_max: f64,
    pub boundary: Option<Vec<f64>>,
}

impl Field {
    pub fn from_grid(u: &GridField) -> Self {
        let g = u.grid();
        Field {
            radii: g.radii().to_vec(),
            n_theta: g.n_theta(),
            values: u.values().to_vec(),
            r_max: g.r_max(),
            boundary: Some(u.boundary().to_vec()),
        }
    }

    /// Rotationally symmetric field; the last profile node is the outer ring.
    pub fn from_profile(p: &RadialProfile) -> Self {
        let radii = p.radii();
        let n = radii.len();
        Field {
            radii: radii[..n - 1].to_vec(),
            n_theta: 1,
            values: p.u[..n - 1].to_vec(),
            r_max: radii[n - 1],
            boundary: Some(vec![p.u[n - 1]]),
        }
    }

    fn theta(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.n_theta as f64
    }

    fn rows(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let interior = self
            .radii
            .iter()
            .enumerate()
            .flat_map(move |(i, &r)| (0..self.n_theta).map(move |j| (r, self.theta(j), self.values[i * self.n_theta + j])));
        let ring = self.boundary.iter().flat_map(move |b| b.iter().enumerate().map(move |(j, &v)| (self.r_max, self.theta(j), v)));
        interior.chain(ring)
    }

    fn check(&self) -> Result<(), CliError> {
        if self.radii.is_empty() || self.n_theta == 0 || self.values.len() != self.radii.len() * self.n_theta {
            return Err(CliError::Render("cannot render an empty field".into()));
        }
        if let Some((r, t, v)) = self.rows().find(|(_, _, v)| !v.is_finite()) {
            return Err(CliError::Render(format!("non-finite value {v} at r={r}, theta={t}")));
        }
        Ok(())
    }

    /// Value at the node nearest to polar coordinates `(r, t)`.
    fn nearest(&self, r: f64, t: f64) -> f64 {
        let j = ((t.rem_euclid(2.0 * PI) / (2.0 * PI) * self.n_theta as f64).round() as usize) % self.n_theta;
        let n = self.radii.len();
        let i = self.radii.partition_point(|&x| x < r);
        let below = i.checked_sub(1);
        let above = (i < n).then_some(i);
        let pick = match (below, above) {
            (Some(b), Some(a)) => {
                if r - self.radii[b] <= self.radii[a] - r {
                    b
                } else {
                    a
                }
            }
            (Some(b), None) => {
                if let Some(ring) = &self.boundary {
                    if self.r_max - r < r - self.radii[b] {
                        return ring[j];
                    }
                }
                b
            }
            (None, Some(a)) => a,
            (None, None) => unreachable!("field checked nonempty"),
        };
        self.values[pick * self.n_theta + j]
    }
}

pub fn write_csv(field: &Field, path: &Path) -> Result<(), CliError> {
    field.check()?;
    let mut out = String::from("r,theta,value\n");
    for (r, t, v) in field.rows() {
        let _ = writeln!(out, "{r},{t},{v}");
    }
    std::fs::write(path, out).map_err(|e| CliError::io(path, e))
}

const VIRIDIS: [(f64, f64, f64); 9] = [
    (68.0, 1.0, 84.0),
    (71.0, 44.0, 122.0),
    (59.0, 81.0, 139.0),
    (44.0, 113.0, 142.0),
    (33.0, 144.0, 141.0),
    (39.0, 173.0, 129.0),
    (92.0, 200.0, 99.0),
    (170.0, 220.0, 50.0),
    (253.0, 231.0, 37.0),
];

fn color(level: u8) -> String {
    let x = level as f64 / 255.0 * (VIRIDIS.len() - 1) as f64;
    let k = (x.floor() as usize).min(VIRIDIS.len() - 2);
    let s = x - k as f64;
    let (a, b) = (VIRIDIS[k], VIRIDIS[k + 1]);
    let mix = |p: f64, q: f64| (p + (q - p) * s).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

/// Maps values to color levels; log scale clamps nonpositive values to the smallest positive one.
struct Mapper {
    lo: f64,
    hi: f64,
    scale: Scale,
}

impl Mapper {
    fn new(field: &Field, scale: Scale) -> Result<Self, CliError> {
        let vals = field.rows().map(|(_, _, v)| v);
        let (lo, hi) = match scale {
            Scale::Linear => vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v))),
            Scale::Log => {
                let (a, b) = vals.filter(|&v| v > 0.0).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
                if !a.is_finite() {
                    return Err(CliError::Render("log scale needs at least one positive value".into()));
                }
                (a, b)
            }
        };
        Ok(Mapper { lo, hi, scale })
    }

    fn level(&self, v: f64) -> u8 {
        let (x, a, b) = match self.scale {
            Scale::Linear => (v, self.lo, self.hi),
            Scale::Log => (v.max(self.lo).ln(), self.lo.ln(), self.hi.ln()),
        };
        if b <= a {
            return 128;
        }
        (((x - a) / (b - a)).clamp(0.0, 1.0) * 255.0).round() as u8
    }
}

pub fn render_svg(field: &Field, scale: Scale) -> Result<String, CliError> {
    field.check()?;
    let map = Mapper::new(field, scale)?;
    let n = RASTER;
    let (width, height) = (n + 120, n);
    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" shape-rendering="crispEdges">"#
    );
    let _ = writeln!(out, r##"<rect width="{width}" height="{height}" fill="#ffffff"/>"##);
    let _ = writeln!(out, r#"<g id="disk">"#);
    for py in 0..n {
        let y = field.r_max * (1.0 - 2.0 * (py as f64 + 0.5) / n as f64);
        let row: Vec<Option<u8>> = (0..n)
            .map(|px| {
                let x = field.r_max * (2.0 * (px as f64 + 0.5) / n as f64 - 1.0);
                let r = x.hypot(y);
                (r <= field.r_max).then(|| map.level(field.nearest(r, y.atan2(x))))
            })
            .collect();
        let mut start = 0;
        while start < n {
            let end = (start..n).find(|&k| row[k] != row[start]).unwrap_or(n);
            if let Some(level) = row[start] {
                let _ = writeln!(out, r#"<rect x="{start}" y="{py}" width="{}" height="1" fill="{}"/>"#, end - start, color(level));
            }
            start = end;
        }
    }
    let _ = writeln!(out, "</g>");
    let (bx, bh) = (n + 16, n - 40);
    let _ = writeln!(out, r#"<g id="legend" font-family="monospace" font-size="10">"#);
    for k in 0..LEGEND_STEPS {
        let level = (255 * (LEGEND_STEPS - 1 - k) / (LEGEND_STEPS - 1)) as u8;
        let y0 = 20 + bh * k / LEGEND_STEPS;
        let y1 = 20 + bh * (k + 1) / LEGEND_STEPS;
        let _ = writeln!(out, r#"<rect x="{bx}" y="{y0}" width="16" height="{}" fill="{}"/>"#, y1 - y0, color(level));
    }
    let _ = writeln!(out, r#"<text x="{}" y="16">{:.4e}</text>"#, bx, map.hi);
    let _ = writeln!(out, r#"<text x="{}" y="{}">{:.4e}</text>"#, bx, 20 + bh + 12, map.lo);
    let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, bx + 22, 20 + bh / 2, scale.name());
    let _ = writeln!(out, "</g>\n</svg>");
    Ok(out)
}

pub fn write_svg(field: &Field, scale: Scale, path: &Path) -> Result<(), CliError> {
    let svg = render_svg(field, scale)?;
    std::fs::write(path, svg).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn radial(f: impl Fn(f64) -> f64) -> Field {
        let radii: Vec<f64> = (0..32).map(|i| (i as f64 + 0.5) / 33.0 * 0.9).collect();
        let n_theta = 48;
        let values = radii.iter().flat_map(|&r| std::iter::repeat(f(r)).take(n_theta)).collect();
        Field { radii, n_theta, values, r_max: 0.9, boundary: Some(vec![f(0.9); n_theta]) }
    }

    #[test]
    fn svg_is_deterministic_and_symmetric() {
        let f = radial(|r| 1.0 / (1.0 - r * r));
        let a = render_svg(&f, Scale::Log).unwrap();
        assert_eq!(a, render_svg(&f, Scale::Log).unwrap());
        assert!(a.starts_with("<?xml") && a.trim_end().ends_with("</svg>"));
        let level = |x: f64, y: f64| Mapper::new(&f, Scale::Log).unwrap().level(f.nearest(x.hypot(y), y.atan2(x)));
        for &(x, y) in &[(0.3, 0.1), (0.5, -0.2), (0.05, 0.6)] {
            assert_eq!(level(x, y), level(-x, -y));
            assert_eq!(level(x, y), level(y, x));
        }
    }

    #[test]
    fn rejects_empty_and_non_finite() {
        let empty = Field { radii: vec![], n_theta: 8, values: vec![], r_max: 0.5, boundary: None };
        assert!(render_svg(&empty, Scale::Linear).is_err());
        let mut f = radial(|r| r);
        f.values[3] = f64::NAN;
        assert!(render_svg(&f, Scale::Linear).is_err());
        assert!(render_svg(&radial(|_| -1.0), Scale::Log).is_err());
    }
}
