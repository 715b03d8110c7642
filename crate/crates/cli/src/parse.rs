//! Text forms of complex numbers, point lists, coefficients and maps.

use std::sync::Arc;

use hypermetric::analysis_spaces::{example33_k, kjgamma};
use hypermetric::analytic::{AnalyticMap, Automorphism, FnMap, Polynomial};
use hypermetric::blaschke::{from_critical_points, FiniteBlaschke, MultiplicitySequence};
use hypermetric::gauss_solver::CurvatureFunction;
use hypermetric::C64;

use crate::error::CliError;

/// Formats `z` as `a+bj`, with shortest round-trip decimals and no negative zeros.
pub fn format_complex(z: C64) -> String {
    let clean = |x: f64| if x == 0.0 { 0.0 } else { x };
    let (re, im) = (clean(z.re), clean(z.im));
    if im < 0.0 {
        format!("{re}-{}j", -im)
    } else {
        format!("{re}+{im}j")
    }
}

/// Parses `a+bj`, `a-bj`, `a`, `bj` (exponents allowed).
pub fn parse_complex(s: &str) -> Result<C64, CliError> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || CliError::Usage(format!("cannot parse complex number '{s}' (expected a+bj)"));
    if t.is_empty() {
        return Err(bad());
    }
    let real = |x: &str| x.parse::<f64>().ok().filter(|v| v.is_finite());
    let Some(body) = t.strip_suffix('j') else {
        return real(&t).map(|re| C64::new(re, 0.0)).ok_or_else(bad);
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len()).rev().find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    let imag = |x: &str| match x {
        "" | "+" => Some(1.0),
        "-" => Some(-1.0),
        _ => real(x),
    };
    match split {
        Some(i) => Ok(C64::new(real(&body[..i]).ok_or_else(bad)?, imag(&body[i..]).ok_or_else(bad)?)),
        None => Ok(C64::new(0.0, imag(body).ok_or_else(bad)?)),
    }
}

/// Comma-separated complex numbers; the empty string is the empty list.
pub fn parse_points(s: &str) -> Result<Vec<C64>, CliError> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(parse_complex).collect()
}

pub fn parse_sequence(s: &str) -> Result<MultiplicitySequence, CliError> {
    Ok(MultiplicitySequence::from_points(&parse_points(s)?)?)
}

pub fn parse_f64(key: &str, s: &str) -> Result<f64, CliError> {
    s.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("{key}: expected a number, got '{s}'")))
}

pub fn parse_usize(key: &str, s: &str) -> Result<usize, CliError> {
    s.trim().parse::<usize>().map_err(|_| CliError::Usage(format!("{key}: expected a nonnegative integer, got '{s}'")))
}

fn split_kind(s: &str) -> (&str, &str) {
    s.split_once(':').unwrap_or((s, ""))
}

/// `constant:<v>`, `kjgamma:<j>,<γ>`, `example33:<α>` or `blaschke-squared:<zeros>`.
pub fn parse_curvature(s: &str) -> Result<CurvatureFunction, CliError> {
    let (kind, arg) = split_kind(s.trim());
    match kind {
        "constant" => Ok(CurvatureFunction::constant(parse_f64("k", arg)?)?),
        "kjgamma" => {
            let (j, g) = arg.split_once(',').ok_or_else(|| CliError::Usage("kjgamma expects <j>,<gamma>".into()))?;
            let j = u32::try_from(parse_usize("k", j)?).map_err(|_| CliError::Usage("kjgamma: j out of range".into()))?;
            Ok(kjgamma(j, parse_f64("k", g)?)?)
        }
        "example33" => Ok(example33_k(parse_f64("k", arg)?)?),
        "blaschke-squared" => {
            let b = FiniteBlaschke::from_zeros(parse_sequence(arg)?, C64::new(1.0, 0.0))?;
            let degree = b.degree();
            Ok(CurvatureFunction::derivative_squared(b, degree))
        }
        _ => Err(CliError::Usage(format!("unknown curvature '{s}'"))),
    }
}

/// `monomial:<n>`, `blaschke:<zeros>`, `critical:<points>`, `automorphism:<a>`,
/// `polynomial:<coefficients>` or `half-shift` (the map `(1 + z)/2`).
pub fn parse_map(s: &str) -> Result<Arc<dyn AnalyticMap>, CliError> {
    let (kind, arg) = split_kind(s.trim());
    let map: Arc<dyn AnalyticMap> = match kind {
        "monomial" => Arc::new(Polynomial::monomial(parse_usize("map", arg)?)),
        "blaschke" => Arc::new(FiniteBlaschke::from_zeros(parse_sequence(arg)?, C64::new(1.0, 0.0))?),
        "critical" => Arc::new(from_critical_points(&parse_sequence(arg)?)?),
        "automorphism" => Arc::new(Automorphism::new(C64::new(1.0, 0.0), parse_complex(arg)?)),
        "polynomial" => Arc::new(Polynomial::new(parse_points(arg)?)),
        "half-shift" => Arc::new(FnMap::new("(1+z)/2", |z: C64| ((1.0 + z) / 2.0, C64::new(0.5, 0.0)))),
        _ => return Err(CliError::Usage(format!("unknown map '{s}'"))),
    };
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_round_trip() {
        for z in [C64::new(0.4, 0.0), C64::new(-0.3, -0.25), C64::new(1e-12, 3.5e7), C64::new(0.0, -0.0)] {
            assert_eq!(parse_complex(&format_complex(z)).unwrap(), z + C64::new(0.0, 0.0));
        }
        assert_eq!(format_complex(C64::new(0.3, -0.3)), "0.3-0.3j");
        assert_eq!(format_complex(C64::new(-0.0, 0.0)), "0+0j");
        assert_eq!(parse_complex("-2e-3-1.5e+2j").unwrap(), C64::new(-2e-3, -150.0));
        assert_eq!(parse_complex("-j").unwrap(), C64::new(0.0, -1.0));
        assert_eq!(parse_complex("0.5").unwrap(), C64::new(0.5, 0.0));
        assert!(parse_complex("0.5+").is_err());
        assert!(parse_complex("abc").is_err());
        assert!(parse_complex("nan").is_err());
    }

    proptest::proptest! {
        #[test]
        fn formatted_complex_parses_back(re in -1e9..1e9f64, im in -1e9..1e9f64) {
            let z = C64::new(re, im);
            proptest::prop_assert_eq!(parse_complex(&format_complex(z)).unwrap(), z);
        }
    }

    #[test]
    fn point_lists() {
        assert!(parse_points("").unwrap().is_empty());
        assert_eq!(parse_points("0.3+0j, -0.3j").unwrap(), vec![C64::new(0.3, 0.0), C64::new(0.0, -0.3)]);
    }
}
