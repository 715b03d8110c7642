//! Parameter tables, the flat `section.key = value` config file, and resolution order
//! defaults ← config file ← command line.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::CliError;

pub struct Param {
    pub key: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

const fn p(key: &'static str, default: &'static str, help: &'static str) -> Param {
    Param { key, default, help }
}

pub const OUTPUT: &[Param] = &[
    p("json", "", "write the JSON report here instead of stdout"),
    p("csv", "", "write the field as r,theta,value CSV"),
    p("svg", "", "write the field as an SVG heatmap"),
    p("scale", "linear", "heatmap scale: linear or log"),
    p("grid-n-r", "64", "rings of the grid used to sample densities for CSV/SVG"),
    p("grid-n-theta", "96", "angles of the grid used to sample densities for CSV/SVG"),
    p("grid-r-max", "0.99", "outer radius of the density sampling grid"),
];

pub const RUN: &[Param] = &[p("seed", "1", "seed for randomized sample sets")];

pub struct CommandDef {
    pub name: &'static str,
    pub about: &'static str,
    pub params: &'static [Param],
}

pub const COMMANDS: &[CommandDef] = &[
    CommandDef {
        name: "blaschke-from-zeros",
        about: "Finite Blaschke product with prescribed zeros",
        params: &[
            p("zeros", "", "comma-separated zeros a+bj (repeat for multiplicity)"),
            p("rotation", "1+0j", "unimodular rotation factor"),
        ],
    },
    CommandDef {
        name: "blaschke-from-critical",
        about: "Maximal Blaschke product with prescribed critical points",
        params: &[
            p("points", "", "comma-separated critical points a+bj"),
            p("r-max", "0.995", "warn about critical points beyond this modulus"),
            p("match-tol", "1e-8", "pseudohyperbolic tolerance for the recomputed critical set"),
            p("max-newton", "80", "Newton iteration cap"),
        ],
    },
    CommandDef {
        name: "solve-gauss",
        about: "Dirichlet problem for Δu = k e^{2u} on a disk",
        params: &[
            p("k", "constant:4", "curvature coefficient: constant:v, kjgamma:j,g, example33:a, blaschke-squared:zeros"),
            p("radius", "0.9", "disk radius"),
            p("center", "0+0j", "disk center"),
            p("boundary", "hyperbolic", "boundary data: a number, or hyperbolic for -log(1-|z|^2)"),
            p("method", "fd", "fd, green or radial"),
            p("n-r", "128", "grid rings (fd, green)"),
            p("n-theta", "128", "grid angles (fd, green)"),
            p("per-unit", "4000", "radial mesh nodes per unit of log depth (radial)"),
            p("tol", "1e-10", "nonlinear residual target"),
            p("max-newton", "60", "Newton iteration cap"),
        ],
    },
    CommandDef {
        name: "exhaustion",
        about: "Monotone exhaustion with constant boundary data",
        params: &[
            p("k", "constant:4", "curvature coefficient"),
            p("c", "0", "boundary constant"),
            p("schedule", "depth-doubling:9", "depth-doubling:n, dyadic-radii:n, radii:list or depths:list (list separated by ;)"),
            p("per-unit", "1000", "radial mesh nodes per unit of log depth"),
            p("n-r", "128", "grid rings for non-radial coefficients"),
            p("n-theta", "64", "grid angles for non-radial coefficients"),
        ],
    },
    CommandDef {
        name: "check-solvability",
        about: "Solvability integral and Green energy of a curvature coefficient",
        params: &[
            p("k", "constant:4", "curvature coefficient"),
            p("energy-samples", "0", "random points for the Green energy supremum (0 skips it)"),
        ],
    },
    CommandDef {
        name: "verify-identities",
        about: "Randomized identity and inequality suites",
        params: &[
            p("suite", "littlewood-paley", "littlewood-paley, sk-ahlfors or inverse-roundtrip"),
            p("degree", "4", "maximal polynomial degree or number of critical points"),
            p("count", "8", "number of random cases"),
            p("budget", "1000", "sample points per curvature check"),
        ],
    },
    CommandDef {
        name: "maximal-metric",
        about: "Perron sweep for the maximal metric with a prescribed zero set",
        params: &[
            p("zeros", "", "comma-separated zeros a+bj"),
            p("n-r", "64", "sweep grid rings"),
            p("n-theta", "96", "sweep grid angles"),
            p("r-max", "0.999", "sweep grid radius"),
            p("rounds", "200", "maximal number of sweep rounds"),
            p("tol", "1e-7", "stop when a round raises log λ by at most this much"),
            p("oracle", "true", "compare with the pullback of the Poincaré density"),
            p("budget", "1000", "sample points per curvature check"),
        ],
    },
    CommandDef {
        name: "boundary-probe",
        about: "Boundary behaviour of the hyperbolic derivative along a Stolz angle",
        params: &[
            p("map", "blaschke:0.5+0j", "map: monomial:n, blaschke:zeros, critical:points, automorphism:a, polynomial:coeffs, half-shift"),
            p("zeta", "1+0j", "boundary point"),
            p("delta", "0.5", "Stolz half-opening margin"),
            p("count", "12", "number of samples"),
            p("rho-min", "1e-5", "final distance to the boundary"),
        ],
    },
    CommandDef {
        name: "schwarz-pick",
        about: "Hyperbolic derivative bound by the maximal function of a critical subset",
        params: &[
            p("map", "monomial:3", "map f"),
            p("critical", "0+0j", "critical subset C* of f"),
            p("budget", "1000", "number of sample points"),
            p("r-max", "0.999", "sampling radius"),
            p("tolerance", "1e-6", "allowed excess of the ratio over 1"),
        ],
    },
];

pub fn command(name: &str) -> Option<&'static CommandDef> {
    COMMANDS.iter().find(|c| c.name == name)
}

fn section_params(section: &str) -> Option<&'static [Param]> {
    match section {
        "output" => Some(OUTPUT),
        "run" => Some(RUN),
        _ => command(section).map(|c| c.params),
    }
}

/// Parses `section.key = value` lines; `#` starts a comment. Keys of any known section are
/// validated, so one file may configure several commands.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected section.key = value", n + 1)))?;
        let key = key.trim();
        let (section, name) = key
            .split_once('.')
            .ok_or_else(|| CliError::Usage(format!("config line {}: key '{key}' has no section", n + 1)))?;
        let known = section_params(section).is_some_and(|ps| ps.iter().any(|p| p.key == name));
        if !known {
            return Err(CliError::Usage(format!("config line {}: unknown key '{key}'", n + 1)));
        }
        if out.insert(key.to_string(), value.trim().to_string()).is_some() {
            return Err(CliError::Usage(format!("config line {}: duplicate key '{key}'", n + 1)));
        }
    }
    Ok(out)
}

pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config_file(&text)
}

/// Fully resolved `section.key → value` map for one command.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: &'static str,
    pub values: BTreeMap<String, String>,
}

impl RunConfig {
    /// Layers defaults, then the file entries for this run, then command-line values.
    pub fn resolve(command: &'static CommandDef, file: &BTreeMap<String, String>, cli: &BTreeMap<String, String>) -> Self {
        let mut values = BTreeMap::new();
        for (section, params) in [("output", OUTPUT), ("run", RUN), (command.name, command.params)] {
            for p in params {
                let key = format!("{section}.{}", p.key);
                let v = cli.get(&key).or_else(|| file.get(&key)).map(String::as_str).unwrap_or(p.default);
                values.insert(key, v.to_string());
            }
        }
        RunConfig { command: command.name, values }
    }

    fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| panic!("unregistered key {key}"))
    }

    /// Value of a key in this command's section.
    pub fn get(&self, key: &str) -> &str {
        self.raw(&format!("{}.{key}", self.command))
    }

    pub fn output(&self, key: &str) -> &str {
        self.raw(&format!("output.{key}"))
    }

    pub fn f64(&self, key: &str) -> Result<f64, CliError> {
        crate::parse::parse_f64(key, self.get(key))
    }

    pub fn usize(&self, key: &str) -> Result<usize, CliError> {
        crate::parse::parse_usize(key, self.get(key))
    }

    pub fn bool(&self, key: &str) -> Result<bool, CliError> {
        match self.get(key) {
            "true" => Ok(true),
            "false" => Ok(false),
            v => Err(CliError::Usage(format!("{key}: expected true or false, got '{v}'"))),
        }
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        let v = self.raw("run.seed");
        v.trim().parse().map_err(|_| CliError::Usage(format!("seed: expected a nonnegative integer, got '{v}'")))
    }

    pub fn path(&self, key: &str) -> Option<&str> {
        Some(self.output(key)).filter(|s| !s.is_empty())
    }
}
