use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hypermetric"));
    c.env_remove("HYPERMETRIC_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn hypermetric")
}

fn run_json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn parse_c(s: &str) -> (f64, f64) {
    let body = s.strip_suffix('j').unwrap();
    let i = body.rfind(['+', '-']).unwrap();
    (body[..i].parse().unwrap(), body[i..].parse().unwrap())
}

#[test]
fn blaschke_from_critical_point_on_the_real_axis() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.json");
    let out = run(&["blaschke-from-critical", "--points", "0.4+0j", "--json", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(out.stdout.is_empty());
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let r = &doc["result"];
    assert!(r["residual"].as_f64().unwrap() <= 1e-10);
    assert_eq!(r["degree"], 2);
    assert_eq!(r["winding_degree"], 2);
    // z ↦ z (a − z)/(1 − a z) has its critical point at c when a = 2c/(1 + c²).
    let a = 2.0 * 0.4 / (1.0 + 0.16);
    let mut zeros: Vec<f64> = r["zeros"].as_array().unwrap().iter().map(|e| parse_c(e["point"].as_str().unwrap()).0).collect();
    zeros.sort_by(f64::total_cmp);
    assert!(zeros[0].abs() < 1e-12 && (zeros[1] - a).abs() < 1e-10, "{zeros:?}");
    assert_eq!(doc["config"]["blaschke-from-critical.points"], "0.4+0j");
}

#[test]
fn littlewood_paley_suite() {
    let doc = run_json(&["verify-identities", "--suite", "littlewood-paley", "--degree", "4", "--seed", "7"]);
    assert!(doc["result"]["max_gap"].as_f64().unwrap() <= 1e-6);
    assert_eq!(doc["result"]["passed"], true);
}

#[test]
fn exit_codes_and_error_tags() {
    let out = run(&["solve-gauss", "--no-such-flag", "1"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).starts_with("hypermetric-error: usage:"));
    assert_eq!(stderr(&out).lines().count(), 1);

    let out = run(&["no-such-command"]);
    assert_eq!(out.status.code(), Some(4));

    let out = run(&["solve-gauss", "--n-r", "0"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).starts_with("hypermetric-error: parameter:"));

    let out = run(&["solve-gauss", "--n-r", "16", "--n-theta", "16", "--max-newton", "1", "--tol", "1e-14"]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(stderr(&out).starts_with("hypermetric-error: non-convergence:"));

    let out = run(&["blaschke-from-critical", "--points", "1.5+0j"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["schwarz-pick", "--map", "monomial:3", "--critical", "0.5+0j"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));

    let out = run(&["schwarz-pick", "--csv", "x.csv"]);
    assert_eq!(out.status.code(), Some(4));

    let out = run(&["solve-gauss", "--json", "/nonexistent-dir/x.json", "--n-r", "8", "--n-theta", "8"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).starts_with("hypermetric-error: io: /nonexistent-dir/x.json"));

    let out = bin().args(["schwarz-pick"]).env("HYPERMETRIC_THREADS", "zero").output().unwrap();
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn empty_render_grid_is_a_contract_violation() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("x.svg");
    let out = run(&["blaschke-from-zeros", "--zeros", "0+0j", "--svg", svg.to_str().unwrap(), "--grid-n-r", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!svg.exists());
}

#[test]
fn config_file_layering() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# shared settings\nrun.seed = 11\nschwarz-pick.budget = 50\nsolve-gauss.n-r = 8\n").unwrap();
    let c = cfg.to_str().unwrap();
    let doc = run_json(&["schwarz-pick", "--config", c, "--tolerance", "1e-5"]);
    assert_eq!(doc["config"]["run.seed"], "11");
    assert_eq!(doc["config"]["schwarz-pick.budget"], "50");
    assert_eq!(doc["config"]["schwarz-pick.tolerance"], "1e-5");
    assert!(doc["config"].get("solve-gauss.n-r").is_none());
    assert!(doc["result"]["samples"].as_u64().unwrap() <= 50);

    let doc = run_json(&["schwarz-pick", "--config", c, "--budget", "70"]);
    assert_eq!(doc["config"]["schwarz-pick.budget"], "70");

    std::fs::write(&cfg, "schwarz-pick.budgett = 50\n").unwrap();
    let out = run(&["schwarz-pick", "--config", c]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("unknown key"));

    let out = run(&["schwarz-pick", "--config", dir.path().join("missing.cfg").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reports_are_byte_identical_across_runs_and_thread_counts() {
    let cases: &[&[&str]] = &[
        &["verify-identities", "--suite", "sk-ahlfors", "--count", "3", "--budget", "200", "--seed", "5"],
        &["schwarz-pick", "--map", "critical:0.2+0.1j,-0.3j", "--critical", "0.2+0.1j", "--seed", "3"],
        &["solve-gauss", "--n-r", "24", "--n-theta", "24", "--method", "green"],
        &["maximal-metric", "--zeros", "0.3+0j", "--n-r", "32", "--n-theta", "48", "--budget", "200"],
    ];
    for args in cases {
        let outs: Vec<Vec<u8>> = ["1", "4", "4"]
            .iter()
            .map(|t| {
                let o = bin().args(*args).env("HYPERMETRIC_THREADS", t).output().unwrap();
                assert!(o.status.success(), "{args:?}: {}", stderr(&o));
                o.stdout
            })
            .collect();
        assert_eq!(outs[0], outs[1], "{args:?}");
        assert_eq!(outs[1], outs[2], "{args:?}");
    }
}

fn validator() -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/report.schema.json");
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&schema).expect("schema compiles")
}

#[test]
fn every_command_output_matches_the_schema() {
    let v = validator();
    let cases: &[&[&str]] = &[
        &["blaschke-from-zeros", "--zeros", "0.3+0.2j,0.3+0.2j,-0.5j"],
        &["blaschke-from-critical", "--points", "0.4+0j,-0.2+0.3j"],
        &["solve-gauss", "--n-r", "16", "--n-theta", "16"],
        &["solve-gauss", "--method", "radial", "--per-unit", "200", "--k", "kjgamma:1,2", "--boundary", "0"],
        &["exhaustion", "--schedule", "depth-doubling:4", "--per-unit", "200"],
        &["check-solvability", "--k", "kjgamma:2,1", "--energy-samples", "3"],
        &["verify-identities", "--suite", "inverse-roundtrip", "--count", "3"],
        &["maximal-metric", "--zeros", "", "--n-r", "32", "--n-theta", "48", "--budget", "100"],
        &["boundary-probe", "--map", "half-shift", "--zeta", "-1+0j"],
        &["schwarz-pick", "--budget", "100"],
    ];
    for args in cases {
        let doc = run_json(args);
        let errors: Vec<String> = v.iter_errors(&doc).map(|e| format!("{} at {}", e, e.instance_path())).collect();
        assert!(errors.is_empty(), "{args:?}: {errors:?}");
        assert_eq!(doc["command"], args[0]);
    }
    let mut bad = run_json(&["schwarz-pick", "--budget", "50"]);
    bad["result"]["argmax"] = Value::String("0.1,0.2".into());
    assert!(!v.is_valid(&bad));
}

fn read_csv(path: &Path) -> Vec<(f64, f64, f64)> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("r,theta,value"));
    lines
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            assert_eq!(f.len(), 3);
            (f[0], f[1], f[2])
        })
        .collect()
}

/// Rebuilds the color of every pixel of the disk raster.
fn raster(svg: &str) -> Vec<Vec<Option<String>>> {
    let n = 256;
    let mut px = vec![vec![None; n]; n];
    let disk = svg.split("<g id=\"disk\">").nth(1).unwrap().split("</g>").next().unwrap();
    let attr = |line: &str, name: &str| -> String {
        let start = line.find(&format!(" {name}=\"")).unwrap() + name.len() + 3;
        line[start..].split('"').next().unwrap().to_string()
    };
    for line in disk.lines().filter(|l| l.starts_with("<rect")) {
        let (x, y, w): (usize, usize, usize) = (attr(line, "x").parse().unwrap(), attr(line, "y").parse().unwrap(), attr(line, "width").parse().unwrap());
        for cell in &mut px[y][x..x + w] {
            *cell = Some(attr(line, "fill"));
        }
    }
    px
}

#[test]
fn poincare_density_heatmap_is_radially_symmetric() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("d.svg");
    let csv = dir.path().join("d.csv");
    let args = ["blaschke-from-zeros", "--zeros", "0+0j", "--grid-n-r", "64", "--grid-n-theta", "64", "--scale", "log", "--svg", svg.to_str().unwrap(), "--csv", csv.to_str().unwrap()];
    run_json(&args);
    let text = std::fs::read_to_string(&svg).unwrap();
    run_json(&args);
    assert_eq!(text, std::fs::read_to_string(&svg).unwrap());
    assert!(text.starts_with("<?xml") && text.contains("<g id=\"legend\"") && text.trim_end().ends_with("</svg>"));

    let rows = read_csv(&csv);
    assert_eq!(rows.len(), 64 * 64 + 64);
    for &(r, _, v) in &rows {
        assert!((v * (1.0 - r * r) - 1.0).abs() < 1e-12);
    }

    let px = raster(&text);
    let n = px.len();
    let mut mismatches = 0;
    let mut painted = 0;
    for y in 0..n {
        for x in 0..n {
            if px[y][x].is_some() {
                painted += 1;
                if px[y][x] != px[n - 1 - y][n - 1 - x] || px[y][x] != px[x][y] {
                    mismatches += 1;
                }
            }
        }
    }
    // Nearest-node sampling can flip a pixel sitting exactly between two rings.
    assert!(painted > 45_000 && mismatches * 200 < painted, "{mismatches} of {painted}");
    assert_ne!(px[n / 2][n / 2], px[n / 2][n - 2]);
}

#[test]
fn exact_solution_field_follows_hyperbolic_level_sets() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("u.csv");
    let svg = dir.path().join("u.svg");
    let doc = run_json(&["solve-gauss", "--n-r", "32", "--n-theta", "32", "--csv", csv.to_str().unwrap(), "--svg", svg.to_str().unwrap()]);
    assert!(doc["result"]["exact_max_error"].as_f64().unwrap() < 5e-3);
    let rows = read_csv(&csv);
    assert_eq!(rows.len(), 32 * 32 + 32);
    for &(r, _, u) in &rows {
        assert!((u + (1.0 - r * r).ln()).abs() < 5e-3);
    }
    let text = std::fs::read_to_string(&svg).unwrap();
    let px = raster(&text);
    let n = px.len();
    assert_eq!(px[n / 2][n / 2 + 40], px[n / 2 + 40][n / 2]);
    assert_eq!(px[0][0], None);
}
