use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn run(cmd: &str, config: &str, out: &Path, extra: &[&str]) -> Output {
    let cfg_path = out.join(format!("{cmd}.toml"));
    fs::create_dir_all(out).unwrap();
    fs::write(&cfg_path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_pwiener"))
        .arg(cmd)
        .arg("--config")
        .arg(&cfg_path)
        .arg("--out")
        .arg(out.join("results"))
        .args(extra)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Data rows of a CSV written by the tool (`#` lines are the config echo).
fn csv_rows(path: PathBuf) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).unwrap();
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr.records().map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect()).collect();
    (header, rows)
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const EXTERIOR_CUBE: &str = r#"
schema_version = 1
[params]
p = 3.0
dim = 2
[domain]
kind = "exterior_cube"
params = [0.0, 0.0, 1.0]
anchor = [1.0, 0.0]
[capacity]
cells_per_rho = 8
radii = [0.5, 0.25, 0.125]
"#;

#[test]
fn capacity_table_has_one_row_per_radius() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("capacity", EXTERIOR_CUBE, dir.path(), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = csv_rows(dir.path().join("results/capacity.csv"));
    assert_eq!(header, ["rho", "cap_obstacle", "cap_full", "delta", "iters"]);
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r[3])));
    // cap_full ∝ rho^{N-p}
    let slope = (rows[0][2] / rows[2][2]).ln() / (rows[0][0] / rows[2][0]).ln();
    assert!((slope + 1.0).abs() <= 0.05, "slope {slope}");
    let text = fs::read_to_string(dir.path().join("results/capacity.csv")).unwrap();
    assert!(text.contains("# radii = [0.5, 0.25, 0.125]"), "config is echoed");
}

#[test]
fn empty_obstacle_gives_zero_delta() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = EXTERIOR_CUBE.replace(
        "kind = \"exterior_cube\"\nparams = [0.0, 0.0, 1.0]\nanchor = [1.0, 0.0]",
        "kind = \"full_space\"\nanchor = [0.0, 0.0]",
    );
    let o = run("capacity", &cfg, dir.path(), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (_, rows) = csv_rows(dir.path().join("results/capacity.csv"));
    assert!(rows.iter().all(|r| r[3] == 0.0));
}

#[test]
fn halving_cascade_and_truncation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "schema_version = 1\n[params]\np = 3.0\ndim = 2\ngamma_2 = 2.0\n[cascade]\nmu_o = 1.0\ndeltas = [1.0, 1.0, 1.0, 1.0, 1.0]\n";
    let o = run("cascade", cfg, dir.path(), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = json(dir.path().join("results/cascade.json"));
    let mu: Vec<f64> =
        v["result"]["report"]["mu_seq"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(mu, vec![1.0, 0.5, 0.25, 0.125, 0.0625]);
    assert_eq!(v["result"]["report"]["all_nesting_ok"], Value::Bool(true));
    let (header, rows) = csv_rows(dir.path().join("results/envelope.csv"));
    assert_eq!(header, ["rho", "wiener_sum", "envelope", "tail_dominates", "power_law_branch"]);
    let table = v["result"]["report"]["envelope"].as_array().unwrap();
    assert_eq!(rows.len(), table.len());
    for (r, e) in rows.iter().zip(table) {
        assert_eq!(r[0], e["rho"].as_f64().unwrap());
        assert_eq!(r[2], e["envelope"].as_f64().unwrap());
    }

    // A_i = 2^{-i}: no successor of i_0 = 0
    let amps: Vec<String> = (0..6).map(|i| format!("{}", 0.25f64.powi(i))).collect();
    let cfg = format!(
        "schema_version = 1\n[params]\np = 3.0\ndim = 2\n[cascade]\nc_bar = 0.5\ndeltas = [{}]\n",
        amps.join(", ")
    );
    let o = run("cascade", &cfg, &dir.path().join("conv"), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = json(dir.path().join("conv/results/cascade.json"));
    assert_eq!(v["result"]["report"]["truncated_after"], Value::from(0));
}

#[test]
fn seeded_cascades_hold_their_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "schema_version = 1\n[params]\np = 3.0\ndim = 2\n[cascade]\ngenerator = { kind = \"diverging\", depth = 16, delta_min = 0.02 }\n";
    for seed in 0..5 {
        let out = dir.path().join(format!("s{seed}"));
        let o = run("cascade", cfg, &out, &["--seed", &seed.to_string()]);
        assert!(o.status.success(), "{}", stderr(&o));
        let v = json(out.join("results/cascade.json"));
        assert_eq!(v["seed"], Value::from(seed));
        for flag in ["all_nesting_ok", "all_sub_bound_ok", "all_chain_ok"] {
            assert_eq!(v["result"]["report"][flag], Value::Bool(true), "seed {seed} {flag}");
        }
    }
}

const SLIT_VERIFY: &str = r#"
schema_version = 1
x_o = [0.0, 0.0]
t_o = 0.5
[params]
p = 3.0
dim = 2
[domain]
kind = "slit"
params = [0.0, 0.0, 1.0, 0.0]
anchor = [0.0, 0.0]
[capacity]
cells_per_rho = 8
[profile]
r_o = 0.5
depth = 3
[pde]
half_edge = 1.0
h = 0.03125
time = { kind = "uniform", t_end = 0.5, steps = 25 }
datum = { kind = "distance_ramp", scale = 0.25 }
[probes]
radii = 4
"#;

#[test]
fn verify_is_deterministic_and_decays() {
    let dir = tempfile::tempdir().unwrap();
    let a = run("verify", SLIT_VERIFY, &dir.path().join("a"), &[]);
    assert!(a.status.success(), "{}", stderr(&a));
    let b = run("verify", SLIT_VERIFY, &dir.path().join("b"), &["--workers", "1"]);
    assert!(b.status.success(), "{}", stderr(&b));
    let strip = |p: PathBuf| {
        let mut v = json(p);
        v.as_object_mut().unwrap().remove("timings");
        serde_json::to_string_pretty(&v).unwrap()
    };
    let ra = strip(dir.path().join("a/results/report.json"));
    let rb = strip(dir.path().join("b/results/report.json"));
    assert_eq!(ra, rb);

    let v = json(dir.path().join("a/results/report.json"));
    let slope = v["result"]["regression"]["slope"].as_f64().unwrap();
    assert!(slope < 0.0, "slope {slope}");
    assert!(v["config"].as_str().unwrap().contains("kind = \"slit\""));
    let leftovers: Vec<_> = fs::read_dir(dir.path().join("a/results"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".tmp"))
        .collect();
    assert!(leftovers.is_empty(), "{leftovers:?}");
}

#[test]
fn vanishing_delta_fails_at_realize() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SLIT_VERIFY
        .replace("kind = \"slit\"\nparams = [0.0, 0.0, 1.0, 0.0]", "kind = \"full_space\"")
        .replace("r_o = 0.5", "r_o = \"auto\"\nsearch = { r_max = 0.5, levels = 2 }");
    let o = run("verify", &cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("realize_R_o_epsilon"), "{}", stderr(&o));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("capacity", &format!("{EXTERIOR_CUBE}bogus = 1\n"), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bogus") && stderr(&o).contains("line"), "{}", stderr(&o));

    let o = run("capacity", &EXTERIOR_CUBE.replace("p = 3.0", "p = 1.5"), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    let o = run("solve", EXTERIOR_CUBE, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing `pde`"));
}

#[test]
fn solve_writes_readable_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"
schema_version = 1
[params]
p = 3.0
dim = 1
[domain]
kind = "full_space"
anchor = [0.0]
[pde]
half_edge = 4.0
h = 0.25
time = { kind = "uniform", t_end = 1.0, steps = 10 }
datum = { kind = "barenblatt", t_shift = 1.0 }
snapshots = [0, 10]
"#;
    let o = run("solve", cfg, dir.path(), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let bytes = fs::read(dir.path().join("results/snapshot_00010.bin")).unwrap();
    let snap = pwiener::pde::Snapshot::read_binary(&bytes[..]).unwrap();
    assert_eq!(snap.time_index, 10);
    assert_eq!(snap.t, 1.0);
    assert_eq!(snap.values.len(), 33);
    assert_eq!(bytes.len(), 36 + 12 + 8 * 33);
}
