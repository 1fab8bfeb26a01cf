use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use shellvk_cli::config::RunConfig;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_shellvk");

const PLATE: &str = r#"
[surface]
family = "plate"
n1 = 12
n2 = 12

[load]
preset = "normal-wave"
tension = 0.5

[solver]
basis_size = 16
"#;

const CYLINDER: &str = r#"
[surface]
family = "cylinder"
n1 = 16
n2 = 17

[moduli]
mu = 1.0
lambda = 0.7

[scaling]
kappa = 1.0

[load]
preset = "radial-cos2"

[solver]
basis_size = 20
restarts = 2
seed = 5
"#;

struct Run {
    out: Output,
    dir: PathBuf,
}

impl Run {
    fn code(&self) -> i32 {
        self.out.status.code().unwrap_or(-1)
    }

    fn stderr(&self) -> String {
        String::from_utf8_lossy(&self.out.stderr).into_owned()
    }

    fn json(&self, name: &str) -> Value {
        serde_json::from_str(&fs::read_to_string(self.dir.join(name)).unwrap()).unwrap()
    }
}

fn write_cfg(tmp: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = tmp.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn shellvk(args: &[&str], cfg: &Path, out: &Path, env: &[(&str, &str)]) -> Run {
    let mut cmd = Command::new(BIN);
    cmd.args(args).arg("--config").arg(cfg).arg("--out").arg(out).env_remove("SHELLVK_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    Run { out: cmd.output().unwrap(), dir: out.to_path_buf() }
}

/// Every file except the manifest, which carries timings.
fn results(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

fn csv_column(path: &Path, name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[idx].parse().unwrap()).collect()
}

#[test]
fn surface_report_of_a_plate_is_flat() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_cfg(&tmp, "plate.cfg", PLATE);
    let run = shellvk(&["surface", "--verify"], &cfg, &tmp.path().join("out"), &[]);
    assert_eq!(run.code(), 0, "{}", run.stderr());
    let report = run.json("surface.json");
    assert_eq!(report["max_second_form"], 0.0);
    assert_eq!(report["family"], "plate");
    assert_eq!(report["robustness"]["class"], "NotApproximatelyRobustPlate");
    assert!((report["area"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(csv_column(&run.dir.join("surface.csv"), "nz").len(), 144);

    let manifest = run.json("manifest.json");
    assert_eq!(manifest["status"], "ok");
    assert_eq!(manifest["exit_code"], 0);
    assert_eq!(manifest["versions"]["shellvk"], shellvk::VERSION);
    // defaults are echoed, including grid-dependent ones
    assert_eq!(manifest["config"]["solver"]["fourier_order"], 5);
    assert_eq!(manifest["config"]["solver"]["mode"], "plate-bending");
    assert_eq!(manifest["config"]["moduli"]["mu"], 1.0);
    assert!(manifest["timings"]["chart"].is_number());
    assert!(manifest["verify"]["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
    let echoed = manifest["config_text"].as_str().unwrap();
    let direct = RunConfig::parse(&fs::read_to_string(&cfg).unwrap(), "plate.cfg").unwrap();
    let mut reparsed = RunConfig::parse(echoed, "echo").unwrap();
    reparsed.output.directory = direct.output.directory.clone();
    assert_eq!(reparsed, direct);
}

#[test]
fn gamma_check_on_a_cylinder_has_decreasing_errors() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_cfg(&tmp, "cyl.cfg", CYLINDER);
    let run = shellvk(&["gamma-check", "--verify"], &cfg, &tmp.path().join("out"), &[]);
    assert_eq!(run.code(), 0, "{}", run.stderr());
    let err = csv_column(&run.dir.join("convergence.csv"), "error");
    assert_eq!(err.len(), 4);
    assert!(err.windows(2).all(|w| w[1] < w[0]), "{err:?}");
    let summary = run.json("gamma_summary.json");
    assert!(summary["final_relative_error"].as_f64().unwrap() <= 0.05);
    let slope = summary["slope"].as_f64().unwrap();
    assert!((3.8..=4.3).contains(&slope), "{slope}");
    assert_eq!(summary["membrane"]["method"], "revolution");
    assert_eq!(summary["mode"], "ovalization");
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_cfg(&tmp, "cyl.cfg", CYLINDER);
    let a = shellvk(&["minimize", "--verify"], &cfg, &tmp.path().join("a"), &[("SHELLVK_THREADS", "1")]);
    let b = shellvk(&["minimize", "--verify"], &cfg, &tmp.path().join("b"), &[("SHELLVK_THREADS", "3")]);
    assert_eq!(a.code(), 0, "{}", a.stderr());
    assert_eq!(b.code(), 0, "{}", b.stderr());
    let (ra, rb) = (results(&a.dir), results(&b.dir));
    assert_eq!(ra.keys().collect::<Vec<_>>(), ["minimize.csv", "minimize.json"]);
    assert_eq!(ra, rb);
    assert_eq!(a.json("manifest.json")["threads"], 1);
    assert_eq!(b.json("manifest.json")["threads"], 3);
    let m = a.json("minimize.json");
    assert_eq!(m["converged"], true);
    assert!(m["value"].as_f64().unwrap() < 0.0);
    assert_eq!(m["candidates"][0]["start_values"].as_array().unwrap().len(), 3);

    // rerunning into the same directory overwrites, never appends
    let again = shellvk(&["minimize"], &cfg, &a.dir, &[]);
    assert_eq!(again.code(), 0);
    assert_eq!(results(&a.dir), ra);
}

#[test]
fn flags_override_the_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_cfg(&tmp, "cyl.cfg", CYLINDER);
    let run = shellvk(&["minimize", "--kappa", "0", "--seed", "9", "--restarts", "0"], &cfg, &tmp.path().join("o"), &[]);
    assert_eq!(run.code(), 0, "{}", run.stderr());
    let manifest = run.json("manifest.json");
    assert_eq!(manifest["config"]["scaling"]["kappa"], 0.0);
    assert_eq!(manifest["config"]["solver"]["seed"], 9);
    assert!(manifest["config_path"].as_str().unwrap().contains("overrides"));
    assert_eq!(run.json("minimize.json")["kappa"], 0.0);

    let bad = shellvk(&["minimize", "--tol=-1"], &cfg, &tmp.path().join("o"), &[]);
    assert_eq!(bad.code(), 2);
    assert!(bad.stderr().contains("[solver.tol]"), "{}", bad.stderr());
}

#[test]
fn config_errors_exit_2_with_locations() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_cfg(&tmp, "a.cfg", "[surface]\nn1 = 12\ncolour = \"red\"\n");
    let run = shellvk(&["surface"], &cfg, &out, &[]);
    assert_eq!(run.code(), 2);
    assert!(run.stderr().contains("a.cfg:3:"), "{}", run.stderr());
    assert!(run.stderr().contains("colour"), "{}", run.stderr());

    let cfg = write_cfg(&tmp, "b.cfg", "[surface]\nfamily = \"cylinder\"\n\n[moduli]\nmu = -1.0\n");
    let run = shellvk(&["energy"], &cfg, &out, &[]);
    assert_eq!(run.code(), 2);
    assert!(run.stderr().contains("b.cfg:5: [moduli.mu]"), "{}", run.stderr());

    let cfg = write_cfg(&tmp, "c.cfg", "[load]\npreset = \"csv\"\npath = \"/nonexistent/f.csv\"\n");
    let run = shellvk(&["energy"], &cfg, &out, &[]);
    assert_eq!(run.code(), 2, "{}", run.stderr());
    assert!(run.stderr().contains("[load.path]"), "{}", run.stderr());

    let good = write_cfg(&tmp, "good.cfg", PLATE);
    let run = shellvk(&["surface"], &good, &out, &[("SHELLVK_THREADS", "lots")]);
    assert_eq!(run.code(), 2);

    let usage = Command::new(BIN).arg("fold").output().unwrap();
    assert_eq!(usage.status.code(), Some(2));
}

#[test]
fn numerical_and_verify_failures_exit_3() {
    let tmp = TempDir::new().unwrap();
    let thick = "[surface]\nfamily = \"cylinder\"\nradius = 0.3\n[scaling]\nkappa = 1.0\n[solver]\nh_list = [0.5, 0.4, 0.3, 0.2]\n";
    let cfg = write_cfg(&tmp, "thick.cfg", thick);
    let run = shellvk(&["gamma-check"], &cfg, &tmp.path().join("t"), &[]);
    assert_eq!(run.code(), 3);
    let payload: Value = serde_json::from_str(&run.stderr()).unwrap();
    assert_eq!(payload["status"], "numerical-failure");
    assert_eq!(payload["error"]["kind"], "ThicknessTooLarge");
    assert_eq!(run.json("manifest.json")["status"], "numerical-failure");

    // a coarse non-cylindrical surface of revolution: the membrane residual
    // is above the warning threshold, which --verify turns into a failure
    let rev = "[surface]\nfamily = \"revolution\"\nn1 = 12\nn2 = 13\nprofile = [1.0, 0.0, 0.3]\n[scaling]\nkappa = 1.0\n";
    let cfg = write_cfg(&tmp, "rev.cfg", rev);
    let plain = shellvk(&["membrane"], &cfg, &tmp.path().join("r"), &[]);
    assert_eq!(plain.code(), 0, "{}", plain.stderr());
    let verified = shellvk(&["membrane", "--verify"], &cfg, &tmp.path().join("r"), &[]);
    assert_eq!(verified.code(), 3);
    let payload: Value = serde_json::from_str(&verified.stderr()).unwrap();
    assert_eq!(payload["failed"][0]["name"], "membrane_residual");
    assert_eq!(verified.json("manifest.json")["status"], "verify-failed");
}

#[test]
fn isometries_dump_every_mode() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_cfg(&tmp, "cyl.cfg", CYLINDER);
    let run = shellvk(&["isometries", "--verify"], &cfg, &tmp.path().join("out"), &[]);
    assert_eq!(run.code(), 0, "{}", run.stderr());
    let s = run.json("isometries.json");
    let count = s["count"].as_u64().unwrap() as usize;
    assert_eq!(count, 20);
    assert!(s["gap_ratio"].as_f64().unwrap() > 1.0);
    for name in s["mode_files"].as_array().unwrap() {
        let p = run.dir.join(name.as_str().unwrap());
        assert_eq!(csv_column(&p, "vx").len(), 16 * 17);
    }
    let rayleigh: Vec<f64> = s["rayleigh"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!(rayleigh.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn csv_inputs_reproduce_preset_results() {
    let tmp = TempDir::new().unwrap();
    let cyl = write_cfg(&tmp, "cyl.cfg", &format!("{CYLINDER}\n[membrane]\nsource = \"hoop\"\namplitude = 0.1\n"));
    let preset = shellvk(&["membrane", "--verify"], &cyl, &tmp.path().join("p"), &[]);
    assert_eq!(preset.code(), 0, "{}", preset.stderr());
    let res = preset.json("membrane.json")["residual"].as_f64().unwrap();
    assert!(res < 1e-6, "{res}");

    let csv_path = preset.dir.join("membrane.csv");
    let from_csv = CYLINDER.to_string() + &format!("\n[membrane]\nsource = \"csv\"\npath = \"{}\"\n", csv_path.display());
    let cfg = write_cfg(&tmp, "csv.cfg", &from_csv);
    let run = shellvk(&["membrane"], &cfg, &tmp.path().join("c"), &[]);
    assert_eq!(run.code(), 0, "{}", run.stderr());
    assert_eq!(fs::read(run.dir.join("membrane.csv")).unwrap(), fs::read(&csv_path).unwrap());

    // loads: the preset's nodal forces written by `energy`, fed back in
    let plate = write_cfg(&tmp, "plate.cfg", PLATE);
    let e1 = shellvk(&["energy", "--verify"], &plate, &tmp.path().join("e1"), &[]);
    assert_eq!(e1.code(), 0, "{}", e1.stderr());
    let mut r = csv::Reader::from_path(e1.dir.join("energy.csv")).unwrap();
    let h = r.headers().unwrap().clone();
    let cols: Vec<usize> = ["fx", "fy", "fz"].iter().map(|c| h.iter().position(|x| x == *c).unwrap()).collect();
    let mut w = csv::Writer::from_path(tmp.path().join("f.csv")).unwrap();
    w.write_record(["fx", "fy", "fz"]).unwrap();
    for rec in r.records() {
        let rec = rec.unwrap();
        w.write_record(cols.iter().map(|&c| &rec[c])).unwrap();
    }
    w.flush().unwrap();
    let text = PLATE.replace("preset = \"normal-wave\"\ntension = 0.5", &format!("preset = \"csv\"\npath = \"{}\"", tmp.path().join("f.csv").display()));
    let cfg = write_cfg(&tmp, "plate_csv.cfg", &text);
    let e2 = shellvk(&["energy"], &cfg, &tmp.path().join("e2"), &[]);
    assert_eq!(e2.code(), 0, "{}", e2.stderr());
    let (a, b) = (e1.json("energy.json"), e2.json("energy.json"));
    let (la, lb) = (a["energy"]["load"].as_f64().unwrap(), b["energy"]["load"].as_f64().unwrap());
    assert!((la - lb).abs() <= 1e-12 * la.abs().max(1e-300), "{la} vs {lb}");
    assert_eq!(a["energy"]["bending"], b["energy"]["bending"]);
}

#[test]
fn energy_with_kappa_zero_has_no_stretching() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_cfg(&tmp, "cyl.cfg", &CYLINDER.replace("kappa = 1.0", "kappa = 0.0"));
    let run = shellvk(&["energy", "--verify"], &cfg, &tmp.path().join("out"), &[]);
    assert_eq!(run.code(), 0, "{}", run.stderr());
    let e = run.json("energy.json");
    assert_eq!(e["energy"]["stretching"], 0.0);
    assert!(e["energy"]["bending"].as_f64().unwrap() > 0.0);
    assert_eq!(e["membrane"]["method"], "none");
    // F̂ ≈ diag(c, −c, 0) for a cos 2θ pressure: the best rotation is a
    // half turn about the in-plane axis of the positive entry
    let q: Vec<f64> = e["q"].as_array().unwrap().iter().flat_map(|r| r.as_array().unwrap().iter().map(|x| x.as_f64().unwrap())).collect();
    let diag_abs: [f64; 9] = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
    assert!(q.iter().zip(diag_abs).all(|(a, b)| (a.abs() - b).abs() < 1e-12), "{q:?}");
    assert!((q[8] + 1.0).abs() < 1e-12 && (q[0] * q[4] + 1.0).abs() < 1e-12, "{q:?}");
    assert!(e["rotation_m"].as_f64().unwrap() > 0.0);
}

#[test]
fn formats_limit_the_written_files() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_cfg(&tmp, "p.cfg", &format!("{PLATE}\n[output]\nformats = [\"json\"]\n"));
    let run = shellvk(&["surface"], &cfg, &tmp.path().join("out"), &[]);
    assert_eq!(run.code(), 0);
    assert_eq!(results(&run.dir).keys().collect::<Vec<_>>(), ["surface.json"]);
    assert_eq!(run.json("manifest.json")["outputs"], serde_json::json!(["surface.json"]));
}
