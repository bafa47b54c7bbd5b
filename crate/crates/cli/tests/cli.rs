use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn imdp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_imdp")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const LINE: &str = r#"
name = "line"
seed = 4

[system]
a = [[1.0]]
b = [[1.0]]
input = { lo = [-2.0], hi = [2.0] }
noise = { kind = "gaussian", mean = [0.0], covariance = [[0.04]] }

[partition]
domain = { lo = [0.0], hi = [6.0] }
counts = [12]
goal = [{ lo = [4.0], hi = [5.0] }]
critical = [{ lo = [2.0], hi = [2.5] }]

[abstraction]
samples = 400
sweep = [100, 400]
beta = 0.01

[objective]
horizon = 6
x0 = [0.7]

[validation]
runs = 2000
repetitions = 2
traces = 3
"#;

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn run_is_byte_deterministic_and_worker_invariant() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), LINE);
    let files = ["summary.json", "solution.csv", "traces.csv", "validation.json", "model.sta", "model.tra"];
    let mut outputs = Vec::new();
    for (dir, workers) in [("a", "2"), ("b", "2"), ("c", "1")] {
        let out = tmp.path().join(dir);
        let o = imdp(&["run", "--config", &cfg, "--workers", workers, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(out.join("timings.json").exists());
        outputs.push(files.map(|f| fs::read(out.join(f)).unwrap()));
    }
    for (i, f) in files.iter().enumerate() {
        assert_eq!(outputs[0][i], outputs[1][i], "{f} differs between identical runs");
        assert_eq!(outputs[0][i], outputs[2][i], "{f} depends on the worker count");
    }
    let traces = String::from_utf8(outputs[0][2].clone()).unwrap();
    assert!(traces.starts_with("run,step,x1,u1\n"));
    assert!(traces.ends_with('\n') && !traces.contains('\r'));
}

#[test]
fn seed_flag_changes_results() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), LINE);
    let mut summaries = Vec::new();
    for seed in ["1", "2"] {
        let out = tmp.path().join(seed);
        let o = imdp(&["run", "--config", &cfg, "--seed", seed, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        summaries.push(fs::read_to_string(out.join("summary.json")).unwrap());
    }
    assert_ne!(summaries[0], summaries[1]);
    assert!(summaries[0].contains("\"seed\": 1"));
}

#[test]
fn sweep_export_and_validate_verbs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), LINE);
    let out = tmp.path().join("out");
    let out_s = out.to_str().unwrap();

    let o = imdp(&["sweep", "--config", &cfg, "--out", out_s]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    // 2 sample sizes × 2 repetitions × 2 models
    assert_eq!(csv.lines().count(), 1 + 8);
    assert!(out.join("sweep_timings.csv").exists());

    let o = imdp(&["export", "--config", &cfg, "--out", out_s]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(fs::read_to_string(out.join("model.sta")).unwrap().contains(" goal\n"));

    let o = imdp(&["validate", "--config", &cfg, "--out", out_s]);
    assert!(!o.status.success(), "validate needs a stored controller");
    assert!(stderr(&o).contains("controller.json"));

    let o = imdp(&["run", "--config", &cfg, "--out", out_s]);
    assert!(o.status.success(), "{}", stderr(&o));
    let first = fs::read_to_string(out.join("validation.json")).unwrap();
    let o = imdp(&["validate", "--config", &cfg, "--out", out_s]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(out.join("validation.json")).unwrap(), first);
}

#[test]
fn config_errors_exit_nonzero_with_field_path() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = LINE.replace("critical = [{ lo = [2.0], hi = [2.5] }]", "critical = [{ lo = [4.5], hi = [5.5] }]");
    let cfg = write_config(tmp.path(), &bad);
    let o = imdp(&["run", "--config", &cfg]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("partition.critical[0]"), "{}", stderr(&o));

    let unsorted = LINE.replace("sweep = [100, 400]", "sweep = [400, 100]");
    let cfg = write_config(tmp.path(), &unsorted);
    let o = imdp(&["sweep", "--config", &cfg]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("abstraction.sweep"));
}

#[test]
fn presets_emit_valid_configs() {
    let tmp = tempfile::tempdir().unwrap();
    for name in ["double-integrator-2d", "uav-6d"] {
        let path = tmp.path().join(format!("{name}.toml"));
        let o = imdp(&["preset", name, "--emit", path.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains(&format!("name = \"{name}\"")));
    }
    let o = imdp(&["preset", "uav-6d"]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("x0 = [-14.0, 0.0, 6.0, 0.0, -6.0, 0.0]"));
    let o = imdp(&["preset", "blimp"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("unknown preset"));
}
