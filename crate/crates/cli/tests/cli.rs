use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nlsgraph"))
}

fn graph(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../graphs").join(name)
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("nlsgraph-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    dir
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn value(out: &str, key: &str) -> f64 {
    let line = out.lines().find(|l| l.starts_with(&format!("{key} = "))).unwrap();
    line.split(" = ").nth(1).unwrap().trim().parse().unwrap()
}

#[test]
fn threshold_on_the_unit_interval() {
    let g = graph("interval.g");
    let o = run(&["threshold", "--graph", g.to_str().unwrap(), "--h", "0.0078125"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let mu1 = value(&out, "mu1");
    let lower = value(&out, "lower_bound");
    assert!((mu1 - 1.18046).abs() < 2e-4, "{out}");
    assert!(mu1 >= lower * (1.0 - 1e-9));
}

#[test]
fn constant_state_of_unit_mass() {
    let g = graph("interval.g");
    let o = run(&["solve-constant", "--graph", g.to_str().unwrap(), "--mu", "1"]);
    let out = stdout(&o);
    assert!(o.status.success(), "{out}");
    assert!((value(&out, "kappa") - 1.0).abs() < 1e-12);
    assert!((value(&out, "lambda") - 1.0).abs() < 1e-12);
    assert!(!out.contains("FAIL"));
    assert_eq!(out.matches("PASS").count(), 6);
}

#[test]
fn malformed_graph_is_a_config_error() {
    let dir = scratch("bad");
    fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.g");
    fs::write(&bad, "[edges]\ne0 a b not-a-number\n").unwrap();
    let o = run(&["threshold", "--graph", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    let o = run(&["threshold", "--graph", dir.join("missing.g").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn missing_mass_and_bad_schedule_are_config_errors() {
    let g = graph("interval.g");
    let g = g.to_str().unwrap();
    assert_eq!(run(&["solve-constant", "--graph", g]).status.code(), Some(2));
    let dir = scratch("sched");
    let o = run(&["continue", "--graph", g, "--schedule", "rho:1:0.5:0.1", "--out", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(run(&["continue", "--graph", g, "--schedule", "mu:2"]).status.code(), Some(2));
}

#[test]
fn verify_accepts_its_own_output_and_rejects_a_perturbation() {
    let g = graph("star3.g");
    let dir = scratch("verify");
    let o = run(&["mountain-pass", "--graph", g.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stdout(&o));
    let state = dir.join("state.csv");
    let o = run(&["verify", "--graph", g.to_str().unwrap(), "--state", state.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stdout(&o));

    let text = fs::read_to_string(&state).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mid = lines.len() / 2;
    let mut f: Vec<String> = lines[mid].split(',').map(String::from).collect();
    let v: f64 = f[2].parse().unwrap();
    f[2] = format!("{:e}", v * 1.01);
    lines[mid] = f.join(",");
    let bent = dir.join("bent.csv");
    fs::write(&bent, lines.join("\n") + "\n").unwrap();
    let o = run(&["verify", "--graph", g.to_str().unwrap(), "--state", bent.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("strong_residual") && stdout(&o).contains("FAIL"));
    fs::remove_dir_all(&dir).unwrap();
}

fn read_tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == "csv" || x == "txt" || x == "gp") {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let g = graph("long_interval.g");
    let mut trees = Vec::new();
    for k in 0..2 {
        let c = scratch(&format!("det-c{k}"));
        let b = scratch(&format!("det-b{k}"));
        let o = run(&["continue", "--graph", g.to_str().unwrap(), "--schedule", "descent:2", "--out", c.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let o = run(&["blowup", "--trace", c.to_str().unwrap(), "--out", b.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        trees.push((read_tree(&c), read_tree(&b)));
        fs::remove_dir_all(&c).unwrap();
        fs::remove_dir_all(&b).unwrap();
    }
    assert!(trees[0].0.len() >= 4 && trees[0].1.len() >= 5);
    assert!(trees[0] == trees[1]);
}

#[test]
fn manifest_records_inputs_and_outputs() {
    let g = graph("cycle.g");
    let dir = scratch("manifest");
    let o = run(&["eig", "--graph", g.to_str().unwrap(), "--k", "3", "--out", dir.to_str().unwrap()]);
    assert!(o.status.success());
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "eig");
    assert_eq!(m["inputs"]["seed"], 0);
    assert!(m["inputs"]["graph"].as_str().unwrap().contains("[edges]"));
    let outputs: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    for f in &outputs {
        assert!(dir.join(f).exists(), "{f}");
    }
    assert!(outputs.contains(&"eigenvalues.csv"));
    let ev = m["results"]["eigenvalues"].as_array().unwrap();
    // the cycle of length one has 4π² twice
    let four_pi2 = 4.0 * std::f64::consts::PI.powi(2);
    assert!((ev[1].as_f64().unwrap() / four_pi2 - 1.0).abs() < 1e-3);
    assert!((ev[2].as_f64().unwrap() / four_pi2 - 1.0).abs() < 1e-3);
    fs::remove_dir_all(&dir).unwrap();
}
