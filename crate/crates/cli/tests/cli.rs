//! End-to-end runs of the `neurocnc` binary: exit codes, diagnostics,
//! config layering, golden programs and transfers.

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_neurocnc"));
    c.env_remove("NEUROCNC_CONFIG");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

/// Checks a written report against its checked-in schema.
fn assert_schema(name: &str, v: &Value) {
    let schema = json(&root().join(format!("docs/schemas/{name}.schema.json")));
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(v).map(|e| format!("{}: {e}", e.instance_path)).collect();
    assert!(errors.is_empty(), "{name}: {errors:?}");
}

#[test]
fn unknown_subcommand_is_an_input_error() {
    let o = run(&["frobnicate"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("frobnicate"));
}

#[test]
fn teacher_programs_match_golden_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut parts: Vec<PathBuf> = std::fs::read_dir(root().join("fixtures/parts"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    parts.push(root().join("fixtures/single/hole.json"));
    for part in parts {
        let stem = part.file_stem().unwrap().to_str().unwrap().to_string();
        let out = dir.path().join(format!("{stem}.nc"));
        let o = run(&["generate", "--part", s(&part), "--mode", "teacher", "--out", s(&out)]);
        assert_eq!(code(&o), 0, "{stem}: {}", stderr(&o));
        let golden = std::fs::read_to_string(root().join(format!("fixtures/nc/{stem}.nc"))).unwrap();
        assert_eq!(std::fs::read_to_string(&out).unwrap(), golden, "{stem}");
    }
}

#[test]
fn missing_and_malformed_parts_report_their_location() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.nc");
    let o = run(&["generate", "--part", "/nonexistent/part.json", "--out", s(&out)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("/nonexistent/part.json"), "{}", stderr(&o));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\n  \"id\": \"x\",\n  \"stock\": [1,\n}\n").unwrap();
    let o = run(&["generate", "--part", s(&bad), "--out", s(&out)]);
    assert_eq!(code(&o), 2);
    let e = stderr(&o);
    assert!(e.contains("bad.json") && e.contains("line"), "{e}");
    assert!(!out.exists());
}

#[test]
fn nn_mode_needs_a_bank() {
    let dir = tempfile::tempdir().unwrap();
    let part = root().join("fixtures/single/hole.json");
    let o = run(&["generate", "--part", s(&part), "--mode", "nn", "--out", s(&dir.path().join("x.nc"))]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("--bank"));
}

#[test]
fn config_file_and_env_reach_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(&cfg, "[sim]\nkv = 60.0\n").unwrap();
    let program = root().join("fixtures/nc/hole.nc");
    let stock = root().join("fixtures/single/hole.json");
    let report = dir.path().join("sim.json");
    let o = run(&[
        "--config",
        s(&cfg),
        "simulate",
        "--program",
        s(&program),
        "--stock",
        s(&stock),
        "--report",
        s(&report),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(&report);
    assert_schema("simulate_report", &r);
    assert_schema("config", &r["config"]);
    assert_eq!(r["config"]["sim"]["kv"], 60.0);
    assert!(r["deviation"]["max_dev"].as_f64().unwrap() <= 0.5);

    let o = bin()
        .env("NEUROCNC_CONFIG", &cfg)
        .args(["--set", "sim.dt=0.002", "show-config"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let shown: toml_like::Doc = toml_like::parse(&String::from_utf8(o.stdout).unwrap());
    assert_eq!(shown.get("sim", "kv"), Some("60.0"));
    assert_eq!(shown.get("sim", "dt"), Some("0.002"));
}

/// Just enough TOML reading to look up `section.key` in `show-config`
/// output without pulling a TOML parser into the test.
mod toml_like {
    pub struct Doc(Vec<(String, String, String)>);

    impl Doc {
        pub fn get(&self, section: &str, key: &str) -> Option<&str> {
            self.0
                .iter()
                .find(|(s, k, _)| s == section && k == key)
                .map(|(_, _, v)| v.as_str())
        }
    }

    pub fn parse(text: &str) -> Doc {
        let mut section = String::new();
        let mut out = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if let Some(s) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = s.to_string();
            } else if let Some((k, v)) = line.split_once('=') {
                out.push((section.clone(), k.trim().to_string(), v.trim().to_string()));
            }
        }
        Doc(out)
    }
}

#[test]
fn bad_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("[sim]\ncell_size = 0.0\n", "sim.cell_size"),
        ("[sim]\nkvv = 3.0\n", "sim.kvv"),
        ("[nn]\nhidden_dim = \"many\"\n", "nn.hidden_dim"),
        ("[sim\n", "cfg.toml"),
    ];
    for (text, key) in cases {
        let cfg = dir.path().join("cfg.toml");
        std::fs::write(&cfg, text).unwrap();
        let o = run(&["--config", s(&cfg), "show-config"]);
        assert_eq!(code(&o), 2, "{text}");
        assert!(stderr(&o).contains(key), "{text}: {}", stderr(&o));
    }
    let o = run(&["--set", "sim.cell_size=0", "show-config"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("sim.cell_size"));
}

#[test]
fn split_writes_both_streams() {
    let dir = tempfile::tempdir().unwrap();
    let (g, f) = (dir.path().join("g.txt"), dir.path().join("f.txt"));
    let program = root().join("fixtures/nc/hole.nc");
    let o = run(&["split", "--program", s(&program), "--geometry", s(&g), "--functions", s(&f)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let g = std::fs::read_to_string(g).unwrap();
    let f = std::fs::read_to_string(f).unwrap();
    assert!(g.starts_with("N30 G00 X50.000 Y25.000 Z22.000\n"), "{g}");
    assert!(f.starts_with("(G21 G90 G17 METRIC ABSOLUTE XY)\nN10 T2 M06\nN20 S3183 M03\n"), "{f}");
    assert!(!g.contains('M') && !g.contains('S') && !g.contains('T'));
}

fn spawn_recv(out: &Path) -> (std::process::Child, String) {
    let mut child = bin()
        .args(["recv", "--listen", "127.0.0.1:0", "--out", s(out)])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stderr.as_mut().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on ").unwrap().to_string();
    (child, addr)
}

#[test]
fn send_and_recv_over_tcp() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("got.nc");
    let (child, addr) = spawn_recv(&out);
    let program = root().join("fixtures/nc/p10_boundary.nc");
    let report = dir.path().join("send.json");
    let o = run(&["send", "--file", s(&program), "--to", &addr, "--report", s(&report)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let status = child.wait_with_output().unwrap();
    assert!(status.status.success());
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&program).unwrap());
    let r = json(&report);
    assert_schema("transfer_report", &r);
    assert_eq!(r["sent"]["bytes"], std::fs::metadata(&program).unwrap().len());
    assert_eq!(r["config"]["dnc"]["retries"], 3);
}

#[test]
fn send_to_nobody_is_a_transfer_failure() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    drop(listener);
    let program = root().join("fixtures/nc/hole.nc");
    let o = run(&["send", "--file", s(&program), "--to", &addr]);
    assert_eq!(code(&o), 5, "{}", stderr(&o));
}

#[test]
fn teach_verify_and_failure_codes() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let o = run(&["corpus", "--families", "holes", "--count", "40", "--out", s(&corpus)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    // no rounds at all cannot succeed
    let bank0 = dir.path().join("bank0.json");
    let o = run(&[
        "--set",
        "nn.max_rounds=0",
        "teach",
        "--corpus",
        s(&corpus),
        "--classes",
        "DrillNormal",
        "--out",
        s(&bank0),
    ]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert_eq!(json(&dir.path().join("bank0.report.json"))["verdict"], "failure");

    let bank = dir.path().join("bank.json");
    let o = run(&["teach", "--corpus", s(&corpus), "--classes", "Center,DrillNormal", "--out", s(&bank)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = json(&dir.path().join("bank.report.json"));
    assert_eq!(report["verdict"], "success");
    assert_schema("teach_report", &report);
    assert_schema("bank", &json(&bank));
    assert_eq!(report["classes"].as_array().unwrap().len(), 2);

    let part = corpus.join("holes_007.json");
    let vr = dir.path().join("verify.json");
    let o = run(&["verify", "--part", s(&part), "--bank", s(&bank), "--report", s(&vr)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(&vr);
    assert_schema("verify_report", &r);
    assert_eq!(r["verdict"], "pass");
    assert!(r["hausdorff_max"].as_f64().unwrap() <= r["hausdorff_limit"].as_f64().unwrap());

    let o = run(&[
        "--set",
        "verify.hausdorff_fraction=0.000001",
        "verify",
        "--part",
        s(&part),
        "--bank",
        s(&bank),
        "--report",
        s(&vr),
    ]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    assert_eq!(json(&vr)["verdict"], "fail");

    let nc = dir.path().join("nn.nc");
    let o = run(&["generate", "--part", s(&part), "--mode", "nn", "--bank", s(&bank), "--out", s(&nc)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let sim = dir.path().join("sim.json");
    let o = run(&["simulate", "--program", s(&nc), "--stock", s(&part), "--report", s(&sim)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    // a pocket part asks for a class the bank does not hold
    let o = run(&[
        "generate",
        "--part",
        s(&root().join("fixtures/parts/p02_pockets.json")),
        "--mode",
        "nn",
        "--bank",
        s(&bank),
        "--out",
        s(&nc),
    ]);
    assert_eq!(code(&o), 2);
}
