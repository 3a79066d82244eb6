//! End-to-end checks of the `qplate` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn qplate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qplate"))
        .args(args)
        .output()
        .expect("spawn qplate")
}

fn circuit(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("circuits")
        .join(name)
        .display()
        .to_string()
}

fn scratch(name: &str, text: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qplate-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn field(text: &str, key: &str) -> f64 {
    let prefix = format!("{key}: ");
    text.lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .unwrap_or_else(|| panic!("no `{key}` in\n{text}"))
        .parse()
        .unwrap()
}

#[test]
fn run_setup_a() {
    let o = qplate(&["run", "--circuit", &circuit("setup_a.qc"), "--input", "pol:H", "--exact"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!((field(&out, "success_probability") - 0.5).abs() < 1e-10);
    assert!(out.contains("logical_state: |l>_o2 carrier=H"), "{out}");
}

#[test]
fn empty_circuit_is_lossless() {
    let p = scratch("empty.qc", "# nothing here\n");
    let o = qplate(&["run", "--circuit", p.to_str().unwrap(), "--input", "pol:A"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!((field(&out, "success_probability") - 1.0).abs() < 1e-12);
    assert!(out.contains("|A>_pi"), "{out}");
}

#[test]
fn exit_codes() {
    let overflow = scratch(
        "overflow.qc",
        "circuit format_version=1 name=o m_max=4 seed=0\nqplate q=1 delta=pi\nhwp theta=0\nqplate q=1 delta=pi\nhwp theta=0\nqplate q=1 delta=pi\n",
    );
    let o = qplate(&["run", "--circuit", overflow.to_str().unwrap(), "--input", "pol:H"]);
    assert_eq!(o.status.code(), Some(5), "{}", String::from_utf8_lossy(&o.stderr));

    let bad = scratch("bad.qc", "hwp theta=0\nfrobnicator\n");
    let o = qplate(&["run", "--circuit", bad.to_str().unwrap(), "--input", "pol:H"]);
    assert_eq!(o.status.code(), Some(4));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2, column 1"), "{err}");

    let o = qplate(&["run", "--circuit", "/nonexistent/x.qc", "--input", "pol:H"]);
    assert_eq!(o.status.code(), Some(3));

    let o = qplate(&["run", "--circuit", &circuit("setup_a.qc"), "--input", "pol:H", "--exact", "--shots", "10"]);
    assert_eq!(o.status.code(), Some(2));

    let o = qplate(&["run", "--circuit", &circuit("setup_a.qc"), "--input", "pol:Q"]);
    assert_eq!(o.status.code(), Some(2));

    let o = qplate(&["table", "--setup", "zz"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn table_exact_setup_c() {
    let o = qplate(&["table", "--setup", "c", "--exact"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!((field(&out, "average_success_probability") - 0.25).abs() < 1e-10);
    assert!((field(&out, "average_fidelity") - 1.0).abs() < 1e-9);
}

#[test]
fn table_is_reproducible() {
    let args = ["table", "--setup", "d", "--shots", "10000", "--seed", "7"];
    let a = qplate(&args);
    let b = qplate(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let out = stdout(&a);
    assert!(field(&out, "average_fidelity") > 0.99);
    let c = qplate(&["table", "--setup", "d", "--shots", "10000", "--seed", "8"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn table_tsv_and_noise() {
    let o = qplate(&["table", "--setup", "a", "--format", "tsv"]);
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 8, "{out}");
    assert!(out.lines().last().unwrap().starts_with("average\t"));
    assert!(out.starts_with("initial\texpected\tfidelity"));

    let noise = scratch("noise.toml", "qplate_conversion = 0.894\n");
    let o = qplate(&["table", "--setup", "a", "--noise", noise.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!((field(&stdout(&o), "conversion_efficiency") - 0.894).abs() < 1e-9);
    let o = qplate(&["table", "--setup", "c", "--noise", noise.to_str().unwrap()]);
    let out = stdout(&o);
    assert!((field(&out, "conversion_efficiency") - 0.80).abs() < 0.01, "{out}");
    assert!(field(&out, "average_success_probability") < 0.25);

    let junk = scratch("junk.toml", "qplate_colour = 1\n");
    let o = qplate(&["table", "--setup", "a", "--noise", junk.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn tomo_recovers_target() {
    let o = qplate(&[
        "tomo", "--circuit", &circuit("setup_b.qc"), "--input", "oam2:a", "--target", "pol:L",
        "--shots", "10000", "--seed", "3",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(field(&stdout(&o), "fidelity") > 0.99);

    let o = qplate(&["tomo", "--circuit", &circuit("setup_a.qc"), "--input", "pol:R", "--target", "oam2:d", "--exact"]);
    assert_eq!(o.status.code(), Some(0));
    assert!((field(&stdout(&o), "fidelity") - 1.0).abs() < 1e-9);
}

#[test]
fn validate_and_detector() {
    let o = qplate(&["validate", "--circuit", &circuit("setup_det.qc")]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("ok name=setup_det"));

    let o = qplate(&["detector-eff", "--shots", "20000", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!((field(&out, "efficiency") - 0.5).abs() < 0.02, "{out}");
}

#[test]
fn output_flag_writes_file() {
    let dir = scratch("placeholder", "");
    let target = dir.with_file_name("table.txt");
    let o = qplate(&["table", "--setup", "b", "--output", target.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(target).unwrap();
    assert!(text.contains("kind: fidelity_table"));
}

#[test]
fn help_for_every_subcommand() {
    for sub in ["run", "tomo", "table", "validate", "detector-eff"] {
        let o = qplate(&[sub, "--help"]);
        assert_eq!(o.status.code(), Some(0), "{sub}");
        assert!(stdout(&o).contains("Exit codes"), "{sub}");
    }
    assert_eq!(qplate(&["--help"]).status.code(), Some(0));
    assert_eq!(qplate(&[]).status.code(), Some(2));
}
