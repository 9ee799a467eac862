use std::path::PathBuf;
use std::process::{Command, Output};

fn tandem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tandem")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn field(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .and_then(|rest| rest.split_whitespace().next())
        .unwrap_or_else(|| panic!("no {key} in {text}"))
        .parse()
        .unwrap()
}

fn reference_config() -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs/reference.toml")
        .display()
        .to_string()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("tandem-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn corner_of_the_barrier_pays_nothing() {
    let o = tandem(&["value-barrier", "--u1", "0", "--u2", "14", "--a", "0.1", "--b", "14"]);
    assert!(o.status.success());
    assert!(field(&stdout(&o), "v1").abs() < 1e-6);
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let cfg = reference_config();
    let o = tandem(&["--config", &cfg, "value-barrier"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!((field(&stdout(&o), "v1") - 37.940896).abs() < 1e-5);

    let o = tandem(&["--config", &cfg, "value-barrier", "--b", "15"]);
    assert!(field(&stdout(&o), "v1") != 37.940896);

    let o = tandem(&["--config", &cfg, "--q", "0.2", "value-barrier"]);
    assert!(field(&stdout(&o), "v1") < 37.0);
}

#[test]
fn exit_codes_separate_input_and_validation_errors() {
    assert_eq!(tandem(&["value-barrier", "--u1", "1"]).status.code(), Some(2));
    assert_eq!(tandem(&["--lambda", "50", "value-barrier"]).status.code(), Some(2));
    assert_eq!(tandem(&["--config", "/nonexistent.toml", "gamma"]).status.code(), Some(2));
    assert_eq!(tandem(&["optimize", "--u1", "1", "--u2", "2", "--a-grid", "0.1", "--b-grid", "3:1:2"]).status.code(), Some(2));
    assert_eq!(tandem(&["table", "1", "--check"]).status.code(), Some(1));
    assert_eq!(tandem(&["validate"]).status.code(), Some(0));

    let bad = scratch("broken.toml");
    std::fs::write(&bad, "c1 = [").unwrap();
    let o = tandem(&["--config", bad.to_str().unwrap(), "gamma"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("TOML"));
}

#[test]
fn table_csv_parses_with_reference_column() {
    let o = tandem(&["table", "2"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("a,b,u1,u2,v1,terms,tail,reference,diff\n"));
    assert_eq!(text.lines().count(), 1 + 24 + 1);
    assert!(text.lines().last().unwrap().starts_with("argmax,"));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("max_abs_diff"));
}

#[test]
fn gamma_dump_validates() {
    let path = scratch("gamma.csv");
    let p = path.to_str().unwrap();
    assert!(tandem(&["gamma", "--a", "0.5", "--b", "8", "--out", p]).status.success());
    let o = tandem(&["validate", "--a", "0.5", "--b", "8", "--gamma-csv", p]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("PASS gamma dump"));
}

#[test]
fn simulate_trace_is_written() {
    let path = scratch("trace.csv");
    let o = tandem(&[
        "simulate", "impulse", "--u1", "3", "--u2", "2", "--cost", "0.5", "--paths", "100", "--trace",
        path.to_str().unwrap(), "--trace-path", "3",
    ]);
    assert!(o.status.success());
    let trace = std::fs::read_to_string(&path).unwrap();
    assert!(trace.starts_with("t,y1,y2,event\n"));
    assert!(trace.lines().count() > 2);
}

#[test]
fn simulate_output_ignores_thread_count() {
    let base = ["simulate", "barrier", "--u1", "1", "--u2", "2", "--a", "0.1", "--b", "14", "--paths", "20000", "--seed", "42"];
    let runs: Vec<Vec<u8>> = ["1", "3", "8"]
        .iter()
        .map(|t| {
            let mut args = base.to_vec();
            args.extend(["--threads", t]);
            tandem(&args).stdout
        })
        .collect();
    assert!(runs.windows(2).all(|w| w[0] == w[1]));
}
