//! Golden artifacts for every subcommand on a small configuration.
//! Regenerate with `GL1KIT_BLESS=1 cargo test --test cli_golden`.

use std::path::PathBuf;

use gl1kit::cli::run;
use serde_json::{json, Value};

fn invoke(args: &[&str]) -> (i32, String, String) {
    let argv = std::iter::once("gl1kit").chain(args.iter().copied()).map(String::from).collect();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn artifact(args: &[&str]) -> (i32, Value) {
    let (code, out, err) = invoke(args);
    let v = serde_json::from_str(&out).unwrap_or_else(|e| panic!("{args:?}: {e}\nstdout: {out}\nstderr: {err}"));
    (code, v)
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-10 * a.abs().max(b.abs()) + 1e-12
}

fn compare(path: &str, got: &Value, want: &Value, diffs: &mut Vec<String>) {
    match (got, want) {
        (Value::Number(x), Value::Number(y)) if !(x.is_f64() || y.is_f64()) => {
            if x != y {
                diffs.push(format!("{path}: {x} != {y}"));
            }
        }
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            if !close(x, y) {
                diffs.push(format!("{path}: {x:e} != {y:e}"));
            }
        }
        (Value::Array(x), Value::Array(y)) if x.len() == y.len() => {
            for (i, (a, b)) in x.iter().zip(y).enumerate() {
                compare(&format!("{path}[{i}]"), a, b, diffs);
            }
        }
        (Value::Object(x), Value::Object(y)) if x.len() == y.len() => {
            for (k, a) in x {
                match y.get(k) {
                    Some(b) => compare(&format!("{path}.{k}"), a, b, diffs),
                    None => diffs.push(format!("{path}.{k}: unexpected key")),
                }
            }
        }
        _ if got == want => {}
        _ => diffs.push(format!("{path}: {got} != {want}")),
    }
}

fn golden(name: &str, args: &[&str]) {
    let (code, art) = artifact(args);
    let got = json!({ "argv": args, "exit": code, "artifact": art });
    let file = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(format!("{name}.json"));
    if std::env::var_os("GL1KIT_BLESS").is_some() {
        std::fs::create_dir_all(file.parent().unwrap()).unwrap();
        std::fs::write(&file, serde_json::to_string_pretty(&got).unwrap() + "\n").unwrap();
        return;
    }
    let text = std::fs::read_to_string(&file).unwrap_or_else(|_| panic!("missing {}; bless first", file.display()));
    let want: Value = serde_json::from_str(&text).unwrap();
    let mut diffs = Vec::new();
    compare("", &got, &want, &mut diffs);
    assert!(diffs.is_empty(), "{name} drifted:\n{}", diffs.join("\n"));
}

macro_rules! goldens {
    ($($name:ident: [$($arg:expr),*];)*) => {$(
        #[test]
        fn $name() {
            golden(&stringify!($name).replace('_', "-"), &[$($arg),*]);
        }
    )*};
}

goldens! {
    field_info: ["field-info", "--d", "5"];
    factor: ["factor", "--d", "5", "--p", "11"];
    unit_image: ["unit-image", "--d", "5", "--p", "11", "--power", "2"];
    rohrlich: ["rohrlich", "--d", "5", "--X", "200"];
    gauss: ["gauss", "--d", "1", "--p", "7"];
    kloosterman: ["kloosterman", "--d", "1", "--p", "5", "--m", "2", "--y", "1"];
    identity_check: ["identity-check", "--d", "1", "--p", "7", "--m", "2"];
    hecke_enum: ["hecke-enum", "--d", "5", "--t-bound", "10"];
    hecke_count: ["hecke-count", "--d", "5", "--p", "11", "--n", "2"];
    x_eps: ["x-eps", "--d", "5", "--lo", "50", "--hi", "120"];
    cond1_density: ["cond1-density", "--d", "5", "--q-norm", "11", "--X", "20000"];
    canonical_gen: ["canonical-gen", "--d", "5", "--X", "100"];
    sunit_avg: ["sunit-avg", "--d", "5", "--p", "11"];
    gqstar: ["gqstar", "--d", "5", "--p", "11", "--v-max", "6"];
    dual_audit: ["dual-audit", "--d", "1", "--p", "11"];
    sadic_audit: ["sadic-audit", "--d", "5", "--q-norm", "11", "--v-max", "8"];
    bm_scan: ["bm-scan", "--d", "5", "--range", "3", "--step", "0.5"];
    mellin: ["mellin"];
    mellin_bump: ["mellin", "--profile", "bump", "--y", "1.2"];
    unfold_check: ["unfold-check", "--d", "5", "--q-norm", "11"];
    voronoi_delta: ["voronoi-delta", "--q", "5", "--n-max", "20000", "--ell", "4", "--y", "1", "--cap", "20000"];
    amp_demo: ["amp-demo", "--ell", "4", "--q-lo", "5", "--n-max", "20000", "--cap", "20000"];
    coda_demo: ["coda-demo", "--lo", "20", "--hi", "40", "--truncation", "200"];
}

#[test]
fn thread_count_does_not_change_output() {
    for args in [
        &["sadic-audit", "--d", "5", "--q-norm", "11", "--v-max", "8"][..],
        &["bm-scan", "--d", "5", "--range", "3", "--step", "0.5"][..],
        &["canonical-gen", "--d", "5", "--X", "300"][..],
    ] {
        let one = invoke(&[&["--threads", "1"], args].concat());
        let three = invoke(&[&["--threads", "3"], args].concat());
        assert_eq!(one.0, three.0);
        assert_eq!(one.1, three.1, "{args:?}");
    }
}

#[test]
fn jsonl_streams_header_then_rows() {
    let (code, out, _) = invoke(&["--format", "jsonl", "canonical-gen", "--d", "5", "--X", "100"]);
    let (_, full) = artifact(&["canonical-gen", "--d", "5", "--X", "100"]);
    assert_eq!(code, 0);
    let lines: Vec<Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let rows = full["rows"].as_array().unwrap();
    assert_eq!(lines.len(), rows.len() + 1);
    assert!(lines[0].get("rows").is_none());
    assert_eq!(lines[0]["verdict"], full["verdict"]);
    assert_eq!(&lines[1..], &rows[..]);
}

#[test]
fn csv_has_one_line_per_row() {
    let (code, out, _) = invoke(&["--format", "csv", "canonical-gen", "--d", "5", "--X", "100"]);
    let (_, full) = artifact(&["canonical-gen", "--d", "5", "--X", "100"]);
    assert_eq!(code, 0);
    let mut rd = csv::Reader::from_reader(out.as_bytes());
    assert_eq!(rd.records().count(), full["rows"].as_array().unwrap().len());
}

#[test]
fn out_file_receives_the_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("k.json");
    let (code, out, _) =
        invoke(&["--out", path.to_str().unwrap(), "kloosterman", "--d", "1", "--p", "5", "--m", "2", "--y", "1"]);
    assert_eq!(code, 0);
    assert!(out.starts_with("kloosterman PASS"), "{out}");
    let (_, direct) = artifact(&["kloosterman", "--d", "1", "--p", "5", "--m", "2", "--y", "1"]);
    let written: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(written, direct);
}

#[test]
fn embedded_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let (_, first) = artifact(&["unit-image", "--d", "5", "--p", "11", "--power", "2"]);
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, first["config"].as_str().unwrap()).unwrap();
    let (_, second) = artifact(&["--config", cfg.to_str().unwrap(), "unit-image"]);
    assert_eq!(first, second);
}

#[test]
fn worked_examples() {
    let (code, k) = artifact(&["kloosterman", "--d", "1", "--p", "5", "--m", "2", "--y", "1"]);
    assert_eq!(code, 0);
    assert!((k["result"]["value"][0].as_f64().unwrap() - 0.381_966_011_250_105).abs() < 1e-12);
    assert!(k["result"]["value"][1].as_f64().unwrap().abs() < 1e-12);

    let (code, id) = artifact(&["identity-check", "--d", "1", "--p", "7", "--m", "2"]);
    assert_eq!(code, 0);
    assert!(id["result"]["max_diff"].as_f64().unwrap() < 1e-9);

    let (code, c) = artifact(&["cond1-density", "--d", "5", "--q-norm", "11", "--X", "100000"]);
    assert_eq!(code, 0);
    assert!((c["result"]["density"].as_f64().unwrap() - 0.2).abs() < 3.0 * c["result"]["sigma"].as_f64().unwrap());
}

#[test]
fn bad_input_exits_two_without_output() {
    let (code, out, err) = invoke(&["gauss", "--d", "5", "--q-norm", "6"]);
    assert_eq!((code, out.as_str()), (2, ""));
    assert!(err.contains("no prime ideal of norm 6"), "{err}");
}
