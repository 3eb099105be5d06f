use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn sbmtc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sbmtc")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = sbmtc(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

/// Top-level keys listed as required by a schema and the common header.
fn assert_conforms(doc: &Value, schema: &str) {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas");
    for name in ["common.schema.json", schema] {
        let s = read_json(&dir.join(name));
        for key in s["required"].as_array().unwrap() {
            assert!(doc.get(key.as_str().unwrap()).is_some(), "{schema}: missing {key}");
        }
        if let Some(c) = s["properties"]["schema"].get("const") {
            assert_eq!(&doc["schema"], c);
        }
    }
    assert_eq!(doc["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn generate_infer_ppc_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_owned();
    ok(&[
        "generate",
        "pp",
        "--n",
        "120",
        "--b",
        "2",
        "--mean-degree",
        "4",
        "--c",
        "0.9",
        "--seed",
        "1",
        "--out",
        &p("pp"),
    ]);
    let pp = read_json(&dir.path().join("pp.json"));
    assert_conforms(&pp, "provenance.schema.json");
    assert_eq!(pp["partition"].as_array().unwrap().len(), 120);

    ok(&[
        "generate",
        "closure",
        "--in",
        &p("pp.el"),
        "--p",
        "0.8",
        "--generations",
        "1",
        "--seed",
        "2",
        "--out",
        &p("cl"),
    ]);
    let cl = read_json(&dir.path().join("cl.json"));
    assert_conforms(&cl, "provenance.schema.json");
    let prov = cl["provenance"].as_array().unwrap();
    assert_eq!(prov.len() as u64, cl["edges"].as_u64().unwrap());
    assert!(prov.iter().any(|e| e["seminal"] == false));

    let infer = |out: &str| {
        ok(&[
            "infer",
            "sbmtc",
            "--in",
            &p("cl.el"),
            "--sweeps",
            "60",
            "--burn-in",
            "20",
            "--thin",
            "4",
            "--chains",
            "2",
            "--seed",
            "5",
            "--out",
            &p(out),
        ]);
        read_json(&dir.path().join(out))
    };
    let a = infer("a.json");
    assert_conforms(&a, "summary.schema.json");
    assert_eq!(a["seeds"], serde_json::json!([5, 6]));
    assert_eq!(a["summary"]["samples"], 20);
    let b = infer("b.json");
    let strip = |mut v: Value| {
        v.as_object_mut().unwrap().remove("invocation");
        v
    };
    assert_eq!(strip(a), strip(b));

    let ppc = ok(&["ppc", "--summary", &p("a.json"), "--draws", "10", "--seed", "3"]);
    let ppc: Value = serde_json::from_slice(&ppc.stdout).unwrap();
    assert_conforms(&ppc, "ppc.schema.json");
    assert_eq!(ppc["predictive_clustering"].as_array().unwrap().len(), 10);
}

#[test]
fn predict_record_count() {
    let dir = tempfile::tempdir().unwrap();
    let el = dir.path().join("g.el");
    ok(&[
        "generate",
        "geometric",
        "--n",
        "80",
        "--mean-degree",
        "3",
        "--seed",
        "4",
        "--out",
        dir.path().join("g").to_str().unwrap(),
    ]);
    let out = ok(&[
        "predict",
        "--in",
        el.to_str().unwrap(),
        "--f",
        "0.1",
        "--replicates",
        "3",
        "--prior",
        "sbm",
        "--sweeps",
        "30",
        "--burn-in",
        "10",
        "--thin",
        "2",
    ]);
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_conforms(&doc, "predict.schema.json");
    assert_eq!(doc["records"].as_array().unwrap().len(), 3);
}

#[test]
fn exit_codes() {
    assert_eq!(sbmtc(&["generate", "closure", "--p", "0.5", "--out", "x"]).status.code(), Some(2));
    assert_eq!(sbmtc(&["predict", "--in", "g.el", "--f", "0"]).status.code(), Some(2));
    assert_eq!(sbmtc(&["infer", "sbm", "--in", "/nonexistent/graph.el"]).status.code(), Some(3));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.el");
    std::fs::write(&bad, "0 1\n2 2\n").unwrap();
    assert_eq!(sbmtc(&["infer", "sbm", "--in", bad.to_str().unwrap()]).status.code(), Some(3));
    let out = dir.path().join("pp");
    let uneven =
        ["generate", "pp", "--n", "10", "--b", "3", "--mean-degree", "4", "--c", "0.5", "--out", out.to_str().unwrap()];
    assert_eq!(sbmtc(&uneven).status.code(), Some(4));
}
