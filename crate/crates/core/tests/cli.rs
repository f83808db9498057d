use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cellfacet"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn cellfacet")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cellfacet-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn two_cells() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("data/two_cells.json")
        .display()
        .to_string()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(
        run(&["contacts", &two_cells(), "--radius=-1"])
            .status
            .code(),
        Some(1)
    );
    let help = run(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    for sub in [
        "gen-data",
        "inspect-mesh",
        "contacts",
        "train",
        "rollout",
        "eval",
        "gradcheck",
    ] {
        assert!(stdout(&help).contains(sub), "{sub} missing from help");
    }
}

#[test]
fn data_errors_exit_two() {
    let dir = scratch("bad");
    let bad = dir.join("bad.json");
    std::fs::write(
        &bad,
        r#"{"cell_type":"hex","vertices":[],"node_type":[],"body_id":[]}"#,
    )
    .unwrap();
    let o = run(&["inspect-mesh", p(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cells"));
    assert_eq!(
        run(&["inspect-mesh", p(&dir.join("missing.json"))])
            .status
            .code(),
        Some(2)
    );
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn inspect_and_contacts_on_two_cells() {
    let o = run(&["inspect-mesh", &two_cells()]);
    assert!(o.status.success());
    let text = stdout(&o);
    for line in ["vertices 16", "cells 2", "facets 12", "boundary_facets 12"] {
        assert!(text.contains(line), "{text}");
    }
    let o = run(&["contacts", &two_cells(), "--radius", "0.1"]);
    assert!(o.status.success());
    let lines: Vec<String> = stdout(&o).lines().map(String::from).collect();
    assert_eq!(lines[0], "f_s,f_r,distance");
    assert_eq!(lines.len(), 3);
}

#[test]
fn gradcheck_passes_on_two_cells() {
    let o = run(&["gradcheck", "--mesh", &two_cells()]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(stdout(&o).contains("max relative gradient error"));
    // An impossible tolerance turns the same check into a numeric failure.
    let o = run(&["gradcheck", "--mesh", &two_cells(), "--tolerance", "1e-30"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn generate_train_rollout_eval() {
    let dir = scratch("pipeline");
    let data = dir.join("data");
    let small = dir.join("oracle.json");
    std::fs::write(
        &small,
        r#"{"beam_cells":[6,1,1],"support_cells":[1,1,1],"press_cells":[1,1,1]}"#,
    )
    .unwrap();
    let gen = |out: &Path| {
        run(&[
            "gen-data",
            "--out",
            p(out),
            "--config",
            p(&small),
            "--train",
            "2",
            "--test",
            "1",
            "--frames",
            "8",
            "--seed",
            "3",
        ])
    };
    assert!(gen(&data).status.success());
    let again = dir.join("again");
    assert!(gen(&again).status.success());
    for f in [
        "manifest.json",
        "train_000.json",
        "train_001.json",
        "test_000.json",
        "beam.json",
    ] {
        assert_eq!(
            std::fs::read(data.join(f)).unwrap(),
            std::fs::read(again.join(f)).unwrap(),
            "{f}"
        );
    }
    let o = run(&["inspect-mesh", p(&data.join("beam.json"))]);
    assert!(stdout(&o).contains("vertices"));

    let manifest = data.join("manifest.json");
    let model = dir.join("model.json");
    std::fs::write(&model, r#"{"latent":8,"layers":1,"hidden":[8]}"#).unwrap();
    let train = |out: &Path| {
        run(&[
            "train",
            "--data",
            p(&manifest),
            "--out",
            p(out),
            "--model-config",
            p(&model),
            "--steps",
            "6",
            "--checkpoint-every",
            "3",
            "--noise-std",
            "1e-4",
            "--seed",
            "5",
        ])
    };
    let (ta, tb) = (dir.join("ta"), dir.join("tb"));
    let o = train(&ta);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(train(&tb).status.success());
    let curve = std::fs::read_to_string(ta.join("losses.csv")).unwrap();
    assert!(curve.starts_with("step,loss,lr\n"));
    assert_eq!(curve.lines().count(), 7);
    assert_eq!(
        curve,
        std::fs::read_to_string(tb.join("losses.csv")).unwrap()
    );
    assert!(ta.join("checkpoint_3.bin").exists());
    let ckpt = ta.join("checkpoint.bin");
    assert_eq!(
        std::fs::read(&ckpt).unwrap(),
        std::fs::read(tb.join("checkpoint.bin")).unwrap()
    );

    let pred = dir.join("pred.json");
    let o = run(&[
        "rollout",
        "--checkpoint",
        p(&ckpt),
        "--trajectory",
        p(&data.join("test_000.json")),
        "--out",
        p(&pred),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(&["inspect-mesh", p(&pred)]);
    assert!(stdout(&o).contains("frames 8"));

    let (json, csv) = (dir.join("report.json"), dir.join("errors.csv"));
    let o = run(&[
        "eval",
        "--checkpoint",
        p(&ckpt),
        "--data",
        p(&manifest),
        "--json",
        p(&json),
        "--csv",
        p(&csv),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("persistence position"));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(&json).unwrap()).unwrap();
    assert!(report["model"]["error_full"]["position"].as_f64().unwrap() >= 0.0);
    let table = std::fs::read_to_string(&csv).unwrap();
    assert!(table.starts_with("trajectory,frame,quantity,rmse\n"));
    // 7 steps for each of two quantities.
    assert_eq!(table.lines().count(), 1 + 14);
    let _ = std::fs::remove_dir_all(&dir);
}
