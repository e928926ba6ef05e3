use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use pfformer::cli::{run, MANIFEST};

const TINY: &[&str] = &[
    "model.d_model=8",
    "model.n_heads=2",
    "model.n_enc_layers=1",
    "model.ffn_width=8",
    "model.t=24",
    "model.h=8",
    "efe.s=4",
    "aee.hidden=4",
    "aee.layers=1",
    "train.max_epochs=2",
    "train.batch_size=16",
    "train.s_short=4",
    "train.lr=0.005",
    "data.stride=8",
    "eval.short_steps=4",
    "eval.issue_every=8",
    "seed=5",
];

fn argv(parts: &[&str]) -> Vec<String> {
    std::iter::once("pfformer").chain(parts.iter().copied()).map(String::from).collect()
}

fn p(path: &Path) -> String {
    path.display().to_string()
}

fn synth(dir: &Path) -> (PathBuf, PathBuf) {
    let out = dir.join("data");
    let code = run(argv(&["gen-synth", "--length", "1500", "--peak-rate", "0.01", "--seed", "4", "--out", &p(&out)]));
    assert_eq!(code, 0);
    (out.join("target.csv"), out.join("aux_1.csv"))
}

fn train_argv(target: &Path, aux: &Path, out: &Path) -> Vec<String> {
    let mut a = vec!["train".to_string(), "--target".into(), p(target), "--aux".into(), p(aux)];
    for kv in TINY {
        a.push("--set".into());
        a.push(kv.to_string());
    }
    a.push("--out".into());
    a.push(p(out));
    std::iter::once("pfformer".to_string()).chain(a).collect()
}

/// History without its wall-clock column.
fn history_losses(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once('\t').unwrap().0.to_string() + "\n")
        .collect()
}

#[test]
fn gen_synth_train_evaluate_predict() {
    let dir = tempfile::tempdir().unwrap();
    let (target, aux) = synth(dir.path());
    let out = dir.path().join("run");
    assert_eq!(run(train_argv(&target, &aux, &out)), 0);
    for f in ["model.ckpt", "history.tsv", "report.txt", "issuances.tsv", "config.txt", MANIFEST] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let history = fs::read_to_string(out.join("history.tsv")).unwrap();
    assert_eq!(history.lines().count(), 3);

    let ckpt = p(&out.join("model.ckpt"));
    let eval_out = dir.path().join("eval");
    let code = run(argv(&[
        "evaluate", "--checkpoint", &ckpt, "--target", &p(&target), "--aux", &p(&aux), "--out", &p(&eval_out),
    ]));
    assert_eq!(code, 0);
    let report = fs::read_to_string(eval_out.join("report.txt")).unwrap();
    assert!(report.starts_with("rmse_3d = "));
    assert!(report.contains("aggregation = pooled_rolling"));
    // evaluating the saved checkpoint reproduces the report written by train
    assert_eq!(report, fs::read_to_string(out.join("report.txt")).unwrap());

    let single = dir.path().join("single");
    let code = run(argv(&[
        "evaluate", "--checkpoint", &ckpt, "--target", &p(&target), "--aux", &p(&aux), "--single-shot", "--out", &p(&single),
    ]));
    assert_eq!(code, 0);
    assert!(fs::read_to_string(single.join("report.txt")).unwrap().contains("pooled_single_shot"));

    let pred = dir.path().join("pred");
    let code = run(argv(&["predict", "--checkpoint", &ckpt, "--target", &p(&target), "--aux", &p(&aux), "--out", &p(&pred)]));
    assert_eq!(code, 0);
    let forecast = fs::read_to_string(pred.join("forecast.csv")).unwrap();
    assert_eq!(forecast.lines().count(), 1 + 8);
}

#[test]
fn stats_fit_gmm_and_sweep_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (target, aux) = synth(dir.path());
    let out = dir.path().join("stats");
    assert_eq!(run(argv(&["stats", &p(&target), "--out", &p(&out)])), 0);
    let stats = fs::read_to_string(out.join("stats.txt")).unwrap();
    let names: Vec<&str> = stats.lines().map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(names, ["min", "max", "mean", "std. deviation", "skewness", "kurtosis"]);

    let out = dir.path().join("gmm");
    assert_eq!(run(argv(&["fit-gmm", &p(&target), "--set", "sampler.components=2", "--out", &p(&out)])), 0);
    let gmm = fs::read_to_string(out.join("gmm.txt")).unwrap();
    assert!(gmm.contains("components\t2") && gmm.contains("threshold\t"));

    let out = dir.path().join("sweep");
    let mut a = train_argv(&target, &aux, &out);
    a[1] = "sweep".into();
    a.extend(["--axis", "alpha", "--values", "1.5,2.0"].map(String::from));
    assert_eq!(run(a), 0);
    let table = fs::read_to_string(out.join("sweep.tsv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "x\trmse_3d\trmse_4h");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("1.5\t") && lines[2].starts_with("2.0\t"));
}

#[test]
fn manifest_rerun_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (target, aux) = synth(dir.path());
    let first = dir.path().join("first");
    assert_eq!(run(train_argv(&target, &aux, &first)), 0);
    let manifest = fs::read_to_string(first.join(MANIFEST)).unwrap();
    assert!(manifest.contains("\"seed\": 5"));
    assert!(manifest.contains("\"model.d_model\": \"8\""));
    assert!(manifest.contains("\"pfformer\""));

    let second = dir.path().join("second");
    assert_eq!(run(argv(&["rerun", &p(&first.join(MANIFEST)), "--out", &p(&second)])), 0);
    for f in ["model.ckpt", "report.txt", "issuances.tsv", "config.txt"] {
        assert_eq!(fs::read(first.join(f)).unwrap(), fs::read(second.join(f)).unwrap(), "{f} differs");
    }
    assert_eq!(history_losses(&first.join("history.tsv")), history_losses(&second.join("history.tsv")));

    let data_manifest = dir.path().join("data").join(MANIFEST);
    let regen = dir.path().join("regen");
    assert_eq!(run(argv(&["rerun", &p(&data_manifest), "--out", &p(&regen)])), 0);
    for f in ["target.csv", "aux_1.csv"] {
        assert_eq!(fs::read(dir.path().join("data").join(f)).unwrap(), fs::read(regen.join(f)).unwrap());
    }
}

#[test]
fn exit_codes_from_the_binary() {
    let bin = env!("CARGO_BIN_EXE_pfformer");
    let dir = tempfile::tempdir().unwrap();
    let (target, aux) = synth(dir.path());
    let out = dir.path().join("run");
    assert_eq!(run(train_argv(&target, &aux, &out)), 0);

    let ckpt = out.join("model.ckpt");
    let mut bytes = fs::read(&ckpt).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    let bad = dir.path().join("bad.ckpt");
    fs::write(&bad, bytes).unwrap();
    let status = Command::new(bin)
        .args(["predict", "--checkpoint", &p(&bad), "--target", &p(&target), "--aux", &p(&aux), "--out", &p(&dir.path().join("x"))])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&status.stderr).contains("checkpoint"));

    let status = Command::new(bin)
        .args(["train", "--target", &p(&target), "--set", "model.width=3", "--out", &p(&dir.path().join("y"))])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&status.stderr);
    assert!(stderr.contains("model.width") && stderr.contains("model.d_model"), "{stderr}");

    let status = Command::new(bin).args(["train", "--bogus"]).output().unwrap();
    assert_eq!(status.status.code(), Some(1));

    let status = Command::new(bin)
        .args(["stats", &p(&dir.path().join("missing.csv")), "--out", &p(&dir.path().join("z"))])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));

    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "train.alpha = 1.5\nnot a line\n").unwrap();
    let status = Command::new(bin)
        .args(["fit-gmm", &p(&target), "--config", &p(&cfg), "--out", &p(&dir.path().join("w"))])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(1));
}

#[test]
fn divergence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let (target, aux) = synth(dir.path());
    let mut a = train_argv(&target, &aux, &dir.path().join("run"));
    a.extend(["--set", "train.lr=1e200"].map(String::from));
    assert_eq!(run(a), 3);
}
