use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
n_graphs = 60
nodes_lo = 6
nodes_hi = 10
anom_frac = 0.3
trials = 2
epochs = 3
hidden = 8
k = 16
pool_size = 4
head_steps = 40
"#;

fn denoise(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_denoise")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstdout {}\nstderr {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn tiny_config(dir: &Path, extra: &str) -> String {
    let p = dir.join("cfg.toml");
    fs::write(&p, format!("{TINY}{extra}")).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn synth_then_parse() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), "");
    let data = dir.path().join("SYNTH");
    ok(&denoise(&["synth", "--config", &cfg, "--out", path(&data)]));
    let out = denoise(&["parse", "--dataset", path(&data)]);
    ok(&out);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("graphs       60"), "{text}");
    assert!(text.contains("anomalies    18"), "{text}");
}

#[test]
fn train_score_and_dump_from_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), "");
    let out_dir = dir.path().join("model");
    ok(&denoise(&["train", "--config", &cfg, "--seed", "5", "--out", path(&out_dir)]));
    for f in ["checkpoint.txt", "history.csv", "split.csv", "scores_test.csv", "scores_val.csv"] {
        assert!(out_dir.join(f).exists(), "missing {f}");
    }

    let score_dir = dir.path().join("scores");
    let ck = out_dir.join("checkpoint.txt");
    ok(&denoise(&["score", "--config", &cfg, "--checkpoint", path(&ck), "--out", path(&score_dir)]));
    let scores = fs::read_to_string(score_dir.join("scores.csv")).unwrap();
    assert_eq!(scores.lines().count(), 61);
    assert_eq!(scores.lines().next(), Some("graph_id,label,score,z0,z1,z2,z3"));

    // scoring is deterministic and agrees with the scores written at training time
    let test = fs::read_to_string(out_dir.join("scores_test.csv")).unwrap();
    for line in test.lines().skip(1) {
        let id = line.split(',').next().unwrap();
        let row = scores.lines().find(|l| l.split(',').next() == Some(id)).unwrap();
        assert_eq!(row, line);
    }

    let emb_dir = dir.path().join("emb");
    ok(&denoise(&[
        "dump-embeddings",
        "--config",
        &cfg,
        "--seed",
        "5",
        "--checkpoint",
        path(&ck),
        "--out",
        path(&emb_dir),
    ]));
    let emb = fs::read_to_string(emb_dir.join("embeddings.csv")).unwrap();
    assert_eq!(emb.lines().count(), 61);
    assert_eq!(emb.lines().next().unwrap().split(',').count(), 8 + 3);
    let split = fs::read_to_string(out_dir.join("split.csv")).unwrap();
    for (e, s) in emb.lines().zip(split.lines()).skip(1) {
        let e: Vec<&str> = e.split(',').take(3).collect();
        let s: Vec<&str> = s.split(',').take(3).collect();
        assert_eq!(e, s);
    }
}

#[test]
fn run_with_the_same_seed_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), "");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&denoise(&["run", "--config", &cfg, "--seed", "7", "--out", path(&a)]));
    ok(&denoise(&["run", "--config", &cfg, "--seed", "7", "--out", path(&b)]));
    let mut compared = 0;
    for entry in fs::read_dir(&a).unwrap() {
        let name = entry.unwrap().file_name();
        let name = name.to_str().unwrap();
        if name.contains("history") {
            continue;
        }
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
        compared += 1;
    }
    // report, trials and per trial split plus two score files
    assert_eq!(compared, 2 + 2 * 3);
    let report = fs::read_to_string(a.join("report.toml")).unwrap();
    assert!(report.contains("master_seed = 7"));
}

#[test]
fn sweep_writes_one_row_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), "[grid]\nk = [8, 16]\nbeta2 = [0.05, 0.1]\n");
    let out = dir.path().join("sweep");
    ok(&denoise(&["sweep", "--config", &cfg, "--out", path(&out)]));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert_eq!(csv.lines().next(), Some("k,beta2,mean_auc,std_auc"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = tiny_config(dir.path(), "epochz = 3\n");
    let out = denoise(&["run", "--config", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epochz"));

    let cfg = tiny_config(dir.path(), "");
    let out = denoise(&["run", "--config", &cfg, "--beta", "1.5"]);
    assert_eq!(out.status.code(), Some(2));

    let cfg = tiny_config(dir.path(), "");
    let out = denoise(&["sweep", "--config", &cfg, "--out", path(&dir.path().join("s"))]);
    assert_eq!(out.status.code(), Some(2));

    let missing = dir.path().join("nowhere");
    let out = denoise(&["parse", "--dataset", path(&missing)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere_A.txt"));

    // the tiny pool cannot supply round(0.9 * train normals) anomalies
    let out = denoise(&["run", "--config", &cfg, "--beta", "0.9", "--out", path(&dir.path().join("r"))]);
    assert_eq!(out.status.code(), Some(3));

    let out = denoise(&["run", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
}
