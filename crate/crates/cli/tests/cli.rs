use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use amn_srl::corpus::parse_conll;
use amn_srl::model::SrlModel;
use amn_srl::retrieval::NeighborIndex;

const SMALL: &str = "\
d_re=8
d_pe=0
d_pos=4
d_le=4
d_pred=2
d_ae=4
m=2
d_e=8
d_a=8
max_epochs=2
batch_size=8
";

fn amn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_amn-srl"))
        .current_dir(dir)
        .env_remove("AMN_SRL_CONFIG")
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = amn(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn corpora(dir: &Path) {
    ok(dir, &["gen-synthetic", "--sentences", "40", "--seed", "1", "--out", "train.conll"]);
    ok(dir, &["gen-synthetic", "--sentences", "10", "--seed", "2", "--out", "dev.conll"]);
    fs::write(dir.join("small.cfg"), SMALL).unwrap();
}

fn manifest_hash(manifest: &Path, artifact: &str) -> String {
    fs::read_to_string(manifest)
        .unwrap()
        .lines()
        .find_map(|l| l.strip_prefix(&format!("artifact\t{artifact}\t")).map(str::to_owned))
        .unwrap()
}

fn sha256(path: &Path) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(fs::read(path).unwrap()))
}

#[test]
fn synthetic_corpus_is_reproducible_and_parses() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen-synthetic", "--sentences", "200", "--roles", "5", "--seed", "7", "--out", "a.conll"]);
    ok(d, &["gen-synthetic", "--sentences", "200", "--roles", "5", "--seed", "7", "--out", "b.conll"]);
    let a = fs::read_to_string(d.join("a.conll")).unwrap();
    assert_eq!(a, fs::read_to_string(d.join("b.conll")).unwrap());
    assert_eq!(parse_conll(&a).unwrap().len(), 200);
    let manifest = d.join("a.conll.manifest.txt");
    assert_eq!(manifest_hash(&manifest, "a.conll"), sha256(&d.join("a.conll")));
}

#[test]
fn index_is_reloadable() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    corpora(d);
    ok(
        d,
        &["index", "--method", "ed", "--m", "4", "--train", "train.conll", "--query", "dev.conll", "--out", "idx.txt"],
    );
    let index = NeighborIndex::parse(&fs::read_to_string(d.join("idx.txt")).unwrap()).unwrap();
    assert_eq!(index.m, 4);
    assert!(!index.is_empty());
    assert!(index.entries().iter().all(|(_, n)| n.len() == 4));
    let manifest = fs::read_to_string(d.join("idx.txt.manifest.txt")).unwrap();
    assert!(manifest.contains("input\ttrain\ttrain.conll\t"));
    assert!(manifest.contains("method=ed"));
}

#[test]
fn train_eval_and_dump_attention() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    corpora(d);
    ok(d, &["--config", "small.cfg", "train", "--train", "train.conll", "--dev", "dev.conll", "--out", "run"]);
    for f in ["model.ckpt", "report.txt", "config.txt", "train.index", "dev.index", "manifest.txt"] {
        assert!(d.join("run").join(f).exists(), "missing {f}");
    }
    assert_eq!(manifest_hash(&d.join("run/manifest.txt"), "model.ckpt"), sha256(&d.join("run/model.ckpt")));
    let model = SrlModel::from_checkpoint(&fs::read_to_string(d.join("run/model.ckpt")).unwrap()).unwrap();
    assert_eq!(model.config.hyper.d_e, 8);

    let eval = |out: &str, extra: &[&str]| {
        let mut args = vec![
            "--config", "small.cfg", "eval", "--checkpoint", "run/model.ckpt", "--data", "dev.conll", "--train",
            "train.conll", "--out", out,
        ];
        args.extend_from_slice(extra);
        ok(d, &args);
        fs::read_to_string(d.join(out).join("scores.txt")).unwrap()
    };
    let built = eval("ev1", &[]);
    let reused = eval("ev2", &["--index", "run/dev.index"]);
    assert_eq!(built, reused);
    let predicted = fs::read_to_string(d.join("ev1/predictions.conll")).unwrap();
    assert_eq!(parse_conll(&predicted).unwrap().len(), 10);

    ok(
        d,
        &[
            "--config", "small.cfg", "dump-attention", "--checkpoint", "run/model.ckpt",
            "--data", "dev.conll", "--train", "train.conll", "--instance", "1#2", "--cell", "2", "--out", "dump",
        ],
    );
    let pgm = fs::read_to_string(d.join("dump/alpha_1.pgm")).unwrap();
    assert!(pgm.starts_with("P2\n"));
    let csv = fs::read_to_string(d.join("dump/alpha_2.csv")).unwrap();
    assert!(csv.starts_with("token,"));
    let text = fs::read_to_string(d.join("dump/attention.txt")).unwrap();
    assert!(text.contains("instance\t1#2") && text.contains("[memory 2]"));

    ok(
        d,
        &["confusion", "--checkpoint", "run/model.ckpt", "--data", "dev.conll", "--train", "train.conll", "--out", "cf"],
    );
    assert!(fs::read_to_string(d.join("cf/confusion.tsv")).unwrap().starts_with("gold\\pred"));
}

#[test]
fn config_path_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    corpora(d);
    let out = Command::new(env!("CARGO_BIN_EXE_amn-srl"))
        .current_dir(d)
        .env("AMN_SRL_CONFIG", "small.cfg")
        .args(["--set", "merge=none", "train", "--train", "train.conll", "--dev", "dev.conll", "--out", "run"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let config = fs::read_to_string(d.join("run/config.txt")).unwrap();
    assert!(config.contains("d_e=8\n") && config.contains("merge=none\n"));
    assert!(!d.join("run/train.index").exists());
}

#[test]
fn exit_codes_separate_usage_data_and_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    corpora(d);
    let code = |args: &[&str]| amn(d, args).status.code().unwrap();
    assert_eq!(code(&["train", "--bogus"]), 1);
    assert_eq!(code(&["frobnicate"]), 1);
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["prepare", "--train", "missing.conll", "--out", "p"]), 2);
    fs::write(d.join("bad.conll"), "1\tonly\tthree\n").unwrap();
    assert_eq!(code(&["prepare", "--train", "bad.conll", "--out", "p"]), 2);
    assert_eq!(code(&["--set", "d_e=abc", "prepare", "--train", "train.conll", "--out", "p"]), 1);
    assert_eq!(code(&["--set", "no_such_key=1", "prepare", "--train", "train.conll", "--out", "p"]), 1);
    fs::write(d.join("broken.cfg"), "d_e\n").unwrap();
    assert_eq!(code(&["--config", "broken.cfg", "prepare", "--train", "train.conll", "--out", "p"]), 1);
    assert_eq!(code(&["prepare", "--train", "train.conll", "--out", "p"]), 0);
    for f in ["word.vocab", "role.vocab", "stats.txt", "manifest.txt"] {
        assert!(d.join("p").join(f).exists());
    }
}
