use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_actnorm");

fn run(args: &[&str], root: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .env("ACTNORM_OUTPUT_ROOT", root)
        .output()
        .expect("binary runs")
}

fn files_under(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "metadata.json" {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

const SMALL_NET: &[&str] = &[
    "--width", "16", "--epochs", "2", "--train-samples", "200", "--test-samples", "100", "--input-dim", "16",
    "--batch-size", "32",
];

fn commands() -> Vec<Vec<&'static str>> {
    let with = |head: &[&'static str]| [head, SMALL_NET].concat();
    vec![
        vec!["table"],
        vec!["normalize", "relu", "gelu"],
        vec!["mp-check", "--matrix-size", "64"],
        with(&["train", "--activation", "tanh", "--depths", "3", "--seeds", "0,1"]),
        with(&["depth-sweep", "--activation", "relu", "--depths", "2,3", "--seeds", "0,1,2"]),
        with(&["spectra", "--activation", "tilted_relu", "--depths", "3", "--seeds", "0,1", "--spectra-epochs", "0,2"]),
    ]
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for args in commands() {
        for root in [a.path(), b.path()] {
            let out = run(&args, root);
            assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        }
    }
    let fa = files_under(a.path());
    let fb = files_under(b.path());
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    for (k, v) in &fa {
        assert!(v == &fb[k], "{} differs between runs", k.display());
    }
    assert!(fs::read_dir(a.path()).unwrap().count() == commands().len());
}

#[test]
fn run_directory_layout() {
    let root = tempfile::tempdir().unwrap();
    let out = run(&["mp-check", "--matrix-size", "32"], root.path());
    assert!(out.status.success());
    let dirs: Vec<_> = fs::read_dir(root.path()).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(dirs.len(), 1);
    let name = dirs[0].file_name().unwrap().to_string_lossy().into_owned();
    assert!(name.starts_with("mp-check-") && name.len() == "mp-check-".len() + 16, "{name}");
    for f in ["config.toml", "metadata.json", "summary.json", "density.csv", "wishart_spectrum.csv"] {
        assert!(dirs[0].join(f).is_file(), "missing {f}");
    }
}

#[test]
fn output_dir_flag_beats_environment() {
    let env_root = tempfile::tempdir().unwrap();
    let flag_root = tempfile::tempdir().unwrap();
    let out = run(&["table", "--output-dir", flag_root.path().to_str().unwrap()], env_root.path());
    assert!(out.status.success());
    assert_eq!(fs::read_dir(env_root.path()).unwrap().count(), 0);
    assert_eq!(fs::read_dir(flag_root.path()).unwrap().count(), 1);
}

#[test]
fn unknown_activation_exits_with_validation_code() {
    let root = tempfile::tempdir().unwrap();
    let out = run(&["normalize", "softsign"], root.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("activations[0]") && err.contains("softsign"), "{err}");
}

#[test]
fn config_kind_must_match_command() {
    let root = tempfile::tempdir().unwrap();
    let cfg = root.path().join("c.toml");
    fs::write(&cfg, "kind = \"table\"\n").unwrap();
    let out = run(&["mp-check", "--config", cfg.to_str().unwrap()], root.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`kind`"));
}

#[test]
fn flags_override_config_file() {
    let root = tempfile::tempdir().unwrap();
    let cfg = root.path().join("c.toml");
    fs::write(&cfg, "kind = \"mp-check\"\nmatrix_size = 4096\n").unwrap();
    let out = run(&["mp-check", "--config", cfg.to_str().unwrap(), "--matrix-size", "16"], root.path());
    assert!(out.status.success());
    let run_dir = fs::read_dir(root.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.is_dir())
        .unwrap();
    let written = fs::read_to_string(run_dir.join("config.toml")).unwrap();
    assert!(written.contains("matrix_size = 16"), "{written}");
}

#[test]
fn truncated_cifar_reports_byte_offset() {
    let root = tempfile::tempdir().unwrap();
    let data = root.path().join("cifar");
    fs::create_dir(&data).unwrap();
    let mut bytes = vec![0u8; 2 * 3073 + 100];
    bytes[3073] = 7;
    fs::write(data.join("data_batch_1.bin"), bytes).unwrap();
    let out = run(
        &["train", "--dataset", "cifar10-binary", "--data-path", data.to_str().unwrap(), "--epochs", "1"],
        root.path(),
    );
    assert_eq!(out.status.code(), Some(5));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("byte offset 6146"), "{err}");
}

#[test]
fn bad_cifar_label_reports_record_offset() {
    let root = tempfile::tempdir().unwrap();
    let data = root.path().join("cifar");
    fs::create_dir(&data).unwrap();
    let mut bytes = vec![0u8; 3 * 3073];
    bytes[2 * 3073] = 12;
    fs::write(data.join("data_batch_1.bin"), bytes).unwrap();
    let out = run(
        &["train", "--dataset", "cifar10-binary", "--data-path", data.to_str().unwrap(), "--epochs", "1"],
        root.path(),
    );
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stderr).contains("byte offset 6146"));
}

#[test]
fn missing_cifar_directory_is_a_filesystem_error() {
    let root = tempfile::tempdir().unwrap();
    let out = run(
        &["train", "--dataset", "cifar10-binary", "--data-path", "/nonexistent/cifar", "--epochs", "1"],
        root.path(),
    );
    assert_eq!(out.status.code(), Some(4));
}
