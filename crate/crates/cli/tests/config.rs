use std::fs;
use std::path::Path;

use actnorm_cli::{CliError, ExperimentConfig, ExperimentKind};

fn expected_field(text: &str) -> &str {
    text.lines()
        .next()
        .and_then(|l| l.strip_prefix("# field: "))
        .expect("corpus files start with `# field: <name>`")
}

#[test]
fn malformed_corpus_is_rejected_naming_the_field() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/invalid");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        let field = expected_field(&text);
        let err = ExperimentConfig::from_toml(&text).expect_err(&format!("{} was accepted", path.display()));
        assert_eq!(err.exit_code(), 2, "{}", path.display());
        match &err {
            CliError::Config { field: got, .. } => assert_eq!(got, field, "{}", path.display()),
            other => assert!(other.to_string().contains(field), "{}: {other}", path.display()),
        }
        seen += 1;
    }
    assert!(seen >= 20);
}

#[test]
fn files_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    for kind in [ExperimentKind::Table, ExperimentKind::DepthSweep, ExperimentKind::Spectra] {
        let mut cfg = ExperimentConfig::preset(kind);
        cfg.width = 32;
        cfg.dataset.separation = 0.75;
        let path = tmp.path().join(format!("{}.toml", kind.as_str()));
        fs::write(&path, cfg.to_toml()).unwrap();
        let back = ExperimentConfig::load(&path).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }
}

#[test]
fn missing_file_is_a_filesystem_error() {
    let err = ExperimentConfig::load(Path::new("/nonexistent/actnorm.toml")).unwrap_err();
    assert_eq!(err.exit_code(), 4);
}
