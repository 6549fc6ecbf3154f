//! `check` output for every corpus model must match its golden file byte for
//! byte. Set `UPDATE_GOLDEN=1` to rewrite them.

use std::path::PathBuf;

fn corpus() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

#[test]
fn check_output_matches_golden_files() {
    let mut models: Vec<PathBuf> = std::fs::read_dir(corpus())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "scl"))
        .collect();
    models.sort();
    assert!(!models.is_empty());
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    for m in models {
        let mut out = Vec::new();
        let mut err = Vec::new();
        seccloud::cli::run_with_args(["seccloud", "check", m.to_str().unwrap()], &mut out, &mut err);
        let golden = m.with_extension("golden");
        if update {
            std::fs::write(&golden, &out).unwrap();
            continue;
        }
        let expected = std::fs::read(&golden).unwrap_or_else(|_| panic!("missing {}", golden.display()));
        assert!(
            out == expected,
            "{} differs from its golden file:\n{}",
            m.display(),
            String::from_utf8_lossy(&out)
        );
    }
}
