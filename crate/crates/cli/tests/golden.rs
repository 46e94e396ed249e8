mod common;

/// Set `HETOP_UPDATE_GOLDEN=1` to rewrite the committed files.
#[test]
fn pipeline_matches_golden_files() {
    let dir = tempfile::tempdir().unwrap();
    if std::env::var_os("HETOP_UPDATE_GOLDEN").is_some() {
        let names = common::run_pipeline(dir.path()).unwrap();
        let golden = common::golden_dir();
        let _ = std::fs::remove_dir_all(&golden);
        std::fs::create_dir_all(&golden).unwrap();
        for n in names {
            std::fs::copy(dir.path().join(&n), golden.join(&n)).unwrap();
        }
        return;
    }
    let bad = common::golden_mismatches(dir.path()).unwrap();
    assert!(bad.is_empty(), "differs from golden: {bad:?}");
}

#[test]
fn replay_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let names = common::run_pipeline(dir.path()).unwrap();
    let before: Vec<Vec<u8>> = names.iter().map(|n| std::fs::read(dir.path().join(n)).unwrap()).collect();
    let saved = dir.path().join("saved");
    std::fs::create_dir(&saved).unwrap();
    std::fs::copy(dir.path().join("fit.json"), saved.join("fit.json")).unwrap();
    for n in ["cases.csv", "counts.csv", "fit.json", "dif.json", "dif.csv", "icc.csv", "icc.svg"] {
        std::fs::remove_file(dir.path().join(n)).unwrap();
    }
    // fit.json embeds its manifest; the others have sidecars
    for source in ["cases.csv.manifest.json", "counts.csv.manifest.json", "saved/fit.json", "dif.csv.manifest.json", "icc.svg.manifest.json"] {
        assert_eq!(common::hetop(dir.path(), &["replay", "--manifest", source]), 0, "{source}");
    }
    for (n, b) in names.iter().zip(&before) {
        assert_eq!(&std::fs::read(dir.path().join(n)).unwrap(), b, "{n}");
    }
}
