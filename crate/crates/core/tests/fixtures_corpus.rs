//! The committed corpus under tests/fixtures must match the generator byte for byte.
//! Set CXR_REGENERATE_FIXTURES=1 to rewrite it.

use std::path::PathBuf;

use cxr_curate::fixtures::{corpus, render, write_corpus, CORPUS_DIR};

fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures")
}

#[test]
fn committed_corpus_matches_generator() {
    let dir = fixtures_dir();
    if std::env::var_os("CXR_REGENERATE_FIXTURES").is_some() {
        if dir.join(CORPUS_DIR).exists() {
            std::fs::remove_dir_all(dir.join(CORPUS_DIR)).unwrap();
        }
        write_corpus(&dir).unwrap();
    }
    for (rel, bytes) in render() {
        let on_disk = std::fs::read(dir.join(&rel))
            .unwrap_or_else(|e| panic!("{}: {e}; regenerate with CXR_REGENERATE_FIXTURES=1", rel.display()));
        assert!(on_disk == bytes, "{} differs from the generator", rel.display());
    }
    let committed = walkdir_count(&dir.join(CORPUS_DIR));
    assert_eq!(committed, corpus().len(), "stray files in the committed corpus");
}

fn walkdir_count(dir: &std::path::Path) -> usize {
    let mut n = 0;
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                n += 1;
            }
        }
    }
    n
}
