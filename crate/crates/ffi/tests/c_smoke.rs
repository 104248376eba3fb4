//! Compiles `tests/c/smoke.c` against the generated header and the static
//! library, then runs it. Skipped when no C compiler is on the PATH.

use std::path::PathBuf;
use std::process::Command;

use ndarray::Array2;
use sentipipe::classifiers::{fit_logreg, LogRegParams};
use sentipipe::embedding::{save_embeddings, EmbeddedDataset};

fn compiler() -> Option<String> {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    Command::new(&cc).arg("--version").output().ok().filter(|o| o.status.success()).map(|_| cc)
}

#[test]
fn c_program_links_and_runs() {
    let Some(cc) = compiler() else {
        eprintln!("skipped: no C compiler");
        return;
    };
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // Integration tests run from target/<profile>/deps, next to the staticlib.
    let deps = std::env::current_exe().unwrap().parent().unwrap().to_path_buf();
    let lib = deps.join("libsentipipe_ffi.a");
    assert!(lib.is_file(), "{} missing", lib.display());

    let dir = tempfile::tempdir().unwrap();
    let n = 30;
    let labels: Vec<u8> = (0..n).map(|i| (i % 3) as u8).collect();
    let x = Array2::from_shape_fn((n, 4), |(i, j)| if j == labels[i] as usize { 2.0 } else { 0.0 });
    let ds = EmbeddedDataset::new((0..n).map(|i| format!("r{i}")).collect(), x, Some(labels), "test").unwrap();
    let (emb, model) = (dir.path().join("d.emb"), dir.path().join("m.json"));
    save_embeddings(&ds, &emb).unwrap();
    fit_logreg(&ds, &LogRegParams::default()).unwrap().save(&model).unwrap();

    let exe = dir.path().join("smoke");
    let build = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(crate_dir.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .output()
        .unwrap();
    assert!(build.status.success(), "{}", String::from_utf8_lossy(&build.stderr));

    let run = Command::new(&exe).arg(&emb).arg(&model).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
