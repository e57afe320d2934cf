use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn nhqw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nhqw"))
        .args(args)
        .output()
        .unwrap()
}

fn scenario(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn same_seed_same_bytes_regardless_of_threads() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for (dir, threads) in [(&a, "1"), (&b, "4")] {
        let out = nhqw(&[
            &scenario("virtual_lab.toml"),
            "--out",
            dir.to_str().unwrap(),
            "--threads",
            threads,
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    assert_eq!(read_all(&a), read_all(&b));

    let c = tmp.path().join("c");
    let out = nhqw(&[
        &scenario("virtual_lab.toml"),
        "--out",
        c.to_str().unwrap(),
        "--seed",
        "5",
    ]);
    assert!(out.status.success());
    let lab = |d: &Path| fs::read(d.join("virtual_lab.csv")).unwrap();
    assert_ne!(lab(&a), lab(&c));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    fs::write(
        &bad,
        "command = \"evolve\"\n[walk]\ntheta_deg = 95\ngamma = 0\n[time]\nsteps = 1\n",
    )
    .unwrap();
    let out = nhqw(&[bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert_eq!(stderr.trim_end().lines().count(), 1);
    assert!(stderr.contains("theta_deg"));

    let edge = tmp.path().join("edge.toml");
    fs::write(
        &edge,
        "command = \"evolve\"\n[walk]\ntheta_deg = 45\ngamma = 0\nboundary = \"open\"\nsites = 4\n[time]\nsteps = 5\n",
    )
    .unwrap();
    let out = nhqw(&[
        edge.to_str().unwrap(),
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));

    let out = nhqw(&[tmp.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));

    let out = nhqw(&[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn threads_env_fallback() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_nhqw"))
        .args([
            &scenario("evolve_hadamard.toml"),
            "--out",
            tmp.path().to_str().unwrap(),
        ])
        .env("NHQW_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(tmp.path().join("scenario.toml").exists());
    assert!(tmp.path().join("distribution.csv").exists());
}
