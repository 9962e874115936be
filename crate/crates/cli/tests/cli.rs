use std::path::Path;
use std::process::{Command, Output};

fn holofocus(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_holofocus"))
        .args(args)
        .current_dir(cwd)
        .env("RAYON_NUM_THREADS", "2")
        .output()
        .expect("binary runs")
}

const SMALL: [&str; 6] = [
    "--set",
    "scene.height=32",
    "--set",
    "scene.width=32",
    "--iterations",
    "5",
];

fn with_small<'a>(head: &[&'a str]) -> Vec<&'a str> {
    head.iter().copied().chain(SMALL).collect()
}

#[test]
fn optimize_then_reconstruct() {
    let dir = tempfile::tempdir().unwrap();
    let out = holofocus(&with_small(&["optimize", "--out", "run", "--seed", "3"]), dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("639 nm"), "{stdout}");

    let holo = dir.path().join("run/639nm_hologram.png");
    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run/639nm_hologram.json")).unwrap()).unwrap();
    assert_eq!(sidecar["seed"], 3);
    assert_eq!(sidecar["regime"], "near");

    let out = holofocus(
        &with_small(&["reconstruct", holo.to_str().unwrap(), "--out", "rec", "--seed", "3"]),
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("rec/639nm_recon_plane0.png").exists());
    assert!(dir.path().join("rec/639nm_recon_metrics.json").exists());
}

#[test]
fn config_file_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.toml"),
        "seed = 1\noutput_dir = \"from_file\"\n[scene]\nheight = 32\nwidth = 32\n[solver]\niterations = 3\n",
    )
    .unwrap();
    let out = holofocus(&["optimize", "--config", "run.toml", "--lr", "0.01"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let echoed = std::fs::read_to_string(dir.path().join("from_file/run.toml")).unwrap();
    assert!(echoed.contains("learning_rate = 0.01"), "{echoed}");
    let losses = std::fs::read_to_string(dir.path().join("from_file/639nm_loss.csv")).unwrap();
    assert_eq!(losses.lines().count(), 4);
}

#[test]
fn target_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let out = holofocus(&with_small(&["target", "--out", "t"]), dir.path());
    assert!(out.status.success());
    assert!(dir.path().join("t/639nm_defocus2.png").exists());

    let out = holofocus(&with_small(&["compare", "--out", "c"]), dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8_lossy(&out.stdout);
    assert_eq!(table.lines().count(), 7, "{table}");
    for name in ["sgd_dp", "gs", "dp", "ours", "naive"] {
        assert!(table.contains(name));
    }
    assert!(dir.path().join("c/compare.json").exists());
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = holofocus(&["selftest"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(!String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn bad_input_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["optimize", "--no-such-flag"],
        vec!["optimize", "--set", "solver.iterations=0"],
        vec!["optimize", "--set", "solver.bogus=1"],
        vec!["optimize", "--config", "missing.toml"],
        vec!["reconstruct", "missing.png"],
        vec![
            "optimize",
            "--set",
            "scene.image=nope.png",
            "--set",
            "scene.depth=nope.png",
        ],
    ] {
        let out = holofocus(&args, dir.path());
        assert!(!out.status.success(), "{args:?} should fail");
        assert!(!out.stderr.is_empty(), "{args:?} should explain");
    }
}

#[test]
fn same_seed_same_png() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = holofocus(&with_small(&["optimize", "--out", out, "--seed", "5"]), dir.path());
        assert!(o.status.success());
    }
    let a = std::fs::read(dir.path().join("a/639nm_hologram.png")).unwrap();
    let b = std::fs::read(dir.path().join("b/639nm_hologram.png")).unwrap();
    assert_eq!(a, b);
}
