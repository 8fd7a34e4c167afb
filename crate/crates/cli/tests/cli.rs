use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn srmcf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_srmcf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn pgm(dir: &Path, name: &str, w: usize, h: usize, f: impl Fn(usize, usize) -> u8) -> PathBuf {
    let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
    for j in 0..h {
        for i in 0..w {
            bytes.push(f(i, j));
        }
    }
    let p = dir.join(name);
    fs::write(&p, bytes).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    dir: tempfile::TempDir,
    image: PathBuf,
    mask: PathBuf,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let image = pgm(dir.path(), "in.pgm", 16, 12, |i, j| {
        ((i * 13 + j * 7) % 200) as u8 + 20
    });
    let mask = pgm(dir.path(), "mask.pgm", 16, 12, |i, j| {
        if (5..10).contains(&i) && (4..8).contains(&j) {
            255
        } else {
            0
        }
    });
    Fixture { dir, image, mask }
}

#[test]
fn help_succeeds() {
    assert_eq!(code(&srmcf(&["--help"])), 0);
    assert_eq!(code(&srmcf(&["inpaint", "--help"])), 0);
}

#[test]
fn usage_errors_are_configuration_failures() {
    assert_eq!(code(&srmcf(&[])), 3);
    assert_eq!(
        code(&srmcf(&["sharpen", "--input", "a", "--output", "b"])),
        3
    );
    assert_eq!(code(&srmcf(&["enhance", "--input", "a.pgm"])), 3);
}

#[test]
fn missing_input_is_an_io_failure() {
    let f = fixture();
    let out = f.dir.path().join("o.pgm");
    let r = srmcf(&[
        "enhance",
        "--input",
        "/nonexistent/in.pgm",
        "--output",
        s(&out),
    ]);
    assert_eq!(code(&r), 2);
    assert!(String::from_utf8_lossy(&r.stderr).contains("/nonexistent/in.pgm"));
}

#[test]
fn mask_is_required_for_inpainting_commands() {
    let f = fixture();
    let out = f.dir.path().join("o.pgm");
    for cmd in ["inpaint", "combo", "baseline"] {
        let r = srmcf(&[cmd, "--input", s(&f.image), "--output", s(&out)]);
        assert_eq!(code(&r), 3, "{cmd}");
    }
    assert!(!out.exists());
}

#[test]
fn bad_configuration_is_rejected() {
    let f = fixture();
    let out = f.dir.path().join("o.pgm");
    let base = ["enhance", "--input", s(&f.image), "--output", s(&out)];
    let r = srmcf(&[&base[..], &["--set", "tau=0"]].concat());
    assert_eq!(code(&r), 3);
    assert!(String::from_utf8_lossy(&r.stderr).contains("tau=0"));
    let cfg = f.dir.path().join("bad.cfg");
    fs::write(&cfg, "steps=2\nwobble=1\n").unwrap();
    let r = srmcf(&[&base[..], &["--config", s(&cfg)]].concat());
    assert_eq!(code(&r), 3);
    let r = srmcf(&[&base[..], &["--config", "/nonexistent.cfg"]].concat());
    assert_eq!(code(&r), 2);
}

#[test]
fn inpaint_writes_output_and_report() {
    let f = fixture();
    let out = f.dir.path().join("o.png");
    let r = srmcf(&[
        "inpaint",
        "--input",
        s(&f.image),
        "--mask",
        s(&f.mask),
        "--output",
        s(&out),
        "--truth",
        s(&f.image),
        "--set",
        "steps=4",
        "--set",
        "ntheta=8",
    ]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let stdout = String::from_utf8_lossy(&r.stdout);
    assert!(stdout.contains("command: inpaint"));
    assert!(stdout.contains("steps: 4"));
    assert!(stdout.contains("psnr_region: "));
    assert!(out.exists());
}

#[test]
fn mask_size_mismatch_is_a_configuration_failure() {
    let f = fixture();
    let small = pgm(f.dir.path(), "small.pgm", 5, 5, |_, _| 0);
    let out = f.dir.path().join("o.pgm");
    let r = srmcf(&[
        "inpaint",
        "--input",
        s(&f.image),
        "--mask",
        s(&small),
        "--output",
        s(&out),
    ]);
    assert_eq!(code(&r), 3);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let f = fixture();
    let run = |name: &str| {
        let out = f.dir.path().join(name);
        let r = srmcf(&[
            "combo",
            "--input",
            s(&f.image),
            "--mask",
            s(&f.mask),
            "--output",
            s(&out),
            "--set",
            "steps=6",
            "--set",
            "ntheta=8",
        ]);
        assert_eq!(code(&r), 0);
        fs::read(out).unwrap()
    };
    assert_eq!(run("a.pgm"), run("b.pgm"));
}

#[test]
fn every_command_runs() {
    let f = fixture();
    for cmd in ["enhance", "baseline", "curvature-map", "diagnose"] {
        let out = f.dir.path().join(format!("{cmd}.pgm"));
        let r = srmcf(&[
            cmd,
            "--input",
            s(&f.image),
            "--mask",
            s(&f.mask),
            "--output",
            s(&out),
            "--set",
            "steps=3",
            "--set",
            "ntheta=8",
        ]);
        assert_eq!(code(&r), 0, "{cmd}: {}", String::from_utf8_lossy(&r.stderr));
        assert!(out.exists(), "{cmd}");
        if cmd == "diagnose" {
            assert!(String::from_utf8_lossy(&r.stdout).contains("sup_norm_3: "));
        }
    }
}

#[test]
fn blow_up_is_a_numerical_failure() {
    let f = fixture();
    let out = f.dir.path().join("o.pgm");
    let r = srmcf(&[
        "enhance",
        "--input",
        s(&f.image),
        "--output",
        s(&out),
        "--set",
        "dt=1e6",
        "--set",
        "steps=400",
        "--set",
        "ntheta=8",
    ]);
    assert_eq!(code(&r), 4, "{}", String::from_utf8_lossy(&r.stderr));
    assert!(!out.exists());
}
