use std::path::PathBuf;
use std::process::{Command, Output};

fn sht(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sht")).args(args).env_remove("SHT_THREADS").output().unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sht-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn d_err(text: &str) -> f64 {
    text.trim().strip_prefix("D_err=").unwrap().parse().unwrap()
}

#[test]
fn grid_info_lists_rings() {
    let text = stdout(&sht(&["grid", "info", "--nside", "2"]));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "healpix nside=2 npix=48 nrings=7");
    assert_eq!(lines.len(), 2 + 7);
    let offsets: Vec<usize> = lines[2..].iter().map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(offsets, [0, 4, 12, 20, 28, 36, 44]);
}

#[test]
fn roundtrip_on_gauss_legendre_is_exact() {
    let text = stdout(&sht(&["roundtrip", "--grid", "gauss-legendre", "--nrings", "33", "--nphi", "65", "--workers", "4"]));
    assert!(d_err(&text) < 1e-12, "{text}");
}

#[test]
fn kernels_agree() {
    let base = ["roundtrip", "--grid", "gauss-legendre", "--nrings", "24", "--nphi", "48", "--seed", "5", "--threads", "2"];
    let a = d_err(&stdout(&sht(&[&base[..], &["--kernel", "m-major"]].concat())));
    let b = d_err(&stdout(&sht(&[&base[..], &["--kernel", "ring-major"]].concat())));
    assert!((a - b).abs() < 1e-12, "{a} {b}");
}

#[test]
fn synth_is_deterministic() {
    let dir = scratch("synth");
    let (p1, p2) = (dir.join("a.map"), dir.join("b.map"));
    for p in [&p1, &p2] {
        stdout(&sht(&["synth", "--nside", "4", "--seed", "9", "--threads", "2", "--out", p.to_str().unwrap()]));
    }
    assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
}

#[test]
fn synth_analyze_render_pipeline() {
    let dir = scratch("pipeline");
    let map = dir.join("m.map");
    let alm = dir.join("m.alm");
    let pgm = dir.join("m.pgm");
    let csv = dir.join("cost.csv");
    let m = map.to_str().unwrap();
    stdout(&sht(&["synth", "--grid", "gauss-legendre", "--nrings", "16", "--nphi", "32", "--out", m, "--csv", csv.to_str().unwrap()]));
    assert!(std::fs::read_to_string(&csv).unwrap().starts_with("stage,predicted_s,measured_s,flops,bytes\n"));
    stdout(&sht(&["analyze", "--in", m, "--out", alm.to_str().unwrap(), "--workers", "2"]));
    assert!(std::fs::read(&alm).unwrap().starts_with(b"SHTALM1\n"));
    stdout(&sht(&["render", "--in", m, "--width", "20", "--height", "10", "--out", pgm.to_str().unwrap()]));
    let image = std::fs::read(&pgm).unwrap();
    assert!(image.starts_with(b"P5\n20 10\n255\n"));
    assert_eq!(image.len(), b"P5\n20 10\n255\n".len() + 200);
}

#[test]
fn bench_csv_has_both_directions() {
    let text = stdout(&sht(&["bench", "--nside", "2"]));
    let stages: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert!(stages.contains(&"synthesis.recurrence") && stages.contains(&"analysis.fft"), "{stages:?}");
}

#[test]
fn model_csv_shape() {
    let text = stdout(&sht(&["model", "--nside", "64,128", "--workers", "1,2,4"]));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "size,r_n,lmax,mmax,n_workers,message_bytes,compute_s,comm_s,ratio");
    assert_eq!(lines.len(), 1 + 2 * 3);
}

#[test]
fn partition_dump() {
    let text = stdout(&sht(&[
        "partition", "--grid", "gauss-legendre", "--nrings", "8", "--nphi", "16", "--lmax", "7", "--workers", "4",
        "--threads", "2",
    ]));
    assert!(text.starts_with("worker 0: m=[0, 7] rings=[0, 7] predicted_steps=72\n"), "{text}");
    assert!(text.contains("worker 3: m=[3, 4] rings=[3, 4]"));
    assert_eq!(text.lines().filter(|l| l.contains(" thread ")).count(), 8);
}

#[test]
fn errors_exit_nonzero() {
    for args in [
        &["grid", "info"][..],
        &["roundtrip", "--nside", "2", "--lmax", "2", "--mmax", "3"],
        &["roundtrip", "--nside", "2", "--workers", "100"],
        &["render", "--in", "/nonexistent/x.map", "--out", "/tmp/x.pgm"],
        &["roundtrip", "--nside", "2", "--kernel", "sideways"],
    ] {
        let out = sht(args);
        assert!(!out.status.success(), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}
