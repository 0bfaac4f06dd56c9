use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use colorsparse::image_io::{read_ppm, write_ppm};
use colorsparse::metrics::psnr;
use colorsparse::RgbImage;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_colorsparse"));
    cmd.env("SRC_THREADS", "2");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stat(line: &str, key: &str) -> f64 {
    line.split_whitespace()
        .find_map(|kv| kv.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("{key} missing from {line}"))
        .parse()
        .unwrap()
}

fn sample(w: usize, h: usize, phase: f64) -> RgbImage {
    RgbImage::from_fn(w, h, |r, c| {
        let x = r as f64 * 0.11 + phase;
        let y = c as f64 * 0.07;
        let base = 110.0 + 60.0 * (x.sin() * y.cos());
        [
            base as u8,
            (base * 0.8 + 20.0 * (y * 2.0).sin()) as u8,
            (base * 0.6 + 30.0) as u8,
        ]
    })
}

fn write_sample(dir: &Path, name: &str, img: &RgbImage) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, write_ppm(img)).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn encode_decode_round_trip_matches_reported_psnr() {
    let dir = tempfile::tempdir().unwrap();
    let img = sample(50, 41, 0.0);
    let input = write_sample(dir.path(), "in.ppm", &img);
    let packed = dir.path().join("out.src");
    let decoded = dir.path().join("back.ppm");

    let out = run(&[
        "encode",
        s(&input),
        s(&packed),
        "--transform",
        "dct",
        "--target-psnr",
        "34",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let line = stdout(&out);
    let reported = stat(&line, "psnr");
    assert!(reported >= 34.0, "{line}");
    let size = std::fs::metadata(&packed).unwrap().len() as f64;
    assert!((stat(&line, "bpp") - size * 8.0 / (50.0 * 41.0)).abs() < 1e-3);

    let out = run(&["decode", s(&packed), s(&decoded)]);
    assert!(out.status.success());
    let back = read_ppm(&std::fs::read(&decoded).unwrap()).unwrap();
    assert_eq!((back.width(), back.height()), (50, 41));
    let p = psnr(&img, &back).unwrap();
    assert!((p - reported).abs() < 1e-4, "{p} vs {reported}");

    let out = run(&["metrics", s(&input), s(&packed)]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("image,psnr,sr,bpp,r1,r2,r3"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), 7);
    assert!((row[1].parse::<f64>().unwrap() - reported).abs() < 1e-3);
}

#[test]
fn encoding_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_sample(dir.path(), "in.ppm", &sample(32, 32, 1.0));
    let a = dir.path().join("a.src");
    let b = dir.path().join("b.src");
    for out in [&a, &b] {
        let r = run(&[
            "encode",
            s(&input),
            s(out),
            "--transform",
            "pc",
            "--target-sr",
            "20",
        ]);
        assert!(r.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn target_sr_sets_atom_count() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_sample(dir.path(), "in.ppm", &sample(40, 30, 0.5));
    let packed = dir.path().join("o.src");
    let out = run(&[
        "encode",
        s(&input),
        s(&packed),
        "--target-sr",
        "20",
        "--levels",
        "2",
    ]);
    assert!(out.status.success());
    // floor(3·40·30 / 20)
    assert_eq!(stat(&stdout(&out), "atoms"), 180.0);
}

#[test]
fn error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.ppm");
    let out = run(&["encode", s(&missing), "x.src", "--target-psnr", "30"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.ppm"));

    let input = write_sample(dir.path(), "in.ppm", &sample(16, 16, 0.0));
    let out = run(&["encode", s(&input), "x.src"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&[
        "encode",
        s(&input),
        "x.src",
        "--target-psnr",
        "30",
        "--target-atoms",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(2));

    let bad = dir.path().join("bad.src");
    std::fs::write(&bad, b"XXXX not a file").unwrap();
    let out = run(&["decode", s(&bad), s(&dir.path().join("o.ppm"))]);
    assert_eq!(out.status.code(), Some(4));
    assert!(!dir.path().join("o.ppm").exists());

    let packed = dir.path().join("cap.src");
    let out = run(&[
        "encode",
        s(&input),
        s(&packed),
        "--target-psnr",
        "55",
        "--max-atoms",
        "2",
        "--levels",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn metrics_identical_and_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_sample(dir.path(), "a.ppm", &sample(20, 20, 0.0));
    write_sample(dir.path(), "b.ppm", &sample(20, 20, 2.0));
    let out = run(&["metrics", s(&a), s(&a)]);
    assert!(out.status.success());
    assert!(stdout(&out)
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("a.ppm,inf,"));

    let out = run(&["metrics", "--corpus", s(dir.path()), "--transform", "pc"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    for row in rows {
        for v in row.split(',').skip(4) {
            let r: f64 = v.parse().unwrap();
            assert!(r.abs() < 1e-6, "{row}");
        }
    }
}

#[test]
fn train_transform_trace_and_reuse() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    std::fs::create_dir(&corpus).unwrap();
    for i in 0..3 {
        write_sample(&corpus, &format!("{i}.ppm"), &sample(32, 32, i as f64));
    }
    let t1 = dir.path().join("t1.bin");
    let t2 = dir.path().join("t2.bin");
    let trace = dir.path().join("trace.csv");
    for t in [&t1, &t2] {
        let out = run(&[
            "train-transform",
            s(&corpus),
            "-o",
            s(t),
            "--trace",
            s(&trace),
            "-k",
            "150",
            "--iters",
            "8",
            "--seed",
            "7",
            "--restarts",
            "2",
            "--levels",
            "2",
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    assert_eq!(std::fs::read(&t1).unwrap(), std::fs::read(&t2).unwrap());
    let csv = std::fs::read_to_string(&trace).unwrap();
    let errors: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(!errors.is_empty());
    assert!(errors.windows(2).all(|w| w[1] <= w[0]), "{errors:?}");

    let input = corpus.join("0.ppm");
    let packed = dir.path().join("l.src");
    let out = run(&[
        "encode",
        s(&input),
        s(&packed),
        "--transform-file",
        s(&t1),
        "--target-atoms",
        "100",
        "--levels",
        "2",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = run(&[
        "encode",
        s(&input),
        s(&packed),
        "--transform",
        "learned",
        "--target-atoms",
        "9",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sparsify_pursuit_beats_truncation() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_sample(dir.path(), "in.ppm", &sample(48, 48, 0.3));
    let psnr_of = |mode: &str| {
        let out = run(&[
            "sparsify",
            s(&input),
            "--sr",
            "20",
            "--mode",
            mode,
            "--levels",
            "3",
        ]);
        assert!(out.status.success());
        stat(&stdout(&out), "psnr")
    };
    assert!(psnr_of("pursuit") > psnr_of("truncate"));
}
