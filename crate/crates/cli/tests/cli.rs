use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn szcodec(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_szcodec"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = szcodec(dir, args);
    assert!(
        out.status.success(),
        "szcodec {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn field(stdout: &str, key: &str) -> String {
    stdout
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no `{key}` in {stdout}"))
        .to_string()
}

#[test]
fn generate_compress_decompress_measure() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let out = ok(
        d,
        &[
            "--seed",
            "3",
            "generate",
            "--n",
            "120",
            "--clusters",
            "3",
            "--internoise",
            "0.2",
            "--out",
            "g.txt",
            "--gt",
            "gt.csv",
            "--labels",
            "labels.txt",
        ],
    );
    assert_eq!(field(&out, "n"), "120");
    assert!(d.join("g.txt").exists() && d.join("gt.csv").exists());
    assert_eq!(
        fs::read_to_string(d.join("labels.txt")).unwrap().lines().count(),
        120
    );

    let out = ok(
        d,
        &[
            "--eps-grid",
            "0.2:0.5:0.05",
            "compress",
            "g.txt",
            "-o",
            "g.codc",
            "--id-map",
            "ids.csv",
        ],
    );
    let k: usize = field(&out, "k").parse().unwrap();
    assert!(k >= 2);
    let bytes = fs::read(d.join("g.codc")).unwrap();
    assert_eq!(&bytes[..4], b"CODC");
    assert!(fs::read_to_string(d.join("ids.csv"))
        .unwrap()
        .starts_with("original_id,vertex\n"));

    ok(d, &["decompress", "g.codc", "-o", "sze.csv"]);
    ok(d, &["decompress", "g.codc", "--filtered", "-o", "fsze.csv"]);
    ok(d, &["filter", "sze.csv", "-o", "fsze2.csv"]);
    assert_eq!(
        fs::read(d.join("fsze.csv")).unwrap(),
        fs::read(d.join("fsze2.csv")).unwrap()
    );

    let out = ok(d, &["measure", "fsze.csv", "--gt", "gt.csv"]);
    let ari: f64 = field(&out, "kvs_ari").parse().unwrap();
    assert!((-1.0..=1.0).contains(&ari));
    let with_file = ok(
        d,
        &["measure", "fsze.csv", "--gt", "gt.csv", "--labels", "labels.txt"],
    );
    assert_eq!(field(&with_file, "kvs_ari"), field(&out, "kvs_ari"));

    let out = ok(d, &["threshold", "fsze.csv", "--gt", "gt.csv", "-o", "ufsze.txt"]);
    let t: f64 = field(&out, "threshold").parse().unwrap();
    assert!(t > 0.0 && t < 1.0);
}

#[test]
fn codec_writes_report_and_snapshots() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(
        d,
        &[
            "generate",
            "--n",
            "100",
            "--clusters",
            "4",
            "--out",
            "g.csv",
            "--gt",
            "gt.csv",
        ],
    );
    ok(d, &["codec", "g.csv", "--gt", "gt.csv", "--out-dir", "run"]);
    let mut names: Vec<String> = fs::read_dir(d.join("run"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "compressed.codc",
            "report.csv",
            "run_fsze.pgm",
            "run_g.pgm",
            "run_sze.pgm",
            "run_ufsze.pgm"
        ]
    );
    let report = fs::read_to_string(d.join("run/report.csv")).unwrap();
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0].split(',').count(), lines[1].split(',').count());
    let pgm = fs::read(d.join("run/run_g.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n100 100\n255\n"));
    assert_eq!(pgm.len(), "P5\n100 100\n255\n".len() + 100 * 100);
}

#[test]
fn same_seed_same_output() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    for name in ["a", "b"] {
        ok(
            d,
            &[
                "--seed",
                "9",
                "generate",
                "--n",
                "80",
                "--clusters",
                "2",
                "--out",
                &format!("{name}.txt"),
            ],
        );
        ok(
            d,
            &[
                "--seed",
                "9",
                "compress",
                &format!("{name}.txt"),
                "-o",
                &format!("{name}.codc"),
            ],
        );
    }
    assert_eq!(
        fs::read(d.join("a.txt")).unwrap(),
        fs::read(d.join("b.txt")).unwrap()
    );
    assert_eq!(
        fs::read(d.join("a.codc")).unwrap(),
        fs::read(d.join("b.codc")).unwrap()
    );
}

#[test]
fn experiment_from_config() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(
        d.join("exp.toml"),
        "[codec]\neps_grid = [0.25, 0.3]\n\n[experiment]\nsizes = [64]\ninternoise_levels = [0.2]\n\
         intranoise_levels = [0.0, 0.1]\nclusters = 2\nrepetitions = 2\noutput_dir = \"out\"\n",
    )
    .unwrap();
    let out = ok(d, &["--config", "exp.toml", "experiment"]);
    assert_eq!(field(&out, "runs"), "4");
    for f in [
        "results.csv",
        "summary.csv",
        "timings.csv",
        "threshold_study.csv",
        "heatmap_ari_n64.csv",
    ] {
        assert!(d.join("out").join(f).exists(), "{f} missing");
    }
    let first = fs::read(d.join("out/results.csv")).unwrap();
    ok(d, &["--config", "exp.toml", "experiment"]);
    assert_eq!(fs::read(d.join("out/results.csv")).unwrap(), first);

    let summary = fs::read_to_string(d.join("out/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
}

#[test]
fn errors_are_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("bad.txt"), "0 1\n1 2 heavy\n").unwrap();
    let out = szcodec(d, &["compress", "bad.txt", "-o", "x.codc"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "{err}");

    fs::write(d.join("junk.codc"), b"CODX0000").unwrap();
    let out = szcodec(d, &["decompress", "junk.codc", "-o", "y.csv"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("magic"));

    let out = szcodec(d, &["--kernel", "4", "filter", "bad.txt", "-o", "z.csv"]);
    assert!(!out.status.success());
    let out = szcodec(d, &["--eps-grid", "x", "filter", "bad.txt", "-o", "z.csv"]);
    assert!(!out.status.success());

    fs::write(d.join("c.toml"), "[codec]\nkernal = 3\n").unwrap();
    let out = szcodec(d, &["--config", "c.toml", "experiment"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("kernal"));
}
