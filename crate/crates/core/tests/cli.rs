use std::fs;
use std::path::{Path, PathBuf};

use pseudoplap::cli::commands::run;
use pseudoplap::cli::config::{sha256_hex, Command, RunConfig};
use pseudoplap::cli::{run_cli, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME};

const LEMMAS: &str = "[lemmas]\nprop4_samples = 60\nprop5_samples = 24\nzt_samples = 300\n";

const REGULARITY: &str = "\
[problem]
p = 3
dim = 2
n = 17

[regularity]
r = 0.5
case = gaussian amp=1 width=0.3 | zero
case = checkerboard freq=2 | affine slope=1,0.5
scaling = 0.1, 10
";

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn cli(command: &str, config: &Path, out: &Path, extra: &[&str]) -> i32 {
    let mut args = vec![
        "pseudoplap".to_string(),
        command.to_string(),
        "--config".into(),
        config.display().to_string(),
        "--out".into(),
        out.display().to_string(),
    ];
    args.extend(extra.iter().map(|s| s.to_string()));
    run_cli(args)
}

fn csv_files(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    files
}

fn assert_same_outputs(a: &Path, b: &Path) {
    let (fa, fb) = (csv_files(a), csv_files(b));
    assert_eq!(fa.len(), fb.len());
    assert!(!fa.is_empty());
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(x.file_name(), y.file_name());
        assert!(fs::read(x).unwrap() == fs::read(y).unwrap(), "{} differs", x.display());
    }
}

fn run_in_pool(cfg: &RunConfig, threads: usize) {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let outcome = pool.install(|| run(cfg)).unwrap();
    assert!(outcome.passed(), "{:?}", outcome.checks);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for (name, command, text) in [
        ("lemmas.ini", Command::VerifyLemmas, LEMMAS),
        ("regularity.ini", Command::MeasureRegularity, REGULARITY),
    ] {
        let path = write_config(dir.path(), name, text);
        let mut cfg = RunConfig::load(command, &path).unwrap();
        cfg.seed = 42;
        let mut outs = Vec::new();
        for threads in [1, 1, 3] {
            let out = dir.path().join(format!("{name}-{}", outs.len()));
            cfg.out_dir = out.clone();
            run_in_pool(&cfg, threads);
            outs.push(out);
        }
        assert_same_outputs(&outs[0], &outs[1]);
        assert_same_outputs(&outs[0], &outs[2]);
    }
}

#[test]
fn seed_changes_sampled_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "lemmas.ini", LEMMAS);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(cli("verify-lemmas", &cfg, &a, &["--seed", "1"]), EXIT_OK);
    assert_eq!(cli("verify-lemmas", &cfg, &b, &["--seed", "2"]), EXIT_OK);
    assert_ne!(fs::read(a.join("zt.csv")).unwrap(), fs::read(b.join("zt.csv")).unwrap());
    assert!(a.join("claims.svg").exists());
}

#[test]
fn every_csv_names_version_and_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "lemmas.ini", LEMMAS);
    let out = dir.path().join("out");
    assert_eq!(cli("verify-lemmas", &cfg, &out, &[]), EXIT_OK);
    let expect = format!(
        "# pseudoplap {} config={}",
        env!("CARGO_PKG_VERSION"),
        sha256_hex(LEMMAS.as_bytes())
    );
    let files = csv_files(&out);
    assert_eq!(files.len(), 6);
    for f in files {
        let text = fs::read_to_string(&f).unwrap();
        assert_eq!(text.lines().next().unwrap(), expect, "{}", f.display());
    }
}

#[test]
fn zero_data_solves_to_zero() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[problem]\np = 3\ndim = 2\nn = 17\nf = constant c=0\nboundary = zero\n";
    let cfg = write_config(dir.path(), "solve.ini", text);
    let out = dir.path().join("out");
    assert_eq!(cli("solve", &cfg, &out, &[]), EXIT_OK);
    let field = fs::read_to_string(out.join("u.csv")).unwrap();
    let mut rows = 0;
    for line in field.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let value: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert_eq!(value, 0.0);
        rows += 1;
    }
    assert!(rows > 100);
}

#[test]
fn convergence_study_in_one_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[problem]\np = 3\ndim = 1\nf = constant c=1\n\n[convergence]\nlevels = 33, 65, 129\n";
    let cfg = write_config(dir.path(), "conv.ini", text);
    let out = dir.path().join("out");
    assert_eq!(cli("convergence-study", &cfg, &out, &[]), EXIT_OK);
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(out.join("convergence.csv"))
        .unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    let errors: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert_eq!(errors.len(), 3);
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
    for r in &rows[1..] {
        let order: f64 = r[3].parse().unwrap();
        assert!(order >= 0.8, "{order}");
    }
    assert!(out.join("convergence.svg").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");

    let strict = write_config(
        dir.path(),
        "strict.ini",
        "[problem]\np = 3\ndim = 1\nf = constant c=1\n[convergence]\nlevels = 17, 33\nmin_order = 10\n",
    );
    assert_eq!(cli("convergence-study", &strict, &out, &[]), EXIT_CHECK_FAILED);
    let checks = fs::read_to_string(out.join("checks.csv")).unwrap();
    assert!(checks.contains("observed_order,false"), "{checks}");

    let bad = write_config(dir.path(), "bad.ini", "[problem]\np = 3\nn = 20\n");
    assert_eq!(cli("solve", &bad, &out, &[]), EXIT_CONFIG);
    let err = RunConfig::load(Command::Solve, &bad).unwrap_err().to_string();
    assert!(err.contains("bad.ini:3:"), "{err}");

    let blocked = dir.path().join("file");
    fs::write(&blocked, "").unwrap();
    let fine = write_config(dir.path(), "fine.ini", "[problem]\nn = 9\ndim = 1\n");
    assert_eq!(cli("solve", &fine, &blocked.join("sub"), &[]), EXIT_RUNTIME);
}
