use std::path::Path;
use std::process::{Command, Output};

fn hyperspde(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyperspde"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn small_study(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "study",
        "--model",
        "nemytskii",
        "--modes",
        "32",
        "--samples",
        "3",
        "--steps",
        "2^-5,2^-6,2^-7",
        "--href",
        "2^-9",
        "--out",
        dir.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    hyperspde(&args)
}

#[test]
fn desk_study_writes_full_table() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("desk");
    let out = hyperspde(&["study", "--seed", "7", "--plot", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.join("errors.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "Stepsize,EXE,CNE,LIE,EXM,CNM,LIM");
    assert_eq!(lines.len(), 6);
    for row in &lines[1..] {
        let values: Vec<f64> = row.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(values.len(), 7);
        assert!(values.iter().all(|v| *v > 0.0 && v.is_finite()));
    }
    let report = std::fs::read_to_string(dir.join("report.txt")).unwrap();
    assert!(report.contains("seed = 7"));
    assert!(report.contains("EXM"));
    assert!(dir.join("timing.txt").exists());
    let svg = std::fs::read_to_string(dir.join("errors.svg")).unwrap();
    assert_eq!(svg.matches("<polyline class=\"series\"").count(), 6);
}

#[test]
fn degenerate_study_has_one_cell_per_variant() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("one");
    let out = hyperspde(&[
        "study", "--model", "conv", "--samples", "1", "--steps", "2^-5", "--modes", "32", "--href", "2^-8",
        "--plot", "--out", dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.join("errors.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(std::fs::read_to_string(dir.join("report.txt")).unwrap().contains("samples completed: 1 of 1"));
    assert!(dir.join("errors.svg").exists());
}

#[test]
fn existing_output_needs_force() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    assert!(small_study(&dir, &[]).status.success());
    let again = small_study(&dir, &[]);
    assert_eq!(again.status.code(), Some(2));
    assert!(stderr(&again).contains("--force"), "{}", stderr(&again));
    assert!(small_study(&dir, &["--force"]).status.success());
}

#[test]
fn same_seed_gives_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(small_study(&a, &[]).status.success());
    let second = Command::new(env!("CARGO_BIN_EXE_hyperspde"))
        .env("HYPERSPDE_THREADS", "1")
        .args([
            "study", "--model", "nemytskii", "--modes", "32", "--samples", "3", "--steps",
            "2^-5,2^-6,2^-7", "--href", "2^-9", "--out", b.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(second.status.success());
    for file in ["errors.csv", "report.txt"] {
        assert_eq!(std::fs::read(a.join(file)).unwrap(), std::fs::read(b.join(file)).unwrap(), "{file}");
    }
}

#[test]
fn config_file_and_flag_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("study.conf");
    let dir = tmp.path().join("cfg");
    std::fs::write(
        &cfg,
        format!(
            "# small run\nmodel = transport\nmodes = 16\nsamples = 2\nsteps = 2^-5, 2^-6\nhref = 2^-8\nseed = 3\nout = {}\n",
            dir.display()
        ),
    )
    .unwrap();
    let out = hyperspde(&["study", "--config", cfg.to_str().unwrap(), "--seed", "11"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report = std::fs::read_to_string(dir.join("report.txt")).unwrap();
    assert!(report.contains("model = transport"));
    assert!(report.contains("seed = 11"));
    assert!(report.contains("modes = 16"));

    std::fs::write(&cfg, "model = linear\ncolour = blue\n").unwrap();
    let bad = hyperspde(&["study", "--config", cfg.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).contains("unknown key 'colour'"), "{}", stderr(&bad));
}

#[test]
fn invalid_arguments_are_diagnosed() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("x");
    let out = hyperspde(&["study", "--model", "heat", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).starts_with("error:"));
    assert_eq!(stderr(&out).lines().count(), 1, "{}", stderr(&out));

    let out = small_study(&dir, &["--steps", "2^-5,0.03"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_order_suite() {
    let out = hyperspde(&["verify-order"]);
    assert!(out.status.success(), "{}", stdout(&out));
    let text = stdout(&out);
    assert_eq!(text.matches("PASS").count(), 4, "{text}");
    assert!(text.contains("exact"));

    let strict = hyperspde(&["verify-order", "--scheme", "ie", "--beta", "1", "--tolerance", "0.001"]);
    assert_eq!(strict.status.code(), Some(1));
    assert!(stdout(&strict).contains("FAIL"));
}

#[test]
fn oracle_passes_and_is_deterministic() {
    let first = hyperspde(&["oracle"]);
    assert!(first.status.success(), "{}", stdout(&first));
    let text = stdout(&first);
    assert_eq!(text.matches("PASS").count(), 3, "{text}");
    assert_eq!(first.stdout, hyperspde(&["oracle"]).stdout);

    let exact = hyperspde(&["oracle", "--b", "0", "--samples", "10"]);
    assert!(exact.status.success());
    assert!(stdout(&exact).contains("exact"));
}

#[test]
fn plot_command() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("errors.csv");
    std::fs::write(
        &csv,
        "Stepsize,EXE,CNE,LIE,EXM,CNM,LIM\n\
         3.12500e-2,5.1e-2,5.1e-2,5.4e-2,3.0e-2,3.0e-2,3.3e-2\n\
         1.56250e-2,3.4e-2,3.4e-2,3.6e-2,1.5e-2,1.6e-2,2.0e-2\n",
    )
    .unwrap();
    assert!(hyperspde(&["plot", csv.to_str().unwrap()]).status.success());
    let svg = std::fs::read(tmp.path().join("errors.svg")).unwrap();
    let text = String::from_utf8(svg.clone()).unwrap();
    assert_eq!(text.matches("<polyline class=\"series\"").count(), 6);
    assert_eq!(text.matches("class=\"guide\"").count(), 2);

    let other = tmp.path().join("again.svg");
    assert!(hyperspde(&["plot", csv.to_str().unwrap(), "--out", other.to_str().unwrap()]).status.success());
    assert_eq!(std::fs::read(other).unwrap(), svg);

    let empty = tmp.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    assert_eq!(hyperspde(&["plot", empty.to_str().unwrap()]).status.code(), Some(2));

    let broken = tmp.path().join("broken.csv");
    std::fs::write(&broken, "Stepsize,EXE\n0.5,1\n0.25,oops\n").unwrap();
    let out = hyperspde(&["plot", broken.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}
