use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn fes(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fes"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(path: PathBuf) -> Vec<u8> {
    std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn exact_on_toy_scenario_file() {
    let dir = tempfile::tempdir().unwrap();
    let toy = fixture("toy.toml");
    let o = fes(&["schedule", "--method", "exact", "--scenario", toy.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("objective 1.000000"), "{}", stdout(&o));
    let csv = String::from_utf8(read(dir.path().join("schedule.csv"))).unwrap();
    assert!(csv.contains("0,first,1,"));
    assert!(csv.contains("1,second,2,"));
    assert!(dir.path().join("config.resolved.toml").is_file());
}

#[test]
fn infeasible_scenario_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture("infeasible.toml");
    let o = fes(&["schedule", "--method", "exact", "--scenario", f.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(5));
    assert!(stderr(&o).contains("infeasible"));
}

#[test]
fn unknown_method_lists_valid_ones() {
    let dir = tempfile::tempdir().unwrap();
    let o = fes(&["schedule", "--method", "simplex"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("fes") && err.contains("exact") && err.contains("ga"), "{err}");
}

#[test]
fn bad_config_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[stage1]\nepochz = 3\n").unwrap();
    let o = fes(&["--config", cfg.to_str().unwrap(), "train"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn missing_weather_file_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen.csv");
    std::fs::write(&gen, "timestamp,gen_kw\n2020-01-01T00:00:00,0\n").unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(
        &cfg,
        format!(
            "[paths]\ngeneration_csv = {:?}\nweather_csv = {:?}\n",
            gen.to_str().unwrap(),
            dir.path().join("absent.csv").to_str().unwrap()
        ),
    )
    .unwrap();
    let o = fes(&["--config", cfg.to_str().unwrap(), "ingest"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("absent.csv"));
}

#[test]
fn evaluate_before_training_suggests_train() {
    let dir = tempfile::tempdir().unwrap();
    let o = fes(&["evaluate"], dir.path());
    assert_eq!(o.status.code(), Some(6));
    assert!(stderr(&o).contains("fes train"));
}

#[test]
fn ingest_writes_synthetic_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("tiny.toml");
    let o = fes(&["--config", cfg.to_str().unwrap(), "ingest"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let gen = String::from_utf8(read(dir.path().join("generation.csv"))).unwrap();
    assert_eq!(gen.lines().count(), 1 + 20 * 24);
    assert!(gen.starts_with("timestamp,gen_kw"));
}

#[test]
fn train_schedule_evaluate_bench() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("tiny.toml");
    let cfg = cfg.to_str().unwrap();
    let o = fes(&["--config", cfg, "train"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["rtpnn.ckpt", "fes.ckpt", "stage1_loss.csv", "stage2_loss.csv", "train_summary.csv"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }

    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        std::fs::copy(dir.path().join("fes.ckpt"), {
            std::fs::create_dir_all(out).unwrap();
            out.join("fes.ckpt")
        })
        .unwrap();
        let o = fes(&["--config", cfg, "schedule", "--method", "fes", "--day", "1"], out);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["schedule.csv", "soft_schedule.csv", "forecast.csv", "schedule_summary.csv"] {
        assert_eq!(read(a.join(f)), read(b.join(f)), "{f}");
    }

    for method in ["exact", "ga"] {
        let o = fes(&["--config", cfg, "schedule", "--method", method, "--day", "0"], dir.path());
        assert!(o.status.success(), "{method}: {}", stderr(&o));
    }
    assert!(dir.path().join("ga_history.csv").is_file());

    let o = fes(&["--config", cfg, "schedule", "--day", "99"], dir.path());
    assert_eq!(o.status.code(), Some(2));

    let o = fes(&["--config", cfg, "evaluate"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("naive"));
    for f in ["forecast_metrics.csv", "cost_gap_b100.csv", "gap_summary.csv"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }

    let o = fes(&["--config", cfg, "bench", "--repetitions", "1"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("exact / fes"));
    let timing = String::from_utf8(read(dir.path().join("timing.csv"))).unwrap();
    assert_eq!(timing.lines().count(), 4);
}

#[test]
fn seed_flag_changes_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("tiny.toml");
    let cfg = cfg.to_str().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(fes(&["--config", cfg, "--seed", "1", "train"], &a).status.success());
    assert!(fes(&["--config", cfg, "--seed", "2", "train"], &b).status.success());
    assert_ne!(read(a.join("rtpnn.ckpt")), read(b.join("rtpnn.ckpt")));
    let resolved = String::from_utf8(read(b.join("config.resolved.toml"))).unwrap();
    assert!(resolved.contains("seed = 2"));
}
