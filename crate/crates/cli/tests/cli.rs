use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BASE: &str = r#"
threshold_mode = "fractional"
threshold_value = 0.5
weight_n = 0.5
weight_p = 0.5
"#;

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        Workspace {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn config(&self, name: &str, extra: &str) -> PathBuf {
        let path = self.dir.path().join(name);
        std::fs::write(&path, format!("{BASE}{extra}")).unwrap();
        path
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn molcom(args: &[&str], config: &Path, out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_molcom"));
    cmd.args(args).arg("--config").arg(config);
    if let Some(out) = out {
        cmd.arg("--out").arg(out);
    }
    cmd.output().unwrap()
}

fn header(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string()
}

fn column(path: &Path, index: usize) -> Vec<f64> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(index).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn sweep_headers_are_exact() {
    let ws = Workspace::new();
    let cfg = ws.config("run.toml", "grid_points = 11\n");
    for (kind, expected) in [
        ("snr", "n_m,snr_linear,snr_db"),
        ("ber", "n_m,p_miss,p_false_alarm,p_error"),
        ("ber-no-isi", "n_m,p_miss,p_false_alarm,p_error"),
        ("balance", "n_m,p_error,n_hat,p_hat,f"),
    ] {
        let out = ws.path(&format!("{kind}.csv"));
        let o = molcom(&["sweep", "--kind", kind], &cfg, Some(&out));
        assert_eq!(o.status.code(), Some(0), "{kind}");
        assert_eq!(header(&out), expected);
        assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 12);
    }
}

#[test]
fn snr_falls_with_distance() {
    let ws = Workspace::new();
    let cfg = ws.config("run.toml", "grid_points = 5\ndistances = [1e-5, 2e-5]\n");
    let out = ws.path("snr.csv");
    assert!(molcom(&["sweep", "--kind", "snr"], &cfg, Some(&out))
        .status
        .success());
    let db = column(&out, 2);
    assert_eq!(db.len(), 10);
    let (near, far) = db.split_at(5);
    assert!(near.iter().zip(far).all(|(a, b)| b < a));
    assert!((near[0] - 12.952389399737642).abs() < 1e-9);
}

#[test]
fn ber_sweep_is_non_increasing() {
    let ws = Workspace::new();
    let cfg = ws.config("run.toml", "");
    let out = ws.path("ber.csv");
    assert!(molcom(&["sweep", "--kind", "ber"], &cfg, Some(&out))
        .status
        .success());
    let pe = column(&out, 3);
    assert!(pe.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn sweep_without_out_prints_csv() {
    let ws = Workspace::new();
    let cfg = ws.config("run.toml", "grid_points = 3\n");
    let o = molcom(&["sweep", "--kind", "ber-no-isi"], &cfg, None);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("n_m,p_miss,p_false_alarm,p_error\n1.0000000000000000e3,"));
}

#[test]
fn optimize_degenerate_weight_lands_on_n_min() {
    let ws = Workspace::new();
    let cfg = ws.path("run.toml");
    std::fs::write(
        &cfg,
        BASE.replace("weight_n = 0.5", "weight_n = 1.0")
            .replace("weight_p = 0.5", "weight_p = 0.0"),
    )
    .unwrap();
    let trace = ws.path("trace.csv");
    let o = molcom(&["optimize"], &cfg, Some(&trace));
    assert_eq!(o.status.code(), Some(0));
    let report = String::from_utf8(o.stdout).unwrap();
    assert!(report.contains("n_star_rounded  1000\n"), "{report}");
    assert!(report.contains("converged       true"));
    assert_eq!(header(&trace), "iteration,n_m,f,learning_rate,event");
}

#[test]
fn large_learning_rate_records_halving() {
    let ws = Workspace::new();
    let cfg = ws.config("run.toml", "learning_rate = 1e12\n");
    let trace = ws.path("trace.csv");
    let o = molcom(&["optimize"], &cfg, Some(&trace));
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&trace).unwrap();
    assert!(text.contains(",lr_halved\n"));
    assert!(text.trim_end().ends_with(",converged"));
}

#[test]
fn non_convergence_exits_2_and_keeps_trace() {
    let ws = Workspace::new();
    let cfg = ws.config("run.toml", "max_iterations = 3\n");
    let trace = ws.path("trace.csv");
    let o = molcom(&["optimize"], &cfg, Some(&trace));
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(std::fs::read_to_string(&trace).unwrap().lines().count(), 5);
}

#[test]
fn config_errors_exit_1_naming_the_key() {
    let ws = Workspace::new();
    let missing = ws.path("missing.toml");
    std::fs::write(&missing, BASE.replace("threshold_value = 0.5\n", "")).unwrap();
    let o = molcom(&["sweep", "--kind", "ber"], &missing, None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stderr)
        .unwrap()
        .contains("threshold_value"));

    let geometry = ws.config("geometry.toml", "receiver_radius = 1e-5\n");
    let o = molcom(&["sweep", "--kind", "ber"], &geometry, None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stderr)
        .unwrap()
        .contains("receiver_radius"));

    let unknown = ws.config("unknown.toml", "diffusion = 1e-9\n");
    assert_eq!(molcom(&["optimize"], &unknown, None).status.code(), Some(1));

    let absent = ws.path("absent.toml");
    assert_eq!(molcom(&["optimize"], &absent, None).status.code(), Some(1));
}

#[test]
fn usage_errors_exit_1_and_help_exits_0() {
    let bin = env!("CARGO_BIN_EXE_molcom");
    let o = Command::new(bin)
        .args(["sweep", "--kind", "nope"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = Command::new(bin).arg("frobnicate").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = Command::new(bin).arg("--help").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8(o.stdout).unwrap().contains("sweep"));
}

#[test]
fn failed_sweep_leaves_no_output() {
    let ws = Workspace::new();
    // above the peak concentration for the smallest grid budgets
    let cfg = ws.path("run.toml");
    std::fs::write(
        &cfg,
        BASE.replace("\"fractional\"", "\"absolute\"")
            .replace("threshold_value = 0.5", "threshold_value = 1e17"),
    )
    .unwrap();
    let out = ws.path("ber.csv");
    let o = molcom(&["sweep", "--kind", "ber"], &cfg, Some(&out));
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
    assert_eq!(std::fs::read_dir(ws.dir.path()).unwrap().count(), 1);
}

#[test]
fn validations_pass_on_the_reference_link() {
    let ws = Workspace::new();
    let cfg = ws.config("run.toml", "mc_bits = 100000\n");
    for kind in ["gradient", "montecarlo"] {
        let out = ws.path(&format!("{kind}.csv"));
        let o = molcom(&["validate", "--kind", kind], &cfg, Some(&out));
        assert_eq!(o.status.code(), Some(0), "{kind}");
        assert!(String::from_utf8(o.stdout).unwrap().ends_with("PASS\n"));
    }
    assert_eq!(
        header(&ws.path("montecarlo.csv")),
        "n_m,bits,errors_observed,p_hat,ci_low,ci_high,p_error_analytic"
    );
}

#[test]
fn channel_validation_fails_when_receiver_hugs_the_source() {
    // With the sphere surface 0.5 um from the source the point-concentration
    // approximation breaks down and the occupancy peaks far too early.
    let ws = Workspace::new();
    let cfg = ws.config(
        "run.toml",
        "receiver_radius = 9.5e-6\nparticle_count = 20000\n",
    );
    let out = ws.path("channel.csv");
    let o = molcom(&["validate", "--kind", "channel"], &cfg, Some(&out));
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8(o.stdout).unwrap().ends_with("FAIL\n"));
    assert_eq!(
        header(&out),
        "time,observed_count,expected_count,relative_deviation"
    );
}

#[test]
fn seed_flag_overrides_config() {
    let ws = Workspace::new();
    let cfg = ws.config("run.toml", "n_m = 1000\nmc_bits = 20000\n");
    let run = |seed: &str, name: &str| {
        let out = ws.path(name);
        let o = Command::new(env!("CARGO_BIN_EXE_molcom"))
            .args([
                "validate",
                "--kind",
                "montecarlo",
                "--seed",
                seed,
                "--config",
            ])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert!(o.status.code().is_some());
        std::fs::read_to_string(out).unwrap()
    };
    let a = run("1", "a.csv");
    assert_eq!(a, run("1", "b.csv"));
    assert_ne!(a, run("2", "c.csv"));
}
