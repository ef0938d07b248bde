use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use metafix::simulate::Report;
use metafix::sweep::{SweepFile, SweepSpec, SweptParam};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_metafix"))
}

fn repo(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn table(path: &Path) -> Vec<csv::StringRecord> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .unwrap()
        .records()
        .map(Result::unwrap)
        .collect()
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[idx].to_string()).collect()
}

fn record(path: &Path) -> toml::Table {
    toml::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn starts_with_header(path: &Path) -> bool {
    fs::read_to_string(path).unwrap().starts_with("# metafix ")
}

/// Root of `cos x - x` by bisection.
fn cos_root() -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid.cos() - mid > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn solve_banach_on_cosine() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.toml");
    let o = run(&["solve", "--solver", "banach", "--map", "cos1d", "--tol", "1e-10", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(starts_with_header(&out));
    let r = record(&out);
    assert!(r["residual"].as_float().unwrap() < 1e-10);
    let x = r["point"].as_array().unwrap()[0].as_float().unwrap();
    assert!((x - cos_root()).abs() < 1e-9);
}

#[test]
fn solve_markov_on_identity_kernel() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.toml");
    let kernel = repo("configs/kernels/identity3.csv");
    let o = run(&["solve", "--solver", "markov", "--kernel", kernel.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    for p in record(&out)["point"].as_array().unwrap() {
        assert!((p.as_float().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }
}

#[test]
fn solve_grid_on_identity() {
    let o = run(&["solve", "--solver", "grid", "--map", "identity2d", "--epsilon", "1e-6"]);
    assert_eq!(code(&o), 0);
    let r: toml::Table = toml::from_str(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert_eq!(r["residual"].as_float(), Some(0.0));
}

#[test]
fn solve_surrogate_verifies() {
    let o = run(&["solve", "--solver", "surrogate", "--map", "spiral2d", "--epsilon", "1e-3", "--seed", "3"]);
    assert_eq!(code(&o), 0);
    let r: toml::Table = toml::from_str(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert!(r["residual"].as_float().unwrap() < 1e-3);
}

#[test]
fn solve_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.toml");
    let o = run(&["solve", "--solver", "grid", "--map", "spiral2d", "--epsilon", "1e-9", "--budget", "30", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert_eq!(record(&out)["status"].as_str(), Some("budget_exhausted"));

    let o = run(&["solve", "--solver", "banach", "--map", "cos1d", "--tol", "1e-15", "--budget", "3"]);
    assert_eq!(code(&o), 2);

    assert_eq!(code(&run(&["solve", "--solver", "banach", "--map", "warp9d"])), 1);
    assert_eq!(code(&run(&["solve", "--solver", "markov"])), 1);
    assert_eq!(code(&run(&["solve", "--solver", "bogus"])), 1);
    assert_eq!(code(&run(&["nonsense"])), 1);
    assert_eq!(code(&run(&["--help"])), 0);

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "0.5,0.5\n0.1,oops\n").unwrap();
    let o = run(&["solve", "--solver", "markov", "--kernel", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("malformed kernel"));
}

#[test]
fn simulate_goal_stability_is_clean_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = repo("configs/goal_stability.toml");
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    for out in [&a, &b] {
        let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let m = a.join("manifest.toml");
    assert_eq!(code(&run(&["simulate", "--manifest", m.to_str().unwrap(), "--out", c.to_str().unwrap()])), 0);

    for f in ["trajectory.csv", "report.toml", "manifest.toml"] {
        assert!(starts_with_header(&a.join(f)), "{f}");
        let bytes = fs::read(a.join(f)).unwrap();
        assert_eq!(bytes, fs::read(b.join(f)).unwrap(), "{f}");
        assert_eq!(bytes, fs::read(c.join(f)).unwrap(), "{f}");
    }
    let rates = column(&a.join("trajectory.csv"), "violation_rate");
    assert_eq!(rates.len(), 20);
    assert!(rates.iter().all(|r| r == "0"));
}

#[test]
fn tampered_manifest_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = repo("configs/goal_stability.toml");
    let a = dir.path().join("a");
    assert_eq!(code(&run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()])), 0);
    let m = a.join("manifest.toml");
    let text = fs::read_to_string(&m).unwrap().replace("intervals = 20", "intervals = 21");
    fs::write(&m, text).unwrap();
    let o = run(&["simulate", "--manifest", m.to_str().unwrap(), "--out", dir.path().join("b").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn invalid_config_lists_every_violation() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(repo("configs/goal_stability.toml"))
        .unwrap()
        .replace("contraction_factor = 0.5", "contraction_factor = 1.5")
        .replace("env_noise_sigma = 0.0", "env_noise_sigma = -1.0")
        .replace("grid_cells_per_dim = 8", "grid_cells_per_dim = 100");
    let p = dir.path().join("bad.toml");
    fs::write(&p, text).unwrap();
    let o = run(&["simulate", "--config", p.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    for needle in ["contraction_factor", "env_noise_sigma", "4096"] {
        assert!(err.contains(needle), "missing {needle} in {err}");
    }
}

#[test]
fn hybrid_starvation_switches_at_window() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = repo("configs/hybrid_starvation.toml");
    let window = record(&cfg)["hybrid"]["window"].as_integer().unwrap() as usize;
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let modes = column(&dir.path().join("trajectory.csv"), "mode");
    assert!(modes.len() > window);
    assert!(modes[..window].iter().all(|m| m != "ModeratedEvolution"), "{modes:?}");
    assert!(modes[window..].iter().all(|m| m == "ModeratedEvolution"), "{modes:?}");
}

fn sweep_file_from(scenario: &Path, param: Vec<SweptParam>, replications: usize) -> String {
    let file = SweepFile {
        sweep: SweepSpec {
            replications,
            master_seed: None,
            param,
        },
        scenario: record(scenario),
    };
    toml::to_string(&file).unwrap()
}

#[test]
fn sweep_contraction_onset_ordering() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = repo("configs/sweep_contraction.toml");
    let o = run(&["sweep", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let path = dir.path().join("summary.csv");
    assert!(starts_with_header(&path));
    let cs = column(&path, "metagoal.contraction_factor");
    let onset = column(&path, "plateau_onset");
    let mean_onset = |c: &str| {
        let v: Vec<f64> = cs.iter().zip(&onset).filter(|(x, _)| *x == c).map(|(_, o)| o.parse().unwrap()).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let (a, b, c) = (mean_onset("0.3"), mean_onset("0.6"), mean_onset("0.9"));
    assert!(a <= b && b <= c, "{a} {b} {c}");
    assert!(column(&path, "violation_rate").iter().all(|r| r == "0"));
}

#[test]
fn single_cell_sweep_matches_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = repo("configs/global_moderated.toml");
    let sweep = dir.path().join("sweep.toml");
    fs::write(&sweep, sweep_file_from(&scenario, vec![], 1)).unwrap();
    let (s, m) = (dir.path().join("s"), dir.path().join("m"));
    assert_eq!(code(&run(&["sweep", "--config", sweep.to_str().unwrap(), "--out", s.to_str().unwrap()])), 0);
    assert_eq!(code(&run(&["simulate", "--config", scenario.to_str().unwrap(), "--out", m.to_str().unwrap()])), 0);

    let rows = table(&s.join("summary.csv"));
    assert_eq!(rows.len(), 1);
    let report: Report = toml::from_str(&fs::read_to_string(m.join("report.toml")).unwrap()).unwrap();
    let sum = &report.summary;
    let cell = |name: &str| column(&s.join("summary.csv"), name)[0].clone();
    assert_eq!(cell("seed"), report.seed.to_string());
    assert_eq!(cell("plateau_level").parse::<f64>().unwrap(), sum.plateau_level);
    assert_eq!(cell("plateau_onset").parse::<usize>().unwrap(), sum.plateau_onset);
    assert_eq!(cell("violation_rate").parse::<f64>().unwrap(), sum.violation_rate);
    assert_eq!(cell("mean_empirical_c").parse::<f64>().ok(), sum.mean_empirical_c);
    assert_eq!(cell("self_model_accuracy").parse::<f64>().ok(), sum.self_model_accuracy);
    assert!(sum.self_model_accuracy.is_some());
}

#[test]
fn sweep_is_schedule_independent_and_capped() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = repo("configs/goal_stability.toml");
    let param = vec![
        SweptParam {
            path: "env_noise_sigma".into(),
            values: vec![0.0.into(), 0.02.into()],
        },
        SweptParam {
            path: "metagoal.contraction_factor".into(),
            values: vec![0.4.into(), 0.8.into()],
        },
    ];
    let sweep = dir.path().join("sweep.toml");
    fs::write(&sweep, sweep_file_from(&scenario, param, 2)).unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let out = dir.path().join(format!("t{threads}"));
        let o = bin()
            .env("METAFIX_THREADS", threads)
            .args(["sweep", "--config", sweep.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .output()
            .unwrap();
        assert_eq!(code(&o), 0);
        outputs.push(fs::read(out.join("summary.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(table(&dir.path().join("t1/summary.csv")).len(), 8);

    let o = run(&["sweep", "--config", sweep.to_str().unwrap(), "--out", dir.path().join("x").to_str().unwrap(), "--max-cells", "7"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("cap is 7"));
}

#[test]
fn oversized_sweep_hits_default_cap() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = repo("configs/goal_stability.toml");
    let values: Vec<toml::Value> = (1..=33).map(|i| (i as f64 / 40.0).into()).collect();
    let param = vec![
        SweptParam {
            path: "metagoal.contraction_factor".into(),
            values: values.clone(),
        },
        SweptParam {
            path: "env_noise_sigma".into(),
            values,
        },
    ];
    let sweep = dir.path().join("sweep.toml");
    fs::write(&sweep, sweep_file_from(&scenario, param, 1)).unwrap();
    let o = run(&["sweep", "--config", sweep.to_str().unwrap(), "--out", dir.path().join("x").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("1089 cells"));
}
