use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn cma(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cma")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

const FAST_PBVI: [&str; 4] = ["--pbvi-expansions", "1", "--pbvi-max-sweeps", "30"];

fn sweep(out: &str, extra: &[&str]) -> Output {
    let mut args = vec!["sweep", "--episodes", "40", "--out", out];
    args.extend_from_slice(&FAST_PBVI);
    args.extend_from_slice(extra);
    cma(&args)
}

#[test]
fn exported_defaults_validate() {
    let dir = TempDir::new().unwrap();
    let model = p(dir.path(), "model.json");
    assert_eq!(code(&cma(&["model", "export-defaults", "--out", &model])), 0);
    let o = cma(&["model", "validate", "--model", &model]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["violations"].as_array().unwrap().len(), 0);
}

#[test]
fn malformed_factor_is_named() {
    let dir = TempDir::new().unwrap();
    let model = p(dir.path(), "model.json");
    cma(&["model", "export-defaults", "--out", &model]);
    let mut doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
    doc["factors"][0]["cpt"][0]["dist"]["N"] = serde_json::json!(0.5);
    fs::write(&model, doc.to_string()).unwrap();
    let o = cma(&["model", "validate", "--model", &model]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FS"), "{}", String::from_utf8_lossy(&o.stdout));
    let o = cma(&["solve", "mdp", "--model", &model, "--out", &p(dir.path(), "vf.json")]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("FS"), "{}", stderr(&o));
}

#[test]
fn missing_model_exits_2() {
    let o = cma(&["model", "validate", "--model", "/nonexistent/model.json"]);
    assert_eq!(code(&o), 2);
    let o = cma(&["solve", "mdp", "--model", "/nonexistent/model.json", "--out", "/tmp/unused.json"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn bad_flags_exit_1() {
    assert_eq!(code(&cma(&["sweep", "--out", "/tmp/x", "--p-obs", "0.3"])), 1);
    assert_eq!(code(&cma(&["sweep", "--out", "/tmp/x", "--policy", "random"])), 1);
    assert_eq!(code(&cma(&["frobnicate"])), 1);
    assert_eq!(code(&cma(&["--help"])), 0);
}

#[test]
fn solve_mdp_is_idempotent() {
    let dir = TempDir::new().unwrap();
    let a = p(dir.path(), "a.json");
    let b = p(dir.path(), "b.json");
    assert_eq!(code(&cma(&["solve", "mdp", "--out", &a])), 0);
    assert_eq!(code(&cma(&["solve", "mdp", "--out", &b])), 0);
    let text = fs::read(&a).unwrap();
    assert_eq!(text, fs::read(&b).unwrap());
    let vf: serde_json::Value = serde_json::from_slice(&text).unwrap();
    assert_eq!(vf["v"].as_array().unwrap().len(), 112);
    assert_eq!(vf["q"].as_array().unwrap().len(), 112);
    assert_eq!(vf["policy"].as_array().unwrap().len(), 112);
}

#[test]
fn solve_pomdp_grid_writes_one_set_per_level() {
    let dir = TempDir::new().unwrap();
    let mut args = vec!["solve", "pomdp", "--out"];
    let out = p(dir.path(), "assets");
    args.push(&out);
    args.extend_from_slice(&FAST_PBVI);
    let o = cma(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut names: Vec<String> =
        fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    names.sort();
    assert_eq!(
        names,
        [
            "alphas_p0.60.json",
            "alphas_p0.80.json",
            "alphas_p0.90.json",
            "alphas_p1.00.json",
            "value_function.json"
        ]
    );

    let single = p(dir.path(), "one.json");
    let mut args = vec!["solve", "pomdp", "--p-obs", "0.9", "--out", &single];
    args.extend_from_slice(&FAST_PBVI);
    assert_eq!(code(&cma(&args)), 0);
    assert_eq!(fs::read(&single).unwrap(), fs::read(Path::new(&out).join("alphas_p0.90.json")).unwrap());
}

#[test]
fn full_grid_sweep_and_report() {
    let dir = TempDir::new().unwrap();
    let a = p(dir.path(), "a");
    let b = p(dir.path(), "b");
    let o = sweep(&a, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(code(&sweep(&b, &[])), 0);

    let cells = fs::read_dir(Path::new(&a).join("cells")).unwrap().count();
    assert_eq!(cells, 2 * 42);

    let summary = fs::read_to_string(Path::new(&a).join("summary.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(summary.as_bytes());
    let headers = rdr.headers().unwrap().clone();
    assert!(headers.iter().any(|h| h == "completion_rate"));
    assert!(headers.iter().any(|h| h == "safety_rate"));
    assert_eq!(rdr.records().count(), 42);
    assert_eq!(summary, fs::read_to_string(Path::new(&b).join("summary.csv")).unwrap());

    let cell = fs::read_to_string(Path::new(&a).join("cells/pomdp_p0.80_M.csv")).unwrap();
    assert!(cell.starts_with(
        "episode,seed,policy,p_obs,bh,terminal,steps,took_contingency,cum_reward,disc_reward,p_minmax\n"
    ));
    assert_eq!(cell.lines().count(), 41);

    let ra = cma(&["report", &a]);
    assert_eq!(code(&ra), 0, "{}", stderr(&ra));
    let rb = cma(&["report", &b]);
    assert_eq!(ra.stdout, rb.stdout);
    let tables = String::from_utf8(ra.stdout).unwrap();
    assert_eq!(tables.matches("## Battery health").count(), 3);
    // five policies at each of four levels per cohort
    let rows = tables.lines().filter(|l| l.starts_with("| ") && !l.starts_with("| policy")).count();
    assert_eq!(rows, 3 * 5 * 4);
    let long_a = fs::read(Path::new(&a).join("report_long.csv")).unwrap();
    assert_eq!(long_a, fs::read(Path::new(&b).join("report_long.csv")).unwrap());

    let mut rdr = csv::Reader::from_reader(long_a.as_slice());
    let mut checked = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        if rec[3].ends_with("_rate") {
            let mean: f64 = rec[4].parse().unwrap();
            let two_sem: f64 = rec[5].parse().unwrap();
            let n: f64 = rec[6].parse().unwrap();
            assert!((two_sem - 2.0 * (mean * (1.0 - mean) / n).sqrt()).abs() < 1e-12);
            checked += 1;
        }
    }
    assert_eq!(checked, 3 * 5 * 4 * 4);

    fs::remove_file(Path::new(&a).join("cells/map_mdp_p0.90_G.csv")).unwrap();
    fs::remove_file(Path::new(&a).join("cells/noop_P.json")).unwrap();
    let o = cma(&["report", &a]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("2 missing cell(s)"), "{err}");
    assert!(err.contains("map_mdp p_obs=0.9 bh=G") && err.contains("noop bh=P"), "{err}");
}

#[test]
fn sweep_reuses_solved_assets() {
    let dir = TempDir::new().unwrap();
    let a = p(dir.path(), "a");
    let b = p(dir.path(), "b");
    let grid = ["--p-obs", "0.8", "--bh", "M", "--policy", "pomdp,map_mdp"];
    assert_eq!(code(&sweep(&a, &grid)), 0);
    let assets = p(Path::new(&a), "assets");
    let mut args = grid.to_vec();
    args.extend_from_slice(&["--assets", &assets]);
    let o = sweep(&b, &args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let read = |d: &str| fs::read(Path::new(d).join("summary.csv")).unwrap();
    assert_eq!(read(&a), read(&b));

    let o = sweep(&p(dir.path(), "c"), &["--p-obs", "0.9", "--policy", "pomdp", "--assets", &assets]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn config_file_sets_the_grid() {
    let dir = TempDir::new().unwrap();
    let config = p(dir.path(), "exp.json");
    fs::write(&config, r#"{"p_obs": [1.0], "bh": ["P"], "policies": ["noop", "obs_mdp"], "n_episodes": 5}"#).unwrap();
    let out = p(dir.path(), "out");
    let o = cma(&["sweep", "--config", &config, "--out", &out, "--episodes", "7"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = fs::read_to_string(Path::new(&out).join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(summary.lines().skip(1).all(|l| l.contains(",P,7,")));

    fs::write(&config, r#"{"p_obs": [1.5]}"#).unwrap();
    assert_eq!(code(&cma(&["sweep", "--config", &config, "--out", &out])), 1);
    assert_eq!(code(&cma(&["sweep", "--config", &p(dir.path(), "none.json"), "--out", &out])), 2);
}
