use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn blockmom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blockmom"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

const STUDY: &str = "\
# small gaussian study
seed = 11
[simulate]
family = gaussian
N = 256
k = 4
l = 2
replicates = 1000
";

#[test]
fn estimate_prints_value_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let input = write(dir.path(), "a.txt", "1\n2\n3\n");
    let run = blockmom(&[
        "estimate", "--input", &input, "--k", "3", "--l", "1", "--out", out,
    ]);
    assert!(run.status.success(), "{}", stderr(&run));
    assert_eq!(stdout(&run), "2\n");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("estimate_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["report"]["value"], 2.0);
    assert_eq!(report["report"]["plan"]["b"], 1);

    let input = write(dir.path(), "b.txt", "1\n2\n3\n4\n");
    let run = blockmom(&[
        "estimate", "--input", &input, "--k", "2", "--l", "2", "--T", "exact", "--out", out,
    ]);
    assert_eq!(stdout(&run), "2.5\n");
}

#[test]
fn estimate_subsampled_and_shuffle_are_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let data: String = (0..200)
        .map(|i| format!("{}\n", (i * 37 % 101) as f64 / 7.0))
        .collect();
    let input = write(dir.path(), "d.txt", &data);
    let args = [
        "estimate",
        "--input",
        &input,
        "--k",
        "5",
        "--l",
        "4",
        "--T",
        "300",
        "--seed",
        "4",
        "--shuffle",
        "--out",
        out,
    ];
    let a = blockmom(&args);
    let b = blockmom(&args);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(stdout(&a), stdout(&b));
    let x: f64 = stdout(&a).trim().parse().unwrap();
    assert!(x.is_finite());
}

#[test]
fn data_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "c.txt", "1\nx\n3");
    let run = blockmom(&[
        "estimate",
        "--input",
        &input,
        "--k",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(3));
    assert!(stderr(&run).contains("line 2: not a number"));

    let input = write(dir.path(), "e.txt", "\n# nothing\n");
    let run = blockmom(&[
        "estimate",
        "--input",
        &input,
        "--k",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(3));
}

#[test]
fn config_errors_exit_2_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let cfg = write(dir.path(), "s.cfg", STUDY);
    let run = blockmom(&["simulate", "--config", &cfg, "--k", "200", "--out", out]);
    assert_eq!(run.status.code(), Some(2));
    assert!(stderr(&run).contains("too many blocks"));
    assert!(!Path::new(out).exists());

    let cfg = write(
        dir.path(),
        "u.cfg",
        "[simulate]\nfamily = gaussian\nfoo = 1\nbar = 2\n",
    );
    let run = blockmom(&["simulate", "--config", &cfg, "--out", out]);
    assert_eq!(run.status.code(), Some(2));
    assert!(stderr(&run).contains("unknown config keys: bar, foo"));
}

#[test]
fn capacity_error_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "x.cfg",
        "family = gaussian\nN = 4096\nk = 32\nl = 8\nestimators = block_umom_exact\nreplicates = 1000\nseed = 1\n",
    );
    let run = blockmom(&[
        "simulate",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(4));
    assert!(stderr(&run).contains("use subsampled variant"));
}

#[test]
fn simulate_outputs_round_trip_and_ignore_threads() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let cfg = write(dir.path(), "s.cfg", STUDY);
    let run = blockmom(&[
        "simulate",
        "--config",
        &cfg,
        "--threads",
        "1",
        "--out",
        a.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", stderr(&run));
    let csv = fs::read_to_string(a.join("simulate_seed11.csv")).unwrap();
    assert_eq!(stdout(&run), csv);
    let header = csv.lines().next().unwrap();
    assert_eq!(
        header,
        "estimator,t,threshold,p_hat,p_stderr,c_hat,censored_flag,var_scaled,var_stderr"
    );
    assert_eq!(csv.lines().count(), 1 + 3 * 8);

    let json = a.join("simulate_seed11.json");
    let run = blockmom(&[
        "simulate",
        "--config",
        json.to_str().unwrap(),
        "--threads",
        "3",
        "--out",
        b.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", stderr(&run));
    assert_eq!(
        fs::read(b.join("simulate_seed11.csv")).unwrap(),
        csv.as_bytes()
    );
    assert_eq!(
        fs::read(b.join("simulate_seed11.json")).unwrap(),
        fs::read(&json).unwrap()
    );
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(summary["software"]["name"], "blockmom");
    assert_eq!(summary["plan"]["b"], 32);
    assert_eq!(summary["config"]["T"], "auto");
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.cfg", STUDY);
    let run = blockmom(&[
        "simulate",
        "--config",
        &cfg,
        "--seed",
        "12",
        "--grid",
        "1,2",
        "--T",
        "50",
        "--out",
        dir.path().to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert!(run.status.success(), "{}", stderr(&run));
    let summary: serde_json::Value = serde_json::from_str(&stdout(&run)).unwrap();
    assert_eq!(summary["config"]["seed"], "12");
    assert_eq!(summary["config"]["grid"], "1,2");
    assert_eq!(summary["plan"]["T"], 50);
    assert!(dir.path().join("simulate_seed12.csv").exists());
}

#[test]
fn sweep_writes_cells_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = write(
        dir.path(),
        "w.cfg",
        "[sweep]\nfamily = gaussian,student_t\ndof = 5\nN = 256\nk = 4,8\nl = 2\nreplicates = 1000\nseed = 2\n",
    );
    let run = blockmom(&["sweep", "--config", &cfg, "--out", out]);
    assert!(run.status.success(), "{}", stderr(&run));
    let cells = dir.path().join("cells_seed2");
    assert_eq!(fs::read_dir(&cells).unwrap().count(), 4);
    let merged = fs::read_to_string(dir.path().join("sweep_seed2.csv")).unwrap();
    assert_eq!(merged.lines().count(), 1 + 4 * 3 * 8);
    assert!(merged.starts_with("family,k,l,T,estimator,t,"));

    // Removing one cell recomputes only that cell, with identical content.
    let victim = cells.join("cell_student_t_k8_l2_Tauto.csv");
    let before = fs::read(&victim).unwrap();
    fs::remove_file(&victim).unwrap();
    let run = blockmom(&["sweep", "--config", &cfg, "--out", out, "--format", "json"]);
    let status: serde_json::Value = serde_json::from_str(&stdout(&run)).unwrap();
    assert_eq!(status["computed"], 1);
    assert_eq!(status["reused"], 3);
    assert_eq!(fs::read(&victim).unwrap(), before);
    assert_eq!(
        fs::read_to_string(dir.path().join("sweep_seed2.csv")).unwrap(),
        merged
    );
}

#[test]
fn single_cell_sweep_matches_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = write(dir.path(), "s.cfg", &STUDY.replace("[simulate]", ""));
    assert!(blockmom(&["simulate", "--config", &cfg, "--out", out])
        .status
        .success());
    assert!(blockmom(&["sweep", "--config", &cfg, "--out", out])
        .status
        .success());
    let sim = fs::read_to_string(dir.path().join("simulate_seed11.csv")).unwrap();
    let sweep = fs::read_to_string(dir.path().join("sweep_seed11.csv")).unwrap();
    let stripped: Vec<&str> = sweep
        .lines()
        .skip(1)
        .map(|l| l.splitn(5, ',').nth(4).unwrap())
        .collect();
    assert_eq!(stripped, sim.lines().skip(1).collect::<Vec<_>>());
}

#[test]
fn oversized_sweep_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let ks: Vec<String> = (1..=101).map(|k| k.to_string()).collect();
    let ls: Vec<String> = (1..=100).map(|l| l.to_string()).collect();
    let text = format!(
        "family = gaussian\nN = 100000\nk = {}\nl = {}\nreplicates = 1000\nseed = 1\n",
        ks.join(","),
        ls.join(",")
    );
    let cfg = write(dir.path(), "big.cfg", &text);
    let run = blockmom(&[
        "sweep",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(2));
    assert!(stderr(&run).contains("limit of 10000"));
}

#[test]
fn diagnose_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "d.cfg",
        "[diagnose]\nfamily = rademacher\ng_replicates = 1000\nl = 4\nb = 4\nk = 8\nouter = 200\ninner = 200\n",
    );
    let run = blockmom(&[
        "diagnose",
        "--config",
        &cfg,
        "--seed",
        "5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", stderr(&run));
    let csv = fs::read_to_string(dir.path().join("diagnose_seed5.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "quantity,m,l,b,k,t,estimate,stderr");
    assert_eq!(lines[1], "g_m,25,,,,,1.2,0");
    assert_eq!(lines[2], "g_m,100,,,,,0.6,0");
    assert_eq!(lines[3], "g_m,400,,,,,0.3,0");
    assert!(lines[4].starts_with("hajek_var,16,4,4,8,"));
    assert!(dir.path().join("diagnose_seed5.json").exists());
}
