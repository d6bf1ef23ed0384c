//! The four subcommands: `estimate`, `simulate`, `diagnose` and `sweep`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use blockmom::diagnostics::{geometric_midpoint, t_range};
use blockmom::harness::{EstimatorCurve, StudyResult};
use blockmom::rng::{mix_seed, stream};
use blockmom::{
    block_umom_exact, block_umom_subsampled, g_of_m_grid, hajek_variance, make_block_plan,
    run_study, BlockPlan, DeviationStudyConfig, DiagnosticsReport, EstimateReport, EstimatorId,
    SampleBatch, Threads,
};
use rand::seq::SliceRandom;
use serde_json::{json, Map, Value};

use crate::config::{self, KeyMap, DISTRIBUTION_KEYS};
use crate::error::{CliError, Result};
use crate::io::{num, read_samples, write_atomic};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Header of the tail-curve CSV.
pub const SIMULATE_HEADER: &str =
    "estimator,t,threshold,p_hat,p_stderr,c_hat,censored_flag,var_scaled,var_stderr";
/// Header of the diagnostics CSV.
pub const DIAGNOSE_HEADER: &str = "quantity,m,l,b,k,t,estimate,stderr";
/// Columns prepended to every sweep row.
pub const SWEEP_PREFIX: &str = "family,k,l,T";
/// Largest sweep accepted.
pub const MAX_SWEEP_CELLS: usize = 10_000;

const DEFAULT_GRID: &str = "1,2,3,4,5,6,7,8";
const DEFAULT_ESTIMATORS: &str = "mom,block_umom_subsampled,sample_mean";

/// Stream used for the optional pre-shuffle of input data.
const SHUFFLE_STREAM: u64 = 0x5348_5546;

fn software() -> Value {
    json!({ "name": "blockmom", "version": VERSION })
}

fn pretty(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

// ---------------------------------------------------------------- estimate

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignChoice {
    Exact,
    Subsampled(u64),
}

impl std::str::FromStr for DesignChoice {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(DesignChoice::Exact),
            v => v
                .parse::<u64>()
                .ok()
                .filter(|&t| t > 0)
                .map(DesignChoice::Subsampled)
                .ok_or_else(|| {
                    CliError::Config(format!(
                        "T must be 'exact' or a positive integer, got '{v}'"
                    ))
                }),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EstimateArgs {
    pub input: PathBuf,
    pub k: usize,
    pub l: usize,
    pub design: DesignChoice,
    pub seed: u64,
    pub shuffle: bool,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone)]
pub struct EstimateOutput {
    pub report: EstimateReport,
    pub json: String,
    pub json_path: PathBuf,
}

/// Runs the overlapping-block estimator on a data file.
pub fn cmd_estimate(args: &EstimateArgs) -> Result<EstimateOutput> {
    let batch = read_samples(&args.input)?;
    let batch = if args.shuffle {
        let mut values = batch.into_values();
        values.shuffle(&mut stream(args.seed, SHUFFLE_STREAM));
        SampleBatch::new(values)?
    } else {
        batch
    };
    let report = estimate(&batch, args.k, args.l, args.design, args.seed)?;
    let json = pretty(&json!({
        "software": software(),
        "input": args.input.display().to_string(),
        "shuffled": args.shuffle,
        "report": report,
    }));
    let json_path = args.out_dir.join("estimate_report.json");
    write_atomic(&json_path, json.as_bytes())?;
    Ok(EstimateOutput {
        report,
        json,
        json_path,
    })
}

pub fn estimate(
    batch: &SampleBatch,
    k: usize,
    l: usize,
    design: DesignChoice,
    seed: u64,
) -> Result<EstimateReport> {
    let plan = make_block_plan(batch.len(), k, l)?;
    Ok(match design {
        DesignChoice::Exact => block_umom_exact(batch, &plan)?,
        DesignChoice::Subsampled(t) => block_umom_subsampled(batch, &plan, t, seed)?,
    })
}

// ---------------------------------------------------------------- simulate

const STUDY_KEYS: &[&str] = &[
    "N",
    "k",
    "l",
    "T",
    "replicates",
    "grid",
    "estimators",
    "seed",
    "threads",
];

fn allowed(extra: &[&'static str]) -> Vec<&'static str> {
    DISTRIBUTION_KEYS.iter().chain(extra).copied().collect()
}

/// Flag values that take precedence over config-file keys.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub threads: Option<String>,
    pub k: Option<String>,
    pub l: Option<String>,
    pub t: Option<String>,
    pub replicates: Option<usize>,
    pub grid: Option<String>,
}

impl Overrides {
    pub fn apply(&self, map: &mut KeyMap) {
        let mut set = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                map.insert(key.to_string(), v);
            }
        };
        set("seed", self.seed.map(|s| s.to_string()));
        set("threads", self.threads.clone());
        set("k", self.k.clone());
        set("l", self.l.clone());
        set("T", self.t.clone());
        set("replicates", self.replicates.map(|r| r.to_string()));
        set("grid", self.grid.clone());
    }
}

/// A validated deviation study plus its canonical configuration echo.
#[derive(Debug, Clone)]
pub struct Study {
    pub config: DeviationStudyConfig,
    /// Every setting that affects the output, in canonical form. Thread count
    /// is excluded since results do not depend on it.
    pub echo: KeyMap,
}

pub fn study_from_map(map: &KeyMap) -> Result<Study> {
    config::check_known(map, &allowed(STUDY_KEYS))?;
    let family: String = config::require(map, "family")?;
    let spec = config::distribution(map, &family)?;
    let n_total: usize = config::require(map, "N")?;
    let k: usize = config::require(map, "k")?;
    let l: usize = config::get(map, "l")?.unwrap_or(1);
    let budget = config::parse_budget(map.get("T").map_or("auto", String::as_str))?;
    let replicates: usize = config::require(map, "replicates")?;
    let grid_text = map.get("grid").map_or(DEFAULT_GRID, String::as_str);
    let t_grid: Vec<f64> = config::list(grid_text, "grid")?;
    let est_text = map
        .get("estimators")
        .map_or(DEFAULT_ESTIMATORS, String::as_str);
    let estimators: Vec<EstimatorId> = config::list(est_text, "estimators")?;
    let master_seed: u64 = config::require(map, "seed")?;
    let threads = config::parse_threads(map.get("threads").map_or("auto", String::as_str))?;

    let config = DeviationStudyConfig {
        spec,
        n_total,
        estimators,
        k,
        l,
        budget,
        replicates,
        t_grid,
        master_seed,
        threads,
    };
    config.validate()?;

    let mut echo: KeyMap = config::distribution_pairs(&spec)
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    let join = |parts: Vec<String>| parts.join(",");
    echo.insert("N".into(), n_total.to_string());
    echo.insert("k".into(), k.to_string());
    echo.insert("l".into(), l.to_string());
    echo.insert("T".into(), config::format_budget(budget));
    echo.insert("replicates".into(), replicates.to_string());
    echo.insert(
        "grid".into(),
        join(config.t_grid.iter().map(|&t| num(t)).collect()),
    );
    echo.insert(
        "estimators".into(),
        join(config.estimators.iter().map(|e| e.to_string()).collect()),
    );
    echo.insert("seed".into(), master_seed.to_string());
    Ok(Study { config, echo })
}

#[derive(Debug, Clone)]
pub struct SimulateOutput {
    pub csv: String,
    pub json: String,
    pub csv_path: PathBuf,
    pub json_path: PathBuf,
}

fn curve_rows(curve: &EstimatorCurve) -> impl Iterator<Item = String> + '_ {
    let c = &curve.curve;
    c.points.iter().map(move |p| {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            curve.estimator,
            num(p.t),
            num(p.threshold),
            num(p.p_hat),
            num(p.p_stderr),
            num(p.c_hat.value()),
            u8::from(p.c_hat.is_censored()),
            num(c.var_scaled),
            num(c.var_stderr),
        )
    })
}

pub fn render_study_csv(result: &StudyResult) -> String {
    let mut out = String::from(SIMULATE_HEADER);
    out.push('\n');
    for curve in &result.curves {
        for row in curve_rows(curve) {
            out.push_str(&row);
            out.push('\n');
        }
    }
    out
}

fn plan_json(plan: &BlockPlan, t: u64) -> Value {
    json!({
        "N": plan.n_total, "k": plan.k, "l": plan.l, "n": plan.n, "b": plan.b, "m": plan.m,
        "n_used": plan.n_used, "discarded_tail": plan.discarded_tail(), "T": t,
    })
}

pub fn render_study_json(study: &Study, result: &StudyResult) -> Result<String> {
    let plan = study.config.plan()?;
    let spec = &study.config.spec;
    let rows: Vec<Value> = result
        .curves
        .iter()
        .flat_map(|c| {
            c.curve.points.iter().map(move |p| {
                json!({
                    "estimator": c.estimator,
                    "t": p.t,
                    "threshold": p.threshold,
                    "p_hat": p.p_hat,
                    "p_stderr": p.p_stderr,
                    "c_hat": p.c_hat.value(),
                    "censored_flag": u8::from(p.c_hat.is_censored()),
                    "var_scaled": c.curve.var_scaled,
                    "var_stderr": c.curve.var_stderr,
                })
            })
        })
        .collect();
    Ok(pretty(&json!({
        "software": software(),
        "config": Value::Object(study.echo.iter().map(|(k, v)| (k.clone(), json!(v))).collect::<Map<_, _>>()),
        "plan": plan_json(&plan, result.t),
        "population": { "mu": spec.mu(), "sigma": spec.sigma(), "epsilon_max": spec.epsilon_max() },
        "rows": rows,
        "comparisons": result.comparisons,
    })))
}

/// Runs a deviation study and writes `simulate_seed<seed>.{csv,json}`.
pub fn cmd_simulate(map: &KeyMap, out_dir: &Path) -> Result<SimulateOutput> {
    let study = study_from_map(map)?;
    let result = run_study(&study.config)?;
    let csv = render_study_csv(&result);
    let json = render_study_json(&study, &result)?;
    let seed = study.config.master_seed;
    let csv_path = out_dir.join(format!("simulate_seed{seed}.csv"));
    let json_path = out_dir.join(format!("simulate_seed{seed}.json"));
    write_atomic(&csv_path, csv.as_bytes())?;
    write_atomic(&json_path, json.as_bytes())?;
    Ok(SimulateOutput {
        csv,
        json,
        csv_path,
        json_path,
    })
}

// ---------------------------------------------------------------- diagnose

const DIAGNOSE_KEYS: &[&str] = &[
    "seed",
    "threads",
    "m_grid",
    "g_replicates",
    "l",
    "b",
    "k",
    "t",
    "epsilon",
    "outer",
    "inner",
];

#[derive(Debug, Clone)]
pub struct DiagnoseOutput {
    pub report: DiagnosticsReport,
    pub csv: String,
    pub json: String,
    pub csv_path: PathBuf,
    pub json_path: PathBuf,
}

/// Evaluates `g(m)` over an `m` grid and, when `l` and `b` are given, the
/// Hajek-projection variance at `(l, b, k, t)`.
pub fn cmd_diagnose(map: &KeyMap, out_dir: &Path) -> Result<DiagnoseOutput> {
    config::check_known(map, &allowed(DIAGNOSE_KEYS))?;
    let family: String = config::require(map, "family")?;
    let spec = config::distribution(map, &family)?;
    let seed: u64 = config::require(map, "seed")?;
    let threads = config::parse_threads(map.get("threads").map_or("auto", String::as_str))?;
    let m_grid: Vec<usize> = config::list(
        map.get("m_grid").map_or("25,100,400", String::as_str),
        "m_grid",
    )?;
    let g_replicates: usize = config::get(map, "g_replicates")?.unwrap_or(1_000_000);
    let l: Option<usize> = config::get(map, "l")?;
    let b: Option<usize> = config::get(map, "b")?;
    let k: usize = config::get(map, "k")?.unwrap_or(64);
    let epsilon: f64 = match config::get(map, "epsilon")? {
        Some(e) => e,
        None => match spec.epsilon_max() {
            Some(e) if e <= 1.0 => 0.5 * e,
            _ => 1.0,
        },
    };
    let outer: usize = config::get(map, "outer")?.unwrap_or(5000);
    let inner: usize = config::get(map, "inner")?.unwrap_or(2000);
    if m_grid.is_empty() {
        return Err(CliError::Config("m_grid is empty".into()));
    }

    let mut echo = KeyMap::new();
    for (key, v) in config::distribution_pairs(&spec) {
        echo.insert(key.into(), v);
    }
    echo.insert("seed".into(), seed.to_string());
    echo.insert(
        "m_grid".into(),
        m_grid
            .iter()
            .map(|m| m.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    echo.insert("g_replicates".into(), g_replicates.to_string());

    let g = g_of_m_grid(&spec, &m_grid, g_replicates, mix_seed(seed, 0))?;
    let hajek = match (l, b) {
        (Some(l), Some(b)) => {
            let plan = BlockPlan::new(l * b * k, k, l)?;
            let t = match map.get("t").map(String::as_str) {
                None | Some("auto") => {
                    let (lower, upper) = t_range(plan.n, l, plan.m, epsilon);
                    geometric_midpoint(lower, upper)
                }
                Some(_) => config::require(map, "t")?,
            };
            for (key, v) in [
                ("l", l.to_string()),
                ("b", b.to_string()),
                ("k", k.to_string()),
                ("t", map.get("t").cloned().unwrap_or_else(|| "auto".into())),
                ("epsilon", num(epsilon)),
                ("outer", outer.to_string()),
                ("inner", inner.to_string()),
            ] {
                echo.insert(key.into(), v);
            }
            let run = || hajek_variance(&spec, &plan, t, outer, inner, mix_seed(seed, 1));
            Some(with_threads(threads, run)?)
        }
        (None, None) => None,
        _ => {
            return Err(CliError::Config(
                "hajek diagnostics need both 'l' and 'b'".into(),
            ))
        }
    };
    let report = DiagnosticsReport { g, hajek };

    let mut csv = String::from(DIAGNOSE_HEADER);
    csv.push('\n');
    for e in &report.g {
        let _ = writeln!(csv, "g_m,{},,,,,{},{}", e.m, num(e.estimate), num(e.stderr));
    }
    if let Some(h) = &report.hajek {
        let _ = writeln!(
            csv,
            "hajek_var,{},{},{},{},{},{},{}",
            h.l * h.b,
            h.l,
            h.b,
            h.k,
            num(h.t),
            num(h.estimate),
            num(h.stderr)
        );
    }
    let json = pretty(&json!({
        "software": software(),
        "config": Value::Object(echo.iter().map(|(k, v)| (k.clone(), json!(v))).collect::<Map<_, _>>()),
        "report": report,
    }));
    let csv_path = out_dir.join(format!("diagnose_seed{seed}.csv"));
    let json_path = out_dir.join(format!("diagnose_seed{seed}.json"));
    write_atomic(&csv_path, csv.as_bytes())?;
    write_atomic(&json_path, json.as_bytes())?;
    Ok(DiagnoseOutput {
        report,
        csv,
        json,
        csv_path,
        json_path,
    })
}

fn with_threads<T: Send>(
    threads: Threads,
    run: impl FnOnce() -> blockmom::Result<T> + Send,
) -> Result<T> {
    Ok(match threads {
        Threads::Auto => run()?,
        Threads::Fixed(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?
            .install(run)?,
    })
}

// ---------------------------------------------------------------- sweep

#[derive(Debug, Clone)]
pub struct SweepCell {
    pub family: String,
    pub k: String,
    pub l: String,
    pub t: String,
}

impl SweepCell {
    fn file_name(&self) -> String {
        format!(
            "cell_{}_k{}_l{}_T{}.csv",
            self.family, self.k, self.l, self.t
        )
    }

    fn prefix(&self) -> String {
        format!("{},{},{},{}", self.family, self.k, self.l, self.t)
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub cell_paths: Vec<PathBuf>,
    pub computed: usize,
    pub reused: usize,
    pub merged_csv: String,
    pub merged_path: PathBuf,
}

fn split_list(map: &KeyMap, key: &str, default: &str) -> Vec<String> {
    map.get(key)
        .map_or(default, String::as_str)
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

/// Runs a simulate study for every `(family, k, l, T)` combination.
///
/// Each cell is written to its own file under `cells_seed<seed>/`; cells whose
/// file already exists are reused, so an interrupted sweep resumes where it
/// stopped. All cells share the master seed.
pub fn cmd_sweep(map: &KeyMap, out_dir: &Path) -> Result<SweepOutput> {
    config::check_known(map, &allowed(STUDY_KEYS))?;
    let families = split_list(map, "family", "");
    let ks = split_list(map, "k", "");
    let ls = split_list(map, "l", "1");
    let ts = split_list(map, "T", "auto");
    let cells_total = families.len() * ks.len() * ls.len() * ts.len();
    if cells_total == 0 {
        return Err(CliError::Config(
            "sweep needs at least one family and one k".into(),
        ));
    }
    if cells_total > MAX_SWEEP_CELLS {
        return Err(CliError::Config(format!(
            "sweep grid has {cells_total} cells, more than the limit of {MAX_SWEEP_CELLS}"
        )));
    }
    let seed: u64 = config::require(map, "seed")?;

    // Validate every cell before running any.
    let mut cells = Vec::with_capacity(cells_total);
    for family in &families {
        for k in &ks {
            for l in &ls {
                for t in &ts {
                    let mut cell_map = map.clone();
                    cell_map.insert("family".into(), family.clone());
                    cell_map.insert("k".into(), k.clone());
                    cell_map.insert("l".into(), l.clone());
                    cell_map.insert("T".into(), t.clone());
                    let study = study_from_map(&cell_map)?;
                    let cell = SweepCell {
                        family: family.clone(),
                        k: study.echo["k"].clone(),
                        l: study.echo["l"].clone(),
                        t: study.echo["T"].clone(),
                    };
                    cells.push((cell, study));
                }
            }
        }
    }

    let cell_dir = out_dir.join(format!("cells_seed{seed}"));
    let header = format!("{SWEEP_PREFIX},{SIMULATE_HEADER}");
    let mut merged = format!("{header}\n");
    let mut cell_paths = Vec::with_capacity(cells.len());
    let (mut computed, mut reused) = (0, 0);
    for (cell, study) in &cells {
        let path = cell_dir.join(cell.file_name());
        let text = if path.exists() {
            reused += 1;
            std::fs::read_to_string(&path)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        } else {
            computed += 1;
            let result = run_study(&study.config)?;
            let mut text = format!("{header}\n");
            for curve in &result.curves {
                for row in curve_rows(curve) {
                    let _ = writeln!(text, "{},{row}", cell.prefix());
                }
            }
            write_atomic(&path, text.as_bytes())?;
            text
        };
        merged.extend(text.lines().skip(1).map(|l| format!("{l}\n")));
        cell_paths.push(path);
    }
    let merged_path = out_dir.join(format!("sweep_seed{seed}.csv"));
    write_atomic(&merged_path, merged.as_bytes())?;
    Ok(SweepOutput {
        cell_paths,
        computed,
        reused,
        merged_csv: merged,
        merged_path,
    })
}
