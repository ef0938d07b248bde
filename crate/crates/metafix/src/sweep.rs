use std::fs;

use metafix_core::simulator::{run_scenario, ScenarioConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cli::SweepArgs;
use crate::manifest::RunManifest;
use crate::output::{csv_bytes, num, opt_num, write_with_header};
use crate::simulate::{report, Summary, MANIFEST_FILE};
use crate::{CliResult, Failure};

pub const DEFAULT_MAX_CELLS: usize = 1024;
pub const SUMMARY_FILE: &str = "summary.csv";
pub const THREADS_ENV: &str = "METAFIX_THREADS";

/// Odd constant spreading cell seeds across the 64-bit space.
const SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweptParam {
    /// Dotted key into the scenario table, e.g. `metagoal.contraction_factor`.
    pub path: String,
    pub values: Vec<toml::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default = "one")]
    pub replications: usize,
    /// Defaults to the base scenario's seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
    #[serde(default)]
    pub param: Vec<SweptParam>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub sweep: SweepSpec,
    pub scenario: toml::Table,
}

/// Seed of cell `index`, kept to 63 bits because TOML integers are signed.
pub fn cell_seed(master: u64, index: usize) -> u64 {
    master.wrapping_add((index as u64).wrapping_mul(SEED_STRIDE)) & i64::MAX as u64
}

fn set_path(table: &mut toml::Table, path: &str, value: toml::Value) -> CliResult<()> {
    let mut keys = path.split('.').peekable();
    let mut cur = table;
    while let Some(k) = keys.next() {
        if k.is_empty() {
            return Err(Failure::Usage(format!("bad parameter path `{path}`")));
        }
        if keys.peek().is_none() {
            cur.insert(k.to_string(), value);
            return Ok(());
        }
        let next = cur.entry(k).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = next
            .as_table_mut()
            .ok_or_else(|| Failure::Usage(format!("`{k}` in parameter path `{path}` is not a table")))?;
    }
    Err(Failure::Usage(format!("bad parameter path `{path}`")))
}

fn cell_text(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Float(f) => num(*f),
        other => other.to_string(),
    }
}

/// One scenario of the grid.
#[derive(Debug, Clone)]
pub struct Cell {
    pub index: usize,
    pub replication: usize,
    pub values: Vec<toml::Value>,
    pub config: ScenarioConfig,
}

/// Expands the sweep into validated cells, in cell-index order.
pub fn expand(file: &SweepFile, max_cells: usize) -> CliResult<Vec<Cell>> {
    let spec = &file.sweep;
    if spec.param.len() > 2 {
        return Err(Failure::Usage("a sweep varies at most two parameters".into()));
    }
    if spec.replications == 0 || spec.param.iter().any(|p| p.values.is_empty()) {
        return Err(Failure::Usage("replications and every value list must be non-empty".into()));
    }
    let combos: usize = spec.param.iter().map(|p| p.values.len()).product();
    let total = combos.saturating_mul(spec.replications);
    if total > max_cells {
        return Err(Failure::Usage(format!("sweep has {total} cells, cap is {max_cells}")));
    }
    let base_seed = file.scenario.get("seed").and_then(toml::Value::as_integer).unwrap_or(0) as u64;
    let master = spec.master_seed.unwrap_or(base_seed);
    let mut cells = Vec::with_capacity(total);
    let mut problems = Vec::new();
    for index in 0..total {
        let (combo, replication) = (index / spec.replications, index % spec.replications);
        let mut table = file.scenario.clone();
        let mut rest = combo;
        let mut values = vec![toml::Value::Boolean(false); spec.param.len()];
        for (k, p) in spec.param.iter().enumerate().rev() {
            values[k] = p.values[rest % p.values.len()].clone();
            rest /= p.values.len();
        }
        for (p, v) in spec.param.iter().zip(&values) {
            set_path(&mut table, &p.path, v.clone())?;
        }
        table.insert("seed".into(), toml::Value::Integer(cell_seed(master, index) as i64));
        let parsed: Result<ScenarioConfig, _> = toml::Value::Table(table).try_into();
        match parsed {
            Ok(config) => {
                for v in config.violations() {
                    problems.push(format!("cell {index}: {v}"));
                }
                cells.push(Cell {
                    index,
                    replication,
                    values,
                    config,
                });
            }
            Err(e) => problems.push(format!("cell {index}: {e}")),
        }
    }
    if !problems.is_empty() {
        return Err(Failure::Usage(format!("invalid sweep configuration:\n  {}", problems.join("\n  "))));
    }
    Ok(cells)
}

pub fn threads_from_env() -> usize {
    std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse().ok()).unwrap_or(0)
}

/// Runs every cell (concurrently, `threads = 0` meaning all cores) and
/// returns the summaries in cell-index order.
pub fn run_cells(cells: &[Cell], threads: usize) -> CliResult<Vec<Summary>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure::Usage(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        cells
            .par_iter()
            .map(|c| report(&c.config, &run_scenario(&c.config)?).map(|r| r.summary))
            .collect()
    })
}

pub fn summary_table(file: &SweepFile, cells: &[Cell], summaries: &[Summary]) -> CliResult<Vec<u8>> {
    let mut headers: Vec<String> = ["cell", "replication", "seed"].iter().map(|s| s.to_string()).collect();
    headers.extend(file.sweep.param.iter().map(|p| p.path.clone()));
    headers.extend(
        ["plateau_level", "plateau_onset", "mean_empirical_c", "violation_rate", "self_model_accuracy"]
            .iter()
            .map(|s| s.to_string()),
    );
    let rows: Vec<Vec<String>> = cells
        .iter()
        .zip(summaries)
        .map(|(c, s)| {
            let mut row = vec![c.index.to_string(), c.replication.to_string(), c.config.seed.to_string()];
            row.extend(c.values.iter().map(cell_text));
            row.extend([
                num(s.plateau_level),
                s.plateau_onset.to_string(),
                opt_num(s.mean_empirical_c),
                num(s.violation_rate),
                opt_num(s.self_model_accuracy),
            ]);
            row
        })
        .collect();
    csv_bytes(&headers, &rows)
}

pub fn parse_sweep(text: &str) -> CliResult<SweepFile> {
    toml::from_str(text).map_err(|e| Failure::Usage(format!("malformed sweep config: {e}")))
}

pub fn cmd_sweep(a: &SweepArgs) -> CliResult<()> {
    let file = match (&a.config, &a.manifest) {
        (_, Some(m)) => parse_sweep(&RunManifest::load(m, "sweep")?.config)?,
        (Some(p), None) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", p.display())))?;
            parse_sweep(&text)?
        }
        (None, None) => return Err(Failure::Usage("pass --config or --manifest".into())),
    };
    let cells = expand(&file, a.max_cells)?;
    let summaries = run_cells(&cells, threads_from_env())?;
    let canonical = toml::to_string(&file).map_err(|e| Failure::Usage(format!("cannot encode sweep: {e}")))?;
    let master = cells.first().map_or(0, |c| c.config.seed);
    let manifest = RunManifest::new("sweep", canonical, master, &[SUMMARY_FILE, MANIFEST_FILE]);
    fs::create_dir_all(&a.out)?;
    write_with_header(&a.out.join(SUMMARY_FILE), &manifest, &summary_table(&file, &cells, &summaries)?)?;
    manifest.write(&a.out.join(MANIFEST_FILE))
}
