use std::fs;

use metafix_core::diagnostics::{analyze, self_model_accuracy, ConvergenceReport};
use metafix_core::fixpoint::ContractionMetric;
use metafix_core::simulator::{run_scenario, ScenarioConfig, TrajectoryRecord};
use serde::{Deserialize, Serialize};

use crate::cli::SimulateArgs;
use crate::manifest::RunManifest;
use crate::output::{csv_bytes, num, opt_num, write_with_header};
use crate::{CliResult, Failure};

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const REPORT_FILE: &str = "report.toml";
pub const MANIFEST_FILE: &str = "manifest.toml";

/// Probe states used for the self-model score of global-variant runs.
pub const SELF_MODEL_PROBES: usize = 16;

pub const TRAJECTORY_COLUMNS: [&str; 13] = [
    "index",
    "mode",
    "goal_step",
    "goal_interval",
    "state_distance",
    "satisfaction",
    "check",
    "violation_rate",
    "mpv",
    "variation_scale",
    "residual_w1",
    "residual_tv",
    "empirical_c_w1",
];

/// One run boiled down to the numbers a sweep tabulates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub plateau_level: f64,
    pub plateau_onset: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_empirical_c: Option<f64>,
    pub violation_rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub self_model_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    pub variant: String,
    pub intervals: usize,
    pub seed: u64,
    pub mean_satisfaction: f64,
    /// Residuals measured in W1.
    pub summary: Summary,
    /// The same analysis in total variation.
    pub summary_tv: Summary,
}

pub fn parse_scenario(text: &str) -> CliResult<ScenarioConfig> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Failure::Usage(format!("malformed scenario config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn canonical(cfg: &ScenarioConfig) -> CliResult<String> {
    toml::to_string(cfg).map_err(|e| Failure::Usage(format!("cannot encode config: {e}")))
}

fn summary_of(rep: &ConvergenceReport, self_model: Option<f64>) -> Summary {
    Summary {
        plateau_level: rep.plateau_level,
        plateau_onset: rep.plateau_onset,
        mean_empirical_c: rep.mean_empirical_c(),
        violation_rate: rep.condition_violation_rate,
        self_model_accuracy: self_model,
    }
}

pub fn report(cfg: &ScenarioConfig, traj: &TrajectoryRecord) -> CliResult<Report> {
    let w1 = analyze(traj, ContractionMetric::W1)?;
    let tv = analyze(traj, ContractionMetric::Tv)?;
    let self_model = if cfg.metagoal.variant.is_global() {
        Some(self_model_accuracy(cfg, traj, SELF_MODEL_PROBES, cfg.seed)?)
    } else {
        None
    };
    let k = traj.intervals.len().max(1) as f64;
    Ok(Report {
        scenario: cfg.name.clone(),
        variant: cfg.metagoal.variant.name().into(),
        intervals: traj.intervals.len(),
        seed: cfg.seed,
        mean_satisfaction: traj.intervals.iter().map(|m| m.satisfaction).sum::<f64>() / k,
        summary: summary_of(&w1, self_model),
        summary_tv: summary_of(&tv, None),
    })
}

pub fn trajectory_rows(traj: &TrajectoryRecord) -> Vec<Vec<String>> {
    let c = analyze(traj, ContractionMetric::W1).map(|r| r.empirical_c_series).unwrap_or_default();
    let mut failed = 0usize;
    traj.intervals
        .iter()
        .enumerate()
        .map(|(i, m)| {
            failed += (m.check == Some(false)) as usize;
            vec![
                m.index.to_string(),
                m.mode.name().to_string(),
                num(m.goal_step),
                num(m.goal_interval),
                num(m.state_distance),
                num(m.satisfaction),
                m.check.map(|b| b.to_string()).unwrap_or_default(),
                num(failed as f64 / (i + 1) as f64),
                opt_num(m.mpv),
                num(m.variation_scale),
                num(m.residual_w1),
                num(m.residual_tv),
                opt_num(c.get(i).copied().flatten()),
            ]
        })
        .collect()
}

pub fn cmd_simulate(a: &SimulateArgs) -> CliResult<()> {
    let cfg = match (&a.config, &a.manifest) {
        (_, Some(m)) => parse_scenario(&RunManifest::load(m, "simulate")?.config)?,
        (Some(p), None) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", p.display())))?;
            parse_scenario(&text)?
        }
        (None, None) => return Err(Failure::Usage("pass --config or --manifest".into())),
    };
    let traj = run_scenario(&cfg)?;
    let rep = report(&cfg, &traj)?;

    let manifest = RunManifest::new("simulate", canonical(&cfg)?, cfg.seed, &[TRAJECTORY_FILE, REPORT_FILE, MANIFEST_FILE]);
    fs::create_dir_all(&a.out)?;
    let headers: Vec<String> = TRAJECTORY_COLUMNS.iter().map(|s| s.to_string()).collect();
    let table = csv_bytes(&headers, &trajectory_rows(&traj))?;
    write_with_header(&a.out.join(TRAJECTORY_FILE), &manifest, &table)?;
    let body = toml::to_string(&rep).map_err(|e| Failure::Usage(format!("cannot encode report: {e}")))?;
    write_with_header(&a.out.join(REPORT_FILE), &manifest, body.as_bytes())?;
    manifest.write(&a.out.join(MANIFEST_FILE))
}
