#![allow(dead_code)]

use metafix_core::goalspace::DomainBox;
use metafix_core::metagoal::{MetaGoalSpec, Variant};
use metafix_core::simulator::{
    EstimationConfig, GlobalConfig, HybridConfig, InitialState, Objective, Proposal, ScenarioConfig,
};

/// Two-dimensional scenario on the unit square with a static well.
pub fn scenario(variant: Variant) -> ScenarioConfig {
    let mut metagoal = MetaGoalSpec::new(variant, 0.5, 4);
    metagoal.interval_ratio = 4;
    metagoal.drift_bound = 0.05;
    metagoal.meta_drift_bound = 0.05;
    metagoal.metric_drift_bound = 0.05;
    metagoal.horizon = 12;
    metagoal.target_variation = 0.1;
    ScenarioConfig {
        name: "test".into(),
        goal_dim: 2,
        domain: DomainBox::unit(2),
        env_noise_sigma: 0.0,
        objective: Objective::QuadraticWell {
            center: vec![0.7, 0.3],
            coupling: 1.0,
            scale: 0.5,
        },
        proposal: Proposal::Gaussian {
            scale: 0.05,
            adaptation: 0.0,
            drift_gain: 0.0,
            drift_anchor: None,
            meta_scale: 0.02,
            metric_scale: 0.05,
        },
        pursuit_rate: 0.5,
        modification_rate: 0.25,
        metagoal,
        intervals: 20,
        grid_cells_per_dim: 8,
        seed: 7,
        initial: InitialState {
            goals: vec![0.5, 0.5],
            internal: None,
            metric_weights: None,
            metric_exponent: 2.0,
            variation_scale: 0.05,
        },
        estimation: EstimationConfig {
            r_samples: 8,
            samples_per_cell: 8,
            mpv_ensemble: 32,
            mpv_quantile: 0.95,
            moderation_gain: 0.9,
        },
        global: GlobalConfig {
            candidates: 8,
            lambda: 0.1,
            polish_iters: 0,
        },
        hybrid: HybridConfig::default(),
    }
}

pub fn one_dim(variant: Variant, cells: usize) -> ScenarioConfig {
    let mut cfg = scenario(variant);
    cfg.goal_dim = 1;
    cfg.domain = DomainBox::unit(1);
    cfg.objective = Objective::QuadraticWell {
        center: vec![0.5],
        coupling: 1.0,
        scale: 0.5,
    };
    cfg.initial.goals = vec![0.5];
    cfg.grid_cells_per_dim = cells;
    cfg
}
