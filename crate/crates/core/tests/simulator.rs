mod common;

use std::sync::Arc;

use common::{one_dim, scenario};
use metafix_core::fixpoint::markov_invariant;
use metafix_core::goalspace::{total_variation, DiscreteDistribution};
use metafix_core::metagoal::{FeasibilityFlags, Variant};
use metafix_core::rng::{self, purpose};
use metafix_core::simulator::*;
use proptest::prelude::*;

/// No noise, no proposals, well centered on the goals: nothing moves.
fn frozen(variant: Variant) -> ScenarioConfig {
    let mut cfg = scenario(variant);
    cfg.proposal = Proposal::None;
    cfg.objective = Objective::QuadraticWell {
        center: cfg.initial.goals.clone(),
        coupling: 1.0,
        scale: 0.5,
    };
    cfg
}

#[test]
fn frozen_state_is_unchanged() {
    let cfg = frozen(Variant::Unconstrained);
    let mut agent = Agent::initial(&cfg).unwrap();
    let start = agent.state.clone();
    let mut r = rng::stream(1, purpose::MAIN, 0);
    for _ in 0..10 {
        step_interval(&mut agent, &cfg, &mut r).unwrap();
    }
    assert_eq!(agent.state, start);
}

#[test]
fn goal_stability_checks_hold_every_step() {
    let mut cfg = scenario(Variant::GoalStability);
    cfg.proposal = Proposal::Gaussian {
        scale: 0.3,
        adaptation: 0.0,
        drift_gain: 0.0,
        drift_anchor: None,
        meta_scale: 0.0,
        metric_scale: 0.0,
    };
    let mut agent = Agent::initial(&cfg).unwrap();
    let mut r = rng::stream(2, purpose::MAIN, 0);
    let mut checked = 0;
    for _ in 0..50 {
        if let Some(ok) = step_interval(&mut agent, &cfg, &mut r).unwrap().check {
            assert!(ok);
            checked += 1;
        }
    }
    assert_eq!(checked, 49);
}

#[test]
fn zero_drift_bound_freezes_goals_only() {
    let mut cfg = scenario(Variant::GlobalModerated);
    cfg.metagoal.drift_bound = 0.0;
    let mut agent = Agent::initial(&cfg).unwrap();
    let goals = agent.goals().to_vec();
    let theta = agent.theta().to_vec();
    let mut r = rng::stream(3, purpose::MAIN, 0);
    for _ in 0..5 {
        let rep = step_interval(&mut agent, &cfg, &mut r).unwrap();
        assert_eq!(rep.check, Some(true));
    }
    assert_eq!(agent.goals(), goals.as_slice());
    assert_ne!(agent.theta(), theta.as_slice());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn steps_stay_in_domain(seed in any::<u64>(), sigma in 0.0..0.5f64, v in 0usize..8) {
        let mut cfg = scenario(Variant::ALL[v]);
        cfg.env_noise_sigma = sigma;
        if cfg.metagoal.variant == Variant::Hybrid {
            cfg.hybrid.window = 2;
        }
        let mut agent = Agent::initial(&cfg).unwrap();
        let mut r = rng::stream(seed, purpose::MAIN, 0);
        for _ in 0..6 {
            let rep = step_interval(&mut agent, &cfg, &mut r).unwrap();
            prop_assert!(cfg.domain.contains(agent.goals(), 0.0));
            prop_assert!((0.0..=1.0).contains(&rep.satisfaction));
        }
    }

    #[test]
    fn satisfaction_is_a_probability(
        theta in prop::array::uniform2(-1.0..2.0f64),
        goals in prop::array::uniform2(0.0..1.0f64),
        t in 0u64..1000,
        kind in 0usize..3,
    ) {
        let objective = match kind {
            0 => Objective::QuadraticWell { center: vec![0.2, 0.9], coupling: 2.0, scale: 0.1 },
            1 => Objective::MovingWell {
                center: vec![0.2, 0.9],
                velocity: vec![0.01, -0.003],
                bounce_lo: vec![0.0, 0.0],
                bounce_hi: vec![1.0, 1.0],
                coupling: 1.0,
                scale: 1.0,
            },
            _ => Objective::Bimodal { centers: [vec![0.2, 0.2], vec![0.8, 0.8]], coupling: 0.5, scale: 0.3 },
        };
        let s = objective.satisfaction(&theta, &goals, t);
        prop_assert!((0.0..=1.0).contains(&s));
        let best = objective.optimum(&goals, t);
        prop_assert!(objective.satisfaction(&best, &goals, t) >= s - 1e-12);
    }
}

#[test]
fn frozen_estimate_is_a_point_mass() {
    let cfg = frozen(Variant::Unconstrained);
    let agent = Agent::initial(&cfg).unwrap();
    let grid = Arc::new(cfg.grid().unwrap());
    let r = estimate_R(&cfg, &agent, &grid, 5, 9).unwrap();
    let cell = grid.cell_of(agent.goals());
    assert_eq!(r, DiscreteDistribution::point_mass(grid, cell).unwrap());
}

#[test]
fn single_sample_supports_visited_cells() {
    let mut cfg = scenario(Variant::Unconstrained);
    cfg.env_noise_sigma = 0.05;
    let agent = Agent::initial(&cfg).unwrap();
    let grid = Arc::new(cfg.grid().unwrap());
    let seed = 21;
    let r = estimate_R(&cfg, &agent, &grid, 1, seed).unwrap();

    let mut replay = agent.clone();
    let mut s = rng::stream(seed, purpose::ESTIMATE, 0);
    let mut visited = std::collections::BTreeSet::new();
    for _ in 0..cfg.metagoal.steps_per_interval() {
        step_interval(&mut replay, &cfg, &mut s).unwrap();
        visited.insert(grid.cell_of(replay.goals()));
    }
    let support: std::collections::BTreeSet<usize> = r.support().collect();
    assert_eq!(support, visited);
}

#[test]
fn symmetric_branches_give_symmetric_estimate() {
    let mut cfg = one_dim(Variant::Unconstrained, 9);
    cfg.proposal = Proposal::Branch { step: 0.1 };
    let agent = Agent::initial(&cfg).unwrap();
    let grid = Arc::new(cfg.grid().unwrap());
    let samples = 400;
    let r = estimate_R(&cfg, &agent, &grid, samples, 4).unwrap();
    let p = r.probs();
    let tol = 3.0 / (samples as f64).sqrt();
    for i in 0..9 {
        assert!((p[i] - p[8 - i]).abs() <= tol, "cell {i}: {} vs {}", p[i], p[8 - i]);
    }
}

fn noisy_1d() -> ScenarioConfig {
    let mut cfg = one_dim(Variant::Unconstrained, 16);
    cfg.env_noise_sigma = 0.03;
    cfg.proposal = Proposal::Gaussian {
        scale: 0.05,
        adaptation: 0.0,
        drift_gain: -0.2,
        drift_anchor: Some(vec![0.3]),
        meta_scale: 0.0,
        metric_scale: 0.0,
    };
    cfg
}

#[test]
fn realize_f_is_linear_with_shared_rollouts() {
    let cfg = noisy_1d();
    let grid = Arc::new(cfg.grid().unwrap());
    let n = grid.num_cells();
    let p = DiscreteDistribution::from_weights((0..n).map(|i| (i % 5 + 1) as f64).collect(), grid.clone()).unwrap();
    let q = DiscreteDistribution::point_mass(grid.clone(), 3).unwrap();
    for alpha in [0.0, 0.3, 0.5, 1.0] {
        let mixed = p.mix(&q, alpha).unwrap();
        let lhs = realize_F(&cfg, &mixed, 6, 17).unwrap();
        let fp = realize_F(&cfg, &p, 6, 17).unwrap();
        let fq = realize_F(&cfg, &q, 6, 17).unwrap();
        for i in 0..n {
            let rhs = alpha * fp.probs()[i] + (1.0 - alpha) * fq.probs()[i];
            assert!((lhs.probs()[i] - rhs).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn realize_f_is_non_expansive(
        a in prop::collection::vec(0.0..1.0f64, 16),
        b in prop::collection::vec(0.0..1.0f64, 16),
        seed in any::<u64>(),
    ) {
        let cfg = noisy_1d();
        let grid = Arc::new(cfg.grid().unwrap());
        let lift = |w: Vec<f64>| DiscreteDistribution::from_weights(w.iter().map(|x| x + 1e-3).collect(), grid.clone()).unwrap();
        let (p, q) = (lift(a), lift(b));
        let before = total_variation(&p, &q).unwrap();
        let after = total_variation(&realize_F(&cfg, &p, 4, seed).unwrap(), &realize_F(&cfg, &q, 4, seed).unwrap()).unwrap();
        prop_assert!(after <= before + 1e-9);
    }
}

#[test]
fn frozen_operator_fixes_point_masses_and_kernel_is_identity() {
    let cfg = frozen(Variant::Unconstrained);
    let grid = Arc::new(cfg.grid().unwrap());
    for cell in [0, 9, 63] {
        let p = DiscreteDistribution::point_mass(grid.clone(), cell).unwrap();
        assert_eq!(realize_F(&cfg, &p, 3, 0).unwrap(), p);
    }
    let k = build_kernel(&cfg, 2, 0).unwrap();
    for i in 0..k.size() {
        for j in 0..k.size() {
            assert_eq!(k.get(i, j), if i == j { 1.0 } else { 0.0 });
        }
    }
}

#[test]
fn reset_dynamics_are_rank_one() {
    let mut cfg = scenario(Variant::Unconstrained);
    cfg.proposal = Proposal::Reset { target: vec![0.81, 0.12] };
    let grid = Arc::new(cfg.grid().unwrap());
    let attractor = grid.cell_of(&[0.81, 0.12]);

    // direct rollout histogram from an arbitrary start
    let mut agent = Agent::initial(&cfg).unwrap().translated_to(&[0.33, 0.66]);
    let mut s = rng::stream(0, purpose::MAIN, 0);
    let mut hist = vec![0.0; grid.num_cells()];
    for _ in 0..cfg.metagoal.steps_per_interval() {
        step_interval(&mut agent, &cfg, &mut s).unwrap();
        hist[grid.cell_of(agent.goals())] += 1.0;
    }
    let direct = DiscreteDistribution::from_weights(hist, grid.clone()).unwrap();
    let point = DiscreteDistribution::point_mass(grid.clone(), attractor).unwrap();
    assert_eq!(direct, point);

    let r = DiscreteDistribution::from_weights((0..64).map(|i| (i * 7 % 11) as f64 + 0.5).collect(), grid.clone()).unwrap();
    let image = realize_F(&cfg, &r, 3, 5).unwrap();
    assert!(total_variation(&image, &point).unwrap() < 1e-12);
}

#[test]
fn jump_kernel_rows_are_uniform() {
    let mut cfg = one_dim(Variant::Unconstrained, 8);
    cfg.proposal = Proposal::Jump;
    cfg.modification_rate = 1.0;
    let draws = 512 * cfg.metagoal.steps_per_interval();
    let k = build_kernel(&cfg, 512, 8).unwrap();
    let tol = 3.0 * (0.125 * 0.875 / draws as f64).sqrt();
    for i in 0..8 {
        for &p in k.row(i) {
            assert!((p - 0.125).abs() <= tol, "row {i}: {p}");
        }
    }
}

#[test]
fn kernel_invariant_matches_long_run_occupancy() {
    let mut cfg = noisy_1d();
    cfg.metagoal.interval_ratio = 1;
    cfg.metagoal.horizon = 4;
    let k = build_kernel(&cfg, 2000, 31).unwrap();
    let pi = markov_invariant(&k, 1e-12, 100_000).unwrap();

    let grid = k.grid().clone();
    let mut agent = Agent::initial(&cfg).unwrap();
    let mut s = rng::stream(99, purpose::MAIN, 0);
    let mut hist = vec![0.0; grid.num_cells()];
    for _ in 0..100_000 {
        step_interval(&mut agent, &cfg, &mut s).unwrap();
        hist[grid.cell_of(agent.goals())] += 1.0;
    }
    let direct = DiscreteDistribution::from_weights(hist, grid.clone()).unwrap();
    let tv = total_variation(&pi, &direct).unwrap();
    assert!(tv < 0.05, "TV {tv}");
}

#[test]
fn runs_are_deterministic() {
    let mut cfg = scenario(Variant::GlobalModeratedDynamic);
    cfg.env_noise_sigma = 0.02;
    cfg.intervals = 4;
    assert_eq!(run_scenario(&cfg).unwrap(), run_scenario(&cfg).unwrap());
    let mut other = cfg.clone();
    other.seed += 1;
    assert_ne!(run_scenario(&other).unwrap(), run_scenario(&cfg).unwrap());
}

#[test]
fn record_shape_matches_timing() {
    let cfg = scenario(Variant::GoalStability);
    let t = run_scenario(&cfg).unwrap();
    let per = cfg.metagoal.steps_per_interval();
    assert_eq!(t.intervals.len(), cfg.intervals);
    assert_eq!(t.distributions.len(), cfg.intervals + 1);
    assert_eq!(t.snapshots.len(), cfg.intervals * per + 1);
    for (i, (step, _)) in t.snapshots.iter().enumerate() {
        assert_eq!(*step, i as u64 * cfg.metagoal.inner_interval);
    }
    let again = t.agent_at_interval(&cfg, 3).unwrap();
    assert_eq!(again.state, t.snapshots[3 * per].1);
}

#[test]
fn zero_noise_goal_stability_decays_geometrically() {
    let mut cfg = scenario(Variant::GoalStability);
    cfg.proposal = Proposal::Gaussian {
        scale: 0.3,
        adaptation: 0.0,
        drift_gain: 0.0,
        drift_anchor: None,
        meta_scale: 0.0,
        metric_scale: 0.0,
    };
    let t = run_scenario(&cfg).unwrap();
    let c = cfg.metagoal.contraction_factor;
    let per = t.steps_per_interval;
    let steps: Vec<f64> = t
        .snapshots
        .windows(2)
        .map(|w| cfg.initial_metric().unwrap().distance(w[1].1.goals.coords(), w[0].1.goals.coords()).unwrap())
        .collect();
    for i in per..steps.len() {
        assert!(steps[i] <= c * steps[i - 1] + 1e-6, "step {i}: {} after {}", steps[i], steps[i - 1]);
    }
    assert!(t.intervals.iter().all(|m| m.check != Some(false)));
}

#[test]
fn unconstrained_noise_does_not_settle() {
    let mut cfg = scenario(Variant::Unconstrained);
    cfg.env_noise_sigma = 0.05;
    cfg.intervals = 40;
    let t = run_scenario(&cfg).unwrap();
    let s: Vec<f64> = t.intervals.iter().map(|m| m.goal_step).collect();
    let half = s.len() / 2;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&s[half..]) >= 0.5 * mean(&s[..half]));
}

#[test]
fn moderated_gap_contracts() {
    let cfg = scenario(Variant::ModeratedEvolution);
    let t = run_scenario(&cfg).unwrap();
    let m = cfg.metagoal.target_variation;
    let gaps: Vec<f64> = t.intervals.iter().map(|i| (i.mpv.unwrap() - m).abs()).collect();
    for w in gaps.windows(2) {
        if w[0] > 0.05 * m {
            assert!(w[1] <= (cfg.metagoal.contraction_factor + 0.05) * w[0]);
        }
    }
    assert!(*gaps.last().unwrap() < 0.05 * m);
}

#[test]
fn starving_hybrid_switches_at_window() {
    let mut cfg = scenario(Variant::Hybrid);
    cfg.objective = Objective::QuadraticWell {
        center: vec![4.0, -3.0],
        coupling: 1.0,
        scale: 0.1,
    };
    cfg.hybrid.window = 5;
    cfg.hybrid.flags = FeasibilityFlags::default();
    cfg.intervals = 8;
    let t = run_scenario(&cfg).unwrap();
    let modes: Vec<Variant> = t.intervals.iter().map(|m| m.mode).collect();
    assert!(modes[..5].iter().all(|m| *m == Variant::GlobalModeratedDynamic), "{modes:?}");
    assert!(modes[5..].iter().all(|m| *m == Variant::ModeratedEvolution), "{modes:?}");
}

#[test]
fn compute_budget_revokes_global_mode() {
    let mut cfg = scenario(Variant::Hybrid);
    cfg.hybrid.compute_budget = Some(0);
    cfg.intervals = 3;
    let t = run_scenario(&cfg).unwrap();
    assert_eq!(t.intervals[0].mode, Variant::GlobalModeratedDynamic);
    assert_eq!(t.intervals[1].mode, Variant::GoalStability);
}

#[test]
fn invalid_config_lists_every_violation() {
    let mut cfg = scenario(Variant::GoalStability);
    cfg.metagoal.contraction_factor = 1.5;
    cfg.env_noise_sigma = -1.0;
    cfg.grid_cells_per_dim = 100;
    match cfg.validate() {
        Err(metafix_core::Error::Config(v)) => assert!(v.len() >= 3, "{v:?}"),
        other => panic!("{other:?}"),
    }
}
