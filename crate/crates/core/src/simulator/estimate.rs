//! Distribution estimates over the goal grid and the empirical interval
//! operator built from seeded rollouts.

use alloc::sync::Arc;
use alloc::vec::Vec;

use super::agent::{step_interval, Agent};
use super::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::fixpoint::MarkovKernel;
use crate::goalspace::{DiscreteDistribution, Grid};
use crate::rng::{self, purpose};

/// Occupancy counts of goal positions after each N-step of one `M`-step
/// rollout (the start position is not counted).
fn rollout_counts(cfg: &ScenarioConfig, agent: &Agent, grid: &Grid, seed: u64, index: u64, counts: &mut [f64]) -> Result<()> {
    let mut a = agent.clone();
    let mut r = rng::stream(seed, purpose::ESTIMATE, index);
    for _ in 0..cfg.metagoal.steps_per_interval() {
        step_interval(&mut a, cfg, &mut r)?;
        counts[grid.cell_of(a.goals())] += 1.0;
    }
    Ok(())
}

fn occupancy(cfg: &ScenarioConfig, agent: &Agent, grid: &Grid, samples: usize, seed: u64) -> Result<Vec<f64>> {
    if samples == 0 {
        return Err(Error::invalid("at least one rollout is required"));
    }
    let mut counts = alloc::vec![0.0; grid.num_cells()];
    for s in 0..samples {
        rollout_counts(cfg, agent, grid, seed, s as u64, &mut counts)?;
    }
    let total: f64 = counts.iter().sum();
    counts.iter_mut().for_each(|c| *c /= total);
    Ok(counts)
}

/// `R(t)`: normalized whole-interval goal occupancy of `samples` rollouts.
#[allow(non_snake_case)]
pub fn estimate_R(
    cfg: &ScenarioConfig,
    agent: &Agent,
    grid: &Arc<Grid>,
    samples: usize,
    seed: u64,
) -> Result<DiscreteDistribution> {
    let probs = occupancy(cfg, agent, grid, samples, seed)?;
    DiscreteDistribution::from_weights(probs, grid.clone())
}

/// Lazily built rows of the empirical interval operator. Row `i` is the
/// occupancy of rollouts started from the template agent moved to cell
/// `i`'s center, with rollout seeds fixed per cell.
pub struct Realizer<'a> {
    cfg: &'a ScenarioConfig,
    template: Agent,
    grid: Arc<Grid>,
    samples_per_cell: usize,
    seed: u64,
    rows: Vec<Option<Vec<f64>>>,
}

impl<'a> Realizer<'a> {
    pub fn new(cfg: &'a ScenarioConfig, samples_per_cell: usize, seed: u64) -> Result<Self> {
        let template = Agent::initial(cfg)?;
        let grid = Arc::new(cfg.grid()?);
        Self::with_template(cfg, template, grid, samples_per_cell, seed)
    }

    pub fn with_template(
        cfg: &'a ScenarioConfig,
        template: Agent,
        grid: Arc<Grid>,
        samples_per_cell: usize,
        seed: u64,
    ) -> Result<Self> {
        if samples_per_cell == 0 {
            return Err(Error::invalid("samples_per_cell must be at least 1"));
        }
        let n = grid.num_cells();
        Ok(Realizer {
            cfg,
            template,
            grid,
            samples_per_cell,
            seed,
            rows: alloc::vec![None; n],
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn row(&mut self, cell: usize) -> Result<&[f64]> {
        if self.rows[cell].is_none() {
            let agent = self.template.translated_to(&self.grid.center(cell));
            let seed = rng::derive(self.seed, purpose::KERNEL, cell as u64);
            let row = occupancy(self.cfg, &agent, &self.grid, self.samples_per_cell, seed)?;
            self.rows[cell] = Some(row);
        }
        Ok(self.rows[cell].as_deref().unwrap())
    }

    /// Image of `r` under the operator: cell rows mixed by `r`'s mass.
    pub fn apply(&mut self, r: &DiscreteDistribution) -> Result<DiscreteDistribution> {
        if **r.grid() != *self.grid {
            return Err(Error::GridMismatch);
        }
        let mut out = alloc::vec![0.0; self.grid.num_cells()];
        for (cell, &p) in r.probs().iter().enumerate() {
            if p > 0.0 {
                let row = self.row(cell)?;
                out.iter_mut().zip(row).for_each(|(o, q)| *o += p * q);
            }
        }
        DiscreteDistribution::from_weights(out, self.grid.clone())
    }

    pub fn kernel(mut self) -> Result<MarkovKernel> {
        let n = self.grid.num_cells();
        let rows = (0..n).map(|c| self.row(c).map(<[f64]>::to_vec)).collect::<Result<Vec<_>>>()?;
        MarkovKernel::new(rows, self.grid.clone())
    }
}

/// `F(R)`: one interval of the simulated dynamics pushed through a distribution.
#[allow(non_snake_case)]
pub fn realize_F(
    cfg: &ScenarioConfig,
    r: &DiscreteDistribution,
    samples_per_cell: usize,
    seed: u64,
) -> Result<DiscreteDistribution> {
    if **r.grid() != cfg.grid()? {
        return Err(Error::GridMismatch);
    }
    let template = Agent::initial(cfg)?;
    Realizer::with_template(cfg, template, r.grid().clone(), samples_per_cell, seed)?.apply(r)
}

/// Row-stochastic matrix of the interval operator on the scenario grid.
pub fn build_kernel(cfg: &ScenarioConfig, samples_per_cell: usize, seed: u64) -> Result<MarkovKernel> {
    Realizer::new(cfg, samples_per_cell, seed)?.kernel()
}
