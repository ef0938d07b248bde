use std::path::Path;

use metafix_core::fixpoint::{
    banach_iterate, grid_fixed_point_search, maps, markov_invariant, surrogate_guided_search, FixedPointResult,
    MarkovKernel, SurrogateSearchConfig,
};
use metafix_core::goalspace::{total_variation, DomainBox};
use metafix_core::Error;
use serde::{Deserialize, Serialize};

use crate::cli::{SolveArgs, Solver};
use crate::manifest::RunManifest;
use crate::output::{read_kernel_csv, write_with_header};
use crate::{CliResult, Failure};

/// Everything a solve depends on; its TOML form is what the manifest digests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveRequest {
    pub solver: Solver,
    pub map: Option<String>,
    pub kernel_rows: Option<Vec<Vec<f64>>>,
    pub tol: f64,
    pub epsilon: f64,
    pub budget: usize,
    pub seed: u64,
    pub x0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub solver: Solver,
    pub source: String,
    /// `converged`, or the kind of numeric failure.
    pub status: String,
    pub point: Vec<f64>,
    pub residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evaluations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub empirical_contraction: Option<f64>,
}

/// Resolves ids such as `cos1d` or `spiral2d` to a map and its dimension.
pub fn parse_map(id: &str) -> CliResult<(maps::SuiteMap, usize)> {
    let unknown = || Failure::Usage(format!("unknown map id `{id}` (try cos1d, identity2d, midpoint2d, spiral2d, logistic2d)"));
    let stem = id.strip_suffix('d').ok_or_else(unknown)?;
    let split = stem.find(|c: char| c.is_ascii_digit()).ok_or_else(unknown)?;
    let (name, dim) = stem.split_at(split);
    let dim: usize = dim.parse().map_err(|_| unknown())?;
    let f = maps::by_name(name).ok_or_else(unknown)?;
    let fixed_two = matches!(name, "midpoint" | "spiral");
    if dim == 0 || dim > metafix_core::fixpoint::MAX_SEARCH_DIM || (fixed_two && dim != 2) {
        return Err(unknown());
    }
    Ok((f, dim))
}

fn record(req: &SolveRequest, source: String, r: FixedPointResult) -> SolveRecord {
    SolveRecord {
        solver: req.solver,
        source,
        status: "converged".into(),
        point: r.point,
        residual: r.residual,
        iterations: Some(r.iterations),
        evaluations: Some(r.evaluations),
        empirical_contraction: r.empirical_contraction,
    }
}

/// Turns a numeric failure into a record of the best state reached.
fn failure_record(req: &SolveRequest, source: String, e: &Error) -> Option<SolveRecord> {
    let (status, point, residual, iterations, evaluations) = match e {
        Error::NonConvergence { point, residual, iterations } => ("non_convergence", point.clone(), *residual, Some(*iterations), None),
        Error::Divergence { point, residual, iterations } => ("divergence", point.clone(), *residual, Some(*iterations), None),
        Error::BudgetExhausted { best, residual, evaluations } => ("budget_exhausted", best.clone(), *residual, None, Some(*evaluations)),
        Error::MarkovNonConvergence { last, previous, iterations } => {
            let tv = 0.5 * last.iter().zip(previous).map(|(a, b)| (a - b).abs()).sum::<f64>();
            ("non_convergence", last.clone(), tv, Some(*iterations), None)
        }
        _ => return None,
    };
    Some(SolveRecord {
        solver: req.solver,
        source,
        status: status.into(),
        point,
        residual,
        iterations,
        evaluations,
        empirical_contraction: None,
    })
}

pub fn solve(req: &SolveRequest) -> CliResult<(SolveRecord, Option<Failure>)> {
    let outcome = |source: String, r: Result<SolveRecord, Error>| match r {
        Ok(rec) => Ok((rec, None)),
        Err(e) => match failure_record(req, source, &e) {
            Some(rec) => Ok((rec, Some(Failure::from(e)))),
            None => Err(Failure::from(e)),
        },
    };
    if req.solver == Solver::Markov {
        let rows = req
            .kernel_rows
            .clone()
            .ok_or_else(|| Failure::Usage("the markov solver needs --kernel".into()))?;
        let k = MarkovKernel::on_unit_line(rows).map_err(|e| Failure::Usage(format!("malformed kernel: {e}")))?;
        let source = "kernel".to_string();
        let r = markov_invariant(&k, req.tol, req.budget).and_then(|mu| {
            let residual = total_variation(&k.apply(&mu)?, &mu)?;
            Ok(SolveRecord {
                solver: req.solver,
                source: source.clone(),
                status: "converged".into(),
                point: mu.probs().to_vec(),
                residual,
                iterations: None,
                evaluations: None,
                empirical_contraction: None,
            })
        });
        return outcome(source, r);
    }
    let id = req
        .map
        .clone()
        .ok_or_else(|| Failure::Usage(format!("the {:?} solver needs --map", req.solver).to_lowercase()))?;
    let (f, dim) = parse_map(&id)?;
    let domain = DomainBox::unit(dim);
    let r = match req.solver {
        Solver::Banach => {
            let x0 = req.x0.clone().unwrap_or_else(|| domain.center());
            if x0.len() != dim {
                return Err(Failure::Usage(format!("--x0 has {} entries, map `{id}` has dimension {dim}", x0.len())));
            }
            banach_iterate(f, &x0, req.tol, req.budget)
        }
        Solver::Grid => grid_fixed_point_search(f, &domain, req.epsilon, req.budget),
        Solver::Surrogate => {
            let cfg = SurrogateSearchConfig {
                budget: req.budget,
                seed: req.seed,
                ..Default::default()
            };
            surrogate_guided_search(f, &domain, req.epsilon, &cfg)
        }
        Solver::Markov => unreachable!(),
    };
    outcome(id.clone(), r.map(|r| record(req, id, r)))
}

pub fn cmd_solve(a: &SolveArgs) -> CliResult<()> {
    let kernel_rows = a.kernel.as_deref().map(read_kernel_csv).transpose()?;
    let req = SolveRequest {
        solver: a.solver,
        map: a.map.clone(),
        kernel_rows,
        tol: a.tol,
        epsilon: a.epsilon,
        budget: a.budget,
        seed: a.seed,
        x0: a.x0.clone(),
    };
    let config = toml::to_string(&req).map_err(|e| Failure::Usage(format!("cannot encode request: {e}")))?;
    let (rec, failure) = solve(&req)?;
    let body = toml::to_string(&rec).map_err(|e| Failure::Usage(format!("cannot encode result: {e}")))?;
    let name = a
        .out
        .as_deref()
        .and_then(Path::file_name)
        .map_or("-".to_string(), |n| n.to_string_lossy().into_owned());
    let manifest = RunManifest::new("solve", config, a.seed, &[&name]);
    match &a.out {
        Some(p) => write_with_header(p, &manifest, body.as_bytes())?,
        None => print!("{}{body}", manifest.header()),
    }
    failure.map_or(Ok(()), Err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_ids() {
        assert_eq!(parse_map("cos1d").unwrap().1, 1);
        assert_eq!(parse_map("identity2d").unwrap().1, 2);
        assert_eq!(parse_map("logistic3d").unwrap().1, 3);
        for bad in ["spiral3d", "cos", "nope2d", "cos0d", "2d", "cos99d"] {
            assert!(parse_map(bad).is_err(), "{bad}");
        }
    }
}
