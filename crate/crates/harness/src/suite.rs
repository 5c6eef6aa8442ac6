//! Runs a scenario's checks over its seeded instances.

use std::time::Instant;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use qstop_core::Deviation;

use crate::error::HarnessError;
use crate::report::{CheckRow, Report};
use crate::scenario::Scenario;

/// How independent instances are scheduled. Results never depend on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Fans instances out over the rayon pool; same as `Sequential` when
    /// the `parallel` feature is off.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// `f(0), …, f(n − 1)` in index order, however they were scheduled.
pub fn map_indexed<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
        _ => (0..n).map(f).collect(),
    }
}

type Outcome = Option<(Deviation, f64)>;

fn run_instance(scenario: &Scenario, index: usize, seed: u64) -> Result<Vec<Outcome>, HarnessError> {
    let inst = scenario.instance(index, seed)?;
    let mode = inst.cocycle.adaptedness();
    scenario
        .checks
        .iter()
        .map(|(id, _)| {
            if !id.applies(mode) {
                return Ok(None);
            }
            let start = Instant::now();
            let dev = id.run(&inst).map_err(|source| HarnessError::Check {
                check: id.name(),
                instance: index,
                seed,
                source,
            })?;
            Ok(Some((dev, start.elapsed().as_secs_f64() * 1e3)))
        })
        .collect()
}

/// NaN-propagating maximum, so a broken evaluation can never look small.
fn worse(a: f64, b: f64) -> f64 {
    if b.is_nan() || b > a {
        b
    } else {
        a
    }
}

pub fn run_verify(scenario: &Scenario, exec: Execution) -> Result<Report, HarnessError> {
    let seeds = scenario.instance_seeds();
    let outcomes = map_indexed(exec, seeds.len(), |i| run_instance(scenario, i, seeds[i]));
    let mut per_instance = Vec::with_capacity(outcomes.len());
    for outcome in outcomes {
        per_instance.push(outcome?);
    }
    let checks = scenario
        .checks
        .iter()
        .enumerate()
        .map(|(c, (id, tol))| {
            let mut row = CheckRow {
                check: id.name().to_string(),
                anchor: id.anchor().to_string(),
                instances: 0,
                max_entry: 0.0,
                op_norm: 0.0,
                tol: *tol,
                passed: false,
                worst_seed: None,
                wall_time_ms: 0.0,
            };
            let mut worst = f64::NEG_INFINITY;
            for (results, seed) in per_instance.iter().zip(&seeds) {
                if let Some((dev, ms)) = results[c] {
                    row.instances += 1;
                    row.max_entry = worse(row.max_entry, dev.max_entry);
                    row.op_norm = worse(row.op_norm, dev.op_norm);
                    row.wall_time_ms += ms;
                    let w = worse(dev.max_entry, dev.op_norm);
                    if w.is_nan() || w > worst {
                        worst = w;
                        row.worst_seed = Some(*seed);
                    }
                }
            }
            row.passed = row.instances > 0 && row.max_entry <= *tol && row.op_norm <= *tol;
            row
        })
        .collect();
    Ok(Report {
        scenario: scenario.name.clone(),
        seed: scenario.seed,
        instances: scenario.instances,
        checks,
    })
}
