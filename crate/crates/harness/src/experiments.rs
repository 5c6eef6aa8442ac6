//! Refinement experiments: stop-time coarsening and Fock-space truncation.

use qstop_core::cocycle::continuity_probe;
use qstop_core::random::{gaussian_matrix, random_step_function};
use qstop_core::stoptime::convergence_gap;
use qstop_core::{exponential_vector, CVector, DiscreteStopTime, FockVector, SliceConfig, StepFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::HarnessError;
use crate::report::{ConvergeRow, ConvergeTable, SweepRow, SweepTable};
use crate::scenario::Scenario;
use crate::suite::{map_indexed, Execution};

/// Slack for "non-increasing": only rounding may make a later value larger.
const MONOTONE_SLACK: f64 = 1e-12;

/// Stream ids that keep experiment randomness apart from instance randomness.
const PROBE_STREAM: u64 = 0x70;
const SWEEP_STREAM: u64 = 0x5e;

fn invalid(location: &str, message: impl Into<String>) -> HarnessError {
    HarnessError::Invalid {
        location: location.to_string(),
        message: message.into(),
    }
}

/// `⌈k n / 2^ℓ⌉` for `k = 1..=2^ℓ`, deduplicated.
pub fn level_boundaries(n_slots: usize, level: usize) -> Vec<usize> {
    let parts = 1usize << level;
    let mut out: Vec<usize> = (1..=parts).map(|k| (k * n_slots).div_ceil(parts)).collect();
    out.dedup();
    out
}

fn random_probe(cfg: &SliceConfig, rng: &mut ChaCha8Rng) -> Result<FockVector, HarnessError> {
    let g = gaussian_matrix(cfg.joint_dim(), 1, rng);
    let amps: CVector = g.column(0).into_owned();
    let amps = &amps / qstop_core::C64::new(amps.norm(), 0.0);
    FockVector::from_amplitudes(cfg, amps, true).map_err(|e| invalid("converge.probes", e.to_string()))
}

fn non_increasing(rows: &[Vec<f64>]) -> bool {
    rows.windows(2)
        .all(|w| w[0].iter().zip(&w[1]).all(|(old, new)| *new <= *old + MONOTONE_SLACK))
}

/// Coarsens the scenario's `S` to `2^ℓ` boundaries for `ℓ = 1..=levels` and
/// tracks how `S_ℓ` and `V_{S_ℓ}` approach `S` and `V_S` on random probes.
pub fn run_converge(scenario: &Scenario, levels: usize, exec: Execution) -> Result<ConvergeTable, HarnessError> {
    let cfg = &scenario.cfg;
    if levels < 2 {
        return Err(invalid("--levels", format!("at least 2 refinement levels are needed, got {levels}")));
    }
    if (1usize << levels) > cfg.n_slots {
        return Err(invalid(
            "--levels",
            format!("2^{levels} boundaries do not fit on a {}-slot grid", cfg.n_slots),
        ));
    }
    let seed = scenario.instance_seeds()[0];
    let inst = scenario.instance(0, seed)?;
    let target = &inst.s;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    rng.set_stream(PROBE_STREAM);
    let probes: Vec<FockVector> = (0..scenario.file.converge.probes.max(1))
        .map(|_| random_probe(cfg, &mut rng))
        .collect::<Result<_, _>>()?;
    let bounds: Vec<Vec<usize>> = (1..=levels).map(|l| level_boundaries(cfg.n_slots, l)).collect();
    let coarse: Vec<DiscreteStopTime> = bounds
        .iter()
        .map(|b| target.coarsen(b).map_err(|e| invalid("stop_times.S", e.to_string())))
        .collect::<Result<_, _>>()?;

    let fail = |check: &'static str| {
        move |source| HarnessError::Check {
            check,
            instance: 0,
            seed,
            source,
        }
    };
    let gaps = map_indexed(exec, coarse.len(), |l| convergence_gap(&coarse[l], target, &probes));
    let gaps: Vec<Vec<f64>> = gaps
        .into_iter()
        .map(|g| g.map(|g| g.into_iter().map(|(_, x)| x).collect()))
        .collect::<Result<_, _>>()
        .map_err(fail("convergence_gap"))?;
    let cocycle = continuity_probe(&inst.cocycle, &coarse, target, &probes).map_err(fail("cocycle_continuity"))?;

    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    let rows: Vec<ConvergeRow> = (0..levels)
        .map(|l| ConvergeRow {
            level: l + 1,
            boundaries: bounds[l].clone(),
            max_gap: max(&gaps[l]),
            max_cocycle_deviation: max(&cocycle[l]),
        })
        .collect();
    let gap_monotone = non_increasing(&gaps);
    let cocycle_monotone = non_increasing(&cocycle);
    let finest = rows.last().expect("at least two levels");
    let target_resolved = target.times().iter().all(|t| finest.boundaries.contains(t));
    let finest_ok = !target_resolved || (finest.max_gap <= scenario.tol && finest.max_cocycle_deviation <= scenario.tol);
    Ok(ConvergeTable {
        scenario: scenario.name.clone(),
        seed: scenario.seed,
        tol: scenario.tol,
        passed: gap_monotone && cocycle_monotone && finest_ok,
        levels: rows,
        gap_monotone,
        cocycle_monotone,
        target_resolved,
    })
}

/// `|⟨ε(f), ε(g)⟩ − exp⟨f, g⟩|` on `cfg`.
pub fn kernel_error(cfg: &SliceConfig, f: &StepFunction, g: &StepFunction) -> qstop_core::Result<f64> {
    let ef = exponential_vector(cfg, f)?;
    let eg = exponential_vector(cfg, g)?;
    Ok((ef.inner(&eg) - f.inner(g, cfg.dt).exp()).norm())
}

/// Kernel error of truncated exponential vectors for each cap, maximized over
/// random pairs with `‖f‖, ‖g‖ ≤ norm`.
pub fn run_truncation_sweep(scenario: &Scenario, caps: &[usize], exec: Execution) -> Result<SweepTable, HarnessError> {
    let sweep = &scenario.file.sweep;
    if caps.is_empty() || caps.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("--caps", format!("caps must be strictly increasing, got {caps:?}")));
    }
    if !(sweep.norm >= 0.0 && sweep.norm <= 1.0) {
        return Err(invalid("sweep.norm", format!("norm bound must lie in [0, 1], got {}", sweep.norm)));
    }
    let cfg = &scenario.cfg;
    let grids: Vec<SliceConfig> = caps
        .iter()
        .map(|&c| cfg.with_cap(c).map_err(|e| invalid("--caps", format!("cap {c}: {e}"))))
        .collect::<Result<_, _>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    rng.set_stream(SWEEP_STREAM);
    let pairs: Vec<(StepFunction, StepFunction)> = (0..sweep.pairs.max(1))
        .map(|_| {
            let support = rng.random_range(1..=cfg.n_slots);
            let nf = sweep.norm * rng.random_range(0.5..=1.0);
            let ng = sweep.norm * rng.random_range(0.5..=1.0);
            (
                random_step_function(cfg, support, nf, &mut rng),
                random_step_function(cfg, cfg.n_slots, ng, &mut rng),
            )
        })
        .collect();
    let errors = map_indexed(exec, grids.len(), |c| {
        pairs.iter().map(|(f, g)| kernel_error(&grids[c], f, g)).collect::<qstop_core::Result<Vec<f64>>>()
    });
    let errors: Vec<Vec<f64>> = errors
        .into_iter()
        .collect::<Result<_, _>>()
        .map_err(|source| HarnessError::Check {
            check: "truncation_sweep",
            instance: 0,
            seed: scenario.seed,
            source,
        })?;
    let rows = grids
        .iter()
        .zip(&errors)
        .map(|(g, e)| SweepRow {
            cap: g.cap,
            fock_dim: g.fock_dim(),
            max_error: e.iter().copied().fold(0.0, f64::max),
        })
        .collect();
    Ok(SweepTable {
        scenario: scenario.name.clone(),
        seed: scenario.seed,
        pairs: pairs.len(),
        norm: sweep.norm,
        rows,
        monotone: non_increasing(&errors),
    })
}
