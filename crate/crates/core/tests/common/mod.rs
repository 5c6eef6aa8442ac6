#![allow(dead_code)]

use qstop_core::linalg::{max_abs, max_abs_vec};
use qstop_core::random::gaussian_matrix;
use qstop_core::{CMatrix, CVector, FockOperator, FockVector, SliceConfig, StepFunction, Tail, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const TOL: f64 = 1e-9;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn grid(n: usize, d: usize, cap: usize, k: usize) -> SliceConfig {
    SliceConfig::new(n, 0.25, d, cap, k).unwrap()
}

/// Random operator acting on slots `< h` (and the initial space when ampliated).
pub fn random_local(cfg: &SliceConfig, h: usize, ampliated: bool, rng: &mut ChaCha8Rng) -> FockOperator {
    let n = cfg.ini_dim(ampliated) * cfg.prefix_dim(h);
    FockOperator::from_local(cfg, &gaussian_matrix(n, n, rng), h, Tail::Identity, ampliated).unwrap()
}

pub fn random_vector(cfg: &SliceConfig, h: usize, rng: &mut ChaCha8Rng) -> FockVector {
    let local = gaussian_matrix(cfg.prefix_dim(h), 1, rng);
    let mut amps = CVector::zeros(cfg.fock_dim());
    amps.rows_mut(0, local.nrows()).copy_from(&local.column(0));
    FockVector::from_amplitudes(cfg, amps, false).unwrap()
}

pub fn close(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
    max_abs(&(a - b)) <= tol
}

pub fn close_vec(a: &CVector, b: &CVector, tol: f64) -> bool {
    max_abs_vec(&(a - b)) <= tol
}

pub fn step(cfg: &SliceConfig, values: &[&[f64]]) -> StepFunction {
    let mut rows: Vec<Vec<C64>> = values
        .iter()
        .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
        .collect();
    rows.resize(cfg.n_slots, vec![C64::new(0.0, 0.0); cfg.d]);
    StepFunction::new(cfg, rows).unwrap()
}

/// `Π_j Σ_{|α| ≤ cap} Π_c w_{j,c}^{α_c} / α_c!` with `w = conj(f) g dt`, by direct enumeration.
pub fn truncated_kernel(cfg: &SliceConfig, f: &StepFunction, g: &StepFunction) -> C64 {
    let mut total = C64::new(1.0, 0.0);
    for j in 0..cfg.n_slots {
        let w: Vec<C64> = (0..cfg.d)
            .map(|c| f.values[j][c].conj() * g.values[j][c] * cfg.dt)
            .collect();
        let mut slot = C64::new(0.0, 0.0);
        let mut alpha = vec![0usize; cfg.d];
        loop {
            if alpha.iter().sum::<usize>() <= cfg.cap {
                let mut term = C64::new(1.0, 0.0);
                for c in 0..cfg.d {
                    term *= w[c].powu(alpha[c] as u32) / factorial(alpha[c]);
                }
                slot += term;
            }
            // odometer over {0..=cap}^d
            let mut c = 0;
            while c < cfg.d {
                alpha[c] += 1;
                if alpha[c] <= cfg.cap {
                    break;
                }
                alpha[c] = 0;
                c += 1;
            }
            if c == cfg.d {
                break;
            }
        }
        total *= slot;
    }
    total
}

pub fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}
