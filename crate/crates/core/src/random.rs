//! Seeded random instances: unitaries, Hermitian generators, step functions
//! and adapted stop times.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fock::{FockOperator, SliceConfig, StepFunction, Tail};
use crate::linalg::{identity, kron, rank_above, CMatrix, C64};
use crate::stoptime::DiscreteStopTime;

pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    })
}

/// Haar-distributed unitary: QR of a complex Gaussian matrix with the
/// phases of `R`'s diagonal pushed into `Q`.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let qr = gaussian_matrix(n, n, rng).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..n {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// `(G + G*) / 2` for a complex Gaussian `G`.
pub fn random_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let g = gaussian_matrix(n, n, rng);
    (&g + g.adjoint()) * C64::new(0.5, 0.0)
}

/// `exp(−i dt H)` for Hermitian `H`, via its eigendecomposition.
pub fn unitary_from_generator(h: &CMatrix, dt: f64) -> Result<CMatrix> {
    if h.nrows() != h.ncols() {
        return Err(Error::Shape("generator must be square".into()));
    }
    let herm = (h + h.adjoint()) * C64::new(0.5, 0.0);
    let eig = herm.symmetric_eigen();
    let phases = eig.eigenvalues.map(|l| C64::new(0.0, -dt * l).exp());
    let v = &eig.eigenvectors;
    Ok(v * CMatrix::from_diagonal(&phases) * v.adjoint())
}

/// Step function on slots `< support` with Gaussian values rescaled to `L²` norm `norm`.
pub fn random_step_function<R: Rng + ?Sized>(cfg: &SliceConfig, support: usize, norm: f64, rng: &mut R) -> StepFunction {
    let support = support.min(cfg.n_slots);
    let mut values: Vec<Vec<C64>> = (0..cfg.n_slots)
        .map(|j| {
            (0..cfg.d)
                .map(|_| {
                    if j < support {
                        C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
                    } else {
                        C64::new(0.0, 0.0)
                    }
                })
                .collect()
        })
        .collect();
    let current = StepFunction::new(cfg, values.clone()).expect("shape matches grid").norm(cfg.dt);
    if current > 0.0 {
        let scale = norm / current;
        for row in &mut values {
            for z in row {
                *z *= scale;
            }
        }
    }
    StepFunction::new(cfg, values).expect("shape matches grid")
}

/// `count` distinct atom times in `1..=max_atom`, always including `max_atom`.
pub fn random_atom_times<R: Rng + ?Sized>(max_atom: usize, count: usize, rng: &mut R) -> Vec<usize> {
    let count = count.clamp(1, max_atom.max(1));
    let mut times: Vec<usize> = if max_atom > 1 {
        sample(rng, max_atom - 1, count - 1).into_iter().map(|i| i + 1).collect()
    } else {
        Vec::new()
    };
    times.push(max_atom);
    times.sort_unstable();
    times
}

/// Random adapted stop time supported on `times`.
///
/// At each time the not-yet-stopped projection `R` is extended to the new
/// slots and split off a random sub-projection of random rank; the last time
/// takes whatever remains. Later times may go unused when `R` reaches rank 1.
pub fn random_stop_time<R: Rng + ?Sized>(cfg: &SliceConfig, times: &[usize], rng: &mut R) -> Result<DiscreteStopTime> {
    let mut times = times.to_vec();
    times.sort_unstable();
    times.dedup();
    if times.is_empty() {
        return Err(Error::Config("a stop time needs at least one atom time".into()));
    }
    if let Some(&last) = times.last() {
        cfg.check_slot(last)?;
    }
    let mut remainder = CMatrix::identity(1, 1);
    let mut horizon = 0;
    let mut atoms = Vec::with_capacity(times.len());
    for (idx, &t) in times.iter().enumerate() {
        let r_t = kron(&identity(cfg.prefix_dim(t - horizon)), &remainder);
        horizon = t;
        let rank = rank_above(&r_t, 0.5);
        if idx + 1 == times.len() || rank < 2 {
            atoms.push((t, FockOperator::from_local(cfg, &r_t, t, Tail::Identity, false)?));
            break;
        }
        let r = rng.random_range(1..rank);
        let columns = &r_t * gaussian_matrix(r_t.nrows(), r, rng);
        let q = columns.qr().q();
        let p = &q * q.adjoint();
        atoms.push((t, FockOperator::from_local(cfg, &p, t, Tail::Identity, false)?));
        remainder = &r_t - &p;
    }
    DiscreteStopTime::from_adapted_projections(cfg, atoms)
}
