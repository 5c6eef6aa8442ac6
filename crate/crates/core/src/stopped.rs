//! Objects stopped at a discrete stop time: `E_S`, `Γ_S`, `σ_S`, and the
//! factorization `j_S : F_S ⊗ Γ → Γ`.

use crate::error::{Error, Result};
use crate::fock::{sum_operators, FockOperator, FockVector, SliceConfig};
use crate::linalg::{eigenspace_above, identity, kron, matmul, CMatrix, CVector, ZERO};
use crate::secondquant::{ccr_flow, conditional_vacuum, shift, DomainOperator};
use crate::stoptime::DiscreteStopTime;

/// `(π_j, S((π_{j−1}, π_j]))` for every boundary of a partition covering the atoms.
pub(crate) fn partition_masses(s: &DiscreteStopTime, partition: &[usize]) -> Result<Vec<(usize, FockOperator)>> {
    if partition.is_empty() {
        return Err(Error::Partition("empty partition".into()));
    }
    if partition[0] == 0 || partition.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Partition(format!(
            "boundaries must be strictly increasing and positive, got {partition:?}"
        )));
    }
    let last = *partition.last().expect("non-empty");
    s.cfg().check_slot(last)?;
    if last < s.max_atom() {
        return Err(Error::Partition(format!(
            "last boundary {last} lies before the largest atom {}",
            s.max_atom()
        )));
    }
    let mut lo = 0;
    let mut out = Vec::with_capacity(partition.len());
    for &b in partition {
        let mass = s.interval(lo, Some(b));
        if s.atoms().iter().any(|a| a.time > lo && a.time <= b) {
            out.push((b, mass));
        }
        lo = b;
    }
    Ok(out)
}

pub(crate) fn atom_partition(s: &DiscreteStopTime) -> Vec<(usize, FockOperator)> {
    s.atoms().iter().map(|a| (a.time, a.projection.clone())).collect()
}

fn projection_from(s: &DiscreteStopTime, masses: &[(usize, FockOperator)]) -> Result<FockOperator> {
    let terms = masses
        .iter()
        .map(|(t, m)| Ok(m * &conditional_vacuum(s.cfg(), *t)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(sum_operators(s.cfg(), false, terms.iter()))
}

/// `E_S = Σ_j S({t_j}) E_{t_j}`.
pub fn stopped_projection(s: &DiscreteStopTime) -> FockOperator {
    projection_from(s, &atom_partition(s)).expect("atom times lie on the grid")
}

/// `Σ_j S((π_{j−1}, π_j]) E_{π_j}`; equals `E_S` whenever `π` is finer than the atoms.
pub fn stopped_projection_on(s: &DiscreteStopTime, partition: &[usize]) -> Result<FockOperator> {
    projection_from(s, &partition_masses(s, partition)?)
}

fn shift_from(s: &DiscreteStopTime, masses: &[(usize, FockOperator)]) -> Result<DomainOperator> {
    let cfg = s.cfg();
    let reach = masses.iter().map(|(t, _)| *t).max().unwrap_or(0);
    let admissible = cfg.n_slots - reach;
    let domain = conditional_vacuum(cfg, admissible)?;
    let mut total = CMatrix::zeros(cfg.fock_dim(), cfg.fock_dim());
    for (t, m) in masses {
        total += matmul(m.matrix(), shift(cfg, *t)?.matrix());
    }
    Ok(DomainOperator::new(cfg, total * domain.matrix(), false, admissible))
}

/// `Γ_S = Σ_j S({t_j}) Γ_{t_j}`, defined on vectors supported before `n − max_atom`.
pub fn stopped_shift(s: &DiscreteStopTime) -> Result<DomainOperator> {
    shift_from(s, &atom_partition(s))
}

pub fn stopped_shift_on(s: &DiscreteStopTime, partition: &[usize]) -> Result<DomainOperator> {
    shift_from(s, &partition_masses(s, partition)?)
}

fn flow_from(s: &DiscreteStopTime, masses: &[(usize, FockOperator)], x: &FockOperator) -> Result<FockOperator> {
    if x.cfg() != s.cfg() {
        return Err(Error::Shape("operator and stop time live on different grids".into()));
    }
    let amp = x.is_ampliated();
    let terms = masses
        .iter()
        .map(|(t, m)| {
            let m = if amp { m.ampliate()? } else { m.clone() };
            Ok(&ccr_flow(*t, x)? * &m)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(sum_operators(s.cfg(), amp, terms.iter()))
}

/// `σ_S(X) = Σ_j σ_{t_j}(X) S({t_j})`; ampliated input gives `σ̃_S`.
pub fn stopped_flow(s: &DiscreteStopTime, x: &FockOperator) -> Result<FockOperator> {
    flow_from(s, &atom_partition(s), x)
}

pub fn stopped_flow_on(s: &DiscreteStopTime, partition: &[usize], x: &FockOperator) -> Result<FockOperator> {
    flow_from(s, &partition_masses(s, partition)?, x)
}

/// The isometry `j_S : F_S ⊗ Γ_adm → Γ`, with `F_S = range(E_S)` in an
/// orthonormal basis and `Γ_adm` the vectors supported before `n − max_atom`.
///
/// `j_S(x ⊗ y) = Σ_j S({t_j}) x ⊗_{t_j} y`, where `⊗_t` places `y` on the
/// slots from `t` on.
#[derive(Debug, Clone)]
pub struct Factorization {
    cfg: SliceConfig,
    pre_basis: CMatrix,
    j: CMatrix,
    post_horizon: usize,
}

impl Factorization {
    pub fn new(s: &DiscreteStopTime) -> Result<Self> {
        let cfg = *s.cfg();
        let e_s = stopped_projection(s);
        let basis = eigenspace_above(e_s.matrix(), 0.5);
        let post_horizon = cfg.n_slots - s.max_atom();
        let a_dim = cfg.prefix_dim(post_horizon);
        let r = basis.ncols();
        let mut j = CMatrix::zeros(cfg.fock_dim(), r * a_dim);
        for b in 0..r {
            let x = basis.column(b).clone_owned();
            for atom in s.atoms() {
                let dt = cfg.prefix_dim(atom.time);
                let w: CVector = atom.projection.matrix() * &x;
                for y in 0..a_dim {
                    let col = b * a_dim + y;
                    for a in 0..dt {
                        if w[a] != ZERO {
                            j[(a + dt * y, col)] += w[a];
                        }
                    }
                }
            }
        }
        Ok(Self {
            cfg,
            pre_basis: basis,
            j,
            post_horizon,
        })
    }

    pub fn cfg(&self) -> &SliceConfig {
        &self.cfg
    }

    /// `rank E_S`.
    pub fn pre_dim(&self) -> usize {
        self.pre_basis.ncols()
    }

    pub fn post_dim(&self) -> usize {
        self.cfg.prefix_dim(self.post_horizon)
    }

    pub fn post_horizon(&self) -> usize {
        self.post_horizon
    }

    /// Orthonormal basis of `range(E_S)`, one column per basis vector.
    pub fn pre_basis(&self) -> &CMatrix {
        &self.pre_basis
    }

    /// `j_S` with columns indexed `b · post_dim + y`.
    pub fn matrix(&self) -> &CMatrix {
        &self.j
    }

    /// `j̃_S = I_𝔥 ⊗ j_S` with the initial factor kept outermost on both
    /// sides: domain index `b · (k · post_dim) + u · post_dim + y`.
    pub fn ampliated(&self) -> CMatrix {
        let k = self.cfg.k_ini;
        let f = self.cfg.fock_dim();
        let a = self.post_dim();
        let r = self.pre_dim();
        let mut out = CMatrix::zeros(k * f, r * k * a);
        for b in 0..r {
            for u in 0..k {
                for y in 0..a {
                    out.view_mut((u * f, b * k * a + u * a + y), (f, 1))
                        .copy_from(&self.j.column(b * a + y));
                }
            }
        }
        out
    }

    /// `j_S j_S*`, the projection onto the range of `j_S`.
    pub fn range_projection(&self) -> CMatrix {
        &self.j * self.j.adjoint()
    }

    /// Coordinates of `x ∈ range(E_S)` in the pre-basis.
    pub fn pre_coordinates(&self, x: &FockVector) -> Result<CVector> {
        if x.is_ampliated() || x.cfg() != &self.cfg {
            return Err(Error::Shape("pre-stop vector must be a Fock vector on this grid".into()));
        }
        Ok(self.pre_basis.adjoint() * x.amplitudes())
    }

    /// `j_S(x ⊗ y)` for `x ∈ range(E_S)` and admissible `y`.
    pub fn apply(&self, x: &FockVector, y: &FockVector) -> Result<FockVector> {
        let coords = self.pre_coordinates(x)?;
        if y.support_horizon() > self.post_horizon {
            return Err(Error::Horizon {
                context: "factorization",
                allowed: self.post_horizon,
                actual: y.support_horizon(),
            });
        }
        let a = self.post_dim();
        let y_adm = y.amplitudes().rows(0, a).clone_owned();
        let joint = kron(&CMatrix::from_column_slice(coords.len(), 1, coords.as_slice()), &CMatrix::from_column_slice(a, 1, y_adm.as_slice()));
        FockVector::from_amplitudes(&self.cfg, &self.j * joint.column(0), false)
    }

    /// `j_S (I ⊗ X_adm) j_S*`, or its ampliated form for operators on `𝔥 ⊗ Γ`.
    ///
    /// `X` must keep the admissible subspace invariant, which holds when its
    /// horizon is at most `n − max_atom`.
    pub fn flow_representation(&self, x: &FockOperator) -> Result<CMatrix> {
        let (j, x_adm) = self.compressed(x)?;
        let r = self.pre_dim();
        Ok(&j * kron(&identity(r), &x_adm) * j.adjoint())
    }

    /// `j_S (I ⊗ X_adm)`, the right-hand side of `σ_S(X) j_S = j_S (I ⊗ X_adm)`.
    pub fn intertwined(&self, x: &FockOperator) -> Result<CMatrix> {
        let (j, x_adm) = self.compressed(x)?;
        Ok(&j * kron(&identity(self.pre_dim()), &x_adm))
    }

    /// `j_S` or `j̃_S`, matching the space of `x`.
    pub fn matching(&self, ampliated: bool) -> CMatrix {
        if ampliated {
            self.ampliated()
        } else {
            self.j.clone()
        }
    }

    fn compressed(&self, x: &FockOperator) -> Result<(CMatrix, CMatrix)> {
        if x.cfg() != &self.cfg {
            return Err(Error::Shape("operator lives on a different grid".into()));
        }
        if x.support_horizon() > self.post_horizon {
            return Err(Error::Horizon {
                context: "factorization",
                allowed: self.post_horizon,
                actual: x.support_horizon(),
            });
        }
        let f = self.cfg.fock_dim();
        let a = self.post_dim();
        let k = self.cfg.ini_dim(x.is_ampliated());
        let m = x.matrix();
        let x_adm = CMatrix::from_fn(k * a, k * a, |r, c| m[((r / a) * f + r % a, (c / a) * f + c % a)]);
        Ok((self.matching(x.is_ampliated()), x_adm))
    }
}

/// `j_S (A ⊗ I) j_S*` for an operator `A` on `F_S` given in the pre-basis.
pub fn embed_pre_s(f: &Factorization, a: &CMatrix) -> Result<FockOperator> {
    let r = f.pre_dim();
    if a.nrows() != r || a.ncols() != r {
        return Err(Error::Shape(format!("pre-stop operator must be {r}x{r}")));
    }
    let j = f.matrix();
    let m = j * kron(a, &identity(f.post_dim())) * j.adjoint();
    FockOperator::from_matrix(f.cfg(), m, false)
}

/// A stop time together with everything stopped at it.
#[derive(Debug, Clone)]
pub struct StoppedBundle {
    pub stop_time: DiscreteStopTime,
    pub e_s: FockOperator,
    pub gamma_s: DomainOperator,
    pub factorization: Factorization,
}

impl StoppedBundle {
    pub fn new(s: &DiscreteStopTime) -> Result<Self> {
        Ok(Self {
            stop_time: s.clone(),
            e_s: stopped_projection(s),
            gamma_s: stopped_shift(s)?,
            factorization: Factorization::new(s)?,
        })
    }
}
