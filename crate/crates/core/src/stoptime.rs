//! Discrete finite quantum stop times: finitely supported projection-valued
//! measures on the slot boundaries `1..=n_slots` that are adapted to the
//! time-slice filtration.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{sum_operators, FockOperator, FockVector, SliceConfig, Tail};
use crate::linalg::{from_pairs, identity, kron, matmul, max_abs, projection_defect, to_pairs, CMatrix};
use crate::secondquant::slot_vacuum_projection;
use crate::stopped::stopped_flow;
use crate::TOL;

pub const RULE_NO_ATOM_AT_ZERO: &str = "S({0}) = 0";
pub const RULE_WITHIN_GRID: &str = "atom times lie on the grid";
pub const RULE_PROJECTION: &str = "atoms are orthogonal projections";
pub const RULE_ORTHOGONALITY: &str = "S({s})S({t}) = 0 for s != t";
pub const RULE_COMPLETENESS: &str = "S([0,∞]) = I";
pub const RULE_ADAPTEDNESS: &str = "S([0,t]) ∈ B(Γ_t)) ⊗ I_[t";

/// A single atom `(t, S({t}))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub time: usize,
    pub projection: FockOperator,
}

/// Defects of a candidate atom list against every stop-time invariant.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub atom_at_zero: bool,
    pub beyond_grid: Option<usize>,
    pub projection_defect: f64,
    pub orthogonality_defect: f64,
    pub completeness_defect: f64,
    pub adaptedness_defect: f64,
}

impl ValidationReport {
    /// Violated rules with a human-readable amount, in a fixed order.
    pub fn failures(&self, tol: f64) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if self.atom_at_zero {
            out.push((RULE_NO_ATOM_AT_ZERO, "atom at slot 0".to_string()));
        }
        if let Some(t) = self.beyond_grid {
            out.push((RULE_WITHIN_GRID, format!("atom at slot {t}")));
        }
        let numeric = [
            (RULE_PROJECTION, self.projection_defect),
            (RULE_ORTHOGONALITY, self.orthogonality_defect),
            (RULE_COMPLETENESS, self.completeness_defect),
            (RULE_ADAPTEDNESS, self.adaptedness_defect),
        ];
        for (rule, defect) in numeric {
            if defect > tol {
                out.push((rule, format!("defect {defect:.3e}")));
            }
        }
        out
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        self.failures(tol).is_empty()
    }

    /// Largest numeric defect, infinite when a structural rule fails.
    pub fn worst(&self) -> f64 {
        if self.atom_at_zero || self.beyond_grid.is_some() {
            return f64::INFINITY;
        }
        self.projection_defect
            .max(self.orthogonality_defect)
            .max(self.completeness_defect)
            .max(self.adaptedness_defect)
    }
}

/// Checks candidate atoms without building a stop time.
pub fn validate_atoms(cfg: &SliceConfig, atoms: &[(usize, FockOperator)]) -> ValidationReport {
    let mut report = ValidationReport::default();
    for (t, p) in atoms {
        if *t == 0 {
            report.atom_at_zero = true;
        }
        if *t > cfg.n_slots {
            report.beyond_grid = Some(*t);
        }
        report.projection_defect = report.projection_defect.max(projection_defect(p.matrix()));
        if *t <= cfg.n_slots {
            report.adaptedness_defect = report.adaptedness_defect.max(p.structure_defect(*t, &Tail::Identity));
        }
    }
    for (i, (_, p)) in atoms.iter().enumerate() {
        for (_, q) in atoms.iter().skip(i + 1) {
            report.orthogonality_defect = report.orthogonality_defect.max(max_abs(&matmul(p.matrix(), q.matrix())));
        }
    }
    let total = sum_operators(cfg, false, atoms.iter().map(|(_, p)| p));
    report.completeness_defect = max_abs(&(total.matrix() - identity(cfg.fock_dim())));
    report
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteStopTime {
    cfg: SliceConfig,
    atoms: Vec<Atom>,
}

impl DiscreteStopTime {
    /// Validates `(t_j, P_j)` pairs as a finite quantum stop time.
    ///
    /// Atoms sharing a time are merged by addition and zero atoms are
    /// dropped. Projections must be non-ampliated.
    pub fn from_adapted_projections(cfg: &SliceConfig, atoms: Vec<(usize, FockOperator)>) -> Result<Self> {
        if atoms.iter().any(|(_, p)| p.is_ampliated() || p.cfg() != cfg) {
            return Err(Error::Shape("stop-time atoms must be Fock-space operators on this grid".into()));
        }
        let mut merged: BTreeMap<usize, FockOperator> = BTreeMap::new();
        for (t, p) in atoms {
            let entry = merged.remove(&t);
            merged.insert(t, entry.map_or(p.clone(), |q| &q + &p));
        }
        let list: Vec<(usize, FockOperator)> = merged.into_iter().collect();
        let report = validate_atoms(cfg, &list);
        if let Some((rule, _)) = report.failures(TOL).first() {
            let detail = report
                .failures(TOL)
                .iter()
                .map(|(r, d)| format!("{r}: {d}"))
                .collect::<Vec<_>>()
                .join("; ");
            return Err(Error::StopTime { rule, detail });
        }
        let atoms = list
            .into_iter()
            .filter(|(_, p)| max_abs(p.matrix()) > TOL)
            .map(|(time, p)| Atom {
                time,
                projection: p.with_structure(time, Tail::Identity),
            })
            .collect();
        Ok(Self { cfg: *cfg, atoms })
    }

    /// `δ_t`: the single atom `(t, I)`.
    pub fn deterministic(cfg: &SliceConfig, t: usize) -> Result<Self> {
        if t == 0 {
            return Err(Error::StopTime {
                rule: RULE_NO_ATOM_AT_ZERO,
                detail: "deterministic stop time at slot 0".into(),
            });
        }
        cfg.check_slot(t)?;
        Ok(Self {
            cfg: *cfg,
            atoms: vec![Atom {
                time: t,
                projection: FockOperator::identity(cfg),
            }],
        })
    }

    /// First slot in which a quantum is present, capped at `m`.
    ///
    /// Atom `j < m` is `Q_0 ⋯ Q_{j−2} (I − Q_{j−1})` with `Q_i` the vacuum
    /// projection of slot `i`; atom `m` takes the remainder `Q_0 ⋯ Q_{m−2}`.
    pub fn first_arrival(cfg: &SliceConfig, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::StopTime {
                rule: RULE_NO_ATOM_AT_ZERO,
                detail: "first-arrival horizon 0".into(),
            });
        }
        cfg.check_slot(m)?;
        let q = slot_vacuum_projection(cfg);
        let not_q = identity(cfg.slot_dim()) - &q;
        let mut vacuum_before = CMatrix::identity(1, 1);
        let mut atoms = Vec::with_capacity(m);
        for j in 1..=m {
            let head = if j < m { &not_q } else { &identity(cfg.slot_dim()) };
            let local = kron(head, &vacuum_before);
            atoms.push((j, FockOperator::from_local(cfg, &local, j, Tail::Identity, false)?));
            vacuum_before = kron(&q, &vacuum_before);
        }
        Self::from_adapted_projections(cfg, atoms)
    }

    pub fn cfg(&self) -> &SliceConfig {
        &self.cfg
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn times(&self) -> Vec<usize> {
        self.atoms.iter().map(|a| a.time).collect()
    }

    pub fn max_atom(&self) -> usize {
        self.atoms.last().map_or(0, |a| a.time)
    }

    pub fn is_deterministic(&self) -> bool {
        self.atoms.len() == 1
    }

    /// `S(A)` for the slot set described by `in_set`.
    pub fn measure(&self, in_set: impl Fn(usize) -> bool) -> FockOperator {
        sum_operators(
            &self.cfg,
            false,
            self.atoms.iter().filter(|a| in_set(a.time)).map(|a| &a.projection),
        )
    }

    /// `S({t})`.
    pub fn at(&self, t: usize) -> FockOperator {
        self.measure(|s| s == t)
    }

    /// `S((lo, hi])`, with `hi = None` meaning `∞`.
    pub fn interval(&self, lo: usize, hi: Option<usize>) -> FockOperator {
        self.measure(|s| s > lo && hi.is_none_or(|h| s <= h))
    }

    /// `S([0, t])`.
    pub fn cumulative(&self, t: usize) -> FockOperator {
        self.measure(|s| s <= t)
    }

    pub fn cdf(&self) -> CdfSample {
        CdfSample {
            points: (0..=self.cfg.n_slots).map(|t| (t, self.cumulative(t))).collect(),
        }
    }

    /// Full invariant report for an already-built stop time.
    pub fn validate(&self) -> ValidationReport {
        let list: Vec<(usize, FockOperator)> = self.atoms.iter().map(|a| (a.time, a.projection.clone())).collect();
        validate_atoms(&self.cfg, &list)
    }

    /// `S ⋆ T` via `(S ⋆ T)({u}) = Σ_{s_i + t_j = u} S({s_i}) σ_S(T({t_j}))`.
    pub fn convolve(&self, other: &Self) -> Result<Self> {
        self.check_same_grid(other)?;
        let total = self.max_atom() + other.max_atom();
        if total > self.cfg.n_slots {
            return Err(Error::Horizon {
                context: "convolve",
                allowed: self.cfg.n_slots,
                actual: total,
            });
        }
        let mut pieces: BTreeMap<usize, Vec<FockOperator>> = BTreeMap::new();
        for t_atom in &other.atoms {
            let flowed = stopped_flow(self, &t_atom.projection)?;
            for s_atom in &self.atoms {
                pieces
                    .entry(s_atom.time + t_atom.time)
                    .or_default()
                    .push(&s_atom.projection * &flowed);
            }
        }
        let atoms = pieces
            .into_iter()
            .map(|(u, ops)| (u, sum_operators(&self.cfg, false, ops.iter())))
            .collect();
        Self::from_adapted_projections(&self.cfg, atoms)
    }

    /// `S + t`, i.e. `(S + t)(A) = S((A − t)_+)`.
    pub fn shift_time(&self, t: usize) -> Result<Self> {
        let total = self.max_atom() + t;
        if total > self.cfg.n_slots {
            return Err(Error::Horizon {
                context: "shift_time",
                allowed: self.cfg.n_slots,
                actual: total,
            });
        }
        Ok(Self {
            cfg: self.cfg,
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    time: a.time + t,
                    projection: a.projection.clone().with_structure(a.time + t, Tail::Identity),
                })
                .collect(),
        })
    }

    /// Discrete approximation on the boundary set `π`: the mass of each
    /// `(π_{k−1}, π_k]` moves to `π_k`, and the last boundary also absorbs
    /// everything beyond it.
    pub fn coarsen(&self, boundaries: &[usize]) -> Result<Self> {
        let mut pi: Vec<usize> = boundaries.to_vec();
        pi.sort_unstable();
        pi.dedup();
        if pi.is_empty() {
            return Err(Error::Partition("empty boundary set".into()));
        }
        if pi[0] == 0 {
            return Err(Error::StopTime {
                rule: RULE_NO_ATOM_AT_ZERO,
                detail: "boundary at slot 0".into(),
            });
        }
        if let Some(&last) = pi.last() {
            self.cfg.check_slot(last)?;
        }
        let mut atoms = Vec::with_capacity(pi.len());
        let mut lo = 0;
        for (k, &b) in pi.iter().enumerate() {
            let hi = if k + 1 == pi.len() { None } else { Some(b) };
            atoms.push((b, self.interval(lo, hi)));
            lo = b;
        }
        Self::from_adapted_projections(&self.cfg, atoms)
    }

    pub(crate) fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.cfg != other.cfg {
            return Err(Error::Shape("stop times live on different grids".into()));
        }
        Ok(())
    }

    pub fn to_record(&self) -> StopTimeRecord {
        StopTimeRecord {
            atoms: self
                .atoms
                .iter()
                .map(|a| AtomRecord {
                    t: a.time,
                    matrix: to_pairs(&a.projection.local_at(a.time).expect("adapted atom")),
                })
                .collect(),
        }
    }

    /// Accepts each atom either as its factor on slots `< t` or as a full
    /// Fock-space matrix.
    pub fn from_record(cfg: &SliceConfig, record: &StopTimeRecord) -> Result<Self> {
        let mut atoms = Vec::with_capacity(record.atoms.len());
        for a in &record.atoms {
            if a.t > cfg.n_slots {
                return Err(Error::StopTime {
                    rule: RULE_WITHIN_GRID,
                    detail: format!("atom at slot {} on a {}-slot grid", a.t, cfg.n_slots),
                });
            }
            let m = from_pairs(&a.matrix).ok_or_else(|| Error::Shape(format!("ragged matrix for atom at {}", a.t)))?;
            let op = if m.nrows() == cfg.prefix_dim(a.t) {
                FockOperator::from_local(cfg, &m, a.t, Tail::Identity, false)?
            } else if m.nrows() == cfg.fock_dim() {
                FockOperator::from_matrix(cfg, m, false)?
            } else {
                return Err(Error::Shape(format!(
                    "atom at {} has a {}x{} matrix; expected {} (local) or {} (full)",
                    a.t,
                    m.nrows(),
                    m.ncols(),
                    cfg.prefix_dim(a.t),
                    cfg.fock_dim()
                )));
            };
            atoms.push((a.t, op));
        }
        Self::from_adapted_projections(cfg, atoms)
    }
}

/// Serialized stop time: atom times with row-major `[re, im]` matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopTimeRecord {
    pub atoms: Vec<AtomRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomRecord {
    pub t: usize,
    pub matrix: Vec<Vec<[f64; 2]>>,
}

/// Sampled distribution function `t ↦ S([0, t])`.
#[derive(Debug, Clone)]
pub struct CdfSample {
    pub points: Vec<(usize, FockOperator)>,
}

impl CdfSample {
    /// `max_{s ≤ t} ‖S_s S_t − S_s‖_max`; zero for a monotone family of projections.
    pub fn monotonicity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, (_, a)) in self.points.iter().enumerate() {
            for (_, b) in self.points.iter().skip(i + 1) {
                worst = worst.max(max_abs(&(matmul(a.matrix(), b.matrix()) - a.matrix())));
            }
        }
        worst
    }
}

/// `S(A) σ_S(T(B))`, the product measure of a rectangle.
pub fn product_rectangle(
    s: &DiscreteStopTime,
    t: &DiscreteStopTime,
    a: impl Fn(usize) -> bool,
    b: impl Fn(usize) -> bool,
) -> Result<FockOperator> {
    s.check_same_grid(t)?;
    let flowed = stopped_flow(s, &t.measure(b))?;
    Ok(&s.measure(a) * &flowed)
}

/// `max_v ‖(S_a([0,t]) − S_b([0,t])) v‖` for every `t` in `0..=n_slots`.
///
/// Ampliated probes see the ampliated cumulative projections.
pub fn convergence_gap(a: &DiscreteStopTime, b: &DiscreteStopTime, probes: &[FockVector]) -> Result<Vec<(usize, f64)>> {
    a.check_same_grid(b)?;
    let n = a.cfg.n_slots;
    (0..=n)
        .map(|t| {
            let diff = &a.cumulative(t) - &b.cumulative(t);
            let amp = if probes.iter().any(FockVector::is_ampliated) {
                Some(diff.ampliate()?)
            } else {
                None
            };
            let mut worst: f64 = 0.0;
            for v in probes {
                let op = if v.is_ampliated() {
                    amp.as_ref().expect("ampliated difference")
                } else {
                    &diff
                };
                worst = worst.max(op.apply(v)?.norm());
            }
            Ok((t, worst))
        })
        .collect()
}
