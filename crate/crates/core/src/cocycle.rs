//! `p`-adapted isometric cocycles generated by a one-step unitary, their
//! stopped versions `V_S`, `V̂_S` and the flows `ĵ_S`, `k̂_S`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{sum_operators, FockOperator, FockVector, SliceConfig, Tail};
use crate::linalg::{identity, isometry_defect, matmul, matmul_adj, max_abs, op_norm, unitary_defect, CMatrix, Deviation, C64, ONE};
use crate::secondquant::{ampliated_ccr_flow, p_tail_projection, OneParticleProjection};
use crate::stoptime::DiscreteStopTime;
use crate::stopped::{atom_partition, partition_masses, stopped_flow, stopped_projection};
use crate::TOL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Adaptedness {
    /// `p = I`
    Identity,
    /// `p = 0`
    Vacuum,
    General,
}

/// `V_t = V̂_t (I ⊗ P_{[t})` with `V̂_t = V̂_{t−1} σ̃_{t−1}(V̂_1)` and `V̂_1 = W` on `𝔥 ⊗` slot 0.
#[derive(Debug, Clone)]
pub struct Cocycle {
    cfg: SliceConfig,
    p: OneParticleProjection,
    one_step: CMatrix,
    v: Vec<FockOperator>,
    v_hat: Vec<FockOperator>,
}

impl Cocycle {
    pub fn build(cfg: &SliceConfig, p: OneParticleProjection, w: CMatrix) -> Result<Self> {
        let n = cfg.k_ini * cfg.slot_dim();
        if w.nrows() != n || w.ncols() != n {
            return Err(Error::Shape(format!(
                "one-step unitary is {}x{}, expected {n}x{n} on the initial space times one slot",
                w.nrows(),
                w.ncols()
            )));
        }
        if p.dim() != cfg.d {
            return Err(Error::Shape(format!("projection is {0}x{0}, grid has d = {1}", p.dim(), cfg.d)));
        }
        let defect = unitary_defect(&w);
        if defect > TOL {
            return Err(Error::NotUnitary { defect });
        }
        let step = FockOperator::from_local(cfg, &w, 1.min(cfg.n_slots), Tail::Identity, true)?;
        let mut v_hat = Vec::with_capacity(cfg.n_slots + 1);
        v_hat.push(FockOperator::identity_on(cfg, true));
        for t in 1..=cfg.n_slots {
            let next = &v_hat[t - 1] * &ampliated_ccr_flow(t - 1, &step)?;
            v_hat.push(next.with_structure(t, Tail::Identity));
        }
        let mut v = Vec::with_capacity(cfg.n_slots + 1);
        for (t, vh) in v_hat.iter().enumerate() {
            let tail_proj = p_tail_projection(cfg, &p, t)?.ampliate()?;
            v.push(vh * &tail_proj);
        }
        let cocycle = Self {
            cfg: *cfg,
            p,
            one_step: w,
            v,
            v_hat,
        };
        cocycle.validate()?;
        Ok(cocycle)
    }

    /// Re-checks adaptedness and isometry of every cached member.
    fn validate(&self) -> Result<()> {
        for t in 0..=self.cfg.n_slots {
            let expected_tail = p_tail_projection(&self.cfg, &self.p, t)?.tail().clone();
            let structure = self.v[t].structure_defect(t, &expected_tail);
            let local = max_abs(&(self.v[t].local_at(t)? - self.v_hat[t].local_at(t)?));
            let defect = structure.max(local);
            if defect > TOL {
                return Err(Error::Adaptedness {
                    expected: "V_t = V_{t)} ⊗ P_{[t}",
                    defect,
                });
            }
            let iso = isometry_defect(self.v_hat[t].matrix());
            if iso > TOL {
                return Err(Error::Adaptedness {
                    expected: "V̂_t is an isometry",
                    defect: iso,
                });
            }
        }
        Ok(())
    }

    pub fn cfg(&self) -> &SliceConfig {
        &self.cfg
    }

    pub fn p(&self) -> &OneParticleProjection {
        &self.p
    }

    pub fn one_step(&self) -> &CMatrix {
        &self.one_step
    }

    pub fn adaptedness(&self) -> Adaptedness {
        if self.p.is_identity() {
            Adaptedness::Identity
        } else if self.p.is_zero() {
            Adaptedness::Vacuum
        } else {
            Adaptedness::General
        }
    }

    /// `V_t`; note `V_0 = I ⊗ P_{[0}`, which is `I` only for identity-adapted cocycles.
    pub fn v(&self, t: usize) -> &FockOperator {
        &self.v[t]
    }

    pub fn v_hat(&self, t: usize) -> &FockOperator {
        &self.v_hat[t]
    }

    /// `max_{s + t ≤ n} ‖V_{s+t} − V̂_s σ̃_s(V_t)‖`.
    pub fn identity_defect(&self) -> Result<Deviation> {
        let n = self.cfg.n_slots;
        let mut worst = Deviation::default();
        for s in 0..=n {
            for t in 0..=(n - s) {
                let rhs = &self.v_hat[s] * &ampliated_ccr_flow(s, &self.v[t])?;
                worst = worst.max(Deviation::between(self.v[s + t].matrix(), rhs.matrix()));
            }
        }
        Ok(worst)
    }

    /// `max ‖V_{s+t} S̃((r,s]) − V̂_s S̃((r,s]) σ̃_s(V_t)‖` over `r < s` and `s + t ≤ n`.
    pub fn lemma_commutation_defect(&self, stop: &DiscreteStopTime) -> Result<Deviation> {
        let n = self.cfg.n_slots;
        let mut worst = Deviation::default();
        for s in 1..=n {
            for r in 0..s {
                let mass = stop.interval(r, Some(s)).ampliate()?;
                for t in 0..=(n - s) {
                    let lhs = &self.v[s + t] * &mass;
                    let rhs = &(&self.v_hat[s] * &mass) * &ampliated_ccr_flow(s, &self.v[t])?;
                    worst = worst.max(Deviation::between(lhs.matrix(), rhs.matrix()));
                }
            }
        }
        Ok(worst)
    }

    fn stop_masses(&self, masses: &[(usize, FockOperator)]) -> Result<StoppedCocycle> {
        let mut v_terms = Vec::with_capacity(masses.len());
        let mut v_hat_terms = Vec::with_capacity(masses.len());
        for (t, m) in masses {
            let m = m.ampliate()?;
            v_terms.push(&self.v[*t] * &m);
            v_hat_terms.push(&self.v_hat[*t] * &m);
        }
        Ok(StoppedCocycle {
            v_s: sum_operators(&self.cfg, true, v_terms.iter()),
            v_hat_s: sum_operators(&self.cfg, true, v_hat_terms.iter()),
        })
    }

    /// `V_S = Σ_j V_{t_j} S̃({t_j})` and `V̂_S` likewise.
    pub fn stop(&self, s: &DiscreteStopTime) -> Result<StoppedCocycle> {
        self.check_grid(s)?;
        self.stop_masses(&atom_partition(s))
    }

    /// `V_{S,π} = Σ_k V_{π_k} S̃((π_{k−1}, π_k])`.
    pub fn stop_on(&self, s: &DiscreteStopTime, partition: &[usize]) -> Result<StoppedCocycle> {
        self.check_grid(s)?;
        self.stop_masses(&partition_masses(s, partition)?)
    }

    fn check_grid(&self, s: &DiscreteStopTime) -> Result<()> {
        if s.cfg() != &self.cfg {
            return Err(Error::Shape("stop time and cocycle live on different grids".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct StoppedCocycle {
    pub v_s: FockOperator,
    pub v_hat_s: FockOperator,
}

impl StoppedCocycle {
    /// `‖V_S‖`, at most `1` up to rounding.
    pub fn norm(&self) -> f64 {
        op_norm(self.v_s.matrix())
    }

    /// `V_S* V_S`.
    pub fn gram(&self) -> CMatrix {
        matmul_adj(self.v_s.matrix(), self.v_s.matrix())
    }
}

/// Both sides of `V_{S⋆T} = V̂_S σ̃_S(V_T)`, each computed on its own path.
pub fn stopped_cocycle_identity_check(v: &Cocycle, s: &DiscreteStopTime, t: &DiscreteStopTime) -> Result<Deviation> {
    let st = s.convolve(t)?;
    let lhs = v.stop(&st)?.v_s;
    let rhs = &v.stop(s)?.v_hat_s * &stopped_flow(s, &v.stop(t)?.v_s)?;
    Ok(Deviation::between(lhs.matrix(), rhs.matrix()))
}

/// `ĵ_S(a) = V_S (a ⊗ I) V_S*`.
pub fn j_hat(stopped: &StoppedCocycle, a: &CMatrix) -> Result<FockOperator> {
    let cfg = *stopped.v_s.cfg();
    let a = FockOperator::initial(&cfg, a)?;
    Ok(conjugate(&stopped.v_s, &a))
}

/// `k̂_S(a) = V_S (a ⊗ E_S) V_S*`.
pub fn k_hat(stopped: &StoppedCocycle, e_s: &FockOperator, a: &CMatrix) -> Result<FockOperator> {
    let cfg = *stopped.v_s.cfg();
    let inner = &FockOperator::initial(&cfg, a)? * &e_s.ampliate()?;
    Ok(conjugate(&stopped.v_s, &inner))
}

fn conjugate(v: &FockOperator, x: &FockOperator) -> FockOperator {
    &(v * x) * &v.adjoint()
}

/// Defects of a stopped flow, each the worst case over all matrix units of `B(𝔥)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowReport {
    pub multiplicativity: Deviation,
    pub adjoint: Deviation,
    pub linearity: Deviation,
    pub composition: Deviation,
    /// value at the identity against `V_S V_S*`
    pub unit: Deviation,
    /// `V_S* V_S` against `I` (identity-adapted) or `Ẽ_S` (vacuum-adapted)
    pub gram: Deviation,
}

impl FlowReport {
    pub fn entries(&self) -> [(&'static str, Deviation); 6] {
        [
            ("multiplicativity", self.multiplicativity),
            ("adjoint", self.adjoint),
            ("linearity", self.linearity),
            ("composition", self.composition),
            ("unit", self.unit),
            ("gram", self.gram),
        ]
    }

    pub fn worst(&self) -> Deviation {
        self.entries().iter().map(|(_, d)| *d).collect()
    }
}

pub fn matrix_unit(k: usize, a: usize, b: usize) -> CMatrix {
    let mut e = CMatrix::zeros(k, k);
    e[(a, b)] = ONE;
    e
}

fn homomorphism_defects(k: usize, flow: &dyn Fn(&CMatrix) -> Result<FockOperator>) -> Result<(Deviation, Deviation, Deviation)> {
    let units: Vec<(CMatrix, FockOperator)> = (0..k * k)
        .map(|i| {
            let e = matrix_unit(k, i / k, i % k);
            let image = flow(&e)?;
            Ok((e, image))
        })
        .collect::<Result<_>>()?;
    let mut mult = Deviation::default();
    let mut adj = Deviation::default();
    let mut lin = Deviation::default();
    let alpha = C64::new(0.6, -0.3);
    let beta = C64::new(-0.2, 0.9);
    for (i, (ea, ja)) in units.iter().enumerate() {
        let transposed = (i % k) * k + i / k;
        adj = adj.max(Deviation::between(&ja.matrix().adjoint(), units[transposed].1.matrix()));
        for (eb, jb) in &units {
            let prod = flow(&(ea * eb))?;
            mult = mult.max(Deviation::between((ja * jb).matrix(), prod.matrix()));
            let combo = flow(&(ea * alpha + eb * beta))?;
            let expected = ja.matrix() * alpha + jb.matrix() * beta;
            lin = lin.max(Deviation::between(combo.matrix(), &expected));
        }
    }
    Ok((mult, adj, lin))
}

/// Report for `ĵ_S`: `*`-homomorphism defects, `ĵ_{S⋆T}(a) = V̂_S σ̃_S(ĵ_T(a)) V̂_S*`,
/// `ĵ_S(I) = V_S V_S*` and `V_S* V_S = I`.
pub fn eh_flow_identity(v: &Cocycle, s: &DiscreteStopTime, t: &DiscreteStopTime) -> Result<FlowReport> {
    if v.adaptedness() != Adaptedness::Identity {
        return Err(Error::Adaptedness {
            expected: "identity-adapted cocycle (p = I)",
            defect: max_abs(&(v.p().matrix() - identity(v.p().dim()))),
        });
    }
    let k = v.cfg().k_ini;
    let vs = v.stop(s)?;
    let vt = v.stop(t)?;
    let vst = v.stop(&s.convolve(t)?)?;
    let (multiplicativity, adjoint, linearity) = homomorphism_defects(k, &|a| j_hat(&vs, a))?;
    let mut composition = Deviation::default();
    for i in 0..k * k {
        let e = matrix_unit(k, i / k, i % k);
        let lhs = j_hat(&vst, &e)?;
        let rhs = conjugate(&vs.v_hat_s, &stopped_flow(s, &j_hat(&vt, &e)?)?);
        composition = composition.max(Deviation::between(lhs.matrix(), rhs.matrix()));
    }
    let unit = Deviation::between(
        j_hat(&vs, &identity(k))?.matrix(),
        &matmul(vs.v_s.matrix(), &vs.v_s.matrix().adjoint()),
    );
    let gram = Deviation::between(&vs.gram(), &identity(k * v.cfg().fock_dim()));
    Ok(FlowReport {
        multiplicativity,
        adjoint,
        linearity,
        composition,
        unit,
        gram,
    })
}

/// Report for `k̂_S`: `*`-homomorphism defects, `k̂_{S⋆T}(a) = V̂_S σ̃_S(k̂_T(a)) V̂_S*`,
/// `k̂_S(I) = V_S V_S*` and `V_S* V_S = Ẽ_S`.
pub fn eh_flow_vacuum(v: &Cocycle, s: &DiscreteStopTime, t: &DiscreteStopTime) -> Result<FlowReport> {
    if v.adaptedness() != Adaptedness::Vacuum {
        return Err(Error::Adaptedness {
            expected: "vacuum-adapted cocycle (p = 0)",
            defect: max_abs(v.p().matrix()),
        });
    }
    let k = v.cfg().k_ini;
    let st = s.convolve(t)?;
    let (e_s, e_t, e_st) = (stopped_projection(s), stopped_projection(t), stopped_projection(&st));
    let vs = v.stop(s)?;
    let vt = v.stop(t)?;
    let vst = v.stop(&st)?;
    let (multiplicativity, adjoint, linearity) = homomorphism_defects(k, &|a| k_hat(&vs, &e_s, a))?;
    let mut composition = Deviation::default();
    for i in 0..k * k {
        let e = matrix_unit(k, i / k, i % k);
        let lhs = k_hat(&vst, &e_st, &e)?;
        let rhs = conjugate(&vs.v_hat_s, &stopped_flow(s, &k_hat(&vt, &e_t, &e)?)?);
        composition = composition.max(Deviation::between(lhs.matrix(), rhs.matrix()));
    }
    let unit = Deviation::between(
        k_hat(&vs, &e_s, &identity(k))?.matrix(),
        &matmul(vs.v_s.matrix(), &vs.v_s.matrix().adjoint()),
    );
    let gram = Deviation::between(&vs.gram(), e_s.ampliate()?.matrix());
    Ok(FlowReport {
        multiplicativity,
        adjoint,
        linearity,
        composition,
        unit,
        gram,
    })
}

/// `‖E_{S⋆T} − σ_S(E_T)‖`.
pub fn convolution_vacuum_defect(s: &DiscreteStopTime, t: &DiscreteStopTime) -> Result<Deviation> {
    let lhs = stopped_projection(&s.convolve(t)?);
    let rhs = stopped_flow(s, &stopped_projection(t))?;
    Ok(Deviation::between(lhs.matrix(), rhs.matrix()))
}

/// `‖(V_{S_n} − V_S) z‖` for every member of `sequence` (rows) and probe (columns).
pub fn continuity_probe(
    v: &Cocycle,
    sequence: &[DiscreteStopTime],
    target: &DiscreteStopTime,
    probes: &[FockVector],
) -> Result<Vec<Vec<f64>>> {
    let target_v = v.stop(target)?.v_s;
    sequence
        .iter()
        .map(|s_n| {
            let diff = &v.stop(s_n)?.v_s - &target_v;
            probes.iter().map(|z| Ok(diff.apply(z)?.norm())).collect()
        })
        .collect()
}
