//! The named identity checks a scenario can run, each tied to one anchor.

use std::collections::BTreeMap;

use qstop_core::cocycle::{
    convolution_vacuum_defect, eh_flow_identity, eh_flow_vacuum, j_hat, k_hat, stopped_cocycle_identity_check,
};
use qstop_core::linalg::{identity, isometry_defect, projection_defect};
use qstop_core::random::gaussian_matrix;
use qstop_core::stoptime::product_rectangle;
use qstop_core::stopped::{
    stopped_flow, stopped_flow_on, stopped_projection, stopped_projection_on, stopped_shift, stopped_shift_on,
};
use qstop_core::{
    ccr_flow, conditional_vacuum, Adaptedness, CMatrix, Deviation, DiscreteStopTime, Factorization, FockOperator,
    Result, SliceConfig, Tail, EXACT_TOL,
};
use rand::Rng;

use crate::scenario::Instance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CheckId {
    StopTimeDefinition,
    ConvolutionRectangles,
    DiscreteConvolution,
    ShiftByConstant,
    StoppedProjection,
    StoppedShift,
    StoppedFlow,
    FactorizationSj,
    FactorizationWtsj,
    RefinementStability,
    CocycleIdentity,
    StoppedCocycleContraction,
    StoppedCocycleGram,
    DiscreteLemma,
    MainTheorem,
    EhIdentity,
    EhVacuum,
    VacuumConvolution,
    ClosingRemark,
}

impl CheckId {
    /// The default suite, in report order.
    pub const ALL: [CheckId; 19] = [
        CheckId::StopTimeDefinition,
        CheckId::ConvolutionRectangles,
        CheckId::DiscreteConvolution,
        CheckId::ShiftByConstant,
        CheckId::StoppedProjection,
        CheckId::StoppedShift,
        CheckId::StoppedFlow,
        CheckId::FactorizationSj,
        CheckId::FactorizationWtsj,
        CheckId::RefinementStability,
        CheckId::CocycleIdentity,
        CheckId::StoppedCocycleContraction,
        CheckId::StoppedCocycleGram,
        CheckId::DiscreteLemma,
        CheckId::MainTheorem,
        CheckId::EhIdentity,
        CheckId::EhVacuum,
        CheckId::VacuumConvolution,
        CheckId::ClosingRemark,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckId::StopTimeDefinition => "stop_time_definition",
            CheckId::ConvolutionRectangles => "convolution_rectangles",
            CheckId::DiscreteConvolution => "discrete_convolution",
            CheckId::ShiftByConstant => "shift_by_constant",
            CheckId::StoppedProjection => "stopped_projection",
            CheckId::StoppedShift => "stopped_shift",
            CheckId::StoppedFlow => "stopped_flow",
            CheckId::FactorizationSj => "factorization_sj",
            CheckId::FactorizationWtsj => "factorization_wtsj",
            CheckId::RefinementStability => "refinement_stability",
            CheckId::CocycleIdentity => "cocycle_identity",
            CheckId::StoppedCocycleContraction => "stopped_cocycle_contraction",
            CheckId::StoppedCocycleGram => "stopped_cocycle_gram",
            CheckId::DiscreteLemma => "discrete_lemma",
            CheckId::MainTheorem => "main_theorem",
            CheckId::EhIdentity => "eh_identity",
            CheckId::EhVacuum => "eh_vacuum",
            CheckId::VacuumConvolution => "vacuum_convolution",
            CheckId::ClosingRemark => "closing_remark",
        }
    }

    pub fn anchor(self) -> &'static str {
        match self {
            CheckId::StopTimeDefinition => "S({0}) = 0 and S([0,t]) ∈ B(Γ_t)) ⊗ I_[t",
            CheckId::ConvolutionRectangles => "(S ⊗ T)(A × B) = S(A) σ_S(T(B))",
            CheckId::DiscreteConvolution => "(S ⋆ T)(C) = Σ_j S((C − t_j)_+) σ_S(T({t_j}))",
            CheckId::ShiftByConstant => "S ⋆ T = S + t",
            CheckId::StoppedProjection => "E_{S,π} → E_S",
            CheckId::StoppedShift => "Γ_{S,π} → Γ_S",
            CheckId::StoppedFlow => "σ_{S,π}(X) → σ_S(X)",
            CheckId::FactorizationSj => "σ_S(X) = j_S(I_{S)} ⊗ Γ_S X Γ_S*) j_S*",
            CheckId::FactorizationWtsj => "σ̃_S(Z) = j̃_S(I_{S)} ⊗ Γ̃_S Z Γ̃_S*) j̃_S*",
            CheckId::RefinementStability => "V_{S,π} := Σ V_{π_k} S((π_{k−1}, π_k])",
            CheckId::CocycleIdentity => "V_{s+t} = V̂_s σ̃_s(V_t)",
            CheckId::StoppedCocycleContraction => "V_{S,π} is a contraction",
            CheckId::StoppedCocycleGram => "V_S* V_S = I_𝔥 ⊗ I; V_S* V_S = Ẽ_S",
            CheckId::DiscreteLemma => "V_{s+t} S((r,s]) = V̂_s σ̃_s(V_t) S((r,s])",
            CheckId::MainTheorem => "V_{S ⋆ T} = V̂_S σ̃_S(V_T)",
            CheckId::EhIdentity => "a ↦ V_S (a ⊗ I) V_S*",
            CheckId::EhVacuum => "a ↦ V_S (a ⊗ E_S) V_S*",
            CheckId::VacuumConvolution => "E_{S ⋆ T} = σ_S(E_T)",
            CheckId::ClosingRemark => "ĵ_S(I_𝔥) = V_S V_S* = k̂_S(I_𝔥)",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|c| c.name() == name)
    }

    /// Tolerance used when neither the check entry nor the scenario sets one.
    pub fn default_tol(self) -> Option<f64> {
        match self {
            // partition refinement only regroups identical sums
            CheckId::RefinementStability => Some(EXACT_TOL),
            _ => None,
        }
    }

    pub fn applies(self, adaptedness: Adaptedness) -> bool {
        match self {
            CheckId::EhIdentity => adaptedness == Adaptedness::Identity,
            CheckId::EhVacuum => adaptedness == Adaptedness::Vacuum,
            CheckId::StoppedCocycleGram | CheckId::ClosingRemark => adaptedness != Adaptedness::General,
            _ => true,
        }
    }

    pub fn run(self, inst: &Instance) -> Result<Deviation> {
        let salt = self as u64;
        match self {
            CheckId::StopTimeDefinition => stop_time_definition(inst),
            CheckId::ConvolutionRectangles => convolution_rectangles(inst),
            CheckId::DiscreteConvolution => discrete_convolution(inst),
            CheckId::ShiftByConstant => shift_by_constant(&inst.s),
            CheckId::StoppedProjection => stopped_projection_check(inst),
            CheckId::StoppedShift => stopped_shift_check(inst),
            CheckId::StoppedFlow => stopped_flow_check(inst, salt),
            CheckId::FactorizationSj => factorization(inst, false, salt),
            CheckId::FactorizationWtsj => factorization(inst, true, salt),
            CheckId::RefinementStability => refinement_stability(inst, salt),
            CheckId::CocycleIdentity => inst.cocycle.identity_defect(),
            CheckId::StoppedCocycleContraction => contraction(inst),
            CheckId::StoppedCocycleGram => gram(inst),
            CheckId::DiscreteLemma => {
                Ok(inst.cocycle.lemma_commutation_defect(&inst.s)?.max(inst.cocycle.lemma_commutation_defect(&inst.t)?))
            }
            CheckId::MainTheorem => stopped_cocycle_identity_check(&inst.cocycle, &inst.s, &inst.t),
            CheckId::EhIdentity => Ok(eh_flow_identity(&inst.cocycle, &inst.s, &inst.t)?.worst()),
            CheckId::EhVacuum => Ok(eh_flow_vacuum(&inst.cocycle, &inst.s, &inst.t)?.worst()),
            CheckId::VacuumConvolution => convolution_vacuum_defect(&inst.s, &inst.t),
            CheckId::ClosingRemark => closing_remark(inst),
        }
    }
}

/// Gaussian operator on slots `< h` (and `𝔥` when ampliated), unit operator norm scale.
fn random_local(cfg: &SliceConfig, h: usize, ampliated: bool, rng: &mut impl Rng) -> Result<FockOperator> {
    let n = cfg.ini_dim(ampliated) * cfg.prefix_dim(h);
    let g = gaussian_matrix(n, n, rng) * qstop_core::C64::new(1.0 / (2.0 * n as f64).sqrt(), 0.0);
    FockOperator::from_local(cfg, &g, h, Tail::Identity, ampliated)
}

/// Atom times merged with every even slot: a partition refining the atoms.
fn refining_partitions(s: &DiscreteStopTime) -> Vec<Vec<usize>> {
    let n = s.cfg().n_slots;
    let atoms = s.times();
    let mixed: Vec<usize> = (1..=n).filter(|t| atoms.contains(t) || t % 2 == 0).collect();
    vec![atoms, (1..=n).collect(), mixed]
}

fn stop_time_definition(inst: &Instance) -> Result<Deviation> {
    let st = inst.s.convolve(&inst.t)?;
    let worst = [&inst.s, &inst.t, &st]
        .iter()
        .map(|x| x.validate().worst().max(x.cdf().monotonicity_defect()))
        .fold(0.0, f64::max);
    Ok(Deviation::scalar(worst))
}

fn convolution_rectangles(inst: &Instance) -> Result<Deviation> {
    let (s, t) = (&inst.s, &inst.t);
    let cfg = *s.cfg();
    let st = s.convolve(t)?;
    let mut dev = Deviation::default();
    let mut by_sum: BTreeMap<usize, CMatrix> = BTreeMap::new();
    for a in s.atoms() {
        for b in t.atoms() {
            // fixed-time flow per atom, independent of σ_S
            let direct = &a.projection * &ccr_flow(a.time, &b.projection)?;
            let rect = product_rectangle(s, t, |x| x == a.time, |y| y == b.time)?;
            dev = dev
                .max(Deviation::between(rect.matrix(), direct.matrix()))
                .max(Deviation::scalar(projection_defect(direct.matrix())));
            *by_sum
                .entry(a.time + b.time)
                .or_insert_with(|| CMatrix::zeros(cfg.fock_dim(), cfg.fock_dim())) += direct.matrix();
        }
    }
    for u in 0..=cfg.n_slots {
        let expected = by_sum.remove(&u).unwrap_or_else(|| CMatrix::zeros(cfg.fock_dim(), cfg.fock_dim()));
        dev = dev.max(Deviation::between(st.at(u).matrix(), &expected));
    }
    Ok(dev)
}

fn discrete_convolution(inst: &Instance) -> Result<Deviation> {
    let (s, t) = (&inst.s, &inst.t);
    let n = s.cfg().n_slots;
    let st = s.convolve(t)?;
    let flowed: Vec<(usize, FockOperator)> = t
        .atoms()
        .iter()
        .map(|b| Ok((b.time, stopped_flow(s, &b.projection)?)))
        .collect::<Result<_>>()?;
    // C ranges over singletons and initial intervals
    let sets: Vec<Box<dyn Fn(usize) -> bool>> = (0..=n)
        .flat_map(|u| -> [Box<dyn Fn(usize) -> bool>; 2] { [Box::new(move |x| x == u), Box::new(move |x| x <= u)] })
        .collect();
    let mut dev = Deviation::default();
    for c in &sets {
        let lhs = st.measure(c);
        let mut rhs = FockOperator::zero(s.cfg());
        for (tj, flow_tj) in &flowed {
            let shifted = s.measure(|x| c(x + tj));
            rhs = &rhs + &(&shifted * flow_tj);
        }
        dev = dev.max(Deviation::between(lhs.matrix(), rhs.matrix()));
    }
    Ok(dev)
}

pub(crate) fn shift_by_constant(s: &DiscreteStopTime) -> Result<Deviation> {
    let cfg = s.cfg();
    let mut dev = Deviation::default();
    for t in 1..=(cfg.n_slots - s.max_atom()) {
        let conv = s.convolve(&DiscreteStopTime::deterministic(cfg, t)?)?;
        let shifted = s.shift_time(t)?;
        for u in 0..=cfg.n_slots {
            dev = dev.max(Deviation::between(conv.at(u).matrix(), shifted.at(u).matrix()));
            // (S + t)({u}) = S({u − t})
            let direct = if u >= t { s.at(u - t) } else { FockOperator::zero(cfg) };
            dev = dev.max(Deviation::between(shifted.at(u).matrix(), direct.matrix()));
        }
    }
    Ok(dev)
}

fn stopped_projection_check(inst: &Instance) -> Result<Deviation> {
    let mut dev = Deviation::default();
    for s in [&inst.s, &inst.t] {
        let e = stopped_projection(s);
        dev = dev.max(Deviation::scalar(projection_defect(e.matrix())));
        let mut direct = FockOperator::zero(s.cfg());
        for a in s.atoms() {
            direct = &direct + &(&a.projection * &conditional_vacuum(s.cfg(), a.time)?);
            dev = dev.max(Deviation::between((&e * &a.projection).matrix(), (&a.projection * &e).matrix()));
        }
        dev = dev.max(Deviation::between(e.matrix(), direct.matrix()));
    }
    Ok(dev)
}

fn stopped_shift_check(inst: &Instance) -> Result<Deviation> {
    let mut dev = Deviation::default();
    for s in [&inst.s, &inst.t] {
        let g = stopped_shift(s)?;
        let gram = g.matrix().adjoint() * g.matrix();
        dev = dev.max(Deviation::between(&gram, g.domain_projection()?.matrix()));
    }
    Ok(dev)
}

fn stopped_flow_check(inst: &Instance, salt: u64) -> Result<Deviation> {
    let s = &inst.s;
    let cfg = s.cfg();
    let h = cfg.n_slots - s.max_atom();
    let mut rng = inst.probe_rng(salt);
    let mut dev = Deviation::default();
    for ampliated in [false, true] {
        let x = random_local(cfg, h, ampliated, &mut rng)?;
        let y = random_local(cfg, h, ampliated, &mut rng)?;
        let fx = stopped_flow(s, &x)?;
        let fy = stopped_flow(s, &y)?;
        let fxy = stopped_flow(s, &(&x * &y))?;
        dev = dev.max(Deviation::between((&fx * &fy).matrix(), fxy.matrix()));
        dev = dev.max(Deviation::between(&fx.matrix().adjoint(), stopped_flow(s, &x.adjoint())?.matrix()));
        let one = stopped_flow(s, &FockOperator::identity_on(cfg, ampliated))?;
        dev = dev.max(Deviation::between(one.matrix(), &identity(one.matrix().nrows())));
    }
    Ok(dev)
}

fn factorization(inst: &Instance, ampliated: bool, salt: u64) -> Result<Deviation> {
    let s = &inst.s;
    let cfg = s.cfg();
    let f = Factorization::new(s)?;
    let j = f.matching(ampliated);
    let pi = &j * j.adjoint();
    let mut rng = inst.probe_rng(salt);
    let mut dev = Deviation::scalar(isometry_defect(&j));
    for _ in 0..2 {
        let x = random_local(cfg, f.post_horizon(), ampliated, &mut rng)?;
        let flowed = stopped_flow(s, &x)?;
        dev = dev.max(Deviation::between(&(flowed.matrix() * &j), &f.intertwined(&x)?));
        dev = dev.max(Deviation::between(&(&pi * flowed.matrix() * &pi), &f.flow_representation(&x)?));
    }
    Ok(dev)
}

fn refinement_stability(inst: &Instance, salt: u64) -> Result<Deviation> {
    let s = &inst.s;
    let cfg = s.cfg();
    let mut rng = inst.probe_rng(salt);
    let x = random_local(cfg, cfg.n_slots - s.max_atom(), false, &mut rng)?;
    let z = random_local(cfg, cfg.n_slots - s.max_atom(), true, &mut rng)?;
    let e = stopped_projection(s);
    let g = stopped_shift(s)?;
    let fx = stopped_flow(s, &x)?;
    let fz = stopped_flow(s, &z)?;
    let v = inst.cocycle.stop(s)?;
    let mut dev = Deviation::default();
    for pi in refining_partitions(s) {
        dev = dev
            .max(Deviation::between(stopped_projection_on(s, &pi)?.matrix(), e.matrix()))
            .max(Deviation::between(stopped_shift_on(s, &pi)?.matrix(), g.matrix()))
            .max(Deviation::between(stopped_flow_on(s, &pi, &x)?.matrix(), fx.matrix()))
            .max(Deviation::between(stopped_flow_on(s, &pi, &z)?.matrix(), fz.matrix()));
        let refined = inst.cocycle.stop_on(s, &pi)?;
        dev = dev
            .max(Deviation::between(refined.v_s.matrix(), v.v_s.matrix()))
            .max(Deviation::between(refined.v_hat_s.matrix(), v.v_hat_s.matrix()));
    }
    Ok(dev)
}

fn contraction(inst: &Instance) -> Result<Deviation> {
    let n = inst.s.cfg().n_slots;
    let st = inst.s.convolve(&inst.t)?;
    let mut excess: f64 = 0.0;
    for s in [&inst.s, &inst.t, &st] {
        // coarse partitions lump several atoms into one interval
        let m = s.max_atom();
        let mut coarse: Vec<usize> = (2..m).step_by(2).collect();
        coarse.push(m);
        for pi in [vec![n], coarse, s.times()] {
            let v = inst.cocycle.stop_on(s, &pi)?;
            excess = excess.max(v.norm() - 1.0);
        }
    }
    Ok(Deviation::scalar(excess.max(0.0)))
}

fn gram(inst: &Instance) -> Result<Deviation> {
    let st = inst.s.convolve(&inst.t)?;
    let vacuum = inst.cocycle.adaptedness() == Adaptedness::Vacuum;
    let mut dev = Deviation::default();
    for s in [&inst.s, &inst.t, &st] {
        let v = inst.cocycle.stop(s)?;
        let expected = if vacuum {
            stopped_projection(s).ampliate()?.into_matrix()
        } else {
            let n = v.v_s.matrix().nrows();
            identity(n)
        };
        dev = dev.max(Deviation::between(&v.gram(), &expected));
    }
    Ok(dev)
}

fn closing_remark(inst: &Instance) -> Result<Deviation> {
    let k = inst.s.cfg().k_ini;
    let v = inst.cocycle.stop(&inst.s)?;
    let unit = v.v_s.matrix() * v.v_s.matrix().adjoint();
    let mut dev = Deviation::between(j_hat(&v, &identity(k))?.matrix(), &unit);
    if inst.cocycle.adaptedness() == Adaptedness::Vacuum {
        let e_s = stopped_projection(&inst.s);
        dev = dev.max(Deviation::between(k_hat(&v, &e_s, &identity(k))?.matrix(), &unit));
    }
    Ok(dev)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip_and_are_unique() {
        for c in CheckId::ALL {
            assert_eq!(CheckId::from_name(c.name()), Some(c));
        }
        let mut anchors: Vec<&str> = CheckId::ALL.iter().map(|c| c.anchor()).collect();
        anchors.sort();
        anchors.dedup();
        assert_eq!(anchors.len(), CheckId::ALL.len());
    }

    #[test]
    fn flow_checks_follow_adaptedness() {
        assert!(CheckId::EhIdentity.applies(Adaptedness::Identity));
        assert!(!CheckId::EhIdentity.applies(Adaptedness::Vacuum));
        assert!(!CheckId::ClosingRemark.applies(Adaptedness::General));
        assert!(CheckId::MainTheorem.applies(Adaptedness::General));
    }
}
