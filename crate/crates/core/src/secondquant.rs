//! Second-quantized building blocks: conditional-vacuum projections `E_t`,
//! shift isometries `Γ_s`, tail projections `P_{[t}` and the CCR flow `σ_t`.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fock::{slot_occupations, FockOperator, FockVector, SliceConfig, Tail};
use crate::linalg::{identity, kron, projection_defect, CMatrix, CVector, C64, ONE, ZERO};
use crate::TOL;

/// Orthogonal projection `p` on the multiplicity space.
#[derive(Debug, Clone, PartialEq)]
pub struct OneParticleProjection {
    p: CMatrix,
}

impl OneParticleProjection {
    pub fn new(p: CMatrix) -> Result<Self> {
        if p.nrows() != p.ncols() {
            return Err(Error::Shape("one-particle projection must be square".into()));
        }
        let defect = projection_defect(&p);
        if defect > TOL {
            return Err(Error::NotProjection { defect });
        }
        Ok(Self { p })
    }

    pub fn identity(d: usize) -> Self {
        Self { p: identity(d) }
    }

    pub fn zero(d: usize) -> Self {
        Self {
            p: CMatrix::zeros(d, d),
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.p
    }

    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    pub fn is_identity(&self) -> bool {
        crate::linalg::max_abs(&(&self.p - identity(self.dim()))) <= crate::EXACT_TOL
    }

    pub fn is_zero(&self) -> bool {
        crate::linalg::max_abs(&self.p) <= crate::EXACT_TOL
    }
}

/// `Γ(a)` restricted to one truncated slot: the action of `a` on every
/// symmetric power, in the occupation basis.
///
/// Uses `Γ(a) (a†)^α |0⟩ = Π_c (Σ_e a_{ec} a_e†)^{α_c} |0⟩` and expands the
/// product of linear forms monomial by monomial.
pub fn second_quantize_slot(d: usize, cap: usize, a: &CMatrix) -> CMatrix {
    assert_eq!(a.nrows(), d, "one-particle operator must be d x d");
    let occ = slot_occupations(d, cap);
    let index: BTreeMap<Vec<u32>, usize> = occ.iter().cloned().enumerate().map(|(i, o)| (o, i)).collect();
    let fact = |o: &[u32]| -> f64 { o.iter().map(|&k| (1..=k).map(f64::from).product::<f64>()).product() };
    let mut out = CMatrix::zeros(occ.len(), occ.len());
    for (col, alpha) in occ.iter().enumerate() {
        let mut poly: BTreeMap<Vec<u32>, C64> = BTreeMap::new();
        poly.insert(vec![0; d], ONE);
        for (c, &power) in alpha.iter().enumerate() {
            for _ in 0..power {
                let mut next: BTreeMap<Vec<u32>, C64> = BTreeMap::new();
                for (mono, coeff) in &poly {
                    for e in 0..d {
                        let w = a[(e, c)];
                        if w == ZERO {
                            continue;
                        }
                        let mut m = mono.clone();
                        m[e] += 1;
                        *next.entry(m).or_insert(ZERO) += coeff * w;
                    }
                }
                poly = next;
            }
        }
        let norm_in = fact(alpha).sqrt();
        for (beta, coeff) in poly {
            let row = index[&beta];
            out[(row, col)] += coeff * fact(&beta).sqrt() / norm_in;
        }
    }
    out
}

/// Per-slot matrix of the vacuum projection `|Ω⟩⟨Ω|`.
pub fn slot_vacuum_projection(cfg: &SliceConfig) -> CMatrix {
    let mut q = CMatrix::zeros(cfg.slot_dim(), cfg.slot_dim());
    q[(0, 0)] = ONE;
    q
}

/// `I ⊗ a ⊗ I` with `a` acting on slot `j`.
pub fn slot_operator(cfg: &SliceConfig, slot: usize, a: &CMatrix) -> Result<FockOperator> {
    if slot >= cfg.n_slots {
        return Err(Error::SlotOutOfRange {
            index: slot,
            max: cfg.n_slots - 1,
        });
    }
    let local = kron(a, &identity(cfg.prefix_dim(slot)));
    FockOperator::from_local(cfg, &local, slot + 1, Tail::Identity, false)
}

/// Total number operator of slot `j`.
pub fn slot_number_operator(cfg: &SliceConfig, slot: usize) -> Result<FockOperator> {
    let occ = slot_occupations(cfg.d, cfg.cap);
    let n = CMatrix::from_diagonal(&CVector::from_iterator(
        occ.len(),
        occ.iter().map(|o| C64::new(o.iter().sum::<u32>() as f64, 0.0)),
    ));
    slot_operator(cfg, slot, &n)
}

/// `E_t`, the projection onto `Γ_{t)} ⊗ Ω_{[t}`; `E_{n_slots} = I`.
pub fn conditional_vacuum(cfg: &SliceConfig, t: usize) -> Result<FockOperator> {
    cfg.check_slot(t)?;
    if t == cfg.n_slots {
        return Ok(FockOperator::identity(cfg));
    }
    let tail = Tail::Projection(Arc::new(slot_vacuum_projection(cfg)));
    FockOperator::from_local(cfg, &identity(cfg.prefix_dim(t)), t, tail, false)
}

/// `P_{[t}`: identity on slots `< t`, `Γ(p)` on every slot `≥ t`.
pub fn p_tail_projection(cfg: &SliceConfig, p: &OneParticleProjection, t: usize) -> Result<FockOperator> {
    cfg.check_slot(t)?;
    if p.dim() != cfg.d {
        return Err(Error::Shape(format!("projection is {0}x{0}, grid has d = {1}", p.dim(), cfg.d)));
    }
    if p.is_identity() || t == cfg.n_slots {
        return Ok(FockOperator::identity(cfg));
    }
    let tail = Tail::Projection(Arc::new(second_quantize_slot(cfg.d, cfg.cap, p.matrix())));
    FockOperator::from_local(cfg, &identity(cfg.prefix_dim(t)), t, tail, false)
}

/// Operator defined only on vectors whose support horizon is at most
/// `admissible_horizon` (the shifts `Γ_s` and `Γ_S`).
///
/// Outside the admissible subspace the stored matrix is zero, so it is a
/// partial isometry whose initial space is the admissible subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainOperator {
    cfg: SliceConfig,
    matrix: CMatrix,
    ampliated: bool,
    admissible_horizon: usize,
}

impl DomainOperator {
    pub(crate) fn new(cfg: &SliceConfig, matrix: CMatrix, ampliated: bool, admissible_horizon: usize) -> Self {
        Self {
            cfg: *cfg,
            matrix,
            ampliated,
            admissible_horizon,
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn admissible_horizon(&self) -> usize {
        self.admissible_horizon
    }

    pub fn is_ampliated(&self) -> bool {
        self.ampliated
    }

    pub fn cfg(&self) -> &SliceConfig {
        &self.cfg
    }

    /// Projection onto the admissible subspace, `E_{admissible_horizon}` (ampliated if needed).
    pub fn domain_projection(&self) -> Result<FockOperator> {
        let e = conditional_vacuum(&self.cfg, self.admissible_horizon)?;
        if self.ampliated {
            e.ampliate()
        } else {
            Ok(e)
        }
    }

    pub fn apply(&self, v: &FockVector) -> Result<FockVector> {
        if v.is_ampliated() != self.ampliated || v.cfg() != &self.cfg {
            return Err(Error::Shape("operator and vector live on different spaces".into()));
        }
        if v.support_horizon() > self.admissible_horizon {
            return Err(Error::Horizon {
                context: "shift",
                allowed: self.admissible_horizon,
                actual: v.support_horizon(),
            });
        }
        FockVector::from_amplitudes(&self.cfg, &self.matrix * v.amplitudes(), self.ampliated)
    }

    pub fn ampliate(&self) -> Result<Self> {
        if self.ampliated {
            return Err(Error::AlreadyAmpliated);
        }
        Ok(Self {
            cfg: self.cfg,
            matrix: kron(&identity(self.cfg.k_ini), &self.matrix),
            ampliated: true,
            admissible_horizon: self.admissible_horizon,
        })
    }
}

/// `Γ_s = Γ(θ_s)`: slot contents move `s` slots to the right.
///
/// On the little-endian basis a state `x` of the first `n − s` slots maps to
/// `x · slot_dim^s`.
pub fn shift(cfg: &SliceConfig, s: usize) -> Result<DomainOperator> {
    cfg.check_slot(s)?;
    let fock = cfg.fock_dim();
    let admissible = cfg.n_slots - s;
    let stride = cfg.prefix_dim(s);
    let mut m = CMatrix::zeros(fock, fock);
    for x in 0..cfg.prefix_dim(admissible) {
        m[(x * stride, x)] = ONE;
    }
    Ok(DomainOperator::new(cfg, m, false, admissible))
}

/// `σ_t(X) = I_{t)} ⊗ Γ_t X Γ_t*`, computed by slot relabelling.
///
/// Works on ampliated operators as `σ̃_t = id ⊗ σ_t`. The local factor of `X`
/// moves to slots `t..t + h` and its tail structure is kept.
pub fn ccr_flow(t: usize, x: &FockOperator) -> Result<FockOperator> {
    let cfg = *x.cfg();
    cfg.check_slot(t)?;
    let h = x.support_horizon();
    if h + t > cfg.n_slots {
        return Err(Error::Horizon {
            context: "ccr_flow",
            allowed: cfg.n_slots - t,
            actual: h,
        });
    }
    if t == 0 {
        return Ok(x.clone());
    }
    let k = cfg.ini_dim(x.is_ampliated());
    let local = x.local();
    let dh = cfg.prefix_dim(h);
    let low = identity(cfg.prefix_dim(t));
    // per initial block (u, v): local_uv ⊗ I_{slots < t}
    let dnew = dh * low.nrows();
    let mut shifted = CMatrix::zeros(k * dnew, k * dnew);
    for u in 0..k {
        for v in 0..k {
            let block = local.view((u * dh, v * dh), (dh, dh)).clone_owned();
            shifted
                .view_mut((u * dnew, v * dnew), (dnew, dnew))
                .copy_from(&kron(&block, &low));
        }
    }
    FockOperator::from_local(&cfg, &shifted, h + t, x.tail().clone(), x.is_ampliated())
}

/// `σ̃_t = id_{B(𝔥)} ⊗ σ_t`; rejects non-ampliated input.
pub fn ampliated_ccr_flow(t: usize, z: &FockOperator) -> Result<FockOperator> {
    if !z.is_ampliated() {
        return Err(Error::Shape("ampliated flow needs an operator on the joint space".into()));
    }
    ccr_flow(t, z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{exponential_vector, StepFunction};
    use crate::linalg::max_abs;

    fn cfg(n: usize, d: usize, cap: usize) -> SliceConfig {
        SliceConfig::new(n, 0.2, d, cap, 2).unwrap()
    }

    #[test]
    fn e_zero_projects_on_vacuum() {
        let c = cfg(3, 1, 1);
        let e0 = conditional_vacuum(&c, 0).unwrap();
        let mut expected = CMatrix::zeros(8, 8);
        expected[(0, 0)] = ONE;
        assert_eq!(e0.matrix(), &expected);
        assert_eq!(conditional_vacuum(&c, 3).unwrap().matrix(), &identity(8));
        assert!(conditional_vacuum(&c, 4).is_err());
    }

    #[test]
    fn second_quantization_of_channel_projection() {
        // d = 2, cap = 1: basis |00⟩, |01⟩, |10⟩ (lexicographic)
        let mut p = CMatrix::zeros(2, 2);
        p[(0, 0)] = ONE;
        let g = second_quantize_slot(2, 1, &p);
        let expected = CMatrix::from_diagonal(&CVector::from_vec(vec![ONE, ZERO, ONE]));
        assert!(max_abs(&(g - expected)) < 1e-15);
    }

    #[test]
    fn second_quantization_is_multiplicative() {
        let a = CMatrix::from_fn(2, 2, |i, j| C64::new(0.3 * i as f64 - 0.1, 0.2 * j as f64 + 0.05));
        let b = CMatrix::from_fn(2, 2, |i, j| C64::new((i + j) as f64 * 0.4, -0.3));
        let lhs = second_quantize_slot(2, 3, &(&a * &b));
        let rhs = second_quantize_slot(2, 3, &a) * second_quantize_slot(2, 3, &b);
        assert!(max_abs(&(lhs - rhs)) < 1e-13);
    }

    #[test]
    fn tail_projection_extremes() {
        let c = cfg(3, 2, 1);
        let id = p_tail_projection(&c, &OneParticleProjection::identity(2), 1).unwrap();
        assert_eq!(id.matrix(), &identity(c.fock_dim()));
        for t in 0..=3 {
            let zero = p_tail_projection(&c, &OneParticleProjection::zero(2), t).unwrap();
            let e = conditional_vacuum(&c, t).unwrap();
            assert!(max_abs(&(zero.matrix() - e.matrix())) < 1e-15);
        }
    }

    #[test]
    fn shift_moves_exponential_vectors() {
        let c = cfg(3, 1, 2);
        let f = StepFunction::new(&c, vec![vec![C64::new(0.5, 0.1)], vec![C64::new(-0.2, 0.3)], vec![ZERO]]).unwrap();
        let e = exponential_vector(&c, &f).unwrap();
        let g1 = shift(&c, 1).unwrap();
        let moved = g1.apply(&e).unwrap();
        let expected = exponential_vector(&c, &f.shifted(1)).unwrap();
        assert!(crate::linalg::max_abs_vec(&(moved.amplitudes() - expected.amplitudes())) < 1e-15);
        assert!(shift(&c, 2).unwrap().apply(&e).is_err());
    }

    #[test]
    fn shift_zero_is_identity() {
        let c = cfg(2, 1, 1);
        assert_eq!(shift(&c, 0).unwrap().matrix(), &identity(4));
        let v = FockVector::vacuum(&c);
        assert_eq!(shift(&c, 2).unwrap().apply(&v).unwrap(), v);
    }

    #[test]
    fn flow_moves_number_operator() {
        let c = cfg(3, 1, 2);
        let n0 = slot_number_operator(&c, 0).unwrap();
        let n1 = slot_number_operator(&c, 1).unwrap();
        let flowed = ccr_flow(1, &n0).unwrap();
        assert_eq!(flowed.matrix(), n1.matrix());
        assert_eq!(ccr_flow(0, &n0).unwrap(), n0);
        assert!(ccr_flow(3, &n0).is_err());
    }

    #[test]
    fn flow_keeps_projection_tails() {
        let c = cfg(4, 1, 1);
        let e1 = conditional_vacuum(&c, 1).unwrap();
        let flowed = ccr_flow(2, &e1).unwrap();
        assert_eq!(flowed.matrix(), conditional_vacuum(&c, 3).unwrap().matrix());
        assert!(ampliated_ccr_flow(1, &e1).is_err());
    }
}
