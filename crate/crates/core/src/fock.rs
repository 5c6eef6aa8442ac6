//! Truncated, time-sliced model of Boson Fock space.
//!
//! The half line is cut into `n_slots` bins of width `dt`. Each bin carries a
//! `d`-channel bosonic space truncated at total occupation `cap`, so the Fock
//! space is the tensor product of `n_slots` copies of a `slot_dim`-dimensional
//! space. Basis indices are little-endian in slots: slot 0 is the least
//! significant digit, which makes the split `Γ = Γ_{t)} ⊗ Γ_{[t}` a contiguous
//! reshape.
//!
//! Ampliated objects live on `𝔥 ⊗ Γ` with joint index `u * fock_dim + x`.

use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{identity, kron, matmul, max_abs, CMatrix, CVector, C64, ONE, ZERO};

pub const DEFAULT_MAX_DIM: usize = 4096;

fn default_max_dim() -> usize {
    DEFAULT_MAX_DIM
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceConfig {
    pub n_slots: usize,
    pub dt: f64,
    /// Multiplicity (number of noise channels).
    pub d: usize,
    /// Maximum total occupation of a single slot.
    pub cap: usize,
    /// Dimension of the initial space.
    pub k_ini: usize,
    #[serde(default = "default_max_dim")]
    pub max_dim: usize,
}

fn binomial(n: usize, k: usize) -> Option<usize> {
    let k = k.min(n - k.min(n));
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

impl SliceConfig {
    pub fn new(n_slots: usize, dt: f64, d: usize, cap: usize, k_ini: usize) -> Result<Self> {
        let cfg = Self {
            n_slots,
            dt,
            d,
            cap,
            k_ini,
            max_dim: DEFAULT_MAX_DIM,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_max_dim(mut self, max_dim: usize) -> Result<Self> {
        self.max_dim = max_dim;
        self.validate()?;
        Ok(self)
    }

    pub fn with_cap(mut self, cap: usize) -> Result<Self> {
        self.cap = cap;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_slots == 0 {
            return Err(Error::Config("n_slots must be positive".into()));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if self.d == 0 {
            return Err(Error::Config("multiplicity d must be positive".into()));
        }
        if self.k_ini == 0 {
            return Err(Error::Config("k_ini must be positive".into()));
        }
        let slot = binomial(self.cap + self.d, self.d)
            .ok_or_else(|| Error::Config("slot dimension overflows".into()))?;
        match slot.checked_pow(self.n_slots as u32) {
            Some(dim) if dim <= self.max_dim => Ok(()),
            Some(dim) => Err(Error::DimensionLimit {
                dim,
                limit: self.max_dim,
            }),
            None => Err(Error::DimensionLimit {
                dim: usize::MAX,
                limit: self.max_dim,
            }),
        }
    }

    /// `C(cap + d, d)`, the number of occupation vectors with `|α| ≤ cap`.
    pub fn slot_dim(&self) -> usize {
        binomial(self.cap + self.d, self.d).expect("validated config")
    }

    pub fn fock_dim(&self) -> usize {
        self.prefix_dim(self.n_slots)
    }

    pub fn joint_dim(&self) -> usize {
        self.k_ini * self.fock_dim()
    }

    /// Dimension of the first `h` slots.
    pub fn prefix_dim(&self, h: usize) -> usize {
        self.slot_dim().pow(h as u32)
    }

    /// Size of the initial factor for an operator or vector with this ampliation flag.
    pub fn ini_dim(&self, ampliated: bool) -> usize {
        if ampliated {
            self.k_ini
        } else {
            1
        }
    }

    pub fn check_slot(&self, t: usize) -> Result<()> {
        if t > self.n_slots {
            Err(Error::SlotOutOfRange {
                index: t,
                max: self.n_slots,
            })
        } else {
            Ok(())
        }
    }
}

/// Occupation vectors `α ∈ ℤ₊^d` with `|α| ≤ cap`, in lexicographic order
/// (vacuum first).
pub fn slot_occupations(d: usize, cap: usize) -> Vec<Vec<u32>> {
    fn rec(d: usize, budget: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == d {
            out.push(prefix.clone());
            return;
        }
        for k in 0..=budget {
            prefix.push(k as u32);
            rec(d, budget - k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(d, cap, &mut Vec::with_capacity(d), &mut out);
    out
}

/// Per-slot basis indices of every Fock basis state, in index order.
pub fn enumerate_basis(cfg: &SliceConfig) -> Result<Vec<Vec<usize>>> {
    cfg.validate()?;
    let dim = cfg.slot_dim();
    Ok((0..cfg.fock_dim())
        .map(|mut idx| {
            (0..cfg.n_slots)
                .map(|_| {
                    let digit = idx % dim;
                    idx /= dim;
                    digit
                })
                .collect()
        })
        .collect())
}

/// Test function `f ∈ L²(ℝ₊; 𝕜)` constant on each bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    pub values: Vec<Vec<C64>>,
}

impl StepFunction {
    pub fn zero(cfg: &SliceConfig) -> Self {
        Self {
            values: vec![vec![ZERO; cfg.d]; cfg.n_slots],
        }
    }

    pub fn new(cfg: &SliceConfig, values: Vec<Vec<C64>>) -> Result<Self> {
        if values.len() != cfg.n_slots || values.iter().any(|v| v.len() != cfg.d) {
            return Err(Error::Shape(format!(
                "step function must have {} slots of {} channels",
                cfg.n_slots, cfg.d
            )));
        }
        Ok(Self { values })
    }

    /// `⟨f, g⟩ = Σ_j ⟨f_j, g_j⟩ dt`.
    pub fn inner(&self, other: &Self, dt: f64) -> C64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<C64>())
            .sum::<C64>()
            * dt
    }

    pub fn norm(&self, dt: f64) -> f64 {
        self.inner(self, dt).re.max(0.0).sqrt()
    }

    /// One past the last slot with a nonzero value.
    pub fn support_horizon(&self) -> usize {
        self.values
            .iter()
            .rposition(|v| v.iter().any(|z| *z != ZERO))
            .map_or(0, |j| j + 1)
    }

    /// `f · 1_{[0,t)}`.
    pub fn restrict_before(&self, t: usize) -> Self {
        let mut out = self.clone();
        for v in out.values.iter_mut().skip(t) {
            v.iter_mut().for_each(|z| *z = ZERO);
        }
        out
    }

    /// `θ_s f`: values move `s` slots to the right, content pushed past the
    /// grid is dropped.
    pub fn shifted(&self, s: usize) -> Self {
        let n = self.values.len();
        let d = self.values.first().map_or(0, Vec::len);
        let mut values = vec![vec![ZERO; d]; n];
        if s < n {
            values[s..].clone_from_slice(&self.values[..n - s]);
        }
        Self { values }
    }

    pub fn map_channels(&self, p: &CMatrix) -> Self {
        Self {
            values: self
                .values
                .iter()
                .map(|v| {
                    let col = CVector::from_column_slice(v);
                    (p * col).iter().copied().collect()
                })
                .collect(),
        }
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Truncated exponential vector of a single slot with amplitude vector `z`.
pub fn slot_exponential(d: usize, cap: usize, z: &[C64]) -> CVector {
    let occ = slot_occupations(d, cap);
    CVector::from_iterator(
        occ.len(),
        occ.iter().map(|alpha| {
            alpha
                .iter()
                .zip(z)
                .map(|(&a, &zc)| zc.powu(a) / factorial(a).sqrt())
                .product::<C64>()
        }),
    )
}

/// Kronecker product of per-slot vectors, slot 0 least significant.
fn slot_product(factors: &[CVector]) -> CVector {
    let mut acc = CVector::from_element(1, ONE);
    for f in factors {
        acc = f.kronecker(&acc);
    }
    acc
}

#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    cfg: SliceConfig,
    amplitudes: CVector,
    ampliated: bool,
    horizon: usize,
}

impl FockVector {
    pub fn vacuum(cfg: &SliceConfig) -> Self {
        let mut amplitudes = CVector::zeros(cfg.fock_dim());
        amplitudes[0] = ONE;
        Self {
            cfg: *cfg,
            amplitudes,
            ampliated: false,
            horizon: 0,
        }
    }

    /// Wraps raw amplitudes, inferring the support horizon.
    pub fn from_amplitudes(cfg: &SliceConfig, amplitudes: CVector, ampliated: bool) -> Result<Self> {
        let expected = cfg.ini_dim(ampliated) * cfg.fock_dim();
        if amplitudes.len() != expected {
            return Err(Error::Shape(format!(
                "vector length {} != {}",
                amplitudes.len(),
                expected
            )));
        }
        let horizon = infer_vector_horizon(cfg, &amplitudes, ampliated);
        Ok(Self {
            cfg: *cfg,
            amplitudes,
            ampliated,
            horizon,
        })
    }

    pub(crate) fn from_parts(cfg: &SliceConfig, amplitudes: CVector, ampliated: bool, horizon: usize) -> Self {
        Self {
            cfg: *cfg,
            amplitudes,
            ampliated,
            horizon,
        }
    }

    pub fn cfg(&self) -> &SliceConfig {
        &self.cfg
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> CVector {
        self.amplitudes
    }

    pub fn is_ampliated(&self) -> bool {
        self.ampliated
    }

    pub fn support_horizon(&self) -> usize {
        self.horizon
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn inner(&self, other: &Self) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    /// `u ⊗ x`.
    pub fn ampliate_with(&self, u: &CVector) -> Result<Self> {
        if self.ampliated {
            return Err(Error::AlreadyAmpliated);
        }
        if u.len() != self.cfg.k_ini {
            return Err(Error::Shape(format!("initial vector length {} != {}", u.len(), self.cfg.k_ini)));
        }
        Ok(Self {
            cfg: self.cfg,
            amplitudes: u.kronecker(&self.amplitudes),
            ampliated: true,
            horizon: self.horizon,
        })
    }

    /// Coefficient matrix over `Γ_{t)} ⊗ Γ_{[t}`: entry `(a, b)` is the
    /// amplitude of `|a⟩ ⊗ |b⟩` with `a` indexing slots `< t`.
    pub fn tensor_split(&self, t: usize) -> Result<CMatrix> {
        if self.ampliated {
            return Err(Error::AlreadyAmpliated);
        }
        self.cfg.check_slot(t)?;
        let rows = self.cfg.prefix_dim(t);
        let cols = self.cfg.prefix_dim(self.cfg.n_slots - t);
        // column-major storage makes this a pure reshape
        Ok(CMatrix::from_column_slice(rows, cols, self.amplitudes.as_slice()))
    }

    pub fn tensor_join(cfg: &SliceConfig, coefficients: &CMatrix, t: usize) -> Result<Self> {
        cfg.check_slot(t)?;
        if coefficients.nrows() != cfg.prefix_dim(t) || coefficients.ncols() != cfg.prefix_dim(cfg.n_slots - t) {
            return Err(Error::Shape(format!(
                "coefficient matrix {}x{} does not match split at {}",
                coefficients.nrows(),
                coefficients.ncols(),
                t
            )));
        }
        let amplitudes = CVector::from_column_slice(coefficients.as_slice());
        Self::from_amplitudes(cfg, amplitudes, false)
    }
}

fn infer_vector_horizon(cfg: &SliceConfig, amps: &CVector, ampliated: bool) -> usize {
    let fock = cfg.fock_dim();
    let k = cfg.ini_dim(ampliated);
    let scale = amps.norm().max(1.0);
    let mut highest = 0usize;
    for u in 0..k {
        for x in 0..fock {
            if amps[u * fock + x].norm() > 1e-12 * scale {
                highest = highest.max(x + 1);
            }
        }
    }
    // smallest h with every significant index below slot_dim^h
    (0..=cfg.n_slots)
        .find(|&h| cfg.prefix_dim(h) >= highest)
        .unwrap_or(cfg.n_slots)
}

/// `ε(f)` on the truncated grid. Slot `j` carries `Σ_{|α|≤cap} z^α/√α! |α⟩`
/// with `z = f_j √dt`.
pub fn exponential_vector(cfg: &SliceConfig, f: &StepFunction) -> Result<FockVector> {
    if f.values.len() != cfg.n_slots || f.values.iter().any(|v| v.len() != cfg.d) {
        return Err(Error::Shape("step function does not match grid".into()));
    }
    let scale = cfg.dt.sqrt();
    let factors: Vec<CVector> = f
        .values
        .iter()
        .map(|v| {
            let z: Vec<C64> = v.iter().map(|c| c * scale).collect();
            slot_exponential(cfg.d, cfg.cap, &z)
        })
        .collect();
    Ok(FockVector {
        cfg: *cfg,
        amplitudes: slot_product(&factors),
        ampliated: false,
        horizon: f.support_horizon(),
    })
}

/// Structure of an operator beyond its support horizon: the identity, or a
/// fixed vacuum-preserving orthogonal projection repeated on every slot.
///
/// `X = X_h ⊗ tail^{⊗(n_slots − h)}`. The projection tail is what lets
/// `p`-adapted operators `V_{t)} ⊗ P_{[t}` pass through the CCR flow on a
/// finite grid.
#[derive(Debug, Clone)]
pub enum Tail {
    Identity,
    Projection(Arc<CMatrix>),
}

impl Tail {
    pub fn slot_matrix(&self, slot_dim: usize) -> CMatrix {
        match self {
            Tail::Identity => identity(slot_dim),
            Tail::Projection(g) => (**g).clone(),
        }
    }

    pub fn same_as(&self, other: &Tail) -> bool {
        match (self, other) {
            (Tail::Identity, Tail::Identity) => true,
            (Tail::Projection(a), Tail::Projection(b)) => Arc::ptr_eq(a, b) || max_abs(&(&**a - &**b)) <= 1e-12,
            _ => false,
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Tail::Identity)
    }
}

impl PartialEq for Tail {
    fn eq(&self, other: &Self) -> bool {
        self.same_as(other)
    }
}

/// Dense operator on `Γ` (or `𝔥 ⊗ Γ` when ampliated) with its horizon structure.
#[derive(Debug, Clone)]
pub struct FockOperator {
    cfg: SliceConfig,
    matrix: CMatrix,
    ampliated: bool,
    horizon: usize,
    tail: Tail,
}

impl PartialEq for FockOperator {
    fn eq(&self, other: &Self) -> bool {
        self.cfg == other.cfg && self.ampliated == other.ampliated && self.matrix == other.matrix
    }
}

/// Builds the full matrix of `local ⊗ tail^{⊗(n − h)}` with the initial
/// factor (if any) outermost.
fn embed(cfg: &SliceConfig, local: &CMatrix, h: usize, tail: &Tail, k: usize) -> CMatrix {
    let fock = cfg.fock_dim();
    let dh = cfg.prefix_dim(h);
    let rest = cfg.n_slots - h;
    let mut full = CMatrix::zeros(k * fock, k * fock);
    let tail_entries: Vec<(usize, usize, C64)> = match tail {
        Tail::Identity => (0..cfg.prefix_dim(rest)).map(|i| (i, i, ONE)).collect(),
        Tail::Projection(g) => {
            let mut t = CMatrix::from_element(1, 1, ONE);
            for _ in 0..rest {
                t = kron(g, &t);
            }
            let mut entries = Vec::new();
            for j in 0..t.ncols() {
                for i in 0..t.nrows() {
                    if t[(i, j)] != ZERO {
                        entries.push((i, j, t[(i, j)]));
                    }
                }
            }
            entries
        }
    };
    for &(hi, hj, w) in &tail_entries {
        for v in 0..k {
            for b in 0..dh {
                let col = v * fock + b + dh * hj;
                let lcol = v * dh + b;
                for u in 0..k {
                    for a in 0..dh {
                        let z = local[(u * dh + a, lcol)];
                        if z != ZERO {
                            full[(u * fock + a + dh * hi, col)] = z * w;
                        }
                    }
                }
            }
        }
    }
    full
}

fn extract_local(cfg: &SliceConfig, full: &CMatrix, h: usize, k: usize) -> CMatrix {
    let fock = cfg.fock_dim();
    let dh = cfg.prefix_dim(h);
    CMatrix::from_fn(k * dh, k * dh, |r, c| {
        let (u, a) = (r / dh, r % dh);
        let (v, b) = (c / dh, c % dh);
        full[(u * fock + a, v * fock + b)]
    })
}

impl FockOperator {
    pub fn identity(cfg: &SliceConfig) -> Self {
        Self::identity_on(cfg, false)
    }

    pub fn identity_on(cfg: &SliceConfig, ampliated: bool) -> Self {
        let n = cfg.ini_dim(ampliated) * cfg.fock_dim();
        Self {
            cfg: *cfg,
            matrix: identity(n),
            ampliated,
            horizon: 0,
            tail: Tail::Identity,
        }
    }

    pub fn zero(cfg: &SliceConfig) -> Self {
        Self::zero_on(cfg, false)
    }

    pub fn zero_on(cfg: &SliceConfig, ampliated: bool) -> Self {
        let n = cfg.ini_dim(ampliated) * cfg.fock_dim();
        Self {
            cfg: *cfg,
            matrix: CMatrix::zeros(n, n),
            ampliated,
            horizon: 0,
            tail: Tail::Identity,
        }
    }

    /// `local ⊗ tail^{⊗(n − h)}`; `local` acts on (`𝔥 ⊗`) the first `h` slots.
    pub fn from_local(cfg: &SliceConfig, local: &CMatrix, horizon: usize, tail: Tail, ampliated: bool) -> Result<Self> {
        cfg.check_slot(horizon)?;
        let k = cfg.ini_dim(ampliated);
        let n = k * cfg.prefix_dim(horizon);
        if local.nrows() != n || local.ncols() != n {
            return Err(Error::Shape(format!(
                "local matrix {}x{} does not match horizon {} ({}x{})",
                local.nrows(),
                local.ncols(),
                horizon,
                n,
                n
            )));
        }
        let tail = if horizon == cfg.n_slots { Tail::Identity } else { tail };
        Ok(Self {
            cfg: *cfg,
            matrix: embed(cfg, local, horizon, &tail, k),
            ampliated,
            horizon,
            tail,
        })
    }

    /// Wraps a full matrix; the horizon is the smallest `h` for which the
    /// matrix acts as the identity on slots `≥ h`.
    pub fn from_matrix(cfg: &SliceConfig, matrix: CMatrix, ampliated: bool) -> Result<Self> {
        let n = cfg.ini_dim(ampliated) * cfg.fock_dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::Shape(format!("matrix {}x{} is not {}x{}", matrix.nrows(), matrix.ncols(), n, n)));
        }
        let mut op = Self {
            cfg: *cfg,
            matrix,
            ampliated,
            horizon: cfg.n_slots,
            tail: Tail::Identity,
        };
        op.horizon = op.infer_horizon(&Tail::Identity, 1e-10);
        Ok(op)
    }

    /// Re-labels the structure after the caller has established it.
    pub(crate) fn with_structure(mut self, horizon: usize, tail: Tail) -> Self {
        self.horizon = horizon.min(self.cfg.n_slots);
        self.tail = if self.horizon == self.cfg.n_slots { Tail::Identity } else { tail };
        self
    }

    /// Smallest horizon at which the matrix has the given tail structure.
    pub fn infer_horizon(&self, tail: &Tail, tol: f64) -> usize {
        let k = self.ini_dim();
        (0..=self.cfg.n_slots)
            .find(|&h| {
                let local = extract_local(&self.cfg, &self.matrix, h, k);
                max_abs(&(embed(&self.cfg, &local, h, tail, k) - &self.matrix)) <= tol
            })
            .unwrap_or(self.cfg.n_slots)
    }

    /// `‖X − X_h ⊗ tail‖_max` for a claimed horizon `h` and tail.
    pub fn structure_defect(&self, horizon: usize, tail: &Tail) -> f64 {
        let k = self.ini_dim();
        let local = extract_local(&self.cfg, &self.matrix, horizon, k);
        max_abs(&(embed(&self.cfg, &local, horizon, tail, k) - &self.matrix))
    }

    pub fn cfg(&self) -> &SliceConfig {
        &self.cfg
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn is_ampliated(&self) -> bool {
        self.ampliated
    }

    pub fn support_horizon(&self) -> usize {
        self.horizon
    }

    pub fn tail(&self) -> &Tail {
        &self.tail
    }

    fn ini_dim(&self) -> usize {
        self.cfg.ini_dim(self.ampliated)
    }

    /// The factor acting on (`𝔥 ⊗`) slots `< horizon`.
    pub fn local(&self) -> CMatrix {
        extract_local(&self.cfg, &self.matrix, self.horizon, self.ini_dim())
    }

    /// The factor acting on (`𝔥 ⊗`) slots `< h`, for any `h ≥ horizon`.
    pub fn local_at(&self, h: usize) -> Result<CMatrix> {
        if h < self.horizon || h > self.cfg.n_slots {
            return Err(Error::Horizon {
                context: "local_at",
                allowed: h,
                actual: self.horizon,
            });
        }
        Ok(extract_local(&self.cfg, &self.matrix, h, self.ini_dim()))
    }

    pub fn adjoint(&self) -> Self {
        Self {
            cfg: self.cfg,
            matrix: self.matrix.adjoint(),
            ampliated: self.ampliated,
            horizon: self.horizon,
            tail: self.tail.clone(),
        }
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            matrix: self.matrix.map(|z| z * c),
            ..self.clone()
        }
    }

    /// `I_𝔥 ⊗ X`.
    pub fn ampliate(&self) -> Result<Self> {
        if self.ampliated {
            return Err(Error::AlreadyAmpliated);
        }
        Ok(Self {
            cfg: self.cfg,
            matrix: kron(&identity(self.cfg.k_ini), &self.matrix),
            ampliated: true,
            horizon: self.horizon,
            tail: self.tail.clone(),
        })
    }

    /// `a ⊗ I` on `𝔥 ⊗ Γ`.
    pub fn initial(cfg: &SliceConfig, a: &CMatrix) -> Result<Self> {
        if a.nrows() != cfg.k_ini || a.ncols() != cfg.k_ini {
            return Err(Error::Shape(format!("initial operator must be {0}x{0}", cfg.k_ini)));
        }
        Ok(Self {
            cfg: *cfg,
            matrix: kron(a, &identity(cfg.fock_dim())),
            ampliated: true,
            horizon: 0,
            tail: Tail::Identity,
        })
    }

    /// The Fock-space operator `x, y ↦ ⟨u ⊗ x, Z u' ⊗ y⟩`.
    pub fn restrict_initial(&self, u: &CVector, u_prime: &CVector) -> Result<Self> {
        if !self.ampliated {
            return Err(Error::Shape("restrict_initial needs an ampliated operator".into()));
        }
        let k = self.cfg.k_ini;
        if u.len() != k || u_prime.len() != k {
            return Err(Error::Shape(format!("initial vectors must have length {}", k)));
        }
        let f = self.cfg.fock_dim();
        let mut out = CMatrix::zeros(f, f);
        for a in 0..k {
            for b in 0..k {
                let w = u[a].conj() * u_prime[b];
                if w != ZERO {
                    out += self.matrix.view((a * f, b * f), (f, f)) * w;
                }
            }
        }
        Ok(Self {
            cfg: self.cfg,
            matrix: out,
            ampliated: false,
            horizon: self.horizon,
            tail: self.tail.clone(),
        })
    }

    pub fn apply(&self, v: &FockVector) -> Result<FockVector> {
        if v.ampliated != self.ampliated || v.cfg != self.cfg {
            return Err(Error::Shape("operator and vector live on different spaces".into()));
        }
        Ok(FockVector::from_parts(
            &self.cfg,
            &self.matrix * &v.amplitudes,
            self.ampliated,
            self.horizon.max(v.horizon),
        ))
    }

    fn assert_compatible(&self, other: &Self) {
        assert!(
            self.cfg == other.cfg && self.ampliated == other.ampliated,
            "operators live on different spaces"
        );
    }

    fn product_structure(&self, other: &Self) -> (usize, Tail) {
        let h = self.horizon.max(other.horizon);
        match (&self.tail, &other.tail) {
            (Tail::Identity, t) | (t, Tail::Identity) => (h, t.clone()),
            (a, b) if a.same_as(b) => (h, a.clone()),
            _ => (self.cfg.n_slots, Tail::Identity),
        }
    }

    fn sum_structure(&self, other: &Self) -> (usize, Tail) {
        if self.tail.same_as(&other.tail) {
            (self.horizon.max(other.horizon), self.tail.clone())
        } else {
            (self.cfg.n_slots, Tail::Identity)
        }
    }
}

impl Mul for &FockOperator {
    type Output = FockOperator;

    fn mul(self, rhs: &FockOperator) -> FockOperator {
        self.assert_compatible(rhs);
        let (h, tail) = self.product_structure(rhs);
        FockOperator {
            cfg: self.cfg,
            matrix: matmul(&self.matrix, &rhs.matrix),
            ampliated: self.ampliated,
            horizon: h,
            tail: Tail::Identity,
        }
        .with_structure(h, tail)
    }
}

impl Add for &FockOperator {
    type Output = FockOperator;

    fn add(self, rhs: &FockOperator) -> FockOperator {
        self.assert_compatible(rhs);
        let (h, tail) = self.sum_structure(rhs);
        FockOperator {
            cfg: self.cfg,
            matrix: &self.matrix + &rhs.matrix,
            ampliated: self.ampliated,
            horizon: h,
            tail: Tail::Identity,
        }
        .with_structure(h, tail)
    }
}

impl Sub for &FockOperator {
    type Output = FockOperator;

    fn sub(self, rhs: &FockOperator) -> FockOperator {
        self.assert_compatible(rhs);
        let (h, tail) = self.sum_structure(rhs);
        FockOperator {
            cfg: self.cfg,
            matrix: &self.matrix - &rhs.matrix,
            ampliated: self.ampliated,
            horizon: h,
            tail: Tail::Identity,
        }
        .with_structure(h, tail)
    }
}

/// `Σ ops`, or the zero operator for an empty sum.
pub fn sum_operators<'a, I>(cfg: &SliceConfig, ampliated: bool, ops: I) -> FockOperator
where
    I: IntoIterator<Item = &'a FockOperator>,
{
    let mut iter = ops.into_iter();
    match iter.next() {
        None => FockOperator::zero_on(cfg, ampliated),
        Some(first) => iter.fold(first.clone(), |acc, op| &acc + op),
    }
}
