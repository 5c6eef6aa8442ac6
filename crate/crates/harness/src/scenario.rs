//! Scenario files and the seeded instances they expand into.

use std::path::{Path, PathBuf};

use qstop_core::linalg::from_pairs;
use qstop_core::random::{random_atom_times, random_hermitian, random_stop_time, random_unitary, unitary_from_generator};
use qstop_core::stoptime::StopTimeRecord;
use qstop_core::{Adaptedness, CMatrix, Cocycle, DiscreteStopTime, OneParticleProjection, SliceConfig};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checks::CheckId;
use crate::error::HarnessError;

/// Attempts at drawing a random stop time with the requested number of atoms.
const MAX_DRAWS: usize = 256;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub seed: u64,
    #[serde(default = "one")]
    pub instances: usize,
    pub tol: Option<f64>,
    pub grid: GridSpec,
    #[serde(default)]
    pub cocycle: CocycleSpec,
    pub stop_times: StopTimePair,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
    #[serde(default)]
    pub converge: ConvergeSpec,
    #[serde(default)]
    pub sweep: SweepSpec,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n_slots: usize,
    pub dt: f64,
    pub d: usize,
    pub cap: usize,
    pub k_ini: usize,
    pub max_dim: Option<usize>,
}

/// `"identity"`, `"vacuum"`, `"alternate"` (even instances identity-adapted,
/// odd ones vacuum-adapted) or an explicit `d × d` projection.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProjectionSpec {
    Named(String),
    Explicit(Vec<Vec<[f64; 2]>>),
}

/// `"random"` (Haar unitary), `"generator"` (`exp(−i dt H)` for a random
/// Hermitian `H`) or an explicit one-step unitary on `𝔥 ⊗ slot`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StepSpec {
    Named(String),
    Explicit(Vec<Vec<[f64; 2]>>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CocycleSpec {
    #[serde(default = "identity_p")]
    pub p: ProjectionSpec,
    // Generator-driven steps keep W close to I as dt shrinks, which is what
    // makes refinement experiments comparable across grids.
    #[serde(default = "generator_w")]
    pub w: StepSpec,
}

fn identity_p() -> ProjectionSpec {
    ProjectionSpec::Named("identity".into())
}

fn generator_w() -> StepSpec {
    StepSpec::Named("generator".into())
}

impl Default for CocycleSpec {
    fn default() -> Self {
        Self {
            p: identity_p(),
            w: generator_w(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StopTimeSpec {
    Deterministic {
        t: usize,
    },
    FirstArrival {
        m: usize,
    },
    Random {
        max_atom: usize,
        #[serde(default = "two")]
        atoms: usize,
    },
    Explicit(StopTimeRecord),
}

fn two() -> usize {
    2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopTimePair {
    #[serde(rename = "S")]
    pub s: StopTimeSpec,
    #[serde(rename = "T")]
    pub t: StopTimeSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    pub name: String,
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeSpec {
    #[serde(default = "three")]
    pub levels: usize,
    #[serde(default = "four")]
    pub probes: usize,
}

impl Default for ConvergeSpec {
    fn default() -> Self {
        Self { levels: 3, probes: 4 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default = "default_caps")]
    pub caps: Vec<usize>,
    #[serde(default = "four")]
    pub pairs: usize,
    /// Upper bound on `‖f‖` and `‖g‖`.
    #[serde(default = "unit")]
    pub norm: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            caps: default_caps(),
            pairs: 4,
            norm: 1.0,
        }
    }
}

fn three() -> usize {
    3
}

fn four() -> usize {
    4
}

fn unit() -> f64 {
    1.0
}

fn default_caps() -> Vec<usize> {
    vec![0, 1, 2, 3]
}

/// A parsed and validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub origin: PathBuf,
    pub cfg: SliceConfig,
    pub seed: u64,
    pub instances: usize,
    pub tol: f64,
    pub checks: Vec<(CheckId, f64)>,
    pub file: ScenarioFile,
    p_mode: PMode,
}

#[derive(Debug, Clone)]
enum PMode {
    Fixed(OneParticleProjection),
    Alternate,
}

fn invalid(location: &str, message: impl Into<String>) -> HarnessError {
    HarnessError::Invalid {
        location: location.to_string(),
        message: message.into(),
    }
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self, HarnessError> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| HarnessError::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_file(file, origin)
    }

    pub fn from_file(file: ScenarioFile, origin: &Path) -> Result<Self, HarnessError> {
        let g = &file.grid;
        let mut cfg = SliceConfig::new(g.n_slots, g.dt, g.d, g.cap, g.k_ini).map_err(|e| invalid("grid", e.to_string()))?;
        if let Some(limit) = g.max_dim {
            cfg = cfg.with_max_dim(limit).map_err(|e| invalid("grid.max_dim", e.to_string()))?;
        }
        if file.instances == 0 {
            return Err(invalid("instances", "at least one instance is required"));
        }
        let tol = file.tol.unwrap_or(qstop_core::TOL);
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(invalid("tol", format!("tolerance must be positive, got {tol}")));
        }
        let p_mode = match &file.cocycle.p {
            ProjectionSpec::Named(name) => match name.as_str() {
                "identity" => PMode::Fixed(OneParticleProjection::identity(cfg.d)),
                "vacuum" => PMode::Fixed(OneParticleProjection::zero(cfg.d)),
                "alternate" => PMode::Alternate,
                other => return Err(invalid("cocycle.p", format!("unknown projection {other:?}"))),
            },
            ProjectionSpec::Explicit(rows) => {
                let m = from_pairs(rows).ok_or_else(|| invalid("cocycle.p", "ragged matrix"))?;
                if m.nrows() != cfg.d || m.ncols() != cfg.d {
                    return Err(invalid("cocycle.p", format!("expected a {0}x{0} matrix", cfg.d)));
                }
                PMode::Fixed(OneParticleProjection::new(m).map_err(|e| invalid("cocycle.p", e.to_string()))?)
            }
        };
        if matches!(p_mode, PMode::Alternate) && file.instances < 2 {
            return Err(invalid("instances", "p = \"alternate\" needs at least two instances"));
        }
        match &file.cocycle.w {
            StepSpec::Named(name) if name != "random" && name != "generator" => {
                return Err(invalid("cocycle.w", format!("unknown step unitary {name:?}")));
            }
            _ => {}
        }
        let mut scenario = Self {
            name: file.name.clone(),
            origin: origin.to_path_buf(),
            cfg,
            seed: file.seed,
            instances: file.instances,
            tol,
            checks: Vec::new(),
            file,
            p_mode,
        };
        scenario.checks = scenario.resolve_checks()?;
        if let StepSpec::Explicit(_) = &scenario.file.cocycle.w {
            let w = scenario.step_unitary(&mut ChaCha8Rng::seed_from_u64(0))?;
            Cocycle::build(&scenario.cfg, scenario.projection_for(0), w).map_err(|e| invalid("cocycle.w", e.to_string()))?;
        }
        // Fail early on stop times that cannot be built at all.
        scenario.stop_time(&scenario.file.stop_times.s, "stop_times.S", &mut ChaCha8Rng::seed_from_u64(0))?;
        scenario.stop_time(&scenario.file.stop_times.t, "stop_times.T", &mut ChaCha8Rng::seed_from_u64(0))?;
        Ok(scenario)
    }

    fn adaptedness_modes(&self) -> Vec<Adaptedness> {
        match &self.p_mode {
            PMode::Alternate => vec![Adaptedness::Identity, Adaptedness::Vacuum],
            PMode::Fixed(p) if p.is_identity() => vec![Adaptedness::Identity],
            PMode::Fixed(p) if p.is_zero() => vec![Adaptedness::Vacuum],
            PMode::Fixed(_) => vec![Adaptedness::General],
        }
    }

    fn resolve_checks(&self) -> Result<Vec<(CheckId, f64)>, HarnessError> {
        let modes = self.adaptedness_modes();
        let usable = |c: CheckId| modes.iter().any(|m| c.applies(*m));
        if self.file.checks.is_empty() {
            return Ok(CheckId::ALL
                .iter()
                .filter(|c| usable(**c))
                .map(|c| (*c, c.default_tol().unwrap_or(self.tol)))
                .collect());
        }
        let mut out: Vec<(CheckId, f64)> = Vec::new();
        for (i, spec) in self.file.checks.iter().enumerate() {
            let location = format!("checks[{i}]");
            let id = CheckId::from_name(&spec.name).ok_or_else(|| invalid(&location, format!("unknown check {:?}", spec.name)))?;
            if out.iter().any(|(c, _)| *c == id) {
                return Err(invalid(&location, format!("check {:?} listed twice", spec.name)));
            }
            if !usable(id) {
                return Err(invalid(&location, format!("check {:?} does not apply to this cocycle", spec.name)));
            }
            let tol = spec.tol.or(id.default_tol()).unwrap_or(self.tol);
            out.push((id, tol));
        }
        Ok(out)
    }

    /// Replaces the scenario seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.file.seed = seed;
        self
    }

    /// Replaces the scenario-wide tolerance; checks with their own tolerance keep it.
    pub fn with_tol(mut self, tol: f64) -> Result<Self, HarnessError> {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(invalid("--tol", format!("tolerance must be positive, got {tol}")));
        }
        self.tol = tol;
        self.file.tol = Some(tol);
        self.checks = self.resolve_checks()?;
        Ok(self)
    }

    /// Replaces the check list; each check gets its default tolerance.
    pub fn with_checks(mut self, names: &[&str]) -> Result<Self, HarnessError> {
        self.file.checks = names
            .iter()
            .map(|n| CheckSpec {
                name: n.to_string(),
                tol: None,
            })
            .collect();
        self.checks = self.resolve_checks()?;
        Ok(self)
    }

    /// Directory the report files go to when no output directory is given.
    pub fn default_out_dir(&self) -> PathBuf {
        self.origin.parent().map(Path::to_path_buf).unwrap_or_default()
    }

    /// Per-instance seeds, drawn in order from the scenario seed.
    pub fn instance_seeds(&self) -> Vec<u64> {
        let mut base = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.instances).map(|_| base.next_u64()).collect()
    }

    pub fn projection_for(&self, index: usize) -> OneParticleProjection {
        match &self.p_mode {
            PMode::Fixed(p) => p.clone(),
            PMode::Alternate if index.is_multiple_of(2) => OneParticleProjection::identity(self.cfg.d),
            PMode::Alternate => OneParticleProjection::zero(self.cfg.d),
        }
    }

    /// Builds instance `index`; all randomness comes from `seed`.
    pub fn instance(&self, index: usize, seed: u64) -> Result<Instance, HarnessError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = self.step_unitary(&mut rng)?;
        let cocycle = Cocycle::build(&self.cfg, self.projection_for(index), w).map_err(|e| invalid("cocycle", e.to_string()))?;
        let s = self.stop_time(&self.file.stop_times.s, "stop_times.S", &mut rng)?;
        let t = self.stop_time(&self.file.stop_times.t, "stop_times.T", &mut rng)?;
        Ok(Instance {
            index,
            seed,
            cocycle,
            s,
            t,
        })
    }

    pub fn step_unitary(&self, rng: &mut ChaCha8Rng) -> Result<CMatrix, HarnessError> {
        let n = self.cfg.k_ini * self.cfg.slot_dim();
        match &self.file.cocycle.w {
            StepSpec::Named(name) if name == "random" => Ok(random_unitary(n, rng)),
            StepSpec::Named(_) => {
                unitary_from_generator(&random_hermitian(n, rng), self.cfg.dt).map_err(|e| invalid("cocycle.w", e.to_string()))
            }
            StepSpec::Explicit(rows) => {
                let m = from_pairs(rows).ok_or_else(|| invalid("cocycle.w", "ragged matrix"))?;
                if m.nrows() != n || m.ncols() != n {
                    return Err(invalid("cocycle.w", format!("expected a {n}x{n} matrix")));
                }
                Ok(m)
            }
        }
    }

    pub fn stop_time(&self, spec: &StopTimeSpec, location: &str, rng: &mut ChaCha8Rng) -> Result<DiscreteStopTime, HarnessError> {
        let cfg = &self.cfg;
        let wrap = |e: qstop_core::Error| invalid(location, e.to_string());
        match spec {
            StopTimeSpec::Deterministic { t } => DiscreteStopTime::deterministic(cfg, *t).map_err(wrap),
            StopTimeSpec::FirstArrival { m } => DiscreteStopTime::first_arrival(cfg, *m).map_err(wrap),
            StopTimeSpec::Explicit(record) => DiscreteStopTime::from_record(cfg, record).map_err(wrap),
            StopTimeSpec::Random { max_atom, atoms } => {
                if *max_atom == 0 || *max_atom > cfg.n_slots {
                    return Err(invalid(location, format!("max_atom must lie in 1..={}", cfg.n_slots)));
                }
                if *atoms == 0 || *atoms > *max_atom {
                    return Err(invalid(location, format!("cannot place {atoms} atoms in 1..={max_atom}")));
                }
                for _ in 0..MAX_DRAWS {
                    let times = random_atom_times(*max_atom, *atoms, rng);
                    let s = random_stop_time(cfg, &times, rng).map_err(wrap)?;
                    if s.atoms().len() == *atoms {
                        return Ok(s);
                    }
                }
                Err(invalid(
                    location,
                    format!("no stop time with {atoms} atoms found in {MAX_DRAWS} draws; the grid is too small"),
                ))
            }
        }
    }
}

/// One seeded `(V, S, T)` triple.
#[derive(Debug, Clone)]
pub struct Instance {
    pub index: usize,
    pub seed: u64,
    pub cocycle: Cocycle,
    pub s: DiscreteStopTime,
    pub t: DiscreteStopTime,
}

impl Instance {
    /// Independent stream for a check's own random probes.
    pub fn probe_rng(&self, salt: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(salt);
        rng
    }
}
