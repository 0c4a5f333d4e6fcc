//! Run configuration, read from a TOML document.
//!
//! ```toml
//! task = "unravel"            # noise | trajectory | unravel | norms | compat | oracle | jc-residual
//!
//! [kernel]
//! family = "ou"               # dirac | ou | modes | tabulated
//! kappa = 1.0
//! gamma = 2.0
//! # modes = [[re_g, im_g, omega, cutoff], ...]     (family = "modes")
//! # dtau = 0.01, values = [[re, im], ...]          (family = "tabulated")
//!
//! [model]
//! kind = "jaynes-cummings"    # jaynes-cummings | dephasing | static
//! omega = 1.0
//! # r = 0.5, kappa = 1.0                           (dephasing)
//! # hamiltonian = [[[re, im], ...], ...]           (static, row-major)
//! # coupling = [[[re, im], ...], ...]              (static, row-major)
//! initial_state = "excited"   # excited | ground | plus | [[re, im], ...]
//!
//! [grid]
//! t_max = 2.0
//! dt = 0.01
//!
//! [ensemble]
//! n_traj = 10000
//! seed = 7
//! mode = "linear"             # linear | normalized-weighted | nonlinear
//! ```
//!
//! Task sections `[trajectory]`, `[norms]`, `[compat]`, `[oracle]` and
//! `[jc_residual]` are described on their types. `[output] dir` names the
//! output directory.

use std::fmt;
use std::path::PathBuf;

use nmqsd_core::dynamics::TrajectoryMode;
use nmqsd_core::ensemble::UnravelMode;
use nmqsd_core::kernels::{CorrelationKernel, Mode, TabulatedKernel, TimeGrid};
use nmqsd_core::linalg::{excited, ground, plus_state};
use nmqsd_core::models::SystemModel;
use nmqsd_core::reference::ModeBath;
use nmqsd_core::{CMatrix, CVector, C64};
use serde::{Deserialize, Serialize};

/// A configuration problem, located by its dotted field path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { path: path.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

impl std::error::Error for ConfigError {}

type Checked<T> = Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Noise,
    Trajectory,
    Unravel,
    Norms,
    Compat,
    Oracle,
    JcResidual,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Noise => "noise",
            Task::Trajectory => "trajectory",
            Task::Unravel => "unravel",
            Task::Norms => "norms",
            Task::Compat => "compat",
            Task::Oracle => "oracle",
            Task::JcResidual => "jc-residual",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: Option<Task>,
    pub kernel: Option<KernelConfig>,
    pub model: Option<ModelConfig>,
    pub grid: Option<GridConfig>,
    pub ensemble: Option<EnsembleConfig>,
    pub trajectory: Option<TrajectoryConfig>,
    pub norms: Option<NormsConfig>,
    pub compat: Option<CompatConfig>,
    pub oracle: Option<OracleConfig>,
    pub jc_residual: Option<JcResidualConfig>,
    pub output: Option<OutputConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    Dirac,
    #[serde(alias = "ornstein-uhlenbeck")]
    Ou,
    Modes,
    Tabulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub family: KernelFamily,
    pub kappa: Option<f64>,
    pub gamma: Option<f64>,
    /// `[re g, im g, ω, Fock cutoff]` per mode.
    pub modes: Option<Vec<[f64; 4]>>,
    pub dtau: Option<f64>,
    pub values: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    JaynesCummings,
    Dephasing,
    Static,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateSpec {
    Named(String),
    Amplitudes(Vec<[f64; 2]>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub omega: Option<f64>,
    pub r: Option<f64>,
    pub kappa: Option<f64>,
    pub hamiltonian: Option<Vec<Vec<[f64; 2]>>>,
    pub coupling: Option<Vec<Vec<[f64; 2]>>>,
    pub initial_state: Option<StateSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub t_max: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleMode {
    Linear,
    NormalizedWeighted,
    Nonlinear,
}

impl From<EnsembleMode> for UnravelMode {
    fn from(m: EnsembleMode) -> Self {
        match m {
            EnsembleMode::Linear => UnravelMode::Linear,
            EnsembleMode::NormalizedWeighted => UnravelMode::NormalizedWeighted,
            EnsembleMode::Nonlinear => UnravelMode::Nonlinear,
        }
    }
}

impl From<EnsembleMode> for TrajectoryMode {
    fn from(m: EnsembleMode) -> Self {
        match m {
            EnsembleMode::Linear => TrajectoryMode::Linear,
            EnsembleMode::NormalizedWeighted => TrajectoryMode::NormalizedLinear,
            EnsembleMode::Nonlinear => TrajectoryMode::Nonlinear,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub n_traj: usize,
    pub seed: u64,
    pub mode: Option<EnsembleMode>,
}

/// `[trajectory]`: integration mode of exported trajectories, and whether to
/// export `A_0^t` for each of them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub mode: Option<EnsembleMode>,
    pub propagators: Option<bool>,
}

/// `[norms]`: conditional martingale test between `s` and `t` on `n_pasts` pasts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormsConfig {
    pub s: f64,
    pub t: f64,
    pub n_pasts: usize,
}

/// `[compat]`: one audit between `s` and `t` with `n_cond` continuations.
/// `re_z_s` pins the real part of the conditioning value, the last history node
/// before `s` (the noise at `s` itself drives the future). `gammas` and `rs`
/// together request a sweep (dephasing with an OU kernel only).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompatConfig {
    pub s: f64,
    pub t: f64,
    pub n_cond: usize,
    pub re_z_s: Option<f64>,
    pub normalization: Option<bool>,
    pub gammas: Option<Vec<f64>>,
    pub rs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    Master,
    FewMode,
}

/// `[oracle]`: master equation of the model, or the exact few-mode
/// simulation of a `modes` kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub kind: OracleKind,
    pub max_dim: Option<usize>,
    pub export_ansatz: Option<bool>,
}

/// `[jc_residual]`: kernel residual at each `u` (default: eight points in
/// `[0, s)`), and optionally conditional moments of `h` and `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JcResidualConfig {
    pub s: f64,
    pub t: f64,
    pub u: Option<Vec<f64>>,
    pub n_cond: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Checked<Self> {
        toml::from_str(text).map_err(|e| ConfigError::new("config", e.message().to_string()))
    }

    /// Canonical TOML rendering, the input of the config hash.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always serializable")
    }

    pub fn task(&self) -> Checked<Task> {
        self.task.ok_or_else(|| ConfigError::new("task", "no task given"))
    }

    /// Checks that every block the task needs is present and valid.
    pub fn validate(&self) -> Checked<()> {
        let task = self.task()?;
        self.time_grid()?;
        self.kernel()?;
        match task {
            Task::Noise => {
                self.ensemble(1)?;
            }
            Task::Trajectory => {
                self.model()?;
                self.initial_state()?;
                self.ensemble(1)?;
            }
            Task::Unravel => {
                self.model()?;
                self.initial_state()?;
                self.ensemble(2)?;
            }
            Task::Norms => {
                self.model()?;
                self.initial_state()?;
                self.ensemble(2)?;
                self.norms()?;
            }
            Task::Compat => {
                self.model()?;
                self.ensemble(0)?;
                self.compat()?;
            }
            Task::Oracle => {
                self.model()?;
                self.initial_state()?;
                let oracle = self.oracle()?;
                if oracle.kind == OracleKind::FewMode {
                    self.bath()?;
                }
            }
            Task::JcResidual => {
                let model = self.model()?;
                if !matches!(model.ansatz(), nmqsd_core::models::Ansatz::JaynesCummings { .. }) {
                    return Err(ConfigError::new("model.kind", "jc-residual needs the jaynes-cummings model"));
                }
                let jc = self.jc_residual()?;
                if jc.n_cond.is_some() {
                    self.ensemble(0)?;
                }
            }
        }
        Ok(())
    }

    pub fn time_grid(&self) -> Checked<TimeGrid> {
        let g = self.grid.ok_or_else(|| ConfigError::new("grid", "section required"))?;
        if !(g.dt.is_finite() && g.dt > 0.0) {
            return Err(ConfigError::new("grid.dt", "must be positive"));
        }
        if !(g.t_max.is_finite() && g.t_max >= g.dt) {
            return Err(ConfigError::new("grid.t_max", "must be at least grid.dt"));
        }
        TimeGrid::spanning(g.t_max, g.dt).map_err(|e| ConfigError::new("grid", e.to_string()))
    }

    pub fn kernel(&self) -> Checked<CorrelationKernel> {
        let k = self.kernel.as_ref().ok_or_else(|| ConfigError::new("kernel", "section required"))?;
        let positive = |name: &str, v: Option<f64>| -> Checked<f64> {
            let path = format!("kernel.{name}");
            let v = v.ok_or_else(|| ConfigError::new(path.clone(), "required for this family"))?;
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError::new(path, "must be positive"));
            }
            Ok(v)
        };
        Ok(match k.family {
            KernelFamily::Dirac => CorrelationKernel::dirac(positive("kappa", k.kappa)?),
            KernelFamily::Ou => CorrelationKernel::ornstein_uhlenbeck(positive("kappa", k.kappa)?, positive("gamma", k.gamma)?),
            KernelFamily::Modes => {
                let modes = k.modes.as_ref().ok_or_else(|| ConfigError::new("kernel.modes", "required for this family"))?;
                if modes.is_empty() {
                    return Err(ConfigError::new("kernel.modes", "needs at least one mode"));
                }
                for (i, m) in modes.iter().enumerate() {
                    if m.iter().any(|v| !v.is_finite()) {
                        return Err(ConfigError::new(format!("kernel.modes[{i}]"), "entries must be finite"));
                    }
                }
                CorrelationKernel::ModeSum(
                    modes.iter().map(|m| Mode { coupling: C64::new(m[0], m[1]), frequency: m[2] }).collect(),
                )
            }
            KernelFamily::Tabulated => {
                let dtau = positive("dtau", k.dtau)?;
                let values = k.values.as_ref().ok_or_else(|| ConfigError::new("kernel.values", "required for this family"))?;
                let table = TabulatedKernel::new(dtau, values.iter().map(|v| C64::new(v[0], v[1])).collect())
                    .map_err(|e| ConfigError::new("kernel.values", e.to_string()))?;
                CorrelationKernel::Tabulated(table)
            }
        })
    }

    /// Truncated bath of a `modes` kernel; the fourth entry of each mode is its cutoff.
    pub fn bath(&self) -> Checked<ModeBath> {
        let k = self.kernel.as_ref().ok_or_else(|| ConfigError::new("kernel", "section required"))?;
        if k.family != KernelFamily::Modes {
            return Err(ConfigError::new("kernel.family", "the few-mode oracle needs family = \"modes\""));
        }
        let CorrelationKernel::ModeSum(modes) = self.kernel()? else { unreachable!() };
        let raw = k.modes.as_deref().unwrap_or_default();
        let mut cutoffs = Vec::with_capacity(raw.len());
        for (i, m) in raw.iter().enumerate() {
            if m[3].fract() != 0.0 || m[3] < 2.0 {
                return Err(ConfigError::new(format!("kernel.modes[{i}]"), "Fock cutoff must be an integer >= 2"));
            }
            cutoffs.push(m[3] as usize);
        }
        ModeBath::new(modes, cutoffs).map_err(|e| ConfigError::new("kernel.modes", e.to_string()))
    }

    pub fn model(&self) -> Checked<SystemModel> {
        let m = self.model.as_ref().ok_or_else(|| ConfigError::new("model", "section required"))?;
        let kernel = self.kernel()?;
        let real = |name: &str, v: Option<f64>| -> Checked<f64> {
            let path = format!("model.{name}");
            let v = v.ok_or_else(|| ConfigError::new(path.clone(), "required for this model kind"))?;
            if !v.is_finite() {
                return Err(ConfigError::new(path, "must be finite"));
            }
            Ok(v)
        };
        let built = match m.kind {
            ModelKind::JaynesCummings => SystemModel::jaynes_cummings(real("omega", m.omega)?, kernel),
            ModelKind::Dephasing => {
                let kappa = real("kappa", m.kappa)?;
                if kappa <= 0.0 {
                    return Err(ConfigError::new("model.kappa", "must be positive"));
                }
                SystemModel::dephasing(real("omega", m.omega)?, real("r", m.r)?, kappa, kernel)
            }
            ModelKind::Static => {
                let h = matrix("model.hamiltonian", m.hamiltonian.as_ref())?;
                let l = matrix("model.coupling", m.coupling.as_ref())?;
                SystemModel::static_coupling(h, l, kernel)
            }
        };
        built.map_err(|e| ConfigError::new("model", e.to_string()))
    }

    pub fn initial_state(&self) -> Checked<CVector> {
        let m = self.model.as_ref().ok_or_else(|| ConfigError::new("model", "section required"))?;
        let dim = self.model()?.dim();
        let path = "model.initial_state";
        let psi = match m.initial_state.as_ref().ok_or_else(|| ConfigError::new(path, "required"))? {
            StateSpec::Named(name) if dim == 2 => match name.as_str() {
                "excited" => excited(),
                "ground" => ground(),
                "plus" => plus_state(),
                _ => return Err(ConfigError::new(path, "expected excited, ground, plus or a list of amplitudes")),
            },
            StateSpec::Named(_) => return Err(ConfigError::new(path, "named states exist only for two-level systems")),
            StateSpec::Amplitudes(a) => CVector::from_iterator(a.len(), a.iter().map(|v| C64::new(v[0], v[1]))),
        };
        if psi.len() != dim {
            return Err(ConfigError::new(path, format!("expected {dim} amplitudes")));
        }
        if (psi.norm() - 1.0).abs() > 1e-8 {
            return Err(ConfigError::new(path, "state must be normalized"));
        }
        Ok(psi)
    }

    /// The ensemble block, requiring at least `min_traj` trajectories.
    pub fn ensemble(&self, min_traj: usize) -> Checked<EnsembleConfig> {
        let e = self.ensemble.ok_or_else(|| ConfigError::new("ensemble", "section required"))?;
        if e.n_traj < min_traj {
            return Err(ConfigError::new("ensemble.n_traj", format!("must be at least {min_traj}")));
        }
        Ok(e)
    }

    pub fn norms(&self) -> Checked<NormsConfig> {
        let n = self.norms.ok_or_else(|| ConfigError::new("norms", "section required"))?;
        self.check_pair("norms", n.s, n.t)?;
        Ok(n)
    }

    pub fn compat(&self) -> Checked<&CompatConfig> {
        let c = self.compat.as_ref().ok_or_else(|| ConfigError::new("compat", "section required"))?;
        if c.s <= 0.0 {
            return Err(ConfigError::new("compat.s", "must be positive"));
        }
        self.check_pair("compat", c.s, c.t)?;
        if c.n_cond < 2 {
            return Err(ConfigError::new("compat.n_cond", "must be at least 2"));
        }
        if c.gammas.is_some() != c.rs.is_some() {
            return Err(ConfigError::new("compat.gammas", "a sweep needs both gammas and rs"));
        }
        if c.gammas.is_some() {
            let ok = matches!(self.model.as_ref().map(|m| m.kind), Some(ModelKind::Dephasing))
                && matches!(self.kernel.as_ref().map(|k| k.family), Some(KernelFamily::Ou));
            if !ok {
                return Err(ConfigError::new("compat.gammas", "sweeps need the dephasing model with an ou kernel"));
            }
            if c.gammas.iter().flatten().any(|g| !(g.is_finite() && *g > 0.0)) {
                return Err(ConfigError::new("compat.gammas", "entries must be positive"));
            }
        }
        Ok(c)
    }

    pub fn oracle(&self) -> Checked<OracleConfig> {
        let o = self.oracle.ok_or_else(|| ConfigError::new("oracle", "section required"))?;
        if o.kind == OracleKind::Master {
            let kind = self.model.as_ref().map(|m| m.kind);
            if kind == Some(ModelKind::Static) {
                return Err(ConfigError::new("oracle.kind", "master equations exist for jaynes-cummings and dephasing only"));
            }
        }
        Ok(o)
    }

    pub fn jc_residual(&self) -> Checked<&JcResidualConfig> {
        let j = self.jc_residual.as_ref().ok_or_else(|| ConfigError::new("jc_residual", "section required"))?;
        self.check_pair("jc_residual", j.s, j.t)?;
        if let Some(us) = &j.u {
            if us.iter().any(|u| !(0.0..j.s).contains(u)) {
                return Err(ConfigError::new("jc_residual.u", "entries must lie in [0, s)"));
            }
        }
        if j.n_cond.is_some_and(|n| n < 2) {
            return Err(ConfigError::new("jc_residual.n_cond", "must be at least 2"));
        }
        Ok(j)
    }

    fn check_pair(&self, section: &str, s: f64, t: f64) -> Checked<()> {
        let grid = self.time_grid()?;
        let node = |name: &str, v: f64| {
            grid.node(v).map_err(|_| ConfigError::new(format!("{section}.{name}"), "must be a node of the grid"))
        };
        if node("s", s)? >= node("t", t)? {
            return Err(ConfigError::new(format!("{section}.t"), "must be later than s"));
        }
        Ok(())
    }
}

fn matrix(path: &str, rows: Option<&Vec<Vec<[f64; 2]>>>) -> Checked<CMatrix> {
    let rows = rows.ok_or_else(|| ConfigError::new(path, "required for the static model"))?;
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(ConfigError::new(path, "must be a non-empty square matrix"));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
}
