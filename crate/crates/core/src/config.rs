//! Run configuration (TOML with sections `[flow]`, `[polymer]`, `[grids]`,
//! `[scenario]`, `[output]`), command-line overrides, and the
//! dimensional-to-dimensionless conversion.

use crate::orientation::Closure;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("override `{0}` must look like section.key=value")]
    Override(String),
    #[error("{name} = {value} must be positive")]
    NonPositive { name: &'static str, value: f64 },
    #[error("viscosity ratio omega = {0} lies outside (0, 1)")]
    Omega(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowSection {
    pub reynolds: f64,
    pub omega: f64,
    /// Period of the torus.
    pub length: f64,
}

impl Default for FlowSection {
    fn default() -> Self {
        Self { reynolds: 1.0, omega: 0.5, length: 2.0 * std::f64::consts::PI }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolymerSection {
    pub weissenberg: f64,
    /// Decay rate `μ` of the memory envelope `e^{-2 We μ T}`.
    pub decay_rate: f64,
    /// Determinant floor `γ` of the initial deformation.
    pub gamma: f64,
    pub closure: Closure,
    pub quadrature_nodes: usize,
    /// Odd truncation order of the IA memory series.
    pub p_max: usize,
}

impl Default for PolymerSection {
    fn default() -> Self {
        Self { weissenberg: 1.0, decay_rate: 2.0, gamma: 1.0, closure: Closure::Full, quadrature_nodes: 64, p_max: 1999 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    /// Spatial points per direction.
    pub n: usize,
    /// Age intervals; the age grid has `n_t + 1` slices.
    pub n_t: usize,
    /// Arc-length intervals on `[-1/2, 1/2]`.
    pub n_s: usize,
    /// Age horizon `T_max`.
    pub t_max: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { n: 64, n_t: 200, n_s: 32, t_max: 4.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowKind {
    /// `v₀ = 0`.
    Rest,
    /// `v₀ = A (sin y, 0)` plus a seeded divergence-free perturbation of size `perturbation`.
    StartupShear,
    /// `v₀ = A (sin x cos y, -cos x sin y)`.
    TaylorGreen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelInit {
    /// Discrete rest equilibrium.
    Quiescent,
    /// `K₀ = e(s) ∫_T^∞ m_IA`.
    IaEquilibrium,
    /// The inflow profile at every age.
    ZeroMemory,
    /// Memory geometric in age, nonincreasing at every arc node.
    Geometric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DeformationInit {
    /// `G₀ = δ`.
    Identity,
    /// `G₀(T) = δ + κ (1 - e^{-T}) e₁⊗e₂`.
    Presheared { kappa: f64 },
    /// `G₀ = λ δ` (for exercising the determinant check).
    Scaled { lambda: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub flow: FlowKind,
    pub amplitude: f64,
    pub perturbation: f64,
    pub seed: u64,
    pub t_end: f64,
    /// Time step; when absent it is `We T_max / n_t`.
    pub dt: Option<f64>,
    pub kernel: KernelInit,
    pub deformation: DeformationInit,
    /// Whether the flow is driven by the polymer stress.
    pub coupled: bool,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            flow: FlowKind::StartupShear,
            amplitude: 0.5,
            perturbation: 0.05,
            seed: 7,
            t_end: 10.0,
            dt: None,
            kernel: KernelInit::Quiescent,
            deformation: DeformationInit::Identity,
            coupled: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationPolicy {
    Abort,
    Warn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Steps between CSV rows and invariant checks.
    pub cadence: usize,
    /// Steps between field snapshots; 0 writes only the final state.
    pub snapshot_every: usize,
    /// Include the (large) kernel field in snapshots.
    pub kernel_snapshots: bool,
    pub on_violation: ViolationPolicy,
    /// Start even when validation fails.
    pub force: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("run"),
            cadence: 1,
            snapshot_every: 0,
            kernel_snapshots: false,
            on_violation: ViolationPolicy::Abort,
            force: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Slack on the kernel range `[min(1, inf K₀), max(1, sup K₀)]`.
    pub max_principle: f64,
    /// Slack on `m ≥ 0` and `∂_T m ≤ 0`.
    pub monotonicity: f64,
    /// Relative slack on the decay ratio `≤ C₀`.
    pub decay: f64,
    /// Absolute slack on `|σ| ≤ ω(1 + 1/√2)`.
    pub stress: f64,
    pub divergence: f64,
    /// Budget on `det G` falling below `min(γ, 1)`.
    pub det: f64,
    /// `|∇v|_∞` above this counts as blowup.
    pub blowup: f64,
    /// Symmetry and trace of `σ`.
    pub symmetry: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            max_principle: 1e-12,
            monotonicity: 1e-10,
            decay: 1e-6,
            stress: 1e-6,
            divergence: 1e-12,
            det: 1e-2,
            blowup: 1e3,
            symmetry: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub flow: FlowSection,
    pub polymer: PolymerSection,
    pub grids: GridSection,
    pub scenario: ScenarioSection,
    pub output: OutputSection,
    pub tolerances: Tolerances,
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Apply `section.key=value` overrides; values are parsed as TOML
    /// scalars and fall back to strings.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self, ConfigError> {
        let mut doc: toml::Table = toml::from_str(&self.to_toml()).map_err(|e| ConfigError::Parse(e.to_string()))?;
        for ov in overrides {
            let ov = ov.as_ref();
            let (path, raw) = ov.split_once('=').ok_or_else(|| ConfigError::Override(ov.into()))?;
            let keys: Vec<&str> = path.trim().split('.').collect();
            if keys.len() < 2 || keys.iter().any(|k| k.is_empty()) {
                return Err(ConfigError::Override(ov.into()));
            }
            let value = parse_scalar(raw.trim());
            let mut table = &mut doc;
            for k in &keys[..keys.len() - 1] {
                table = table
                    .entry(k.to_string())
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                    .as_table_mut()
                    .ok_or_else(|| ConfigError::Override(ov.into()))?;
            }
            table.insert(keys[keys.len() - 1].to_string(), value);
        }
        let text = toml::to_string(&doc).map_err(|e| ConfigError::Parse(e.to_string()))?;
        Self::from_toml(&text)
    }

    /// Age spacing `ΔT = T_max / n_t`.
    pub fn dt_age(&self) -> f64 {
        self.grids.t_max / self.grids.n_t as f64
    }

    /// The lockstep time step `We ΔT` unless overridden.
    pub fn dt(&self) -> f64 {
        self.scenario.dt.unwrap_or(self.polymer.weissenberg * self.dt_age())
    }

    pub fn steps(&self) -> usize {
        (self.scenario.t_end / self.dt() - 1e-9).ceil().max(0.0) as usize
    }
}

fn parse_scalar(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&wrapped) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

/// Physical inputs of the model, in any consistent unit system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionalInputs {
    /// Density `ρ`.
    pub rho: f64,
    /// Solvent viscosity `η_s`.
    pub eta_s: f64,
    /// Characteristic modulus `G_e`.
    pub modulus: f64,
    /// Contour length `ℓ`.
    pub contour_length: f64,
    /// Curvilinear diffusion coefficient `D_e`.
    pub diffusion: f64,
    /// Macroscopic length `L`.
    pub length: f64,
    /// Macroscopic velocity `V`.
    pub velocity: f64,
}

/// `(Re, ω, We)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionlessGroups {
    pub reynolds: f64,
    pub omega: f64,
    pub weissenberg: f64,
}

/// `η_e = L G_e / V`, `Re = ρVL/(η_s + η_e)`, `ω = η_e/(η_s + η_e)`,
/// `We = (ℓ²/D_e) (V/L)`.
pub fn nondimensionalize(d: &DimensionalInputs) -> Result<DimensionlessGroups, ConfigError> {
    let named = [
        ("rho", d.rho),
        ("eta_s", d.eta_s),
        ("modulus", d.modulus),
        ("contour_length", d.contour_length),
        ("diffusion", d.diffusion),
        ("length", d.length),
        ("velocity", d.velocity),
    ];
    for (name, value) in named {
        if !(value > 0.0 && value.is_finite()) {
            return Err(ConfigError::NonPositive { name, value });
        }
    }
    let eta_e = d.length * d.modulus / d.velocity;
    let eta = d.eta_s + eta_e;
    let omega = eta_e / eta;
    if !(omega > 0.0 && omega < 1.0) {
        return Err(ConfigError::Omega(omega));
    }
    Ok(DimensionlessGroups {
        reynolds: d.rho * d.velocity * d.length / eta,
        omega,
        weissenberg: d.contour_length * d.contour_length / d.diffusion * d.velocity / d.length,
    })
}
