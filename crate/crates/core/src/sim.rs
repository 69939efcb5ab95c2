//! Lockstep coupling of flow, deformation and memory, with run-time
//! invariant monitors and on-disk artifacts.
//!
//! One step, in order: stress from the current `m` and `G`; velocity step
//! forced by `div σ`; `∇v` of the new velocity; deformation step; drift from
//! the new `∇v` and the current orientation field; kernel step; monitors.

use crate::config::{ConfigError, DeformationInit, FlowKind, KernelInit, SimConfig, ViolationPolicy};
use crate::deformation::{self, det_diagnostics, step_deformation, validate_initial_deformation, DeformationError, DeformationField};
use crate::flow::{self, gradient, max_gradient, FlowError, FlowParams, FlowSolver, SpectralVelocity};
use crate::grid::{AgeGrid, ArcGrid, PeriodicGrid};
use crate::io::{write_snapshot, CsvWriter, SnapshotHeader};
use crate::memory_kernel::{self, compute_drift, step_kernel, validate_initial_kernel, IaMemory, KernelError, KernelField};
use crate::orientation::{s_bound, Closure, OrientationError, OrientationMap, TruncationProfile};
use crate::report::{Check, Report};
use crate::spectral::Spectral;
use crate::stress::{evaluate_map, full_stress, ia_stress, stress_bound, stress_diagnostics, stress_divergence, tail_budget, StressError};
use crate::tensor::{Tensor2, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Deformation(#[from] DeformationError),
    #[error(transparent)]
    Stress(#[from] StressError),
    #[error(transparent)]
    Orientation(#[from] OrientationError),
    #[error("scenario failed validation:\n{0}")]
    Invalid(Report),
    #[error("invariant `{check}` violated at step {step} (t = {t}): value {value}, limit {limit}")]
    Invariant { check: String, step: usize, t: f64, value: f64, limit: f64 },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Monitored quantities after a step. Kernel entries are NaN in IA mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diagnostics {
    pub step: usize,
    pub t: f64,
    pub energy: f64,
    pub enstrophy: f64,
    pub velocity_max: f64,
    pub grad_v_max: f64,
    pub divergence: f64,
    pub sigma_max: f64,
    pub sigma_trace: f64,
    pub sigma_asymmetry: f64,
    pub min_det: f64,
    pub min_norm: f64,
    pub det_drift: f64,
    pub k_min: f64,
    pub k_max: f64,
    pub m_min: f64,
    pub dm_max: f64,
    pub decay_ratio: f64,
    pub tail_budget: f64,
}

pub const COLUMNS: [&str; 19] = [
    "step",
    "t",
    "energy",
    "enstrophy",
    "velocity_max",
    "grad_v_max",
    "divergence",
    "sigma_max",
    "sigma_trace",
    "sigma_asymmetry",
    "min_det",
    "min_norm",
    "det_drift",
    "k_min",
    "k_max",
    "m_min",
    "dm_max",
    "decay_ratio",
    "tail_budget",
];

impl Diagnostics {
    pub fn row(&self) -> [f64; 19] {
        [
            self.step as f64,
            self.t,
            self.energy,
            self.enstrophy,
            self.velocity_max,
            self.grad_v_max,
            self.divergence,
            self.sigma_max,
            self.sigma_trace,
            self.sigma_asymmetry,
            self.min_det,
            self.min_norm,
            self.det_drift,
            self.k_min,
            self.k_max,
            self.m_min,
            self.dm_max,
            self.decay_ratio,
            self.tail_budget,
        ]
    }
}

/// Running verdict on one invariant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    /// Worst observed value and the step it occurred at.
    pub worst: f64,
    pub worst_step: usize,
    pub limit: f64,
    pub first_failure: Option<usize>,
}

#[derive(Debug, Clone, Copy)]
enum Sense {
    AtMost,
    AtLeast,
}

/// Reference values fixed at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Baseline {
    pub k_lower: f64,
    pub k_upper: f64,
    pub c0: f64,
    pub memory_monotone: bool,
    pub gamma_tilde: f64,
}

pub struct Simulation {
    cfg: SimConfig,
    sp: Spectral,
    solver: FlowSolver,
    map: OrientationMap,
    v: SpectralVelocity,
    u: Vec<Vector<2>>,
    grad: Vec<Tensor2<2>>,
    g: DeformationField,
    kernel: Option<KernelField>,
    ia_weights: Option<Vec<f64>>,
    s_field: Vec<Tensor2<2>>,
    sigma: Vec<Tensor2<2>>,
    t: f64,
    step: usize,
    dt: f64,
    baseline: Baseline,
    verdicts: Vec<Verdict>,
}

struct Initial {
    grid: PeriodicGrid,
    arc: ArcGrid,
    age: AgeGrid,
    u: Vec<Vector<2>>,
    g: DeformationField,
    kernel: Option<KernelField>,
}

fn initial_velocity(cfg: &SimConfig, grid: &PeriodicGrid) -> Vec<Vector<2>> {
    let sc = &cfg.scenario;
    let k0 = 2.0 * std::f64::consts::PI / grid.length;
    match sc.flow {
        FlowKind::Rest => vec![Vector::zero(); grid.cells()],
        FlowKind::TaylorGreen => grid.map(|x, y| {
            let (x, y) = (k0 * x, k0 * y);
            Vector::new(sc.amplitude * x.sin() * y.cos(), -sc.amplitude * x.cos() * y.sin())
        }),
        FlowKind::StartupShear => {
            // stream function ψ = Σ a cos(k·x + φ) over 1 ≤ |k|_∞ ≤ 3, u = (∂_y ψ, -∂_x ψ)
            let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
            let mut modes = Vec::new();
            for kx in -3i32..=3 {
                for ky in 0i32..=3 {
                    if (ky == 0 && kx <= 0) || (kx == 0 && ky == 0) {
                        continue;
                    }
                    let a: f64 = rng.gen_range(-1.0..1.0);
                    let phi: f64 = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
                    modes.push((kx as f64 * k0, ky as f64 * k0, a / ((kx * kx + ky * ky) as f64), phi));
                }
            }
            let pert = grid.map(|x, y| {
                modes.iter().fold(Vector::zero(), |acc, &(kx, ky, a, phi)| {
                    let s = -a * (kx * x + ky * y + phi).sin();
                    acc + Vector::new(ky * s, -kx * s)
                })
            });
            let scale = pert.iter().fold(0.0_f64, |m, p| m.max(p.0[0].abs()).max(p.0[1].abs()));
            let eps = if scale > 0.0 { sc.perturbation / scale } else { 0.0 };
            grid.map(|_, y| Vector::new(sc.amplitude * (k0 * y).sin(), 0.0))
                .into_iter()
                .zip(pert)
                .map(|(b, p)| b + p * eps)
                .collect()
        }
    }
}

fn initial_fields(cfg: &SimConfig) -> Initial {
    let gr = &cfg.grids;
    let grid = PeriodicGrid::new(gr.n, cfg.flow.length);
    let arc = ArcGrid::new(gr.n_s);
    let age = AgeGrid::new(gr.n_t, cfg.dt_age());
    let u = initial_velocity(cfg, &grid);
    let g = match cfg.scenario.deformation {
        DeformationInit::Identity => DeformationField::identity(grid, age),
        DeformationInit::Presheared { kappa } => {
            DeformationField::from_fn(grid, age, |t, _, _| Tensor2::new(1.0, kappa * (1.0 - (-t).exp()), 0.0, 1.0))
        }
        DeformationInit::Scaled { lambda } => {
            DeformationField::from_fn(grid, age, |_, _, _| Tensor2::identity() * lambda)
        }
    };
    let kernel = match cfg.polymer.closure {
        Closure::Ia => None,
        Closure::Full => Some(match cfg.scenario.kernel {
            KernelInit::Quiescent => KernelField::quiescent(grid, arc, age),
            KernelInit::ZeroMemory => KernelField::zero_memory(grid, arc, age),
            KernelInit::Geometric => KernelField::geometric(grid, arc, age).0,
            KernelInit::IaEquilibrium => KernelField::ia_equilibrium(grid, arc, age, &IaMemory::new(cfg.polymer.p_max)),
        }),
    };
    Initial { grid, arc, age, u, g, kernel }
}

fn parameter_checks(cfg: &SimConfig) -> Report {
    let mut r = Report::default();
    let positive = |name: &str, v: f64| Check::new(name, v > 0.0 && v.is_finite(), v, "> 0");
    r.push(positive("reynolds", cfg.flow.reynolds));
    r.push(Check::new("omega", cfg.flow.omega > 0.0 && cfg.flow.omega < 1.0, cfg.flow.omega, "0 < omega < 1"));
    r.push(positive("weissenberg", cfg.polymer.weissenberg));
    r.push(positive("decay_rate", cfg.polymer.decay_rate));
    r.push(positive("gamma", cfg.polymer.gamma));
    r.push(positive("length", cfg.flow.length));
    r.push(positive("t_max", cfg.grids.t_max));
    r.push(positive("dt", cfg.dt()));
    let expected = cfg.polymer.weissenberg * cfg.dt_age();
    r.push(Check::new(
        "lockstep",
        (cfg.dt() - expected).abs() <= 1e-12 * expected,
        cfg.dt(),
        format!("dt = We * T_max / n_t = {expected}"),
    ));
    let n = cfg.grids.n;
    r.push(Check::new("grid_n", n >= 4 && n % 2 == 0, n as f64, "even, >= 4"));
    r.push(Check::new("grid_n_t", cfg.grids.n_t >= 1, cfg.grids.n_t as f64, ">= 1"));
    r.push(Check::new("grid_n_s", cfg.grids.n_s >= 2 && cfg.grids.n_s % 2 == 0, cfg.grids.n_s as f64, "even, >= 2"));
    let q = cfg.polymer.quadrature_nodes;
    r.push(Check::new("quadrature_nodes", q >= 4 && q % 2 == 0, q as f64, "even, >= 4"));
    r.push(Check::new("p_max", cfg.polymer.p_max % 2 == 1, cfg.polymer.p_max as f64, "odd"));
    r.push(Check::new("cadence", cfg.output.cadence >= 1, cfg.output.cadence as f64, ">= 1"));
    r
}

/// Parameter ranges, the initial-data assumptions and the initial CFL limits.
pub fn validate_scenario(cfg: &SimConfig) -> Report {
    let mut r = parameter_checks(cfg);
    if !r.passed() {
        return r;
    }
    let init = initial_fields(cfg);
    r.extend(validate_initial_deformation(&init.g, cfg.polymer.gamma));
    let we = cfg.polymer.weissenberg;
    let mu = cfg.polymer.decay_rate;
    match &init.kernel {
        Some(k0) => r.extend(validate_initial_kernel(k0, mu, we)),
        None => {
            // m_IA ≤ C e^{-T}: the envelope needs 2 We μ ≤ 1
            let adm = 1.0 / (2.0 * we);
            r.push(Check::new("memory_decay", mu <= adm, mu, format!("mu <= admissible {adm}")));
        }
    }
    let sp = Spectral::new(init.grid);
    let dt = cfg.dt();
    let limits = [
        ("cfl_flow", flow::admissible_dt(&sp, &init.u)),
        ("cfl_deformation", deformation::admissible_dt(&sp, &init.u)),
        ("cfl_kernel", memory_kernel::admissible_dt(&init.grid, &init.arc, &init.u, &[])),
    ];
    for (name, adm) in limits {
        r.push(Check::new(name, dt <= adm, dt, format!("dt <= {adm}")));
    }
    r
}

impl Simulation {
    /// Build the initial state. Refuses invalid scenarios unless
    /// `output.force` is set.
    pub fn new(cfg: SimConfig) -> Result<Self, SimError> {
        let report = validate_scenario(&cfg);
        if !report.passed() && !cfg.output.force {
            return Err(SimError::Invalid(report));
        }
        let init = initial_fields(&cfg);
        let sp = Spectral::new(init.grid);
        let params = FlowParams::new(cfg.flow.reynolds, cfg.flow.omega)?;
        let solver = FlowSolver::new(sp.clone(), params);
        let profile = TruncationProfile::from_det_floor(cfg.polymer.gamma)?;
        let map = OrientationMap::new(cfg.polymer.quadrature_nodes, profile, cfg.polymer.closure);
        let v = SpectralVelocity::from_physical(&sp, &init.u);
        let u = v.to_physical(&sp);
        let grad = gradient(&sp, &v);
        let ia_weights = (cfg.polymer.closure == Closure::Ia).then(|| IaMemory::new(cfg.polymer.p_max).hat_weights(&init.age));
        let we = cfg.polymer.weissenberg;
        let mu = cfg.polymer.decay_rate;
        let baseline = match &init.kernel {
            Some(k0) => {
                let st = k0.stats(1, mu, we);
                Baseline {
                    k_lower: st.min.min(1.0),
                    k_upper: st.max.max(1.0),
                    c0: st.envelope_constant,
                    memory_monotone: st.max_age_increase <= cfg.tolerances.monotonicity,
                    gamma_tilde: profile.gamma_tilde(),
                }
            }
            None => Baseline {
                k_lower: f64::NAN,
                k_upper: f64::NAN,
                c0: f64::NAN,
                memory_monotone: false,
                gamma_tilde: profile.gamma_tilde(),
            },
        };
        let cells = init.grid.cells();
        let mut sim = Self {
            dt: cfg.dt(),
            cfg,
            sp,
            solver,
            map,
            v,
            u,
            grad,
            g: init.g,
            kernel: init.kernel,
            ia_weights,
            s_field: Vec::new(),
            sigma: vec![Tensor2::zero(); cells],
            t: 0.0,
            step: 0,
            baseline,
            verdicts: Vec::new(),
        };
        sim.update_stress()?;
        Ok(sim)
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn spectral(&self) -> &Spectral {
        &self.sp
    }

    pub fn velocity(&self) -> &SpectralVelocity {
        &self.v
    }

    pub fn physical_velocity(&self) -> &[Vector<2>] {
        &self.u
    }

    pub fn velocity_gradient(&self) -> &[Tensor2<2>] {
        &self.grad
    }

    pub fn deformation(&self) -> &DeformationField {
        &self.g
    }

    pub fn kernel(&self) -> Option<&KernelField> {
        self.kernel.as_ref()
    }

    pub fn stress(&self) -> &[Tensor2<2>] {
        &self.sigma
    }

    /// `S(x, s)` in full mode; empty in IA mode.
    pub fn orientation(&self) -> &[Tensor2<2>] {
        &self.s_field
    }

    pub fn baseline(&self) -> &Baseline {
        &self.baseline
    }

    pub fn verdicts(&self) -> &[Verdict] {
        &self.verdicts
    }

    fn update_stress(&mut self) -> Result<(), SimError> {
        let mapped = evaluate_map(&self.map, &self.g);
        let omega = self.cfg.flow.omega;
        match (&self.kernel, &self.ia_weights) {
            (Some(k), _) => {
                let (s, sigma) = full_stress(k, &mapped, self.g.age(), omega)?;
                self.s_field = s;
                self.sigma = sigma;
            }
            (None, Some(w)) => {
                self.sigma = ia_stress(&mapped, self.sp.grid().cells(), w, omega)?;
            }
            (None, None) => unreachable!("IA weights exist whenever the kernel does not"),
        }
        Ok(())
    }

    /// Advance one time step.
    pub fn step(&mut self) -> Result<(), SimError> {
        let dt = self.dt;
        let we = self.cfg.polymer.weissenberg;
        let cells = self.sp.grid().cells();
        let div = if self.cfg.scenario.coupled {
            stress_divergence(&self.sp, &self.sigma)
        } else {
            vec![Vector::zero(); cells]
        };
        self.solver.step(&mut self.v, &div, dt)?;
        let u_new = self.v.to_physical(&self.sp);
        let grad_new = gradient(&self.sp, &self.v);
        step_deformation(&mut self.g, &self.sp, &u_new, &self.grad, &grad_new, dt, we)?;
        if let Some(k) = self.kernel.as_mut() {
            let drift = compute_drift(&grad_new, &self.s_field, k.arc());
            step_kernel(k, &u_new, &drift, dt, we)?;
        }
        self.u = u_new;
        self.grad = grad_new;
        self.step += 1;
        self.t = self.step as f64 * dt;
        self.update_stress()
    }

    /// Evaluate every monitor on the current state.
    pub fn diagnostics(&self) -> Diagnostics {
        let sp = &self.sp;
        let sd = stress_diagnostics(&self.sigma);
        let det = det_diagnostics(&self.g);
        let we = self.cfg.polymer.weissenberg;
        let mu = self.cfg.polymer.decay_rate;
        let nan = f64::NAN;
        let (k_min, k_max, m_min, dm_max, decay_ratio, tail_budget) = match &self.kernel {
            Some(k) => {
                let st = k.stats(self.step + 1, mu, we);
                let tail = tail_budget(self.cfg.flow.omega, st.envelope_constant, mu, we, k.age().t_max());
                (st.min, st.max, st.min_memory, st.max_age_increase, st.envelope_constant * (-mu * self.t).exp(), tail)
            }
            None => {
                let ia = IaMemory::new(self.cfg.polymer.p_max);
                let tail = self.cfg.flow.omega * s_bound(2) * ia.survival(self.g.age().t_max());
                (nan, nan, nan, nan, nan, tail)
            }
        };
        Diagnostics {
            step: self.step,
            t: self.t,
            energy: self.v.energy(sp),
            enstrophy: self.v.enstrophy(sp),
            velocity_max: self.u.iter().fold(0.0_f64, |m, x| m.max(x.frobenius())),
            grad_v_max: max_gradient(&self.grad),
            divergence: self.v.divergence_residual(sp),
            sigma_max: sd.max_norm,
            sigma_trace: sd.max_trace,
            sigma_asymmetry: sd.max_asymmetry,
            min_det: det.min_det,
            min_norm: det.min_norm,
            det_drift: det.drift,
            k_min,
            k_max,
            m_min,
            dm_max,
            decay_ratio,
            tail_budget,
        }
    }

    fn limits(&self) -> Vec<(&'static str, Sense, f64)> {
        let tol = &self.cfg.tolerances;
        let b = &self.baseline;
        let mut v = vec![
            ("stress_bound", Sense::AtMost, stress_bound(self.cfg.flow.omega) + tol.stress),
            ("stress_trace", Sense::AtMost, tol.symmetry),
            ("stress_symmetry", Sense::AtMost, tol.symmetry),
            ("divergence_free", Sense::AtMost, tol.divergence),
            ("det_floor", Sense::AtLeast, self.cfg.polymer.gamma.min(1.0) - tol.det),
            ("norm_floor", Sense::AtLeast, b.gamma_tilde - tol.det),
            ("no_blowup", Sense::AtMost, tol.blowup),
        ];
        if self.kernel.is_some() {
            v.extend([
                ("max_principle_lower", Sense::AtLeast, b.k_lower - tol.max_principle),
                ("max_principle_upper", Sense::AtMost, b.k_upper + tol.max_principle),
                ("memory_positive", Sense::AtLeast, -tol.monotonicity),
                ("decay_envelope", Sense::AtMost, b.c0 * (1.0 + tol.decay)),
            ]);
            if b.memory_monotone {
                v.push(("memory_monotone", Sense::AtMost, tol.monotonicity));
            }
        }
        v
    }

    fn value_of(d: &Diagnostics, name: &str) -> f64 {
        match name {
            "stress_bound" => d.sigma_max,
            "stress_trace" => d.sigma_trace,
            "stress_symmetry" => d.sigma_asymmetry,
            "divergence_free" => d.divergence,
            "det_floor" => d.min_det,
            "norm_floor" => d.min_norm,
            "no_blowup" => {
                if d.grad_v_max.is_finite() {
                    d.grad_v_max
                } else {
                    f64::INFINITY
                }
            }
            "max_principle_lower" => d.k_min,
            "max_principle_upper" => d.k_max,
            "memory_positive" => d.m_min,
            "decay_envelope" => d.decay_ratio,
            "memory_monotone" => d.dm_max,
            _ => unreachable!("unknown monitor {name}"),
        }
    }

    /// Fold a diagnostics record into the running verdicts; returns the
    /// first violated check, if any.
    pub fn record(&mut self, d: &Diagnostics) -> Option<(String, f64, f64)> {
        let limits = self.limits();
        if self.verdicts.is_empty() {
            self.verdicts = limits
                .iter()
                .map(|&(name, sense, limit)| Verdict {
                    name: name.into(),
                    passed: true,
                    worst: match sense {
                        Sense::AtMost => f64::NEG_INFINITY,
                        Sense::AtLeast => f64::INFINITY,
                    },
                    worst_step: d.step,
                    limit,
                    first_failure: None,
                })
                .collect();
        }
        let mut first = None;
        for ((name, sense, limit), v) in limits.iter().zip(self.verdicts.iter_mut()) {
            let x = Self::value_of(d, name);
            let (ok, worse) = match sense {
                Sense::AtMost => (x <= *limit, x > v.worst),
                Sense::AtLeast => (x >= *limit, x < v.worst),
            };
            if worse || x.is_nan() {
                v.worst = x;
                v.worst_step = d.step;
            }
            if !ok {
                v.passed = false;
                if v.first_failure.is_none() {
                    v.first_failure = Some(d.step);
                }
                if first.is_none() {
                    first = Some((name.to_string(), x, *limit));
                }
            }
        }
        first
    }

    /// Write velocity, stress, deformation (and optionally kernel) snapshots.
    pub fn write_snapshots(&self, dir: &Path, tag: &str) -> std::io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let grid = self.sp.grid();
        let n = grid.n;
        let age = self.g.age();
        let meta = |h: SnapshotHeader| {
            h.with("t", format!("{:.16e}", self.t))
                .with("step", self.step)
                .with("length", format!("{:.16e}", grid.length))
                .with("dt_age", format!("{:.16e}", age.dt_age))
        };
        let mut out = Vec::new();
        let p = dir.join(format!("velocity_{tag}.bin"));
        write_snapshot(&p, &meta(SnapshotHeader::new("velocity", &[n, n, 2])), self.u.iter().flat_map(|v| v.0))?;
        out.push(p);
        let p = dir.join(format!("stress_{tag}.bin"));
        let t2 = |t: &Tensor2<2>| [t.0[0][0], t.0[0][1], t.0[1][0], t.0[1][1]];
        write_snapshot(&p, &meta(SnapshotHeader::new("stress", &[n, n, 2, 2])), self.sigma.iter().flat_map(t2))?;
        out.push(p);
        let p = dir.join(format!("deformation_{tag}.bin"));
        write_snapshot(
            &p,
            &meta(SnapshotHeader::new("deformation", &[age.slices(), n, n, 2, 2])),
            self.g.values().iter().flat_map(t2),
        )?;
        out.push(p);
        if let (Some(k), true) = (&self.kernel, self.cfg.output.kernel_snapshots) {
            let p = dir.join(format!("kernel_{tag}.bin"));
            let h = SnapshotHeader::new("kernel", &[age.slices(), n, n, k.arc().nodes()]).with("ds", format!("{:.16e}", k.arc().ds()));
            write_snapshot(&p, &meta(h), k.values().iter().copied())?;
            out.push(p);
        }
        Ok(out)
    }
}

/// What a finished (or aborted) run leaves behind.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub steps: usize,
    pub t: f64,
    pub dt: f64,
    pub passed: bool,
    pub baseline: Baseline,
    pub verdicts: Vec<Verdict>,
    pub csv: PathBuf,
    pub manifest: PathBuf,
    pub snapshots: Vec<PathBuf>,
    pub aborted: Option<String>,
    pub last: Option<Diagnostics>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    package: &'static str,
    version: &'static str,
    config: &'a SimConfig,
    grid: serde_json::Value,
    validation: Vec<serde_json::Value>,
    summary: &'a RunSummary,
}

/// Run a scenario to `t_end`, writing the CSV time series, snapshots and
/// a JSON manifest into `output.dir`.
pub fn run(cfg: &SimConfig) -> Result<RunSummary, SimError> {
    run_with(cfg, |_| {})
}

/// [`run`] with a callback after every monitored step.
pub fn run_with(cfg: &SimConfig, mut on_step: impl FnMut(&Diagnostics)) -> Result<RunSummary, SimError> {
    let dir = cfg.output.dir.clone();
    std::fs::create_dir_all(&dir)?;
    let validation = validate_scenario(cfg);
    let mut sim = Simulation::new(cfg.clone())?;
    std::fs::write(dir.join("config.toml"), cfg.to_toml())?;
    let csv_path = dir.join("timeseries.csv");
    let mut csv = CsvWriter::new(BufWriter::new(File::create(&csv_path)?), &COLUMNS)?;
    let snap_dir = dir.join("snapshots");
    let mut snapshots = Vec::new();
    let steps = cfg.steps();
    let cadence = cfg.output.cadence.max(1);
    let mut aborted = None;
    let mut last = None;

    let d = sim.diagnostics();
    csv.row(&d.row())?;
    sim.record(&d);
    on_step(&d);
    last = last.or(Some(d));
    let mut failure = None;
    for n in 1..=steps {
        if let Err(e) = sim.step() {
            aborted = Some(e.to_string());
            failure = Some(e);
            break;
        }
        if n % cadence == 0 || n == steps {
            let d = sim.diagnostics();
            csv.row(&d.row())?;
            let violated = sim.record(&d);
            on_step(&d);
            last = Some(d);
            if let (Some((check, value, limit)), ViolationPolicy::Abort) = (violated, cfg.output.on_violation) {
                let e = SimError::Invariant { check, step: n, t: sim.time(), value, limit };
                aborted = Some(e.to_string());
                failure = Some(e);
                break;
            }
        }
        if cfg.output.snapshot_every > 0 && n % cfg.output.snapshot_every == 0 {
            snapshots.extend(sim.write_snapshots(&snap_dir, &format!("{n:06}"))?);
        }
    }
    csv.flush()?;
    drop(csv);
    let tag = if failure.is_some() { "abort" } else { "final" };
    snapshots.extend(sim.write_snapshots(&snap_dir, tag)?);

    let manifest_path = dir.join("manifest.json");
    let passed = failure.is_none() && sim.verdicts().iter().all(|v| v.passed);
    let summary = RunSummary {
        steps: sim.steps_taken(),
        t: sim.time(),
        dt: sim.dt(),
        passed,
        baseline: *sim.baseline(),
        verdicts: sim.verdicts().to_vec(),
        csv: csv_path,
        manifest: manifest_path.clone(),
        snapshots,
        aborted,
        last,
    };
    let grid = serde_json::json!({
        "n": cfg.grids.n,
        "length": cfg.flow.length,
        "dx": cfg.flow.length / cfg.grids.n as f64,
        "age_slices": cfg.grids.n_t + 1,
        "dt_age": cfg.dt_age(),
        "t_max": cfg.grids.t_max,
        "arc_nodes": cfg.grids.n_s + 1,
        "ds": 1.0 / cfg.grids.n_s as f64,
        "quadrature_nodes": cfg.polymer.quadrature_nodes,
    });
    let validation = validation
        .checks
        .iter()
        .map(|c| serde_json::json!({"name": c.name, "passed": c.passed, "worst": c.worst, "detail": c.detail}))
        .collect();
    let manifest = Manifest {
        package: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        grid,
        validation,
        summary: &summary,
    };
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest).expect("manifest serializes"))?;
    match failure {
        Some(e) => Err(e),
        None => Ok(summary),
    }
}
