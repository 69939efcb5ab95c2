//! Self-convergence studies: repeated runs of one scenario with `dt` halved
//! (age grid refined with it so `dt = We ΔT` holds) or the spatial grid doubled.

use crate::config::SimConfig;
use crate::sim::{SimError, Simulation};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Refinement {
    /// `dt → dt/2`, `n_t → 2 n_t`, `T_max` fixed.
    Time,
    /// `n → 2 n`.
    Space,
}

/// One refinement level.
#[derive(Debug, Clone, Serialize)]
pub struct Level {
    pub n: usize,
    pub n_t: usize,
    pub dt: f64,
    pub steps: usize,
    /// `max_t |det G - det G(origin)|` over the run.
    pub det_drift: f64,
    pub sigma_max: f64,
    pub energy: f64,
    #[serde(skip)]
    velocity: Vec<f64>,
    #[serde(skip)]
    stress: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Study {
    pub refinement: Refinement,
    pub levels: Vec<Level>,
    /// `log2(e_h / e_{h/2})` of successive self-differences, one per level triple.
    pub velocity_order: Vec<f64>,
    pub stress_order: Vec<f64>,
    /// `log2(drift_h / drift_{h/2})`, one per level pair.
    pub det_order: Vec<f64>,
}

impl Study {
    pub fn table(&self) -> String {
        let mut s = format!(
            "# {:?} refinement\n{:>5} {:>6} {:>10} {:>7} {:>14} {:>14} {:>14}\n",
            self.refinement, "n", "n_t", "dt", "steps", "det_drift", "sigma_max", "energy"
        );
        for l in &self.levels {
            s.push_str(&format!(
                "{:>5} {:>6} {:>10.3e} {:>7} {:>14.6e} {:>14.6e} {:>14.8e}\n",
                l.n, l.n_t, l.dt, l.steps, l.det_drift, l.sigma_max, l.energy
            ));
        }
        let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(", ");
        s.push_str(&format!("velocity order: [{}]\n", fmt(&self.velocity_order)));
        s.push_str(&format!("stress order:   [{}]\n", fmt(&self.stress_order)));
        s.push_str(&format!("det drift order: [{}]\n", fmt(&self.det_order)));
        s
    }
}

fn level_config(base: &SimConfig, refinement: Refinement, level: usize) -> SimConfig {
    let mut cfg = base.clone();
    let f = 1usize << level;
    match refinement {
        Refinement::Time => {
            cfg.grids.n_t *= f;
            cfg.scenario.dt = None;
        }
        Refinement::Space => cfg.grids.n *= f,
    }
    cfg
}

fn run_level(cfg: SimConfig, stride: usize) -> Result<Level, SimError> {
    let mut sim = Simulation::new(cfg)?;
    let steps = sim.config().steps();
    let mut det_drift = sim.diagnostics().det_drift;
    for _ in 0..steps {
        sim.step()?;
        det_drift = det_drift.max(sim.diagnostics().det_drift);
    }
    let d = sim.diagnostics();
    let n = sim.spectral().grid().n;
    // restrict to the coarsest grid: nested points (i·stride, j·stride)
    let coarse: Vec<usize> = (0..n)
        .step_by(stride)
        .flat_map(|iy| (0..n).step_by(stride).map(move |ix| iy * n + ix))
        .collect();
    let velocity = coarse.iter().flat_map(|&c| sim.physical_velocity()[c].0).collect();
    let stress = coarse
        .iter()
        .flat_map(|&c| {
            let s = sim.stress()[c].0;
            [s[0][0], s[0][1], s[1][1]]
        })
        .collect();
    Ok(Level {
        n,
        n_t: sim.config().grids.n_t,
        dt: sim.dt(),
        steps,
        det_drift,
        sigma_max: d.sigma_max,
        energy: d.energy,
        velocity,
        stress,
    })
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

fn self_orders(fields: &[&[f64]]) -> Vec<f64> {
    fields
        .windows(3)
        .map(|w| (max_diff(w[0], w[1]) / max_diff(w[1], w[2])).log2())
        .collect()
}

/// Run `levels` refinements of `base` (level 0 is `base` itself).
pub fn study(base: &SimConfig, refinement: Refinement, levels: usize) -> Result<Study, SimError> {
    study_with(base, refinement, levels, |_| {})
}

/// [`study`] with a callback after each level.
pub fn study_with(
    base: &SimConfig,
    refinement: Refinement,
    levels: usize,
    mut on_level: impl FnMut(&Level),
) -> Result<Study, SimError> {
    let mut out = Vec::with_capacity(levels);
    for l in 0..levels {
        let stride = match refinement {
            Refinement::Time => 1,
            Refinement::Space => 1 << l,
        };
        let level = run_level(level_config(base, refinement, l), stride)?;
        on_level(&level);
        out.push(level);
    }
    let vel: Vec<&[f64]> = out.iter().map(|l| l.velocity.as_slice()).collect();
    let st: Vec<&[f64]> = out.iter().map(|l| l.stress.as_slice()).collect();
    let det_order = out.windows(2).map(|w| (w[0].det_drift / w[1].det_drift).log2()).collect();
    Ok(Study {
        refinement,
        velocity_order: self_orders(&vel),
        stress_order: self_orders(&st),
        det_order,
        levels: out,
    })
}
