//! Block Picard (waveform) iteration between the controlled potential
//! equation and the gating equations.
//!
//! Each outer iteration solves the potential over the whole horizon with the
//! membrane coefficients frozen from the previous gating iterate, then
//! re-solves every gating equation node by node with the new potential. The
//! relay term depends on the unknown potential and is kept inside the
//! implicit potential solve.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, GatingKind, HHParameters, ReducedModel};
use crate::numerics::{
    integrate_rk45, integrate_stiff_mol, laplacian_neumann, Mesh, MolSystem, OutputMode,
    SolverTolerances, StateField,
};
use crate::relay::SignEpsilon;

/// Initial membrane potential `v₀(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialPotential {
    Constant { value: f64 },
    /// `amplitude · sin(wavenumber · x) + offset`
    SpaceSinusoid {
        amplitude: f64,
        wavenumber: f64,
        offset: f64,
    },
}

impl InitialPotential {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            InitialPotential::Constant { value } => value,
            InitialPotential::SpaceSinusoid {
                amplitude,
                wavenumber,
                offset,
            } => amplitude * (wavenumber * x).sin() + offset,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, InitialPotential::Constant { .. })
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            InitialPotential::Constant { value } => value.is_finite(),
            InitialPotential::SpaceSinusoid {
                amplitude,
                wavenumber,
                offset,
            } => amplitude.is_finite() && wavenumber.is_finite() && offset.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain("initial potential must be finite"))
        }
    }
}

/// Sup-norms of the target that enter the sliding bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetNorms {
    /// `‖v*_t‖∞`
    pub dt_sup: f64,
    /// `‖v*_xx‖∞`
    pub dxx_sup: f64,
    /// `‖v*‖∞`
    pub sup: f64,
}

/// Prescribed sliding surface `v = v*(t, x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetTrajectory {
    Constant { value: f64 },
    /// `amplitude · sin(frequency · t) + offset`
    TimeSinusoid {
        amplitude: f64,
        frequency: f64,
        offset: f64,
    },
    /// Time-independent values on the space mesh.
    SpaceProfile { values: Vec<f64> },
}

impl TargetTrajectory {
    #[inline]
    pub fn eval(&self, t: f64, j: usize) -> f64 {
        match self {
            TargetTrajectory::Constant { value } => *value,
            TargetTrajectory::TimeSinusoid {
                amplitude,
                frequency,
                offset,
            } => amplitude * (frequency * t).sin() + offset,
            TargetTrajectory::SpaceProfile { values } => values[j],
        }
    }

    pub fn is_space_independent(&self) -> bool {
        !matches!(self, TargetTrajectory::SpaceProfile { .. })
    }

    pub fn validate(&self, mesh: &Mesh) -> Result<()> {
        match self {
            TargetTrajectory::Constant { value } if value.is_finite() => Ok(()),
            TargetTrajectory::TimeSinusoid {
                amplitude,
                frequency,
                offset,
            } if amplitude.is_finite() && frequency.is_finite() && offset.is_finite() => Ok(()),
            TargetTrajectory::SpaceProfile { values } => {
                if values.len() != mesh.max_x() {
                    Err(Error::domain(format!(
                        "target profile has {} values, mesh has {} nodes",
                        values.len(),
                        mesh.max_x()
                    )))
                } else if values.iter().any(|v| !v.is_finite()) {
                    Err(Error::domain("target profile must be finite"))
                } else {
                    Ok(())
                }
            }
            _ => Err(Error::domain("target must be finite")),
        }
    }

    /// Sup-norms of the target and of its derivatives. For a space profile
    /// the second derivative uses the same ghost-node difference as the
    /// solver.
    pub fn norms(&self, mesh: &Mesh) -> Result<TargetNorms> {
        self.validate(mesh)?;
        Ok(match self {
            TargetTrajectory::Constant { value } => TargetNorms {
                dt_sup: 0.0,
                dxx_sup: 0.0,
                sup: value.abs(),
            },
            TargetTrajectory::TimeSinusoid {
                amplitude,
                frequency,
                offset,
            } => TargetNorms {
                dt_sup: (amplitude * frequency).abs(),
                dxx_sup: 0.0,
                sup: amplitude.abs() + offset.abs(),
            },
            TargetTrajectory::SpaceProfile { values } => {
                let lap = laplacian_neumann(values, mesh.dx(), 1.0)?;
                TargetNorms {
                    dt_sup: 0.0,
                    dxx_sup: lap.iter().fold(0.0, |m, v| m.max(v.abs())),
                    sup: values.iter().fold(0.0, |m, v| m.max(v.abs())),
                }
            }
        })
    }

    pub fn sample(&self, mesh: &Mesh) -> StateField {
        StateField::from_fn(mesh.max_t(), mesh.max_x(), |i, j| self.eval(mesh.tmesh()[i], j))
    }
}

/// A complete Hodgkin–Huxley run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub params: HHParameters,
    pub mesh: Mesh,
    pub v0: InitialPotential,
    pub n0: f64,
    pub m0: f64,
    pub h0: f64,
    pub target: TargetTrajectory,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.v0.validate()?;
        self.target.validate(&self.mesh)?;
        for (name, w) in [("n0", self.n0), ("m0", self.m0), ("h0", self.h0)] {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::domain(format!("{name} must lie in [0, 1], got {w}")));
            }
        }
        Ok(())
    }

    pub fn v0_on_mesh(&self) -> Vec<f64> {
        self.mesh.xmesh().iter().map(|&x| self.v0.eval(x)).collect()
    }

    /// `sup |v₀(x) − v*(t, x)|` over the saved grid.
    pub fn initial_deviation(&self) -> f64 {
        initial_deviation(&self.mesh, &self.v0, &self.target)
    }
}

fn initial_deviation(mesh: &Mesh, v0: &InitialPotential, target: &TargetTrajectory) -> f64 {
    let mut dev = 0.0f64;
    for &t in mesh.tmesh() {
        for (j, &x) in mesh.xmesh().iter().enumerate() {
            dev = dev.max((v0.eval(x) - target.eval(t, j)).abs());
        }
    }
    dev
}

/// Outer-loop controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationSettings {
    pub tol: SolverTolerances,
    /// Sup-norm change of `v` between outer iterates that counts as converged.
    pub threshold: f64,
    pub max_iterations: usize,
    /// Wall-clock limit in seconds.
    pub time_budget: f64,
}

impl Default for IterationSettings {
    fn default() -> Self {
        Self {
            tol: SolverTolerances::default(),
            threshold: 1e-3,
            max_iterations: 100,
            time_budget: 900.0,
        }
    }
}

impl IterationSettings {
    pub fn validate(&self) -> Result<()> {
        self.tol.validate()?;
        if !(self.threshold > 0.0) {
            return Err(Error::domain("threshold must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::domain("max_iterations must be at least 1"));
        }
        if !(self.time_budget > 0.0) {
            return Err(Error::domain("time budget must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIterations,
    TimeBudget,
}

#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub mesh: Mesh,
    pub v: StateField,
    /// Gating fields, in the order of `gating_names`.
    pub gating: Vec<StateField>,
    pub gating_names: Vec<String>,
    pub iterations: usize,
    /// `‖vⁱᵗᵉʳ − vⁱᵗᵉʳ⁻¹‖∞` for every outer iteration.
    pub residual_trace: Vec<f64>,
    pub stop_reason: StopReason,
    /// Wall-clock seconds spent in the outer loop.
    pub elapsed: f64,
}

impl SimulationResult {
    pub fn gating_field(&self, name: &str) -> Option<&StateField> {
        self.gating_names
            .iter()
            .position(|n| n == name)
            .map(|k| &self.gating[k])
    }

    pub fn converged(&self) -> bool {
        self.stop_reason == StopReason::Converged
    }

    /// `true` when the result holds no samples.
    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }
}

/// Coefficients of one coupled system: a potential equation with
/// capacitance `C`, diffusion `δ` and membrane terms `f1(w)`, `f2(w)`, and a
/// set of gating variables `wₖ' = −h1ᵏ(v) wₖ + h2ᵏ(v)`.
trait Coupling: Sync {
    fn capacitance(&self) -> f64;
    fn diffusion(&self) -> f64;
    fn rho(&self) -> f64;
    fn epsilon(&self) -> SignEpsilon;
    fn gate_names(&self) -> Vec<String>;
    /// `(f1, f2)` at the gating values `w`.
    fn membrane(&self, w: &[f64]) -> (f64, f64);
    /// `(h1, h2)` of gate `k` at potential `v`.
    fn gate_rates(&self, k: usize, v: f64) -> (f64, f64);
}

struct HodgkinHuxley {
    params: HHParameters,
    epsilon: SignEpsilon,
}

impl Coupling for HodgkinHuxley {
    fn capacitance(&self) -> f64 {
        self.params.c_m
    }
    fn diffusion(&self) -> f64 {
        self.params.delta
    }
    fn rho(&self) -> f64 {
        self.params.rho
    }
    fn epsilon(&self) -> SignEpsilon {
        self.epsilon
    }
    fn gate_names(&self) -> Vec<String> {
        GatingKind::ALL.iter().map(|k| k.name().to_owned()).collect()
    }
    fn membrane(&self, w: &[f64]) -> (f64, f64) {
        (
            model::f1(w[0], w[1], w[2], &self.params),
            model::f2(w[0], w[1], w[2], &self.params),
        )
    }
    fn gate_rates(&self, k: usize, v: f64) -> (f64, f64) {
        GatingKind::ALL[k].coefficients(v)
    }
}

struct Reduced<'a> {
    model: &'a ReducedModel,
    delta: f64,
    rho: f64,
    epsilon: SignEpsilon,
}

impl Coupling for Reduced<'_> {
    fn capacitance(&self) -> f64 {
        1.0
    }
    fn diffusion(&self) -> f64 {
        self.delta
    }
    fn rho(&self) -> f64 {
        self.rho
    }
    fn epsilon(&self) -> SignEpsilon {
        self.epsilon
    }
    fn gate_names(&self) -> Vec<String> {
        vec!["w".to_owned()]
    }
    fn membrane(&self, w: &[f64]) -> (f64, f64) {
        ((self.model.f1)(w[0]), (self.model.f2)(w[0]))
    }
    fn gate_rates(&self, _k: usize, v: f64) -> (f64, f64) {
        ((self.model.h1)(v), (self.model.h2)(v))
    }
}

/// Runs the block iteration for the full Hodgkin–Huxley system.
pub fn run_simulation(scenario: &Scenario, settings: &IterationSettings) -> Result<SimulationResult> {
    scenario.validate()?;
    settings.validate()?;
    let coupling = HodgkinHuxley {
        params: scenario.params,
        epsilon: SignEpsilon::new(scenario.params.epsilon)?,
    };
    let nx = scenario.mesh.max_x();
    let w0 = [scenario.n0, scenario.m0, scenario.h0]
        .iter()
        .map(|&w| vec![w; nx])
        .collect::<Vec<_>>();
    block_iteration(
        &coupling,
        &scenario.mesh,
        &scenario.v0_on_mesh(),
        &w0,
        &scenario.target,
        settings,
    )
}

/// The reduced two-field problem (capacitance fixed at 1).
#[derive(Debug, Clone)]
pub struct ReducedScenario {
    pub model: ReducedModel,
    pub mesh: Mesh,
    pub delta: f64,
    pub rho: f64,
    pub epsilon: f64,
    pub v0: InitialPotential,
    pub w0: f64,
    pub target: TargetTrajectory,
}

impl ReducedScenario {
    pub fn initial_deviation(&self) -> f64 {
        initial_deviation(&self.mesh, &self.v0, &self.target)
    }
}

pub fn run_reduced(problem: &ReducedScenario, settings: &IterationSettings) -> Result<SimulationResult> {
    settings.validate()?;
    problem.v0.validate()?;
    problem.target.validate(&problem.mesh)?;
    if !(problem.delta > 0.0) || !(problem.rho >= 0.0) {
        return Err(Error::domain("delta must be positive and rho nonnegative"));
    }
    if !problem.w0.is_finite() {
        return Err(Error::domain("w0 must be finite"));
    }
    let coupling = Reduced {
        model: &problem.model,
        delta: problem.delta,
        rho: problem.rho,
        epsilon: SignEpsilon::new(problem.epsilon)?,
    };
    let v0: Vec<f64> = problem.mesh.xmesh().iter().map(|&x| problem.v0.eval(x)).collect();
    let w0 = vec![vec![problem.w0; problem.mesh.max_x()]];
    block_iteration(&coupling, &problem.mesh, &v0, &w0, &problem.target, settings)
}

fn block_iteration<C: Coupling>(
    coupling: &C,
    mesh: &Mesh,
    v0: &[f64],
    w0: &[Vec<f64>],
    target: &TargetTrajectory,
    settings: &IterationSettings,
) -> Result<SimulationResult> {
    let (nt, nx) = (mesh.max_t(), mesh.max_x());
    let gates = w0.len();
    let tmesh = mesh.tmesh();
    let span = (0.0, mesh.horizon());
    let tol = &settings.tol;

    // Step 1: constant-in-time copies of the initial data.
    let mut v_prev = StateField::from_fn(nt, nx, |_, j| v0[j]);
    let mut gating: Vec<StateField> = w0
        .iter()
        .map(|w| StateField::from_fn(nt, nx, |_, j| w[j]))
        .collect();

    let cap = coupling.capacitance();
    let rho = coupling.rho();
    let eps = coupling.epsilon();
    let start = Instant::now();
    let mut residual_trace = Vec::new();
    let mut iteration = 0;
    let mut w_local = vec![0.0; gates];

    loop {
        iteration += 1;

        // Step 2: membrane coefficients from the current gating iterate.
        let mut f1 = StateField::from_fn(nt, nx, |_, _| 0.0);
        let mut f2 = f1.clone();
        for i in 0..nt {
            for j in 0..nx {
                for (k, w) in w_local.iter_mut().enumerate() {
                    *w = gating[k].get(i, j);
                }
                let (a, b) = coupling.membrane(&w_local);
                f1.set(i, j, a);
                f2.set(i, j, b);
            }
        }

        // Step 3: potential over the whole horizon.
        let system = MolSystem::new(
            nx,
            coupling.diffusion() / cap,
            mesh.dx(),
            |t, j, v| {
                let a = f1.interp_unchecked(tmesh, t, j);
                let b = f2.interp_unchecked(tmesh, t, j);
                (-a * v + b - rho * eps.sign(v - target.eval(t, j))) / cap
            },
            |t, j, v| {
                let a = f1.interp_unchecked(tmesh, t, j);
                (-a - rho * eps.slope(v - target.eval(t, j))) / cap
            },
        )?;
        let traj = integrate_stiff_mol(&system, v0, span, tmesh, tol, OutputMode::Stop)
            .map_err(|e| Error::InnerSolver {
                iteration,
                source: Box::new(e),
            })?;
        let v = StateField::from_fn(nt, nx, |i, j| traj.state(i)[j]);
        if !v.all_finite() {
            return Err(Error::NonFinite {
                field: "v".into(),
                iteration,
            });
        }

        // Steps 4–5: gating equations node by node with v frozen.
        let columns: Vec<Result<Vec<Vec<f64>>>> = (0..nx)
            .into_par_iter()
            .map(|j| {
                let w_init: Vec<f64> = w0.iter().map(|w| w[j]).collect();
                let traj = integrate_rk45(
                    |t, w, dw| {
                        let vt = v.interp_unchecked(tmesh, t, j);
                        for k in 0..gates {
                            let (h1, h2) = coupling.gate_rates(k, vt);
                            dw[k] = -h1 * w[k] + h2;
                        }
                    },
                    &w_init,
                    span,
                    tmesh,
                    tol,
                    OutputMode::Stop,
                )?;
                Ok((0..nt).map(|i| traj.state(i).to_vec()).collect())
            })
            .collect();
        for (j, column) in columns.into_iter().enumerate() {
            let column = column.map_err(|e| Error::InnerSolver {
                iteration,
                source: Box::new(e),
            })?;
            for (i, w) in column.iter().enumerate() {
                for k in 0..gates {
                    gating[k].set(i, j, w[k]);
                }
            }
        }
        let names = coupling.gate_names();
        for (k, field) in gating.iter().enumerate() {
            if !field.all_finite() {
                return Err(Error::NonFinite {
                    field: names[k].clone(),
                    iteration,
                });
            }
        }

        // Step 6: stopping criteria.
        let residual = v.sup_distance(&v_prev);
        residual_trace.push(residual);
        v_prev = v;
        let elapsed = start.elapsed().as_secs_f64();
        let stop = if residual < settings.threshold {
            Some(StopReason::Converged)
        } else if iteration >= settings.max_iterations {
            Some(StopReason::MaxIterations)
        } else if elapsed > settings.time_budget {
            Some(StopReason::TimeBudget)
        } else {
            None
        };
        if let Some(stop_reason) = stop {
            return Ok(SimulationResult {
                mesh: mesh.clone(),
                v: v_prev,
                gating,
                gating_names: names,
                iterations: iteration,
                residual_trace,
                stop_reason,
                elapsed,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reduced(model: ReducedModel, rho: f64, v0: f64, w0: f64, t_end: f64) -> ReducedScenario {
        ReducedScenario {
            model,
            mesh: Mesh::new(1.0, t_end, 5, 101).unwrap(),
            delta: 0.1,
            rho,
            epsilon: 1e-4,
            v0: InitialPotential::Constant { value: v0 },
            w0,
            target: TargetTrajectory::Constant { value: 0.0 },
        }
    }

    #[test]
    fn reduced_linear_decay() {
        let c = 2.0;
        let p = reduced(ReducedModel::constant(1.0, 0.0, 1.0, 0.5), 0.0, c, 0.3, 2.0);
        let r = run_reduced(&p, &IterationSettings::default()).unwrap();
        assert!(r.converged());
        for (i, &t) in p.mesh.tmesh().iter().enumerate() {
            for j in 0..p.mesh.max_x() {
                let err = (r.v.get(i, j) - c * (-t).exp()).abs();
                assert!(err < 1e-3, "t={t} err={err:e}");
            }
        }
    }

    #[test]
    fn reduced_invariant_region() {
        let w_max = 0.5;
        let p = reduced(ReducedModel::constant(1.0, 0.0, 1.0, w_max), 0.0, 0.0, w_max, 2.0);
        let r = run_reduced(&p, &IterationSettings::default()).unwrap();
        let w = r.gating_field("w").unwrap();
        assert!(w.max() <= w_max + 1e-12);
    }

    #[test]
    fn residual_trace_matches_iterations() {
        let p = reduced(ReducedModel::constant(1.0, 0.5, 1.0, 0.5), 3.0, 1.0, 0.2, 2.0);
        let r = run_reduced(&p, &IterationSettings::default()).unwrap();
        assert_eq!(r.residual_trace.len(), r.iterations);
        assert!(*r.residual_trace.last().unwrap() < 1e-3);
    }

    #[test]
    fn iteration_cap_reports_max_iterations() {
        let model = ReducedModel {
            f1: std::sync::Arc::new(|w| 1.0 + w),
            ..ReducedModel::constant(1.0, 0.0, 1.0, 0.5)
        };
        let p = reduced(model, 0.0, 1.0, 0.9, 2.0);
        let settings = IterationSettings {
            max_iterations: 1,
            ..Default::default()
        };
        let r = run_reduced(&p, &settings).unwrap();
        assert_eq!(r.stop_reason, StopReason::MaxIterations);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn invalid_scenario_rejected() {
        let mut s = Scenario {
            params: HHParameters::default(),
            mesh: Mesh::new(1.0, 1.0, 5, 5).unwrap(),
            v0: InitialPotential::Constant { value: 0.0 },
            n0: 1.5,
            m0: 0.0,
            h0: 0.0,
            target: TargetTrajectory::Constant { value: 0.0 },
        };
        assert!(run_simulation(&s, &IterationSettings::default()).is_err());
        s.n0 = 0.5;
        s.target = TargetTrajectory::SpaceProfile { values: vec![0.0; 3] };
        assert!(run_simulation(&s, &IterationSettings::default()).is_err());
    }

    #[test]
    fn target_norms() {
        let mesh = Mesh::new(1.0, 10.0, 5, 11).unwrap();
        let t = TargetTrajectory::TimeSinusoid {
            amplitude: 0.5,
            frequency: 3.0,
            offset: 0.6,
        };
        let n = t.norms(&mesh).unwrap();
        assert_eq!(n.dt_sup, 1.5);
        assert_eq!(n.dxx_sup, 0.0);
        assert!((n.sup - 1.1).abs() < 1e-15);
        let c = TargetTrajectory::Constant { value: -2.0 }.norms(&mesh).unwrap();
        assert_eq!((c.dt_sup, c.dxx_sup, c.sup), (0.0, 0.0, 2.0));
        // quadratic profile x²: ghost-node second difference is 2 inside,
        // 2·(x₁² − x₀²)/dx² = 2 at the left end and larger at the right end
        let values: Vec<f64> = mesh.xmesh().iter().map(|x| x * x).collect();
        let p = TargetTrajectory::SpaceProfile { values }.norms(&mesh).unwrap();
        assert!(p.dxx_sup >= 2.0);
        assert_eq!(p.sup, 1.0);
    }

    fn small_preset(name: &str, horizon: f64) -> Scenario {
        let mut s = crate::presets::preset(name).unwrap().scenario;
        s.mesh = Mesh::new(1.0, horizon, 9, 41).unwrap();
        s
    }

    /// Resting potential of the space-clamped membrane, by bisection on
    /// `f2(w∞(v)) − f1(w∞(v))·v`.
    fn resting_potential(p: &HHParameters) -> f64 {
        let g = |v: f64| {
            let [n, m, h] = GatingKind::ALL.map(|k| model::gating_steady_state(k, v).unwrap());
            model::f2(n, m, h, p) - model::f1(n, m, h, p) * v
        };
        let (mut lo, mut hi) = (-5.0, 5.0);
        assert!(g(lo) > 0.0 && g(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn resting_state_is_a_fixed_point() {
        let params = HHParameters::default();
        let v_eq = resting_potential(&params);
        assert!(v_eq.abs() < 0.01, "{v_eq}");
        let [n0, m0, h0] = GatingKind::ALL.map(|k| model::gating_steady_state(k, v_eq).unwrap());
        let s = Scenario {
            params,
            mesh: Mesh::new(1.0, 20.0, 9, 41).unwrap(),
            v0: InitialPotential::Constant { value: v_eq },
            n0,
            m0,
            h0,
            target: TargetTrajectory::Constant { value: 0.0 },
        };
        let r = run_simulation(&s, &IterationSettings::default()).unwrap();
        assert!(r.converged());
        let drift = r.v.values().iter().fold(0.0f64, |m, v| m.max((v - v_eq).abs()));
        assert!(drift < 1e-5, "drift {drift:e}");
    }

    #[test]
    fn deterministic() {
        let s = small_preset("fig2", 10.0);
        let a = run_simulation(&s, &IterationSettings::default()).unwrap();
        let b = run_simulation(&s, &IterationSettings::default()).unwrap();
        assert_eq!(a.v, b.v);
        assert_eq!(a.gating, b.gating);
        assert_eq!(a.residual_trace, b.residual_trace);
    }

    #[test]
    fn constant_data_stays_uniform_in_space() {
        for name in ["fig1", "fig3"] {
            let r = run_simulation(&small_preset(name, 20.0), &IterationSettings::default()).unwrap();
            for field in std::iter::once(&r.v).chain(&r.gating) {
                for i in 0..field.n_t() {
                    let row = field.row(i);
                    let spread = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
                        - row.iter().fold(f64::INFINITY, |m, &v| m.min(v));
                    assert!(spread < 1e-4, "{name}: spread {spread:e}");
                }
            }
        }
    }

    #[test]
    fn gating_stays_in_unit_box() {
        for name in ["fig4", "fig6"] {
            let r = run_simulation(&small_preset(name, 20.0), &IterationSettings::default()).unwrap();
            assert_eq!(r.gating_names, ["n", "m", "h"]);
            for g in &r.gating {
                assert!(g.min() >= -1e-9 && g.max() <= 1.0 + 1e-9, "{name}");
            }
        }
    }

    #[test]
    fn time_budget_stops_the_loop() {
        let settings = IterationSettings {
            time_budget: 1e-12,
            ..Default::default()
        };
        let r = run_simulation(&small_preset("fig1", 20.0), &settings).unwrap();
        assert_eq!(r.stop_reason, StopReason::TimeBudget);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn non_finite_coefficients_fail() {
        let model = ReducedModel {
            f2: std::sync::Arc::new(|_| f64::NAN),
            ..ReducedModel::constant(1.0, 0.0, 1.0, 0.5)
        };
        let p = reduced(model, 0.0, 1.0, 0.5, 1.0);
        assert!(run_reduced(&p, &IterationSettings::default()).is_err());
    }
}
