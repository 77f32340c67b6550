//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with
//! a failure status if any criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use hh_sliding::coupled::{
    run_reduced, run_simulation, InitialPotential, IterationSettings, ReducedScenario,
    SimulationResult, StopReason, TargetTrajectory,
};
use hh_sliding::model::{self, GatingKind, HHParameters, ReducedModel};
use hh_sliding::numerics::{integrate_rk45, laplacian_neumann, Mesh, OutputMode, SolverTolerances};
use hh_sliding::presets::{preset, PRESET_NAMES};
use hh_sliding::relay::SignEpsilon;
use hh_sliding::sliding::{
    analyze_reduced, bound_a, comparison_q, default_band, detect_sliding, deviation_at,
    sliding_time,
};
use hh_sliding::Error;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

struct PresetRun {
    result: Result<SimulationResult, Error>,
    seconds: f64,
}

fn run_presets() -> BTreeMap<&'static str, PresetRun> {
    PRESET_NAMES
        .iter()
        .map(|&name| {
            let scenario = preset(name).unwrap().scenario;
            let start = Instant::now();
            let result = run_simulation(&scenario, &IterationSettings::default());
            let seconds = start.elapsed().as_secs_f64();
            (name, PresetRun { result, seconds })
        })
        .collect()
}

fn closed_form(h1: f64, h2: f64, w0: f64, t: f64) -> f64 {
    (-h1 * t).exp() * w0 + h2 / h1 * (1.0 - (-h1 * t).exp())
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let tol = SolverTolerances::default();
    let t_eval: Vec<f64> = (0..=1000).map(|k| k as f64 * 0.01).collect();
    let mut worst = 0.0f64;
    for v in [-20.0, 0.0, 25.0, 50.0] {
        for kind in GatingKind::ALL {
            let h1 = model::h1k(kind, v).unwrap();
            let h2 = model::h2k(kind, v).unwrap();
            let w0 = 0.3;
            let traj = integrate_rk45(
                |_, w, dw| dw[0] = -h1 * w[0] + h2,
                &[w0],
                (0.0, 10.0),
                &t_eval,
                &tol,
                OutputMode::Dense,
            )
            .unwrap();
            for (k, &t) in t_eval.iter().enumerate() {
                worst = worst.max((traj.state(k)[0] - closed_form(h1, h2, w0, t)).abs());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst < 1e-6 && secs < 1.0,
        format!("max error {worst:.3e} (< 1e-6), {secs:.3} s (< 1 s)"),
    )
}

fn reduced_problem() -> ReducedScenario {
    ReducedScenario {
        model: ReducedModel::constant(1.0, 0.5, 1.0, 0.5),
        mesh: Mesh::new(1.0, 2.0, 25, 201).unwrap(),
        delta: 0.1,
        rho: 3.0,
        epsilon: 1e-4,
        v0: InitialPotential::Constant { value: 1.0 },
        w0: 0.5,
        target: TargetTrajectory::Constant { value: 0.0 },
    }
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let problem = reduced_problem();
    let settings = IterationSettings::default();
    let result = match run_reduced(&problem, &settings) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("solver error: {e}")),
    };
    let secs = start.elapsed().as_secs_f64();
    let bound = analyze_reduced(&problem).unwrap();
    let band = default_band(problem.epsilon, settings.threshold);
    let onset = detect_sliding(&result, &problem.target, band);
    let mut envelope_gap = f64::NEG_INFINITY;
    for (i, &t) in problem.mesh.tmesh().iter().enumerate() {
        let q = bound.envelope(t).unwrap();
        envelope_gap = envelope_gap.max(deviation_at(&result, &problem.target, i) - q - band);
    }
    let onset_ok = onset.is_some_and(|t| t <= 0.70);
    outcome(
        onset_ok && envelope_gap <= 0.0 && secs < 10.0,
        format!(
            "A = {}, T* = {:.6}, onset {:?} (<= 0.70), max(|v| - q - band) = {envelope_gap:.3e} (<= 0), {secs:.2} s (< 10 s)",
            bound.a,
            bound.t_star.unwrap_or(f64::NAN),
            onset
        ),
    )
}

fn spatial_spread(r: &SimulationResult) -> f64 {
    let mut spread = 0.0f64;
    for field in std::iter::once(&r.v).chain(&r.gating) {
        for i in 0..field.n_t() {
            let row = field.row(i);
            let (lo, hi) = row
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            spread = spread.max(hi - lo);
        }
    }
    spread
}

fn criterion_3(runs: &BTreeMap<&str, PresetRun>) -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();

    let (mut gmin, mut gmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for (name, run) in runs {
        match &run.result {
            Ok(r) => {
                for g in &r.gating {
                    gmin = gmin.min(g.min());
                    gmax = gmax.max(g.max());
                }
            }
            Err(e) => {
                pass = false;
                notes.push(format!("{name} failed: {e}"));
            }
        }
    }
    let box_ok = gmin >= -1e-9 && gmax <= 1.0 + 1e-9;
    pass &= box_ok;
    notes.push(format!("gating range [{gmin:.3e}, {gmax:.12}]"));

    let mut worst_spread = 0.0f64;
    for name in ["fig1", "fig2", "fig3", "fig4", "fig5"] {
        if let Ok(r) = &runs[name].result {
            worst_spread = worst_spread.max(spatial_spread(r));
        }
    }
    pass &= worst_spread < 1e-4;
    notes.push(format!("spread fig1-5 {worst_spread:.3e} (< 1e-4)"));

    let s = SignEpsilon::new(1e-4).unwrap();
    let sign_ok = [-5.0, -1e-4, -1e-4 - 1e-12, 1e-4, 2e-4, 7.5, 1e300, -1e300]
        .iter()
        .all(|&r: &f64| s.sign(r) == r.signum());
    pass &= sign_ok;
    notes.push(format!("sign exact outside band: {sign_ok}"));

    let n = 25;
    let dx = 1.0 / (n - 1) as f64;
    let mut flux = 0.0f64;
    for delta in [0.1, 50.0] {
        for profile in [
            (|x: f64| (PI * x).cos()) as fn(f64) -> f64,
            |x: f64| 0.5 * (4.0 * PI * x).sin() + 0.6,
            |x: f64| x * x * (1.0 - x),
        ] {
            let u: Vec<f64> = (0..n).map(|j| profile(j as f64 * dx)).collect();
            let lap = laplacian_neumann(&u, dx, delta).unwrap();
            let total: f64 = lap
                .iter()
                .enumerate()
                .map(|(j, v)| if j == 0 || j == n - 1 { 0.5 * dx * v } else { dx * v })
                .sum();
            flux = flux.max(total.abs());
        }
    }
    pass &= flux < 1e-12;
    notes.push(format!("flux balance {flux:.3e} (< 1e-12)"));
    outcome(pass, notes.join(", "))
}

fn criterion_4(runs: &BTreeMap<&str, PresetRun>) -> Outcome {
    let (Ok(r1), Ok(r2)) = (&runs["fig1"].result, &runs["fig2"].result) else {
        return outcome(false, "fig1 or fig2 failed".into());
    };
    let p = HHParameters::default();
    let band = default_band(p.epsilon, IterationSettings::default().threshold);
    let target = TargetTrajectory::Constant { value: 0.0 };
    let vmax = r1.v.max();
    let t1 = detect_sliding(r1, &target, band);
    let t2 = detect_sliding(r2, &target, band);
    let earlier = match (t2, t1) {
        (Some(a), Some(b)) => a < b,
        (Some(_), None) => true,
        _ => false,
    };
    let (s1, s2) = (runs["fig1"].seconds, runs["fig2"].seconds);
    outcome(
        r1.converged() && vmax < 30.0 && earlier && s1 < 60.0 && s2 < 60.0,
        format!(
            "fig1 {:?}, max v {vmax:.3} (< 30), time to band {} vs fig2 onset {}, runtimes {s1:.2} s / {s2:.2} s (< 60 s)",
            r1.stop_reason,
            t1.map_or("never".into(), |t| format!("{t:.4}")),
            t2.map_or("never".into(), |t| format!("{t:.4}")),
        ),
    )
}

fn criterion_5(runs: &BTreeMap<&str, PresetRun>) -> Outcome {
    let (Ok(r4), Ok(r5)) = (&runs["fig4"].result, &runs["fig5"].result) else {
        return outcome(false, "fig4 or fig5 failed".into());
    };
    let s5 = preset("fig5").unwrap().scenario;
    let band = default_band(s5.params.epsilon, IterationSettings::default().threshold);
    let vmax = r4.v.max();
    let half = 0.5 * s5.mesh.horizon();
    let late = s5
        .mesh
        .tmesh()
        .iter()
        .enumerate()
        .filter(|(_, &t)| t > half)
        .map(|(i, _)| deviation_at(r5, &s5.target, i))
        .fold(0.0, f64::max);
    outcome(
        vmax > 50.0 && late <= band,
        format!("fig4 max v {vmax:.3} (> 50), fig5 late deviation {late:.3e} (<= {band:.4e})"),
    )
}

fn criterion_6(runs: &BTreeMap<&str, PresetRun>) -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    for (name, run) in runs {
        match &run.result {
            Ok(r) => {
                pass &= r.stop_reason == StopReason::Converged && r.iterations <= 100;
                notes.push(format!("{name} {:?}/{}", r.stop_reason, r.iterations));
            }
            Err(e) => {
                pass = false;
                notes.push(format!("{name} error {e}"));
            }
        }
    }
    outcome(pass, notes.join(", "))
}

fn criterion_7(runs: &BTreeMap<&str, PresetRun>) -> Outcome {
    let Ok(coarse) = &runs["fig2"].result else {
        return outcome(false, "fig2 failed".into());
    };
    let mut scenario = preset("fig2").unwrap().scenario;
    scenario.mesh = scenario.mesh.refined().unwrap();
    let fine = match run_simulation(&scenario, &IterationSettings::default()) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("refined run failed: {e}")),
    };
    let mut diff = 0.0f64;
    for i in 0..coarse.v.n_t() {
        for j in 0..coarse.v.n_x() {
            diff = diff.max((coarse.v.get(i, j) - fine.v.get(2 * i, 2 * j)).abs());
        }
    }
    outcome(
        fine.converged() && diff < 5e-2,
        format!(
            "maxX {} -> {}, maxT {} -> {}, max difference at shared nodes {diff:.3e} (< 5e-2)",
            coarse.mesh.max_x(),
            fine.mesh.max_x(),
            coarse.mesh.max_t(),
            fine.mesh.max_t()
        ),
    )
}

fn criterion_8() -> Outcome {
    let norms = hh_sliding::coupled::TargetNorms {
        dt_sup: 0.0,
        dxx_sup: 0.0,
        sup: 0.0,
    };
    let a = bound_a(&norms, 1.0, 1.0, 0.5, 0.1);
    let t_star = sliding_time(3.0, a, 1.0).unwrap();
    let q0 = comparison_q(0.0, 3.0, a, 1.0).unwrap();
    let q_half = comparison_q(t_star / 2.0, 3.0, a, 1.0).unwrap();
    let q_star = comparison_q(t_star, 3.0, a, 1.0).unwrap();
    let rejects = matches!(sliding_time(1.5, a, 1.0), Err(Error::ConditionViolated { .. }))
        && matches!(sliding_time(1.0, a, 1.0), Err(Error::ConditionViolated { .. }));
    let pass = (a - 1.5).abs() < 1e-12
        && (t_star - 2.0 / 3.0).abs() < 1e-12
        && (q0 - 1.0).abs() < 1e-12
        && (q_half - 0.5).abs() < 1e-12
        && q_star == 0.0
        && rejects;
    outcome(
        pass,
        format!("A = {a}, T* = {t_star}, q(0) = {q0}, q(T*/2) = {q_half}, q(T*) = {q_star}, rejects rho <= A: {rejects}"),
    )
}

fn main() {
    let runs = run_presets();
    let criteria: Vec<(&str, Outcome)> = vec![
        ("1 gating oracle", criterion_1()),
        ("2 reduced sliding check", criterion_2()),
        ("3 invariant suite", criterion_3(&runs)),
        ("4 fig1/fig2 reproduction", criterion_4(&runs)),
        ("5 fig4/fig5 reproduction", criterion_5(&runs)),
        ("6 convergence contract", criterion_6(&runs)),
        ("7 self-convergence", criterion_7(&runs)),
        ("8 analysis arithmetic", criterion_8()),
    ];
    let mut failed = 0;
    for (name, o) in &criteria {
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
