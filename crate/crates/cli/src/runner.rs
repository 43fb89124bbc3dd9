//! Executes a resolved [`RunConfig`]: builds the initial state, steps it,
//! evaluates the enabled checks and writes the artifacts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use lagflow::density::{InterfaceMarkers, Region};
use lagflow::diagnostics::{
    decay_check, decay_holds, energy_report, fit_decay, lagrangian_roundtrip, lambda1, stokes_estimate,
    windowed_norms, DiagnosticsReport, Recorder, StepRecord, C_LADY, STOKES_RATIO_CEILING,
};
use lagflow::lift::{
    compatibility_phi, compatibility_phi_oracle, solve_twisted_divergence, TwistedDivProblem, CONTRACTION_THRESHOLD,
};
use lagflow::scenarios::{
    default_disk, perturbed_identity, random_band_limited, random_solenoidal, rng, shear_mode, taylor_green,
    taylor_green_exact,
};
use lagflow::spectral::gradient;
use lagflow::stokes::{solve_evolutionary_stokes, step_variable_density, EvolutionaryStokes, SimState};
use lagflow::{Density, Grid, ScalarField, Snapshot, VectorField};
use log::info;
use rand::Rng;
use serde::Serialize;

use crate::config::{Check, DensitySpec, RunConfig, VelocitySpec};
use crate::error::CliError;

/// Column order of `trajectory.csv`.
pub const TRAJECTORY_HEADER: &str =
    "t,energy,weighted_energy,enstrophy,max_grad_v,smallness_integral,picard_iters,div_residual";
/// Column order of `markers.csv`.
pub const MARKERS_HEADER: &str = "t,index,x1,x2";

const MARKER_COUNT: usize = 256;

/// Result of one check.
#[derive(Clone, Debug, Serialize)]
pub struct Outcome {
    pub check: Check,
    pub citation: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl Outcome {
    fn new(check: Check, pass: bool, detail: String) -> Self {
        Self {
            check,
            citation: check.citation(),
            pass,
            detail,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub outcomes: Vec<Outcome>,
    pub warnings: Vec<String>,
    pub output_dir: PathBuf,
}

impl RunSummary {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.pass)
    }
}

/// Lines printed by `simulate validate`.
pub fn describe(cfg: &RunConfig) -> (Vec<String>, Vec<String>) {
    let lines = cfg.checks.iter().map(|c| c.citation().to_string()).collect();
    let mut warnings = Vec::new();
    if cfg.checks.is_empty() {
        warnings.push("no checks enabled: the run will always pass".to_string());
    }
    if cfg.density.jump_ratio() > cfg.solver_config().jump_cap {
        warnings.push(format!(
            "jump_ratio {} exceeds jump_cap {} — see smallness condition den-str",
            cfg.density.jump_ratio(),
            cfg.solver_config().jump_cap
        ));
    }
    (lines, warnings)
}

pub fn run(cfg: &RunConfig, out: &Path) -> Result<RunSummary, CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::output(out, e))?;
    let grid = Grid::new(cfg.grid.n, cfg.grid.length).map_err(|e| CliError::Config(e.to_string()))?;
    let mut summary = RunSummary {
        outcomes: Vec::new(),
        warnings: describe(cfg).1,
        output_dir: out.to_path_buf(),
    };
    let v0 = initial_velocity(cfg, &grid);
    let mut extra = serde_json::Map::new();
    if cfg.scenario.is_time_dependent() {
        let log = time_dependent(cfg, &grid, v0.clone(), out)?;
        summary.warnings.extend(log.warnings.iter().cloned());
        summary.outcomes.extend(run_checks(cfg, &log));
        let report = DiagnosticsReport {
            roundtrip_residuals: log.roundtrip.clone(),
            ..DiagnosticsReport::from_records(&log.records, cfg.nu, cfg.eta_star, cfg.grid.length, cfg.window)
        }
        .thin(cfg.time.report_every);
        write_file(&out.join("report.csv"), |w| report.write_csv(w))?;
        extra.insert("diagnostics".into(), to_value(&report));
    }
    for check in &cfg.checks {
        match check {
            Check::FixedPointContraction => {
                let (o, data) = twisted_demo(cfg, &grid, out)?;
                summary.outcomes.push(o);
                extra.insert("twisted_divergence".into(), data);
            }
            Check::CompatibilityCorrector => summary.outcomes.push(compatibility(&v0)),
            Check::StokesScaling => {
                let (o, data) = stokes_scaling(cfg, &grid, out)?;
                summary.outcomes.push(o);
                extra.insert("stokes_scaling".into(), data);
            }
            _ => {}
        }
    }
    let report = serde_json::json!({
        "scenario": cfg.scenario,
        "config": cfg,
        "passed": summary.passed(),
        "checks": summary.outcomes,
        "warnings": summary.warnings,
        "results": extra,
    });
    write_file(&out.join("report.json"), |mut w| {
        serde_json::to_writer_pretty(&mut w, &report)?;
        writeln!(w)?;
        Ok(())
    })?;
    Ok(summary)
}

fn to_value(x: &impl Serialize) -> serde_json::Value {
    serde_json::to_value(x).unwrap_or(serde_json::Value::Null)
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> lagflow::Result<()>) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::output(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).map_err(|e| CliError::output(path, e))?;
    w.flush().map_err(|e| CliError::output(path, e))
}

fn initial_velocity(cfg: &RunConfig, grid: &Grid<f64>) -> VectorField<f64> {
    match cfg.initial_velocity {
        VelocitySpec::TaylorGreen { amplitude } => taylor_green(grid, amplitude),
        VelocitySpec::Shear { amplitude } => shear_mode(grid, amplitude),
        VelocitySpec::Random { amplitude, k_max, slope } => {
            random_solenoidal(grid, k_max, slope, &mut rng(cfg.seed)).scale(amplitude)
        }
    }
}

fn initial_density(spec: &DensitySpec, grid: &Grid<f64>) -> lagflow::Result<Density<f64>> {
    match spec {
        DensitySpec::Constant { m } => Density::constant(*m),
        DensitySpec::Disk { m, jump, center, radius } => {
            let Region::Disk {
                center: c0,
                radius: r0,
            } = default_disk(grid)
            else {
                unreachable!("default region is a disk")
            };
            let region = Region::Disk {
                center: center.unwrap_or(c0),
                radius: radius.unwrap_or(r0),
            };
            Density::piecewise_constant(*m, jump * m, region)
        }
        DensitySpec::Rectangle { m, jump, lo, hi } => {
            Density::piecewise_constant(*m, jump * m, Region::Rectangle { lo: *lo, hi: *hi })
        }
    }
}

/// What a time-dependent run leaves behind for the checks.
struct RunLog {
    records: Vec<StepRecord>,
    final_state: SimState<f64>,
    det_max: f64,
    jacobian_bound_ok: bool,
    inverse_bound_ok: bool,
    density_values_ok: bool,
    density_extrema_ok: bool,
    marker_drift: Option<f64>,
    roundtrip: Vec<(f64, f64)>,
    warnings: Vec<String>,
}

struct Artifacts {
    trajectory: BufWriter<File>,
    markers: Option<BufWriter<File>>,
    snapshots: Option<PathBuf>,
    dir: PathBuf,
}

impl Artifacts {
    fn open(cfg: &RunConfig, out: &Path, with_markers: bool) -> Result<Self, CliError> {
        let create = |name: &str| {
            let path = out.join(name);
            File::create(&path)
                .map(BufWriter::new)
                .map_err(|e| CliError::output(path, e))
        };
        let mut trajectory = create("trajectory.csv")?;
        writeln!(trajectory, "{TRAJECTORY_HEADER}").map_err(|e| CliError::output(out.join("trajectory.csv"), e))?;
        let markers = if with_markers {
            let mut w = create("markers.csv")?;
            writeln!(w, "{MARKERS_HEADER}").map_err(|e| CliError::output(out.join("markers.csv"), e))?;
            Some(w)
        } else {
            None
        };
        let snapshots = if cfg.snapshots {
            let dir = out.join("snapshots");
            fs::create_dir_all(&dir).map_err(|e| CliError::output(&dir, e))?;
            Some(dir)
        } else {
            None
        };
        Ok(Self {
            trajectory,
            markers,
            snapshots,
            dir: out.to_path_buf(),
        })
    }

    fn report(
        &mut self,
        rec: &StepRecord,
        state: &SimState<f64>,
        markers: Option<&InterfaceMarkers<f64>>,
    ) -> Result<(), CliError> {
        let io = |dir: &Path, name: &str| {
            let path = dir.join(name);
            move |e: std::io::Error| CliError::output(path, e)
        };
        writeln!(
            self.trajectory,
            "{:e},{:e},{:e},{:e},{:e},{:e},{},{:e}",
            rec.t,
            rec.energy,
            rec.weighted_energy,
            rec.enstrophy,
            rec.max_grad_v,
            rec.smallness_integral,
            rec.picard_iters,
            rec.div_residual
        )
        .map_err(io(&self.dir, "trajectory.csv"))?;
        if let (Some(w), Some(m)) = (self.markers.as_mut(), markers) {
            for (i, p) in m.points().iter().enumerate() {
                writeln!(w, "{:e},{i},{:e},{:e}", rec.t, p[0], p[1]).map_err(io(&self.dir, "markers.csv"))?;
            }
        }
        if let Some(dir) = &self.snapshots {
            let stem = format!("{:06}", state.step);
            for (name, snap) in [
                (format!("velocity_{stem}.txt"), Snapshot::Vector(state.v.clone())),
                (format!("pressure_gradient_{stem}.txt"), Snapshot::Vector(state.grad_q.clone())),
                (format!("density_{stem}.txt"), Snapshot::Scalar(state.rho.clone())),
            ] {
                let path = dir.join(name);
                snap.save(&path).map_err(|e| CliError::output(path, e))?;
            }
            state
                .fm
                .save(dir, &format!("flow_map_{stem}"))
                .map_err(|e| CliError::output(dir, e))?;
        }
        Ok(())
    }

    fn finish(mut self) -> Result<(), CliError> {
        self.trajectory
            .flush()
            .map_err(|e| CliError::output(self.dir.join("trajectory.csv"), e))?;
        if let Some(w) = self.markers.as_mut() {
            w.flush().map_err(|e| CliError::output(self.dir.join("markers.csv"), e))?;
        }
        Ok(())
    }
}

fn time_dependent(cfg: &RunConfig, grid: &Grid<f64>, v0: VectorField<f64>, out: &Path) -> Result<RunLog, CliError> {
    let solver = cfg.solver_config();
    let dt = solver.dt;
    let rho0 = initial_density(&cfg.density, grid).map_err(|e| CliError::Config(e.to_string()))?;
    let region = match &rho0 {
        Density::PiecewiseConstant { region, .. } if !rho0.is_constant() => Some(region.clone()),
        _ => None,
    };
    let mut markers = match region.as_ref().and_then(|r| InterfaceMarkers::for_region(r, MARKER_COUNT)) {
        Some(Ok(m)) => Some(m),
        Some(Err(e)) => return Err(CliError::Config(format!("interface markers: {e}"))),
        None => None,
    };
    let area0 = markers.as_ref().and_then(|m| m.enclosed_area().ok());
    let mut state = SimState::new(v0, rho0, solver).map_err(|e| CliError::solver(0.0, e))?;
    let (lo, hi) = (state.rho0.inf(), state.rho0.sup());
    let (min0, max0) = (state.rho.min(), state.rho.max());
    let mut art = Artifacts::open(cfg, out, markers.is_some())?;
    let mut rec = Recorder::new(&state);
    let mut log = RunLog {
        records: Vec::new(),
        final_state: state.clone(),
        det_max: 0.0,
        jacobian_bound_ok: true,
        inverse_bound_ok: true,
        density_values_ok: true,
        density_extrema_ok: true,
        marker_drift: area0.map(|_| 0.0),
        roundtrip: Vec::new(),
        warnings: Vec::new(),
    };
    art.report(&rec.records()[0], &state, markers.as_ref())?;
    let mut pending_roundtrip: Option<(SimState<f64>, SimState<f64>)> = None;
    let steps = cfg.steps();
    let mut failure = None;
    for k in 1..=steps {
        let (next, step_info) = match step_variable_density(&state) {
            Ok(x) => x,
            Err(e) => {
                failure = Some(CliError::solver(state.t, e));
                break;
            }
        };
        if next.smallness_flagged && !state.smallness_flagged {
            let msg = format!(
                "smallness integral exceeded cap {} at t = {:.4}; the flow-map bounds may not hold from here on",
                cfg.solver_config().smallness_cap,
                next.t
            );
            log.warnings.push(msg);
        }
        if let Some(m) = markers.as_mut() {
            *m = m.advect_between(&state.v, &next.v, dt, cfg.solver_config().flow_interp);
            if let (Some(a0), Some(drift)) = (area0, log.marker_drift.as_mut()) {
                match m.enclosed_area() {
                    Ok(a) => *drift = drift.max((a - a0).abs() / a0),
                    Err(_) => *drift = f64::INFINITY,
                }
            }
        }
        if let Some((p, c)) = pending_roundtrip.take() {
            if let Ok(r) = lagrangian_roundtrip(&p, &c, &next) {
                log.roundtrip.push((c.t, r));
            }
        }
        let prev = std::mem::replace(&mut state, next);
        rec.record(&state, Some(&step_info));
        match state.fm.invariants() {
            Ok(inv) => {
                log.det_max = log.det_max.max(inv.det_deviation);
                log.jacobian_bound_ok &= inv.jacobian_bound_holds();
                log.inverse_bound_ok &= inv.inverse_bound_holds();
            }
            Err(e) => {
                failure = Some(CliError::solver(state.t, e));
                break;
            }
        }
        if !state.rho0.is_constant() {
            log.density_values_ok &= state.rho.values().iter().all(|&r| r == lo || r == hi);
        }
        log.density_extrema_ok &= state.rho.min() == min0 && state.rho.max() == max0;
        if k % cfg.time.report_every == 0 {
            art.report(rec.records().last().unwrap(), &state, markers.as_ref())?;
            if k < steps {
                pending_roundtrip = Some((prev, state.clone()));
            }
            info!("t = {:.4}, energy {:.6e}", state.t, rec.records().last().unwrap().energy);
        }
    }
    art.finish()?;
    if let Some(e) = failure {
        return Err(e);
    }
    log.records = rec.into_records();
    log.final_state = state;
    Ok(log)
}

fn max(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

fn run_checks(cfg: &RunConfig, log: &RunLog) -> Vec<Outcome> {
    let tol = &cfg.tolerances;
    let records = &log.records;
    cfg.checks
        .iter()
        .filter(|c| c.needs_run())
        .map(|&check| match check {
            Check::AnalyticSolution => {
                let s = &log.final_state;
                let VelocitySpec::TaylorGreen { amplitude } = cfg.initial_velocity else {
                    unreachable!("validated in config")
                };
                let exact = taylor_green_exact(s.grid(), amplitude, cfg.nu, s.rho0.inf(), s.t);
                let err = (&s.v - &exact).l2_norm() / exact.l2_norm();
                let e_exact = exact.inner(&exact);
                let energy_err = (s.v.inner(&s.v) - e_exact).abs() / e_exact;
                Outcome::new(
                    check,
                    err <= tol.analytic && energy_err <= tol.analytic,
                    format!(
                        "relative L2 velocity error {err:.3e}, energy error {energy_err:.3e} at t = {:.4} (tol {:.1e})",
                        s.t, tol.analytic
                    ),
                )
            }
            Check::EnergyEquality => {
                let r = max(energy_report(records));
                Outcome::new(
                    check,
                    r <= tol.energy,
                    format!("max energy residual {r:.3e} (tol {:.1e})", tol.energy),
                )
            }
            Check::DecayBound => {
                let margins = decay_check(records, cfg.nu, cfg.eta_star, lambda1(cfg.grid.length));
                let ok = decay_holds(records, &margins, tol.decay);
                let worst = margins[1..].iter().copied().fold(f64::INFINITY, f64::min) / records[0].weighted_energy;
                Outcome::new(
                    check,
                    ok,
                    format!("min margin / E_w(0) for t > 0 {worst:.3e}, eta_star {}", cfg.eta_star),
                )
            }
            Check::FlowMapInvariants => Outcome::new(
                check,
                log.det_max <= tol.det && log.jacobian_bound_ok && log.inverse_bound_ok,
                format!(
                    "max|det - 1| {:.2e} (tol {:.1e}), Jacobian bound {}, inverse bound {}",
                    log.det_max, tol.det, log.jacobian_bound_ok, log.inverse_bound_ok
                ),
            ),
            Check::DensityStructure => {
                let drift = log.marker_drift.unwrap_or(0.0);
                Outcome::new(
                    check,
                    log.density_values_ok && log.density_extrema_ok && drift <= tol.marker_area,
                    format!(
                        "value set {{m, m+σ}} {}, extrema preserved {}, marker area drift {drift:.2e} (tol {:.1e})",
                        log.density_values_ok, log.density_extrema_ok, tol.marker_area
                    ),
                )
            }
            Check::Incompressibility => {
                let d = max(records.iter().map(|r| r.div_residual));
                Outcome::new(
                    check,
                    d <= tol.divergence,
                    format!("max ‖div v‖/‖v‖ {d:.2e} (tol {:.1e})", tol.divergence),
                )
            }
            Check::Ladyzhenskaya => {
                let r = max(records.iter().filter_map(|r| r.ladyzhenskaya_ratio));
                Outcome::new(check, r <= C_LADY, format!("max ratio {r:.4} (constant {C_LADY})"))
            }
            Check::WindowedDecay => {
                let mk = windowed_norms(records, cfg.window);
                match fit_decay(&mk) {
                    Some(fit) => Outcome::new(
                        check,
                        fit.rate > 0.0 && fit.r_squared >= tol.fit_r_squared,
                        format!(
                            "{} windows, rate {:.4}, R² {:.4} (min {})",
                            mk.len(),
                            fit.rate,
                            fit.r_squared,
                            tol.fit_r_squared
                        ),
                    ),
                    None => Outcome::new(check, false, format!("{} windows: too few to fit", mk.len())),
                }
            }
            Check::FixedPointContraction | Check::CompatibilityCorrector | Check::StokesScaling => {
                unreachable!("filtered above")
            }
        })
        .collect()
}

fn twisted_demo(cfg: &RunConfig, grid: &Grid<f64>, out: &Path) -> Result<(Outcome, serde_json::Value), CliError> {
    let check = Check::FixedPointContraction;
    let r = random_band_limited(grid, 4, 1.0, &mut rng(cfg.seed));
    let a = perturbed_identity(grid, cfg.contraction);
    let tol = 1e-8;
    let problem = TwistedDivProblem::new(r, a)
        .map_err(|e| CliError::Config(e.to_string()))?
        .with_tol(tol)
        .with_max_iter(40);
    let sol = solve_twisted_divergence(&problem).map_err(|e| CliError::solver(0.0, e))?;
    write_file(&out.join("convergence.csv"), |w| {
        writeln!(w, "iteration,residual,increment")?;
        for (i, (r, d)) in sol.residuals.iter().zip(&sol.increments).enumerate() {
            writeln!(w, "{},{r:e},{d:e}", i + 1)?;
        }
        Ok(())
    })?;
    if cfg.snapshots {
        let path = out.join("twisted_solution.txt");
        Snapshot::Vector(sol.u.clone())
            .save(&path)
            .map_err(|e| CliError::output(path, e))?;
    }
    let ratio = sol.max_step_ratio();
    let bound = cfg.contraction + 0.1;
    let pass = sol.residual <= tol && ratio <= bound;
    let detail = format!(
        "‖A - Id‖ {:.3} (threshold {CONTRACTION_THRESHOLD}), residual {:.2e} in {} iterations, contraction ratio {ratio:.3} (max {bound:.2})",
        cfg.contraction, sol.residual, sol.iterations
    );
    let data = serde_json::json!({
        "contraction_norm": cfg.contraction,
        "iterations": sol.iterations,
        "residual": sol.residual,
        "contraction_ratio": ratio,
        "residuals": sol.residuals,
    });
    Ok((Outcome::new(check, pass, detail), data))
}

fn compatibility(v0: &VectorField<f64>) -> Outcome {
    let check = Check::CompatibilityCorrector;
    match compatibility_phi(v0) {
        Ok(phi) => {
            let gap = (&phi - &compatibility_phi_oracle(v0)).linf_norm();
            Outcome::new(
                check,
                gap <= 1e-10,
                format!("‖φ‖ {:.3e}, gap to independent evaluation {gap:.2e}", phi.linf_norm()),
            )
        }
        Err(e) => Outcome::new(check, false, format!("corrector failed: {e}")),
    }
}

#[derive(Serialize)]
struct ScalingRow {
    sample: usize,
    nu: f64,
    m: f64,
    lhs: f64,
    rhs: f64,
    ratio: f64,
}

fn stokes_scaling(cfg: &RunConfig, grid: &Grid<f64>, out: &Path) -> Result<(Outcome, serde_json::Value), CliError> {
    let check = Check::StokesScaling;
    let mut r = rng(cfg.seed);
    let (dt, steps) = (cfg.time.dt, cfg.steps());
    let zero = |_t: f64| VectorField::zeros(grid);
    let mut rows = Vec::new();
    for sample in 0..cfg.samples {
        let sol = random_solenoidal(grid, 4, 1.0, &mut r);
        let phase = [r.gen_range(0.0..std::f64::consts::TAU), r.gen_range(0.0..std::f64::consts::TAU)];
        let kappa = grid.kappa();
        let grad = gradient(&ScalarField::from_fn(grid, |x: f64, y: f64| {
            (kappa * x + phase[0]).sin() * (kappa * y + phase[1]).cos()
        }));
        let (w, om): (f64, f64) = (r.gen_range(0.5..1.5), r.gen_range(0.0..6.0));
        let forcing = move |t: f64| {
            let mut f = sol.scale(1.0 + w * (om * t).sin());
            f.axpy(w, &grad);
            f
        };
        for nu in [0.1, 1.0, 10.0] {
            for m in [0.5, 1.0, 2.0] {
                let p = EvolutionaryStokes {
                    m,
                    nu,
                    dt,
                    steps,
                    forcing: &forcing,
                    lift_data: &zero,
                    div_tol: 1e-10,
                };
                let traj = solve_evolutionary_stokes(&p, &VectorField::zeros(grid)).map_err(|e| CliError::solver(0.0, e))?;
                let est = stokes_estimate(&traj, m, nu, &forcing, &zero).map_err(|e| CliError::solver(0.0, e))?;
                rows.push(ScalingRow {
                    sample,
                    nu,
                    m,
                    lhs: est.lhs,
                    rhs: est.rhs,
                    ratio: est.ratio,
                });
            }
        }
    }
    write_file(&out.join("scaling.csv"), |w| {
        writeln!(w, "sample,nu,m,lhs,rhs,ratio")?;
        for r in &rows {
            writeln!(w, "{},{},{},{:e},{:e},{:e}", r.sample, r.nu, r.m, r.lhs, r.rhs, r.ratio)?;
        }
        Ok(())
    })?;
    let lo = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let hi = max(rows.iter().map(|r| r.ratio));
    let pass = hi / lo < 3.0 && hi <= STOKES_RATIO_CEILING;
    let detail = format!(
        "{} runs, ratio in [{lo:.3}, {hi:.3}], spread {:.2} (max 3), ceiling {STOKES_RATIO_CEILING:.4}",
        rows.len(),
        hi / lo
    );
    let data = serde_json::json!({ "min_ratio": lo, "max_ratio": hi, "runs": rows });
    Ok((Outcome::new(check, pass, detail), data))
}
