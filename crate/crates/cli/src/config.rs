//! Run configuration: JSON on disk, resolved against per-scenario defaults.

use std::path::{Path, PathBuf};

use lagflow::stokes::{Scheme, SolverConfig};
use lagflow::Interpolation;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    TaylorGreen,
    DensityDisk,
    DecayExperiment,
    TwistedDivergenceDemo,
    StokesScaling,
    Custom,
}

impl Scenario {
    /// Scenarios that step the full solver in time.
    pub fn is_time_dependent(self) -> bool {
        !matches!(self, Scenario::TwistedDivergenceDemo | Scenario::StokesScaling)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    #[serde(rename = "L", default = "default_length")]
    pub length: f64,
}

fn default_length() -> f64 {
    std::f64::consts::TAU
}

/// Initial density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySpec {
    Constant {
        m: f64,
    },
    /// `m + jump·m` inside the disk; centre and radius default to the
    /// built-in disk.
    Disk {
        m: f64,
        jump: f64,
        #[serde(default)]
        center: Option<[f64; 2]>,
        #[serde(default)]
        radius: Option<f64>,
    },
    Rectangle {
        m: f64,
        jump: f64,
        lo: [f64; 2],
        hi: [f64; 2],
    },
}

impl DensitySpec {
    pub fn jump_ratio(&self) -> f64 {
        match self {
            DensitySpec::Constant { .. } => 0.0,
            DensitySpec::Disk { jump, .. } | DensitySpec::Rectangle { jump, .. } => *jump,
        }
    }

    pub fn sup(&self) -> f64 {
        match self {
            DensitySpec::Constant { m } => *m,
            DensitySpec::Disk { m, jump, .. } | DensitySpec::Rectangle { m, jump, .. } => m * (1.0 + jump),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSpec {
    pub nu: f64,
    #[serde(default)]
    pub density: Option<DensitySpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    #[serde(default = "default_report_every")]
    pub report_every: usize,
}

fn default_report_every() -> usize {
    10
}

/// Initial velocity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VelocitySpec {
    TaylorGreen { amplitude: f64 },
    Shear { amplitude: f64 },
    /// Seeded divergence-free field with RMS `amplitude`.
    Random { amplitude: f64, k_max: usize, #[serde(default = "default_slope")] slope: f64 },
}

fn default_slope() -> f64 {
    1.0
}

/// Optional solver settings; anything left out keeps the solver default.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub picard_tol: Option<f64>,
    pub picard_max: Option<usize>,
    pub scheme: Option<Scheme>,
    pub smallness_cap: Option<f64>,
    pub jump_cap: Option<f64>,
    pub cfl: Option<f64>,
    pub flow_interp: Option<Interpolation>,
}

/// A check that a run can perform.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    AnalyticSolution,
    EnergyEquality,
    DecayBound,
    FlowMapInvariants,
    DensityStructure,
    Incompressibility,
    Ladyzhenskaya,
    WindowedDecay,
    FixedPointContraction,
    CompatibilityCorrector,
    StokesScaling,
}

impl Check {
    /// Human-readable name with the result it checks.
    pub fn citation(self) -> &'static str {
        match self {
            Check::AnalyticSolution => "Taylor-Green analytic decay e^{-2νt}",
            Check::EnergyEquality => "energy equality (Lemma 1.1)",
            Check::DecayBound => "decay bound (eq. e2)",
            Check::FlowMapInvariants => "flow-map invariants (Prop 3.1)",
            Check::DensityStructure => "piecewise-constant density (rem2)",
            Check::Incompressibility => "divergence-free velocity (Leray projection)",
            Check::Ladyzhenskaya => "Ladyzhenskaya inequality (§6.1)",
            Check::WindowedDecay => "windowed-norm decay (eq. b4)",
            Check::FixedPointContraction => "fixed point contraction (Lemma 7.3)",
            Check::CompatibilityCorrector => "compatibility corrector (§5)",
            Check::StokesScaling => "maximal regularity scaling (Theorem 2.1)",
        }
    }

    /// The name used in config files.
    pub fn key(self) -> String {
        serde_json::to_value(self)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default()
    }

    /// Checks that need a time-stepped run.
    pub fn needs_run(self) -> bool {
        !matches!(
            self,
            Check::FixedPointContraction | Check::CompatibilityCorrector | Check::StokesScaling
        )
    }

    pub fn defaults_for(scenario: Scenario) -> Vec<Check> {
        use Check::*;
        match scenario {
            Scenario::TaylorGreen => vec![
                AnalyticSolution,
                EnergyEquality,
                DecayBound,
                FlowMapInvariants,
                Incompressibility,
                Ladyzhenskaya,
            ],
            Scenario::DensityDisk => vec![
                EnergyEquality,
                DecayBound,
                FlowMapInvariants,
                DensityStructure,
                Incompressibility,
            ],
            Scenario::DecayExperiment => vec![DecayBound, WindowedDecay, FlowMapInvariants, Incompressibility],
            Scenario::TwistedDivergenceDemo => vec![FixedPointContraction, CompatibilityCorrector],
            Scenario::StokesScaling => vec![StokesScaling],
            Scenario::Custom => vec![EnergyEquality, DecayBound, FlowMapInvariants, Incompressibility],
        }
    }
}

/// Tolerances applied by the checks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub analytic: f64,
    pub energy: f64,
    pub decay: f64,
    pub det: f64,
    pub divergence: f64,
    pub marker_area: f64,
    pub fit_r_squared: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            analytic: 1e-4,
            energy: 1e-3,
            decay: lagflow::diagnostics::TOL_DECAY,
            det: 1e-5,
            divergence: 1e-10,
            marker_area: 0.01,
            fit_r_squared: 0.9,
        }
    }
}

/// The file as written by the user.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub scenario: Option<Scenario>,
    pub grid: Option<GridSpec>,
    pub physics: Option<PhysicsSpec>,
    pub time: Option<TimeSpec>,
    #[serde(default)]
    pub solver: SolverSpec,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub initial_velocity: Option<VelocitySpec>,
    /// Replaces the scenario's default check list.
    pub checks: Option<Vec<Check>>,
    #[serde(default)]
    pub tolerances: Option<Tolerances>,
    /// `sup ρ₀` used by the decay bound; defaults to the density's maximum.
    pub eta_star: Option<f64>,
    /// `‖A − Id‖_{L∞}` for the twisted-divergence demo.
    pub contraction: Option<f64>,
    /// Number of random forcings for the scaling probe.
    pub samples: Option<usize>,
    /// Window length of the windowed norms.
    pub window: Option<f64>,
    /// Write field and flow-map snapshots at report times.
    pub snapshots: Option<bool>,
}

/// Fully resolved configuration.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub grid: GridSpec,
    pub nu: f64,
    pub density: DensitySpec,
    pub time: TimeSpec,
    pub solver: SolverSpec,
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
    pub initial_velocity: VelocitySpec,
    pub checks: Vec<Check>,
    pub tolerances: Tolerances,
    pub eta_star: f64,
    pub contraction: f64,
    pub samples: usize,
    pub window: f64,
    pub snapshots: bool,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| {
            CliError::Config(format!("line {}, column {}: {e}", e.line(), e.column()))
        })?;
        Self::resolve(raw)
    }

    pub fn resolve(raw: RawConfig) -> Result<Self, CliError> {
        let scenario = raw
            .scenario
            .ok_or_else(|| CliError::Config("missing key `scenario`".into()))?;
        let defaults = ScenarioDefaults::of(scenario);
        let require = |what: &str| CliError::Config(format!("scenario `custom` requires key `{what}`"));
        let grid = match (raw.grid, scenario) {
            (Some(g), _) => g,
            (None, Scenario::Custom) => return Err(require("grid")),
            (None, _) => defaults.grid,
        };
        let (nu, density) = match (raw.physics, scenario) {
            (Some(p), _) => (p.nu, p.density.unwrap_or(defaults.density)),
            (None, Scenario::Custom) => return Err(require("physics")),
            (None, _) => (defaults.nu, defaults.density),
        };
        let time = match (raw.time, scenario) {
            (Some(t), _) => t,
            (None, Scenario::Custom) => return Err(require("time")),
            (None, _) => defaults.time,
        };
        let initial_velocity = match (raw.initial_velocity, scenario) {
            (Some(v), _) => v,
            (None, Scenario::Custom) => return Err(require("initial_velocity")),
            (None, _) => defaults.velocity,
        };
        let eta_star = raw.eta_star.unwrap_or_else(|| density.sup());
        let cfg = Self {
            scenario,
            grid,
            nu,
            density,
            time,
            solver: raw.solver,
            output_dir: raw.output_dir,
            seed: raw.seed.unwrap_or(0),
            initial_velocity,
            checks: raw.checks.unwrap_or_else(|| Check::defaults_for(scenario)),
            tolerances: raw.tolerances.unwrap_or_default(),
            eta_star,
            contraction: raw.contraction.unwrap_or(0.3),
            samples: raw.samples.unwrap_or(20),
            window: raw.window.unwrap_or(1.0),
            snapshots: raw.snapshots.unwrap_or(true),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        let positive = |key: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                bad(format!("`{key}` must be positive, got {x}"))
            }
        };
        if self.grid.n < 4 || !self.grid.n.is_multiple_of(2) {
            return bad(format!("`grid.n` must be an even number ≥ 4, got {}", self.grid.n));
        }
        positive("grid.L", self.grid.length)?;
        positive("physics.nu", self.nu)?;
        positive("time.dt", self.time.dt)?;
        positive("time.T", self.time.t_end)?;
        positive("eta_star", self.eta_star)?;
        positive("window", self.window)?;
        if self.time.report_every == 0 {
            return bad("`time.report_every` must be at least 1".into());
        }
        let steps = self.time.t_end / self.time.dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return bad(format!(
                "`time.T` = {} is not a whole number of steps of `time.dt` = {}",
                self.time.t_end, self.time.dt
            ));
        }
        match &self.density {
            DensitySpec::Constant { m } => positive("physics.density.m", *m)?,
            DensitySpec::Disk { m, jump, radius, .. } => {
                positive("physics.density.m", *m)?;
                if !(*jump >= 0.0) {
                    return bad(format!("`physics.density.jump` must be nonnegative, got {jump}"));
                }
                if let Some(r) = radius {
                    positive("physics.density.radius", *r)?;
                }
            }
            DensitySpec::Rectangle { m, jump, lo, hi } => {
                positive("physics.density.m", *m)?;
                if !(*jump >= 0.0) {
                    return bad(format!("`physics.density.jump` must be nonnegative, got {jump}"));
                }
                if lo[0] >= hi[0] || lo[1] >= hi[1] {
                    return bad("`physics.density` rectangle needs lo < hi".into());
                }
            }
        }
        let s = &self.solver;
        for (key, val) in [
            ("solver.picard_tol", s.picard_tol),
            ("solver.smallness_cap", s.smallness_cap),
            ("solver.jump_cap", s.jump_cap),
            ("solver.cfl", s.cfl),
        ] {
            if let Some(v) = val {
                positive(key, v)?;
            }
        }
        if s.picard_max == Some(0) {
            return bad("`solver.picard_max` must be at least 1".into());
        }
        let t = &self.tolerances;
        for (key, v) in [
            ("tolerances.analytic", t.analytic),
            ("tolerances.energy", t.energy),
            ("tolerances.decay", t.decay),
            ("tolerances.det", t.det),
            ("tolerances.divergence", t.divergence),
            ("tolerances.marker_area", t.marker_area),
            ("tolerances.fit_r_squared", t.fit_r_squared),
        ] {
            positive(key, v)?;
        }
        if !self.steps().is_multiple_of(self.time.report_every) {
            return bad(format!(
                "`time.report_every` = {} does not divide the {} steps",
                self.time.report_every,
                self.steps()
            ));
        }
        for c in &self.checks {
            if c.needs_run() && !self.scenario.is_time_dependent() {
                return bad(format!("check `{}` needs a time-dependent scenario", c.key()));
            }
        }
        if self.checks.contains(&Check::AnalyticSolution)
            && (!matches!(self.initial_velocity, VelocitySpec::TaylorGreen { .. })
                || !matches!(self.density, DensitySpec::Constant { .. }))
        {
            return bad("check `analytic_solution` needs a Taylor-Green velocity and constant density".into());
        }
        if self.checks.contains(&Check::DensityStructure) && matches!(self.density, DensitySpec::Constant { .. }) {
            return bad("check `density_structure` needs a disk or rectangle density".into());
        }
        if self.scenario == Scenario::TwistedDivergenceDemo {
            positive("contraction", self.contraction)?;
        }
        if self.scenario == Scenario::StokesScaling && self.samples == 0 {
            return bad("`samples` must be at least 1".into());
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.time.t_end / self.time.dt).round() as usize
    }

    pub fn solver_config(&self) -> SolverConfig<f64> {
        let mut c = SolverConfig::new(self.nu, self.time.dt);
        let s = &self.solver;
        if let Some(v) = s.picard_tol {
            c.picard_tol = v;
        }
        if let Some(v) = s.picard_max {
            c.picard_max = v;
        }
        if let Some(v) = s.scheme {
            c.scheme = v;
        }
        if let Some(v) = s.smallness_cap {
            c.smallness_cap = v;
        }
        if let Some(v) = s.jump_cap {
            c.jump_cap = v;
        }
        if let Some(v) = s.cfl {
            c.cfl = v;
        }
        if let Some(v) = s.flow_interp {
            c.flow_interp = v;
        }
        c
    }
}

struct ScenarioDefaults {
    grid: GridSpec,
    nu: f64,
    density: DensitySpec,
    time: TimeSpec,
    velocity: VelocitySpec,
}

impl ScenarioDefaults {
    fn of(scenario: Scenario) -> Self {
        let grid = GridSpec {
            n: 64,
            length: default_length(),
        };
        let disk = DensitySpec::Disk {
            m: 1.0,
            jump: 0.1,
            center: None,
            radius: None,
        };
        let time = |dt: f64, t_end: f64, report_every: usize| TimeSpec {
            dt,
            t_end,
            report_every,
        };
        match scenario {
            Scenario::TaylorGreen | Scenario::Custom => Self {
                grid,
                nu: 0.1,
                density: DensitySpec::Constant { m: 1.0 },
                time: time(0.01, 1.0, 10),
                velocity: VelocitySpec::TaylorGreen { amplitude: 1.0 },
            },
            Scenario::DensityDisk => Self {
                grid,
                nu: 0.1,
                density: disk,
                time: time(0.02, 1.0, 5),
                velocity: VelocitySpec::TaylorGreen { amplitude: 0.4 },
            },
            Scenario::DecayExperiment => Self {
                grid,
                nu: 0.1,
                density: disk,
                time: time(0.02, 3.0, 10),
                velocity: VelocitySpec::TaylorGreen { amplitude: 0.15 },
            },
            Scenario::TwistedDivergenceDemo => Self {
                grid,
                nu: 0.1,
                density: DensitySpec::Constant { m: 1.0 },
                time: time(0.01, 1.0, 10),
                velocity: VelocitySpec::TaylorGreen { amplitude: 1.0 },
            },
            Scenario::StokesScaling => Self {
                grid: GridSpec {
                    n: 32,
                    length: default_length(),
                },
                nu: 1.0,
                density: DensitySpec::Constant { m: 1.0 },
                time: time(0.01, 1.0, 10),
                velocity: VelocitySpec::TaylorGreen { amplitude: 0.0 },
            },
        }
    }
}
