//! Quantitative checks on solver trajectories: the energy equality,
//! exponential decay, the smallness integral, the Ladyzhenskaya ratio,
//! windowed norms, the Lagrangian round trip and perturbation stability.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::flow_map::{eulerian_to_lagrangian, op_grad_u, op_laplace_u, InverseMethod};
use crate::interp::{compose_scalar, Interpolation};
use crate::scalar::Real;
use crate::spectral::{advection, divergence, inverse_laplacian, jacobian, vector_laplacian};
use crate::stokes::{div_residual, hessian_lp, step_variable_density, SimState, StepInfo, StokesSample};

/// Relative slack allowed on the decay bound.
pub const TOL_DECAY: f64 = 1e-6;
/// Threshold of the smallness integral `∫‖∇u‖_{L∞}`.
pub const SMALLNESS_LIMIT: f64 = 0.5;
/// Calibrated bound on `‖∇v‖²_{L4} / (‖∇v‖_{L2}‖∇²v‖_{L2})`: the largest
/// ratio over 1000 seeded random band-limited fields (0.190) plus 20%.
pub const C_LADY: f64 = 0.23;
/// Ceiling on the discrete Stokes estimate ratio with `p = q = 2`, zero
/// initial data and no lift: the Crank–Nicolson energy identity gives
/// `‖mu_t‖² + ‖νΔu‖² ≤ ‖Pf‖²` and `mν sup‖∇u‖² ≤ ‖Pf‖²`, so the ratio is at
/// most `√(1 + (1 + √2)²)`.
pub const STOKES_RATIO_CEILING: f64 = 2.613_125_929_752_753;

/// Raw per-step measurements, written once per time step.
#[derive(Clone, Debug, Default, Serialize, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    /// `∫|v|²`
    pub energy: f64,
    /// `∫ρ|v|²`
    pub weighted_energy: f64,
    /// `∫|∇v|²`
    pub enstrophy: f64,
    /// `2ν∫|∇v|²`
    pub dissipation: f64,
    /// `‖∇v‖_{L∞}` with the pointwise operator norm.
    pub max_grad_v: f64,
    /// Trapezoidal `∫₀ᵗ‖∇v‖_{L∞}`.
    pub smallness_integral: f64,
    /// `∫‖D_yu‖_{L∞}` accumulated by the flow map.
    pub flow_map_integral: f64,
    pub picard_iters: usize,
    pub div_residual: f64,
    pub ladyzhenskaya_ratio: Option<f64>,
    /// `√(mν)‖∇v‖_{L4}` at `t`.
    pub mk_sup: f64,
    /// `‖m(v_t + v·∇v)‖_{L4}`, `‖ν∇²v‖_{L4}`, `‖∇Q‖_{L4}` at `t − dt/2`
    /// (zero on the first record).
    pub mk_material: f64,
    pub mk_viscous: f64,
    pub mk_pressure: f64,
}

/// Builds [`StepRecord`]s from successive solver states.
#[derive(Clone, Debug)]
pub struct Recorder<T: Real> {
    m: T,
    nu: T,
    records: Vec<StepRecord>,
    last: Option<(T, VectorField<T>)>,
}

impl<T: Real> Recorder<T> {
    pub fn new(state: &SimState<T>) -> Self {
        let mut r = Self {
            m: state.rho0.inf(),
            nu: state.config.nu,
            records: Vec::new(),
            last: None,
        };
        r.record(state, None);
        r
    }

    /// Appends the record for `state`; call once per step, in order.
    pub fn record(&mut self, state: &SimState<T>, info: Option<&StepInfo>) {
        let v = &state.v;
        let rho = &state.rho;
        let t = state.t;
        let half = T::lit(0.5);
        let four = T::lit(4.0);
        let dv = jacobian(v);
        let enstrophy = dv.l2_norm().powi(2);
        let weighted = v.component(0).pointwise_mul(rho).inner(v.component(0))
            + v.component(1).pointwise_mul(rho).inner(v.component(1));
        let max_grad_v = dv.linf_op_norm().to_f64_lossy();
        let smallness = match (self.records.last(), &self.last) {
            (Some(prev), Some((t0, _))) => {
                prev.smallness_integral + 0.5 * (t - *t0).to_f64_lossy() * (prev.max_grad_v + max_grad_v)
            }
            _ => 0.0,
        };
        let (mut material, mut viscous, mut pressure) = (T::zero(), T::zero(), T::zero());
        if let Some((t0, v_prev)) = &self.last {
            let dt = t - *t0;
            let mut mid = v.clone();
            mid += v_prev;
            let mid = mid.scale(half);
            let mut dvdt = (v - v_prev).scale(T::one() / dt);
            dvdt += &advection(&mid, &mid);
            material = self.m * dvdt.lp_norm(four);
            viscous = self.nu * hessian_lp(&mid, four);
            pressure = state.grad_q.lp_norm(four);
        }
        let lady = ladyzhenskaya_ratio(v).ok().map(|x| x.to_f64_lossy());
        self.records.push(StepRecord {
            t: t.to_f64_lossy(),
            energy: v.inner(v).to_f64_lossy(),
            weighted_energy: weighted.to_f64_lossy(),
            enstrophy: enstrophy.to_f64_lossy(),
            dissipation: (T::lit(2.0) * self.nu * enstrophy).to_f64_lossy(),
            max_grad_v,
            smallness_integral: smallness,
            flow_map_integral: state.fm.du_linf_integral().to_f64_lossy(),
            picard_iters: info.map_or(0, |i| i.picard_iters),
            div_residual: div_residual(v).to_f64_lossy(),
            ladyzhenskaya_ratio: lady,
            mk_sup: ((self.m * self.nu).sqrt() * dv.lp_norm(four)).to_f64_lossy(),
            mk_material: material.to_f64_lossy(),
            mk_viscous: viscous.to_f64_lossy(),
            mk_pressure: pressure.to_f64_lossy(),
        });
        self.last = Some((t, v.clone()));
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<StepRecord> {
        self.records
    }
}

/// `|E_w(t) + ∫₀ᵗ 2ν‖∇v‖² − E_w(0)| / E_w(0)` with trapezoidal quadrature
/// (absolute when `E_w(0) = 0`).
pub fn energy_report(records: &[StepRecord]) -> Vec<f64> {
    let Some(first) = records.first() else {
        return Vec::new();
    };
    let e0 = first.weighted_energy;
    let mut integral = 0.0;
    let mut out = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        if i > 0 {
            let p = &records[i - 1];
            integral += 0.5 * (r.t - p.t) * (r.dissipation + p.dissipation);
        }
        let gap = (r.weighted_energy + integral - e0).abs();
        out.push(if e0 > 0.0 { gap / e0 } else { gap });
    }
    out
}

/// First eigenvalue of `−Δ` on mean-zero fields of the `L`-periodic square.
pub fn lambda1(length: f64) -> f64 {
    (std::f64::consts::TAU / length).powi(2)
}

/// `e^{−νλ₁t/η*} E_w(0) − E_w(t)` at every record.
pub fn decay_check(records: &[StepRecord], nu: f64, eta_star: f64, lambda1: f64) -> Vec<f64> {
    let Some(first) = records.first() else {
        return Vec::new();
    };
    let e0 = first.weighted_energy;
    records
        .iter()
        .map(|r| (-nu * lambda1 * r.t / eta_star).exp() * e0 - r.weighted_energy)
        .collect()
}

/// `true` when every margin is at least `−tol·E_w(0)`.
pub fn decay_holds(records: &[StepRecord], margins: &[f64], tol: f64) -> bool {
    let e0 = records.first().map_or(0.0, |r| r.weighted_energy);
    margins.iter().all(|&m| m >= -tol * e0)
}

/// Running `∫₀ᵗ‖∇v‖_{L∞}` and the first time it exceeds the limit.
pub fn smallness_monitor(records: &[StepRecord]) -> (Vec<f64>, Option<f64>) {
    let values: Vec<f64> = records.iter().map(|r| r.smallness_integral).collect();
    let crossing = records
        .iter()
        .find(|r| r.smallness_integral > SMALLNESS_LIMIT)
        .map(|r| r.t);
    (values, crossing)
}

/// `‖∇v‖²_{L4} / (‖∇v‖_{L2}‖∇²v‖_{L2})`.
pub fn ladyzhenskaya_ratio<T: Real>(v: &VectorField<T>) -> Result<T> {
    let dv = jacobian(v);
    let l2 = dv.l2_norm();
    let h2 = crate::spectral::hessian_l2_norm(v);
    if l2 == T::zero() || h2 == T::zero() {
        return Err(Error::DegenerateInput("Ladyzhenskaya ratio of a field with no gradient".into()));
    }
    Ok(dv.lp_norm(T::lit(4.0)).powi(2) / (l2 * h2))
}

/// Discrete `M_k` over consecutive windows of length `window`, with
/// `p = 2`, `q = 4`: the sup term over the samples of the window plus the
/// `L2`-in-time norms of the three rate terms over the step midpoints.
pub fn windowed_norms(records: &[StepRecord], window: f64) -> Vec<f64> {
    if records.len() < 2 || window <= 0.0 {
        return Vec::new();
    }
    let t_end = records.last().map_or(0.0, |r| r.t);
    let count = ((t_end + 1e-9 * window) / window).floor() as usize;
    let slot = |t: f64| ((t + 1e-9 * window) / window).floor() as usize;
    let mut sup = vec![0.0f64; count];
    let mut sums = vec![[0.0f64; 3]; count];
    for (i, r) in records.iter().enumerate() {
        let k = slot(r.t);
        if k < count {
            sup[k] = sup[k].max(r.mk_sup);
        }
        if i > 0 {
            let dt = r.t - records[i - 1].t;
            let k = slot(r.t - 0.5 * dt);
            if k < count {
                sums[k][0] += dt * r.mk_material.powi(2);
                sums[k][1] += dt * r.mk_viscous.powi(2);
                sums[k][2] += dt * r.mk_pressure.powi(2);
            }
        }
    }
    sup.iter()
        .zip(&sums)
        .map(|(s, q)| s + q.iter().map(|x| x.sqrt()).sum::<f64>())
        .collect()
}

/// Least-squares fit `log M_k ≈ c − rate·k`.
#[derive(Clone, Copy, Debug, Default, Serialize, PartialEq)]
pub struct DecayFit {
    pub rate: f64,
    pub r_squared: f64,
}

pub fn fit_decay(values: &[f64]) -> Option<DecayFit> {
    let pts: Vec<(f64, f64)> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > 0.0)
        .map(|(k, v)| (k as f64, v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Some(DecayFit {
        rate: -slope,
        r_squared,
    })
}

/// Residual of `ηu_t − νΔ_u u + ∇_u P = 0` at `cur`, with `u = v∘X`,
/// `u_t` by central differences over `prev`/`next`, `P = Q∘X` and `Q`
/// averaged from the pressure gradients of the two adjacent steps.
/// Returned relative to the largest of the three terms.
pub fn lagrangian_roundtrip<T: Real>(prev: &SimState<T>, cur: &SimState<T>, next: &SimState<T>) -> Result<T> {
    let grid = cur.grid();
    let method = Interpolation::Spectral;
    let u_prev = eulerian_to_lagrangian(&prev.v, &prev.fm, method);
    let u = eulerian_to_lagrangian(&cur.v, &cur.fm, method);
    let u_next = eulerian_to_lagrangian(&next.v, &next.fm, method);
    let u_t = (&u_next - &u_prev).scale(T::one() / (next.t - prev.t));
    let mut gq = cur.grad_q.clone();
    gq += &next.grad_q;
    let q = inverse_laplacian(&divergence(&gq.scale(T::lit(0.5)))).field;
    let p = compose_scalar(method, &q, &cur.fm.positions());
    let a = cur.fm.inverse_jacobian(InverseMethod::DirectAdjugate)?.into_matrix();
    let eta = cur.rho0.sample(grid);
    let inertia = u_t.scale_by(&eta);
    let viscous = op_laplace_u(&u, &a).scale(cur.config.nu);
    let pressure = op_grad_u(&p, &a);
    let mut residual = inertia.clone();
    residual -= &viscous;
    residual += &pressure;
    let scale = inertia.l2_norm().max(viscous.l2_norm()).max(pressure.l2_norm());
    if scale == T::zero() {
        return Ok(residual.l2_norm());
    }
    Ok(residual.l2_norm() / scale)
}

/// Which solver parameter differs between the two runs of
/// [`uniqueness_experiment`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    /// `picard_tol` 1e-8 against 1e-10.
    PicardTol,
    /// `dt`, `dt/2` and `dt/4`.
    DtHalved,
    /// One worker thread against the ambient pool.
    ThreadCount,
}

#[derive(Clone, Debug, Serialize)]
pub struct UniquenessResult {
    pub perturbation: Perturbation,
    /// `sup_t ‖v¹ − v²‖_{L2}` for each compared pair.
    pub gaps: Vec<f64>,
    /// Observed order for `DtHalved`.
    pub order: Option<f64>,
    pub pass: bool,
}

/// Velocity samples `(t, v)` every `every` steps up to `t_end`.
pub fn sample_run<T: Real>(initial: &SimState<T>, t_end: T, every: usize) -> Result<Vec<(T, VectorField<T>)>> {
    let steps = (t_end / initial.config.dt).round().to_usize().unwrap_or(0);
    let every = every.max(1);
    let mut out = vec![(initial.t, initial.v.clone())];
    let mut s = initial.clone();
    for k in 1..=steps {
        s = step_variable_density(&s)?.0;
        if k % every == 0 {
            out.push((s.t, s.v.clone()));
        }
    }
    Ok(out)
}

/// `sup ‖a − b‖_{L2}` over the sample times the two runs share.
pub fn trajectory_gap<T: Real>(a: &[(T, VectorField<T>)], b: &[(T, VectorField<T>)]) -> f64 {
    let mut gap = 0.0f64;
    for (ta, va) in a {
        let tol = T::lit(1e-9) * (T::one() + ta.abs());
        if let Some((_, vb)) = b.iter().find(|(tb, _)| (*tb - *ta).abs() <= tol) {
            gap = gap.max((va - vb).l2_norm().to_f64_lossy());
        }
    }
    gap
}

/// Runs the same initial data through two solver variants and measures
/// the sup-in-time gap.
pub fn uniqueness_experiment<T: Real>(
    initial: &SimState<T>,
    t_end: T,
    perturbation: Perturbation,
) -> Result<UniquenessResult> {
    let with = |f: &dyn Fn(&mut SimState<T>)| {
        let mut s = initial.clone();
        f(&mut s);
        s
    };
    match perturbation {
        Perturbation::PicardTol => {
            let loose = with(&|s| s.config.picard_tol = T::lit(1e-8));
            let tight = with(&|s| s.config.picard_tol = T::lit(1e-10));
            let a = sample_run(&loose, t_end, 1)?;
            let b = sample_run(&tight, t_end, 1)?;
            let scale = b.iter().map(|(_, v)| v.l2_norm().to_f64_lossy()).fold(0.0, f64::max).max(1e-300);
            let gap = trajectory_gap(&a, &b);
            Ok(UniquenessResult {
                perturbation,
                gaps: vec![gap],
                order: None,
                pass: gap <= 100.0 * 1e-8 * scale,
            })
        }
        Perturbation::DtHalved => {
            let dt = initial.config.dt;
            let half = T::lit(0.5);
            let runs = [1usize, 2, 4]
                .iter()
                .map(|&k| {
                    let s = with(&|s| s.config.dt = dt * half.powi(k.trailing_zeros() as i32));
                    sample_run(&s, t_end, k)
                })
                .collect::<Result<Vec<_>>>()?;
            let g1 = trajectory_gap(&runs[0], &runs[1]);
            let g2 = trajectory_gap(&runs[1], &runs[2]);
            let order = if g1 > 0.0 && g2 > 0.0 { Some((g1 / g2).log2()) } else { None };
            Ok(UniquenessResult {
                perturbation,
                gaps: vec![g1, g2],
                order,
                pass: order.is_some_and(|o| (1.8..=2.2).contains(&o)),
            })
        }
        Perturbation::ThreadCount => {
            let single = rayon::ThreadPoolBuilder::new()
                .num_threads(1)
                .build()
                .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
            let a = single.install(|| sample_run(initial, t_end, 1))?;
            let b = sample_run(initial, t_end, 1)?;
            let gap = trajectory_gap(&a, &b);
            Ok(UniquenessResult {
                perturbation,
                gaps: vec![gap],
                order: None,
                pass: gap == 0.0,
            })
        }
    }
}

/// Discrete ratio of the two sides of the maximal-regularity estimate for
/// `m u_t − νΔu + ∇Q = f`, `div u = div R`, with `p = q = 2` and
/// homogeneous norms (`‖∇·‖_{L2}` for the trace space).
#[derive(Clone, Copy, Debug, Default, Serialize, PartialEq)]
pub struct StokesEstimate {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// `samples` come from [`crate::stokes::solve_evolutionary_stokes`] with the
/// given `forcing` and `lift_data`; rate terms are evaluated at step
/// midpoints.
pub fn stokes_estimate<T: Real>(
    samples: &[StokesSample<T>],
    m: T,
    nu: T,
    forcing: &dyn Fn(T) -> VectorField<T>,
    lift_data: &dyn Fn(T) -> VectorField<T>,
) -> Result<StokesEstimate> {
    if samples.len() < 2 {
        return Err(Error::InvalidParameter("estimate needs at least two samples".into()));
    }
    let half = T::lit(0.5);
    let trace = (m * nu).sqrt();
    let grad_l2 = |v: &VectorField<T>| jacobian(v).l2_norm();
    let mut ut2 = T::zero();
    let mut lap2 = T::zero();
    let mut gp2 = T::zero();
    let mut f2 = T::zero();
    let mut rt2 = T::zero();
    let mut divr2 = T::zero();
    let mut sup = T::zero();
    for s in samples {
        sup = sup.max(grad_l2(&s.u));
    }
    for w in samples.windows(2) {
        let dt = w[1].t - w[0].t;
        let tm = w[0].t + half * dt;
        let ut = (&w[1].u - &w[0].u).scale(m / dt);
        let mut mid = w[0].u.clone();
        mid += &w[1].u;
        let lap = vector_laplacian(&mid.scale(half)).scale(nu);
        ut2 += dt * ut.inner(&ut);
        lap2 += dt * lap.inner(&lap);
        gp2 += dt * w[1].grad_q.inner(&w[1].grad_q);
        let f = forcing(tm);
        f2 += dt * f.inner(&f);
        let rt = (&lift_data(w[1].t) - &lift_data(w[0].t)).scale(m / dt);
        rt2 += dt * rt.inner(&rt);
        let gdr = crate::spectral::gradient(&divergence(&lift_data(tm))).scale(nu);
        divr2 += dt * gdr.inner(&gdr);
    }
    let lhs = ut2.sqrt() + lap2.sqrt() + gp2.sqrt() + trace * sup;
    let rhs = f2.sqrt() + rt2.sqrt() + divr2.sqrt() + trace * grad_l2(&samples[0].u);
    if rhs == T::zero() {
        return Err(Error::DegenerateInput("Stokes estimate with zero data".into()));
    }
    Ok(StokesEstimate {
        lhs: lhs.to_f64_lossy(),
        rhs: rhs.to_f64_lossy(),
        ratio: (lhs / rhs).to_f64_lossy(),
    })
}

/// Everything a run reports: per-record series plus summary verdicts.
#[derive(Clone, Debug, Serialize)]
pub struct DiagnosticsReport {
    pub records: Vec<ReportRow>,
    pub max_energy_residual: f64,
    pub min_decay_margin: f64,
    pub decay_holds: bool,
    pub smallness_crossed_at: Option<f64>,
    pub max_ladyzhenskaya_ratio: Option<f64>,
    pub windowed_norms: Vec<f64>,
    pub windowed_fit: Option<DecayFit>,
    pub roundtrip_residuals: Vec<(f64, f64)>,
}

/// One row of the report, derived from a [`StepRecord`].
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct ReportRow {
    pub t: f64,
    pub energy: f64,
    pub weighted_energy: f64,
    pub dissipation: f64,
    pub energy_residual: f64,
    pub decay_margin: f64,
    pub smallness_integral: f64,
    pub ladyzhenskaya_ratio: Option<f64>,
}

pub const REPORT_CSV_HEADER: &str =
    "t,energy,weighted_energy,dissipation,energy_residual,decay_margin,smallness_integral,ladyzhenskaya_ratio";

impl DiagnosticsReport {
    /// `eta_star` is `sup ρ₀`, `length` the box size.
    pub fn from_records(records: &[StepRecord], nu: f64, eta_star: f64, length: f64, window: f64) -> Self {
        let residuals = energy_report(records);
        let margins = decay_check(records, nu, eta_star, lambda1(length));
        let holds = decay_holds(records, &margins, TOL_DECAY);
        let (_, crossing) = smallness_monitor(records);
        let mk = windowed_norms(records, window);
        let rows = records
            .iter()
            .zip(residuals.iter().zip(&margins))
            .map(|(r, (&res, &margin))| ReportRow {
                t: r.t,
                energy: r.energy,
                weighted_energy: r.weighted_energy,
                dissipation: r.dissipation,
                energy_residual: res,
                decay_margin: margin,
                smallness_integral: r.smallness_integral,
                ladyzhenskaya_ratio: r.ladyzhenskaya_ratio,
            })
            .collect();
        Self {
            records: rows,
            max_energy_residual: residuals.iter().copied().fold(0.0, f64::max),
            min_decay_margin: margins.iter().copied().fold(f64::INFINITY, f64::min),
            decay_holds: holds,
            smallness_crossed_at: crossing,
            max_ladyzhenskaya_ratio: records
                .iter()
                .filter_map(|r| r.ladyzhenskaya_ratio)
                .reduce(f64::max),
            windowed_fit: fit_decay(&mk),
            windowed_norms: mk,
            roundtrip_residuals: Vec::new(),
        }
    }

    /// Keeps every `every`-th row (and the last).
    pub fn thin(mut self, every: usize) -> Self {
        let every = every.max(1);
        let last = self.records.len().saturating_sub(1);
        self.records = self
            .records
            .into_iter()
            .enumerate()
            .filter(|(i, _)| i % every == 0 || *i == last)
            .map(|(_, r)| r)
            .collect();
        self
    }

    pub fn write_json(&self, w: impl Write) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "{REPORT_CSV_HEADER}")?;
        for r in &self.records {
            let lady = r.ladyzhenskaya_ratio.map_or(String::new(), |x| format!("{x:e}"));
            writeln!(
                w,
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{}",
                r.t,
                r.energy,
                r.weighted_energy,
                r.dissipation,
                r.energy_residual,
                r.decay_margin,
                r.smallness_integral,
                lady
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::Density;
    use crate::grid::Grid;
    use crate::scenarios::{shear_mode, taylor_green};
    use crate::stokes::SolverConfig;
    use approx::assert_relative_eq;

    fn run(v0: VectorField<f64>, nu: f64, m: f64, dt: f64, steps: usize) -> Vec<StepRecord> {
        let cfg = SolverConfig::new(nu, dt);
        let mut s = SimState::new(v0, Density::constant(m).unwrap(), cfg).unwrap();
        let mut rec = Recorder::new(&s);
        for _ in 0..steps {
            let (next, info) = step_variable_density(&s).unwrap();
            s = next;
            rec.record(&s, Some(&info));
        }
        rec.into_records()
    }

    #[test]
    fn zero_velocity_everything_vanishes() {
        let g = Grid::periodic(16).unwrap();
        let r = run(VectorField::zeros(&g), 0.1, 1.0, 0.1, 5);
        assert!(energy_report(&r).iter().all(|&x| x == 0.0));
        assert!(decay_check(&r, 0.1, 1.0, 1.0).iter().all(|&x| x == 0.0));
        assert!(smallness_monitor(&r).0.iter().all(|&x| x == 0.0));
        assert!(windowed_norms(&r, 0.2).iter().all(|&x| x == 0.0));
        assert!(ladyzhenskaya_ratio(&VectorField::<f64>::zeros(&g)).is_err());
    }

    #[test]
    fn taylor_green_energy_and_smallness() {
        let g = Grid::periodic(16).unwrap();
        let nu = 0.1;
        let r = run(taylor_green(&g, 1.0), nu, 1.0, 0.01, 50);
        let res = energy_report(&r);
        assert!(res.last().unwrap() < &1e-6);
        let t = r.last().unwrap().t;
        let exact = (1.0 - (-2.0 * nu * t).exp()) / (2.0 * nu);
        assert_relative_eq!(r.last().unwrap().smallness_integral, exact, max_relative = 1e-4);
        let margins = decay_check(&r, nu, 1.0, lambda1(g.length()));
        assert!(margins.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn windowed_norms_single_mode() {
        let g = Grid::periodic(16).unwrap();
        let (nu, m) = (0.5, 2.0);
        let r = run(shear_mode(&g, 1.0), nu, m, 0.01, 300);
        let mk = windowed_norms(&r, 1.0);
        assert_eq!(mk.len(), 3);
        let fit = fit_decay(&mk).unwrap();
        assert_relative_eq!(fit.rate, nu / m, max_relative = 0.05);
        assert!(fit.r_squared > 0.999);
    }

    #[test]
    fn ladyzhenskaya_scale_invariant() {
        let g = Grid::periodic(32).unwrap();
        let v = taylor_green(&g, 1.0);
        let a = ladyzhenskaya_ratio(&v).unwrap();
        let b = ladyzhenskaya_ratio(&v.scale(-3.7)).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-12);
        assert!(a <= C_LADY);
    }

    #[test]
    fn fit_of_exact_geometric_sequence() {
        let v: Vec<f64> = (0..5).map(|k| 3.0 * (-0.7 * k as f64).exp()).collect();
        let fit = fit_decay(&v).unwrap();
        assert_relative_eq!(fit.rate, 0.7, epsilon = 1e-12);
        assert_relative_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
    }
}
