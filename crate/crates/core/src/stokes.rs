//! Constant-coefficient Stokes solvers and the semi-implicit stepper for
//! the variable-density system written as
//! `m v_t − νΔv + ∇Q = (m − ρ)v_t − ρ v·∇v` with `m = inf ρ₀`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::density::{density_at_time, jump_ratio, Density};
use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::flow_map::{FlowMap, InverseMapOptions};
use crate::grid::Grid;
use crate::interp::{Interpolation, Interpolator};
use crate::lift::solve_divergence;
use crate::scalar::Real;
use crate::spectral::{advection, backward, dealias_vector, divergence, forward, gradient_part};

/// Time discretisation of the variable-density stepper.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Crank–Nicolson Stokes part, AB2 advection, Picard loop on `(m − ρ)v_t`.
    #[default]
    SemiImplicitL15,
    /// Same, but `(m − ρ)v_t` is lagged from the previous step (no loop).
    ExplicitAdvection,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig<T: Real> {
    pub nu: T,
    pub dt: T,
    pub picard_tol: T,
    pub picard_max: usize,
    pub scheme: Scheme,
    /// Cap on `∫‖D_yu‖_{L∞}`; crossing it flags the run.
    pub smallness_cap: T,
    /// Largest density jump ratio the semi-implicit scheme is meant for.
    pub jump_cap: T,
    /// Advective CFL number: `dt ≤ cfl · h / max|v|`.
    pub cfl: T,
    /// Interpolation used to carry the flow map.
    pub flow_interp: Interpolation,
    pub inverse_map: InverseMapOptions<T>,
}

impl<T: Real> SolverConfig<T> {
    pub fn new(nu: T, dt: T) -> Self {
        Self {
            nu,
            dt,
            picard_tol: T::lit(1e-10),
            picard_max: 50,
            scheme: Scheme::SemiImplicitL15,
            smallness_cap: T::lit(0.5),
            jump_cap: T::lit(0.5),
            cfl: T::lit(0.5),
            flow_interp: Interpolation::Spectral,
            inverse_map: InverseMapOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: T| {
            if x > T::zero() && x.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {x}")))
            }
        };
        positive("nu", self.nu)?;
        positive("dt", self.dt)?;
        positive("picard_tol", self.picard_tol)?;
        positive("smallness_cap", self.smallness_cap)?;
        positive("jump_cap", self.jump_cap)?;
        positive("cfl", self.cfl)?;
        if self.picard_max == 0 {
            return Err(Error::InvalidParameter("picard_max must be at least 1".into()));
        }
        Ok(())
    }
}

/// `(u, ∇Q)` with `−νΔu + ∇Q = f − mean(f)`, `div u = 0`, both mean-zero.
pub fn solve_stationary_stokes<T: Real>(f: &VectorField<T>, nu: T) -> (VectorField<T>, VectorField<T>) {
    let grid = f.grid();
    let n = grid.n();
    let mut s1 = forward(f.component(0));
    let mut s2 = forward(f.component(1));
    let zero = Complex::new(T::zero(), T::zero());
    let mut g1 = vec![zero; grid.len()];
    let mut g2 = vec![zero; grid.len()];
    for j in 0..n {
        let k2 = grid.derivative_wavenumber(j);
        for i in 0..n {
            let k1 = grid.derivative_wavenumber(i);
            let idx = j * n + i;
            let kk = k1 * k1 + k2 * k2;
            if kk == T::zero() {
                s1[idx] = zero;
                s2[idx] = zero;
                continue;
            }
            let proj = (s1[idx] * k1 + s2[idx] * k2) / kk;
            g1[idx] = proj * k1;
            g2[idx] = proj * k2;
            let inv = T::one() / (nu * kk);
            s1[idx] = (s1[idx] - g1[idx]) * inv;
            s2[idx] = (s2[idx] - g2[idx]) * inv;
        }
    }
    (
        VectorField::from_parts(backward(grid, s1), backward(grid, s2)),
        VectorField::from_parts(backward(grid, g1), backward(grid, g2)),
    )
}

/// Solves `(a − b Δ) w = P g` for divergence-free `w`, returning `(w, (I − P)g)`.
fn helmholtz_solve<T: Real>(g: &VectorField<T>, a: T, b: T) -> (VectorField<T>, VectorField<T>) {
    let grid = g.grid();
    let n = grid.n();
    let mut s1 = forward(g.component(0));
    let mut s2 = forward(g.component(1));
    let zero = Complex::new(T::zero(), T::zero());
    let mut g1 = vec![zero; grid.len()];
    let mut g2 = vec![zero; grid.len()];
    for j in 0..n {
        let k2 = grid.derivative_wavenumber(j);
        for i in 0..n {
            let k1 = grid.derivative_wavenumber(i);
            let idx = j * n + i;
            let kk = k1 * k1 + k2 * k2;
            if kk != T::zero() {
                let proj = (s1[idx] * k1 + s2[idx] * k2) / kk;
                g1[idx] = proj * k1;
                g2[idx] = proj * k2;
                s1[idx] -= g1[idx];
                s2[idx] -= g2[idx];
            }
            let inv = T::one() / (a + b * kk);
            s1[idx] *= inv;
            s2[idx] *= inv;
        }
    }
    (
        VectorField::from_parts(backward(grid, s1), backward(grid, s2)),
        VectorField::from_parts(backward(grid, g1), backward(grid, g2)),
    )
}

/// Applies the symbol `(a − c|k|²)` to `v` (i.e. `a v + c Δv`).
fn apply_symbol<T: Real>(v: &VectorField<T>, a: T, c: T) -> VectorField<T> {
    let grid = v.grid();
    let n = grid.n();
    let comp = |f: &ScalarField<T>| {
        let mut s = forward(f);
        for j in 0..n {
            let k2 = grid.derivative_wavenumber(j);
            for i in 0..n {
                let k1 = grid.derivative_wavenumber(i);
                s[j * n + i] *= a - c * (k1 * k1 + k2 * k2);
            }
        }
        backward(grid, s)
    };
    VectorField::from_parts(comp(v.component(0)), comp(v.component(1)))
}

/// One sample of an evolutionary Stokes trajectory.
#[derive(Clone, Debug)]
pub struct StokesSample<T: Real> {
    pub t: T,
    pub u: VectorField<T>,
    /// Pressure gradient over the step ending at `t` (zero for the first sample).
    pub grad_q: VectorField<T>,
}

/// Evolutionary Stokes problem `m u_t − νΔu + ∇Q = f`, `div u = div R`.
pub struct EvolutionaryStokes<'a, T: Real> {
    pub m: T,
    pub nu: T,
    pub dt: T,
    pub steps: usize,
    pub forcing: &'a dyn Fn(T) -> VectorField<T>,
    pub lift_data: &'a dyn Fn(T) -> VectorField<T>,
    /// Relative tolerance for `div u₀ = div R(0)`.
    pub div_tol: T,
}

/// Crank–Nicolson in time. The potential part `w = B R` is lifted at every
/// step and `v = u − w` solves the homogeneous-divergence problem.
pub fn solve_evolutionary_stokes<T: Real>(
    p: &EvolutionaryStokes<'_, T>,
    u0: &VectorField<T>,
) -> Result<Vec<StokesSample<T>>> {
    if !(p.m > T::zero() && p.nu > T::zero() && p.dt > T::zero()) {
        return Err(Error::InvalidParameter("m, nu and dt must be positive".into()));
    }
    let grid = u0.grid().clone();
    let r0 = (p.lift_data)(T::zero());
    let mismatch = (&divergence(u0) - &divergence(&r0)).l2_norm();
    let scale = T::one().max(divergence(u0).l2_norm()).max(u0.l2_norm());
    if mismatch > p.div_tol * scale {
        return Err(Error::CompatibilityViolated {
            mismatch: mismatch.to_f64_lossy(),
        });
    }
    let half = T::lit(0.5);
    let mut w = solve_divergence(&r0);
    let mut v = crate::spectral::leray_project(&(u0 - &w));
    let mut out = Vec::with_capacity(p.steps + 1);
    out.push(StokesSample {
        t: T::zero(),
        u: u0.clone(),
        grad_q: VectorField::zeros(&grid),
    });
    let a = p.m / p.dt;
    let b = p.nu * half;
    for step in 0..p.steps {
        let t0 = T::from_usize_lossy(step) * p.dt;
        let t1 = t0 + p.dt;
        let f_mid = (p.forcing)(t0 + half * p.dt);
        let w1 = solve_divergence(&(p.lift_data)(t1));
        // m v_t − νΔv + ∇Q' = f; the lifted part contributes −m w_t + νΔw,
        // a pure gradient that is absorbed by the pressure.
        let mut rhs = apply_symbol(&v, a, b);
        rhs += &f_mid;
        let (v1, grad_f) = helmholtz_solve(&rhs, a, b);
        let w_t = (&w1 - &w).scale(T::one() / p.dt);
        let w_lap = crate::spectral::vector_laplacian(&(&w1 + &w)).scale(half);
        let mut grad_q = grad_f;
        grad_q.axpy(-p.m, &w_t);
        grad_q.axpy(p.nu, &w_lap);
        v = v1;
        w = w1;
        out.push(StokesSample {
            t: t1,
            u: &v + &w,
            grad_q,
        });
    }
    Ok(out)
}

/// Per-step output of [`step_variable_density`].
#[derive(Clone, Debug, Default, Serialize)]
pub struct StepInfo {
    pub picard_iters: usize,
    /// Relative iterate gaps `‖w_{k+1} − w_k‖ / ‖w_{k+1}‖`.
    pub picard_gaps: Vec<f64>,
    /// Set on the step where the smallness cap is first crossed.
    pub smallness_crossed: bool,
}

impl StepInfo {
    /// Geometric mean of successive gap ratios (0 when fewer than two gaps).
    pub fn picard_ratio(&self) -> f64 {
        let r: Vec<f64> = self
            .picard_gaps
            .windows(2)
            .filter(|w| w[0] > 0.0 && w[1] > 0.0)
            .map(|w| (w[1] / w[0]).ln())
            .collect();
        if r.is_empty() {
            0.0
        } else {
            (r.iter().sum::<f64>() / r.len() as f64).exp()
        }
    }
}

/// Full solver state: Eulerian velocity, pressure gradient, density and the
/// attached flow map.
#[derive(Clone, Debug)]
pub struct SimState<T: Real> {
    pub t: T,
    pub step: usize,
    pub v: VectorField<T>,
    /// Pressure gradient of the last step, centred at `t − dt/2`.
    pub grad_q: VectorField<T>,
    pub rho0: Density<T>,
    /// `ρ(t) = ρ₀ ∘ Y(t)` on the grid.
    pub rho: ScalarField<T>,
    pub fm: FlowMap<T>,
    pub config: SolverConfig<T>,
    pub smallness_flagged: bool,
    prev_v: Option<VectorField<T>>,
    prev_adv: Option<VectorField<T>>,
    prev_vt: Option<VectorField<T>>,
}

impl<T: Real> SimState<T> {
    /// Starts from `v0` (projected onto divergence-free fields) and `ρ₀`.
    pub fn new(v0: VectorField<T>, rho0: Density<T>, config: SolverConfig<T>) -> Result<Self> {
        config.validate()?;
        if !v0.is_finite() {
            return Err(Error::NonFinite("initial velocity"));
        }
        let grid = v0.grid().clone();
        let v = crate::spectral::leray_project(&v0);
        let rho = rho0.sample(&grid);
        let adv = advection(&v, &v);
        let grad_q = gradient_part(&adv.scale_by(&rho)).scale(-T::one());
        Ok(Self {
            t: T::zero(),
            step: 0,
            v,
            grad_q,
            rho0,
            rho,
            fm: FlowMap::identity(&grid),
            config,
            smallness_flagged: false,
            prev_v: None,
            prev_adv: None,
            prev_vt: None,
        })
    }

    pub fn grid(&self) -> &Grid<T> {
        self.v.grid()
    }

    /// Largest admissible time step for the current velocity.
    pub fn cfl_limit(&self) -> T {
        let vmax = self.v.linf_norm();
        if vmax == T::zero() {
            T::infinity()
        } else {
            self.config.cfl * self.grid().spacing() / vmax
        }
    }

    /// `Err(SmallnessExceeded)` once the flow-map integral exceeds the cap.
    pub fn check_smallness(&self) -> Result<()> {
        let integral = self.fm.du_linf_integral();
        if integral > self.config.smallness_cap {
            Err(Error::SmallnessExceeded {
                integral: integral.to_f64_lossy(),
                cap: self.config.smallness_cap.to_f64_lossy(),
            })
        } else {
            Ok(())
        }
    }

    /// Velocity one step back, if a step has been taken.
    pub fn previous_velocity(&self) -> Option<&VectorField<T>> {
        self.prev_v.as_ref()
    }
}

/// Density at the middle of the coming step: nodes are traced back half a
/// step with the extrapolated velocity, then mapped by `Y(t)`.
fn midpoint_density<T: Real>(state: &SimState<T>) -> Result<ScalarField<T>> {
    let grid = state.grid();
    let dt = state.config.dt;
    let quarter = T::lit(0.25);
    let vq = match &state.prev_v {
        // v(t + dt/4) ≈ v + (v − v_prev)/4
        Some(prev) => {
            let mut e = state.v.scale(T::one() + quarter);
            e.axpy(-quarter, prev);
            e
        }
        None => state.v.clone(),
    };
    let interp = Interpolator::vector(Interpolation::Bilinear, &vq);
    let half = dt * T::lit(0.5);
    let points: Vec<[T; 2]> = (0..grid.len())
        .map(|i| {
            let x = grid.point(i);
            let k1 = interp.eval(x);
            let xs = [x[0] - half * T::lit(0.5) * k1[0], x[1] - half * T::lit(0.5) * k1[1]];
            let k2 = interp.eval(xs);
            [x[0] - half * k2[0], x[1] - half * k2[1]]
        })
        .collect();
    let y = state.fm.inverse_map(&points, &state.config.inverse_map)?;
    let values = y.iter().map(|&p| state.rho0.value_at(grid, p)).collect();
    ScalarField::from_values(grid, values)
}

/// Advances the state by one time step of size `config.dt`.
pub fn step_variable_density<T: Real>(state: &SimState<T>) -> Result<(SimState<T>, StepInfo)> {
    let cfg = &state.config;
    let dt = cfg.dt;
    let limit = state.cfl_limit();
    if dt > limit {
        return Err(Error::CflViolated {
            dt: dt.to_f64_lossy(),
            limit: limit.to_f64_lossy(),
        });
    }
    let grid = state.grid().clone();
    let half = T::lit(0.5);
    let m = state.rho0.inf();
    let constant = state.rho0.is_constant();
    let jump = jump_ratio(&state.rho0);
    if cfg.scheme == Scheme::SemiImplicitL15 && jump > cfg.jump_cap && state.step == 0 {
        log::warn!(
            "density jump ratio {} exceeds jump_cap {}; the Picard loop may not contract",
            jump,
            cfg.jump_cap
        );
    }

    let rho_mid = if constant {
        ScalarField::constant(&grid, m)
    } else {
        midpoint_density(state)?
    };

    // AB2 for v·∇v (Euler on the first step)
    let adv_now = advection(&state.v, &state.v);
    let adv_mid = match &state.prev_adv {
        Some(prev) => {
            let mut a = adv_now.scale(T::lit(1.5));
            a.axpy(-half, prev);
            a
        }
        None => adv_now.clone(),
    };
    let forcing_adv = dealias_vector(&adv_mid.scale_by(&rho_mid)).scale(-T::one());
    let m_minus_rho = rho_mid.map(|r| m - r);

    let a = m / dt;
    let b = cfg.nu * half;
    let base = apply_symbol(&state.v, a, b);
    let solve = |vt_guess: &VectorField<T>| -> (VectorField<T>, VectorField<T>) {
        let mut f = dealias_vector(&vt_guess.scale_by(&m_minus_rho));
        f += &forcing_adv;
        let mut rhs = base.clone();
        rhs += &f;
        helmholtz_solve(&rhs, a, b)
    };
    let inv_dt = T::one() / dt;

    let mut info = StepInfo::default();
    let (w, grad_q) = if constant {
        info.picard_iters = 1;
        solve(&VectorField::zeros(&grid))
    } else {
        match cfg.scheme {
            Scheme::ExplicitAdvection => {
                info.picard_iters = 1;
                let lagged = state.prev_vt.clone().unwrap_or_else(|| VectorField::zeros(&grid));
                solve(&lagged)
            }
            Scheme::SemiImplicitL15 => {
                let mut w_hat = match &state.prev_v {
                    Some(prev) => {
                        let mut e = state.v.scale(T::lit(2.0));
                        e.axpy(-T::one(), prev);
                        e
                    }
                    None => state.v.clone(),
                };
                let mut result = None;
                for k in 0..cfg.picard_max {
                    let vt = (&w_hat - &state.v).scale(inv_dt);
                    let (w, gq) = solve(&vt);
                    let denom = w.l2_norm().max(T::min_positive_value());
                    let gap = ((&w - &w_hat).l2_norm() / denom).to_f64_lossy();
                    info.picard_gaps.push(gap);
                    info.picard_iters = k + 1;
                    w_hat = w;
                    if !gap.is_finite() {
                        break;
                    }
                    if gap <= cfg.picard_tol.to_f64_lossy() {
                        result = Some((w_hat.clone(), gq));
                        break;
                    }
                }
                match result {
                    Some(r) => r,
                    None => {
                        return Err(Error::PicardNoConvergence {
                            iterations: info.picard_iters,
                            gap: info.picard_gaps.last().copied().unwrap_or(f64::NAN),
                            jump_ratio: jump.to_f64_lossy(),
                            jump_cap: cfg.jump_cap.to_f64_lossy(),
                        })
                    }
                }
            }
        }
    };
    if !w.is_finite() {
        return Err(Error::NonFinite("velocity"));
    }

    let fm = state.fm.advance_eulerian(&state.v, &w, dt, cfg.flow_interp)?;
    let mut next = SimState {
        t: state.t + dt,
        step: state.step + 1,
        v: w,
        grad_q,
        rho0: state.rho0.clone(),
        rho: state.rho.clone(),
        fm,
        config: state.config.clone(),
        smallness_flagged: state.smallness_flagged,
        prev_v: Some(state.v.clone()),
        prev_adv: Some(adv_now),
        prev_vt: None,
    };
    next.prev_vt = Some((&next.v - &state.v).scale(inv_dt));
    if !constant {
        next.rho = density_at_time(&next.rho0, &next.fm, &cfg.inverse_map)?;
    }
    if !next.smallness_flagged && next.fm.du_linf_integral() > cfg.smallness_cap {
        next.smallness_flagged = true;
        info.smallness_crossed = true;
        log::warn!(
            "smallness integral {} exceeds cap {} at t = {}",
            next.fm.du_linf_integral(),
            cfg.smallness_cap,
            next.t
        );
    }
    Ok((next, info))
}

/// Discrete proxy of `Ξ(T) = ‖u_t‖_{L∞(L2)} + ‖∇u_t‖_{L2(L2)} + ‖u_t, ∇²u, ∇P‖_{L4(L4)}`.
#[derive(Clone, Copy, Debug, Default, Serialize, PartialEq)]
pub struct XiNorm {
    pub total: f64,
    pub ut_linf_l2: f64,
    pub grad_ut_l2: f64,
    pub ut_l4: f64,
    pub hess_l4: f64,
    pub grad_p_l4: f64,
}

/// Samples must be equally spaced in time; `u_t` is the central difference
/// at each interior sample, and time integrals use the rectangle rule over
/// the interior samples.
pub fn xi_norm<T: Real>(samples: &[StokesSample<T>]) -> Result<XiNorm> {
    if samples.len() < 3 {
        return Err(Error::InvalidParameter("Ξ needs at least three time samples".into()));
    }
    let dt = samples[1].t - samples[0].t;
    let four = T::lit(4.0);
    let inv = T::one() / (dt + dt);
    let mut sup_ut = T::zero();
    let mut int_grad_ut = T::zero();
    let mut int_ut4 = T::zero();
    let mut int_hess4 = T::zero();
    let mut int_gp4 = T::zero();
    for w in samples.windows(3) {
        let ut = (&w[2].u - &w[0].u).scale(inv);
        sup_ut = sup_ut.max(ut.l2_norm());
        let dut = crate::spectral::jacobian(&ut);
        int_grad_ut += dt * dut.l2_norm().powi(2);
        int_ut4 += dt * ut.lp_norm(four).powi(4);
        int_hess4 += dt * hessian_lp(&w[1].u, four).powi(4);
        int_gp4 += dt * w[1].grad_q.lp_norm(four).powi(4);
    }
    let q = T::lit(0.25);
    let r = XiNorm {
        total: 0.0,
        ut_linf_l2: sup_ut.to_f64_lossy(),
        grad_ut_l2: int_grad_ut.sqrt().to_f64_lossy(),
        ut_l4: int_ut4.powf(q).to_f64_lossy(),
        hess_l4: int_hess4.powf(q).to_f64_lossy(),
        grad_p_l4: int_gp4.powf(q).to_f64_lossy(),
    };
    Ok(XiNorm {
        total: r.ut_linf_l2 + r.grad_ut_l2 + r.ut_l4 + r.hess_l4 + r.grad_p_l4,
        ..r
    })
}

/// `‖∇²v‖_{Lp}` with the Frobenius norm over all second derivatives.
pub fn hessian_lp<T: Real>(v: &VectorField<T>, p: T) -> T {
    let two = T::lit(2.0);
    let parts: Vec<[ScalarField<T>; 3]> = v
        .components()
        .iter()
        .map(crate::spectral::second_derivatives)
        .collect();
    let grid = v.grid();
    let values = (0..grid.len())
        .map(|i| {
            parts
                .iter()
                .map(|[a, b, d]| a[i] * a[i] + two * b[i] * b[i] + d[i] * d[i])
                .sum::<T>()
                .sqrt()
        })
        .collect();
    ScalarField::from_values(grid, values).expect("sizes agree").lp_norm(p)
}

/// `‖∇v‖_{Lp}` with the pointwise Frobenius norm.
pub fn gradient_lp<T: Real>(v: &VectorField<T>, p: T) -> T {
    crate::spectral::jacobian(v).lp_norm(p)
}

/// Pressure-gradient curl relative to its size; zero for an exact gradient.
pub fn curl_residual<T: Real>(grad_q: &VectorField<T>) -> T {
    let c = crate::spectral::curl(grad_q).l2_norm();
    let s = grad_q.l2_norm();
    if s == T::zero() {
        c
    } else {
        c / s
    }
}

/// Relative `‖div v‖_{L2} / ‖v‖_{L2}`.
pub fn div_residual<T: Real>(v: &VectorField<T>) -> T {
    let d = divergence(v).l2_norm();
    let s = v.l2_norm();
    if s == T::zero() {
        d
    } else {
        d / s
    }
}

/// Pressure recovered from its gradient: `Q = Δ⁻¹ div ∇Q` (mean zero).
pub fn pressure_from_gradient<T: Real>(grad_q: &VectorField<T>) -> ScalarField<T> {
    crate::spectral::inverse_laplacian(&divergence(grad_q)).field
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{vector_laplacian, leray_project};
    use approx::assert_relative_eq;

    fn grid() -> Grid<f64> {
        Grid::periodic(16).unwrap()
    }

    #[test]
    fn stationary_modes() {
        let g = grid();
        let nu = 0.7;
        let f = VectorField::from_fn(&g, |_, y| [y.sin(), 0.0]);
        let (u, gq) = solve_stationary_stokes(&f, nu);
        assert!((&u - &f.scale(1.0 / nu)).linf_norm() < 1e-14);
        assert!(gq.linf_norm() < 1e-14);

        let grad = VectorField::from_fn(&g, |x, y| [x.cos() * y.sin(), x.sin() * y.cos()]);
        let (u, gq) = solve_stationary_stokes(&grad, nu);
        assert!(u.linf_norm() < 1e-14);
        assert!((&gq - &grad).linf_norm() < 1e-14);

        let mixed = &grad + &VectorField::from_fn(&g, |x, y| [(x + y).sin(), -(x + y).sin()]);
        let (u, gq) = solve_stationary_stokes(&mixed, nu);
        let res = &(&vector_laplacian(&u).scale(-nu) + &gq) - &mixed;
        assert!(res.l2_norm() / mixed.l2_norm() < 1e-13);
        assert!(divergence(&u).linf_norm() < 1e-13);
    }

    #[test]
    fn evolutionary_heat_mode() {
        let g = grid();
        let (m, nu, dt, steps) = (2.0, 0.5, 1e-3, 200);
        let u0 = VectorField::from_fn(&g, |_, y| [(2.0 * y).sin(), 0.0]);
        let zero = |_t: f64| VectorField::zeros(&g);
        let p = EvolutionaryStokes {
            m,
            nu,
            dt,
            steps,
            forcing: &zero,
            lift_data: &zero,
            div_tol: 1e-10,
        };
        let traj = solve_evolutionary_stokes(&p, &u0).unwrap();
        let t = traj.last().unwrap().t;
        let exact = u0.scale((-nu * 4.0 * t / m).exp());
        assert!((&traj.last().unwrap().u - &exact).l2_norm() / exact.l2_norm() < 1e-7);
    }

    #[test]
    fn evolutionary_gradient_forcing_and_lift() {
        let g = grid();
        let grad = VectorField::from_fn(&g, |x, y| [x.cos() * y.sin(), x.sin() * y.cos()]);
        let forcing = |_t: f64| grad.clone();
        let zero = |_t: f64| VectorField::zeros(&g);
        let u0 = VectorField::from_fn(&g, |x, y| [(x + y).sin(), -(x + y).sin()]);
        let p = EvolutionaryStokes {
            m: 1.0,
            nu: 0.1,
            dt: 0.01,
            steps: 10,
            forcing: &forcing,
            lift_data: &zero,
            div_tol: 1e-10,
        };
        let with_grad = solve_evolutionary_stokes(&p, &u0).unwrap();
        let plain = solve_evolutionary_stokes(&EvolutionaryStokes { forcing: &zero, ..p }, &u0).unwrap();
        let last = with_grad.len() - 1;
        assert!((&with_grad[last].u - &plain[last].u).linf_norm() < 1e-14);
        assert!((&with_grad[last].grad_q - &grad).linf_norm() < 1e-13);

        // R(t) = a(t)∇g: u − B R solves the homogeneous problem
        let lift = |t: f64| grad.scale(1.0 + t * t);
        let u0l = &u0 + &grad;
        let q = EvolutionaryStokes { lift_data: &lift, forcing: &zero, ..p };
        let lifted = solve_evolutionary_stokes(&q, &u0l).unwrap();
        for (a, b) in lifted.iter().zip(&plain) {
            let w = grad.scale(1.0 + a.t * a.t);
            assert!((&(&a.u - &w) - &b.u).linf_norm() < 1e-13);
        }
        let bad = u0.scale(1.0);
        let r = solve_evolutionary_stokes(&q, &(&bad + &grad.scale(3.0)));
        assert!(matches!(r, Err(Error::CompatibilityViolated { .. })));
    }

    fn taylor_green(g: &Grid<f64>, amp: f64) -> VectorField<f64> {
        VectorField::from_fn(g, |x, y| [amp * x.sin() * y.cos(), -amp * x.cos() * y.sin()])
    }

    #[test]
    fn constant_density_taylor_green() {
        let g = Grid::periodic(32).unwrap();
        let nu = 0.1;
        let cfg = SolverConfig::new(nu, 0.01);
        let mut s = SimState::new(taylor_green(&g, 1.0), Density::constant(1.0).unwrap(), cfg).unwrap();
        for _ in 0..20 {
            let (next, info) = step_variable_density(&s).unwrap();
            assert_eq!(info.picard_iters, 1);
            s = next;
        }
        let exact = taylor_green(&g, (-2.0 * nu * s.t).exp());
        assert!((&s.v - &exact).l2_norm() / exact.l2_norm() < 1e-6);
        assert!(div_residual(&s.v) < 1e-12);
        assert!(curl_residual(&s.grad_q) < 1e-10);
    }

    #[test]
    fn zero_is_fixed_point() {
        let g = grid();
        let rho = Density::piecewise_constant(
            1.0,
            0.3,
            crate::density::Region::Disk {
                center: [3.0, 3.0],
                radius: 1.0,
            },
        )
        .unwrap();
        let s = SimState::new(VectorField::zeros(&g), rho, SolverConfig::new(0.1, 0.01)).unwrap();
        let (next, _) = step_variable_density(&s).unwrap();
        assert_eq!(next.v.linf_norm(), 0.0);
        assert_eq!(next.rho, s.rho);
    }

    #[test]
    fn cfl_violation() {
        let g = grid();
        let s = SimState::new(taylor_green(&g, 10.0), Density::constant(1.0).unwrap(), SolverConfig::new(0.1, 0.1)).unwrap();
        assert!(matches!(step_variable_density(&s), Err(Error::CflViolated { .. })));
    }

    #[test]
    fn xi_of_zero_and_mode() {
        let g = grid();
        let zero: Vec<StokesSample<f64>> = (0..4)
            .map(|k| StokesSample {
                t: k as f64 * 0.1,
                u: VectorField::zeros(&g),
                grad_q: VectorField::zeros(&g),
            })
            .collect();
        assert_eq!(xi_norm(&zero).unwrap().total, 0.0);
        assert!(xi_norm(&zero[..2]).is_err());
        let _ = leray_project(&zero[0].u);
        assert_relative_eq!(hessian_lp(&taylor_green(&g, 1.0), 2.0), (4.0 * std::f64::consts::PI.powi(2) * 2.0).sqrt(), epsilon = 1e-10);
    }
}
