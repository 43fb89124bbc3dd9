//! The Lagrangian flow map `X(t, y) = y + ∫₀ᵗ u(t', y) dt'`, its Jacobian,
//! the inverse Jacobian `A = (D_yX)⁻¹`, the inverse map `Y(t, ·)` and the
//! operators `∇_u`, `div_u`, `Δ_u` obtained by changing to Lagrangian
//! variables.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Mat2, MatrixField, ScalarField, VectorField};
use crate::grid::Grid;
use crate::interp::{compose_vector, Interpolation, Interpolator};
use crate::scalar::Real;
use crate::snapshot::Snapshot;
use crate::spectral::{divergence, gradient, jacobian, vector_laplacian};

/// Default truncation order of every Neumann-type series.
pub const DEFAULT_K_MAX: usize = 30;
/// `|det D_yX|` below this is treated as a singular map.
pub const DET_FLOOR: f64 = 1e-3;

/// Flow map stored on the fixed Lagrangian grid.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowMap<T: Real> {
    grid: Grid<T>,
    time: T,
    displacement: VectorField<T>,
    jacobian_integral: MatrixField<T>,
    du_linf_integral: T,
}

/// JSON sidecar written next to the two field snapshots of a [`FlowMap`].
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FlowMapMeta {
    pub time: f64,
    pub du_linf_integral: f64,
}

/// Pointwise bounds a flow map is expected to satisfy.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FlowMapInvariants {
    /// `max |det D_yX − 1|`.
    pub det_deviation: f64,
    /// `max |D_yX|`.
    pub jacobian_norm: f64,
    /// `exp(∫‖D_yu‖_{L∞})`, the upper bound for `jacobian_norm`.
    pub jacobian_bound: f64,
    /// `max |A − Id|`.
    pub inverse_deviation: f64,
    /// `2 ∫‖D_yu‖_{L∞}`; only a bound when the integral is at most 1/2.
    pub inverse_bound: f64,
    pub du_linf_integral: f64,
}

impl FlowMapInvariants {
    pub fn jacobian_bound_holds(&self) -> bool {
        self.jacobian_norm <= self.jacobian_bound * (1.0 + 1e-12)
    }

    /// `true` when the inverse-Jacobian bound applies and holds, or does not apply.
    pub fn inverse_bound_holds(&self) -> bool {
        self.du_linf_integral > 0.5 || self.inverse_deviation <= self.inverse_bound * (1.0 + 1e-12) + 1e-14
    }
}

impl<T: Real> FlowMap<T> {
    /// `X(0, y) = y`.
    pub fn identity(grid: &Grid<T>) -> Self {
        Self {
            grid: grid.clone(),
            time: T::zero(),
            displacement: VectorField::zeros(grid),
            jacobian_integral: MatrixField::zeros(grid),
            du_linf_integral: T::zero(),
        }
    }

    pub fn from_parts(
        time: T,
        displacement: VectorField<T>,
        jacobian_integral: MatrixField<T>,
        du_linf_integral: T,
    ) -> Result<Self> {
        displacement.grid().check_same(jacobian_integral.grid())?;
        if !(displacement.is_finite() && jacobian_integral.is_finite()) {
            return Err(Error::NonFinite("flow map"));
        }
        Ok(Self {
            grid: displacement.grid().clone(),
            time,
            displacement,
            jacobian_integral,
            du_linf_integral,
        })
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn time(&self) -> T {
        self.time
    }

    /// `X(t, y) − y`.
    pub fn displacement(&self) -> &VectorField<T> {
        &self.displacement
    }

    /// `∫₀ᵗ D_yu dt'`.
    pub fn jacobian_integral(&self) -> &MatrixField<T> {
        &self.jacobian_integral
    }

    /// Running `∫₀ᵗ ‖D_yu‖_{L∞} dt'`, with the pointwise spectral norm.
    pub fn du_linf_integral(&self) -> T {
        self.du_linf_integral
    }

    /// `X(t, y)` at every grid node `y`.
    pub fn positions(&self) -> Vec<[T; 2]> {
        let d = &self.displacement;
        (0..self.grid.len())
            .map(|idx| {
                let [y1, y2] = self.grid.point(idx);
                let [d1, d2] = d.at(idx);
                [y1 + d1, y2 + d2]
            })
            .collect()
    }

    /// `D_yX = Id + ∫₀ᵗ D_yu`.
    pub fn jacobian(&self) -> MatrixField<T> {
        let mut m = MatrixField::identity(&self.grid);
        m += &self.jacobian_integral;
        m
    }

    /// `D_yX` recomputed by differentiating the stored displacement.
    pub fn jacobian_from_displacement(&self) -> MatrixField<T> {
        let mut m = MatrixField::identity(&self.grid);
        m += &jacobian(&self.displacement);
        m
    }

    /// Advances by `dt` given the Lagrangian velocity `u = v ∘ X` at the start
    /// and end of the step (trapezoidal rule).
    pub fn advance(&self, u_start: &VectorField<T>, u_end: &VectorField<T>, dt: T) -> Result<Self> {
        check_dt(dt)?;
        self.grid.check_same(u_start.grid())?;
        self.grid.check_same(u_end.grid())?;
        let half = dt / T::lit(2.0);
        let du_start = jacobian(u_start);
        let du_end = jacobian(u_end);
        let mut next = self.clone();
        next.displacement.axpy(half, u_start);
        next.displacement.axpy(half, u_end);
        next.jacobian_integral.axpy(half, &du_start);
        next.jacobian_integral.axpy(half, &du_end);
        next.du_linf_integral += half * (du_start.linf_op_norm() + du_end.linf_op_norm());
        next.time += dt;
        next.finish()
    }

    /// Advances by `dt` from the Eulerian velocities at the start and end of
    /// the step, solving `X⁺ = X + dt·v̄((X + X⁺)/2)` with `v̄` the average of
    /// the two (implicit midpoint, area preserving for divergence-free `v̄`).
    ///
    /// `v̄` is evaluated with `method`; the spectral interpolant keeps the
    /// map volume preserving to round-off on resolved fields.
    pub fn advance_eulerian(
        &self,
        v_start: &VectorField<T>,
        v_end: &VectorField<T>,
        dt: T,
        method: Interpolation,
    ) -> Result<Self> {
        check_dt(dt)?;
        self.grid.check_same(v_start.grid())?;
        self.grid.check_same(v_end.grid())?;
        let mut v_mid = v_start.clone();
        v_mid += v_end;
        let v_mid = v_mid.scale(T::lit(0.5));
        let interp = Interpolator::vector(method, &v_mid);

        let base = self.positions();
        let n = self.grid.len();
        let half = T::lit(0.5);
        // predictor: explicit midpoint
        let mut incr = sample(&interp, &base);
        let mut prev = incr.clone();
        let tol = T::lit(1e-14) * (T::one() + self.grid.length());
        for _ in 0..20 {
            let mid: Vec<[T; 2]> = (0..n)
                .map(|i| [base[i][0] + half * dt * incr[i][0], base[i][1] + half * dt * incr[i][1]])
                .collect();
            incr = sample(&interp, &mid);
            let change = incr
                .iter()
                .zip(&prev)
                .fold(T::zero(), |acc, (a, b)| acc.max((a[0] - b[0]).abs()).max((a[1] - b[1]).abs()));
            prev.clone_from(&incr);
            if change * dt <= tol {
                break;
            }
        }
        let step = VectorField::from_pointwise(&self.grid, |i| [dt * incr[i][0], dt * incr[i][1]]);
        let dstep = jacobian(&step);
        let mut next = self.clone();
        next.displacement += &step;
        next.jacobian_integral += &dstep;
        next.du_linf_integral += dstep.linf_op_norm();
        next.time += dt;
        next.finish()
    }

    fn finish(self) -> Result<Self> {
        if !(self.displacement.is_finite() && self.jacobian_integral.is_finite()) {
            return Err(Error::NonFinite("flow map"));
        }
        Ok(self)
    }

    /// `A = (D_yX)⁻¹` by the requested method.
    pub fn inverse_jacobian(&self, method: InverseMethod) -> Result<InverseJacobian<T>> {
        let a = match method {
            InverseMethod::DirectAdjugate => {
                let dx = self.jacobian();
                let floor = T::lit(DET_FLOOR);
                let mut out = MatrixField::zeros(&self.grid);
                for idx in 0..self.grid.len() {
                    let m = dx.at(idx);
                    let det = m.det();
                    if !(det.abs() >= floor) {
                        return Err(Error::SingularJacobian {
                            det: det.abs().to_f64_lossy(),
                            node: idx,
                        });
                    }
                    out.set(idx, m.adjugate().scale(T::one() / det));
                }
                out
            }
            InverseMethod::NeumannSeries { k_max } => {
                if self.du_linf_integral >= T::one() {
                    return Err(Error::SeriesDiverged {
                        ratio: self.du_linf_integral.to_f64_lossy(),
                    });
                }
                self.jacobian_integral.map_pointwise(|j| {
                    // Σ_{k=0}^{k_max} (−J)^k by Horner
                    let minus_j = j.scale(-T::one());
                    let mut acc = Mat2::identity();
                    for _ in 0..k_max {
                        acc = Mat2::identity() + minus_j * acc;
                    }
                    acc
                })
            }
        };
        Ok(InverseJacobian { a, method })
    }

    /// `Y(t, x)` for each `x`: Newton iteration on `y + d(y) = x`, with `d`
    /// the interpolated displacement and `D_yd` the interpolated Jacobian
    /// integral. Falls back to the plain fixed point where the local
    /// Jacobian is degenerate.
    pub fn inverse_map(&self, points: &[[T; 2]], opts: &InverseMapOptions<T>) -> Result<Vec<[T; 2]>> {
        let j = &self.jacobian_integral;
        let interp = Interpolator::new(
            opts.method,
            &[
                self.displacement.component(0),
                self.displacement.component(1),
                j.entry(0, 0),
                j.entry(0, 1),
                j.entry(1, 0),
                j.entry(1, 1),
            ],
        );
        let floor = T::lit(DET_FLOOR);
        let results: Vec<std::result::Result<[T; 2], T>> = points
            .par_iter()
            .map(|&x| {
                let mut buf = [T::zero(); 6];
                let mut y = x;
                let mut res = T::infinity();
                for _ in 0..opts.max_iter {
                    interp.eval_into(y, &mut buf);
                    let r = [y[0] + buf[0] - x[0], y[1] + buf[1] - x[1]];
                    res = r[0].abs().max(r[1].abs());
                    if res <= opts.tol {
                        return Ok(y);
                    }
                    let m = Mat2::new(T::one() + buf[2], buf[3], buf[4], T::one() + buf[5]);
                    let step = match m.inverse() {
                        Some(inv) if m.det() > floor => inv.mul_vec(r),
                        _ => r,
                    };
                    y = [y[0] - step[0], y[1] - step[1]];
                }
                Err(res)
            })
            .collect();
        let mut out = Vec::with_capacity(points.len());
        let mut worst: Option<T> = None;
        for r in results {
            match r {
                Ok(y) => out.push(y),
                Err(res) => worst = Some(worst.map_or(res, |w: T| w.max(res))),
            }
        }
        match worst {
            None => Ok(out),
            Some(res) => Err(Error::NoConvergence {
                what: "inverse flow map",
                iterations: opts.max_iter,
                residual: res.to_f64_lossy(),
            }),
        }
    }

    /// `Y(t, x)` at every grid node `x`.
    pub fn inverse_map_grid(&self, opts: &InverseMapOptions<T>) -> Result<Vec<[T; 2]>> {
        let nodes: Vec<[T; 2]> = (0..self.grid.len()).map(|i| self.grid.point(i)).collect();
        self.inverse_map(&nodes, opts)
    }

    /// Checks the determinant and both Jacobian bounds at every node.
    pub fn invariants(&self) -> Result<FlowMapInvariants> {
        let dx = self.jacobian();
        let a = self.inverse_jacobian(InverseMethod::DirectAdjugate)?;
        let integral = self.du_linf_integral.to_f64_lossy();
        let id = Mat2::identity();
        let mut det_dev = T::zero();
        let mut inv_dev = T::zero();
        for idx in 0..self.grid.len() {
            det_dev = det_dev.max((dx.at(idx).det() - T::one()).abs());
            inv_dev = inv_dev.max((a.matrix().at(idx) - id).op_norm());
        }
        Ok(FlowMapInvariants {
            det_deviation: det_dev.to_f64_lossy(),
            jacobian_norm: dx.linf_op_norm().to_f64_lossy(),
            jacobian_bound: integral.exp(),
            inverse_deviation: inv_dev.to_f64_lossy(),
            inverse_bound: 2.0 * integral,
            du_linf_integral: integral,
        })
    }

    /// Writes `<stem>_displacement.txt`, `<stem>_jacobian_integral.txt` and
    /// `<stem>.json` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>, stem: &str) -> Result<[PathBuf; 3]> {
        let dir = dir.as_ref();
        let paths = snapshot_paths(dir, stem);
        Snapshot::Vector(self.displacement.clone()).save(&paths[0])?;
        Snapshot::Matrix(self.jacobian_integral.clone()).save(&paths[1])?;
        let meta = FlowMapMeta {
            time: self.time.to_f64_lossy(),
            du_linf_integral: self.du_linf_integral.to_f64_lossy(),
        };
        std::fs::write(&paths[2], serde_json::to_string_pretty(&meta)?)?;
        Ok(paths)
    }

    pub fn load(dir: impl AsRef<Path>, stem: &str) -> Result<Self> {
        let paths = snapshot_paths(dir.as_ref(), stem);
        let displacement = match Snapshot::load(&paths[0])? {
            Snapshot::Vector(v) => v,
            other => return Err(wrong_kind("vector", other.kind())),
        };
        let jacobian_integral = match Snapshot::load(&paths[1])? {
            Snapshot::Matrix(m) => m,
            other => return Err(wrong_kind("matrix", other.kind())),
        };
        let meta: FlowMapMeta = serde_json::from_str(&std::fs::read_to_string(&paths[2])?)?;
        Self::from_parts(
            T::lit(meta.time),
            displacement,
            jacobian_integral,
            T::lit(meta.du_linf_integral),
        )
    }
}

fn snapshot_paths(dir: &Path, stem: &str) -> [PathBuf; 3] {
    [
        dir.join(format!("{stem}_displacement.txt")),
        dir.join(format!("{stem}_jacobian_integral.txt")),
        dir.join(format!("{stem}.json")),
    ]
}

fn wrong_kind(expected: &str, found: &str) -> Error {
    Error::Snapshot {
        line: 1,
        message: format!("expected a {expected} snapshot, found {found}"),
    }
}

fn check_dt<T: Real>(dt: T) -> Result<()> {
    if dt > T::zero() && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")))
    }
}

fn sample<T: Real>(interp: &Interpolator<T>, points: &[[T; 2]]) -> Vec<[T; 2]> {
    let vals = interp.eval_many(points);
    vals[0].iter().zip(&vals[1]).map(|(&a, &b)| [a, b]).collect()
}

/// How `A = (D_yX)⁻¹` is computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[derive(Default)]
pub enum InverseMethod {
    #[default]
    DirectAdjugate,
    /// `Σ_{k=0}^{k_max} (−∫D_yu)^k`.
    NeumannSeries { k_max: usize },
}


#[derive(Clone, Debug)]
pub struct InverseJacobian<T: Real> {
    a: MatrixField<T>,
    method: InverseMethod,
}

impl<T: Real> InverseJacobian<T> {
    /// Wraps an arbitrary matrix field, e.g. an analytic inverse.
    pub fn from_matrix(a: MatrixField<T>) -> Self {
        Self {
            a,
            method: InverseMethod::DirectAdjugate,
        }
    }

    pub fn matrix(&self) -> &MatrixField<T> {
        &self.a
    }

    pub fn into_matrix(self) -> MatrixField<T> {
        self.a
    }

    pub fn method(&self) -> InverseMethod {
        self.method
    }

    pub fn grid(&self) -> &Grid<T> {
        self.a.grid()
    }
}

/// Truncation bound of the Neumann series: `r^(k_max+1) / (1 − r)`.
pub fn neumann_tail_bound(ratio: f64, k_max: usize) -> f64 {
    ratio.powi(k_max as i32 + 1) / (1.0 - ratio)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InverseMapOptions<T: Real> {
    pub tol: T,
    pub max_iter: usize,
    pub method: Interpolation,
}

impl<T: Real> Default for InverseMapOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-12),
            max_iter: 100,
            method: Interpolation::Bilinear,
        }
    }
}

/// `∇_u P = ᵀA ∇_y P`.
pub fn op_grad_u<T: Real>(p: &ScalarField<T>, a: &MatrixField<T>) -> VectorField<T> {
    a.transpose().apply(&gradient(p))
}

/// `div_u H = div_y(A H)`.
pub fn op_div_u<T: Real>(h: &VectorField<T>, a: &MatrixField<T>) -> ScalarField<T> {
    divergence(&a.apply(h))
}

/// `A : D_yH = Σ_ij A_ij ∂_i H_j`, the pointwise form of `div_u H`.
pub fn magic_contraction<T: Real>(h: &VectorField<T>, a: &MatrixField<T>) -> ScalarField<T> {
    let dh = jacobian(h);
    ScalarField::from_values(
        a.grid(),
        (0..a.grid().len())
            .map(|idx| a.at(idx).contract(&dh.at(idx).transpose()))
            .collect(),
    )
    .expect("sizes agree")
}

/// `Δ_u u = div_u ∇_u u`, componentwise.
pub fn op_laplace_u<T: Real>(u: &VectorField<T>, a: &MatrixField<T>) -> VectorField<T> {
    let c = |i: usize| op_div_u(&op_grad_u(u.component(i), a), a);
    VectorField::from_parts(c(0), c(1))
}

/// `A_t` from the series `Σ_k (k+1)(−1)^{k+1} J^k · D_yu` with `J = ∫₀ᵗ D_yu`,
/// truncated after `k_max` terms.
///
/// This coincides with the exact derivative `−A D_yu A` whenever `J` and
/// `D_yu` commute (e.g. for shear flows and at `t = 0`).
pub fn a_time_derivative<T: Real>(
    fm: &FlowMap<T>,
    du: &MatrixField<T>,
    k_max: usize,
) -> Result<MatrixField<T>> {
    if fm.du_linf_integral() >= T::one() {
        return Err(Error::SeriesDiverged {
            ratio: fm.du_linf_integral().to_f64_lossy(),
        });
    }
    fm.grid().check_same(du.grid())?;
    Ok(fm.jacobian_integral().zip_pointwise(du, |j, d| {
        // Σ_{k=0}^{k_max} (k+1)(−1)^{k+1} J^k = −(Σ_k (k+1)(−J)^k)
        let minus_j = j.scale(-T::one());
        let mut acc = Mat2::identity().scale(T::from_usize_lossy(k_max + 1));
        for k in (0..k_max).rev() {
            acc = Mat2::identity().scale(T::from_usize_lossy(k + 1)) + minus_j * acc;
        }
        (acc * d).scale(-T::one())
    }))
}

/// Exact `A_t = −A · D_yu · A` for the given inverse Jacobian.
pub fn a_time_derivative_exact<T: Real>(a: &MatrixField<T>, du: &MatrixField<T>) -> MatrixField<T> {
    a.matmul(du).matmul(a).scale(-T::one())
}

/// Residuals of the three identities relating Eulerian and Lagrangian
/// operators, each relative to the size of the quantities compared.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct IdentityResiduals {
    /// `(∇ − ∇_u)P = (Id − ᵀA)∇P`.
    pub grad: f64,
    /// `(Δ − Δ_u)u = div((Id − AᵀA)∇u)`.
    pub laplace: f64,
    /// `div_y(A H) = A : D_yH`.
    pub magic: f64,
}

impl IdentityResiduals {
    pub fn max(&self) -> f64 {
        self.grad.max(self.laplace).max(self.magic)
    }
}

pub fn identity_residuals<T: Real>(
    a: &MatrixField<T>,
    p: &ScalarField<T>,
    u: &VectorField<T>,
    h: &VectorField<T>,
) -> IdentityResiduals {
    let grid = a.grid();
    let id = MatrixField::identity(grid);

    let gp = gradient(p);
    let lhs = &gp - &op_grad_u(p, a);
    let rhs = (&id - &a.transpose()).apply(&gp);
    let grad = relative(&lhs, &rhs, gp.l2_norm());

    let lap = vector_laplacian(u);
    let lhs = &lap - &op_laplace_u(u, a);
    let m = &id - &a.matmul(&a.transpose());
    let comp = |i: usize| divergence(&m.apply(&gradient(u.component(i))));
    let rhs = VectorField::from_parts(comp(0), comp(1));
    let laplace = relative(&lhs, &rhs, lap.l2_norm());

    let div = op_div_u(h, a);
    let contraction = magic_contraction(h, a);
    let scale = div.l2_norm().max(contraction.l2_norm()).max(divergence(h).l2_norm());
    let magic = ratio((&div - &contraction).l2_norm(), scale);

    IdentityResiduals {
        grad,
        laplace,
        magic,
    }
}

fn relative<T: Real>(lhs: &VectorField<T>, rhs: &VectorField<T>, extra: T) -> f64 {
    let scale = lhs.l2_norm().max(rhs.l2_norm()).max(extra);
    ratio((lhs - rhs).l2_norm(), scale)
}

fn ratio<T: Real>(num: T, den: T) -> f64 {
    if den == T::zero() {
        num.to_f64_lossy()
    } else {
        (num / den).to_f64_lossy()
    }
}

/// `u(y) = v(X(t, y))`.
pub fn eulerian_to_lagrangian<T: Real>(
    v: &VectorField<T>,
    fm: &FlowMap<T>,
    method: Interpolation,
) -> VectorField<T> {
    compose_vector(method, v, &fm.positions())
}

/// `v(x) = u(Y(t, x))`.
pub fn lagrangian_to_eulerian<T: Real>(
    u: &VectorField<T>,
    fm: &FlowMap<T>,
    opts: &InverseMapOptions<T>,
) -> Result<VectorField<T>> {
    let y = fm.inverse_map_grid(opts)?;
    Ok(compose_vector(opts.method, u, &y))
}

/// Scalar version of [`eulerian_to_lagrangian`].
pub fn scalar_to_lagrangian<T: Real>(
    q: &ScalarField<T>,
    fm: &FlowMap<T>,
    method: Interpolation,
) -> ScalarField<T> {
    crate::interp::compose_scalar(method, q, &fm.positions())
}
