//! Right inverses of the divergence: the Fourier-multiplier Bogovskii
//! operator `B = −∇(−Δ)⁻¹div`, the twisted equation `div(A u) = div R`
//! solved by the fixed point `ξ ← B((Id − A)ξ + R)`, and the corrector
//! `φ` for compatible initial time derivatives.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{Mat2, MatrixField, VectorField};
use crate::flow_map::{a_time_derivative, FlowMap, DEFAULT_K_MAX};
use crate::scalar::Real;
use crate::spectral::{dealias_vector, divergence, gradient, gradient_part, inverse_laplacian, jacobian, tensor_divergence};

/// Largest `‖A − Id‖_{L∞}` for which the twisted solve is attempted.
pub const CONTRACTION_THRESHOLD: f64 = 0.5;

/// `w = −∇(−Δ)⁻¹ div R`: curl-free, mean-zero, `div w = div R`.
pub fn solve_divergence<T: Real>(r: &VectorField<T>) -> VectorField<T> {
    gradient_part(r)
}

/// `div(A u) = div R` for `u`, posed for the fixed-point iteration.
#[derive(Clone, Debug)]
pub struct TwistedDivProblem<T: Real> {
    pub r: VectorField<T>,
    pub a: MatrixField<T>,
    /// `‖A − Id‖_{L∞}` with the pointwise spectral norm.
    pub contraction_norm: T,
    pub contraction_threshold: T,
    /// Bound on `‖div(A u) − div R‖_{L2} / ‖div R‖_{L2}`.
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Real> TwistedDivProblem<T> {
    pub fn new(r: VectorField<T>, a: MatrixField<T>) -> Result<Self> {
        r.grid().check_same(a.grid())?;
        let id = Mat2::identity();
        let contraction_norm = (0..a.grid().len()).fold(T::zero(), |acc, i| acc.max((a.at(i) - id).op_norm()));
        Ok(Self {
            r,
            a,
            contraction_norm,
            contraction_threshold: T::lit(CONTRACTION_THRESHOLD),
            tol: T::lit(1e-10),
            max_iter: 100,
        })
    }

    pub fn with_tol(mut self, tol: T) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_threshold(mut self, threshold: T) -> Self {
        self.contraction_threshold = threshold;
        self
    }
}

#[derive(Clone, Debug)]
pub struct TwistedSolution<T: Real> {
    pub u: VectorField<T>,
    pub iterations: usize,
    /// Final relative residual of `div(A u) = div R`.
    pub residual: f64,
    /// Relative residual after each iteration.
    pub residuals: Vec<f64>,
    /// `‖ξ_{k+1} − ξ_k‖_{L2}` for each iteration.
    pub increments: Vec<f64>,
}

impl<T: Real> TwistedSolution<T> {
    /// Geometric mean of successive increment ratios over iterations
    /// `from..to` (clamped to the available history).
    pub fn contraction_ratio(&self, from: usize, to: usize) -> f64 {
        let to = to.min(self.increments.len().saturating_sub(1));
        let from = from.min(to);
        let usable: Vec<f64> = (from..to)
            .filter(|&k| self.increments[k] > 0.0 && self.increments[k + 1] > 0.0)
            .map(|k| (self.increments[k + 1] / self.increments[k]).ln())
            .collect();
        if usable.is_empty() {
            return 0.0;
        }
        (usable.iter().sum::<f64>() / usable.len() as f64).exp()
    }

    /// Largest single-step increment ratio.
    pub fn max_step_ratio(&self) -> f64 {
        self.increments
            .windows(2)
            .filter(|w| w[0] > 1e-300 && w[1] > 1e-14 * self.increments[0])
            .map(|w| w[1] / w[0])
            .fold(0.0, f64::max)
    }
}

/// Solves `div(A u) = div R` by iterating `ξ ← B((Id − A)ξ + R)` from `ξ = B R`.
pub fn solve_twisted_divergence<T: Real>(p: &TwistedDivProblem<T>) -> Result<TwistedSolution<T>> {
    if !(p.contraction_norm <= p.contraction_threshold) {
        return Err(Error::ContractionViolated {
            norm: p.contraction_norm.to_f64_lossy(),
            threshold: p.contraction_threshold.to_f64_lossy(),
        });
    }
    let grid = p.r.grid();
    let id = MatrixField::identity(grid);
    let i_minus_a = &id - &p.a;
    let div_r = divergence(&p.r);
    let scale = div_r.l2_norm();
    let relative = |u: &VectorField<T>| -> f64 {
        let res = (&divergence(&p.a.apply(u)) - &div_r).l2_norm();
        if scale == T::zero() {
            res.to_f64_lossy()
        } else {
            (res / scale).to_f64_lossy()
        }
    };

    let mut xi = solve_divergence(&p.r);
    let mut residuals = Vec::new();
    let mut increments = Vec::new();
    let mut residual = relative(&xi);
    let tol = p.tol.to_f64_lossy();
    let mut iterations = 0;
    while residual > tol && iterations < p.max_iter {
        let mut rhs = i_minus_a.apply(&xi);
        rhs += &p.r;
        let next = solve_divergence(&rhs);
        increments.push((&next - &xi).l2_norm().to_f64_lossy());
        xi = next;
        residual = relative(&xi);
        residuals.push(residual);
        iterations += 1;
    }
    if residual > tol {
        return Err(Error::NoConvergence {
            what: "twisted divergence fixed point",
            iterations,
            residual,
        });
    }
    Ok(TwistedSolution {
        u: xi,
        iterations,
        residual,
        residuals,
        increments,
    })
}

/// `φ = B[−div(A_t|₀ u₀)]` with `A_t|₀ = −Du₀`, so that `div φ = div(u₀·∇u₀)`.
pub fn compatibility_phi<T: Real>(u0: &VectorField<T>) -> Result<VectorField<T>> {
    let u0 = dealias_vector(u0);
    let at0 = a_time_derivative(&FlowMap::identity(u0.grid()), &jacobian(&u0), DEFAULT_K_MAX)?;
    let at_u0 = dealias_vector(&at0.apply(&u0));
    Ok(solve_divergence(&at_u0.scale(-T::one())))
}

/// `−∇(−Δ)⁻¹ div(div(u₀ ⊗ u₀))`, an evaluation of [`compatibility_phi`]
/// through the conservative form of the advection term.
pub fn compatibility_phi_oracle<T: Real>(u0: &VectorField<T>) -> VectorField<T> {
    let q = divergence(&tensor_divergence(u0));
    gradient(&inverse_laplacian(&q).field)
}

/// Diagnostics of one twisted solve, for reports.
#[derive(Clone, Debug, Serialize)]
pub struct TwistedSummary {
    pub contraction_norm: f64,
    pub iterations: usize,
    pub residual: f64,
    pub contraction_ratio: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::spectral::curl;
    use approx::assert_relative_eq;

    fn grid() -> Grid<f64> {
        Grid::periodic(32).unwrap()
    }

    #[test]
    fn divergence_lift_of_gradient_and_solenoidal() {
        let g = grid();
        let grad = VectorField::from_fn(&g, |x, y| [x.cos() * y.sin(), x.sin() * y.cos()]);
        let sol = VectorField::from_fn(&g, |x, y| [(2.0 * y).sin(), (x + 0.0 * y).cos()]);
        let w = solve_divergence(&(&grad + &sol));
        assert!((&w - &grad).linf_norm() < 1e-13);
        assert!(solve_divergence(&sol).linf_norm() < 1e-13);
        assert!(curl(&w).linf_norm() < 1e-12);
    }

    fn perturbed(g: &Grid<f64>, eps: f64) -> MatrixField<f64> {
        let n = MatrixField::from_fn(g, |x, y| Mat2::new(x.sin(), y.cos() * 0.5, (x + y).sin() * 0.5, -x.sin()));
        let norm = n.linf_op_norm();
        let mut a = MatrixField::identity(g);
        a.axpy(eps / norm, &n);
        a
    }

    #[test]
    fn twisted_solve_converges() {
        let g = grid();
        let a = perturbed(&g, 0.3);
        let r = VectorField::from_fn(&g, |x, y| [(x + 2.0 * y).sin(), (3.0 * x).cos() * y.sin()]);
        let p = TwistedDivProblem::new(r.clone(), a.clone()).unwrap().with_tol(1e-8).with_max_iter(40);
        assert_relative_eq!(p.contraction_norm, 0.3, epsilon = 1e-12);
        let s = solve_twisted_divergence(&p).unwrap();
        assert!(s.residual <= 1e-8 && s.iterations <= 40);
        assert!(s.max_step_ratio() <= 0.4, "{}", s.max_step_ratio());
        let res = (&divergence(&a.apply(&s.u)) - &divergence(&r)).l2_norm() / divergence(&r).l2_norm();
        assert!(res <= 1e-8);
    }

    #[test]
    fn identity_reduces_to_plain_lift() {
        let g = grid();
        let r = VectorField::from_fn(&g, |x, y| [x.sin() * y.sin(), (x - y).cos()]);
        let p = TwistedDivProblem::new(r.clone(), MatrixField::identity(&g)).unwrap();
        let s = solve_twisted_divergence(&p).unwrap();
        assert_eq!(s.iterations, 0);
        assert!((&s.u - &solve_divergence(&r)).linf_norm() == 0.0);
    }

    #[test]
    fn large_perturbation_rejected() {
        let g = grid();
        let r = VectorField::zeros(&g);
        let p = TwistedDivProblem::new(r, perturbed(&g, 0.9)).unwrap();
        assert!(matches!(
            solve_twisted_divergence(&p),
            Err(Error::ContractionViolated { .. })
        ));
    }

    #[test]
    fn phi_on_taylor_green_and_shear() {
        let g = grid();
        let tg = VectorField::from_fn(&g, |x, y| [x.sin() * y.cos(), -x.cos() * y.sin()]);
        let phi = compatibility_phi(&tg).unwrap();
        let oracle = compatibility_phi_oracle(&tg);
        assert!((&phi - &oracle).linf_norm() < 1e-12);
        // u·∇u for this field is −∇((cos 2x + cos 2y)/4)
        let exact = VectorField::from_fn(&g, |x, y| [(2.0 * x).sin() / 2.0, (2.0 * y).sin() / 2.0]);
        assert!((&phi - &exact).linf_norm() < 1e-12);
        let shear = VectorField::from_fn(&g, |_, y| [y.sin(), 0.0]);
        assert!(compatibility_phi(&shear).unwrap().linf_norm() < 1e-15);
    }
}
